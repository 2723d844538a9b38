"""Key formats: PKCS#1 RSA, SEC1 EC, CryptoAPI MSBLOB, and PVK containers.

The structural degrees of freedom these formats allow are the whole point of
the package: PKCS#1 private keys whose fields may be individually blanked
(encoded as INTEGER 0), SEC1 EC keys whose domain parameters may be a named
OID or spelled out explicitly with or without the cofactor, and the legacy
Microsoft blob/PVK containers whose loaders recompute public material. The
codecs here are strictly structural; what a library *does* when it loads
each shape is modeled in ``keyside.pathmodel``.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple, Union

from . import der
from . import ecgroup

RSA_PEM_LABEL = "RSA PRIVATE KEY"
EC_PEM_LABEL = "EC PRIVATE KEY"

OID_PRIME_FIELD = (1, 2, 840, 10045, 1, 1)

PVK_MAGIC = 0xB0B5F11E
PVK_KEYTYPE_EXCHANGE = 1
PVK_KEYTYPE_SIGNATURE = 2

_BLOB_PUBLIC = 0x06
_BLOB_PRIVATE = 0x07
_BLOB_VERSION = 0x02
_DSS_Q_BYTES = 20
_DSS_X_BYTES = 20
_DSS_SEED_BYTES = 24


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


class KeyFormatError(ValueError):
    """Base class for key-format failures."""


class BadVersion(KeyFormatError):
    """Structure version is not the one the format fixes."""


class WrongShape(KeyFormatError):
    """Element counts or types do not match the format."""


class UnknownNamedCurve(KeyFormatError):
    """OID or explicit parameters do not resolve against the registry."""


class ScalarOutOfRange(KeyFormatError):
    """EC secret scalar is zero or not below the (known) group order."""


class BadMagic(KeyFormatError):
    """MSBLOB header fields are inconsistent or unknown."""


class LengthMismatch(KeyFormatError):
    """Body size disagrees with the header's declared bit length."""


class UnsupportedAlgorithm(KeyFormatError):
    """Well-formed magic for an algorithm this package does not model."""


class BadPvkMagic(KeyFormatError):
    """PVK header magic or bookkeeping fields are wrong."""


class PasswordRequired(KeyFormatError):
    """PVK body is encrypted and no password was supplied."""


class WrongPassword(KeyFormatError):
    """Neither the strong nor the export-weakened key decrypts the body."""


# ---------------------------------------------------------------------------
# key material types
# ---------------------------------------------------------------------------

RSA_FIELDS = ("n", "e", "p", "q", "d", "dp", "dq", "iq")


@dataclass(frozen=True)
class RsaKeyMaterial:
    """RSA parameters with per-field presence (None = absent).

    Mask convention: bit 7 is n, descending through e, p, q, d, dp, dq down
    to bit 0 for iq; 0xFF means every field is present.
    """

    n: Optional[int] = None
    e: Optional[int] = None
    p: Optional[int] = None
    q: Optional[int] = None
    d: Optional[int] = None
    dp: Optional[int] = None
    dq: Optional[int] = None
    iq: Optional[int] = None

    def __post_init__(self):
        for name in RSA_FIELDS:
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"present field {name} must be positive")

    def present_mask(self) -> int:
        mask = 0
        for i, name in enumerate(RSA_FIELDS):
            if getattr(self, name) is not None:
                mask |= 1 << (7 - i)
        return mask

    def project(self, mask: int) -> "RsaKeyMaterial":
        """Keep only the fields selected by the mask."""
        if not 0 <= mask <= 0xFF:
            raise ValueError("mask must fit eight bits")
        kwargs = {}
        for i, name in enumerate(RSA_FIELDS):
            keep = bool(mask & (1 << (7 - i)))
            kwargs[name] = getattr(self, name) if keep else None
        return RsaKeyMaterial(**kwargs)

    def present_fields(self) -> Tuple[str, ...]:
        return tuple(name for name in RSA_FIELDS if getattr(self, name) is not None)


@dataclass(frozen=True)
class DsaKeyMaterial:
    """DSA parameters; x (secret) and y (public) are each optional."""

    p: int
    q: int
    g: int
    x: Optional[int] = None
    y: Optional[int] = None


@dataclass(frozen=True)
class NamedDomain:
    """EC domain given by OID reference."""

    oid: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "oid", tuple(self.oid))


@dataclass(frozen=True)
class ExplicitDomain:
    """EC domain spelled out: prime field, curve, base point, order.

    ``cofactor`` distinguishes three states the wire can express: a positive
    value, an explicit zero (present but useless), and None (absent).
    """

    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int
    cofactor: Optional[int] = None


EcDomain = Union[NamedDomain, ExplicitDomain]


@dataclass(frozen=True)
class EcPrivateKey:
    """SEC1 private key: scalar, optional domain, optional public point."""

    scalar: int
    domain: Optional[EcDomain] = None
    public: Optional[Tuple[int, int]] = None


@dataclass(frozen=True)
class MsBlobHeader:
    blob_type: int
    version: int
    reserved: int
    magic: bytes
    bitlen: int


@dataclass(frozen=True)
class PvkFile:
    """Parsed PVK container; ``blob`` is still encrypted when flagged."""

    key_type: int
    encrypted: bool
    salt: bytes
    blob: bytes


def domain_curve(domain: EcDomain) -> ecgroup.Curve:
    """Resolve a domain to arithmetic-ready curve parameters."""
    if isinstance(domain, NamedDomain):
        curve = ecgroup.curve_by_oid(domain.oid)
        if curve is None:
            raise UnknownNamedCurve(f"OID {'.'.join(map(str, domain.oid))} is not registered")
        return curve
    return ecgroup.Curve(
        name="explicit",
        p=domain.p, a=domain.a, b=domain.b,
        gx=domain.gx, gy=domain.gy, n=domain.n,
        cofactor=domain.cofactor or 0,
    )


def domain_for_curve(curve: ecgroup.Curve, mode: "Sec1Mode") -> EcDomain:
    """Build the domain object a key on this curve would carry."""
    if mode is Sec1Mode.NAMED_CURVE:
        if curve.oid is None:
            raise UnknownNamedCurve(f"curve {curve.name} has no OID")
        return NamedDomain(curve.oid)
    cofactor = curve.cofactor if mode is Sec1Mode.EXPLICIT_WITH_COFACTOR else None
    return ExplicitDomain(curve.p, curve.a, curve.b, curve.gx, curve.gy,
                          curve.n, cofactor)


# ---------------------------------------------------------------------------
# PKCS#1 RSA private keys
# ---------------------------------------------------------------------------


def rsa_pkcs1_encode(material: RsaKeyMaterial) -> bytes:
    """RSAPrivateKey ::= SEQUENCE { version=0, n, e, d, p, q, dp, dq, iq }.

    Absent fields encode as INTEGER 0 (no RSA parameter can be zero, so the
    convention is lossless).
    """
    wire_order = ("n", "e", "d", "p", "q", "dp", "dq", "iq")
    children = [der.Integer(0)]
    for name in wire_order:
        value = getattr(material, name)
        children.append(der.Integer(value if value is not None else 0))
    return der.der_encode(der.Sequence(tuple(children)))


def rsa_pkcs1_decode(data: bytes) -> RsaKeyMaterial:
    node = der.der_decode(data)
    if not isinstance(node, der.Sequence):
        raise WrongShape("RSAPrivateKey must be a SEQUENCE")
    if len(node.children) != 9:
        raise WrongShape(f"RSAPrivateKey needs 9 fields, found {len(node.children)}")
    values = []
    for child in node.children:
        if not isinstance(child, der.Integer):
            raise WrongShape("RSAPrivateKey fields must be INTEGERs")
        if child.value < 0:
            raise WrongShape("RSA parameters cannot be negative")
        values.append(child.value)
    if values[0] != 0:
        raise BadVersion(f"RSAPrivateKey version must be 0, found {values[0]}")
    n, e, d_, p, q, dp, dq, iq = values[1:]
    return RsaKeyMaterial(
        n=n or None, e=e or None, p=p or None, q=q or None,
        d=d_ or None, dp=dp or None, dq=dq or None, iq=iq or None,
    )


# ---------------------------------------------------------------------------
# SEC1 ECPrivateKey
# ---------------------------------------------------------------------------


class Sec1Mode(Enum):
    """How the domain parameters ride along with an EC private key."""

    NAMED_CURVE = "named"
    EXPLICIT_WITH_COFACTOR = "explicit"
    EXPLICIT_NO_COFACTOR = "explicit-no-cofactor"


def _field_bytes(value: int, width: int) -> bytes:
    return value.to_bytes(width, "big")


def _point_octets(x: int, y: int, width: int) -> bytes:
    return b"\x04" + _field_bytes(x, width) + _field_bytes(y, width)


def _explicit_domain_node(dom: ExplicitDomain, include_cofactor: bool) -> der.Sequence:
    width = (dom.p.bit_length() + 7) // 8
    children: List[der.DerNode] = [
        der.Integer(1),
        der.Sequence((der.Oid(OID_PRIME_FIELD), der.Integer(dom.p))),
        der.Sequence((
            der.OctetString(_field_bytes(dom.a % dom.p, width)),
            der.OctetString(_field_bytes(dom.b % dom.p, width)),
        )),
        der.OctetString(_point_octets(dom.gx, dom.gy, width)),
        der.Integer(dom.n),
    ]
    if include_cofactor:
        if dom.cofactor is None:
            raise ValueError("domain carries no cofactor to encode")
        children.append(der.Integer(dom.cofactor))
    return der.Sequence(tuple(children))


def _resolve_for_encode(key: EcPrivateKey, mode: Sec1Mode) -> Tuple[EcDomain, int, int]:
    """Return (domain to encode, order bits, field width) for the mode."""
    if key.domain is None:
        raise ValueError("key carries no domain parameters to encode")
    dom = key.domain
    if mode is Sec1Mode.NAMED_CURVE:
        if isinstance(dom, NamedDomain):
            curve = ecgroup.curve_by_oid(dom.oid)
            if curve is None:
                raise UnknownNamedCurve("cannot name an unregistered OID")
        else:
            curve = ecgroup.match_explicit_params(dom.p, dom.a, dom.b,
                                                  dom.gx, dom.gy, dom.n)
            if curve is None or curve.oid is None:
                raise UnknownNamedCurve("explicit parameters match no registered curve")
        return NamedDomain(curve.oid), curve.n.bit_length(), (curve.p.bit_length() + 7) // 8
    # explicit modes: expand a named domain through the registry
    if isinstance(dom, NamedDomain):
        curve = ecgroup.curve_by_oid(dom.oid)
        if curve is None:
            raise UnknownNamedCurve("cannot expand an unregistered OID")
        dom = ExplicitDomain(curve.p, curve.a, curve.b, curve.gx, curve.gy,
                             curve.n, curve.cofactor)
    return dom, dom.n.bit_length(), (dom.p.bit_length() + 7) // 8


def ec_sec1_encode(key: EcPrivateKey, mode: Sec1Mode) -> bytes:
    """ECPrivateKey ::= SEQUENCE { version=1, privateKey, [0] params, [1] pub }."""
    dom, order_bits, width = _resolve_for_encode(key, mode)
    children: List[der.DerNode] = [
        der.Integer(1),
        der.OctetString(_field_bytes(key.scalar, (order_bits + 7) // 8)),
    ]
    if isinstance(dom, NamedDomain):
        params_node: der.DerNode = der.Oid(dom.oid)
    else:
        params_node = _explicit_domain_node(
            dom, include_cofactor=mode is Sec1Mode.EXPLICIT_WITH_COFACTOR)
    children.append(der.ContextTagged(0, True, params_node))
    if key.public is not None:
        children.append(der.ContextTagged(
            1, True, der.BitString(_point_octets(*key.public, width))))
    return der.der_encode(der.Sequence(tuple(children)))


def _parse_point(octets: bytes) -> Tuple[int, int]:
    if len(octets) < 3 or octets[0] != 0x04 or len(octets) % 2 == 0:
        raise WrongShape("base point must be an uncompressed (0x04) encoding")
    width = (len(octets) - 1) // 2
    return (int.from_bytes(octets[1:1 + width], "big"),
            int.from_bytes(octets[1 + width:], "big"))


def _parse_explicit_domain(node: der.Sequence) -> ExplicitDomain:
    children = list(node.children)
    if len(children) not in (5, 6):
        raise WrongShape("SpecifiedECDomain needs 5 or 6 fields")
    version, field_id, curve_node, base, order = children[:5]
    if not isinstance(version, der.Integer):
        raise WrongShape("domain version must be an INTEGER")
    if version.value != 1:
        raise BadVersion(f"SpecifiedECDomain version must be 1, found {version.value}")
    if (not isinstance(field_id, der.Sequence) or len(field_id.children) != 2
            or not isinstance(field_id.children[0], der.Oid)
            or not isinstance(field_id.children[1], der.Integer)):
        raise WrongShape("fieldID must be SEQUENCE { OID, INTEGER }")
    if field_id.children[0].arcs != OID_PRIME_FIELD:
        raise WrongShape("only prime fields are supported")
    p = field_id.children[1].value
    if (not isinstance(curve_node, der.Sequence) or len(curve_node.children) < 2
            or not isinstance(curve_node.children[0], der.OctetString)
            or not isinstance(curve_node.children[1], der.OctetString)):
        raise WrongShape("curve must be SEQUENCE { a OCTET STRING, b OCTET STRING }")
    a = int.from_bytes(curve_node.children[0].value, "big")
    b = int.from_bytes(curve_node.children[1].value, "big")
    if not isinstance(base, der.OctetString):
        raise WrongShape("base point must be an OCTET STRING")
    gx, gy = _parse_point(base.value)
    if not isinstance(order, der.Integer):
        raise WrongShape("order must be an INTEGER")
    cofactor = None
    if len(children) == 6:
        if not isinstance(children[5], der.Integer):
            raise WrongShape("cofactor must be an INTEGER")
        cofactor = children[5].value
        if cofactor < 0:
            raise WrongShape("cofactor cannot be negative")
    return ExplicitDomain(p, a, b, gx, gy, order.value, cofactor)


def ec_sec1_decode(data: bytes) -> EcPrivateKey:
    node = der.der_decode(data)
    if not isinstance(node, der.Sequence) or len(node.children) < 2:
        raise WrongShape("ECPrivateKey must be a SEQUENCE with version and key")
    children = list(node.children)
    version, priv = children[0], children[1]
    if not isinstance(version, der.Integer):
        raise WrongShape("version must be an INTEGER")
    if version.value != 1:
        raise BadVersion(f"ECPrivateKey version must be 1, found {version.value}")
    if not isinstance(priv, der.OctetString):
        raise WrongShape("privateKey must be an OCTET STRING")
    scalar = int.from_bytes(priv.value, "big")
    domain: Optional[EcDomain] = None
    public: Optional[Tuple[int, int]] = None
    for extra in children[2:]:
        if not isinstance(extra, der.ContextTagged) or not extra.explicit:
            raise WrongShape("trailing fields must be explicit [0]/[1] wrappers")
        if extra.tag == 0:
            if domain is not None:
                raise WrongShape("duplicate domain parameters")
            if isinstance(extra.child, der.Oid):
                domain = NamedDomain(extra.child.arcs)
            elif isinstance(extra.child, der.Sequence):
                domain = _parse_explicit_domain(extra.child)
            else:
                raise WrongShape("domain must be an OID or a SpecifiedECDomain")
        elif extra.tag == 1:
            if public is not None:
                raise WrongShape("duplicate public key")
            if not isinstance(extra.child, der.BitString) or extra.child.unused_bits:
                raise WrongShape("public key must be a whole-byte BIT STRING")
            public = _parse_point(extra.child.value)
        else:
            raise WrongShape(f"unexpected context tag [{extra.tag}]")
    order: Optional[int] = None
    if isinstance(domain, ExplicitDomain):
        order = domain.n
    elif isinstance(domain, NamedDomain):
        curve = ecgroup.curve_by_oid(domain.oid)
        if curve is not None:
            order = curve.n
    if scalar == 0:
        raise ScalarOutOfRange("secret scalar is zero")
    if order is not None and not scalar < order:
        raise ScalarOutOfRange("secret scalar reaches the group order")
    return EcPrivateKey(scalar, domain, public)


# ---------------------------------------------------------------------------
# MSBLOB (CryptoAPI base-provider key blobs)
# ---------------------------------------------------------------------------


def _header_bytes(private: bool, magic: bytes, bitlen: int) -> bytes:
    blob_type = _BLOB_PRIVATE if private else _BLOB_PUBLIC
    return (bytes([blob_type, _BLOB_VERSION]) + (0).to_bytes(2, "little")
            + magic + bitlen.to_bytes(4, "little"))


def _le_bytes(value: int, width: int, what: str) -> bytes:
    try:
        return value.to_bytes(width, "little")
    except OverflowError:
        raise ValueError(f"{what} does not fit {width} bytes") from None


def _rsa_widths(bitlen: int) -> Tuple[int, int]:
    return (bitlen + 7) // 8, (bitlen + 15) // 16


def msblob_encode(material: Union[RsaKeyMaterial, DsaKeyMaterial],
                  private: bool) -> bytes:
    """Serialize to the little-endian CryptoAPI blob layout."""
    if isinstance(material, RsaKeyMaterial):
        return _msblob_encode_rsa(material, private)
    if isinstance(material, DsaKeyMaterial):
        return _msblob_encode_dsa(material, private)
    raise TypeError("material must be RSA or DSA key material")


def _msblob_encode_rsa(material: RsaKeyMaterial, private: bool) -> bytes:
    needed = RSA_FIELDS if private else ("n", "e")
    missing = [f for f in needed if getattr(material, f) is None]
    if missing:
        raise ValueError(f"cannot encode blob, missing fields: {missing}")
    bitlen = 8 * ((material.n.bit_length() + 7) // 8)
    full, half = _rsa_widths(bitlen)
    out = bytearray(_header_bytes(private, b"RSA2" if private else b"RSA1", bitlen))
    out += _le_bytes(material.e, 4, "public exponent")
    out += _le_bytes(material.n, full, "modulus")
    if private:
        for name, width in (("p", half), ("q", half), ("dp", half),
                            ("dq", half), ("iq", half), ("d", full)):
            out += _le_bytes(getattr(material, name), width, name)
    return bytes(out)


def _msblob_encode_dsa(material: DsaKeyMaterial, private: bool) -> bytes:
    secret = material.x if private else material.y
    if secret is None:
        raise ValueError("cannot encode blob, missing x (private) or y (public)")
    bitlen = 8 * ((material.p.bit_length() + 7) // 8)
    full = bitlen // 8
    out = bytearray(_header_bytes(private, b"DSS2" if private else b"DSS1", bitlen))
    out += _le_bytes(material.p, full, "p")
    out += _le_bytes(material.q, _DSS_Q_BYTES, "q")
    out += _le_bytes(material.g, full, "g")
    if private:
        out += _le_bytes(material.x, _DSS_X_BYTES, "x")
    else:
        out += _le_bytes(material.y, full, "y")
    out += b"\xff" * _DSS_SEED_BYTES  # DSSSEED "no seed available" marker
    return bytes(out)


def msblob_header(data: bytes) -> MsBlobHeader:
    """Parse and validate the 12-byte blob header."""
    if len(data) < 12:
        raise LengthMismatch("blob shorter than its 12-byte header")
    blob_type, version = data[0], data[1]
    reserved = int.from_bytes(data[2:4], "little")
    magic = data[4:8]
    bitlen = int.from_bytes(data[8:12], "little")
    alg, digit = magic[:3], magic[3:]
    if alg not in (b"RSA", b"DSS"):
        if alg.isalpha() and digit in (b"1", b"2"):
            raise UnsupportedAlgorithm(f"algorithm {alg!r} is not modeled")
        raise BadMagic(f"unknown magic {magic!r}")
    if digit not in (b"1", b"2"):
        raise BadMagic(f"magic {magic!r} has no public/private digit")
    if blob_type not in (_BLOB_PUBLIC, _BLOB_PRIVATE):
        raise BadMagic(f"unknown blob type 0x{blob_type:02x}")
    expected_digit = b"2" if blob_type == _BLOB_PRIVATE else b"1"
    if digit != expected_digit:
        raise BadMagic(f"magic {magic!r} contradicts blob type 0x{blob_type:02x}")
    if version != _BLOB_VERSION:
        raise BadVersion(f"blob version must be 2, found {version}")
    if reserved != 0:
        raise BadMagic("reserved header field must be zero")
    return MsBlobHeader(blob_type, version, reserved, magic, bitlen)


def msblob_decode(data: bytes) -> Union[RsaKeyMaterial, DsaKeyMaterial]:
    header = msblob_header(data)
    body = data[12:]
    if header.magic[:3] == b"RSA":
        return _msblob_decode_rsa(header, body)
    return _msblob_decode_dsa(header, body)


def _take(body: bytes, pos: int, width: int) -> Tuple[int, int]:
    return int.from_bytes(body[pos:pos + width], "little"), pos + width


def _msblob_decode_rsa(header: MsBlobHeader, body: bytes) -> RsaKeyMaterial:
    full, half = _rsa_widths(header.bitlen)
    private = header.magic == b"RSA2"
    expected = 4 + full + (5 * half + full if private else 0)
    if len(body) != expected:
        raise LengthMismatch(
            f"RSA blob body must be {expected} bytes for {header.bitlen} bits, "
            f"found {len(body)}")
    pos = 0
    e, pos = _take(body, pos, 4)
    n, pos = _take(body, pos, full)
    if not private:
        return RsaKeyMaterial(n=n or None, e=e or None)
    p, pos = _take(body, pos, half)
    q, pos = _take(body, pos, half)
    dp, pos = _take(body, pos, half)
    dq, pos = _take(body, pos, half)
    iq, pos = _take(body, pos, half)
    d_, pos = _take(body, pos, full)
    return RsaKeyMaterial(n=n or None, e=e or None, p=p or None, q=q or None,
                          d=d_ or None, dp=dp or None, dq=dq or None, iq=iq or None)


def _msblob_decode_dsa(header: MsBlobHeader, body: bytes) -> DsaKeyMaterial:
    full = (header.bitlen + 7) // 8
    private = header.magic == b"DSS2"
    expected = full + _DSS_Q_BYTES + full + \
        (_DSS_X_BYTES if private else full) + _DSS_SEED_BYTES
    if len(body) != expected:
        raise LengthMismatch(
            f"DSS blob body must be {expected} bytes for {header.bitlen} bits, "
            f"found {len(body)}")
    pos = 0
    p, pos = _take(body, pos, full)
    q, pos = _take(body, pos, _DSS_Q_BYTES)
    g, pos = _take(body, pos, full)
    if private:
        x, pos = _take(body, pos, _DSS_X_BYTES)
        return DsaKeyMaterial(p, q, g, x=x, y=None)
    y, pos = _take(body, pos, full)
    return DsaKeyMaterial(p, q, g, x=None, y=y)


# ---------------------------------------------------------------------------
# PVK containers
# ---------------------------------------------------------------------------


def _rc4(key: bytes, data: bytes) -> bytes:
    state = list(range(256))
    j = 0
    for i in range(256):
        j = (j + state[i] + key[i % len(key)]) & 0xFF
        state[i], state[j] = state[j], state[i]
    out = bytearray()
    i = j = 0
    for byte in data:
        i = (i + 1) & 0xFF
        j = (j + state[i]) & 0xFF
        state[i], state[j] = state[j], state[i]
        out.append(byte ^ state[(state[i] + state[j]) & 0xFF])
    return bytes(out)


def _pvk_strong_key(salt: bytes, password: str) -> bytes:
    return hashlib.sha1(salt + password.encode("utf-8")).digest()[:16]


def _pvk_weak_key(strong: bytes) -> bytes:
    # export-grade weakening: keep 40 bits, zero the rest
    return strong[:5] + b"\x00" * 11


def _plausible_blob(blob: bytes) -> bool:
    try:
        msblob_header(blob)
    except KeyFormatError:
        return False
    return True


def pvk_encode(blob: bytes, password: Optional[str] = None, *,
               weak: bool = False,
               key_type: Optional[int] = None,
               rng: Optional[random.Random] = None) -> bytes:
    """Wrap a key blob in a PVK container, RC4-encrypting when a password is
    given. ``weak`` selects the export-grade 40-bit key derivation."""
    if key_type is None:
        magic = blob[4:8]
        key_type = PVK_KEYTYPE_EXCHANGE if magic[:3] == b"RSA" else PVK_KEYTYPE_SIGNATURE
    if password is None:
        salt, payload, encrypted = b"", blob, 0
    else:
        salt = rng.randbytes(16) if rng is not None else os.urandom(16)
        key = _pvk_strong_key(salt, password)
        if weak:
            key = _pvk_weak_key(key)
        payload, encrypted = _rc4(key, blob), 1
    header = b"".join(value.to_bytes(4, "little") for value in (
        PVK_MAGIC, 0, key_type, encrypted, len(salt), len(payload)))
    return header + salt + payload


def pvk_file_info(data: bytes) -> PvkFile:
    """Parse the PVK header without decrypting."""
    if len(data) < 24:
        raise BadPvkMagic("PVK file shorter than its 24-byte header")
    magic, reserved, key_type, encrypted, salt_len, key_len = (
        int.from_bytes(data[4 * i:4 * i + 4], "little") for i in range(6))
    if magic != PVK_MAGIC:
        raise BadPvkMagic(f"bad PVK magic 0x{magic:08x}")
    if reserved != 0:
        raise BadPvkMagic("reserved PVK field must be zero")
    if encrypted not in (0, 1) or (encrypted == 0) != (salt_len == 0):
        raise BadPvkMagic("encryption flag and salt length disagree")
    if len(data) != 24 + salt_len + key_len:
        raise LengthMismatch(
            f"PVK declares {salt_len}+{key_len} payload bytes, "
            f"file carries {len(data) - 24}")
    salt = data[24:24 + salt_len]
    blob = data[24 + salt_len:]
    return PvkFile(key_type, bool(encrypted), salt, blob)


def pvk_decode(data: bytes, password: Optional[str] = None) -> bytes:
    """Recover the inner key blob, trying the strong then the export-weak
    key derivation, validating each candidate by its blob header."""
    info = pvk_file_info(data)
    if not info.encrypted:
        return info.blob
    if password is None:
        raise PasswordRequired("PVK body is encrypted")
    strong = _pvk_strong_key(info.salt, password)
    for key in (strong, _pvk_weak_key(strong)):
        candidate = _rc4(key, info.blob)
        if _plausible_blob(candidate):
            return candidate
    raise WrongPassword("neither strong nor export-weak derivation decrypts")
