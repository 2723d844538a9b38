"""Strict DER codec and PEM armor.

Implements the subset of X.690 distinguished encoding rules needed by the key
formats in this package: INTEGER, BOOLEAN, NULL, OCTET STRING, BIT STRING,
OBJECT IDENTIFIER, SEQUENCE, and context-tagged wrappers. The decoder is
strict by construction: every BER freedom that DER forbids (indefinite
lengths, non-minimal lengths, padded integers, ragged booleans) raises a
typed error carrying the offending byte offset, so a byte string either
round-trips exactly or refuses to parse. PEM armor follows RFC 7468
(64-column base64 between BEGIN/END lines).
"""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass
from typing import Optional, Tuple, Union

# Maximum nesting depth accepted by both encoder and decoder. Key formats in
# this package nest four or five levels; 32 bounds recursion on hostile input.
MAX_NESTING = 32

_TAG_BOOLEAN = 0x01
_TAG_INTEGER = 0x02
_TAG_BITSTRING = 0x03
_TAG_OCTETSTRING = 0x04
_TAG_NULL = 0x05
_TAG_OID = 0x06
_TAG_SEQUENCE = 0x30
_CLASS_CONTEXT = 0x80
_FLAG_CONSTRUCTED = 0x20


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

class DerError(ValueError):
    """Base class for DER decode failures; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class Truncated(DerError):
    """Input ended before a header or content was complete."""


class TrailingGarbage(DerError):
    """Bytes remain after the outermost element."""


class NonMinimalLength(DerError):
    """Length octets are not the shortest definite form (or are indefinite)."""


class NonMinimalInteger(DerError):
    """Integer content carries a redundant leading 0x00 or 0xFF octet."""


class UnsupportedTag(DerError):
    """Tag octet outside the supported universal/context subset."""


class InvalidContent(DerError):
    """Content octets violate DER for an otherwise supported tag."""


class NestingTooDeep(DerError):
    """Structure nests beyond MAX_NESTING levels."""


class PemError(ValueError):
    """Base class for PEM armor failures."""


class MissingArmor(PemError):
    """No BEGIN/END armor lines found."""


class Base64Error(PemError):
    """Armored body is not valid base64."""


class LabelMismatch(PemError):
    """BEGIN and END labels differ, or the label is not the expected one."""


# ---------------------------------------------------------------------------
# node types
# ---------------------------------------------------------------------------

class DerNode:
    """Base class for decoded DER values."""

    __slots__ = ()


@dataclass(frozen=True)
class Integer(DerNode):
    value: int


@dataclass(frozen=True)
class Boolean(DerNode):
    value: bool


@dataclass(frozen=True)
class Null(DerNode):
    pass


@dataclass(frozen=True)
class OctetString(DerNode):
    value: bytes


@dataclass(frozen=True)
class BitString(DerNode):
    """Bit string as content bytes plus a count of unused trailing bits."""

    value: bytes
    unused_bits: int = 0

    def __post_init__(self):
        if not 0 <= self.unused_bits <= 7:
            raise ValueError("unused_bits must be in 0..7")
        if self.unused_bits and not self.value:
            raise ValueError("empty bit string cannot have unused bits")
        if self.unused_bits and self.value[-1] & ((1 << self.unused_bits) - 1):
            raise ValueError("unused trailing bits must be zero")


@dataclass(frozen=True)
class Oid(DerNode):
    arcs: Tuple[int, ...]

    def __post_init__(self):
        arcs = tuple(int(a) for a in self.arcs)
        object.__setattr__(self, "arcs", arcs)
        if len(arcs) < 2:
            raise ValueError("OID needs at least two arcs")
        if any(a < 0 for a in arcs):
            raise ValueError("OID arcs must be non-negative")
        if arcs[0] > 2:
            raise ValueError("first OID arc must be 0, 1 or 2")
        if arcs[0] < 2 and arcs[1] >= 40:
            raise ValueError("second OID arc must be below 40 when first is 0 or 1")

    @classmethod
    def from_text(cls, dotted: str) -> "Oid":
        return cls(tuple(int(part) for part in dotted.split(".")))

    @property
    def text(self) -> str:
        return ".".join(str(a) for a in self.arcs)


@dataclass(frozen=True)
class Sequence(DerNode):
    children: Tuple[DerNode, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class ContextTagged(DerNode):
    """Context-class wrapper [tag].

    ``explicit=True`` wraps exactly one encoded child element (constructed
    form on the wire). ``explicit=False`` replaces the child's own tag, so
    only raw-content children (OctetString) are representable; this is all
    the key formats here need.
    """

    tag: int
    explicit: bool
    child: DerNode

    def __post_init__(self):
        if not 0 <= self.tag <= 30:
            raise ValueError("context tag must fit the low-tag-number form (0..30)")
        if not self.explicit and not isinstance(self.child, OctetString):
            raise ValueError("implicit tagging is supported for OctetString children only")


@dataclass(frozen=True)
class PemBlock:
    """One PEM armor block: the label and the decoded DER payload."""

    label: str
    der: bytes


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

def _encode_length(n: int) -> bytes:
    if n < 0x80:
        return bytes([n])
    body = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return bytes([0x80 | len(body)]) + body


def _integer_content(value: int) -> bytes:
    """Minimal two's-complement content octets."""
    size = max(1, (abs(value).bit_length() + 8) // 8 + 1)
    raw = value.to_bytes(size, "big", signed=True)
    while len(raw) > 1 and (
        (raw[0] == 0x00 and raw[1] < 0x80) or (raw[0] == 0xFF and raw[1] >= 0x80)
    ):
        raw = raw[1:]
    return raw


def _oid_content(arcs: Tuple[int, ...]) -> bytes:
    out = bytearray()
    subids = [arcs[0] * 40 + arcs[1]] + list(arcs[2:])
    for sub in subids:
        chunk = [sub & 0x7F]
        sub >>= 7
        while sub:
            chunk.append(0x80 | (sub & 0x7F))
            sub >>= 7
        out.extend(reversed(chunk))
    return bytes(out)


def _tlv(tag: int, content: bytes) -> bytes:
    return bytes([tag]) + _encode_length(len(content)) + content


def der_encode(node: DerNode) -> bytes:
    """Encode a node tree to DER bytes."""
    return _encode_node(node, 0)


def _encode_node(node: DerNode, depth: int) -> bytes:
    if depth > MAX_NESTING:
        raise NestingTooDeep("structure nests too deeply to encode", 0)
    if isinstance(node, Integer):
        return _tlv(_TAG_INTEGER, _integer_content(node.value))
    if isinstance(node, Boolean):
        return _tlv(_TAG_BOOLEAN, b"\xff" if node.value else b"\x00")
    if isinstance(node, Null):
        return _tlv(_TAG_NULL, b"")
    if isinstance(node, OctetString):
        return _tlv(_TAG_OCTETSTRING, node.value)
    if isinstance(node, BitString):
        return _tlv(_TAG_BITSTRING, bytes([node.unused_bits]) + node.value)
    if isinstance(node, Oid):
        return _tlv(_TAG_OID, _oid_content(node.arcs))
    if isinstance(node, Sequence):
        content = b"".join(_encode_node(c, depth + 1) for c in node.children)
        return _tlv(_TAG_SEQUENCE, content)
    if isinstance(node, ContextTagged):
        if node.explicit:
            tag = _CLASS_CONTEXT | _FLAG_CONSTRUCTED | node.tag
            return _tlv(tag, _encode_node(node.child, depth + 1))
        tag = _CLASS_CONTEXT | node.tag
        assert isinstance(node.child, OctetString)
        return _tlv(tag, node.child.value)
    raise TypeError(f"not a DerNode: {node!r}")


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

def der_decode(data: bytes) -> DerNode:
    """Decode exactly one DER element spanning the whole input."""
    node, end = _decode_node(data, 0, len(data), 0)
    if end != len(data):
        raise TrailingGarbage("data continues after the outermost element", end)
    return node


def _read_header(data: bytes, off: int, limit: int) -> Tuple[int, int, int]:
    """Parse tag and length; return (tag, content_start, content_length)."""
    if off >= limit:
        raise Truncated("expected a tag octet", off)
    tag = data[off]
    if tag & 0x1F == 0x1F:
        raise UnsupportedTag("high-tag-number form is not supported", off)
    pos = off + 1
    if pos >= limit:
        raise Truncated("expected a length octet", pos)
    first = data[pos]
    pos += 1
    if first < 0x80:
        length = first
    elif first == 0x80:
        raise NonMinimalLength("indefinite length is forbidden in DER", pos - 1)
    else:
        count = first & 0x7F
        if pos + count > limit:
            raise Truncated("length octets run past the input", pos)
        body = data[pos:pos + count]
        if body[0] == 0:
            raise NonMinimalLength("length has a leading zero octet", pos)
        length = int.from_bytes(body, "big")
        if length < 0x80:
            raise NonMinimalLength("long-form length used for a short value", pos)
        pos += count
    if pos + length > limit:
        raise Truncated(f"content of {length} bytes runs past the input", off)
    return tag, pos, length


def _decode_node(data: bytes, off: int, limit: int, depth: int) -> Tuple[DerNode, int]:
    if depth > MAX_NESTING:
        raise NestingTooDeep("structure nests too deeply", off)
    tag, start, length = _read_header(data, off, limit)
    end = start + length
    content = data[start:end]

    if tag == _TAG_INTEGER:
        if length == 0:
            raise InvalidContent("integer content is empty", start)
        if length >= 2 and (
            (content[0] == 0x00 and content[1] < 0x80)
            or (content[0] == 0xFF and content[1] >= 0x80)
        ):
            raise NonMinimalInteger("integer has a redundant leading octet", start)
        return Integer(int.from_bytes(content, "big", signed=True)), end

    if tag == _TAG_BOOLEAN:
        if length != 1:
            raise InvalidContent("boolean content must be one octet", start)
        if content[0] == 0x00:
            return Boolean(False), end
        if content[0] == 0xFF:
            return Boolean(True), end
        raise InvalidContent("DER boolean must be 0x00 or 0xFF", start)

    if tag == _TAG_NULL:
        if length != 0:
            raise InvalidContent("null content must be empty", start)
        return Null(), end

    if tag == _TAG_OCTETSTRING:
        return OctetString(content), end

    if tag == _TAG_BITSTRING:
        if length == 0:
            raise InvalidContent("bit string needs an unused-bits octet", start)
        unused = content[0]
        if unused > 7:
            raise InvalidContent("unused-bits octet exceeds 7", start)
        body = content[1:]
        if unused and not body:
            raise InvalidContent("empty bit string cannot have unused bits", start)
        if unused and body[-1] & ((1 << unused) - 1):
            raise InvalidContent("unused trailing bits must be zero", end - 1)
        return BitString(body, unused), end

    if tag == _TAG_OID:
        return _decode_oid(content, start), end

    if tag == _TAG_SEQUENCE:
        children = []
        pos = start
        while pos < end:
            child, pos = _decode_node(data, pos, end, depth + 1)
            children.append(child)
        return Sequence(tuple(children)), end

    if tag & 0xC0 == _CLASS_CONTEXT:
        number = tag & 0x1F
        if tag & _FLAG_CONSTRUCTED:
            child, pos = _decode_node(data, start, end, depth + 1)
            if pos != end:
                raise InvalidContent("explicit tag must wrap exactly one element", pos)
            return ContextTagged(number, True, child), end
        return ContextTagged(number, False, OctetString(content)), end

    raise UnsupportedTag(f"tag 0x{tag:02x} is not supported", off)


def _decode_oid(content: bytes, start: int) -> Oid:
    if not content:
        raise InvalidContent("OID content is empty", start)
    subids = []
    value = 0
    pending = False
    for i, byte in enumerate(content):
        if not pending and byte == 0x80:
            raise InvalidContent("OID subidentifier has a redundant leading octet", start + i)
        value = (value << 7) | (byte & 0x7F)
        pending = bool(byte & 0x80)
        if not pending:
            subids.append(value)
            value = 0
    if pending:
        raise InvalidContent("OID subidentifier is cut short", start + len(content) - 1)
    first = subids[0]
    if first < 40:
        arcs = (0, first) + tuple(subids[1:])
    elif first < 80:
        arcs = (1, first - 40) + tuple(subids[1:])
    else:
        arcs = (2, first - 80) + tuple(subids[1:])
    return Oid(arcs)


# ---------------------------------------------------------------------------
# PEM armor
# ---------------------------------------------------------------------------

_BEGIN_RE = re.compile(r"-----BEGIN ([^-]*)-----")
_END_RE = re.compile(r"-----END ([^-]*)-----")


def pem_wrap(der: bytes, label: str) -> str:
    """Armor DER bytes under the given label, 64 base64 columns per line."""
    body = base64.b64encode(der).decode("ascii")
    lines = [body[i:i + 64] for i in range(0, len(body), 64)]
    return "\n".join([f"-----BEGIN {label}-----", *lines, f"-----END {label}-----"]) + "\n"


def pem_unwrap(text: str, expected_label: Optional[str] = None) -> PemBlock:
    """Extract the first armored block; surrounding text is ignored."""
    begin = _BEGIN_RE.search(text)
    if begin is None:
        raise MissingArmor("no BEGIN armor line found")
    end = _END_RE.search(text, begin.end())
    if end is None:
        raise MissingArmor("no END armor line found")
    if begin.group(1) != end.group(1):
        raise LabelMismatch(
            f"BEGIN label {begin.group(1)!r} does not match END label {end.group(1)!r}"
        )
    label = begin.group(1)
    if expected_label is not None and label != expected_label:
        raise LabelMismatch(f"expected label {expected_label!r}, found {label!r}")
    body = "".join(text[begin.end():end.start()].split())
    try:
        der = base64.b64decode(body.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise Base64Error(f"armored body is not valid base64: {exc}") from None
    return PemBlock(label, der)
