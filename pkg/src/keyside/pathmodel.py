"""Library dispatch models: which code path a parsed key ends up on.

Two mainstream stacks are modeled at the decision level. For EC keys the
encoding of the domain parameters, not the curve itself, picks the scalar
multiplication path: named parameters hit the dedicated constant-time
code, explicit parameters with a cofactor run a padded ladder, and
explicit parameters missing the cofactor fall through to variable-time
wNAF. For RSA keys the presence mask of the PKCS#1 fields decides whether
a loader recomputes secrets with variable-time bignum calls; loading, not
use, is the observable event. The models return the exact sequence of
point-of-interest events a probe on the variable-time primitives would
record, so attacks downstream can consume them without touching a real
library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from . import bigmath
from . import ecgroup
from .bigmath import PoiEvent, WindowTrace
from .keyfmt import (
    DsaKeyMaterial,
    EcPrivateKey,
    ExplicitDomain,
    NamedDomain,
    RSA_FIELDS,
    RsaKeyMaterial,
)


class PathModelError(ValueError):
    """Base class for dispatch/load modeling failures."""


class InconsistentParameters(PathModelError):
    """Provided key fields contradict each other arithmetically."""


class MissingField(PathModelError):
    """The modeled operation needs a field the material does not carry."""


class AmbiguousCofactor(PathModelError):
    """The order is too small for the Hasse interval to pin the cofactor."""


class DispatchPath(Enum):
    """Scalar-multiplication implementation a library selects."""

    CONST_TIME_DEDICATED = "ConstTimeDedicated"
    HARDENED_LADDER = "HardenedLadder"
    VARIABLE_TIME_WNAF = "VariableTimeWnaf"


def hasse_cofactor(field_prime: int, order: int) -> int:
    """Recover h from #E(F_p) = h*n using the Hasse bound.

    The group size lies within 2*sqrt(p) of p+1, so when n exceeds four
    square roots the multiple of n in that interval is unique and h is
    just the nearest integer to (p+1)/n.
    """
    if field_prime < 2 or order < 1:
        raise ValueError("need a field prime and a positive order")
    if order * order <= 16 * field_prime:
        raise AmbiguousCofactor(
            "order^2 must exceed 16*p for a unique cofactor")
    cofactor = (2 * (field_prime + 1) + order) // (2 * order)
    if cofactor < 1:
        raise AmbiguousCofactor("no positive multiple of n fits the interval")
    return cofactor


def classify_ec_dispatch(key: EcPrivateKey, *, mitigated: bool = False) -> DispatchPath:
    """Map a parsed EC key to the scalar-multiplication path it would use.

    Unmitigated: named parameters dispatch to the dedicated constant-time
    implementation when registered (generic ladder otherwise); explicit
    parameters run the hardened ladder, except that a missing or zero
    cofactor starves the ladder's padding and drops to variable-time wNAF.

    Mitigated: explicit parameters are first matched against the registry
    and promoted to the dedicated path on a hit; otherwise a missing
    cofactor is reconstructed from the Hasse bound so the ladder always
    has its padding. No input reaches wNAF.
    """
    domain = key.domain
    if domain is None:
        raise ValueError("key carries no domain parameters to dispatch on")
    if isinstance(domain, NamedDomain):
        if ecgroup.curve_by_oid(domain.oid) is not None:
            return DispatchPath.CONST_TIME_DEDICATED
        return DispatchPath.HARDENED_LADDER
    if mitigated:
        match = ecgroup.match_explicit_params(
            domain.p, domain.a, domain.b, domain.gx, domain.gy, domain.n)
        if match is not None:
            return DispatchPath.CONST_TIME_DEDICATED
        if not domain.cofactor:
            hasse_cofactor(domain.p, domain.n)  # raises if unrecoverable
        return DispatchPath.HARDENED_LADDER
    if domain.cofactor:
        return DispatchPath.HARDENED_LADDER
    return DispatchPath.VARIABLE_TIME_WNAF


# ---------------------------------------------------------------------------
# RSA load model (mbedTLS-style completion)
# ---------------------------------------------------------------------------


class LoadGroup(Enum):
    """Observable outcome classes for loading a masked PKCS#1 key."""

    INVALID = "Invalid"
    PUBLIC = "Public"
    POI_HIT_CRT = "PoiHitCrt"
    POI_HIT_CRT_AND_D = "PoiHitCrtAndD"


@dataclass(frozen=True)
class RsaLoadReport:
    """What loading one masked key looked like from the probe's seat."""

    group: LoadGroup
    mask: int
    events: Tuple[PoiEvent, ...]
    completed: Optional[RsaKeyMaterial]

    def to_json(self) -> Dict[str, object]:
        return {
            "group": self.group.value,
            "mask": self.mask,
            "events": [event.to_json() for event in self.events],
        }


def classify_rsa_mask(mask: int) -> LoadGroup:
    """Group a presence mask by loader behavior; depends on the mask only."""
    if not 0 <= mask <= 0xFF:
        raise ValueError("mask must fit eight bits")
    bit = {name: 1 << (7 - i) for i, name in enumerate(RSA_FIELDS)}
    if mask & bit["e"] and mask & bit["p"] and mask & bit["q"]:
        if mask & bit["d"]:
            return LoadGroup.POI_HIT_CRT
        return LoadGroup.POI_HIT_CRT_AND_D
    if (mask & bit["n"] and mask & bit["e"]
            and not mask & (bit["p"] | bit["q"] | bit["d"])):
        return LoadGroup.PUBLIC
    return LoadGroup.INVALID


def mbedtls_load_model(key: RsaKeyMaterial) -> RsaLoadReport:
    """Model the import-and-complete step of an mbedTLS-style loader.

    A loadable private key needs e, p and q. The loader then fills the
    gaps: without d it deduces lambda = lcm(p-1, q-1) with a variable-time
    gcd and inverts e against it with a variable-time BEEA; with or
    without d it always recomputes the CRT coefficient q^-1 mod p with the
    same BEEA. Fields that are present and redundant are cross-checked.
    """
    mask = key.present_mask()
    group = classify_rsa_mask(mask)
    if group is LoadGroup.INVALID:
        return RsaLoadReport(group, mask, (), None)
    if group is LoadGroup.PUBLIC:
        return RsaLoadReport(group, mask, (), None)

    events: List[PoiEvent] = []
    p, q, e = key.p, key.q, key.e
    n = p * q
    if key.n is not None and key.n != n:
        raise InconsistentParameters("N does not equal p*q")
    if group is LoadGroup.POI_HIT_CRT:
        d = key.d
    else:
        lam, gcd_event = bigmath.lcm_via_gcd(p - 1, q - 1, context="lcm-gcd")
        events.append(gcd_event)
        d, _trace, inv_event = bigmath.beea_invmod_vartime(
            e, lam, context="deduce-d", role="public exponent vs lambda(N)")
        events.append(inv_event)
    dp, dq = d % p, d % q
    if key.dp is not None and key.dp != dp:
        raise InconsistentParameters("d_p does not match d mod p")
    if key.dq is not None and key.dq != dq:
        raise InconsistentParameters("d_q does not match d mod q")
    iq, _trace, iq_event = bigmath.beea_invmod_vartime(
        q, p, context="crt-iq", role="secret prime q")
    events.append(iq_event)
    completed = RsaKeyMaterial(n=n, e=e, p=p, q=q, d=d, dp=dp, dq=dq, iq=iq)
    return RsaLoadReport(group, mask, tuple(events), completed)


@dataclass(frozen=True)
class MaskOutcome:
    """One fuzzer row: mask, behavior group, and event contexts in order."""

    mask: int
    group: LoadGroup
    contexts: Tuple[str, ...]


def fuzz_all_rsa_masks(
        key: RsaKeyMaterial,
) -> Tuple[Dict[LoadGroup, int], List[MaskOutcome]]:
    """Load every one of the 256 field-presence projections of one key.

    Returns the outcome histogram and the per-mask rows, mask order 0..255.
    The key must be fully populated and self-consistent.
    """
    if key.present_mask() != 0xFF:
        raise MissingField("fuzzing needs a fully populated key")
    histogram: Dict[LoadGroup, int] = {group: 0 for group in LoadGroup}
    outcomes: List[MaskOutcome] = []
    for mask in range(256):
        report = mbedtls_load_model(key.project(mask))
        histogram[report.group] += 1
        outcomes.append(MaskOutcome(
            mask, report.group,
            tuple(event.context for event in report.events)))
    return histogram, outcomes


# ---------------------------------------------------------------------------
# RSA key-check model (OpenSSL-style validation)
# ---------------------------------------------------------------------------


def openssl_rsa_check_model(
        key: RsaKeyMaterial, *,
        consttime_fix: bool = False,
        consttime_gcd: bool = False,
        rounds: int = 64,
        rng=None,
) -> Tuple[bool, List[PoiEvent]]:
    """Model a full private-key validation pass.

    The checker takes all eight fields as given and verifies them:
    Miller-Rabin on p then q (each witness is a variable-time sliding
    window exponentiation, plus one Montgomery-setup inversion per prime),
    N = p*q, d*e = 1 mod lcm(p-1, q-1) with the lcm's gcd on the
    variable-time path, the CRT exponents against d, and q^-1 mod p by
    recomputation. Unlike the completing loader it checks d rather than
    deriving it, so no derivation event appears.

    ``consttime_fix`` swaps the exponentiations and inversions for their
    constant-time counterparts; ``consttime_gcd`` does the same for the
    gcd (shipped as a separate change, so modeled as a separate flag).
    """
    missing = [f for f in RSA_FIELDS if getattr(key, f) is None]
    if missing:
        raise MissingField(f"key check needs every field, missing: {missing}")
    events: List[PoiEvent] = []
    for name in ("p", "q"):
        prime_ok, prime_events = bigmath.miller_rabin(
            getattr(key, name), rounds=rounds, rng=rng, consttime=consttime_fix)
        events.extend(replace(event, role=name) for event in prime_events)
        if not prime_ok:
            return False, events
    valid = key.n == key.p * key.q
    if consttime_gcd:
        lam = (key.p - 1) * (key.q - 1) // math.gcd(key.p - 1, key.q - 1)
    else:
        lam, gcd_event = bigmath.lcm_via_gcd(key.p - 1, key.q - 1,
                                             context="lcm-gcd")
        events.append(gcd_event)
    valid = valid and key.d * key.e % lam == 1
    valid = valid and key.dp == key.d % key.p and key.dq == key.d % key.q
    if consttime_fix:
        iq = bigmath.invmod_consttime(key.q, key.p)
    else:
        iq, _trace, iq_event = bigmath.beea_invmod_vartime(
            key.q, key.p, context="crt-iq", role="secret prime q")
        events.append(iq_event)
    valid = valid and key.iq == iq
    return valid, events


# ---------------------------------------------------------------------------
# DSA blob load model
# ---------------------------------------------------------------------------


def dsa_blob_load_model(
        material: DsaKeyMaterial, *,
        consttime_fix: bool = False,
) -> Tuple[DsaKeyMaterial, List[PoiEvent], Optional[WindowTrace]]:
    """Model loading a private DSA blob, which carries no public key.

    The loader recomputes y = g^x mod p; unfixed, that is a variable-time
    sliding-window exponentiation of the long-term secret, and the window
    trace is what a probe would capture. Returns the completed material,
    the event list, and the trace (None under the fix).
    """
    for name in ("p", "q", "g", "x"):
        if getattr(material, name) is None:
            raise MissingField(f"private blob load needs {name}")
    if material.y is not None:
        raise ValueError("blob material already carries y; nothing to model")
    if consttime_fix:
        y = bigmath.modexp_consttime(material.g, material.x, material.p)
        return DsaKeyMaterial(material.p, material.q, material.g,
                              material.x, y), [], None
    y, trace, event = bigmath.modexp_vartime(
        material.g, material.x, material.p,
        context="dsa-pubkey", role="long-term secret exponent")
    completed = DsaKeyMaterial(material.p, material.q, material.g,
                               material.x, y)
    return completed, [event], trace
