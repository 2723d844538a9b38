"""Short Weierstrass curve groups, scalar multiplication, and ECDSA.

Two scalar-multiplication strategies are implemented side by side because
their *operation schedules* are the object of study:

- ``scalar_mul_wnaf`` uses width-w non-adjacent-form recoding and emits a
  trace of its double/add schedule. The schedule is a function of the scalar:
  the number of doubles is one less than the NAF length and the number of
  adds equals the NAF weight, so execution time correlates with the scalar's
  bit length, and the count of trailing doubles after the final add reveals
  the scalar's 2-adic valuation.
- ``scalar_mul_ladder`` is a Montgomery ladder whose step count depends only
  on the bit length it is asked to process; the signing path pads the nonce
  with one or two multiples of the group order so every signature walks the
  same number of ladder steps.

``TimingModel`` converts a schedule into abstract time (base + unit costs,
optional Gaussian noise), which the harness uses both to sleep a mock server
and to simulate datasets in-process.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


class EcError(ValueError):
    """Base class for curve-level failures."""


class PointNotOnCurve(EcError):
    """A supplied affine point does not satisfy the curve equation."""


class InvalidScalar(EcError):
    """Secret scalar or injected nonce outside [1, n-1] or degenerate."""


class SingularCurve(EcError):
    """4a^3 + 27b^2 = 0 mod p: not an elliptic curve."""


class UnknownCurve(KeyError):
    """Requested name or OID is not in the registry."""


# ---------------------------------------------------------------------------
# curve and point types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Curve:
    """y^2 = x^3 + ax + b over GF(p), with a distinguished prime-order point."""

    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int
    cofactor: int = 1
    oid: Optional[Tuple[int, ...]] = None

    @property
    def generator(self) -> "CurvePoint":
        return CurvePoint(self.gx, self.gy)

    def contains(self, point: "CurvePoint") -> bool:
        if point.is_infinity:
            return True
        x, y = point.x, point.y
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0


@dataclass(frozen=True)
class CurvePoint:
    """Affine point or the point at infinity (x = y = None)."""

    x: Optional[int]
    y: Optional[int]

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    @classmethod
    def infinity(cls) -> "CurvePoint":
        return cls(None, None)


INFINITY = CurvePoint(None, None)


# ---------------------------------------------------------------------------
# named-curve registry (ships with P-256; toy curves register at runtime)
# ---------------------------------------------------------------------------

P256 = Curve(
    name="P-256",
    p=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF,
    a=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFC,
    b=0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B,
    gx=0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296,
    gy=0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5,
    n=0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551,
    cofactor=1,
    oid=(1, 2, 840, 10045, 3, 1, 7),
)

# A small curve minted for attack demos: order found by baby-step/giant-step
# and certified prime, so HNP instances close over a ~2^30 group instead of
# P-256 when tests need sub-second lattices. Registered but has no OID.
TOY30: Curve  # assigned below, after the arithmetic it is verified with

_REGISTRY: Dict[str, Curve] = {}
_OID_INDEX: Dict[Tuple[int, ...], Curve] = {}


def register_curve(curve: Curve) -> None:
    """Extension hook: make a curve visible to name/OID/parameter lookups."""
    _REGISTRY[curve.name] = curve
    if curve.oid is not None:
        _OID_INDEX[curve.oid] = curve


def curve_by_name(name: str) -> Curve:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownCurve(name) from None


def curve_by_oid(oid: Tuple[int, ...]) -> Optional[Curve]:
    return _OID_INDEX.get(tuple(oid))


def match_explicit_params(p: int, a: int, b: int, gx: int, gy: int, n: int) -> Optional[Curve]:
    """Find a registered curve with exactly these domain parameters."""
    for curve in _REGISTRY.values():
        if (curve.p, curve.a % curve.p, curve.b, curve.gx, curve.gy, curve.n) == (
            p, a % p, b, gx, gy, n,
        ):
            return curve
    return None


def registered_curves() -> List[Curve]:
    return list(_REGISTRY.values())


register_curve(P256)


# ---------------------------------------------------------------------------
# point arithmetic
# ---------------------------------------------------------------------------


def _require_on_curve(curve: Curve, point: CurvePoint) -> None:
    if not curve.contains(point):
        raise PointNotOnCurve(f"point {point} is not on {curve.name}")


def point_neg(curve: Curve, point: CurvePoint) -> CurvePoint:
    if point.is_infinity:
        return INFINITY
    return CurvePoint(point.x, (-point.y) % curve.p)


def point_double(curve: Curve, point: CurvePoint) -> CurvePoint:
    _require_on_curve(curve, point)
    return _double(curve, point)


def point_add(curve: Curve, p1: CurvePoint, p2: CurvePoint) -> CurvePoint:
    _require_on_curve(curve, p1)
    _require_on_curve(curve, p2)
    return _add(curve, p1, p2)


def _double(curve: Curve, point: CurvePoint) -> CurvePoint:
    if point.is_infinity or point.y == 0:
        return INFINITY
    p = curve.p
    lam = (3 * point.x * point.x + curve.a) * pow(2 * point.y, -1, p) % p
    x3 = (lam * lam - 2 * point.x) % p
    y3 = (lam * (point.x - x3) - point.y) % p
    return CurvePoint(x3, y3)


def _add(curve: Curve, p1: CurvePoint, p2: CurvePoint) -> CurvePoint:
    if p1.is_infinity:
        return p2
    if p2.is_infinity:
        return p1
    p = curve.p
    if p1.x == p2.x:
        if (p1.y + p2.y) % p == 0:
            return INFINITY
        return _double(curve, p1)
    lam = (p2.y - p1.y) * pow(p2.x - p1.x, -1, p) % p
    x3 = (lam * lam - p1.x - p2.x) % p
    y3 = (lam * (p1.x - x3) - p1.y) % p
    return CurvePoint(x3, y3)


def _mul(curve: Curve, k: int, point: CurvePoint) -> CurvePoint:
    """Plain double-and-add; internal helper with no schedule guarantees."""
    result = INFINITY
    addend = point
    while k:
        if k & 1:
            result = _add(curve, result, addend)
        addend = _double(curve, addend)
        k >>= 1
    return result


# ---------------------------------------------------------------------------
# scalar multiplication: ladder and wNAF
# ---------------------------------------------------------------------------


def scalar_mul_ladder(curve: Curve, k: int, point: CurvePoint,
                      pad_bits: Optional[int] = None) -> CurvePoint:
    """Montgomery ladder: one add and one double per processed bit.

    The schedule depends only on the number of bits processed. With
    ``pad_bits`` the ladder walks exactly that many bits (k's bit length must
    not exceed it), which the hardened signing path uses for nonce padding.
    """
    _require_on_curve(curve, point)
    if k < 0:
        raise InvalidScalar("ladder scalar must be non-negative")
    bits = k.bit_length() if pad_bits is None else pad_bits
    if k.bit_length() > bits:
        raise InvalidScalar("scalar longer than the padded bit length")
    r0, r1 = INFINITY, point
    for i in range(bits - 1, -1, -1):
        if (k >> i) & 1:
            r0 = _add(curve, r0, r1)
            r1 = _double(curve, r1)
        else:
            r1 = _add(curve, r0, r1)
            r0 = _double(curve, r0)
    return r0


@dataclass(frozen=True)
class ScalarMulTrace:
    """Ordered double/add schedule of one wNAF multiplication.

    Events are "D" and "A". For scalar k: the number of doubles is
    len(NAF(k)) - 1, the number of adds is the NAF weight, and the trace ends
    with v2(k) doubles after the final add.
    """

    events: Tuple[str, ...]

    @property
    def doubles(self) -> int:
        return sum(1 for e in self.events if e == "D")

    @property
    def adds(self) -> int:
        return sum(1 for e in self.events if e == "A")

    @property
    def trailing_doubles(self) -> int:
        count = 0
        for e in reversed(self.events):
            if e != "D":
                break
            count += 1
        return count

    def __str__(self) -> str:
        return "".join(self.events)


def wnaf_digits(k: int, w: int) -> List[int]:
    """Width-w NAF of k, least significant digit first; digits odd, |d| < 2^(w-1)."""
    if k <= 0:
        raise InvalidScalar("wNAF is defined for positive scalars")
    if not 2 <= w <= 8:
        raise ValueError("window width must be in 2..8")
    digits = []
    while k:
        if k & 1:
            d = k % (1 << w)
            if d >= 1 << (w - 1):
                d -= 1 << w
            k -= d
        else:
            d = 0
        digits.append(d)
        k >>= 1
    return digits


def scalar_mul_wnaf(curve: Curve, k: int, point: CurvePoint,
                    w: int = 4) -> Tuple[CurvePoint, ScalarMulTrace]:
    """Width-w NAF multiplication; returns the product and its schedule."""
    _require_on_curve(curve, point)
    digits = wnaf_digits(k, w)
    # precompute odd multiples 1P, 3P, ..., (2^(w-1)-1)P
    table = {1: point}
    twice = _double(curve, point)
    m = 1
    while m + 2 < 1 << (w - 1):
        table[m + 2] = _add(curve, table[m], twice)
        m += 2
    events: List[str] = []
    result = INFINITY
    for d in reversed(digits):
        if not result.is_infinity:
            result = _double(curve, result)
            events.append("D")
        if d:
            addend = table[d] if d > 0 else point_neg(curve, table[-d])
            result = _add(curve, result, addend)
            events.append("A")
    return result, ScalarMulTrace(tuple(events))


# ---------------------------------------------------------------------------
# timing model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimingModel:
    """Abstract execution time: base + c_double * doubles + c_add * adds.

    With sigma = 0 the law is exact; otherwise Gaussian noise of that
    standard deviation is added per measurement.
    """

    c_double: float = 1.0
    c_add: float = 0.65
    base: float = 50.0
    sigma: float = 0.0

    def trace_time(self, trace: ScalarMulTrace) -> float:
        return self.base + self.c_double * trace.doubles + self.c_add * trace.adds

    def ladder_time(self, bits: int) -> float:
        # one add and one double per ladder step
        return self.base + bits * (self.c_double + self.c_add)

    def sample(self, mean: float, rng: Optional[random.Random] = None) -> float:
        if self.sigma == 0:
            return mean
        if rng is None:
            raise ValueError("sigma > 0 needs an RNG")
        return mean + rng.gauss(0.0, self.sigma)


# ---------------------------------------------------------------------------
# ECDSA
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EcdsaSignature:
    r: int
    s: int
    h: int


@dataclass(frozen=True)
class SignResult:
    """Signature plus the instrumentation a laboratory needs.

    ``nonce`` is the ground-truth k (sealed: only tests and audits may look).
    ``trace`` is the wNAF schedule, or None on hardened paths.
    ``elapsed`` is model time for the scalar multiplication that produced r.
    """

    signature: EcdsaSignature
    nonce: int
    trace: Optional[ScalarMulTrace]
    elapsed: float


def _padded_nonce(k: int, n: int) -> int:
    """k + n or k + 2n, whichever reaches bitlen(n) + 1 bits."""
    padded = k + n
    if padded.bit_length() <= n.bit_length():
        padded += n
    return padded


def ecdsa_sign(curve: Curve, alpha: int, h: int, *,
               rng: Optional[random.Random] = None,
               nonce: Optional[int] = None,
               hardened: bool = False,
               w: int = 4,
               timing: Optional[TimingModel] = None) -> SignResult:
    """Sign h (an integer; callers hash) under secret scalar alpha.

    The nonce source is either ``rng`` (fresh k per attempt) or an injected
    ``nonce`` for tests. Degenerate r = 0 / s = 0 attempts redraw with an RNG
    source and fail loudly with an injected nonce. ``hardened`` selects the
    padded-ladder schedule (no trace, length-only time); the default is the
    wNAF schedule with its trace.
    """
    n = curve.n
    if not 1 <= alpha < n:
        raise InvalidScalar("secret scalar outside [1, n-1]")
    if (rng is None) == (nonce is None):
        raise InvalidScalar("provide exactly one nonce source (rng or nonce)")
    timing = timing or TimingModel()
    h = h % n
    g = curve.generator
    while True:
        k = nonce if nonce is not None else rng.randrange(1, n)
        if not 1 <= k < n:
            raise InvalidScalar("nonce outside [1, n-1]")
        trace: Optional[ScalarMulTrace]
        if hardened:
            padded = _padded_nonce(k, n)
            r_point = scalar_mul_ladder(curve, padded, g, pad_bits=n.bit_length() + 1)
            trace = None
            mean = timing.ladder_time(n.bit_length() + 1)
        else:
            r_point, trace = scalar_mul_wnaf(curve, k, g, w)
            mean = timing.trace_time(trace)
        r = r_point.x % n if not r_point.is_infinity else 0
        if r == 0:
            if nonce is not None:
                raise InvalidScalar("injected nonce yields r = 0")
            continue
        s = pow(k, -1, n) * (h + alpha * r) % n
        if s == 0:
            if nonce is not None:
                raise InvalidScalar("injected nonce yields s = 0")
            continue
        elapsed = timing.sample(mean, rng)
        return SignResult(EcdsaSignature(r, s, h), k, trace, elapsed)


def ecdsa_verify(curve: Curve, signature: EcdsaSignature, pubkey: CurvePoint) -> bool:
    """Standard verification; returns False on any defect, never raises."""
    try:
        n = curve.n
        if pubkey.is_infinity or not curve.contains(pubkey):
            return False
        r, s = signature.r, signature.s
        if not (1 <= r < n and 1 <= s < n):
            return False
        w = pow(s, -1, n)
        u1 = signature.h * w % n
        u2 = r * w % n
        x = _add(curve, _mul(curve, u1, curve.generator), _mul(curve, u2, pubkey))
        if x.is_infinity:
            return False
        return x.x % n == r
    except Exception:
        return False


def derive_public(curve: Curve, alpha: int) -> CurvePoint:
    """[alpha]G for a secret scalar."""
    if not 1 <= alpha < curve.n:
        raise InvalidScalar("secret scalar outside [1, n-1]")
    return _mul(curve, alpha, curve.generator)


# ---------------------------------------------------------------------------
# toy curve enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToyCurveScan:
    """Full census of a small curve: order, optional point list, suggestion."""

    order: int
    points: Optional[Tuple[Tuple[int, int], ...]]
    generator: CurvePoint
    subgroup_order: int
    cofactor: int


def _is_small_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    d = 3
    while d * d <= p:
        if p % d == 0:
            return False
        d += 2
    return True


def _largest_prime_factor(m: int) -> int:
    largest = 1
    d = 2
    while d * d <= m:
        while m % d == 0:
            largest = d
            m //= d
        d += 1 if d == 2 else 2
    return max(largest, m) if m > 1 else largest


def _sqrt_mod(value: int, p: int) -> Optional[int]:
    """Tonelli-Shanks square root mod an odd prime; None for non-residues."""
    value %= p
    if value == 0:
        return 0
    if pow(value, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(value, (p + 1) // 4, p)
    # write p - 1 = q * 2^s with q odd
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(value, q, p), pow(value, (q + 1) // 2, p)
    while t != 1:
        t2, i = t, 0
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t = t * c % p
        r = r * b % p
    return r


def enumerate_toy_curve(p: int, a: int, b: int, *,
                        collect_points: bool = False) -> ToyCurveScan:
    """Census a curve over GF(p), p prime < 2^24.

    Counts points by tallying square roots per residue class, factors the
    order, and suggests (G, n, f): n the largest prime factor of the order,
    f the matching cofactor, G a point of order exactly n.
    """
    if p >= 1 << 24 or not _is_small_prime(p) or p < 5:
        raise ValueError("field size must be an odd prime in [5, 2^24)")
    a %= p
    b %= p
    if (4 * a * a * a + 27 * b * b) % p == 0:
        raise SingularCurve(f"discriminant vanishes for a={a}, b={b} mod {p}")

    # roots[r] = number of y in GF(p) with y^2 = r (0, 1 or 2)
    roots = bytearray(p)
    roots[0] = 1
    for y in range(1, (p + 1) // 2):
        roots[y * y % p] = 2

    order = 1  # the point at infinity
    points: Optional[List[Tuple[int, int]]] = [] if collect_points else None
    for x in range(p):
        rhs = (x * x * x + a * x + b) % p
        count = roots[rhs]
        order += count
        if points is not None and count:
            y = _sqrt_mod(rhs, p)
            points.append((x, y))
            if count == 2:
                points.append((x, p - y))

    n = _largest_prime_factor(order)
    f = order // n
    curve = Curve("toy-scan", p, a, b, 0, 0, n, f)
    g = INFINITY
    for x in range(p):
        rhs = (x * x * x + a * x + b) % p
        if roots[rhs]:
            y = _sqrt_mod(rhs, p)
            candidate = _mul(curve, f, CurvePoint(x, y))
            if not candidate.is_infinity:
                g = candidate
                break
    if g.is_infinity or not _mul(curve, n, g).is_infinity:
        raise SingularCurve("could not locate a point of the requested order")
    return ToyCurveScan(
        order=order,
        points=tuple(points) if points is not None else None,
        generator=g,
        subgroup_order=n,
        cofactor=f,
    )


# ---------------------------------------------------------------------------
# minted attack curve (order certified below in tests)
# ---------------------------------------------------------------------------

# Minted by tools/mint_toy_curve.py: n is prime and is the unique multiple of
# itself in the Hasse interval of p (n > 4*sqrt(p)), so the cofactor is
# certifiably 1. The test suite re-derives all of this from the constants.
TOY30 = Curve(
    name="toy-30",
    p=1073741827,
    a=1073741824,  # p - 3
    b=23,
    gx=1,
    gy=421340900,
    n=1073781623,
    cofactor=1,
    oid=None,
)

register_curve(TOY30)
