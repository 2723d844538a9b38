"""Instrumented bignum arithmetic: variable-time paths that narrate themselves.

Each variable-time operation returns, besides its result, a trace of the
data-dependent decisions it took and a point-of-interest (POI) event that a
caller can log. The traces are faithful enough to invert:

- ``modexp_vartime`` performs left-to-right sliding-window exponentiation
  over a table of odd powers. Its window schedule (squarings plus the table
  index of every multiplication) determines the exponent exactly, mirroring
  how data-cache observation of multiplier accesses exposes exponent bits.
- ``binary_gcd_vartime`` and ``beea_invmod_vartime`` implement the binary
  GCD and the binary extended Euclidean algorithm (HAC 14.61 family). Their
  shift/subtract branch sequences determine the inputs up to the published
  recovery procedure in ``keyside.sidechannel``.

Constant-time counterparts (fixed-window exponentiation, divstep-based
inversion) accept an optional step counter so tests can assert the proxy
contract: operation counts are a function of operand bit lengths alone.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


class BigMathError(ValueError):
    """Base class for arithmetic contract violations."""


class ZeroModulus(BigMathError):
    """Modulus is zero or negative."""


class EvenModulus(BigMathError):
    """Montgomery-form exponentiation needs an odd modulus."""


class ZeroInput(BigMathError):
    """GCD/LCM/inversion operand is zero or negative where forbidden."""


class EvenInput(BigMathError):
    """Primality candidate is even."""


class NotInvertible(BigMathError):
    """Inversion failed; carries the offending gcd as evidence."""

    def __init__(self, message: str, gcd: int):
        super().__init__(f"{message} (gcd = {gcd})")
        self.gcd = gcd


# ---------------------------------------------------------------------------
# events, traces, counters
# ---------------------------------------------------------------------------

KIND_MODEXP = "VarTimeModExp"
KIND_MODINV = "VarTimeModInv"
KIND_GCD = "VarTimeGcd"


@dataclass(frozen=True)
class PoiEvent:
    """One point-of-interest hit: which variable-time primitive ran, where,
    and what role the secret-bearing operand played."""

    kind: str
    context: str
    role: str = ""

    def to_json(self) -> Dict[str, str]:
        return {"kind": self.kind, "context": self.context, "role": self.role}


@dataclass(frozen=True)
class WindowTrace:
    """Schedule of a sliding-window exponentiation.

    Events: ("S",) squaring, ("M", idx) multiplication by the odd power
    2*idx+1, ("R",) the final reduction multiply that converts out of
    Montgomery form. For exponent >= 1 the first event is always an ("M",...)
    because the accumulator starts as the leading window's table entry.
    """

    w: int
    events: Tuple[Tuple, ...]

    @property
    def squares(self) -> int:
        return sum(1 for e in self.events if e[0] == "S")

    @property
    def multiplies(self) -> int:
        return sum(1 for e in self.events if e[0] == "M")

    def to_jsonl(self) -> str:
        lines = []
        for e in self.events:
            if e[0] == "M":
                lines.append(json.dumps({"op": "M", "idx": e[1]}))
            else:
                lines.append(json.dumps({"op": e[0]}))
        return "\n".join(lines)

    @classmethod
    def from_jsonl(cls, text: str, w: int) -> "WindowTrace":
        events = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj["op"] == "M":
                events.append(("M", int(obj["idx"])))
            elif obj["op"] in ("S", "R"):
                events.append((obj["op"],))
            else:
                raise ValueError(f"unknown window-trace op {obj['op']!r}")
        return cls(w, tuple(events))


SHIFT_U = "shU"
SHIFT_V = "shV"
SUB_U_FROM_V = "subUV"  # v -= u
SUB_V_FROM_U = "subVU"  # u -= v


@dataclass(frozen=True)
class BeeaTrace:
    """Branch sequence of a binary GCD / binary extended Euclidean run.

    Events are the four branch outcomes: shU / shV (halving u or v) and
    subUV / subVU (v -= u, u -= v). The sequence is exactly the
    data-dependent control flow, so for an inversion ending at gcd 1 it can
    be replayed backwards from the terminal state (0, 1).
    """

    events: Tuple[str, ...]

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps({"op": e}) for e in self.events)

    @classmethod
    def from_jsonl(cls, text: str) -> "BeeaTrace":
        events = []
        valid = {SHIFT_U, SHIFT_V, SUB_U_FROM_V, SUB_V_FROM_U}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            op = json.loads(line)["op"]
            if op not in valid:
                raise ValueError(f"unknown BEEA op {op!r}")
            events.append(op)
        return cls(tuple(events))


class StepCounter:
    """Tallies high-level arithmetic steps for the constant-time contract."""

    def __init__(self):
        self.counts: Dict[str, int] = {}

    def hit(self, name: str) -> None:
        self.counts[name] = self.counts.get(name, 0) + 1

    def snapshot(self) -> Dict[str, int]:
        return dict(self.counts)


# ---------------------------------------------------------------------------
# variable-time modular exponentiation (sliding window, odd-power table)
# ---------------------------------------------------------------------------


def modexp_vartime(base: int, exponent: int, modulus: int, w: int = 4, *,
                   context: str = "modexp",
                   role: str = "") -> Tuple[int, WindowTrace, PoiEvent]:
    """base^exponent mod modulus with a data-dependent window schedule."""
    if modulus <= 0:
        raise ZeroModulus(f"modulus must be positive, got {modulus}")
    if modulus % 2 == 0:
        raise EvenModulus("Montgomery-form exponentiation needs an odd modulus")
    if not 2 <= w <= 6:
        raise ValueError("window width must be in 2..6")
    if exponent < 0:
        raise ValueError("exponent must be non-negative")
    event = PoiEvent(KIND_MODEXP, context, role)
    base %= modulus
    events: List[Tuple] = []
    if exponent == 0:
        events.append(("R",))
        return 1 % modulus, WindowTrace(w, tuple(events)), event

    # table[i] = base^(2i+1) mod modulus
    table = [base]
    squared = base * base % modulus
    for _ in range(1, 1 << (w - 1)):
        table.append(table[-1] * squared % modulus)

    result = 1
    first = True
    i = exponent.bit_length() - 1
    while i >= 0:
        if not (exponent >> i) & 1:
            result = result * result % modulus
            events.append(("S",))
            i -= 1
            continue
        j = max(i - w + 1, 0)
        while not (exponent >> j) & 1:
            j += 1
        length = i - j + 1
        value = (exponent >> j) & ((1 << length) - 1)
        idx = (value - 1) // 2
        if first:
            # the accumulator starts as the leading window's entry
            result = table[idx]
            first = False
        else:
            for _ in range(length):
                result = result * result % modulus
                events.append(("S",))
            result = result * table[idx] % modulus
        events.append(("M", idx))
        i = j - 1
    # final conversion out of Montgomery form: one extra reduction multiply
    events.append(("R",))
    return result, WindowTrace(w, tuple(events)), event


def modexp_consttime(base: int, exponent: int, modulus: int, *,
                     counter: Optional[StepCounter] = None) -> int:
    """Fixed-window exponentiation: schedule depends on bit lengths only.

    Every 4-bit window costs four squarings, a full table scan, and one
    multiplication (including zero windows, via table[0] = 1).
    """
    if modulus <= 0:
        raise ZeroModulus(f"modulus must be positive, got {modulus}")
    if modulus % 2 == 0:
        raise EvenModulus("Montgomery-form exponentiation needs an odd modulus")
    if exponent < 0:
        raise ValueError("exponent must be non-negative")
    base %= modulus
    table = [1 % modulus]
    for _ in range(15):
        table.append(table[-1] * base % modulus)
    windows = max(1, (exponent.bit_length() + 3) // 4)
    result = 1 % modulus
    for widx in range(windows - 1, -1, -1):
        for _ in range(4):
            result = result * result % modulus
            if counter:
                counter.hit("square")
        digit = (exponent >> (4 * widx)) & 0xF
        pick = 0
        for d in range(16):  # model a full-scan constant-time table select
            if d == digit:
                pick = table[d]
        if counter:
            counter.hit("table-scan")
        result = result * pick % modulus
        if counter:
            counter.hit("multiply")
    return result


# ---------------------------------------------------------------------------
# binary GCD and binary extended Euclidean inversion
# ---------------------------------------------------------------------------


def binary_gcd_vartime(a: int, b: int, *, context: str = "binary-gcd",
                       role: str = "") -> Tuple[int, BeeaTrace, PoiEvent]:
    """Stein's binary GCD; the branch sequence is the trace.

    Normalization puts the larger operand in u, so gcd(1, b) never takes the
    subUV branch: v stays at 1 while u collapses.
    """
    if a <= 0 or b <= 0:
        raise ZeroInput("binary gcd needs positive operands")
    event = PoiEvent(KIND_GCD, context, role)
    u, v = (a, b) if a >= b else (b, a)
    events: List[str] = []
    common = 0
    while u % 2 == 0 and v % 2 == 0:
        u //= 2
        v //= 2
        common += 1
        events.append(SHIFT_U)
        events.append(SHIFT_V)
    while u != 0:
        while u % 2 == 0:
            u //= 2
            events.append(SHIFT_U)
        while v % 2 == 0:
            v //= 2
            events.append(SHIFT_V)
        if u >= v:
            u -= v
            events.append(SUB_V_FROM_U)
        else:
            v -= u
            events.append(SUB_U_FROM_V)
    return v << common, BeeaTrace(tuple(events)), event


def beea_invmod_vartime(a: int, modulus: int, *, context: str = "modinv",
                        role: str = "") -> Tuple[int, BeeaTrace, PoiEvent]:
    """a^-1 mod modulus by the binary extended Euclidean algorithm.

    The working pair starts at (u, v) = (a mod modulus, modulus) and the
    branch sequence (trace) drives both the values and the Bezout
    coefficients; dual coefficient tracking keeps the halving step exact for
    even moduli too. Ends at (0, gcd); gcd != 1 raises NotInvertible.
    """
    if modulus <= 1:
        raise ZeroInput("modulus must exceed 1")
    event = PoiEvent(KIND_MODINV, context, role)
    a %= modulus
    g = math.gcd(a, modulus)
    if g != 1:
        raise NotInvertible(f"{a} is not invertible mod {modulus}", g)
    tu, tv = a, modulus
    u1, u2 = 1, 0  # tu = u1*a + u2*modulus
    v1, v2 = 0, 1  # tv = v1*a + v2*modulus
    events: List[str] = []
    while True:
        while tu % 2 == 0:
            tu //= 2
            if u1 % 2 or u2 % 2:
                u1 += modulus
                u2 -= a
            u1 //= 2
            u2 //= 2
            events.append(SHIFT_U)
        while tv % 2 == 0:
            tv //= 2
            if v1 % 2 or v2 % 2:
                v1 += modulus
                v2 -= a
            v1 //= 2
            v2 //= 2
            events.append(SHIFT_V)
        if tu >= tv:
            tu -= tv
            u1 -= v1
            u2 -= v2
            events.append(SUB_V_FROM_U)
        else:
            tv -= tu
            v1 -= u1
            v2 -= u2
            events.append(SUB_U_FROM_V)
        if tu == 0:
            break
    assert tv == 1  # gcd was checked above
    return v1 % modulus, BeeaTrace(tuple(events)), event


def _div2_mod(x: int, modulus: int) -> int:
    """x/2 mod modulus for odd modulus."""
    if x % 2:
        x += modulus
    return (x // 2) % modulus


def _divstep_inverse(a: int, modulus: int, bits: int,
                     counter: Optional[StepCounter]) -> int:
    """Constant-iteration divstep inversion for an odd modulus.

    The iteration count is fixed from ``bits`` (the caller passes the full
    modulus bit length), so the schedule is independent of operand values.
    """
    iterations = (49 * bits + 80) // 17 + 16
    delta, f, g = 1, modulus, a % modulus
    d, e = 0, 1  # f == d*a, g == e*a (mod modulus)
    for _ in range(iterations):
        if counter:
            counter.hit("divstep")
        if delta > 0 and g % 2:
            delta, f, g = 1 - delta, g, (g - f) // 2
            d, e = e, _div2_mod(e - d, modulus)
        elif g % 2:
            delta, g = 1 + delta, (g + f) // 2
            e = _div2_mod(e + d, modulus)
        else:
            delta, g = 1 + delta, g // 2
            e = _div2_mod(e, modulus)
    if f not in (1, -1):
        raise NotInvertible("divstep ended at a non-unit", abs(f))
    return d * f % modulus


def _inverse_pow2(a: int, k: int, width: int,
                  counter: Optional[StepCounter]) -> int:
    """a^-1 mod 2^k for odd a, by Hensel lifting to the full ``width``."""
    x = 1
    bits = 1
    while bits < width:
        bits *= 2
        if counter:
            counter.hit("hensel")
        x = x * (2 - a * x) % (1 << min(bits, width))
    return x % (1 << k)


def invmod_consttime(a: int, modulus: int, *,
                     counter: Optional[StepCounter] = None) -> int:
    """a^-1 mod modulus with a bit-length-only schedule.

    Odd moduli use divstep directly. Even moduli split as 2^k * m_odd and
    recombine by CRT; every sub-schedule is sized from the full modulus bit
    length, so counts do not depend on k or on operand values.
    """
    if modulus <= 1:
        raise ZeroInput("modulus must exceed 1")
    a %= modulus
    width = modulus.bit_length()
    if modulus % 2:
        result = _divstep_inverse(a, modulus, width, counter)
    else:
        if a % 2 == 0:
            raise NotInvertible("even operand, even modulus", math.gcd(a, modulus))
        k = (modulus & -modulus).bit_length() - 1
        m_odd = modulus >> k
        x_pow2 = _inverse_pow2(a, k, width, counter)
        x_odd = _divstep_inverse(a % m_odd, m_odd, width, counter) if m_odd > 1 else 0
        m_inv = _inverse_pow2(m_odd, k, width, counter)
        result = x_odd + m_odd * ((x_pow2 - x_odd) * m_inv % (1 << k))
    if counter:
        counter.hit("final-check")
    if a * result % modulus != 1 % modulus:
        raise NotInvertible("inversion self-check failed", math.gcd(a, modulus))
    return result % modulus


# ---------------------------------------------------------------------------
# primality and lcm
# ---------------------------------------------------------------------------


def miller_rabin(candidate: int, rounds: int = 64, *,
                 rng: Optional[random.Random] = None,
                 consttime: bool = False) -> Tuple[bool, List[PoiEvent]]:
    """Miller-Rabin primality test, instrumented like a library would run it.

    Each witness costs one variable-time exponentiation (context
    "miller-rabin-witness"); one Montgomery-setup inversion of 2^64 mod n
    (context "mont-setup") is charged per call. With ``consttime`` the
    constant-time primitives run instead and no events are emitted.
    """
    if candidate <= 3:
        raise ValueError("candidate must exceed 3")
    if candidate % 2 == 0:
        raise EvenInput("candidate is even")
    if rounds < 1:
        raise ValueError("need at least one round")
    rng = rng or random.Random()
    d = candidate - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    events: List[PoiEvent] = []
    probable_prime = True
    for _ in range(rounds):
        witness = rng.randrange(2, candidate - 1)
        if consttime:
            x = modexp_consttime(witness, d, candidate)
        else:
            x, _trace, ev = modexp_vartime(
                witness, d, candidate,
                context="miller-rabin-witness", role="candidate-derived exponent")
            events.append(ev)
        if x in (1, candidate - 1):
            continue
        for _ in range(s - 1):
            x = x * x % candidate
            if x == candidate - 1:
                break
        else:
            probable_prime = False
            break
    # Montgomery context setup: invert 2^64 mod candidate, once per call
    r_mod = pow(2, 64, candidate)
    if consttime:
        invmod_consttime(r_mod, candidate)
    else:
        _inv, _trace, ev = beea_invmod_vartime(
            r_mod, candidate, context="mont-setup", role="2^64 mod candidate")
        events.append(ev)
    return probable_prime, events


def lcm_via_gcd(a: int, b: int, *,
                context: str = "lcm-gcd") -> Tuple[int, PoiEvent]:
    """lcm(a, b) = a*b / gcd(a, b), with the gcd on the variable-time path."""
    if a <= 0 or b <= 0:
        raise ZeroInput("lcm needs positive operands")
    g, _trace, event = binary_gcd_vartime(a, b, context=context,
                                          role="gcd of (p-1, q-1)")
    return a // g * b, event
