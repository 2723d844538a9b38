"""Leak extraction: turn captured traces and timings into algebraic facts.

Each function here inverts one instrumentation channel from the rest of
the package. Scalar-multiplication traces give nonce low bits (the count
of trailing doubles is the 2-adic valuation of the nonce). Window traces
from sliding-window exponentiation replay back into the exponent, exactly
or partially depending on what the probe saw. Extended-Euclidean branch
traces replay in reverse to recover an operand of the inversion given the
other. Timing lists reduce to the fastest-t subset that a latency attack
would keep. Everything downstream (lattice work in ``keyside.hnp``)
consumes the output types defined here.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

from . import bigmath
from .bigmath import BeeaTrace, WindowTrace
from .ecgroup import EcdsaSignature, ScalarMulTrace


class SideChannelError(ValueError):
    """Base class for leak-extraction failures."""


class EmptyTrace(SideChannelError):
    """The trace carries no events at all."""


class MalformedTrace(SideChannelError):
    """Event sequence cannot have come from the modeled implementation."""


class InconsistentTrace(SideChannelError):
    """Replay succeeded arithmetically but contradicts the known operand."""


class InsufficientData(SideChannelError):
    """Fewer usable records than the caller asked to keep."""


class ParseError(SideChannelError):
    """Serialized leak data does not parse; ``row`` is 1-based."""

    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


class NotUseful:
    """Singleton marker for traces that leak nothing worth keeping."""

    _instance: Optional["NotUseful"] = None

    def __new__(cls) -> "NotUseful":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NOT_USEFUL"

    def __bool__(self) -> bool:
        return False


NOT_USEFUL = NotUseful()


@dataclass(frozen=True)
class LeakSample:
    """One signature with partial nonce knowledge: k = value (mod 2^bits).

    ``corrupted`` marks samples deliberately perturbed by error injection;
    it is bookkeeping, not wire data, and does not affect equality.
    """

    r: int
    s: int
    h: int
    bits: int
    value: int
    corrupted: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("a sample must pin at least one bit")
        if not 0 <= self.value < (1 << self.bits):
            raise ValueError("known value must fit the known bit count")


@dataclass(frozen=True)
class TimedSignature:
    """One signature with its observed wall-clock latency."""

    r: int
    s: int
    h: int
    latency: int


def extract_lsb_leak(trace: ScalarMulTrace,
                     sig: EcdsaSignature) -> Union[LeakSample, NotUseful]:
    """Read the nonce's low bits off a wNAF scalar-multiplication trace.

    The recoding leaves exactly v2(k) doubles after the final add, so a
    trace with j trailing doubles means k = 2^j (mod 2^(j+1)). A trace
    ending in the add itself (j = 0) only says the nonce is odd, which is
    not worth a lattice dimension: NOT_USEFUL.
    """
    if not trace.events:
        raise EmptyTrace("scalar-multiplication trace has no events")
    if "A" not in trace.events:
        raise MalformedTrace("trace has no adds; not a wNAF multiplication")
    j = trace.trailing_doubles
    if j == 0:
        return NOT_USEFUL
    return LeakSample(r=sig.r, s=sig.s, h=sig.h, bits=j + 1, value=1 << j)


# ---------------------------------------------------------------------------
# window-trace replay (sliding-window modexp)
# ---------------------------------------------------------------------------


class TraceView(Enum):
    """How much of a window trace the probe resolved."""

    FULL = "full"
    INDICES_ONLY = "indices-only"


@dataclass(frozen=True)
class PartialExponent:
    """Window values read off a trace without their spacing.

    Each value is fully known (its bits appear verbatim in the exponent,
    most significant window first) but the zero gaps between windows are
    not, so only the sum of the window bit lengths counts as known.
    """

    window_values: Tuple[int, ...]
    w: int

    def known_bit_count(self) -> int:
        return sum(value.bit_length() for value in self.window_values)


def recover_exponent_from_window_trace(
        trace: WindowTrace,
        view: TraceView = TraceView.FULL,
) -> Union[int, PartialExponent]:
    """Replay a sliding-window exponentiation trace back into the exponent.

    FULL view: squares double the reconstructed exponent and multiplies
    add the (odd) table value, so the replay is exact. INDICES_ONLY view:
    only the multiply indices were observed (say, through a cache probe on
    the table), giving the window values but not their spacing.
    """
    events = trace.events
    if not events:
        raise EmptyTrace("window trace has no events")
    if events == (("R",),):
        # exponent 0 runs no windows at all
        return 0 if view is TraceView.FULL else PartialExponent((), trace.w)
    if events[-1] != ("R",):
        raise MalformedTrace("trace does not end in the final reduction")
    body = events[:-1]
    if any(ev == ("R",) for ev in body):
        raise MalformedTrace("reduction event before the end of the trace")
    if not body or body[0][0] != "M":
        raise MalformedTrace("first event must load the leading window")
    max_index = 1 << (trace.w - 1)
    values: List[int] = []
    exponent = 0
    pending_squares = 0
    for ev in body:
        if ev[0] == "S":
            pending_squares += 1
            continue
        if ev[0] != "M":
            raise MalformedTrace(f"unknown event {ev!r}")
        index = ev[1]
        if not 0 <= index < max_index:
            raise MalformedTrace(f"table index {index} out of range for w={trace.w}")
        value = 2 * index + 1
        if values and value.bit_length() > pending_squares:
            raise MalformedTrace("window value wider than the squares before it")
        exponent = (exponent << pending_squares) + value
        pending_squares = 0
        values.append(value)
    if view is TraceView.INDICES_ONLY:
        return PartialExponent(tuple(values), trace.w)
    return exponent << pending_squares


# ---------------------------------------------------------------------------
# extended-Euclidean trace replay
# ---------------------------------------------------------------------------


class BeeaRole(Enum):
    """Which operand of the inversion the analyst already knows."""

    KNOWN_IS_INPUT = "input"
    KNOWN_IS_MODULUS = "modulus"


def recover_input_from_beea_trace(known: int, trace: BeeaTrace,
                                  role: BeeaRole) -> int:
    """Recover the unknown operand of an inversion from its branch trace.

    The recorded loop reduces (u, v) from (a mod m, m) to (0, 1) through
    halvings and cross-subtractions; running the events backwards from
    (0, 1) rebuilds the starting pair. The replayed pair is then checked
    against the known operand and certified by re-running the inversion
    and comparing traces, so a trace from some other algorithm (or a
    mismatched ``known``) is rejected rather than misread.
    """
    if not trace.events:
        raise EmptyTrace("branch trace has no events")
    u, v = 0, 1
    for op in reversed(trace.events):
        if op == bigmath.SHIFT_U:
            u *= 2
        elif op == bigmath.SHIFT_V:
            v *= 2
        elif op == bigmath.SUB_V_FROM_U:
            u += v
        elif op == bigmath.SUB_U_FROM_V:
            v += u
        else:
            raise MalformedTrace(f"unknown branch op {op!r}")
    if role is BeeaRole.KNOWN_IS_MODULUS:
        if v != known:
            raise InconsistentTrace("replayed modulus disagrees with the known one")
        recovered = u
    else:
        if v < 2 or u != known % v:
            raise InconsistentTrace("replayed input disagrees with the known one")
        recovered = v
    try:
        _inv, check, _event = bigmath.beea_invmod_vartime(u, v)
    except bigmath.BigMathError as exc:
        raise InconsistentTrace(f"replayed operands do not invert: {exc}") from exc
    if check.events != trace.events:
        raise InconsistentTrace("re-run branch sequence diverges from the trace")
    return recovered


# ---------------------------------------------------------------------------
# timing selection and error injection
# ---------------------------------------------------------------------------


def timing_filter(records: Sequence[TimedSignature],
                  keep: int) -> List[TimedSignature]:
    """Keep the ``keep`` fastest signatures (stable under latency ties)."""
    if keep < 1:
        raise ValueError("must keep at least one record")
    if len(records) < keep:
        raise InsufficientData(
            f"need {keep} records, dataset has {len(records)}")
    return sorted(records, key=lambda rec: rec.latency)[:keep]


def inject_errors(samples: Sequence[LeakSample], rate: float,
                  rng: random.Random) -> List[LeakSample]:
    """Perturb each sample's trailing-zero count by one, with probability
    ``rate``, mimicking a probe that miscounts trace tail events. The
    perturbed samples are flagged ``corrupted``."""
    if not 0 <= rate <= 1:
        raise ValueError("error rate must lie in [0, 1]")
    out: List[LeakSample] = []
    for sample in samples:
        if sample.bits < 2 or rng.random() >= rate:
            out.append(sample)
            continue
        j = sample.bits - 1 + rng.choice((-1, 1))
        out.append(replace(sample, bits=j + 1, value=1 << j, corrupted=True))
    return out


# ---------------------------------------------------------------------------
# leak serialization
# ---------------------------------------------------------------------------

_LEAK_COLUMNS = ("r", "s", "h", "bits", "value")


def _even_hex(value: int) -> str:
    text = format(value, "x")
    return "0" + text if len(text) % 2 else text


def _hex_field(text: str, column: str, row: int) -> int:
    try:
        return int.from_bytes(bytes.fromhex(text), "big")
    except ValueError:
        raise ParseError(f"column {column} is not even-length hex: {text!r}",
                         row) from None


def leaks_to_csv(samples: Sequence[LeakSample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_LEAK_COLUMNS)
    for sample in samples:
        writer.writerow([_even_hex(sample.r), _even_hex(sample.s),
                         _even_hex(sample.h), sample.bits, sample.value])
    return buf.getvalue()


def leaks_from_csv(text: str) -> List[LeakSample]:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(i + 1, row) for i, row in enumerate(rows) if row]
    if not rows or tuple(rows[0][1]) != _LEAK_COLUMNS:
        raise ParseError(f"header must be {','.join(_LEAK_COLUMNS)}", 1)
    samples: List[LeakSample] = []
    for rownum, row in rows[1:]:
        if len(row) != len(_LEAK_COLUMNS):
            raise ParseError(f"expected {len(_LEAK_COLUMNS)} columns, "
                             f"found {len(row)}", rownum)
        r = _hex_field(row[0], "r", rownum)
        s = _hex_field(row[1], "s", rownum)
        h = _hex_field(row[2], "h", rownum)
        try:
            bits, value = int(row[3]), int(row[4])
        except ValueError:
            raise ParseError("bits and value must be decimal integers",
                             rownum) from None
        try:
            samples.append(LeakSample(r, s, h, bits, value))
        except ValueError as exc:
            raise ParseError(str(exc), rownum) from None
    return samples
