import math
import random

import pytest
from hypothesis import given, strategies as st

import helpers
from keyside import bigmath


# --- variable-time modexp ----------------------------------------------------

@given(st.integers(0, 2 ** 96), st.integers(0, 2 ** 64),
       st.integers(1, 2 ** 48), st.integers(2, 6))
def test_modexp_vartime_matches_pow(base, exponent, modulus_seed, w):
    modulus = 2 * modulus_seed + 1
    result, trace, event = bigmath.modexp_vartime(base, exponent, modulus, w)
    assert result == pow(base, exponent, modulus)
    assert event.kind == bigmath.KIND_MODEXP
    assert trace.w == w
    assert trace.events[-1] == ("R",)


def test_modexp_trace_shape():
    _result, trace, _event = bigmath.modexp_vartime(3, 0b110101, 1000003, w=3)
    # exponent 110101: leading window 0b11 (idx 1), S, S, M by 0b101 (idx 2)
    assert trace.events[0] == ("M", 1)
    assert trace.events == (("M", 1), ("S",), ("S",), ("S",), ("S",),
                            ("M", 2), ("R",))
    assert trace.squares == 4 and trace.multiplies == 2


def test_modexp_zero_exponent():
    result, trace, _event = bigmath.modexp_vartime(7, 0, 11)
    assert result == 1
    assert trace.events == (("R",),)


def test_modexp_window_indices_are_odd_powers():
    rng = random.Random(5)
    for _ in range(50):
        e = rng.getrandbits(64) | 1
        w = rng.choice((2, 3, 4, 5, 6))
        _r, trace, _ev = bigmath.modexp_vartime(2, e, 10 ** 9 + 7, w)
        for ev in trace.events:
            if ev[0] == "M":
                assert 0 <= ev[1] < (1 << (w - 1))


def test_modexp_errors():
    with pytest.raises(bigmath.EvenModulus):
        bigmath.modexp_vartime(2, 3, 10)
    with pytest.raises(bigmath.ZeroModulus):
        bigmath.modexp_vartime(2, 3, 0)
    with pytest.raises(ValueError):
        bigmath.modexp_vartime(2, 3, 11, w=1)
    with pytest.raises(ValueError):
        bigmath.modexp_vartime(2, 3, 11, w=7)
    with pytest.raises(ValueError):
        bigmath.modexp_vartime(2, -1, 11)


def test_window_trace_jsonl_round_trip():
    _r, trace, _ev = bigmath.modexp_vartime(5, 12345, 99991, w=4)
    again = bigmath.WindowTrace.from_jsonl(trace.to_jsonl(), 4)
    assert again == trace
    with pytest.raises(ValueError):
        bigmath.WindowTrace.from_jsonl('{"op": "X"}', 4)


# --- constant-time modexp ----------------------------------------------------

@given(st.integers(0, 2 ** 64), st.integers(0, 2 ** 48),
       st.integers(1, 2 ** 32))
def test_modexp_consttime_matches_pow(base, exponent, modulus_seed):
    modulus = 2 * modulus_seed + 1
    assert bigmath.modexp_consttime(base, exponent, modulus) == pow(
        base, exponent, modulus)


def test_modexp_consttime_schedule_depends_on_bitlength_only():
    modulus = (1 << 127) - 1
    counts = set()
    for exponent in (0b1000 << 60, (1 << 63) + 12345, (1 << 64) - 1):
        counter = bigmath.StepCounter()
        bigmath.modexp_consttime(3, exponent, modulus, counter=counter)
        counts.add(tuple(sorted(counter.counts.items())))
    assert len(counts) == 1


# --- binary gcd and BEEA -----------------------------------------------------

@given(st.integers(1, 2 ** 80), st.integers(1, 2 ** 80))
def test_binary_gcd_matches_math(a, b):
    g, trace, event = bigmath.binary_gcd_vartime(a, b)
    assert g == math.gcd(a, b)
    assert event.kind == bigmath.KIND_GCD
    valid = {bigmath.SHIFT_U, bigmath.SHIFT_V,
             bigmath.SUB_U_FROM_V, bigmath.SUB_V_FROM_U}
    assert set(trace.events) <= valid


@given(st.integers(1, 2 ** 80), st.integers(2, 2 ** 80))
def test_beea_invmod_matches_pow(a, modulus):
    try:
        expected = pow(a, -1, modulus)
    except ValueError:
        with pytest.raises(bigmath.NotInvertible):
            bigmath.beea_invmod_vartime(a, modulus)
        return
    result, trace, event = bigmath.beea_invmod_vartime(a, modulus)
    assert result == expected
    assert event.kind == bigmath.KIND_MODINV
    assert len(trace.events) > 0


def test_beea_trace_jsonl_round_trip():
    _r, trace, _ev = bigmath.beea_invmod_vartime(65537, (1 << 89) - 1)
    assert bigmath.BeeaTrace.from_jsonl(trace.to_jsonl()) == trace
    with pytest.raises(ValueError):
        bigmath.BeeaTrace.from_jsonl('{"op": "bogus"}')


@given(st.integers(1, 2 ** 64), st.integers(2, 2 ** 64))
def test_invmod_consttime_matches_pow(a, modulus):
    try:
        expected = pow(a, -1, modulus)
    except ValueError:
        with pytest.raises(bigmath.NotInvertible):
            bigmath.invmod_consttime(a, modulus)
        return
    assert bigmath.invmod_consttime(a, modulus) == expected


def test_invmod_consttime_schedule_depends_on_bitlength_only():
    modulus = (1 << 61) - 1
    counts = set()
    for a in (3, 5, (1 << 60) + 33, (1 << 59) + 1):
        counter = bigmath.StepCounter()
        bigmath.invmod_consttime(a, modulus, counter=counter)
        counts.add(tuple(sorted(counter.counts.items())))
    assert len(counts) == 1


def test_gcd_zero_inputs_rejected():
    with pytest.raises(bigmath.ZeroInput):
        bigmath.binary_gcd_vartime(0, 5)
    with pytest.raises(bigmath.ZeroInput):
        bigmath.beea_invmod_vartime(5, 1)
    with pytest.raises(bigmath.ZeroInput):
        bigmath.lcm_via_gcd(0, 5)


# --- primality ----------------------------------------------------------------

def test_miller_rabin_known_values():
    rng = random.Random(1)
    primes = (5, 7, 97, 65537, (1 << 127) - 1)
    for p in primes:
        ok, _events = bigmath.miller_rabin(p, rounds=16, rng=rng)
        assert ok, p
    composites = (9, 15, 561, 1105, 2047, 65539 * 3, (1 << 89) + 1)
    for c in composites:
        ok, _events = bigmath.miller_rabin(c, rounds=16, rng=rng)
        assert not ok, c


@given(st.integers(2, 2 ** 40))
def test_miller_rabin_matches_reference(seed):
    candidate = 2 * seed + 3
    ok, _events = bigmath.miller_rabin(candidate, rounds=24,
                                       rng=random.Random(seed))
    assert ok == helpers.is_probable_prime(candidate)


def test_miller_rabin_event_stream():
    ok, events = bigmath.miller_rabin(97, rounds=8, rng=random.Random(2))
    assert ok
    kinds = [e.kind for e in events]
    assert kinds.count(bigmath.KIND_MODEXP) == 8
    assert kinds[-1] == bigmath.KIND_MODINV
    assert events[-1].context == "mont-setup"
    ok, events = bigmath.miller_rabin(97, rounds=8, rng=random.Random(2),
                                      consttime=True)
    assert ok and events == []


def test_miller_rabin_rejects_trivial():
    with pytest.raises(ValueError):
        bigmath.miller_rabin(3)
    with pytest.raises(bigmath.EvenInput):
        bigmath.miller_rabin(100)


def test_lcm_via_gcd():
    value, event = bigmath.lcm_via_gcd(12, 18)
    assert value == 36
    assert event.kind == bigmath.KIND_GCD
    assert event.context == "lcm-gcd"
