import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings, strategies as st

from isingbench.rng import (
    PRNG0, PRNG1, PRNG2, PRNG3, BUILTIN_LCGS,
    EntropyExhausted, EntropyFileStream, LcgParams, LcgStream, ReseededLcgStream,
    ReseedPolicy, RngError, ScriptedStream, SiteStreams, SplitMix64Stream,
    draw_site_seeds, get_params, lcg_next, parse_kappa, spawn_site_streams,
    splitmix64_mix, to_unit_interval,
)

GENERATORS = [PRNG0, PRNG1, PRNG2, PRNG3]


def oracle(seed, params, n):
    # closed form for c = 0: x_n = a^n x_0 mod m
    return [pow(params.multiplier, k, params.modulus) * seed % params.modulus for k in range(1, n + 1)]


@pytest.mark.parametrize("params", GENERATORS, ids=lambda p: p.name)
def test_matches_big_int_oracle(params):
    seed = 1234567 % params.modulus
    s = LcgStream(params, seed)
    got = [s.next_raw() for _ in range(10_000)]
    assert got == oracle(seed, params, 10_000)


@pytest.mark.parametrize("params", GENERATORS, ids=lambda p: p.name)
def test_block_fill_matches_scalar(params):
    a, b = LcgStream(params, 99), LcgStream(params, 99)
    block = a.next_raw_block(5000)
    assert block.tolist() == [float(b.next_raw()) for _ in range(5000)]
    assert a.state == b.state and a.draws == b.draws == 5000


def test_prng3_full_period():
    seed, x = 1, 1
    for n in range(1, 200_000):
        x = lcg_next(x, PRNG3)
        if x == seed:
            break
    assert n == PRNG3.modulus - 1 == 131070


def test_prng0_short_period():
    # 2**32 - 1 is composite, the orbit of 1 under 16807 is far shorter than m - 1
    x, n = lcg_next(1, PRNG0), 1
    while x != 1:
        x, n = lcg_next(x, PRNG0), n + 1
    assert n == 65536


def test_lcg_next_examples():
    assert lcg_next(1, PRNG3) == 43165
    assert lcg_next(43165, PRNG3) == 43165 * 43165 % 131071
    assert lcg_next(5, LcgParams(16, 5, 3)) == 12


def test_unit_interval():
    assert to_unit_interval(0, 8) == 0.0
    assert to_unit_interval(4, 8) == 0.5
    assert to_unit_interval(131070, 131071) < 1.0


def test_table_constants():
    assert [(p.modulus, p.multiplier, p.increment) for p in GENERATORS] == [
        (4294967295, 16807, 0), (33554393, 12836191, 0), (8388593, 422527, 0), (131071, 43165, 0)]
    assert get_params("PRNG2") is PRNG2
    with pytest.raises(RngError):
        get_params("prng9")


@pytest.mark.parametrize("m,a,c", [(1, 1, 0), (16, 0, 1), (16, 16, 0), (16, 3, 16), (2**64, 3, 0)])
def test_invalid_params(m, a, c):
    with pytest.raises(RngError):
        LcgParams(m, a, c)


def test_zero_seed_rejected_for_multiplicative():
    with pytest.raises(RngError):
        LcgStream(PRNG3, 0)
    with pytest.raises(RngError):
        LcgStream(PRNG3, PRNG3.modulus)
    LcgStream(LcgParams(16, 5, 3), 0)


def test_reseed_interval_rounding():
    assert ReseedPolicy.for_params(1, PRNG3).reseed_interval == 131070
    assert ReseedPolicy.for_params("1/4", PRNG3).reseed_interval == 32768  # 32767.5 rounds up
    assert ReseedPolicy.for_params(Fraction(1, 2), PRNG3).reseed_interval == 65535
    assert ReseedPolicy(Fraction(1, 3), 10).reseed_interval == 3
    assert ReseedPolicy(Fraction(1, 4), 10).reseed_interval == 3  # 2.5 rounds up
    with pytest.raises(RngError):
        ReseedPolicy(Fraction(1, 100), 10)
    with pytest.raises(RngError):
        parse_kappa("-1")


def test_reseeded_stream_schedule():
    seeds = SplitMix64Stream(5)
    s = ReseededLcgStream(PRNG3, ReseedPolicy(Fraction(1), 10), seeds, seed=7)
    raws = [s.next_raw() for _ in range(25)]
    assert s.reseeds == 2 and s.draws == 25
    assert raws[:10] == oracle(7, PRNG3, 10)
    # draws 11..20 continue from the first reseed
    check = SplitMix64Stream(5)
    first = check.next_raw() % PRNG3.modulus
    assert raws[10:20] == oracle(first, PRNG3, 10)


def test_reseeded_block_matches_scalar():
    mk = lambda: ReseededLcgStream(PRNG3, ReseedPolicy.for_params("1/4", PRNG3), SplitMix64Stream(11))
    a, b = mk(), mk()
    block = a.next_raw_block(100_000)
    assert block.tolist() == [float(b.next_raw()) for _ in range(100_000)]
    assert a.reseeds == b.reseeds == 3


def test_draw_counting():
    s = LcgStream(PRNG1, 3)
    s.next_raw(); s.next_value(); s.next_raw_block(10)
    assert s.draws == 12


def test_entropy_file_exhaustion(tmp_path):
    path = tmp_path / "e.bin"
    path.write_bytes(bytes(range(1, 9)))
    with EntropyFileStream(path, 32) as s:
        assert s.next_raw() == 0x04030201
        assert s.next_raw() == 0x08070605
        with pytest.raises(EntropyExhausted):
            s.next_raw()
        assert s.draws == 2 and s.cursor == 8


def test_entropy_file_wrap_and_offset(tmp_path):
    path = tmp_path / "e.bin"
    path.write_bytes(bytes([1, 0, 2, 0, 3, 0]))
    with EntropyFileStream(path, 16, exhausted_policy="wrap") as s:
        assert [s.next_raw() for _ in range(7)] == [1, 2, 3, 1, 2, 3, 1]
    with EntropyFileStream(path, 16, offset=2) as s:
        assert s.next_raw_block(2).tolist() == [2.0, 3.0]
        assert s.remaining_words() == 0
    with pytest.raises(RngError):
        EntropyFileStream(path, 12)


def test_scripted_stream():
    s = ScriptedStream([1, 2], 4)
    assert [s.next_raw(), s.next_raw()] == [1, 2]
    with pytest.raises(EntropyExhausted):
        s.next_raw()
    c = ScriptedStream([3], 4, cycle=True)
    assert [c.next_value() for _ in range(3)] == [0.75] * 3


def test_splitmix64_reference_values():
    # published reference outputs of SplitMix64 seeded with 1234567
    s = SplitMix64Stream(1234567)
    assert [s.next_raw() for _ in range(3)] == [6457827717110365317, 3203168211198807973, 9817491932198370423]
    assert splitmix64_mix(0) == 0


def test_spawn_deterministic_and_distinct():
    a = spawn_site_streams(SplitMix64Stream(1), PRNG3, 1000)
    b = spawn_site_streams(SplitMix64Stream(1), PRNG3, 1000)
    assert [s.state for s in a] == [s.state for s in b]
    assert len({s.state for s in a}) == 1000
    assert all(PRNG3.valid_seed(s.state) for s in a)


def test_zero_seed_redrawn():
    seeds = draw_site_seeds(ScriptedStream([0, 131071, 5, 5, 6], 2**32), PRNG3, 2)
    assert seeds == [5, 6]
    with pytest.raises(RngError):
        draw_site_seeds(SplitMix64Stream(0), LcgParams(5, 2), 5)


def test_site_streams_match_scalar_streams():
    bank = SiteStreams.spawn(SplitMix64Stream(3), PRNG2, 16)
    scalars = spawn_site_streams(SplitMix64Stream(3), PRNG2, 16)
    idx = np.array([0, 2, 5, 7, 8, 10, 13, 15])
    for _ in range(20):
        got = bank.next_raw(idx)
        assert got.tolist() == [scalars[k].next_raw() for k in idx]
    assert bank.total_draws == 160
    with pytest.raises(RngError):
        bank.lockstep_draws()


def test_site_streams_reseed():
    bank = SiteStreams.spawn(SplitMix64Stream(3), PRNG3, 4, ReseedPolicy(Fraction(1), 3))
    idx = np.arange(4)
    for _ in range(7):
        bank.next_raw(idx)
    assert bank.lockstep_draws() == 7 and bank.reseeds == 2


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(GENERATORS), st.integers(1, 2**40), st.integers(1, 300))
def test_prop_raw_in_range_and_oracle(params, seed, n):
    seed = seed % (params.modulus - 1) + 1
    s = LcgStream(params, seed)
    raws = s.next_raw_block(n)
    assert ((raws >= 1) & (raws < params.modulus)).all()
    assert int(raws[-1]) == pow(params.multiplier, n, params.modulus) * seed % params.modulus


@settings(max_examples=60, deadline=None)
@given(st.fractions(min_value=Fraction(1, 64), max_value=Fraction(4)), st.integers(1000, 10**6))
def test_prop_reseed_interval_round_half_up(kappa, base):
    iv = ReseedPolicy(kappa, base).reseed_interval
    x = kappa * base
    assert iv - Fraction(1, 2) <= x < iv + Fraction(1, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(1, 200))
def test_prop_seed_source_determinism(seed, n):
    a = draw_site_seeds(SplitMix64Stream(seed), PRNG3, n)
    assert a == draw_site_seeds(SplitMix64Stream(seed), PRNG3, n)
    assert len(set(a)) == n and all(0 < x < PRNG3.modulus for x in a)


def test_reseed_schedule_no_drift_over_1e9_draws():
    policy = ReseedPolicy.for_params("1/4", PRNG3)
    s = ReseededLcgStream(PRNG3, policy, SplitMix64Stream(1))
    block = 10**7
    for _ in range(100):
        s.next_raw_block(block)
    assert s.draws == 10**9
    # a reseed precedes every draw whose index is a positive multiple of the interval
    assert s.reseeds == (10**9 - 1) // policy.reseed_interval == 30517
