import json
import math
from collections import OrderedDict
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posme import Params, gen
from posme.analysis import (
    POLICIES,
    adaptive_simulate,
    cascade_monte_carlo,
    cascade_samples,
    cascade_table,
    cascade_w,
    chernoff_tail,
    mixing_stats,
    regime,
    report_from_counts,
    st_product,
    st_product_strengthened,
    staleness_profile,
    staleness_w,
    tally_run,
    tmto_bound,
    tmto_penalty,
    tmto_simulate,
    two_proportion_z,
    vertex_counts,
    writes_before,
)
from posme.analysis.tables import format_alpha, format_count, format_ratio, round_half_up

ALPHAS = [Fraction(1, 6), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(7, 8)]


def exact_w(alpha: Fraction, rho: int, d: int) -> Fraction:
    m = d * (1 - alpha)
    return sum((m ** k for k in range(rho + 1)), Fraction(0))


def mp_w_star(alpha, rho, d):
    mpmath.mp.dps = 40
    a = mpmath.mpf(alpha.numerator) / alpha.denominator
    total, prod = mpmath.mpf(0), mpmath.mpf(1)
    for level in range(rho + 1):
        total += prod
        prod *= d * (1 - a * mpmath.e ** (-level))
    return total


@pytest.mark.parametrize("alpha", ALPHAS)
def test_cascade_w_exact(alpha):
    w = exact_w(alpha, 4, 8)
    assert cascade_w(float(alpha), 4, 8) == pytest.approx(float(w), rel=1e-12)
    st_exact = alpha * (1 - alpha) * 8 * w / 4
    assert st_product(float(alpha), 4, 8) == pytest.approx(float(st_exact), rel=1e-12)


@pytest.mark.parametrize("alpha", ALPHAS + [Fraction(19, 20)])
def test_staleness_w_high_precision(alpha):
    assert staleness_w(float(alpha), 4, 8) == pytest.approx(float(mp_w_star(alpha, 4, 8)), rel=1e-12)


def test_cascade_examples():
    assert cascade_w(0.5, 4, 8) == 341
    assert format_ratio(st_product(0.5, 4, 8)) == "171"
    assert cascade_w(7 / 8, 4, 8) == 5
    assert format_ratio(st_product(7 / 8, 4, 8)) == "1.09"
    assert cascade_w(1, 4, 8) == 1
    assert staleness_w(0, 4, 8) == cascade_w(0, 4, 8)
    assert format_count(staleness_w(7 / 8, 4, 8)) == "338"
    assert format_ratio(st_product_strengthened(7 / 8, 4, 8)) == "74"
    assert format_count(staleness_w(1 / 6, 4, 8)) == "3555"


def test_regimes():
    assert regime(1 / 2, 8) == "supercritical"
    assert regime(7 / 8, 8) == "critical"
    assert regime(0.95, 8) == "subcritical"


def test_bound_argument_checks():
    for f in (cascade_w, staleness_w):
        with pytest.raises(ValueError):
            f(1.5, 4, 8)
        with pytest.raises(ValueError):
            f(0.5, 2.5, 8)
    with pytest.raises(ValueError):
        tmto_bound(-0.1, 4, 8, 1)
    with pytest.raises(ValueError):
        cascade_table([1.0], 4, 8)


def test_tmto_bound_examples():
    assert tmto_penalty(0, 4) == 10
    assert tmto_bound(1, 4, 8, 100) == 800
    assert tmto_bound(0.5, 4, 8, 1) == 44


def test_chernoff_trivial():
    assert chernoff_tail(1000, 8, 4, 0) == 1000
    assert chernoff_tail(2**24, 8, 4, 1) == pytest.approx(2**24 * math.exp(-32 / 3))


@given(st.floats(0, 5), st.floats(0, 5))
def test_chernoff_monotone(a, b):
    lo, hi = sorted((a, b))
    assert chernoff_tail(2**20, 8, 4, hi) <= chernoff_tail(2**20, 8, 4, lo)


def test_monte_carlo_trivial_and_deterministic():
    assert cascade_monte_carlo(1, 4, 8, 1000, 0) == 1
    assert cascade_monte_carlo(0.5, 4, 8, 5000, 3) == cascade_monte_carlo(0.5, 4, 8, 5000, 3)
    # chunking is a fixed function of trials, not of how work is scheduled
    a = cascade_samples(0.5, 4, 8, 25_000, 9)
    assert np.array_equal(a[:10_000], cascade_samples(0.5, 4, 8, 10_000, 9))


def test_monte_carlo_variance_shrinks():
    means = {n: [cascade_monte_carlo(0.5, 4, 8, n, s) for s in range(30)] for n in (500, 8000)}
    ratio = np.var(means[500]) / np.var(means[8000])
    # expected 16; generous band for 30 replicates
    assert 5 < ratio < 50


def test_monte_carlo_near_w():
    assert cascade_monte_carlo(0.5, 4, 8, 20_000, 1) == pytest.approx(341, rel=0.05)


def test_tables_rounding():
    assert str(round_half_up(170.5)) == "171"
    assert format_ratio(11.625) == "11.6"
    assert format_ratio(1.09375) == "1.09"
    assert format_ratio(74.03) == "74"
    assert format_ratio(12.2166) == "12.2"
    assert format_ratio(645.48) == "645"
    assert format_alpha(1 / 6) == "1/6" and format_alpha(0.3) == "0.3"


def test_table_rows():
    t = cascade_table([float(a) for a in ALPHAS], 4, 8)
    assert [format_count(r.W) for r in t.rows] == ["2324", "1555", "341", "31", "5"]
    assert [format_ratio(r.st_over_k2) for r in t.rows] == ["645", "583", "171", "11.6", "1.09"]
    assert [r.regime for r in t.rows][-1] == "critical"
    for s in t.strengthened:
        assert s.W_star >= s.W and s.gain == pytest.approx(s.st_star_over_k2 / s.st_over_k2)


# -------------------------------------------------------------- mixing

def test_counts_match_linear_scan(run8):
    log, _ = run8
    N = log.params.N
    reads, writes = [0] * N, [0] * N
    for t in range(1, log.K + 1):
        rec = log.record(t)
        for v in rec.reads:
            reads[v] += 1
        writes[rec.write] += 1
    r, w = vertex_counts(log)
    assert r.tolist() == reads and w.tolist() == writes
    rep = mixing_stats(log)
    e = log.K * 8 / N
    chi = sum((o - e) ** 2 / e for o in reads) / (N - 1)
    assert rep.read_chi2_per_df == pytest.approx(chi, rel=1e-12)
    assert rep.unwritten_fraction == writes.count(0) / N
    assert rep.read_sigma == pytest.approx(float(np.std(reads)))


def test_k_zero_mixing():
    log, _ = gen(bytes(32), Params(d_hc=6, K=0), strict=False)
    r, w = vertex_counts(log)
    assert r.sum() == 0
    rep = report_from_counts(r, w, 0, 8)
    assert rep.unwritten_fraction == 1


def test_tally_matches_full_records(run10, seed):
    log, _ = run10
    rep, T = tally_run(seed, log.params, chunk=1000)
    assert T == log.final_transcript
    assert rep == mixing_stats(log)


def test_mixing_poisson_forms(run14):
    rep = mixing_stats(run14)
    exp = rep.expected()
    assert rep.read_sigma == pytest.approx(exp["read_sigma"], rel=0.03)
    assert rep.write_sigma == pytest.approx(exp["write_sigma"], rel=0.05)
    # binomial sd of the unwritten count at N = 2^14 is ~0.1 pp
    assert abs(rep.unwritten_fraction - exp["unwritten_fraction"]) < 0.005
    assert abs(rep.read_chi2_per_df - 1) < 0.05


# -------------------------------------------------------------- tmto

def test_writes_before_brute_force(run8):
    log, _ = run8
    wb = writes_before(log)
    writes = log.writes.tolist()
    for t in (1, 2, 100, 777, log.K):
        for j, v in enumerate(log.record(t).reads):
            assert wb[t - 1, j] == sum(1 for s in range(1, t) if writes[s - 1] == v)


def test_tmto_simulate_brute_force(run8):
    log, _ = run8
    rep = tmto_simulate(log, 0.3, seed=5)
    rng = np.random.default_rng(5)
    stored = set(rng.choice(log.params.N, math.floor(0.3 * log.params.N), replace=False).tolist())
    writes = log.writes.tolist()
    cost = 0
    for t in range(1, log.K + 1):
        for v in log.record(t).reads:
            cost += 1 if v in stored else 2 * sum(1 for s in range(1, t) if writes[s - 1] == v) + 1 + 1
    # each read costs one evaluation, a miss adds its replay
    assert rep.simulated_cost == cost - sum(1 for t in range(1, log.K + 1)
                                            for v in log.record(t).reads if v not in stored)


def test_tmto_extremes(run8):
    log, _ = run8
    full = tmto_simulate(log, 1, seed=0)
    assert full.simulated_cost == log.K * 8 and full.penalty_ratio == 1 and full.misses == 0
    assert tmto_simulate(log, 0.4, 3) == tmto_simulate(log, 0.4, 3)
    with pytest.raises(ValueError):
        tmto_simulate(log, 1.2, 0)


def test_tmto_midrun_chain_lengths(run14):
    rep = tmto_simulate(run14, 0, seed=0)
    # per-miss replay averages rho + 1 with chains as they stood at each read
    assert rep.mean_miss_cost == pytest.approx(rep.midrun_miss_cost, rel=0.02)
    assert rep.midrun_miss_cost == pytest.approx(5, rel=1e-3)
    assert rep.endrun_miss_cost == 9 and rep.analytic_ratio == 10
    assert rep.penalty_ratio == pytest.approx(rep.midrun_ratio, rel=0.02)
    assert rep.penalty_ratio == pytest.approx(5, rel=0.02)


# -------------------------------------------------------------- adaptive

def test_adaptive_extremes(run8):
    log, _ = run8
    for p in POLICIES:
        assert adaptive_simulate(log, 1, p, 0).hit_rate == 1
        assert adaptive_simulate(log, 0, p, 0).hit_rate == 0
    with pytest.raises(ValueError):
        adaptive_simulate(log, 0.5, "oracle", 0)


def test_recent_writes_matches_naive(run8):
    log, _ = run8
    N, k = log.params.N, 64
    rng = np.random.default_rng(4)
    order = rng.choice(N, k, replace=False).tolist()
    hits = 0
    for t in range(1, log.K + 1):
        rec = log.record(t)
        hits += sum(v in order for v in rec.reads)
        if rec.write in order:
            order.remove(rec.write)
        else:
            order.pop(0)
        order.append(rec.write)
    assert adaptive_simulate(log, k / N, "recent_writes", 4).hits == hits


def test_frequent_reads_keeps_a_top_set(run8):
    # after the run the stored set holds k vertices whose counts dominate the rest
    from posme.analysis import simulate

    log, _ = run8
    reads = log.reads.astype(np.int64)
    N, k = log.params.N, 32
    hits = simulate._frequent_reads(reads, N, k, np.random.default_rng(0))
    assert 0 < hits <= reads.size


def test_adaptive_equivalence(run14):
    base = adaptive_simulate(run14, 0.25, "static", 1)
    for p in POLICIES:
        r = adaptive_simulate(run14, 0.25, p, 1)
        assert abs(r.hit_rate - 0.25) < 3 * math.sqrt(0.25 * 0.75 / r.reads) + 1 / 64
        assert two_proportion_z(r, base)[1] > 0.01


def test_two_proportion_z():
    from posme.analysis import AdaptiveReport
    a = AdaptiveReport("x", 0.5, 500, 1000)
    assert two_proportion_z(a, a) == (0.0, 1.0)
    b = AdaptiveReport("y", 0.5, 600, 1000)
    z, p = two_proportion_z(b, a)
    assert z > 4 and p < 1e-4


def test_staleness_profile_decays(run14):
    prof = staleness_profile(run14, 1.0, 0)
    assert len(prof) == 4
    assert all(x > y for x, y in zip(prof, prof[1:]))
    for level, x in enumerate(prof):
        assert x == pytest.approx(math.exp(-level), rel=0.2)


def test_reports_are_json_ready(run8):
    from posme.analysis import to_jsonable
    log, _ = run8
    json.dumps(to_jsonable(mixing_stats(log)))
    json.dumps(to_jsonable(tmto_simulate(log, 0.5, 0)))
    json.dumps(to_jsonable(cascade_table([0.5], 4, 8)))
