import statistics

import pytest

from posme import Params, gen, hashing
from posme import bench
from posme.engine import Machine


def test_report_fields_and_side_car(seed):
    (r,) = bench.bench_steps([8], rho=4, d=8, reps=3, max_steps=600, seed=seed, pin=False)
    assert r.arena_bytes == 256 * 64 and r.K == 600 and r.reps == 3
    assert r.ns_per_step > 0 and 0 < r.hash_fraction < 1.5
    assert r.method == "separate-replay" and r.machine and r.timestamp
    # timing never alters outputs
    log, _ = gen(seed, Params.from_rho(8, 4), strict=False)
    assert r.transcript == log.transcript(600).hex()


def test_replay_executes_same_calls(seed):
    params = Params.from_rho(8, 4)
    m = Machine(seed, params)
    with hashing.hash_counter() as hc:
        m.advance(500)
    (r,) = bench.bench_steps([8], reps=1, max_steps=500, seed=seed, pin=False)
    assert r.hash_calls == hc.calls


def test_reps_stability(seed):
    a = bench.bench_steps([14], reps=1, max_steps=65536, seed=seed, pin=False)[0].ns_per_step
    b = bench.bench_steps([14], reps=5, max_steps=65536, seed=seed, pin=False)[0].ns_per_step
    assert abs(a - b) / b < 0.2


def test_skip_when_memory_short(monkeypatch, caplog):
    monkeypatch.setattr(bench, "available_memory", lambda: 1)
    assert bench.bench_steps([10], reps=1, max_steps=10, pin=False) == []
    assert "skipping" in caplog.text


def test_reps_validated():
    with pytest.raises(ValueError):
        bench.bench_steps([8], reps=0)


@pytest.mark.parametrize("n", [1, 2, 7, 1000])
def test_single_cycle(n):
    nxt = bench.single_cycle(n, seed=n)
    seen, i = set(), 0
    for _ in range(n):
        seen.add(i)
        i = int(nxt[i])
    assert i == 0 and len(seen) == n


def test_pointer_chase_basic():
    ns = bench.bench_pointer_chase(1 << 16, 4096)
    assert ns > 0
    with pytest.raises(ValueError):
        bench.bench_pointer_chase(1 << 16, 0)


@pytest.mark.skipif(bench.chase_backend() != "numba", reason="needs the compiled chase loop")
def test_cache_resident_chase_is_fast():
    assert bench.bench_pointer_chase(16 * 1024, 1 << 20) < 10


@pytest.mark.skipif(bench.chase_backend() != "numba", reason="needs the compiled chase loop")
def test_chase_time_is_linear_in_steps():
    size = 64 << 20
    one = statistics.median(bench.bench_pointer_chase(size, 1 << 21) for _ in range(3))
    two = statistics.median(bench.bench_pointer_chase(size, 1 << 22) for _ in range(3))
    # ns/load is constant when total time doubles with the step count
    assert abs(two / one - 1) < 0.10


def test_init_scales_with_size():
    small = min(bench.bench_init(10) for _ in range(3))
    big = min(bench.bench_init(13) for _ in range(3))
    assert 4 < big / small < 16


def test_format_bench(seed):
    reports = bench.bench_steps([8], reps=1, max_steps=100, seed=seed, pin=False)
    text = bench.format_bench(reports)
    assert "ns/step" in text and "16 KiB" in text
