"""Latency benchmarks: per-step wall time, hash-time fraction, dependent
loads and initialization cost.

Timings are side-cars; nothing measured here feeds back into a run.
"""

from __future__ import annotations

import dataclasses
import datetime
import gc
import logging
import os
import platform
import statistics
import time
from array import array

import numpy as np

from . import hashing
from .arena import BLOCK_SIZE, Params
from .engine import Machine, _Sink

log = logging.getLogger(__name__)

HASH_FRACTION_METHOD = "separate-replay"
_CHUNK = 2048
# arena + tree heap + per-step records, with headroom for the interpreter
_BYTES_PER_VERTEX = BLOCK_SIZE + 2 * 32 + 64


@dataclasses.dataclass(frozen=True)
class BenchReport:
    d_hc: int
    arena_bytes: int
    K: int
    reps: int
    ns_per_step: float
    hash_fraction: float
    hash_calls: int
    transcript: str
    machine: str
    pinned: bool
    timestamp: str
    method: str = HASH_FRACTION_METHOD


def machine_descriptor() -> str:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return f"{cpu}; {platform.system()} {platform.release()}; Python {platform.python_version()}"


def pin_to_one_cpu() -> bool:
    """Restrict this process to a single CPU when the platform allows."""
    try:
        cpus = sorted(os.sched_getaffinity(0))
        os.sched_setaffinity(0, {cpus[0]})
        return True
    except (AttributeError, OSError):
        return False


def available_memory() -> int | None:
    try:
        with open("/proc/meminfo") as f:
            for line in f:
                if line.startswith("MemAvailable:"):
                    return int(line.split()[1]) * 1024
    except OSError:
        pass
    return None


def _timed_loop(seed: bytes, params: Params, steps: int) -> tuple[int, bytes]:
    m = Machine(seed, params)
    sink = _Sink(records=True, write_log=False)
    enabled = gc.isenabled()
    gc.disable()  # as timeit does; collector pauses are not part of a step
    try:
        t0 = time.perf_counter_ns()
        m.advance(steps, sink)
        return time.perf_counter_ns() - t0, m.T
    finally:
        if enabled:
            gc.enable()


def _hash_replay(seed: bytes, params: Params, steps: int, reps: int) -> tuple[list[int], int]:
    """Record the hash inputs of ``steps`` steps chunk by chunk and time
    re-hashing exactly those inputs; returns per-rep totals and the call count."""
    m = Machine(seed, params)
    b3 = hashing.blake3
    totals = [0] * reps
    calls = 0
    while m.t < steps:
        with hashing.recording_hasher() as rec:
            m.advance(min(steps, m.t + _CHUNK))
        inputs = rec.inputs
        calls += len(inputs)
        gc.disable()
        try:
            for r in range(reps):
                t0 = time.perf_counter_ns()
                for x in inputs:
                    b3(x).digest()
                totals[r] += time.perf_counter_ns() - t0
        finally:
            gc.enable()
    return totals, calls


def bench_steps(d_hc_list, rho: float = 4, d: int = 8, reps: int = 3, *,
                max_steps: int | None = None, seed: bytes | None = None,
                pin: bool = True) -> list[BenchReport]:
    """Median per-step time over ``reps`` runs for each arena size.

    Initialization and a short warm-up are excluded from the timed region.  ``max_steps`` caps the
    timed steps (default ``K = rho * N``).  Sizes that do not fit in
    available memory are skipped with a log notice.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    seed = seed if seed is not None else hashing.derive_seed(b"bench", b"0")
    pinned = pin_to_one_cpu() if pin else False
    reports = []
    for d_hc in d_hc_list:
        params = Params.from_rho(d_hc, rho, d=d)
        need = params.N * _BYTES_PER_VERTEX
        avail = available_memory()
        if avail is not None and need > avail:
            log.warning("skipping d_hc=%d: needs ~%d MiB, %d MiB available",
                        d_hc, need >> 20, avail >> 20)
            continue
        steps = params.K if max_steps is None else min(params.K, max_steps)
        loop_ns, transcripts = [], set()
        _timed_loop(seed, params, min(steps, _CHUNK))  # untimed warm-up
        for _ in range(reps):
            ns, T = _timed_loop(seed, params, steps)
            loop_ns.append(ns)
            transcripts.add(T)
        if len(transcripts) != 1:
            raise RuntimeError("benchmark repetitions disagree on the transcript")
        hash_ns, calls = _hash_replay(seed, params, steps, reps)
        loop_med = statistics.median(loop_ns)
        reports.append(BenchReport(
            d_hc=d_hc,
            arena_bytes=params.N * BLOCK_SIZE,
            K=steps,
            reps=reps,
            ns_per_step=loop_med / steps if steps else float("nan"),
            hash_fraction=statistics.median(hash_ns) / loop_med if loop_med else float("nan"),
            hash_calls=calls,
            transcript=transcripts.pop().hex(),
            machine=machine_descriptor(),
            pinned=pinned,
            timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        ))
    return reports


def single_cycle(n: int, seed: int = 0) -> np.ndarray:
    """Successor array of a uniformly random cyclic permutation of ``n``
    elements (one cycle through every index, as Sattolo's algorithm yields)."""
    if n < 1:
        raise ValueError("need at least one element")
    order = np.random.default_rng(seed).permutation(n)
    nxt = np.empty(n, dtype=np.int64)
    nxt[order[:-1]] = order[1:]
    nxt[order[-1]] = order[0]
    return nxt


def _chase_python(nxt, steps: int) -> int:
    i = 0
    for _ in range(steps):
        i = nxt[i]
    return i


try:  # compiled loop measures memory latency rather than interpreter overhead
    import numba

    _chase_native = numba.njit(cache=False)(_chase_python)
except ImportError:  # pragma: no cover - depends on the environment
    _chase_native = None


def chase_backend() -> str:
    return "numba" if _chase_native is not None else "python"


def bench_pointer_chase(arena_bytes: int, steps: int, *, seed: int = 0, reps: int = 3) -> float:
    """Median nanoseconds per dependent 8-byte load over a single-cycle
    permutation spanning ``arena_bytes``.

    Uses a compiled loop when numba is importable; the pure-Python fallback
    is dominated by interpreter overhead and only useful as a smoke test.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    nxt = single_cycle(max(1, arena_bytes // 8), seed)
    if _chase_native is not None:
        chase, data = _chase_native, nxt
        chase(data, 1)  # compile outside the timed region
    else:
        chase, data = _chase_python, array("q", nxt.tobytes())
    times = []
    for _ in range(reps):
        chase(data, min(steps, len(data)))  # warm the cycle
        t0 = time.perf_counter_ns()
        chase(data, steps)
        times.append(time.perf_counter_ns() - t0)
    return statistics.median(times) / steps


def bench_init(d_hc: int, *, seed: bytes | None = None) -> float:
    """Seconds to fill an arena of ``2**d_hc`` blocks and build its tree."""
    seed = seed if seed is not None else hashing.derive_seed(b"bench", b"0")
    params = Params(d_hc=d_hc, K=0)
    t0 = time.perf_counter()
    Machine(seed, params)
    return time.perf_counter() - t0


def format_bench(reports: list[BenchReport]) -> str:
    rows = [["Arena", "Steps", "ns/step", "hash %", "pinned"]]
    for r in reports:
        rows.append([_fmt_bytes(r.arena_bytes), str(r.K), f"{r.ns_per_step:.0f}",
                     f"{100 * r.hash_fraction:.1f}", "yes" if r.pinned else "no"])
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    head = reports[0].machine if reports else machine_descriptor()
    return f"{head}\nhash % by {HASH_FRACTION_METHOD}\n" + "\n".join(lines)


def _fmt_bytes(n: int) -> str:
    for unit in ("B", "KiB", "MiB", "GiB", "TiB"):
        if n < 1024 or unit == "TiB":
            return f"{n:g} {unit}"
        n /= 1024
    return str(n)
