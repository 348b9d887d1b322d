"""Address-uniformity statistics over a run's read and write coordinates."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..arena import Params
from ..engine import Machine, RunLog, _Sink


@dataclasses.dataclass(frozen=True)
class MixingReport:
    N: int
    K: int
    d: int
    rho: float
    read_chi2_per_df: float
    write_chi2_per_df: float
    read_sigma: float
    write_sigma: float
    unwritten_fraction: float
    max_read_over_mean: float
    max_write_over_mean: float

    def expected(self) -> dict[str, float]:
        """Poisson predictions for each statistic."""
        return {
            "read_chi2_per_df": 1.0,
            "write_chi2_per_df": 1.0,
            "read_sigma": math.sqrt(self.d * self.rho),
            "write_sigma": math.sqrt(self.rho),
            "unwritten_fraction": math.exp(-self.rho),
        }


def _chi2_per_df(counts: np.ndarray, expected: float) -> float:
    if expected == 0 or len(counts) < 2:
        return math.nan
    dev = counts.astype(np.float64) - expected
    return float(np.dot(dev, dev) / expected / (len(counts) - 1))


def report_from_counts(read_counts: np.ndarray, write_counts: np.ndarray,
                       K: int, d: int) -> MixingReport:
    """Build a report from exact per-vertex count arrays of length N."""
    N = len(read_counts)
    if len(write_counts) != N:
        raise ValueError("count arrays differ in length")
    e_read = K * d / N
    e_write = K / N
    return MixingReport(
        N=N, K=K, d=d, rho=e_write,
        read_chi2_per_df=_chi2_per_df(read_counts, e_read),
        write_chi2_per_df=_chi2_per_df(write_counts, e_write),
        read_sigma=float(np.std(read_counts)),
        write_sigma=float(np.std(write_counts)),
        unwritten_fraction=float(np.count_nonzero(write_counts == 0) / N),
        max_read_over_mean=float(read_counts.max() / e_read) if K else math.nan,
        max_write_over_mean=float(write_counts.max() / e_write) if K else math.nan,
    )


def vertex_counts(run_log: RunLog) -> tuple[np.ndarray, np.ndarray]:
    if run_log.lean:
        raise ValueError("mixing statistics need step records (not a lean run log)")
    N = run_log.params.N
    reads = np.bincount(run_log.reads.ravel().astype(np.int64), minlength=N)
    writes = np.bincount(run_log.writes.astype(np.int64), minlength=N)
    return reads, writes


def mixing_stats(run_log: RunLog) -> MixingReport:
    reads, writes = vertex_counts(run_log)
    return report_from_counts(reads, writes, run_log.K, run_log.params.d)


def tally_run(seed: bytes, params: Params, chunk: int = 1 << 16) -> tuple[MixingReport, bytes]:
    """Execute a full run keeping only per-vertex counts.

    Memory stays at the arena plus its tree, which is what makes the
    recommended 2**24 arena reachable.  Returns the report and ``T_K``.
    """
    m = Machine(seed, params)
    N = params.N
    reads = np.zeros(N, dtype=np.int64)
    writes = np.zeros(N, dtype=np.int64)
    while m.t < params.K:
        sink = _Sink(records=True, write_log=False)
        m.advance(min(params.K, m.t + chunk), sink)
        reads += np.bincount(np.frombuffer(sink.reads, dtype=np.uint64).astype(np.int64), minlength=N)
        writes += np.bincount(np.frombuffer(sink.writes, dtype=np.uint64).astype(np.int64), minlength=N)
    return report_from_counts(reads, writes, params.K, params.d), m.T
