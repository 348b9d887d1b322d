"""Arena-based adversary simulations over recorded runs.

Both simulators consume the per-step read/write coordinates of a run log;
block contents never matter, only which vertices an adversary kept.
"""

from __future__ import annotations

import dataclasses
import math
from collections import OrderedDict

import numpy as np
from scipy.stats import norm

from ..engine import RunLog
from .bounds import tmto_bound

POLICIES = ("static", "random", "recent_writes", "frequent_reads")


def _require_records(run_log: RunLog) -> None:
    if run_log.lean:
        raise ValueError("simulation needs step records (not a lean run log)")


def _stored_count(alpha: float, N: int) -> int:
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return math.floor(alpha * N)


@dataclasses.dataclass(frozen=True)
class TmtoReport:
    alpha: float
    rho: float
    d: int
    K: int
    analytic_bound: float
    simulated_cost: int
    penalty_ratio: float
    analytic_ratio: float
    midrun_ratio: float
    misses: int
    mean_miss_cost: float
    midrun_miss_cost: float
    endrun_miss_cost: float

    @property
    def honest_cost(self) -> int:
        return self.K * self.d


def writes_before(run_log: RunLog) -> np.ndarray:
    """For every read (K x d), the number of writes to its vertex strictly
    before the reading step."""
    _require_records(run_log)
    K, d = run_log.reads.shape
    if K == 0:
        return np.zeros((0, d), dtype=np.int64)
    span = K + 2
    verts = run_log.writes.astype(np.int64)
    if int(verts.max(initial=0)) * span + span >= 2 ** 62:
        raise OverflowError("run too large for the packed write index")
    wkeys = np.sort(verts * span + np.arange(1, K + 1, dtype=np.int64))
    rv = run_log.reads.astype(np.int64)
    steps = np.arange(1, K + 1, dtype=np.int64)[:, None]
    hi = np.searchsorted(wkeys, rv * span + steps, side="left")
    lo = np.searchsorted(wkeys, rv * span, side="left")
    return hi - lo


def tmto_simulate(run_log: RunLog, alpha: float, seed: int) -> TmtoReport:
    """Cost of an adversary that keeps a fixed random ``floor(alpha N)`` set.

    A stored read costs 1; a missed read replays the vertex's write history
    as it stood at the reading step, ``2 * writes_so_far + 1`` evaluations.

    Two reference ratios are reported: ``analytic_ratio`` is the closed-form
    bound with end-of-run chains (miss cost ``2 rho + 1`` on top of the read),
    ``midrun_ratio`` the expectation of this simulation's own cost model,
    ``alpha + (1 - alpha) * ((K - 1) / N + 1)``.
    """
    _require_records(run_log)
    p = run_log.params
    N, K, d = p.N, run_log.K, p.d
    rng = np.random.default_rng(seed)
    stored = np.zeros(N, dtype=bool)
    stored[rng.choice(N, _stored_count(alpha, N), replace=False)] = True
    prior = writes_before(run_log)
    miss = ~stored[run_log.reads.astype(np.int64)]
    n_miss = int(miss.sum())
    miss_cost = int((2 * prior[miss]).sum()) + n_miss
    cost = (K * d - n_miss) + miss_cost
    rho = K / N
    honest = K * d
    midrun = (K - 1) / N + 1 if K else 1.0
    return TmtoReport(
        alpha=alpha, rho=rho, d=d, K=K,
        analytic_bound=tmto_bound(alpha, rho, d, K),
        simulated_cost=cost,
        penalty_ratio=cost / honest if honest else math.nan,
        analytic_ratio=1 + (1 - alpha) * (2 * rho + 1),
        midrun_ratio=alpha + (1 - alpha) * midrun,
        misses=n_miss,
        mean_miss_cost=miss_cost / n_miss if n_miss else math.nan,
        midrun_miss_cost=midrun,
        endrun_miss_cost=2 * rho + 1,
    )


@dataclasses.dataclass(frozen=True)
class AdaptiveReport:
    policy: str
    alpha: float
    hits: int
    reads: int

    @property
    def hit_rate(self) -> float:
        return self.hits / self.reads if self.reads else math.nan

    @property
    def miss_rate(self) -> float:
        return 1 - self.hit_rate

    @property
    def stderr(self) -> float:
        p = self.hit_rate
        return math.sqrt(p * (1 - p) / self.reads) if self.reads else math.nan


def _static(reads, N, k, rng) -> int:
    stored = np.zeros(N, dtype=bool)
    stored[rng.choice(N, k, replace=False)] = True
    return int(stored[reads].sum())


def _random(reads, N, k, rng) -> int:
    # a fresh uniform k-set every step, drawn only where a read looks at it:
    # sequential hypergeometric membership of the step's distinct vertices
    hits = 0
    for row in reads.tolist():
        seen: dict[int, bool] = {}
        inside = 0
        for v in row:
            if v not in seen:
                j = len(seen)
                seen[v] = rng.random() * (N - j) < (k - inside)
                inside += seen[v]
            hits += seen[v]
    return hits


def _recent_writes(reads, writes, N, k, rng) -> int:
    if k == 0:
        return 0
    lru: OrderedDict[int, None] = OrderedDict.fromkeys(rng.choice(N, k, replace=False).tolist())
    hits = 0
    for row, w in zip(reads.tolist(), writes.tolist()):
        for v in row:
            hits += v in lru
        if w in lru:
            lru.move_to_end(w)
        else:
            lru[w] = None
            lru.popitem(last=False)
    return hits


def _frequent_reads(reads, N, k, rng) -> int:
    if k == 0:
        return 0
    count = [0] * N
    member = [False] * N
    buckets: dict[int, set[int]] = {0: set(rng.choice(N, k, replace=False).tolist())}
    for v in buckets[0]:
        member[v] = True
    low = 0
    hits = 0
    for row in reads.tolist():
        for v in row:
            hits += member[v]
        for v in row:
            c = count[v]
            count[v] = c + 1
            if member[v]:
                buckets[c].discard(v)
                buckets.setdefault(c + 1, set()).add(v)
            elif c + 1 > low:
                out = buckets[low].pop()
                member[out] = False
                member[v] = True
                buckets.setdefault(c + 1, set()).add(v)
            while not buckets.get(low):
                low += 1
    return hits


def adaptive_simulate(run_log: RunLog, alpha: float, policy: str, seed: int) -> AdaptiveReport:
    """Per-read hit rate of an adversary that may rebuild its ``floor(alpha N)``
    stored set between steps from anything observed so far.

    Policies: ``static`` (one random set), ``random`` (fresh set per step),
    ``recent_writes`` (most recently written vertices), ``frequent_reads``
    (most read vertices so far).
    """
    _require_records(run_log)
    N = run_log.params.N
    k = _stored_count(alpha, N)
    rng = np.random.default_rng(seed)
    reads = run_log.reads.astype(np.int64)
    if policy == "static":
        hits = _static(reads, N, k, rng)
    elif policy == "random":
        hits = _random(reads, N, k, rng)
    elif policy == "recent_writes":
        hits = _recent_writes(reads, run_log.writes.astype(np.int64), N, k, rng)
    elif policy == "frequent_reads":
        hits = _frequent_reads(reads, N, k, rng)
    else:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    return AdaptiveReport(policy, alpha, hits, int(reads.size))


def two_proportion_z(a: AdaptiveReport, b: AdaptiveReport) -> tuple[float, float]:
    """Pooled two-proportion z statistic and two-sided p-value."""
    pooled = (a.hits + b.hits) / (a.reads + b.reads)
    se = math.sqrt(pooled * (1 - pooled) * (1 / a.reads + 1 / b.reads))
    if se == 0:
        return 0.0, 1.0
    z = (a.hit_rate - b.hit_rate) / se
    return z, float(2 * norm.sf(abs(z)))


def staleness_profile(run_log: RunLog, alpha: float, seed: int) -> list[float]:
    """Effective hit rate at recursion depth l for a set stored at the end of
    the run: the fraction of reads at step ``K - l N`` whose vertex was stored
    and has not been rewritten since.  Index l runs over ``0 .. floor(rho)``.
    """
    _require_records(run_log)
    p = run_log.params
    N, K = p.N, run_log.K
    rng = np.random.default_rng(seed)
    stored = np.zeros(N, dtype=bool)
    stored[rng.choice(N, _stored_count(alpha, N), replace=False)] = True
    last = np.zeros(N, dtype=np.int64)
    last[run_log.writes.astype(np.int64)] = np.arange(1, K + 1)  # later steps overwrite
    out = []
    for level in range(int(K // N) + 1):
        t = K - level * N
        if t < 1:
            break
        # reads in a short window ending at t
        lo = max(1, t - max(1, N // 16) + 1)
        rv = run_log.reads[lo - 1:t].astype(np.int64)
        ts = np.arange(lo, t + 1)[:, None]
        fresh = stored[rv] & (last[rv] < ts)
        out.append(float(fresh.mean()))
    return out
