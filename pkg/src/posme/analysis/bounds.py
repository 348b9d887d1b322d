"""Closed-form security bounds and the branching-cascade Monte-Carlo."""

from __future__ import annotations

import dataclasses
import math

import numpy as np


def _check_alpha(alpha: float, *, allow_one: bool = True) -> None:
    hi_ok = alpha <= 1 if allow_one else alpha < 1
    if not (0 <= alpha and hi_ok):
        raise ValueError(f"storage fraction must be in [0, 1{']' if allow_one else ')'}, got {alpha}")


def _depth(rho: float) -> int:
    if rho < 0 or rho != int(rho):
        raise ValueError(f"cascade depth needs an integral write density, got {rho}")
    return int(rho)


def tmto_bound(alpha: float, rho: float, d: int, K: int) -> float:
    """Expected hash evaluations of an adversary storing ``alpha * N`` blocks.

    Every read costs one evaluation; a miss additionally replays the block's
    write chain for both fields, ``2 * rho`` evaluations.
    """
    _check_alpha(alpha)
    return K * d * (1 + (1 - alpha) * (2 * rho + 1))


def tmto_penalty(alpha: float, rho: float) -> float:
    return tmto_bound(alpha, rho, 1, 1)


def cascade_w(alpha: float, rho: float, d: int) -> float:
    """Expected recursive recomputation cost per primary miss."""
    _check_alpha(alpha)
    m = d * (1 - alpha)
    return float(sum(m ** level for level in range(_depth(rho) + 1)))


def st_product(alpha: float, rho: float, d: int) -> float:
    """Space-time lower bound S*T in units of K**2."""
    return alpha * (1 - alpha) * d * cascade_w(alpha, rho, d) / rho


def staleness_w(alpha: float, rho: float, d: int) -> float:
    """Miss cost when the stored state decays by e**-k at recursion depth k."""
    _check_alpha(alpha)
    total, prod = 0.0, 1.0
    for level in range(_depth(rho) + 1):
        total += prod
        prod *= d * (1 - alpha * math.exp(-level))
    return total


def st_product_strengthened(alpha: float, rho: float, d: int) -> float:
    return alpha * (1 - alpha) * d * staleness_w(alpha, rho, d) / rho


def chernoff_tail(N: int, d: int, rho: float, delta: float) -> float:
    """Union bound on any vertex exceeding ``(1 + delta) * d * rho`` reads."""
    return N * math.exp(-delta ** 2 * d * rho / 3)


def regime(alpha: float, d: int) -> str:
    m = d * (1 - alpha)
    if math.isclose(m, 1.0):
        return "critical"
    return "supercritical" if m > 1 else "subcritical"


@dataclasses.dataclass(frozen=True)
class CascadeRow:
    alpha: float
    branching: float
    W: float
    st_over_k2: float
    regime: str


@dataclasses.dataclass(frozen=True)
class StrengthenedRow:
    alpha: float
    W: float
    W_star: float
    st_over_k2: float
    st_star_over_k2: float
    gain: float


@dataclasses.dataclass(frozen=True)
class CascadeTable:
    rho: float
    d: int
    rows: tuple[CascadeRow, ...]
    strengthened: tuple[StrengthenedRow, ...]


def cascade_table(alphas, rho: float, d: int) -> CascadeTable:
    rows, strong = [], []
    for a in alphas:
        if not 0 < a < 1:
            raise ValueError(f"table rows need 0 < alpha < 1, got {a}")
        w, ws = cascade_w(a, rho, d), staleness_w(a, rho, d)
        st, sts = st_product(a, rho, d), st_product_strengthened(a, rho, d)
        rows.append(CascadeRow(a, d * (1 - a), w, st, regime(a, d)))
        strong.append(StrengthenedRow(a, w, ws, st, sts, sts / st))
    return CascadeTable(rho, d, tuple(rows), tuple(strong))


def cascade_samples(alpha: float, rho: float, d: int, trials: int, seed: int,
                    chunk: int = 10_000) -> np.ndarray:
    """Total node count per trial of a branching process with
    Binomial(d, 1 - alpha) offspring, truncated after ``rho`` generations.

    Trials are split into fixed chunks, each with its own spawned stream, so
    the result depends only on ``seed`` and ``trials``.
    """
    _check_alpha(alpha)
    depth = _depth(rho)
    n_chunks = max(1, -(-trials // chunk))
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    out = np.empty(trials, dtype=np.float64)
    for k, ss in enumerate(streams):
        lo, hi = k * chunk, min(trials, (k + 1) * chunk)
        rng = np.random.default_rng(ss)
        z = np.ones(hi - lo, dtype=np.int64)
        total = z.astype(np.float64)
        for _ in range(depth):
            # sum of z independent Binomial(d, p) draws is Binomial(d * z, p)
            z = rng.binomial(d * z, 1 - alpha)
            total += z
        out[lo:hi] = total
    return out


def cascade_monte_carlo(alpha: float, rho: float, d: int, trials: int, seed: int) -> float:
    return float(cascade_samples(alpha, rho, d, trials, seed).mean())
