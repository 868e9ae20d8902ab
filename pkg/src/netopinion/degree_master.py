"""Degree-distribution dynamics and stationary laws for the rewiring process.

p(c, t) is the probability that a node carries degree c at time t, for
c = 0..E (heavier degrees are impossible with E edges and no duplicates).
The drift has a loss channel from uniform edge removal, rate (D/E)*c, and
a gain channel from preferential endpoint selection, rate
2D*(c + alpha)/(2E + N*alpha).  The closed-form limits are a 1/c power law
for alpha << 1 and a Poisson law for alpha >> 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Network

_MASS_TOL = 1e-10
_NEG_TOL = 1e-9


class IntegrationError(RuntimeError):
    """Time stepping produced an invalid distribution."""


@dataclass(frozen=True)
class DegreeDistribution:
    """Probability vector over degrees 0..c_max."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("probs must be a nonempty 1-d vector")
        if arr.min() < -1e-12:
            raise ValueError(f"negative probability {arr.min()}")
        total = arr.sum()
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        arr[arr < 0] = 0.0
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def c_max(self) -> int:
        return self.probs.size - 1

    @property
    def mean_degree(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)


def _as_probs(dist) -> np.ndarray:
    if isinstance(dist, DegreeDistribution):
        return dist.probs
    return np.asarray(dist, dtype=float)


def master_rhs(p, d_rate: float, n_edges: int, n_nodes: int,
               alpha: float) -> np.ndarray:
    """Time derivative of the degree distribution.

    Boundary conventions: p(-1) = p(E+1) = 0, and the gain channel out of
    c = E is suppressed so no probability leaks past the edge budget.  The
    returned vector sums to zero to machine precision.
    """
    probs = _as_probs(p)
    if probs.size != n_edges + 1:
        raise ValueError(
            f"support must cover degrees 0..E = 0..{n_edges}, "
            f"got length {probs.size}")
    c = np.arange(n_edges + 1, dtype=float)
    removal = d_rate / n_edges
    gain_coef = 2.0 * d_rate / (2.0 * n_edges + n_nodes * alpha)

    dp = -removal * c * probs
    dp[:-1] += removal * c[1:] * probs[1:]
    dp[1:] += gain_coef * (c[:-1] + alpha) * probs[:-1]
    loss_up = gain_coef * (c + alpha) * probs
    loss_up[-1] = 0.0
    dp -= loss_up
    return dp


def integrate_master(p0: DegreeDistribution, d_rate: float, n_edges: int,
                     n_nodes: int, alpha: float, t_end: float,
                     dt: float) -> DegreeDistribution:
    """Advance the degree distribution to t_end with fixed-step classical
    4th-order Runge-Kutta.

    Entries dipping below -1e-9 abort with an IntegrationError naming the
    first offending step; round-off negatives above that are clipped at
    the end and the vector renormalized.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = np.array(_as_probs(p0), dtype=float)
    if p.size != n_edges + 1:
        raise ValueError("initial support must cover degrees 0..E")
    n_steps = int(math.floor(t_end / dt + 1e-12))
    remainder = t_end - n_steps * dt
    steps = [dt] * n_steps
    if remainder > 1e-12 * max(1.0, t_end):
        steps.append(remainder)

    def rhs(q):
        return master_rhs(q, d_rate, n_edges, n_nodes, alpha)

    for idx, h in enumerate(steps):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * h * k1)
        k3 = rhs(p + 0.5 * h * k2)
        k4 = rhs(p + h * k3)
        p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        low = p.min()
        if low < -_NEG_TOL:
            raise IntegrationError(
                f"entry {low} below -{_NEG_TOL} at step {idx} "
                f"(t = {min((idx + 1) * dt, t_end)}); reduce dt")
    p[p < 0] = 0.0
    p /= p.sum()
    return DegreeDistribution(p)


def stable_step(d_rate: float, n_edges: int, c_max=None) -> float:
    """Step-size heuristic 0.1 * E / (D * c_max) keeping RK4 positive."""
    if c_max is None:
        c_max = n_edges
    return 0.1 * n_edges / (d_rate * c_max)


def power_law_raw(alpha: float, gamma: float, c) -> np.ndarray:
    """Un-normalized low-attraction stationary value (alpha/gamma)^alpha * alpha/c."""
    c_arr = np.asarray(c, dtype=float)
    return (alpha / gamma) ** alpha * alpha / c_arr


def stationary_power_law(alpha: float, gamma: float,
                         c_max: int) -> DegreeDistribution:
    """Truncated, renormalized 1/c stationary shape for alpha << 1.

    The raw law is not summable, so it is treated as a shape: evaluated on
    c = 1..c_max, forced to 0 at c = 0, and renormalized on that support.
    """
    if c_max < 1:
        raise ValueError("c_max must be at least 1")
    probs = np.zeros(c_max + 1)
    probs[1:] = power_law_raw(alpha, gamma, np.arange(1, c_max + 1))
    probs /= probs.sum()
    return DegreeDistribution(probs)


def stationary_poisson(gamma: float, c_max: int) -> DegreeDistribution:
    """Truncated, renormalized Poisson(gamma) for the high-attraction regime."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    c = np.arange(c_max + 1)
    log_pmf = c * math.log(gamma) - gamma - np.array(
        [math.lgamma(k + 1.0) for k in range(c_max + 1)])
    probs = np.exp(log_pmf)
    probs /= probs.sum()
    return DegreeDistribution(probs)


def empirical_degree_distribution(net: Network) -> DegreeDistribution:
    """Degree histogram of one network, normalized by node count."""
    counts = np.bincount(net.degree_array(), minlength=net.n_edges + 1)
    return DegreeDistribution(counts / net.n_nodes)


def total_variation(p, q) -> float:
    """Half the L1 distance between two distributions on equal support."""
    pa, qa = _as_probs(p), _as_probs(q)
    if pa.size != qa.size:
        raise ValueError(f"support mismatch: {pa.size} vs {qa.size}")
    return 0.5 * float(np.abs(pa - qa).sum())


def restrict(dist, c_lo: int, c_hi: int) -> np.ndarray:
    """Conditional sub-distribution on degrees c_lo..c_hi, renormalized."""
    probs = _as_probs(dist)
    if not (0 <= c_lo <= c_hi < probs.size):
        raise ValueError(f"window [{c_lo},{c_hi}] outside support")
    window = probs[c_lo:c_hi + 1].astype(float).copy()
    total = window.sum()
    if total <= 0:
        raise ValueError("window carries no probability mass")
    return window / total


def loglog_slope(dist, c_lo: int, c_hi: int) -> float:
    """Least-squares slope of log p(c) against log c over a degree window.

    Zero-probability bins inside the window are skipped; at least two
    populated bins are required.
    """
    probs = _as_probs(dist)
    if not (1 <= c_lo <= c_hi < probs.size):
        raise ValueError(f"window [{c_lo},{c_hi}] invalid")
    c = np.arange(c_lo, c_hi + 1)
    window = probs[c_lo:c_hi + 1]
    mask = window > 0
    if mask.sum() < 2:
        raise ValueError("need at least two populated bins for a slope")
    return float(np.polyfit(np.log(c[mask]), np.log(window[mask]), 1)[0])
