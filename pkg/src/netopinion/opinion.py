"""Opinion alignment on the current graph.

Each agent pulls toward neighbors whose opinions differ by at most the
confidence bound delta, weighted by a degree kernel: high-degree agents
are harder to move (exp(-lam * own degree)) but exert more pull
(1 - exp(-beta * neighbor degree)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Network


@dataclass(frozen=True)
class KernelParams:
    """Interaction kernel constants: lam, beta >= 0, delta in [0, 2]."""

    lam: float
    beta: float
    delta: float

    def __post_init__(self):
        for name in ("lam", "beta", "delta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative")
        if self.delta > 2.0:
            raise ValueError("delta above 2 never binds on [-1, 1] opinions")


@dataclass(frozen=True)
class OpinionState:
    """Opinions of all agents plus the current time."""

    w: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arr = np.array(self.w, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("w must be a nonempty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("opinions must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)

    @property
    def n_agents(self) -> int:
        return self.w.size


def confidence_kernel(wi: float, wj: float, delta: float) -> float:
    """1 when |wi - wj| <= delta (boundary included), else 0."""
    return 1.0 if abs(wi - wj) <= delta else 0.0


def degree_kernel(ci: int, cj: int, params: KernelParams) -> float:
    """exp(-lam*ci) * (1 - exp(-beta*cj)); zero-degree neighbors exert no pull."""
    return math.exp(-params.lam * ci) * (1.0 - math.exp(-params.beta * cj))


def interaction(wi: float, wj: float, ci: int, cj: int,
                params: KernelParams) -> float:
    """Product of the confidence and degree kernels; always in [0, 1]."""
    return confidence_kernel(wi, wj, params.delta) * degree_kernel(ci, cj, params)


def opinion_rhs(state: OpinionState, net: Network,
                params: KernelParams) -> np.ndarray:
    """Drift of every opinion: degree-normalized sum of neighbor pulls.

    For agent i the drift is (1/c_i) * sum over neighbors j of
    interaction(w_i, w_j, c_i, c_j) * (w_j - w_i); isolated agents drift 0.
    """
    w = state.w
    if w.size != net.n_nodes:
        raise ValueError("state and network disagree on agent count")
    ui, vi = net.edge_arrays()
    deg = net.degree_array()
    drift = np.zeros(w.size)
    if ui.size:
        diff = w[vi] - w[ui]
        within = (np.abs(diff) <= params.delta).astype(float)
        resist = np.exp(-params.lam * deg)
        pull = 1.0 - np.exp(-params.beta * deg)
        np.add.at(drift, ui, within * resist[ui] * pull[vi] * diff)
        np.add.at(drift, vi, within * resist[vi] * pull[ui] * (-diff))
    active = deg > 0
    drift[active] /= deg[active]
    return drift
