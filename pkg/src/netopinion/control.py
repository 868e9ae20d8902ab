"""Degree-selective scalar control of the opinion dynamics.

A single control value is applied to every agent whose degree reaches the
threshold c_star.  The one-step (horizon 1, explicit Euler) problem has a
closed form; longer horizons are solved numerically over a receding
window with the network frozen at its current state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Network
from .opinion import KernelParams, OpinionState, opinion_rhs


@dataclass(frozen=True)
class RKTableau:
    """Explicit Runge-Kutta coefficients (a strictly lower triangular)."""

    a: np.ndarray
    b: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        theta = np.array(self.theta, dtype=float)
        s = b.size
        if a.shape != (s, s) or theta.size != s:
            raise ValueError("tableau shapes disagree")
        if np.any(np.triu(a) != 0.0):
            raise ValueError("tableau must be explicit (strictly lower a)")
        if abs(b.sum() - 1.0) > 1e-12:
            raise ValueError("stage weights must sum to 1")
        for arr in (a, b, theta):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "theta", theta)

    @property
    def stages(self) -> int:
        return self.b.size

    @classmethod
    def explicit_euler(cls) -> "RKTableau":
        return cls(a=[[0.0]], b=[1.0], theta=[0.0])

    @classmethod
    def classic_rk4(cls) -> "RKTableau":
        return cls(
            a=[[0.0, 0.0, 0.0, 0.0],
               [0.5, 0.0, 0.0, 0.0],
               [0.0, 0.5, 0.0, 0.0],
               [0.0, 0.0, 1.0, 0.0]],
            b=[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            theta=[0.0, 0.5, 0.5, 1.0])


_TABLEAUS = {
    "euler": RKTableau.explicit_euler,
    "rk4": RKTableau.classic_rk4,
}


def tableau_by_name(name: str) -> RKTableau:
    try:
        return _TABLEAUS[name]()
    except KeyError:
        raise ValueError(
            f"unknown scheme {name!r}; choose from {sorted(_TABLEAUS)}") from None


@dataclass(frozen=True)
class ControlConfig:
    """Target tracking setup.

    target:  desired opinion in [-1, 1].
    nu:      quadratic control-energy penalty (>= 0).
    kappa:   hard bound on the applied control, |u| <= kappa (may be inf).
    c_star:  minimum degree for an agent to receive the control.
    dt:      sampling step; also the prediction step inside the horizon.
    horizon: number of prediction steps (1 recovers the closed form).
    nu_p:    per-horizon penalty; defaults to dt * nu.
    """

    target: float
    nu: float
    kappa: float
    c_star: int
    dt: float
    horizon: int = 1
    nu_p: float = None

    def __post_init__(self):
        if not -1.0 <= self.target <= 1.0:
            raise ValueError("target must lie in [-1, 1]")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive (inf allowed)")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.nu_p is None:
            object.__setattr__(self, "nu_p", self.dt * self.nu)
        elif self.nu_p < 0:
            raise ValueError("nu_p must be nonnegative")

    @property
    def u_bounds(self) -> tuple[float, float]:
        return (-self.kappa, self.kappa)


@dataclass(frozen=True)
class MPCResult:
    """Optimized controls for one horizon, plus solver diagnostics."""

    controls: np.ndarray
    converged: bool
    iterations: int
    cost: float


def selection_mask(net: Network, c_star: int) -> np.ndarray:
    """0/1 vector marking agents with degree >= c_star."""
    return (net.degree_array() >= c_star).astype(float)


def running_cost(state: OpinionState, u: float, cc: ControlConfig) -> float:
    """Half of mean squared target miss plus the nu-weighted control energy."""
    miss = state.w - cc.target
    return 0.5 * (float(miss @ miss) / state.n_agents + cc.nu * u * u)


def step_opinions_rk(state: OpinionState, net: Network, kp: KernelParams,
                     u: float, mask, tab: RKTableau, dt: float) -> OpinionState:
    """One explicit RK step of dw/dt = drift(w) + u * mask, network frozen.

    The control is constant across internal stages (piecewise-constant in
    time); mask may be None for an uncontrolled step.
    """
    w = state.w
    forcing = 0.0 if mask is None else u * np.asarray(mask, dtype=float)
    stage_rates = []
    for stage in range(tab.stages):
        w_stage = w
        coeffs = tab.a[stage]
        for k in range(stage):
            if coeffs[k] != 0.0:
                w_stage = w_stage + dt * coeffs[k] * stage_rates[k]
        inner = OpinionState(w_stage, state.time + tab.theta[stage] * dt)
        stage_rates.append(opinion_rhs(inner, net, kp) + forcing)
    w_next = w.copy()
    for stage in range(tab.stages):
        w_next = w_next + dt * tab.b[stage] * stage_rates[stage]
    return OpinionState(w_next, state.time + dt)


def predicted_cost(state: OpinionState, net: Network, kp: KernelParams,
                   cc: ControlConfig, tab: RKTableau, controls) -> float:
    """Receding-horizon objective for a candidate control sequence.

    Rolls the dynamics forward one step per control with the network
    frozen, charging each step dt * [mean squared target miss at the step
    end + nu_p * u^2], halved overall.
    """
    controls = np.asarray(controls, dtype=float)
    if controls.size != cc.horizon:
        raise ValueError("control sequence length must equal the horizon")
    mask = selection_mask(net, cc.c_star)
    n = state.n_agents
    current = state
    total = 0.0
    for u in controls:
        current = step_opinions_rk(current, net, kp, float(u), mask, tab, cc.dt)
        miss = current.w - cc.target
        total += cc.dt * (float(miss @ miss) / n + cc.nu_p * u * u)
    return 0.5 * total


def instantaneous_control(state: OpinionState, net: Network, kp: KernelParams,
                          cc: ControlConfig) -> float:
    """Closed-form one-step control, clamped to [-kappa, kappa].

    Minimizes the single-step predicted cost under an explicit Euler
    update: u = -(sum_Q(w - target) + dt * sum_Q drift) / (N*nu + dt*|Q|),
    where sums run over the selected agents.  Returns 0 when no agent is
    selected.
    """
    mask = selection_mask(net, cc.c_star)
    selected = float(mask.sum())
    if selected == 0.0:
        return 0.0
    drift = opinion_rhs(state, net, kp)
    numer = float(mask @ (state.w - cc.target)) + cc.dt * float(mask @ drift)
    effective_nu = cc.nu_p / cc.dt
    denom = state.n_agents * effective_nu + cc.dt * selected
    if denom == 0.0:
        return 0.0
    raw = -numer / denom
    return float(min(cc.kappa, max(-cc.kappa, raw)))


def _fd_gradient(fun, u: np.ndarray, h: float = 1e-4) -> np.ndarray:
    grad = np.zeros_like(u)
    for i in range(u.size):
        step = h * max(1.0, abs(u[i]))
        up = u.copy()
        up[i] += step
        down = u.copy()
        down[i] -= step
        grad[i] = (fun(up) - fun(down)) / (2.0 * step)
    return grad


def _fd_hessian(fun, u: np.ndarray, f0: float, h: float = 1e-3) -> np.ndarray:
    p = u.size
    hess = np.zeros((p, p))
    steps = np.array([h * max(1.0, abs(x)) for x in u])
    for i in range(p):
        up = u.copy()
        up[i] += steps[i]
        down = u.copy()
        down[i] -= steps[i]
        hess[i, i] = (fun(up) - 2.0 * f0 + fun(down)) / steps[i] ** 2
    for i in range(p):
        for j in range(i + 1, p):
            pp = u.copy(); pp[i] += steps[i]; pp[j] += steps[j]
            pm = u.copy(); pm[i] += steps[i]; pm[j] -= steps[j]
            mp = u.copy(); mp[i] -= steps[i]; mp[j] += steps[j]
            mm = u.copy(); mm[i] -= steps[i]; mm[j] -= steps[j]
            hess[i, j] = hess[j, i] = (
                fun(pp) - fun(pm) - fun(mp) + fun(mm)
            ) / (4.0 * steps[i] * steps[j])
    return hess


def mpc_control(state: OpinionState, net: Network, kp: KernelParams,
                cc: ControlConfig, tab: RKTableau, start=None,
                grad_tol: float = 1e-8, max_iterations: int = 500) -> MPCResult:
    """Minimize the receding-horizon objective over box-bounded controls.

    Projected descent with central finite-difference gradients; when the
    objective is locally quadratic a curvature (Newton) step lands on the
    minimizer in one move, otherwise backtracking gradient steps make
    progress.  Converged when the projected gradient falls below grad_tol;
    otherwise the best iterate is returned with converged=False.
    """
    lo, hi = cc.u_bounds

    def cost(u):
        return predicted_cost(state, net, kp, cc, tab, u)

    if start is None:
        u = np.zeros(cc.horizon)
    else:
        u = np.clip(np.asarray(start, dtype=float), lo, hi)
    def projected_norm(point, grad):
        return np.max(np.abs(point - np.clip(point - grad, lo, hi)))

    def polish(point, f_point, grad):
        # refine to the finite-difference noise floor with curvature steps
        for _ in range(3):
            hess = _fd_hessian(cost, point, f_point)
            try:
                np.linalg.cholesky(hess + 1e-14 * np.eye(cc.horizon))
                candidate = np.clip(point + np.linalg.solve(hess, -grad),
                                    lo, hi)
            except np.linalg.LinAlgError:
                break
            f_candidate = cost(candidate)
            grad_candidate = _fd_gradient(cost, candidate)
            if projected_norm(candidate, grad_candidate) < \
                    projected_norm(point, grad):
                point, f_point, grad = candidate, f_candidate, grad_candidate
            else:
                break
        return point, f_point

    f_u = cost(u)
    converged = False
    step_scale = 1.0
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        grad = _fd_gradient(cost, u)
        if projected_norm(u, grad) < grad_tol:
            converged = True
            u, f_u = polish(u, f_u, grad)
            break
        moved = False
        hess = _fd_hessian(cost, u, f_u)
        try:
            np.linalg.cholesky(hess + 1e-14 * np.eye(cc.horizon))
            candidate = np.clip(u + np.linalg.solve(hess, -grad), lo, hi)
            f_candidate = cost(candidate)
            if f_candidate <= f_u + 1e-12 * (1.0 + abs(f_u)):
                u, f_u = candidate, f_candidate
                moved = True
        except np.linalg.LinAlgError:
            pass
        if not moved:
            scale = step_scale
            for _ in range(60):
                candidate = np.clip(u - scale * grad, lo, hi)
                f_candidate = cost(candidate)
                decrease = float(grad @ (u - candidate))
                if f_candidate <= f_u - 1e-4 * decrease + 1e-15:
                    break
                scale *= 0.5
            else:
                break
            if np.array_equal(candidate, u):
                break
            u, f_u = candidate, f_candidate
            step_scale = min(scale * 2.0, 1e6)
    return MPCResult(controls=u, converged=converged,
                     iterations=iterations, cost=f_u)
