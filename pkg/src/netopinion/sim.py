"""Coupled simulation loop: rewire the network, compute the control,
advance the opinions, record metrics.

Each sampling step of length dt first evolves the network (Poisson number
of rewiring events), then computes the scalar control from the freshly
updated degrees, then advances the opinions one step with that control
held constant.  Runs are deterministic functions of the seed; the network
stream and the opinion stream are split from the seed so that runs
differing only in control settings share the same network trajectory
(common random numbers).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import graph
from .control import (ControlConfig, instantaneous_control, mpc_control,
                      selection_mask, step_opinions_rk, tableau_by_name)
from .degree_master import DegreeDistribution
from .graph import Network, RewireParams, evolve_network, init_network
from .opinion import KernelParams, OpinionState

DEFAULT_SEED = 2

UNIFORM_OPINIONS = "uniform"


class SimulationError(RuntimeError):
    """A module error occurred inside the stepping loop."""


@dataclass(frozen=True)
class SimConfig:
    """Full description of one run.

    n, gamma, alpha, d_rate parameterize the network process; kernel the
    opinion interactions; control is optional (None runs the free
    dynamics).  init_opinion is either "uniform" (i.i.d. uniform on
    [-1, 1]) or an explicit vector.  reference_opinion anchors the
    consensus metric for uncontrolled runs; controlled runs use the
    control target.
    """

    n: int
    gamma: float
    alpha: float
    d_rate: float
    t0: float
    tf: float
    dt: float
    kernel: KernelParams
    control: ControlConfig = None
    scheme: str = "euler"
    init_opinion: object = UNIFORM_OPINIONS
    init_graph: str = graph.UNIFORM_RANDOM
    seed: int = DEFAULT_SEED
    snapshot_times: tuple = ()
    reference_opinion: float = 0.0

    def __post_init__(self):
        if self.tf <= self.t0:
            raise ValueError("tf must exceed t0")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        span = self.tf - self.t0
        steps = round(span / self.dt)
        if steps < 1 or abs(steps * self.dt - span) > 1e-9 * max(1.0, span):
            raise ValueError("dt must divide tf - t0")
        if self.control is not None and abs(self.control.dt - self.dt) > 1e-12:
            raise ValueError("control.dt must equal the sampling step dt")
        for t_snap in self.snapshot_times:
            if not self.t0 - 1e-9 <= t_snap <= self.tf + 1e-9:
                raise ValueError(f"snapshot time {t_snap} outside [t0, tf]")
        tableau_by_name(self.scheme)

    @property
    def n_steps(self) -> int:
        return round((self.tf - self.t0) / self.dt)


@dataclass
class TrajectoryRecord:
    """Time series produced by one run; all series share one length."""

    times: np.ndarray
    opinions: np.ndarray
    degrees: np.ndarray
    control: np.ndarray
    consensus: np.ndarray
    controlled_fraction: np.ndarray
    uncontrollable: np.ndarray
    snapshots: list = field(default_factory=list)

    @property
    def final_consensus(self) -> float:
        return float(self.consensus[-1])

    @property
    def final_controlled_fraction(self) -> float:
        return float(self.controlled_fraction[-1])

    @property
    def final_opinions(self) -> np.ndarray:
        return self.opinions[-1]


def consensus_metric(state: OpinionState, target: float) -> float:
    """Mean squared displacement from the target, normalized by N - 1."""
    n = state.n_agents
    if n < 2:
        raise ValueError("consensus metric needs at least two agents")
    miss = state.w - target
    return float(miss @ miss) / (n - 1)


def controlled_fraction(net: Network, c_star: int) -> float:
    """Fraction of nodes whose degree reaches c_star."""
    return float((net.degree_array() >= c_star).mean())


def _initial_opinions(cfg: SimConfig, rng) -> np.ndarray:
    if isinstance(cfg.init_opinion, str):
        if cfg.init_opinion != UNIFORM_OPINIONS:
            raise ValueError(f"unknown init_opinion {cfg.init_opinion!r}")
        return rng.uniform(-1.0, 1.0, cfg.n)
    w0 = np.asarray(cfg.init_opinion, dtype=float)
    if w0.shape != (cfg.n,):
        raise ValueError("explicit opinions must have length n")
    if np.any(np.abs(w0) > 1.0):
        raise ValueError("initial opinions must lie in [-1, 1]")
    return w0.copy()


def _snapshot_steps(cfg: SimConfig) -> dict[int, int]:
    """Map step index -> number of snapshots captured there (nearest step)."""
    mapping: dict[int, int] = {}
    for t_snap in cfg.snapshot_times:
        idx = round((t_snap - cfg.t0) / cfg.dt)
        idx = min(max(idx, 0), cfg.n_steps)
        mapping[idx] = mapping.get(idx, 0) + 1
    return mapping


def run_simulation(cfg: SimConfig) -> TrajectoryRecord:
    """Run the coupled loop over [t0, tf] and record every sampling step.

    Opinions are projected back onto the model interval [-1, 1] after
    each step; the control's one-step prediction itself is unclamped.
    With horizon 1 the closed-form control is used, otherwise the first
    component of the receding-horizon solution.  The record has
    n_steps + 1 rows, the first being the initial state with zero control.
    """
    seq = np.random.SeedSequence(cfg.seed)
    net_seed, opinion_seed = seq.spawn(2)
    rng_net = np.random.default_rng(net_seed)
    rng_op = np.random.default_rng(opinion_seed)

    net = init_network(cfg.n, cfg.gamma, cfg.init_graph, rng_net)
    state = OpinionState(_initial_opinions(cfg, rng_op), cfg.t0)
    params = RewireParams(cfg.alpha, cfg.d_rate)
    tab = tableau_by_name(cfg.scheme)
    cc = cfg.control
    target = cc.target if cc is not None else cfg.reference_opinion

    m = cfg.n_steps
    times = cfg.t0 + cfg.dt * np.arange(m + 1)
    opinions = np.zeros((m + 1, cfg.n))
    degrees = np.zeros((m + 1, cfg.n), dtype=np.int64)
    control_series = np.zeros(m + 1)
    consensus_series = np.zeros(m + 1)
    fraction_series = np.zeros(m + 1)
    uncontrollable = np.zeros(m + 1, dtype=bool)
    snapshots = []
    snap_at = _snapshot_steps(cfg)

    def record(step: int, u: float, no_selection: bool) -> None:
        opinions[step] = state.w
        degrees[step] = net.degree_array()
        control_series[step] = u
        consensus_series[step] = consensus_metric(state, target)
        fraction_series[step] = (
            controlled_fraction(net, cc.c_star) if cc is not None else 0.0)
        uncontrollable[step] = no_selection
        for _ in range(snap_at.get(step, 0)):
            snapshots.append(net.snapshot(times[step], opinions=state.w))

    record(0, 0.0, False)
    for step in range(1, m + 1):
        try:
            evolve_network(net, params, cfg.dt, rng_net)
            if cc is not None:
                mask = selection_mask(net, cc.c_star)
                no_selection = mask.sum() == 0.0
                if cc.horizon == 1:
                    u = instantaneous_control(state, net, cfg.kernel, cc)
                else:
                    u = float(mpc_control(state, net, cfg.kernel, cc,
                                          tab).controls[0])
            else:
                mask, u, no_selection = None, 0.0, False
            state = step_opinions_rk(state, net, cfg.kernel, u, mask, tab,
                                     cfg.dt)
            state = OpinionState(np.clip(state.w, -1.0, 1.0), state.time)
        except (ValueError, RuntimeError) as exc:
            raise SimulationError(
                f"step {step} (t = {times[step]:.6g}): {exc}") from exc
        record(step, u, no_selection)

    return TrajectoryRecord(times=times, opinions=opinions, degrees=degrees,
                            control=control_series,
                            consensus=consensus_series,
                            controlled_fraction=fraction_series,
                            uncontrollable=uncontrollable,
                            snapshots=snapshots)


@dataclass(frozen=True)
class SweepRow:
    """Summary of one run inside a threshold sweep."""

    c_star: int
    final_consensus: float
    final_controlled_fraction: float
    record: TrajectoryRecord


def sweep_c_star(cfg: SimConfig, c_star_values) -> list[SweepRow]:
    """Rerun the same configured experiment for each degree threshold.

    All runs share the seed, hence the same initial graph, initial
    opinions, and network trajectory; only the control selection differs.
    """
    if cfg.control is None:
        raise ValueError("sweep requires a control configuration")
    rows = []
    for c_star in c_star_values:
        control = dataclasses.replace(cfg.control, c_star=int(c_star))
        run_cfg = dataclasses.replace(cfg, control=control)
        record = run_simulation(run_cfg)
        rows.append(SweepRow(c_star=int(c_star),
                             final_consensus=record.final_consensus,
                             final_controlled_fraction=record.final_controlled_fraction,
                             record=record))
    return rows


def ensemble_degree_marginals(n: int, gamma: float, init_mode: str,
                              params: RewireParams, times, n_graphs: int,
                              seed: int) -> list[DegreeDistribution]:
    """Ensemble-averaged degree histograms at the requested times.

    Evolves n_graphs independent networks (child seeds of `seed`) through
    the sorted time points and averages the degree histograms across the
    ensemble at each point.  A time of 0 reports the initial histogram.
    """
    times = [float(t) for t in times]
    if not times:
        raise ValueError("need at least one time point")
    if any(t < 0 for t in times) or any(
            b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be nonnegative and nondecreasing")
    counts = None
    for child in np.random.SeedSequence(seed).spawn(n_graphs):
        rng = np.random.default_rng(child)
        net = init_network(n, gamma, init_mode, rng)
        if counts is None:
            counts = np.zeros((len(times), net.n_edges + 1))
        previous = 0.0
        for idx, t in enumerate(times):
            evolve_network(net, params, t - previous, rng)
            previous = t
            counts[idx] += np.bincount(net.degree_array(),
                                       minlength=net.n_edges + 1)
    return [DegreeDistribution(row / (n * n_graphs)) for row in counts]


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory_csv(record: TrajectoryRecord, path) -> None:
    """One row per time step: t, u, V, controlled_fraction, w_1..w_N."""
    n = record.opinions.shape[1]
    header = "t,u,V,controlled_fraction," + ",".join(
        f"w_{i + 1}" for i in range(n))
    lines = [header]
    for k in range(record.times.size):
        cells = [_fmt(record.times[k]), _fmt(record.control[k]),
                 _fmt(record.consensus[k]),
                 _fmt(record.controlled_fraction[k])]
        cells.extend(_fmt(w) for w in record.opinions[k])
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def trajectory_to_dict(record: TrajectoryRecord) -> dict:
    """JSON-ready dictionary with every recorded series."""
    return {
        "times": record.times.tolist(),
        "opinions": record.opinions.tolist(),
        "degrees": record.degrees.tolist(),
        "control": record.control.tolist(),
        "consensus": record.consensus.tolist(),
        "controlled_fraction": record.controlled_fraction.tolist(),
        "uncontrollable": record.uncontrollable.tolist(),
        "snapshots": record.snapshots,
    }
