"""Shared helpers for the test suite: small random instances and oracles."""

from __future__ import annotations

import numpy as np

from netopinion import (ControlConfig, KernelParams, Network, OpinionState,
                        init_network)


def random_instance(rng, n_max=50, kappa=float("inf"), nu_range=(0.3, 3.0),
                    dt_range=(0.02, 0.1), horizon=1):
    """A random graph, opinion state, kernel, and control configuration.

    Guarantees at least one selected agent so the control problem is
    nondegenerate.
    """
    n = int(rng.integers(2, n_max + 1))
    max_gamma = max(1, min(n - 1, 6))
    gamma = int(rng.integers(1, max_gamma + 1))
    if (n * gamma) % 2:
        gamma += 1 if gamma < max_gamma else -1
    net = init_network(n, gamma, "uniform_random", rng)
    state = OpinionState(rng.uniform(-1.0, 1.0, n), 0.0)
    kernel = KernelParams(lam=float(rng.uniform(0.0, 0.1)),
                          beta=float(rng.uniform(0.5, 2.0)),
                          delta=float(rng.uniform(0.2, 2.0)))
    degrees = net.degree_array()
    c_star = int(rng.integers(0, max(1, degrees.max())))
    config = ControlConfig(target=float(rng.uniform(-1.0, 1.0)),
                           nu=float(rng.uniform(*nu_range)),
                           kappa=kappa, c_star=c_star,
                           dt=float(rng.uniform(*dt_range)),
                           horizon=horizon)
    return net, state, kernel, config


def central_difference(fun, x, h=1e-6):
    """Symmetric difference quotient of a scalar function."""
    return (fun(x + h) - fun(x - h)) / (2.0 * h)


def path_network() -> Network:
    return Network(3, [(0, 1), (1, 2)])
