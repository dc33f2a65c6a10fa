"""Desk-scale tube-probability experiments.

The defining property of the path action is asymptotic: the probability
that a trajectory stays within eps of a smooth reference path phi,
relative to the probability that the damped noise path stays within eps
of zero, behaves like ``exp(-total_action(phi) / 2)`` as eps shrinks.
This module estimates both tube probabilities by Monte Carlo on small
systems (one or three sites) and reports the ratio against that
prediction.

Common random numbers are used throughout: one block of Wiener
increments drives both the solution ensemble and the reference-noise
ensemble, and every radius is evaluated on the same samples, which makes
the hit counts exactly monotone in eps.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from .action import om_action
from .errors import ConfigurationError, StatisticalPowerError
from .lattice import LatticeConfig, dense_A, drift
from .paths import Path
from .utils import worker_count

__all__ = ["TubeExperiment", "TubeTable", "l2rho_path_norm", "tube_ratio"]

_TAG_TUBE_BLOCK = 5

#: Trajectories per generator key; fixed so results do not depend on the
#: thread count.
TUBE_BLOCK_SIZE = 16384


def l2rho_path_norm(path_a: Path, path_b: Path, rho) -> float:
    """Trapezoid-rule distance ``(int_0^T |a(t) - b(t)|_rho^2 dt)^(1/2)``
    between two paths on one grid."""
    if not path_a.same_grid(path_b):
        raise ConfigurationError("paths are on different grids")
    rho = np.asarray(rho, dtype=float)
    sq = np.sum((rho * (path_a.states - path_b.states)) ** 2, axis=1)
    return float(np.sqrt(np.trapezoid(sq, dx=path_a.dt)))


@dataclass(frozen=True)
class TubeExperiment:
    """Specification of one ratio experiment.

    ``phi`` must start at the initial condition the solution ensemble is
    launched from (phi(0) is taken as u0).  ``denominator`` selects the
    reference-noise ensemble: "convolution" damps the noise by the
    linear-part rates in its eigenbasis; "plain" uses the undamped
    cumulative noise path.
    """

    cfg: LatticeConfig
    phi: Path
    eps: tuple
    samples: int
    seed: int = 0
    denominator: str = "convolution"
    min_hits: int = 50

    def __post_init__(self):
        if self.phi.d != self.cfg.d:
            raise ConfigurationError("reference path dimension does not match config")
        eps = tuple(float(e) for e in self.eps)
        if not eps or any(e <= 0 for e in eps):
            raise ConfigurationError("need positive radii")
        if self.denominator not in ("convolution", "plain"):
            raise ConfigurationError(f"unknown denominator kind {self.denominator!r}")
        if self.samples < 1:
            raise ConfigurationError("need at least one sample")
        object.__setattr__(self, "eps", eps)


@dataclass(frozen=True)
class TubeTable:
    """Per-radius hit counts, probabilities, ratio with a propagated 95%
    interval, and the action-based prediction (one prediction, radius
    independent)."""

    eps: np.ndarray
    num_hits: np.ndarray
    den_hits: np.ndarray
    num_prob: np.ndarray
    den_prob: np.ndarray
    ratio: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    predicted: float
    samples: int
    seed: int
    action_total: float = field(repr=False, default=0.0)


def _block_distances(exp: TubeExperiment, block_index: int, count: int):
    """Squared tube distances of one keyed block of trajectories, for the
    solution ensemble and the reference-noise ensemble (common increments)."""
    cfg = exp.cfg
    phi = exp.phi.states
    N, d = exp.phi.steps, cfg.d
    dt = exp.phi.dt
    rho_sq = (cfg.rho**2)[None, :]
    g = Generator(Philox(key=_key(exp.seed, _TAG_TUBE_BLOCK, block_index)))
    dW = np.sqrt(dt) * g.standard_normal((count, N, d))
    qs = cfg.q.grid(dt * np.arange(N), cfg.n)

    base = cfg.nu * dense_A(d) + cfg.lam * np.eye(d)
    alpha, V = np.linalg.eigh(base)
    decay = np.exp(-alpha * dt)[None, :]

    u = np.tile(phi[0], (count, 1))
    x = np.zeros((count, d))  # reference-noise state, eigenbasis coordinates
    num_sq = np.zeros(count)
    den_sq = np.zeros(count)
    # trapezoid accumulation: half weight at k = 0 and k = N
    num_sq += 0.5 * dt * np.sum(rho_sq * (u - phi[0]) ** 2, axis=1)
    den_sq += 0.0  # reference starts at zero exactly
    for k in range(N):
        forced = qs[k] * dW[:, k, :]
        u = u + drift(u, cfg) * dt + forced
        if exp.denominator == "convolution":
            x = decay * (x + forced @ V)
            y = x @ V.T
        else:
            x = x + forced
            y = x
        w = dt if k < N - 1 else 0.5 * dt
        num_sq += w * np.sum(rho_sq * (u - phi[k + 1]) ** 2, axis=1)
        den_sq += w * np.sum(rho_sq * y**2, axis=1)
    return num_sq, den_sq


def _key(seed: int, tag: int, index: int) -> np.ndarray:
    word = (np.uint64(tag) << np.uint64(56)) | np.uint64(index)
    return np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), word], dtype=np.uint64)


def tube_ratio(exp: TubeExperiment) -> TubeTable:
    """Estimate ``P(|u - phi| <= eps) / P(|W| <= eps)`` for each radius and
    compare with ``exp(-action(phi)/2)`` evaluated on the same grid.

    Raises
    ------
    StatisticalPowerError
        If either event has fewer than ``min_hits`` hits at the largest
        radius; the message suggests larger samples or radii.
    """
    report = om_action(exp.phi, exp.cfg)
    predicted = float(np.exp(-0.5 * report.total))

    eps_sq = np.array(sorted(exp.eps)) ** 2
    blocks = [
        (i, min(TUBE_BLOCK_SIZE, exp.samples - start))
        for i, start in enumerate(range(0, exp.samples, TUBE_BLOCK_SIZE))
    ]
    num_sorted = np.zeros(eps_sq.size, dtype=np.int64)
    den_sorted = np.zeros(eps_sq.size, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(lambda b: _block_distances(exp, b[0], b[1]), blocks))
    for num_sq, den_sq in results:  # fixed block order
        num_sorted += np.searchsorted(np.sort(num_sq), eps_sq, side="right")
        den_sorted += np.searchsorted(np.sort(den_sq), eps_sq, side="right")

    order = np.argsort(np.asarray(exp.eps))
    num_hits = np.empty_like(num_sorted)
    den_hits = np.empty_like(den_sorted)
    num_hits[order] = num_sorted
    den_hits[order] = den_sorted

    largest = int(np.argmax(exp.eps))
    if num_hits[largest] < exp.min_hits or den_hits[largest] < exp.min_hits:
        raise StatisticalPowerError(
            f"only {num_hits[largest]} / {den_hits[largest]} hits at the largest "
            f"radius {max(exp.eps)}; increase samples (now {exp.samples}) or use "
            "larger radii"
        )

    n = exp.samples
    num_p = num_hits / n
    den_p = den_hits / n
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den_hits > 0, num_p / np.where(den_p > 0, den_p, 1.0), np.nan)
        se = np.sqrt(
            np.where(num_hits > 0, (1.0 - num_p) / np.maximum(num_hits, 1), np.inf)
            + np.where(den_hits > 0, (1.0 - den_p) / np.maximum(den_hits, 1), np.inf)
        )
    ci_lo = ratio * np.exp(-1.959963984540054 * se)
    ci_hi = ratio * np.exp(+1.959963984540054 * se)
    return TubeTable(
        eps=np.asarray(exp.eps),
        num_hits=num_hits,
        den_hits=den_hits,
        num_prob=num_p,
        den_prob=den_p,
        ratio=ratio,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        predicted=predicted,
        samples=n,
        seed=exp.seed,
        action_total=report.total,
    )
