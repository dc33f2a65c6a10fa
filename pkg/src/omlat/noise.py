"""Seeded Wiener increments, time-varying noise paths, and the noise shift.

Increments are produced by a counter-based generator: the draw for
(seed, trajectory, step k, site i) never depends on how many steps, sites
or trajectories are generated around it.  Within a step the sites are
filled center-out (0, +1, -1, +2, -2, ...), so enlarging the truncation
from n to 2n reproduces the same numbers on the common sites.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from .errors import ConfigurationError
from .paths import Path

__all__ = [
    "NoiseCoefficient",
    "NoisePath",
    "sample_noise",
    "sample_noise_ensemble",
    "increment_row",
    "wq_path",
    "ou_convolution",
    "shift_noise",
]

# Tags keeping the Philox key spaces of different consumers disjoint.
_TAG_NOISE_ROW = 1
_TAG_NOISE_TRAJECTORY = 2


def _philox_key(seed: int, tag: int, a: int, b: int) -> np.ndarray:
    if not (0 <= a < 2**24 and 0 <= b < 2**32):
        raise ConfigurationError(f"counter components out of range: {(a, b)}")
    word = (np.uint64(tag) << np.uint64(56)) | (np.uint64(a) << np.uint64(32)) | np.uint64(b)
    return np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), word], dtype=np.uint64)


def _center_out_order(d: int) -> np.ndarray:
    """Array positions of sites 0, +1, -1, +2, -2, ... for dimension d."""
    n = (d - 1) // 2
    order = np.empty(d, dtype=np.intp)
    order[0] = n
    for i in range(1, n + 1):
        order[2 * i - 1] = n + i
        order[2 * i] = n - i
    return order


def increment_row(seed: int, trajectory: int, k: int, d: int, dt: float) -> np.ndarray:
    """Wiener increments of step k for all d sites, Normal(0, dt).

    Pure function of its arguments: the value at site i is the same for
    every truncation width that contains site i.
    """
    g = Generator(Philox(key=_philox_key(seed, _TAG_NOISE_ROW, trajectory, k)))
    draws = g.standard_normal(d)
    row = np.empty(d)
    row[_center_out_order(d)] = draws
    return row * np.sqrt(dt)


@dataclass(frozen=True)
class NoisePath:
    """Seeded Wiener increments on a uniform grid.

    ``increments[k, i+n]`` is the increment of site i over
    [k dt, (k+1) dt], distributed Normal(0, dt).  ``origin_step`` records
    how far this path has been shifted relative to the generating seed.
    """

    seed: int
    dt: float
    increments: np.ndarray
    trajectory: int = 0
    origin_step: int = 0

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 2:
            raise ConfigurationError("increments must be an N x d array")
        object.__setattr__(self, "increments", inc)

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def d(self) -> int:
        return self.increments.shape[1]


def sample_noise(seed: int, steps: int, d: int, dt: float, trajectory: int = 0) -> NoisePath:
    """Generate ``steps`` x ``d`` independent Normal(0, dt) increments.

    Keyed by (seed, trajectory, step, site): rows can be produced in any
    order, and distinct seeds or trajectory indices give independent
    streams.
    """
    if steps < 1 or d < 1 or not dt > 0:
        raise ConfigurationError(f"need steps >= 1, d >= 1, dt > 0, got {(steps, d, dt)}")
    if d % 2 != 1:
        raise ConfigurationError(f"dimension must be odd (d = 2n + 1), got {d}")
    order = _center_out_order(d)
    sqdt = np.sqrt(dt)
    inc = np.empty((steps, d))
    for k in range(steps):
        g = Generator(Philox(key=_philox_key(seed, _TAG_NOISE_ROW, trajectory, k)))
        inc[k, order] = g.standard_normal(d)
    inc *= sqdt
    return NoisePath(seed=seed, dt=dt, increments=inc, trajectory=trajectory)


def sample_noise_ensemble(seed: int, count: int, steps: int, d: int, dt: float):
    """Yield ``count`` independent noise paths keyed per (seed, trajectory).

    Throughput variant for large ensembles: each trajectory comes from a
    single generator call, so individual steps are not separately
    addressable and widening d reshuffles the draws.  Trajectories are
    still independent of generation order, and the whole ensemble is a
    pure function of (seed, count, steps, d, dt).
    """
    if steps < 1 or d < 1 or not dt > 0:
        raise ConfigurationError(f"need steps >= 1, d >= 1, dt > 0, got {(steps, d, dt)}")
    sqdt = np.sqrt(dt)
    for j in range(count):
        g = Generator(Philox(key=_philox_key(seed, _TAG_NOISE_TRAJECTORY, 0, j)))
        inc = sqdt * g.standard_normal((steps, d))
        yield NoisePath(seed=seed, dt=dt, increments=inc, trajectory=j)


@dataclass(frozen=True)
class NoiseCoefficient:
    """Per-site, time-varying noise coefficient q_i(t).

    Built-in families:

    - ``constant``: q_i(t) = value for all sites.
    - ``affine``: q_i(t) = c0 * (a - t + 1 / (|i| + 1)), the profile of the
      worked disease-spread example (c0 = 0.01, a = 31).
    - ``table``: linear interpolation in t of a (times, values) table with
      one column per site.
    """

    kind: str
    value: float = 0.0
    c0: float = 0.0
    a: float = 0.0
    table_times: np.ndarray | None = field(default=None, repr=False)
    table_values: np.ndarray | None = field(default=None, repr=False)

    @staticmethod
    def constant(value: float) -> "NoiseCoefficient":
        return NoiseCoefficient(kind="constant", value=float(value))

    @staticmethod
    def affine(c0: float, a: float) -> "NoiseCoefficient":
        return NoiseCoefficient(kind="affine", c0=float(c0), a=float(a))

    @staticmethod
    def table(times, values) -> "NoiseCoefficient":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or values.ndim != 2 or values.shape[0] != times.size:
            raise ConfigurationError("table needs times (m,) and values (m, d)")
        if values.shape[1] % 2 != 1:
            raise ConfigurationError("table must cover an odd number of sites")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("table times must be strictly increasing")
        return NoiseCoefficient(kind="table", table_times=times, table_values=values)

    def at(self, t: float, n: int) -> np.ndarray:
        """Values q_i(t) for sites i = -n..n."""
        return self.grid(np.array([t]), n)[0]

    def grid(self, times, n: int) -> np.ndarray:
        """Values on a time grid: shape (len(times), 2n + 1)."""
        times = np.asarray(times, dtype=float)
        d = 2 * n + 1
        if self.kind == "constant":
            return np.full((times.size, d), self.value)
        if self.kind == "affine":
            sites = np.arange(-n, n + 1)
            profile = 1.0 / (np.abs(sites) + 1.0)
            return self.c0 * (self.a - times[:, None] + profile[None, :])
        if self.kind == "table":
            if self.table_values.shape[1] < d:
                raise ConfigurationError(
                    f"table covers {self.table_values.shape[1]} sites, need {d}"
                )
            mid = self.table_values.shape[1] // 2
            cols = self.table_values[:, mid - n : mid + n + 1]
            out = np.empty((times.size, d))
            for j in range(d):
                out[:, j] = np.interp(times, self.table_times, cols[:, j])
            return out
        raise ConfigurationError(f"unknown noise coefficient kind {self.kind!r}")


def wq_path(noise: NoisePath, q: NoiseCoefficient, t_offset: float = 0.0) -> Path:
    """Cumulative noise path ``W_i(t_k) = sum_{j<k} q_i(t_j) dW_i(t_j)``.

    The coefficient is evaluated at the left endpoint of each step, at
    absolute time ``t_j + t_offset`` (the offset matters when the path has
    been produced by :func:`shift_noise`).
    """
    n = (noise.d - 1) // 2
    times = t_offset + noise.dt * np.arange(noise.steps)
    qs = q.grid(times, n)
    states = np.zeros((noise.steps + 1, noise.d))
    np.cumsum(qs * noise.increments, axis=0, out=states[1:])
    return Path(
        times=noise.dt * np.arange(noise.steps + 1),
        states=states,
        dt=noise.dt,
        meta={"seed": noise.seed, "trajectory": noise.trajectory, "kind": "wq"},
    )


def ou_convolution(noise: NoisePath, q: NoiseCoefficient, alpha, t_offset: float = 0.0) -> Path:
    """Exponentially damped noise path (per-site, rate alpha_i >= 0).

    One step of the exact-exponential update with left-endpoint kernel:

        ``X_i(t_{k+1}) = e^{-alpha_i dt} X_i(t_k) + q_i(t_k) e^{-alpha_i dt} dW_i(t_k)``

    with X(0) = 0.  As alpha -> 0 this reduces to :func:`wq_path`.
    """
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (noise.d,))
    if np.any(alpha < 0):
        raise ConfigurationError("damping rates must be nonnegative")
    n = (noise.d - 1) // 2
    times = t_offset + noise.dt * np.arange(noise.steps)
    qs = q.grid(times, n)
    decay = np.exp(-alpha * noise.dt)
    states = np.zeros((noise.steps + 1, noise.d))
    x = np.zeros(noise.d)
    for k in range(noise.steps):
        x = decay * (x + qs[k] * noise.increments[k])
        states[k + 1] = x
    return Path(
        times=noise.dt * np.arange(noise.steps + 1),
        states=states,
        dt=noise.dt,
        meta={"seed": noise.seed, "trajectory": noise.trajectory, "kind": "ou"},
    )


def shift_noise(noise: NoisePath, s: float) -> NoisePath:
    """Drop the first ``m = s / dt`` steps: step k of the result is step
    k + m of the input.

    ``s`` must lie on the grid.  Shifts compose: shifting by s1 then s2
    equals shifting once by s1 + s2.
    """
    m = s / noise.dt
    m_int = int(round(m))
    if abs(m - m_int) > 1e-9 or m_int < 0 or m_int > noise.steps:
        raise ConfigurationError(f"shift s={s} is not a grid time (dt={noise.dt})")
    return NoisePath(
        seed=noise.seed,
        dt=noise.dt,
        increments=noise.increments[m_int:],
        trajectory=noise.trajectory,
        origin_step=noise.origin_step + m_int,
    )
