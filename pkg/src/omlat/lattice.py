"""Weighted sequence space, lattice operators, and problem configuration.

Everything downstream works on a periodic truncation of the integer
lattice: sites i = -n..n, dimension d = 2n + 1, with site -n coupled to
site n.  States are plain 1-d numpy arrays of length d; site i lives at
array position i + n.  Norms and inner products carry per-site weights
rho_i > 0:

    ``norm(u)^2 = sum_i (rho_i u_i)^2``,   ``<u, v> = sum_i rho_i^2 u_i v_i``.

The second-difference operator A and the forward/backward difference
operators B, B^T satisfy A = B B^T = B^T B and annihilate constants.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateNoiseError
from .noise import NoiseCoefficient

__all__ = [
    "PolynomialNonlinearity",
    "LatticeConfig",
    "weighted_norm",
    "weighted_inner",
    "apply_A",
    "apply_B",
    "apply_BT",
    "drift",
    "dense_A",
    "dense_B",
    "site_indices",
]

#: Any component beyond this magnitude is treated as a blown-up trajectory.
BLOWUP_THRESHOLD = 1.0e8

#: Grid used for the numerical nonlinearity checks (f1)/(f2).
_F_CHECK_GRID = np.linspace(-10.0, 10.0, 1001)


def site_indices(d: int) -> np.ndarray:
    """Return the site indices -n..n for a truncation of dimension d = 2n+1."""
    n = (d - 1) // 2
    return np.arange(-n, n + 1)


def _check_lengths(*arrays):
    lengths = {len(a) for a in arrays}
    if len(lengths) != 1:
        raise ConfigurationError(f"length mismatch: {sorted(lengths)}")


def weighted_norm(u, rho) -> float:
    """Weighted norm ``(sum_i (rho_i u_i)^2)^(1/2)``.

    Zero if and only if u is the zero vector (rho is all-positive).
    """
    u = np.asarray(u, dtype=float)
    rho = np.asarray(rho, dtype=float)
    _check_lengths(u, rho)
    return float(np.linalg.norm(rho * u))


def weighted_inner(u, v, rho) -> float:
    """Weighted inner product ``sum_i rho_i^2 u_i v_i``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    rho = np.asarray(rho, dtype=float)
    _check_lengths(u, v, rho)
    return float(np.sum(rho * rho * u * v))


def apply_A(u):
    """Periodic second-difference operator: ``(A u)_i = -u_{i-1} + 2 u_i - u_{i+1}``.

    Site -n wraps to site n.  Symmetric positive semidefinite; constants
    are in the kernel.  For d = 1 the wrap degenerates the row 2 - 1 - 1
    to zero.
    """
    u = np.asarray(u, dtype=float)
    return 2.0 * u - np.roll(u, 1, axis=-1) - np.roll(u, -1, axis=-1)


def apply_B(u):
    """Forward difference with periodic wrap: ``(B u)_i = u_{i+1} - u_i``."""
    u = np.asarray(u, dtype=float)
    return np.roll(u, -1, axis=-1) - u


def apply_BT(u):
    """Backward difference with periodic wrap: ``(B^T u)_i = u_{i-1} - u_i``.

    Adjoint of :func:`apply_B` in the unweighted inner product.
    """
    u = np.asarray(u, dtype=float)
    return np.roll(u, 1, axis=-1) - u


def dense_A(d: int) -> np.ndarray:
    """Dense matrix of :func:`apply_A` (2 on the diagonal, -1 on the first
    off-diagonals and in the periodic corners)."""
    out = np.empty((d, d))
    eye = np.eye(d)
    for j in range(d):
        out[:, j] = apply_A(eye[:, j])
    return out


def dense_B(d: int) -> np.ndarray:
    """Dense matrix of :func:`apply_B` (-1 on the diagonal, 1 on the first
    super-diagonal and in the lower-left corner)."""
    out = np.empty((d, d))
    eye = np.eye(d)
    for j in range(d):
        out[:, j] = apply_B(eye[:, j])
    return out


@dataclass(frozen=True)
class PolynomialNonlinearity:
    """Odd polynomial nonlinearity ``f(x) = sum_k coeffs[k] x^(2k+1)``.

    ``coeffs[0]`` multiplies x, ``coeffs[1]`` multiplies x^3, and so on,
    so f(0) = 0 holds structurally.  ``p`` and ``growth_constant`` are the
    exponent and constant of the polynomial growth bound
    ``|f(x)| <= C |x| (1 + x^(2p))``.

    Two numerical condition checks are provided: :meth:`condition_f1`
    (monotone non-decreasing on a sign-check grid, automatic when all
    coefficients are nonnegative) and :meth:`condition_f2` (the growth
    bound on the same grid).  Construction warns, but does not fail, when
    the monotonicity check fails; the downstream dissipativity guarantees
    are then void.
    """

    coeffs: tuple = ()
    p: int = 1
    growth_constant: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.p < 1 or int(self.p) != self.p:
            raise ConfigurationError(f"growth exponent p must be a positive integer, got {self.p}")
        if self.growth_constant < 0:
            raise ConfigurationError("growth constant must be nonnegative")
        if self.coeffs and not self.condition_f1():
            warnings.warn(
                "nonlinearity fails the monotonicity grid check (f1); "
                "dissipativity-based guarantees do not apply",
                stacklevel=2,
            )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not self.coeffs:
            return np.zeros_like(x)
        # Horner in x^2, times x.
        x2 = x * x
        acc = np.full_like(x, self.coeffs[-1])
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x2 + c
        return x * acc

    def deriv(self, x):
        """f'(x) = sum_k (2k+1) coeffs[k] x^(2k)."""
        x = np.asarray(x, dtype=float)
        if not self.coeffs:
            return np.zeros_like(x)
        x2 = x * x
        acc = np.full_like(x, (2 * len(self.coeffs) - 1) * self.coeffs[-1])
        for k in reversed(range(len(self.coeffs) - 1)):
            acc = acc * x2 + (2 * k + 1) * self.coeffs[k]
        return acc

    def deriv2(self, x):
        """f''(x) = sum_k (2k+1) 2k coeffs[k] x^(2k-1)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(1, len(self.coeffs)):
            out += (2 * k + 1) * (2 * k) * self.coeffs[k] * x ** (2 * k - 1)
        return out

    def deriv3(self, x):
        """f'''(x), used by the optional full-Newton path solver."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(1, len(self.coeffs)):
            out += (2 * k + 1) * (2 * k) * (2 * k - 1) * self.coeffs[k] * x ** (2 * k - 2)
        return out

    def condition_f1(self, grid=None) -> bool:
        """Monotone non-decreasing check on a symmetric grid.

        Exact for the polynomial family when all coefficients are
        nonnegative; otherwise a finite sign check.
        """
        if all(c >= 0 for c in self.coeffs):
            return True
        g = _F_CHECK_GRID if grid is None else np.asarray(grid, dtype=float)
        return bool(np.all(np.diff(self(g)) >= -1e-12))

    def condition_f2(self, grid=None) -> bool:
        """Growth bound ``|f(x)| <= C |x| (1 + x^(2p))`` on the check grid."""
        g = _F_CHECK_GRID if grid is None else np.asarray(grid, dtype=float)
        bound = self.growth_constant * np.abs(g) * (1.0 + g ** (2 * self.p))
        return bool(np.all(np.abs(self(g)) <= bound + 1e-12))


@dataclass(frozen=True)
class LatticeConfig:
    """Full problem specification shared by every module.

    Parameters
    ----------
    n : int
        Truncation half-width; sites run over i = -n..n, d = 2n + 1.
    nu : float
        Diffusion coefficient of the second-difference coupling, > 0.
    lam : float
        Linear decay coefficient, > 0.
    f : PolynomialNonlinearity
        Componentwise nonlinearity.
    g : ndarray or None
        Constant forcing vector of length d (None means zero).
    q : NoiseCoefficient
        Per-site, time-varying noise coefficient q_i(t).
    rho : ndarray or None
        Positive site weights (None means all ones).
    T : float
        Time horizon, > 0.
    """

    n: int
    nu: float
    lam: float
    f: PolynomialNonlinearity
    q: NoiseCoefficient
    T: float
    g: np.ndarray | None = None
    rho: np.ndarray | None = None
    q_check_points: int = field(default=513, repr=False)

    def __post_init__(self):
        if self.n < 0 or int(self.n) != self.n:
            raise ConfigurationError(f"truncation half-width n must be >= 0, got {self.n}")
        if not self.nu > 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if not self.lam > 0:
            raise ConfigurationError(f"lambda must be positive, got {self.lam}")
        if not self.T > 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")
        d = self.d
        g = np.zeros(d) if self.g is None else np.asarray(self.g, dtype=float)
        rho = np.ones(d) if self.rho is None else np.asarray(self.rho, dtype=float)
        if g.shape != (d,):
            raise ConfigurationError(f"g must have length {d}, got shape {g.shape}")
        if rho.shape != (d,):
            raise ConfigurationError(f"rho must have length {d}, got shape {rho.shape}")
        if not np.all(rho > 0):
            raise ConfigurationError("all weights rho_i must be positive")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(rho))):
            raise ConfigurationError("g and rho must be finite")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "rho", rho)
        self._check_noise_nondegenerate()

    def _check_noise_nondegenerate(self):
        # q_i(t) != 0 on a sampling grid, with no sign change per site:
        # a continuous nonzero coefficient keeps one sign.
        ts = np.linspace(0.0, self.T, self.q_check_points)
        qs = self.q.grid(ts, self.n)
        if not np.all(np.isfinite(qs)):
            raise ConfigurationError("noise coefficient is not finite on [0, T]")
        if np.any(qs == 0.0):
            k, i = np.argwhere(qs == 0.0)[0]
            raise DegenerateNoiseError(
                f"q vanishes at t={ts[k]:.6g} (site {i - self.n})"
            )
        signs = np.sign(qs)
        if np.any(signs.min(axis=0) != signs.max(axis=0)):
            raise ConfigurationError(
                "noise coefficient changes sign on [0, T]; it must stay nonzero"
            )

    @property
    def d(self) -> int:
        return 2 * self.n + 1

    @property
    def sites(self) -> np.ndarray:
        return site_indices(self.d)


def drift(u, cfg: LatticeConfig):
    """Deterministic drift ``-nu A u - lam u - f(u) + g`` of the lattice system.

    The nonlinearity acts componentwise.  Accepts a single state of shape
    (d,) or a batch of shape (m, d).
    """
    u = np.asarray(u, dtype=float)
    return -cfg.nu * apply_A(u) - cfg.lam * u - cfg.f(u) + cfg.g
