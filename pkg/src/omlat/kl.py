"""Spectral decomposition of the damped-noise covariance on [0, 1] and
small-ball probability machinery.

The covariance kernel of the unit-coefficient damped noise path with
decay rate ``lam`` is

    ``K(t, s) = (1 / 2 lam) (e^{-lam |t - s|} - e^{-lam (t + s)})``.

Its eigenfunctions are ``g_i(s) = A_i sin(gamma_i s)`` with eigenvalues
``mu_i = 1 / (lam^2 + gamma_i^2)``, where gamma_i is the unique root of
``tan(gamma) = -gamma / lam`` in ``((2i-1) pi/2, (2i+1) pi/2)``.

Root handling: gamma_i sits a distance ``u_i ~ lam / gamma_i`` above the
left pole of tan, where the residual ``tan(gamma) + gamma / lam`` has
slope ``~ 1 + (gamma/lam)^2``.  A root stored as one double can therefore
carry a residual around ``slope * ulp(gamma) ~ 1e-9`` for i ~ 50 no
matter how it was computed.  We instead solve for and keep the pole
offset u_i, whose own ulp is ~1e-19, and evaluate the residual through
the exact identity ``tan((2i-1) pi/2 + u) = -cot(u)``; the roots then
satisfy the defining equation to ~1e-13.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .errors import ConfigurationError

__all__ = [
    "KLSpectrum",
    "kl_spectrum",
    "ou_kernel",
    "kernel_eigen_check",
    "eigenfunction_orthogonality",
    "smallball_bounds",
    "SmallBallBounds",
    "smallball_mc",
    "SmallBallMC",
    "wilson_interval",
    "spectrum_weight_decay",
]

_TAG_SMALLBALL_BLOCK = 3
_TAG_SMALLBALL_TAIL = 4


@dataclass(frozen=True)
class KLSpectrum:
    """Roots, eigenvalues and normalization constants of the covariance
    eigenproblem.

    ``gamma[i]`` is the (i+1)-th root as a double; ``pole_offset[i]`` is
    the same root expressed as its distance above ``(2i+1) pi / 2``'s left
    pole, kept for high-accuracy residual evaluation.  ``A[i]`` normalizes
    ``A sin(gamma s)`` to unit norm on [0, 1].
    """

    lambda_decay: float
    gamma: np.ndarray
    mu: np.ndarray
    A: np.ndarray
    pole_offset: np.ndarray

    @property
    def count(self) -> int:
        return self.gamma.size

    def eigenfunction(self, i: int, s):
        """g_i(s) = A_i sin(gamma_i s), 1-based index."""
        return self.A[i - 1] * np.sin(self.gamma[i - 1] * np.asarray(s, dtype=float))

    def residuals(self) -> np.ndarray:
        """|tan(gamma_i) + gamma_i / lam| evaluated through the pole-offset
        representation (see module docstring)."""
        lam = self.lambda_decay
        out = np.empty(self.count)
        for idx in range(self.count):
            u = self.pole_offset[idx]
            # tan(c + u) = -cot(u) exactly, with c the left pole of bracket idx+1
            out[idx] = abs(-1.0 / math.tan(u) + self.gamma[idx] / lam)
        return out


def kl_spectrum(lam: float, count: int) -> KLSpectrum:
    """First ``count`` eigenpairs for decay rate ``lam > 0``.

    Bisection runs on the pole offset u = gamma - (2i-1) pi/2 in (0, pi),
    where ``g(u) = lam cot(u) - gamma`` is strictly decreasing from +inf
    to -inf, so each bracket contains exactly one root; the iteration
    stops when the bracket cannot be split further in double precision.
    """
    if not lam > 0:
        raise ConfigurationError(f"decay rate must be positive, got {lam}")
    if count < 1:
        raise ConfigurationError(f"need at least one eigenpair, got {count}")
    gamma = np.empty(count)
    offsets = np.empty(count)
    for i in range(1, count + 1):
        c = (2 * i - 1) * math.pi / 2.0

        def g(u):
            return lam / math.tan(u) - (c + u)

        lo, hi = 1e-12, math.pi - 1e-12
        # g(lo) > 0 > g(hi); keep the sign invariant while halving
        for _ in range(200):
            midpoint = 0.5 * (lo + hi)
            if midpoint <= lo or midpoint >= hi:
                break
            if g(midpoint) > 0.0:
                lo = midpoint
            else:
                hi = midpoint
        u = 0.5 * (lo + hi)
        offsets[i - 1] = u
        gamma[i - 1] = c + u
    mu = 1.0 / (lam**2 + gamma**2)
    # normalization: int_0^1 sin^2(gamma s) ds = 1/2 - sin(2 gamma) / (4 gamma)
    sin_sq_integral = 0.5 - np.sin(2.0 * gamma) / (4.0 * gamma)
    A = 1.0 / np.sqrt(sin_sq_integral)
    return KLSpectrum(lambda_decay=lam, gamma=gamma, mu=mu, A=A, pole_offset=offsets)


def ou_kernel(lam: float, t, s):
    """Covariance kernel ``(1 / 2 lam)(e^{-lam |t-s|} - e^{-lam (t+s)})``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return (np.exp(-lam * np.abs(t - s)) - np.exp(-lam * (t + s))) / (2.0 * lam)


def _simpson(values: np.ndarray, h: float) -> float:
    # values on an odd-length uniform grid
    return h / 3.0 * (values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum())


def _odd_count(m: int) -> int:
    m = max(3, m)
    return m if m % 2 == 1 else m + 1


def kernel_eigen_check(spec: KLSpectrum, i: int, quad_points: int = 2001, eval_points: int = 101) -> float:
    """Max over t of ``| int_0^1 K(t, s) g_i(s) ds - mu_i g_i(t) |`` by
    composite Simpson quadrature.

    The integral is split at s = t so each piece is smooth (the kernel has
    a kink along the diagonal); ``quad_points`` is the total budget across
    both pieces.
    """
    if not 1 <= i <= spec.count:
        raise ConfigurationError(f"eigenpair index {i} outside 1..{spec.count}")
    lam = spec.lambda_decay
    worst = 0.0
    for t in np.linspace(0.0, 1.0, eval_points):
        total = 0.0
        if t > 0.0:
            m = _odd_count(int(round(quad_points * t)))
            s = np.linspace(0.0, t, m)
            total += _simpson(ou_kernel(lam, t, s) * spec.eigenfunction(i, s), t / (m - 1))
        if t < 1.0:
            m = _odd_count(int(round(quad_points * (1.0 - t))))
            s = np.linspace(t, 1.0, m)
            total += _simpson(ou_kernel(lam, t, s) * spec.eigenfunction(i, s), (1.0 - t) / (m - 1))
        worst = max(worst, abs(total - spec.mu[i - 1] * spec.eigenfunction(i, t)))
    return worst


def eigenfunction_orthogonality(spec: KLSpectrum, upto: int, quad_points: int = 2001) -> float:
    """Max deviation of ``int_0^1 g_i g_j`` from the identity matrix over
    i, j <= upto (Simpson on the full interval; the integrand is smooth)."""
    m = _odd_count(quad_points)
    s = np.linspace(0.0, 1.0, m)
    h = 1.0 / (m - 1)
    G = np.stack([spec.eigenfunction(i, s) for i in range(1, upto + 1)])
    worst = 0.0
    for a in range(upto):
        for b in range(a, upto):
            val = _simpson(G[a] * G[b], h)
            worst = max(worst, abs(val - (1.0 if a == b else 0.0)))
    return worst


@dataclass(frozen=True)
class SmallBallBounds:
    """Shapes of the two-sided small-ball estimate for weights i^(-alpha).

    ``upper = eps^(rho (1-alpha)) exp(-rate_up eps^(-2 rho))`` and
    ``lower = eps^(rho (3-alpha)) exp(-rate_low eps^(-2 rho))`` with
    ``rho = 1 / (2 alpha - 1)``; the multiplicative constants are unknown
    and reported as 1.
    """

    alpha: float
    rho: float
    rate_up: float
    rate_low: float
    prefactor_exp_up: float
    prefactor_exp_low: float
    upper: float
    lower: float


def smallball_bounds(alpha: float, eps: float) -> SmallBallBounds:
    """Evaluate the bound shapes at one radius.

    Requires alpha > 1/2 (at alpha = 1/2 the exponent rho diverges) and
    0 < eps <= 1.
    """
    if not alpha > 0.5:
        raise ConfigurationError(f"alpha must exceed 1/2, got {alpha}")
    if not 0.0 < eps <= 1.0:
        raise ConfigurationError(f"eps must lie in (0, 1], got {eps}")
    rho = 1.0 / (2.0 * alpha - 1.0)
    rate_up = alpha - 0.5
    rate_low = alpha * (1.0 + rho) ** rho
    pre_up = rho * (1.0 - alpha)
    pre_low = rho * (3.0 - alpha)
    return SmallBallBounds(
        alpha=alpha,
        rho=rho,
        rate_up=rate_up,
        rate_low=rate_low,
        prefactor_exp_up=pre_up,
        prefactor_exp_low=pre_low,
        upper=eps**pre_up * math.exp(-rate_up * eps ** (-2.0 * rho)),
        lower=eps**pre_low * math.exp(-rate_low * eps ** (-2.0 * rho)),
    )


def wilson_interval(hits: int, trials: int, z: float = 1.959963984540054) -> tuple:
    """Wilson 95% score interval for a binomial proportion."""
    if trials <= 0:
        raise ConfigurationError("need at least one trial")
    p = hits / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class SmallBallMC:
    """Monte Carlo estimates of ``P(sqrt(sum_i i^(-2 alpha) X_i^2) <= eps)``
    with shared samples across radii (hit counts are exactly monotone in
    eps)."""

    alpha: float
    i_max: int
    samples: int
    seed: int
    eps: np.ndarray
    hits: np.ndarray
    estimates: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray


def _required_i_max(alpha: float, eps_min: float) -> int:
    # sum_{i > I} i^(-2 alpha) <= I^(1 - 2 alpha) / (2 alpha - 1) < 1e-3 eps_min^2
    target = 1e-3 * eps_min**2 * (2.0 * alpha - 1.0)
    return int(math.ceil(target ** (-1.0 / (2.0 * alpha - 1.0)))) + 1


def smallball_mc(
    alpha: float,
    i_max: int,
    eps,
    samples: int,
    seed: int = 0,
    block_size: int = 65536,
    head_size: int = 256,
) -> SmallBallMC:
    """Estimate the small-ball probabilities for weights ``i^(-alpha)``.

    The truncation must satisfy ``sum_{i > i_max} i^(-2 alpha) <
    1e-3 min(eps)^2``; otherwise a configuration error names the required
    ``i_max``.  Draws are keyed per sample block (head coordinates) and
    per sample (tail coordinates), so the estimate is a pure function of
    (alpha, i_max, eps, samples, seed).  The tail coordinates of a sample
    are only generated when its head sum still lies below the largest
    radius; the tail sum is nonnegative, so skipped samples can never be
    hits.  Draws use single-precision normals accumulated in double.
    """
    if not alpha > 0.5:
        raise ConfigurationError(f"alpha must exceed 1/2, got {alpha}")
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps <= 0):
        raise ConfigurationError("radii must be positive")
    if samples < 1:
        raise ConfigurationError("need at least one sample")
    tail_mass = i_max ** (1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)
    if tail_mass >= 1e-3 * np.min(eps) ** 2:
        raise ConfigurationError(
            f"i_max={i_max} leaves truncated mass {tail_mass:.3e} >= "
            f"{1e-3 * np.min(eps)**2:.3e}; need i_max >= {_required_i_max(alpha, float(np.min(eps)))}"
        )
    head = min(head_size, i_max)
    w = np.arange(1, i_max + 1, dtype=float) ** (-2.0 * alpha)
    w_head, w_tail = w[:head], w[head:]
    thresholds = np.sort(eps) ** 2
    cutoff = float(np.max(thresholds))
    hits_sorted = np.zeros(thresholds.size, dtype=np.int64)

    for block_start in range(0, samples, block_size):
        count = min(block_size, samples - block_start)
        block_index = block_start // block_size
        g = Generator(Philox(key=_key(seed, _TAG_SMALLBALL_BLOCK, block_index)))
        x = g.standard_normal((count, head), dtype=np.float32).astype(np.float64)
        sums = np.einsum("ij,ij,j->i", x, x, w_head)
        if w_tail.size:
            for j in np.nonzero(sums <= cutoff)[0]:
                gj = Generator(Philox(key=_key(seed, _TAG_SMALLBALL_TAIL, block_start + int(j))))
                xt = gj.standard_normal(w_tail.size, dtype=np.float32).astype(np.float64)
                sums[j] += xt @ (xt * w_tail)
        hits_sorted += np.searchsorted(np.sort(sums), thresholds, side="right")

    order = np.argsort(eps)
    hits = np.empty_like(hits_sorted)
    hits[order] = hits_sorted
    est = hits / samples
    ci = np.array([wilson_interval(int(h), samples) for h in hits])
    return SmallBallMC(
        alpha=alpha,
        i_max=i_max,
        samples=samples,
        seed=seed,
        eps=eps,
        hits=hits,
        estimates=est,
        ci_lo=ci[:, 0],
        ci_hi=ci[:, 1],
    )


def _key(seed: int, tag: int, index: int) -> np.ndarray:
    word = (np.uint64(tag) << np.uint64(56)) | np.uint64(index)
    return np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), word], dtype=np.uint64)


def spectrum_weight_decay(spec: KLSpectrum) -> float:
    """Log-log slope of sqrt(mu_i) against i.

    The eigenvalues decay like ``mu_i ~ gamma_i^(-2) ~ (pi i)^(-2)``, so
    the weights sqrt(mu_i) match the ``i^(-alpha)`` small-ball family with
    alpha ~ 1; the fitted slope makes the mapping quantitative.
    """
    i = np.arange(1, spec.count + 1, dtype=float)
    slope = np.polyfit(np.log(i), 0.5 * np.log(spec.mu), 1)[0]
    return float(-slope)
