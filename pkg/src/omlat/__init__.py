"""Stochastic lattice dynamics with time-varying diagonal noise.

Simulation of the truncated lattice system, evaluation of the path action
whose minimizers are most-probable transition paths, a two-point
boundary-value solver for those paths, and the spectral / small-ball /
tube-probability machinery used to verify the theory at desk scale.
"""

__version__ = "0.1.0"

from .action import OMReport, om_action, om_gradient, om_integrand, residual, residuals, trace_term
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateNoiseError,
    IntegrationError,
    OmlatError,
    StatisticalPowerError,
)
from .lattice import (
    LatticeConfig,
    PolynomialNonlinearity,
    apply_A,
    apply_B,
    apply_BT,
    dense_A,
    dense_B,
    drift,
    weighted_inner,
    weighted_norm,
)
from .noise import (
    NoiseCoefficient,
    NoisePath,
    increment_row,
    ou_convolution,
    sample_noise,
    sample_noise_ensemble,
    shift_noise,
    wq_path,
)
from .config import example5_boundary, example5_config, load_config, parse_config, parse_q_spec
from .kl import (
    KLSpectrum,
    SmallBallBounds,
    SmallBallMC,
    eigenfunction_orthogonality,
    kernel_eigen_check,
    kl_spectrum,
    ou_kernel,
    smallball_bounds,
    smallball_mc,
    spectrum_weight_decay,
    wilson_interval,
)
from .mpp import BVPSpec, MPPResult, action_along_homotopy, el_residual_example5, solve_mpp
from .paths import Path
from .sde import BoundReport, apriori_bound_check, cocycle_check, integrate, truncation_tail
from .tube import TubeExperiment, TubeTable, l2rho_path_norm, tube_ratio

__all__ = [name for name in dir() if not name.startswith("_")]
