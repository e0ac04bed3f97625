"""Time-averaged Fourier decay of measures with power-law singular densities,
and return probabilities of singular states on the half-line lattice."""

__version__ = "0.1.0"

from .bounds import (BoundReport, IdentityCheck, gaussian_moment_identity,
                     plancherel_identity_check, sharp_bound_rhs, smoothing_majorization_check,
                     strichartz_inverse_check)
from .dynamics import (ReturnCurve, SingularState, averaged_return_probability,
                       build_singular_state, free_laplacian_log_check, heisenberg_time,
                       maintheorem_bound_check, return_curve)
from .exceptions import (BoundViolation, ConfigError, CostBudgetExceeded, FitError,
                         QuadratureError)
from .fitting import DecayFit, classify_regime, detect_log_over_t, fit_power_law
from .kernels import (BoundedWeight, DensityFunction, PowerLawExponent, SingularMeasure,
                      estimate_holder_exponent, kernel_eval, measure_mass)
from .lattice import (LatticeOperator, SpectralDecomposition, TransferMatrix,
                      density_bounds_check, eigendecompose, spectral_density,
                      transfer_matrix, transfer_norm_bound)
from .oscillatory import (CesaroCurve, cesaro_average, cesaro_curve, compute_m_beta,
                          measure_fourier, phase_integral)
from .special import gamma, incomplete_gamma_zero

__all__ = [name for name in dir() if not name.startswith("_")]
