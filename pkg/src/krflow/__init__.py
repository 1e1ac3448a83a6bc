"""Radial-ansatz Kahler-Ricci flow laboratory.

Rotationally symmetric Kahler metrics on model quasiprojective ends are
reduced to a coefficient pair (phi, psi) on a radial log-grid; the package
builds the cylindrical, bulging and conical model ends, evolves them by the
reduced flow, runs parabolic rescalings toward their predicted limits,
expands the expanding soliton exactly, and fits curvature-decay exponents.
"""

from .errors import (ConfigInvalid, GridNotPositive, GridTooCoarse,
                     HorizonExceeded, InterpolationRangeExceeded,
                     KRFlowError, LatticeMismatch, NoConvergence, NonKaehler,
                     OddWeightConstant, OutOfRange, RegimeMismatch,
                     Singularity, SingularityKind, StabilityViolation,
                     TooCloseToBoundary, WindowOutsideGrid, WindowTooSmall)
from .geometry import (BaseGeometry, RadialProfile, RicciCoefficients,
                       curvature_norm_at, curvature_norm_samples,
                       cumulative_distance, profile_from_potential,
                       radial_distance, ricci_coefficients,
                       ricci_norm_samples, scalar_curvature, uniform_grid)
from .models import (RegimeKind, RegimeSpec, asymptotic_form_residual,
                     bulging_coefficients, load_b_table, make_bulging,
                     make_conical, make_cylindrical, make_fik, save_b_table)
from .flow import (BCKind, FlowControls, FlowTrajectory, PotentialFlowState,
                   PotentialTrajectory, Scheme, SolitonSolution, evolve,
                   evolve_potential, flow_equation_residual,
                   self_similar_family, soliton_ode_residual,
                   soliton_profile_solve)
from .series import (GradientPotential, TPoly, TruncatedExpansion, blowdown,
                     flow_expand, gradient_identity_residual,
                     gradient_potential, soliton_equation_residual,
                     soliton_expand)
from .rescaling import (ProductLimitReport, RescaledSamples, RescaleRegime,
                        RescalingSpec, bulging_rescale, conical_blowdown,
                        fit_cone_coefficient, fit_first_order_slot,
                        product_limit_error, rescale_samples_further)
from .decay import (DecayReport, PlateauReport, PreservationVerdict, Quantity,
                    QuantityKind, bilipschitz_plateau_check,
                    decay_preservation_check, fit_decay_exponent,
                    quantity_samples, write_decay_reports)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
