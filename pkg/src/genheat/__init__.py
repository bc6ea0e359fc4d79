"""Generalized heat equation on the circle for measures with density and atoms.

The solver changes variables through the generalized inverse of the
distribution function, solves ``a v_t = v_xx`` by a frequency-domain
resolvent family and an oscillatory Fourier inversion, and checks the result
against an independent time-stepping backend.
"""

from .initial_data import (CompatibleData, IncompatibleData, NonZeroMean, compose_h,
                           from_xspace, from_yspace)
from .measure import (CapacityProfile, InvalidMeasure, MeasureSpec, cantor_approx,
                      capacity, eval_W, eval_w, lebesgue, lebesgue_plus_delta,
                      substitution_check, two_atoms, vague_distance)
from .oracle import SchemeConfig, robin_flux_check, step_scheme
from .resolvent import (FrequencyGrid, ResolventFamily, decay_report, solve_k, solve_T,
                        sweep)
from .synthesis import SolutionField, holder_seminorm, pushback, synthesize
from .verification import (ExperimentReport, continuity_experiment,
                           counterexample_experiment, cross_validate, weak_residual_x,
                           weak_residual_y)

__version__ = "0.1.0"
