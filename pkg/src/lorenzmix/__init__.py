"""Numerical lab for geometric Lorenz flows: the Lorenz ODE, its one-dimensional
reduction, inducing schemes, invariant densities, suspension semiflows and
mixing diagnostics."""

__version__ = "0.1.0"

from .errors import (BudgetError, ConvergenceError, DivergenceError, ExpandingConditionError,
                     ExtractionError, LorenzMixError, NonSaddleSpectrum, NumericalError,
                     PreconditionError, RootBracketError, SectionTimeout, SingularOrbitError,
                     UndefinedPointError)
from .ode_flow import (IntegratorConfig, LorenzParams, OriginSpectrum, Section, SectionEvent, State3,
                       Trajectory, attractor_point, integrate, lorenz_jacobian, lorenz_vector_field,
                       next_section_crossing, origin_spectrum, section_events)
from .local_passage import (CubeFace, PassageExponents, integrate_linear_passage, passage_exponents,
                            passage_face, passage_map, passage_time)
from .roof import RoofFunction, constant_roof, default_roof, unit_log_roof
from .lorenz_map import (ExpansionReport, IntervalCover, IntervalMap, LeoResult, LorenzLikeMap,
                         check_conditions, check_leo, leo_sufficiency, sanity_map)
from .induced_map import (GibbsMarkovReport, InducedScheme, SchemeBranch, build_scheme, return_time_tail,
                          verify_gibbs_markov)
from .invariant_measure import (BirkhoffHistogram, UlamDensity, birkhoff_histogram, l1_distance,
                                pushforward, roof_integral, stationary_density, ulam_matrix)
from .suspension_flow import (SuspensionPoint, advance, advance_many, observe, observe_on_grid,
                              sample_measure)
from .mixing_diagnostics import (CohomologyTest, CorrelationSeries, ObstructionSequence, Spectrum,
                                 cohomology_residual, correlation, limit_contrast, obstruction_sequence,
                                 power_spectrum)
from .cone_check import ConeReport, TangentVector, cone_invariance_report, variational_return
from .poincare_extraction import EmpiricalMap, EmpiricalRoof, extract_map, extract_roof
