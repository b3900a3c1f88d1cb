"""Stability certificates for cycle-by-cycle current-mode converters.

An integral-quadratic-constraint gain bound on the sampled current loop is
combined with a voltage-block bound through the small-gain theorem.
"""

from .converter import (AssumptionReport, ConverterParams, DerivedConstants, Equilibrium,
                        Topology, compute_equilibrium, derived_constants, table1_buck,
                        validate_class_sigma)
from .criteria import (BoostBranch, StabilityReport, Verdict, boost_off_time_criterion,
                       buck_on_time_criterion, certify_buck, max_stable_sector, small_gain_check)
from .lure import (GainCertificate, GainSurface, InfeasibleError, LftSystem, SectorBound,
                   build_theorem1_matrix, certify_gain, gain_surface, is_negative_definite,
                   lti_lower_bound_oracle, unitless_current_block)
from .simulator import (CycleState, InterferenceModel, SimVerdict, Stability, TransientTrace,
                        classify_stability, run_transient, solve_off_time, step_cycle)
from .voltage import voltage_block_gain_bound

__version__ = "0.1.0"
