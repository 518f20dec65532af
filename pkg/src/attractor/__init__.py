"""Attractive points of nonlinear mappings on R^d.

Builds the quasinonexpansive extension of a mapping through the metric
projection onto (an outer approximation of) its attractive-point set, checks
mapping-class inequalities on samples, and runs Halpern and Mann iterations.
"""

from .attractive import (ExtensionMapping, Halfspace, HalfspaceSet, build_attractor, extend,
                         halfspace_from_generator, member, project_attractor, project_halfspace,
                         scan_fixed_points)
from .classes import (ClassVerdict, GHCoefficients, WMGHCoefficients, check_generalized_hybrid,
                      check_quasinonexpansive_wrt, check_wmgh, gh_to_wmgh, wmgh_condition_A,
                      wmgh_condition_B, wmgh_swap)
from .errors import *  # noqa: F401,F403
from .iterate import (IterationTrace, Schedule, residual_limit_check, run_halpern, run_mann,
                      validate_halpern_schedules, validate_mann_schedule)
from .mappings import MappingSpec, evaluate, registry_get
from .space import DomainSpec, as_vector, inner, norm

__version__ = "0.1.0"
