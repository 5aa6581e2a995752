"""Branching-diffusion Monte Carlo for semilinear parabolic PDEs.

The package simulates branching Brownian motion whose particles carry a sign
and a derivative-order mark.  An exponential functional of the exit
configuration estimates solutions of du/dt = (1/2) u_xx - psi(u, u_x), where
the nonlinearity psi is determined by the branching rule through a small
symbolic calculus.

Layers
------
rules      branching rules: weighted mark transitions plus a clock intensity
calculus   expansion of the generated nonlinearity in the clock parameter beta
engine     tree simulation producing signed, marked exit measures
estimators Monte Carlo estimators built on exit functionals
pde        finite-difference reference solvers and integral-identity checks
lemma      direct verification of the exponential-clock representation
cli        the ``branchflow`` command-line driver
"""

from .calculus import (PDEDescriptor, ScalingMode, psi_limit, psi_series,
                       series_lines, target_pde)
from .engine import (Domain, EngineConfig, ExitAtom, ExitMeasure,
                     expected_population, simulate_tree, tree_stream)
from .errors import (AlphaOutOfRange, BlowUpDetected, BranchflowError,
                     CapExceeded, ConfigError, DerivAtSpaceBoundary,
                     DerivOrderUnsupported, DivergentLimit, NegativeWeight,
                     PopulationExceeded, RuleError, StabilityViolation,
                     UnsupportedCombination, WeightSumMismatch)
from .estimators import (FieldPoint, MCResult, MomentResult, PopulationStats,
                         TransformedInitial, estimate_field, estimate_point,
                         exit_functional, moment_functional, population_stats)
from .functions import (BoundaryData, Constant, Gaussian, Polynomial, Scaled,
                        SeparableField, Sine, initial_condition_from_dict)
from .lemma import (LemmaCheckRow, LemmaInstance, LemmaReport, build_u_grid,
                    check_identity, lemma_grid)
from .pde import (Grid1D, GridSolution, ResidualReport, heat_closed_form,
                  heat_boundary, integral_residual, padded_interval,
                  self_convergence_order, solve_cauchy, solve_semilinear)
from .rules import (BranchingRule, Intensity, MarkTransition, Offspring,
                    RuleReport, built_in_rule, diffusion_rule,
                    derivative_mix_rule, kpp_rule, load_rule, rule_from_dict,
                    rule_from_power, rule_to_dict, save_rule, sign_flip_rule,
                    validate_rule)

__version__ = "0.1.0"

__all__ = [
    "AlphaOutOfRange", "BlowUpDetected", "BoundaryData", "BranchflowError",
    "BranchingRule", "CapExceeded", "ConfigError", "Constant",
    "DerivAtSpaceBoundary", "DerivOrderUnsupported", "DivergentLimit",
    "Domain", "EngineConfig", "ExitAtom", "ExitMeasure", "FieldPoint",
    "Gaussian", "Grid1D", "GridSolution", "Intensity", "LemmaCheckRow",
    "LemmaInstance", "LemmaReport", "MCResult", "MarkTransition",
    "MomentResult", "NegativeWeight", "Offspring", "PDEDescriptor",
    "Polynomial", "PopulationExceeded", "PopulationStats", "ResidualReport",
    "RuleError", "RuleReport", "Scaled", "ScalingMode", "SeparableField",
    "Sine", "StabilityViolation", "TransformedInitial",
    "UnsupportedCombination", "WeightSumMismatch", "build_u_grid",
    "built_in_rule", "check_identity", "derivative_mix_rule",
    "diffusion_rule", "estimate_field", "estimate_point",
    "exit_functional", "expected_population", "heat_boundary",
    "heat_closed_form", "initial_condition_from_dict", "integral_residual",
    "kpp_rule", "lemma_grid", "load_rule", "moment_functional",
    "padded_interval", "population_stats", "psi_limit", "psi_series",
    "rule_from_dict", "rule_from_power", "rule_to_dict", "save_rule",
    "self_convergence_order", "series_lines", "sign_flip_rule",
    "simulate_tree", "solve_cauchy", "solve_semilinear", "target_pde",
    "tree_stream", "validate_rule",
]
