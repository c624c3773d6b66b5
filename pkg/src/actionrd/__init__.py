"""Rate-distortion-cost computation and code design for source coding with
action-dependent side information."""
from .errors import *  # noqa: F401,F403
from .prob import Pmf, ConditionalPmf, JointPmf, entropy, kl_divergence, mutual_information, build_joint
from .strategy import ShannonStrategy, StrategySpace, enumerate_strategies, support_report
from .scenario import (ScenarioInstance, ErasureParams, build_erasure, load_scenario, scenario_from_dict,
                       analytic_rdc, classic_rd, classic_scenario)
from .solver import SolverParams, RdcPoint, Workspace, solve_point, eval_F
from .curves import RdcCurve, sweep, evaluate_rdc, d_max, rd_at, refine, nonadaptive_curve, design_conditional

__version__ = "0.1.0"
