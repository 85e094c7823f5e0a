"""Online advance reservation of capacity under Poisson demand.

Random-routing reservation policies (LS, MLS, RLS) built on a static LP,
baseline heuristics (GRD, RSRV, PD), and an experiment harness.
"""
from .constants import (
    RlsConstants,
    compound_poisson_tail_bound,
    corollary1_bound,
    h,
    ls_ratio,
    mls_ratios,
    solve_rls_constants,
)
from .generators import (
    make_hospital_scenario,
    make_ls_tightness_instance,
    make_prop1_instance,
    make_random_setting,
)
from .instance import CustomerType, Instance, InstanceError, RateFunction, Resource, load_instance, save_instance
from .lp import FractionalRouting, LPError, solve_layered_greedy, solve_routing_lp, upper_bound_check
from .policies import POLICY_NAMES, classify_types, make_policy
from .sim import ArrivalEvent, ReplicateResult, estimate_offline, run_policy, sample_path

__version__ = "0.1.0"

__all__ = [
    "RlsConstants",
    "compound_poisson_tail_bound",
    "corollary1_bound",
    "h",
    "ls_ratio",
    "mls_ratios",
    "solve_rls_constants",
    "make_hospital_scenario",
    "make_ls_tightness_instance",
    "make_prop1_instance",
    "make_random_setting",
    "CustomerType",
    "Instance",
    "InstanceError",
    "RateFunction",
    "Resource",
    "load_instance",
    "save_instance",
    "FractionalRouting",
    "LPError",
    "solve_layered_greedy",
    "solve_routing_lp",
    "upper_bound_check",
    "POLICY_NAMES",
    "classify_types",
    "make_policy",
    "ArrivalEvent",
    "ReplicateResult",
    "estimate_offline",
    "run_policy",
    "sample_path",
]
