from .base import Belief, Policy, StepView, Transition
from .baseline import OraclePolicy, RandomPolicy, TabularQPolicy, oracle_plan, random_policy

__all__ = [
    "Belief",
    "Policy",
    "StepView",
    "Transition",
    "OraclePolicy",
    "RandomPolicy",
    "TabularQPolicy",
    "oracle_plan",
    "random_policy",
]
