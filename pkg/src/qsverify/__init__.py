"""Sample-complexity planning and simulation for verifying stabilizer states.

Submodules:

* ``stats_core``: binomial tails, relative entropy and monotone searches.
* ``adversarial``: guaranteed infidelity and test planning for arbitrary
  (possibly correlated) preparations.
* ``iid``: the same for independent identical preparations.
* ``qudit_sim``: dense simulator of qudit graph states and the test protocol.
* ``baselines``: costs of earlier verification protocols.
* ``sweeps``: tables behind each figure, plus custom grids.
* ``cli``: the ``qsverify`` command.
"""

from .adversarial import (
    MixtureSpec,
    PlanResult,
    ProtocolSpec,
    Strategy,
    accept_and_fidelity,
    eps_bar,
    N_fixed_failures,
    plan_min_tests,
    verify_plan,
)
from .errors import DomainError, ResourceError
from .iid import IIDPlanResult, eps_bar_iid, plan_min_tests_iid
from .stats_core import binom_tail, binom_sf

__all__ = [
    "DomainError", "ResourceError",
    "Strategy", "ProtocolSpec", "MixtureSpec", "PlanResult", "IIDPlanResult",
    "binom_tail", "binom_sf",
    "eps_bar", "accept_and_fidelity", "N_fixed_failures", "plan_min_tests", "verify_plan",
    "eps_bar_iid", "plan_min_tests_iid",
]

__version__ = "0.1.0"
