"""Search-space pruning bounds.

Two quantities gate rule proposals during search:

* a floor on the support any rule in the optimum can have, tightening as
  the best-found posterior improves, and
* a cap on how many rules the optimum can contain.

Both derive from the per-covered-row likelihood-loss factor ``upsilon``
(removing a rule costing ``supp`` covered rows can shrink the conditional
likelihood by at most ``upsilon**supp``) and the prior-penalty constant
``omega``.  All arithmetic stays in the natural-log domain; the final
ceil/floor gets 1e-9 of slack toward the permissive side so a one-ulp
rounding error can never prune the optimum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

from .data import Dataset
from .scoring import Confusion, Hyperparams, log_likelihood, log_rule_count_prior

log = logging.getLogger(__name__)

_SLACK = 1e-9


def upsilon(data: Dataset, hyper: Hyperparams) -> float:
    """Per-row likelihood-loss factor bounding single-rule deletion.

    Values above 1 carry no pruning power (deleting a rule then never
    costs likelihood); a warning is logged when that happens.
    """
    n_pos, n_neg = data.n_pos, data.n_neg
    if not n_pos + hyper.alpha_pos > 1:
        raise ValueError("need n_pos + alpha_pos > 1 for the deletion bound")
    value = (hyper.beta_neg * (n_pos + hyper.alpha_pos + hyper.beta_pos - 1.0)) / (
        (n_neg + hyper.alpha_neg + hyper.beta_neg) * (n_pos + hyper.alpha_pos - 1.0)
    )
    if value > 1.0:
        log.warning("upsilon = %.4g > 1: support pruning is powerless here", value)
    return value


def log_omega(hyper: Hyperparams) -> float:
    """log of the prior-penalty constant entering both bounds."""
    return (
        math.log(hyper.beta_m + 1.0)
        + (hyper.alpha_l + 1.0) * math.log(hyper.beta_l + 1.0)
        + math.log(sum(hyper.theta))
        - math.log(hyper.alpha_m)
        - hyper.alpha_l * math.log(hyper.beta_l)
        - math.log(hyper.alpha_l)
        - math.log(max(hyper.theta))
    )


def omega(hyper: Hyperparams, n_features: int) -> float:
    """Prior-penalty constant; computed in the log domain, then exponentiated."""
    if n_features != hyper.n_features:
        raise ValueError("theta length must match the number of features")
    return math.exp(log_omega(hyper))


def log_lstar(data: Dataset, hyper: Hyperparams) -> float:
    """Log-likelihood of perfect classification (the reachable maximum)."""
    perfect = Confusion(tp=data.n_pos, fp=0, tn=data.n_neg, fn=0)
    return log_likelihood(perfect, hyper)


@dataclass(frozen=True)
class BoundState:
    """Current pruning state; refreshed whenever the best score improves.

    ``m_cap`` is None when the bounds are disabled (hyperparameter
    preconditions unmet, or upsilon/omega outside their useful ranges), in
    which case ``min_support`` stays at 1.
    """

    upsilon: float
    omega: float
    log_lstar: float
    log_prior_empty: float
    alpha_m: float
    enabled: bool
    v_best: float = -math.inf
    m_cap: int | None = None
    min_support: int = 1

    @property
    def log_upsilon(self) -> float:
        return math.log(self.upsilon)

    @property
    def log_omega(self) -> float:
        return math.log(self.omega)


def initial_bounds(data: Dataset, hyper: Hyperparams) -> BoundState:
    """Build the pruning state, disabling it when its premises fail."""
    ups = upsilon(data, hyper)
    l_omega = log_omega(hyper)
    problems = hyper.bound_precondition_violations()
    if ups >= 1.0:
        problems.append(f"upsilon = {ups:.4g} >= 1")
    if l_omega <= 0.0:
        problems.append(f"omega = {math.exp(l_omega):.4g} <= 1")
    enabled = not problems
    if not enabled:
        log.warning("pruning bounds disabled: %s", "; ".join(problems))
    return BoundState(
        upsilon=ups,
        omega=math.exp(l_omega),
        log_lstar=log_lstar(data, hyper),
        log_prior_empty=log_rule_count_prior(0, hyper),
        alpha_m=hyper.alpha_m,
        enabled=enabled,
    )


def update_bounds(state: BoundState, new_log_posterior: float) -> BoundState:
    """Fold a newly observed posterior value into the pruning state.

    No-op unless the value improves on v_best.  The recomputed cap and
    support floor are clamped against their previous values: every bound
    computed at any earlier (lower) v_best is still valid for the optimum,
    so the floor never loosens and the cap never widens.
    """
    if new_log_posterior <= state.v_best:
        return state
    if not state.enabled:
        return replace(state, v_best=new_log_posterior)

    headroom = state.log_lstar + state.log_prior_empty - new_log_posterior
    raw_cap = math.floor(headroom / state.log_omega + _SLACK)
    m_cap = max(int(raw_cap), 1)
    if state.m_cap is not None:
        m_cap = min(m_cap, state.m_cap)

    # support floor evaluated at the current cap; reduces to
    # ceil(log(1/omega)/log(upsilon)) when alpha_m == 1
    numer = (
        math.log(m_cap + state.alpha_m - 1.0)
        - math.log(m_cap)
        - math.log(state.alpha_m)
        - state.log_omega
    )
    raw_support = math.ceil(numer / state.log_upsilon - _SLACK)
    min_support = max(int(raw_support), 1, state.min_support)

    return replace(state, v_best=new_log_posterior, m_cap=m_cap, min_support=min_support)
