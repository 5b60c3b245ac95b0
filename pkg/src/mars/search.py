"""Simulated-annealing MAP search over rule sets.

Each step samples a misclassified training example and proposes a
neighbor through an action chosen by the example's label: positives draw
uniformly from {add value, remove condition, add rule} (coverage-growing
moves), negatives from {add condition, remove rule} (coverage-shrinking
moves).  Within the chosen action the neighbor set is enumerated (capped
at a budget), and selection is exploitation (best posterior) with
probability 1 - explore_prob, else a uniform random neighbor.  The move
is accepted with probability min(1, exp(delta / T)) under the schedule
T[t] = t0 ** (1 - t / n_iter).

New rules proposed by the add-rule action are seeded from the sampled
positive example and admitted only when their support clears the current
pruning floor; the rule-count cap gates the action entirely.
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .bitset import indices, kth_set_bit
from .bounds import BoundState, initial_bounds, update_bounds
from .data import Dataset, rule_mask
from .errors import DegenerateLabelError
from .model import Condition, Rule, RuleSet, is_normalized, normalize
from .scoring import (
    Confusion,
    Hyperparams,
    Score,
    confusion_from_mask,
    log_likelihood,
    log_prior,
    update_confusion,
)

log = logging.getLogger(__name__)

POSITIVE_ACTIONS = ("add_value", "remove_condition", "add_rule")
NEGATIVE_ACTIONS = ("add_condition", "remove_rule")
SIMPLIFY_ACTIONS = ("remove_condition", "remove_rule")

STALL_RESTART_AFTER = 20


@dataclass(frozen=True)
class SearchConfig:
    n_iter: int = 10_000
    t0: float = 100.0
    explore_prob: float = 0.1
    random_seed: int = 0
    n_restarts: int = 1
    neighbor_budget: int = 50

    def __post_init__(self) -> None:
        if self.n_iter < 1:
            raise ValueError("n_iter must be positive")
        if not self.t0 > 1.0:
            raise ValueError("t0 must exceed 1")
        if not 0.0 <= self.explore_prob <= 1.0:
            raise ValueError("explore_prob must lie in [0, 1]")
        if self.n_restarts < 0:
            raise ValueError("n_restarts must be non-negative")
        if self.neighbor_budget < 1:
            raise ValueError("neighbor_budget must be positive")


def temperature(cfg: SearchConfig, t: int) -> float:
    """Annealing temperature; t0 at t=0, exactly 1.0 at t=n_iter."""
    return cfg.t0 ** (1.0 - t / cfg.n_iter)


def thread_workers() -> int:
    """Worker-thread cap from MARS_THREADS (default 1 = serial)."""
    raw = os.environ.get("MARS_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer MARS_THREADS=%r", raw)
        return 1


class RunLog:
    """Deterministic JSON-lines record of a search run."""

    def __init__(self) -> None:
        self.records: list[dict] = []

    def emit(self, **fields) -> None:
        self.records.append(fields)

    def improvement(self, state: "SearchState") -> None:
        b = state.bounds
        s = state.best_score
        rs = state.best
        self.emit(
            event="improve",
            chain=state.chain,
            t=state.t,
            log_posterior=s.log_posterior,
            n_rules=rs.n_rules,
            n_conditions=rs.n_conditions,
            n_values=rs.n_values,
            n_features=rs.n_features,
            min_support=b.min_support,
            m_cap=b.m_cap,
        )

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


@dataclass
class SearchState:
    """Mutable chain state; owned by a single search thread."""

    current: RuleSet
    current_score: Score
    rule_masks: list[int]
    union_mask: int
    confusion: Confusion
    best: RuleSet
    best_score: Score
    bounds: BoundState
    rng: random.Random
    t: int = 0
    chain: int = 0
    stall_streak: int = 0
    pool: ThreadPoolExecutor | None = None


@dataclass
class Proposal:
    rules: RuleSet
    score: Score
    masks: list[int]
    action: str
    stalled: bool = False


def random_ruleset(data: Dataset, rng: random.Random) -> RuleSet:
    """1-3 random rules of 1-3 conditions with random proper value sets."""
    eligible = [j for j, v in enumerate(data.vocab_sizes) if v >= 2]
    if not eligible:
        raise ValueError("no feature has at least two values; nothing to search")
    rules = []
    for _ in range(rng.randint(1, 3)):
        feats = rng.sample(eligible, rng.randint(1, min(3, len(eligible))))
        conds = []
        for j in feats:
            vocab = data.vocab_sizes[j]
            size = rng.randint(1, vocab - 1)
            conds.append(Condition(j, tuple(rng.sample(range(vocab), size))))
        rules.append(Rule(tuple(conds)))
    return normalize(RuleSet(tuple(rules)), data.vocab_sizes)


def _score_ruleset(rules: RuleSet, masks: Sequence[int], data: Dataset, hyper: Hyperparams) -> Score:
    covered = 0
    for m in masks:
        covered |= m
    conf = confusion_from_mask(covered, data)
    return Score.of(log_prior(rules, hyper, data.vocab_sizes), log_likelihood(conf, hyper), conf)


def init_state(
    data: Dataset,
    hyper: Hyperparams,
    cfg: SearchConfig,
    rng: random.Random | None = None,
    runlog: RunLog | None = None,
) -> SearchState:
    """Fresh chain state from a random rule set; bounds seeded with its score."""
    if data.n_pos == 0 or data.n_neg == 0:
        raise DegenerateLabelError("training data needs both positive and negative examples")
    if rng is None:
        rng = random.Random(f"mars-search:{cfg.random_seed}")
    current = random_ruleset(data, rng)
    masks = [rule_mask(r, data) for r in current.rules]
    union = 0
    for m in masks:
        union |= m
    sc = _score_ruleset(current, masks, data, hyper)
    bounds = update_bounds(initial_bounds(data, hyper), sc.log_posterior)
    state = SearchState(
        current=current,
        current_score=sc,
        rule_masks=masks,
        union_mask=union,
        confusion=sc.confusion,
        best=current,
        best_score=sc,
        bounds=bounds,
        rng=rng,
    )
    if runlog is not None:
        runlog.improvement(state)
    return state


def sample_misclassified(state: SearchState, data: Dataset) -> tuple[int, bool] | None:
    """Uniform draw from the rows the current rule set misclassifies.

    Returns (row_index, label) or None when training accuracy is 1.0.
    Covered XOR positive is exactly the misclassified set (false positives
    plus false negatives).
    """
    mis = state.union_mask ^ data.pos_mask
    count = mis.bit_count()
    if count == 0:
        return None
    idx = kth_set_bit(mis, state.rng.randrange(count))
    return idx, bool(data.labels[idx])


# ---------------------------------------------------------------------------
# neighbor generation: each edit is a raw tuple of rules, normalized later
# ---------------------------------------------------------------------------

def _replace_rule(rules: tuple[Rule, ...], mi: int, new_rule: Rule) -> tuple[Rule, ...]:
    return rules[:mi] + (new_rule,) + rules[mi + 1 :]


def _edits_add_value(rules, data: Dataset, xrow) -> list[tuple[Rule, ...]]:
    progress, others = [], []
    for mi, rule in enumerate(rules):
        for ci, cond in enumerate(rule.conditions):
            j = cond.feature_id
            have = set(cond.values)
            target = int(xrow[j])
            for v in range(data.vocab_sizes[j]):
                if v in have:
                    continue
                grown = Rule(
                    rule.conditions[:ci] + (Condition(j, cond.values + (v,)),) + rule.conditions[ci + 1 :]
                )
                bucket = progress if v == target else others
                bucket.append(_replace_rule(rules, mi, grown))
    # prefer growths that move toward covering the sampled example
    return progress or others


def _edits_remove_condition(rules) -> list[tuple[Rule, ...]]:
    edits = []
    for mi, rule in enumerate(rules):
        for ci in range(len(rule.conditions)):
            rest = rule.conditions[:ci] + rule.conditions[ci + 1 :]
            if rest:
                edits.append(_replace_rule(rules, mi, Rule(rest)))
            else:
                # deleting the lone condition deletes the rule
                edits.append(rules[:mi] + rules[mi + 1 :])
    return edits


def _edits_add_rule(
    rules, data: Dataset, xrow, rng: random.Random, budget: int, bounds: BoundState
) -> list[tuple[Rule, ...]]:
    if bounds.m_cap is not None and len(rules) >= bounds.m_cap:
        return []
    eligible = [j for j, v in enumerate(data.vocab_sizes) if v >= 2]
    if not eligible:
        return []
    existing = set(rules)
    edits: list[tuple[Rule, ...]] = []
    seen: set[Rule] = set()
    max_feats = min(3, len(eligible))
    attempts = 0
    while len(edits) < budget and attempts < 3 * budget:
        attempts += 1
        feats = rng.sample(eligible, rng.randint(1, max_feats))
        conds = []
        for j in feats:
            vocab = data.vocab_sizes[j]
            want = int(xrow[j])
            extra = rng.randint(0, vocab - 2)
            if extra:
                spare = [v for v in range(vocab) if v != want]
                conds.append(Condition(j, (want, *rng.sample(spare, extra))))
            else:
                conds.append(Condition(j, (want,)))
        cand = Rule(tuple(conds))
        if cand in seen or cand in existing:
            continue
        seen.add(cand)
        if rule_mask(cand, data).bit_count() < bounds.min_support:
            continue
        edits.append(rules + (cand,))
    return edits


def _edits_add_condition(
    rules, rule_masks, data: Dataset, idx: int, xrow, rng: random.Random
) -> list[tuple[Rule, ...]]:
    edits = []
    bit = 1 << idx
    for mi, rule in enumerate(rules):
        if not rule_masks[mi] & bit:
            continue  # only rules that cover the sampled negative example
        used = set(rule.features)
        for j in range(data.n_features):
            if j in used:
                continue
            vocab = data.vocab_sizes[j]
            if vocab < 2:
                continue
            want = int(xrow[j])
            # canonical choice: full vocabulary minus the example's value,
            # excluding it at the smallest possible coverage loss
            canonical = tuple(v for v in range(vocab) if v != want)
            variants = [canonical]
            for _ in range(2):
                size = rng.randint(1, vocab - 1)
                variants.append(tuple(rng.sample(range(vocab), size)))
            for vals in variants:
                grown = Rule(rule.conditions + (Condition(j, vals),))
                edits.append(_replace_rule(rules, mi, grown))
    return edits


def _edits_remove_rule(rules) -> list[tuple[Rule, ...]]:
    return [rules[:mi] + rules[mi + 1 :] for mi in range(len(rules))]


# ---------------------------------------------------------------------------
# proposal selection
# ---------------------------------------------------------------------------

def _candidate_edits(
    action: str,
    state: SearchState,
    data: Dataset,
    cfg: SearchConfig,
    example: tuple[int, bool] | None,
) -> list[tuple[Rule, ...]]:
    rules = state.current.rules
    rng = state.rng
    if action == "add_value":
        return _edits_add_value(rules, data, data.rows[example[0]])
    if action == "remove_condition":
        return _edits_remove_condition(rules)
    if action == "add_rule":
        return _edits_add_rule(
            rules, data, data.rows[example[0]], rng, cfg.neighbor_budget, state.bounds
        )
    if action == "add_condition":
        return _edits_add_condition(
            rules, state.rule_masks, data, example[0], data.rows[example[0]], rng
        )
    if action == "remove_rule":
        return _edits_remove_rule(rules)
    raise ValueError(f"unknown action {action!r}")


def _evaluate(
    rules: RuleSet, mask_cache: dict[Rule, int], data: Dataset, hyper: Hyperparams
) -> Proposal:
    masks = []
    for r in rules.rules:
        m = mask_cache.get(r)
        if m is None:
            m = rule_mask(r, data)
            mask_cache[r] = m
        masks.append(m)
    return Proposal(rules, _score_ruleset(rules, masks, data, hyper), masks, "", False)


def _propose_from_actions(
    state: SearchState,
    order: Sequence[str],
    data: Dataset,
    hyper: Hyperparams,
    cfg: SearchConfig,
    example: tuple[int, bool] | None,
) -> Proposal:
    rng = state.rng
    mask_cache = dict(zip(state.current.rules, state.rule_masks))
    for action in order:
        edits = _candidate_edits(action, state, data, cfg, example)
        if not edits:
            continue
        if len(edits) > cfg.neighbor_budget:
            edits = rng.sample(edits, cfg.neighbor_budget)
        candidates: list[RuleSet] = []
        seen: set[RuleSet] = set()
        for edit in edits:
            rs = normalize(RuleSet(edit), data.vocab_sizes)
            if rs == state.current or rs in seen:
                continue
            seen.add(rs)
            candidates.append(rs)
        if not candidates:
            continue
        if rng.random() < cfg.explore_prob:
            chosen = _evaluate(rng.choice(candidates), mask_cache, data, hyper)
        else:
            if state.pool is not None and len(candidates) >= 4:
                evals = list(
                    state.pool.map(lambda rs: _evaluate(rs, dict(mask_cache), data, hyper), candidates)
                )
            else:
                evals = [_evaluate(rs, mask_cache, data, hyper) for rs in candidates]
            chosen = max(evals, key=lambda p: p.score.log_posterior)
        chosen.action = action
        return chosen
    return Proposal(state.current, state.current_score, list(state.rule_masks), "stall", True)


def propose(
    state: SearchState,
    example: tuple[int, bool],
    data: Dataset,
    hyper: Hyperparams,
    cfg: SearchConfig,
) -> Proposal:
    """One proposal for a sampled misclassified example.

    The action is drawn uniformly within the branch matching the example's
    label; an action with no legal neighbor falls back to the remaining
    permitted actions, and a stalled Proposal (current state unchanged) is
    returned when none has any.
    """
    _, is_positive = example
    actions = list(POSITIVE_ACTIONS if is_positive else NEGATIVE_ACTIONS)
    first = state.rng.choice(actions)
    actions.remove(first)
    state.rng.shuffle(actions)
    return _propose_from_actions(state, [first, *actions], data, hyper, cfg, example)


def _propose_simplify(
    state: SearchState, data: Dataset, hyper: Hyperparams, cfg: SearchConfig
) -> Proposal:
    """Fallback when training accuracy is 1.0: only complexity-reducing
    moves can still improve the posterior."""
    actions = list(SIMPLIFY_ACTIONS)
    state.rng.shuffle(actions)
    return _propose_from_actions(state, actions, data, hyper, cfg, None)


def _accepts(rng: random.Random, delta: float, temp: float) -> bool:
    """Annealing acceptance: probability min(1, exp(delta / temp))."""
    if delta >= 0:
        return True
    return rng.random() < math.exp(delta / temp)


def _accept(state: SearchState, prop: Proposal, data: Dataset) -> None:
    old_union = state.union_mask
    new_union = 0
    for m in prop.masks:
        new_union |= m
    entering = indices(new_union & ~old_union)
    leaving = indices(old_union & ~new_union)
    state.confusion = update_confusion(state.confusion, entering, leaving, data.labels)
    assert state.confusion == prop.score.confusion
    state.current = prop.rules
    state.current_score = prop.score
    state.rule_masks = list(prop.masks)
    state.union_mask = new_union


def anneal_step(
    state: SearchState,
    data: Dataset,
    hyper: Hyperparams,
    cfg: SearchConfig,
    runlog: RunLog | None = None,
) -> SearchState:
    """One Markov-chain step: propose, track best, accept-or-reject."""
    example = sample_misclassified(state, data)
    if example is None:
        prop = _propose_simplify(state, data, hyper, cfg)
    else:
        prop = propose(state, example, data, hyper, cfg)

    if prop.stalled:
        state.stall_streak += 1
        if runlog is not None:
            runlog.emit(event="stall", chain=state.chain, t=state.t)
        state.t += 1
        return state
    state.stall_streak = 0

    assert is_normalized(prop.rules, data.vocab_sizes)
    # the best-so-far tracks every evaluated proposal, accepted or not
    if prop.score.log_posterior > state.best_score.log_posterior:
        state.best = prop.rules
        state.best_score = prop.score
        state.bounds = update_bounds(state.bounds, prop.score.log_posterior)
        if runlog is not None:
            runlog.improvement(state)

    delta = prop.score.log_posterior - state.current_score.log_posterior
    if _accepts(state.rng, delta, temperature(cfg, state.t)):
        _accept(state, prop, data)
    state.t += 1
    return state


def _reseed_chain(state: SearchState, data: Dataset, hyper: Hyperparams, chain: int) -> None:
    """Restart the chain from a fresh random state, keeping best and bounds."""
    current = random_ruleset(data, state.rng)
    masks = [rule_mask(r, data) for r in current.rules]
    union = 0
    for m in masks:
        union |= m
    sc = _score_ruleset(current, masks, data, hyper)
    state.current = current
    state.current_score = sc
    state.rule_masks = masks
    state.union_mask = union
    state.confusion = sc.confusion
    state.bounds = update_bounds(state.bounds, sc.log_posterior)
    if sc.log_posterior > state.best_score.log_posterior:
        state.best, state.best_score = current, sc
    state.t = 0
    state.chain = chain
    state.stall_streak = 0


def run(
    data: Dataset, hyper: Hyperparams, cfg: SearchConfig
) -> tuple[RuleSet, Score, RunLog]:
    """Best rule set over ``n_restarts + 1`` sequential annealing chains.

    Twenty consecutive stalls (no legal neighbor anywhere) abort a chain
    early and consume the next restart slot.  Deterministic for a fixed
    config, including the JSON-lines RunLog.
    """
    runlog = RunLog()
    rng = random.Random(f"mars-search:{cfg.random_seed}")
    workers = thread_workers()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    state: SearchState | None = None
    try:
        for chain in range(cfg.n_restarts + 1):
            if state is None:
                state = init_state(data, hyper, cfg, rng=rng, runlog=runlog)
                state.pool = pool
            else:
                _reseed_chain(state, data, hyper, chain)
            runlog.emit(
                event="chain_start",
                chain=chain,
                log_posterior=state.current_score.log_posterior,
            )
            for _ in range(cfg.n_iter):
                anneal_step(state, data, hyper, cfg, runlog)
                if state.stall_streak >= STALL_RESTART_AFTER:
                    runlog.emit(event="stall_restart", chain=chain, t=state.t)
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    runlog.emit(
        event="done",
        log_posterior=state.best_score.log_posterior,
        n_rules=state.best.n_rules,
        n_conditions=state.best.n_conditions,
        n_values=state.best.n_values,
        n_features=state.best.n_features,
        tp=state.best_score.confusion.tp,
        fp=state.best_score.confusion.fp,
        tn=state.best_score.confusion.tn,
        fn=state.best_score.confusion.fn,
    )
    return state.best, state.best_score, runlog
