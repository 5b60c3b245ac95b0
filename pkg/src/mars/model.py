"""Rule and rule-set algebra for multi-value rule classifiers.

A condition pairs one feature with a set of interchangeable values and is
satisfied when the observation's value is in that set.  A rule is a
conjunction of conditions, at most one per feature.  A rule set classifies
an observation as positive when at least one of its rules covers it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


@dataclass(frozen=True)
class Condition:
    """One feature paired with the set of value indices it accepts."""

    feature_id: int
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        vals = tuple(sorted(set(self.values)))
        if not vals:
            raise ValueError(f"condition on feature {self.feature_id} has no values")
        if vals[0] < 0:
            raise ValueError(f"negative value index in condition on feature {self.feature_id}")
        object.__setattr__(self, "values", vals)
        # hashed millions of times by the search's neighbor dedup; cache it
        object.__setattr__(self, "_hash", hash((self.feature_id, vals)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def n_values(self) -> int:
        return len(self.values)

    def matches(self, value: int) -> bool:
        return value in self.values


@dataclass(frozen=True)
class Rule:
    """Conjunction of conditions, canonically sorted, one per feature."""

    conditions: tuple[Condition, ...]

    def __post_init__(self) -> None:
        conds = tuple(sorted(self.conditions, key=lambda c: c.feature_id))
        if not conds:
            raise ValueError("a rule needs at least one condition")
        feats = [c.feature_id for c in conds]
        if len(set(feats)) != len(feats):
            raise ValueError("duplicate feature in rule; merge value sets first")
        object.__setattr__(self, "conditions", conds)
        object.__setattr__(self, "_hash", hash(conds))

    def __hash__(self) -> int:
        return self._hash

    @classmethod
    def of(cls, conditions: Mapping[int, Iterable[int]]) -> "Rule":
        """Build from ``{feature_id: values}``; merges nothing, just sugar."""
        return cls(tuple(Condition(j, tuple(vs)) for j, vs in conditions.items()))

    @classmethod
    def from_items(cls, items: Iterable[tuple[int, int]]) -> "Rule":
        """Build from (feature, value) items, merging same-feature items."""
        grouped: dict[int, set[int]] = {}
        for j, v in items:
            grouped.setdefault(j, set()).add(v)
        return cls.of({j: tuple(vs) for j, vs in grouped.items()})

    @property
    def features(self) -> tuple[int, ...]:
        return tuple(c.feature_id for c in self.conditions)

    @property
    def n_items(self) -> int:
        """Total number of (feature, value) items; the rule's length."""
        return sum(c.n_values for c in self.conditions)

    def condition_on(self, feature_id: int) -> Condition | None:
        for c in self.conditions:
            if c.feature_id == feature_id:
                return c
        return None


@dataclass(frozen=True)
class RuleSet:
    """Order-insensitive collection of rules; kept as a tuple for determinism."""

    rules: tuple[Rule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash(self.rules))

    def __hash__(self) -> int:
        return self._hash

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    @property
    def n_conditions(self) -> int:
        return sum(len(r.conditions) for r in self.rules)

    @property
    def n_values(self) -> int:
        """Total value count across all conditions (sum of |V| per condition)."""
        return sum(r.n_items for r in self.rules)

    @property
    def feature_ids(self) -> frozenset[int]:
        return frozenset(j for r in self.rules for j in r.features)

    @property
    def n_features(self) -> int:
        return len(self.feature_ids)


EMPTY_RULESET = RuleSet(())


def rule_covers(rule: Rule, row: Sequence[int]) -> bool:
    """True iff every condition of ``rule`` accepts the row's value."""
    return all(row[c.feature_id] in c.values for c in rule.conditions)


def classify(ruleset: RuleSet, row: Sequence[int]) -> int:
    """1 iff at least one rule covers the row; the empty set predicts 0."""
    return 1 if any(rule_covers(r, row) for r in ruleset.rules) else 0


def normalize(ruleset: RuleSet, vocab_sizes: Sequence[int]) -> RuleSet:
    """Canonicalize a rule set.

    Conditions that grew to a feature's full vocabulary are always true and
    are deleted; rules emptied that way are dropped (a tautological rule
    would make the classifier constant-positive); duplicate rules are
    deduplicated, keeping first occurrence order.
    """
    out: list[Rule] = []
    seen: set[Rule] = set()
    for rule in ruleset.rules:
        kept = []
        for cond in rule.conditions:
            vocab = vocab_sizes[cond.feature_id]
            if cond.values[-1] >= vocab:
                raise ValueError(
                    f"condition on feature {cond.feature_id} indexes past its vocabulary"
                )
            if cond.n_values < vocab:
                kept.append(cond)
        if not kept:
            continue
        slim = Rule(tuple(kept))
        if slim in seen:
            continue
        seen.add(slim)
        out.append(slim)
    return RuleSet(tuple(out))


def is_normalized(ruleset: RuleSet, vocab_sizes: Sequence[int]) -> bool:
    """True when ``normalize`` would return the rule set unchanged."""
    return normalize(ruleset, vocab_sizes) == ruleset
