"""Sequential-covering rule induction with order-insensitive rule sets.

The inducer works on contradiction-free data. Each rule is a conjunction
of attribute tests that covers no pattern of another class, so rule sets
can be applied in any order: on training data at most one class ever fires.

Coverage sets are held as Python integers used as bitsets (bit ``i`` is
pattern ``i``), which keeps the conjunction searches cheap.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Dataset, Pattern, clean_contradictions
from .errors import ConfigError, DataError, InternalError, UsageError

EQ, LE, GE = "eq", "le", "ge"
_OP_RANK = {EQ: 0, LE: 1, GE: 2}
_OP_TEXT = {EQ: "=", LE: "≤", GE: "≥"}
SEARCH_MODES = ("greedy", "exhaustive")


@dataclass(frozen=True)
class Condition:
    attribute: int
    op: str
    value: object

    def __post_init__(self):
        if self.op not in _OP_RANK:
            raise UsageError(f"unknown operator {self.op!r}")
        if self.op != EQ:
            value = float(self.value)
            if not np.isfinite(value):
                raise UsageError("threshold must be finite")
            object.__setattr__(self, "value", value)

    @property
    def key(self):
        return (self.attribute, _OP_RANK[self.op], 0.0 if self.op == EQ else self.value)

    def mask(self, data: Dataset) -> np.ndarray:
        col = data.X[:, self.attribute]
        if self.op == EQ:
            return col == data.schema[self.attribute].code(self.value)
        if self.op == LE:
            return col <= self.value
        return col >= self.value

    def render(self, schema) -> str:
        attr = schema[self.attribute]
        value = self.value if self.op == EQ else f"{self.value:g}"
        return f"{attr.name} {_OP_TEXT[self.op]} {value}"


def _check_conditions(conditions: Sequence[Condition]):
    seen = {}
    for c in conditions:
        slot = (c.attribute, c.op)
        if slot in seen:
            raise UsageError(f"two {c.op} conditions on attribute {c.attribute}")
        seen[slot] = c
    for (a, op), c in seen.items():
        if op == GE and (a, LE) in seen and c.value > seen[a, LE].value:
            raise UsageError(f"empty interval on attribute {a}")


@dataclass(frozen=True)
class Rule:
    """Conjunction of conditions implying ``label``.

    ``coverage`` counts the training patterns the rule matches; ``id`` is a
    stable identifier assigned in extraction order.
    """

    conditions: tuple[Condition, ...]
    label: int
    coverage: int = 0
    id: int = 0

    def __post_init__(self):
        conds = tuple(sorted(self.conditions, key=lambda c: c.key))
        if not conds:
            raise UsageError("a rule needs at least one condition")
        _check_conditions(conds)
        object.__setattr__(self, "conditions", conds)

    def __len__(self):
        return len(self.conditions)

    def mask(self, data: Dataset) -> np.ndarray:
        m = np.ones(len(data), dtype=bool)
        for c in self.conditions:
            m &= c.mask(data)
        return m

    def render(self, schema, classes) -> str:
        body = " and ".join(c.render(schema) for c in self.conditions)
        return f"If {body} then {classes[self.label]}"


@dataclass(frozen=True)
class ExtractConfig:
    search_mode: str = "exhaustive"
    exhaustive_max_len: int = 3
    noise_min_coverage: int = 1
    noise_fraction: float = 0.0

    def __post_init__(self):
        if self.search_mode not in SEARCH_MODES:
            raise UsageError(f"search_mode must be one of {SEARCH_MODES}")
        if self.exhaustive_max_len < 1:
            raise UsageError("exhaustive_max_len must be at least 1")
        if self.noise_min_coverage < 0:
            raise UsageError("noise_min_coverage must be non-negative")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise UsageError("noise_fraction must lie in [0, 1)")

    def noise_threshold(self, n_patterns: int) -> int:
        """Rules explaining fewer patterns than this on their own are noise."""
        return max(self.noise_min_coverage, math.ceil(self.noise_fraction * n_patterns), 1)


# --------------------------------------------------------------------------
# Bitset helpers
# --------------------------------------------------------------------------

def _bits(mask: np.ndarray) -> int:
    return int.from_bytes(np.packbits(mask, bitorder="little").tobytes(), "little")


def _unbits(bits: int, n: int) -> np.ndarray:
    raw = bits.to_bytes((n + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:n].astype(bool)


class _Index:
    """Cut points and coverage bitsets for one dataset."""

    def __init__(self, data: Dataset):
        self.data = data
        self.n = len(data)
        self.all = (1 << self.n) - 1
        self.class_bits = [_bits(data.y == c) for c in range(data.n_classes)]
        self._cuts = {}
        self._masks = {}

    def cut_points(self, a: int) -> list[float]:
        if a not in self._cuts:
            self._cuts[a] = cut_points(self.data, a)
        return self._cuts[a]

    def bits(self, cond: Condition) -> int:
        b = self._masks.get(cond)
        if b is None:
            b = self._masks[cond] = _bits(cond.mask(self.data))
        return b

    def rule_bits(self, conditions: Iterable[Condition]) -> int:
        b = self.all
        for c in conditions:
            b &= self.bits(c)
        return b

    def candidates(self, values: Sequence) -> list[Condition]:
        out = []
        for a, attr in enumerate(self.data.schema):
            v = values[a]
            if attr.is_categorical:
                out.append(Condition(a, EQ, v))
                continue
            cuts = self.cut_points(a)
            out.extend(Condition(a, LE, t) for t in cuts if t >= v)
            out.extend(Condition(a, GE, t) for t in cuts if t <= v)
        return out


def cut_points(data: Dataset, a: int) -> list[float]:
    """Thresholds for continuous attribute ``a``.

    Midpoints between consecutive distinct values whose class sets differ
    (or are not a single shared class), plus the observed min and max.
    """
    col = data.X[:, a]
    if col.size == 0:
        return []
    values = np.unique(col)
    classes = [frozenset(data.y[col == v].tolist()) for v in values]
    cuts = {float(values[0]), float(values[-1])}
    for i in range(len(values) - 1):
        left, right = classes[i], classes[i + 1]
        if len(left) > 1 or left != right:
            cuts.add(float((values[i] + values[i + 1]) / 2))
    return sorted(cuts)


def candidate_conditions(seed: Pattern, data: Dataset) -> list[Condition]:
    """All single tests that hold on ``seed``, in deterministic candidate order."""
    return _Index(data).candidates(seed.values)


# --------------------------------------------------------------------------
# Rule generation
# --------------------------------------------------------------------------

def _exhaustive(cands, cand_bits, same, other, universe, max_len):
    slots = [(c.attribute, c.op) for c in cands]
    for length in range(1, max_len + 1):
        best, best_cov = None, 0

        def search(start, chosen, cover, used):
            nonlocal best, best_cov
            if len(chosen) == length:
                if cover & other == 0:
                    cov = cover.bit_count()
                    if cov > best_cov:
                        best, best_cov = list(chosen), cov
                return
            # a consistent extension cannot cover more than this prefix's own-class patterns
            if (cover & same).bit_count() <= best_cov:
                return
            for j in range(start, len(cands)):
                if slots[j] in used:
                    continue
                chosen.append(j)
                used.add(slots[j])
                search(j + 1, chosen, cover & cand_bits[j], used)
                used.discard(slots[j])
                chosen.pop()

        search(0, [], universe, set())
        if best is not None:
            return [cands[j] for j in best]
    return None


def _greedy(cands, cand_bits, same, other, universe):
    cover = universe
    chosen: list[int] = []
    while cover & other:
        best_key, best_j = None, None
        for j, b in enumerate(cand_bits):
            excluded = (cover & other & ~b).bit_count()
            if excluded == 0:
                continue
            key = (excluded, (cover & b & same).bit_count())
            if best_key is None or key > best_key:
                best_key, best_j = key, j
        if best_j is None:
            raise InternalError("no candidate separates the seed from other classes; "
                                "is the data contradiction-free?")
        chosen.append(best_j)
        cover &= cand_bits[best_j]
    # keep only the tightest test per (attribute, op); it implies the looser ones
    tightest = {}
    for j in chosen:
        slot = (cands[j].attribute, cands[j].op)
        prev = tightest.get(slot)
        if prev is None or cand_bits[j] & cand_bits[prev] == cand_bits[j]:
            tightest.pop(slot, None)
            tightest[slot] = j
    order = list(tightest.values())
    for j in reversed(list(order)):
        rest = [k for k in order if k != j]
        if not rest:
            continue
        b = universe
        for k in rest:
            b &= cand_bits[k]
        if b & other == 0:
            order = rest
    return [cands[j] for j in order]


def _generate(index: _Index, values, label: int, cfg: ExtractConfig) -> list[Condition]:
    cands = index.candidates(values)
    cand_bits = [index.bits(c) for c in cands]
    same = index.class_bits[label]
    other = index.all & ~same
    conds = None
    if cfg.search_mode == "exhaustive":
        conds = _exhaustive(cands, cand_bits, same, other, index.all, cfg.exhaustive_max_len)
    if conds is None:
        conds = _greedy(cands, cand_bits, same, other, index.all)
    if not conds:
        # single-class data: everything is consistent, take the first test
        conds = [cands[0]]
    return conds


def generate_rule(seed: Pattern, data: Dataset, cfg: ExtractConfig = ExtractConfig()) -> Rule:
    """Build one consistent rule covering ``seed``.

    Exhaustive mode returns a shortest consistent conjunction (most
    coverage on ties, then earliest in candidate order); greedy mode adds
    the most separating test until consistent, then drops unneeded tests.
    """
    index = _Index(data)
    conds = _generate(index, seed.values, seed.label, cfg)
    return Rule(tuple(conds), seed.label, index.rule_bits(conds).bit_count())


def _extract(index: _Index, cfg: ExtractConfig, seeds=None, start_id=0) -> list[Rule]:
    data = index.data
    marked = 0
    rules = []
    for i in (range(index.n) if seeds is None else seeds):
        if marked >> i & 1:
            continue
        label = int(data.y[i])
        conds = _generate(index, data.pattern(i).values, label, cfg)
        cover = index.rule_bits(conds)
        if cover & ~index.class_bits[label] or not cover >> i & 1:
            raise InternalError(f"generated rule for pattern {i} is not consistent")
        marked |= cover
        rules.append(Rule(tuple(conds), label, cover.bit_count(), start_id + len(rules)))
    return rules


def extract(data: Dataset, cfg: ExtractConfig = ExtractConfig()) -> list[Rule]:
    """Sequential covering over ``data`` in pattern order."""
    return _extract(_Index(data), cfg)


def cluster_rules(rules: Sequence[Rule]) -> list[tuple[int, list[Rule]]]:
    groups: dict[int, list[Rule]] = {}
    for r in rules:
        groups.setdefault(r.label, []).append(r)
    return sorted(groups.items())


def subsumes(general: Rule, specific: Rule) -> bool:
    """True when every pattern matching ``specific`` must match ``general``."""
    for g in general.conditions:
        for s in specific.conditions:
            if s.attribute != g.attribute or s.op != g.op:
                continue
            if (g.op == EQ and s.value == g.value or g.op == LE and s.value <= g.value
                    or g.op == GE and s.value >= g.value):
                break
        else:
            return False
    return True


def _consistent(index: _Index, conditions, label) -> bool:
    return index.rule_bits(conditions) & ~index.class_bits[label] & index.all == 0


def _prune(index: _Index, rules: Sequence[Rule], cfg: ExtractConfig) -> list[Rule]:
    # 1. generalize: drop tests that are not needed for consistency
    general = []
    for r in rules:
        conds = list(r.conditions)
        for c in list(conds):
            rest = [k for k in conds if k is not c]
            if rest and _consistent(index, rest, r.label):
                conds = rest
        general.append(replace(r, conditions=tuple(conds),
                               coverage=index.rule_bits(conds).bit_count()))

    # 2. subsumption inside each class cluster
    kept = []
    for _, group in cluster_rules(general):
        alive = list(group)
        for r in group:
            for s in alive:
                if s is r or not subsumes(s, r):
                    continue
                if subsumes(r, s) and r.id < s.id:
                    continue
                alive.remove(r)
                break
        kept.extend(alive)

    # 3. redundant and noise rules: repeatedly drop the rule with the fewest
    # patterns nobody else covers, while that number is below the threshold
    threshold = cfg.noise_threshold(index.n)
    cover = {r.id: index.rule_bits(r.conditions) for r in kept}
    alive = {r.id: r for r in kept}
    while alive:
        unique = {}
        for k in alive:
            others = 0
            for j in alive:
                if j != k:
                    others |= cover[j]
            unique[k] = (cover[k] & ~others).bit_count()
        victim = min(alive.values(), key=lambda r: (unique[r.id], r.coverage, r.id))
        if unique[victim.id] >= threshold:
            break
        del alive[victim.id]
    return sorted(alive.values(), key=lambda r: (r.label, -r.coverage, r.id))


def prune(rules: Sequence[Rule], data: Dataset, cfg: ExtractConfig = ExtractConfig()) -> list[Rule]:
    """Generalize, remove subsumed rules, then redundant and noise rules."""
    return _prune(_Index(data), rules, cfg)


# --------------------------------------------------------------------------
# Classification and the default rule
# --------------------------------------------------------------------------

def _predict(rules: Sequence[Rule], default: int, data: Dataset) -> np.ndarray:
    pred = np.full(len(data), default, dtype=np.int64)
    best = np.full(len(data), -1, dtype=np.int64)
    best_label = np.full(len(data), np.iinfo(np.int64).max, dtype=np.int64)
    for r in rules:
        fires = r.mask(data)
        better = fires & ((r.coverage > best) | ((r.coverage == best) & (r.label < best_label)))
        best[better] = r.coverage
        best_label[better] = r.label
    fired = best >= 0
    pred[fired] = best_label[fired]
    return pred


def _accuracy(rules, default, data) -> float:
    if len(data) == 0:
        return 1.0
    return float(np.mean(_predict(rules, default, data) == data.y))


def drop_default_rules(rules: Sequence[Rule], data: Dataset, default: int) -> list[Rule]:
    """Remove rules of the default class that the default already accounts for."""
    rules = list(rules)
    acc = _accuracy(rules, default, data)
    for r in sorted((r for r in rules if r.label == default), key=lambda r: (r.coverage, r.id)):
        trial = [k for k in rules if k is not r]
        trial_acc = _accuracy(trial, default, data)
        if trial_acc >= acc:
            rules, acc = trial, trial_acc
    return rules


def choose_default(rules: Sequence[Rule], data: Dataset) -> int:
    """Pick the default class.

    Every class is tried as the default, its now-superfluous rules are
    dropped, and the candidates are ranked by training accuracy, then by
    the number of rules left (fewer wins), then by class size, then by
    lowest class index.
    """
    counts = data.class_counts()
    best_key, best_c = None, 0
    for c in range(data.n_classes):
        remaining = drop_default_rules(rules, data, c)
        key = (_accuracy(remaining, c, data), -len(remaining), int(counts[c]), -c)
        if best_key is None or key > best_key:
            best_key, best_c = key, c
    return best_c


@dataclass(frozen=True)
class RuleSet:
    """Unordered rules plus a default class.

    When several rules fire on a pattern (possible only away from the
    training data) the one with the largest training coverage decides,
    ties going to the lowest class index, so list order never matters.
    """

    rules: tuple[Rule, ...]
    default_class: int
    schema: tuple = ()
    classes: tuple = ()
    provenance: str = "direct"

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise UsageError("rule ids must be unique")
        if self.provenance not in ("direct", "composed"):
            raise UsageError(f"unknown provenance {self.provenance!r}")
        for r in self.rules:
            for c in r.conditions:
                if c.attribute >= len(self.schema):
                    raise UsageError(f"condition on unknown attribute {c.attribute}")
                if (c.op == EQ) != self.schema[c.attribute].is_categorical:
                    raise UsageError(f"{c.op} condition on attribute "
                                     f"{self.schema[c.attribute].name!r} of the wrong kind")

    def __len__(self):
        return len(self.rules)

    def predict(self, data: Dataset) -> np.ndarray:
        return _predict(self.rules, self.default_class, data)

    def classify(self, pattern: Pattern) -> int:
        probe = Dataset(self.schema, self.classes, np.empty((0, len(self.schema))), [])
        row = Dataset(self.schema, self.classes, probe.encode(pattern.values)[None, :], [0])
        return int(self.predict(row)[0])

    def accuracy(self, data: Dataset) -> float:
        return _accuracy(self.rules, self.default_class, data)

    @property
    def avg_conditions(self) -> float:
        return float(np.mean([len(r) for r in self.rules])) if self.rules else 0.0

    def render(self) -> str:
        lines = [f"Rule {i}: {r.render(self.schema, self.classes)}"
                 for i, r in enumerate(self.rules, 1)]
        lines.append(f"Default Rule: {self.classes[self.default_class]}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "default": self.classes[self.default_class],
            "rules": [{
                "id": r.id,
                "class": self.classes[r.label],
                "conditions": [{"attr": self.schema[c.attribute].name, "op": c.op,
                                "value": c.value} for c in r.conditions],
                "coverage": r.coverage,
            } for r in self.rules],
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping, schema) -> "RuleSet":
        schema = tuple(schema)
        names = {a.name: i for i, a in enumerate(schema)}
        classes = tuple(doc["classes"])
        try:
            rules = tuple(Rule(tuple(Condition(names[c["attr"]], c["op"], c["value"])
                                     for c in r["conditions"]),
                               classes.index(r["class"]), int(r["coverage"]), int(r["id"]))
                          for r in doc["rules"])
            default = classes.index(doc["default"])
        except (KeyError, ValueError) as exc:
            raise DataError(f"rule document does not match the schema: {exc}") from None
        return cls(rules, default, schema, classes, doc.get("provenance", "direct"))

    @classmethod
    def from_json(cls, text: str, schema) -> "RuleSet":
        return cls.from_dict(json.loads(text), schema)


def classify(rs: RuleSet, pattern: Pattern) -> int:
    return rs.classify(pattern)


# --------------------------------------------------------------------------
# Full inducer
# --------------------------------------------------------------------------

@dataclass
class _Induction:
    rules: list[Rule]
    index: _Index
    noise: int = 0
    rounds: int = 0
    extracted: list[Rule] = field(default_factory=list)


def _induce(data: Dataset, cfg: ExtractConfig) -> _Induction:
    index = _Index(clean_contradictions(data))
    extracted = _extract(index, cfg)
    rules = _prune(index, extracted, cfg)

    def covered(rs):
        b = 0
        for r in rs:
            b |= index.rule_bits(r.conditions)
        return b

    # patterns given up as noise are not re-extracted
    noise = covered(extracted) & ~covered(rules)
    rounds = 0
    next_id = len(extracted)
    while True:
        missing = index.all & ~covered(rules) & ~noise
        if not missing:
            break
        rounds += 1
        if rounds > index.n:
            raise InternalError("coverage check did not converge")
        seeds = [i for i in range(index.n) if missing >> i & 1]
        fresh = _extract(index, cfg, seeds, next_id)
        next_id += len(fresh)
        rules = _prune(index, rules + fresh, cfg)
        noise |= covered(fresh) & ~covered(rules)
    return _Induction(rules, index, noise, rounds, extracted)


def induce(data: Dataset, cfg: ExtractConfig = ExtractConfig()) -> list[Rule]:
    """Consistent, pruned rules for every class, before any default is chosen."""
    if len(data) == 0:
        raise DataError("cannot induce rules from an empty dataset")
    return _induce(data, cfg).rules


def run_rex(data: Dataset, cfg: ExtractConfig = ExtractConfig()) -> RuleSet:
    """Extract, cluster, prune, check coverage and pick a default rule."""
    if len(data) == 0:
        raise DataError("cannot induce rules from an empty dataset")
    result = _induce(data, cfg)
    cleaned = result.index.data
    default = choose_default(result.rules, cleaned)
    rules = drop_default_rules(result.rules, cleaned, default)
    return RuleSet(tuple(rules), default, data.schema, data.classes, "direct")


# --------------------------------------------------------------------------
# Composition of hidden-layer rules with input-layer rules
# --------------------------------------------------------------------------

def _merge(conditions: Iterable[Condition]) -> tuple[Condition, ...] | None:
    """AND a bag of tests into canonical form; None if it is unsatisfiable."""
    eq, le, ge = {}, {}, {}
    for c in conditions:
        if c.op == EQ:
            if eq.setdefault(c.attribute, c.value) != c.value:
                return None
        elif c.op == LE:
            le[c.attribute] = min(le.get(c.attribute, c.value), c.value)
        else:
            ge[c.attribute] = max(ge.get(c.attribute, c.value), c.value)
    for a, lo in ge.items():
        if a in le and lo > le[a]:
            return None
    out = [Condition(a, EQ, v) for a, v in eq.items()]
    out += [Condition(a, LE, v) for a, v in le.items()]
    out += [Condition(a, GE, v) for a, v in ge.items()]
    return tuple(sorted(out, key=lambda c: c.key))


def compose(hidden_rules: RuleSet, input_rules_per_cluster: Mapping[tuple[int, int], RuleSet],
            data: Dataset, cfg: ExtractConfig = ExtractConfig()) -> RuleSet:
    """Rewrite rules over hidden-node clusters into rules over the inputs.

    Each hidden test ``H_j = k`` is replaced by the disjunction of the rules
    in ``input_rules_per_cluster[(j, k)]``; the result is expanded to
    disjunctive normal form, unsatisfiable conjunctions are dropped, and the
    rules are pruned and given a default against ``data``.
    """
    conjunctions = []
    for hr in hidden_rules.rules:
        parts = []
        for c in hr.conditions:
            if c.op != EQ:
                raise ConfigError("hidden-layer rules must test cluster membership")
            node = c.attribute
            cluster = hidden_rules.schema[node].code(c.value)
            try:
                explained = input_rules_per_cluster[node, cluster]
            except KeyError:
                raise ConfigError(f"no input rules for hidden node {node} "
                                  f"cluster {cluster}") from None
            parts.append([r.conditions for r in explained.rules])
        for combo in itertools.product(*parts):
            merged = _merge(itertools.chain.from_iterable(combo))
            if merged:
                conjunctions.append((merged, hr.label))

    index = _Index(clean_contradictions(data))
    rules, seen = [], set()
    for conds, label in conjunctions:
        if (conds, label) in seen:
            continue
        seen.add((conds, label))
        rules.append(Rule(conds, label, index.rule_bits(conds).bit_count(), len(rules)))
    rules = _prune(index, rules, cfg)
    cleaned = index.data
    default = choose_default(rules, cleaned) if rules else hidden_rules.default_class
    rules = drop_default_rules(rules, cleaned, default)
    return RuleSet(tuple(rules), default, data.schema, data.classes, "composed")
