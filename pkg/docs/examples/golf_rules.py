"""Walk through rule induction on the 14-row golf table."""

import numpy as np

from rexkit import rex
from rexkit.dataset import load_benchmark

golf = load_benchmark("golf")
print(golf.to_csv())

# one rule per uncovered pattern, shortest consistent conjunction first
raw = rex.extract(golf)
print(f"{len(raw)} rules before pruning")
for r in raw:
    print("  ", r.render(golf.schema, golf.classes), f"(covers {r.coverage})")

pruned = rex.prune(raw, golf)
print(f"{len(pruned)} rules after pruning")

rs = rex.run_rex(golf)
print()
print(rs.render())
print(f"training accuracy {rs.accuracy(golf):.2%}")

# rules are unordered: shuffling them never changes a prediction
rng = np.random.default_rng(1)
shuffled = rex.RuleSet(tuple(rs.rules[k] for k in rng.permutation(len(rs))),
                       rs.default_class, rs.schema, rs.classes)
assert np.array_equal(shuffled.predict(golf), rs.predict(golf))
