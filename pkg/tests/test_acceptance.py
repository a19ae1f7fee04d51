"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (lines appear in the summary) or
``python tests/test_acceptance.py`` for the lines alone.
"""

import contextlib
import filecmp
import io
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from oracles import contradictory_dataset, shortest_rule_length  # noqa: E402
from rexkit import cli, discretize, network, pipeline, rex  # noqa: E402
from rexkit.dataset import BENCHMARKS, FIXTURES, input_matrix, load_benchmark, normalize  # noqa: E402
from rexkit.network import Network  # noqa: E402
from rexkit.rex import ExtractConfig, RuleSet  # noqa: E402

pytestmark = pytest.mark.acceptance


def _record(number, title, checks, elapsed, limit):
    checks = dict(checks)
    if limit is None:
        checks[f"runtime {elapsed:.2f} s"] = True
    else:
        checks[f"runtime {elapsed:.2f} s < {limit} s"] = elapsed < limit
    ok = all(checks.values())
    detail = "; ".join(f"{k} [{'ok' if v else 'NO'}]" for k, v in checks.items())
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok, checks


def _timed(fn):
    start = time.perf_counter()
    value = fn()
    return value, time.perf_counter() - start


def _direct(name, cfg=None):
    data = load_benchmark(name)
    cfg = cfg or pipeline.benchmark_config(name)
    (rules, report, _), elapsed = _timed(lambda: pipeline.run(data, cfg))
    return rules, report, elapsed


def criterion_1():
    _, r, t = _direct("golf", pipeline.PipelineConfig())
    return _record(1, "golf", {
        f"accuracy {r.train_accuracy:.4f} = 1": r.train_accuracy == 1.0,
        f"rules incl. default {r.rule_count_incl_default} <= 3": r.rule_count_incl_default <= 3,
        f"avg conditions {r.avg_conditions_per_rule:.2f} <= 2": r.avg_conditions_per_rule <= 2,
    }, t, 1)


def criterion_2():
    _, r, t = _direct("season", pipeline.PipelineConfig())
    return _record(2, "season", {
        f"accuracy {r.train_accuracy:.4f} = 1": r.train_accuracy == 1.0,
        f"rules incl. default {r.rule_count_incl_default} in [4, 5]":
            4 <= r.rule_count_incl_default <= 5,
    }, t, 1)


def criterion_3():
    _, r, t = _direct("iris")
    return _record(3, "iris", {
        f"accuracy {r.train_accuracy:.4f} >= 0.96": r.train_accuracy >= 0.96,
        f"rules excl. default {r.rule_count_excl_default} <= 4": r.rule_count_excl_default <= 4,
        f"avg conditions {r.avg_conditions_per_rule:.2f} <= 2": r.avg_conditions_per_rule <= 2,
    }, t, 10)


def criterion_4():
    rules, r, t = _direct("breast-cancer")
    benign = rules.classes.index("benign")
    used = sorted({rules.schema[c.attribute].name for rule in rules.rules
                   if rule.label == benign for c in rule.conditions})
    key = {"Clump thickness", "Bare nuclei", "Mitoses"}
    return _record(4, "breast cancer (greedy)", {
        f"search {pipeline.benchmark_config('breast-cancer').extract.search_mode}":
            pipeline.benchmark_config("breast-cancer").extract.search_mode == "greedy",
        f"accuracy {r.train_accuracy:.4f} >= 0.95": r.train_accuracy >= 0.95,
        f"rules excl. default {r.rule_count_excl_default} <= 4": r.rule_count_excl_default <= 4,
        f"benign attributes {used} hit >= 2 of A1/A6/A9": len(set(used) & key) >= 2,
    }, t, 60)


def criterion_5():
    from rexkit.dataset import inconsistency_rate

    def excess(d, cfg):
        # compare counts, not rates, to stay clear of rounding
        errors = int(np.sum(rex.run_rex(d, cfg).predict(d) != d.y))
        return errors - round(inconsistency_rate(d) * len(d))

    def check():
        gaps = []
        for name in BENCHMARKS:
            cfg = ExtractConfig("greedy" if name == "breast-cancer" else "exhaustive")
            gaps.append(excess(load_benchmark(name), cfg))
        rng = np.random.default_rng(2024)
        for k in range(50):
            gaps.append(excess(contradictory_dataset(rng),
                               ExtractConfig(("exhaustive", "greedy")[k % 2])))
        return max(gaps), len(gaps)

    (gap, count), t = _timed(check)
    return _record(5, "error <= inconsistency rate", {
        f"{count} datasets, max(errors - inconsistent patterns) = {gap} <= 0": gap <= 0,
    }, t, 30)


def criterion_6():
    def check():
        disagreements = 0
        for name in BENCHMARKS:
            d = load_benchmark(name)
            cfg = pipeline.benchmark_config(name).extract
            rs = rex.run_rex(d, cfg)
            rng = np.random.default_rng(6)
            base = rs.predict(d)
            patterns = d.patterns if name in FIXTURES else None
            for _ in range(100):
                perm = tuple(rs.rules[k] for k in rng.permutation(len(rs.rules)))
                shuffled = RuleSet(perm, rs.default_class, rs.schema, rs.classes)
                if patterns is not None:
                    pred = np.array([rex.classify(shuffled, p) for p in patterns])
                else:
                    pred = shuffled.predict(d)
                disagreements += int(np.sum(pred != base))
        return disagreements

    n, t = _timed(check)
    return _record(6, "order insensitivity", {
        f"disagreements over 4 x 100 permutations = {n}": n == 0}, t, 10)


def criterion_7():
    def check():
        exact, within = True, True
        for name in FIXTURES:
            d = load_benchmark(name)
            for i in range(len(d)):
                best = shortest_rule_length(d, i)
                ex = len(rex.generate_rule(d.pattern(i), d, ExtractConfig("exhaustive")))
                gr = len(rex.generate_rule(d.pattern(i), d, ExtractConfig("greedy")))
                exact &= ex == best
                within &= gr <= best + 1
        return exact, within

    (exact, within), t = _timed(check)
    return _record(7, "shortest-rule oracle", {
        "exhaustive = brute force": exact, "greedy <= brute force + 1": within}, t, 30)


def criterion_8():
    from test_network import gradient_error

    errs, t = _timed(lambda: [gradient_error(s) for s in range(40)])
    return _record(8, "gradient check", {
        f"max relative error {max(errs):.2e} < 1e-4 over 40 networks": max(errs) < 1e-4}, t, 5)


def criterion_9():
    iris = load_benchmark("iris")

    def check():
        rules, report, artifacts = pipeline.run(iris, pipeline.PipelineConfig(mode="reann"))
        net = Network.from_json(artifacts["network.json"])
        table = discretize.ClusterTable.from_json(artifacts["clusters.json"])
        X, _ = input_matrix(normalize(iris))
        hidden, _ = network.forward_batch(net, X)
        disc = float(np.mean(discretize.discrete_predictions(net, hidden, table)
                             == network.predict(net, X)))
        direct = rex.run_rex(iris).accuracy(iris)
        return disc, report, direct

    (disc, report, direct), t = _timed(check)
    gap = abs(report.train_accuracy - direct)
    return _record(9, "network mode on iris", {
        f"discretization fidelity {disc:.4f} = 1": disc == 1.0,
        f"rule fidelity {report.fidelity_to_network:.4f} >= 0.95":
            report.fidelity_to_network >= 0.95,
        f"|{report.train_accuracy:.4f} - direct {direct:.4f}| <= 0.03": gap <= 0.03 + 1e-12,
    }, t, 120)


def _same_tree(a: Path, b: Path) -> bool:
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(_same_tree(a / d, b / d) for d in cmp.common_dirs)


def criterion_10(tmp: Path):
    def check():
        sink = io.StringIO()
        with contextlib.redirect_stdout(sink), contextlib.redirect_stderr(sink):
            codes = [cli.main(["reproduce", "--out", str(tmp / run), "--seed", "0"])
                     for run in ("first", "second")]
        files = sum(1 for p in (tmp / "first").rglob("*") if p.is_file())
        return codes, files, _same_tree(tmp / "first", tmp / "second")

    (codes, files, same), t = _timed(check)
    return _record(10, "reproduce determinism", {
        f"exit codes {codes}": codes == [0, 0],
        f"{files} artifact files byte-identical": same and files > 0,
    }, t, None)


@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(number):
    ok, checks = globals()[f"criterion_{number}"]()
    assert ok, checks


def test_criterion_10(tmp_path):
    ok, checks = criterion_10(tmp_path)
    assert ok, checks


if __name__ == "__main__":
    import tempfile

    results = [globals()[f"criterion_{n}"]()[0] for n in range(1, 10)]
    with tempfile.TemporaryDirectory() as tmp:
        results.append(criterion_10(Path(tmp))[0])
    sys.exit(0 if all(results) else 1)
