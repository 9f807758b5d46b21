"""Acceptance criteria 1-12, one test each, each reporting a single pass/fail line.

Criteria 1-7 need the real KDDTrain+ file; point ``NSLKDD_TRAIN`` at it to run
them. Without it they are reported as SKIP.
"""
import csv
import time
import warnings

import numpy as np
import pytest

from transferids.attacks import AttackConfig, attack, fgsm, pgd
from transferids.classical import KINDS, LDA
from transferids.defense import majority
from transferids.harness import cli
from transferids.harness.config import ExperimentConfig, fixture_config
from transferids.harness.experiments import EXPERIMENTS, Pipeline, run_experiment
from transferids.harness.report import write_report

from conftest import nslkdd_path, random_mlp
from oracles import (
    closed_form_lda, draw_gradient_case, fd_input_grad, oracle_tree_predict, random_lda_problem, random_tree,
    rel_err, vote_oracle,
)

KDDTRAIN_PARTITION_COUNTS = {
    "train_a": {"Normal": 26938, "DoS": 18371, "Probe": 4663, "R2L": 398, "U2R": 21},
    "train_b": {"Normal": 26937, "DoS": 18371, "Probe": 4662, "R2L": 398, "U2R": 21},
    "test": {"Normal": 13468, "DoS": 9185, "Probe": 2331, "R2L": 199, "U2R": 10},
}
EPS_MAX = 0.5


def _need_real_data(record, crit):
    if nslkdd_path() is None:
        record(crit, None, "NSLKDD_TRAIN not set; real KDDTrain+ unavailable")
        pytest.skip("set NSLKDD_TRAIN to the KDDTrain+ file to run this criterion")


@pytest.fixture(scope="module")
def real_run(tmp_path_factory):
    """Default configuration on KDDTrain+, all three experiments sharing one pipeline."""
    path = nslkdd_path()
    if path is None:
        return None
    cfg = ExperimentConfig({"data.path": str(path)})
    pipe = Pipeline(cfg, tmp_path_factory.mktemp("real"))
    return cfg, pipe, {name: run_experiment(name, cfg, pipe) for name in EXPERIMENTS}


# Real dataset ---------------------------------------------------------------

@pytest.mark.nslkdd
def test_criterion_01_partition_counts(record_criterion, tmp_path):
    _need_real_data(record_criterion, "1 partition-counts")
    assert cli.main(["prepare", "--data", str(nslkdd_path()), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "partition_counts.csv") as fh:
        got = {row["partition"]: {f: int(row[f]) for f in KDDTRAIN_PARTITION_COUNTS["test"]} for row in csv.DictReader(fh)}
    ok = got == KDDTRAIN_PARTITION_COUNTS
    record_criterion("1 partition-counts", ok, f"{got}")
    assert ok


@pytest.mark.nslkdd
@pytest.mark.slow
def test_criterion_02_clean_baseline(record_criterion, real_run):
    _need_real_data(record_criterion, "2 clean-baseline")
    _, pipe, reps = real_run
    rep = reps["transfer"]
    clean = {m: rep.value(m, "accuracy", "fgsm", 0.0) for m in ("dnn", *(k.value for k in KINDS))}
    ok = all(v >= 0.90 for v in clean.values())
    record_criterion("2 clean-baseline", ok, " ".join(f"{k}={v:.4f}" for k, v in clean.items()))
    assert ok


@pytest.mark.nslkdd
@pytest.mark.slow
def test_criterion_03_whitebox(record_criterion, real_run):
    _need_real_data(record_criterion, "3 white-box")
    _, _, reps = real_run
    rep = reps["transfer"]
    ratios = {m: rep.value("dnn", "accuracy", m, EPS_MAX) / rep.value("dnn", "accuracy", m, 0.0)
              for m in ("fgsm", "pgd")}
    ok = all(r <= 0.60 for r in ratios.values())
    record_criterion("3 white-box", ok, f"acc(eps={EPS_MAX})/acc(0): {ratios}")
    assert ok


@pytest.mark.nslkdd
@pytest.mark.slow
def test_criterion_04_transfer(record_criterion, real_run):
    _need_real_data(record_criterion, "4 transfer")
    _, _, reps = real_run
    rep = reps["transfer"]
    drops = {(k.value, m): rep.value(k.value, "accuracy", m, 0.0) - rep.value(k.value, "accuracy", m, EPS_MAX)
             for k in KINDS for m in ("fgsm", "pgd")}
    ok = all(d >= 0.05 for d in drops.values())
    record_criterion("4 transfer", ok, " ".join(f"{k}/{m}={d:.3f}" for (k, m), d in drops.items()))
    assert ok


@pytest.mark.nslkdd
@pytest.mark.slow
def test_criterion_05_differentiability_soft(record_criterion, real_run):
    _need_real_data(record_criterion, "5 differentiability (soft)")
    _, _, reps = real_run
    check = reps["transfer"].checks["differentiability"]
    held = all(v["trees_least_affected"] for v in check.values())
    if not held:
        warnings.warn(f"tree victims are not the least affected: {check}")
    # Soft criterion: the check must be computed and reported; a violation is a warning.
    record_criterion("5 differentiability (soft)", True,
                     f"ordering {'held' if held else 'VIOLATED (warning)'}: "
                     + str({m: v["mean_accuracy_drop"] for m, v in check.items()}))


@pytest.mark.nslkdd
@pytest.mark.slow
def test_criterion_06_ensemble(record_criterion, real_run):
    _need_real_data(record_criterion, "6 ensemble")
    _, _, reps = real_run
    rep = reps["ensemble"]
    drops = {m: rep.value("ensemble", "accuracy", m, 0.0) - rep.value("ensemble", "accuracy", m, EPS_MAX)
             for m in ("fgsm", "pgd")}
    ok = all(d >= 0.05 for d in drops.values())
    record_criterion("6 ensemble", ok, f"drop at eps={EPS_MAX}: {drops}")
    assert ok


@pytest.mark.nslkdd
@pytest.mark.slow
def test_criterion_07_detect_reject(record_criterion, real_run):
    _need_real_data(record_criterion, "7 detect-reject")
    _, _, reps = real_run
    imp = reps["detect-reject"].checks["dr_improvement"]["pgd"]
    ok = all(v["never_worse"] and v["mean"] > 0 for v in imp.values())
    record_criterion("7 detect-reject", ok, " ".join(f"{k}: mean={v['mean']:+.4f} never_worse={v['never_worse']}"
                                                     for k, v in imp.items()))
    assert ok


# Oracles and properties -----------------------------------------------------

def test_criterion_08_gradient_oracle(record_criterion):
    rng = np.random.default_rng(2024)
    n_cases, worst = 200, 0.0
    for _ in range(n_cases):
        model, x, y = draw_gradient_case(rng)
        worst = max(worst, float(rel_err(model.input_gradient(x, y), fd_input_grad(model, x, y)).max()))
    ok = worst <= 1e-3
    record_criterion("8 gradient-oracle", ok, f"{n_cases} networks, worst rel err {worst:.2e}")
    assert ok


def test_criterion_09_attack_constraints(record_criterion):
    rng = np.random.default_rng(99)
    draws, worst_excess, box_ok = 10_000, -np.inf, True
    for method in ("fgsm", "pgd"):
        for i in range(draws):
            model = random_mlp(rng)
            x = rng.random(model.n_inputs)
            x[rng.random(model.n_inputs) < 0.2] = rng.choice([0.0, 1.0])
            eps = float(rng.choice([0.0, rng.uniform(0, 1.2)]))
            cfg = AttackConfig(method, eps, pgd_iters=int(rng.integers(1, 6)), seed=i)
            adv = attack(model, x, int(rng.integers(model.n_classes)), cfg)
            worst_excess = max(worst_excess, float(np.max(np.abs(adv - x))) - eps)
            box_ok &= bool(adv.min() >= 0.0 and adv.max() <= 1.0)
    identical = True
    for _ in range(500):
        model = random_mlp(rng)
        x = rng.random((4, model.n_inputs))
        y = rng.integers(0, model.n_classes, 4)
        eps = float(rng.uniform(0.01, 1))
        one_step = AttackConfig("pgd", eps, pgd_step=eps, pgd_iters=1, random_start=False)
        identical &= fgsm(model, x, y, eps).tobytes() == pgd(model, x, y, one_step).tobytes()
    ok = worst_excess <= 1e-9 and box_ok and identical
    record_criterion("9 attack-constraints", ok,
                     f"{2 * draws} draws, max(|dx|-eps)={worst_excess:.1e}, box={box_ok}, pgd1==fgsm={identical}")
    assert ok


def test_criterion_10_oracle_equivalences(record_criterion):
    rng = np.random.default_rng(10)
    tree_ok = True
    for _ in range(1000):
        d = int(rng.integers(1, 5))
        tree = random_tree(rng, d, n_classes=int(rng.integers(2, 4)))
        X = rng.random((20, d))
        X[:3] = 0.5
        tree_ok &= bool(np.array_equal(tree.predict(X), oracle_tree_predict(tree, X)))
    lda_err = 0.0
    for _ in range(200):
        X, y = random_lda_problem(rng)
        clf = LDA().fit(X, y)
        w, b = closed_form_lda(X, y)
        lda_err = max(lda_err, float(rel_err(clf.coef[1] - clf.coef[0], w).max()),
                      float(rel_err(np.array([clf.intercept[1] - clf.intercept[0]]), np.array([b])).max()))
    table = np.array([[(m >> i) & 1 for i in range(5)] for m in range(32)])
    vote_ok = all(int(v) == vote_oracle(row) for row, v in zip(table, majority(table)))
    ok = tree_ok and lda_err <= 1e-6 and vote_ok
    record_criterion("10 oracle-equivalences", ok,
                     f"1000 trees match={tree_ok}, LDA worst rel err {lda_err:.1e}, 32 vote patterns ok={vote_ok}")
    assert ok


def test_criterion_11_determinism(record_criterion, tmp_path):
    cfg = fixture_config(**{"mlp.epochs": 10, "rf.n_trees": 10, "attack.epsilons": (0.0, 0.1, 0.5)})
    same = {}
    for name in EXPERIMENTS:
        for run in ("a", "b"):
            write_report(run_experiment(name, cfg), tmp_path / run / name)
        same[name] = ((tmp_path / "a" / name / "metrics.csv").read_bytes()
                      == (tmp_path / "b" / name / "metrics.csv").read_bytes())
    ok = all(same.values())
    record_criterion("11 determinism", ok, f"byte-identical metrics.csv: {same}")
    assert ok


def test_criterion_12_fixture_pipeline(record_criterion):
    cfg = fixture_config()
    t0 = time.perf_counter()
    pipe = Pipeline(cfg)
    transfer = run_experiment("transfer", cfg, pipe)
    dr = run_experiment("detect-reject", cfg, pipe)
    elapsed = time.perf_counter() - t0
    drops = {m: transfer.value("dnn", "accuracy", m, 0.0) - transfer.value("dnn", "accuracy", m, EPS_MAX)
             for m in cfg["attack.methods"]}
    means = {k: v["mean"] for k, v in dr.checks["dr_improvement"]["pgd"].items()}
    ok = elapsed < 60 and all(d >= 0.10 for d in drops.values()) and all(v > 0 for v in means.values())
    record_criterion("12 fixture-pipeline", ok,
                     f"{elapsed:.1f}s, white-box drop {({m: round(d, 3) for m, d in drops.items()})}, "
                     f"D&R mean gain {({k: round(v, 3) for k, v in means.items()})}")
    assert ok
