"""The three experiments: transferability, ensemble robustness, Detect & Reject.

A :class:`Pipeline` owns every intermediate artefact (partitions, surrogate,
victims, adversarial batches) and builds each one lazily, so experiments run
in the same process share models and batches. With a work directory it also
persists datasets and models and reuses them when their config key matches.
"""
from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from transferids import container
from transferids.attacks import AdversarialBatch, craft_batch
from transferids.classical import KINDS, Classifier, ClassifierKind, load_classifier, train_classifier
from transferids.data import Dataset, Preprocessor, load_nslkdd, prepare, synth_fixture
from transferids.defense import DetectRejectIds, EnsembleIds, build_detect_reject
from transferids.harness.config import ExperimentConfig
from transferids.harness.metrics import METRIC_DEFINITIONS, MetricRecord, compute_metrics
from transferids.nn import MlpModel, train_mlp

logger = logging.getLogger(__name__)

EXPERIMENTS = ("transfer", "ensemble", "detect-reject")
DR_SEED_OFFSET = 1000


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ExperimentReport:
    experiment: str
    config: dict[str, Any]
    fingerprints: dict[str, str] = field(default_factory=dict)
    records: list[MetricRecord] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    batches: dict[str, str] = field(default_factory=dict)
    checks: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def value(self, model: str, metric: str, method: str, epsilon: float, experiment: str | None = None) -> float:
        exp = experiment or self.experiment
        for r in self.records:
            if (r.experiment, r.model, r.metric, r.method, r.epsilon) == (exp, model, metric, method, epsilon):
                return r.value
        raise KeyError((exp, model, metric, method, epsilon))

    def series(self, model: str, metric: str, method: str, experiment: str | None = None) -> dict[float, float]:
        exp = experiment or self.experiment
        return {r.epsilon: r.value for r in self.records
                if (r.experiment, r.model, r.metric, r.method) == (exp, model, metric, method)}

    def to_dict(self) -> dict[str, Any]:
        return {"experiment": self.experiment, "config": self.config, "fingerprints": self.fingerprints,
                "batches": self.batches, "timings": self.timings, "checks": self.checks,
                "warnings": self.warnings, "metric_definitions": METRIC_DEFINITIONS,
                "n_records": len(self.records)}


class Pipeline:
    def __init__(self, cfg: ExperimentConfig, workdir: str | Path | None = None):
        self.cfg = cfg
        self.workdir = Path(workdir) if workdir else None
        self.timings: dict[str, float] = {}
        self._data: dict[str, Dataset] | None = None
        self._prep: Preprocessor | None = None
        self._surrogate: MlpModel | None = None
        self._victims: dict[ClassifierKind, Classifier] = {}
        self._batches: dict[tuple[str, float], AdversarialBatch] = {}
        self._dr_batch: AdversarialBatch | None = None
        self._dr: dict[ClassifierKind, DetectRejectIds] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        finally:
            elapsed = time.perf_counter() - t0
            self.timings[name] = self.timings.get(name, 0.0) + elapsed
            logger.info("stage %s: %.2fs", name, elapsed)

    # cache keys ---------------------------------------------------------------
    def _key(self, *groups: str) -> str:
        snap = self.cfg.snapshot()
        picked = {k: v for k, v in snap.items() if k.split(".")[0] in groups and k != "rf.n_jobs"}
        return container.fingerprint(picked)

    def data_key(self) -> str:
        return self._key("data", "split")

    def _cached_path(self, rel: str, key: str) -> Path | None:
        if self.workdir is None:
            return None
        path = self.workdir / rel
        key_file = path.with_name(path.name + ".key")
        if path.exists() and key_file.exists() and key_file.read_text().strip() == key:
            return path
        return None

    def _store(self, rel: str, key: str, save) -> None:
        if self.workdir is None:
            return
        path = self.workdir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        save(path)
        path.with_name(path.name + ".key").write_text(key + "\n")

    # artefacts ----------------------------------------------------------------
    def datasets(self) -> dict[str, Dataset]:
        if self._data is not None:
            return self._data
        key = self.data_key()
        with self.stage("prepare"):
            names = ("train_a", "train_b", "test")
            cached = [self._cached_path(f"data/{n}.ds", key) for n in names]
            prep_path = self._cached_path("data/preprocessor.txt", key)
            if all(cached) and prep_path:
                self._data = {n: Dataset.load(p) for n, p in zip(names, cached)}
                self._prep = Preprocessor.load(prep_path)
            else:
                if self.cfg["data.fixture"]:
                    raw = synth_fixture(self.cfg["data.fixture_seed"], self.cfg["data.fixture_n"])
                elif self.cfg["data.path"]:
                    raw = load_nslkdd(self.cfg["data.path"])
                else:
                    raise FileNotFoundError("no dataset: set data.path or use the fixture")
                self._prep, self._data = prepare(raw, self.cfg.split_spec())
                for n in names:
                    self._store(f"data/{n}.ds", key, self._data[n].save)
                self._store("data/preprocessor.txt", key, self._prep.save)
        return self._data

    def surrogate(self) -> MlpModel:
        if self._surrogate is None:
            data = self.datasets()
            key = self._key("data", "split", "mlp", "seed")
            with self.stage("train:dnn"):
                path = self._cached_path("models/dnn.model", key)
                if path:
                    self._surrogate = MlpModel.load(path, expect_schema=data["train_a"].schema_fingerprint)
                else:
                    self._surrogate = train_mlp(data["train_a"], self.cfg.mlp_config())
                    self._store("models/dnn.model", key, self._surrogate.save)
        return self._surrogate

    def victim(self, kind) -> Classifier:
        kind = ClassifierKind.parse(kind)
        if kind not in self._victims:
            data = self.datasets()
            key = self._key("data", "split", kind.value, "classical", "seed")
            with self.stage(f"train:{kind.value}"):
                path = self._cached_path(f"models/{kind.value}.model", key)
                if path:
                    clf = load_classifier(path, expect_schema=data["train_b"].schema_fingerprint)
                else:
                    clf = train_classifier(kind, data["train_b"], self.cfg.classical_hyper(kind),
                                           self.cfg.seed_for("classical"))
                    self._store(f"models/{kind.value}.model", key, clf.save)
            self._victims[kind] = clf
        return self._victims[kind]

    def victims(self) -> list[Classifier]:
        return [self.victim(k) for k in KINDS]

    def batch(self, method: str, epsilon: float) -> AdversarialBatch:
        cell = (method, float(epsilon))
        if cell not in self._batches:
            surrogate = self.surrogate()
            test = self.datasets()["test"]
            with self.stage(f"attack:{method}"):
                key = self._key("data", "split", "mlp", "attack", "seed") + f"-{method}-{epsilon!r}"
                rel = f"batches/{method}-eps{epsilon!r}.batch"
                path = self._cached_path(rel, key)
                if path:
                    batch = AdversarialBatch.load(path)
                    if batch.source_fingerprint != surrogate.fingerprint:
                        raise ValueError(f"{path} was crafted against a different surrogate")
                else:
                    batch = craft_batch(surrogate, test, self.cfg.attack_config(method, epsilon))
            self._batches[cell] = batch
        return self._batches[cell]

    def persist_batch(self, method: str, epsilon: float) -> None:
        key = self._key("data", "split", "mlp", "attack", "seed") + f"-{method}-{epsilon!r}"
        self._store(f"batches/{method}-eps{epsilon!r}.batch", key, self.batch(method, epsilon).save)

    def dr_training_batch(self) -> AdversarialBatch:
        if self._dr_batch is None:
            surrogate = self.surrogate()
            train_b = self.datasets()["train_b"]
            with self.stage("attack:dr-training"):
                cfg = self.cfg.attack_config("pgd", self.cfg["dr.epsilon"], seed_offset=DR_SEED_OFFSET)
                self._dr_batch = craft_batch(surrogate, train_b, cfg)
        return self._dr_batch

    def detect_reject(self, kind) -> DetectRejectIds:
        kind = ClassifierKind.parse(kind)
        if kind not in self._dr:
            adv = self.dr_training_batch()
            train_b = self.datasets()["train_b"]
            with self.stage(f"train:dr-{kind.value}"):
                self._dr[kind] = build_detect_reject(kind, train_b, adv, self.cfg.seed_for("classical"),
                                                     self.cfg.classical_hyper(kind))
        return self._dr[kind]

    def ensemble(self) -> EnsembleIds:
        return EnsembleIds(self.victims())


def _new_report(name: str, pipe: Pipeline) -> ExperimentReport:
    return ExperimentReport(name, pipe.cfg.snapshot())


def _finish(report: ExperimentReport, pipe: Pipeline, models) -> ExperimentReport:
    report.fingerprints.update({m.name: m.fingerprint for m in models})
    report.fingerprints["schema"] = pipe.datasets()["test"].schema_fingerprint
    report.timings = {k: round(v, 3) for k, v in pipe.timings.items()}
    return report


def _accuracy_sweep(report: ExperimentReport, pipe: Pipeline, models, experiment: str) -> None:
    cfg = pipe.cfg
    for method in cfg["attack.methods"]:
        for eps in cfg["attack.epsilons"]:
            batch = pipe.batch(method, eps)
            report.batches[f"{method}@{eps!r}"] = batch.fingerprint
            y = batch.labels
            with pipe.stage(f"evaluate:{experiment}"):
                for m in models:
                    pred = m.predict(batch.adversarials)
                    report.records += compute_metrics(pred, y, "accuracy", experiment=experiment,
                                                      method=method, epsilon=eps, model=m.name)
                    for label, tag in ((0, "normal-only"), (1, "intrusion-only")):
                        sel = y == label
                        if sel.any():
                            report.records += compute_metrics(pred[sel], y[sel], "accuracy",
                                                              experiment=f"{experiment}/{tag}", method=method,
                                                              epsilon=eps, model=m.name)


def differentiability_check(report: ExperimentReport, experiment: str = "transfer") -> dict[str, Any]:
    """Soft check: trees (DT, RF) lose less accuracy on average than SVM, LR and LDA."""
    out = {}
    for method in report.config["attack.methods"]:
        drops = {}
        for kind in KINDS:
            s = report.series(kind.value, "accuracy", method, experiment)
            clean = s[0.0]
            drops[kind.value] = float(np.mean([clean - v for e, v in s.items() if e > 0])) if len(s) > 1 else 0.0
        ok = all(drops[t] < drops[o] for t in ("dt", "rf") for o in ("svm", "lr", "lda"))
        out[method] = {"mean_accuracy_drop": drops, "trees_least_affected": ok}
        if not ok:
            report.warnings.append(f"{method}: tree models are not the least affected victims "
                                   f"(mean drops {drops})")
    return out


def run_transfer_experiment(cfg: ExperimentConfig, pipe: Pipeline | None = None) -> ExperimentReport:
    pipe = pipe or Pipeline(cfg)
    report = _new_report("transfer", pipe)
    models = [pipe.surrogate(), *pipe.victims()]
    _accuracy_sweep(report, pipe, models, "transfer")
    report.checks["differentiability"] = differentiability_check(report)
    return _finish(report, pipe, models)


def run_ensemble_experiment(cfg: ExperimentConfig, pipe: Pipeline | None = None) -> ExperimentReport:
    pipe = pipe or Pipeline(cfg)
    report = _new_report("ensemble", pipe)
    models = [pipe.surrogate(), *pipe.victims(), pipe.ensemble()]
    _accuracy_sweep(report, pipe, models, "ensemble")
    clean = {m.name: report.value(m.name, "accuracy", cfg["attack.methods"][0], 0.0) for m in models[1:]}
    worst_member = min(v for k, v in clean.items() if k != "ensemble")
    report.checks["ensemble_vs_worst_member"] = {"ensemble": clean["ensemble"], "worst_member": worst_member,
                                                 "ok": clean["ensemble"] >= worst_member}
    if clean["ensemble"] < worst_member:
        report.warnings.append("ensemble clean accuracy is below its worst member")
    return _finish(report, pipe, models)


def run_dr_experiment(cfg: ExperimentConfig, pipe: Pipeline | None = None) -> ExperimentReport:
    pipe = pipe or Pipeline(cfg)
    report = _new_report("detect-reject", pipe)
    test = pipe.datasets()["test"]
    victims = pipe.victims()
    defended = [pipe.detect_reject(k) for k in KINDS]
    report.batches["dr-training"] = pipe.dr_training_batch().fingerprint
    models = [*victims, *defended]
    y = test.labels
    with pipe.stage("evaluate:detect-reject"):
        clean_pred = {m.name: m.predict(test.matrix) for m in models}
    for method in cfg["attack.methods"]:
        for eps in cfg["attack.epsilons"]:
            batch = pipe.batch(method, eps)
            report.batches[f"{method}@{eps!r}"] = batch.fingerprint
            with pipe.stage("evaluate:detect-reject"):
                for m in models:
                    keys = dict(experiment="detect-reject", method=method, epsilon=eps, model=m.name)
                    if eps == 0.0:
                        recs = compute_metrics(clean_pred[m.name], y, "robust", **keys)
                        acc = next(r for r in recs if r.metric == "accuracy")
                        # Zero budget: the "attacked" set is the clean set, rejections count as errors.
                        recs.append(MetricRecord(metric="robust_accuracy", value=acc.value, n=acc.n, **keys))
                    else:
                        pred = np.concatenate([clean_pred[m.name], m.predict(batch.adversarials)])
                        truth = np.concatenate([y, batch.labels])
                        is_adv = np.concatenate([np.zeros(len(y), bool), np.ones(len(batch), bool)])
                        recs = compute_metrics(pred, truth, "robust", is_adv, **keys)
                    report.records += recs

    improvement, detection = {}, {}
    for method in cfg["attack.methods"]:
        improvement[method] = {}
        for kind in KINDS:
            without = report.series(kind.value, "robust_accuracy", method)
            with_dr = report.series(f"dr-{kind.value}", "robust_accuracy", method)
            diffs = {e: with_dr[e] - without[e] for e in without if e > 0}
            improvement[method][kind.value] = {
                "per_epsilon": {repr(e): d for e, d in diffs.items()},
                "mean": float(np.mean(list(diffs.values()))) if diffs else 0.0,
                "never_worse": all(d >= 0 for d in diffs.values()),
            }
        detection[method] = {}
        for eps in cfg["attack.epsilons"]:
            if eps == 0:
                continue
            rates = {k.value: report.value(f"dr-{k.value}", "adversarial_detection_rate", method, eps) for k in KINDS}
            ok = all(rates[t] >= rates[o] for t in ("dt", "rf") for o in ("svm", "lr", "lda"))
            detection[method][repr(eps)] = {"rates": rates, "trees_highest": ok}
            if not ok:
                report.warnings.append(f"{method} eps={eps}: DT/RF do not have the highest detection rates {rates}")
    report.checks["dr_improvement"] = improvement
    report.checks["tree_detection"] = detection
    return _finish(report, pipe, models)


RUNNERS = {"transfer": run_transfer_experiment, "ensemble": run_ensemble_experiment,
           "detect-reject": run_dr_experiment}


def run_experiment(name: str, cfg: ExperimentConfig, pipe: Pipeline | None = None) -> ExperimentReport:
    if name not in RUNNERS:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    return RUNNERS[name](cfg, pipe)
