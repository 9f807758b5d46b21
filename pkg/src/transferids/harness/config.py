"""Flat ``dotted.key = value`` experiment configuration.

Every accepted key is listed in :data:`KEYS` with its type, default and a one
line description; anything else in a config file is an error.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from transferids.attacks import AttackConfig
from transferids.classical import ClassifierKind
from transferids.data import SplitSpec
from transferids.nn import MlpConfig


class ConfigError(ValueError):
    pass


def _bool(v: str) -> bool:
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _floats(v) -> tuple[float, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).split(",") if x.strip())


def _ints(v) -> tuple[int, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(int(x) for x in v)
    return tuple(int(x) for x in str(v).split(",") if x.strip())


def _words(v) -> tuple[str, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(str(x).strip().lower() for x in v)
    return tuple(x.strip().lower() for x in str(v).split(",") if x.strip())


def _opt_int(v):
    if v is None or str(v).strip().lower() in ("", "none", "0"):
        return None
    return int(v)


def _opt_seed(v):
    if v is None or str(v).strip().lower() in ("", "none", "auto"):
        return None
    return int(v)


# key -> (parser, default, description)
KEYS: dict[str, tuple[Any, Any, str]] = {
    "seed": (int, 0, "master seed; component seeds left on 'auto' derive from it"),
    "data.path": (str, "", "path to KDDTrain+ (NSL-KDD text format)"),
    "data.fixture": (_bool, False, "use the synthetic two-cluster fixture instead of data.path"),
    "data.fixture_n": (int, 2000, "fixture record count"),
    "data.fixture_seed": (int, 1, "fixture generator seed"),
    "split.test_fraction": (float, 0.20, "fraction of each attack family held out as Test"),
    "split.seed": (_opt_seed, None, "partition shuffle seed (auto = seed)"),
    "mlp.hidden_sizes": (_ints, (512, 512), "surrogate hidden layer widths"),
    "mlp.dropout": (float, 0.20, "dropout rate after each hidden layer"),
    "mlp.epochs": (int, 20, "training epochs"),
    "mlp.batch_size": (int, 256, "mini-batch size"),
    "mlp.lr": (float, 1e-3, "Adam learning rate"),
    "mlp.beta1": (float, 0.9, "Adam first-moment decay"),
    "mlp.beta2": (float, 0.999, "Adam second-moment decay"),
    "mlp.eps_hat": (float, 1e-8, "Adam denominator constant"),
    "mlp.seed": (_opt_seed, None, "init/shuffle/dropout seed (auto = seed + 1)"),
    "svm.c": (float, 1.0, "hinge-loss weight C"),
    "svm.epochs": (int, 1000, "max dual coordinate descent passes"),
    "svm.tol": (float, 1e-3, "projected-gradient stopping gap"),
    "lr.l2": (float, 1e-4, "logistic regression L2 penalty"),
    "lr.epochs": (int, 500, "logistic regression gradient iterations"),
    "dt.max_depth": (_opt_int, None, "decision tree depth cap (none = unbounded)"),
    "dt.min_samples_split": (int, 2, "decision tree min rows to split"),
    "rf.n_trees": (int, 100, "random forest size"),
    "rf.max_depth": (_opt_int, None, "random forest depth cap (none = unbounded)"),
    "rf.min_samples_split": (int, 2, "random forest min rows to split"),
    "rf.n_jobs": (int, 1, "threads used to grow trees (results do not depend on it)"),
    "lda.ridge": (float, 1e-6, "ridge added to the pooled covariance, times trace/d"),
    "classical.seed": (_opt_seed, None, "seed for the five victims (auto = seed + 2)"),
    "attack.methods": (_words, ("fgsm", "pgd"), "attacks to sweep"),
    "attack.epsilons": (_floats, (0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0), "L-inf budgets, ascending from 0"),
    "attack.pgd_iters": (int, 10, "PGD iterations"),
    "attack.pgd_step_ratio": (float, 0.25, "PGD step size as a fraction of epsilon"),
    "attack.random_start": (_bool, True, "PGD starts from a uniform point in the epsilon ball"),
    "attack.seed": (_opt_seed, None, "PGD random-start seed (auto = seed + 3)"),
    "dr.epsilon": (float, 0.3, "PGD budget used to craft the Detect & Reject training data"),
    "output.dir": (str, "runs/latest", "output directory"),
}


@dataclass
class ExperimentConfig:
    values: dict[str, Any] = field(default_factory=lambda: {k: v[1] for k, v in KEYS.items()})

    def __post_init__(self):
        merged = {k: v[1] for k, v in KEYS.items()}
        for k, v in self.values.items():
            if k not in KEYS:
                raise ConfigError(f"unknown config key {k!r}")
            merged[k] = v
        self.values = merged
        self.validate()

    def __getitem__(self, key: str):
        return self.values[key]

    def validate(self) -> None:
        eps = list(self["attack.epsilons"])
        if not eps or eps[0] != 0.0:
            raise ConfigError("attack.epsilons must start at 0.0")
        if eps != sorted(eps) or len(set(eps)) != len(eps):
            raise ConfigError("attack.epsilons must be strictly ascending")
        for m in self["attack.methods"]:
            if m not in ("fgsm", "pgd"):
                raise ConfigError(f"unknown attack method {m!r}")
        if not 0 < self["split.test_fraction"] < 1:
            raise ConfigError("split.test_fraction must lie in (0, 1)")
        if self["dr.epsilon"] <= 0:
            raise ConfigError("dr.epsilon must be > 0")

    def override(self, updates: dict[str, Any]) -> "ExperimentConfig":
        """Copy with dotted-key ``updates`` applied (values already parsed)."""
        return ExperimentConfig({**self.values, **updates})

    # Seeds -----------------------------------------------------------------
    def seed_for(self, component: str) -> int:
        offsets = {"split": 0, "mlp": 1, "classical": 2, "attack": 3}
        explicit = self[f"{component}.seed"]
        return int(explicit) if explicit is not None else int(self["seed"]) + offsets[component]

    # Builders ---------------------------------------------------------------
    def split_spec(self) -> SplitSpec:
        return SplitSpec(self["split.test_fraction"], True, self.seed_for("split"))

    def mlp_config(self) -> MlpConfig:
        return MlpConfig(hidden_sizes=self["mlp.hidden_sizes"], dropout_rate=self["mlp.dropout"],
                         lr=self["mlp.lr"], beta1=self["mlp.beta1"], beta2=self["mlp.beta2"],
                         eps_hat=self["mlp.eps_hat"], epochs=self["mlp.epochs"],
                         batch_size=self["mlp.batch_size"], seed=self.seed_for("mlp"))

    def classical_hyper(self, kind) -> dict:
        kind = ClassifierKind.parse(kind)
        if kind is ClassifierKind.SVM:
            return {"C": self["svm.c"], "epochs": self["svm.epochs"], "tol": self["svm.tol"]}
        if kind is ClassifierKind.LogisticRegression:
            return {"l2": self["lr.l2"], "epochs": self["lr.epochs"]}
        if kind is ClassifierKind.DecisionTree:
            return {"max_depth": self["dt.max_depth"], "min_samples_split": self["dt.min_samples_split"]}
        if kind is ClassifierKind.RandomForest:
            return {"n_trees": self["rf.n_trees"], "max_depth": self["rf.max_depth"],
                    "min_samples_split": self["rf.min_samples_split"], "n_jobs": self["rf.n_jobs"]}
        return {"ridge": self["lda.ridge"]}

    def attack_config(self, method: str, epsilon: float, seed_offset: int = 0) -> AttackConfig:
        step = self["attack.pgd_step_ratio"] * epsilon if epsilon > 0 else None
        return AttackConfig(method=method, epsilon=float(epsilon), pgd_step=step,
                            pgd_iters=self["attack.pgd_iters"], random_start=self["attack.random_start"],
                            seed=self.seed_for("attack") + seed_offset)

    def snapshot(self) -> dict[str, Any]:
        out = {}
        for k, v in self.values.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        for comp in ("split", "mlp", "classical", "attack"):
            out[f"{comp}.seed"] = self.seed_for(comp)
        return out


def parse_config_text(text: str) -> dict[str, Any]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    out = {}
    for key, raw in parser.items("config"):
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = KEYS[key][0](raw.strip())
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    return out


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    for k, v in overrides.items():
        if v is not None:
            values[k] = v
    return ExperimentConfig(values)


def fixture_config(**overrides) -> ExperimentConfig:
    """Small, fast settings on the synthetic fixture (used by tests and ``--fixture``)."""
    values = {"data.fixture": True, "mlp.hidden_sizes": (64, 64), "mlp.epochs": 30, "mlp.batch_size": 64,
              "rf.n_trees": 25, "svm.epochs": 200}
    values.update(overrides)
    return ExperimentConfig(values)


def describe_keys() -> str:
    lines = []
    for k, (_, default, doc) in KEYS.items():
        d = ",".join(str(x) for x in default) if isinstance(default, tuple) else default
        lines.append(f"{k} = {'none' if d is None else d}    # {doc}")
    return "\n".join(lines)
