"""NSL-KDD ingestion, preprocessing and the A / B / Test partition.

Records are parsed into :class:`RawRecord`, a :class:`Preprocessor` is fitted
on one partition (one-hot vocabularies for the three categorical columns,
min/max ranges for the rest) and :func:`transform` turns any raw partition
into a :class:`Dataset` whose entries all lie in ``[0, 1]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from transferids import container

FEATURE_NAMES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root", "num_file_creations",
    "num_shells", "num_access_files", "num_outbound_cmds", "is_host_login",
    "is_guest_login", "count", "srv_count", "serror_rate", "srv_serror_rate",
    "rerror_rate", "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
    "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate", "dst_host_srv_serror_rate",
    "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)
N_FEATURES = len(FEATURE_NAMES)
CATEGORICAL = (1, 2, 3)  # protocol_type, service, flag
NUMERIC = tuple(i for i in range(N_FEATURES) if i not in CATEGORICAL)

FAMILIES = ("Normal", "DoS", "Probe", "R2L", "U2R", "Other")

ATTACK_FAMILIES: dict[str, str] = {"normal": "Normal"}
for _fam, _names in {
    "DoS": "back land neptune pod smurf teardrop apache2 mailbomb processtable udpstorm worm",
    "Probe": "ipsweep nmap portsweep satan mscan saint",
    "R2L": "ftp_write guess_passwd imap multihop phf spy warezclient warezmaster named "
           "sendmail snmpgetattack snmpguess xlock xsnoop",
    "U2R": "buffer_overflow loadmodule perl rootkit httptunnel ps sqlattack xterm",
}.items():
    for _name in _names.split():
        ATTACK_FAMILIES[_name] = _fam

BINARY_CLASSES = ("normal", "intrusion")
TERNARY_CLASSES = ("normal", "intrusion", "adversarial")


class DataError(ValueError):
    """Malformed input data."""


@dataclass(frozen=True)
class RawRecord:
    features: tuple[str, ...]
    label: str
    difficulty: int | None = None

    def __post_init__(self):
        if len(self.features) != N_FEATURES:
            raise DataError(f"expected {N_FEATURES} features, got {len(self.features)}")
        if not self.label:
            raise DataError("empty label")


@dataclass(frozen=True)
class RawDataset:
    records: tuple[RawRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def subset(self, idx: Iterable[int]) -> "RawDataset":
        return RawDataset(tuple(self.records[i] for i in idx))

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.records]


def family_of(label: str) -> str:
    return ATTACK_FAMILIES.get(label.strip().lower(), "Other")


def load_nslkdd(path: str | Path) -> RawDataset:
    """Parse an NSL-KDD text file (41 features, label, optional difficulty)."""
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) not in (N_FEATURES + 1, N_FEATURES + 2):
                raise DataError(f"{path}:{lineno}: expected 42 or 43 fields, found {len(row)}")
            row = [v.strip() for v in row]
            difficulty = None
            if len(row) == N_FEATURES + 2:
                try:
                    difficulty = int(row[-1])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: difficulty {row[-1]!r} is not an integer") from None
            label = row[N_FEATURES]
            if not label:
                raise DataError(f"{path}:{lineno}: empty label")
            records.append(RawRecord(tuple(row[:N_FEATURES]), label, difficulty))
    return RawDataset(tuple(records))


def _numeric_block(raw: RawDataset) -> np.ndarray:
    if not len(raw):
        return np.zeros((0, len(NUMERIC)))
    table = np.array([r.features for r in raw.records], dtype=object)[:, list(NUMERIC)]
    try:
        return table.astype(np.float64)
    except ValueError:
        for i, rec in enumerate(raw.records):
            for j in NUMERIC:
                try:
                    float(rec.features[j])
                except ValueError:
                    raise DataError(
                        f"record {i}: feature {FEATURE_NAMES[j]!r} is not numeric: {rec.features[j]!r}"
                    ) from None
        raise


@dataclass(frozen=True)
class Preprocessor:
    categorical_vocabs: dict[int, tuple[str, ...]]
    numeric_mins: np.ndarray
    numeric_maxs: np.ndarray
    attack_families: dict[str, str] = field(default_factory=lambda: dict(ATTACK_FAMILIES))

    @property
    def schema(self) -> list[tuple[str, str | None]]:
        out: list[tuple[str, str | None]] = []
        for j in range(N_FEATURES):
            if j in self.categorical_vocabs:
                out.extend((FEATURE_NAMES[j], tok) for tok in self.categorical_vocabs[j])
            else:
                out.append((FEATURE_NAMES[j], None))
        return out

    @property
    def n_dims(self) -> int:
        return len(NUMERIC) + sum(len(v) for v in self.categorical_vocabs.values())

    def save(self, path) -> None:
        meta = {"vocabs": {str(k): list(v) for k, v in self.categorical_vocabs.items()},
                "attack_families": self.attack_families}
        container.save(path, "preprocessor", meta, {"mins": self.numeric_mins, "maxs": self.numeric_maxs})

    @classmethod
    def load(cls, path) -> "Preprocessor":
        meta, arrays = container.load(path, kind="preprocessor")
        vocabs = {int(k): tuple(v) for k, v in meta["vocabs"].items()}
        return cls(vocabs, arrays["mins"], arrays["maxs"], meta["attack_families"])


def fit_preprocessor(raw: RawDataset) -> Preprocessor:
    if not len(raw):
        raise DataError("cannot fit a preprocessor on an empty dataset")
    vocabs = {j: tuple(sorted({r.features[j] for r in raw.records})) for j in CATEGORICAL}
    num = _numeric_block(raw)
    return Preprocessor(vocabs, num.min(axis=0), num.max(axis=0))


@dataclass(frozen=True)
class Dataset:
    """Scaled feature matrix plus labels; ``families`` indexes into :data:`FAMILIES`."""

    matrix: np.ndarray
    labels: np.ndarray
    schema: tuple[tuple[str, str | None], ...]
    class_names: tuple[str, ...]
    families: np.ndarray | None = None

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.labels.shape[0]:
            raise DataError("matrix/labels shape mismatch")
        if self.matrix.shape[1] != len(self.schema):
            raise DataError(f"matrix has {self.matrix.shape[1]} columns but schema has {len(self.schema)}")

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_dims(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def schema_fingerprint(self) -> str:
        return schema_fingerprint(self.schema)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        fam = None if self.families is None else self.families[idx]
        return Dataset(self.matrix[idx], self.labels[idx], self.schema, self.class_names, fam)

    def with_classes(self, class_names: Sequence[str]) -> "Dataset":
        return Dataset(self.matrix, self.labels, self.schema, tuple(class_names), self.families)

    def save(self, path) -> None:
        meta = {"schema": [list(s) for s in self.schema], "class_names": list(self.class_names),
                "families": list(FAMILIES)}
        arrays = {"matrix": self.matrix, "labels": self.labels}
        if self.families is not None:
            arrays["family_ids"] = self.families
        container.save(path, "dataset", meta, arrays)

    @classmethod
    def load(cls, path) -> "Dataset":
        meta, arrays = container.load(path, kind="dataset")
        schema = tuple((s[0], s[1]) for s in meta["schema"])
        matrix = arrays["matrix"].reshape(-1, len(schema))
        return cls(matrix, arrays["labels"], schema, tuple(meta["class_names"]), arrays.get("family_ids"))


def schema_fingerprint(schema) -> str:
    return container.fingerprint([list(s) for s in schema])


def transform(prep: Preprocessor, raw: RawDataset, label_mode: str = "binary") -> Dataset:
    """One-hot + min-max encode ``raw``; labels become 0 (normal) or 1 (any attack)."""
    if label_mode not in ("binary", "ternary"):
        raise ValueError(f"unknown label_mode {label_mode!r}")
    n = len(raw)
    num = _numeric_block(raw)
    span = prep.numeric_maxs - prep.numeric_mins
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (num - prep.numeric_mins) / safe, 0.0)
    np.clip(scaled, 0.0, 1.0, out=scaled)

    blocks = []
    col = 0
    for j in range(N_FEATURES):
        if j in prep.categorical_vocabs:
            vocab = prep.categorical_vocabs[j]
            lookup = {tok: k for k, tok in enumerate(vocab)}
            block = np.zeros((n, len(vocab)))
            for i, rec in enumerate(raw.records):
                k = lookup.get(rec.features[j])
                if k is not None:
                    block[i, k] = 1.0
            blocks.append(block)
        else:
            blocks.append(scaled[:, col:col + 1])
            col += 1
    matrix = np.hstack(blocks) if blocks else np.zeros((n, 0))
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    labels = np.array([0 if r.label.strip().lower() == "normal" else 1 for r in raw.records], dtype=np.int64)
    fam_index = {f: k for k, f in enumerate(FAMILIES)}
    families = np.array(
        [fam_index[prep.attack_families.get(r.label.strip().lower(), "Other")] for r in raw.records],
        dtype=np.int64,
    )
    names = BINARY_CLASSES if label_mode == "binary" else TERNARY_CLASSES
    return Dataset(matrix, labels, tuple(prep.schema), names, families)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.20
    half_split: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


def split_indices(families: Sequence[int] | np.ndarray, spec: SplitSpec) -> dict[str, np.ndarray]:
    """Family-stratified partition indices.

    Per family of size n: ``floor(n * test_fraction)`` records go to test, the
    rest is halved with the odd record going to A.
    """
    families = np.asarray(families, dtype=np.int64)
    rng = np.random.default_rng(spec.seed)
    parts: dict[str, list[np.ndarray]] = {"train_a": [], "train_b": [], "test": []}
    for fam in np.unique(families):
        members = np.flatnonzero(families == fam)
        n = members.size
        if spec.half_split and n < 2:
            raise DataError(f"family {FAMILIES[fam] if fam < len(FAMILIES) else fam} has {n} record(s); "
                            "at least 2 are needed to populate both training halves")
        members = members[rng.permutation(n)]
        n_test = math.floor(n * spec.test_fraction + 1e-9)
        n_train = n - n_test
        n_a = (n_train + 1) // 2 if spec.half_split else n_train
        parts["train_a"].append(members[:n_a])
        parts["train_b"].append(members[n_a:n_train])
        parts["test"].append(members[n_train:])
    return {k: np.sort(np.concatenate(v)) if v else np.zeros(0, dtype=np.int64) for k, v in parts.items()}


def raw_families(raw: RawDataset) -> np.ndarray:
    fam_index = {f: k for k, f in enumerate(FAMILIES)}
    return np.array([fam_index[family_of(r.label)] for r in raw.records], dtype=np.int64)


def split(ds: Dataset, spec: SplitSpec) -> dict[str, Dataset]:
    if ds.families is None:
        raise DataError("dataset carries no family ids; cannot stratify")
    return {k: ds.subset(v) for k, v in split_indices(ds.families, spec).items()}


def split_raw(raw: RawDataset, spec: SplitSpec) -> dict[str, RawDataset]:
    return {k: raw.subset(v) for k, v in split_indices(raw_families(raw), spec).items()}


def family_counts(ds: Dataset) -> dict[str, int]:
    counts = np.bincount(ds.families, minlength=len(FAMILIES)) if len(ds) else np.zeros(len(FAMILIES), int)
    return {f: int(c) for f, c in zip(FAMILIES, counts)}


_SYNTH_VOCABS = {
    1: (("icmp", "tcp", "udp"), (0.2, 0.6, 0.2), (0.4, 0.4, 0.2)),
    2: (("ftp", "http", "private", "smtp", "telnet"), (0.1, 0.5, 0.1, 0.2, 0.1), (0.2, 0.2, 0.4, 0.1, 0.1)),
    3: (("REJ", "S0", "SF"), (0.1, 0.1, 0.8), (0.3, 0.3, 0.4)),
}


def synth_fixture(seed: int, n: int) -> RawDataset:
    """Two overlapping Gaussian clusters in NSL-KDD layout ("normal" vs "synthattack")."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    # Fixed cluster geometry so every seed samples the same problem.
    shift = 0.5 * np.where(np.random.default_rng(20211).random(len(NUMERIC)) < 0.5, -1.0, 1.0)
    is_attack = rng.random(n) < 0.5
    numeric = rng.normal(size=(n, len(NUMERIC))) + np.outer(is_attack, shift)
    cats = {}
    for j, (vocab, p_norm, p_att) in _SYNTH_VOCABS.items():
        u = rng.random(n)
        cum_n, cum_a = np.cumsum(p_norm), np.cumsum(p_att)
        idx = np.where(is_attack, np.searchsorted(cum_a, u, side="right"), np.searchsorted(cum_n, u, side="right"))
        cats[j] = [vocab[min(k, len(vocab) - 1)] for k in idx]
    records = []
    for i in range(n):
        feats = []
        col = 0
        for j in range(N_FEATURES):
            if j in cats:
                feats.append(cats[j][i])
            else:
                feats.append(f"{numeric[i, col]:.6f}")
                col += 1
        label = "synthattack" if is_attack[i] else "normal"
        records.append(RawRecord(tuple(feats), label, 21))
    return RawDataset(tuple(records))


def prepare(raw: RawDataset, spec: SplitSpec) -> tuple[Preprocessor, dict[str, Dataset]]:
    """Split raw records, fit the preprocessor on Training A and transform every partition."""
    parts = split_raw(raw, spec)
    prep = fit_preprocessor(parts["train_a"])
    return prep, {k: transform(prep, v) for k, v in parts.items()}
