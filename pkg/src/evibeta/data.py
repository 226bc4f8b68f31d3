"""Synthetic dataset generation, group-aware splitting and CSV persistence.

The generator produces two isotropic unit-variance Gaussian clusters whose
mean distance controls the aleatoric overlap, with optional independent
label flips (noise_flag records the ground truth of each flip). A probe
generator places a cluster away from the training support to exercise
distribution-shift behavior.

CSV schema: header `id,group,label,noise_flag,f0,...,f{D-1}`; group and
noise_flag cells may be empty; UTF-8, LF line endings, floats written with
17 significant digits so round trips are lossless.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Sample",
    "Dataset",
    "DatasetFormatError",
    "gen_gaussian_overlap",
    "gen_ood_probe",
    "split_by_group",
    "load_csv",
    "save_csv",
]


class DatasetFormatError(ValueError):
    """Malformed dataset file; message carries the offending line number."""


@dataclass
class Sample:
    id: int
    features: np.ndarray
    label: int
    group: int | None = None
    noise_flag: int | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"sample {self.id}: features must be finite")
        if self.label not in (0, 1):
            raise ValueError(f"sample {self.id}: label must be 0 or 1")


@dataclass
class Dataset:
    samples: list[Sample]
    feature_dim: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.samples:
            raise ValueError("dataset must be nonempty")
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ValueError("sample ids must be unique")
        for s in self.samples:
            if s.features.shape != (self.feature_dim,):
                raise ValueError(
                    f"sample {s.id}: expected {self.feature_dim} features, got {s.features.shape}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def features_matrix(self) -> np.ndarray:
        return np.stack([s.features for s in self.samples])

    def labels_array(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    def noise_flags(self) -> np.ndarray:
        """Flip markers as 0/1; samples without a flag count as clean."""
        return np.array([s.noise_flag or 0 for s in self.samples], dtype=int)

    def subset(self, indices) -> "Dataset":
        picked = [self.samples[int(i)] for i in indices]
        return Dataset(samples=picked, feature_dim=self.feature_dim, provenance=self.provenance)

    def subset_by_ids(self, ids) -> "Dataset":
        wanted = set(int(i) for i in ids)
        picked = [s for s in self.samples if s.id in wanted]
        return Dataset(samples=picked, feature_dim=self.feature_dim, provenance=self.provenance)


def gen_gaussian_overlap(
    n: int, dim: int, separation: float, flip_rate: float, seed: int
) -> Dataset:
    """Two balanced unit-variance Gaussian clusters at mean distance `separation`.

    Cluster centers sit at +/- separation/2 along the first feature axis.
    Each label is flipped independently with probability flip_rate and the
    flip recorded in noise_flag.
    """
    if n < 4:
        raise ValueError("need at least 2 samples per class")
    if not 0.0 <= flip_rate < 0.5:
        raise ValueError("flip_rate must be in [0, 0.5)")
    if dim < 1:
        raise ValueError("dim must be >= 1")

    rng = np.random.default_rng(seed)
    n_pos = n // 2
    labels = np.concatenate([np.ones(n_pos, dtype=int), np.zeros(n - n_pos, dtype=int)])
    centers = np.zeros((n, dim))
    centers[:, 0] = np.where(labels == 1, separation / 2.0, -separation / 2.0)
    features = centers + rng.standard_normal((n, dim))

    flips = rng.random(n) < flip_rate
    observed = np.where(flips, 1 - labels, labels)
    order = rng.permutation(n)

    samples = [
        Sample(
            id=i,
            features=features[j],
            label=int(observed[j]),
            noise_flag=int(flips[j]),
        )
        for i, j in enumerate(order)
    ]
    provenance = {
        "generator": "gaussian_overlap",
        "n": n,
        "dim": dim,
        "separation": separation,
        "flip_rate": flip_rate,
        "seed": seed,
    }
    return Dataset(samples=samples, feature_dim=dim, provenance=provenance)


def gen_ood_probe(base: Dataset, offset_sigmas: float, n: int, seed: int) -> Dataset:
    """Unit-variance probe cluster displaced from the midpoint of `base`.

    The displacement is along the second feature axis (orthogonal to the
    class axis) when dim >= 2, else along the only axis. Labels are set to 0;
    probe evaluation only uses the uncertainty.
    """
    if base.provenance.get("generator") != "gaussian_overlap":
        raise ValueError("probe requires a gaussian_overlap base dataset")
    dim = base.feature_dim
    rng = np.random.default_rng(seed)
    center = np.zeros(dim)
    center[1 if dim >= 2 else 0] = offset_sigmas
    features = center + rng.standard_normal((n, dim))
    samples = [Sample(id=i, features=features[i], label=0) for i in range(n)]
    provenance = {
        "generator": "ood_probe",
        "base": base.provenance,
        "offset_sigmas": offset_sigmas,
        "n": n,
        "seed": seed,
    }
    return Dataset(samples=samples, feature_dim=dim, provenance=provenance)


def split_by_group(
    d: Dataset, fractions: tuple[float, float, float], seed: int
) -> tuple[Dataset | None, Dataset | None, Dataset | None]:
    """Partition into (train, val, test) with no group spanning two splits.

    Samples without a group id form singleton groups. Fractions must sum to
    1; a zero fraction yields None for that split. Groups are shuffled and
    assigned greedily by cumulative sample count.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    if any(f < 0 for f in fractions):
        raise ValueError("fractions must be nonnegative")

    groups: dict[int, list[int]] = {}
    for i, s in enumerate(d.samples):
        key = s.group if s.group is not None else -1 - s.id
        groups.setdefault(key, []).append(i)

    n_splits = sum(1 for f in fractions if f > 0)
    if len(groups) < n_splits:
        raise ValueError(f"cannot partition {len(groups)} group(s) into {n_splits} splits")

    keys = sorted(groups)
    rng = np.random.default_rng(seed)
    rng.shuffle(keys)

    n = len(d.samples)
    targets = [f * n for f in fractions]
    buckets: list[list[int]] = [[], [], []]
    counts = [0, 0, 0]
    for key in keys:
        members = groups[key]
        # Most-underfilled split relative to its target gets the next group.
        deficits = [
            (targets[k] - counts[k]) / targets[k] if targets[k] > 0 else -np.inf
            for k in range(3)
        ]
        k = int(np.argmax(deficits))
        buckets[k].extend(members)
        counts[k] += len(members)

    out: list[Dataset | None] = []
    for k, frac in enumerate(fractions):
        if frac == 0:
            out.append(None)
        else:
            if not buckets[k]:
                raise ValueError(f"split {k} received no samples; adjust fractions")
            out.append(d.subset(sorted(buckets[k])))
    return out[0], out[1], out[2]


def save_csv(d: Dataset, path: str | Path) -> None:
    """Write the dataset in the documented CSV schema (lossless floats)."""
    header = ["id", "group", "label", "noise_flag"] + [f"f{i}" for i in range(d.feature_dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for s in d.samples:
            row = [
                s.id,
                "" if s.group is None else s.group,
                s.label,
                "" if s.noise_flag is None else s.noise_flag,
            ] + [f"{v:.17g}" for v in s.features]
            writer.writerow(row)


def load_csv(path: str | Path) -> Dataset:
    """Read a dataset written by `save_csv`, verifying the schema."""
    path = Path(path)
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: line 1: empty file") from None

        fixed = ["id", "group", "label", "noise_flag"]
        if header[: len(fixed)] != fixed:
            missing = [c for c in fixed if c not in header]
            what = f"missing column(s) {missing}" if missing else f"got {header[:4]}"
            raise DatasetFormatError(f"{path}: line 1: malformed header, {what}")
        feature_cols = header[len(fixed) :]
        expected = [f"f{i}" for i in range(len(feature_cols))]
        if feature_cols != expected or not feature_cols:
            raise DatasetFormatError(
                f"{path}: line 1: malformed header, feature columns must be f0..f{{D-1}}"
            )
        dim = len(feature_cols)

        samples: list[Sample] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}"
                )
            try:
                sid = int(row[0])
                group = int(row[1]) if row[1] != "" else None
                label = int(row[2])
                noise = int(row[3]) if row[3] != "" else None
                feats = np.array([float(v) for v in row[4:]])
            except ValueError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: non-numeric cell ({exc})") from None
            try:
                samples.append(Sample(id=sid, features=feats, label=label, group=group, noise_flag=noise))
            except ValueError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from None

    if not samples:
        raise DatasetFormatError(f"{path}: line 2: no data rows")
    return Dataset(samples=samples, feature_dim=dim, provenance={"file": str(path)})
