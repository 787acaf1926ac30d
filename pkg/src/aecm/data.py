"""Dataset ingestion (CSV, IDX images) and synthetic benchmark generators."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .tensor import make_rng


class DataError(Exception):
    """Base class for ingestion failures."""


class CsvFormatError(DataError):
    pass


class IdxFormatError(DataError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""
    k_true: int | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


# Five bivariate Gaussian components on a radius-4 pentagon; adjacent means
# are 2*4*sin(36 deg) ~ 4.70 apart, above 6 sigma, and the origin is empty.
FIVE_GAUSSIANS_MEANS = 4.0 * np.column_stack(
    [
        np.cos(2.0 * np.pi * np.arange(5) / 5 + np.pi / 2),
        np.sin(2.0 * np.pi * np.arange(5) / 5 + np.pi / 2),
    ]
)
FIVE_GAUSSIANS_STD = 0.75

# Centers shared by the blob-family toys; pairwise distances 10 to 12.2.
BLOB_CENTERS = np.array([[-6.0, -4.0], [0.0, 6.0], [6.0, -2.0]])
VARIED_STDS = np.array([1.0, 2.5, 0.5])
ANISO_SHEAR = np.array([[0.6, -0.6], [-0.4, 0.8]])

TOY_KINDS = ("moons", "circles", "blobs", "varied", "aniso", "no_structure")


def _relabel(values: np.ndarray) -> tuple[np.ndarray, int]:
    uniq, inverse = np.unique(values, return_inverse=True)
    return inverse.astype(np.int64), len(uniq)


def load_csv(path, has_header: bool = False, label_column: int | None = None) -> Dataset:
    """Parse a rectangular numeric CSV into features and optional labels.

    ``label_column`` is a 0-based column index; that column is removed from
    the features and mapped to integer labels in [0, k_true).
    """
    rows: list[list[float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        width = None
        for line_no, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if has_header and line_no == 1:
                width = len(cells)
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise CsvFormatError(
                    f"{path}: ragged row {line_no}: expected {width} fields, got {len(cells)}"
                )
            parsed = []
            for col, cell in enumerate(cells):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: non-numeric cell at row {line_no}, column {col}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.float64)
    labels = None
    k_true = None
    if label_column is not None:
        if not 0 <= label_column < table.shape[1]:
            raise CsvFormatError(
                f"{path}: label column {label_column} out of range for width {table.shape[1]}"
            )
        raw = table[:, label_column]
        if np.any(np.abs(raw - np.round(raw)) > 0):
            raise CsvFormatError(f"{path}: label column {label_column} has non-integer values")
        labels, k_true = _relabel(np.round(raw).astype(np.int64))
        table = np.delete(table, label_column, axis=1)
    return Dataset(features=table, labels=labels, name=str(path), k_true=k_true)


def save_csv(path, features: np.ndarray, labels: np.ndarray | None = None) -> None:
    """Write features (plus an optional trailing integer label column) so that
    a reload reproduces the exact float64 values."""
    features = np.asarray(features, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for i in range(features.shape[0]):
            cells = [repr(float(v)) for v in features[i]]
            if labels is not None:
                cells.append(str(int(labels[i])))
            fh.write(",".join(cells) + "\n")


def load_idx(images_path, labels_path) -> Dataset:
    """Load the big-endian IDX image/label pair format; pixels scaled to [0, 1]."""
    with open(images_path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise IdxFormatError(f"{images_path}: truncated header")
        magic, count, height, width = struct.unpack(">IIII", header)
        if magic != 2051:
            raise IdxFormatError(f"{images_path}: bad magic {magic}, expected 2051")
        payload = fh.read()
    expected = count * height * width
    if len(payload) != expected:
        raise IdxFormatError(
            f"{images_path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    features = pixels.reshape(count, height * width)

    with open(labels_path, "rb") as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise IdxFormatError(f"{labels_path}: truncated header")
        magic, label_count = struct.unpack(">II", header)
        if magic != 2049:
            raise IdxFormatError(f"{labels_path}: bad magic {magic}, expected 2049")
        label_payload = fh.read()
    if len(label_payload) != label_count:
        raise IdxFormatError(
            f"{labels_path}: payload holds {len(label_payload)} bytes, header implies {label_count}"
        )
    if label_count != count:
        raise IdxFormatError(
            f"image/label count mismatch: {count} images vs {label_count} labels"
        )
    labels, k_true = _relabel(np.frombuffer(label_payload, dtype=np.uint8))
    return Dataset(features=features, labels=labels, name=str(images_path), k_true=k_true)


def gen_five_gaussians(n: int, seed: int) -> Dataset:
    """Mixture of five separated bivariate Gaussians with round-robin labels."""
    if n < 5:
        raise ValueError("need at least 5 points")
    rng = make_rng(seed)
    components = np.arange(n) % 5
    features = FIVE_GAUSSIANS_MEANS[components] + FIVE_GAUSSIANS_STD * rng.standard_normal((n, 2))
    return Dataset(features=features, labels=components.astype(np.int64),
                   name="five-gaussians", k_true=5)


def gen_toy(kind: str, n: int, noise: float | None = None, seed: int = 0) -> Dataset:
    """Standard 2-D toy constructions used for nonlinear clustering demos."""
    if kind not in TOY_KINDS:
        raise ValueError(f"unknown toy kind {kind!r}")
    if n < 2:
        raise ValueError("need at least 2 points")
    rng = make_rng(seed)

    if kind == "moons":
        sigma = 0.05 if noise is None else noise
        n_out = n // 2
        n_in = n - n_out
        t_out = np.linspace(0.0, np.pi, n_out)
        t_in = np.linspace(0.0, np.pi, n_in)
        pts = np.vstack(
            [
                np.column_stack([np.cos(t_out), np.sin(t_out)]),
                np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)]),
            ]
        )
        pts += sigma * rng.standard_normal(pts.shape)
        labels = np.concatenate([np.zeros(n_out), np.ones(n_in)]).astype(np.int64)
        return Dataset(pts, labels, "moons", 2)

    if kind == "circles":
        sigma = 0.05 if noise is None else noise
        n_out = n // 2
        n_in = n - n_out
        t_out = np.linspace(0.0, 2.0 * np.pi, n_out, endpoint=False)
        t_in = np.linspace(0.0, 2.0 * np.pi, n_in, endpoint=False)
        pts = np.vstack(
            [
                np.column_stack([np.cos(t_out), np.sin(t_out)]),
                0.5 * np.column_stack([np.cos(t_in), np.sin(t_in)]),
            ]
        )
        pts += sigma * rng.standard_normal(pts.shape)
        labels = np.concatenate([np.zeros(n_out), np.ones(n_in)]).astype(np.int64)
        return Dataset(pts, labels, "circles", 2)

    if kind == "no_structure":
        pts = rng.random((n, 2))
        return Dataset(pts, np.zeros(n, dtype=np.int64), "no_structure", 1)

    # blob family: round-robin component labels
    components = np.arange(n) % 3
    if kind == "varied":
        stds = VARIED_STDS[components][:, None]
    else:
        stds = 1.0 if noise is None else noise
    pts = BLOB_CENTERS[components] + stds * rng.standard_normal((n, 2))
    if kind == "aniso":
        pts = pts @ ANISO_SHEAR
    return Dataset(pts, components.astype(np.int64), kind, 3)


def minmax_normalize(x: np.ndarray) -> np.ndarray:
    """Map each column to [0, 1]; constant columns map to 0."""
    x = np.asarray(x, dtype=np.float64)
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    safe = np.where(span < 1e-12, 1.0, span)
    out = (x - lo) / safe
    return np.where(span < 1e-12, 0.0, out)
