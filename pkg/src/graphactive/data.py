"""Built-in datasets: the synthetic checkerboard and MNIST (IDX files).

Datasets carry features, +-1 ground truth, and 2-D display coordinates for
the annotation UI (the features themselves for the checkerboard, a fixed
principal-component projection for MNIST).
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IdxFormatError, InvalidParameterError
from .graphs import validate_features
from .models import LabeledSet

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with binary ground truth and optional 2-D display coords."""

    features: np.ndarray
    ground_truth: np.ndarray
    name: str
    display_coords: np.ndarray | None = None

    def __post_init__(self):
        X = validate_features(self.features)
        y = np.asarray(self.ground_truth, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise InvalidParameterError("ground_truth length must equal N")
        if not np.all(np.isin(y, (-1, 1))):
            raise InvalidParameterError("ground_truth labels must be -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "ground_truth", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]


def checkerboard_label(points: np.ndarray, grid: int) -> np.ndarray:
    """+1 on even cells of a grid x grid checkerboard, -1 on odd ones.

    Coordinates equal to 1.0 are clamped into the last cell.
    """
    cells = np.floor(points * grid).astype(np.int64)
    cells = np.minimum(cells, grid - 1)
    parity = (cells[:, 0] + cells[:, 1]) % 2
    return np.where(parity == 0, 1, -1)


def checkerboard(n: int = 2000, grid: int = 4, seed: int = 0) -> Dataset:
    """n points uniform on the unit square, labeled by checkerboard parity."""
    if n < 2:
        raise InvalidParameterError(f"need n >= 2, got {n}")
    if grid < 1:
        raise InvalidParameterError(f"need grid >= 1, got {grid}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, 2))
    y = checkerboard_label(X, grid)
    return Dataset(features=X, ground_truth=y, name="checkerboard", display_coords=X)


def _read_exact(f, count: int, offset: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise IdxFormatError(
            f"truncated IDX file: wanted {count} bytes of {what} at offset "
            f"{offset}, got {len(data)}"
        )
    return data


def _open_maybe_gzip(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, magic: int, ndim: int, what: str) -> np.ndarray:
    with _open_maybe_gzip(path) as f:
        header = _read_exact(f, 4, 0, "magic number")
        (got,) = struct.unpack(">i", header)
        if got != magic:
            raise IdxFormatError(
                f"bad magic number in {what} file at offset 0: expected "
                f"{magic:#010x}, got {got:#010x}"
            )
        dims = []
        for i in range(ndim):
            offset = 4 + 4 * i
            (dim,) = struct.unpack(">i", _read_exact(f, 4, offset, "dimension header"))
            if dim < 0:
                raise IdxFormatError(f"negative dimension at offset {offset}")
            dims.append(dim)
        payload_offset = 4 + 4 * ndim
        count = int(np.prod(dims)) if dims else 0
        raw = _read_exact(f, count, payload_offset, f"{what} payload")
        extra = f.read(1)
        if extra:
            raise IdxFormatError(
                f"trailing bytes in {what} file at offset {payload_offset + count}"
            )
    return np.frombuffer(raw, dtype=np.uint8).reshape(dims)


def mnist_load(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Read IDX image/label files into flat [0,1] vectors and digit labels.

    Accepts plain or .gz files. Pixels are scaled from [0,255] to [0,1] and
    each image flattened to a vector.
    """
    images = _read_idx(images_path, IMAGE_MAGIC, 3, "image")
    labels = _read_idx(labels_path, LABEL_MAGIC, 1, "label")
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image/label count mismatch at offset 4: {images.shape[0]} images "
            f"vs {labels.shape[0]} labels"
        )
    flat = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return flat, labels.astype(np.int64)


def find_idx_pair(directory, stem: str) -> tuple[Path, Path] | None:
    """Locate <stem>-images-idx3-ubyte / <stem>-labels-idx1-ubyte (optionally .gz)."""
    directory = Path(directory)
    pair = []
    for kind in ("images-idx3-ubyte", "labels-idx1-ubyte"):
        hits = [p for p in (directory / f"{stem}-{kind}", directory / f"{stem}-{kind}.gz") if p.exists()]
        if not hits:
            return None
        pair.append(hits[0])
    return pair[0], pair[1]


def mnist_load_dir(directory) -> tuple[np.ndarray, np.ndarray]:
    """Load and concatenate every standard IDX pair found in a directory.

    Both the train and t10k pairs are used when present (the subsampling
    step draws from their union); at least one pair must exist.
    """
    parts = []
    for stem in ("train", "t10k"):
        pair = find_idx_pair(directory, stem)
        if pair is not None:
            parts.append(mnist_load(*pair))
    if not parts:
        raise InvalidParameterError(
            f"no IDX files found in {directory} (expected train-/t10k- images and labels)"
        )
    images = np.concatenate([p[0] for p in parts])
    digits = np.concatenate([p[1] for p in parts])
    return images, digits


def _pca_2d(X: np.ndarray) -> np.ndarray:
    """Deterministic two-component principal projection for display."""
    centered = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2]
    # Fix the sign convention so the projection is reproducible.
    for i in range(comps.shape[0]):
        j = np.argmax(np.abs(comps[i]))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return centered @ comps.T


def mnist_subset(
    images: np.ndarray, digits: np.ndarray, per_digit: int = 400, seed: int = 0
) -> Dataset:
    """Class-balanced subsample with even-vs-odd binary ground truth."""
    if per_digit < 1:
        raise InvalidParameterError(f"per_digit must be >= 1, got {per_digit}")
    rng = np.random.default_rng(seed)
    chosen = []
    for digit in range(10):
        pool = np.flatnonzero(digits == digit)
        if len(pool) < per_digit:
            raise InvalidParameterError(
                f"digit {digit} has only {len(pool)} images, need {per_digit}"
            )
        chosen.append(rng.choice(pool, size=per_digit, replace=False))
    idx = np.concatenate(chosen)
    X = images[idx]
    y = np.where(digits[idx] % 2 == 0, 1, -1)
    return Dataset(
        features=X,
        ground_truth=y,
        name="mnist",
        display_coords=_pca_2d(X),
    )


def initial_labels(ds: Dataset, per_class: int, seed: int = 0) -> LabeledSet:
    """per_class nodes drawn uniformly from each ground-truth class."""
    if per_class < 0:
        raise InvalidParameterError("per_class must be nonnegative")
    if per_class == 0:
        return LabeledSet.empty()
    rng = np.random.default_rng(seed)
    picks = []
    for cls in (1, -1):
        pool = np.flatnonzero(ds.ground_truth == cls)
        if len(pool) < per_class:
            raise InvalidParameterError(
                f"class {cls:+d} has only {len(pool)} nodes, need {per_class}"
            )
        picks.append(rng.choice(pool, size=per_class, replace=False))
    idx = np.concatenate(picks)
    return LabeledSet(idx, ds.ground_truth[idx])


def export_csv(ds: Dataset, path) -> None:
    """Columnar snapshot: index, label, then feature columns (or x,y)."""
    d = ds.features.shape[1]
    cols = ["x", "y"] if d == 2 else [f"f{i}" for i in range(d)]
    with open(path, "w") as f:
        f.write("index,label," + ",".join(cols) + "\n")
        for i in range(ds.n):
            feats = ",".join(f"{v:.17g}" for v in ds.features[i])
            f.write(f"{i},{ds.ground_truth[i]},{feats}\n")
