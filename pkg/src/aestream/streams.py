"""Seeded data streams with abrupt drift: Sea, Circle and two MNIST variants.

Labels are 1 for the anomalous (minority) class and 0 for normal. Detectors
never see them; they exist for the evaluator.
"""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

DATASETS = ("sea", "circle", "mnist01", "mnist23")

SEA_BOUNDARY = 7.0
SEA_SCALE = 10.0
CIRCLE_CENTER = (0.4, 0.5)
CIRCLE_RADIUS = 0.2

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
MNIST_SIDE = 28
MNIST_SHIFT = round(0.10 * MNIST_SIDE)

PRETRAIN_SIZE = 2000

# Which geometric class is the anomaly before the drift. After the drift the
# two classes swap. See README for why Sea uses the negative side.
DEFAULT_ANOMALY_SIDE = {"sea": "negative", "circle": "positive"}


class IngestionError(ValueError):
    """Malformed or unreadable external data file."""


@dataclass(frozen=True)
class LabeledInstance:
    x: np.ndarray
    y: int


@dataclass(frozen=True)
class StreamSpec:
    dataset: str = "sea"
    length: int = 10000
    drift_at: int | None = 5000
    anomaly_rate: float = 0.01
    seed: int = 0
    anomaly_side: str | None = None

    def __post_init__(self) -> None:
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}; expected one of {DATASETS}")
        if self.length < 1:
            raise ValueError(f"length must be positive, got {self.length}")
        if self.drift_at is not None and not 0 < self.drift_at < self.length:
            raise ValueError(f"drift_at must lie in (0, {self.length}), got {self.drift_at}")
        if not 0 < self.anomaly_rate < 1:
            raise ValueError(f"anomaly_rate must be in (0, 1), got {self.anomaly_rate}")
        if self.anomaly_side not in (None, "positive", "negative"):
            raise ValueError(f"anomaly_side must be 'positive' or 'negative', got {self.anomaly_side!r}")

    @property
    def resolved_anomaly_side(self) -> str:
        return self.anomaly_side or DEFAULT_ANOMALY_SIDE.get(self.dataset, "positive")

    @property
    def n_features(self) -> int:
        return 2 if self.dataset in ("sea", "circle") else MNIST_SIDE * MNIST_SIDE

    def is_post_drift(self, t: np.ndarray | int) -> np.ndarray | bool:
        """Steps are 1-based; step ``drift_at + 1`` is the first drifted one."""
        if self.drift_at is None:
            return np.zeros_like(t, dtype=bool) if isinstance(t, np.ndarray) else False
        return t > self.drift_at


def sea_positive(x: np.ndarray) -> np.ndarray:
    """Sea concept on rescaled features: ``x1 + x2 <= 7`` in raw units."""
    x = np.atleast_2d(x)
    return x[:, 0] * SEA_SCALE + x[:, 1] * SEA_SCALE <= SEA_BOUNDARY


def circle_positive(x: np.ndarray) -> np.ndarray:
    """Strictly inside the circle; the boundary counts as outside."""
    x = np.atleast_2d(x)
    d2 = (x[:, 0] - CIRCLE_CENTER[0]) ** 2 + (x[:, 1] - CIRCLE_CENTER[1]) ** 2
    return d2 < CIRCLE_RADIUS**2


PREDICATES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sea": sea_positive,
    "circle": circle_positive,
}


def _rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    stream_ss, pool_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(stream_ss), np.random.default_rng(pool_ss)


def _sample_region(rng: np.random.Generator, predicate, want_positive: bool, n: int) -> np.ndarray:
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        cand = rng.uniform(0.0, 1.0, size=(max(2 * (n - filled), 64), 2))
        keep = cand[predicate(cand) == want_positive][: n - filled]
        out[filled:filled + len(keep)] = keep
        filled += len(keep)
    return out


def anomaly_is_positive(spec: StreamSpec, t) -> np.ndarray | bool:
    """Whether the geometric positive region is the anomalous class at step ``t``."""
    pre = spec.resolved_anomaly_side == "positive"
    post = spec.is_post_drift(t)
    return np.logical_xor(pre, post)


def label_synthetic(spec: StreamSpec, x: np.ndarray, t) -> np.ndarray:
    """Ground-truth labels from the geometric predicate, for checking streams."""
    pos = PREDICATES[spec.dataset](x)
    return (pos == anomaly_is_positive(spec, np.asarray(t))).astype(np.int64)


def _gen_synthetic(spec: StreamSpec) -> tuple[np.ndarray, np.ndarray]:
    rng, _ = _rngs(spec.seed)
    predicate = PREDICATES[spec.dataset]
    t = np.arange(1, spec.length + 1)
    y = (rng.random(spec.length) < spec.anomaly_rate).astype(np.int64)
    want_pos = (y == 1) == anomaly_is_positive(spec, t)
    x = np.empty((spec.length, 2))
    for flag in (True, False):
        mask = want_pos == flag
        x[mask] = _sample_region(rng, predicate, flag, int(mask.sum()))
    return x, y


def gen_sea(spec: StreamSpec) -> Iterator[LabeledInstance]:
    if spec.dataset != "sea":
        raise ValueError("gen_sea needs a sea StreamSpec")
    x, y = _gen_synthetic(spec)
    for xi, yi in zip(x, y):
        yield LabeledInstance(xi, int(yi))


def gen_circle(spec: StreamSpec) -> Iterator[LabeledInstance]:
    if spec.dataset != "circle":
        raise ValueError("gen_circle needs a circle StreamSpec")
    x, y = _gen_synthetic(spec)
    for xi, yi in zip(x, y):
        yield LabeledInstance(xi, int(yi))


# --------------------------------------------------------------------- MNIST

def _open(path: Path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    return gzip.open(path, "rb") if head == b"\x1f\x8b" else open(path, "rb")


def read_idx(path: str | Path) -> np.ndarray:
    """Read an IDX file of unsigned bytes (images or labels)."""
    path = Path(path)
    try:
        with _open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read IDX file ({exc})") from exc
    if len(raw) < 4:
        raise IngestionError(f"{path}: truncated IDX header")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic == IMAGE_MAGIC:
        ndim = 3
    elif magic == LABEL_MAGIC:
        ndim = 1
    else:
        raise IngestionError(f"{path}: bad IDX magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IngestionError(f"{path}: truncated IDX header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    expected = int(np.prod(dims))
    if len(raw) - header != expected:
        raise IngestionError(
            f"{path}: IDX dims {dims} need {expected} bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def write_idx(path: str | Path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (3-d images or 1-d labels)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = {3: IMAGE_MAGIC, 1: LABEL_MAGIC}.get(array.ndim)
    if magic is None:
        raise ValueError("IDX writer supports 1-d labels or 3-d images only")
    header = struct.pack(">I" + "I" * array.ndim, magic, *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def load_mnist(image_path, label_path) -> tuple[np.ndarray, np.ndarray]:
    images = read_idx(image_path)
    labels = read_idx(label_path)
    if images.ndim != 3:
        raise IngestionError(f"{image_path}: expected an image file")
    if labels.ndim != 1:
        raise IngestionError(f"{label_path}: expected a label file")
    if images.shape[0] != labels.shape[0]:
        raise IngestionError(
            f"{image_path}: {images.shape[0]} images but {label_path} has {labels.shape[0]} labels")
    return images, labels


def shift_image(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate a 2-d image by whole pixels with zero fill."""
    out = np.zeros_like(img)
    h, w = img.shape
    ys, yd = (slice(0, h - dy), slice(dy, h)) if dy >= 0 else (slice(-dy, h), slice(0, h + dy))
    xs, xd = (slice(0, w - dx), slice(dx, w)) if dx >= 0 else (slice(-dx, w), slice(0, w + dx))
    out[yd, xd] = img[ys, xs]
    return out


class _DigitPool:
    """Cycles through a shuffled set of image indices."""

    def __init__(self, indices: np.ndarray, rng: np.random.Generator):
        if indices.size == 0:
            raise IngestionError("MNIST data contains no images for a required digit")
        self.indices = rng.permutation(indices)
        self.rng = rng
        self.pos = 0

    def take(self) -> int:
        if self.pos == self.indices.size:
            self.indices = self.rng.permutation(self.indices)
            self.pos = 0
        i = self.indices[self.pos]
        self.pos += 1
        return int(i)


def _mnist_digits(spec: StreamSpec, post: bool) -> tuple[int, int]:
    """(normal digit, anomalous digit) for the phase."""
    if spec.dataset == "mnist23" and post:
        return 2, 3
    return 0, 1


def _split_normal_pool(labels: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split digit-0 indices into a pretraining part and a streaming part."""
    _, pool_rng = _rngs(seed)
    zeros = pool_rng.permutation(np.flatnonzero(labels == 0))
    n_pre = min(PRETRAIN_SIZE, zeros.size // 2)
    return zeros[:n_pre], zeros[n_pre:]


def mnist_arrays(spec: StreamSpec, images: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    stream_rng, _ = _rngs(spec.seed)
    _, stream_zeros = _split_normal_pool(labels, spec.seed)
    pools = {0: _DigitPool(stream_zeros, stream_rng)}
    for digit in (1, 2, 3):
        if spec.dataset == "mnist23" or digit == 1:
            pools[digit] = _DigitPool(np.flatnonzero(labels == digit), stream_rng)
    flat = images.reshape(images.shape[0], -1)
    x = np.empty((spec.length, MNIST_SIDE * MNIST_SIDE))
    y = (stream_rng.random(spec.length) < spec.anomaly_rate).astype(np.int64)
    for i in range(spec.length):
        post = bool(spec.is_post_drift(i + 1))
        normal, anomalous = _mnist_digits(spec, post)
        idx = pools[anomalous if y[i] else normal].take()
        if spec.dataset == "mnist01" and post:
            dy, dx = stream_rng.choice((-MNIST_SHIFT, MNIST_SHIFT), size=2)
            img = shift_image(images[idx], int(dy), int(dx)).ravel()
        else:
            img = flat[idx]
        x[i] = img / 255.0
    return x, y


def load_mnist_streams(spec: StreamSpec, idx_paths: tuple[str | Path, str | Path]) -> Iterator[LabeledInstance]:
    """Stream MNIST-01 or MNIST-23 from IDX ``(images, labels)`` files."""
    if spec.dataset not in ("mnist01", "mnist23"):
        raise ValueError("load_mnist_streams needs an mnist StreamSpec")
    images, labels = load_mnist(*idx_paths)
    x, y = mnist_arrays(spec, images, labels)
    for xi, yi in zip(x, y):
        yield LabeledInstance(xi, int(yi))


# ----------------------------------------------------------------- front door

@dataclass
class Stream:
    """A fully materialised labelled stream plus its pretraining pool."""

    spec: StreamSpec
    x: np.ndarray
    y: np.ndarray
    pool: np.ndarray = field(repr=False)

    def __iter__(self) -> Iterator[LabeledInstance]:
        for xi, yi in zip(self.x, self.y):
            yield LabeledInstance(xi, int(yi))

    def __len__(self) -> int:
        return self.y.size


def pretrain_pool(spec: StreamSpec, idx_paths=None, size: int = PRETRAIN_SIZE) -> np.ndarray:
    """Normal-class, pre-drift instances drawn independently of the stream."""
    if spec.dataset in PREDICATES:
        _, pool_rng = _rngs(spec.seed)
        normal_positive = spec.resolved_anomaly_side != "positive"
        return _sample_region(pool_rng, PREDICATES[spec.dataset], normal_positive, size)
    if idx_paths is None:
        raise ValueError(f"{spec.dataset} needs IDX paths")
    images, labels = load_mnist(*idx_paths)
    pre_idx, _ = _split_normal_pool(labels, spec.seed)
    return images[pre_idx[:size]].reshape(-1, MNIST_SIDE * MNIST_SIDE) / 255.0


def make_stream(spec: StreamSpec, idx_paths=None) -> Stream:
    if spec.dataset in PREDICATES:
        x, y = _gen_synthetic(spec)
        return Stream(spec, x, y, pretrain_pool(spec))
    if idx_paths is None:
        raise ValueError(f"{spec.dataset} needs IDX paths (images, labels)")
    images, labels = load_mnist(*idx_paths)
    x, y = mnist_arrays(spec, images, labels)
    pre_idx, _ = _split_normal_pool(labels, spec.seed)
    pool = images[pre_idx].reshape(-1, MNIST_SIDE * MNIST_SIDE) / 255.0
    return Stream(spec, x, y, pool)


# ----------------------------------------------------------------------- CSV

def write_stream_csv(path: str | Path, x: np.ndarray, y: np.ndarray | None = None) -> None:
    """Write ``x_0..x_{d-1},y``; ``y`` defaults to 0 (e.g. a pretraining pool)."""
    x = np.atleast_2d(x)
    y = np.zeros(x.shape[0], dtype=np.int64) if y is None else np.asarray(y)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i}" for i in range(x.shape[1])] + ["y"])
        for xi, yi in zip(x, y):
            w.writerow([repr(float(v)) for v in xi] + [int(yi)])


def read_stream_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "y" or any(h != f"x_{i}" for i, h in enumerate(header[:-1])):
            raise IngestionError(f"{path}: expected header x_0,...,x_(d-1),y")
        rows = [r for r in reader if r]
    if not rows:
        return np.empty((0, len(header) - 1)), np.empty(0, dtype=np.int64)
    arr = np.array(rows, dtype=np.float64)
    return arr[:, :-1], arr[:, -1].astype(np.int64)
