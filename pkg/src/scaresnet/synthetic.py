"""Synthetic tiny-object dataset: thin dark line segments on textured backgrounds.

Images keep their generated size; nothing downstream resizes them. Every
sample draws from its own child seed, so the dataset is byte-identical
whatever the worker count.
"""

import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from scaresnet.errors import ValidationError
from scaresnet.tensor import Tensor, load_tensor, read_meta, save_tensor

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.json"
SAMPLES_DIR = "samples"

LINE_LENGTH = (8.0, 20.0)
LINE_THICKNESS = (2.0, 3.0)
LINE_LEVEL = (0.05, 0.15)
BACKGROUND_LEVEL = (0.55, 0.8)
CLUTTER_BLOBS = (1, 4)

PathLike = Union[str, Path]
BBox = Tuple[int, int, int, int]


@dataclass
class SyntheticSample:
    """One image (3 x H x W, values in [0, 1]) and its label."""

    image: Tensor
    label: int
    index: int
    seed: int
    bbox: Optional[BBox] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def size(self) -> Tuple[int, int]:
        return self.image.shape[1], self.image.shape[2]


def _background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Bright base level, low-frequency shading, pixel noise and soft blobs."""
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    gray = np.full((height, width), rng.uniform(*BACKGROUND_LEVEL))
    for _ in range(3):
        fy, fx = rng.uniform(0.01, 0.06, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        gray += 0.04 * np.sin(2 * np.pi * (fy * rows + fx * cols) + phase)
    for _ in range(rng.integers(CLUTTER_BLOBS[0], CLUTTER_BLOBS[1] + 1)):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        sigma = rng.uniform(3.0, 6.0)
        amp = rng.uniform(-0.08, 0.08)
        gray += amp * np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2 * sigma**2))
    gray += rng.normal(0.0, 0.02, size=(height, width))
    tint = rng.uniform(-0.03, 0.03, size=(3, 1, 1))
    return gray[None, :, :] + tint


def _line_mask(
    rng: np.random.Generator, height: int, width: int
) -> Tuple[np.ndarray, BBox]:
    """Rasterize a segment by projecting pixel centres on its direction and normal."""
    length = rng.uniform(*LINE_LENGTH)
    thickness = rng.uniform(*LINE_THICKNESS)
    angle = rng.uniform(0.0, np.pi)
    margin = length / 2 + thickness + 1
    cy = rng.uniform(margin, height - margin)
    cx = rng.uniform(margin, width - margin)

    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    along = (cols - cx) * np.cos(angle) + (rows - cy) * np.sin(angle)
    across = -(cols - cx) * np.sin(angle) + (rows - cy) * np.cos(angle)
    mask = (np.abs(along) <= length / 2) & (np.abs(across) <= thickness / 2)

    ys, xs = np.nonzero(mask)
    bbox = (int(ys.min()), int(xs.min()), int(ys.max()), int(xs.max()))
    return mask, bbox


def make_sample(
    index: int, label: int, seed: int, entropy: np.random.SeedSequence,
    size_min: int, size_max: int,
) -> SyntheticSample:
    rng = np.random.default_rng(entropy)
    height, width = (int(v) for v in rng.integers(size_min, size_max + 1, size=2))
    image = _background(rng, height, width)
    bbox = None
    if label:
        mask, bbox = _line_mask(rng, height, width)
        level = rng.uniform(*LINE_LEVEL)
        image[:, mask] = level + rng.normal(0.0, 0.01, size=(3, int(mask.sum())))
    image = np.clip(image, 0.0, 1.0).astype(np.float32)
    meta = {
        "index": index,
        "label": int(label),
        "seed": seed,
        "size": [height, width],
        "bbox": list(bbox) if bbox is not None else None,
    }
    return SyntheticSample(Tensor(image), int(label), index, seed, bbox, meta)


def line_contrast_ok(image: np.ndarray, bbox: BBox, ring: int = 4) -> bool:
    """True when the box holds pixels darker than the mean of a ring around it."""
    gray = np.asarray(image, dtype=np.float64).mean(axis=0)
    top, left, bottom, right = bbox
    height, width = gray.shape
    r0, c0 = max(0, top - ring), max(0, left - ring)
    r1, c1 = min(height, bottom + ring + 1), min(width, right + ring + 1)
    outer = np.zeros_like(gray, dtype=bool)
    outer[r0:r1, c0:c1] = True
    outer[top : bottom + 1, left : right + 1] = False
    if not outer.any():
        return False
    local_mean = gray[outer].mean()
    return bool(gray[top : bottom + 1, left : right + 1].min() < local_mean)


def sample_dir(root: Path, index: int) -> Path:
    return root / SAMPLES_DIR / f"{index:04d}"


def gen_synthetic(
    n: int,
    size_min: int,
    size_max: int,
    seed: int,
    out_dir: PathLike,
    workers: int = 1,
    minimum: Optional[int] = None,
) -> Path:
    """Write ``n`` balanced samples under ``out_dir`` and return the directory.

    ``minimum`` is the smallest accepted image side (the backbone minimum);
    ``size_min`` below it is rejected.
    """
    if n < 2:
        raise ValidationError(f"need at least 2 samples, got {n}")
    if size_min > size_max:
        raise ValidationError(f"size_min {size_min} exceeds size_max {size_max}")
    if minimum is not None and size_min < minimum:
        raise ValidationError(
            f"size_min {size_min} is below the backbone minimum input {minimum}"
        )
    if size_min < 2 * (LINE_LENGTH[1] / 2 + LINE_THICKNESS[1] + 1):
        raise ValidationError(f"size_min {size_min} cannot fit a line segment")
    if workers < 1:
        raise ValidationError(f"workers must be >= 1, got {workers}")

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    # samples from an earlier, larger run would otherwise survive
    stale = root / SAMPLES_DIR
    if stale.exists():
        logger.info(f"Removing previous samples under {stale}")
        shutil.rmtree(stale)

    sequence = np.random.SeedSequence(seed)
    label_rng = np.random.default_rng(sequence.spawn(1)[0])
    labels = np.array([1] * (n // 2) + [0] * (n - n // 2))
    label_rng.shuffle(labels)
    children = sequence.spawn(n)

    def write(index: int) -> Dict[str, Any]:
        sample = make_sample(
            index, int(labels[index]), seed, children[index], size_min, size_max
        )
        save_tensor(sample.image, sample_dir(root, index), extra_meta=sample.meta)
        return {"id": f"{index:04d}", "label": sample.label, "size": sample.meta["size"]}

    if workers == 1:
        entries = [write(i) for i in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(write, range(n)))

    manifest = {
        "n": n,
        "size_min": size_min,
        "size_max": size_max,
        "seed": seed,
        "positives": int(labels.sum()),
        "samples": entries,
    }
    (root / DATASET_FILE).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    logger.info(f"Generated {n} samples ({manifest['positives']} positive) in {root}")
    return root


def read_manifest(root: PathLike) -> Dict[str, Any]:
    path = Path(root) / DATASET_FILE
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read dataset manifest at {path}: {e}") from e


def load_dataset(root: PathLike) -> List[SyntheticSample]:
    """Load every sample listed in ``dataset.json``."""
    root = Path(root)
    manifest = read_manifest(root)
    samples = []
    for entry in manifest["samples"]:
        index = int(entry["id"])
        directory = sample_dir(root, index)
        meta = read_meta(directory)
        bbox = tuple(meta["bbox"]) if meta.get("bbox") is not None else None
        samples.append(
            SyntheticSample(
                image=load_tensor(directory),
                label=int(meta["label"]),
                index=index,
                seed=int(meta["seed"]),
                bbox=bbox,
                meta=meta,
            )
        )
    if len(samples) < 2:
        raise ValidationError(f"dataset at {root} holds {len(samples)} samples, need 2")
    return samples
