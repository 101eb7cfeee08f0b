"""Synthetic two-world road scene generator with exact steering labels.

Two visually distinct "worlds" (A and B) stand in for a target and a novel
driving dataset.  Scenes are 60x160 grayscale: a road whose lane edges
follow a quadratic horizontal displacement controlled by a curvature and a
lateral offset, drawn over a world-specific striped background with
low-amplitude seeded texture noise.  The steering label is a fixed linear
function of curvature and offset, so labels are noiseless and the edge
geometry of every scene is known exactly.
"""

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as nvio
from .errors import DataError

__all__ = [
    "WorldSpec",
    "world_spec",
    "steering_angle",
    "edge_centers",
    "edge_band",
    "gen_scene",
    "scene_params",
    "gen_dataset",
]

SCENE_SHAPE = (60, 160)
MAX_CURVATURE = 0.01  # 1/pixels
MAX_OFFSET = 0.4  # fraction of a quarter image width per unit

# Label map: angle = K_STEER * curvature + K_OFFSET * offset (radians).
K_STEER = 50.0
K_OFFSET = 0.5

# Sampling ranges used by `gen_dataset`.
CURVATURE_RANGE = 0.008
OFFSET_RANGE = 0.3


@dataclass(frozen=True)
class WorldSpec:
    """Texture and road geometry of one synthetic world."""

    world: str
    background_band: tuple  # (low, high) background intensities
    stripe_period: float  # pixels per texture stripe cycle
    stripe_axis: int  # 0: stripes vary along rows, 1: along columns
    road_intensity: float
    lane_fraction: float  # lane width as a fraction of image width
    edge_intensity: float
    noise_amplitude: float = 0.05
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.background_band
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"background band {self.background_band} outside [0, 1]")
        if not 0.1 < self.lane_fraction < 0.9:
            raise ValueError(f"lane_fraction must be in (0.1, 0.9), got {self.lane_fraction}")
        if not (0.0 <= self.road_intensity <= 1.0 and 0.0 <= self.edge_intensity <= 1.0):
            raise ValueError("road/edge intensities must lie in [0, 1]")
        if not 0.0 <= self.noise_amplitude <= 0.05:
            raise ValueError(f"noise amplitude must be <= 0.05, got {self.noise_amplitude}")


_PRESETS = {
    "A": dict(
        background_band=(0.15, 0.40),
        stripe_period=14.0,
        stripe_axis=0,
        road_intensity=0.50,
        lane_fraction=0.40,
        edge_intensity=0.95,
    ),
    "B": dict(
        background_band=(0.25, 0.55),
        stripe_period=22.0,
        stripe_axis=1,
        road_intensity=0.35,
        lane_fraction=0.24,
        edge_intensity=0.75,
    ),
}


def world_spec(world, seed=0):
    """Preset WorldSpec for world "A" or "B"."""
    if world not in _PRESETS:
        raise ValueError(f"world must be one of {sorted(_PRESETS)}, got {world!r}")
    return WorldSpec(world=world, seed=seed, **_PRESETS[world])


def steering_angle(curvature, offset):
    """Ground-truth label for a scene's geometry parameters."""
    return K_STEER * curvature + K_OFFSET * offset


def _check_geometry(curvature, offset):
    if abs(curvature) > MAX_CURVATURE:
        raise ValueError(f"|curvature| must be <= {MAX_CURVATURE}, got {curvature}")
    if abs(offset) > MAX_OFFSET:
        raise ValueError(f"|offset| must be <= {MAX_OFFSET}, got {offset}")


def edge_centers(spec, curvature, offset, shape=SCENE_SHAPE):
    """Per-row horizontal positions of the left and right lane edges.

    The lane center shifts by ``offset * w/4`` at the bottom row and bends
    quadratically with distance toward the top of the frame.
    """
    _check_geometry(curvature, offset)
    h, w = shape
    depth = (h - 1) - np.arange(h)  # 0 at the bottom row (closest)
    center = (w - 1) / 2.0 + offset * (w / 4.0) + curvature * depth.astype(np.float64) ** 2
    half = spec.lane_fraction * w / 2.0
    return center - half, center + half


def edge_band(spec, curvature, offset, half_width=3.0, shape=SCENE_SHAPE):
    """Boolean mask of pixels within ``half_width`` columns of a lane edge."""
    left, right = edge_centers(spec, curvature, offset, shape)
    cols = np.arange(shape[1])[np.newaxis, :]
    return (np.abs(cols - left[:, np.newaxis]) <= half_width) | (
        np.abs(cols - right[:, np.newaxis]) <= half_width
    )


def gen_scene(spec, curvature, offset, noise_seed=0):
    """Render one scene; returns (image, steering angle).

    Output is a fully deterministic function of (spec, curvature, offset,
    noise_seed).
    """
    _check_geometry(curvature, offset)
    h, w = SCENE_SHAPE
    lo, hi = spec.background_band
    axis_len = h if spec.stripe_axis == 0 else w
    phase = np.arange(axis_len) / spec.stripe_period
    stripes = 0.5 * (1.0 + np.sin(2.0 * np.pi * phase))
    bg = lo + (hi - lo) * stripes
    img = np.broadcast_to(
        bg[:, np.newaxis] if spec.stripe_axis == 0 else bg[np.newaxis, :], (h, w)
    ).copy()

    left, right = edge_centers(spec, curvature, offset)
    cols = np.arange(w)[np.newaxis, :]
    on_road = (cols >= left[:, np.newaxis]) & (cols <= right[:, np.newaxis])
    img[on_road] = spec.road_intensity
    on_edge = (np.abs(cols - left[:, np.newaxis]) <= 1.0) | (
        np.abs(cols - right[:, np.newaxis]) <= 1.0
    )
    img[on_edge] = spec.edge_intensity

    rng = np.random.default_rng([spec.seed, 1, noise_seed])
    img = np.clip(img + rng.uniform(-spec.noise_amplitude, spec.noise_amplitude, (h, w)), 0.0, 1.0)
    return img, steering_angle(curvature, offset)


def scene_params(spec, n):
    """Deterministic (curvature, offset) pairs used by `gen_dataset`."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    curvatures = np.empty(n)
    offsets = np.empty(n)
    for i in range(n):
        rng = np.random.default_rng([spec.seed, 2, i])
        curvatures[i] = rng.uniform(-CURVATURE_RANGE, CURVATURE_RANGE)
        offsets[i] = rng.uniform(-OFFSET_RANGE, OFFSET_RANGE)
    return curvatures, offsets


def gen_dataset(spec, n, out_dir):
    """Write n scenes as PGMs plus a manifest CSV; returns the manifest path.

    Every byte of output is determined by (spec, n).  A ``params.json``
    sidecar documents the world spec and the label constants.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create dataset directory {out_dir}: {exc}") from exc
    curvatures, offsets = scene_params(spec, n)
    records = []
    for i in range(n):
        img, angle = gen_scene(spec, curvatures[i], offsets[i], noise_seed=i)
        name = f"scene_{i:05d}.pgm"
        try:
            nvio.write_pgm(out_dir / name, img)
        except OSError as exc:
            raise DataError(f"cannot write {out_dir / name}: {exc}") from exc
        records.append((name, angle))
    manifest = out_dir / "manifest.csv"
    nvio.write_manifest(manifest, records)
    meta = dataclasses.asdict(spec)
    meta.update(
        n=n,
        k_steer=K_STEER,
        k_offset=K_OFFSET,
        curvature_range=CURVATURE_RANGE,
        offset_range=OFFSET_RANGE,
        scene_shape=list(SCENE_SHAPE),
    )
    (out_dir / "params.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
