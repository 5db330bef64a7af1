"""Procedural motion data for desk-scale training and evaluation.

Each sequence walks a smooth random spline: the pelvis follows the path at
constant height, every other joint swings around its rest offset with a
bone-length-preserving rotation, and the feet alternate stance phases pinned
to the ground plane.  With the oscillation amplitude at zero the pose is
rigid and simply translates along the path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .motion import MotionSequence, Skeleton, default_skeleton

# pelvis-relative rest offsets for the 22-joint humanoid, meters, Y-up;
# pelvis height 0.9 puts the feet exactly on the ground
_REST_22 = {
    1: (-0.10, -0.05, 0.0),   # left hip
    2: (0.10, -0.05, 0.0),    # right hip
    3: (0.0, 0.12, 0.0),      # spine1
    4: (-0.11, -0.45, 0.02),  # left knee
    5: (0.11, -0.45, 0.02),   # right knee
    6: (0.0, 0.24, 0.0),      # spine2
    7: (-0.12, -0.84, -0.02),  # left ankle
    8: (0.12, -0.84, -0.02),   # right ankle
    9: (0.0, 0.36, 0.0),       # spine3
    10: (-0.12, -0.90, 0.12),  # left foot
    11: (0.12, -0.90, 0.12),   # right foot
    12: (0.0, 0.50, 0.02),     # neck
    13: (-0.08, 0.44, 0.0),    # left collar
    14: (0.08, 0.44, 0.0),     # right collar
    15: (0.0, 0.62, 0.04),     # head
    16: (-0.20, 0.40, 0.0),    # left shoulder
    17: (0.20, 0.40, 0.0),     # right shoulder
    18: (-0.24, 0.12, 0.0),    # left elbow
    19: (0.24, 0.12, 0.0),     # right elbow
    20: (-0.26, -0.12, 0.02),  # left wrist
    21: (0.26, -0.12, 0.02),   # right wrist
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the procedural motion family."""

    count: int = 512
    n_frames: int = 64
    fps: float = 20.0
    seed: int = 0
    skeleton: Skeleton = field(default_factory=default_skeleton)
    n_control: int = 4          # spline control points
    path_extent: float = 2.0    # control-point spread, meters
    pelvis_height: float = 0.9
    osc_amplitude: float = 0.25  # radians, peak joint swing
    osc_freq: tuple[float, float] = (0.5, 2.0)  # Hz range
    gait_period: int = 16       # frames per full stance cycle

    def __post_init__(self):
        if self.count < 1 or self.n_frames < 2 or self.n_control < 2:
            raise ValueError("count, n_frames and n_control must be positive")
        if self.fps <= 0 or self.gait_period < 2:
            raise ValueError("fps and gait_period must be positive")
        for v in (self.path_extent, self.pelvis_height, self.osc_amplitude,
                  *self.osc_freq):
            if not np.isfinite(v):
                raise ValueError("motion family parameters must be finite")
        if self.osc_amplitude < 0:
            raise ValueError("osc_amplitude must be >= 0")


def _catmull_rom(ctrl: np.ndarray, n: int) -> np.ndarray:
    """Sample a Catmull-Rom spline through the control points at n
    parameter values, endpoints clamped."""
    pts = np.vstack([ctrl[:1], ctrl, ctrl[-1:]])  # duplicate ends
    segs = len(ctrl) - 1
    t = np.linspace(0.0, segs, n)
    idx = np.minimum(t.astype(np.int64), segs - 1)
    u = (t - idx)[:, None]
    p0, p1 = pts[idx], pts[idx + 1]
    p2, p3 = pts[idx + 2], pts[idx + 3]
    # standard Catmull-Rom blend with tension 0.5
    return 0.5 * ((2 * p1) + (-p0 + p2) * u
                  + (2 * p0 - 5 * p1 + 4 * p2 - p3) * u ** 2
                  + (-p0 + 3 * p1 - 3 * p2 + p3) * u ** 3)


def _rotate(v: np.ndarray, axis: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Rodrigues rotation of a fixed vector by per-frame angles; preserves
    the vector norm exactly."""
    c = np.cos(theta)[:, None]
    s = np.sin(theta)[:, None]
    k = axis / np.linalg.norm(axis)
    cross = np.cross(np.broadcast_to(k, (theta.size, 3)), v)
    return v * c + cross * s + k * (k @ v) * (1.0 - c)


def _rest_offsets(skeleton: Skeleton, pelvis_height: float,
                  rng: np.random.Generator) -> np.ndarray:
    j = skeleton.n_joints
    out = np.zeros((j - 1, 3))
    if skeleton.parents == default_skeleton().parents:
        for joint, off in _REST_22.items():
            out[joint - 1] = off
        scale = pelvis_height / 0.9
        out *= scale
    else:
        # generic tree: fixed random directions, feet pushed to the ground
        dirs = rng.normal(size=(j - 1, 3))
        out = 0.3 * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        for f in skeleton.foot_joints:
            if f > 0:
                out[f - 1, 1] = -pelvis_height
    return out


def _one_sequence(spec: SyntheticSpec, rng: np.random.Generator) -> MotionSequence:
    sk = spec.skeleton
    n, j = spec.n_frames, sk.n_joints
    ctrl = np.zeros((spec.n_control, 3))
    ctrl[:, 0] = np.cumsum(rng.normal(0.0, spec.path_extent / spec.n_control,
                                      size=spec.n_control))
    ctrl[:, 2] = np.cumsum(rng.normal(0.0, spec.path_extent / spec.n_control,
                                      size=spec.n_control))
    pelvis = _catmull_rom(ctrl, n)
    pelvis[:, 1] = spec.pelvis_height

    rest = _rest_offsets(sk, spec.pelvis_height, rng)
    offsets = np.broadcast_to(rest, (n, j - 1, 3)).copy()

    if spec.osc_amplitude > 0.0:
        tgrid = np.arange(n) / spec.fps
        feet = set(sk.foot_joints)
        for jj in range(1, j):
            if jj in feet:
                continue
            amp = spec.osc_amplitude * rng.uniform(0.3, 1.0)
            freq = rng.uniform(*spec.osc_freq)
            phase = rng.uniform(0.0, 2 * np.pi)
            axis = rng.normal(size=3)
            theta = amp * np.sin(2 * np.pi * freq * tgrid + phase)
            offsets[:, jj - 1] = _rotate(rest[jj - 1], axis, theta)
        _plant_feet(spec, pelvis, offsets, rng)

    feat = np.concatenate([pelvis, offsets.reshape(n, -1)], axis=1)
    return MotionSequence(features=feat, fps=spec.fps, skeleton=sk)


def _plant_feet(spec: SyntheticSpec, pelvis: np.ndarray,
                offsets: np.ndarray, rng: np.random.Generator):
    """Alternate stance phases: during its stance half-cycle a foot's world
    position is pinned to a fixed ground contact; during swing it tracks the
    pelvis with a sinusoidal lift."""
    n = pelvis.shape[0]
    half = spec.gait_period // 2
    rest_y = -spec.pelvis_height
    for k, foot in enumerate(spec.skeleton.foot_joints):
        rest = offsets[0, foot - 1].copy()
        rest[1] = rest_y
        phase_off = k * half  # feet half a cycle apart
        contact = None
        for f in range(n):
            phase = (f + phase_off) % spec.gait_period
            world_default = pelvis[f] + rest
            if phase < half:  # stance
                if contact is None or phase == 0:
                    contact = world_default.copy()
                    contact[1] = 0.0
                offsets[f, foot - 1] = contact - pelvis[f]
            else:  # swing: follow the pelvis, lift sinusoidally
                contact = None
                lift = 0.08 * np.sin(np.pi * (phase - half) / max(half, 1))
                off = rest.copy()
                off[1] = rest_y + lift
                offsets[f, foot - 1] = off


def generate_synthetic(spec: SyntheticSpec) -> list[MotionSequence]:
    """The full dataset, deterministic under ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    return [_one_sequence(spec, rng) for _ in range(spec.count)]


def motion_from_positions(positions: np.ndarray, fps: float,
                          skeleton: Skeleton | None = None) -> MotionSequence:
    """Convert externally prepared world joint positions (N, J, 3) into a
    MotionSequence: joint 0 is taken as the pelvis, all other joints are
    stored pelvis-relative."""
    if skeleton is None:
        skeleton = default_skeleton()
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 3 or pos.shape[1] != skeleton.n_joints or pos.shape[2] != 3:
        raise ValueError(
            f"expected positions shaped (frames, {skeleton.n_joints}, 3), "
            f"got {pos.shape}")
    pelvis = pos[:, 0]
    offsets = pos[:, 1:] - pelvis[:, None, :]
    feat = np.concatenate([pelvis, offsets.reshape(pos.shape[0], -1)], axis=1)
    return MotionSequence(features=feat, fps=fps, skeleton=skeleton)
