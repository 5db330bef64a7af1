"""Core motion data model and file formats.

A motion is a fixed-rate sequence of per-frame feature vectors.  The first
three features are the pelvis position in world coordinates; the remaining
features are pelvis-relative offsets of the non-root joints, three values
per joint, in skeleton order.  The world is Y-up with the ground plane at
y = 0.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BadWidth, InvalidMotion, NonFinite, TooShort

# ---------------------------------------------------------------------------
# skeleton
# ---------------------------------------------------------------------------

_DEFAULT_PARENTS = (
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19,
)
_DEFAULT_FOOT_JOINTS = (10, 11)


@dataclass(frozen=True)
class Skeleton:
    """Joint hierarchy.  parents[j] is the parent index of joint j, with -1
    marking the root.  foot_joints index the joints used for ground contact.
    """

    parents: tuple[int, ...]
    foot_joints: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.parents) < 1 or self.parents[0] != -1:
            raise InvalidMotion("skeleton must have a single root at index 0")
        for j, p in enumerate(self.parents):
            if j > 0 and not 0 <= p < j:
                raise InvalidMotion(f"joint {j} has invalid parent {p}")
        for f in self.foot_joints:
            if not 0 <= f < len(self.parents):
                raise InvalidMotion(f"foot joint {f} out of range")

    @property
    def n_joints(self) -> int:
        return len(self.parents)

    @property
    def feature_dim(self) -> int:
        # pelvis world position plus one offset triple per non-root joint
        return 3 * self.n_joints


def default_skeleton() -> Skeleton:
    """The 22-joint humanoid used throughout the package."""
    return Skeleton(parents=_DEFAULT_PARENTS, foot_joints=_DEFAULT_FOOT_JOINTS)


# ---------------------------------------------------------------------------
# array helpers
# ---------------------------------------------------------------------------

def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


def _check_finite(a: np.ndarray, what: str):
    if not np.all(np.isfinite(a)):
        raise InvalidMotion(f"{what} contains non-finite values")


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MotionSequence:
    """An immutable (n_frames, feature_dim) motion at a fixed frame rate."""

    features: np.ndarray
    fps: float
    skeleton: Skeleton = field(default_factory=default_skeleton)

    def __post_init__(self):
        a = np.asarray(self.features)
        if a.ndim != 2:
            raise InvalidMotion(f"features must be 2-d, got shape {a.shape}")
        if a.shape[0] < 1:
            raise InvalidMotion("motion needs at least one frame")
        if a.shape[1] != self.skeleton.feature_dim:
            raise InvalidMotion(
                f"feature dim {a.shape[1]} does not match skeleton "
                f"(expected {self.skeleton.feature_dim})"
            )
        _check_finite(a, "features")
        if not self.fps > 0:
            raise InvalidMotion(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "features", _freeze(a))

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """Pelvis world positions, one xyz triple per frame."""

    positions: np.ndarray
    fps: float

    def __post_init__(self):
        a = np.asarray(self.positions)
        if a.ndim != 2 or a.shape[1] != 3:
            raise InvalidMotion(f"trajectory must be (n, 3), got shape {a.shape}")
        if a.shape[0] < 1:
            raise InvalidMotion("trajectory needs at least one frame")
        _check_finite(a, "trajectory")
        if not self.fps > 0:
            raise InvalidMotion(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "positions", _freeze(a))

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class AnchorSet:
    """Sparse keyframe constraints: frame indices plus the pelvis-relative
    part of the feature vector at each of those frames.  Positions are
    strictly increasing; poses carry no world-position information, so an
    anchor set is invariant under translation of the motion.
    """

    positions: np.ndarray
    poses: np.ndarray
    n_frames: int

    def __post_init__(self):
        pos = np.asarray(self.positions)
        if pos.ndim != 1:
            raise InvalidMotion("anchor positions must be 1-d")
        if not np.issubdtype(pos.dtype, np.integer):
            if not np.all(pos == np.round(pos)):
                raise InvalidMotion("anchor positions must be integers")
        pos = pos.astype(np.int64)
        if pos.size > 0:
            if pos[0] < 0 or pos[-1] >= self.n_frames:
                raise InvalidMotion(
                    f"anchor positions must lie in [0, {self.n_frames})"
                )
            if np.any(np.diff(pos) <= 0):
                raise InvalidMotion("anchor positions must be strictly increasing")
        poses = np.asarray(self.poses)
        if poses.ndim != 2 or poses.shape[0] != pos.size:
            raise InvalidMotion(
                f"poses must be ({pos.size}, pose_dim), got shape {poses.shape}"
            )
        _check_finite(poses, "anchor poses")
        pos = np.ascontiguousarray(pos)
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "poses", _freeze(poses))

    @property
    def count(self) -> int:
        return int(self.positions.size)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def extract_trajectory(motion: MotionSequence) -> Trajectory:
    """The pelvis world-position track of a motion."""
    return Trajectory(positions=motion.features[:, :3].copy(), fps=motion.fps)


def gather_anchors(motion: MotionSequence, positions: np.ndarray) -> AnchorSet:
    """Pick the pelvis-relative pose at the given frame indices."""
    pos = np.asarray(positions, dtype=np.int64)
    return AnchorSet(
        positions=pos,
        poses=motion.features[pos, 3:].copy(),
        n_frames=motion.n_frames,
    )


def validate(motion: MotionSequence) -> MotionSequence:
    """Re-check the structural invariants of a motion and hand it back.

    Construction already enforces most of these, so this is the gate for
    data that arrived from outside: duck-typed objects and deserialized
    payloads pass through here before use.
    """
    feat = np.asarray(motion.features)
    sk = motion.skeleton
    if feat.ndim != 2 or feat.shape[1] != sk.feature_dim:
        raise BadWidth(
            f"feature width {feat.shape[-1] if feat.ndim else '?'} does not "
            f"match skeleton (expected {sk.feature_dim})"
        )
    if feat.shape[0] < 2:
        raise TooShort(f"motion has {feat.shape[0]} frame(s), need at least 2")
    if not np.all(np.isfinite(feat)):
        raise NonFinite("motion features contain non-finite values")
    if not motion.fps > 0:
        raise InvalidMotion(f"fps must be positive, got {motion.fps}")
    return motion


def joint_world_positions(motion: MotionSequence) -> np.ndarray:
    """World coordinates of every joint, shape (n_frames, n_joints, 3).

    The root is the pelvis itself; every other joint is the pelvis plus its
    stored offset.
    """
    n, j = motion.n_frames, motion.skeleton.n_joints
    pelvis = motion.features[:, :3]
    out = np.empty((n, j, 3), dtype=np.float64)
    out[:, 0] = pelvis
    offsets = motion.features[:, 3:].reshape(n, j - 1, 3)
    out[:, 1:] = pelvis[:, None, :] + offsets
    return out


# ---------------------------------------------------------------------------
# motion file format
# ---------------------------------------------------------------------------
# One JSON header line, then raw little-endian float32 frames, row-major.

_PMG_VERSION = 1


def save_pmg(motion: MotionSequence, path: str):
    header = {
        "version": _PMG_VERSION,
        "fps": float(motion.fps),
        "joints": motion.skeleton.n_joints,
        "feature_dim": motion.feature_dim,
        "frames": motion.n_frames,
    }
    data = motion.features.astype("<f4").tobytes(order="C")
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8"))
        f.write(b"\n")
        f.write(data)


def load_pmg(path: str, skeleton: Skeleton | None = None) -> MotionSequence:
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise InvalidMotion(f"unreadable motion header: {e}") from e
        if header.get("version") != _PMG_VERSION:
            raise InvalidMotion(
                f"unsupported motion file version {header.get('version')!r}"
            )
        if skeleton is None:
            skeleton = default_skeleton()
        if header["joints"] != skeleton.n_joints:
            raise InvalidMotion(
                f"file has {header['joints']} joints, skeleton has "
                f"{skeleton.n_joints}"
            )
        n, d = header["frames"], header["feature_dim"]
        raw = f.read()
        expected = n * d * 4
        if len(raw) != expected:
            raise InvalidMotion(
                f"truncated motion file: expected {expected} data bytes, "
                f"got {len(raw)}"
            )
        a = np.frombuffer(raw, dtype="<f4").reshape(n, d).astype(np.float64)
    return MotionSequence(features=a, fps=header["fps"], skeleton=skeleton)


# ---------------------------------------------------------------------------
# trajectory file format
# ---------------------------------------------------------------------------

def save_trajectory_csv(traj: Trajectory, path: str):
    with open(path, "w", encoding="utf-8") as f:
        f.write("frame,x,y,z\n")
        for i, (x, y, z) in enumerate(traj.positions):
            f.write(f"{i},{float(x)!r},{float(y)!r},{float(z)!r}\n")


def load_trajectory_csv(path: str, fps: float) -> Trajectory:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "frame,x,y,z":
            raise InvalidMotion(f"unexpected trajectory header {header!r}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise InvalidMotion(f"bad trajectory row {line!r}")
            rows.append([float(parts[1]), float(parts[2]), float(parts[3])])
    return Trajectory(positions=np.asarray(rows, dtype=np.float64), fps=fps)
