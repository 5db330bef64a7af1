"""Evaluation metrics over generated motion.

All metrics are deterministic: set-level metrics draw their pairings and
projections from explicitly seeded generators, and reductions run in fixed
order.  Values are in meters where the data is; the distributional metrics
live in a fixed projected feature space and are comparable across runs of
this package only.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError, UndefinedMetric
from .motion import MotionSequence, Skeleton, Trajectory

# width of the projected feature space used by diversity and fid
FEATURE_DIM = 32
_PROJECTION_SEED = 7


@dataclass(frozen=True)
class MetricsReport:
    """One evaluation run.  Distances in meters, fid/diversity in projected
    feature units, dm dimensionless in [-1, 1]."""

    mpjpe: float
    k_mpjpe: float
    js: float
    diversity: float
    dm: float
    fid: float
    n_generated: int
    n_reference: int
    seed: int

    def as_dict(self) -> dict:
        return asdict(self)


def _features(motion) -> np.ndarray:
    if isinstance(motion, MotionSequence):
        return motion.features
    return np.asarray(motion, dtype=np.float64)


def _world(feat: np.ndarray, skeleton: Skeleton) -> np.ndarray:
    if feat.shape[-1] != skeleton.feature_dim:
        raise ShapeError(
            f"feature width {feat.shape[-1]} does not match skeleton "
            f"({skeleton.feature_dim})")
    n = feat.shape[0]
    out = np.empty((n, skeleton.n_joints, 3))
    out[:, 0] = feat[:, :3]
    out[:, 1:] = feat[:, :3][:, None, :] + feat[:, 3:].reshape(n, -1, 3)
    return out


def mpjpe(gen, gt, skeleton: Skeleton) -> float:
    """Mean per-joint position error: Euclidean distance of world joint
    positions, averaged over frames and joints."""
    a, b = _features(gen), _features(gt)
    if a.shape != b.shape:
        raise ShapeError(f"generated {a.shape} vs reference {b.shape}")
    dist = np.linalg.norm(_world(a, skeleton) - _world(b, skeleton), axis=-1)
    return float(dist.mean())


def k_mpjpe(gen, gt, skeleton: Skeleton, positions) -> float:
    """mpjpe restricted to the anchor frames."""
    a, b = _features(gen), _features(gt)
    if a.shape != b.shape:
        raise ShapeError(f"generated {a.shape} vs reference {b.shape}")
    pos = np.asarray(positions, dtype=np.int64).reshape(-1)
    if pos.size == 0:
        raise UndefinedMetric("k_mpjpe needs at least one anchor position")
    if pos.min() < 0 or pos.max() >= a.shape[0]:
        raise ShapeError(f"anchor positions out of range [0, {a.shape[0]})")
    return mpjpe(a[pos], b[pos], skeleton)


def joint_smoothness(gen, skeleton: Skeleton) -> float:
    """Mean norm of the second difference of joint world positions, over
    interior frames and joints.  Zero for constant-velocity motion."""
    feat = _features(gen)
    if feat.shape[0] < 3:
        raise ShapeError("joint smoothness needs at least 3 frames")
    w = _world(feat, skeleton)
    second = w[2:] - 2.0 * w[1:-1] + w[:-2]
    return float(np.linalg.norm(second, axis=-1).mean())


def _pooled(motions) -> np.ndarray:
    rows = []
    for m in motions:
        f = _features(m)
        rows.append(f.mean(axis=0))
    return np.stack(rows)


def diversity(motions, pairs: int = 300, rng=None) -> float:
    """Mean Euclidean distance between seeded random pairs of mean-pooled
    feature vectors; a measure of variety within a generated set."""
    pooled = _pooled(motions)
    n = pooled.shape[0]
    if n < 2:
        raise UndefinedMetric("diversity needs at least 2 motions")
    if rng is None:
        rng = np.random.default_rng(0)
    total = 0.0
    for _ in range(pairs):
        i, j = rng.choice(n, size=2, replace=False)
        total += float(np.linalg.norm(pooled[i] - pooled[j]))
    return total / pairs


def directional_consistency(gen, reference: Trajectory | np.ndarray) -> float:
    """Mean cosine similarity between per-frame pelvis displacements of the
    generated motion and the reference trajectory.  Frames where either
    displacement is shorter than 1e-6 are skipped; with no valid frames the
    metric is undefined."""
    feat = _features(gen)
    ref = reference.positions if isinstance(reference, Trajectory) else np.asarray(reference)
    if feat.shape[0] != ref.shape[0]:
        raise ShapeError(
            f"frame counts differ: motion {feat.shape[0]} vs reference {ref.shape[0]}")
    dg = np.diff(feat[:, :3], axis=0)
    dr = np.diff(ref, axis=0)
    ng = np.linalg.norm(dg, axis=-1)
    nr = np.linalg.norm(dr, axis=-1)
    valid = (ng > 1e-6) & (nr > 1e-6)
    if not np.any(valid):
        raise UndefinedMetric("no frame has displacement above threshold in both")
    cos = (dg[valid] * dr[valid]).sum(axis=-1) / (ng[valid] * nr[valid])
    return float(cos.mean())


def pooled_projection(motions, seed: int = _PROJECTION_SEED) -> np.ndarray:
    """Fixed seeded random projection of mean-and-std-pooled features to
    FEATURE_DIM dimensions; the evaluation feature space for fid."""
    rows = []
    for m in motions:
        f = _features(m)
        rows.append(np.concatenate([f.mean(axis=0), f.std(axis=0)]))
    pooled = np.stack(rows)
    rng = np.random.default_rng(seed)
    proj = rng.normal(size=(pooled.shape[1], FEATURE_DIM)) / np.sqrt(pooled.shape[1])
    return pooled @ proj


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(mu1, sigma1, mu2, sigma2) -> float:
    """||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), the square root taken
    through the symmetric form S1^{1/2} S2 S1^{1/2}."""
    diff = np.asarray(mu1) - np.asarray(mu2)
    s1h = _sqrt_psd(np.asarray(sigma1))
    inner = s1h @ np.asarray(sigma2) @ s1h
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    tr_sqrt = float(np.sqrt(vals).sum())
    return float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * tr_sqrt)


def _moments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = x.mean(axis=0)
    if x.shape[0] < 2:
        raise UndefinedMetric("fid needs at least 2 samples per set")
    sigma = np.cov(x, rowvar=False)
    sigma = np.atleast_2d(sigma)
    if x.shape[0] < x.shape[1] + 1:
        # rank-deficient covariance: light diagonal regularization
        sigma = sigma + 1e-6 * np.eye(sigma.shape[0])
    return mu, sigma


def fid(gen_set, real_set) -> float:
    """Frechet distance between the two sets in the projected feature
    space."""
    g = pooled_projection(gen_set)
    r = pooled_projection(real_set)
    mu_g, sig_g = _moments(g)
    mu_r, sig_r = _moments(r)
    return frechet_distance(mu_g, sig_g, mu_r, sig_r)
