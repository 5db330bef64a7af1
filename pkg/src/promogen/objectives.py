"""Training objectives: reconstruction, anchor, joint, physical, adversarial.

Every loss accepts the prediction as either a plain array or an autodiff
Tensor and returns a scalar of matching kind; targets are always treated as
constants, so gradients flow through the prediction argument only.  The
adversarial pair additionally differentiates through the discriminator
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .denoiser import Parameters
from .errors import InvalidAnchorPositions, ShapeError
from .motion import Skeleton

# guard inside the slip-speed square root; shifted so zero displacement
# still yields exactly zero speed
_SLIP_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Multipliers for the five loss terms, in contract order."""

    lambda1: float = 1.0  # reconstruction
    lambda2: float = 1.0  # anchor
    lambda3: float = 1.0  # joint
    lambda4: float = 0.1  # adversarial (generator side)
    lambda5: float = 0.1  # physical

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class PhysicalParams:
    """Thresholds for the foot-contact penalties, all in meters (the speed
    threshold in meters per second)."""

    ground: float = 0.0
    contact_height: float = 0.05
    contact_speed: float = 0.10
    float_margin: float = 0.10

    def __post_init__(self):
        if not np.isfinite(self.ground):
            raise ValueError("ground height must be finite")
        for name in ("contact_height", "contact_speed", "float_margin"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")


@dataclass
class LossComponents:
    """The five scalar terms entering the weighted total."""

    reconstruction: Tensor | float = 0.0
    anchor: Tensor | float = 0.0
    joint: Tensor | float = 0.0
    adversarial: Tensor | float = 0.0
    physical: Tensor | float = 0.0


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _const(x) -> np.ndarray:
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.float64)


def l2_loss(pred, target) -> Tensor:
    """Mean squared error over every entry of the two motion batches."""
    p = _as_tensor(pred)
    t = _const(target)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} vs target {t.shape}")
    d = p - Tensor(t)
    return (d * d).mean()


def _check_positions(positions, n_frames: int) -> np.ndarray:
    pos = np.asarray(positions)
    if pos.size and not np.issubdtype(pos.dtype, np.integer):
        raise InvalidAnchorPositions(f"anchor positions must be integers, got {pos.dtype}")
    pos = pos.astype(np.int64).reshape(-1)
    if pos.size:
        if pos.min() < 0 or pos.max() >= n_frames:
            raise InvalidAnchorPositions(
                f"anchor positions out of range [0, {n_frames})")
        if np.any(np.diff(pos) <= 0):
            raise InvalidAnchorPositions("anchor positions must be strictly increasing")
    return pos


def anchor_loss(pred, target, positions) -> Tensor:
    """Mean squared pose error at the anchor frames.

    Pelvis columns are excluded: anchors constrain the displacement-free
    pose, not where it sits in the world.  Zero when no anchors are given.
    """
    p = _as_tensor(pred)
    t = _const(target)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} vs target {t.shape}")
    pos = _check_positions(positions, p.shape[-2])
    if pos.size == 0:
        return Tensor(0.0)
    rows = ad.take_frames(p, pos)[..., 3:]
    rows_t = np.take(t, pos, axis=-2)[..., 3:]
    d = rows - Tensor(rows_t)
    return (d * d).mean()


def world_positions(x, skeleton: Skeleton) -> Tensor:
    """Differentiable joint world positions, shape (..., n_frames, n_joints, 3).

    The root is the pelvis; every other joint adds its stored offset.
    """
    p = _as_tensor(x)
    if p.shape[-1] != skeleton.feature_dim:
        raise ShapeError(
            f"feature width {p.shape[-1]} does not match skeleton "
            f"({skeleton.feature_dim})")
    lead = p.shape[:-1]
    pelvis = p[..., :3].reshape(lead + (1, 3))
    offsets = p[..., 3:].reshape(lead + (skeleton.n_joints - 1, 3))
    return ad.concatenate([pelvis, pelvis + offsets], axis=-2)


def joint_loss(pred, target, skeleton: Skeleton) -> Tensor:
    """Mean over frames and joints of the squared world-position error."""
    p = _as_tensor(pred)
    t = _const(target)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} vs target {t.shape}")
    wp = world_positions(p, skeleton)
    wt = world_positions(Tensor(t), skeleton).data
    d = wp - Tensor(wt)
    return (d * d).sum(axis=-1).mean()


def physical_loss(pred, skeleton: Skeleton,
                  phys: PhysicalParams | None = None,
                  fps: float = 20.0) -> Tensor:
    """Foot-contact penalty: slip + float + ground penetration.

    Slip averages the horizontal foot speed over contact intervals, where a
    contact interval keeps the foot below the height threshold at both ends
    and moving slower than the speed threshold; the contact mask is computed
    from detached values.  Float penalizes the lowest foot rising above the
    margin; penetration penalizes any foot below ground.
    """
    if phys is None:
        phys = PhysicalParams()
    p = _as_tensor(pred)
    feet_idx = np.asarray(skeleton.foot_joints, dtype=np.int64)
    feet = ad.take_frames(world_positions(p, skeleton), feet_idx)
    heights = feet[..., 1]  # (..., N, F)

    pen = ad.relu(phys.ground - heights).mean()

    n_feet = feet_idx.size
    minh = heights[..., 0]
    for i in range(1, n_feet):
        minh = ad.minimum(minh, heights[..., i])
    flt = ad.relu(minh - phys.float_margin).mean()

    n = p.shape[-2]
    if n < 2:
        return pen + flt

    disp = feet[..., 1:, :, :] - feet[..., :-1, :, :]  # (..., N-1, F, 3)
    dx, dz = disp[..., 0], disp[..., 2]
    # shifted sqrt: exactly zero speed (and a finite gradient) at rest
    horiz = (ad.sqrt(dx * dx + dz * dz + _SLIP_EPS) - np.sqrt(_SLIP_EPS)) * fps

    h = heights.data
    speed3 = np.linalg.norm(disp.data, axis=-1) * fps
    contact = ((h[..., :-1, :] < phys.contact_height)
               & (h[..., 1:, :] < phys.contact_height)
               & (speed3 < phys.contact_speed))
    count = int(contact.sum())
    if count == 0:
        slip = Tensor(0.0)
    else:
        slip = (horiz * Tensor(contact.astype(np.float64))).sum() * (1.0 / count)
    return slip + flt + pen


# -- adversarial pair -------------------------------------------------------

def init_discriminator(feature_dim: int, hidden: int = 64, seed: int = 0) -> Parameters:
    """Fresh parameters for the three-layer sequence discriminator."""
    if feature_dim < 1 or hidden < 1:
        raise ValueError("feature_dim and hidden must be positive")
    rng = np.random.default_rng(seed)
    shapes = {
        "disc_w1": (2 * feature_dim, hidden),
        "disc_b1": (hidden,),
        "disc_w2": (hidden, hidden),
        "disc_b2": (hidden,),
        "disc_w3": (hidden, 1),
        "disc_b3": (1,),
    }
    tensors = {}
    for name, shape in shapes.items():
        if name.endswith(("b1", "b2", "b3")):
            a = np.zeros(shape)
        else:
            a = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)
        # store at float32 resolution so checkpoints round-trip bitwise
        tensors[name] = Tensor(a.astype(np.float32).astype(np.float64),
                               requires_grad=True)
    return Parameters(tensors)


def discriminator_features(x) -> Tensor:
    """Pooled sequence summary: per-channel mean and mean absolute
    frame-to-frame difference, concatenated."""
    t = _as_tensor(x)
    if t.ndim == 2:
        t = t.reshape((1,) + t.shape)
    if t.ndim != 3:
        raise ShapeError(f"expected (batch, frames, features), got {t.shape}")
    mean_pool = t.mean(axis=-2)
    if t.shape[-2] > 1:
        dstat = ad.absolute(t[:, 1:, :] - t[:, :-1, :]).mean(axis=-2)
    else:
        dstat = Tensor(np.zeros(mean_pool.shape))
    return ad.concatenate([mean_pool, dstat], axis=-1)


def discriminator_logits(params: Parameters, x) -> Tensor:
    """Realness logits, one per sequence in the batch."""
    f = discriminator_features(x)
    h = ad.leaky_relu(f @ params["disc_w1"] + params["disc_b1"])
    h = ad.leaky_relu(h @ params["disc_w2"] + params["disc_b2"])
    out = h @ params["disc_w3"] + params["disc_b3"]
    return out.reshape((out.shape[0],))


def adversarial_losses(params: Parameters, real, fake) -> tuple[Tensor, Tensor]:
    """Non-saturating logistic losses (discriminator, generator).

    The discriminator loss sees the fake batch detached, so generator
    gradients flow only through the generator loss.
    """
    real_t = _as_tensor(real)
    fake_t = _as_tensor(fake)
    if real_t.shape[-1] != fake_t.shape[-1]:
        raise ShapeError(
            f"feature widths differ: real {real_t.shape[-1]} vs "
            f"fake {fake_t.shape[-1]}")
    logits_real = discriminator_logits(params, real_t)
    logits_fake_d = discriminator_logits(params, fake_t.detach())
    loss_d = 0.5 * (ad.softplus(-logits_real).mean()
                    + ad.softplus(logits_fake_d).mean())
    logits_fake = discriminator_logits(params, fake_t)
    loss_g = ad.softplus(-logits_fake).mean()
    return loss_d, loss_g


def total_loss(components: LossComponents, weights: LossWeights | None = None):
    """Weighted sum of the five terms.  Returns a Tensor when any component
    is one, otherwise a plain float."""
    if weights is None:
        weights = LossWeights()
    pairs = [
        (weights.lambda1, components.reconstruction),
        (weights.lambda2, components.anchor),
        (weights.lambda3, components.joint),
        (weights.lambda4, components.adversarial),
        (weights.lambda5, components.physical),
    ]
    if not any(isinstance(c, Tensor) for _, c in pairs):
        return float(sum(w * float(c) for w, c in pairs))
    total = Tensor(0.0)
    for w, c in pairs:
        total = total + _as_tensor(c) * w
    return total
