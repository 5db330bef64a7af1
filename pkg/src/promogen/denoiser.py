"""The conditional denoising network.

Five stages: a trajectory encoder, an anchor encoder, an initial motion
generator conditioned on one of the two streams, a refinement stage fusing
everything by channel concatenation, and a linear decoder back to feature
space.  The generator and refinement stages are transformer blocks whose
layer norms are modulated by the timestep embedding plus the per-frame
conditioning features (adaptive layer normalization); the trajectory encoder
uses unconditioned blocks.

All computation runs through the autodiff Tensor type, so a forward pass
recorded against trainable Parameters can be differentiated exactly.
Public entry points accept a single sequence (N, ...) or a batch (B, N, ...).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidAnchorPositions, MissingGradient, ShapeError
from .motion import AnchorSet, Trajectory

# ---------------------------------------------------------------------------
# configuration and parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkConfig:
    d: int = 64
    blocks: int = 2
    heads: int = 4
    feature_dim: int = 66
    anchor_dim: int = 63
    n_max: int = 256
    p_drop: float = 0.1
    img_condition: str = "trajectory"

    def __post_init__(self):
        for name in ("d", "blocks", "heads", "feature_dim", "anchor_dim", "n_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")
        if not 0.0 <= self.p_drop < 1.0:
            raise ValueError(f"p_drop must lie in [0, 1), got {self.p_drop}")
        if self.img_condition not in ("trajectory", "anchors"):
            raise ValueError(
                f"img_condition must be 'trajectory' or 'anchors', "
                f"got {self.img_condition!r}"
            )


class Parameters:
    """Named trainable tensors.  Values are float32-representable so that
    a fresh initialization survives a checkpoint round trip bitwise.
    """

    def __init__(self, tensors: dict[str, Tensor]):
        self._tensors = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> list[str]:
        return sorted(self._tensors)

    def items(self):
        return self._tensors.items()

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self._tensors.items()}

    def zero_grads(self):
        for t in self._tensors.values():
            t.grad = None


def _f32(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float32).astype(np.float64)


def _block_shapes(prefix: str, d: int, conditioned: bool) -> dict[str, tuple]:
    shapes = {
        f"{prefix}_qkv_w": (d, 3 * d),
        f"{prefix}_qkv_b": (3 * d,),
        f"{prefix}_attn_out_w": (d, d),
        f"{prefix}_attn_out_b": (d,),
        f"{prefix}_mlp_w1": (d, 4 * d),
        f"{prefix}_mlp_b1": (4 * d,),
        f"{prefix}_mlp_w2": (4 * d, d),
        f"{prefix}_mlp_b2": (d,),
    }
    if conditioned:
        # adaptive layer norm: shift/scale/gate for both sublayers
        shapes[f"{prefix}_mod_w"] = (d, 6 * d)
        shapes[f"{prefix}_mod_b"] = (6 * d,)
    else:
        shapes[f"{prefix}_ln1_g"] = (d,)
        shapes[f"{prefix}_ln1_b"] = (d,)
        shapes[f"{prefix}_ln2_g"] = (d,)
        shapes[f"{prefix}_ln2_b"] = (d,)
    return shapes


def parameter_shapes(config: NetworkConfig) -> dict[str, tuple]:
    d, big_d, d_a = config.d, config.feature_dim, config.anchor_dim
    shapes: dict[str, tuple] = {
        "time_w1": (d, d), "time_b1": (d,),
        "time_w2": (d, d), "time_b2": (d,),
        "traj_in_w": (3, d), "traj_in_b": (d,),
        "traj_out_w": (d, d), "traj_out_b": (d,),
        "null_traj": (d,), "null_anchor": (d,),
        "anchor_w": (d_a, d), "anchor_b": (d,),
        "gen_in_w": (big_d, d), "gen_in_b": (d,),
        "ref_in_w": (3 * d, d), "ref_in_b": (d,),
        "dec_w": (d, big_d), "dec_b": (big_d,),
    }
    for i in range(config.blocks):
        shapes.update(_block_shapes(f"traj_blk{i}", d, conditioned=False))
        shapes.update(_block_shapes(f"gen_blk{i}", d, conditioned=True))
        shapes.update(_block_shapes(f"ref_blk{i}", d, conditioned=True))
    return shapes


def init_parameters(config: NetworkConfig, seed: int) -> Parameters:
    """Deterministic seeded initialization.

    Modulation projections start small but nonzero so timestep and
    condition sensitivity is live from the first step; gains start at one,
    biases at zero, and the decoder starts near zero so early predictions
    are small.
    """
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith("_g"):
            a = np.ones(shape)
        elif name.endswith(("_b", "_ln1_b", "_ln2_b")):
            a = np.zeros(shape)
        elif name.startswith("null_"):
            a = rng.normal(0.0, 0.5, size=shape)
        elif "_mod_w" in name:
            a = rng.normal(0.0, 0.05, size=shape)
        elif name == "dec_w":
            a = rng.normal(0.0, 0.02, size=shape)
        else:
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            a = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
        tensors[name] = Tensor(_f32(a), requires_grad=True)
    return Parameters(tensors)


# ---------------------------------------------------------------------------
# fixed encodings
# ---------------------------------------------------------------------------

_PE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def position_encoding(n: int, d: int) -> np.ndarray:
    """Sinusoidal frame-position table, shape (n, d)."""
    key = (n, d)
    if key not in _PE_CACHE:
        pos = np.arange(n, dtype=np.float64)[:, None]
        half = d // 2
        freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
        ang = pos * freqs[None, :]
        pe = np.zeros((n, d))
        pe[:, 0::2] = np.sin(ang[:, : (d + 1) // 2])
        pe[:, 1::2] = np.cos(ang[:, : d // 2])
        pe.flags.writeable = False
        _PE_CACHE[key] = pe
    return _PE_CACHE[key]


def _sinusoid_t(t: np.ndarray, d: int) -> np.ndarray:
    half = d // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = np.asarray(t, dtype=np.float64)[:, None] * freqs[None, :]
    out = np.zeros((len(t), d))
    out[:, 0::2] = np.sin(ang[:, : (d + 1) // 2])
    out[:, 1::2] = np.cos(ang[:, : d // 2])
    return out


def timestep_embedding(t, params: Parameters, config: NetworkConfig) -> Tensor:
    """Embed diffusion times (scalar or (B,) array, possibly fractional)
    into (B, d) features.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    base = Tensor(_sinusoid_t(t_arr, config.d))
    h = ad.silu(base @ params["time_w1"] + params["time_b1"])
    return h @ params["time_w2"] + params["time_b2"]


# ---------------------------------------------------------------------------
# transformer blocks
# ---------------------------------------------------------------------------


def _attention(x: Tensor, params: Parameters, prefix: str,
               config: NetworkConfig) -> Tensor:
    b, n, d = x.shape
    h = config.heads
    dh = d // h
    qkv = x @ params[f"{prefix}_qkv_w"] + params[f"{prefix}_qkv_b"]
    qkv = qkv.reshape(b, n, 3, h, dh).swapaxes(1, 3)  # (b, h, 3, n, dh)
    q = qkv[:, :, 0]
    k = qkv[:, :, 1]
    v = qkv[:, :, 2]
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))
    attn = ad.softmax(scores, axis=-1)
    out = (attn @ v).swapaxes(1, 2).reshape(b, n, d)
    return out @ params[f"{prefix}_attn_out_w"] + params[f"{prefix}_attn_out_b"]


def _mlp(x: Tensor, params: Parameters, prefix: str) -> Tensor:
    h = ad.gelu(x @ params[f"{prefix}_mlp_w1"] + params[f"{prefix}_mlp_b1"])
    return h @ params[f"{prefix}_mlp_w2"] + params[f"{prefix}_mlp_b2"]


def _plain_block(x: Tensor, params: Parameters, prefix: str,
                 config: NetworkConfig) -> Tensor:
    h = ad.layer_norm(x, params[f"{prefix}_ln1_g"], params[f"{prefix}_ln1_b"])
    x = x + _attention(h, params, prefix, config)
    h = ad.layer_norm(x, params[f"{prefix}_ln2_g"], params[f"{prefix}_ln2_b"])
    return x + _mlp(h, params, prefix)


_UNIT = Tensor(np.float64(1.0))
_ZERO = Tensor(np.float64(0.0))


def _dit_block(x: Tensor, cond: Tensor, params: Parameters, prefix: str,
               config: NetworkConfig) -> Tensor:
    """Pre-norm block whose normalization is shifted/scaled/gated by the
    conditioning features (per frame).
    """
    d = config.d
    mod = ad.silu(cond) @ params[f"{prefix}_mod_w"] + params[f"{prefix}_mod_b"]
    shift1 = mod[..., 0 * d:1 * d]
    scale1 = mod[..., 1 * d:2 * d]
    gate1 = mod[..., 2 * d:3 * d]
    shift2 = mod[..., 3 * d:4 * d]
    scale2 = mod[..., 4 * d:5 * d]
    gate2 = mod[..., 5 * d:6 * d]
    h = ad.layer_norm(x, _UNIT, _ZERO) * (scale1 + 1.0) + shift1
    x = x + gate1 * _attention(h, params, prefix, config)
    h = ad.layer_norm(x, _UNIT, _ZERO) * (scale2 + 1.0) + shift2
    return x + gate2 * _mlp(h, params, prefix)


# ---------------------------------------------------------------------------
# the five stages
# ---------------------------------------------------------------------------


def _as_batch(a, width: int, what: str) -> tuple[Tensor, bool]:
    """Normalize an array or Tensor to a 3-d (B, N, width) Tensor plus a
    flag marking that the batch axis was added here.
    """
    t = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=np.float64))
    if t.ndim == 2:
        if t.shape[1] != width:
            raise ShapeError(f"{what} width {t.shape[1]}, expected {width}")
        return t.reshape(1, *t.shape), True
    if t.ndim == 3:
        if t.shape[2] != width:
            raise ShapeError(f"{what} width {t.shape[2]}, expected {width}")
        return t, False
    raise ShapeError(f"{what} must be 2-d or 3-d, got shape {t.shape}")


def encode_trajectory(traj, params: Parameters, config: NetworkConfig) -> Tensor:
    """Trajectory positions (N,3) or (B,N,3) -> per-frame latents (...,N,d).
    Output includes the frame-position encoding additively, so a zeroed
    final projection leaves exactly the position encoding.
    """
    if isinstance(traj, Trajectory):
        traj = traj.positions
    x, squeeze = _as_batch(traj, 3, "trajectory")
    n = x.shape[1]
    pe = Tensor(position_encoding(n, config.d))
    h = x @ params["traj_in_w"] + params["traj_in_b"] + pe
    for i in range(config.blocks):
        h = _plain_block(h, params, f"traj_blk{i}", config)
    out = pe + (h @ params["traj_out_w"] + params["traj_out_b"])
    return out.reshape(n, config.d) if squeeze else out


def encode_anchors(anchors, n_frames: int, params: Parameters,
                   config: NetworkConfig,
                   positions: np.ndarray | None = None) -> Tensor:
    """Sparse anchors -> dense (N, d) map (or (B, N, d) when poses are
    batched): anchor rows carry the encoded pose plus the position
    encoding, all other rows carry the learned null embedding.

    Accepts an AnchorSet, or raw poses (M, D_a) / (B, M, D_a) with
    `positions` (M,) shared across the batch.  None or an empty anchor set
    yields all-null rows.
    """
    if isinstance(anchors, AnchorSet):
        positions = anchors.positions
        poses = anchors.poses
    elif anchors is None:
        positions = np.zeros(0, dtype=np.int64)
        poses = np.zeros((0, config.anchor_dim))
    else:
        poses = np.asarray(anchors, dtype=np.float64)
        if positions is None:
            raise InvalidAnchorPositions("raw poses need explicit positions")
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size and (positions.min() < 0 or positions.max() >= n_frames):
        raise InvalidAnchorPositions(
            f"anchor positions must lie in [0, {n_frames})"
        )
    batched = poses.ndim == 3
    if poses.shape[-1] != config.anchor_dim:
        raise ShapeError(
            f"anchor pose width {poses.shape[-1]}, expected {config.anchor_dim}"
        )
    b = poses.shape[0] if batched else 1
    dense = np.zeros((b, n_frames, config.anchor_dim))
    mask = np.zeros(n_frames, dtype=bool)
    mask[positions] = True
    if positions.size:
        dense[:, positions] = poses if batched else poses[None]
    pe = Tensor(position_encoding(n_frames, config.d))
    enc = Tensor(dense) @ params["anchor_w"] + params["anchor_b"] + pe
    out = ad.where_mask(mask[None, :, None], enc,
                        params["null_anchor"].reshape(1, 1, config.d))
    return out if batched else out.reshape(n_frames, config.d)


def _cond_stack(x: Tensor, cond: Tensor, params: Parameters, stem: str,
                config: NetworkConfig) -> Tensor:
    for i in range(config.blocks):
        x = _dit_block(x, cond, params, f"{stem}_blk{i}", config)
    return x


def initial_motion(x_t, img_feats: Tensor, t_emb: Tensor,
                   params: Parameters, config: NetworkConfig) -> Tensor:
    """Coarse motion latents from the noisy input, conditioned on one
    feature stream (trajectory by default) plus the timestep.
    """
    x_in, squeeze = _as_batch(x_t, config.feature_dim, "x_t")
    feats = img_feats if img_feats.ndim == 3 else img_feats.reshape(1, *img_feats.shape)
    n = x_in.shape[1]
    pe = Tensor(position_encoding(n, config.d))
    h = x_in @ params["gen_in_w"] + params["gen_in_b"] + pe
    cond = t_emb.reshape(t_emb.shape[0], 1, config.d) + feats
    h = _cond_stack(h, cond, params, "gen", config)
    return h.reshape(n, config.d) if squeeze else h


def refine(m_init: Tensor, anchor_feats: Tensor, traj_feats: Tensor,
           t_emb: Tensor, params: Parameters, config: NetworkConfig) -> Tensor:
    """Fuse the coarse latents with both condition streams by channel
    concatenation, project back to width d, then run conditioned blocks.
    """
    squeeze = m_init.ndim == 2
    parts = []
    for p in (m_init, anchor_feats, traj_feats):
        parts.append(p.reshape(1, *p.shape) if p.ndim == 2 else p)
    if not (parts[0].shape == parts[1].shape == parts[2].shape):
        raise ShapeError(
            f"refine inputs disagree: {[p.shape for p in parts]}"
        )
    h = ad.concatenate(parts, axis=-1)
    h = h @ params["ref_in_w"] + params["ref_in_b"]
    cond = t_emb.reshape(t_emb.shape[0], 1, config.d)
    h = _cond_stack(h, cond, params, "ref", config)
    n = h.shape[1]
    return h.reshape(n, config.d) if squeeze else h


def decode(m_refined: Tensor, params: Parameters) -> Tensor:
    """Linear projection from latent width back to motion features."""
    return m_refined @ params["dec_w"] + params["dec_b"]


def predict(x_t, t, trajectory, anchors, params: Parameters,
            config: NetworkConfig) -> Tensor:
    """Full data prediction x0_hat = decode(refine(...)).

    Either condition may be None; missing conditions are replaced by the
    learned null embeddings, so all four condition combinations are valid.
    Batched inputs are supported: x_t (B, N, D), trajectory (B, N, 3),
    anchors as (poses (B, M, D_a), positions (M,)) with shared positions.
    """
    x_in, squeeze = _as_batch(x_t, config.feature_dim, "x_t")
    b, n, _ = x_in.shape
    t_emb = timestep_embedding(t, params, config)
    if t_emb.shape[0] == 1 and b > 1:
        t_emb = t_emb.broadcast_to((b, config.d))
    if trajectory is None:
        traj_feats = params["null_traj"].reshape(1, 1, config.d)
    else:
        traj_feats = encode_trajectory(trajectory, params, config)
        if traj_feats.ndim == 2:
            traj_feats = traj_feats.reshape(1, n, config.d)
    if isinstance(anchors, tuple):
        poses, positions = anchors
        anchor_feats = encode_anchors(poses, n, params, config,
                                      positions=positions)
    else:
        anchor_feats = encode_anchors(anchors, n, params, config)
    if anchor_feats.ndim == 2:
        anchor_feats = anchor_feats.reshape(1, n, config.d)
    traj_feats = traj_feats.broadcast_to((b, n, config.d))
    anchor_feats = anchor_feats.broadcast_to((b, n, config.d))
    img = traj_feats if config.img_condition == "trajectory" else anchor_feats
    m_init = initial_motion(x_in, img, t_emb, params, config)
    m_ref = refine(m_init, anchor_feats, traj_feats, t_emb, params, config)
    out = decode(m_ref, params)
    return out.reshape(n, config.feature_dim) if squeeze else out


def gradients(loss: Tensor, params: Parameters,
              missing: str = "error") -> dict[str, np.ndarray]:
    """Reverse-mode gradients of a recorded scalar loss for every
    parameter.  A parameter the forward pass never touched has no recorded
    gradient: with missing="error" (default) it raises MissingGradient,
    with missing="zero" it yields a zero array (useful when a condition
    branch legitimately went unused this step).
    """
    if missing not in ("error", "zero"):
        raise ValueError(f"missing must be 'error' or 'zero', got {missing!r}")
    loss.backward()
    out: dict[str, np.ndarray] = {}
    for name, tensor in params.items():
        if tensor.grad is None:
            if missing == "error":
                raise MissingGradient(
                    f"parameter {name!r} was not recorded on the tape"
                )
            out[name] = np.zeros_like(tensor.data)
        else:
            out[name] = tensor.grad
    return out
