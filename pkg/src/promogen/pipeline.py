"""End-to-end training, sampling, and evaluation.

Training follows the staged anchor curriculum: each epoch belongs to a
stage, the stage fixes the minimum anchor count, and every iteration draws
an anchor placement through the uniform filter before one denoising step is
trained on a random timestep.  Checkpoints are a single file holding a JSON
manifest plus float32 tensor blobs with a checksum.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .anchor_filter import FilterParams, sample_anchors
from .autodiff import Tensor
from .curriculum import (
    CurriculumConfig,
    IterationParams,
    fs_bounds,
    k_min_for_stage,
    sample_iteration_params,
    stage_of_epoch,
)
from .denoiser import (
    NetworkConfig,
    Parameters,
    gradients,
    init_parameters,
    predict,
)
from .diffusion import build_schedule, q_sample, sample
from .errors import CheckpointError, ShapeError, UndefinedMetric, VersionError
from .evalsuite import (
    MetricsReport,
    directional_consistency,
    diversity,
    fid,
    joint_smoothness,
    k_mpjpe,
    mpjpe,
)
from .motion import (
    AnchorSet,
    MotionSequence,
    Skeleton,
    Trajectory,
    extract_trajectory,
    gather_anchors,
    save_pmg,
    validate,
)
from .objectives import (
    LossComponents,
    LossWeights,
    PhysicalParams,
    adversarial_losses,
    anchor_loss,
    discriminator_logits,
    init_discriminator,
    joint_loss,
    l2_loss,
    physical_loss,
    total_loss,
)

CHECKPOINT_VERSION = 1

# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the dataset."""

    learning_rate: float = 1e-4
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    e_total: int = 100
    e_stage: int = 4
    k_max: int = 30
    t_steps: int = 1000
    schedule: str = "cosine"
    network: NetworkConfig = field(default_factory=NetworkConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    phys: PhysicalParams = field(default_factory=PhysicalParams)
    seed: int = 0
    curriculum: bool = True
    # draw (f_n, f_s) fresh every iteration instead of once per epoch
    redraw_per_iteration: bool = True
    # only generator-adversarial terms at t <= gan_t_max contribute
    gan_t_max: int | None = None
    disc_hidden: int = 64
    max_iterations: int | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {b}")
        if not self.adam_eps > 0:
            raise ValueError(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.t_steps < 1:
            raise ValueError(f"t_steps must be >= 1, got {self.t_steps}")
        if self.e_stage < 1 or self.e_total < self.e_stage:
            raise ValueError(
                f"need e_total >= e_stage >= 1, got {self.e_total}, {self.e_stage}"
            )
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if self.gan_t_max is not None and not 1 <= self.gan_t_max <= self.t_steps:
            raise ValueError(
                f"gan_t_max must lie in [1, {self.t_steps}], got {self.gan_t_max}"
            )
        if self.disc_hidden < 1:
            raise ValueError(f"disc_hidden must be >= 1, got {self.disc_hidden}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1 when set")


@dataclass(frozen=True)
class NormStats:
    """Per-channel feature statistics plus the motion metadata a checkpoint
    must carry to reconstruct sequences."""

    mean: np.ndarray
    std: np.ndarray
    fps: float
    skeleton: Skeleton


def compute_norm(dataset: list[MotionSequence]) -> NormStats:
    """Channel-wise mean/std over every frame of the dataset, std floored
    so constant channels stay finite under normalization."""
    if not dataset:
        raise ValueError("dataset is empty")
    feats = np.concatenate([m.features for m in dataset], axis=0)
    mean = feats.mean(axis=0)
    std = np.maximum(feats.std(axis=0), 1e-6)
    return NormStats(mean=mean, std=std, fps=dataset[0].fps,
                     skeleton=dataset[0].skeleton)


def _stack_features(dataset: list[MotionSequence]) -> np.ndarray:
    n = dataset[0].n_frames
    d = dataset[0].feature_dim
    fps = dataset[0].fps
    for m in dataset:
        if m.n_frames != n or m.feature_dim != d or m.fps != fps:
            raise ShapeError(
                "training assumes a fixed-length dataset: all sequences must "
                "share n_frames, feature width, and fps"
            )
    return np.stack([m.features for m in dataset], axis=0)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Adaptive-moment gradient descent, float64 state."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: Parameters, grads: dict[str, np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in sorted(grads):
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name].data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    params: Parameters
    disc: Parameters | None
    norm: NormStats
    config: TrainConfig
    log: list[dict]
    loss_history: list[float]

    @property
    def initial_loss(self) -> float:
        return self.loss_history[0]

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]

    def save(self, path: str):
        save_checkpoint(self.params, self.config, self.norm, path,
                        disc=self.disc)


def _draw_regular(cur: CurriculumConfig, rng: np.random.Generator) -> IterationParams:
    """Baseline draw with no curriculum: f_n uniform over the full range."""
    f_n = int(rng.integers(1, min(cur.k_max, cur.n_frames) + 1))
    low, high, clamped = fs_bounds(cur.n_frames, f_n)
    f_s = high if clamped else int(rng.integers(low, high + 1))
    return IterationParams(f_n=f_n, f_s=f_s, stage=0, clamped=clamped)


def _draw_params(cur: CurriculumConfig, stage: int, curriculum: bool,
                 rng: np.random.Generator) -> IterationParams:
    if curriculum:
        return sample_iteration_params(stage, cur, rng)
    return _draw_regular(cur, rng)


def train(dataset: list[MotionSequence], config: TrainConfig) -> TrainResult:
    """Fit the denoiser to the dataset with the staged anchor curriculum.

    Per epoch: resolve the stage and its minimum anchor count, then for each
    batch draw (f_n, f_s), place anchors through the uniform filter, noise
    the batch to a uniform random timestep, predict the clean motion, and
    apply the weighted loss.  With curriculum off, f_n is uniform over
    [1, k_max] every iteration.  Deterministic under config.seed.
    """
    feats = _stack_features(dataset)
    norm = compute_norm(dataset)
    normed = (feats - norm.mean) / norm.std
    n_seq, n_frames, width = normed.shape
    net = config.network
    if width != net.feature_dim:
        raise ShapeError(
            f"dataset width {width} does not match network feature_dim "
            f"{net.feature_dim}"
        )
    if n_frames > net.n_max:
        raise ShapeError(
            f"dataset length {n_frames} exceeds network n_max {net.n_max}"
        )

    rng = np.random.default_rng(config.seed)
    params = init_parameters(net, seed=config.seed)
    schedule = build_schedule(config.t_steps, config.schedule)
    cur = CurriculumConfig(e_total=config.e_total, e_stage=config.e_stage,
                           k_max=config.k_max, n_frames=n_frames)
    use_gan = config.weights.lambda4 > 0
    use_phys = config.weights.lambda5 > 0
    disc = None
    opt_d = None
    if use_gan:
        disc = init_discriminator(width, hidden=config.disc_hidden,
                                  seed=config.seed + 1)
        opt_d = Adam(config.learning_rate, config.beta1, config.beta2,
                     config.adam_eps)
    opt = Adam(config.learning_rate, config.beta1, config.beta2,
               config.adam_eps)
    gan_t_max = config.gan_t_max or config.t_steps

    log: list[dict] = []
    loss_history: list[float] = []
    total_iters = 0
    done = False
    for epoch in range(1, config.e_total + 1):
        if done:
            break
        stage = stage_of_epoch(epoch, cur) if config.curriculum else 0
        k_min = k_min_for_stage(stage, cur.e_stage) if config.curriculum else 1
        ip = _draw_params(cur, stage, config.curriculum, rng)
        order = rng.permutation(n_seq)
        epoch_losses: list[float] = []
        fn_draws: list[int] = []
        for start in range(0, n_seq, config.batch_size):
            if config.max_iterations is not None and total_iters >= config.max_iterations:
                done = True
                break
            if config.redraw_per_iteration and epoch_losses:
                ip = _draw_params(cur, stage, config.curriculum, rng)
            fn_draws.append(ip.f_n)
            idx = order[start:start + config.batch_size]
            x0 = normed[idx]
            b = x0.shape[0]

            positions = sample_anchors(
                FilterParams(n_frames=n_frames, count=ip.f_n, gap=ip.f_s), rng
            )
            # spacing guarantee from the filter: gaps strictly exceed f_s
            assert positions.size == ip.f_n
            assert np.all(np.diff(positions) >= ip.f_s + 1)

            t = rng.integers(1, config.t_steps + 1, size=b)
            noise = rng.standard_normal(x0.shape)
            x_t = q_sample(x0, t, noise, schedule)

            # batch-level condition dropout so single-condition and
            # unconditional use stay in distribution
            traj_cond = x0[:, :, :3] if rng.random() >= net.p_drop else None
            anchor_cond = ((x0[:, positions, 3:], positions)
                           if rng.random() >= net.p_drop else None)

            pred = predict(x_t, t, traj_cond, anchor_cond, params, net)

            l_rec = l2_loss(pred, x0)
            l_anchor = anchor_loss(pred, x0, positions)
            pred_world = pred * norm.std + norm.mean
            l_joint = joint_loss(pred_world, feats[idx], norm.skeleton)
            l_phys = (physical_loss(pred_world, norm.skeleton, config.phys,
                                    fps=norm.fps)
                      if use_phys else 0.0)
            adv = 0.0
            if use_gan:
                real = Tensor(x0)
                loss_d, _ = adversarial_losses(disc, real, pred)
                disc.zero_grads()
                loss_d.backward()
                opt_d.step(disc, {k: v.grad for k, v in disc.items()
                                  if v.grad is not None})
                disc.zero_grads()
                mask = (t <= gan_t_max).astype(np.float64)
                if mask.sum() > 0:
                    per = ad.softplus(-discriminator_logits(disc, pred))
                    adv = (per * Tensor(mask)).sum() * (1.0 / mask.sum())

            comps = LossComponents(reconstruction=l_rec, anchor=l_anchor,
                                   joint=l_joint, adversarial=adv,
                                   physical=l_phys)
            loss = total_loss(comps, config.weights)
            params.zero_grads()
            grads = gradients(loss, params, missing="zero")
            opt.step(params, grads)

            epoch_losses.append(float(loss.data))
            loss_history.append(float(loss.data))
            total_iters += 1
        if epoch_losses:
            log.append({
                "epoch": epoch,
                "stage": stage,
                "k_min": k_min,
                "mean_loss": float(np.mean(epoch_losses)),
                "iterations": len(epoch_losses),
                "f_n_draws": fn_draws,
            })
    return TrainResult(params=params, disc=disc, norm=norm, config=config,
                       log=log, loss_history=loss_history)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def _config_to_json(config: TrainConfig) -> dict:
    return asdict(config)


def _config_from_json(d: dict) -> TrainConfig:
    d = dict(d)
    d["network"] = NetworkConfig(**d["network"])
    d["weights"] = LossWeights(**d["weights"])
    d["phys"] = PhysicalParams(**d["phys"])
    return TrainConfig(**d)


def save_checkpoint(params: Parameters, config: TrainConfig, norm: NormStats,
                    path: str, disc: Parameters | None = None):
    """Write a single-file checkpoint: one JSON manifest line, then the
    float32 little-endian tensor blobs it describes, checksummed."""
    entries = []
    blobs = []
    offset = 0

    def add(group: str, name: str, tensor: Tensor):
        nonlocal offset
        raw = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
        entries.append({
            "group": group,
            "name": name,
            "shape": list(tensor.data.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)

    for name in params.names():
        add("model", name, params[name])
    if disc is not None:
        for name in disc.names():
            add("disc", name, disc[name])
    blob = b"".join(blobs)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "kind": "promogen-checkpoint",
        "config": _config_to_json(config),
        "norm": {
            "mean": [float(v) for v in norm.mean],
            "std": [float(v) for v in norm.std],
            "fps": float(norm.fps),
            "parents": list(norm.skeleton.parents),
            "foot_joints": list(norm.skeleton.foot_joints),
        },
        "tensors": entries,
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    with open(path, "wb") as f:
        f.write(json.dumps(manifest).encode("utf-8"))
        f.write(b"\n")
        f.write(blob)


@dataclass
class CheckpointBundle:
    params: Parameters
    disc: Parameters | None
    config: TrainConfig
    norm: NormStats


def load_checkpoint(path: str) -> CheckpointBundle:
    with open(path, "rb") as f:
        header = f.readline()
        try:
            manifest = json.loads(header.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"unreadable checkpoint manifest: {e}") from e
        blob = f.read()
    if manifest.get("kind") != "promogen-checkpoint":
        raise CheckpointError("not a checkpoint file")
    version = manifest.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"checkpoint format {version!r} is not supported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    if hashlib.sha256(blob).hexdigest() != manifest.get("sha256"):
        raise CheckpointError("checkpoint blob failed its checksum")
    groups: dict[str, dict[str, Tensor]] = {"model": {}, "disc": {}}
    for e in manifest["tensors"]:
        raw = blob[e["offset"]:e["offset"] + e["nbytes"]]
        a = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        a = a.reshape(tuple(e["shape"]))
        groups[e["group"]][e["name"]] = Tensor(a, requires_grad=True)
    config = _config_from_json(manifest["config"])
    nm = manifest["norm"]
    skeleton = Skeleton(parents=tuple(nm["parents"]),
                        foot_joints=tuple(nm["foot_joints"]))
    norm = NormStats(mean=np.asarray(nm["mean"], dtype=np.float64),
                     std=np.asarray(nm["std"], dtype=np.float64),
                     fps=float(nm["fps"]), skeleton=skeleton)
    disc = Parameters(groups["disc"]) if groups["disc"] else None
    return CheckpointBundle(params=Parameters(groups["model"]), disc=disc,
                            config=config, norm=norm)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _normalize_conditions(bundle: CheckpointBundle, trajectory, anchors):
    norm = bundle.norm
    traj_cond = None
    if trajectory is not None:
        pos = trajectory.positions if isinstance(trajectory, Trajectory) \
            else np.asarray(trajectory, dtype=np.float64)
        traj_cond = (pos - norm.mean[:3]) / norm.std[:3]
    anchor_cond = None
    if anchors is not None and anchors.count > 0:
        poses = (anchors.poses - norm.mean[3:]) / norm.std[3:]
        anchor_cond = (poses, anchors.positions)
    return traj_cond, anchor_cond


def _generate(bundle: CheckpointBundle, n_frames: int, trajectory, anchors,
              steps: int, rng: np.random.Generator) -> MotionSequence:
    norm = bundle.norm
    net = bundle.config.network
    traj_cond, anchor_cond = _normalize_conditions(bundle, trajectory, anchors)
    schedule = build_schedule(bundle.config.t_steps, bundle.config.schedule)

    def denoise(x_t, t, traj, anch):
        return predict(x_t, t, traj, anch, bundle.params, net).data

    out = sample(denoise, (n_frames, net.feature_dim), schedule, rng,
                 trajectory=traj_cond, anchors=anchor_cond, steps=steps)
    feats = out * norm.std + norm.mean
    return validate(MotionSequence(features=feats, fps=norm.fps,
                                   skeleton=norm.skeleton))


def sample_motion(checkpoint, trajectory: Trajectory | None = None,
                  anchors: AnchorSet | None = None, steps: int = 25,
                  seed: int = 0, n_frames: int | None = None,
                  out: str | None = None,
                  svg: str | None = None) -> MotionSequence:
    """Generate one motion from a checkpoint under any condition subset.

    Sequence length comes from the trajectory, else the anchor set, else
    n_frames.  Writes the motion to `out` (.pmg) and a top-down path plot
    to `svg` when those paths are given.  Deterministic under seed.
    """
    bundle = checkpoint if isinstance(checkpoint, CheckpointBundle) \
        else load_checkpoint(checkpoint)
    if trajectory is not None:
        n = trajectory.n_frames
    elif anchors is not None:
        n = anchors.n_frames
    elif n_frames is not None:
        n = n_frames
    else:
        raise ValueError(
            "need a trajectory, an anchor set, or n_frames to fix the length"
        )
    if anchors is not None and anchors.n_frames != n:
        raise ShapeError(
            f"anchor set spans {anchors.n_frames} frames, expected {n}"
        )
    if trajectory is not None and trajectory.n_frames != n:
        raise ShapeError(
            f"trajectory spans {trajectory.n_frames} frames, expected {n}"
        )
    if n > bundle.config.network.n_max:
        raise ShapeError(
            f"length {n} exceeds network limit {bundle.config.network.n_max}"
        )
    rng = np.random.default_rng(seed)
    motion = _generate(bundle, n, trajectory, anchors, steps, rng)
    if out:
        save_pmg(motion, out)
    if svg:
        positions = anchors.positions if anchors is not None else None
        save_path_svg(motion, svg, anchor_positions=positions)
    return motion


def _lerp_color(c0: tuple, c1: tuple, u: float) -> str:
    r = tuple(round(a + (b - a) * u) for a, b in zip(c0, c1))
    return f"#{r[0]:02x}{r[1]:02x}{r[2]:02x}"


def save_path_svg(motion: MotionSequence, path: str,
                  anchor_positions=None, size: int = 480):
    """Top-down (x, z) plot of the pelvis path, colored from purple at the
    first frame to yellow at the last, with circles at anchor frames."""
    purple, yellow = (0x6A, 0x0D, 0xAD), (0xFF, 0xD7, 0x00)
    xz = motion.features[:, [0, 2]]
    lo = xz.min(axis=0)
    hi = xz.max(axis=0)
    span = max(float((hi - lo).max()), 1e-6)
    margin = 0.08 * size

    def to_px(p):
        q = (p - lo) / span
        return (margin + q[0] * (size - 2 * margin),
                size - margin - q[1] * (size - 2 * margin))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    n = motion.n_frames
    for i in range(n - 1):
        x1, y1 = to_px(xz[i])
        x2, y2 = to_px(xz[i + 1])
        color = _lerp_color(purple, yellow, i / max(n - 2, 1))
        parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{color}" stroke-width="3" stroke-linecap="round"/>'
        )
    if anchor_positions is not None:
        for p in np.asarray(anchor_positions, dtype=np.int64):
            x, y = to_px(xz[int(p)])
            parts.append(
                f'<circle cx="{x:.2f}" cy="{y:.2f}" r="6" fill="none" '
                f'stroke="#1b1b1b" stroke-width="2"/>'
            )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvaluationReport:
    protocol: tuple[int, ...]
    per_fn: dict[int, MetricsReport]
    ci: dict[int, dict[str, tuple[float, float]]]
    n_items: int
    seed: int
    steps: int

    def as_dict(self) -> dict:
        return {
            "protocol": list(self.protocol),
            "per_fn": {str(k): v.as_dict() for k, v in self.per_fn.items()},
            "ci": {str(k): {m: list(v) for m, v in d.items()}
                   for k, d in self.ci.items()},
            "n_items": self.n_items,
            "seed": self.seed,
            "steps": self.steps,
        }


def diffusion_generator(bundle: CheckpointBundle, trajectory, anchors,
                        steps: int, rng: np.random.Generator,
                        reference: MotionSequence | None = None) -> MotionSequence:
    """Default evaluation generator: the trained diffusion sampler.  The
    reference motion is accepted for interface parity and ignored."""
    n = trajectory.n_frames if trajectory is not None else anchors.n_frames
    return _generate(bundle, n, trajectory, anchors, steps, rng)


def _bootstrap_ci(values: np.ndarray, rng: np.random.Generator,
                  resamples: int = 200) -> tuple[float, float]:
    means = np.empty(resamples)
    n = values.size
    for i in range(resamples):
        means[i] = values[rng.integers(0, n, size=n)].mean()
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


def evaluate(checkpoint, dataset: list[MotionSequence],
             protocol: tuple[int, ...] = (1, 3, 5, 7, 9),
             steps: int = 25, seed: int = 0, generator=None,
             bootstrap: int = 200) -> EvaluationReport:
    """Score a checkpoint on a dataset at each anchor density in the
    protocol.

    Per item: draw f_s by the curriculum rule, place anchors through the
    uniform filter, condition on the item's own trajectory plus those
    anchors, generate, and score.  Per-item metrics get mean plus a seeded
    bootstrap confidence interval; set-level metrics (diversity, fid) are
    point estimates.  Items where a metric is undefined are skipped for
    that metric; an all-undefined metric reports NaN.

    Randomness is split into per-item substreams: anchor draws come from a
    stream keyed by (seed, f_n, item) so each density's numbers do not
    depend on which other densities the protocol contains, and the
    generator's stream is keyed by (seed, item) only, so every density
    sees the same generation noise on the same item and density-to-density
    differences reflect the conditioning, not resampled noise.
    """
    bundle = checkpoint if isinstance(checkpoint, CheckpointBundle) \
        else load_checkpoint(checkpoint)
    if not dataset:
        raise ValueError("dataset is empty")
    if dataset[0].feature_dim != bundle.config.network.feature_dim:
        raise ShapeError(
            f"dataset width {dataset[0].feature_dim} does not match "
            f"checkpoint feature_dim {bundle.config.network.feature_dim}"
        )
    if generator is None:
        generator = diffusion_generator
    boot_rng = np.random.default_rng(seed)
    skeleton = dataset[0].skeleton
    per_fn: dict[int, MetricsReport] = {}
    ci: dict[int, dict[str, tuple[float, float]]] = {}
    for f_n in protocol:
        per_item: dict[str, list[float]] = {
            "mpjpe": [], "k_mpjpe": [], "js": [], "dm": [],
        }
        generated: list[MotionSequence] = []
        for index, item in enumerate(dataset):
            draw_rng = np.random.default_rng((seed, f_n, index))
            low, high, clamped = fs_bounds(item.n_frames, f_n)
            f_s = high if clamped else int(draw_rng.integers(low, high + 1))
            positions = sample_anchors(
                FilterParams(n_frames=item.n_frames, count=f_n, gap=f_s),
                draw_rng,
            )
            anchors = gather_anchors(item, positions)
            traj = extract_trajectory(item)
            gen = generator(bundle, traj, anchors, steps,
                            np.random.default_rng((seed, index)),
                            reference=item)
            generated.append(gen)
            per_item["mpjpe"].append(mpjpe(gen, item, skeleton))
            per_item["k_mpjpe"].append(k_mpjpe(gen, item, skeleton, positions))
            for key, fn in (("js", lambda: joint_smoothness(gen, skeleton)),
                            ("dm", lambda: directional_consistency(gen, traj))):
                try:
                    per_item[key].append(fn())
                except UndefinedMetric:
                    pass
        try:
            div = diversity(generated)
        except UndefinedMetric:
            div = math.nan
        try:
            fid_val = fid(generated, dataset)
        except UndefinedMetric:
            fid_val = math.nan

        def agg(key):
            vals = per_item[key]
            return float(np.mean(vals)) if vals else math.nan

        per_fn[f_n] = MetricsReport(
            mpjpe=agg("mpjpe"), k_mpjpe=agg("k_mpjpe"), js=agg("js"),
            diversity=div, dm=agg("dm"), fid=fid_val,
            n_generated=len(generated), n_reference=len(dataset), seed=seed,
        )
        ci[f_n] = {}
        for key, vals in per_item.items():
            if vals:
                ci[f_n][key] = _bootstrap_ci(np.asarray(vals), boot_rng,
                                             bootstrap)
    return EvaluationReport(protocol=tuple(protocol), per_fn=per_fn, ci=ci,
                            n_items=len(dataset), seed=seed, steps=steps)
