"""Noise schedule, forward noising, and the multistep ODE sampler.

The forward process is the usual variance-preserving chain: at step t the
marginal is x_t = a_t * x0 + sigma_t * eps with a_t = sqrt(alpha_bar_t) and
a_t^2 + sigma_t^2 = 1.  Sampling integrates the probability-flow ODE with a
data-predicting network (the model outputs an estimate of x0, not of the
noise) using an exponential-integrator multistep scheme in log-SNR space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSchedule, ShapeError

_BETA_MIN = 1e-8
_BETA_MAX = 0.999


def _cosine_betas(t_steps: int) -> np.ndarray:
    # alpha_bar follows the squared-cosine profile; per-step betas are
    # recovered from consecutive ratios and clipped so every alpha stays in
    # (0, 1) and the log-SNR stays finite even at the final step
    s = 0.008
    ts = np.arange(t_steps + 1, dtype=np.float64) / t_steps
    f = np.cos((ts + s) / (1.0 + s) * np.pi / 2.0) ** 2
    abar = f / f[0]
    betas = 1.0 - abar[1:] / abar[:-1]
    return np.clip(betas, _BETA_MIN, _BETA_MAX)


def _linear_betas(t_steps: int) -> np.ndarray:
    return np.linspace(1e-4, 0.02, t_steps)


@dataclass(frozen=True)
class NoiseSchedule:
    """Discrete schedule over t = 1..T plus its continuous interpolation.

    Arrays are indexed [t-1].  drift/diffusion2 are the coefficients of the
    variance-preserving diffusion written as an SDE with unit step:
    drift = d(ln a)/dt = 0.5 ln(alpha_t), diffusion2 = -ln(alpha_t).
    """

    t_steps: int
    kind: str
    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)
    a: np.ndarray = field(init=False)
    sigma: np.ndarray = field(init=False)
    lam: np.ndarray = field(init=False)
    drift: np.ndarray = field(init=False)
    diffusion2: np.ndarray = field(init=False)
    _log_abar_knots: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.shape != (self.t_steps,):
            raise InvalidSchedule(
                f"betas shape {betas.shape} does not match T={self.t_steps}"
            )
        alphas = 1.0 - betas
        if np.any(alphas <= 0) or np.any(alphas >= 1):
            raise InvalidSchedule("per-step alpha must lie in (0, 1)")
        log_abar = np.cumsum(np.log(alphas))
        abar = np.exp(log_abar)
        a = np.sqrt(abar)
        sigma = np.sqrt(1.0 - abar)
        lam = np.log(a / sigma)
        if not (np.all(np.isfinite(lam)) and np.all(np.diff(abar) < 0)):
            raise InvalidSchedule("schedule must be strictly decreasing with finite log-SNR")
        # interpolation knots at integer t = 0..T; t=0 carries no noise
        knots = np.concatenate([[0.0], log_abar])
        for name, val in [
            ("betas", betas), ("alphas", alphas), ("alpha_bar", abar),
            ("a", a), ("sigma", sigma), ("lam", lam),
            ("drift", 0.5 * np.log(alphas)), ("diffusion2", -np.log(alphas)),
            ("_log_abar_knots", knots),
        ]:
            val = np.ascontiguousarray(val)
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    # continuous-time views, valid for t in (0, T]

    def log_alpha_bar(self, t: float) -> float:
        return float(np.interp(t, np.arange(self.t_steps + 1),
                               self._log_abar_knots))

    def a_of(self, t: float) -> float:
        return float(np.exp(0.5 * self.log_alpha_bar(t)))

    def sigma_of(self, t: float) -> float:
        return float(np.sqrt(1.0 - np.exp(self.log_alpha_bar(t))))

    def lambda_of(self, t: float) -> float:
        la = self.log_alpha_bar(t)
        return float(0.5 * la - 0.5 * np.log1p(-np.exp(la)))


def build_schedule(t_steps: int, kind: str = "cosine") -> NoiseSchedule:
    if t_steps < 1:
        raise InvalidSchedule(f"T must be >= 1, got {t_steps}")
    if kind == "cosine":
        betas = _cosine_betas(t_steps)
    elif kind == "linear":
        betas = _linear_betas(t_steps)
    else:
        raise InvalidSchedule(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(t_steps=t_steps, kind=kind, betas=betas)


def q_sample(x0: np.ndarray, t, noise: np.ndarray,
             schedule: NoiseSchedule) -> np.ndarray:
    """Noise clean features to diffusion step t: a_t * x0 + sigma_t * eps.

    t may be a single integer or an integer array with one entry per
    leading-axis item of x0 (per-sample timesteps in a batch).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x0.shape:
        raise ShapeError(f"noise shape {noise.shape} != x0 shape {x0.shape}")
    t_arr = np.asarray(t)
    if np.any(t_arr < 1) or np.any(t_arr > schedule.t_steps):
        raise InvalidSchedule(f"t must lie in [1, {schedule.t_steps}]")
    a = schedule.a[t_arr - 1]
    s = schedule.sigma[t_arr - 1]
    if t_arr.ndim > 0:
        if t_arr.shape[0] != x0.shape[0]:
            raise ShapeError(
                f"per-sample t needs {x0.shape[0]} entries, got {t_arr.shape}"
            )
        extra = (1,) * (x0.ndim - 1)
        a = a.reshape(t_arr.shape[0], *extra)
        s = s.reshape(t_arr.shape[0], *extra)
    return a * x0 + s * noise


def time_grid(schedule: NoiseSchedule, steps: int,
              kind: str = "log_snr") -> np.ndarray:
    """Decreasing time grid from T down to the smallest schedule index.

    "log_snr" (default) spaces the points uniformly in lambda, which keeps
    every integration interval comparable and gives the second-order scheme
    its full convergence rate.  "time" spaces them uniformly in t with the
    terminal point clamped to t=1; it concentrates nearly all of the
    log-SNR range in the last interval and converges noticeably slower.
    """
    t_total = schedule.t_steps
    if kind == "time":
        grid = np.linspace(t_total, 0.0, steps)
        grid = np.maximum(grid, 1.0)
        # collapse duplicates the clamp may create when steps > T
        keep = np.concatenate([[True], np.diff(grid) < 0])
        return grid[keep]
    if kind != "log_snr":
        raise ValueError(f"unknown grid kind {kind!r}")
    if steps == 1:
        return np.array([float(t_total)])
    lams = np.linspace(schedule.lambda_of(t_total), schedule.lambda_of(1.0),
                       steps)
    ts = np.arange(1, t_total + 1, dtype=np.float64)
    # lam is strictly decreasing in t, so reverse both for interpolation
    grid = np.interp(lams, schedule.lam[::-1], ts[::-1])
    grid[0], grid[-1] = float(t_total), 1.0
    return grid


def sample(
    denoiser,
    shape: tuple[int, ...],
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    trajectory=None,
    anchors=None,
    steps: int = 25,
    order: int = 2,
    grid_kind: str = "log_snr",
) -> np.ndarray:
    """Draw one motion by integrating the reverse ODE from pure noise.

    denoiser(x_t, t, trajectory, anchors) must return the clean-data
    estimate with x_t's shape.  `steps` counts denoiser evaluations.  The
    second-order scheme combines the two most recent data predictions:
    with h = lambda(t_next) - lambda(t_cur) and r = h_prev / h,

        d = (1 + 1/(2r)) * pred_cur - 1/(2r) * pred_prev
        x_next = (sigma_next / sigma_cur) * x - a_next * (e^{-h} - 1) * d

    The first step has no history and falls back to first order.  The final
    evaluation returns the data prediction at the terminal grid point.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")

    def call(x, t):
        pred = np.asarray(denoiser(x, t, trajectory, anchors), dtype=np.float64)
        if pred.shape != x.shape:
            raise ShapeError(
                f"denoiser returned shape {pred.shape}, expected {x.shape}"
            )
        return pred

    grid = time_grid(schedule, steps, grid_kind)
    x = rng.standard_normal(shape)
    prev_pred = None
    h_prev = None
    for i in range(len(grid) - 1):
        t_cur, t_next = grid[i], grid[i + 1]
        pred = call(x, t_cur)
        h = schedule.lambda_of(t_next) - schedule.lambda_of(t_cur)
        if order == 2 and prev_pred is not None:
            r = h_prev / h
            d = (1.0 + 1.0 / (2.0 * r)) * pred - (1.0 / (2.0 * r)) * prev_pred
        else:
            d = pred
        ratio = schedule.sigma_of(t_next) / schedule.sigma_of(t_cur)
        x = ratio * x - schedule.a_of(t_next) * np.expm1(-h) * d
        prev_pred = pred
        h_prev = h
    return call(x, grid[-1])
