"""Stage-wise anchor curriculum.

Training is split into stages.  Early stages force many anchors (an easier,
heavily constrained task); later stages lower the minimum anchor count until
the model must cope with a single anchor.  Within each iteration the anchor
count f_n and minimum interval f_s are drawn uniformly from stage-dependent
ranges, always restricted to placements the anchor filter can satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchor_filter import FilterParams, count_valid
from .errors import InvalidStage

K_MIN_INITIAL = 20
FS_LOWER = 4


@dataclass(frozen=True)
class CurriculumConfig:
    """Schedule shape: total epochs, number of stages, the anchor-count
    ceiling, and the training sequence length.
    """

    e_total: int = 100
    e_stage: int = 4
    k_max: int = 30
    n_frames: int = 120

    def __post_init__(self):
        if self.e_stage < 1:
            raise ValueError(f"e_stage must be >= 1, got {self.e_stage}")
        if self.e_total < self.e_stage:
            raise ValueError(
                f"e_total ({self.e_total}) must be >= e_stage ({self.e_stage})"
            )
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if self.n_frames < 1:
            raise ValueError(f"n_frames must be >= 1, got {self.n_frames}")

    @property
    def epochs_per_stage(self) -> int:
        # the last stage absorbs any remainder
        return self.e_total // self.e_stage


@dataclass(frozen=True)
class IterationParams:
    """One iteration's anchor draw: count f_n, interval f_s, the stage it
    was drawn in, and whether f_s had to be clamped below its usual lower
    bound to stay feasible.
    """

    f_n: int
    f_s: int
    stage: int
    clamped: bool = False


def k_min_for_stage(s: int, e_stage: int) -> int:
    """Minimum anchor count at stage s: linear interpolation from
    K_MIN_INITIAL at the first stage down to 1 at the last,
    ⌊20 − 19(s−1)/(e_stage−1)⌋.

    A one-stage schedule has no interpolation range; it is treated as the
    terminal sparse stage, so K_min = 1.
    """
    if not 1 <= s <= e_stage:
        raise InvalidStage(f"stage {s} out of range [1, {e_stage}]")
    if e_stage == 1:
        return 1
    # floor of 20 - 19(s-1)/(e_stage-1), done in one integer division so
    # the floor applies to the whole expression
    num = K_MIN_INITIAL * (e_stage - 1) - (K_MIN_INITIAL - 1) * (s - 1)
    return num // (e_stage - 1)


def stage_of_epoch(e: int, config: CurriculumConfig) -> int:
    """Stage index of 1-based epoch e: ⌈e / epochs_per_stage⌉ clamped to
    the last stage.
    """
    if not 1 <= e <= config.e_total:
        raise InvalidStage(f"epoch {e} out of range [1, {config.e_total}]")
    s = -(-e // config.epochs_per_stage)
    return min(s, config.e_stage)


def fs_bounds(n_frames: int, f_n: int) -> tuple[int, int, bool]:
    """Range [low, high] to draw f_s from for a given anchor count, plus a
    flag marking that the usual lower bound had to be relaxed.

    The nominal upper bound ⌊N/f_n⌋ is intersected with the exact
    feasibility bound ⌊(N−f_n)/(f_n−1)⌋, since placing f_n anchors with
    interval f_s needs f_n + (f_n−1)·f_s frames.  When the result drops
    below the nominal lower bound the draw degrades to the feasible
    maximum rather than aborting.
    """
    if f_n < 1 or f_n > n_frames:
        raise ValueError(f"f_n {f_n} not placeable in {n_frames} frames")
    high = n_frames // f_n
    if f_n > 1:
        high = min(high, (n_frames - f_n) // (f_n - 1))
    if high < FS_LOWER:
        return high, high, True
    return FS_LOWER, high, False


def sample_iteration_params(
    s: int, config: CurriculumConfig, rng: np.random.Generator
) -> IterationParams:
    """Draw (f_n, f_s) for one training iteration at stage s.

    f_n is uniform over [K_min(s), min(k_max, n_frames)]; f_s is uniform
    over the fs_bounds range for that f_n.  The result is always feasible
    for the anchor filter.
    """
    k_min = k_min_for_stage(s, config.e_stage)
    f_n_high = min(config.k_max, config.n_frames)
    if f_n_high < k_min:
        raise InvalidStage(
            f"stage {s} needs at least {k_min} anchors but only "
            f"{f_n_high} fit in {config.n_frames} frames"
        )
    f_n = int(rng.integers(k_min, f_n_high + 1))
    low, high, clamped = fs_bounds(config.n_frames, f_n)
    f_s = high if clamped else int(rng.integers(low, high + 1))
    params = IterationParams(f_n=f_n, f_s=f_s, stage=s, clamped=clamped)
    assert count_valid(FilterParams(config.n_frames, f_n, f_s)) > 0
    return params
