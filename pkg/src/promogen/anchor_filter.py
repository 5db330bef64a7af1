"""Uniform sampling of well-separated anchor frames.

Placing f_n anchors in N frames so that consecutive anchors are more than
f_s frames apart is equivalent to choosing an f_n-subset of a shorter
"virtual" index range: removing the f_s mandatory spacer frames after each
anchor but the last leaves R = N - [f_n + (f_n-1)*f_s] free frames and
T_total = R + f_n virtual slots.  Choosing virtual positions uniformly and
mapping them back therefore samples uniformly over all valid placements.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import InfeasibleAnchors


@dataclass(frozen=True)
class FilterParams:
    """Anchor placement problem: n_frames is the sequence length N,
    count the number of anchors f_n, gap the minimum interval f_s
    (consecutive anchors must differ by strictly more than gap frames).
    """

    n_frames: int
    count: int
    gap: int

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError(f"n_frames must be >= 1, got {self.n_frames}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.gap < 0:
            raise ValueError(f"gap must be >= 0, got {self.gap}")

    @property
    def slack(self) -> int:
        """Free frames left after reserving every anchor and its spacers.
        Negative when no placement exists.
        """
        return self.n_frames - (self.count + (self.count - 1) * self.gap)

    @property
    def virtual_total(self) -> int:
        """Size of the virtual index range the anchors are drawn from."""
        return self.slack + self.count

    @property
    def feasible(self) -> bool:
        return self.slack >= 0


@dataclass(frozen=True)
class VirtualSelection:
    """A strictly increasing choice of 1-based virtual positions
    p_1 < ... < p_count from {1, ..., virtual_total}.
    """

    p: np.ndarray
    virtual_total: int

    def __post_init__(self):
        a = np.asarray(self.p, dtype=np.int64)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("virtual selection must be a non-empty 1-d array")
        if a[0] < 1 or a[-1] > self.virtual_total:
            raise ValueError(
                f"virtual positions must lie in [1, {self.virtual_total}]"
            )
        if np.any(np.diff(a) <= 0):
            raise ValueError("virtual positions must be strictly increasing")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "p", a)

    @property
    def count(self) -> int:
        return int(self.p.size)

    def slacks(self) -> np.ndarray:
        """Per-step free-frame increments: slacks[0] = p_1 - 1 and
        slacks[j] = p_{j+1} - p_j - 1.  All non-negative, and the first j
        of them sum to p_j - j.
        """
        out = np.empty(self.count, dtype=np.int64)
        out[0] = self.p[0] - 1
        out[1:] = np.diff(self.p) - 1
        return out


def count_valid(params: FilterParams) -> int:
    """Number of anchor placements satisfying the spacing constraint.
    Zero when the parameters are infeasible.
    """
    if not params.feasible:
        return 0
    return comb(params.virtual_total, params.count)


def map_virtual(sel: VirtualSelection, gap: int) -> np.ndarray:
    """Map a virtual selection to real 0-based frame indices by reinserting
    gap spacer frames after each anchor: x_j = (p_j - 1) + (j - 1) * gap,
    counting j from 1.
    """
    j = np.arange(sel.count, dtype=np.int64)
    return (sel.p - 1) + j * gap


def _map_virtual_recurrence(sel: VirtualSelection, gap: int) -> np.ndarray:
    """Step-by-step form of map_virtual: each anchor sits gap + 1 frames
    after the previous one plus its free-frame increment.  Kept as an
    independent cross-check of the closed form.
    """
    slacks = sel.slacks()
    out = np.empty(sel.count, dtype=np.int64)
    out[0] = slacks[0]
    for j in range(1, sel.count):
        out[j] = out[j - 1] + gap + slacks[j] + 1
    return out


def sample_anchors(params: FilterParams, rng: np.random.Generator) -> np.ndarray:
    """Draw one anchor placement uniformly over all count_valid(params)
    possibilities.  Raises InfeasibleAnchors when none exists.
    """
    if not params.feasible:
        raise InfeasibleAnchors(params.n_frames, params.count, params.gap)
    t_total = params.virtual_total
    # uniform k-combination via a partial Fisher-Yates shuffle over a
    # sparse view of [0, t_total)
    swapped: dict[int, int] = {}
    picked = np.empty(params.count, dtype=np.int64)
    for i in range(params.count):
        j = int(rng.integers(i, t_total))
        vi = swapped.get(i, i)
        vj = swapped.get(j, j)
        swapped[i], swapped[j] = vj, vi
        picked[i] = vj
    picked.sort()
    sel = VirtualSelection(p=picked + 1, virtual_total=t_total)
    return map_virtual(sel, params.gap)
