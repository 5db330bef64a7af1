"""Exception types shared across the package.

Every error raised by library code derives from PromoGenError so callers
can catch one base class at the CLI boundary.
"""


class PromoGenError(Exception):
    """Base class for all package errors."""


class InvalidMotion(PromoGenError):
    """Motion data violates a structural constraint (shape, dtype, order)."""


class NonFinite(InvalidMotion):
    """Motion features contain NaN or infinity."""


class TooShort(InvalidMotion):
    """Motion has fewer than two frames."""


class BadWidth(InvalidMotion):
    """Motion feature width does not match the skeleton."""


class InfeasibleAnchors(PromoGenError):
    """No anchor placement exists for the requested count and gap."""

    def __init__(self, n_frames: int, count: int, gap: int):
        self.n_frames = n_frames
        self.count = count
        self.gap = gap
        need = count + (count - 1) * gap
        super().__init__(
            f"cannot place {count} anchors with pairwise gap > {gap} "
            f"in {n_frames} frames (needs at least {need})"
        )


class InvalidStage(PromoGenError):
    """Curriculum stage or epoch index is out of range."""


class InvalidSchedule(PromoGenError):
    """Diffusion schedule parameters are out of range."""


class MissingGradient(PromoGenError):
    """A gradient was requested for a tensor that did not participate
    in the traced computation."""


class InvalidAnchorPositions(PromoGenError):
    """Anchor frame indices do not fit the sequence being conditioned."""


class ShapeError(PromoGenError):
    """An array has a shape incompatible with the requested operation."""


class CheckpointError(PromoGenError):
    """Checkpoint file is unreadable, corrupt, or from an unknown version."""


class VersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version."""


class UndefinedMetric(PromoGenError):
    """A metric is mathematically undefined for the given inputs."""
