"""Motion generation from trajectories and sparse pose anchors.

The package is organised around a small set of layers:

- ``motion``: core data model (skeleton, sequences, trajectories, anchors)
  plus file formats.
- ``anchor_filter``: uniform sampling of well-separated anchor frames.
- ``curriculum``: anchor-count schedule used during training.
- ``autodiff``: minimal reverse-mode engine on numpy arrays.
- ``diffusion``: noise schedules and the multistep ODE sampler.
- ``denoiser``: the conditional denoising network.
- ``objectives``: training losses.
- ``evalsuite``: evaluation metrics.
- ``synthetic`` / ``pipeline`` / ``cli``: data generation, the training
  loop with end-to-end entry points, and the console script.
"""

from . import errors
from .errors import PromoGenError

__all__ = ["errors", "PromoGenError"]
__version__ = "0.1.0"
