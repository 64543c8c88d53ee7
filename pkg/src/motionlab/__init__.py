"""motionlab: skeletal motion synthesis and kinematics optimization.

Subpackages:
  kinematics  so(3) exp/log maps, kinematic trees, forward kinematics
  autodiff    reverse-mode tape over dense float64 arrays
  tvae        conditioned temporal VAE: training, generation, applications
  metrics     FID / accuracy / diversity / multimodality evaluation
  geometry    texture blending, skinned-template fitting, ARAP reposing
  datasets    motion file formats, synthetic action generators, exports
"""

from . import backends

__version__ = "0.1.0"
__all__ = ["backends", "__version__"]
