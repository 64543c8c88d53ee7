from .animate import animate_mesh, motion_thetas
from .arap import SingularSystem, arap_deform, arap_energy
from .blend import (
    DisconnectedOccludedRegion,
    blend_objective,
    blend_occluded_texture,
    edge_graph_neighbors,
    transition_band,
)
from .correspond import (
    CorrespondenceSet,
    EmptyResult,
    build_correspondences,
    repose_targets,
)
from .fitting import (
    FitResult,
    GaussianMixturePrior,
    NonDecreasingObjective,
    fit_skinned_template,
    geman_mcclure,
    geman_mcclure_tensor,
    gmm_neg_log_likelihood,
    gmm_nll_tensor,
    load_prior,
    save_prior,
)
from .mesh import (
    MeshError,
    TriMesh,
    load_mesh_json,
    load_obj,
    save_mesh_json,
    save_obj,
)
from .template import (
    SkinnedTemplate,
    build_toy_template,
    load_template,
    save_template,
    template_mesh,
)
