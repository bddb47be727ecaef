"""Diffusion-guided self-supervised pretraining on graphs and hypergraphs.

The package builds analytical diffusion kernels (random-walk, PPR, heat)
over graphs and hypergraphs, uses them to guide drop/mask augmentation and
readout, and pretrains a shared message-passing encoder with either a
contrastive (NT-Xent) or masked-autoencoding objective. Synthetic data
generators, a linear-probe evaluation harness, and a CLI round it out.

Hot CSR kernels are numba-jitted with a bit-identical pure-numpy fallback;
select with DIFFGRAPH_BACKEND={numba,numpy} or `use_backend()`.
"""
from .augment import (
    AugmentConfig,
    AugmentedView,
    DropPlan,
    drop_plan,
    drop_probabilities,
    mask_count,
    node_mask_weights,
    sample_node_mask,
    sample_view,
)
from .backend import active_backend, use_backend
from .data import (
    LabeledDataset,
    community_diffusion_demo,
    connectome_from_matrix,
    generate_sbm,
    generate_sbm_benchmark,
    hypergraph_from_knn,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    save_dataset,
    star_expansion,
)
from .diffusion import (
    DiffusionConfig,
    DiffusionKernel,
    build_kernel,
    diffuse_features,
    enhanced_adjacency,
    sparsify_kernel,
)
from .encoder import EncoderConfig, ParameterStore, encode, init_encoder
from .errors import ConfigError, DataError, DiffgraphError, TrainingDivergedError
from .evaluation import ProbeResult, embed_dataset, linear_probe
from .gcl import GclConfig, ntxent_loss, prepare_instance, train_gcl
from .gmae import GmaeConfig, prepare_gmae_instance, train_gmae
from .graphs import (
    Graph,
    Hypergraph,
    graph_from_edges,
    hypergraph_from_memberships,
    laplacian_matrix,
    permute,
    transition_matrix,
)
from .readout import ReadoutConfig, apply_readout
from .rng import stream_rng
from .sparse import SparseMatrix

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "AugmentedView",
    "ConfigError",
    "DataError",
    "DiffgraphError",
    "DiffusionConfig",
    "DiffusionKernel",
    "DropPlan",
    "EncoderConfig",
    "GclConfig",
    "GmaeConfig",
    "Graph",
    "Hypergraph",
    "LabeledDataset",
    "ParameterStore",
    "ProbeResult",
    "ReadoutConfig",
    "SparseMatrix",
    "TrainingDivergedError",
    "active_backend",
    "apply_readout",
    "build_kernel",
    "community_diffusion_demo",
    "connectome_from_matrix",
    "diffuse_features",
    "drop_plan",
    "drop_probabilities",
    "embed_dataset",
    "encode",
    "enhanced_adjacency",
    "generate_sbm",
    "generate_sbm_benchmark",
    "graph_from_edges",
    "hypergraph_from_knn",
    "hypergraph_from_memberships",
    "init_encoder",
    "laplacian_matrix",
    "linear_probe",
    "load_checkpoint",
    "load_dataset",
    "mask_count",
    "node_mask_weights",
    "ntxent_loss",
    "permute",
    "prepare_gmae_instance",
    "prepare_instance",
    "sample_node_mask",
    "sample_view",
    "save_checkpoint",
    "save_dataset",
    "sparsify_kernel",
    "star_expansion",
    "stream_rng",
    "train_gcl",
    "train_gmae",
    "transition_matrix",
    "use_backend",
]
