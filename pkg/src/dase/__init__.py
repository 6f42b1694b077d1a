"""Doubled adjacency spectral embedding (DASE) for core-periphery networks.

The package is organised bottom-up:

* :mod:`dase.graph`       block models, sampling, doubled adjacency
* :mod:`dase.spectral`    truncated SVD / symmetric eigensolvers
* :mod:`dase.embeddings`  SC, ASE and DASE node embeddings
* :mod:`dase.clustering`  k-means and Gaussian mixtures
* :mod:`dase.metrics`     NMI, misclustering, scree elbow
* :mod:`dase.theory`      Chernoff information and misclustering bounds
* :mod:`dase.harness`     simulation sweeps and real-data evaluation
"""

from dase.graph import (
    AdjacencyMatrix,
    BlockModel,
    CommunityAssignment,
    CorePeripheryParams,
    ExpectedMatrices,
    doubled_adjacency,
    edge_density,
    expected_matrices,
    latent_positions,
    sample_assignment,
    sample_sbm,
    scaled_block_matrix,
)
from dase.spectral import SingularTriplets, symmetric_eigs, truncated_svd
from dase.embeddings import Embedding, ase_embedding, dase_embedding, laplacian_sc_embedding
from dase.clustering import GMMResult, KMeansResult, gmm, kmeans, mse_criterion
from dase.metrics import choose_k_profile_likelihood, misclustering, nmi

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix",
    "BlockModel",
    "CommunityAssignment",
    "CorePeripheryParams",
    "Embedding",
    "ExpectedMatrices",
    "GMMResult",
    "KMeansResult",
    "SingularTriplets",
    "ase_embedding",
    "choose_k_profile_likelihood",
    "dase_embedding",
    "doubled_adjacency",
    "edge_density",
    "expected_matrices",
    "gmm",
    "kmeans",
    "laplacian_sc_embedding",
    "latent_positions",
    "misclustering",
    "mse_criterion",
    "nmi",
    "sample_assignment",
    "sample_sbm",
    "scaled_block_matrix",
    "symmetric_eigs",
    "truncated_svd",
]
