"""Clustering with softmax autoencoders.

A one-hidden-layer autoencoder whose softmax bottleneck carries soft cluster
assignments and whose loss is the expanded objective of an isotropic
Gaussian mixture, plus the deep variant that nests it inside an MLP
autoencoder for joint embedding and clustering. Ships with k-means / EM
baselines, external clustering metrics, dataset generators and a CLI.
"""

from .baselines import GmmParams, KmeansResult, em_gmm, kmeans_pp_init, lloyd
from .cm import (
    CmLossBreakdown,
    CmParams,
    CmTrainConfig,
    cm_forward,
    cm_init_from_centroids,
    cm_loss,
    extract_centroids,
    l_sp,
    q_expansion_identity_check,
    train_cm,
)
from .data import Dataset, gen_five_gaussians, gen_toy, load_csv, load_idx, minmax_normalize, save_csv
from .deep import (
    AecmArchitecture,
    AecmLossBreakdown,
    AecmParams,
    AecmTrainConfig,
    aecm_forward,
    aecm_loss,
    decode_centroid,
    interpolate,
    ortho_penalty,
    pretrain,
    quadratic_feature_layer,
    train_aecm,
)
from .metrics import acc, ari, homogeneity, hungarian, nmi
from .model_io import load_model, save_model
from .tensor import make_rng, pseudo_inverse, row_softmax, standardize

__version__ = "0.1.0"
