"""Per-dataset hyper-parameter presets shipped with the toolkit.

The shallow clustering-module presets carry (alpha, batch_size); deep model
presets add (beta, lambda, bottleneck width, architecture). Named datasets
fill any field the user left unset. The synthetic five-gaussians protocol
trains with plain SGD; everything else defaults to Adam at 1e-3 for up to
150 epochs.
"""

from __future__ import annotations

# model "cm"
CM_PRESETS: dict[str, dict] = {
    "mnist": {"alpha": 177, "batch_size": 111},
    "fmnist": {"alpha": 80, "batch_size": 35},
    "usps": {"alpha": 40, "batch_size": 150},
    "cifar10": {"alpha": 164, "batch_size": 350},
    "r10k": {"alpha": 10, "batch_size": 400},
    "20news": {"alpha": 11, "batch_size": 85},
    "10x73k": {"alpha": 1000, "batch_size": 500},
    "pendigit": {"alpha": 13, "batch_size": 80, "normalize": "minmax"},
    # K=5 centroids in R^2 rule out the exact-inverse encoder init, so the
    # synthetic protocol starts from random weights
    "five-gaussians": {
        "alpha": 5,
        "batch_size": 20,
        "epochs": 50,
        "optimizer": "sgd",
        "lr": 0.01,
        "init": "random",
        "normalize": "standardize",
    },
}

# model "aecm"; arch lists the encoder hidden widths (bottleneck p separate)
_DEEP_ARCH = [500, 500, 2000]
AECM_PRESETS: dict[str, dict] = {
    "mnist": {"alpha": 230, "beta": 5, "lambda": 1, "batch_size": 500, "p": 10, "arch": _DEEP_ARCH},
    "fmnist": {"alpha": 13, "beta": 47, "lambda": 1, "batch_size": 175, "p": 10, "arch": _DEEP_ARCH},
    "usps": {"alpha": 20, "beta": 0.5, "lambda": 1, "batch_size": 256, "p": 10, "arch": _DEEP_ARCH},
    "cifar10": {"alpha": 64, "beta": 1, "lambda": 1, "batch_size": 256, "p": 10, "arch": _DEEP_ARCH},
    "r10k": {"alpha": 2, "beta": 1, "lambda": 1, "batch_size": 256, "p": 100, "arch": _DEEP_ARCH},
    "20news": {"alpha": 10, "beta": 232, "lambda": 1, "batch_size": 300, "p": 100, "arch": _DEEP_ARCH},
    "10x73k": {"alpha": 7, "beta": 15, "lambda": 1, "batch_size": 7, "p": 10, "arch": _DEEP_ARCH},
    "pendigit": {
        "alpha": 13, "beta": 0.5, "lambda": 1, "batch_size": 100, "p": 10,
        "arch": _DEEP_ARCH, "normalize": "minmax",
    },
    # 2-D toys: batch 20, up to 100 epochs
    "moons": {
        "alpha": 11, "beta": 100, "lambda": 0.001, "batch_size": 20, "epochs": 100,
        "p": 1, "arch": [20, 20, 20],
    },
    "circles": {
        "alpha": 11, "beta": 0.001, "lambda": 0.001, "batch_size": 20, "epochs": 100,
        "p": 3, "arch": ["quad"],
    },
    "varied": {
        "alpha": 11, "beta": 100, "lambda": 0.001, "batch_size": 20, "epochs": 100,
        "p": 3, "arch": [],
    },
    "aniso": {
        "alpha": 11, "beta": 1, "lambda": 0.001, "batch_size": 20, "epochs": 100,
        "p": 3, "arch": [],
    },
    "blobs": {
        "alpha": 11, "beta": 1, "lambda": 0.001, "batch_size": 20, "epochs": 100,
        "p": 3, "arch": [],
    },
    "no_structure": {
        "alpha": 0.1, "beta": 1, "lambda": 0.001, "batch_size": 20, "epochs": 100,
        "p": 3, "arch": [],
    },
    "five-gaussians": {
        "alpha": 5, "beta": 1, "lambda": 0.001, "batch_size": 20, "epochs": 50,
        "p": 2, "arch": [], "normalize": "standardize",
    },
    # small UCI tables: single linear layer to p = 2k on standardized features
    "iris": {
        "alpha": 5, "beta": 1, "lambda": 1, "batch_size": 16, "epochs": 150,
        "p": 6, "arch": [], "normalize": "standardize",
    },
    "wine": {
        "alpha": 5, "beta": 1, "lambda": 1, "batch_size": 16, "epochs": 150,
        "p": 6, "arch": [], "normalize": "standardize",
    },
}

GLOBAL_DEFAULTS = {
    "alpha": 1.0,
    "beta": 1.0,
    "lambda": 1.0,
    "batch_size": 256,
    "epochs": 150,
    "lr": 1e-3,
    "optimizer": "adam",
    "init": "random",
    "prior_mode": "symmetric",
    "runs": 1,
    "seed": 0,
}


def preset_for(model: str, dataset_name: str | None) -> dict:
    if not dataset_name:
        return {}
    name = dataset_name.lower()
    if model == "cm":
        return dict(CM_PRESETS.get(name, {}))
    if model == "aecm":
        return dict(AECM_PRESETS.get(name, {}))
    return {}
