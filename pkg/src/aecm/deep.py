"""Deep autoencoder with the clustering module nested at its bottleneck.

The encoder maps inputs to a p-dimensional code z, the decoder reconstructs
the input from z, and the clustering module soft-assigns z to K centroids
living in code space. All parts train jointly on five terms: the weighted
autoencoder reconstruction, the clustering module's reconstruction of z, a
plain Gini sparsity term (the squared-norm weights drop once centroids are
pushed toward orthonormality), the Dirichlet prior, and an entrywise L1
penalty tying the centroid Gram matrix to the identity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .baselines import kmeans_pp_init
from .cm import (
    LOG_FLOOR,
    CmParams,
    CmTrainConfig,
    NonFiniteLossError,
    TrainingDivergedError,
    cm_forward,
    cm_init_from_centroids,
    extract_centroids,
    random_cm_init,
    train_cm,
    _prior_pairing,
)
from .optim import make_optimizer
from .tensor import SingularMatrixError, make_rng

LEAKY_SLOPE = 0.2


@dataclass
class MlpLayer:
    weights: np.ndarray  # in x out
    bias: np.ndarray  # 1 x out
    activation: str  # "leaky_relu" | "linear"


@dataclass
class AecmArchitecture:
    """Encoder shape: input d [-> quadratic expansion] -> hidden... -> p."""

    d: int
    p: int
    hidden: tuple[int, ...] = ()
    input_expansion: str = "none"  # "none" | "quadratic"

    @property
    def encoder_input_dim(self) -> int:
        if self.input_expansion == "quadratic":
            if self.d != 2:
                raise ValueError("quadratic expansion requires 2 input columns")
            return 7
        return self.d


@dataclass
class AecmParams:
    encoder: list[MlpLayer]
    decoder: list[MlpLayer]
    cm: CmParams
    input_expansion: str = "none"

    @property
    def p(self) -> int:
        return self.cm.w_enc.shape[0]

    @property
    def k(self) -> int:
        return self.cm.k


@dataclass
class AecmLossBreakdown:
    rec_dae: float
    rec_cm: float
    sparsity: float
    prior: float
    ortho: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "rec_dae": self.rec_dae,
            "rec_cm": self.rec_cm,
            "sparsity": self.sparsity,
            "prior": self.prior,
            "ortho": self.ortho,
            "total": self.total,
        }


@dataclass
class AecmTrainConfig:
    alpha: float | np.ndarray = 1.0
    beta: float = 1.0
    lam: float = 1.0
    batch_size: int = 256
    epochs: int = 150
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    init: str = "random"  # "random" | "kmeanspp" | "pretrain"
    pretrain_dae_epochs: int = 50
    pretrain_cm_epochs: int = 20
    prior_mode: str = "symmetric"
    averaging_epoch: bool = True
    freeze_dae: bool = False

    def resolved_alpha(self, k: int) -> np.ndarray:
        return CmTrainConfig(alpha=self.alpha).resolved_alpha(k)


def quadratic_feature_layer(x: np.ndarray) -> np.ndarray:
    """Fixed degree-2 monomial expansion of 2-D inputs into 7 features:
    (1, x1, x2, x1^2, x1*x2, x2^2, x2*x1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError(f"quadratic expansion expects N x 2 input, got {x.shape}")
    x1, x2 = x[:, 0], x[:, 1]
    return np.column_stack([np.ones_like(x1), x1, x2, x1 * x1, x1 * x2, x2 * x2, x2 * x1])


def _expand_input(x: np.ndarray, input_expansion: str) -> np.ndarray:
    if input_expansion == "quadratic":
        return quadratic_feature_layer(x)
    if input_expansion == "none":
        return x
    raise ValueError(f"unknown input expansion {input_expansion!r}")


def _glorot_layer(fan_in: int, fan_out: int, activation: str, rng) -> MlpLayer:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return MlpLayer(
        weights=rng.uniform(-limit, limit, size=(fan_in, fan_out)),
        bias=np.zeros((1, fan_out)),
        activation=activation,
    )


def build_aecm(arch: AecmArchitecture, k: int, rng: np.random.Generator) -> AecmParams:
    """Random initialization: fan-based uniform MLP weights, small-normal CM."""
    enc_widths = [arch.encoder_input_dim, *arch.hidden, arch.p]
    dec_widths = [arch.p, *reversed(arch.hidden), arch.d]

    def make_layers(widths):
        layers = []
        for i in range(len(widths) - 1):
            act = "linear" if i == len(widths) - 2 else "leaky_relu"
            layers.append(_glorot_layer(widths[i], widths[i + 1], act, rng))
        return layers

    return AecmParams(
        encoder=make_layers(enc_widths),
        decoder=make_layers(dec_widths),
        cm=random_cm_init(arch.p, k, rng),
        input_expansion=arch.input_expansion,
    )


def mlp_forward(layers: list[MlpLayer], h: np.ndarray) -> np.ndarray:
    for layer in layers:
        h = h @ layer.weights + layer.bias
        if layer.activation == "leaky_relu":
            h = np.where(h > 0.0, h, LEAKY_SLOPE * h)
    return h


def encode(p: AecmParams, x: np.ndarray) -> np.ndarray:
    return mlp_forward(p.encoder, _expand_input(x, p.input_expansion))


def decode(p: AecmParams, z: np.ndarray) -> np.ndarray:
    return mlp_forward(p.decoder, z)


def aecm_forward(
    x: np.ndarray, p: AecmParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (z, gamma, z_rec, x_rec)."""
    z = encode(p, x)
    gamma, z_rec = cm_forward(z, p.cm)
    x_rec = decode(p, z)
    return z, gamma, z_rec, x_rec


def ortho_penalty(mu: np.ndarray) -> float:
    """Entrywise L1 distance of the centroid Gram matrix from the identity."""
    mu = np.asarray(mu, dtype=np.float64)
    gram = mu @ mu.T
    return float(np.abs(gram - np.eye(mu.shape[0])).sum())


def aecm_loss(
    x: np.ndarray,
    z: np.ndarray,
    gamma: np.ndarray,
    z_rec: np.ndarray,
    x_rec: np.ndarray,
    p: AecmParams,
    alpha: float | np.ndarray,
    beta: float,
    lam: float,
    prior_mode: str = "symmetric",
) -> AecmLossBreakdown:
    """Five-term breakdown; the sparsity term deliberately carries no centroid
    norm weights (they collapse to 1 under the orthonormality target)."""
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if alpha.size == 1:
        alpha = np.full(p.k, float(alpha[0]))
    rec_dae = float(((x - x_rec) ** 2).sum())
    rec_cm = float(((z - z_rec) ** 2).sum())
    sparsity = float((gamma * (1.0 - gamma)).sum())
    gamma_bar = gamma.mean(axis=0)
    gb, al = _prior_pairing(gamma_bar, alpha, prior_mode)
    prior = float(((1.0 - al) * np.log(np.maximum(gb, LOG_FLOOR))).sum())
    ortho = ortho_penalty(extract_centroids(p.cm))
    total = beta * rec_dae + rec_cm + sparsity + prior + lam * ortho
    for name, val in (
        ("rec_dae", rec_dae),
        ("rec_cm", rec_cm),
        ("sparsity", sparsity),
        ("prior", prior),
        ("ortho", ortho),
    ):
        if not np.isfinite(val):
            raise NonFiniteLossError(f"loss term {name} is not finite")
    return AecmLossBreakdown(rec_dae, rec_cm, sparsity, prior, ortho, total)


def _param_dict(p: AecmParams) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for i, layer in enumerate(p.encoder):
        out[f"enc{i}_w"] = layer.weights
        out[f"enc{i}_b"] = layer.bias
    for i, layer in enumerate(p.decoder):
        out[f"dec{i}_w"] = layer.weights
        out[f"dec{i}_b"] = layer.bias
    out["cm_w_enc"] = p.cm.w_enc
    out["cm_b_enc"] = p.cm.b_enc
    out["cm_w_dec"] = p.cm.w_dec
    out["cm_b_dec"] = p.cm.b_dec
    return out


def _rebuild(p: AecmParams, params: dict[str, np.ndarray]) -> AecmParams:
    encoder = [
        MlpLayer(params[f"enc{i}_w"].copy(), params[f"enc{i}_b"].copy(), layer.activation)
        for i, layer in enumerate(p.encoder)
    ]
    decoder = [
        MlpLayer(params[f"dec{i}_w"].copy(), params[f"dec{i}_b"].copy(), layer.activation)
        for i, layer in enumerate(p.decoder)
    ]
    cm = CmParams(
        params["cm_w_enc"].copy(),
        params["cm_b_enc"].copy(),
        params["cm_w_dec"].copy(),
        params["cm_b_dec"].copy(),
    )
    return AecmParams(encoder, decoder, cm, p.input_expansion)


def _mlp_graph(tape, pv, prefix: str, activations: list[str], h):
    for i, act in enumerate(activations):
        h = ad.add_row_broadcast(ad.matmul(h, pv[f"{prefix}{i}_w"]), pv[f"{prefix}{i}_b"])
        if act == "leaky_relu":
            h = ad.leaky_relu(h, LEAKY_SLOPE)
    return h


def _aecm_loss_graph(tape, x_const, x_in_const, pv, structure, alpha, beta, lam, prior_mode):
    """Builds the joint loss; ``structure`` carries the activation lists and k."""
    enc_acts, dec_acts, k = structure
    rows = x_const.shape[0]

    z = _mlp_graph(tape, pv, "enc", enc_acts, x_in_const)
    gamma = ad.row_softmax(ad.add_row_broadcast(ad.matmul(z, pv["cm_w_enc"]), pv["cm_b_enc"]))
    z_rec = ad.add_row_broadcast(ad.matmul(gamma, pv["cm_w_dec"]), pv["cm_b_dec"])
    x_rec = _mlp_graph(tape, pv, "dec", dec_acts, z)

    rec_dae = ad.sum(ad.square(ad.sub(x_const, x_rec)))
    rec_cm = ad.sum(ad.square(ad.sub(z, z_rec)))
    ones_bk = tape.constant(np.ones((rows, k)))
    sparsity = ad.sum(ad.mul_elem(gamma, ad.sub(ones_bk, gamma)))

    gamma_bar = ad.matmul(tape.constant(np.full((1, rows), 1.0 / rows)), gamma)
    if prior_mode == "sorted":
        order = np.argsort(-gamma_bar.value.ravel(), kind="stable")
        perm = np.zeros((k, k))
        perm[order, np.arange(k)] = 1.0
        gamma_bar = ad.matmul(gamma_bar, tape.constant(perm))
        coeff = (1.0 - np.sort(alpha)[::-1]).reshape(1, -1)
    else:
        coeff = (1.0 - alpha).reshape(1, -1)
    prior = ad.sum(
        ad.mul_elem(tape.constant(coeff), ad.log(ad.clamp_min(gamma_bar, LOG_FLOOR)))
    )

    mu = ad.add_row_broadcast(pv["cm_w_dec"], pv["cm_b_dec"])
    ortho = ad.sum(ad.abs(ad.sub(ad.matmul(mu, ad.transpose(mu)), tape.constant(np.eye(k)))))

    total = ad.add(
        ad.add(
            ad.add(ad.scale(rec_dae, beta), rec_cm),
            ad.add(sparsity, prior),
        ),
        ad.scale(ortho, lam),
    )
    terms = {
        "rec_dae": rec_dae,
        "rec_cm": rec_cm,
        "sparsity": sparsity,
        "prior": prior,
        "ortho": ortho,
    }
    return total, terms


def _dae_loss_graph(tape, x_const, x_in_const, pv, structure):
    enc_acts, dec_acts, _ = structure
    z = _mlp_graph(tape, pv, "enc", enc_acts, x_in_const)
    x_rec = _mlp_graph(tape, pv, "dec", dec_acts, z)
    return ad.sum(ad.square(ad.sub(x_const, x_rec)))


def _structure(p: AecmParams) -> tuple[list[str], list[str], int]:
    return (
        [layer.activation for layer in p.encoder],
        [layer.activation for layer in p.decoder],
        p.k,
    )


def _init_cm_from_embedding(p: AecmParams, x: np.ndarray, k: int, rng) -> None:
    """k-means++ in code space feeding the exact-inverse CM initialization;
    rank-deficient embedded centroids fall back to the random CM."""
    z = encode(p, x)
    try:
        p.cm = cm_init_from_centroids(kmeans_pp_init(z, k, rng))
    except (SingularMatrixError, ValueError) as exc:
        warnings.warn(
            f"embedded centroids unusable for exact-inverse init ({exc}); "
            "keeping random clustering weights",
            RuntimeWarning,
        )


def pretrain(x: np.ndarray, arch: AecmArchitecture, k: int, config: AecmTrainConfig) -> AecmParams:
    """Three stages: plain autoencoder training, k-means++ initialization of
    the clustering module in code space, then clustering-module-only tuning
    on the frozen embedding."""
    x = np.asarray(x, dtype=np.float64)
    rng = make_rng(config.seed)
    p = build_aecm(arch, k, rng)
    n = x.shape[0]
    structure = _structure(p)
    x_in_full = _expand_input(x, p.input_expansion)

    if config.pretrain_dae_epochs > 0:
        params = _param_dict(p)
        dae_names = tuple(name for name in params if name.startswith(("enc", "dec")))
        opt = make_optimizer(config.optimizer, config.lr)
        for epoch in range(config.pretrain_dae_epochs):
            perm = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                sel = perm[start : start + config.batch_size]
                tape = ad.Tape()
                pv = {name: tape.param(value) for name, value in params.items()}
                loss = _dae_loss_graph(
                    tape, tape.constant(x[sel]), tape.constant(x_in_full[sel]), pv, structure
                )
                if not np.isfinite(loss.value[0, 0]):
                    raise TrainingDivergedError(epoch, "rec_dae")
                ad.backward(loss)
                opt.step(
                    {name: params[name] for name in dae_names},
                    {name: pv[name].grad for name in dae_names},
                )
        p = _rebuild(p, params)

    _init_cm_from_embedding(p, x, k, rng)

    if config.pretrain_cm_epochs > 0:
        z = encode(p, x)
        cm_cfg = CmTrainConfig(
            alpha=config.alpha,
            batch_size=min(config.batch_size, z.shape[0]),
            epochs=config.pretrain_cm_epochs,
            lr=config.lr,
            optimizer=config.optimizer,
            seed=config.seed,
            prior_mode=config.prior_mode,
        )
        p.cm, _ = train_cm(z, k, cm_cfg, initial_params=p.cm)
    return p


def train_aecm(
    x: np.ndarray,
    k: int,
    arch: AecmArchitecture,
    config: AecmTrainConfig,
    eval_hook=None,
    initial_params: AecmParams | None = None,
) -> tuple[AecmParams, list[dict]]:
    """Joint mini-batch optimization of the autoencoder and the clustering
    module, ending with the centroid averaging epoch (encoder and all
    autoencoder layers frozen, per-iteration decoder snapshots averaged).
    ``initial_params`` bypasses the configured initialization."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if config.batch_size < 1 or config.batch_size > n:
        raise ValueError(f"batch_size must be in [1, {n}]")
    if config.beta < 0 or config.lam < 0:
        raise ValueError("beta and lambda must be >= 0")
    alpha = config.resolved_alpha(k)
    rng = make_rng(config.seed)

    if initial_params is not None:
        p = _rebuild(initial_params, _param_dict(initial_params))
    elif config.init == "pretrain":
        p = pretrain(x, arch, k, config)
    elif config.init == "kmeanspp":
        p = build_aecm(arch, k, rng)
        _init_cm_from_embedding(p, x, k, rng)
    elif config.init == "random":
        p = build_aecm(arch, k, rng)
    else:
        raise ValueError(f"unknown init {config.init!r}")

    params = _param_dict(p)
    structure = _structure(p)
    x_in_full = _expand_input(x, p.input_expansion)
    opt = make_optimizer(config.optimizer, config.lr)

    cm_names = ("cm_w_enc", "cm_b_enc", "cm_w_dec", "cm_b_dec")
    if config.freeze_dae:
        main_names = cm_names
    else:
        main_names = tuple(params)

    def run_epoch(epoch: int, trainable, snapshots=None) -> None:
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            sel = perm[start : start + config.batch_size]
            tape = ad.Tape()
            pv = {name: tape.param(value) for name, value in params.items()}
            total, terms = _aecm_loss_graph(
                tape,
                tape.constant(x[sel]),
                tape.constant(x_in_full[sel]),
                pv,
                structure,
                alpha,
                config.beta,
                config.lam,
                config.prior_mode,
            )
            if not np.isfinite(total.value[0, 0]):
                for name, var in terms.items():
                    if not np.isfinite(var.value[0, 0]):
                        raise TrainingDivergedError(epoch, name)
                raise TrainingDivergedError(epoch, "total")
            ad.backward(total)
            opt.step(
                {name: params[name] for name in trainable},
                {name: pv[name].grad for name in trainable},
            )
            if snapshots is not None:
                snapshots.append((params["cm_w_dec"].copy(), params["cm_b_dec"].copy()))

    history: list[dict] = []

    def record(epoch: int, averaging: bool = False) -> None:
        snap = _rebuild(p, params)
        z, gamma, z_rec, x_rec = aecm_forward(x, snap)
        entry = {"epoch": epoch, "averaging": averaging}
        entry.update(
            aecm_loss(
                x, z, gamma, z_rec, x_rec, snap, alpha, config.beta, config.lam,
                config.prior_mode,
            ).as_dict()
        )
        if eval_hook is not None:
            entry.update(eval_hook(snap))
        history.append(entry)

    for epoch in range(config.epochs):
        run_epoch(epoch, main_names)
        record(epoch)

    if config.averaging_epoch:
        snaps: list[tuple[np.ndarray, np.ndarray]] = []
        run_epoch(config.epochs, ("cm_w_dec", "cm_b_dec"), snapshots=snaps)
        params["cm_w_dec"] = np.mean([s[0] for s in snaps], axis=0)
        params["cm_b_dec"] = np.mean([s[1] for s in snaps], axis=0)
        record(config.epochs, averaging=True)

    return _rebuild(p, params), history


def decode_centroid(p: AecmParams, k: int) -> np.ndarray:
    """Map centroid k from code space back through the decoder."""
    if not 0 <= k < p.k:
        raise IndexError(f"centroid index {k} out of range for K={p.k}")
    mu = extract_centroids(p.cm)
    return decode(p, mu[k : k + 1]).ravel()


def interpolate(p: AecmParams, k1: int, k2: int, steps: int) -> np.ndarray:
    """Decode evenly spaced points on the segment between two centroids."""
    if not (0 <= k1 < p.k and 0 <= k2 < p.k):
        raise IndexError(f"centroid indices ({k1}, {k2}) out of range for K={p.k}")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    mu = extract_centroids(p.cm)
    ts = np.linspace(0.0, 1.0, steps)[:, None]
    path = (1.0 - ts) * mu[k1] + ts * mu[k2]
    return decode(p, path)


def predict_labels(x: np.ndarray, p: AecmParams) -> np.ndarray:
    _, gamma, _, _ = aecm_forward(x, p)
    return gamma.argmax(axis=1)
