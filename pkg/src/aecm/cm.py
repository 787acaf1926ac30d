"""One-hidden-layer softmax autoencoder whose loss is the expanded negative
Q-function of an isotropic Gaussian mixture with a Dirichlet prior.

The encoder maps a point to a stochastic responsibility vector, the decoder
reconstructs it as the matching convex combination of centroids; centroid k
is the decode image of the k-th canonical basis vector (decoder row plus
decoder bias). Training runs mini-batch gradient descent on four terms:

  rec    sum of squared reconstruction errors
  gini   responsibility Gini impurity weighted by squared centroid norms
  cross  cross products of responsibilities with distinct-centroid dot
         products (entering the total with a minus sign)
  prior  Dirichlet concentration term on the mean batch responsibilities

and finishes with an averaging epoch: encoder weights freeze, decoder
updates continue, and per-iteration centroid snapshots are averaged to
cancel mini-batch dispersion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .baselines import kmeans_pp_init
from .optim import make_optimizer
from .tensor import make_rng, pseudo_inverse, row_softmax

LOG_FLOOR = 1e-12


class NonFiniteLossError(FloatingPointError):
    pass


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, term: str):
        super().__init__(f"training diverged at epoch {epoch}: term {term!r} is not finite")
        self.epoch = epoch
        self.term = term


@dataclass
class CmParams:
    """Encoder/decoder weights; biases are stored as 1 x n rows."""

    w_enc: np.ndarray  # d x K
    b_enc: np.ndarray  # 1 x K
    w_dec: np.ndarray  # K x d
    b_dec: np.ndarray  # 1 x d

    @property
    def k(self) -> int:
        return self.w_dec.shape[0]

    @property
    def d(self) -> int:
        return self.w_dec.shape[1]

    def copy(self) -> "CmParams":
        return CmParams(self.w_enc.copy(), self.b_enc.copy(), self.w_dec.copy(), self.b_dec.copy())


@dataclass
class CmLossBreakdown:
    e_rec: float
    e_gini: float
    e_cross: float
    e_prior: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "e_rec": self.e_rec,
            "e_gini": self.e_gini,
            "e_cross": self.e_cross,
            "e_prior": self.e_prior,
            "total": self.total,
        }


@dataclass
class CmTrainConfig:
    alpha: float | np.ndarray = 1.0
    batch_size: int = 20
    epochs: int = 50
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    init: str = "kmeanspp"  # "random" | "kmeanspp"
    prior_mode: str = "symmetric"  # "symmetric" | "sorted"
    # multipliers on (rec, gini, cross, prior); used by the term ablations
    term_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    averaging_epoch: bool = True
    init_scale: float = 0.01

    def resolved_alpha(self, k: int) -> np.ndarray:
        a = np.asarray(self.alpha, dtype=np.float64).ravel()
        if a.size == 1:
            a = np.full(k, float(a[0]))
        if a.size != k:
            raise ValueError(f"alpha must be scalar or length {k}, got {a.size}")
        if np.any(a <= 0):
            raise ValueError("alpha entries must be > 0")
        return a


def cm_forward(x: np.ndarray, p: CmParams) -> tuple[np.ndarray, np.ndarray]:
    """Responsibilities and reconstruction for a batch of rows."""
    if x.shape[1] != p.w_enc.shape[0]:
        raise ValueError(f"input width {x.shape[1]} != encoder rows {p.w_enc.shape[0]}")
    gamma = row_softmax(x @ p.w_enc + p.b_enc)
    x_rec = gamma @ p.w_dec + p.b_dec
    return gamma, x_rec


def extract_centroids(p: CmParams) -> np.ndarray:
    """Decode images of the canonical basis vectors: row k is w_dec[k] + b_dec."""
    return p.w_dec + p.b_dec


def _prior_pairing(gamma_bar: np.ndarray, alpha: np.ndarray, prior_mode: str):
    """Return (gamma_bar, alpha) paired for the prior term.

    In sorted mode both are sorted descending before pairing, which lets an
    asymmetric concentration target cluster sizes without fixing which
    cluster id gets which share.
    """
    if prior_mode == "symmetric":
        return gamma_bar, alpha
    if prior_mode == "sorted":
        order = np.argsort(-gamma_bar, kind="stable")
        return gamma_bar[order], np.sort(alpha)[::-1]
    raise ValueError(f"unknown prior_mode {prior_mode!r}")


def cm_loss(
    x: np.ndarray,
    gamma: np.ndarray,
    x_rec: np.ndarray,
    p: CmParams,
    alpha: float | np.ndarray,
    prior_mode: str = "symmetric",
) -> CmLossBreakdown:
    """Four-term breakdown of the training objective on the given batch.

    The mean responsibility vector entering the prior is taken over the rows
    of ``gamma`` (the mini-batch during training, the full dataset when
    reporting); its logs are clamped at 1e-12.
    """
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if alpha.size == 1:
        alpha = np.full(p.k, float(alpha[0]))
    e_rec = float(((x - x_rec) ** 2).sum())
    mu = extract_centroids(p)
    sq_norms = (mu * mu).sum(axis=1)
    gini = gamma * (1.0 - gamma)
    e_gini = float((gini @ sq_norms).sum())
    gram_off = mu @ mu.T
    np.fill_diagonal(gram_off, 0.0)
    e_cross = float(((gamma @ gram_off) * gamma).sum())
    gamma_bar = gamma.mean(axis=0)
    gb, al = _prior_pairing(gamma_bar, alpha, prior_mode)
    e_prior = float(((1.0 - al) * np.log(np.maximum(gb, LOG_FLOOR))).sum())
    total = e_rec + e_gini - e_cross + e_prior
    for name, val in (
        ("e_rec", e_rec),
        ("e_gini", e_gini),
        ("e_cross", e_cross),
        ("e_prior", e_prior),
    ):
        if not np.isfinite(val):
            raise NonFiniteLossError(f"loss term {name} is not finite")
    return CmLossBreakdown(e_rec, e_gini, e_cross, e_prior, total)


def q_expansion_identity_check(x_row: np.ndarray, gamma_row: np.ndarray, mu: np.ndarray) -> float:
    """Residual of the algebraic identity behind the loss expansion.

    The responsibility-weighted sum of squared distances to the centroids
    must equal the reconstruction error of the convex combination plus the
    gini and (negated) cross terms.
    """
    x_row = np.asarray(x_row, dtype=np.float64).ravel()
    g = np.asarray(gamma_row, dtype=np.float64).ravel()
    mu = np.asarray(mu, dtype=np.float64)
    lhs = float((g * ((x_row - mu) ** 2).sum(axis=1)).sum())
    x_tilde = g @ mu
    sq_norms = (mu * mu).sum(axis=1)
    gram_off = mu @ mu.T
    np.fill_diagonal(gram_off, 0.0)
    rhs = (
        float(((x_row - x_tilde) ** 2).sum())
        + float((g * (1.0 - g) * sq_norms).sum())
        - float((g @ gram_off) @ g)
    )
    return abs(lhs - rhs)


def cm_init_from_centroids(centroids: np.ndarray) -> CmParams:
    """Decoder rows become the centroids, encoder weights their pseudo-inverse,
    both biases zero; requires full-row-rank centroids with K <= d."""
    centroids = np.asarray(centroids, dtype=np.float64)
    k, d = centroids.shape
    return CmParams(
        w_enc=pseudo_inverse(centroids),
        b_enc=np.zeros((1, k)),
        w_dec=centroids.copy(),
        b_dec=np.zeros((1, d)),
    )


def random_cm_init(d: int, k: int, rng: np.random.Generator, scale: float = 0.01) -> CmParams:
    return CmParams(
        w_enc=scale * rng.standard_normal((d, k)),
        b_enc=np.zeros((1, k)),
        w_dec=scale * rng.standard_normal((k, d)),
        b_dec=np.zeros((1, d)),
    )


def _cm_loss_graph(tape, xv, pv, alpha, prior_mode, term_weights, consts):
    """Build the batch loss on a tape; returns (total, term vars, gamma)."""
    gamma = ad.row_softmax(ad.add_row_broadcast(ad.matmul(xv, pv["w_enc"]), pv["b_enc"]))
    x_rec = ad.add_row_broadcast(ad.matmul(gamma, pv["w_dec"]), pv["b_dec"])
    mu = ad.add_row_broadcast(pv["w_dec"], pv["b_dec"])

    e_rec = ad.sum(ad.square(ad.sub(xv, x_rec)))
    sq_norms = ad.matmul(ad.square(mu), consts["ones_d1"])  # K x 1
    gini = ad.mul_elem(gamma, ad.sub(consts["ones_bk"], gamma))
    e_gini = ad.sum(ad.matmul(gini, sq_norms))
    gram_off = ad.mul_elem(ad.matmul(mu, ad.transpose(mu)), consts["offdiag"])
    e_cross = ad.sum(ad.mul_elem(ad.matmul(gamma, gram_off), gamma))

    gamma_bar = ad.matmul(consts["mean_row"], gamma)  # 1 x K
    if prior_mode == "sorted":
        order = np.argsort(-gamma_bar.value.ravel(), kind="stable")
        perm = np.zeros((order.size, order.size))
        perm[order, np.arange(order.size)] = 1.0
        gamma_bar = ad.matmul(gamma_bar, tape.constant(perm))
        coeff = (1.0 - np.sort(alpha)[::-1]).reshape(1, -1)
    else:
        coeff = (1.0 - alpha).reshape(1, -1)
    e_prior = ad.sum(
        ad.mul_elem(tape.constant(coeff), ad.log(ad.clamp_min(gamma_bar, LOG_FLOOR)))
    )

    w_rec, w_gini, w_cross, w_prior = term_weights
    total = ad.add(
        ad.sub(
            ad.add(ad.scale(e_rec, w_rec), ad.scale(e_gini, w_gini)),
            ad.scale(e_cross, w_cross),
        ),
        ad.scale(e_prior, w_prior),
    )
    terms = {"e_rec": e_rec, "e_gini": e_gini, "e_cross": e_cross, "e_prior": e_prior}
    return total, terms, gamma


def _batch_consts(tape, rows: int, d: int, k: int):
    return {
        "ones_d1": tape.constant(np.ones((d, 1))),
        "ones_bk": tape.constant(np.ones((rows, k))),
        "offdiag": tape.constant(1.0 - np.eye(k)),
        "mean_row": tape.constant(np.full((1, rows), 1.0 / rows)),
    }


def _check_batch_finite(epoch: int, terms: dict) -> None:
    for name, var in terms.items():
        if not np.isfinite(var.value[0, 0]):
            raise TrainingDivergedError(epoch, name)


def train_cm(
    x: np.ndarray,
    k: int,
    config: CmTrainConfig,
    eval_hook=None,
    initial_params: CmParams | None = None,
) -> tuple[CmParams, list[dict]]:
    """Mini-batch training of the clustering module.

    Shuffles each epoch under the seeded generator, records a full-dataset
    loss breakdown per epoch (merged with ``eval_hook(params)`` output when
    given) and finishes with the averaging epoch: encoder parameters freeze
    while decoder snapshots taken after every iteration are averaged into
    the final centroids. ``initial_params`` bypasses the configured
    initialization (used when tuning an already initialized module).
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if config.batch_size < 1 or config.batch_size > n:
        raise ValueError(f"batch_size must be in [1, {n}]")
    alpha = config.resolved_alpha(k)
    rng = make_rng(config.seed)

    if initial_params is not None:
        params_obj = initial_params.copy()
    elif config.init == "kmeanspp":
        params_obj = cm_init_from_centroids(kmeans_pp_init(x, k, rng))
    elif config.init == "random":
        params_obj = random_cm_init(d, k, rng, config.init_scale)
    else:
        raise ValueError(f"unknown init {config.init!r}")
    params = {
        "w_enc": params_obj.w_enc,
        "b_enc": params_obj.b_enc,
        "w_dec": params_obj.w_dec,
        "b_dec": params_obj.b_dec,
    }
    opt = make_optimizer(config.optimizer, config.lr)

    def run_epoch(epoch: int, trainable: tuple[str, ...], snapshots=None) -> None:
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = x[perm[start : start + config.batch_size]]
            tape = ad.Tape()
            pv = {name: tape.param(value) for name, value in params.items()}
            consts = _batch_consts(tape, batch.shape[0], d, k)
            total, terms, _ = _cm_loss_graph(
                tape, tape.constant(batch), pv, alpha, config.prior_mode,
                config.term_weights, consts,
            )
            if not np.isfinite(total.value[0, 0]):
                _check_batch_finite(epoch, terms)
                raise TrainingDivergedError(epoch, "total")
            ad.backward(total)
            grads = {name: pv[name].grad for name in trainable}
            opt.step({name: params[name] for name in trainable}, grads)
            if snapshots is not None:
                snapshots.append((params["w_dec"].copy(), params["b_dec"].copy()))

    def snapshot_params() -> CmParams:
        return CmParams(
            params["w_enc"].copy(), params["b_enc"].copy(),
            params["w_dec"].copy(), params["b_dec"].copy(),
        )

    history: list[dict] = []

    def record(epoch: int, averaging: bool = False) -> None:
        p = snapshot_params()
        gamma, x_rec = cm_forward(x, p)
        entry = {"epoch": epoch, "averaging": averaging}
        entry.update(cm_loss(x, gamma, x_rec, p, alpha, config.prior_mode).as_dict())
        if eval_hook is not None:
            entry.update(eval_hook(p))
        history.append(entry)

    all_names = ("w_enc", "b_enc", "w_dec", "b_dec")
    for epoch in range(config.epochs):
        run_epoch(epoch, all_names)
        record(epoch)

    if config.averaging_epoch:
        snaps: list[tuple[np.ndarray, np.ndarray]] = []
        run_epoch(config.epochs, ("w_dec", "b_dec"), snapshots=snaps)
        params["w_dec"] = np.mean([s[0] for s in snaps], axis=0)
        params["b_dec"] = np.mean([s[1] for s in snaps], axis=0)
        record(config.epochs, averaging=True)

    return snapshot_params(), history


def l_sp(
    x: np.ndarray,
    p: CmParams,
    alpha: float | np.ndarray = 1.0,
    signed: bool = False,
) -> float:
    """Label-free selection score: gini plus cross term over the full dataset.

    ``signed=True`` instead subtracts the cross term, i.e. uses the exact
    contribution of the two sparsity terms to the training loss.
    """
    gamma, x_rec = cm_forward(x, p)
    bd = cm_loss(x, gamma, x_rec, p, alpha)
    if signed:
        return bd.e_gini - bd.e_cross
    return bd.e_gini + bd.e_cross


def predict_labels(x: np.ndarray, p: CmParams) -> np.ndarray:
    gamma, _ = cm_forward(x, p)
    return gamma.argmax(axis=1)
