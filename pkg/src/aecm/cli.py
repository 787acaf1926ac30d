"""Command-line front end: gen, train, eval, sweep, select, interpolate.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
divergence. Reports are deterministic for a fixed config and seed apart
from the wall_time_s fields.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics
from .baselines import DegenerateComponentError, em_gmm, kmeans_pp_init, lloyd
from .cm import (
    CmTrainConfig,
    NonFiniteLossError,
    TrainingDivergedError,
    cm_forward,
    cm_loss,
    extract_centroids,
    l_sp,
    train_cm,
)
from .data import DataError, Dataset, gen_five_gaussians, gen_toy, load_csv, save_csv
from .deep import (
    AecmArchitecture,
    AecmParams,
    AecmTrainConfig,
    aecm_forward,
    aecm_loss,
    decode_centroid,
    interpolate,
    train_aecm,
)
from .model_io import load_model, save_model
from .presets import GLOBAL_DEFAULTS, preset_for
from .tensor import make_rng, standardize
from .data import minmax_normalize, TOY_KINDS


class ConfigError(Exception):
    """Invalid run configuration; messages carry JSON-pointer-style paths."""


MODELS = ("cm", "aecm", "kmeans", "gmm-iso", "gmm-full")
CONFIG_KEYS = {
    "model", "dataset", "k", "alpha", "beta", "lambda", "batch_size", "epochs",
    "lr", "optimizer", "init", "pretrain", "arch", "p", "seed", "runs", "prior_mode",
}
DATASET_KEYS = {"path", "has_header", "label_column", "name", "generator", "n", "noise", "seed", "normalize"}
PRETRAIN_KEYS = {"dae_epochs", "cm_epochs"}
GEN_KINDS = ("five-gaussians",) + TOY_KINDS

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


# ---------------------------------------------------------------- config


def _require(cond: bool, pointer: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{pointer}: {msg}")


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"/: config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"/: invalid JSON in {path}: {exc}") from None
    _require(isinstance(cfg, dict), "/", "config must be a JSON object")
    return cfg


def validate_config(cfg: dict) -> dict:
    for key in cfg:
        _require(key in CONFIG_KEYS, f"/{key}", "unknown key")
    _require("model" in cfg, "/model", "required")
    _require(cfg["model"] in MODELS, "/model", f"must be one of {MODELS}")
    _require("dataset" in cfg, "/dataset", "required")
    ds = cfg["dataset"]
    _require(isinstance(ds, dict), "/dataset", "must be an object")
    for key in ds:
        _require(key in DATASET_KEYS, f"/dataset/{key}", "unknown key")
    _require(
        ("path" in ds) != ("generator" in ds),
        "/dataset",
        "needs exactly one of 'path' or 'generator'",
    )
    if "generator" in ds:
        _require(ds["generator"] in GEN_KINDS, "/dataset/generator", f"must be one of {GEN_KINDS}")
    if "normalize" in ds and ds["normalize"] is not None:
        _require(ds["normalize"] in ("none", "standardize", "minmax"),
                 "/dataset/normalize", "must be none, standardize or minmax")
    if "pretrain" in cfg:
        _require(isinstance(cfg["pretrain"], dict), "/pretrain", "must be an object")
        for key in cfg["pretrain"]:
            _require(key in PRETRAIN_KEYS, f"/pretrain/{key}", "unknown key")
            _require(
                isinstance(cfg["pretrain"][key], int) and cfg["pretrain"][key] >= 0,
                f"/pretrain/{key}", "must be an integer >= 0",
            )
    for key in ("batch_size", "epochs", "k", "p", "seed", "runs"):
        if key in cfg and cfg[key] is not None:
            _require(isinstance(cfg[key], int) and not isinstance(cfg[key], bool),
                     f"/{key}", "must be an integer")
    for key in ("beta", "lambda", "lr"):
        if key in cfg and cfg[key] is not None:
            _require(isinstance(cfg[key], (int, float)) and not isinstance(cfg[key], bool),
                     f"/{key}", "must be a number")
            _require(cfg[key] > 0, f"/{key}", "must be > 0")
    if "alpha" in cfg and cfg["alpha"] is not None:
        a = cfg["alpha"]
        if isinstance(a, list):
            _require(all(isinstance(v, (int, float)) and v > 0 for v in a),
                     "/alpha", "entries must be positive numbers")
        else:
            _require(isinstance(a, (int, float)) and a > 0, "/alpha", "must be > 0")
    if "optimizer" in cfg:
        _require(cfg["optimizer"] in ("sgd", "adam"), "/optimizer", "must be sgd or adam")
    if "init" in cfg:
        _require(cfg["init"] in ("random", "kmeanspp", "pretrain"), "/init",
                 "must be random, kmeanspp or pretrain")
    if "prior_mode" in cfg:
        _require(cfg["prior_mode"] in ("symmetric", "sorted"), "/prior_mode",
                 "must be symmetric or sorted")
    if "arch" in cfg and cfg["arch"] is not None:
        _require(isinstance(cfg["arch"], list), "/arch", "must be a list")
        for i, width in enumerate(cfg["arch"]):
            ok = (isinstance(width, int) and width > 0) or (width == "quad" and i == 0)
            _require(ok, f"/arch/{i}", "must be a positive integer ('quad' allowed first)")
    return cfg


def resolve_config(cfg: dict) -> dict:
    """Fill preset and global defaults into a validated config."""
    cfg = dict(cfg)
    ds = dict(cfg["dataset"])
    name = ds.get("name") or ds.get("generator")
    preset = preset_for(cfg["model"], name)
    preset_normalize = preset.pop("normalize", None)
    for key, value in preset.items():
        cfg.setdefault(key, value)
    for key, value in GLOBAL_DEFAULTS.items():
        cfg.setdefault(key, value)
    if ds.get("normalize") is None:
        ds["normalize"] = preset_normalize or "none"
    ds.setdefault("seed", 0)
    if "generator" in ds:
        ds.setdefault("n", 2000 if ds["generator"] == "five-gaussians" else 1500)
    cfg["dataset"] = ds
    cfg.setdefault("arch", [])
    cfg.setdefault("pretrain", {"dae_epochs": 50, "cm_epochs": 20})
    cfg["pretrain"] = {"dae_epochs": 50, "cm_epochs": 20, **cfg["pretrain"]}
    _require(cfg["runs"] >= 1, "/runs", "must be >= 1")
    _require(cfg["epochs"] >= 0, "/epochs", "must be >= 0")
    _require(cfg["batch_size"] >= 1, "/batch_size", "must be >= 1")
    return cfg


def resolve_dataset(ds_cfg: dict) -> Dataset:
    if "generator" in ds_cfg:
        kind = ds_cfg["generator"]
        n = ds_cfg["n"]
        seed = ds_cfg["seed"]
        if kind == "five-gaussians":
            data = gen_five_gaussians(n, seed)
        else:
            data = gen_toy(kind, n, ds_cfg.get("noise"), seed)
    else:
        data = load_csv(
            ds_cfg["path"],
            has_header=bool(ds_cfg.get("has_header", False)),
            label_column=ds_cfg.get("label_column"),
        )
        if ds_cfg.get("name"):
            data.name = ds_cfg["name"]
    normalize = ds_cfg.get("normalize", "none")
    if normalize == "standardize":
        data.features = standardize(data.features)[0]
    elif normalize == "minmax":
        data.features = minmax_normalize(data.features)
    return data


def _resolve_k(cfg: dict, data: Dataset) -> int:
    k = cfg.get("k")
    if k is None:
        _require(data.k_true is not None, "/k", "required when the dataset has no labels")
        k = data.k_true
    _require(isinstance(k, int) and k >= 1, "/k", "must be an integer >= 1")
    _require(k <= data.n, "/k", f"must not exceed the number of points ({data.n})")
    return k


def _arch_from_config(cfg: dict, d: int, k: int) -> AecmArchitecture:
    arch = list(cfg.get("arch") or [])
    expansion = "none"
    if arch and arch[0] == "quad":
        expansion = "quadratic"
        arch = arch[1:]
    p = cfg.get("p") or 2 * k
    return AecmArchitecture(d=d, p=p, hidden=tuple(int(w) for w in arch),
                            input_expansion=expansion)


# ---------------------------------------------------------------- running


def _metric_block(labels_true, labels_pred) -> dict | None:
    if labels_true is None:
        return None
    return {
        "ari": metrics.ari(labels_true, labels_pred),
        "nmi": metrics.nmi(labels_true, labels_pred),
        "acc": metrics.acc(labels_true, labels_pred),
        "homogeneity": metrics.homogeneity(labels_true, labels_pred),
    }


def run_single(cfg: dict, data: Dataset, k: int, seed: int) -> dict:
    """Train one model with one seed; returns metrics plus artifacts."""
    x = data.features
    model = cfg["model"]
    start = time.perf_counter()
    history_rows: list[dict] = []
    loss_block: dict | None = None
    sp = None
    params_to_save = None

    if model == "cm":
        ccfg = CmTrainConfig(
            alpha=np.asarray(cfg["alpha"], dtype=float),
            batch_size=min(cfg["batch_size"], x.shape[0]),
            epochs=cfg["epochs"],
            lr=cfg["lr"],
            optimizer=cfg["optimizer"],
            seed=seed,
            init="kmeanspp" if cfg["init"] == "pretrain" else cfg["init"],
            prior_mode=cfg["prior_mode"],
        )
        params, history = train_cm(x, k, ccfg)
        gamma, x_rec = cm_forward(x, params)
        labels = gamma.argmax(axis=1)
        centroids = extract_centroids(params)
        alpha = ccfg.resolved_alpha(k)
        loss_block = cm_loss(x, gamma, x_rec, params, alpha, ccfg.prior_mode).as_dict()
        sp = l_sp(x, params, alpha)
        history_rows = history
        params_to_save = params
    elif model == "aecm":
        arch = _arch_from_config(cfg, x.shape[1], k)
        acfg = AecmTrainConfig(
            alpha=np.asarray(cfg["alpha"], dtype=float),
            beta=float(cfg["beta"]),
            lam=float(cfg["lambda"]),
            batch_size=min(cfg["batch_size"], x.shape[0]),
            epochs=cfg["epochs"],
            lr=cfg["lr"],
            optimizer=cfg["optimizer"],
            seed=seed,
            init=cfg["init"],
            pretrain_dae_epochs=cfg["pretrain"]["dae_epochs"],
            pretrain_cm_epochs=cfg["pretrain"]["cm_epochs"],
            prior_mode=cfg["prior_mode"],
        )
        params, history = train_aecm(x, k, arch, acfg)
        z, gamma, z_rec, x_rec = aecm_forward(x, params)
        labels = gamma.argmax(axis=1)
        alpha = acfg.resolved_alpha(k)
        loss_block = aecm_loss(
            x, z, gamma, z_rec, x_rec, params, alpha, acfg.beta, acfg.lam, acfg.prior_mode
        ).as_dict()
        sp = l_sp(z, params.cm, alpha)
        centroids = np.vstack([decode_centroid(params, j) for j in range(k)])
        history_rows = history
        params_to_save = params
    elif model == "kmeans":
        rng = make_rng(seed)
        if cfg["init"] == "random":
            init = x[rng.choice(x.shape[0], size=k, replace=False)]
        else:
            init = kmeans_pp_init(x, k, rng)
        result = lloyd(x, k, init, max_iter=cfg["epochs"] or 150)
        labels = result.labels
        centroids = result.centroids
        history_rows = [
            {"iteration": i, "inertia": v} for i, v in enumerate(result.inertia_history)
        ]
        loss_block = {"inertia": result.inertia}
    elif model in ("gmm-iso", "gmm-full"):
        rng = make_rng(seed)
        if cfg["init"] == "random":
            init = x[rng.choice(x.shape[0], size=k, replace=False)]
        else:
            init = kmeans_pp_init(x, k, rng)
        kind = "isotropic" if model == "gmm-iso" else "full"
        gparams, resp, trace = em_gmm(
            x, k, covariance_kind=kind, init=init, max_iter=cfg["epochs"] or 150, rng=rng
        )
        labels = resp.argmax(axis=1)
        centroids = gparams.means
        history_rows = [{"iteration": i, "loglik": v} for i, v in enumerate(trace)]
        loss_block = {"loglik": trace[-1]}
    else:  # pragma: no cover - validated earlier
        raise ConfigError(f"/model: unsupported model {model}")

    wall = time.perf_counter() - start
    return {
        "seed": seed,
        "metrics": _metric_block(data.labels, labels),
        "l_sp": sp,
        "loss": loss_block,
        "wall_time_s": wall,
        "labels": labels,
        "centroids": centroids,
        "history": history_rows,
        "params": params_to_save,
    }


def aggregate_runs(per_run: list[dict]) -> dict:
    agg: dict[str, dict] = {}
    names = ["ari", "nmi", "acc", "homogeneity"]
    for name in names:
        values = [r["metrics"][name] for r in per_run if r["metrics"] is not None]
        if values:
            agg[name] = {
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
                "best": float(np.max(values)),
            }
    sp_values = [r["l_sp"] for r in per_run if r["l_sp"] is not None]
    if sp_values:
        agg["l_sp"] = {
            "mean": float(np.mean(sp_values)),
            "std": float(np.std(sp_values)),
            "best": float(np.min(sp_values)),
        }
    return agg


def execute_runs(cfg: dict, data: Dataset, k: int, threads: int = 1) -> list[dict]:
    seeds = [cfg["seed"] + i for i in range(cfg["runs"])]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(seeds))) as pool:
            return list(pool.map(lambda s: run_single(cfg, data, k, s), seeds))
    return [run_single(cfg, data, k, s) for s in seeds]


# ---------------------------------------------------------------- artifacts


def _fmt(v) -> str:
    return repr(float(v))


def write_history_csv(path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("", encoding="utf-8")
        return
    columns = [key for key in rows[0] if key != "averaging"]
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(
            str(row[c]) if isinstance(row[c], (int, bool)) else _fmt(row[c])
            for c in columns
        ))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_scatter_svg(path, x: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> None:
    """600 x 600 scatter of 2-D data colored by assignment; centroid squares."""
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = np.where(hi - lo < 1e-12, 1.0, hi - lo)

    def to_px(pt):
        u = (pt - lo) / span
        return 20.0 + 560.0 * u[0], 580.0 - 560.0 * u[1]

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 600 600">',
        '<rect width="600" height="600" fill="white"/>',
    ]
    for i in range(x.shape[0]):
        cx, cy = to_px(x[i])
        color = PALETTE[int(labels[i]) % len(PALETTE)]
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2" fill="{color}" fill-opacity="0.6"/>')
    for j in range(centroids.shape[0]):
        cx, cy = to_px(centroids[j])
        parts.append(
            f'<rect x="{cx - 5:.2f}" y="{cy - 5:.2f}" width="10" height="10" '
            f'fill="black" stroke="white" stroke-width="1.5"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def write_pgm_strip(path, rows: np.ndarray, side: int) -> None:
    """ASCII PGM of decoded vectors laid out side by side as side x side tiles."""
    steps = rows.shape[0]
    img = np.zeros((side, side * steps))
    for i in range(steps):
        img[:, i * side : (i + 1) * side] = rows[i].reshape(side, side)
    pixels = np.clip(np.round(img * 255.0), 0, 255).astype(int)
    lines = ["P2", f"{side * steps} {side}", "255"]
    for r in range(side):
        lines.append(" ".join(str(v) for v in pixels[r]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report(out_dir: Path, cfg: dict, data: Dataset, k: int, per_run: list[dict]) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    report_runs = []
    for i, run in enumerate(per_run):
        run_dir = out_dir / f"run_{i:03d}"
        run_dir.mkdir(exist_ok=True)
        with open(run_dir / "assignments.csv", "w", encoding="utf-8") as fh:
            fh.write("\n".join(str(int(v)) for v in run["labels"]) + "\n")
        save_csv(run_dir / "centroids.csv", run["centroids"])
        write_history_csv(run_dir / "history.csv", run["history"])
        if run["params"] is not None:
            save_model(run_dir / "model.bin", run["params"], meta={"seed": run["seed"], "k": k})
        report_runs.append(
            {
                "run": i,
                "seed": run["seed"],
                "metrics": run["metrics"],
                "l_sp": run["l_sp"],
                "loss": run["loss"],
                "wall_time_s": run["wall_time_s"],
            }
        )
    sp_values = [(r["l_sp"], i) for i, r in enumerate(per_run) if r["l_sp"] is not None]
    selected = min(sp_values)[1] if sp_values else None
    report = {
        "model": cfg["model"],
        "dataset": cfg["dataset"],
        "k": k,
        "config": {key: cfg[key] for key in sorted(cfg) if key != "dataset"},
        "per_run": report_runs,
        "aggregate": aggregate_runs(per_run),
        "selected_run": selected,
    }
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if data.d == 2:
        show = selected if selected is not None else 0
        write_scatter_svg(
            out_dir / "scatter.svg",
            data.features,
            per_run[show]["labels"],
            per_run[show]["centroids"],
        )
    return report


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    kind = args.kind
    if kind == "five-gaussians":
        data = gen_five_gaussians(args.n, args.seed)
    else:
        data = gen_toy(kind, args.n, args.noise, args.seed)
    save_csv(args.out, data.features, data.labels)
    if not args.quiet:
        print(
            f"wrote {data.n} x {data.d} points ({kind}, k={data.k_true}, "
            f"seed={args.seed}) with trailing labels to {args.out}"
        )
    return 0


def _config_from_args(args) -> dict:
    cfg = load_config_file(args.config) if args.config else {}
    inline: dict = {}
    ds: dict = dict(cfg.get("dataset", {}))
    if args.data is not None:
        ds.pop("generator", None)
        ds["path"] = args.data
    if args.generator is not None:
        ds.pop("path", None)
        ds["generator"] = args.generator
    if args.n is not None:
        ds["n"] = args.n
    if args.noise is not None:
        ds["noise"] = args.noise
    if args.data_seed is not None:
        ds["seed"] = args.data_seed
    if args.name is not None:
        ds["name"] = args.name
    if args.label_column is not None:
        ds["label_column"] = args.label_column
    if args.has_header:
        ds["has_header"] = True
    if args.normalize is not None:
        ds["normalize"] = args.normalize
    if ds:
        inline["dataset"] = ds
    for key, value in (
        ("model", args.model), ("k", args.k), ("beta", args.beta),
        ("lambda", getattr(args, "lambda_", None)), ("batch_size", args.batch_size),
        ("epochs", args.epochs), ("lr", args.lr), ("optimizer", args.optimizer),
        ("init", args.init), ("p", args.p), ("prior_mode", args.prior_mode),
    ):
        if value is not None:
            inline[key] = value
    if args.alpha is not None:
        parts = [float(v) for v in str(args.alpha).split(",")]
        inline["alpha"] = parts[0] if len(parts) == 1 else parts
    if args.arch is not None:
        arch = []
        for token in args.arch.split(","):
            token = token.strip()
            if token:
                arch.append(token if token == "quad" else int(token))
        inline["arch"] = arch
    cfg.update(inline)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.runs is not None:
        cfg["runs"] = args.runs
    return resolve_config(validate_config(cfg))


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    data = resolve_dataset(cfg["dataset"])
    k = _resolve_k(cfg, data)
    per_run = execute_runs(cfg, data, k, threads=args.threads)
    out_dir = Path(args.out_dir)
    report = write_report(out_dir, cfg, data, k, per_run)
    if not args.quiet:
        for entry in report["per_run"]:
            m = entry["metrics"]
            shown = (
                " ".join(f"{n}={100 * m[n]:.1f}" for n in ("ari", "nmi", "acc"))
                if m else "unlabeled"
            )
            sp = f" l_sp={entry['l_sp']:.4f}" if entry["l_sp"] is not None else ""
            print(f"run {entry['run']} seed {entry['seed']}: {shown}{sp} "
                  f"({entry['wall_time_s']:.1f}s)")
        agg = report["aggregate"]
        if "ari" in agg:
            print(
                f"aggregate ARI mean={100 * agg['ari']['mean']:.1f} "
                f"std={100 * agg['ari']['std']:.1f} best={100 * agg['ari']['best']:.1f}"
            )
        print(f"report written to {out_dir / 'report.json'}")
    return 0


def _read_label_file(path) -> np.ndarray:
    data = load_csv(path)
    if data.features.shape[1] != 1:
        raise DataError(f"{path}: expected one integer per line")
    return data.features[:, 0].astype(np.int64)


def cmd_eval(args) -> int:
    pred = _read_label_file(args.assignments)
    true = _read_label_file(args.labels)
    if pred.size != true.size:
        raise DataError(f"length mismatch: {pred.size} assignments vs {true.size} labels")
    scores = {
        "ari": metrics.ari(true, pred),
        "nmi": metrics.nmi(true, pred),
        "acc": metrics.acc(true, pred),
        "homogeneity": metrics.homogeneity(true, pred),
    }
    print(json.dumps({k: round(100.0 * v, 1) for k, v in scores.items()}, sort_keys=True))
    return 0


SWEEP_KEYS = ("alpha", "batch_size", "beta", "lambda")


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    try:
        with open(args.grid, encoding="utf-8") as fh:
            grid = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"/: grid file not found: {args.grid}") from None
    _require(isinstance(grid, dict) and grid, "/grid", "must be a non-empty object")
    for key, values in grid.items():
        _require(key in SWEEP_KEYS, f"/grid/{key}", f"sweep supports {SWEEP_KEYS}")
        _require(isinstance(values, list) and values, f"/grid/{key}", "must be a non-empty list")
    data = resolve_dataset(cfg["dataset"])
    k = _resolve_k(cfg, data)

    keys = sorted(grid)
    header = keys + [
        "ari_mean", "ari_std", "nmi_mean", "nmi_std", "acc_mean", "acc_std",
        "l_sp_mean", "l_sp_std",
    ]
    lines = [",".join(header)]
    for combo in itertools.product(*(grid[key] for key in keys)):
        cell_cfg = dict(cfg)
        cell_cfg.update(dict(zip(keys, combo)))
        per_run = execute_runs(cell_cfg, data, k, threads=args.threads)
        agg = aggregate_runs(per_run)
        row = [str(v) for v in combo]
        for metric in ("ari", "nmi", "acc", "l_sp"):
            block = agg.get(metric)
            row.extend(
                ["", ""] if block is None else [_fmt(block["mean"]), _fmt(block["std"])]
            )
        lines.append(",".join(row))
        if not args.quiet:
            cell = ", ".join(f"{key}={v}" for key, v in zip(keys, combo))
            ari_txt = f"{100 * agg['ari']['mean']:.1f}" if "ari" in agg else "n/a"
            print(f"cell [{cell}]: ARI mean {ari_txt}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if not args.quiet:
        print(f"grid written to {args.out}")
    return 0


def cmd_select(args) -> int:
    best = None
    all_ari: list[float] = []
    for path in args.reports:
        try:
            with open(path, encoding="utf-8") as fh:
                report = json.load(fh)
        except FileNotFoundError:
            raise DataError(f"report not found: {path}") from None
        for entry in report.get("per_run", []):
            if entry.get("l_sp") is None:
                raise ConfigError(f"/per_run/{entry.get('run')}: report {path} lacks l_sp")
            ari_value = (entry.get("metrics") or {}).get("ari")
            if ari_value is not None:
                all_ari.append(ari_value)
            key = (entry["l_sp"], str(path), entry["run"])
            if best is None or key < best[0]:
                best = (key, path, entry)
    _require(best is not None, "/reports", "no runs found in the given reports")
    _, path, entry = best
    out = {
        "selected": {
            "report": str(path),
            "run": entry["run"],
            "seed": entry["seed"],
            "l_sp": entry["l_sp"],
            "metrics": entry["metrics"],
        },
        "comparison": {
            "mean_ari": round(100 * float(np.mean(all_ari)), 1) if all_ari else None,
            "best_ari": round(100 * float(np.max(all_ari)), 1) if all_ari else None,
            "selected_ari": (
                round(100 * entry["metrics"]["ari"], 1) if entry.get("metrics") else None
            ),
        },
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_interpolate(args) -> int:
    kind, params, _meta = load_model(args.model)
    if kind != "aecm":
        raise ConfigError("/model: interpolation requires a deep (aecm) model artifact")
    assert isinstance(params, AecmParams)
    rows = interpolate(params, args.k1, args.k2, args.steps)
    save_csv(args.out, rows)
    side = math.isqrt(rows.shape[1])
    if side * side == rows.shape[1] and side >= 2:
        write_pgm_strip(Path(args.out).with_suffix(".pgm"), rows, side)
    if not args.quiet:
        print(f"wrote {rows.shape[0]} interpolation rows to {args.out}")
    return 0


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aecm",
        description="Clustering toolkit: softmax-autoencoder clustering modules, "
        "deep joint embedding-clustering, EM baselines and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--runs", type=int, default=None)
        sp.add_argument("--out-dir", default="out")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("gen", help="generate a synthetic dataset as CSV")
    sp.add_argument("--kind", required=True, choices=GEN_KINDS)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--noise", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_gen)

    def add_train_flags(sp):
        sp.add_argument("--config", default=None)
        sp.add_argument("--model", choices=MODELS, default=None)
        sp.add_argument("--data", default=None, help="CSV path")
        sp.add_argument("--generator", choices=GEN_KINDS, default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--noise", type=float, default=None)
        sp.add_argument("--data-seed", type=int, default=None)
        sp.add_argument("--name", default=None, help="dataset preset name")
        sp.add_argument("--label-column", type=int, default=None)
        sp.add_argument("--has-header", action="store_true")
        sp.add_argument("--normalize", choices=("none", "standardize", "minmax"), default=None)
        sp.add_argument("--k", type=int, default=None)
        sp.add_argument("--alpha", default=None, help="scalar or comma list")
        sp.add_argument("--beta", type=float, default=None)
        sp.add_argument("--lambda", dest="lambda_", type=float, default=None)
        sp.add_argument("--batch-size", type=int, default=None)
        sp.add_argument("--epochs", type=int, default=None)
        sp.add_argument("--lr", type=float, default=None)
        sp.add_argument("--optimizer", choices=("sgd", "adam"), default=None)
        sp.add_argument("--init", choices=("random", "kmeanspp", "pretrain"), default=None)
        sp.add_argument("--arch", default=None, help="comma widths, 'quad' allowed first")
        sp.add_argument("--p", type=int, default=None)
        sp.add_argument("--prior-mode", choices=("symmetric", "sorted"), default=None)

    sp = sub.add_parser("train", help="train a model over seeded repetitions")
    add_train_flags(sp)
    add_common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="score an assignment file against labels")
    sp.add_argument("--assignments", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="grid sweep over hyper-parameters")
    add_train_flags(sp)
    sp.add_argument("--grid", required=True, help="JSON file {param: [values...]}")
    sp.add_argument("--out", default="grid.csv")
    add_common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("select", help="pick the min-l_sp run across reports")
    sp.add_argument("reports", nargs="+")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("interpolate", help="decode the path between two centroids")
    sp.add_argument("--model", required=True)
    sp.add_argument("--k1", type=int, required=True)
    sp.add_argument("--k2", type=int, required=True)
    sp.add_argument("--steps", type=int, default=10)
    sp.add_argument("--out", required=True)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_interpolate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (TrainingDivergedError, NonFiniteLossError, DegenerateComponentError) as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
