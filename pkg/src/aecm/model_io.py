"""Single-file model persistence: one JSON header line, then raw float64 blobs.

The header records the model kind, architecture metadata and an ordered list
of tensor names and shapes; the binary section concatenates each tensor as
little-endian float64 in that order. The header stays readable with `head -1`.
"""

from __future__ import annotations

import json

import numpy as np

from .cm import CmParams
from .deep import AecmParams, MlpLayer

FORMAT_TAG = "aecm-model-v1"


def _cm_tensors(p: CmParams) -> list[tuple[str, np.ndarray]]:
    return [
        ("w_enc", p.w_enc),
        ("b_enc", p.b_enc),
        ("w_dec", p.w_dec),
        ("b_dec", p.b_dec),
    ]


def _aecm_tensors(p: AecmParams) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, layer in enumerate(p.encoder):
        out.append((f"enc{i}_w", layer.weights))
        out.append((f"enc{i}_b", layer.bias))
    for i, layer in enumerate(p.decoder):
        out.append((f"dec{i}_w", layer.weights))
        out.append((f"dec{i}_b", layer.bias))
    out.extend((f"cm_{n}", t) for n, t in _cm_tensors(p.cm))
    return out


def save_model(path, params: CmParams | AecmParams, meta: dict | None = None) -> None:
    if isinstance(params, CmParams):
        kind = "cm"
        tensors = _cm_tensors(params)
        extra = {}
    elif isinstance(params, AecmParams):
        kind = "aecm"
        tensors = _aecm_tensors(params)
        extra = {
            "encoder_activations": [layer.activation for layer in params.encoder],
            "decoder_activations": [layer.activation for layer in params.decoder],
            "input_expansion": params.input_expansion,
        }
    else:
        raise TypeError(f"cannot persist {type(params).__name__}")
    header = {
        "format": FORMAT_TAG,
        "kind": kind,
        "meta": meta or {},
        **extra,
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in tensors],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, t in tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_model(path) -> tuple[str, CmParams | AecmParams, dict]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        header = json.loads(header_line.decode("utf-8"))
        if header.get("format") != FORMAT_TAG:
            raise ValueError(f"{path}: not a {FORMAT_TAG} file")
        blobs = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape))
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ValueError(f"{path}: truncated tensor {spec['name']}")
            blobs[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    kind = header["kind"]
    if kind == "cm":
        params: CmParams | AecmParams = CmParams(
            blobs["w_enc"], blobs["b_enc"], blobs["w_dec"], blobs["b_dec"]
        )
    elif kind == "aecm":
        enc_acts = header["encoder_activations"]
        dec_acts = header["decoder_activations"]
        encoder = [
            MlpLayer(blobs[f"enc{i}_w"], blobs[f"enc{i}_b"], act)
            for i, act in enumerate(enc_acts)
        ]
        decoder = [
            MlpLayer(blobs[f"dec{i}_w"], blobs[f"dec{i}_b"], act)
            for i, act in enumerate(dec_acts)
        ]
        cm = CmParams(
            blobs["cm_w_enc"], blobs["cm_b_enc"], blobs["cm_w_dec"], blobs["cm_b_dec"]
        )
        params = AecmParams(encoder, decoder, cm, header.get("input_expansion", "none"))
    else:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    return kind, params, header.get("meta", {})
