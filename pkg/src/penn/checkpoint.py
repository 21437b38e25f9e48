"""Self-describing checkpoint container for fitted regressors.

Layout::

    b"PENNCKPT" | uint32 LE version | uint32 LE header length | JSON header | tensor block

The JSON header carries the architecture, estimator hyperparameters, the
target name and a manifest of tensors. The tensor block is every tensor in
manifest order (normalisation statistics first, then network parameters in
declaration order) as little-endian float64.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ContractError
from .networks import network_from_architecture

MAGIC = b"PENNCKPT"
VERSION = 1


def _estimator_classes():
    from .estimators import MLPMulRegressor, MLPResRegressor, PENNRegressor

    return {cls.__name__: cls for cls in (PENNRegressor, MLPResRegressor, MLPMulRegressor)}


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def save_checkpoint(estimator, path) -> Path:
    net = estimator.network_
    tensors = [
        ("stats.x_mean", estimator.x_mean_),
        ("stats.x_std", estimator.x_std_),
        ("stats.target_scale", np.array([estimator.target_scale_])),
    ]
    for layer in net.layers():
        tensors.append((layer.weights.name, layer.weights.data))
        tensors.append((layer.bias.name, layer.bias.data))
    header = {
        "format": "penn-checkpoint",
        "version": VERSION,
        "estimator": type(estimator).__name__,
        "params": {k: _jsonable(v) for k, v in estimator.get_params().items()},
        "architecture": net.architecture(),
        "target": estimator.target,
        "n_features_in": int(estimator.n_features_in_),
        "best_epoch": estimator.best_epoch_,
        "tensors": [{"name": name, "shape": list(np.shape(arr))} for name, arr in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return path


def read_header(path) -> dict:
    with Path(path).open("rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise ContractError("not a PENN checkpoint (bad magic)")
    version, n = struct.unpack("<II", fh.read(8))
    if version != VERSION:
        raise ContractError(f"unsupported checkpoint version {version}")
    return json.loads(fh.read(n).decode("utf-8"))


def load_checkpoint(path):
    """Rebuild the fitted estimator stored at ``path``."""
    with Path(path).open("rb") as fh:
        header = _read_header(fh)
        raw = fh.read()
    expected = sum(int(np.prod(e["shape"], dtype=np.int64)) for e in header["tensors"])
    if len(raw) != 8 * expected:
        raise ContractError(f"checkpoint tensor block has {len(raw)} bytes, manifest expects {8 * expected}")
    data = np.frombuffer(raw, dtype="<f8")
    arrays = {}
    offset = 0
    for entry in header["tensors"]:
        n = int(np.prod(entry["shape"], dtype=np.int64))
        arrays[entry["name"]] = data[offset : offset + n].reshape(entry["shape"]).astype(np.float64)
        offset += n

    params = header["params"]
    if "lr_milestones" in params:
        params["lr_milestones"] = tuple(params["lr_milestones"])
    est = _estimator_classes()[header["estimator"]](**params)
    net = network_from_architecture(header["architecture"])
    for layer in net.layers():
        for t in (layer.weights, layer.bias):
            saved = arrays[t.name]
            if saved.shape != t.data.shape:
                raise ContractError(f"{t.name}: checkpoint shape {saved.shape} vs model {t.data.shape}")
            t.data[...] = saved
    est.network_ = net
    est.x_mean_ = arrays["stats.x_mean"]
    est.x_std_ = arrays["stats.x_std"]
    est.target_scale_ = float(arrays["stats.target_scale"][0])
    est.n_features_in_ = header["n_features_in"]
    est.best_epoch_ = header["best_epoch"]
    est.history_ = []
    return est
