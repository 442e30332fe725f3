"""Versioned binary container for trained models.

Layout, all integers little-endian:

    bytes 0-3   magic b"REGS"
    bytes 4-7   format version, uint32 (currently 1)
    uint32      length of the UTF-8 JSON-encoded model configuration
    ...         that JSON blob
    uint32      number of arrays
    per array:
        uint16  name length, then the UTF-8 name
        uint8   kind: 0 learnable parameter, 1 state (running stats,
                feature normalization)
        uint8   number of dimensions
        uint32  each dimension
        float32 the values, little-endian, C order

Readers reject any other magic or version.  Values are stored in 32-bit
floats; loading upcasts to float64, so a save/load round trip quantizes
parameters to float32 resolution.
"""

from __future__ import annotations

import json
import struct
from io import BufferedReader
from pathlib import Path

import numpy as np

from .model import ModelConfig, ModelParams

MAGIC = b"REGS"
VERSION = 1


class ModelFileError(Exception):
    """Malformed, truncated, or unsupported model file."""


def _config_to_json(config: ModelConfig) -> bytes:
    payload = {
        "num_features": config.num_features,
        "encoder_widths": list(config.encoder_widths),
        "gru_hidden": config.gru_hidden,
        "decoder_widths": list(config.decoder_widths),
        "head_widths": list(config.head_widths),
        "dropout_rate": config.dropout_rate,
    }
    return json.dumps(payload, sort_keys=True).encode("utf-8")


def _config_from_json(blob: bytes) -> ModelConfig:
    try:
        payload = json.loads(blob.decode("utf-8"))
        return ModelConfig(
            num_features=int(payload["num_features"]),
            encoder_widths=tuple(payload["encoder_widths"]),
            gru_hidden=int(payload["gru_hidden"]),
            decoder_widths=tuple(payload["decoder_widths"]),
            head_widths=tuple(payload["head_widths"]),
            dropout_rate=float(payload["dropout_rate"]),
        )
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"bad model configuration block: {exc}") from exc


def save_model(path: str | Path, model: ModelParams) -> None:
    """Write a model to disk; bytes are deterministic for equal models."""
    blobs = []
    config_json = _config_to_json(model.config)
    blobs.append(MAGIC)
    blobs.append(struct.pack("<I", VERSION))
    blobs.append(struct.pack("<I", len(config_json)))
    blobs.append(config_json)
    arrays = [(name, 0, arr) for name, arr in model.params.items()]
    arrays += [(name, 1, arr) for name, arr in model.state.items()]
    blobs.append(struct.pack("<I", len(arrays)))
    for name, kind, arr in arrays:
        encoded = name.encode("utf-8")
        blobs.append(struct.pack("<H", len(encoded)))
        blobs.append(encoded)
        blobs.append(struct.pack("<BB", kind, arr.ndim))
        blobs.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(blobs))


def _read_exact(fh: BufferedReader, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ModelFileError("model file is truncated")
    return data


def load_model(path: str | Path) -> ModelParams:
    """Read a model written by save_model.

    Raises ModelFileError on wrong magic, unsupported version, or
    truncation.
    """
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise ModelFileError("not a model file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise ModelFileError(
                f"unsupported model file version {version}; this build reads {VERSION}"
            )
        (config_len,) = struct.unpack("<I", _read_exact(fh, 4))
        config = _config_from_json(_read_exact(fh, config_len))
        (n_arrays,) = struct.unpack("<I", _read_exact(fh, 4))
        params: dict[str, np.ndarray] = {}
        state: dict[str, np.ndarray] = {}
        for _ in range(n_arrays):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode("utf-8")
            kind, ndim = struct.unpack("<BB", _read_exact(fh, 2))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(_read_exact(fh, 4 * count), dtype="<f4")
            arr = data.reshape(shape).astype(np.float64)
            if kind == 0:
                params[name] = arr
            elif kind == 1:
                state[name] = arr
            else:
                raise ModelFileError(f"unknown array kind {kind} for {name!r}")
        if fh.read(1):
            raise ModelFileError("trailing bytes after the last array")
    return ModelParams(config, params, state)
