"""Binary model files (.inr).

Layout, all little-endian::

    b"INRF"             magic
    u16                 format version (1)
    u32                 header length L
    L bytes             UTF-8 JSON header: encoder spec, layer specs, array layout, metadata
    u64                 number of float64 values
    f64 * count         parameters, arrays concatenated in header layout order (C order)
    u32                 CRC32 of every preceding byte
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .atoms import Atom
from .encoders import Encoder, FourierFeatureEncoder, HashGridEncoder, IdentityEncoder
from .model import Layer, MlpModel
from .signal_io import atomic_write_bytes

MAGIC = b"INRF"
VERSION = 1


class ModelFileError(ValueError):
    """Unreadable, corrupted or unsupported model file."""


def _encoder_spec(enc: Encoder) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    if isinstance(enc, IdentityEncoder):
        return enc.to_dict(), []
    if isinstance(enc, FourierFeatureEncoder):
        return enc.to_dict(), [("encoder.B", enc.B)]
    if isinstance(enc, HashGridEncoder):
        return enc.to_dict(), [("encoder.tables", enc.tables)]
    raise TypeError(f"cannot serialize encoder {type(enc).__name__}")


def encode_model(model: MlpModel, encoder: Encoder, meta: dict | None = None) -> bytes:
    enc_spec, arrays = _encoder_spec(encoder)
    layers = []
    for i, l in enumerate(model.layers):
        layers.append({
            "n_in": l.n_in,
            "n_out": l.n_out,
            "atom": None if l.atom is None else l.atom.to_dict(),
            "omega": l.omega,
            "learn_atom": l.learn_atom,
        })
        arrays += [(f"layer{i}.weight", l.weight), (f"layer{i}.bias", l.bias)]
    header = {
        "encoder": enc_spec,
        "layers": layers,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "meta": meta or {},
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.concatenate([np.asarray(a, dtype="<f8").ravel() for _, a in arrays]) if arrays else np.zeros(0)
    body = (MAGIC + struct.pack("<HI", VERSION, len(hbytes)) + hbytes
            + struct.pack("<Q", payload.size) + payload.astype("<f8").tobytes())
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_model(data: bytes) -> tuple[MlpModel, Encoder, dict]:
    if len(data) < 4 + 2 + 4 + 8 + 4:
        raise ModelFileError("file too short to be a model file")
    if data[:4] != MAGIC:
        raise ModelFileError(f"bad magic {data[:4]!r}; not a model file")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ModelFileError("CRC mismatch: model file is corrupted")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise ModelFileError(f"unsupported model file version {version} (expected {VERSION})")
    off = 10
    try:
        header = json.loads(data[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"unreadable header: {exc}") from exc
    off += hlen
    (count,) = struct.unpack_from("<Q", data, off)
    off += 8
    if off + 8 * count != len(body):
        raise ModelFileError("payload length does not match the declared value count")
    flat = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(float)
    arrays = {}
    pos = 0
    for spec in header["arrays"]:
        size = int(np.prod(spec["shape"], dtype=np.int64))
        arrays[spec["name"]] = flat[pos:pos + size].reshape(spec["shape"])
        pos += size
    if pos != count:
        raise ModelFileError("array layout does not cover the payload")
    enc = _decode_encoder(header["encoder"], arrays)
    layers = []
    for i, ls in enumerate(header["layers"]):
        atom = None if ls["atom"] is None else Atom.from_dict(ls["atom"])
        layers.append(Layer(arrays[f"layer{i}.weight"], arrays[f"layer{i}.bias"], atom,
                            float(ls["omega"]), bool(ls["learn_atom"])))
    return MlpModel(tuple(layers)), enc, header.get("meta", {})


def _decode_encoder(spec: dict, arrays: dict) -> Encoder:
    kind = spec["kind"]
    if kind == "identity":
        return IdentityEncoder(int(spec["in_dim"]))
    if kind == "fourier":
        return FourierFeatureEncoder(arrays["encoder.B"], spec["mode"], spec.get("sigma"),
                                     spec.get("octaves"), bool(spec["trainable"]))
    if kind == "hash":
        return HashGridEncoder(spec["in_dim"], spec["levels"], spec["base_resolution"],
                               spec["growth"], spec["table_size"], spec["feature_dim"],
                               tables=arrays["encoder.tables"])
    raise ModelFileError(f"unknown encoder kind {kind!r}")


def save_model(path, model: MlpModel, encoder: Encoder, meta: dict | None = None) -> None:
    atomic_write_bytes(path, encode_model(model, encoder, meta))


def load_model(path) -> tuple[MlpModel, Encoder, dict]:
    with open(path, "rb") as fh:
        return decode_model(fh.read())
