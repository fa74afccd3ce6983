"""EVOM checkpoint format: named float32 tensors, little-endian.

Layout: magic "EVOM", u32 version=1, u32 tensor count; per tensor: u16 name
length, UTF-8 name, u8 ndim, ndim x u32 extents, f32 data. A full model stores
conv1.w .. fc3.b; a classifier head stores fc1.w .. fc3.b.
"""

import struct

import numpy as np

from .errors import FormatError
from .evo import ClassifierHead
from .nn import CnnModel, ConvLayerParams, LinearLayerParams

MAGIC = b"EVOM"
VERSION = 1

MODEL_NAMES = (
    "conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b",
    "fc1.w", "fc1.b", "fc2.w", "fc2.b", "fc3.w", "fc3.b",
)
HEAD_NAMES = ("fc1.w", "fc1.b", "fc2.w", "fc2.b", "fc3.w", "fc3.b")


def save_tensors(tensors, path):
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(tensors))
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(out)


def load_tensors(path):
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12:
        raise FormatError("truncated checkpoint file")
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    tensors = {}
    off = 12
    try:
        for _ in range(count):
            (name_len,) = struct.unpack("<H", blob[off : off + 2])
            off += 2
            name = blob[off : off + name_len].decode("utf-8")
            off += name_len
            ndim = blob[off]
            off += 1
            shape = struct.unpack(f"<{ndim}I", blob[off : off + 4 * ndim])
            off += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(shape)
            off += 4 * n
            tensors[name] = arr.copy()
    except (struct.error, ValueError) as exc:
        raise FormatError(f"truncated or malformed checkpoint: {exc}") from exc
    if off != len(blob):
        raise FormatError("trailing bytes after last tensor")
    return tensors


def save_model(model: CnnModel, path):
    save_tensors({name: arr for name, arr in model.parameters().items()}, path)


def load_model(path) -> CnnModel:
    t = load_tensors(path)
    missing = [n for n in MODEL_NAMES if n not in t]
    if missing:
        raise FormatError(f"checkpoint is missing tensors: {missing}")
    return CnnModel(
        conv1=ConvLayerParams(t["conv1.w"], t["conv1.b"]),
        conv2=ConvLayerParams(t["conv2.w"], t["conv2.b"]),
        conv3=ConvLayerParams(t["conv3.w"], t["conv3.b"]),
        fc1=LinearLayerParams(t["fc1.w"], t["fc1.b"]),
        fc2=LinearLayerParams(t["fc2.w"], t["fc2.b"]),
        fc3=LinearLayerParams(t["fc3.w"], t["fc3.b"]),
        mode="eval",
    )


def save_head(head: ClassifierHead, path):
    save_tensors(head.parameters(), path)


def load_head(path) -> ClassifierHead:
    t = load_tensors(path)
    missing = [n for n in HEAD_NAMES if n not in t]
    if missing:
        raise FormatError(f"checkpoint is missing tensors: {missing}")
    return ClassifierHead(
        fc1=LinearLayerParams(t["fc1.w"], t["fc1.b"]),
        fc2=LinearLayerParams(t["fc2.w"], t["fc2.b"]),
        fc3=LinearLayerParams(t["fc3.w"], t["fc3.b"]),
    )
