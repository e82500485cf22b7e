"""Binary checkpoint format (little-endian throughout).

::

    magic        7 bytes   b"PNMINI1"
    config_len   u32       length of the UTF-8 model config text
    config       bytes     key = value lines (see FusionConfig.to_text)
    layer_count  u32
    per layer:
      kind       u8        tag from KIND_TAGS
      name_len   u16
      name       bytes     UTF-8 layer name
      n_tensors  u32
      per tensor:
        ndim     u8
        dims     ndim x u32
        data     prod(dims) x f32, row-major

Weight-free layers (relu, pooling, ...) are recorded with zero tensors so the
layer sequence itself is verified on load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"PNMINI1"

KIND_TAGS = {
    "conv2d": 1,
    "maxpool2d": 2,
    "dense": 3,
    "batchnorm": 4,
    "relu": 5,
    "softmax": 6,
    "flatten": 7,
    "fusion_weights": 8,
}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}


class CheckpointError(ValueError):
    pass


@dataclass
class LayerRecord:
    kind: str
    name: str
    tensors: list


def dumps(config_text, records):
    out = bytearray(MAGIC)
    cfg = config_text.encode("utf-8")
    out += struct.pack("<I", len(cfg)) + cfg
    out += struct.pack("<I", len(records))
    for rec in records:
        name = rec.name.encode("utf-8")
        out += struct.pack("<BH", KIND_TAGS[rec.kind], len(name)) + name
        out += struct.pack("<I", len(rec.tensors))
        for t in rec.tensors:
            t = np.asarray(t)
            out += struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape)
            out += np.ascontiguousarray(t, dtype="<f4").tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"truncated checkpoint at byte {self.pos}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(buf):
    """Parse checkpoint bytes into ``(config_text, [LayerRecord])``."""
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("bad magic; not a PNMINI1 checkpoint")
    (cfg_len,) = r.unpack("<I")
    config_text = r.take(cfg_len).decode("utf-8")
    (count,) = r.unpack("<I")
    records = []
    for _ in range(count):
        tag, name_len = r.unpack("<BH")
        if tag not in TAG_KINDS:
            raise CheckpointError(f"unknown layer kind tag {tag}")
        name = r.take(name_len).decode("utf-8")
        (n_tensors,) = r.unpack("<I")
        tensors = []
        for _ in range(n_tensors):
            (ndim,) = r.unpack("<B")
            shape = r.unpack(f"<{ndim}I")
            size = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(shape)
            tensors.append(data.astype(np.float64))
        records.append(LayerRecord(TAG_KINDS[tag], name, tensors))
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after last layer")
    return config_text, records


def write(path, config_text, records):
    with open(path, "wb") as fh:
        fh.write(dumps(config_text, records))


def read(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
