"""Dependency-free readers/writers: 16-bit PCM WAV, binary PGM/PPM, CSV matrices."""

from __future__ import annotations

import json
import wave

import numpy as np


class FormatError(ValueError):
    pass


# -- WAV ----------------------------------------------------------------------

def read_wav(path):
    """Return ``(samples, sample_rate)`` with samples in [-1, 1].

    Only 16-bit PCM is accepted; multi-channel audio is averaged to mono.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise FormatError(f"{path}: compressed WAV is not supported")
            if wf.getsampwidth() != 2:
                raise FormatError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
            channels = wf.getnchannels()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc or 'truncated'})") from exc
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return data, rate


def write_wav(path, samples, sample_rate):
    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(pcm.tobytes())


# -- PGM / PPM ----------------------------------------------------------------

def _header_tokens(buf):
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(buf) and chr(buf[pos]).isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not chr(buf[pos]).isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PNM header")
        tokens.append(int(buf[start:pos]))
    return tokens, pos + 1  # one whitespace byte before raster


def read_pnm(path):
    """Read binary PGM (P5) or PPM (P6), 8-bit. Returns uint8 (H, W, C)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: only binary P5/P6 images are supported")
    try:
        (width, height, maxval), start = _header_tokens(buf)
    except ValueError as exc:
        raise FormatError(f"{path}: bad header ({exc})") from exc
    if not 0 < maxval < 256:
        raise FormatError(f"{path}: maxval {maxval} not supported (8-bit only)")
    channels = 3 if magic == b"P6" else 1
    size = width * height * channels
    raster = buf[start:start + size]
    if len(raster) != size:
        raise FormatError(f"{path}: raster has {len(raster)} bytes, expected {size}")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return img, maxval


def read_image(path):
    """Image as float (H, W, 3) in [0, 1]; grayscale is replicated."""
    img, maxval = read_pnm(path)
    img = img.astype(np.float64) / maxval
    if img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    return img


def write_pgm(path, pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())


def write_ppm(path, pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w, _ = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())


# -- CSV matrices / JSON --------------------------------------------------------

def format_matrix_csv(matrix):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in matrix)


def write_matrix_csv(path, matrix):
    with open(path, "w", newline="") as fh:
        fh.write(format_matrix_csv(matrix))


def read_matrix_csv(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: expected a non-empty rectangular matrix")
    return np.array(rows)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
