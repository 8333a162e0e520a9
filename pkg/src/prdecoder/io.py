"""
Persistence and rendering.

Array files ("PRTK01") have a 24-byte header followed by a row-major,
little-endian float64 payload::

    bytes 0-5   b"PRTK01"
    byte  6     dtype: 0x01 real f64, 0x02 complex f64 (re, im interleaved)
    byte  7     reserved, 0x00
    bytes 8-15  rows, uint64 LE
    bytes 16-23 cols, uint64 LE

All writes go to a temporary file in the destination directory and are then
renamed into place.
"""
import csv
import io as _io
import json
import os
import struct
import tempfile

import numpy as np
from PIL import Image

from .errors import FormatError, ValidationError

MAGIC = b"PRTK01"
REAL = 0x01
COMPLEX = 0x02
HEADER = struct.Struct("<6sBBQQ")
TRACE_HEADER = ("iter", "loss", "elapsed_ms")
# manifest keys holding wall-clock measurements
WALL_TIME_KEYS = ("wall_time_ms",)


def atomic_write(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_array(array):
    a = np.asarray(array)
    if a.ndim != 2:
        raise ValidationError(f"only 2D arrays can be stored, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("refusing to store non-finite values")
    if np.iscomplexobj(a):
        dtype, payload = COMPLEX, np.ascontiguousarray(a, dtype="<c16")
    else:
        dtype, payload = REAL, np.ascontiguousarray(a, dtype="<f8")
    return HEADER.pack(MAGIC, dtype, 0, a.shape[0], a.shape[1]) + payload.tobytes()


def decode_array(data):
    if len(data) < HEADER.size:
        raise FormatError(f"file too short for header ({len(data)} bytes)")
    magic, dtype, reserved, rows, cols = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if dtype not in (REAL, COMPLEX):
        raise FormatError(f"unknown dtype byte 0x{dtype:02x}")
    if reserved != 0:
        raise FormatError("reserved header byte is not zero")
    width = 8 if dtype == REAL else 16
    expected = HEADER.size + rows * cols * width
    if len(data) != expected:
        raise FormatError(f"payload size mismatch: expected {expected} bytes, got {len(data)}")
    a = np.frombuffer(data, dtype="<f8" if dtype == REAL else "<c16", offset=HEADER.size)
    a = a.reshape(rows, cols).astype(np.float64 if dtype == REAL else np.complex128)
    if not np.all(np.isfinite(a)):
        raise FormatError("array contains non-finite values")
    return a


def write_array(path, array):
    atomic_write(path, encode_array(array))


def read_array(path):
    with open(path, "rb") as fh:
        return decode_array(fh.read())


def write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    atomic_write(path, text.encode())


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_trace(path, trace):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for it, value, elapsed in trace:
        writer.writerow((int(it), repr(float(value)), f"{elapsed:.3f}"))
    atomic_write(path, buf.getvalue().encode())


def read_trace(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise FormatError("trace CSV has an unexpected header")
    return [(int(r[0]), float(r[1]), float(r[2])) for r in rows[1:]]


def save_weights(directory, weights, cfg):
    """Checkpoint decoder weights as one array file per tensor plus a manifest."""
    os.makedirs(directory, exist_ok=True)
    files = []
    for name, a in zip(weights.names(), weights.arrays()):
        fname = f"{name}.prtk"
        write_array(os.path.join(directory, fname), np.atleast_2d(a))
        files.append({"name": name, "file": fname, "shape": list(a.shape)})
    write_json(os.path.join(directory, "weights.json"), {"config": cfg.__dict__, "tensors": files})


def load_weights(directory):
    from .decoder import DecoderConfig, DecoderWeights

    manifest = read_json(os.path.join(directory, "weights.json"))
    cfg = DecoderConfig(**manifest["config"])
    arrays = []
    for entry in manifest["tensors"]:
        a = read_array(os.path.join(directory, entry["file"]))
        arrays.append(a.reshape(entry["shape"]))
    return DecoderWeights.from_arrays(arrays), cfg


def _phase_lut():
    """Cyclic 256-entry RGB colormap for phase in [-pi, pi).

    Entry j covers phase -pi + 2*pi*j/256. Channels are offset cosines, so
    the map wraps seamlessly; phase 0 (entry 128) is the red (255, 64, 64).
    """
    phi = -np.pi + 2 * np.pi * np.arange(256) / 256
    offsets = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
    rgb = 0.625 + 0.375 * np.cos(phi[:, None] - offsets[None, :])
    return np.round(255 * (rgb - 0.25) / 0.75).astype(np.uint8)


PHASE_LUT = _phase_lut()


def magnitude_to_gray(image):
    mag = np.abs(image)
    top = mag.max()
    if top == 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    return np.round(255 * mag / top).astype(np.uint8)


def phase_to_rgb(image):
    phi = np.angle(image)
    idx = np.floor((phi + np.pi) / (2 * np.pi) * 256).astype(int) % 256
    return PHASE_LUT[idx]


def _png_bytes(pixels):
    buf = _io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def render_png(image, out_mag_path, out_phase_path):
    """Write the magnitude as 8-bit grayscale and the phase through the cyclic LUT."""
    image = np.asarray(image)
    if image.ndim != 2 or image.size == 0:
        raise ValidationError(f"cannot render an image of shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValidationError("cannot render non-finite values")
    atomic_write(out_mag_path, _png_bytes(magnitude_to_gray(image)))
    atomic_write(out_phase_path, _png_bytes(phase_to_rgb(image)))


def strip_wall_time(obj):
    """Copy of a manifest with wall-clock fields removed (for reproducibility checks)."""
    if isinstance(obj, dict):
        return {k: strip_wall_time(v) for k, v in obj.items() if k not in WALL_TIME_KEYS}
    if isinstance(obj, list):
        return [strip_wall_time(v) for v in obj]
    return obj
