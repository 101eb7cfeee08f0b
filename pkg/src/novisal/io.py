"""File formats: PGM/PPM images, dataset manifests, weights, thresholds.

All formats are deterministic on write so that repeated runs with the same
seeds produce byte-identical artifacts.

* Images: 8-bit binary PGM (P5, maxval 255) for grayscale and PPM (P6) for
  RGB.  Intensities encode as ``byte = floor(v * 255 + 0.5)`` and decode as
  ``v = byte / 255``.
* Manifests: UTF-8 CSV with header ``path,angle_rad``; paths are relative
  to the manifest's directory, non-empty and unique; angles finite.
* Weights: binary "NVSM" container shared by the steering network and the
  autoencoder (see `save_weights`).
* Thresholds: 3-line UTF-8 text record (orientation, percentile, cutoff).
"""

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = [
    "encode_intensity",
    "decode_intensity",
    "write_pgm",
    "read_pgm",
    "write_ppm",
    "read_ppm",
    "read_image_file",
    "write_manifest",
    "read_manifest",
    "save_weights",
    "load_weights",
    "write_threshold",
    "read_threshold",
]


def encode_intensity(values):
    """Map [0, 1] intensities to bytes: floor(v * 255 + 0.5)."""
    arr = np.asarray(values, dtype=np.float64)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def decode_intensity(data):
    """Map bytes back to [0, 1] intensities: byte / 255."""
    return np.asarray(data, dtype=np.float64) / 255.0


def write_pgm(path, img):
    """Write a grayscale image as binary PGM (P5, maxval 255)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"PGM image must be non-empty 2-D, got {arr.shape}")
    h, w = arr.shape
    payload = encode_intensity(arr).tobytes()
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(payload)


def write_ppm(path, img):
    """Write an RGB image as binary PPM (P6, maxval 255)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
        raise ValueError(f"PPM image must be H x W x 3, got {arr.shape}")
    h, w = arr.shape[:2]
    payload = encode_intensity(arr).tobytes()
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(payload)


def _read_netpbm(path, magic):
    """Parse a binary netpbm file and return (width, height, payload)."""
    data = Path(path).read_bytes()
    if not data.startswith(magic):
        raise DataError(f"{path}: expected {magic.decode()} file")
    # Header tokens may be separated by whitespace and '#' comments.
    pos = len(magic)
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise DataError(f"{path}: truncated header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif c.isspace():
            pos += 1
        elif c.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            fields.append(int(data[pos:end]))
            pos = end
        else:
            raise DataError(f"{path}: malformed header near byte {pos}")
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise DataError(f"{path}: only maxval 255 supported, got {maxval}")
    if w < 1 or h < 1:
        raise DataError(f"{path}: bad dimensions {w}x{h}")
    return w, h, data[pos:]


def read_pgm(path):
    """Read a binary PGM file into a [0, 1] grayscale image."""
    w, h, payload = _read_netpbm(path, b"P5")
    if len(payload) < h * w:
        raise DataError(f"{path}: expected {h * w} pixel bytes, got {len(payload)}")
    raw = np.frombuffer(payload[: h * w], dtype=np.uint8).reshape(h, w)
    return decode_intensity(raw)


def read_ppm(path):
    """Read a binary PPM file into a [0, 1] H x W x 3 image."""
    w, h, payload = _read_netpbm(path, b"P6")
    if len(payload) < 3 * h * w:
        raise DataError(f"{path}: expected {3 * h * w} pixel bytes, got {len(payload)}")
    raw = np.frombuffer(payload[: 3 * h * w], dtype=np.uint8).reshape(h, w, 3)
    return decode_intensity(raw)


def read_image_file(path):
    """Read a PGM or PPM file, converting RGB to grayscale.

    Returns a 2-D [0, 1] intensity array either way.
    """
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"P5":
        return read_pgm(path)
    if magic == b"P6":
        from .image import to_grayscale

        return to_grayscale(read_ppm(path))
    raise DataError(f"{path}: not a binary PGM/PPM file (magic {magic!r})")


# ---------------------------------------------------------------------------
# Dataset manifests


def write_manifest(path, records):
    """Write (relative path, steering angle) records as a manifest CSV.

    Angles are written with ``repr`` so they round-trip exactly.
    """
    records = list(records)
    _check_records(records, path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "angle_rad"])
        for rel, angle in records:
            writer.writerow([rel, repr(float(angle))])


def read_manifest(path):
    """Read a manifest CSV into a list of (relative path, angle) tuples."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not rows or rows[0] != ["path", "angle_rad"]:
        raise DataError(f"{path}: missing 'path,angle_rad' header")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        try:
            angle = float(row[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad angle {row[1]!r}") from exc
        records.append((row[0], angle))
    _check_records(records, path)
    return records


def _check_records(records, path):
    if not records:
        raise DataError(f"{path}: manifest has no records")
    seen = set()
    for rel, angle in records:
        if not rel:
            raise DataError(f"{path}: empty image path")
        if rel in seen:
            raise DataError(f"{path}: duplicate image path {rel!r}")
        seen.add(rel)
        if not np.isfinite(angle):
            raise DataError(f"{path}: non-finite angle for {rel!r}")


def manifest_image_paths(manifest_path, records):
    """Resolve manifest-relative image paths against the manifest's directory."""
    base = Path(manifest_path).parent
    return [base / rel for rel, _ in records]


# ---------------------------------------------------------------------------
# Weights container
#
# Layout (all integers little-endian u32, all floats little-endian f32):
#   magic "NVSM" | version=1 | layer_count
#   per layer: kind (0=conv, 1=dense) | dim header | weights | biases
#     conv:  header (out_ch, in_ch, kernel, stride); weights shaped
#            (out_ch, in_ch, kernel, kernel) in C order (output-channel
#            major), then out_ch biases
#     dense: header (out_dim, in_dim); weights shaped (out_dim, in_dim)
#            in C order, then out_dim biases

_MAGIC = b"NVSM"
_VERSION = 1
KIND_CONV = 0
KIND_DENSE = 1


def save_weights(path, layers):
    """Save layer records to an NVSM weights file.

    Parameters
    ----------
    path : path-like
        Output file.
    layers : sequence of dict
        Each record has ``kind`` ("conv" or "dense"), ``weights`` and
        ``biases`` arrays, and for conv layers a ``stride``.  Conv weights
        are (out_ch, in_ch, k, k); dense weights are (out_dim, in_dim).
    """
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<II", _VERSION, len(layers))
    for rec in layers:
        w = np.ascontiguousarray(rec["weights"], dtype="<f4")
        b = np.ascontiguousarray(rec["biases"], dtype="<f4")
        if rec["kind"] == "conv":
            out_ch, in_ch, k, k2 = w.shape
            if k != k2:
                raise ValueError(f"conv kernel must be square, got {w.shape}")
            blob += struct.pack("<IIIII", KIND_CONV, out_ch, in_ch, k, int(rec["stride"]))
        elif rec["kind"] == "dense":
            out_dim, in_dim = w.shape
            blob += struct.pack("<III", KIND_DENSE, out_dim, in_dim)
        else:
            raise ValueError(f"unknown layer kind {rec['kind']!r}")
        blob += w.tobytes()
        blob += b.tobytes()
    Path(path).write_bytes(bytes(blob))


def load_weights(path):
    """Load an NVSM weights file back into layer records.

    Returns the same record dicts `save_weights` accepts, with float32
    weight/bias arrays.
    """
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise DataError(f"{path}: not an NVSM weights file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    pos = 12
    layers = []

    def take_floats(n):
        nonlocal pos
        end = pos + 4 * n
        if end > len(data):
            raise DataError(f"{path}: truncated weights file")
        out = np.frombuffer(data, dtype="<f4", count=n, offset=pos)
        pos = end
        return out

    for _ in range(count):
        if pos + 4 > len(data):
            raise DataError(f"{path}: truncated weights file")
        (kind,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if kind == KIND_CONV:
            out_ch, in_ch, k, stride = struct.unpack_from("<IIII", data, pos)
            pos += 16
            w = take_floats(out_ch * in_ch * k * k).reshape(out_ch, in_ch, k, k)
            b = take_floats(out_ch)
            layers.append({"kind": "conv", "weights": w, "biases": b, "stride": stride})
        elif kind == KIND_DENSE:
            out_dim, in_dim = struct.unpack_from("<II", data, pos)
            pos += 8
            w = take_floats(out_dim * in_dim).reshape(out_dim, in_dim)
            b = take_floats(out_dim)
            layers.append({"kind": "dense", "weights": w, "biases": b})
        else:
            raise DataError(f"{path}: unknown layer kind tag {kind}")
    if pos != len(data):
        raise DataError(f"{path}: {len(data) - pos} trailing bytes")
    return layers


# ---------------------------------------------------------------------------
# Threshold records


def write_threshold(path, orientation, percentile, cutoff):
    """Persist a novelty threshold as a 3-line text record."""
    if orientation not in ("high", "low"):
        raise ValueError(f"orientation must be 'high' or 'low', got {orientation!r}")
    text = f"{orientation}\n{repr(float(percentile))}\n{repr(float(cutoff))}\n"
    Path(path).write_text(text, encoding="utf-8")


def read_threshold(path):
    """Read a threshold record; returns (orientation, percentile, cutoff)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) != 3:
        raise DataError(f"{path}: expected 3 lines, got {len(lines)}")
    orientation = lines[0].strip()
    if orientation not in ("high", "low"):
        raise DataError(f"{path}: bad orientation {orientation!r}")
    try:
        percentile = float(lines[1])
        cutoff = float(lines[2])
    except ValueError as exc:
        raise DataError(f"{path}: malformed numeric field") from exc
    return orientation, percentile, cutoff
