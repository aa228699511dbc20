"""Binary portable-map image I/O (P5 grayscale, P6 color), 8-bit only.

Values map to floats by v / 255 on read and round(255 * v) on write, so
a write -> read -> write cycle is byte-identical.
"""

import numpy as np


class PnmError(ValueError):
    """Malformed or unsupported portable-map data."""


class TruncatedPnmError(PnmError):
    """Header parsed but the pixel payload ended early."""


def _read_header_tokens(data):
    """Yield (token, offset-after-token), skipping whitespace and # comments."""
    i = 0
    n = len(data)
    while True:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        if i >= n:
            raise PnmError("unexpected end of header")
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        yield data[start:i], i


def read_pnm(path):
    """Read a P5/P6 file -> float array in [0, 1], (H, W) or (3, H, W)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] not in (b"P5", b"P6"):
        raise PnmError(f"{path}: not a binary PGM/PPM (magic {data[:2]!r})")
    color = data[:2] == b"P6"
    tokens = _read_header_tokens(data[2:])
    fields = []
    for _ in range(3):
        tok, end = next(tokens)
        fields.append(tok)
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise PnmError(f"{path}: non-numeric header field") from exc
    if width <= 0 or height <= 0:
        raise PnmError(f"{path}: bad extents {width}x{height}")
    if maxval != 255:
        raise PnmError(f"{path}: unsupported maxval {maxval} (only 255)")
    payload_at = 2 + end + 1  # single whitespace byte after maxval
    count = width * height * (3 if color else 1)
    payload = data[payload_at : payload_at + count]
    if len(payload) < count:
        raise TruncatedPnmError(
            f"{path}: payload has {len(payload)} bytes, expected {count}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    if color:
        return pixels.reshape(height, width, 3).transpose(2, 0, 1)
    return pixels.reshape(height, width)


def write_pnm(path, image):
    """Write [0, 1] floats as P5 ((H, W) input) or P6 ((3, H, W) input)."""
    image = np.asarray(image)
    if image.ndim == 2:
        magic, h, w = b"P5", *image.shape
        flat = image
    elif image.ndim == 3 and image.shape[0] == 3:
        magic = b"P6"
        _, h, w = image.shape
        flat = image.transpose(1, 2, 0)
    else:
        raise PnmError(f"cannot encode shape {image.shape} as PGM/PPM")
    if np.min(flat) < 0.0 or np.max(flat) > 1.0:
        raise PnmError("pixel values outside [0, 1]")
    body = np.round(flat * 255.0).astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(body)
