"""Ground-truth test images: synthetic generators and file loaders.

Images live on the unit square [0,1]^2 with `side` pixels per edge and are
stored as flat row-major float64 vectors of length side**2 (row index = y,
growing upward; column index = x, growing rightward).
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Image", "generate_phantom", "load_image", "rescale_clip"]


@dataclass(frozen=True, eq=False)
class Image:
    side: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.side < 2:
            raise ValueError(f"side must be >= 2, got {self.side}")
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).ravel())
        if v.size != self.side * self.side:
            raise ValueError(f"expected {self.side**2} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("image values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def pixel_size(self) -> float:
        return 1.0 / self.side

    def as2d(self) -> np.ndarray:
        """(side, side) view, row-major: [row=y][col=x]."""
        return self.values.reshape(self.side, self.side)


def _grid(side):
    # pixel-center coordinates in [-1, 1] per axis
    t = (np.arange(side) + 0.5) / side * 2.0 - 1.0
    return np.meshgrid(t, t)  # X varies along columns, Y along rows


def _ellipse_mask(X, Y, cx, cy, a, b, phi):
    ca, sa = np.cos(phi), np.sin(phi)
    u = (X - cx) * ca + (Y - cy) * sa
    v = -(X - cx) * sa + (Y - cy) * ca
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _plant_like(side, seed):
    # Pot, curved stem and a few elliptical leaves: smooth regions bounded by
    # curvilinear edges, qualitatively similar to a plant photograph.
    rng = np.random.default_rng(seed)
    X, Y = _grid(side)
    img = np.zeros((side, side))

    # pot: half-ellipse at the bottom
    pot = _ellipse_mask(X, Y, 0.0, -0.72, 0.42, 0.33, 0.0) & (Y < -0.55)
    img[pot] = 0.75

    # stem: quadratic bezier ridge with smooth cross-section
    p0 = np.array([0.0, -0.6])
    p1 = np.array([rng.uniform(-0.25, 0.25), 0.0])
    p2 = np.array([rng.uniform(-0.2, 0.2), 0.72])
    t = np.linspace(0.0, 1.0, 160)[:, None]
    curve = (1 - t) ** 2 * p0 + 2 * t * (1 - t) * p1 + t**2 * p2
    d2 = np.min(
        (X[..., None] - curve[:, 0]) ** 2 + (Y[..., None] - curve[:, 1]) ** 2,
        axis=-1,
    )
    width = 0.045
    stem = np.clip(1.0 - d2 / width**2, 0.0, 1.0)
    img = np.maximum(img, 0.9 * np.sqrt(stem))

    # leaves: smooth ellipses branching off the stem
    n_leaves = int(rng.integers(4, 7))
    idx = rng.integers(40, 155, size=n_leaves)
    for i in range(n_leaves):
        cx, cy = curve[idx[i]]
        ang = rng.uniform(0.0, np.pi)
        a = rng.uniform(0.16, 0.3)
        b = a * rng.uniform(0.35, 0.55)
        off = np.array([np.cos(ang), np.sin(ang)]) * a * 0.8
        u = (X - cx - off[0]) * np.cos(ang) + (Y - cy - off[1]) * np.sin(ang)
        v = -(X - cx - off[0]) * np.sin(ang) + (Y - cy - off[1]) * np.cos(ang)
        r2 = (u / a) ** 2 + (v / b) ** 2
        leaf = np.clip(1.0 - r2, 0.0, 1.0)
        img = np.maximum(img, rng.uniform(0.6, 1.0) * np.sqrt(leaf))

    img = np.maximum(img, 0.0)
    img /= img.max()
    return img


def _shepp_logan_like(side, seed):
    # additive ellipse phantom; the seed jitters geometry deterministically
    rng = np.random.default_rng(seed)
    X, Y = _grid(side)
    jit = lambda s: rng.uniform(-s, s)
    ellipses = [
        # (value, cx, cy, a, b, phi)
        (0.8, 0.0, 0.0, 0.72, 0.92, jit(0.05)),
        (-0.6, 0.0, -0.02, 0.64, 0.85, jit(0.05)),
        (0.4, 0.0, 0.38, 0.2, 0.3, jit(0.1)),
        (0.35, -0.24 + jit(0.03), 0.0, 0.12, 0.3, 0.3 + jit(0.1)),
        (0.35, 0.24 + jit(0.03), 0.0, 0.14, 0.3, -0.3 + jit(0.1)),
        (0.3, 0.0, -0.42 + jit(0.03), 0.22, 0.12, jit(0.1)),
        (0.25, jit(0.05), -0.1, 0.05, 0.05, 0.0),
    ]
    img = np.zeros((side, side))
    for val, cx, cy, a, b, phi in ellipses:
        img[_ellipse_mask(X, Y, cx, cy, a, b, phi)] += val
    return np.clip(img, 0.0, 1.0)


def _blocks(side, seed):
    # axis-aligned rectangles painted in order; values stay in {0, .25, .5, 1}
    rng = np.random.default_rng(seed)
    img = np.zeros((side, side))
    levels = np.array([0.25, 0.5, 1.0])
    for _ in range(int(rng.integers(3, 7))):
        r0, c0 = rng.integers(0, side - 2, size=2)
        r1 = int(rng.integers(r0 + 1, side))
        c1 = int(rng.integers(c0 + 1, side))
        img[r0:r1, c0:c1] = levels[rng.integers(0, 3)]
    return img


_GENERATORS = {
    "plant_like": _plant_like,
    "shepp_logan_like": _shepp_logan_like,
    "blocks": _blocks,
}


def generate_phantom(kind: str, side: int, seed: int) -> Image:
    """Deterministic synthetic phantom with values in [0, 1].

    kind is one of 'plant_like', 'shepp_logan_like', 'blocks'.
    """
    if kind not in _GENERATORS:
        raise ValueError(f"unsupported phantom kind: {kind!r}")
    if side < 16:
        raise ValueError(f"side must be >= 16, got {side}")
    return Image(side, _GENERATORS[kind](side, seed))


def load_image(path, format: str) -> Image:
    """Read a square image file and rescale to [0, 1] by max division.

    format 'pgm': binary P5, 8-bit or 16-bit.
    format 'raw_f64': headerless little-endian float64, row-major, the side
    inferred from the file length. Nonnegative data required (the max-division
    rescale cannot produce [0,1] otherwise; use rescale_clip for signed data).
    """
    if format == "pgm":
        data = _read_pgm(path)
    elif format == "raw_f64":
        raw = np.fromfile(path, dtype="<f8")
        side = int(round(np.sqrt(raw.size)))
        if side * side != raw.size:
            raise ValueError(f"raw_f64 file is not square: {raw.size} values")
        if raw.size and raw.min() < 0:
            raise ValueError("raw_f64 input has negative values; use rescale_clip")
        data = raw.reshape(side, side)
    else:
        raise ValueError(f"unsupported format: {format!r}")
    if data.shape[0] != data.shape[1]:
        raise ValueError(f"non-square input: {data.shape}")
    data = data.astype(np.float64)
    peak = data.max()
    if peak > 0:
        data = data / peak
    return Image(data.shape[0], data)


def _read_pgm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] != b"P5":
        raise ValueError("malformed PGM header: missing P5 magic")
    # header = magic, width, height, maxval (comments allowed)
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("malformed PGM header: truncated")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise ValueError(f"malformed PGM header: non-numeric field {fields}")
    if width != height:
        raise ValueError(f"non-square input: {width}x{height}")
    if maxval <= 0 or maxval >= 65536:
        raise ValueError(f"malformed PGM header: maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    pix = np.frombuffer(blob, dtype=dtype, count=count, offset=pos)
    if pix.size != count:
        raise ValueError("malformed PGM: truncated pixel data")
    return pix.reshape(height, width).astype(np.float64)


def rescale_clip(img: Image) -> Image:
    """max{v_i / max_j v_j, 0}: rescale so values span [0, 1], zero negatives."""
    peak = img.values.max()
    if peak <= 0:
        raise ValueError("rescale_clip needs at least one positive value")
    return Image(img.side, np.maximum(img.values / peak, 0.0))
