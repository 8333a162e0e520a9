"""
Synthetic test objects.

Two families are generated: real-valued toy images made of a few filled convex
shapes that are translated somewhere inside the frame, and complex crystal
objects with unit modulus on a random (convex or star-shaped) support and a
phase given by a projected defect displacement field.
"""
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .errors import ValidationError
from .field import forward_intensities

CONVEX = "convex"
CONCAVE = "concave"
MAX_RETRIES = 50


@dataclass(frozen=True)
class CrystalParams:
    frame: int = 128
    region: int = 110
    num_points: Tuple[int, int] = (6, 12)
    shape_kind: str = CONVEX
    num_defects: int = 2
    defect_strength: Tuple[float, float] = (0.5, 1.5)
    q: float = 2 * np.pi
    rng_seed: int = 0
    photons: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.region <= self.frame:
            raise ValidationError(f"region {self.region} must lie in (0, frame={self.frame}]")
        lo, hi = self.num_points
        if lo < 3 or hi < lo:
            raise ValidationError(f"num_points range {self.num_points} invalid; need 3 <= lo <= hi")
        if self.shape_kind not in (CONVEX, CONCAVE):
            raise ValidationError(f"shape_kind must be 'convex' or 'concave', got {self.shape_kind!r}")
        if self.num_defects < 0:
            raise ValidationError("num_defects must be nonnegative")
        if self.defect_strength[1] < self.defect_strength[0]:
            raise ValidationError("defect_strength range is reversed")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ToyParams:
    frame: int = 32
    content: int = 27
    num_shapes: Tuple[int, int] = (2, 4)
    intensity: Tuple[float, float] = (0.3, 1.0)
    max_shift: Optional[int] = None
    rng_seed: int = 0
    photons: Optional[float] = None

    def __post_init__(self):
        if not 3 <= self.content <= self.frame:
            raise ValidationError(f"content box {self.content} must lie in [3, frame={self.frame}]")
        lo, hi = self.intensity
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValidationError(f"intensity range {self.intensity} must lie inside [0, 1]")
        if self.num_shapes[0] < 1 or self.num_shapes[1] < self.num_shapes[0]:
            raise ValidationError(f"num_shapes range {self.num_shapes} invalid")
        if self.max_shift is not None and self.max_shift < 0:
            raise ValidationError("max_shift must be nonnegative")

    def to_dict(self):
        return asdict(self)


def fill_polygon(vertices, shape):
    """Rasterize a closed polygon by testing pixel centers (even-odd rule).

    ``vertices`` holds (row, col) pairs in drawing order.
    """
    rr, cc = np.mgrid[0:shape[0], 0:shape[1]]
    r = rr.ravel() + 0.5
    c = cc.ravel() + 0.5
    inside = np.zeros(r.shape, dtype=bool)
    v = np.asarray(vertices, dtype=float)
    for (r0, c0), (r1, c1) in zip(v, np.roll(v, -1, axis=0)):
        crosses = (r0 > r) != (r1 > r)
        with np.errstate(divide="ignore", invalid="ignore"):
            c_at = c0 + (r - r0) * (c1 - c0) / (r1 - r0)
        inside ^= crosses & (c < c_at)
    return inside.reshape(shape)


def largest_component(mask):
    labels, count = ndimage.label(mask)  # default structure is 4-connectivity
    if count <= 1:
        return mask
    sizes = ndimage.sum(mask, labels, index=np.arange(1, count + 1))
    return labels == (1 + int(np.argmax(sizes)))


def convex_polygon(points):
    hull = ConvexHull(points)
    return points[hull.vertices]


def star_polygon(points):
    center = points.mean(axis=0)
    angles = np.arctan2(points[:, 0] - center[0], points[:, 1] - center[1])
    return points[np.argsort(angles, kind="stable")]


def random_shape(rng, count, box, offset, kind, shape):
    """Filled random polygon inside ``[offset, offset + box)`` on a grid of ``shape``."""
    for _ in range(MAX_RETRIES):
        pts = offset + rng.random((count, 2)) * box
        try:
            poly = convex_polygon(pts) if kind == CONVEX else star_polygon(pts)
        except QhullError:
            continue
        mask = largest_component(fill_polygon(poly, shape))
        if mask.sum() >= max(4, 0.02 * box * box):
            return mask
    raise ValidationError(f"failed to draw a non-degenerate {kind} shape after {MAX_RETRIES} attempts")


def wrap_phase(phi):
    """Map angles to [-pi, pi)."""
    return np.mod(phi + np.pi, 2 * np.pi) - np.pi


def displacement_field(shape, centers, strengths):
    """Sum of screw-dislocation windings ``b_j * atan2(r - c_j) / (2 pi)``."""
    rr, cc = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    u = np.zeros(shape)
    for (r0, c0), b in zip(centers, strengths):
        u += b * np.arctan2(rr - r0, cc - c0) / (2 * np.pi)
    return u


def add_poisson_noise(y, photons, rng):
    """Rescale ``y`` to ``photons`` total counts, sample, and scale back."""
    total = y.sum()
    if total <= 0:
        return y
    scale = photons / total
    return rng.poisson(y * scale).astype(np.float64) / scale


def simulate_crystal(p=CrystalParams()):
    """Return ``(object, intensities)`` for a simulated crystal.

    The intensities are sampled on a ``2 * frame`` grid.
    """
    rng = np.random.default_rng(p.rng_seed)
    shape = (p.frame, p.frame)
    offset = (p.frame - p.region) / 2.0
    count = int(rng.integers(p.num_points[0], p.num_points[1] + 1))
    support = random_shape(rng, count, p.region, offset, p.shape_kind, shape)

    inside = np.argwhere(support)
    picks = rng.choice(len(inside), size=p.num_defects, replace=len(inside) < p.num_defects)
    # jitter keeps the winding centers off pixel centers
    centers = inside[picks] + rng.random((p.num_defects, 2))
    strengths = rng.uniform(p.defect_strength[0], p.defect_strength[1], p.num_defects)
    strengths *= rng.choice([-1.0, 1.0], p.num_defects)

    phase = wrap_phase(p.q * displacement_field(shape, centers, strengths))
    x = np.where(support, np.exp(1j * phase), 0.0)
    # exp(i*0) is exactly 1; keep the zero-defect case exactly real
    if p.num_defects == 0:
        x = support.astype(np.complex128)
    y = forward_intensities(x, 2 * p.frame)
    if p.photons:
        y = add_poisson_noise(y, p.photons, rng)
    return x, y


def ellipse_polygon(rng, center, max_radius):
    """Convex polygon with 6-10 vertices on a randomly rotated ellipse."""
    count = int(rng.integers(6, 11))
    t = np.sort(rng.uniform(0, 2 * np.pi, count))
    a, b = rng.uniform(0.35, 1.0, 2) * max_radius
    rot = rng.uniform(0, np.pi)
    pr, pc = a * np.cos(t), b * np.sin(t)
    rows = center[0] + pr * np.cos(rot) - pc * np.sin(rot)
    cols = center[1] + pr * np.sin(rot) + pc * np.cos(rot)
    return np.stack([rows, cols], axis=1)


def simulate_toy(p=ToyParams()):
    """Return ``(object, intensities)`` for a real toy image with values in [0, 1]."""
    rng = np.random.default_rng(p.rng_seed)
    shape = (p.frame, p.frame)
    img = np.zeros(shape)
    count = int(rng.integers(p.num_shapes[0], p.num_shapes[1] + 1))
    radius = p.content / 3.0
    for _ in range(count):
        for _ in range(MAX_RETRIES):
            center = radius + rng.random(2) * (p.content - 2 * radius)
            mask = fill_polygon(ellipse_polygon(rng, center, radius), shape)
            if mask.sum() >= 4:
                break
        img = np.maximum(img, mask * rng.uniform(*p.intensity))
    img = np.where(largest_component(img > 0), img, 0.0)

    rows, cols = np.nonzero(img)
    lo = np.array([rows.min(), cols.min()])
    hi = np.array([rows.max(), cols.max()])
    room = (p.frame - 1 - hi) + lo  # total slack along each axis
    shift = np.array([int(rng.integers(0, r + 1)) for r in room]) - lo
    if p.max_shift is not None:
        shift = np.clip(shift, np.maximum(-lo, -p.max_shift), np.minimum(p.max_shift, p.frame - 1 - hi))
    out = np.zeros(shape)
    out[lo[0] + shift[0]:hi[0] + shift[0] + 1, lo[1] + shift[1]:hi[1] + shift[1] + 1] = \
        img[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1]
    x = out.astype(np.complex128)
    y = forward_intensities(x, 2 * p.frame)
    if p.photons:
        y = add_poisson_noise(y, p.photons, rng)
    return x, y
