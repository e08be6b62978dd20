"""Small planar-geometry helpers used by the puzzle and modulus modules.

Polygons are closed polylines stored as 1-d complex arrays; the closing edge
from the last point back to the first is implicit.
"""

from __future__ import annotations

import numpy as np


def polygon_contains(boundary: np.ndarray, z: complex) -> bool:
    """Even-odd test for a single point against a closed complex polyline.

    Uses the half-open crossing rule, so the answer is reliable for points
    that are not within round-off of the boundary itself.
    """
    x, y = z.real, z.imag
    bx = boundary.real
    by = boundary.imag
    bx2 = np.concatenate((bx[1:], bx[:1]))
    by2 = np.concatenate((by[1:], by[:1]))
    cross = (by > y) != (by2 > y)
    if not cross.any():
        return False
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = bx[cross] + (y - by[cross]) * (bx2[cross] - bx[cross]) / (by2[cross] - by[cross])
    return bool(np.count_nonzero(xint > x) % 2)


def polygon_contains_many(boundary: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Even-odd test for many points; returns a boolean array."""
    from matplotlib.path import Path

    verts = np.column_stack([boundary.real, boundary.imag])
    pts = np.column_stack([np.asarray(zs).real, np.asarray(zs).imag])
    return Path(verts).contains_points(pts)


def polyline_distance(boundary: np.ndarray, z: complex) -> float:
    """Distance from a point to a closed polyline (segments included)."""
    a = boundary
    b = np.roll(boundary, -1)
    ab = b - a
    denom = np.abs(ab) ** 2
    t = np.zeros_like(denom)
    nz = denom > 0
    t[nz] = np.clip(((z - a[nz]) * np.conj(ab[nz])).real / denom[nz], 0.0, 1.0)
    proj = a + t * ab
    return float(np.min(np.abs(z - proj)))


def min_gap(poly_a: np.ndarray, poly_b: np.ndarray, samples: int = 512) -> float:
    """Approximate minimum distance between two polylines (vertex sampling)."""
    a = poly_a if len(poly_a) <= samples else poly_a[:: max(1, len(poly_a) // samples)]
    b = poly_b if len(poly_b) <= samples else poly_b[:: max(1, len(poly_b) // samples)]
    d = np.abs(a[:, None] - b[None, :])
    return float(d.min())


def polygon_area(boundary: np.ndarray) -> float:
    """Unsigned area by the shoelace formula."""
    x = boundary.real
    y = boundary.imag
    x2 = np.roll(x, -1)
    y2 = np.roll(y, -1)
    return float(abs(np.sum(x * y2 - x2 * y)) / 2.0)


def polygon_bbox(boundary: np.ndarray) -> tuple[float, float, float, float]:
    """(xmin, xmax, ymin, ymax) of the polyline vertices."""
    return (
        float(boundary.real.min()),
        float(boundary.real.max()),
        float(boundary.imag.min()),
        float(boundary.imag.max()),
    )


def bbox_diameter(boundary: np.ndarray) -> float:
    x0, x1, y0, y1 = polygon_bbox(boundary)
    return float(np.hypot(x1 - x0, y1 - y0))


def interior_point(boundary: np.ndarray) -> complex:
    """A point strictly inside a simple closed polyline.

    Shoots a horizontal ray through a vertex band and takes the midpoint of
    the first crossing interval.
    """
    ys = np.sort(boundary.imag)
    # a level crossed by the polygon but avoiding vertices as far as possible
    y = float((ys[len(ys) // 2] + ys[len(ys) // 2 + 1]) / 2.0) if len(ys) > 2 else float(ys.mean())
    if y == ys[len(ys) // 2]:
        y = float(ys.mean())
    bx = boundary.real
    by = boundary.imag
    bx2 = np.roll(bx, -1)
    by2 = np.roll(by, -1)
    cross = (by > y) != (by2 > y)
    xs = bx[cross] + (y - by[cross]) * (bx2[cross] - bx[cross]) / (by2[cross] - by[cross])
    xs = np.sort(xs)
    if len(xs) < 2:
        # degenerate fallback: centroid
        return complex(boundary.mean())
    return complex((xs[0] + xs[1]) / 2.0, y)


def resample_polyline(boundary: np.ndarray, max_step: float) -> np.ndarray:
    """Insert linear midpoints until no segment exceeds ``max_step``."""
    pts = boundary
    while True:
        seg = np.abs(np.roll(pts, -1) - pts)
        long = seg > max_step
        if not long.any():
            return pts
        out = []
        nxt = np.roll(pts, -1)
        for i, p in enumerate(pts):
            out.append(p)
            if long[i]:
                n = int(np.ceil(seg[i] / max_step))
                for k in range(1, n):
                    out.append(p + (nxt[i] - p) * k / n)
        pts = np.asarray(out)
