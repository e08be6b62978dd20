"""Conformal-modulus arithmetic and a grid estimator for annuli.

Convention: the round annulus r < |z| < R has modulus log(R/r) / (2*pi).
Certified arithmetic works on intervals whose lower bounds are the quantity
all downstream arguments need; upper bounds are informational and may be inf.

The numeric estimator solves the discrete Laplace problem on a square grid
(unit conductance per lattice edge, potential 0 on the inner contour and 1 on
the outer contour); the Dirichlet energy of the solution is the conductance
of the annulus and the modulus is its reciprocal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.ndimage as ndi
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BadRadii, ResolutionCap

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModulusInterval:
    lo: float
    hi: float
    method: str  # 'exact_round' | 'grid_extremal_length' | 'propagated'

    def __post_init__(self):
        if self.lo < 0 or (self.hi < self.lo and not math.isclose(self.hi, self.lo)):
            raise ValueError(f"invalid modulus interval [{self.lo}, {self.hi}]")

    @classmethod
    def degenerate(cls) -> "ModulusInterval":
        return cls(0.0, 0.0, "exact_round")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def scaled(self, factor: float) -> "ModulusInterval":
        hi = self.hi * factor if math.isfinite(self.hi) else math.inf
        return ModulusInterval(self.lo * factor, hi, "propagated")

    def half(self) -> "ModulusInterval":
        return self.scaled(0.5)

    def copy_rule(self) -> "ModulusInterval":
        return ModulusInterval(self.lo, self.hi, "propagated")

    def semi_half(self) -> "ModulusInterval":
        """Strictly-more-than-half recorded as the certified >= half bound."""
        return ModulusInterval(self.lo / 2.0, math.inf, "propagated")


def round_modulus(r: float, R: float) -> ModulusInterval:
    """Exact modulus of the round annulus r < |z| < R."""
    if not (0 < r < R):
        raise BadRadii(f"need 0 < r < R, got r={r}, R={R}")
    m = math.log(R / r) / TWO_PI
    return ModulusInterval(m, m, "exact_round")


def groetzsch_combine(parts: Sequence[ModulusInterval]) -> ModulusInterval:
    """Superadditivity: the containing annulus has modulus >= sum of parts."""
    lo = float(sum(p.lo for p in parts))
    return ModulusInterval(lo, math.inf, "propagated")


def mcmullen_bound(outer_area: float, mod: ModulusInterval) -> float:
    """Certified cap on the area enclosed by an annulus of the given modulus."""
    if outer_area < 0:
        raise ValueError("area must be nonnegative")
    return outer_area / (1.0 + 4.0 * math.pi * mod.lo)


# ---------------------------------------------------------------------------
# Grid estimator
# ---------------------------------------------------------------------------


def _solve_conductance(unknown: np.ndarray, u_inner: np.ndarray, u_outer: np.ndarray) -> float:
    """Dirichlet energy of the discrete harmonic potential (0 inner, 1 outer).

    ``unknown``, ``u_inner``, ``u_outer`` are disjoint boolean masks on one
    grid. Returns the energy, i.e. the conductance between the contours.
    """
    if not unknown.any():
        # contours touch at grid scale: infinite conductance
        return math.inf
    idx = -np.ones(unknown.shape, dtype=np.int64)
    n = int(unknown.sum())
    idx[unknown] = np.arange(n)
    u = np.zeros(unknown.shape)
    u[u_outer] = 1.0

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    diag = np.zeros(n)
    inside = unknown | u_inner | u_outer
    for shift in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb_inside = _shifted(inside, shift)
        nb_unknown = _shifted(unknown, shift)
        nb_idx = _shifted(idx, shift, fill=-1)
        nb_u = _shifted(u, shift)
        active = unknown & nb_inside
        diag[idx[active]] += 1.0
        both = active & nb_unknown
        rows.append(idx[both])
        cols.append(nb_idx[both])
        vals.append(-np.ones(int(both.sum())))
        fixed = active & ~nb_unknown
        np.add.at(rhs, idx[fixed], nb_u[fixed])
    rows = np.concatenate(rows + [np.arange(n)])
    cols = np.concatenate(cols + [np.arange(n)])
    vals = np.concatenate(vals + [diag])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    try:
        sol = spla.spsolve(A, rhs)
    except Exception:
        return math.nan
    u[unknown] = sol

    energy = 0.0
    for shift in ((1, 0), (0, 1)):
        nb_inside = _shifted(inside, shift)
        nb_u = _shifted(u, shift)
        act = inside & nb_inside
        du = (u - nb_u)[act]
        energy += float(np.sum(du * du))
    return energy


def _shifted(a: np.ndarray, shift: tuple[int, int], fill=0):
    out = np.full_like(a, fill)
    dx, dy = shift
    src_x = slice(max(0, -dx), a.shape[0] - max(0, dx))
    src_y = slice(max(0, -dy), a.shape[1] - max(0, dy))
    dst_x = slice(max(0, dx), a.shape[0] - max(0, -dx))
    dst_y = slice(max(0, dy), a.shape[1] - max(0, -dy))
    out[dst_x, dst_y] = a[src_x, src_y]
    return out


def _rasterize(outer: np.ndarray, inner: np.ndarray, cells: int):
    """Masks (unknown, inner, outer) for a polygon annulus on a cells^2 grid."""
    from matplotlib.path import Path

    x0, x1 = outer.real.min(), outer.real.max()
    y0, y1 = outer.imag.min(), outer.imag.max()
    pad = 0.03 * max(x1 - x0, y1 - y0)
    x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    nx = cells
    ny = max(8, int(round(cells * (y1 - y0) / (x1 - x0))))
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    po = Path(np.column_stack([outer.real, outer.imag]))
    pi = Path(np.column_stack([inner.real, inner.imag]))
    in_outer = po.contains_points(pts).reshape(X.shape)
    in_inner = pi.contains_points(pts).reshape(X.shape)
    unknown = in_outer & ~in_inner
    return unknown, in_inner, ~in_outer


def estimate_modulus(outer: np.ndarray, inner: np.ndarray, *,
                     base_cells: int = 160, max_cells: int = 1536,
                     slack_frac: float = 0.10, touch_tol: float = 1e-12) -> ModulusInterval:
    """Grid extremal-length estimate for the annulus between two polygons.

    Returns a Richardson-extrapolated estimate with slack equal to the change
    under one grid refinement; refines until the slack is below ``slack_frac``
    of the estimate or the resolution cap is hit (then the widest honest
    interval is returned with lo = 0 if never separated).
    """
    from . import geom

    outer = np.asarray(outer, dtype=complex)
    inner = np.asarray(inner, dtype=complex)
    if geom.min_gap(outer, inner) < touch_tol:
        return ModulusInterval.degenerate()
    # resolution should resolve both the inner island and the gap
    ox0, ox1, oy0, oy1 = geom.polygon_bbox(outer)
    ix0, ix1, iy0, iy1 = geom.polygon_bbox(inner)
    span = max(ox1 - ox0, oy1 - oy0)
    inner_span = max(ix1 - ix0, iy1 - iy0, 1e-300)
    gap = max(geom.min_gap(outer, inner), 1e-300)
    cells = int(max(base_cells, 12 * span / inner_span, 5 * span / gap))
    cells = min(cells, max_cells)

    prev = None
    at_cap = cells >= max_cells
    while True:
        energy = _solve_conductance(*_rasterize(outer, inner, cells))
        if math.isnan(energy):
            raise ResolutionCap(ModulusInterval(0.0, math.inf, "grid_extremal_length"))
        cur = 0.0 if energy == math.inf else (1.0 / energy if energy > 0 else 0.0)
        if prev is not None:
            slack = abs(cur - prev)
            center = 2 * cur - prev  # first-order Richardson
            lo = max(0.0, center - slack)
            hi = max(center + slack, lo)
            if slack <= slack_frac * max(cur, 1e-12):
                return ModulusInterval(lo, hi, "grid_extremal_length")
            if at_cap:
                return ModulusInterval(max(0.0, min(prev, cur) - slack),
                                       max(prev, cur) + slack,
                                       "grid_extremal_length")
        prev = cur
        if cells >= max_cells:
            at_cap = True
        cells = min(max_cells, cells * 2)


def estimate_modulus_cells(ring: np.ndarray, *, slack_cells: int = 1) -> ModulusInterval:
    """Modulus of an annular cell set (True = conductor cells).

    Dirichlet sides come from the complement components: everything connected
    to the grid border is the outer side, the rest is the inner side.  The
    interval is the estimate bracketed by one-cell eroded/dilated rings.
    """
    ring = np.asarray(ring, dtype=bool)
    pad = np.pad(ring, 1, mode="constant", constant_values=False)
    est = _cells_estimate(pad)
    if est is None:
        return ModulusInterval.degenerate()
    grown = ndi.binary_dilation(pad, iterations=slack_cells)
    shrunk = ndi.binary_erosion(pad, iterations=slack_cells)
    hi_est = _cells_estimate(grown)
    lo_est = _cells_estimate(shrunk)
    lo = lo_est if lo_est is not None else 0.0
    hi = hi_est if hi_est is not None else est
    lo = min(lo, est)
    hi = max(hi, est)
    return ModulusInterval(lo, hi, "grid_extremal_length")


def _cells_estimate(ring: np.ndarray) -> Optional[float]:
    comp, ncomp = ndi.label(~ring)
    if ncomp < 2:
        return None
    border_labels = set(np.unique(comp[0, :])) | set(np.unique(comp[-1, :])) \
        | set(np.unique(comp[:, 0])) | set(np.unique(comp[:, -1]))
    border_labels.discard(0)
    outer = np.isin(comp, list(border_labels)) & ~ring
    inner = ~ring & ~outer & (comp > 0)
    if not inner.any():
        return None
    energy = _solve_conductance(ring, inner, outer)
    if not math.isfinite(energy) or energy <= 0:
        return 0.0
    return 1.0 / energy
