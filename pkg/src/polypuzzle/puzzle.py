"""Puzzle pieces for quadratic maps: construction, refinement, queries.

Depth-0 pieces cut the region {G <= g0} along the rays landing at alpha.
Deeper pieces are connected components of inverse images, computed by lifting
boundary polylines through the two inverse branches of z^2 + c.  Pieces touch
each other only at iterated preimages of alpha; those contact points are kept
symbolically in a corner registry so degeneracy tests are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from . import geom
from .dyncore import (
    FixedPointPair,
    PolynomialMap,
    alpha_ray_cycle,
    critical_orbit,
    equipotential_points,
    fixed_points,
    trace_ray,
)
from .errors import (
    CautionViolated,
    LabelAmbiguity,
    OnBoundary,
    OrbitHitsAlpha,
    PullbackBranchClash,
)
from .modulus import ModulusInterval, estimate_modulus

KIND_RAY = 1
KIND_EQUI = 2
KIND_DISK = 3

BOUNDARY_TOL = 1e-9
CORNER_MATCH_TOL = 1e-8
ALPHA_ORBIT_TOL = 1e-7


class CornerRegistry:
    """Registry of iterated preimages of alpha appearing as piece corners.

    Node 0 is alpha itself.  Each other node records the node it maps to and
    the inverse-branch sign that produced it, so a backward itinerary can be
    reconstructed.
    """

    def __init__(self, alpha: complex):
        self.points: list[complex] = [alpha]
        self.parents: list[Optional[int]] = [None]
        self.signs: list[int] = [0]

    def lookup(self, z: complex, tol: float = CORNER_MATCH_TOL) -> Optional[int]:
        pts = np.asarray(self.points)
        d = np.abs(pts - z)
        i = int(d.argmin())
        return i if d[i] < tol else None

    def register(self, z: complex, parent: int, sign: int) -> int:
        node = self.lookup(z)
        if node is not None:
            return node
        self.points.append(complex(z))
        self.parents.append(parent)
        self.signs.append(sign)
        return len(self.points) - 1

    def itinerary(self, node: int) -> str:
        parts = []
        while node != 0 and self.parents[node] is not None:
            parts.append("+" if self.signs[node] > 0 else "-")
            node = self.parents[node]
        return "a" + "".join(reversed(parts))


@dataclass(frozen=True)
class Corner:
    node: int
    z: complex


@dataclass
class PuzzlePiece:
    depth: int
    index: int
    boundary: np.ndarray
    kinds: np.ndarray
    corners: tuple[Corner, ...]
    label: Optional[str] = None
    image_index: Optional[int] = None
    parent_index: Optional[int] = None
    _bbox: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def corner_nodes(self) -> frozenset[int]:
        return frozenset(c.node for c in self.corners)

    @property
    def bbox(self) -> tuple:
        if self._bbox is None:
            self._bbox = geom.polygon_bbox(self.boundary)
        return self._bbox

    def bbox_contains(self, z: complex) -> bool:
        x0, x1, y0, y1 = self.bbox
        return x0 <= z.real <= x1 and y0 <= z.imag <= y1

    def contains(self, z: complex) -> bool:
        z = complex(z)
        if not self.bbox_contains(z):
            return False
        return geom.polygon_contains(self.boundary, z)

    def boundary_distance(self, z: complex) -> float:
        return geom.polyline_distance(self.boundary, complex(z))

    def diameter(self) -> float:
        return geom.bbox_diameter(self.boundary)

    def area(self) -> float:
        return geom.polygon_area(self.boundary)

    def to_json(self, registry: Optional[CornerRegistry] = None) -> dict:
        corners = []
        for c in self.corners:
            entry = {"re": c.z.real, "im": c.z.imag}
            entry["itinerary"] = registry.itinerary(c.node) if registry else str(c.node)
            corners.append(entry)
        return {
            "depth": self.depth,
            "id": self.index,
            "label": self.label,
            "image_id": self.image_index,
            "corners": corners,
            "boundary": [[float(p.real), float(p.imag)] for p in self.boundary],
        }


@dataclass(frozen=True)
class PuzzleAnnulus:
    outer: PuzzlePiece
    inner: PuzzlePiece
    degenerate: bool
    criticality: str  # 'critical' | 'semi_critical' | 'off_critical'
    modulus: ModulusInterval


@dataclass
class ThickenedPiece:
    base_depth: int
    base_index: int
    epsilon: float
    eta: float
    boundary: np.ndarray
    kinds: np.ndarray

    def contains(self, z: complex) -> bool:
        return geom.polygon_contains(self.boundary, complex(z))


# ---------------------------------------------------------------------------
# Boundary lifting through the two inverse branches
# ---------------------------------------------------------------------------


def _lift_closed_curve(c: complex, boundary: np.ndarray, kinds: np.ndarray,
                       ambig_ratio: float = 3.0, max_refine: int = 3):
    """Lift a closed curve through z -> z^2 + c.

    Returns a list of one or two (points, kinds) closed curves: two disjoint
    lifts when the curve does not wind around the critical value, one doubled
    lift when it does.
    """
    b = np.asarray(boundary, dtype=complex)
    k = np.asarray(kinds)
    for attempt in range(max_refine + 1):
        s = np.sqrt(b - c)
        s_next = np.roll(s, -1)
        diff = np.abs(s_next - s)
        summ = np.abs(s_next + s)
        hi = np.maximum(diff, summ)
        lo = np.minimum(diff, summ)
        ambiguous = hi < ambig_ratio * lo
        # don't fuss over genuinely tiny steps
        ambiguous &= lo > 1e-13 * np.maximum(np.abs(s), 1.0)
        if not ambiguous.any():
            break
        if attempt == max_refine:
            raise PullbackBranchClash(
                f"{int(ambiguous.sum())} ambiguous lift steps after {max_refine} refinements")
        idx = np.flatnonzero(ambiguous)
        nxt = np.roll(b, -1)
        nxt_k = np.roll(k, -1)
        pieces_b = []
        pieces_k = []
        for i in range(len(b)):
            pieces_b.append(b[i])
            pieces_k.append(k[i])
            if i in idx:
                for frac_ in (0.25, 0.5, 0.75):
                    pieces_b.append(b[i] + (nxt[i] - b[i]) * frac_)
                    pieces_k.append(k[i])
        b = np.asarray(pieces_b)
        k = np.asarray(pieces_k)
    flips = np.where(diff <= summ, 1, -1)
    signs = np.empty(len(b), dtype=int)
    signs[0] = 1
    signs[1:] = np.cumprod(flips[:-1])
    total = signs[-1] * flips[-1]
    w = signs * s
    if total == 1:
        return [(w, k.copy()), (-w, k.copy())]
    return [(np.concatenate([w, -w]), np.concatenate([k, k]))]


def _lift_corners(c: complex, curve: np.ndarray, parent_corners: Iterable[Corner],
                  registry: CornerRegistry) -> tuple[Corner, ...]:
    out = []
    for pc in parent_corners:
        root = np.sqrt(complex(pc.z) - c)
        for sign in (1, -1):
            cand = sign * root
            d = np.abs(curve - cand)
            if d.min() < CORNER_MATCH_TOL:
                node = registry.register(cand, pc.node, sign)
                out.append(Corner(node, complex(cand)))
    # deduplicate by node
    seen = {}
    for corner in out:
        seen.setdefault(corner.node, corner)
    return tuple(seen.values())


# ---------------------------------------------------------------------------
# Tower construction
# ---------------------------------------------------------------------------


@dataclass
class PuzzleTower:
    pmap: PolynomialMap
    q: int
    alpha_angles: list[Fraction]
    fixed: FixedPointPair
    g0: float
    registry: CornerRegistry
    depths: list[list[PuzzlePiece]]
    critical_indices: list[int]  # index of the piece containing 0, per depth

    @property
    def max_depth(self) -> int:
        return len(self.depths) - 1

    def pieces(self, d: int) -> list[PuzzlePiece]:
        return self.depths[d]

    def critical_piece(self, d: int) -> PuzzlePiece:
        return self.depths[d][self.critical_indices[d]]

    def piece(self, d: int, index: int) -> PuzzlePiece:
        return self.depths[d][index]


def _ray_boundary_points(ray, g_top: float):
    """Ray polyline restricted to potentials <= g_top, ending at the landing
    point, ordered by decreasing potential."""
    keep = ray.potentials <= g_top * (1 + 1e-12)
    pts = ray.points[keep]
    if ray.landed:
        pts = np.append(pts, ray.landing_point)
    return pts


def build_depth_zero(pmap: PolynomialMap, cycle: Optional[tuple[int, list[Fraction]]] = None,
                     *, g0: float = 1.0, arc_points: int = 96,
                     max_period: int = 20) -> PuzzleTower:
    """Cut {G <= g0} along the rays landing at alpha into q depth-0 pieces."""
    if cycle is None:
        cycle = alpha_ray_cycle(pmap, max_period=max_period)
    q, angles = cycle
    fp = fixed_points(pmap)
    registry = CornerRegistry(fp.alpha)
    rays = {}
    for t in angles:
        ray = trace_ray(pmap, t, g_stop=2.0**-40)
        if not (ray.landed and abs(ray.landing_point - fp.alpha) < 1e-6):
            raise LabelAmbiguity(f"ray {t} does not land at alpha")
        rays[t] = ray

    orbit = critical_orbit(pmap, q - 1)
    pieces: list[PuzzlePiece] = []
    n_arc = max(64, arc_points)
    for i in range(q):
        t_lo = angles[i]
        t_hi = angles[(i + 1) % q] + (1 if i == q - 1 else 0)
        up = _ray_boundary_points(rays[t_lo], g0)[::-1]  # alpha -> G=g0
        down = _ray_boundary_points(rays[t_hi % 1], g0)  # G=g0 -> alpha
        arc_angles = [t_lo + (t_hi - t_lo) * Fraction(j, n_arc) for j in range(1, n_arc)]
        arc = equipotential_points(pmap, g0, arc_angles, seed=complex(up[-1]))
        bnd = np.concatenate([[fp.alpha], up, arc, down[:-1]])
        kinds = np.concatenate([
            [KIND_RAY],
            np.full(len(up), KIND_RAY),
            np.full(len(arc), KIND_EQUI),
            np.full(len(down) - 1, KIND_RAY),
        ])
        pieces.append(PuzzlePiece(0, i, bnd, kinds, (Corner(0, fp.alpha),)))

    _assign_labels(pieces, orbit.points, prefix="c")
    labels = {p.label for p in pieces}
    if None in labels or len(labels) != q:
        raise LabelAmbiguity("post-critical points do not label the depth-0 pieces bijectively")
    crit_idx = [i for i, p in enumerate(pieces) if p.contains(0)]
    tower = PuzzleTower(pmap, q, list(angles), fp, g0, registry, [pieces], crit_idx[:1])
    if not crit_idx:
        raise LabelAmbiguity("no depth-0 piece contains the critical point")
    return tower


def _assign_labels(pieces: list[PuzzlePiece], points: np.ndarray, prefix: str,
                   start: int = 0, tol: float = BOUNDARY_TOL):
    for j, z in enumerate(points[start:], start):
        for p in pieces:
            if p.contains(z):
                if p.boundary_distance(z) < tol:
                    raise LabelAmbiguity(f"orbit point {j} lies on a piece boundary")
                if p.label is None:
                    p.label = f"{prefix}{j}"
                break


def refine(tower: PuzzleTower) -> PuzzleTower:
    """Append the next depth: all components of f^-1 of the deepest pieces."""
    pmap = tower.pmap
    c = pmap.c
    c1 = pmap(0)
    d = tower.max_depth
    parents = tower.depths[d]
    new_pieces: list[PuzzlePiece] = []
    for img in parents:
        comps = _lift_closed_curve(c, img.boundary, img.kinds)
        winds = img.contains(c1)
        if winds != (len(comps) == 1):
            raise PullbackBranchClash(
                f"component count disagrees with critical-value position at depth {d + 1}")
        for pts, kinds in comps:
            corners = _lift_corners(c, pts, img.corners, tower.registry)
            piece = PuzzlePiece(d + 1, len(new_pieces), pts, kinds, corners,
                                image_index=img.index)
            piece.parent_index = _find_parent(parents, piece)
            new_pieces.append(piece)

    orbit = critical_orbit(pmap, tower.q + d + 1)
    _assign_labels(new_pieces, orbit.points, prefix="c")
    if d + 1 == 1:
        pre = np.array([-z for z in orbit.points[: tower.q]])
        _assign_labels(new_pieces, pre, prefix="-c", start=1)
    crit = [i for i, p in enumerate(new_pieces) if p.contains(0)]
    if len(crit) != 1:
        raise OnBoundary(f"critical point not uniquely located at depth {d + 1}")
    return PuzzleTower(pmap, tower.q, tower.alpha_angles, tower.fixed, tower.g0,
                       tower.registry, tower.depths + [new_pieces],
                       tower.critical_indices + crit)


def _find_parent(parents: list[PuzzlePiece], piece: PuzzlePiece) -> int:
    """Locate the previous-depth piece containing this one, using boundary
    points on the new (deeper) equipotential, which are interior to parents."""
    cand = np.flatnonzero(piece.kinds == KIND_EQUI)
    if len(cand) == 0:
        cand = np.arange(len(piece.boundary))
    step = max(1, len(cand) // 7)
    votes = {}
    for idx in cand[::step][:7]:
        z = complex(piece.boundary[idx])
        for par in parents:
            if par.contains(z):
                votes[par.index] = votes.get(par.index, 0) + 1
                break
    if not votes:
        raise OnBoundary("cannot locate parent piece")
    return max(votes, key=votes.get)


def build_tower(pmap: PolynomialMap, max_depth: int, **kwargs) -> PuzzleTower:
    tower = build_depth_zero(pmap, **kwargs)
    for _ in range(max_depth):
        tower = refine(tower)
    return tower


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


def _check_alpha_clearance(tower: PuzzleTower, z: complex, steps: int):
    w = complex(z)
    for n in range(steps + 1):
        if abs(w - tower.fixed.alpha) < ALPHA_ORBIT_TOL:
            raise OrbitHitsAlpha(0, n)
        w = tower.pmap(w)


def piece_containing(tower: PuzzleTower, z: complex, d: int,
                     *, tol: float = BOUNDARY_TOL) -> PuzzlePiece:
    """The unique depth-d piece containing z (point-in-polygon descent)."""
    if d > tower.max_depth:
        raise ValueError(f"tower built to depth {tower.max_depth} < {d}")
    _check_alpha_clearance(tower, z, d)
    cur = None
    for p in tower.pieces(0):
        if p.contains(z):
            cur = p
            break
    if cur is None:
        mind = min(p.boundary_distance(z) for p in tower.pieces(0))
        raise OnBoundary(f"point not in any depth-0 piece (distance {mind:.2e})")
    for depth in range(1, d + 1):
        children = [p for p in tower.pieces(depth) if p.parent_index == cur.index]
        nxt = [p for p in children if p.contains(z)]
        if not nxt:
            mind = min((p.boundary_distance(z) for p in children), default=math.inf)
            if mind < tol:
                raise OnBoundary(f"point within {mind:.2e} of a depth-{depth} boundary")
            raise OnBoundary(f"point lost at depth {depth} (min distance {mind:.2e})")
        cur = nxt[0]
    return cur


def star_pieces(tower: PuzzleTower, z: complex, d: int) -> list[PuzzlePiece]:
    """All depth-d pieces having z on their closure.

    For iterated preimages of alpha this is a union of q pieces; for other
    points it is the singleton piece containing the point.
    """
    node = tower.registry.lookup(complex(z))
    if node is None:
        return [piece_containing(tower, z, d)]
    out = [p for p in tower.pieces(d) if node in p.corner_nodes]
    if not out:
        raise OnBoundary(f"corner node {node} absent at depth {d}")
    return out


def annulus(tower: PuzzleTower, z: complex, d: int, *,
            compute_modulus: bool = True, cells: int = 160) -> PuzzleAnnulus:
    """The annulus between the depth-d and depth-(d+1) pieces around z."""
    outer = piece_containing(tower, z, d)
    inner = piece_containing(tower, z, d + 1)
    return annulus_from_pieces(tower, outer, inner,
                               compute_modulus=compute_modulus, cells=cells)


def annulus_from_pieces(tower: PuzzleTower, outer: PuzzlePiece, inner: PuzzlePiece,
                        *, compute_modulus: bool = True, cells: int = 160) -> PuzzleAnnulus:
    degenerate = bool(outer.corner_nodes & inner.corner_nodes)
    crit_inner = inner.contains(0)
    crit_outer = outer.contains(0)
    if crit_inner:
        crit = "critical"
    elif crit_outer:
        crit = "semi_critical"
    else:
        crit = "off_critical"
    if degenerate:
        mod = ModulusInterval.degenerate()
    elif compute_modulus:
        mod = estimate_modulus(outer.boundary, inner.boundary, base_cells=cells)
    else:
        mod = ModulusInterval(0.0, math.inf, "propagated")
    return PuzzleAnnulus(outer, inner, degenerate, crit, mod)


# ---------------------------------------------------------------------------
# Thickened pieces
# ---------------------------------------------------------------------------


def _trace_to_disk(pmap, angle: Fraction, g0: float, alpha: complex, eps: float):
    """Widened-ray polyline from G=g0 down to its first entry into D_eps(alpha)."""
    ray = trace_ray(pmap, angle, g_stop=2.0**-40)
    pts = _ray_boundary_points(ray, g0)  # decreasing potential, ends at landing
    dist = np.abs(pts - alpha)
    hits = np.flatnonzero(dist <= eps)
    if len(hits) == 0:
        raise OnBoundary(f"widened ray {angle} misses the alpha disk (eta too large)")
    j = hits[0]
    if j == 0:
        raise OnBoundary("widened ray starts inside the alpha disk (epsilon too large)")
    a, b = pts[j - 1], pts[j]
    # interpolate the circle crossing
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = (lo + hi) / 2
        if abs(a + (b - a) * mid - alpha) <= eps:
            hi = mid
        else:
            lo = mid
    cross = a + (b - a) * hi
    return np.append(pts[:j], cross)


def _circle_arc(alpha: complex, eps: float, th_from: float, th_to: float,
                ccw: bool, n: int = 64) -> np.ndarray:
    if ccw:
        while th_to <= th_from:
            th_to += 2 * math.pi
    else:
        while th_to >= th_from:
            th_to -= 2 * math.pi
    ths = np.linspace(th_from, th_to, n + 1)[1:-1]
    return alpha + eps * np.exp(1j * ths)


def thicken_depth_zero(tower: PuzzleTower, epsilon: float, eta: Fraction,
                       *, arc_points: int = 96) -> list[ThickenedPiece]:
    pmap = tower.pmap
    alpha = tower.fixed.alpha
    q = tower.q
    angles = tower.alpha_angles
    eta = Fraction(eta)
    out = []
    n_arc = max(64, arc_points)
    for i in range(q):
        t_lo = angles[i] - eta
        t_hi = angles[(i + 1) % q] + (1 if i == q - 1 else 0) + eta
        down_lo = _trace_to_disk(pmap, t_lo % 1, tower.g0, alpha, epsilon)
        down_hi = _trace_to_disk(pmap, t_hi % 1, tower.g0, alpha, epsilon)
        arc_angles = [t_lo + (t_hi - t_lo) * Fraction(j, n_arc) for j in range(1, n_arc)]
        arc = equipotential_points(pmap, tower.g0, arc_angles, seed=complex(down_lo[0]))
        th_a = math.atan2((down_lo[-1] - alpha).imag, (down_lo[-1] - alpha).real)
        th_b = math.atan2((down_hi[-1] - alpha).imag, (down_hi[-1] - alpha).real)
        base = tower.pieces(0)[i]
        probe = geom.interior_point(base.boundary)
        chosen = None
        for ccw in (True, False):
            circ = _circle_arc(alpha, epsilon, th_b, th_a, ccw)
            bnd = np.concatenate([down_lo[::-1], arc, down_hi, circ])
            kinds = np.concatenate([
                np.full(len(down_lo), KIND_RAY),
                np.full(len(arc), KIND_EQUI),
                np.full(len(down_hi), KIND_RAY),
                np.full(len(circ), KIND_DISK),
            ])
            if geom.polygon_contains(bnd, alpha) and geom.polygon_contains(bnd, probe):
                chosen = (bnd, kinds)
                break
        if chosen is None:
            raise OnBoundary("could not orient the alpha-disk arc")
        out.append(ThickenedPiece(0, i, epsilon, float(eta), chosen[0], chosen[1]))
    return out


def thicken(tower: PuzzleTower, epsilon: float, eta: Fraction, max_depth: int,
            *, check_caution: bool = True) -> list[list[ThickenedPiece]]:
    """Thickened pieces per depth <= max_depth, by inverse-branch pullback.

    Raises CautionViolated(d) if a thickened depth-d piece captures the
    critical point although its base piece does not.
    """
    if max_depth > tower.max_depth:
        raise ValueError("tower not refined deep enough")
    c = tower.pmap.c
    levels = [thicken_depth_zero(tower, epsilon, eta)]
    _caution_check(tower, levels[0], 0, enabled=check_caution)
    for d in range(max_depth):
        cur = levels[-1]
        nxt: list[ThickenedPiece] = []
        base_children = tower.pieces(d + 1)
        for tp in cur:
            comps = _lift_closed_curve(c, tp.boundary, tp.kinds)
            for pts, kinds in comps:
                base_idx = _match_base(base_children, tp.base_index, pts)
                if base_idx is None:
                    raise CautionViolated(d + 1)
                nxt.append(ThickenedPiece(d + 1, base_idx, epsilon, tp.eta, pts, kinds))
        _caution_check(tower, nxt, d + 1, enabled=check_caution)
        levels.append(nxt)
    return levels


def minus_alpha_pieces(tower: PuzzleTower) -> list[PuzzlePiece]:
    """The q-1 depth-1 pieces touching -alpha other than the critical piece."""
    if tower.max_depth < 1:
        raise ValueError("tower needs depth >= 1")
    node = tower.registry.lookup(-tower.fixed.alpha)
    if node is None:
        raise OnBoundary("-alpha not registered; tower too shallow")
    crit = tower.critical_indices[1]
    return [p for p in tower.pieces(1)
            if node in p.corner_nodes and p.index != crit]


def _match_base(base_children: list[PuzzlePiece], image_base_index: int,
                pts: np.ndarray) -> Optional[int]:
    for child in base_children:
        if child.image_index != image_base_index:
            continue
        probe = geom.interior_point(child.boundary)
        if geom.polygon_contains(pts, probe):
            return child.index
    return None


def _caution_check(tower: PuzzleTower, level: list[ThickenedPiece], d: int, enabled=True):
    if not enabled:
        return
    for tp in level:
        if tp.contains(0) and not tower.piece(d, tp.base_index).contains(0):
            raise CautionViolated(d)


def _eta_for_eps(tower: PuzzleTower, eps: float, eta0: Fraction,
                 probes: int = 40) -> Fraction:
    """Largest eta (from eta0 downward) whose widened rays reach D_eps(alpha).

    The approach distance decays like a fractional power of eta, so eta is
    probed geometrically with a single ray trace per step.
    """
    t0 = tower.alpha_angles[0]
    eta = Fraction(eta0)
    for _ in range(probes):
        ray = trace_ray(tower.pmap, (t0 - eta) % 1, g_stop=2.0**-44)
        d = float(np.abs(ray.points - tower.fixed.alpha).min())
        if d <= 0.8 * eps:
            return eta
        eta /= 4
    raise OnBoundary(f"no eta reaches the eps={eps} disk")


def thicken_auto(tower: PuzzleTower, max_depth: int, *, max_halvings: int = 8):
    """Auto-shrink (epsilon, eta) until the caution condition holds.

    epsilon starts at a tenth of the distance from alpha to the critical
    orbit and halves on caution violations; eta is re-probed for each epsilon
    so the widened rays always reach the alpha disk.
    """
    orbit = critical_orbit(tower.pmap, 64)
    dist = np.abs(orbit.points - tower.fixed.alpha)
    eps = float(dist.min()) / 10.0
    eta0 = Fraction(1, 2 ** (max_depth + 4) * tower.q)
    for _ in range(max_halvings):
        try:
            eta = _eta_for_eps(tower, eps, eta0)
            return thicken(tower, eps, eta, max_depth), eps, eta
        except (CautionViolated, OnBoundary):
            eps /= 2
    raise CautionViolated(max_depth)


# ---------------------------------------------------------------------------
# Deep per-point chains (no full tower needed)
# ---------------------------------------------------------------------------


@dataclass
class ChainPiece:
    """A nested-piece chain entry identified by its pullback history."""

    depth: int
    key: tuple
    boundary: np.ndarray
    kinds: np.ndarray
    corners: tuple[Corner, ...]
    _bbox: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def corner_nodes(self) -> frozenset[int]:
        return frozenset(c.node for c in self.corners)

    @property
    def bbox(self) -> tuple:
        if self._bbox is None:
            self._bbox = geom.polygon_bbox(self.boundary)
        return self._bbox

    def contains(self, z: complex) -> bool:
        z = complex(z)
        x0, x1, y0, y1 = self.bbox
        if not (x0 <= z.real <= x1 and y0 <= z.imag <= y1):
            return False
        return geom.polygon_contains(self.boundary, z)

    def diameter(self) -> float:
        return geom.bbox_diameter(self.boundary)


class ChainCache:
    """Computes nested puzzle pieces along orbits by lazy pullback.

    Piece identity is the pair (identity of the image piece, component index),
    which reproduces geometric identity without polygon comparisons.
    """

    def __init__(self, tower: PuzzleTower, *, min_diam: float = 1e-11):
        self.tower = tower
        self.min_diam = min_diam
        self._components: dict[tuple, list[ChainPiece]] = {}
        self._depth0: list[ChainPiece] = [
            ChainPiece(0, ("0", p.index), p.boundary, p.kinds, p.corners)
            for p in tower.pieces(0)
        ]

    def depth0_piece(self, z: complex) -> ChainPiece:
        for p in self._depth0:
            if p.contains(z):
                return p
        raise OnBoundary("point not inside any depth-0 piece")

    def components_of(self, image: ChainPiece) -> list[ChainPiece]:
        key = image.key
        if key not in self._components:
            if image.diameter() < self.min_diam:
                raise OnBoundary("piece below precision floor")
            comps = _lift_closed_curve(self.tower.pmap.c, image.boundary, image.kinds)
            out = []
            for ci, (pts, kinds) in enumerate(comps):
                corners = _lift_corners(self.tower.pmap.c, pts, image.corners,
                                        self.tower.registry)
                out.append(ChainPiece(image.depth + 1, (key, ci), pts, kinds, corners))
            self._components[key] = out
        return self._components[key]

    def chain(self, z: complex, depth: int) -> list[ChainPiece]:
        """Pieces P_0(z) .. P_depth(z) via pullback along the forward orbit."""
        w = complex(z)
        for n in range(depth + 1):
            if abs(w - self.tower.fixed.alpha) < ALPHA_ORBIT_TOL:
                raise OrbitHitsAlpha(0, n)
            w = self.tower.pmap(w)
        return [self.orbit_piece(complex(z), d) for d in range(depth + 1)]

    def orbit_piece(self, z: complex, depth: int) -> ChainPiece:
        """P_depth(z) with memoization keyed by (rounded point, depth)."""
        key = (round(z.real, 13), round(z.imag, 13), depth)
        if not hasattr(self, "_point_memo"):
            self._point_memo: dict = {}
        if key in self._point_memo:
            return self._point_memo[key]
        if depth == 0:
            piece = self.depth0_piece(z)
        else:
            img = self.orbit_piece(self.tower.pmap(z), depth - 1)
            piece = None
            for comp in self.components_of(img):
                if comp.contains(z):
                    piece = comp
                    break
            if piece is None:
                raise OnBoundary(f"point lost during descent at depth {depth}")
        self._point_memo[key] = piece
        return piece

    def scd(self, z: complex, max_depth: int) -> int:
        """Largest d <= max_depth with P_d(z) = P_d(0); -1 if none.

        Relies on 0 in P_d(z) being equivalent to piece equality and on its
        monotonicity in d.
        """
        if not self.orbit_piece(z, 0).contains(0):
            return -1
        lo = 0
        while lo < max_depth:
            try:
                piece = self.orbit_piece(z, lo + 1)
            except OnBoundary:
                break
            if not piece.contains(0):
                break
            lo += 1
        return lo

    def annulus_pieces(self, z: complex, d: int) -> tuple[ChainPiece, ChainPiece]:
        return self.orbit_piece(z, d), self.orbit_piece(z, d + 1)
