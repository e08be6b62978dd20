"""Grid puzzles for higher-degree polynomials with escaping critical orbits.

Pieces of depth k are the connected components of {G <= G0 / d^k}, extracted
by flood fill on per-piece local grids that refine with depth.  The machinery
covers two regimes: every critical orbit escapes (Cantor Julia set with a
full shift coding), or exactly one simple critical point has a bounded orbit
(total disconnectedness versus countably many non-trivial components,
depending on whether the critical tableau is periodic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.ndimage as ndi

from . import tableau as tb
from .dyncore import PolynomialMap, green, green_array
from .errors import BadLevel, ContainmentFails, CriticalInPiece
from .modulus import ModulusInterval, mcmullen_bound

GREEN_BUDGET = 200


def _level_budget(degree: int, level: float) -> int:
    """Iterations that certify G >= level/16 (such points reach the escape
    cap); points still bounded after this many steps have G < level/16 and
    are classified below the level either way."""
    need = math.log(math.log(1e100) * 16.0 / level) / math.log(degree)
    return int(need) + 8


@dataclass
class BHConfig:
    g0: Optional[float] = None       # potential level; None = auto
    epsilon: Optional[float] = None  # thin-annulus width in potential; None = auto
    base_cells: int = 420            # depth-0 grid cells along the larger axis
    min_piece_cells: int = 120       # refine a local grid until pieces have this many
    max_local_cells: int = 1600      # per-axis cap for local grids
    orbit_budget: int = 200
    thin_deepest: bool = False       # also compute collars at the deepest level
    designated_bounded: Optional[complex] = None
    # treat this critical point as the bounded one even if its orbit escapes
    # late in the budget (parameters printed to finite precision drift off a
    # truly bounded orbit); the report carries a note when that happens


@dataclass
class BHPiece:
    depth: int
    index: int
    origin: complex
    h: float
    mask: np.ndarray  # [ix, iy], x-major
    area: float
    area_err: float
    parent_index: Optional[int] = None
    image_index: Optional[int] = None
    contains_c0: bool = False
    thin_modulus: Optional[ModulusInterval] = None
    thin_ring: Optional[np.ndarray] = field(default=None, repr=False)

    def contains(self, z: complex) -> bool:
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return False
        ix = int(round((z.real - self.origin.real) / self.h))
        iy = int(round((z.imag - self.origin.imag) / self.h))
        if 0 <= ix < self.mask.shape[0] and 0 <= iy < self.mask.shape[1]:
            return bool(self.mask[ix, iy])
        return False

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        nx, ny = self.mask.shape
        return (self.origin.real, self.origin.real + nx * self.h,
                self.origin.imag, self.origin.imag + ny * self.h)

    def sample_points(self, n: int = 5) -> list[complex]:
        xs, ys = np.nonzero(self.mask)
        step = max(1, len(xs) // n)
        return [self.origin + complex(xs[i] * self.h, ys[i] * self.h)
                for i in range(0, len(xs), step)][:n]

    def diameter(self) -> float:
        xs, ys = np.nonzero(self.mask)
        return float(math.hypot((xs.max() - xs.min()) * self.h,
                                (ys.max() - ys.min()) * self.h))


@dataclass
class BHPuzzle:
    pmap: PolynomialMap
    g0: float
    epsilon: float
    bounded_critical: Optional[complex]
    escaping_criticals: list[complex]
    depths: list[list[BHPiece]]
    config: BHConfig
    unresolved: list[tuple[int, int]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def degree(self) -> int:
        return self.pmap.degree

    @property
    def max_depth(self) -> int:
        return len(self.depths) - 1

    def level(self, k: int) -> float:
        return self.g0 / self.degree**k

    def locate(self, z: complex, depth: int) -> Optional[BHPiece]:
        for p in self.depths[depth]:
            if p.contains(z):
                return p
        return None

    def children_of(self, piece: BHPiece) -> list[BHPiece]:
        if piece.depth + 1 > self.max_depth:
            return []
        return [p for p in self.depths[piece.depth + 1]
                if p.parent_index == piece.index]

    def critical_chain(self) -> list[BHPiece]:
        if self.bounded_critical is None:
            raise CriticalInPiece("no bounded critical orbit")
        out = []
        for k in range(self.max_depth + 1):
            p = self.locate(self.bounded_critical, k)
            if p is None:
                break
            out.append(p)
        return out

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "g0": self.g0,
            "epsilon": self.epsilon,
            "depths": [
                {
                    "depth": k,
                    "pieces": [
                        {"id": p.index, "area": p.area, "parent": p.parent_index,
                         "image": p.image_index, "contains_c0": p.contains_c0}
                        for p in level
                    ],
                }
                for k, level in enumerate(self.depths)
            ],
        }


# ---------------------------------------------------------------------------
# Level and width selection
# ---------------------------------------------------------------------------


def _classify_criticals(pmap: PolynomialMap, budget: int):
    bounded = []
    escaping = []
    crit = pmap.critical_points()
    radius = pmap.escape_radius()
    for w in crit:
        z = complex(w)
        escaped = False
        for _ in range(budget):
            z = pmap(z)
            if abs(z) > radius:
                escaped = True
                break
            if abs(z) > 1e100:
                escaped = True
                break
        (escaping if escaped else bounded).append(complex(w))
    return bounded, escaping


def _forbidden_levels(pmap: PolynomialMap, escaping, kmax: int = 40) -> list[float]:
    d = pmap.degree
    out = []
    for w in escaping:
        gw = green(pmap, w, GREEN_BUDGET)
        if gw > 0:
            out.extend(gw / d**k for k in range(kmax))
    return out


def _resolve_levels(pmap: PolynomialMap, escaping, cfg: BHConfig) -> tuple[float, float]:
    d = pmap.degree
    if not escaping:
        raise BadLevel("no escaping critical orbit; puzzle level undefined")
    gvals = [green(pmap, pmap(w), GREEN_BUDGET) for w in escaping]
    if min(gvals) <= 0:
        raise BadLevel("an allegedly escaping critical value has zero potential")
    g0 = cfg.g0 if cfg.g0 is not None else 0.9 * min(gvals)
    if not 0 < g0 < min(gvals):
        raise BadLevel(f"G0={g0} outside (0, min G(f(w)))={min(gvals)}")
    forbidden = _forbidden_levels(pmap, escaping)
    for _ in range(60):
        if all(abs(g0 - v) > 1e-6 * g0 for v in forbidden):
            break
        g0 *= 1 - 2.0**-6
    else:
        raise BadLevel("could not move G0 off the critical-value ladder")
    eps = cfg.epsilon if cfg.epsilon is not None else g0 / 10.0
    for _ in range(60):
        if not any(g0 - eps <= v <= g0 for v in forbidden):
            break
        eps /= 2
    else:
        raise BadLevel("no admissible thin-annulus width")
    if not 0 < eps < g0:
        raise BadLevel(f"epsilon={eps} not in (0, G0)")
    return g0, eps


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------


def _grid(origin: complex, h: float, nx: int, ny: int) -> np.ndarray:
    xs = origin.real + h * np.arange(nx)
    ys = origin.imag + h * np.arange(ny)
    return xs[:, None] + 1j * ys[None, :]


def _area_of(mask: np.ndarray, h: float) -> tuple[float, float]:
    """Cell-count area with boundary cells half-weighted; uncertainty is the
    total boundary-cell area."""
    interior = ndi.binary_erosion(mask)
    boundary = mask & ~interior
    area = (interior.sum() + 0.5 * boundary.sum()) * h * h
    return float(area), float(boundary.sum() * h * h)


_CONN8 = np.ones((3, 3), dtype=bool)


def _component_pieces(pmap, g_vals, level, origin, h, depth, *, parent=None):
    mask = (g_vals <= level) & np.isfinite(g_vals)
    labels, n = ndi.label(mask, structure=_CONN8)
    out = []
    for lbl in range(1, n + 1):
        m = labels == lbl
        xs, ys = np.nonzero(m)
        if parent is not None:
            probe = origin + complex(xs[0] * h, ys[0] * h)
            if not parent.contains(probe):
                continue
        x0, x1 = xs.min(), xs.max()
        y0, y1 = ys.min(), ys.max()
        sub = np.zeros((x1 - x0 + 3, y1 - y0 + 3), dtype=bool)
        sub[1:-1, 1:-1] = m[x0:x1 + 1, y0:y1 + 1]
        sub_origin = origin + complex((x0 - 1) * h, (y0 - 1) * h)
        area, err = _area_of(sub, h)
        out.append(BHPiece(depth, -1, sub_origin, h, sub, area, err))
    return out


def _children_at(pmap, parent: BHPiece, level: float, depth: int, h: float):
    bx0, bx1, by0, by1 = parent.bbox
    nx = int(math.ceil((bx1 - bx0) / h)) + 1
    ny = int(math.ceil((by1 - by0) / h)) + 1
    sub = _grid(complex(bx0, by0), h, nx, ny)
    gv = green_array(pmap, sub, _level_budget(pmap.degree, level))
    return _component_pieces(pmap, gv, level, complex(bx0, by0), h, depth,
                             parent=parent)


def _stable_children(pmap, parent: BHPiece, level: float, depth: int,
                     cfg: BHConfig) -> list[BHPiece]:
    """Components of the next level inside one parent, with the resolution
    refined until the component count agrees across two successive grids and
    every piece has enough cells."""
    bx0, bx1, by0, by1 = parent.bbox
    span = max(bx1 - bx0, by1 - by0)
    h = parent.h / 2
    h_min = span / cfg.max_local_cells
    h = max(h, h_min)
    found = _children_at(pmap, parent, level, depth, h)
    while True:
        at_cap = h <= h_min * (1 + 1e-9)
        small = [p for p in found if p.mask.sum() < cfg.min_piece_cells]
        if at_cap:
            return found
        h2 = max(h / 2, h_min)
        finer = _children_at(pmap, parent, level, depth, h2)
        if len(finer) == len(found) and not small:
            return finer
        h, found = h2, finer


def bh_build(pmap: PolynomialMap, config: Optional[BHConfig] = None,
             max_depth: int = 6) -> BHPuzzle:
    """Build the puzzle: pieces per depth with containment/image links,
    areas, and thin annuli with certified modulus intervals."""
    cfg = config if config is not None else BHConfig()
    bounded, escaping = _classify_criticals(pmap, cfg.orbit_budget)
    notes: list[str] = []
    if cfg.designated_bounded is not None:
        des = complex(cfg.designated_bounded)
        moved = [w for w in escaping if abs(w - des) < 1e-9]
        if moved:
            escaping = [w for w in escaping if abs(w - des) >= 1e-9]
            bounded = bounded + moved
            notes.append(
                f"critical point {des} designated bounded although its orbit "
                f"escapes within {cfg.orbit_budget} steps (finite-precision parameter)")
    if len(bounded) > 1:
        mults = {round(b.real, 9) + 1j * round(b.imag, 9) for b in bounded}
        if len(mults) < len(bounded):
            raise CriticalInPiece("bounded multiple critical point is excluded")
        raise CriticalInPiece("more than one bounded critical orbit")
    g0, eps = _resolve_levels(pmap, escaping, cfg)
    c0 = bounded[0] if bounded else None
    d = pmap.degree

    # coarse pass to find the region of interest
    R = pmap.escape_radius()
    coarse = _grid(complex(-R, -R), 2 * R / 127, 128, 128)
    gc = green_array(pmap, coarse, _level_budget(pmap.degree, g0))
    hot = gc <= g0
    if not hot.any():
        raise BadLevel("level set empty at coarse resolution")
    xs, ys = np.nonzero(hot)
    hc = 2 * R / 127
    pad = 3 * hc
    x0 = -R + xs.min() * hc - pad
    x1 = -R + xs.max() * hc + pad
    y0 = -R + ys.min() * hc - pad
    y1 = -R + ys.max() * hc + pad
    span = max(x1 - x0, y1 - y0)
    h0 = span / cfg.base_cells
    nx = int(math.ceil((x1 - x0) / h0)) + 1
    ny = int(math.ceil((y1 - y0) / h0)) + 1
    grid0 = _grid(complex(x0, y0), h0, nx, ny)
    g_vals = green_array(pmap, grid0, _level_budget(pmap.degree, g0))
    level0 = _component_pieces(pmap, g_vals, g0, complex(x0, y0), h0, 0)
    for i, p in enumerate(level0):
        p.index = i
    depths = [level0]

    unresolved: list[tuple[int, int]] = []
    for k in range(max_depth):
        level = g0 / d ** (k + 1)
        nxt: list[BHPiece] = []
        for parent in depths[k]:
            found = _stable_children(pmap, parent, level, k + 1, cfg)
            if not found:
                # genuine components always contain deeper ones; an empty
                # pullback at the cell cap marks an unresolved leaf
                unresolved.append((k, parent.index))
                continue
            for p in found:
                p.parent_index = parent.index
                nxt.append(p)
        for i, p in enumerate(nxt):
            p.index = i
        depths.append(nxt)

    for k in range(1, len(depths)):
        for p in depths[k]:
            votes = {}
            for z in p.sample_points(5):
                w = pmap(z)
                tgt = next((q for q in depths[k - 1] if q.contains(w)), None)
                if tgt is not None:
                    votes[tgt.index] = votes.get(tgt.index, 0) + 1
            p.image_index = max(votes, key=votes.get) if votes else None
    if c0 is not None:
        for k, level_pieces in enumerate(depths):
            for p in level_pieces:
                p.contains_c0 = p.contains(c0)

    puzzle = BHPuzzle(pmap, g0, eps, c0, escaping, depths, cfg, unresolved, notes)
    _attach_thin_annuli(puzzle)
    return puzzle


def _attach_thin_annuli(puzzle: BHPuzzle, max_refine: int = 4):
    """Thin collar of each piece: cells with (G0-eps)/d^k <= G <= G0/d^k.

    The collar is a thin band near the piece boundary, so it is recomputed on
    progressively finer local grids until a one-cell erosion still separates
    the two sides (the certified lower bound is then positive).
    """
    pmap = puzzle.pmap
    last = puzzle.max_depth if puzzle.config.thin_deepest else puzzle.max_depth - 1
    for k, level_pieces in enumerate(puzzle.depths):
        if k > last:
            break
        hi = puzzle.level(k)
        lo = (puzzle.g0 - puzzle.epsilon) / puzzle.degree**k
        for p in level_pieces:
            ring, mod = _thin_ring_interval(pmap, p, lo, hi, max_refine)
            p.thin_ring = ring
            p.thin_modulus = mod


def _ring_at(pmap, piece: BHPiece, lo: float, hi: float, factor: int,
             pad: int = 3) -> Optional[np.ndarray]:
    h = piece.h / factor
    origin = piece.origin - complex(pad * piece.h, pad * piece.h)
    nx = (piece.mask.shape[0] + 2 * pad) * factor
    ny = (piece.mask.shape[1] + 2 * pad) * factor
    if max(nx, ny) > 3000:
        return None
    gv = green_array(pmap, _grid(origin, h, nx, ny), _level_budget(pmap.degree, lo))
    region = gv <= hi
    labels, _ = ndi.label(region, structure=_CONN8)
    inside = np.where(region, gv, np.inf)
    seed = np.unravel_index(np.argmin(inside), gv.shape)
    seed_lbl = labels[seed]
    if seed_lbl == 0:
        return None
    return (labels == seed_lbl) & (gv >= lo)


def _thin_ring_interval(pmap, piece: BHPiece, lo: float, hi: float,
                        max_refine: int) -> tuple[Optional[np.ndarray], ModulusInterval]:
    """Two-resolution bracket for the collar modulus of one piece."""
    from .modulus import _cells_estimate

    factor = 2
    for _ in range(max_refine):
        ring = _ring_at(pmap, piece, lo, hi, factor)
        if ring is None:
            break
        est = _cells_estimate(np.pad(ring, 1))
        if est is None or est == 0.0:
            factor *= 2
            continue
        ring2 = _ring_at(pmap, piece, lo, hi, factor * 2)
        if ring2 is None:
            return ring, ModulusInterval(0.0, est * 2, "grid_extremal_length")
        est2 = _cells_estimate(np.pad(ring2, 1))
        if est2 is None or est2 == 0.0:
            factor *= 2
            continue
        slack = abs(est2 - est)
        center = 2 * est2 - est
        return ring2, ModulusInterval(max(0.0, center - slack), center + slack,
                                      "grid_extremal_length")
    return None, ModulusInterval.degenerate()


# ---------------------------------------------------------------------------
# Tableau over the grid puzzle
# ---------------------------------------------------------------------------


def bh_scd(puzzle: BHPuzzle, z: complex, max_depth: Optional[int] = None) -> int:
    """Largest k with P_k(z) = P_k(c_0), by piece-id comparison; -1 if none."""
    if puzzle.bounded_critical is None:
        raise CriticalInPiece("tableaux need a bounded critical orbit")
    kmax = puzzle.max_depth if max_depth is None else min(max_depth, puzzle.max_depth)
    chain = puzzle.critical_chain()
    s = -1
    for k in range(kmax + 1):
        p = puzzle.locate(z, k)
        if p is None or k >= len(chain) or p.index != chain[k].index:
            break
        s = k
    return s


def bh_tableau(puzzle: BHPuzzle, z0: complex, width: int,
               depth: Optional[int] = None) -> tb.Tableau:
    """Tableau of the orbit of z0 over the grid puzzle (same type and rules
    as the quadratic tableaux)."""
    kmax = puzzle.max_depth - 1 if depth is None else depth
    if kmax + 1 > puzzle.max_depth:
        kmax = puzzle.max_depth - 1
    orbit = [complex(z0)]
    for _ in range(width - 1):
        orbit.append(puzzle.pmap(orbit[-1]))
    scd = []
    trunc = []
    for z in orbit:
        s = bh_scd(puzzle, z, kmax + 1)
        if s >= kmax + 1:
            scd.append(kmax + 1)
            trunc.append(True)
        else:
            scd.append(s)
            trunc.append(False)
    return tb.Tableau(width, kmax, tuple(scd), tuple(trunc))


# ---------------------------------------------------------------------------
# Area bookkeeping
# ---------------------------------------------------------------------------


@dataclass
class AreaCertificate:
    area_sums: list[float]            # total piece area per depth
    mu: dict[tuple[int, int], float]  # (depth, index) -> area ratio
    eta: list[float]                  # min over chains of the mu product
    mcmullen: list[dict]              # per-piece inequality records
    leaves: list[tuple[int, int]]

    def to_json(self) -> dict:
        return {
            "area_sums": self.area_sums,
            "eta": self.eta,
            "mcmullen_worst_slack": min((r["slack"] for r in self.mcmullen),
                                        default=None),
            "pieces_checked": len(self.mcmullen),
        }


def area_certificate(puzzle: BHPuzzle) -> AreaCertificate:
    """Per-piece area inequalities and the chain-minimum products.

    For each piece with children: sum of child areas <= piece area divided by
    (1 + 4 pi mod A*(piece)); the per-depth minimum over nested chains of the
    area-ratio product bounds the total area decay.
    """
    mu: dict[tuple[int, int], float] = {}
    mc = []
    leaves = []
    for k in range(puzzle.max_depth):
        for p in puzzle.depths[k]:
            kids = puzzle.children_of(p)
            if not kids:
                leaves.append((k, p.index))
                continue
            child_area = sum(c.area for c in kids)
            child_err = sum(c.area_err for c in kids)
            if child_area <= 0:
                leaves.append((k, p.index))
                continue
            mu[(k, p.index)] = p.area / child_area
            cap = mcmullen_bound(p.area + p.area_err, p.thin_modulus)
            mc.append({
                "depth": k,
                "index": p.index,
                "children_area": child_area,
                "cap": cap,
                "slack": cap - (child_area - child_err),
                "thin_lo": p.thin_modulus.lo,
            })
    # minimum product of mu along ancestor chains, per depth
    eta = [1.0]
    prod: dict[int, float] = {p.index: 1.0 for p in puzzle.depths[0]}
    for k in range(1, puzzle.max_depth + 1):
        nxt: dict[int, float] = {}
        for p in puzzle.depths[k]:
            parent_prod = prod.get(p.parent_index)
            parent_mu = mu.get((k - 1, p.parent_index))
            if parent_prod is None or parent_mu is None:
                continue
            nxt[p.index] = parent_prod * parent_mu
        if not nxt:
            break
        eta.append(min(nxt.values()))
        prod = nxt
    area_sums = [sum(p.area for p in level) for level in puzzle.depths]
    return AreaCertificate(area_sums, mu, eta, mc, leaves)


# ---------------------------------------------------------------------------
# Component classification
# ---------------------------------------------------------------------------


@dataclass
class SampleVerdict:
    z: complex
    verdict: str  # 'singleton' | 'nontrivial' | 'inconclusive'
    evidence: str
    thin_sum: float
    diameters: list[float]

    def to_json(self) -> dict:
        return {"z": [self.z.real, self.z.imag], "verdict": self.verdict,
                "evidence": self.evidence, "thin_sum": self.thin_sum,
                "diameters": self.diameters}


@dataclass
class ComponentReport:
    kind: str  # 'totally_disconnected' | 'nontrivial_components'
    period: Optional[int]
    depth_used: int
    samples: list[SampleVerdict]
    area: AreaCertificate
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "period": self.period,
            "depth_used": self.depth_used,
            "samples": [s.to_json() for s in self.samples],
            "area": self.area.to_json(),
            "notes": self.notes,
        }


def _chain_of(puzzle: BHPuzzle, z: complex) -> list[BHPiece]:
    out = []
    for k in range(puzzle.max_depth + 1):
        p = puzzle.locate(z, k)
        if p is None:
            break
        out.append(p)
    return out


def _thin_sum(chain: list[BHPiece]) -> float:
    return float(sum(p.thin_modulus.lo for p in chain if p.thin_modulus))


def preimages(pmap: PolynomialMap, w: complex) -> list[complex]:
    coeffs = list(pmap.coefficients)
    coeffs[0] -= w
    roots = np.roots(list(reversed(coeffs)))
    return [complex(r) for r in roots]


def classify_components(puzzle: BHPuzzle, critical_tab: Optional[tb.Tableau] = None,
                        samples: Optional[list[complex]] = None,
                        orbit_budget: int = 128) -> ComponentReport:
    """Component structure report.

    Non-periodic critical tableau: every sample gets a shrinking chain with a
    certified thin-annulus modulus ledger (totally disconnected verdict).
    Periodic: the critical component and sampled preimages of c_0 are flagged
    non-trivial; other samples are certified singleton when their orbit
    avoids a computed critical piece (bounded-loss route) or keeps visiting
    them (transport route).
    """
    area = area_certificate(puzzle)
    notes = []
    if puzzle.bounded_critical is None:
        verdicts = []
        for z in (samples or []):
            chain = _chain_of(puzzle, z)
            verdicts.append(SampleVerdict(
                complex(z), "singleton", "all critical orbits escape",
                _thin_sum(chain), [p.diameter() for p in chain]))
        return ComponentReport("totally_disconnected", None, puzzle.max_depth,
                               verdicts, area,
                               ["no bounded critical orbit: Cantor Julia set"])

    c0 = puzzle.bounded_critical
    if critical_tab is None:
        critical_tab = bh_tableau(puzzle, c0, width=max(8, puzzle.max_depth + 2))
    period = None
    for p in range(1, min(critical_tab.width, critical_tab.depth // 2 + 1)):
        if critical_tab.truncated[p] and critical_tab.scd[p] >= critical_tab.depth + 1:
            period = p
            break
    if samples is None:
        samples = _default_samples(puzzle, orbit_budget)

    verdicts = []
    crit_chain = puzzle.critical_chain()
    if period is None:
        for z in samples:
            chain = _chain_of(puzzle, z)
            ts = _thin_sum(chain)
            verdicts.append(SampleVerdict(
                complex(z), "singleton" if len(chain) == puzzle.max_depth + 1 else "inconclusive",
                "non-periodic tableau: certified thin-annulus sum grows with depth",
                ts, [p.diameter() for p in chain]))
        return ComponentReport("totally_disconnected", None, puzzle.max_depth,
                               verdicts, area, notes)

    # periodic case
    notes.append(f"periodic critical tableau, period {period} (to depth {critical_tab.depth})")
    chain = crit_chain
    verdicts.append(SampleVerdict(
        complex(c0), "nontrivial",
        f"critical component: orbit of f^{period} stays in every computed critical piece",
        _thin_sum(chain), [p.diameter() for p in chain]))
    pres = [w for w in preimages(puzzle.pmap, c0) if abs(w - c0) > 1e-9]
    pres = [w for w in pres if puzzle.locate(w, 0) is not None][:3]
    for w in pres:
        ch = _chain_of(puzzle, w)
        verdicts.append(SampleVerdict(
            complex(w), "nontrivial",
            "iterated preimage of the bounded critical point",
            _thin_sum(ch), [p.diameter() for p in ch]))
    for z in samples:
        if any(abs(z - v.z) < 1e-9 for v in verdicts):
            continue
        verdicts.append(_periodic_sample_verdict(puzzle, z, orbit_budget))
    kind = "nontrivial_components"
    return ComponentReport(kind, period, puzzle.max_depth, verdicts, area, notes)


def _periodic_sample_verdict(puzzle: BHPuzzle, z: complex, orbit_budget: int) -> SampleVerdict:
    chain = _chain_of(puzzle, z)
    radius = puzzle.pmap.escape_radius()
    orbit = [complex(z)]
    for _ in range(orbit_budget):
        w = puzzle.pmap(orbit[-1])
        if not (math.isfinite(w.real) and math.isfinite(w.imag)) or abs(w) > radius:
            break
        orbit.append(w)
    crit_chain = puzzle.critical_chain()
    deepest_visit = -1
    for k, piece in enumerate(crit_chain):
        if any(piece.contains(w) for w in orbit):
            deepest_visit = k
        else:
            break
    if deepest_visit < len(crit_chain) - 1:
        ev = (f"orbit avoids P_{deepest_visit + 1}(c_0): bounded-loss transport "
              f"keeps annulus moduli bounded below")
        verdict = "singleton" if len(chain) == puzzle.max_depth + 1 else "inconclusive"
    else:
        ev = ("orbit visits every computed critical piece: deep annuli are "
              "conformal copies from bounded depth")
        verdict = "singleton" if len(chain) == puzzle.max_depth + 1 else "inconclusive"
    return SampleVerdict(complex(z), verdict, ev, _thin_sum(chain),
                         [p.diameter() for p in chain])


def _default_samples(puzzle: BHPuzzle, orbit_budget: int) -> list[complex]:
    """A few K points away from the critical chain, from the deepest grid."""
    out = []
    deepest = puzzle.depths[puzzle.max_depth]
    crit = puzzle.critical_chain()
    crit_idx = crit[-1].index if len(crit) == puzzle.max_depth + 1 else None
    for p in deepest:
        if p.index == crit_idx:
            continue
        xs, ys = np.nonzero(p.mask)
        mid = len(xs) // 2
        out.append(p.origin + complex(xs[mid] * p.h, ys[mid] * p.h))
        if len(out) >= 4:
            break
    return out


# ---------------------------------------------------------------------------
# Polynomial-like restriction
# ---------------------------------------------------------------------------


@dataclass
class PolynomialLikeRestriction:
    period: int
    depth: int
    degree: int
    critical_count: int
    orbit_contained: bool
    connected: bool

    def to_json(self) -> dict:
        return {"period": self.period, "depth": self.depth, "degree": self.degree,
                "critical_count": self.critical_count,
                "orbit_contained": self.orbit_contained,
                "connected": self.connected}


def polylike_extract(puzzle: BHPuzzle, critical_tab: tb.Tableau, p: int,
                     orbit_budget: int = 64) -> PolynomialLikeRestriction:
    """Restriction of f^p to a deep critical piece, with compact containment
    f^p(P_r) = P_{r-p} >> P_r checked at grid resolution and the degree
    counted from the critical points inside."""
    chain = puzzle.critical_chain()
    if len(chain) < p + 1:
        raise ContainmentFails(puzzle.max_depth)
    r = None
    for cand in range(p, len(chain)):
        inner, outer = chain[cand], chain[cand - p]
        if not _contained_in(inner, outer):
            continue
        # f^p must be degree two on the piece: its intermediate images must
        # avoid the escaping critical points (compactness itself follows from
        # the strict gap between the potential levels)
        if _images_avoid_escaping(puzzle, cand, p):
            r = cand
            break
    if r is None:
        raise ContainmentFails(len(chain) - 1)
    # critical points of f^p inside P_r: critical points of f met by the images
    crit_count = 0
    cur = chain[r]
    for i in range(p):
        for w in list(puzzle.escaping_criticals) + [puzzle.bounded_critical]:
            if w is not None and cur.contains(w):
                crit_count += 1
        if cur.image_index is None:
            break
        cur = next(q for q in puzzle.depths[cur.depth - 1] if q.index == cur.image_index)
    degree = 1 + crit_count
    z = puzzle.bounded_critical
    contained = True
    for _ in range(orbit_budget // max(p, 1)):
        if not chain[r].contains(z):
            contained = False
            break
        for _ in range(p):
            z = puzzle.pmap(z)
    connected = contained and crit_count == 1
    return PolynomialLikeRestriction(p, r, degree, crit_count, contained, connected)


def _contained_in(inner: BHPiece, outer: BHPiece, sample_cap: int = 400) -> bool:
    xs, ys = np.nonzero(inner.mask)
    step = max(1, len(xs) // sample_cap)
    pts = inner.origin + inner.h * (xs[::step] + 1j * ys[::step])
    return all(outer.contains(complex(z)) for z in pts)


def _images_avoid_escaping(puzzle: BHPuzzle, r: int, p: int) -> bool:
    """Intermediate images of the depth-r critical piece under f contain no
    escaping critical point (so f^p restricted there has a single critical
    point and degree two)."""
    cur = puzzle.critical_chain()[r]
    for i in range(p):
        if i > 0:
            for w in puzzle.escaping_criticals:
                if cur.contains(w):
                    return False
        if cur.depth == 0 or cur.image_index is None:
            break
        cur = next(q for q in puzzle.depths[cur.depth - 1]
                   if q.index == cur.image_index)
    return True


# ---------------------------------------------------------------------------
# Bernoulli coding (all critical orbits escape)
# ---------------------------------------------------------------------------


@dataclass
class CodingReport:
    depth: int
    symbol_depth: int
    table: dict[tuple[int, int], tuple[int, ...]]
    injective: bool
    piece_counts: list[int]
    max_diameters: list[float]

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "symbol_depth": self.symbol_depth,
            "injective": self.injective,
            "piece_counts": self.piece_counts,
            "max_diameters": self.max_diameters,
        }


def bernoulli_coding(puzzle: BHPuzzle, depth: Optional[int] = None) -> CodingReport:
    """Finite-depth itineraries over the first separating level.

    Symbols are the pieces at the first depth k0 where the level set splits
    (pieces deeper down map onto pieces of the previous depth conformally, so
    their forward images have well-defined symbol sequences).  Checks per
    depth that distinct pieces carry distinct itineraries, that no piece of
    depth >= 1 contains a critical point, and that diameters decrease.
    """
    if puzzle.bounded_critical is not None:
        raise CriticalInPiece("coding requires all critical orbits to escape")
    kmax = puzzle.max_depth if depth is None else min(depth, puzzle.max_depth)
    by_key = {(k, p.index): p for k in range(kmax + 1) for p in puzzle.depths[k]}
    for k in range(1, kmax + 1):
        for p in puzzle.depths[k]:
            for w in puzzle.escaping_criticals:
                if p.contains(w):
                    raise CriticalInPiece(
                        f"critical point inside depth-{k} piece {p.index}")
    k0 = next((k for k in range(kmax + 1) if len(puzzle.depths[k]) > 1), 0)

    def ancestor_at(piece: BHPiece, target_depth: int) -> int:
        cur = piece
        while cur.depth > target_depth:
            cur = by_key[(cur.depth - 1, cur.parent_index)]
        return cur.index

    table: dict[tuple[int, int], tuple[int, ...]] = {}
    injective = True
    for k in range(k0, kmax + 1):
        seen: dict[tuple[int, ...], int] = {}
        for p in puzzle.depths[k]:
            seq = []
            cur = p
            while cur.depth >= k0:
                seq.append(ancestor_at(cur, k0))
                if cur.depth == k0:
                    break
                cur = by_key[(cur.depth - 1, cur.image_index)]
            code = tuple(seq)
            table[(k, p.index)] = code
            if code in seen:
                injective = False
            seen[code] = p.index
    counts = [len(puzzle.depths[k]) for k in range(kmax + 1)]
    diams = [max(p.diameter() for p in puzzle.depths[k]) for k in range(kmax + 1)]
    return CodingReport(kmax, k0, table, injective, counts, diams)
