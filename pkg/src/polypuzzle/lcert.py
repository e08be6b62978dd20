"""Connectivity certificates for quadratic puzzles.

The pipeline: detect renormalization from the critical tableau (a fully
critical column, or the orbit trapped in the depth-1 pieces at alpha); if
absent, seed a positive annulus modulus from a visit to a piece at -alpha,
propagate certified lower bounds through the annulus calculus (copy / half /
semi-half / conformal transport), and pair the resulting divergence evidence
with measured shrinkage of nested pieces.  All verdicts are depth-bounded and
say so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tableau as tb
from .dyncore import PolynomialMap, critical_orbit, fixed_points
from .errors import NoVisitFound, OnBoundary, OrbitHitsAlpha
from .modulus import ModulusInterval, estimate_modulus
from .puzzle import ChainCache, PuzzleTower, build_tower, minus_alpha_pieces

RULES = ("copy", "half", "semi_half", "isomorphic_transport")


@dataclass(frozen=True)
class PropagationStep:
    rule: str
    source: str
    target: str
    target_point: complex
    target_depth: int
    bound_before: float
    bound_after: float

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "source": self.source,
            "target": self.target,
            "point": [self.target_point.real, self.target_point.imag],
            "d": self.target_depth,
            "bound": self.bound_after,
        }


@dataclass
class ModulusLedger:
    point: complex
    depth_budget: int
    bounds: dict[int, float] = field(default_factory=dict)
    steps: list[PropagationStep] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def partial_sums(self) -> list[float]:
        total = 0.0
        out = []
        for d in sorted(self.bounds):
            total += self.bounds[d]
            out.append(total)
        return out

    def certified(self, threshold: float = 2.0, trend: int = 3) -> bool:
        sums = self.partial_sums
        if len(sums) < trend or sums[-1] < threshold:
            return False
        tail = sums[-trend:]
        return all(b > a for a, b in zip(tail, tail[1:]))

    def add(self, depth: int, bound: float, steps: list[PropagationStep]):
        if bound > self.bounds.get(depth, 0.0):
            self.bounds[depth] = bound
            self.steps.extend(steps)

    def to_json(self) -> dict:
        return {
            "point": [self.point.real, self.point.imag],
            "depth_budget": self.depth_budget,
            "bounds": {str(d): self.bounds[d] for d in sorted(self.bounds)},
            "partial_sums": self.partial_sums,
            "steps": [s.to_json() for s in self.steps],
            "notes": self.notes,
        }


@dataclass(frozen=True)
class SeedResult:
    depth: int
    interval: ModulusInterval
    visit_piece_label: Optional[str]
    base_modulus: ModulusInterval
    steps: tuple[PropagationStep, ...]


@dataclass
class Verdict:
    kind: str  # 'lc_certified' | 'renormalizable' | 'inconclusive' | 'hypothesis_failed'
    period: Optional[int]
    depth_used: int
    reason: str = ""
    lemma2_period: Optional[int] = None
    lemma3_period: Optional[int] = None
    ledger: Optional[ModulusLedger] = None
    shrink: Optional[list] = None

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "period": self.period,
            "depth_used": self.depth_used,
            "reason": self.reason,
            "lemma2_period": self.lemma2_period,
            "lemma3_period": self.lemma3_period,
        }
        if self.ledger is not None:
            out["ledger"] = self.ledger.to_json()
        if self.shrink is not None:
            out["shrink"] = self.shrink
        return out


# ---------------------------------------------------------------------------
# Renormalization detectors
# ---------------------------------------------------------------------------


def lemma2_test(critical_tab: tb.Tableau) -> Optional[int]:
    """Smallest p >= 1 whose column stays critical through the computed depth.

    Only columns p <= depth/2 count: a recurrent orbit always has columns
    critical down to the depth horizon, so a periodicity claim needs at least
    two periods of evidence.
    """
    for p in range(1, min(critical_tab.width, critical_tab.depth // 2 + 1)):
        if critical_tab.truncated[p] and critical_tab.scd[p] >= critical_tab.depth + 1:
            return p
    return None


def lemma3_test(tower: PuzzleTower, orbit) -> Optional[int]:
    """q if the whole computed critical orbit stays in the depth-1 pieces
    touching alpha; otherwise None.  Depth-bounded by the orbit length."""
    alpha_node = 0
    pieces = [p for p in tower.pieces(1) if alpha_node in p.corner_nodes]
    for z in orbit.points:
        if not any(p.contains(z) for p in pieces):
            return None
    return tower.q


# ---------------------------------------------------------------------------
# Seeding and propagation
# ---------------------------------------------------------------------------


def _annulus_modulus_at(cache: ChainCache, z: complex, d: int,
                        memo: dict, cells: int = 128) -> ModulusInterval:
    outer = cache.orbit_piece(z, d)
    inner = cache.orbit_piece(z, d + 1)
    key = (outer.key, inner.key)
    if key not in memo:
        if outer.corner_nodes & inner.corner_nodes:
            memo[key] = ModulusInterval.degenerate()
        else:
            memo[key] = estimate_modulus(outer.boundary, inner.boundary,
                                         base_cells=cells)
    return memo[key]


def _transport_chain(crit_tab: tb.Tableau, cache: ChainCache, d: int,
                     base: ModulusInterval, orbit: np.ndarray) -> tuple[float, list[PropagationStep]]:
    """Pull the depth-0 bound at c_d back to A_d(0) along the critical orbit.

    Each step A_{k-1}(c_{d-k+1}) -> A_k(c_{d-k}) copies the bound when the
    target annulus is off-critical and halves it otherwise.
    """
    bound = base.lo
    steps: list[PropagationStep] = []
    for k in range(1, d + 1):
        col = d - k
        cell = crit_tab.entry(k, col)
        before = bound
        if cell == tb.OFF_CRITICAL:
            rule = "copy"
        elif cell == tb.SEMI_CRITICAL:
            rule = "semi_half"
            bound = bound / 2.0
        else:
            rule = "half"
            bound = bound / 2.0
        steps.append(PropagationStep(
            rule, f"A_{k - 1}(c_{col + 1})", f"A_{k}(c_{col})",
            complex(orbit[col]), k, before, bound))
    return bound, steps


def seed_positive_modulus(tower: PuzzleTower, critical_tab: tb.Tableau,
                          cache: Optional[ChainCache] = None, *,
                          cells: int = 128) -> SeedResult:
    """Find the first visit of the critical orbit to a piece at -alpha and
    transport the positive modulus of that depth-0 annulus back to A_d(0)."""
    cache = cache if cache is not None else ChainCache(tower)
    orbit = critical_orbit(tower.pmap, critical_tab.width + 1).points
    memo: dict = {}
    for d in range(1, critical_tab.width):
        if critical_tab.truncated[d] or critical_tab.scd[d] != 0:
            continue
        label = None
        for p in minus_alpha_pieces(tower):
            if p.contains(orbit[d]):
                label = p.label or f"piece {p.index}"
                break
        base = _annulus_modulus_at(cache, complex(orbit[d]), 0, memo, cells)
        if base.lo <= 0:
            continue
        bound, steps = _transport_chain(critical_tab, cache, d, base, orbit)
        interval = ModulusInterval(bound, math.inf, "propagated")
        return SeedResult(d, interval, label, base, tuple(steps))
    raise NoVisitFound(critical_tab.width)


def certify_divergence(tower: PuzzleTower, critical_tab: tb.Tableau,
                       z0: complex, depth_budget: int, *,
                       cache: Optional[ChainCache] = None,
                       cells: int = 128,
                       z0_tab: Optional[tb.Tableau] = None) -> ModulusLedger:
    """Certified lower bounds for mod A_d(z0), d <= depth_budget.

    For the critical point: every visit to a -alpha piece seeds a transported
    bound, and the child relation halves bounds down the genealogy.  For other
    points: conformal transport along first-critical-column diagonals where
    the orbit is deeply critical, plus bounded-loss transport from
    semi-critical depth-0 annuli.
    """
    cache = cache if cache is not None else ChainCache(tower)
    memo: dict = {}
    if abs(complex(z0)) < 1e-13:
        return _certify_critical(tower, critical_tab, depth_budget, cache, memo, cells)
    ledger = ModulusLedger(complex(z0), depth_budget)
    crit_ledger = _certify_critical(tower, critical_tab, depth_budget, cache, memo, cells)
    if z0_tab is None:
        z0_tab = tb.tableau_from_orbit(tower, z0, width=depth_budget + 2,
                                       depth=depth_budget, chains=cache)
    orbit = [complex(z0)]
    for _ in range(depth_budget + 2):
        orbit.append(tower.pmap(orbit[-1]))
    # (1) conformal transport of certified critical bounds
    for d, bound in sorted(crit_ledger.bounds.items()):
        n = _first_critical_column(z0_tab, d)
        if n is None or n + d > depth_budget:
            continue
        clean = all(z0_tab.entry(n + d - i, i) == tb.OFF_CRITICAL
                    for i in range(1, n))
        if not clean:
            continue
        step = PropagationStep("isomorphic_transport", f"A_{d}(0)",
                               f"A_{n + d}(z0)", complex(z0), n + d, bound, bound)
        ledger.add(n + d, bound, [step])
    # (2) bounded-loss transport from semi-critical depth-0 annuli
    for k in range(1, min(depth_budget, z0_tab.width - 1) + 1):
        if z0_tab.truncated[k] or z0_tab.scd[k] != 0:
            continue
        try:
            base = _annulus_modulus_at(cache, orbit[k], 0, memo, cells)
        except (OnBoundary, OrbitHitsAlpha):
            continue
        if base.lo <= 0:
            continue
        bound = base.lo
        steps = []
        for j in range(1, k + 1):
            col = k - j
            cell = z0_tab.entry(j, col)
            before = bound
            if cell == tb.OFF_CRITICAL:
                rule = "copy"
            elif cell == tb.SEMI_CRITICAL:
                rule = "semi_half"
                bound /= 2.0
            elif cell == tb.CRITICAL:
                rule = "half"
                bound /= 2.0
            else:
                steps = None
                break
            steps.append(PropagationStep(rule, f"A_{j - 1}(z_{col + 1})",
                                         f"A_{j}(z_{col})", orbit[col], j,
                                         before, bound))
        if steps is not None:
            ledger.add(k, bound, steps)
    ledger.notes.append(f"critical ledger depths: {sorted(crit_ledger.bounds)}")
    return ledger


def _certify_critical(tower, critical_tab, depth_budget, cache, memo, cells) -> ModulusLedger:
    ledger = ModulusLedger(0.0 + 0.0j, depth_budget)
    orbit = critical_orbit(tower.pmap, critical_tab.width + 1).points
    for d in range(1, min(depth_budget, critical_tab.width - 1) + 1):
        if critical_tab.truncated[d] or critical_tab.scd[d] != 0:
            continue
        try:
            base = _annulus_modulus_at(cache, complex(orbit[d]), 0, memo, cells)
        except (OnBoundary, OrbitHitsAlpha):
            continue
        if base.lo <= 0:
            continue
        bound, steps = _transport_chain(critical_tab, cache, d, base, orbit)
        ledger.add(d, bound, steps)
    gen = tb.genealogy(critical_tab, max_parent=depth_budget)
    for parent in sorted(ledger.bounds):
        for child in gen.children.get(parent, []):
            if child > depth_budget:
                continue
            cand = ledger.bounds[parent] / 2.0
            step = PropagationStep("half", f"A_{parent}(0)", f"A_{child}(0)",
                                   0.0 + 0.0j, child,
                                   ledger.bounds[parent], cand)
            ledger.add(child, cand, [step])
    return ledger


def _first_critical_column(t: tb.Tableau, d: int) -> Optional[int]:
    for n in range(1, t.width):
        e = t.entry(d, n)
        if e == tb.CRITICAL:
            return n
        if e == tb.UNKNOWN:
            return None
    return None


# ---------------------------------------------------------------------------
# Piece shrinkage
# ---------------------------------------------------------------------------


def shrink_check(tower: PuzzleTower, z_samples, depth: int, *,
                 cache: Optional[ChainCache] = None,
                 shrink_factor: float = 0.25) -> list[dict]:
    """Bounding-box diameters of the nested pieces around each sample.

    Points whose forward orbit hits alpha get one diameter sequence per
    sector (their pieces are only defined as unions).  A sample passes when
    its final diameter is below ``shrink_factor`` times the initial one.
    """
    cache = cache if cache is not None else ChainCache(tower)
    star_tower = None
    out = []
    for z in z_samples:
        z = complex(z)
        node = tower.registry.lookup(z)
        if node is not None:
            if star_tower is None:
                star_tower = tower
                while star_tower.max_depth < depth:
                    star_tower = _refine(star_tower)
            chains = _star_chains(star_tower, z, depth)
            diams = [max(d_list) for d_list in zip(*[[p.diameter() for p in ch]
                                                     for ch in chains])]
            record = {"z": z, "diameters": diams, "sectors": len(chains),
                      "star": True,
                      "chains": [[p.diameter() for p in ch] for ch in chains]}
        else:
            try:
                chain = cache.chain(z, depth)
                diams = [p.diameter() for p in chain]
            except (OnBoundary, OrbitHitsAlpha) as exc:
                out.append({"z": z, "diameters": [], "error": str(exc), "passed": False})
                continue
            record = {"z": z, "diameters": diams, "star": False}
        monotone = all(b <= a * (1 + 1e-9) for a, b in zip(record["diameters"],
                                                           record["diameters"][1:]))
        passed = bool(record["diameters"]) and monotone and \
            record["diameters"][-1] < shrink_factor * record["diameters"][0]
        record["passed"] = passed
        out.append(record)
    return out


def _refine(tower):
    from .puzzle import refine as _pr
    return _pr(tower)


def _star_chains(tower: PuzzleTower, z: complex, depth: int):
    """Per-sector nested piece chains for a point on the cut locus."""
    node = tower.registry.lookup(complex(z))
    depth = min(depth, tower.max_depth)
    levels = [[p for p in tower.pieces(d) if node in p.corner_nodes]
              for d in range(depth + 1)]
    chains = []
    for leaf in levels[depth]:
        chain = [leaf]
        for d in range(depth, 0, -1):
            parent = tower.piece(d - 1, chain[-1].parent_index)
            chain.append(parent)
        chain.reverse()
        if all(node in p.corner_nodes for p in chain):
            chains.append(chain)
    return chains


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------


@dataclass
class QuadraticAnalysis:
    c: complex
    q: Optional[int]
    alpha_angles: Optional[list]
    verdict: Verdict
    tower: Optional[PuzzleTower] = None
    critical_tableau: Optional[tb.Tableau] = None
    cache: Optional[ChainCache] = None

    def to_json(self) -> dict:
        return {
            "map": {"c": [self.c.real, self.c.imag]},
            "q": self.q,
            "alpha_angles": [str(a) for a in self.alpha_angles] if self.alpha_angles else None,
            "verdict": self.verdict.to_json(),
        }


def analyze_quadratic(c: complex, *, depth_budget: int = 24,
                      geometry_depth: int = 2, orbit_budget: int = 256,
                      threshold: float = 2.0, shrink_depth: int = 8,
                      shrink_factor: float = 0.25,
                      samples: Optional[list] = None) -> QuadraticAnalysis:
    """Run the full quadratic pipeline and assemble a depth-bounded verdict."""
    pmap = PolynomialMap.quadratic(c)
    try:
        fp = fixed_points(pmap)
    except Exception as exc:
        return QuadraticAnalysis(complex(c), None, None,
                                 Verdict("hypothesis_failed", None, 0, str(exc)))
    if not fp.both_repelling:
        return QuadraticAnalysis(complex(c), None, None,
                                 Verdict("hypothesis_failed", None, 0,
                                         "NotBothRepelling: a fixed point is not repelling"))
    orb = critical_orbit(pmap, orbit_budget)
    if orb.escaped:
        return QuadraticAnalysis(complex(c), None, None,
                                 Verdict("hypothesis_failed", None, 0,
                                         "critical orbit escapes (disconnected Julia set)"))
    tower = build_tower(pmap, max(geometry_depth, 1))
    cache = ChainCache(tower)
    try:
        crit_tab = tb.tableau_from_orbit(tower, 0.0, width=depth_budget + 2,
                                         depth=depth_budget, chains=cache)
    except (OnBoundary, OrbitHitsAlpha) as exc:
        return QuadraticAnalysis(complex(c), tower.q, tower.alpha_angles,
                                 Verdict("hypothesis_failed", None, 0, str(exc)),
                                 tower)
    p2 = lemma2_test(crit_tab)
    p3 = lemma3_test(tower, orb)
    if p2 is not None or p3 is not None:
        period = p2 if p2 is not None else p3
        v = Verdict("renormalizable", period, crit_tab.depth,
                    "periodic critical tableau" if p2 is not None
                    else "orbit trapped in the depth-1 pieces at alpha",
                    lemma2_period=p2, lemma3_period=p3)
        return QuadraticAnalysis(complex(c), tower.q, tower.alpha_angles, v,
                                 tower, crit_tab, cache)
    ledger = certify_divergence(tower, crit_tab, 0.0, depth_budget, cache=cache)
    if samples is None:
        samples = [fp.beta, -fp.beta, fp.alpha, pmap(0.0)]
    shrink = shrink_check(tower, samples, shrink_depth, cache=cache,
                          shrink_factor=shrink_factor)
    ok_shrink = all(rec.get("passed") for rec in shrink)
    certified = ledger.certified(threshold)
    kind = "lc_certified" if certified and ok_shrink else "inconclusive"
    reason = (f"partial modulus sum {ledger.partial_sums[-1]:.3f} over "
              f"{len(ledger.bounds)} certified depths (threshold {threshold}); "
              f"shrink {'ok' if ok_shrink else 'failed'}") if ledger.bounds else \
        "no certified annuli"
    v = Verdict(kind, None, depth_budget, reason,
                lemma2_period=None, lemma3_period=None,
                ledger=ledger, shrink=[_shrink_json(r) for r in shrink])
    return QuadraticAnalysis(complex(c), tower.q, tower.alpha_angles, v,
                             tower, crit_tab, cache)


def _shrink_json(rec: dict) -> dict:
    out = {"z": [rec["z"].real, rec["z"].imag],
           "diameters": [float(d) for d in rec["diameters"]],
           "passed": bool(rec.get("passed"))}
    if rec.get("star"):
        out["star"] = True
    if "error" in rec:
        out["error"] = rec["error"]
    return out
