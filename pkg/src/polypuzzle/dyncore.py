"""Polynomial iteration, fixed points, potential function and external rays.

Conventions: polynomial coefficients are stored in ascending order, so
``coefficients[k]`` multiplies ``z**k``.  The potential G is the escape-rate
function satisfying G(f(z)) = d*G(z), zero exactly on the filled Julia set.
External rays are supported for monic polynomials; angles are exact rationals
(turns in [0,1)) so that angle d-tupling is free of drift.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CycleNotFound,
    MultipleFixedPoint,
    RayNearCriticalValue,
    TraceDiverged,
    UnsupportedMap,
)

TWO_PI = 2.0 * math.pi
ESCAPE_CAP = 1e100  # stop iterating for G once |z| exceeds this
DEFAULT_BUDGET = 1024


def _as_fraction(angle) -> Fraction:
    t = Fraction(angle)
    return t - (t.numerator // t.denominator)  # reduce mod 1


@dataclass(frozen=True)
class PolynomialMap:
    """A polynomial z -> a_0 + a_1 z + ... + a_d z^d with d >= 2."""

    coefficients: tuple[complex, ...]

    def __post_init__(self):
        coeffs = tuple(complex(a) for a in self.coefficients)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        if len(coeffs) < 3:
            raise ValueError("degree must be at least 2")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def quadratic(cls, c: complex) -> "PolynomialMap":
        return cls((complex(c), 0.0, 1.0))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_monic(self) -> bool:
        return self.coefficients[-1] == 1

    @property
    def is_quadratic(self) -> bool:
        return self.degree == 2

    @property
    def c(self) -> complex:
        """Parameter of a normalized quadratic z^2 + c."""
        if not (self.is_quadratic and self.is_monic and self.coefficients[1] == 0):
            raise UnsupportedMap("map is not of the form z^2 + c")
        return self.coefficients[0]

    def __call__(self, z):
        acc = 0.0 + 0.0j if np.isscalar(z) else np.zeros_like(z, dtype=complex)
        for a in reversed(self.coefficients):
            acc = acc * z + a
        return acc

    def derivative(self, z):
        acc = 0.0 + 0.0j if np.isscalar(z) else np.zeros_like(z, dtype=complex)
        for k in range(self.degree, 0, -1):
            acc = acc * z + k * self.coefficients[k]
        return acc

    def critical_points(self) -> np.ndarray:
        """Roots of f', with multiplicity (length = degree - 1)."""
        dcoeffs = [k * self.coefficients[k] for k in range(1, self.degree + 1)]
        return np.roots(list(reversed(dcoeffs)))

    def escape_radius(self) -> float:
        """R with |f(z)| >= 2|z| whenever |z| >= R (so G > 0 there)."""
        d = self.degree
        ad = abs(self.coefficients[-1])
        others = [abs(a) for a in self.coefficients[:-1]]
        r = 2.0
        while True:
            lower = ad * r ** (d - 1) - sum(a * r ** max(i - 1, 0) for i, a in enumerate(others))
            if lower >= 2.0:
                return max(4.0, r)
            r *= 2.0

    def iterate(self, z: complex, n: int) -> complex:
        for _ in range(n):
            z = self(z)
        return z


@dataclass(frozen=True)
class FixedPointPair:
    alpha: complex
    beta: complex
    alpha_multiplier: complex
    beta_multiplier: complex
    both_repelling: bool


@dataclass(frozen=True)
class CriticalOrbit:
    points: np.ndarray
    escaped: bool
    escape_index: Optional[int]


@dataclass(frozen=True)
class RayTrace:
    angle: Fraction
    points: np.ndarray
    potentials: np.ndarray
    landed: bool
    landing_point: Optional[complex]

    def clip(self, g_max: float) -> "RayTrace":
        """Sub-trace with potentials <= g_max."""
        keep = self.potentials <= g_max + 1e-12
        return RayTrace(self.angle, self.points[keep], self.potentials[keep], self.landed, self.landing_point)


def green(pmap: PolynomialMap, z: complex, budget: int = DEFAULT_BUDGET) -> float:
    """Potential G(z); returns 0.0 if the point does not escape within budget."""
    d = pmap.degree
    radius = pmap.escape_radius()
    w = complex(z)
    n = 0
    while n < budget and abs(w) <= radius:
        w = pmap(w)
        n += 1
    if abs(w) <= radius:
        return 0.0
    while abs(w) < ESCAPE_CAP:
        w = pmap(w)
        n += 1
    return math.log(abs(w)) / d**n


def green_array(pmap: PolynomialMap, zs: np.ndarray, budget: int = 256) -> np.ndarray:
    """Vectorized potential over an array; non-escaping entries get 0.0."""
    d = pmap.degree
    radius = pmap.escape_radius()
    w = np.array(zs, dtype=complex)
    g = np.zeros(w.shape, dtype=float)
    alive = np.ones(w.shape, dtype=bool)
    scale = 1.0
    for _ in range(budget):
        if not alive.any():
            break
        wa = w[alive]
        big = np.abs(wa) > ESCAPE_CAP ** (1.0 / d)
        if big.any():
            idx = np.flatnonzero(alive)
            done = idx[big]
            g.flat[done] = np.log(np.abs(w.flat[done])) * scale
            alive.flat[done] = False
            wa = wa[~big]
            if wa.size == 0:
                scale /= d
                continue
        w[alive] = pmap(wa)
        scale /= d
    # points that escaped the radius but not the cap: finish them off
    rem = alive & (np.abs(w) > radius)
    if rem.any():
        for i in np.flatnonzero(rem):
            g.flat[i] = _finish_green(pmap, complex(w.flat[i]), scale)
    return g


def _finish_green(pmap: PolynomialMap, w: complex, scale: float) -> float:
    d = pmap.degree
    n = 0
    while abs(w) < ESCAPE_CAP:
        w = pmap(w)
        n += 1
        if n > 64:
            break
    return math.log(abs(w)) * scale / d**n


def critical_orbit(pmap: PolynomialMap, n: int, z0: Optional[complex] = None,
                   budget_radius: Optional[float] = None) -> CriticalOrbit:
    """First n+1 points of the orbit of a critical point (0 for quadratics)."""
    if z0 is None:
        if pmap.is_quadratic:
            z0 = 0.0
        else:
            raise ValueError("designate the critical point for degree > 2")
    radius = budget_radius if budget_radius is not None else pmap.escape_radius()
    pts = np.empty(n + 1, dtype=complex)
    pts[0] = z0
    escaped = False
    escape_index = None
    z = complex(z0)
    for i in range(1, n + 1):
        z = pmap(z)
        pts[i] = z
        if not escaped and abs(z) > radius:
            escaped = True
            escape_index = i
        if abs(z) > 1e150:
            pts[i + 1:] = z
            return CriticalOrbit(pts[: i + 1], True, escape_index)
    return CriticalOrbit(pts, escaped, escape_index)


# ---------------------------------------------------------------------------
# External rays
# ---------------------------------------------------------------------------

_G_WORK_QUAD = 16.0
_G_WORK_GENERIC = 30.0


def _boettcher_inverse(pmap: PolynomialMap, g: float, t: Fraction) -> complex:
    """Point of potential g >= g_work at angle t, by inverting the Boettcher
    coordinate asymptotically (identity plus first correction)."""
    w = cmath.exp(complex(g, TWO_PI * float(t)))
    if pmap.is_quadratic and pmap.coefficients[1] == 0:
        c = pmap.coefficients[0]
        return w - c / (2 * w)
    return w


def _g_work(pmap: PolynomialMap) -> float:
    if pmap.is_quadratic and pmap.coefficients[1] == 0:
        return _G_WORK_QUAD
    return _G_WORK_GENERIC


def _newton_pullback(pmap: PolynomialMap, n: int, target: complex, seed: complex,
                     tol: float = 1e-13, max_iter: int = 60) -> Optional[complex]:
    """Solve f^n(z) = target by Newton from seed; None on failure."""
    z = seed
    for _ in range(max_iter):
        w = z
        dw = 1.0 + 0.0j
        for _ in range(n):
            dw = pmap.derivative(w) * dw
            w = pmap(w)
            if abs(w) > 1e200:
                return None
        if dw == 0:
            return None
        step = (w - target) / dw
        z = z - step
        if abs(step) < tol * max(1.0, abs(z)):
            return z
    return None


def _saddle_levels(pmap: PolynomialMap, budget: int = 64) -> list[float]:
    """Potentials of the critical points of G in the escape region."""
    levels = []
    for w in pmap.critical_points():
        g = green(pmap, complex(w), budget)
        if g > 0:
            levels.append(g)
    return levels


def _doubling_period(t: Fraction, d: int, cap: int = 64) -> Optional[int]:
    """Period of t under multiplication by d mod 1, or None if preperiodic."""
    if t.denominator % d == 0 and t != 0:
        return None
    if t == 0:
        return 1
    s = t
    for k in range(1, cap + 1):
        s = (s * d) % 1
        if s == t:
            return k
    return None


def _accelerate_landing(pmap: PolynomialMap, period: int, z: complex,
                        tol: float = 1e-12, max_steps: int = 400) -> Optional[complex]:
    """Pull a ray point of a period-q angle down the ray by f^q branches.

    Converges geometrically to the (repelling) periodic landing point; returns
    None if the pullbacks fail or stop contracting.
    """
    prev_step = math.inf
    for _ in range(max_steps):
        z_new = _newton_pullback(pmap, period, z, z)
        if z_new is None:
            return None
        step = abs(z_new - z)
        if step < tol:
            return z_new
        if step > prev_step * 1.5 and step > 1e-6:
            return None
        prev_step = step
        z = z_new
    return None


def trace_ray(pmap: PolynomialMap, angle, g_stop: float = 2.0**-40, *,
              substeps: int = 8, land_tol: float = 1e-8, land_window: int = 16,
              max_splits: int = 12) -> RayTrace:
    """Trace the external ray of a rational angle down to potential g_stop.

    The ray is followed level by level (potentials g_work * d**(-k/substeps));
    each point solves f^n(z) = (Boettcher image) by Newton seeded from the
    previous point, so the polyline has strictly decreasing potential.
    Landing is declared when the last ``land_window`` points have diameter
    below ``land_tol``, or, for angles periodic under d-tupling, when inverse
    iteration along the ray converges.
    """
    if not pmap.is_monic:
        raise UnsupportedMap("external rays require a monic polynomial")
    t = _as_fraction(angle)
    d = pmap.degree
    g_work = _g_work(pmap)
    saddles = _saddle_levels(pmap)

    points = [_boettcher_inverse(pmap, g_work, t)]
    pots = [g_work]
    lam = d ** (1.0 / substeps)

    def target_for(g: float) -> complex:
        n = max(0, int(math.ceil(math.log(g_work / g) / math.log(d))))
        tn = _as_fraction(t * d**n)
        return _newtarget(n, _boettcher_inverse(pmap, g * d**n, tn))

    def _newtarget(n, w):
        return (n, w)

    def advance(g_from: float, z_from: complex, g_to: float, depth: int) -> complex:
        n, w = target_for(g_to)
        z = _newton_pullback(pmap, n, w, z_from)
        if z is not None:
            return z
        if depth >= max_splits:
            for s in saddles:
                k = math.floor(math.log(s / g_to) / math.log(d) + 0.5)
                for gs in (s / d**k, s / d ** (k + 1), s * d ** (1 - k)):
                    if g_to <= gs <= g_from * (1 + 1e-9):
                        raise RayNearCriticalValue(t, gs)
            raise TraceDiverged(f"ray {t}: Newton failed near G={g_to:.3g}")
        g_mid = math.sqrt(g_from * g_to)
        z_mid = advance(g_from, z_from, g_mid, depth + 1)
        return advance(g_mid, z_mid, g_to, depth + 1)

    landed = False
    landing = None
    g = g_work
    while g > g_stop:
        g_next = max(g / lam, g_stop)
        if g_next == g:
            break
        z = advance(g, points[-1], g_next, 0)
        points.append(z)
        pots.append(g_next)
        g = g_next
        if len(points) >= land_window:
            tail = np.asarray(points[-land_window:])
            if np.abs(tail - tail[0]).max() < land_tol:
                landed = True
                landing = complex(tail.mean())
                break
    if not landed:
        period = _doubling_period(t, d)
        if period is not None:
            z_land = _accelerate_landing(pmap, period, points[-1])
            if z_land is not None:
                landed = True
                landing = z_land
    return RayTrace(t, np.asarray(points), np.asarray(pots), landed, landing)


def equipotential_points(pmap: PolynomialMap, g: float, angles: Sequence[Fraction],
                         seed: Optional[complex] = None) -> np.ndarray:
    """Points at potential g for a sequence of nearby angles (continuation)."""
    if not pmap.is_monic:
        raise UnsupportedMap("equipotentials require a monic polynomial")
    d = pmap.degree
    g_work = _g_work(pmap)
    n = max(0, int(math.ceil(math.log(g_work / g) / math.log(d))))
    out = np.empty(len(angles), dtype=complex)
    z_prev = seed
    for i, t in enumerate(angles):
        tf = _as_fraction(t)
        tn = _as_fraction(tf * d**n)
        w = _boettcher_inverse(pmap, g * d**n, tn)
        if z_prev is None:
            # walk down from g_work at fixed angle
            z_prev = trace_at_angle(pmap, tf, g)
        z = _newton_pullback(pmap, n, w, z_prev)
        if z is None:
            z = trace_at_angle(pmap, tf, g)
        out[i] = z
        z_prev = z
    return out


def trace_at_angle(pmap: PolynomialMap, t: Fraction, g: float) -> complex:
    """Single point at (angle t, potential g) via a short downward trace."""
    ray = trace_ray(pmap, t, g_stop=g, substeps=4)
    return complex(ray.points[-1])


def fixed_points(pmap: PolynomialMap, *, tol: float = 1e-9) -> FixedPointPair:
    """Both fixed points of a quadratic; beta is the one the 0-ray lands on."""
    c = pmap.c
    disc = 1 - 4 * c
    if abs(disc) < 1e-14:
        raise MultipleFixedPoint("fixed points coincide (c = 1/4)")
    root = cmath.sqrt(disc)
    r1 = (1 + root) / 2
    r2 = (1 - root) / 2
    ray = trace_ray(pmap, Fraction(0), g_stop=2.0**-44)
    if not ray.landed:
        # deep trace still converging: take the last point as proxy
        land = complex(ray.points[-1])
    else:
        land = ray.landing_point
    beta, alpha = (r1, r2) if abs(land - r1) <= abs(land - r2) else (r2, r1)
    # polish with one Newton step on f(z) - z for clean residuals
    for _ in range(3):
        beta = beta - (pmap(beta) - beta) / (pmap.derivative(beta) - 1)
        alpha = alpha - (pmap(alpha) - alpha) / (pmap.derivative(alpha) - 1)
    am = pmap.derivative(alpha)
    bm = pmap.derivative(beta)
    return FixedPointPair(alpha, beta, am, bm, abs(am) > 1 and abs(bm) > 1)


# ---------------------------------------------------------------------------
# Ray cycles at the alpha fixed point
# ---------------------------------------------------------------------------


def rotation_cycle(p: int, q: int) -> list[Fraction]:
    """The unique angle cycle of period q under doubling with rotation number p/q.

    Binary digits follow the Sturmian rule b_k = [frac(k p / q) >= 1 - p/q].
    """
    if math.gcd(p, q) != 1 or not 0 < p < q:
        raise ValueError("need 0 < p < q coprime")
    num = 0
    for k in range(1, q + 1):
        num = num * 2 + (1 if (k * p) % q >= q - p else 0)
    t = Fraction(num, 2**q - 1)
    orbit = sorted((t * 2**j) % 1 for j in range(q))
    return orbit


def alpha_ray_cycle(pmap: PolynomialMap, *, max_period: int = 20,
                    land_tol: float = 1e-6) -> tuple[int, list[Fraction]]:
    """Find the cycle of ray angles landing at alpha.

    Candidates are the rotation cycles p/q in increasing q; each is confirmed
    by tracing all q rays and checking they land at alpha.
    """
    fp = fixed_points(pmap)
    alpha = fp.alpha
    if abs(fp.alpha_multiplier) <= 1:
        raise CycleNotFound(max_period)
    for q in range(2, max_period + 1):
        for p in range(1, q):
            if math.gcd(p, q) != 1:
                continue
            angles = rotation_cycle(p, q)
            try:
                probe = trace_ray(pmap, angles[0], g_stop=2.0**-44)
            except (RayNearCriticalValue, TraceDiverged):
                continue
            if not (probe.landed and abs(probe.landing_point - alpha) < land_tol):
                continue
            ok = True
            for t in angles[1:]:
                ray = trace_ray(pmap, t, g_stop=2.0**-44)
                if not (ray.landed and abs(ray.landing_point - alpha) < land_tol):
                    ok = False
                    break
            if ok:
                return q, angles
    raise CycleNotFound(max_period)
