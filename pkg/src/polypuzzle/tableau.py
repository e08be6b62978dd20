"""Tableau combinatorics for orbits in a puzzle.

A tableau records, for each orbit point z_j (column) and each depth d (row),
whether the annulus A_d(z_j) is critical, semi-critical or off-critical.
Every column is determined by its semi-critical depth scd(z_j): the largest d
with P_d(z_j) = P_d(0), or -1 if there is none.  Entries:

    d < scd  -> critical,   d == scd -> semi-critical,   d > scd -> off.

Columns that stay critical through the computed depth are stored as
scd = depth + 1 with a ``truncated`` flag (their true scd may be larger);
INFINITE marks columns known to be critical at all depths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

INFINITE = 10**9

CRITICAL = "critical"
SEMI_CRITICAL = "semi_critical"
OFF_CRITICAL = "off_critical"
UNKNOWN = "unknown"

_GLYPH = {CRITICAL: "|", SEMI_CRITICAL: "‖", OFF_CRITICAL: ".", UNKNOWN: "?"}


@dataclass(frozen=True)
class Tableau:
    width: int
    depth: int
    scd: tuple[int, ...]
    truncated: tuple[bool, ...]
    alpha_hit: Optional[tuple[int, int]] = None  # (column, steps) when orbit hit alpha

    def __post_init__(self):
        assert len(self.scd) == self.width and len(self.truncated) == self.width

    def entry(self, d: int, j: int) -> str:
        """Annulus class at depth d in column j; UNKNOWN past a truncation."""
        s = self.scd[j]
        if self.truncated[j] and d >= s:
            return UNKNOWN
        if d < s:
            return CRITICAL
        if d == s:
            return SEMI_CRITICAL
        return OFF_CRITICAL

    def piece_equal(self, d: int, j: int) -> Optional[bool]:
        """Whether P_d(z_j) = P_d(0); None if undetermined by truncation."""
        s = self.scd[j]
        if self.truncated[j] and d > s:
            return None
        return d <= s

    def exact(self, j: int) -> bool:
        return not self.truncated[j]

    def column_known_at(self, d: int, j: int) -> bool:
        return not (self.truncated[j] and d >= self.scd[j])

    def render(self, depth: Optional[int] = None, width: Optional[int] = None) -> str:
        depth = self.depth if depth is None else depth
        width = self.width if width is None else min(width, self.width)
        lines = []
        for d in range(depth + 1):
            lines.append(" ".join(_GLYPH[self.entry(d, j)] for j in range(width)))
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "depth": self.depth,
            "scd": [None if self.truncated[j] else int(self.scd[j]) for j in range(self.width)],
            "truncated": [bool(t) for t in self.truncated],
            "scd_floor": [int(s) for s in self.scd],
        }


def from_scd(scd: Sequence[int], depth: int, truncated: Optional[Sequence[bool]] = None) -> Tableau:
    scd = tuple(int(s) for s in scd)
    if truncated is None:
        truncated = tuple(False for _ in scd)
    return Tableau(len(scd), depth, scd, tuple(truncated))


def with_scd(t: Tableau, column: int, value: int) -> Tableau:
    """Copy of t with one column's scd replaced (used for what-if analysis)."""
    scd = list(t.scd)
    trunc = list(t.truncated)
    scd[column] = value
    trunc[column] = False
    return Tableau(t.width, t.depth, tuple(scd), tuple(trunc), t.alpha_hit)


# ---------------------------------------------------------------------------
# Construction from orbits
# ---------------------------------------------------------------------------


def tableau_from_orbit(tower, z0: complex, width: int, depth: int,
                       chains=None) -> Tableau:
    """Tableau of the orbit of z0, depths 0..depth.

    Criticality comes from piece chains (P_d(z_j) = P_d(0) iff 0 lies in the
    chain piece), computed lazily; a column whose orbit reaches alpha
    truncates the tableau there and is reported in ``alpha_hit``.
    """
    from .errors import OnBoundary, OrbitHitsAlpha
    from .puzzle import ALPHA_ORBIT_TOL, ChainCache

    cache = chains if chains is not None else ChainCache(tower)
    pmap = tower.pmap
    need = width + depth + 2
    orbit = [complex(z0)]
    for _ in range(need):
        orbit.append(pmap(orbit[-1]))
    alpha = tower.fixed.alpha
    hit = None
    for i, w in enumerate(orbit):
        if abs(w - alpha) < ALPHA_ORBIT_TOL:
            hit = i
            break
    eff_width = width if hit is None else min(width, hit)
    scd = []
    trunc = []
    for j in range(eff_width):
        cap = depth + 1
        if hit is not None:
            cap = min(cap, hit - j - 1)
        try:
            s = cache.scd(orbit[j], cap)
        except (OnBoundary, OrbitHitsAlpha):
            s = -2  # undetermined column; treat as truncated at -1
        if s == -2:
            scd.append(-1)
            trunc.append(True)
        else:
            scd.append(s)
            trunc.append(s == depth + 1)
    alpha_hit = (eff_width, hit - eff_width) if hit is not None else None
    return Tableau(eff_width, depth, tuple(scd), tuple(trunc), alpha_hit)


# ---------------------------------------------------------------------------
# The three rules plus the further column rules, as a validator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RuleViolation:
    rule: str
    column: int
    depth: int
    expected: object
    actual: object
    detail: str = ""

    def __str__(self):
        return (f"[{self.rule}] column {self.column}, depth {self.depth}: "
                f"expected {self.expected}, got {self.actual} {self.detail}")


def _columns_match_above(t_other: Tableau, m: int, t_crit: Tableau, i: int, cut: int) -> Optional[bool]:
    """Do column m of t_other and column i of t_crit agree strictly above depth cut?

    Columns agree above ``cut`` iff their scds are equal or both >= cut.
    Truncated scds are lower bounds, so the answer may be undetermined (None).
    """
    if cut <= 0:
        return True
    a, a_tr = t_other.scd[m], t_other.truncated[m]
    b, b_tr = t_crit.scd[i], t_crit.truncated[i]
    if not a_tr and not b_tr:
        return a == b or min(a, b) >= cut
    if a_tr and b_tr:
        return True if min(a, b) >= cut else None
    if b_tr:
        a, a_tr, b, b_tr = b, b_tr, a, a_tr  # make a the truncated one
    # a is a lower bound, b exact
    if a >= cut:
        return True if b >= cut else None if a <= b else False
    # a < cut: true scd of the truncated column may be anything >= a
    if b < a:
        return False  # true a' >= a > b and min < cut
    return None


def validate(critical: Tableau, other: Tableau, q: int,
             *, genealogy_source: Optional["Genealogy"] = None,
             check_columns: bool = True) -> list[RuleViolation]:
    """Check the tableau rules of ``other`` against the critical tableau.

    Returns one violation per failed check; an empty list means consistent.
    Cells that truncation leaves undetermined are skipped.  The column rules
    (forbidden scd values, off-critical runs, the q-window) presuppose a
    cycle of q rays and are skipped with ``check_columns=False`` (grid
    puzzles reuse only the three copying rules).
    """
    out: list[RuleViolation] = []
    out.extend(_check_rule1(other))
    out.extend(_check_rule2(critical, other))
    gen = genealogy_source if genealogy_source is not None else genealogy(critical)
    out.extend(_check_rule3(gen, other))
    if check_columns:
        out.extend(_check_column_rules(other, q))
    return out


def _check_rule1(t: Tableau) -> list[RuleViolation]:
    out = []
    for j in range(t.width):
        s = t.scd[j]
        if s < -1:
            out.append(RuleViolation("rule1", j, 0, ">= -1", s, "invalid scd"))
    return out


def _check_rule2(critical: Tableau, other: Tableau) -> list[RuleViolation]:
    out = []
    for m in range(other.width):
        s = other.scd[m]
        if s < 0:
            continue
        # the deepest critical/semi-critical cell of the column subsumes the rest
        d = s if not other.truncated[m] else s - 1
        if d < 0:
            continue
        for i in range(1, min(d, critical.width - 1, other.width - 1 - m) + 1):
            cut = d - i
            ok = _columns_match_above(other, m + i, critical, i, cut)
            if ok is False:
                forced = critical.scd[i] if critical.scd[i] < cut else f">={cut}"
                out.append(RuleViolation(
                    "rule2", m + i, cut, forced, other.scd[m + i],
                    f"(copy of column {i} above depth {cut}, from cell ({d},{m}))"))
    return out


def _check_rule3(gen: "Genealogy", other: Tableau) -> list[RuleViolation]:
    out = []
    for parent, kids in gen.children.items():
        for d in kids:
            k = d - parent
            for m in range(other.width):
                if other.truncated[m]:
                    continue
                if other.scd[m] == d and m + k < other.width:
                    if other.truncated[m + k]:
                        continue
                    if other.scd[m + k] != d - k:
                        out.append(RuleViolation(
                            "rule3", m + k, d - k, d - k, other.scd[m + k],
                            f"(child {d} of {parent}, semi-critical at ({d},{m}))"))
    return out


def _check_column_rules(t: Tableau, q: int) -> list[RuleViolation]:
    out = []
    for j in range(t.width):
        if t.truncated[j]:
            continue
        s = t.scd[j]
        if 1 <= s <= q - 1:
            out.append(RuleViolation("column-values", j, s,
                                     f"scd not in 1..{q - 1}", s))
    run = 0
    for j in range(t.width):
        if not t.truncated[j] and t.scd[j] == -1:
            run += 1
            if run > q - 1:
                out.append(RuleViolation("column-runs", j, -1,
                                         f"<= {q - 1} consecutive off columns", run))
                run = -10**9  # report once per run
        else:
            run = 0
    for m in range(t.width):
        if t.truncated[m] or t.scd[m] < 0:
            continue
        js = [m + i for i in range(1, q) if m + i < t.width]
        if len(js) < q - 1 or any(t.truncated[j] for j in js):
            continue
        all_off = all(t.scd[j] == -1 for j in js)
        if (t.scd[m] >= q) != all_off:
            out.append(RuleViolation(
                "column-window", m, t.scd[m],
                "scd >= q iff next q-1 columns are off", [t.scd[j] for j in js]))
    return out


# ---------------------------------------------------------------------------
# Genealogy
# ---------------------------------------------------------------------------


@dataclass
class Genealogy:
    children: dict[int, list[int]]
    excellent: dict[int, bool]
    tau: dict[int, int]
    undetermined: set[int] = field(default_factory=set)

    def parent_of(self, d: int) -> Optional[int]:
        for parent, kids in self.children.items():
            if d in kids:
                return parent
        return None


def tau_function(t: Tableau, d: int) -> Optional[int]:
    """Largest tau < d with f^(d-tau) mapping P_d(0) onto P_tau(0).

    tau(d) = d - k for the smallest k >= 1 with scd(z_k) >= d - k; returns
    None when truncation leaves the value undetermined.
    """
    for k in range(1, min(d, t.width - 1) + 1):
        eq = t.piece_equal(d - k, k)
        if eq is None:
            return None
        if eq:
            return d - k
    if t.width - 1 < d:
        return None  # columns beyond width could still qualify
    return -1


def is_child(t: Tableau, d: int, parent: int) -> Optional[bool]:
    """Is A_d(0) a child of A_parent(0)?  (unramified two-fold covering test)

    Equivalent characterization: parent = tau(d) = tau(d+1) - 1 >= 0.
    """
    td = tau_function(t, d)
    if td is None:
        return None
    if td != parent or parent < 0:
        return False
    td1 = tau_function(t, d + 1)
    if td1 is None:
        return None
    return td1 == parent + 1


def first_child(t: Tableau, d: int) -> Optional[int]:
    """March right at depth d to the first critical column k; child at d + k."""
    for k in range(1, t.width):
        e = t.entry(d, k)
        if e == UNKNOWN:
            return None
        if e == CRITICAL:
            return d + k
    return None


def genealogy(t: Tableau, max_parent: Optional[int] = None) -> Genealogy:
    """Children, excellence and tau for the critical tableau ``t``.

    Children of depth n are found by scanning rows: d+k is a child of d iff
    column k is critical at depth d and the diagonal cells between are
    off-critical; this agrees with the tau characterization.  Verdicts that
    truncation leaves open are collected in ``undetermined``.
    """
    top = t.depth if max_parent is None else max_parent
    children: dict[int, list[int]] = {}
    undet: set[int] = set()
    for n in range(top + 1):
        kids = []
        for k in range(1, t.width):
            cell = t.entry(n, k)
            if cell == UNKNOWN:
                undet.add(n)
                break
            if cell != CRITICAL:
                continue
            clean = True
            for i in range(1, k):
                e = t.entry(n + k - i, i)
                if e == UNKNOWN:
                    clean = None
                    break
                if e != OFF_CRITICAL:
                    clean = False
                    break
            if clean is None:
                undet.add(n)
                continue
            if clean:
                kids.append(n + k)
        children[n] = kids
    excellent = {}
    for n in range(top + 1):
        semis = [j for j in range(1, t.width)
                 if not t.truncated[j] and t.scd[j] == n]
        hidden = [j for j in range(1, t.width)
                  if t.truncated[j] and t.scd[j] <= n]
        excellent[n] = len(semis) == 0
        if not semis and hidden:
            undet.add(n)
    tau = {}
    for d in range(1, top + 2):
        v = tau_function(t, d)
        if v is not None:
            tau[d] = v
    return Genealogy(children, excellent, tau, undet)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    kind: str  # 'periodic' | 'recurrent_nonperiodic' | 'nonrecurrent'
    period: Optional[int]
    depth_used: int
    persistent: Optional[bool] = None
    tau_floor: Optional[int] = None


def classify(t: Tableau) -> Classification:
    """Depth-bounded recurrence classification of a critical tableau.

    Periodicity needs a column critical through the whole computed depth with
    index <= depth/2 (two periods of evidence); recurrence needs critical
    columns reaching depth >= depth/2.
    """
    D = t.depth
    period = None
    for p in range(1, min(t.width, D // 2 + 1)):
        if t.truncated[p] and t.scd[p] >= D + 1:
            period = p
            break
    if period is not None:
        return Classification("periodic", period, D)
    deepest = max((t.scd[j] for j in range(1, t.width)), default=-1)
    if deepest >= D / 2:
        persistent = None
        tau_floor = None
        taus = {d: tau_function(t, d) for d in range(max(1, D - 10), D + 1)}
        vals = [v for v in taus.values() if v is not None]
        if vals:
            tau_floor = min(vals)
            mid = tau_function(t, max(1, D // 2))
            if mid is not None:
                persistent = tau_floor > mid
        return Classification("recurrent_nonperiodic", None, D, persistent, tau_floor)
    return Classification("nonrecurrent", None, D)


# ---------------------------------------------------------------------------
# The Fibonacci tableau
# ---------------------------------------------------------------------------


def _fibonacci_numbers(limit: int) -> list[int]:
    fib = [1, 2]
    while fib[-1] < limit:
        fib.append(fib[-1] + fib[-2])
    return [u for u in fib if u < limit]


def fibonacci_tableau(depth: int, width: int) -> Tableau:
    """The tableau whose closest recurrences happen at Fibonacci moments.

    Column u_n carries semi-critical depth u_{n+1} - 3; every other column is
    forced by the copying rule, and the generator checks that nothing is left
    undetermined or inconsistent.
    """
    if depth < 1 or width < 1:
        raise ValueError("need depth, width >= 1")
    fib = [1, 2]
    while fib[-1] < width:
        fib.append(fib[-1] + fib[-2])
    scd: dict[int, int] = {0: INFINITE}
    for i, u in enumerate(fib):
        if u < width:
            nxt = fib[i + 1] if i + 1 < len(fib) else fib[i] + fib[i - 1]
            scd[u] = nxt - 3
    # forced values: copies of critical columns strictly above each diagonal
    specified = sorted((m, s) for m, s in scd.items() if m > 0)
    for m, s in specified:
        for i in range(1, min(s, width - 1 - m) + 1):
            if i not in scd:
                continue
            b = scd[i]
            cut = s - i
            tgt = m + i
            if b < cut:
                if tgt in scd and scd[tgt] != b:
                    raise AssertionError(f"inconsistent forcing at column {tgt}")
                scd.setdefault(tgt, b)
    missing = [j for j in range(width) if j not in scd]
    if missing:
        raise AssertionError(f"rules left columns undetermined: {missing}")
    values = tuple(scd[j] for j in range(width))
    truncated = tuple(False for _ in range(width))
    return Tableau(width, depth, values, truncated)
