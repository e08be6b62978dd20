import pytest

from polypuzzle.tableau import (
    CRITICAL,
    INFINITE,
    OFF_CRITICAL,
    SEMI_CRITICAL,
    UNKNOWN,
    Tableau,
    classify,
    fibonacci_tableau,
    first_child,
    from_scd,
    genealogy,
    is_child,
    tableau_from_orbit,
    tau_function,
    validate,
    with_scd,
)


class TestEntries:
    def test_trichotomy(self):
        t = from_scd([INFINITE, -1, 2], depth=4)
        assert t.entry(0, 1) == OFF_CRITICAL
        assert t.entry(0, 2) == CRITICAL
        assert t.entry(1, 2) == CRITICAL
        assert t.entry(2, 2) == SEMI_CRITICAL
        assert t.entry(3, 2) == OFF_CRITICAL
        assert t.entry(4, 0) == CRITICAL

    def test_truncated_unknown(self):
        t = Tableau(2, 3, (4, 4), (False, True))
        assert t.entry(3, 0) == CRITICAL
        assert t.entry(4, 0) == SEMI_CRITICAL  # exact column: semi right at scd
        assert t.entry(4, 1) == UNKNOWN        # truncated column: unknown there
        assert t.entry(3, 1) == CRITICAL

    def test_render_glyphs(self):
        t = from_scd([INFINITE, -1, 0], depth=1)
        out = t.render()
        assert "|" in out and "." in out and "‖" in out


class TestFibonacci:
    def test_specified_columns(self):
        t = fibonacci_tableau(18, 56)
        assert t.scd[2] == 0
        assert t.scd[5] == 5
        assert t.scd[8] == 10
        assert t.scd[13] == 18
        assert t.scd[21] == 31
        assert t.scd[1] == -1

    def test_self_validation(self):
        t = fibonacci_tableau(18, 56)
        assert validate(t, t, 2) == []

    def test_records_at_fibonacci_columns(self):
        # closest recurrences: strictly growing scd exactly at 2,3,5,8,13,...
        t = fibonacci_tableau(18, 56)
        best = -1
        records = []
        for j in range(1, t.width):
            if t.scd[j] > best:
                best = t.scd[j]
                records.append(j)
        assert records == [2, 3, 5, 8, 13, 21, 34, 55]

    def test_small_widths(self):
        t = fibonacci_tableau(5, 4)
        assert t.width == 4
        assert t.scd[0] == INFINITE

    def test_depth_width_validation(self):
        with pytest.raises(ValueError):
            fibonacci_tableau(0, 10)


@pytest.fixture(scope="module")
def fib():
    return fibonacci_tableau(18, 56)


@pytest.fixture(scope="module")
def gen(fib):
    return genealogy(fib)


class TestGenealogy:
    def test_excellent_with_two_children(self, gen):
        for d in (1, 3, 4, 6, 7, 8, 9):
            assert gen.excellent[d], d
            assert len(gen.children[d]) == 2, d

    def test_not_excellent_single_child(self, gen, fib):
        for d in (0, 2, 5, 10, 18):
            assert not gen.excellent[d], d
            assert len(gen.children[d]) == 1, d
            child = gen.children[d][0]
            # the only child is excellent (its row holds no semi-critical cell)
            assert not any(fib.scd[j] == child for j in range(1, fib.width))

    def test_descent_chain(self, gen):
        assert gen.children[0] == [3]
        assert 8 in gen.children[3]
        assert 11 in gen.children[3]
        assert gen.children[8] == [16, 21]

    def test_tau_growth_bound(self, fib):
        for d in range(1, 40):
            td = tau_function(fib, d)
            td1 = tau_function(fib, d + 1)
            assert td1 <= td + 1

    def test_children_match_tau_characterization(self, fib, gen):
        for parent, kids in gen.children.items():
            for d in range(parent + 1, min(parent + 25, 45)):
                expected = is_child(fib, d, parent)
                if expected is None:
                    continue
                assert (d in kids) == expected, (parent, d)

    def test_first_child_is_smallest(self, fib, gen):
        for d in range(0, 12):
            if gen.children[d]:
                assert first_child(fib, d) == min(gen.children[d])

    def test_children_of_excellent_are_excellent(self, gen):
        for d in (1, 3, 4, 6, 7, 8, 9):
            for ch in gen.children[d]:
                if ch in gen.excellent:
                    assert gen.excellent[ch], (d, ch)


class TestRules:
    @pytest.mark.parametrize("newval,forced,rule", [
        (3, 0, "rule3"),
        (4, 1, "rule3"),
        (6, 2, "rule2"),
        (8, 2, "rule2"),
    ])
    def test_column5_mutations_force_column8(self, fib, newval, forced, rule):
        mutated = with_scd(fib, 5, newval)
        violations = validate(mutated, mutated, 2)
        assert violations
        col8 = [v for v in violations if v.column == 8 and v.rule == rule]
        assert col8, violations
        assert col8[0].expected == forced
        assert col8[0].actual == 10

    def test_off_critical_run_rule(self):
        t = from_scd([INFINITE, -1, -1, -1, -1, -1, 3], depth=6)
        violations = validate(t, t, 2)
        assert any(v.rule == "column-runs" for v in violations)

    def test_forbidden_scd_values(self):
        t = from_scd([INFINITE, 1], depth=6)
        violations = validate(t, t, 2)
        assert any(v.rule == "column-values" for v in violations)
        t3 = from_scd([INFINITE, 2], depth=6)
        violations = validate(t3, t3, 3)
        assert any(v.rule == "column-values" for v in violations)

    def test_window_rule_both_directions(self):
        # scd(z_m) >= q forces the next q-1 columns off, and conversely
        good = from_scd([INFINITE, -1, 0, 2, -1, 0], depth=6)
        assert not [v for v in validate(good, good, 2)
                    if v.rule == "column-window"]
        bad = from_scd([INFINITE, -1, 2, 0], depth=6)  # scd=2 not followed by -1
        assert any(v.rule == "column-window" for v in validate(bad, bad, 2))

    def test_rule1_invalid_scd(self):
        t = Tableau(2, 4, (INFINITE, -3), (False, False))
        assert any(v.rule == "rule1" for v in validate(t, t, 2))

    def test_column_rules_can_be_skipped(self):
        # grid puzzles reuse rules 1-3 but not the ray-count column rules
        t = from_scd([INFINITE, 0, 0, 0], depth=4)
        assert validate(t, t, 2, check_columns=False) == []


class TestClassify:
    def test_fibonacci_recurrent(self):
        cls = classify(fibonacci_tableau(18, 56))
        assert cls.kind == "recurrent_nonperiodic"

    def test_fibonacci_persistence_proxy_at_depth(self):
        # the lim-inf proxy needs room: tau dips at children of small depths
        # (tau(11) = 3) keep it quiet at depth 18, and it fires by depth 40
        cls = classify(fibonacci_tableau(40, 130))
        assert cls.kind == "recurrent_nonperiodic"
        assert cls.persistent is True
        assert cls.tau_floor == 11

    def test_periodic(self):
        t = Tableau(6, 10, (11, -1, 0, 11, -1, 0), (True, False, False, True, False, False))
        cls = classify(t)
        assert cls.kind == "periodic"
        assert cls.period == 3

    def test_nonrecurrent(self):
        t = from_scd([INFINITE, -1, 0, 2, -1, 0, 2], depth=12)
        assert classify(t).kind == "nonrecurrent"


class TestFromOrbit:
    def test_critical_column_always_critical(self, tower_16, cache_16, tab_16):
        assert tab_16.truncated[0]
        assert tab_16.scd[0] == tab_16.depth + 1

    def test_c16_scd_values(self, tab_16):
        # measured chain: column 2 semi at 0, column 3 semi at 2
        assert tab_16.scd[1] == -1
        assert tab_16.scd[2] == 0
        assert tab_16.scd[3] == 2

    def test_figure4_child_structure(self, tab_16):
        gen = genealogy(tab_16)
        assert 3 in gen.children[0]
        for d in (4, 6, 8, 10):
            assert d in gen.children[1], d

    def test_rule1_holds_via_monotone_containment(self, tower_i, cache_i):
        # derived tableaux cannot violate the single-semi-depth structure
        t = tableau_from_orbit(tower_i, 0.3 + 0.1j, width=6, depth=6, chains=cache_i)
        assert validate(tableau_from_orbit(tower_i, 0.0, 8, 6, chains=cache_i),
                        t, tower_i.q) == []

    def test_alpha_hit_truncates(self, tower_m1):
        t = tableau_from_orbit(tower_m1, -tower_m1.fixed.alpha, width=6, depth=4)
        assert t.alpha_hit is not None
        assert t.width <= 1

    def test_second_rule_against_critical(self, tower_16, cache_16, tab_16):
        t = tableau_from_orbit(tower_16, 1.0, width=12, depth=10, chains=cache_16)
        assert validate(tab_16, t, 2) == []
