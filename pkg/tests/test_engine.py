"""Tree simulation: structure, reproducibility and exit-law statistics."""

import math
from fractions import Fraction

import numpy as np
import pytest

from branchflow.engine import (Domain, EngineConfig, ExitMeasure,
                               SPACE_BOUNDARY, TIME_BOUNDARY,
                               expected_population, simulate_tree, tree_stream)
from branchflow.errors import DerivOrderUnsupported, PopulationExceeded
from branchflow.rules import (BranchingRule, Intensity, MarkTransition,
                              Offspring, built_in_rule, diffusion_rule,
                              kpp_rule, rule_from_power, sign_flip_rule)

F = Fraction


def config(rule, beta=1.0, horizon=1.0, interval=None, **kw):
    return EngineConfig(rule=rule, beta=beta,
                        domain=Domain(horizon=horizon, interval=interval), **kw)


def run_many(cfg, n, x0=0.0, seed=0):
    return [simulate_tree(x0, cfg, tree_stream(seed, i)) for i in range(n)]


# ------------------------------------------------------------ reproducibility


def test_same_stream_replays_identically():
    cfg = config(kpp_rule(), horizon=2.0)
    a = simulate_tree(0.0, cfg, tree_stream(42, 7))
    b = simulate_tree(0.0, cfg, tree_stream(42, 7))
    assert a.event_count == b.event_count
    assert a.peak_population == b.peak_population
    assert [(atom.position, atom.sign, atom.deriv_order, atom.exit_time)
            for atom in a.atoms] == \
           [(atom.position, atom.sign, atom.deriv_order, atom.exit_time)
            for atom in b.atoms]


def test_distinct_indices_give_distinct_trees():
    cfg = config(kpp_rule(), horizon=1.0)
    base = simulate_tree(0.0, cfg, tree_stream(42, 7))
    for stream in (tree_stream(42, 8), tree_stream(43, 7),
                   tree_stream(42, 7, point_index=1),
                   tree_stream(42, 7, root_index=1)):
        other = simulate_tree(0.0, cfg, stream)
        assert [a.position for a in other.atoms] != \
               [a.position for a in base.atoms]


def test_tree_stream_rejects_out_of_range_indices():
    with pytest.raises(ValueError):
        tree_stream(0, 1 << 32)
    with pytest.raises(ValueError):
        tree_stream(0, 0, point_index=1 << 30)
    with pytest.raises(ValueError):
        tree_stream(0, 0, root_index=4)


# ----------------------------------------------------------------- structure


def test_binary_tree_atom_count_is_events_plus_one():
    cfg = config(kpp_rule(), horizon=1.5)
    for measure in run_many(cfg, 200):
        assert measure.atom_count == measure.event_count + 1
        assert all(a.sign == 1 and a.deriv_order == 0 for a in measure.atoms)
        assert all(a.exit_kind == TIME_BOUNDARY for a in measure.atoms)
        assert all(a.exit_time == 1.5 for a in measure.atoms)
        assert measure.peak_population >= 1


def test_diffusion_rule_never_branches():
    cfg = config(diffusion_rule(), horizon=0.7)
    for measure in run_many(cfg, 50, x0=0.3):
        assert measure.atom_count == 1
        assert measure.event_count == 0
        assert measure.peak_population == 1
        assert measure.atoms[0].exit_time == 0.7


def test_sign_marks_multiply_along_lineages():
    cfg = config(sign_flip_rule(), beta=0.5, horizon=0.3)
    signs = set()
    for measure in run_many(cfg, 200):
        signs.update(a.sign for a in measure.atoms)
        for a in measure.atoms:
            assert a.sign in (1, -1)
    assert signs == {1, -1}     # flips at rate 9/10 * 10 surely appear


def test_dead_tree_when_all_lineages_die():
    pure_death = BranchingRule((MarkTransition(F(1), ()),), Intensity(2, 0))
    cfg = config(pure_death, horizon=1.0)
    measures = run_many(cfg, 400)
    dead = sum(m.is_dead for m in measures)
    # P(first event before t=1) = 1 - e^-2
    want = 1 - math.exp(-2.0)
    se = math.sqrt(want * (1 - want) / 400)
    assert abs(dead / 400 - want) <= 4 * se
    assert all(m.atom_count == 0 for m in measures if m.is_dead)


# ---------------------------------------------------------------- exit laws


def test_time_boundary_positions_are_gaussian():
    cfg = config(diffusion_rule(), horizon=0.5)
    xs = np.array([m.atoms[0].position
                   for m in run_many(cfg, 4000, x0=1.0)])
    assert abs(xs.mean() - 1.0) <= 4 * math.sqrt(0.5 / 4000)
    assert abs(xs.var() - 0.5) <= 4 * 0.5 * math.sqrt(2.0 / 4000)


def test_population_mean_tracks_branching_mean():
    cfg = config(kpp_rule(), horizon=1.0)
    counts = np.array([m.atom_count for m in run_many(cfg, 3000)])
    want = expected_population(kpp_rule(), 1.0, 1.0)
    assert want == pytest.approx(math.e)
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - want) <= 3.5 * se


def test_critical_rule_keeps_unit_mean_population():
    rule = rule_from_power(2)
    cfg = config(rule, beta=0.5, horizon=0.5)
    assert expected_population(rule, 0.5, 0.5) == pytest.approx(1.0)
    counts = np.array([m.atom_count for m in run_many(cfg, 4000)])
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - 1.0) <= 3.5 * se


def interval_survival(t):
    """P(Brownian motion from 0 stays in (-1,1) up to t), by eigenexpansion."""
    total = 0.0
    for n in range(1, 40, 2):
        total += (4 / (n * math.pi) * math.sin(n * math.pi / 2)
                  * math.exp(-n ** 2 * math.pi ** 2 * t / 8))
    return total


def test_bounded_domain_survival_matches_eigenexpansion():
    cfg = config(diffusion_rule(), horizon=0.5, interval=(-1.0, 1.0),
                 boundary_step=0.005)
    measures = run_many(cfg, 20_000)
    kinds = [m.atoms[0].exit_kind for m in measures]
    alive = kinds.count(TIME_BOUNDARY) / len(kinds)
    want = interval_survival(0.5)
    se = math.sqrt(want * (1 - want) / len(kinds))
    # statistical error plus the O(boundary_step) bridge bias
    assert abs(alive - want) <= 4 * se + 0.01


def test_space_exits_land_on_the_walls():
    cfg = config(diffusion_rule(), horizon=0.5, interval=(-0.4, 0.4))
    seen = set()
    for m in run_many(cfg, 300, seed=3):
        atom = m.atoms[0]
        if atom.exit_kind == SPACE_BOUNDARY:
            assert atom.position in (-0.4, 0.4)
            assert 0.0 < atom.exit_time <= 0.5
            seen.add(atom.position)
    assert seen == {-0.4, 0.4}


def test_bounded_branching_keeps_atoms_inside_closure():
    cfg = config(kpp_rule(), horizon=1.0, interval=(-1.0, 1.0))
    for m in run_many(cfg, 200, seed=5):
        for atom in m.atoms:
            assert -1.0 <= atom.position <= 1.0
            if atom.exit_kind == TIME_BOUNDARY:
                assert atom.exit_time == 1.0
            else:
                assert abs(atom.position) == 1.0


# ---------------------------------------------------------------- guards


def test_population_cap_raises():
    cfg = config(kpp_rule(), horizon=6.0, max_population=8)
    with pytest.raises(PopulationExceeded) as exc:
        for i in range(50):
            simulate_tree(0.0, cfg, tree_stream(0, i))
    assert exc.value.cap == 8
    assert 0.0 < exc.value.time < 6.0


def test_deriv_order_cap_raises():
    always_up = BranchingRule((MarkTransition(F(1), (Offspring(1, 1),)),),
                              Intensity(4, 0))
    cfg = config(always_up, horizon=5.0, max_deriv_order=0)
    with pytest.raises(DerivOrderUnsupported) as exc:
        for i in range(50):
            simulate_tree(0.0, cfg, tree_stream(0, i))
    assert exc.value.order == 1
    assert exc.value.maximum == 0


def test_deriv_orders_accumulate_up_to_cap():
    always_up = BranchingRule((MarkTransition(F(1), (Offspring(1, 1),)),),
                              Intensity(4, 0))
    cfg = config(always_up, horizon=1.0, max_deriv_order=64)
    orders = set()
    for m in run_many(cfg, 100, seed=1):
        orders.update(a.deriv_order for a in m.atoms)
    assert max(orders) >= 2        # rate 4 over unit time climbs past two
    assert min(orders) >= 0


def test_config_validation():
    with pytest.raises(ValueError):
        config(kpp_rule(), beta=0.0)
    with pytest.raises(ValueError):
        config(kpp_rule(), max_population=0)
    with pytest.raises(ValueError):
        Domain(horizon=1.0, interval=(1.0, -1.0))
    with pytest.raises(ValueError):
        Domain(horizon=-1.0)


def test_expected_population_formula():
    rule = kpp_rule()
    assert expected_population(rule, 1.0, 0.0) == 1.0
    assert expected_population(rule, 1.0, 2.0) == pytest.approx(math.exp(2.0))
    flip = sign_flip_rule()   # mean offspring 2/10 + 9/10 = 11/10, k = 10
    assert expected_population(flip, 0.5, 0.2) == pytest.approx(
        math.exp(10.0 * 0.1 * 0.2))
