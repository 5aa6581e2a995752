"""Event-driven simulation of branching diffusions with signed, marked particles.

A tree starts as a single particle at a given position carrying a sign (+1 or
-1) and a derivative order (0 for ordinary particles).  Each particle diffuses
as a standard Brownian motion with generator (1/2) d^2/dx^2 and branches after
an exponential lifetime with intensity k_beta = c * beta**(-gamma).  At a
branching event one transition of the rule is drawn (probabilities given by
the transition weights); the particle dies and its offspring start at the
parent position.  Offspring signs are the parent sign multiplied by the
offspring sign mark, and derivative orders add.

Particles alive at the time horizon are frozen and recorded as atoms of the
exit measure.  On a bounded interval, particles reaching a spatial wall are
absorbed there and recorded as boundary atoms instead.

The traversal is chronological: pending particles live in a priority queue
keyed by their scheduled branching time, so the live population count is exact
at every event on an unbounded domain.  (On a bounded domain a particle's
lateral exit is only discovered when it is popped, so the running count can
briefly overstate the true population; the population cap is therefore
conservative there.)  Each particle consumes one exponential draw at birth,
one Gaussian draw per diffusion segment and one uniform draw per branching
event, so a tree's draw sequence is a deterministic function of its stream.

Streams are counter-based (Philox) and keyed by (seed, point, root, tree), so
any tree of any run can be re-simulated in isolation and results do not depend
on scheduling or on the number of worker threads.
"""

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import DerivOrderUnsupported, PopulationExceeded
from .rules import BranchingRule

TIME_BOUNDARY = "time"
SPACE_BOUNDARY = "space"


@dataclass(frozen=True)
class Domain:
    """Space-time domain Q = interval x [0, horizon).

    ``interval=None`` means the whole real line: the only exit is through the
    time boundary.  A bounded ``interval=(a, b)`` adds absorbing spatial walls.
    """

    horizon: float
    interval: tuple = None

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.interval is not None:
            a, b = self.interval
            if not a < b:
                raise ValueError("interval must satisfy a < b")

    @property
    def bounded(self):
        return self.interval is not None

    def contains(self, x):
        if self.interval is None:
            return True
        a, b = self.interval
        return a < x < b


class ExitAtom:
    """One frozen particle on the domain boundary."""

    __slots__ = ("position", "sign", "deriv_order", "exit_time", "exit_kind")

    def __init__(self, position, sign, deriv_order, exit_time, exit_kind):
        self.position = position
        self.sign = sign
        self.deriv_order = deriv_order
        self.exit_time = exit_time
        self.exit_kind = exit_kind

    def __repr__(self):
        return ("ExitAtom(x=%.6g, sign=%+d, order=%d, t=%.6g, kind=%s)"
                % (self.position, self.sign, self.deriv_order,
                   self.exit_time, self.exit_kind))


class ExitMeasure:
    """All exit atoms of one tree plus simple tree statistics."""

    __slots__ = ("atoms", "event_count", "peak_population")

    def __init__(self, atoms, event_count, peak_population):
        self.atoms = atoms
        self.event_count = event_count
        self.peak_population = peak_population

    @property
    def atom_count(self):
        return len(self.atoms)

    @property
    def is_dead(self):
        """True when every particle vanished before reaching the boundary."""
        return not self.atoms

    def __repr__(self):
        return ("ExitMeasure(atoms=%d, events=%d, peak=%d)"
                % (len(self.atoms), self.event_count, self.peak_population))


@dataclass(frozen=True)
class EngineConfig:
    """Everything needed to simulate trees of one branching rule.

    ``boundary_step`` is the sub-step used for wall-crossing checks on bounded
    domains (with a Brownian-bridge correction for crossings inside a step).
    ``max_deriv_order`` caps the derivative mark a particle may carry.
    """

    rule: BranchingRule
    beta: float
    domain: Domain
    seed: int = 0
    max_population: int = 1_000_000
    boundary_step: float = 0.01
    max_deriv_order: int = 2

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.max_population < 1:
            raise ValueError("max_population must be at least 1")
        if self.boundary_step <= 0:
            raise ValueError("boundary_step must be positive")

    @property
    def k_beta(self):
        return self.rule.intensity.k_beta(self.beta)


class RuntimeRule:
    """Float tables for fast transition sampling.

    ``cum`` holds cumulative transition probabilities with the last entry
    pinned to 1.0 so a uniform draw always lands in a valid bin.
    """

    __slots__ = ("cum", "offspring")

    def __init__(self, rule):
        total = 0.0
        cum = []
        offspring = []
        for tr in rule.transitions:
            total += float(tr.weight)
            cum.append(total)
            offspring.append(tuple((o.sign, o.dderiv) for o in tr.offspring))
        cum[-1] = 1.0
        self.cum = cum
        self.offspring = tuple(offspring)

    def sample(self, u):
        i = bisect_right(self.cum, u)
        if i >= len(self.cum):
            i = len(self.cum) - 1
        return self.offspring[i]


_MASK64 = (1 << 64) - 1


def tree_stream(seed, tree_index, point_index=0, root_index=0):
    """Independent counter-based random stream for one tree.

    The key packs (point, root, tree) into one 64-bit word next to the user
    seed, so streams never collide across trees, field points or multi-root
    runs of the same experiment.
    """
    if not 0 <= tree_index < (1 << 32):
        raise ValueError("tree_index out of range")
    if not 0 <= point_index < (1 << 30):
        raise ValueError("point_index out of range")
    if not 0 <= root_index < 4:
        raise ValueError("root_index out of range")
    word = (point_index << 34) | (root_index << 32) | tree_index
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, word]))


def simulate_tree(x0, config, rng, root_sign=1, root_deriv=0, runtime=None):
    """Simulate one tree and return its exit measure.

    ``rng`` is consumed; pass a fresh stream from :func:`tree_stream` for
    reproducible runs.  ``runtime`` may carry a prebuilt :class:`RuntimeRule`
    to amortise table construction over many trees.
    """
    if runtime is None:
        runtime = RuntimeRule(config.rule)
    if config.domain.bounded:
        return _simulate_tree_bounded(x0, config, rng, root_sign, root_deriv,
                                      runtime)

    horizon = config.domain.horizon
    k = config.k_beta
    inv_k = 1.0 / k if k > 0 else math.inf
    max_pop = config.max_population
    max_order = config.max_deriv_order

    std_exp = rng.standard_exponential
    std_norm = rng.standard_normal
    uniform = rng.random
    sqrt = math.sqrt
    push = heapq.heappush
    pop = heapq.heappop
    sample = runtime.sample

    first = math.inf if inv_k == math.inf else std_exp() * inv_k
    # entries: (scheduled branch time, tiebreak, birth time, x, sign, order)
    heap = [(first, 0, 0.0, x0, root_sign, root_deriv)]
    seq = 1
    live = 1
    peak = 1
    events = 0
    atoms = []

    while heap:
        when, _, birth, x, sign, order = pop(heap)
        if when >= horizon:
            x += std_norm() * sqrt(horizon - birth)
            atoms.append(ExitAtom(x, sign, order, horizon, TIME_BOUNDARY))
            live -= 1
            continue
        x += std_norm() * sqrt(when - birth)
        events += 1
        brood = sample(uniform())
        live += len(brood) - 1
        if live > max_pop:
            raise PopulationExceeded(max_pop, when)
        if live > peak:
            peak = live
        for s, dd in brood:
            o = order + dd
            if o > max_order:
                raise DerivOrderUnsupported(o, max_order)
            life = math.inf if inv_k == math.inf else std_exp() * inv_k
            push(heap, (when + life, seq, when, x, sign * s, o))
            seq += 1

    return ExitMeasure(atoms, events, peak)


def _walk_bounded(x, t_from, t_to, a, b, h, rng):
    """Diffuse from t_from to t_to inside (a, b) with absorption at the walls.

    Sub-steps of length at most ``h``; a Brownian-bridge correction catches
    excursions that cross a wall inside a step.  Returns ``(x, t, exited)``
    where ``exited`` is the wall value or None.  Exit times are accurate to
    O(h): direct crossings are dated at the step end, bridge crossings at the
    step midpoint.
    """
    std_norm = rng.standard_normal
    uniform = rng.random
    t = t_from
    while t < t_to:
        dt = t_to - t
        if dt > h:
            dt = h
        x1 = x + std_norm() * math.sqrt(dt)
        if x1 >= b:
            return b, t + dt, b
        if x1 <= a:
            return a, t + dt, a
        p_up = math.exp(-2.0 * (b - x) * (b - x1) / dt)
        p_dn = math.exp(-2.0 * (x - a) * (x1 - a) / dt)
        u = uniform()
        if u < p_up:
            return b, t + 0.5 * dt, b
        if u < p_up + p_dn:
            return a, t + 0.5 * dt, a
        x = x1
        t += dt
    return x, t_to, None


def _simulate_tree_bounded(x0, config, rng, root_sign, root_deriv, runtime):
    horizon = config.domain.horizon
    a, b = config.domain.interval
    if not a <= x0 <= b:
        raise ValueError("start position outside the spatial interval")
    h = config.boundary_step
    k = config.k_beta
    inv_k = 1.0 / k if k > 0 else math.inf
    max_pop = config.max_population
    max_order = config.max_deriv_order

    std_exp = rng.standard_exponential
    uniform = rng.random
    push = heapq.heappush
    pop = heapq.heappop
    sample = runtime.sample

    first = math.inf if inv_k == math.inf else std_exp() * inv_k
    heap = [(first, 0, 0.0, x0, root_sign, root_deriv)]
    seq = 1
    live = 1
    peak = 1
    events = 0
    atoms = []

    while heap:
        when, _, birth, x, sign, order = pop(heap)
        target = when if when < horizon else horizon
        x, t, wall = _walk_bounded(x, birth, target, a, b, h, rng)
        if wall is not None:
            atoms.append(ExitAtom(wall, sign, order, t, SPACE_BOUNDARY))
            live -= 1
            continue
        if when >= horizon:
            atoms.append(ExitAtom(x, sign, order, horizon, TIME_BOUNDARY))
            live -= 1
            continue
        events += 1
        brood = sample(uniform())
        live += len(brood) - 1
        if live > max_pop:
            raise PopulationExceeded(max_pop, when)
        if live > peak:
            peak = live
        for s, dd in brood:
            o = order + dd
            if o > max_order:
                raise DerivOrderUnsupported(o, max_order)
            life = math.inf if inv_k == math.inf else std_exp() * inv_k
            push(heap, (when + life, seq, when, x, sign * s, o))
            seq += 1

    return ExitMeasure(atoms, events, peak)


def expected_population(rule, beta, t):
    """Mean number of particles alive at time t.

    The population is a branching process with event rate k_beta and mean
    offspring number m, so the mean grows like exp(k_beta * (m - 1) * t).
    """
    k = rule.intensity.k_beta(beta)
    m = float(rule.mean_offspring())
    return math.exp(k * (m - 1.0) * t)
