"""Monte Carlo estimators turning exit measures into solution values.

Each tree produces one scalar functional V = <beta f, X>: the sum over exit
atoms of beta * sign * (-1)**order * f^(order)(x) on the time boundary, plus
beta * sign * g(t, x) on the spatial walls.  The three scaling modes combine
the sample moments m_minus = mean exp(-V) and m_plus = mean exp(+V) into a
point estimate:

  unit      1 - m_minus            (V evaluated with beta fixed at 1)
  scaling1  (1 - m_minus) / beta
  scaling2  mean sinh(V) / beta    (exp(+V) and exp(-V) paired on each tree)

All reductions use compensated summation over per-tree values stored in tree
order, so results are byte-identical for any number of worker threads.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calculus import ScalingMode
from .engine import TIME_BOUNDARY, RuntimeRule, expected_population, simulate_tree, tree_stream
from .errors import BranchflowError, CapExceeded, DerivAtSpaceBoundary, PopulationExceeded


def exit_functional(measure, f, g, beta):
    """Score one exit measure against initial data f and boundary data g.

    Returns the pairing <beta f, X>; an empty measure scores 0.  Atoms with
    derivative order n contribute beta * sign * (-1)**n * f^(n)(x): the sign
    alternation is the usual pairing of a test function against the n-th
    derivative of a point mass.  Space-boundary atoms are scored with g(t, x)
    and must carry order 0.
    """
    terms = []
    for atom in measure.atoms:
        if atom.exit_kind == TIME_BOUNDARY:
            n = atom.deriv_order
            v = f.derivative(atom.position, n) if n else f(atom.position)
            if n & 1:
                v = -v
            terms.append(atom.sign * v)
        else:
            if atom.deriv_order:
                raise DerivAtSpaceBoundary(
                    "derivative-marked particle reached the spatial boundary; "
                    "boundary data is defined for order-0 atoms only"
                )
            if g is None:
                raise ValueError(
                    "exit measure has space-boundary atoms but no boundary data g"
                )
            terms.append(atom.sign * g(atom.exit_time, atom.position))
    return beta * math.fsum(terms)


@dataclass(frozen=True)
class MCResult:
    """One Monte Carlo point estimate with its diagnostics.

    ``m_minus`` and ``m_plus`` are the raw moment-functional means
    mean(exp(-V)) and mean(exp(+V)); ``stderr`` is the sample standard
    deviation of the per-tree functional divided by sqrt(n_trees).
    ``capped_tree_count`` is always 0 on a returned result: runs with capped
    trees raise instead of returning a biased estimate.
    """

    estimate: float
    stderr: float
    n_trees: int
    beta: float
    m_minus: float
    m_plus: float
    dead_tree_fraction: float
    capped_tree_count: int = 0


def _exp_safe(v):
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


class TransformedInitial:
    """Initial data of the finite-beta estimand for a given scaling mode.

    The per-tree functional pairs the exit measure with f, so the quantity the
    estimator converges to (before the beta -> 0 limit) solves the PDE whose
    initial data is (1 - exp(-beta f))/beta for the unit and scaling1 modes
    (beta fixed at 1 for unit) and sinh(beta f)/beta for scaling2.  Reference
    solves use this to separate Monte Carlo error from the O(beta) data bias.
    """

    def __init__(self, f, beta, mode):
        self.f = f
        self.mode = ScalingMode.parse(mode)
        self.beta = 1.0 if self.mode is ScalingMode.UNIT else beta

    def __call__(self, x):
        v = float(self.f(x))
        if self.mode is ScalingMode.SCALING2:
            return math.sinh(self.beta * v) / self.beta
        return -math.expm1(-self.beta * v) / self.beta

    def describe(self):
        return f"{self.mode.value}-transform[beta={self.beta}] of {self.f.describe()}"


def _run_block(lo, hi, x, config, runtime, f, g, beta_eff, point_index, out_a, out_b):
    """Simulate trees lo..hi-1, writing exp(-V), exp(+V) into shared arrays."""
    seed = config.seed
    dead = 0
    capped = 0
    for i in range(lo, hi):
        rng = tree_stream(seed, i, point_index)
        try:
            measure = simulate_tree(x, config, rng, runtime=runtime)
        except PopulationExceeded:
            capped += 1
            out_a[i] = math.nan
            out_b[i] = math.nan
            continue
        if measure.is_dead:
            dead += 1
        v = exit_functional(measure, f, g, beta_eff)
        out_a[i] = _exp_safe(-v)
        out_b[i] = _exp_safe(v)
    return dead, capped


def _sample_mean_std(values, n):
    """Compensated two-pass mean and sample standard deviation."""
    mean = math.fsum(values) / n
    dev = np.asarray(values) - mean
    var = math.fsum(dev * dev) / (n - 1)
    return mean, math.sqrt(var)


def estimate_point(x, config, f, g=None, mode=ScalingMode.SCALING1,
                   n_trees=10_000, log_mode=False, threads=1, point_index=0):
    """Estimate the solution at one space point from n_trees independent trees.

    ``mode`` selects the scaling family (see the module docstring).  With
    ``log_mode`` the unit/scaling1 estimate is replaced by the plug-in
    -log(m_minus)/beta; it matches the limit identity literally but carries a
    small-sample Jensen bias, so it is exposed for diagnostics only.

    Tree i draws from the counter-based stream keyed by
    (config.seed, i, point_index), so any point of a sweep can be reproduced
    in isolation and the result does not depend on ``threads``.
    """
    mode = ScalingMode.parse(mode)
    if n_trees < 2:
        raise ValueError("n_trees must be at least 2")
    if log_mode and mode is ScalingMode.SCALING2:
        raise ValueError("log_mode applies to unit and scaling1 estimates only")
    runtime = RuntimeRule(config.rule)
    beta = config.beta
    beta_eff = 1.0 if mode is ScalingMode.UNIT else beta

    out_a = np.empty(n_trees)
    out_b = np.empty(n_trees)
    if threads is None or threads <= 1:
        blocks = [(0, n_trees)]
    else:
        step = -(-n_trees // threads)
        blocks = [(lo, min(lo + step, n_trees)) for lo in range(0, n_trees, step)]
    if len(blocks) == 1:
        lo, hi = blocks[0]
        tallies = [_run_block(lo, hi, x, config, runtime, f, g, beta_eff,
                              point_index, out_a, out_b)]
    else:
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            futures = [pool.submit(_run_block, lo, hi, x, config, runtime, f, g,
                                   beta_eff, point_index, out_a, out_b)
                       for lo, hi in blocks]
            tallies = [fut.result() for fut in futures]

    dead = sum(t[0] for t in tallies)
    capped = sum(t[1] for t in tallies)
    if capped:
        raise CapExceeded(capped, n_trees)

    m_minus, std_a = _sample_mean_std(out_a, n_trees)
    m_plus = math.fsum(out_b) / n_trees
    root_n = math.sqrt(n_trees)

    if mode is ScalingMode.SCALING2:
        y = (out_b - out_a) / (2.0 * beta)
        estimate, std_y = _sample_mean_std(y, n_trees)
        stderr = std_y / root_n
    elif log_mode:
        estimate = -math.log(m_minus) / beta_eff
        stderr = std_a / (m_minus * beta_eff * root_n)
    elif mode is ScalingMode.UNIT:
        estimate = 1.0 - m_minus
        stderr = std_a / root_n
    else:
        estimate = (1.0 - m_minus) / beta
        stderr = std_a / (beta * root_n)

    return MCResult(estimate=estimate, stderr=stderr, n_trees=n_trees,
                    beta=beta, m_minus=m_minus, m_plus=m_plus,
                    dead_tree_fraction=dead / n_trees, capped_tree_count=0)


@dataclass
class FieldPoint:
    """One row of a field sweep: either a result or a recorded failure."""

    x: float
    result: MCResult = None
    error: str = None


def estimate_field(xs, config, f, g=None, mode=ScalingMode.SCALING1,
                   n_trees=10_000, log_mode=False, threads=1):
    """Run estimate_point at each x with per-point derived streams.

    Failures (capped trees, unsupported marks) are recorded on the affected
    row instead of aborting the sweep.  Rows come back in the order of ``xs``.
    """
    xs = list(xs)
    if not xs:
        raise ValueError("xs must be nonempty")
    rows = []
    for j, x in enumerate(xs):
        try:
            res = estimate_point(x, config, f, g, mode=mode, n_trees=n_trees,
                                 log_mode=log_mode, threads=threads,
                                 point_index=j)
            rows.append(FieldPoint(float(x), res, None))
        except BranchflowError as exc:
            rows.append(FieldPoint(float(x), None, str(exc)))
    return rows


@dataclass(frozen=True)
class MomentResult:
    """Estimate of a moment functional m = E exp(-<beta f, X>)."""

    value: float
    stderr: float
    n_trees: int


def moment_functional(roots, config, f, g=None, n_trees=10_000, point_index=0):
    """Estimate m = E exp(-<beta f, X>) for a forest with the given roots.

    Each replicate simulates one independent tree per root (streams keyed by
    root index) and scores the union of their exit measures, so a two-root
    run factorises over the roots exactly in distribution.
    """
    roots = list(roots)
    if not 1 <= len(roots) <= 4:
        raise ValueError("between 1 and 4 roots are supported")
    if n_trees < 2:
        raise ValueError("n_trees must be at least 2")
    runtime = RuntimeRule(config.rule)
    beta = config.beta
    seed = config.seed
    vals = np.empty(n_trees)
    for i in range(n_trees):
        v = 0.0
        for r, x0 in enumerate(roots):
            rng = tree_stream(seed, i, point_index, root_index=r)
            measure = simulate_tree(x0, config, rng, runtime=runtime)
            v += exit_functional(measure, f, g, beta)
        vals[i] = _exp_safe(-v)
    mean, std = _sample_mean_std(vals, n_trees)
    return MomentResult(value=mean, stderr=std / math.sqrt(n_trees),
                        n_trees=n_trees)


@dataclass(frozen=True)
class PopulationStats:
    """Observed versus predicted population for one rule at the horizon."""

    mean_atoms: float
    stderr: float
    expected: float
    dead_fraction: float
    n_trees: int

    @property
    def deviation_se(self):
        """Distance from the prediction in standard-error units."""
        if self.stderr == 0:
            return 0.0 if self.mean_atoms == self.expected else math.inf
        return abs(self.mean_atoms - self.expected) / self.stderr


def population_stats(config, x0=0.0, n_trees=10_000):
    """Sample mean exit-atom count against the branching-process prediction.

    On an unbounded domain every particle alive at the horizon freezes into
    exactly one exit atom, so the atom count is the population at the horizon
    and its mean should track exp(k_beta (m - 1) t).
    """
    if n_trees < 2:
        raise ValueError("n_trees must be at least 2")
    runtime = RuntimeRule(config.rule)
    seed = config.seed
    counts = np.empty(n_trees)
    dead = 0
    for i in range(n_trees):
        measure = simulate_tree(x0, config, tree_stream(seed, i), runtime=runtime)
        counts[i] = measure.atom_count
        if measure.is_dead:
            dead += 1
    mean, std = _sample_mean_std(counts, n_trees)
    expected = expected_population(config.rule, config.beta,
                                   config.domain.horizon)
    return PopulationStats(mean_atoms=mean, stderr=std / math.sqrt(n_trees),
                           expected=expected, dead_fraction=dead / n_trees,
                           n_trees=n_trees)
