"""Convergence curves for competing estimators and exact bound comparisons."""

import re
from dataclasses import dataclass, field

import numpy as np

from .bounds import SolverConfig, bound_report
from .errors import AuditError, ParameterError
from .infomeasures import moment_summary
from .metrics import RATIO_LOG, MetricVariant, independent_approx, intersectional_unfairness, u_distribution
from .partitioning import greedy_partition, partitioned_estimate
from .pmf_core import Partition, empirical_pmf, smoothed_pmf
from .synth import RngSpec, sample_table

ZERO_TRUTH = 1e-12
DEFAULT_ALPHAS = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class Estimator:
    """A named plug-in estimator and the exact functional it targets."""

    kind: str
    param: float = None

    @property
    def name(self):
        if self.kind == "bayes":
            return "bayes(%g)" % self.param
        if self.kind == "partitioned":
            return "partitioned(%d)" % self.param
        return self.kind

    def truth(self, pmf, variant=RATIO_LOG):
        if self.kind in ("bayes", "partitioned", "empirical"):
            return intersectional_unfairness(pmf, variant)
        if self.kind == "u_ind":
            return independent_approx(pmf, None, variant)
        return moment_summary(pmf).s_star

    def estimate(self, table, variant=RATIO_LOG):
        if self.kind == "bayes":
            return intersectional_unfairness(smoothed_pmf(table, self.param), variant)
        if self.kind == "partitioned":
            return partitioned_estimate(table, int(self.param), variant)
        emp = empirical_pmf(table)
        if self.kind == "empirical":
            return intersectional_unfairness(emp, variant)
        if self.kind == "u_ind":
            return independent_approx(emp, None, variant)
        return moment_summary(emp).s_star


_EST = re.compile(r"^(bayes|partitioned)\(([^)]+)\)$")


def parse_estimator(text) -> Estimator:
    if isinstance(text, Estimator):
        return text
    text = text.strip()
    if text in ("u_ind", "s_star", "empirical"):
        return Estimator(text)
    m = _EST.match(text)
    if not m:
        raise ParameterError("unknown estimator %r" % text)
    kind, arg = m.groups()
    try:
        val = float(arg)
    except ValueError:
        raise ParameterError("bad estimator parameter in %r" % text) from None
    if kind == "bayes" and not val > 0:
        raise ParameterError("bayes alpha must be positive")
    if kind == "partitioned" and (val < 0 or val != int(val)):
        raise ParameterError("partitioned tau must be a non-negative integer")
    return Estimator(kind, val if kind == "bayes" else int(val))


def default_estimators(alphas=DEFAULT_ALPHAS, tau=10):
    return [Estimator("bayes", a) for a in alphas] + [Estimator("u_ind"), Estimator("s_star"), Estimator("partitioned", tau)]


@dataclass
class ConvergenceCurve:
    """Squared errors of one estimator against one truth pmf.

    ``errors[i, r]`` is the relative squared error at ``n_grid[i]``, rep r
    (absolute when ``absolute`` is set because the target is zero); NaN marks
    a failed rep, with the reason kept in ``failures``.
    """

    estimator: str
    truth: float
    n_grid: tuple
    errors: np.ndarray
    absolute: bool = False
    truth_id: int = 0
    failures: list = field(default_factory=list)

    @property
    def reps(self):
        return self.errors.shape[1]

    def _stat(self, fn):
        out = np.full(len(self.n_grid), np.nan)
        for i, row in enumerate(self.errors):
            ok = row[~np.isnan(row)]
            if ok.size:
                out[i] = fn(ok)
        return out

    @property
    def rel_l2(self):
        return self._stat(np.mean)

    @property
    def median(self):
        return self._stat(np.median)

    @property
    def deciles(self):
        """1st and 9th deciles (10th and 90th percentiles) per n."""
        return self._stat(lambda e: np.percentile(e, 10)), self._stat(lambda e: np.percentile(e, 90))

    @property
    def failure_fraction(self):
        return np.isnan(self.errors).mean(axis=1)

    def rows(self):
        lo, hi = self.deciles
        stats = {
            "rel_l2": self.rel_l2,
            "median": self.median,
            "decile_1": lo,
            "decile_9": hi,
            "failure_fraction": self.failure_fraction,
        }
        for i, n in enumerate(self.n_grid):
            for name, arr in stats.items():
                yield {
                    "estimator": self.estimator,
                    "truth_id": self.truth_id,
                    "n": int(n),
                    "reps": self.reps,
                    "statistic": name,
                    "value": float(arr[i]),
                    "absolute": int(self.absolute),
                }


def convergence_experiment(truth_pmf, estimators, n_grid, reps=20, rng=RngSpec(), variant=RATIO_LOG, truth_id=0):
    """Sample ``reps`` tables per n and score every estimator on the same tables."""
    variant = MetricVariant.parse(variant)
    ests = [parse_estimator(e) for e in estimators]
    n_grid = tuple(int(n) for n in n_grid)
    if list(n_grid) != sorted(n_grid) or not n_grid or n_grid[0] < 1:
        raise ParameterError("n_grid must be ascending positive sizes")
    curves = []
    for est in ests:
        t = est.truth(truth_pmf, variant)
        curves.append(ConvergenceCurve(est.name, t, n_grid, np.full((len(n_grid), reps), np.nan), abs(t) < ZERO_TRUTH, truth_id))
    for i, n in enumerate(n_grid):
        for r in range(reps):
            table = sample_table(truth_pmf, n, rng.child("sample-n%d" % n, r))
            for est, curve in zip(ests, curves):
                try:
                    val = est.estimate(table, variant)
                except AuditError as exc:
                    curve.failures.append({"n": n, "rep": r, "reason": str(exc)})
                    continue
                err = (val - curve.truth) ** 2
                curve.errors[i, r] = err if curve.absolute else err / curve.truth**2
    return curves


def median_across_truths(curves, estimator):
    """Median over truth pmfs of the per-pmf mean error, for each n."""
    sel = [c.rel_l2 for c in curves if c.estimator == estimator]
    return np.median(np.vstack(sel), axis=0)


def bound_comparison(pmf, delta=0.1, tau=10, selection_n=10_000, rng=RngSpec(), chernoff=True, cfg=SolverConfig()):
    """Select q* on a sample of size ``selection_n``, then compute every bound exactly."""
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    flags = {}
    table = sample_table(pmf, selection_n, rng.child("selection"))
    try:
        greedy = greedy_partition(table, tau)
        q = greedy.q_star
    except AuditError as exc:
        q = Partition.singletons(pmf.d)
        flags["q_star"] = {"status": "fallback-singletons", "reason": str(exc)}
    U = u_distribution(pmf)
    eps_star = U.quantile(delta)
    rep = bound_report(pmf, q, delta, RATIO_LOG, chernoff=chernoff, cfg=cfg)
    rows = {"eps_star": eps_star}
    for key in ("eps1", "eps1_prime", "eps1_prime_two_group", "eps2"):
        rows[key] = getattr(rep, key)
    tails = {k: (U.tail(v) if v is not None else None) for k, v in rows.items()}
    valid = {k: (tails[k] <= delta) for k in rows if k != "eps_star" and rows[k] is not None}
    flags.update(rep.flags)
    return {
        "delta": delta,
        "tau": tau,
        "selection_n": selection_n,
        "q_star": q.to_json(),
        "s_star": rep.moment.s_star,
        "gamma": rep.moment.gamma,
        "u_ind": rep.u_ind,
        "bounds": rows,
        "tail_probability": tails,
        "valid": valid,
        "flags": flags,
    }


def log_grid(lo, hi):
    """Powers of ten from 10**lo to 10**hi."""
    return tuple(10**k for k in range(int(lo), int(hi) + 1))

