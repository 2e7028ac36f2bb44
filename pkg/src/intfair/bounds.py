"""High-probability (eps, delta) certificates for the random unfairness U.

Chebyshev certificates use only the moment summary of L and L_y.  The
Chernoff certificate inverts rate functions (Legendre transforms of the
cumulant generating functions) of the same variables.

Orientation used throughout: the bound on -log p(y|a) reads

    -log p(y|a) = L(a) - L_y(a, y) + sum_t log(p_y^(1 - 1/m) / p(y|a_t))

so a certificate needs an *upper* tail bound on L and a *lower* tail bound
on L_y, for both compared groups A and A'.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import InfiniteUnfairnessError, ParameterError, SolverInfeasibleError
from .infomeasures import cgf, log_ratio_law, moment_summary
from .metrics import RATIO_LOG, MetricVariant, block_extremes, independent_approx
from .pmf_core import JointPMF, Partition

GOLDEN = (math.sqrt(5) - 1) / 2
SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    n_splits: int = 400
    t_min: float = 1e-6
    t_max: float = 200.0
    n_t: int = 400
    tol: float = 1e-8
    # split delta between A and A' (union bound over both groups)
    two_group: bool = True


class RateFunction:
    """One-sided Chernoff rate function of a finite-support variable.

    ``side="upper"``: I(lam) = sup_{t >= 0} t lam - kappa(t), bounding
    Pr(X > lam).  ``side="lower"``: I(lam) = sup_{t <= 0} t lam - kappa(t),
    bounding Pr(X < lam).
    """

    def __init__(self, values, weights, side="upper", cfg=SolverConfig()):
        if side not in ("upper", "lower"):
            raise ParameterError("side must be 'upper' or 'lower'")
        self.side = side
        self.cfg = cfg
        values = np.asarray(values, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        keep = weights > 0
        # the lower tail of X is the upper tail of -X
        self._v = values[keep] if side == "upper" else -values[keep]
        self._w = weights[keep] / weights[keep].sum()
        self.mean = float(np.dot(values[keep], self._w))
        self._mean = float(np.dot(self._v, self._w))
        self._top = float(self._v.max())
        near = self._v >= self._top - SUPPORT_TOL * max(1.0, abs(self._top))
        self._p_top = float(self._w[near].sum())
        self._tgrid = np.geomspace(cfg.t_min, cfg.t_max, cfg.n_t)

    @classmethod
    def of(cls, pmf, q=None, conditional=False, side="upper", cfg=SolverConfig()):
        values, weights = log_ratio_law(pmf, q, conditional)
        return cls(values, weights, side, cfg)

    @property
    def extreme(self):
        """Largest (upper) or smallest (lower) support point."""
        return self._top if self.side == "upper" else -self._top

    def _kappa(self, t):
        return cgf(self._v, self._w, t)

    def _to_internal(self, lam):
        return lam if self.side == "upper" else -lam

    def __call__(self, lam):
        """Rate I(lam); ``inf`` beyond the support extreme."""
        x = self._to_internal(float(lam))
        if x <= self._mean:
            return 0.0
        if x > self._top + SUPPORT_TOL * max(1.0, abs(self._top)):
            return math.inf
        if x >= self._top - SUPPORT_TOL * max(1.0, abs(self._top)):
            return -math.log(self._p_top)
        t = self._tgrid
        vals = t * x - self._kappa(t)
        i = int(np.argmax(vals))
        lo = t[i - 1] if i > 0 else 0.0
        hi = t[i + 1] if i + 1 < t.size else t[-1]
        f = lambda s: s * x - self._kappa(s)  # noqa: E731
        best = max(vals[i], f(self._golden_max(f, lo, hi)))
        return float(max(best, 0.0))

    def tail_bound(self, lam):
        """Upper bound on Pr(X > lam) (upper) or Pr(X < lam) (lower)."""
        x = self._to_internal(float(lam))
        if x >= self._top - SUPPORT_TOL * max(1.0, abs(self._top)):
            return 0.0
        return math.exp(-self(lam))

    def _golden_max(self, f, lo, hi):
        a, b = lo, hi
        c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        while b - a > self.cfg.tol * max(1.0, b):
            if fc < fd:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = f(d)
            else:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = f(c)
        return (a + b) / 2

    def threshold(self, levels):
        """Most favourable lam whose tail bound is <= level, for each level.

        Upper side: smallest lam >= mean with exp(-I(lam)) <= level.  Solved
        through the dual form lam(c) = inf_{t > 0} (kappa(t) + c) / t with
        c = -log(level), which is unimodal in t.
        """
        levels = np.atleast_1d(np.asarray(levels, dtype=np.float64))
        if np.any(levels <= 0):
            raise SolverInfeasibleError("tail budget must be positive")
        # a hair of extra rate keeps the reported slack non-positive
        c = -np.log(np.minimum(levels, 1.0)) + 1e-9
        out = np.full(levels.shape, self._top)
        todo = levels >= self._p_top
        if np.any(todo):
            out[todo] = self._dual_min(c[todo])
        out = np.clip(out, self._mean, self._top)
        return out if self.side == "upper" else -out

    def _dual_min(self, c):
        t = self._tgrid
        kt = self._kappa(t)
        obj = (kt[None, :] + c[:, None]) / t[None, :]
        i = np.argmin(obj, axis=1)
        best = obj[np.arange(c.size), i]
        u = np.log(t)
        a = np.where(i > 0, u[np.maximum(i - 1, 0)], u[0])
        b = np.where(i + 1 < t.size, u[np.minimum(i + 1, t.size - 1)], u[-1])

        def f(uu):
            tt = np.exp(uu)
            k = np.array([self._kappa(x) for x in tt]) if tt.size < 4 else self._kappa(tt)
            return (k + c) / tt

        x1, x2 = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        f1, f2 = f(x1), f(x2)
        while np.max(b - a) > self.cfg.tol:
            left = f1 < f2
            b = np.where(left, x2, b)
            a = np.where(left, a, x1)
            nx1 = np.where(left, b - GOLDEN * (b - a), x2)
            nx2 = np.where(left, x1, a + GOLDEN * (b - a))
            fn = f(np.where(left, nx1, nx2))
            f1, f2 = np.where(left, fn, f2), np.where(left, f1, fn)
            x1, x2 = nx1, nx2
        return np.minimum(best, f((a + b) / 2))


def marginal_term(pmf: JointPMF, q: Partition = None) -> float:
    """sup_y sum_t log(p_y^(1 - 1/m) / inf_{a_t} p(y|a_t)), m = number of blocks."""
    q = Partition.singletons(pmf.d) if q is None else q.check(pmf.d)
    _, infs = block_extremes(pmf, q)
    p_y = pmf.p_y
    m = len(q)
    if np.any(infs <= 0):
        t, y = np.unravel_index(int(np.argmin(infs)), infs.shape)
        raise InfiniteUnfairnessError(
            "infinite bound: block %s has a zero conditional for label %r"
            % (list(q.blocks[t]), pmf.schema.label_values[y]),
            label=pmf.schema.label_values[y],
        )
    terms = [(m - 1) * math.log(p_y[y]) - float(np.sum(np.log(infs[:, y]))) for y in range(p_y.size) if p_y[y] > 0]
    return max(terms)


@dataclass
class BoundReport:
    delta: float
    variant: MetricVariant
    partition: tuple
    moment: object
    u_ind: Optional[float] = None
    marginal_term: Optional[float] = None
    eps1: Optional[float] = None
    eps1_prime: Optional[float] = None
    eps1_prime_two_group: Optional[float] = None
    eps2: Optional[float] = None
    solver_diag: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "delta": self.delta,
            "variant": self.variant.value,
            "partition": [list(b) for b in self.partition],
            "moment": self.moment.to_json(),
            "u_ind": self.u_ind,
            "marginal_term": self.marginal_term,
            "eps1": self.eps1,
            "eps1_prime": self.eps1_prime,
            "eps1_prime_two_group": self.eps1_prime_two_group,
            "eps2": self.eps2,
            "solver_diag": dict(self.solver_diag),
            "flags": dict(self.flags),
        }


def _check_delta(delta, open_right=False):
    ok = 0 < delta < 1 if open_right else 0 < delta <= 1
    if not ok:
        raise ParameterError("delta must lie in (0, 1%s, got %r" % (")" if open_right else "]", delta))


def _variant_eps1(pmf, q, delta, variant, ms):
    sups, infs = block_extremes(pmf, q)
    p_y = pmf.p_y
    m = len(q)
    r = ms.s_star / math.sqrt(delta)
    g = ms.gamma
    best = -math.inf
    for y in range(p_y.size):
        py = p_y[y]
        if py <= 0:
            continue
        hi, lo = sups[:, y], infs[:, y]
        if variant is MetricVariant.ABS_DIFF:
            val = math.exp(-g) * py ** (1 - m) * (math.exp(r) * np.prod(hi) - math.exp(-r) * np.prod(lo))
        elif variant is MetricVariant.RATIO_LOG_VS_AVERAGE:
            if np.any(lo <= 0):
                raise InfiniteUnfairnessError("infinite bound: zero block conditional")
            val = r + max(
                g + float(np.sum(math.log(py) - np.log(lo))),
                -g + float(np.sum(np.log(hi) - math.log(py))),
            )
        else:
            scale = py ** (1 - m)
            val = max(
                scale * math.exp(-g + r) * np.prod(hi) - py,
                py - scale * math.exp(-g - r) * np.prod(lo),
            )
        best = max(best, float(val))
    return best


def chebyshev_bounds(pmf: JointPMF, q: Partition = None, delta=0.1, variant=RATIO_LOG) -> BoundReport:
    """Chebyshev certificates eps1 and eps1_prime.

    ``eps1_prime`` is the one-group form s*/sqrt(delta) + gamma + marginal
    term; ``eps1_prime_two_group`` spends delta/2 on each compared group,
    which makes the certificate hold for every pmf.
    """
    _check_delta(delta)
    variant = MetricVariant.parse(variant)
    q = Partition.singletons(pmf.d) if q is None else q.check(pmf.d)
    ms = moment_summary(pmf, q)
    rep = BoundReport(delta=delta, variant=variant, partition=q.blocks, moment=ms)
    try:
        rep.u_ind = independent_approx(pmf, q, variant)
    except InfiniteUnfairnessError as exc:
        rep.flags["u_ind"] = {"status": "infinite", "reason": str(exc)}
    if variant is MetricVariant.RATIO_LOG:
        if rep.u_ind is not None:
            rep.eps1 = 2 * math.sqrt(2) * ms.s_star / math.sqrt(delta) + rep.u_ind
        else:
            rep.flags["eps1"] = {"status": "infinite", "reason": "zero block conditional"}
        try:
            rep.marginal_term = marginal_term(pmf, q)
        except InfiniteUnfairnessError as exc:
            rep.flags["eps1_prime"] = {"status": "infinite", "reason": str(exc)}
        else:
            rep.eps1_prime = ms.s_star / math.sqrt(delta) + ms.gamma + rep.marginal_term
            rep.eps1_prime_two_group = ms.s_star / math.sqrt(delta / 2) + ms.gamma + rep.marginal_term
    else:
        try:
            rep.eps1 = _variant_eps1(pmf, q, delta, variant, ms)
        except InfiniteUnfairnessError as exc:
            rep.flags["eps1"] = {"status": "infinite", "reason": str(exc)}
    return rep


@dataclass(frozen=True)
class ChernoffSolution:
    lam_plus: float
    lam_minus: float
    delta1: float
    delta2: float
    slack: float
    value: float


def solve_chernoff(pmf: JointPMF, q: Partition = None, delta=0.1, cfg=SolverConfig()) -> ChernoffSolution:
    """inf (lam_plus - lam_minus) over the feasible set of the tail budget.

    lam_plus bounds L from above, lam_minus bounds L_y from below.  The
    budget is delta/2 per compared group when ``cfg.two_group`` is set.
    """
    _check_delta(delta, open_right=True)
    upper = RateFunction.of(pmf, q, conditional=False, side="upper", cfg=cfg)
    lower = RateFunction.of(pmf, q, conditional=True, side="lower", cfg=cfg)
    budget = delta / 2 if cfg.two_group else delta
    d1 = np.geomspace(budget * 1e-4, budget * (1 - 1e-4), cfg.n_splits)
    d2 = budget - d1
    lp = upper.threshold(d1)
    lm = lower.threshold(d2)
    obj = lp - lm
    if not np.all(np.isfinite(obj)):
        raise SolverInfeasibleError("no feasible (lambda+, lambda-) for delta=%g" % delta)
    i = int(np.argmin(obj))  # first minimum: ties go to the smaller delta1
    slack = upper.tail_bound(lp[i]) + lower.tail_bound(lm[i]) - budget
    if slack > 0:
        raise SolverInfeasibleError("solver returned an infeasible point (slack %.3g)" % slack)
    return ChernoffSolution(float(lp[i]), float(lm[i]), float(d1[i]), float(d2[i]), float(slack), float(obj[i]))


def chernoff_bound(pmf: JointPMF, q: Partition = None, delta=0.1, cfg=SolverConfig(), report=None) -> BoundReport:
    """Chernoff certificate eps2 = inf (lam_plus - lam_minus) + marginal term."""
    _check_delta(delta, open_right=True)
    q = Partition.singletons(pmf.d) if q is None else q.check(pmf.d)
    if report is None:
        report = BoundReport(delta=delta, variant=RATIO_LOG, partition=q.blocks, moment=moment_summary(pmf, q))
    try:
        m_term = marginal_term(pmf, q)
    except InfiniteUnfairnessError as exc:
        report.flags["eps2"] = {"status": "infinite", "reason": str(exc)}
        return report
    sol = solve_chernoff(pmf, q, delta, cfg)
    report.marginal_term = m_term
    report.eps2 = sol.value + m_term
    report.solver_diag = {
        "n_splits": cfg.n_splits,
        "t_grid": [cfg.t_min, cfg.t_max, cfg.n_t],
        "tol": cfg.tol,
        "two_group": cfg.two_group,
        "lambda_plus": sol.lam_plus,
        "lambda_minus": sol.lam_minus,
        "delta1": sol.delta1,
        "delta2": sol.delta2,
        "slack": sol.slack,
    }
    return report


def bound_report(pmf, q=None, delta=0.1, variant=RATIO_LOG, chernoff=False, cfg=SolverConfig()):
    rep = chebyshev_bounds(pmf, q, delta, variant)
    if chernoff and rep.variant is MetricVariant.RATIO_LOG and delta < 1:
        chernoff_bound(pmf, q, delta, cfg, report=rep)
    return rep


def solver_config_dict(cfg):
    return asdict(cfg)
