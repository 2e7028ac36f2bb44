"""Unfairness functionals on a joint pmf of (A, Y_hat).

Four pointwise discrepancies are supported (``MetricVariant``):

* ``RatioLog``           |log p(y|a) - log p(y|a')|
* ``AbsDiff``            |p(y|a) - p(y|a')|
* ``RatioLogVsAverage``  |log p(y|a) - log p(y)|
* ``AbsDiffVsAverage``   |p(y|a) - p(y)|

The random unfairness U draws Y_hat from p_Y and two groups A, A' that are
conditionally i.i.d. given Y_hat.  The "vs average" variants only use A.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AuditError,
    BudgetExceededError,
    InfiniteUnfairnessError,
    ParameterError,
    UndefinedConditionalError,
)
from .pmf_core import JointPMF, Partition, block_sum

DEFAULT_CELL_BUDGET = 50_000_000
TAIL_TOL = 1e-12


class MetricVariant(str, enum.Enum):
    RATIO_LOG = "RatioLog"
    ABS_DIFF = "AbsDiff"
    RATIO_LOG_VS_AVERAGE = "RatioLogVsAverage"
    ABS_DIFF_VS_AVERAGE = "AbsDiffVsAverage"

    @property
    def is_ratio(self):
        return self in (MetricVariant.RATIO_LOG, MetricVariant.RATIO_LOG_VS_AVERAGE)

    @property
    def vs_average(self):
        return self in (MetricVariant.RATIO_LOG_VS_AVERAGE, MetricVariant.ABS_DIFF_VS_AVERAGE)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for v in cls:
            if v.value.lower() == str(value).lower() or v.name.lower() == str(value).lower():
                return v
        raise ParameterError("unknown metric variant %r" % value)


RATIO_LOG = MetricVariant.RATIO_LOG


def _conditionals(joint, schema, group_names=None):
    """(p_a, p(y|a), p_y) from a ``(G, |Y|)`` joint table.

    Raises if a group has zero mass.
    """
    p_a = joint.sum(axis=1)
    zero = np.flatnonzero(p_a <= 0)
    if zero.size:
        g = int(zero[0])
        name = group_names(g) if group_names else g
        raise UndefinedConditionalError("undefined conditional: group %s has zero mass" % (name,), group=name)
    cond = joint / p_a[:, None]
    return p_a, cond, joint.sum(axis=0)


def _group_namer(schema, attrs):
    cards = tuple(schema.attr_cards[k] for k in attrs)

    def name(g):
        idx = np.unravel_index(g, cards)
        return {schema.attr_names[k]: _plain(schema.attr_values[k][i]) for k, i in zip(attrs, idx)}

    return name


def _plain(v):
    return int(v) if isinstance(v, np.integer) else v


def _table(pmf, block=None):
    """Joint of the (flattened) block with the label, shape ``(G, |Y|)``."""
    if block is None:
        arr, attrs = pmf.probs, tuple(range(pmf.d))
    else:
        attrs = tuple(sorted(block))
        arr = block_sum(pmf.probs, attrs)
    return arr.reshape(-1, pmf.schema.label_card), attrs


def _raise_infinite(schema, y, namer, cond_col):
    g = int(np.argmin(cond_col))
    label = _plain(schema.label_values[y])
    raise InfiniteUnfairnessError(
        "infinite unfairness: p(%s=%r | %s) = 0" % (schema.label_name, label, namer(g)),
        label=label,
        group=namer(g),
    )


def _functional(joint, schema, attrs, variant):
    namer = _group_namer(schema, attrs)
    _, cond, p_y = _conditionals(joint, schema, namer)
    best = 0.0
    for y in range(cond.shape[1]):
        col = cond[:, y]
        hi, lo = col.max(), col.min()
        if variant is MetricVariant.RATIO_LOG:
            if lo <= 0:
                _raise_infinite(schema, y, namer, col)
            val = math.log(hi) - math.log(lo)
        elif variant is MetricVariant.ABS_DIFF:
            val = hi - lo
        elif variant is MetricVariant.RATIO_LOG_VS_AVERAGE:
            if lo <= 0:
                _raise_infinite(schema, y, namer, col)
            ref = math.log(p_y[y])
            val = max(math.log(hi) - ref, ref - math.log(lo))
        else:
            val = max(hi - p_y[y], p_y[y] - lo)
        best = max(best, val)
    return best


def intersectional_unfairness(pmf: JointPMF, variant=RATIO_LOG) -> float:
    variant = MetricVariant.parse(variant)
    joint, attrs = _table(pmf)
    return _functional(joint, pmf.schema, attrs, variant)


def marginal_unfairness(pmf: JointPMF, k: int, variant=RATIO_LOG) -> float:
    variant = MetricVariant.parse(variant)
    joint, attrs = _table(pmf, (k,))
    return _functional(joint, pmf.schema, attrs, variant)


def block_extremes(pmf: JointPMF, q: Partition):
    """Per block, ``(sup_a p(y|a_t), inf_a p(y|a_t))`` as two ``(|q|, |Y|)`` arrays."""
    q.check(pmf.d)
    sups, infs = [], []
    for block in q:
        joint, attrs = _table(pmf, block)
        _, cond, _ = _conditionals(joint, pmf.schema, _group_namer(pmf.schema, attrs))
        sups.append(cond.max(axis=0))
        infs.append(cond.min(axis=0))
    return np.array(sups), np.array(infs)


def independent_approx(pmf: JointPMF, q: Optional[Partition] = None, variant=RATIO_LOG) -> float:
    """Approximation of the intersectional value that treats blocks of ``q`` as independent.

    For RatioLog this is ``sup_y sum_t log(sup p(y|a_t) / inf p(y|a_t))``.  The
    other variants use the product form p(y|a) = p_y^(1-m) prod_t p(y|a_t)
    that holds under independence; for them it is an upper-bound surrogate
    rather than an identity.
    """
    variant = MetricVariant.parse(variant)
    q = Partition.singletons(pmf.d) if q is None else q
    sups, infs = block_extremes(pmf, q)
    p_y = pmf.p_y
    m = len(q)
    best = 0.0
    for y in range(pmf.schema.label_card):
        hi, lo, py = sups[:, y], infs[:, y], p_y[y]
        if variant.is_ratio and np.any(lo <= 0):
            t = int(np.argmin(lo))
            joint, attrs = _table(pmf, q.blocks[t])
            col = joint[:, y] / joint.sum(axis=1)
            _raise_infinite(pmf.schema, y, _group_namer(pmf.schema, attrs), col)
        if py <= 0:
            continue
        if variant is MetricVariant.RATIO_LOG:
            val = float(np.sum(np.log(hi) - np.log(lo)))
        elif variant is MetricVariant.ABS_DIFF:
            val = py ** (1 - m) * (np.prod(hi) - np.prod(lo))
        elif variant is MetricVariant.RATIO_LOG_VS_AVERAGE:
            lp = math.log(py)
            val = max(float(np.sum(np.log(hi) - lp)), float(np.sum(lp - np.log(lo))))
        else:
            scale = py ** (1 - m)
            val = max(scale * np.prod(hi) - py, py - scale * np.prod(lo))
        best = max(best, float(val))
    return best


@dataclass(frozen=True)
class UDistribution:
    support: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)

    def tail(self, eps):
        """Pr(U > eps), ignoring support points within float noise of ``eps``."""
        tol = TAIL_TOL * max(1.0, abs(eps))
        return float(self.probs[self.support > eps + tol].sum())

    def mean(self):
        return math.fsum(self.support * self.probs)

    def quantile(self, delta):
        if not 0.0 <= delta <= 1.0:
            raise ParameterError("delta must lie in [0, 1], got %r" % delta)
        # tails[i] = Pr(U > support[i])
        tails = np.concatenate([np.cumsum(self.probs[::-1])[::-1][1:], [0.0]])
        if self.tail(0.0) <= delta + TAIL_TOL:
            return 0.0
        ok = np.flatnonzero(tails <= delta + TAIL_TOL)
        return float(self.support[ok[0]])

    @property
    def max(self):
        return float(self.support[-1])


def _collapse(values, weights):
    """Sort and merge support points closer than float noise."""
    keep = weights > 0
    values, weights = values[keep], weights[keep]
    order = np.argsort(values, kind="stable")
    values, weights = values[order], weights[order]
    if values.size == 0:
        return np.zeros(1), np.ones(1)
    gaps = np.diff(values) > TAIL_TOL * np.maximum(1.0, np.abs(values[1:]))
    starts = np.concatenate([[0], np.flatnonzero(gaps) + 1])
    return values[starts], np.add.reduceat(weights, starts)


def u_distribution(pmf: JointPMF, variant=RATIO_LOG, cell_budget=DEFAULT_CELL_BUDGET) -> UDistribution:
    """Exact law of U by enumerating labels and (pairs of) groups."""
    variant = MetricVariant.parse(variant)
    schema = pmf.schema
    groups = schema.n_groups
    required = schema.label_card * groups * (1 if variant.vs_average else groups)
    if required > cell_budget:
        raise BudgetExceededError(
            "U enumeration needs %d outcomes, budget is %d" % (required, cell_budget),
            budget=cell_budget,
            required=required,
        )
    joint, attrs = _table(pmf)
    _, cond, p_y = _conditionals(joint, schema, _group_namer(schema, attrs))
    values, weights = [], []
    for y in range(schema.label_card):
        w = joint[:, y]
        nz = w > 0
        if not nz.any():
            continue
        c = cond[nz, y]
        w = w[nz]
        # identical conditionals give identical U values; merge them first
        c, inv = np.unique(c, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=w, minlength=c.size)
        if variant.vs_average:
            if variant is MetricVariant.RATIO_LOG_VS_AVERAGE:
                v = np.abs(np.log(c) - math.log(p_y[y]))
            else:
                v = np.abs(c - p_y[y])
            values.append(v)
            weights.append(w)
        else:
            f = np.log(c) if variant is MetricVariant.RATIO_LOG else c
            v = np.abs(f[:, None] - f[None, :])
            cw = w / p_y[y]
            values.append(v.ravel())
            weights.append((p_y[y] * np.outer(cw, cw)).ravel())
    support, probs = _collapse(np.concatenate(values), np.concatenate(weights))
    return UDistribution(support, probs)


def unfairness_quantile(pmf: JointPMF, delta: float, variant=RATIO_LOG, cell_budget=DEFAULT_CELL_BUDGET) -> float:
    """Smallest attained eps with Pr(U > eps) <= delta."""
    if not 0.0 <= delta <= 1.0:
        raise ParameterError("delta must lie in [0, 1], got %r" % delta)
    return u_distribution(pmf, variant, cell_budget).quantile(delta)


def expected_unfairness(pmf: JointPMF, variant=RATIO_LOG, cell_budget=DEFAULT_CELL_BUDGET) -> float:
    return u_distribution(pmf, variant, cell_budget).mean()


def positive_label_index(schema, positive_label=None):
    if positive_label is None:
        return schema.label_card - 1
    for i, v in enumerate(schema.label_values):
        if v == positive_label or str(v) == str(positive_label):
            return i
    raise ParameterError("positive label %r is not in the label alphabet" % (positive_label,))


def weighted_unfairness(pmf: JointPMF, positive_label=None) -> float:
    """max_a p_A(a) |p(y+|a) - p(y+)| for a binary label.

    Groups of zero mass contribute nothing.
    """
    schema = pmf.schema
    if schema.label_card != 2:
        raise ParameterError("weighted unfairness requires binary label")
    pos = positive_label_index(schema, positive_label)
    joint, _ = _table(pmf)
    p_a = joint.sum(axis=1)
    p_pos = joint[:, pos].sum()
    nz = p_a > 0
    dev = np.abs(joint[nz, pos] / p_a[nz] - p_pos)
    return float(np.max(p_a[nz] * dev)) if nz.any() else 0.0


@dataclass(frozen=True)
class UnfairnessReport:
    """Point functionals for one pmf.

    A field is ``None`` when it is infinite or undefined; ``flags`` then says
    which and why.
    """

    variant: MetricVariant
    ufi: Optional[float]
    marginals: list
    ufm: Optional[float]
    u_ind: Optional[float]
    expected: Optional[float]
    weighted: Optional[float]
    flags: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "variant": self.variant.value,
            "ufi": self.ufi,
            "marginals": list(self.marginals),
            "ufm": self.ufm,
            "u_ind": self.u_ind,
            "u_ind_is_surrogate": self.variant is not MetricVariant.RATIO_LOG,
            "expected": self.expected,
            "weighted": self.weighted,
            "flags": dict(self.flags),
        }


def _guard(flags, key, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InfiniteUnfairnessError as exc:
        flags[key] = {"status": "infinite", "reason": str(exc)}
    except (UndefinedConditionalError, BudgetExceededError, ParameterError) as exc:
        flags[key] = {"status": "undefined", "reason": str(exc)}
    except AuditError as exc:  # pragma: no cover - defensive
        flags[key] = {"status": "error", "reason": str(exc)}
    return None


def unfairness_report(pmf: JointPMF, variant=RATIO_LOG, positive_label=None, cell_budget=DEFAULT_CELL_BUDGET):
    variant = MetricVariant.parse(variant)
    flags = {}
    ufi = _guard(flags, "ufi", intersectional_unfairness, pmf, variant)
    marginals = [
        _guard(flags, "marginal[%d]" % k, marginal_unfairness, pmf, k, variant) for k in range(pmf.d)
    ]
    ufm = None if any(m is None for m in marginals) else max(marginals)
    u_ind = _guard(flags, "u_ind", independent_approx, pmf, None, variant)
    expected = _guard(flags, "expected", expected_unfairness, pmf, variant, cell_budget)
    weighted = None
    if pmf.schema.label_card == 2:
        weighted = _guard(flags, "weighted", weighted_unfairness, pmf, positive_label)
    else:
        flags["weighted"] = {"status": "undefined", "reason": "weighted unfairness requires binary label"}
    return UnfairnessReport(variant, ufi, marginals, ufm, u_ind, expected, weighted, flags)
