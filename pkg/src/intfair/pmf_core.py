"""Schemas, contingency tables and joint pmfs over (A_1, ..., A_d, Y_hat).

Cells are stored densely as numpy arrays of shape ``(|A_1|, ..., |A_d|, |Y|)``
in C order, so the label axis is the fastest varying one.  All objects are
immutable after construction: arrays are marked read-only.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence, Tuple

import numpy as np

from .errors import (
    NoDataError,
    ParameterError,
    SchemaError,
    StructureError,
)

MAX_CELLS = 2**62
PMF_ATOL = 1e-12


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class AttributeSchema:
    """Names and alphabets of the protected attributes and the label.

    ``attr_values[k]`` lists the values of attribute k in index order; if not
    given, attribute k takes the values ``0 .. card-1``.
    """

    attr_names: Tuple[str, ...]
    attr_cards: Tuple[int, ...]
    label_card: int
    attr_values: Tuple[Tuple[Hashable, ...], ...] = None
    label_values: Tuple[Hashable, ...] = None
    label_name: str = "prediction"

    def __post_init__(self):
        names = tuple(str(n) for n in self.attr_names)
        cards = tuple(int(c) for c in self.attr_cards)
        object.__setattr__(self, "attr_names", names)
        object.__setattr__(self, "attr_cards", cards)
        object.__setattr__(self, "label_card", int(self.label_card))
        if len(names) == 0 or len(names) != len(cards):
            raise SchemaError("need at least one attribute and one cardinality per name")
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        if any(c < 1 for c in cards):
            raise SchemaError("attribute cardinalities must be >= 1")
        if self.label_card < 2:
            raise SchemaError("label alphabet needs at least 2 values")
        total = self.label_card
        for c in cards:
            total *= c
            if total >= MAX_CELLS:
                raise SchemaError("cell count %s overflows 64-bit indexing" % "*".join(map(str, cards)))

        if self.attr_values is None:
            values = tuple(tuple(range(c)) for c in cards)
        else:
            values = tuple(tuple(v) for v in self.attr_values)
            if len(values) != len(cards) or any(len(v) != c for v, c in zip(values, cards)):
                raise SchemaError("attr_values do not match attr_cards")
        for name, v in zip(names, values):
            if len(set(v)) != len(v):
                raise SchemaError("duplicate values declared for attribute %r" % name)
        object.__setattr__(self, "attr_values", values)

        if self.label_values is None:
            lv = tuple(range(self.label_card))
        else:
            lv = tuple(self.label_values)
            if len(lv) != self.label_card or len(set(lv)) != len(lv):
                raise SchemaError("label_values do not match label_card")
        object.__setattr__(self, "label_values", lv)

    @classmethod
    def from_values(cls, attr_names, attr_values, label_values, label_name="prediction"):
        attr_values = tuple(tuple(v) for v in attr_values)
        label_values = tuple(label_values)
        return cls(
            attr_names=tuple(attr_names),
            attr_cards=tuple(len(v) for v in attr_values),
            label_card=len(label_values),
            attr_values=attr_values,
            label_values=label_values,
            label_name=label_name,
        )

    @classmethod
    def binary(cls, d, label_card=2):
        return cls(tuple("A%d" % (k + 1) for k in range(d)), (2,) * d, label_card)

    @property
    def d(self):
        return len(self.attr_cards)

    @property
    def shape(self):
        return self.attr_cards + (self.label_card,)

    @property
    def n_groups(self):
        return math.prod(self.attr_cards)

    @property
    def n_cells(self):
        return self.n_groups * self.label_card

    def sub_schema(self, block):
        block = tuple(block)
        return AttributeSchema(
            attr_names=tuple(self.attr_names[k] for k in block),
            attr_cards=tuple(self.attr_cards[k] for k in block),
            label_card=self.label_card,
            attr_values=tuple(self.attr_values[k] for k in block),
            label_values=self.label_values,
            label_name=self.label_name,
        )

    def group_label(self, index):
        """Human readable ``{name: value}`` mapping for a group index tuple."""
        return {self.attr_names[k]: _jsonable(self.attr_values[k][i]) for k, i in enumerate(index)}

    def to_json(self):
        return {
            "attributes": [
                {"name": n, "values": [_jsonable(v) for v in vals]}
                for n, vals in zip(self.attr_names, self.attr_values)
            ],
            "label": {"name": self.label_name, "values": [_jsonable(v) for v in self.label_values]},
        }

    @classmethod
    def from_json(cls, obj):
        try:
            attrs = obj["attributes"]
            label = obj["label"]
            return cls.from_values(
                [a["name"] for a in attrs],
                [a["values"] for a in attrs],
                label["values"],
                label_name=label.get("name", "prediction"),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError("malformed schema JSON: %s" % exc) from None


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, tuple):
        return "|".join(str(x) for x in v)
    return v


def load_schema(path):
    try:
        return AttributeSchema.from_json(_read_json(path))
    except (KeyError, TypeError) as exc:
        raise SchemaError("%s is not a schema file (%s)" % (path, exc)) from None


@dataclass(frozen=True)
class ContingencyTable:
    schema: AttributeSchema
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != self.schema.shape:
            try:
                counts = counts.reshape(self.schema.shape)
            except ValueError:
                raise SchemaError(
                    "counts have %d entries, schema needs %d" % (counts.size, self.schema.n_cells)
                ) from None
        if counts.size and (np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0))):
            raise SchemaError("counts must be non-negative integers")
        object.__setattr__(self, "counts", _frozen(counts.astype(np.int64)))

    @property
    def n(self):
        return int(self.counts.sum())

    def block_counts(self, block):
        """N_{a_t, y}: counts summed over attributes outside ``block``."""
        return block_sum(self.counts, block)


@dataclass(frozen=True)
class JointPMF:
    schema: AttributeSchema
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != self.schema.shape:
            try:
                probs = probs.reshape(self.schema.shape)
            except ValueError:
                raise SchemaError(
                    "pmf has %d entries, schema needs %d" % (probs.size, self.schema.n_cells)
                ) from None
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ParameterError("pmf entries must be finite and non-negative")
        total = math.fsum(probs.ravel())
        if abs(total - 1.0) > PMF_ATOL:
            raise ParameterError("pmf sums to %.17g, not 1" % total)
        object.__setattr__(self, "probs", _frozen(probs))

    @classmethod
    def normalized(cls, schema, weights):
        w = np.asarray(weights, dtype=np.float64)
        return cls(schema, w / math.fsum(w.ravel()))

    @property
    def d(self):
        return self.schema.d

    @property
    def p_a(self):
        """Attribute marginal p_A, shape ``attr_cards``."""
        return self.probs.sum(axis=-1)

    @property
    def p_y(self):
        return self.probs.reshape(-1, self.schema.label_card).sum(axis=0)

    def to_json(self):
        return {
            "schema": self.schema.to_json(),
            "shape": list(self.schema.shape),
            "probs": [float(x) for x in self.probs.ravel()],
        }

    @classmethod
    def from_json(cls, obj):
        schema = AttributeSchema.from_json(obj["schema"])
        return cls(schema, np.asarray(obj["probs"], dtype=np.float64).reshape(schema.shape))


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("%s is not valid JSON: %s" % (path, exc)) from None


def load_pmf(path):
    """Read a pmf JSON, either bare or wrapped in a report under ``"pmf"``."""
    obj = _read_json(path)
    if isinstance(obj, dict) and "pmf" in obj:
        obj = obj["pmf"]
    try:
        return JointPMF.from_json(obj)
    except (KeyError, TypeError) as exc:
        raise SchemaError("%s is not a pmf file (%s)" % (path, exc)) from None


@dataclass(frozen=True)
class Partition:
    """Partition of the attribute indices ``0 .. d-1`` into blocks.

    Stored canonically: each block sorted, blocks ordered by smallest element.
    """

    blocks: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        blocks = []
        for b in self.blocks:
            b = tuple(sorted(int(i) for i in b))
            if not b:
                raise StructureError("partition blocks must be non-empty")
            if len(set(b)) != len(b):
                raise StructureError("repeated index inside block %r" % (b,))
            blocks.append(b)
        blocks.sort(key=lambda b: b[0])
        flat = [i for b in blocks for i in b]
        if sorted(flat) != list(range(len(flat))):
            raise StructureError("blocks %r do not partition 0..%d" % (blocks, len(flat) - 1))
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def singletons(cls, d):
        return cls(tuple((k,) for k in range(d)))

    @classmethod
    def trivial(cls, d):
        return cls((tuple(range(d)),))

    @classmethod
    def parse(cls, text):
        """Parse ``"0,1|2"`` style notation."""
        try:
            return cls(tuple(tuple(int(x) for x in part.split(",")) for part in text.split("|")))
        except ValueError:
            raise StructureError("cannot parse partition %r" % text) from None

    @property
    def d(self):
        return sum(len(b) for b in self.blocks)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __str__(self):
        return "|".join(",".join(str(i) for i in b) for b in self.blocks)

    def merge(self, i, j):
        """Partition with blocks ``i`` and ``j`` (positions) merged."""
        if i == j:
            raise StructureError("cannot merge a block with itself")
        merged = self.blocks[i] + self.blocks[j]
        rest = [b for k, b in enumerate(self.blocks) if k not in (i, j)]
        return Partition(tuple(rest) + (merged,))

    def check(self, d):
        if self.d != d:
            raise StructureError("partition covers %d attributes, expected %d" % (self.d, d))
        return self

    def to_json(self):
        return [list(b) for b in self.blocks]


def block_sum(arr, block):
    """Sum a ``(*attr_cards, |Y|)`` array over the attribute axes not in ``block``."""
    d = arr.ndim - 1
    block = tuple(block)
    if not block:
        raise StructureError("block must be non-empty")
    if any(k < 0 or k >= d for k in block) or len(set(block)) != len(block):
        raise StructureError("block %r is not a subset of 0..%d" % (block, d - 1))
    other = tuple(k for k in range(d) if k not in block)
    out = arr.sum(axis=other) if other else arr
    # summed axes drop out in increasing order; reorder remaining to match ``block``
    kept = sorted(block)
    order = [kept.index(k) for k in block] + [len(block)]
    return np.transpose(out, order)


def infer_schema(records, attr_names, label_name="prediction"):
    """Schema whose alphabets are the sorted distinct values in ``records``."""
    records = list(records)
    d = len(attr_names)
    seen = [set() for _ in range(d)]
    labels = set()
    for values, label in records:
        for k in range(d):
            seen[k].add(values[k])
        labels.add(label)
    if not records:
        raise NoDataError("no data")
    if len(labels) < 2:
        # a constant classifier still needs a 2-letter alphabet
        raise SchemaError(
            "only one prediction value %r observed; declare the label alphabet in a schema file"
            % next(iter(labels))
        )
    return AttributeSchema.from_values(
        attr_names, [sorted(s) for s in seen], sorted(labels), label_name=label_name
    )


def ingest_counts(records: Iterable[Tuple[Sequence, Hashable]], schema: AttributeSchema, weights=None):
    """Tally ``(attribute values, label)`` records into a ContingencyTable.

    ``weights`` optionally gives a non-negative integer multiplicity per record
    (pre-aggregated input).
    """
    lookups = [{v: i for i, v in enumerate(vals)} for vals in schema.attr_values]
    label_lookup = {v: i for i, v in enumerate(schema.label_values)}
    counts = np.zeros(schema.shape, dtype=np.int64)
    weights = iter(weights) if weights is not None else None
    for row, (values, label) in enumerate(records):
        if len(values) != schema.d:
            raise SchemaError("record %d has %d attribute values, expected %d" % (row, len(values), schema.d))
        idx = []
        for k, v in enumerate(values):
            try:
                idx.append(lookups[k][v])
            except KeyError:
                raise SchemaError(
                    "value %r of column %r is not in the declared alphabet" % (v, schema.attr_names[k])
                ) from None
        try:
            idx.append(label_lookup[label])
        except KeyError:
            raise SchemaError(
                "value %r of column %r is not in the declared alphabet" % (label, schema.label_name)
            ) from None
        w = 1 if weights is None else int(next(weights))
        if w < 0:
            raise SchemaError("negative multiplicity on record %d" % row)
        counts[tuple(idx)] += w
    return ContingencyTable(schema, counts)


def read_csv_records(path, attr_columns, pred_column, count_column=None):
    """Read records (and optional multiplicities) from a headed UTF-8 CSV."""
    records, weights = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise NoDataError("no data")
        wanted = list(attr_columns) + [pred_column] + ([count_column] if count_column else [])
        missing = [c for c in wanted if c not in reader.fieldnames]
        if missing:
            raise SchemaError("CSV lacks column(s) %s" % ", ".join(repr(c) for c in missing))
        for lineno, row in enumerate(reader, start=2):
            for c in wanted:
                if row[c] is None or row[c] == "":
                    raise SchemaError("empty cell in column %r on line %d" % (c, lineno))
            records.append((tuple(row[c] for c in attr_columns), row[pred_column]))
            if count_column:
                try:
                    weights.append(int(row[count_column]))
                except ValueError:
                    raise SchemaError(
                        "non-integer count %r on line %d" % (row[count_column], lineno)
                    ) from None
    return records, (weights if count_column else None)


def read_csv_table(path, attr_columns, pred_column, schema=None, count_column=None):
    records, weights = read_csv_records(path, attr_columns, pred_column, count_column)
    if schema is None:
        schema = infer_schema(records, attr_columns, label_name=pred_column)
    else:
        if list(schema.attr_names) != list(attr_columns):
            raise SchemaError(
                "schema attributes %s do not match selected columns %s"
                % (list(schema.attr_names), list(attr_columns))
            )
        schema = _stringify(schema)
    return ingest_counts(records, schema, weights)


def _stringify(schema):
    # CSV cells are strings; compare declared values as strings too
    return AttributeSchema.from_values(
        schema.attr_names,
        [[str(v) for v in vals] for vals in schema.attr_values],
        [str(v) for v in schema.label_values],
        label_name=schema.label_name,
    )


def empirical_pmf(table: ContingencyTable) -> JointPMF:
    n = table.n
    if n == 0:
        raise NoDataError("no data")
    return JointPMF(table.schema, table.counts / n)


def smoothed_pmf(table: ContingencyTable, alpha: float) -> JointPMF:
    """Posterior-mean pmf under a symmetric Dirichlet(alpha) prior."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive, got %r" % alpha)
    denom = table.n + table.schema.n_cells * alpha
    return JointPMF(table.schema, (table.counts + alpha) / denom)


def marginal_pmf(pmf: JointPMF, block) -> JointPMF:
    """p_{A_block, Y}; attributes kept in increasing index order."""
    block = tuple(block)
    if not block:
        raise StructureError("block must be non-empty")
    block = tuple(sorted(block))
    return JointPMF(pmf.schema.sub_schema(block), block_sum(pmf.probs, block))


def merge_attributes(pmf: JointPMF, q: Partition) -> JointPMF:
    """Flatten each block of ``q`` into a single attribute.

    Values of a merged attribute are ordered lexicographically over the
    block's (sorted) original indices, i.e. plain C-order flattening.
    """
    q.check(pmf.d)
    schema = pmf.schema
    order = [k for b in q for k in b] + [pmf.d]
    arr = np.transpose(pmf.probs, order)
    cards = tuple(math.prod(schema.attr_cards[k] for k in b) for b in q)
    arr = arr.reshape(cards + (schema.label_card,))
    names, values = [], []
    for b in q:
        names.append("+".join(schema.attr_names[k] for k in b))
        if len(b) == 1:
            values.append(schema.attr_values[b[0]])
        else:
            grid = np.indices(tuple(schema.attr_cards[k] for k in b)).reshape(len(b), -1).T
            values.append(
                tuple("|".join(str(schema.attr_values[k][i]) for k, i in zip(b, row)) for row in grid)
            )
    new_schema = AttributeSchema(
        tuple(names), cards, schema.label_card, tuple(values), schema.label_values, schema.label_name
    )
    return JointPMF(new_schema, arr)
