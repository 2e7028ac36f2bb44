"""Synthetic ground truth: Dirichlet pmfs, multinomial samples and fixtures."""

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .pmf_core import AttributeSchema, ContingencyTable, JointPMF


@dataclass(frozen=True)
class RngSpec:
    """Seed plus a derivation path.

    ``child(purpose, index)`` hashes (seed, path, purpose, index) with
    blake2b into a fresh 64-bit seed, so streams do not depend on the order
    in which they are requested.
    """

    seed: int = 0
    path: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    def child(self, purpose, index=0):
        return RngSpec(self.seed, self.path + ((str(purpose), int(index)),))

    def child_seed(self):
        h = hashlib.blake2b(digest_size=8)
        h.update(str(int(self.seed)).encode())
        for purpose, index in self.path:
            h.update(b"\x00" + purpose.encode() + b"\x00" + str(index).encode())
        return int.from_bytes(h.digest(), "little")

    def generator(self):
        return np.random.Generator(np.random.PCG64(self.child_seed()))


def _gen(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    return RngSpec(int(rng)).generator()


def dirichlet_pmf(schema: AttributeSchema, concentration=1.0, rng=RngSpec()) -> JointPMF:
    """Symmetric Dirichlet draw over all cells (normalised Gamma variates)."""
    if not concentration > 0:
        raise ParameterError("concentration must be positive, got %r" % (concentration,))
    g = _gen(rng).standard_gamma(concentration, size=schema.n_cells)
    while g.sum() == 0:  # tiny concentrations can underflow every draw
        g = _gen(rng).standard_gamma(concentration, size=schema.n_cells)
    return JointPMF.normalized(schema, g.reshape(schema.shape))


def sample_table(pmf: JointPMF, n: int, rng=RngSpec()) -> ContingencyTable:
    if n < 1 or int(n) != n:
        raise ParameterError("sample size must be a positive integer, got %r" % (n,))
    p = pmf.probs.ravel()
    counts = _gen(rng).multinomial(int(n), p / p.sum())
    return ContingencyTable(pmf.schema, counts.reshape(pmf.schema.shape))


def ce8() -> JointPMF:
    """Two fair binary attributes; the label is their XOR with prob 3/4."""
    p = np.empty((2, 2, 2))
    for a1 in range(2):
        for a2 in range(2):
            for y in range(2):
                p[a1, a2, y] = 3 / 16 if y == a1 ^ a2 else 1 / 16
    return JointPMF(AttributeSchema.binary(2), p)


def a3_scenario(which: int) -> JointPMF:
    """One attribute with 991 groups: one of mass 1/100, 990 of mass 1/1000."""
    if which not in (1, 2):
        raise ParameterError("scenario must be 1 or 2")
    mass = np.full(991, 1 / 1000)
    mass[0] = 1 / 100
    rate = np.full(991, 0.5)
    rate[0] = 1.0
    if which == 2:
        rate[1:496] = 1.0
        rate[496:] = 0.0
    p = np.stack([mass * (1 - rate), mass * rate], axis=-1)
    schema = AttributeSchema(("group",), (991,), 2)
    return JointPMF(schema, p / p.sum())


def noise_family(d: int, seed=0) -> JointPMF:
    """Only A_1 depends on the label; A_2..A_d are independent fair coins."""
    if d < 1:
        raise ParameterError("d must be positive")
    gen = RngSpec(int(seed)).child("noise-family", d).generator()
    head = gen.dirichlet(np.ones(4)).reshape(2, 2)  # (A_1, Y)
    p = head.reshape((2,) + (1,) * (d - 1) + (2,)) * np.full((1,) + (2,) * (d - 1) + (1,), 0.5 ** (d - 1))
    return JointPMF.normalized(AttributeSchema.binary(d), p)


_NOISE = re.compile(r"noise-family\((?:d=)?(\d+)(?:,\s*(?:seed=)?(\d+))?\)$")


def fixture(name: str) -> JointPMF:
    name = name.strip()
    if name == "CE8":
        return ce8()
    if name == "A3-scenario1":
        return a3_scenario(1)
    if name == "A3-scenario2":
        return a3_scenario(2)
    m = _NOISE.match(name)
    if m:
        return noise_family(int(m.group(1)), int(m.group(2) or 0))
    raise ParameterError("unknown fixture %r" % name)
