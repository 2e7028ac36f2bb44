import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from intfair.pmf_core import AttributeSchema, JointPMF
from intfair.synth import ce8


@pytest.fixture
def ce8_pmf():
    return ce8()


def random_pmf(rng, cards=(2, 2), label_card=2, concentration=1.0, floor=0.0):
    schema = AttributeSchema(tuple("A%d" % (k + 1) for k in range(len(cards))), cards, label_card)
    w = rng.dirichlet(np.full(schema.n_cells, concentration)) + floor
    return JointPMF.normalized(schema, w.reshape(schema.shape))


def parity_pmf(d, rho):
    """Label equals the parity of d binary attributes, flipped with prob rho."""
    p = np.zeros((2,) * (d + 1))
    for idx in itertools.product(range(2), repeat=d + 1):
        p[idx] = ((1 - rho) if sum(idx[:-1]) % 2 == idx[-1] else rho) / 2**d
    return JointPMF(AttributeSchema.binary(d), p)


@st.composite
def pmfs(draw, max_d=3, max_card=3, max_label=3, positive=True):
    d = draw(st.integers(1, max_d))
    cards = tuple(draw(st.integers(1 if d > 1 else 2, max_card)) for _ in range(d))
    label_card = draw(st.integers(2, max_label))
    seed = draw(st.integers(0, 2**32 - 1))
    conc = draw(st.sampled_from([0.3, 1.0, 5.0]))
    return random_pmf(np.random.default_rng(seed), cards, label_card, conc, 1e-3 if positive else 0.0)
