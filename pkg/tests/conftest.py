import numpy as np
import pytest

from causalcpd.core.dataset import Dataset
from causalcpd.core.scm_gen import RegimeMechanism, RegimePair, ScmSpec
from causalcpd.core.types import ChangeKind, Domain, LaggedParentSet
from causalcpd.utils.config import Configuration


@pytest.fixture(autouse=True)
def fresh_configuration():
    Configuration.reset()
    yield
    Configuration.reset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_dataset(rng):
    """n x T uniform binary series; independent across components and time."""

    def make(n=3, T=500, s=2):
        return Dataset(codes=rng.integers(0, s, size=(n, T)), domain=Domain.of(range(s)))

    return make


def mechanism(parents, cpt):
    return RegimeMechanism(parents=LaggedParentSet.of(parents), cpt=tuple(tuple(row) for row in cpt))


@pytest.fixture
def markov_switch_spec():
    """
    One binary component driven by its own lag, with a soft change at ``change_point``.

    Before the change X stays in its state most of the time; afterwards it
    flips more often than not.
    """

    def make(T=2000, change_point=1000, seed=11):
        pre = mechanism([(0, 1)], [[0.9, 0.1], [0.2, 0.8]])
        post = mechanism([(0, 1)], [[0.3, 0.7], [0.7, 0.3]])
        return ScmSpec(
            n=1,
            T=T,
            tau_max=1,
            domain=Domain.binary(),
            change_points=(change_point,),
            regimes=(RegimePair(pre=pre, post=post),),
            change_kind=(ChangeKind.soft,),
            seed=seed,
            margin=1,
        )

    return make


@pytest.fixture
def hard_switch_spec():
    """
    X1 copies its own past before the change and X2's past after it; X2 is fair coin flips.
    """

    def make(T=4000, change_point=2000, seed=5):
        x1 = RegimePair(
            pre=mechanism([(0, 1)], [[0.95, 0.05], [0.05, 0.95]]),
            post=mechanism([(1, 1)], [[0.95, 0.05], [0.05, 0.95]]),
        )
        coin = mechanism([(1, 1)], [[0.5, 0.5], [0.5, 0.5]])
        x2 = RegimePair(pre=coin, post=coin)
        return ScmSpec(
            n=2,
            T=T,
            tau_max=1,
            domain=Domain.binary(),
            change_points=(change_point, change_point),
            regimes=(x1, x2),
            change_kind=(ChangeKind.hard, ChangeKind.none),
            seed=seed,
            margin=1,
        )

    return make
