import numpy as np
import pytest

from causalcpd.core.citest import CiQuery, g_statistic, g_test
from causalcpd.core.dataset import Dataset
from causalcpd.core.types import Domain, LaggedParentSet, link
from causalcpd.utils.error_handler import DataError


def noisy_copy(rng, source, flip):
    return np.where(rng.random(len(source)) < flip, 1 - source, source)


def test_g_statistic_of_independent_table():
    g, dof = g_statistic(np.array([[10, 10], [10, 10]]))
    assert g == pytest.approx(0.0)
    assert dof == 1


def test_g_statistic_matches_hand_computation():
    table = np.array([[30, 10], [10, 30]])
    expected = 2 * (2 * 30 * np.log(30 / 20) + 2 * 10 * np.log(10 / 20))
    g, dof = g_statistic(table)
    assert g == pytest.approx(expected)
    assert dof == 1


def test_g_statistic_degenerate_margin():
    assert g_statistic(np.array([[5, 7], [0, 0]])) == (0.0, 0)


def test_lagged_copy_is_dependent(rng):
    x = rng.integers(0, 2, 2000)
    y = np.roll(noisy_copy(rng, x, 0.2), 2)
    ds = Dataset(codes=np.vstack([x, y]), domain=Domain.binary())
    verdict = g_test(ds, CiQuery(x=link(0, 2), y=1))
    assert not verdict.independent
    assert verdict.p_value < 1e-10
    assert verdict.dof == 1


def test_independent_series(rng):
    ds = Dataset(codes=rng.integers(0, 2, size=(2, 4000)), domain=Domain.binary())
    verdict = g_test(ds, CiQuery(x=link(0, 1), y=1, alpha_level=1e-6))
    assert verdict.independent
    assert verdict.effective_samples == 3999


def test_conditioning_screens_off_a_chain(rng):
    x = rng.integers(0, 2, 3000)
    z = np.roll(noisy_copy(rng, x, 0.1), 1)
    y = np.roll(z, 1)
    ds = Dataset(codes=np.vstack([x, z, y]), domain=Domain.binary())
    assert not g_test(ds, CiQuery(x=link(0, 2), y=2)).independent
    verdict = g_test(ds, CiQuery(x=link(0, 2), y=2, cond=LaggedParentSet.of([(1, 1)])))
    assert verdict.independent
    assert verdict.strata == 2


def test_sparse_strata_force_dependence(random_dataset):
    ds = random_dataset(n=4, T=200)
    cond = LaggedParentSet.of([(1, 1), (2, 1), (3, 1)])
    verdict = g_test(ds, CiQuery(x=link(0, 1), y=0, cond=cond), t_range=(0, 30))
    assert verdict.forced_dependent
    assert not verdict.independent


def test_range_is_clipped_to_the_lags(random_dataset):
    ds = random_dataset(n=2, T=300)
    verdict = g_test(ds, CiQuery(x=link(1, 3), y=0), t_range=(0, 300))
    assert verdict.effective_samples == 297
    with pytest.raises(DataError):
        g_test(ds, CiQuery(x=link(1, 3), y=0), t_range=(0, 2))


def test_query_rejects_conditioning_on_x():
    with pytest.raises(ValueError):
        CiQuery(x=link(0, 1), y=1, cond=LaggedParentSet.of([(0, 1)]))


def test_swapping_x_and_y_gives_the_same_verdict(rng):
    a, b, c = rng.integers(0, 2, size=(3, 3000))
    b = np.where(rng.random(3000) < 0.3, np.roll(a, 1), b)
    ds = Dataset(codes=np.vstack([a, b, c]), domain=Domain.binary())
    # same (X_{t-1}, Y_t) pairs with the roles exchanged
    swapped = Dataset(codes=np.vstack([np.roll(b, -1), np.roll(a, 1), c]), domain=Domain.binary())
    cond = LaggedParentSet.of([(2, 1)])

    forward = g_test(ds, CiQuery(x=link(0, 1), y=1, cond=cond))
    backward = g_test(swapped, CiQuery(x=link(0, 1), y=1, cond=cond))
    assert backward.statistic == pytest.approx(forward.statistic, rel=1e-12)
    assert backward.p_value == pytest.approx(forward.p_value, rel=1e-9, abs=1e-300)
    assert backward.dof == forward.dof
    assert backward.independent == forward.independent


def test_relabelling_symbols_leaves_the_test_unchanged(rng):
    x = rng.integers(0, 3, 4000)
    y = np.where(rng.random(4000) < 0.2, np.roll(x, 1), rng.integers(0, 3, 4000))
    z = rng.integers(0, 3, 4000)
    domain = Domain.of(range(3))
    query = CiQuery(x=link(0, 1), y=1, cond=LaggedParentSet.of([(2, 1)]))
    original = g_test(Dataset(codes=np.vstack([x, y, z]), domain=domain), query)

    perm = np.array([2, 0, 1])
    relabelled = g_test(Dataset(codes=perm[np.vstack([x, y, z])], domain=domain), query)
    assert relabelled.statistic == pytest.approx(original.statistic, rel=1e-12)
    assert relabelled.p_value == pytest.approx(original.p_value, rel=1e-9, abs=1e-300)
    assert relabelled.dof == original.dof


def test_xor_is_dependent_only_given_the_other_input(rng):
    x, z = rng.integers(0, 2, size=(2, 5000))
    y = np.roll(x ^ z, 1)
    ds = Dataset(codes=np.vstack([x, y, z]), domain=Domain.binary())

    marginal = g_test(ds, CiQuery(x=link(0, 1), y=1, alpha_level=1e-3))
    assert marginal.independent

    conditional = g_test(ds, CiQuery(x=link(0, 1), y=1, cond=LaggedParentSet.of([(2, 1)])))
    assert not conditional.independent
    assert conditional.p_value < 1e-10
    assert conditional.strata == 2


@pytest.mark.slow
def test_rejection_rate_matches_the_level_under_the_null():
    rng = np.random.default_rng(77)
    alpha = 0.05
    trials = 2000
    rejected = 0
    for _ in range(trials):
        ds = Dataset(codes=rng.integers(0, 2, size=(2, 1000)), domain=Domain.binary())
        rejected += not g_test(ds, CiQuery(x=link(0, 1), y=1, alpha_level=alpha)).independent
    assert abs(rejected / trials - alpha) <= 0.5 * alpha
