import numpy as np
import pytest

from causalcpd.core.dataset import Dataset
from causalcpd.core.export import dump_segments
from causalcpd.core.segments import (
    ConfigMatrix,
    build_segments,
    config_index,
    configuration_indices,
    load_segment_dump,
    position_before,
)
from causalcpd.core.types import Domain, LaggedParentSet
from causalcpd.utils.error_handler import DataError


def test_config_matrix_odometer_order():
    matrix = ConfigMatrix.build(LaggedParentSet.of([(0, 1), (1, 2)]), 2)
    assert matrix.rows.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert config_index([1, 0], 2) == 2
    ternary = ConfigMatrix.build(LaggedParentSet.of([(0, 1), (0, 2)]), 3)
    assert len(ternary) == 9
    assert ternary.rows[5].tolist() == [1, 2]


def test_config_matrix_projection():
    full = LaggedParentSet.of([(0, 1), (1, 1), (2, 3)])
    matrix = ConfigMatrix.build(full, 2)
    projected = matrix.project(LaggedParentSet.of([(0, 1), (2, 3)]))
    expected = [config_index([row[0], row[2]], 2) for row in matrix.rows]
    assert projected.tolist() == expected


def test_configuration_indices_read_lagged_values():
    ds = Dataset.from_symbols(np.array([[0, 1, 1, 0, 1], [1, 0, 0, 1, 1]]), domain=Domain.binary())
    parents = LaggedParentSet.of([(0, 1), (1, 2)])
    index = configuration_indices(ds, parents, np.array([2, 3, 4]))
    # t=2: X1(1)=1, X2(0)=1 -> 3; t=3: X1(2)=1, X2(1)=0 -> 2; t=4: X1(3)=0, X2(2)=0 -> 0
    assert index.tolist() == [3, 2, 0]


@pytest.mark.parametrize("trial", range(20))
def test_segments_partition_and_reconstruct(trial):
    rng = np.random.default_rng(trial)
    s = int(rng.integers(2, 4))
    n, T = 3, int(rng.integers(50, 300))
    ds = Dataset(codes=rng.integers(0, s, size=(n, T)), domain=Domain.of(range(s)))
    spa = LaggedParentSet.of({(int(rng.integers(0, n)), int(rng.integers(1, 4))) for _ in range(2)})
    j = int(rng.integers(0, n))
    segments = build_segments(ds, spa, j)

    assert len(segments) == s ** len(spa)
    times = np.concatenate([seg.time_indices for seg in segments])
    assert np.array_equal(np.sort(times), np.arange(spa.max_lag, T))
    for seg in segments:
        assert np.all(np.diff(seg.time_indices) > 0)
        assert np.array_equal(seg.values, ds.codes[j, seg.time_indices])
        if seg.length:
            assert set(configuration_indices(ds, spa, seg.time_indices).tolist()) == {seg.config_index}


def test_unseen_configuration_gives_empty_segment():
    codes = np.array([[0] * 20, [0, 1] * 10])
    ds = Dataset(codes=codes, domain=Domain.binary())
    segments = build_segments(ds, LaggedParentSet.of([(0, 1)]), 1)
    assert segments[0].length == 19
    assert segments[1].is_empty and segments[1].flag == "empty"


def test_explicit_start_and_empty_parent_set(random_dataset):
    ds = random_dataset(n=2, T=100)
    spa = LaggedParentSet.of([(0, 2)])
    segments = build_segments(ds, spa, 0, tau_max_eff=5)
    assert min(seg.time_indices.min() for seg in segments if seg.length) == 5
    with pytest.raises(ValueError):
        build_segments(ds, spa, 0, tau_max_eff=1)
    with pytest.raises(ValueError):
        build_segments(ds, LaggedParentSet(), 0)


def test_position_before():
    ds = Dataset(codes=np.array([[0, 1, 0, 1, 1, 0, 1, 0]]), domain=Domain.binary())
    seg = build_segments(ds, LaggedParentSet.of([(0, 1)]), 0)[1]
    # previous value 1 at t = 2, 4, 5, 7
    assert seg.time_indices.tolist() == [2, 4, 5, 7]
    assert position_before(seg, 5) == 2
    assert position_before(seg, 0) == 0
    assert position_before(seg, 100) == 4


def test_segment_dump_reads_back(tmp_path, random_dataset):
    ds = random_dataset(n=2, T=200)
    spa = LaggedParentSet.of([(0, 1), (1, 1)])
    segments = build_segments(ds, spa, 1)
    dump_segments(segments, tmp_path, ds.domain.symbols, ds.component_names, {1: spa.to_named(ds.component_names)})

    loaded, index = load_segment_dump(tmp_path)
    assert index["components"] == ["X1", "X2"]
    assert [seg.config_index for seg in loaded] == [seg.config_index for seg in segments]
    for a, b in zip(loaded, segments):
        assert a.component == b.component and a.config == b.config
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.time_indices, b.time_indices)


def test_segment_dump_rejects_foreign_values(tmp_path, random_dataset):
    ds = random_dataset(n=1, T=60)
    segments = build_segments(ds, LaggedParentSet.of([(0, 1)]), 0)
    dump_segments(segments, tmp_path, ds.domain.symbols, ds.component_names, {})
    target = tmp_path / "seg_c0_l0.csv"
    target.write_text("t,value\n1,7\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_segment_dump(tmp_path)
