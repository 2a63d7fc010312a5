import numpy as np
import pytest

from causalcpd.core.detector import (
    argmax_with_ties,
    detect,
    project_window,
    significance_threshold,
)
from causalcpd.core.dataset import Dataset
from causalcpd.core.rulsif import PeSeries
from causalcpd.core.scm_gen import random_spec, simulate
from causalcpd.core.segments import Segment
from causalcpd.core.types import (
    ChangeKind,
    DetectorConfig,
    DiscoveryConfig,
    Domain,
    LaggedParentSet,
    ParentGraph,
    PeParams,
)
from causalcpd.utils.error_handler import NoUsableSegmentsError


def series(lam, scores):
    scores = np.asarray(scores, dtype=float)
    spans = np.zeros((len(scores), 2), dtype=np.int64)
    return PeSeries(component=0, config_index=lam, scores=scores, first_spans=spans, second_spans=spans)


def detector_config(n_w=100, **kwargs):
    return DetectorConfig(pe=PeParams(n_w=n_w), **kwargs)


def test_argmax_prefers_smaller_configuration_then_window():
    series_map = {1: series(1, [0.3, 0.2]), 0: series(0, [0.1, 0.3, 0.3]), 2: series(2, [])}
    assert argmax_with_ties(series_map) == (0, 1)
    series_map[3] = series(3, [0.0, 0.31])
    assert argmax_with_ties(series_map) == (3, 1)


def test_argmax_over_empty_series_raises():
    with pytest.raises(NoUsableSegmentsError):
        argmax_with_ties({0: series(0, []), 1: series(1, [])})


def test_project_window_maps_back_to_original_time():
    values = np.zeros(10, dtype=np.int64)
    seg = Segment(component=0, config_index=0, config=(0,), values=values, time_indices=np.arange(10) * 2)
    assert project_window(seg, 2, PeParams(n_w=3)) == (8, 10, 9.0)
    assert project_window(seg, 1, PeParams(n_w=3, n_st=2)) == (8, 10, 9.0)


def test_oracle_detection_finds_a_soft_change(markov_switch_spec):
    ds, truth = simulate(markov_switch_spec())
    report = detect(ds, detector_config(), spa=truth.spa)

    c = report.component(0)
    assert report.oracle_spa
    assert c.detected and c.reason is None
    assert abs(c.projected_time - 1000) < 200
    assert c.t_a < c.projected_time < c.t_b
    assert c.winning_config == (c.winning_lambda,)
    assert c.peak_score == pytest.approx(c.winning_series.scores.max())
    assert len(c.pe_series_all) == 2


def test_empty_parent_set_falls_back_to_self_lag(markov_switch_spec):
    ds, _ = simulate(markov_switch_spec())
    report = detect(ds, detector_config(), spa=ParentGraph.empty(1))
    c = report.component(0)
    assert c.spa_fallback
    assert c.spa == LaggedParentSet.of([(0, 1)])
    assert c.detected


def test_window_longer_than_every_segment_gives_no_detection(markov_switch_spec):
    ds, truth = simulate(markov_switch_spec())
    report = detect(ds, detector_config(n_w=1500), spa=truth.spa)
    c = report.component(0)
    assert not c.detected
    assert c.projected_time is None
    assert "3001" in c.reason
    assert {s.config_index for s in c.skipped_segments} == {0, 1}
    assert report.to_json()["components"][0]["projected_time"] is None


def test_score_threshold_marks_weak_peaks(markov_switch_spec):
    ds, truth = simulate(markov_switch_spec())
    weak = detect(ds, detector_config(score_threshold=10.0), spa=truth.spa).component(0)
    assert weak.significant is False and not weak.detected
    assert weak.projected_time is not None
    assert weak.reason.startswith("no significant change")

    strong = detect(ds, detector_config(score_threshold=0.0), spa=truth.spa).component(0)
    assert strong.significant is True and strong.detected


def test_all_zero_scores_are_not_a_change():
    ds = Dataset(codes=np.array([[0, 1] * 500]), domain=Domain.binary())
    spa = ParentGraph(parents=(LaggedParentSet.of([(0, 1)]),))
    c = detect(ds, detector_config(n_w=50), spa=spa).component(0)
    assert (c.winning_lambda, c.window_index) == (0, 0)
    assert c.peak_score == 0.0
    assert c.significant is False and not c.detected
    assert c.reason == "no significant change: peak 0"


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_stationary_data_falls_below_the_score_threshold(seed):
    spec = random_spec(n=2, T=4000, tau_max=2, spa_size=2, change_kind=ChangeKind.none, seed=seed)
    ds, truth = simulate(spec)
    report = detect(ds, detector_config(n_w=50, score_threshold=0.1), spa=truth.spa)
    for c in report.components:
        assert c.peak_score is not None and c.peak_score < 0.1
        assert c.significant is False and not c.detected
        assert c.reason.startswith("no significant change")


def test_min_segment_length_must_cover_a_window():
    with pytest.raises(ValueError):
        DetectorConfig(pe=PeParams(n_w=50), min_segment_length=100)
    assert DetectorConfig(pe=PeParams(n_w=50)).effective_min_segment_length == 101


def test_refinement_splits_parent_sets(hard_switch_spec):
    ds, truth = simulate(hard_switch_spec())
    cfg = detector_config(refine=True, discovery=DiscoveryConfig(alpha_level=0.001))
    report = detect(ds, cfg, spa=truth.spa)

    x1 = report.component(0)
    assert abs(x1.projected_time - 2000) < 100
    assert x1.parents_pre == truth.parents_pre[0]
    assert x1.parents_post == truth.parents_post[0]
    assert x1.refine_flags == ()
    for c in report.components:
        assert c.parents_pre.issubset(c.spa) and c.parents_post.issubset(c.spa)


def test_spa_must_cover_every_component(hard_switch_spec):
    ds, _ = simulate(hard_switch_spec())
    with pytest.raises(ValueError):
        detect(ds, detector_config(), spa=ParentGraph.empty(1))


def test_worker_count_does_not_change_the_report(hard_switch_spec):
    ds, truth = simulate(hard_switch_spec())
    single = detect(ds, detector_config(), threads=1, spa=truth.spa)
    pooled = detect(ds, detector_config(), threads=2, spa=truth.spa)
    assert single.to_json() == pooled.to_json()


def test_discovery_then_detection(hard_switch_spec):
    ds, truth = simulate(hard_switch_spec())
    cfg = detector_config(discovery=DiscoveryConfig(tau_ub=2, pc_max_conds=1, alpha_level=0.001))
    report = detect(ds, cfg)
    assert not report.oracle_spa
    assert truth.spa[0].issubset(report.spa_hat[0])
    assert abs(report.component(0).projected_time - 2000) < 200


def test_significance_threshold_from_null_peaks():
    peaks = [0.01 * k for k in range(1, 101)] + [float("inf")]
    assert significance_threshold(peaks, 0.5) == pytest.approx(0.505)
    assert significance_threshold(peaks) <= 1.0
    with pytest.raises(ValueError):
        significance_threshold([float("inf")])
