import json

import numpy as np
import pytest

from brainvidpy.errors import ConfigError, RejectedInputError, UndefinedRoiError
from brainvidpy.interpret.attention import (
    AttentionSummary,
    attention_to_voxels,
    layer_indices,
    read_summaries,
    summarize,
    token_scores,
    write_summaries,
)
from brainvidpy.interpret.heatmap import export_heatmap, voxel_grid
from brainvidpy.interpret.roi import roi_aggregate
from brainvidpy.interpret.stats import STAGE_COLUMNS, attention_sums, compare_stages, ttest_two_sample
from brainvidpy.synthdata.rois import RoiLayout, make_roi_layout


def _layout(*blocks, n_voxels=6):
    masks = {}
    for k, (start, stop) in enumerate(blocks):
        mask = np.zeros(n_voxels, dtype=bool)
        mask[start:stop] = True
        masks[f"roi{k}"] = mask
    return RoiLayout(masks=masks)


@pytest.mark.parametrize("n_layers,middle", [(3, 1), (4, 1), (6, 2), (24, 11)])
def test_layer_indices(n_layers, middle):
    assert layer_indices(n_layers) == {'first': 0, 'middle': middle, 'last': n_layers - 1}


def test_layer_indices_need_three_layers():
    with pytest.raises(ConfigError):
        layer_indices(2)


def test_token_scores_modes():
    maps = np.array([[[0.5, 0.5], [0.0, 1.0]]])
    np.testing.assert_allclose(token_scores(maps), [0.25, 0.75])
    np.testing.assert_allclose(token_scores(maps, mode='paid'), [0.5, 0.0])
    with pytest.raises(ConfigError):
        token_scores(maps, mode='rollout')


def test_voxel_attention_conserves_mass(tiny_encoder, rng):
    per_voxel = attention_to_voxels(tiny_encoder, rng.normal(size=(2, 64)), 0)
    assert per_voxel.shape == (64,)
    assert np.all(per_voxel >= 0)
    assert per_voxel.sum() == pytest.approx(1.0, abs=1e-5)


def test_summarize_single_window_equals_its_map(tiny_encoder, rng):
    window = rng.normal(size=(1, 2, 64))
    (summary,) = summarize(tiny_encoder, window, stage='init', layers=('last',))
    assert (summary.layer, summary.layer_index, summary.n_samples) == ('last', 2, 1)
    np.testing.assert_allclose(summary.per_voxel, attention_to_voxels(tiny_encoder, window[0], 2))


def test_summarize_averages_windows(tiny_encoder, tiny_dataset):
    summaries = summarize(tiny_encoder, tiny_dataset[2].fmri[:3], stage='post_mae')
    assert [s.layer for s in summaries] == ['first', 'middle', 'last']
    for s in summaries:
        assert s.attention_sum == pytest.approx(1.0, abs=1e-5)


def test_summarize_validation(tiny_encoder):
    with pytest.raises(ConfigError):
        summarize(tiny_encoder, np.zeros((1, 2, 64)), stage='midway')
    with pytest.raises(ConfigError):
        summarize(tiny_encoder, np.zeros((0, 2, 64)), stage='init')


def test_summaries_round_trip(tmp_path):
    summaries = [AttentionSummary(np.arange(4.0), 'first', 0, 'init', 5),
                 AttentionSummary(np.ones(4), 'last', 5, 'post_full', 5)]
    write_summaries(summaries, tmp_path / "summaries.nfta")
    back = read_summaries(tmp_path / "summaries.nfta")
    assert [(s.stage, s.layer, s.layer_index, s.n_samples) for s in back] == [('init', 'first', 0, 5), ('post_full', 'last', 5, 5)]
    np.testing.assert_array_equal(back[0].per_voxel, np.arange(4.0))


def test_roi_aggregate_examples():
    layout = _layout((0, 2), (2, 5))
    means = roi_aggregate(np.array([1.0, 3.0, 0.0, 0.0, 6.0, 100.0]), layout)
    assert means == {'roi0': 2.0, 'roi1': 2.0}


def test_roi_aggregate_errors():
    with pytest.raises(UndefinedRoiError):
        roi_aggregate(np.zeros(6), _layout((0, 3), (2, 4)))
    with pytest.raises(UndefinedRoiError):
        roi_aggregate(np.zeros(6), _layout((0, 3), (3, 3)))
    with pytest.raises(UndefinedRoiError):
        roi_aggregate(np.zeros(5), _layout((0, 3)))


def test_ttest_identical_groups():
    res = ttest_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert res.t_stat == pytest.approx(0.0)
    assert res.p_value == pytest.approx(1.0)


def test_ttest_swap_flips_sign(rng):
    a, b = rng.normal(0.0, 1.0, 20), rng.normal(0.5, 2.0, 30)
    ab, ba = ttest_two_sample(a, b), ttest_two_sample(b, a)
    assert ab.t_stat == pytest.approx(-ba.t_stat)
    assert ab.p_value == pytest.approx(ba.p_value)
    assert ab.df == pytest.approx(ba.df)


def test_ttest_large_effect(rng):
    res = ttest_two_sample(rng.normal(5.0, 1.0, 50), rng.normal(0.0, 1.0, 50), alternative='greater')
    assert res.t_stat > 0
    assert res.p_value < 1e-6


def test_ttest_constant_groups():
    equal = ttest_two_sample([2.0, 2.0], [2.0, 2.0, 2.0])
    assert (equal.t_stat, equal.p_value) == (0.0, 1.0)
    apart = ttest_two_sample([3.0, 3.0], [1.0, 1.0])
    assert apart.t_stat == np.inf and apart.p_value == 0.0
    assert ttest_two_sample([3.0, 3.0], [1.0, 1.0], alternative='less').p_value == 1.0


def test_ttest_validation():
    with pytest.raises(RejectedInputError):
        ttest_two_sample([1.0], [1.0, 2.0])
    with pytest.raises(RejectedInputError):
        ttest_two_sample([1.0, np.nan], [1.0, 2.0])
    with pytest.raises(ConfigError):
        ttest_two_sample([1.0, 2.0], [1.0, 2.0], alternative='sideways')


def test_compare_stages_table(rng):
    layout = make_roi_layout(64, patch_size=8)
    before = [AttentionSummary(rng.random(64), name, k, 'init', 4) for k, name in enumerate(('first', 'middle', 'last'))]
    after = [AttentionSummary(rng.random(64) + 1.0, name, k, 'post_full', 4) for k, name in enumerate(('first', 'middle', 'last'))]
    table = compare_stages(before, after, layout)
    assert list(table.columns) == STAGE_COLUMNS
    assert len(table) == 3 * len(layout.masks)
    assert set(table["stage"]) == {'init->post_full'}
    assert (table["t"] > 0).all()
    sums = attention_sums(before + after)
    assert list(sums.columns) == ["stage", "layer", "layer_index", "attention_sum"]
    assert len(sums) == 6


def test_voxel_grid_pads():
    grid = voxel_grid(np.arange(5.0))
    assert grid.shape == (2, 3)
    assert np.isnan(grid[1, 2])


def test_heatmap_is_deterministic(tmp_path, rng):
    layout = make_roi_layout(64, patch_size=8)
    summary = AttentionSummary(rng.random(64), 'middle', 1, 'post_contrastive', 3)
    first = export_heatmap(summary, layout, tmp_path / "a" / "map.png")
    second = export_heatmap(summary, layout, tmp_path / "b" / "map.png")
    assert first.read_bytes() == second.read_bytes()
    sidecar = json.loads(first.with_suffix(".json").read_text())
    assert sidecar["vmin"] == pytest.approx(summary.per_voxel.min())
    assert sidecar["vmax"] == pytest.approx(summary.per_voxel.max())
    assert (sidecar["stage"], sidecar["layer"], sidecar["grid"]) == ('post_contrastive', 'middle', [8, 8])


def test_heatmap_of_flat_map(tmp_path):
    layout = make_roi_layout(64, patch_size=8)
    path = export_heatmap(np.full(64, 0.3), layout, tmp_path / "flat.png", scale=2)
    assert path.exists()
    assert "stage" not in json.loads(path.with_suffix(".json").read_text())
