import numpy as np
import pytest
import yaml

from brainvidpy.errors import ArchiveValidationError, ConfigError, GenerationError
from brainvidpy.synthdata.generator import (
    Geometry,
    generate_classifier_set,
    generate_dataset,
    generate_split,
    mixing_matrix,
    semantic_overlap,
    split_categories,
)
from brainvidpy.synthdata.io import read_layout, read_split, write_layout, write_split
from brainvidpy.synthdata.rois import ROI_NAMES, make_roi_layout
from brainvidpy.synthdata.scenes import motion_features, semantic_features

from .conftest import TINY_GEOMETRY


def _split(name='train', n=12, **kwargs):
    layout = make_roi_layout(64, patch_size=8)
    params = dict(n_categories=4, layout=layout, geometry=TINY_GEOMETRY, hemodynamic_lag=4, noise_sigma=0.5,
                  seed=11, embed_rows=4, embed_dim=8, speed=0.5)
    params.update(kwargs)
    return generate_split(name, n, [0, 1, 2, 3], **params), layout


def test_generation_is_deterministic():
    a, _ = _split()
    b, _ = _split()
    assert a.fmri.tobytes() == b.fmri.tobytes()
    assert a.video.tobytes() == b.video.tobytes()
    np.testing.assert_array_equal(a.category, b.category)


def test_different_seed_changes_data():
    a, _ = _split(seed=1)
    b, _ = _split(seed=2)
    assert not np.allclose(a.fmri, b.fmri)


def test_shapes(tiny_dataset):
    train, val, test, layout = tiny_dataset
    assert len(train) + len(val) + len(test) == 40
    assert train.fmri.shape[1:] == (2, 64)
    assert train.video.shape[1:] == (12, 16, 16, 3)
    assert train.clips.shape[1] == 6
    assert train.e_txt.shape[1:] == (4, 8)
    np.testing.assert_allclose(np.linalg.norm(train.e_img, axis=-1), 1.0, atol=1e-5)
    assert layout.n_voxels == 64


def test_noise_free_fmri_is_the_linear_forward_model():
    split, layout = _split(noise_sigma=0.0)
    a_sem, a_mot = mixing_matrix(layout, 4, seed=11)
    for i, scene in enumerate(split.scenes):
        sem = semantic_features(scene, 4)
        for k in range(2):
            mot = motion_features(scene, 6 * k - 4, 16, 16)
            np.testing.assert_allclose(split.fmri[i, k], a_sem @ sem + a_mot @ mot, atol=1e-5)


def test_default_mode_voxels_carry_only_noise():
    split, layout = _split(noise_sigma=0.0)
    assert not split.fmri[:, :, layout.masks['DefaultA']].any()
    noisy, _ = _split(n=2000, noise_sigma=1.0, render_video=False)
    default = noisy.fmri[:, 0, layout.masks['DefaultA']].mean(axis=1)
    for c in range(4):
        one_hot = (noisy.category == c).astype(float)
        assert abs(np.corrcoef(one_hot, default)[0, 1]) < 0.1


def test_noise_free_scans_decode_category_linearly():
    split, _ = _split(n=60, noise_sigma=0.0, hemodynamic_lag=0, render_video=False)
    design = np.column_stack([split.fmri.reshape(len(split), -1), np.ones(len(split))])
    one_hot = np.eye(4)[split.category]
    weights, *_ = np.linalg.lstsq(design, one_hot, rcond=None)
    assert np.array_equal((design @ weights).argmax(axis=1), split.category)


def test_roi_layout_is_disjoint_and_patch_aligned():
    layout = make_roi_layout(128, patch_size=8)
    assert tuple(layout.masks) == ROI_NAMES
    total = np.sum([m.astype(int) for m in layout.masks.values()], axis=0)
    assert total.max() == 1
    for mask in layout.masks.values():
        assert mask.sum() % 8 == 0
        (idx,) = np.nonzero(mask)
        assert idx[0] % 8 == 0


def test_fast_motion_in_small_frames_fails():
    with pytest.raises(GenerationError):
        _split(speed=4.0)


@pytest.mark.parametrize("train,test,expected", [
    ([0, 1, 2], [0, 1, 2], 1.0),
    ([0, 1], [2, 3], 0.0),
    ([0, 1, 2], [1, 2, 3], 0.5),
])
def test_semantic_overlap_examples(train, test, expected):
    assert semantic_overlap(train, test) == pytest.approx(expected)


def test_semantic_overlap_needs_categories():
    with pytest.raises(ConfigError):
        semantic_overlap([], [1])


def test_split_categories_targets_overlap():
    train, test = split_categories(9, 0.56)
    assert semantic_overlap(train, test) == pytest.approx(5 / 9)
    train, test = split_categories(4, 0.0)
    assert semantic_overlap(train, test) == 0.0


def test_dataset_rejects_small_inputs():
    with pytest.raises(ConfigError):
        generate_dataset(10, 1, 64, TINY_GEOMETRY, patch_size=8)
    with pytest.raises(ConfigError):
        generate_dataset(10, 4, 16, TINY_GEOMETRY, patch_size=8)


def test_classifier_set_is_balanced_and_clean():
    layout = make_roi_layout(64, patch_size=8)
    split = generate_classifier_set(3, 4, layout, TINY_GEOMETRY, speed=0.5, embed_rows=4, embed_dim=8)
    assert np.bincount(split.category).tolist() == [3, 3, 3, 3]
    assert split.meta["noise_sigma"] == 0.0


def test_split_and_layout_io(tmp_path, tiny_dataset):
    train, _, _, layout = tiny_dataset
    write_split(train, tmp_path)
    back = read_split(tmp_path, 'train')
    assert back.fmri.tobytes() == train.fmri.tobytes()
    assert back.scenes == [type(s).from_row(np.asarray(s.as_row(), dtype=np.float32)) for s in train.scenes]
    assert back.geometry == train.geometry
    np.testing.assert_array_equal(back.pair_id, train.pair_id)
    manifest = yaml.safe_load((tmp_path / "train.yaml").read_text(encoding="utf-8"))
    assert manifest["shapes"]["fmri"] == list(train.fmri.shape)
    assert manifest["shapes"]["video"] == list(train.video.shape)
    entries = manifest["sample_list"]
    assert [e["id"] for e in entries] == [f"train-{i:05d}" for i in range(len(train))]
    assert [e["category"] for e in entries] == train.category.tolist()
    assert [e["direction"] for e in entries] == train.direction.tolist()
    write_layout(layout, tmp_path / "rois.nfta")
    loaded = read_layout(tmp_path / "rois.nfta")
    for name in ROI_NAMES:
        np.testing.assert_array_equal(loaded.masks[name], layout.masks[name])


def test_split_manifest_must_match_the_archive(tmp_path, tiny_dataset):
    test = tiny_dataset[2]
    write_split(test, tmp_path)
    path = tmp_path / "test.yaml"
    manifest = yaml.safe_load(path.read_text(encoding="utf-8"))
    manifest["shapes"]["fmri"][0] += 1
    path.write_text(yaml.safe_dump(manifest), encoding="utf-8")
    with pytest.raises(ArchiveValidationError):
        read_split(tmp_path, "test")


def test_sample_view(tiny_dataset):
    train = tiny_dataset[0]
    sample = train[0]
    assert len(sample.fmri) == 2
    assert sample.fmri[1].timestamp_index == 1
    assert sample.category_id == int(train.category[0])


def test_geometry_frames():
    assert Geometry(window=3, frames_per_fmri=4).n_frames == 12
