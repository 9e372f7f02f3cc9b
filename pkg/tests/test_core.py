import numpy as np
import pytest
import torch

from brainvidpy.core.archive import MAGIC, archive_read, archive_write, decode_archive, encode_archive
from brainvidpy.core.checkpoint import load_module, module_hash, save_module
from brainvidpy.core.patching import FmriFrame, PatchConfig, inverse_project, patchify, spread_tokens_to_voxels
from brainvidpy.core.windows import make_windows, stack_windows, window_starts
from brainvidpy.errors import (
    ArchiveCorruptionError,
    ArchiveFormatError,
    ArchiveValidationError,
    EmptyInputError,
    NumericalError,
    RejectedInputError,
)


def test_patchify_identity_projection_returns_raw_patches():
    cfg = PatchConfig(patch_size=2, embed_dim=2)
    tokens = patchify(FmriFrame([1.0, 2.0, 3.0, 4.0]), cfg, np.eye(2))
    np.testing.assert_array_equal(tokens, [[1.0, 2.0], [3.0, 4.0]])


def test_patchify_zero_frame():
    cfg = PatchConfig(patch_size=2, embed_dim=3)
    tokens = patchify(FmriFrame(np.zeros(4)), cfg, np.ones((2, 3)))
    assert tokens.shape == (2, 3)
    assert not tokens.any()


def test_patchify_pads_last_patch():
    cfg = PatchConfig(patch_size=2, embed_dim=2, pad_value=0.0)
    tokens = patchify(FmriFrame([1.0, 2.0, 3.0, 4.0, 5.0]), cfg, np.eye(2))
    assert tokens.shape == (3, 2)
    np.testing.assert_array_equal(tokens[-1], [5.0, 0.0])


def test_patchify_rejects_non_finite():
    cfg = PatchConfig(patch_size=2, embed_dim=2)
    with pytest.raises(RejectedInputError):
        patchify(FmriFrame([1.0, np.nan, 3.0, 4.0]), cfg, np.eye(2))


def test_inverse_project_round_trip(rng):
    cfg = PatchConfig(patch_size=4, embed_dim=4)
    for _ in range(100):
        weights = rng.normal(size=(4, 4)) + 4 * np.eye(4)
        frame = FmriFrame(rng.normal(size=10))
        back = inverse_project(patchify(frame, cfg, weights), cfg, weights, n_voxels=10)
        assert np.max(np.abs(back.voxels - frame.voxels)) < 1e-4


def test_inverse_project_wide_projection(rng):
    cfg = PatchConfig(patch_size=4, embed_dim=8)
    weights = rng.normal(size=(4, 8))
    frame = FmriFrame(rng.normal(size=16))
    back = inverse_project(patchify(frame, cfg, weights), cfg, weights)
    assert np.linalg.norm(back.voxels - frame.voxels) / np.linalg.norm(frame.voxels) < 1e-4


def test_inverse_project_zero_tokens():
    cfg = PatchConfig(patch_size=2, embed_dim=2)
    assert not inverse_project(np.zeros((3, 2)), cfg, np.eye(2)).voxels.any()


def test_inverse_project_exact_policy_rejects_rank_deficient():
    cfg = PatchConfig(patch_size=2, embed_dim=2)
    with pytest.raises(NumericalError):
        inverse_project(np.zeros((1, 2)), cfg, np.ones((2, 2)), policy='exact')


def test_spread_tokens_conserves_mass(rng):
    cfg = PatchConfig(patch_size=4, embed_dim=2)
    scores = rng.random((2, 4))
    per_voxel = spread_tokens_to_voxels(scores, cfg, 16)
    assert per_voxel.sum() == pytest.approx(scores.sum(), abs=1e-6)


@pytest.mark.parametrize("length,w,stride,starts", [
    (10, 2, 1, list(range(9))),
    (2, 2, 1, [0]),
    (10, 2, 2, [0, 2, 4, 6, 8]),
])
def test_window_starts_examples(length, w, stride, starts):
    assert window_starts(length, w, stride) == starts


def test_window_count_formula_exhaustive():
    for length in range(1, 65):
        for w in range(1, length + 1):
            for stride in range(1, 6):
                assert len(window_starts(length, w, stride)) == (length - w) // stride + 1


def test_window_too_short():
    with pytest.raises(EmptyInputError):
        window_starts(1, 2)


def test_make_windows_keeps_order():
    cfg = PatchConfig(patch_size=2, embed_dim=2)
    frames = [FmriFrame(np.full(4, k), timestamp_index=k) for k in range(2)]
    (window,) = make_windows(frames, 2, cfg=cfg, embed_weights=np.eye(2))
    assert window.tokens.shape == (2, 2, 2)
    assert window.tokens[0].max() == 0 and window.tokens[1].min() == 1


def test_stack_windows_shape():
    assert stack_windows(np.zeros((10, 7)), 3, 2).shape == (4, 3, 7)


def test_archive_round_trip(tmp_path):
    x = np.arange(6, dtype=np.float32).reshape(2, 3)
    archive_write(tmp_path / "a.nfta", {"x": x})
    back = archive_read(tmp_path / "a.nfta")
    assert back["x"].tobytes() == x.tobytes()


def test_archive_empty(tmp_path):
    archive_write(tmp_path / "empty.nfta", {})
    assert archive_read(tmp_path / "empty.nfta") == {}


def test_archive_layout_and_order():
    data = encode_archive({"b": np.ones((2,)), "a": np.zeros((1, 1))})
    assert data[:5] == MAGIC
    head_len = int.from_bytes(data[5:13], "little")
    assert list(decode_archive(data)) == ["b", "a"]
    payload = data[13 + head_len:]
    assert np.frombuffer(payload, dtype="<f4").tolist() == [1.0, 1.0, 0.0]


def test_archive_rewrite_is_byte_stable(tmp_path):
    archive_write(tmp_path / "one.nfta", {"x": np.random.default_rng(0).normal(size=(3, 4))})
    archive_write(tmp_path / "two.nfta", archive_read(tmp_path / "one.nfta"))
    assert (tmp_path / "one.nfta").read_bytes() == (tmp_path / "two.nfta").read_bytes()


def test_archive_errors():
    data = encode_archive({"x": np.ones((4,))})
    with pytest.raises(ArchiveFormatError):
        decode_archive(b"NOPE!" + data[5:])
    with pytest.raises(ArchiveCorruptionError):
        decode_archive(data[:-3])
    with pytest.raises(ArchiveValidationError):
        encode_archive({"": np.ones(1)})
    head = b'[{"name":"x","dtype":"f32","shape":[1]},{"name":"x","dtype":"f32","shape":[1]}]'
    dup = MAGIC + len(head).to_bytes(8, "little") + head + np.ones(2, dtype="<f4").tobytes()
    with pytest.raises(ArchiveValidationError):
        decode_archive(dup)


def test_module_checkpoint_round_trip(tmp_path):
    torch.manual_seed(0)
    module = torch.nn.Linear(3, 2)
    save_module(module, tmp_path / "m.nfta", prefix="m", extra={"step": 7})
    other = torch.nn.Linear(3, 2)
    meta = load_module(other, tmp_path / "m.nfta", prefix="m")
    assert float(meta["step"]) == 7
    assert module_hash(module) == module_hash(other)
    x = torch.randn(4, 3)
    assert torch.equal(module(x), other(x))
