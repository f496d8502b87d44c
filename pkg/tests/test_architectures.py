"""Architecture assembly, parameter counting, and model-file round-trips."""

import numpy as np
import pytest

from aminecast import neuralcore as nc
from aminecast.architectures import (
    ArchitectureError,
    ModelChecksumError,
    ModelDescriptor,
    ModelFileError,
    ModelTruncatedError,
    ModelVersionError,
    TrainedModel,
    build,
    load_model,
    param_count,
    save_model,
)
from aminecast.features import FeatureConfig, ScalerState


def tiny_trained(descriptor, seed=0):
    model = build(descriptor, seed=seed)
    config = FeatureConfig(lag_steps=2, rolling_windows=(3,), input_window=4)
    scaler = ScalerState({"t": 0.0}, {"t": 1.0})
    return TrainedModel(
        descriptor=descriptor,
        model=model,
        target="t",
        input_columns=("a", "b"),
        interval_s=300,
        feature_config=config,
        scaler=scaler,
        metadata={"seed": seed},
    )


class TestDescriptors:
    def test_stacked_needs_two_layers(self):
        with pytest.raises(ArchitectureError):
            ModelDescriptor("stacked", 4, 8, layers=1)

    def test_conv_kernel_must_be_odd(self):
        with pytest.raises(ArchitectureError):
            ModelDescriptor("conv", 4, 8, kernel=2)

    def test_unknown_architecture_rejected(self):
        with pytest.raises(ArchitectureError):
            ModelDescriptor("gru", 4, 8)


class TestParamCount:
    def test_basic_hand_formula(self):
        # 4*8*(4+8+1) = 416 cell params plus 9 head params.
        assert param_count(ModelDescriptor("basic", 4, 8)) == 425

    def test_bi_hand_formula(self):
        # 8*8*(4+8+1) = 832 plus 17 head params.
        assert param_count(ModelDescriptor("bi", 4, 8)) == 849

    def test_bi_matches_published_build(self):
        # 8*64*(196+64+1) + 129 = 133,761.
        assert param_count(ModelDescriptor("bi", 196, 64)) == 133_761

    def test_formula_matches_tensor_totals_for_random_descriptors(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            arch = rng.choice(["basic", "stacked", "bi", "conv"])
            d = int(rng.integers(1, 12))
            h = int(rng.integers(1, 12))
            layers = int(rng.integers(2, 5)) if arch == "stacked" else 1
            kernel = int(rng.choice([1, 3, 5])) if arch == "conv" else 3
            descriptor = ModelDescriptor(arch, d, h, layers=layers, kernel=kernel)
            model = build(descriptor, seed=0)
            total = sum(p.data.size for p in model.parameters().values())
            assert total == param_count(descriptor), descriptor


class TestForwardShapes:
    @pytest.mark.parametrize("arch", ["basic", "stacked", "bi", "conv"])
    def test_scalar_per_sample_at_production_size(self, arch):
        descriptor = ModelDescriptor(
            arch, 80, 32, layers=2 if arch == "stacked" else 1, kernel=3
        )
        model = build(descriptor, seed=1)
        x = np.random.default_rng(0).uniform(size=(5, 6, 80))
        out = model.predict(x)
        assert out.shape == (5,)
        assert np.all(np.isfinite(out))

    def test_basic_window_one_is_single_cell_step(self):
        descriptor = ModelDescriptor("basic", 3, 4)
        model = build(descriptor, seed=2)
        x = np.random.default_rng(1).uniform(size=(2, 1, 3))
        h, _ = nc.lstm_cell_step(
            model.cell, x[:, 0, :], np.zeros((2, 4)), np.zeros((2, 4))
        )
        expected = model.head.apply(h).data
        np.testing.assert_allclose(model.predict(x), expected, atol=1e-15)

    def test_bi_equals_two_independent_directions(self):
        descriptor = ModelDescriptor("bi", 3, 4)
        model = build(descriptor, seed=3)
        rng = np.random.default_rng(2)
        x = rng.uniform(size=(2, 5, 3))

        def run(cell, seq):
            h = np.zeros((2, 4))
            c = np.zeros((2, 4))
            for t in range(seq.shape[1]):
                h_t, c_t = nc.lstm_cell_step(cell, seq[:, t, :], h, c)
                h, c = h_t.data, c_t.data
            return h

        h_fw = run(model.fw, x)
        h_bw = run(model.bw, x[:, ::-1, :])
        joined = np.concatenate([h_fw, h_bw], axis=1)
        expected = joined @ model.head.w.data + model.head.b.data
        np.testing.assert_allclose(model.predict(x), expected[:, 0], atol=1e-12)

    def test_bi_time_reversal_symmetry(self):
        # With tied cells, the forward state on x is the backward state on
        # reverse(x); tying the head halves as well makes the prediction
        # invariant under time reversal, which pins the reversal wiring.
        descriptor = ModelDescriptor("bi", 3, 4)
        model = build(descriptor, seed=4)
        model.bw.W.data = model.fw.W.data.copy()
        model.bw.U.data = model.fw.U.data.copy()
        model.bw.b.data = model.fw.b.data.copy()
        model.head.w.data[4:] = model.head.w.data[:4]
        rng = np.random.default_rng(3)
        x = rng.uniform(size=(2, 6, 3))
        np.testing.assert_allclose(
            model.predict(x), model.predict(x[:, ::-1, :].copy()), atol=1e-12
        )

    def test_stacked_consumes_previous_hidden_sequence(self):
        descriptor = ModelDescriptor("stacked", 3, 4, layers=2)
        model = build(descriptor, seed=5)
        assert model.cells[0].input_dim == 3
        assert model.cells[1].input_dim == 4


class TestSaveLoad:
    @pytest.mark.parametrize("arch", ["basic", "stacked", "bi", "conv"])
    def test_round_trip_bit_exact_outputs(self, tmp_path, arch):
        descriptor = ModelDescriptor(
            arch, 6, 5, layers=2 if arch == "stacked" else 1, kernel=3
        )
        trained = tiny_trained(descriptor, seed=7)
        path = tmp_path / "model.bin"
        save_model(trained, path)
        loaded = load_model(path)
        x = np.random.default_rng(4).uniform(size=(3, 4, 6))
        np.testing.assert_array_equal(loaded.predict(x), trained.predict(x))
        assert loaded.descriptor == trained.descriptor
        assert loaded.feature_config == trained.feature_config
        assert loaded.input_columns == trained.input_columns
        assert dict(loaded.scaler.mins) == dict(trained.scaler.mins)

    def test_round_trip_preserves_weights_bitwise(self, tmp_path):
        trained = tiny_trained(ModelDescriptor("basic", 4, 3), seed=8)
        path = tmp_path / "model.bin"
        save_model(trained, path)
        loaded = load_model(path)
        for name, p in trained.model.parameters().items():
            np.testing.assert_array_equal(loaded.model.parameters()[name].data, p.data)

    def test_corrupted_byte_is_checksum_error(self, tmp_path):
        trained = tiny_trained(ModelDescriptor("basic", 4, 3))
        path = tmp_path / "model.bin"
        save_model(trained, path)
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(ModelChecksumError):
            load_model(path)

    def test_unknown_version_is_version_error(self, tmp_path):
        import struct
        import zlib

        trained = tiny_trained(ModelDescriptor("basic", 4, 3))
        path = tmp_path / "model.bin"
        save_model(trained, path)
        raw = bytearray(path.read_bytes())
        struct.pack_into("<I", raw, 8, 99)  # bump the version word
        body = bytes(raw[:-4])
        raw[-4:] = struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
        path.write_bytes(bytes(raw))
        with pytest.raises(ModelVersionError):
            load_model(path)

    def test_truncated_file_rejected(self, tmp_path):
        trained = tiny_trained(ModelDescriptor("basic", 4, 3))
        path = tmp_path / "model.bin"
        save_model(trained, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 3])
        with pytest.raises((ModelTruncatedError, ModelChecksumError, ModelFileError)):
            load_model(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "model.bin"
        path.write_bytes(b"NOTMODEL" + b"\x00" * 64)
        with pytest.raises(ModelFileError):
            load_model(path)

    def test_nonfinite_weights_refused_at_save(self, tmp_path):
        trained = tiny_trained(ModelDescriptor("basic", 4, 3))
        trained.model.cell.W.data[0, 0] = np.nan
        with pytest.raises(ModelFileError):
            save_model(trained, tmp_path / "model.bin")
