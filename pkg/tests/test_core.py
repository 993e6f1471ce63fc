import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings, strategies as st

from snnaccel.core import (
    ConfigError,
    ConvMode,
    DegenerateInputError,
    LayerSpec,
    ShapeError,
    SpikeFrame,
    SpikeTensor,
    SpikeVector,
    integrate_inputs,
    membrane_update,
    neuron_step,
    sfr_of_frame,
)

from oracles import neuron_ref


def if_spec(threshold=4, leak=1.0, vmem_width=18):
    return LayerSpec(mode=ConvMode.STANDARD, c_in=1, c_out=1,
                     threshold=threshold, leak=leak, vmem_width=vmem_width)


class TestIntegrateInputs:
    def test_selects_masked_weights(self):
        assert integrate_inputs(SpikeVector(np.array([1, 0, 1])), [3, -2, 5], 0) == 8

    def test_empty_mask_returns_bias(self):
        assert integrate_inputs(SpikeVector(np.array([0, 0, 0])), [3, -2, 5], 7) == 7

    def test_all_ones_sums_everything(self):
        assert integrate_inputs(SpikeVector(np.array([1, 1, 1])), [1, 1, 1], 0) == 3

    def test_length_mismatch_raises(self):
        with pytest.raises(ShapeError):
            integrate_inputs(SpikeVector(np.array([1, 0])), [1, 2, 3], 0)

    def test_linear_in_bias(self):
        v = SpikeVector(np.array([1, 0, 1, 1]))
        w = [4, -7, 2, 9]
        base = integrate_inputs(v, w, 0)
        for b in (-5, 0, 3, 100):
            assert integrate_inputs(v, w, b) == base + b

    def test_monotone_in_mask_for_nonnegative_weights(self):
        w = [3, 0, 5, 2]
        small = integrate_inputs(SpikeVector(np.array([1, 0, 0, 0])), w, 0)
        large = integrate_inputs(SpikeVector(np.array([1, 0, 1, 1])), w, 0)
        assert small <= large


class TestNeuronStep:
    def test_fires_and_resets(self):
        assert neuron_step(0, 5, if_spec(threshold=4)) == (0, 1)

    def test_subthreshold_accumulates(self):
        assert neuron_step(2, 1, if_spec(threshold=4)) == (3, 0)

    def test_leak_halves_before_integration(self):
        assert neuron_step(4, 0, if_spec(threshold=4, leak=0.5)) == (2, 0)

    def test_exact_threshold_fires(self):
        assert neuron_step(3, 1, if_spec(threshold=4)) == (0, 1)

    def test_identity_without_leak_or_input(self):
        for u in (-9, 0, 1, 3):
            assert neuron_step(u, 0, if_spec(threshold=4)) == (u, 0)

    def test_negative_leak_truncates_toward_zero(self):
        # -3 * 0.5 rounds to -1, not -2
        assert neuron_step(-3, 0, if_spec(threshold=4, leak=0.5)) == (-1, 0)

    @given(u=st.integers(-2000, 2000), i=st.integers(-2000, 2000),
           thr=st.integers(1, 500),
           leak=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]),
           width=st.integers(8, 24))
    @settings(max_examples=300, deadline=None)
    def test_matches_reference(self, u, i, thr, leak, width):
        spec = if_spec(threshold=thr, leak=leak, vmem_width=width)
        assert neuron_step(u, i, spec) == neuron_ref(u, i, thr, spec.leak_fx, width)

    @given(u=st.integers(-10**6, 10**6), i=st.integers(-10**6, 10**6))
    @settings(max_examples=200, deadline=None)
    def test_saturation_bound(self, u, i):
        spec = if_spec(threshold=3, vmem_width=10)
        u = max(-511, min(511, u))
        u_next, spike = neuron_step(u, i, spec)
        assert abs(u_next) < 2 ** 9
        assert spike in (0, 1)
        if spike:
            assert u_next == 0

    def test_fire_iff_threshold_reached(self):
        spec = if_spec(threshold=10)
        for i in range(-5, 25):
            u_next, spike = neuron_step(0, i, spec)
            assert spike == (1 if i >= 10 else 0)


class TestMembraneUpdateVectorized:
    def test_matches_scalar_path(self):
        rng = np.random.default_rng(7)
        spec = if_spec(threshold=9, leak=0.75, vmem_width=12)
        u = rng.integers(-2000, 2000, size=(4, 5, 3))
        i = rng.integers(-300, 300, size=(4, 5, 3))
        u_next, spikes = membrane_update(u, i, spec)
        for idx in np.ndindex(u.shape):
            un, s = neuron_step(int(u[idx]), int(i[idx]), spec)
            assert (un, s) == (int(u_next[idx]), int(spikes[idx]))


class TestSpecInvariants:
    def test_depthwise_channel_mismatch(self):
        with pytest.raises(ConfigError):
            LayerSpec(mode=ConvMode.DEPTHWISE, c_in=4, c_out=8, k_h=3, k_w=3)

    def test_pointwise_kernel(self):
        with pytest.raises(ConfigError):
            LayerSpec(mode=ConvMode.POINTWISE, c_in=4, c_out=8, k_h=3, k_w=3)

    def test_threshold_positive(self):
        with pytest.raises(ConfigError):
            LayerSpec(mode=ConvMode.STANDARD, c_in=1, c_out=1, threshold=0)

    def test_parallel_factor_bounded(self):
        with pytest.raises(ConfigError):
            LayerSpec(mode=ConvMode.STANDARD, c_in=1, c_out=4, parallel_factor=5)

    def test_leak_fixed_point(self):
        assert if_spec(leak=1.0).leak_fx == 256
        assert if_spec(leak=0.5).leak_fx == 128


class TestSpikeTypes:
    def test_frame_dims(self):
        frame = SpikeFrame.zeros(3, 5, 2)
        assert (frame.height, frame.width, frame.channels) == (3, 5, 2)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            SpikeFrame(np.full((2, 2, 1), 3, dtype=np.uint8))

    def test_tensor_rejects_mixed_shapes(self):
        with pytest.raises(ShapeError):
            SpikeTensor((SpikeFrame.zeros(2, 2, 1), SpikeFrame.zeros(2, 3, 1)))


class TestSfr:
    def test_silent_tensor(self):
        t = SpikeTensor((SpikeFrame.zeros(2, 2, 1),))
        assert sfr_of_frame(t) == 0

    def test_saturated_tensor(self):
        f = SpikeFrame(np.ones((2, 2, 1), dtype=np.uint8))
        t = SpikeTensor((f, f))
        assert sfr_of_frame(t) == 2

    def test_exact_fraction(self):
        data = np.zeros((2, 2, 2), dtype=np.uint8)
        data[0, 0, 0] = data[0, 1, 1] = data[1, 1, 0] = 1
        t = SpikeTensor((SpikeFrame(data),))
        assert sfr_of_frame(t) == Fraction(3, 8)

    def test_zero_neurons(self):
        t = SpikeTensor((SpikeFrame(np.zeros((2, 0, 3), dtype=np.uint8)),))
        with pytest.raises(DegenerateInputError):
            sfr_of_frame(t, layer_index="empty")
