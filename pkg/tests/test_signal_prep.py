import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambulate.errors import (
    DegenerateChannel,
    DegenerateOrientation,
    InvalidSample,
    TraceTooShort,
)
from ambulate.signal_prep import (
    SensorTrace,
    align_axes,
    append_magnitude,
    detrend_normalize,
    epoch_split,
    lowpass_filter,
    preprocess_pipeline,
    resample_to_50hz,
)


def make_trace(samples, rate=50.0, label="x"):
    return SensorTrace(
        subject_id="s0", test_id="t0", label=label, sample_rate_hz=rate, samples=samples
    )


def sinusoid_trace(freq_hz, duration_s, rate=50.0, amp=1.0):
    t = np.arange(int(duration_s * rate)) / rate
    x = amp * np.sin(2 * np.pi * freq_hz * t)
    return make_trace(np.vstack([x, x, x]))


class TestResample:
    def test_constant_trace_20hz(self):
        tr = make_trace(np.full((3, 40), 3.0), rate=20.0)
        out = resample_to_50hz(tr)
        assert out.sample_rate_hz == 50.0
        assert out.n_samples == 100
        assert np.allclose(out.samples, 3.0)

    def test_identity_at_50hz(self):
        x = np.random.default_rng(0).normal(size=(3, 64))
        tr = make_trace(x)
        out = resample_to_50hz(tr)
        assert out.samples is tr.samples

    def test_quadratic_oracle(self):
        # 20 Hz samples of t^2 on [0, 1]; interpolant evaluated on the 50 Hz
        # grid must match the analytic curve within 1e-3
        t_in = np.arange(21) / 20.0
        tr = make_trace(np.vstack([t_in**2] * 3), rate=20.0)
        out = resample_to_50hz(tr)
        t_out = np.arange(out.n_samples) / 50.0
        assert np.abs(out.samples[0] - t_out**2).max() < 1e-3

    def test_too_short(self):
        with pytest.raises(TraceTooShort):
            resample_to_50hz(make_trace(np.zeros((3, 3)) + 1.0, rate=20.0))

    def test_nonfinite_rejected_at_construction(self):
        bad = np.ones((3, 10))
        bad[1, 3] = np.nan
        with pytest.raises(InvalidSample):
            make_trace(bad, rate=20.0)


class TestLowpass:
    def test_constant_preserved(self):
        tr = make_trace(np.full((3, 200), 5.0))
        out = lowpass_filter(tr)
        assert np.abs(out.samples - 5.0).max() < 1e-9

    def test_dc_gain_is_unity(self):
        # a slowly drifting offset must come through with unit gain
        tr = make_trace(np.full((3, 500), -2.5))
        out = lowpass_filter(tr)
        assert np.abs(out.samples + 2.5).max() < 1e-9

    @pytest.mark.parametrize(
        "freq,expected",
        [
            (2.0, 1.0 / (1.0 + (2.0 / 17.0) ** 8)),
            (20.0, 1.0 / (1.0 + (20.0 / 17.0) ** 8)),
        ],
    )
    def test_amplitude_matches_analytic_response(self, freq, expected):
        # two passes of a 4th-order Butterworth: amplitude gain (1+(f/fc)^8)^-1;
        # amplitude estimated by projecting the interior onto the tone
        tr = sinusoid_trace(freq, duration_s=10.0)
        out = lowpass_filter(tr)
        t = np.arange(out.n_samples) / 50.0
        sl = slice(100, -100)
        z = np.exp(-2j * np.pi * freq * t[sl])
        amp = 2.0 * np.abs((out.samples[0][sl] * z).mean())
        tol = 0.01 if freq < 17 else 0.02
        assert abs(amp - expected) < tol

    def test_too_short(self):
        with pytest.raises(TraceTooShort):
            lowpass_filter(make_trace(np.random.default_rng(0).normal(size=(3, 20))))

    @given(
        seed=st.integers(0, 2**32 - 1),
        a=st.floats(-5, 5, allow_nan=False),
        b=st.floats(-5, 5, allow_nan=False),
    )
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(3, 120))
        y = rng.normal(size=(3, 120))
        fx = lowpass_filter(make_trace(x)).samples
        fy = lowpass_filter(make_trace(y)).samples
        fxy = lowpass_filter(make_trace(a * x + b * y)).samples
        assert np.abs(fxy - (a * fx + b * fy)).max() < 1e-9


class TestAlignAxes:
    def test_x_to_y(self):
        tr = make_trace(np.vstack([np.ones(50), np.zeros(50), np.zeros(50)]))
        out = align_axes(tr)
        expect = np.vstack([np.zeros(50), np.ones(50), np.zeros(50)])
        assert np.abs(out.samples - expect).max() < 1e-12

    def test_already_aligned_identity(self):
        tr = make_trace(np.vstack([np.zeros(50), np.ones(50), np.zeros(50)]))
        out = align_axes(tr)
        assert np.abs(out.samples - tr.samples).max() < 1e-12

    def test_mean_345_oracle(self):
        # arbitrary samples with mean (3,4,0): output mean must be (0,5,0) and
        # all per-sample norms preserved
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 200))
        x -= x.mean(axis=1, keepdims=True)
        x += np.array([[3.0], [4.0], [0.0]])
        tr = make_trace(x)
        out = align_axes(tr)
        assert np.abs(out.samples.mean(axis=1) - np.array([0.0, 5.0, 0.0])).max() < 1e-9
        norms_in = np.linalg.norm(x, axis=0)
        norms_out = np.linalg.norm(out.samples, axis=0)
        assert np.abs(norms_in - norms_out).max() < 1e-9

    def test_antipodal_mean(self):
        tr = make_trace(np.vstack([np.zeros(10), -np.ones(10), np.zeros(10)]))
        out = align_axes(tr)
        assert np.abs(out.samples.mean(axis=1) - np.array([0.0, 1.0, 0.0])).max() < 1e-9

    def test_degenerate_orientation(self):
        x = np.vstack([np.array([1.0, -1.0]), np.zeros(2), np.zeros(2)])
        with pytest.raises(DegenerateOrientation):
            align_axes(make_trace(x))

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_rotation_isometry(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(3, 60)) + rng.normal(size=(3, 1)) * 3
        if np.linalg.norm(x.mean(axis=1)) <= 1e-6:
            return
        out = align_axes(make_trace(x))
        assert np.abs(
            np.linalg.norm(x, axis=0) - np.linalg.norm(out.samples, axis=0)
        ).max() < 1e-9


class TestDetrendNormalize:
    def test_line_plus_noise(self):
        rng = np.random.default_rng(2)
        t = np.arange(500)
        x = 2.0 + 0.5 * t + rng.normal(size=500)
        tr = make_trace(np.vstack([x, x + 1, x - 1]))
        out = detrend_normalize(tr)
        assert np.abs(out.samples.mean(axis=1)).max() < 1e-9
        assert np.abs(out.samples.var(axis=1) - 1.0).max() < 1e-6

    def test_identity_case(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=400)
        # enforce zero mean, unit population variance, zero slope
        t = np.arange(400, dtype=float)
        t_c = t - t.mean()
        x = x - x.mean()
        x = x - (t_c @ x) / (t_c @ t_c) * t_c
        x = x / x.std()
        tr = make_trace(np.vstack([x, x, x]))
        out = detrend_normalize(tr)
        assert np.abs(out.samples - tr.samples).max() < 1e-9

    def test_perfect_line_degenerate(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        with pytest.raises(DegenerateChannel):
            detrend_normalize(make_trace(np.vstack([x, x, x])))


class TestMagnitude:
    def test_pythagoras(self):
        tr = make_trace(np.array([[3.0], [4.0], [0.0]]).repeat(2, axis=1))
        out = append_magnitude(tr)
        assert np.allclose(out.samples[3], 5.0)

    def test_zero(self):
        out = append_magnitude(make_trace(np.zeros((3, 5))))
        assert np.allclose(out.samples[3], 0.0)

    def test_unit_diagonal(self):
        out = append_magnitude(make_trace(np.ones((3, 4))))
        assert np.allclose(out.samples[3], np.sqrt(3.0))


class TestEpochSplit:
    def _trace4(self, n):
        rng = np.random.default_rng(4)
        return make_trace(rng.normal(size=(4, n)))

    def test_boundary_single_epoch(self):
        assert len(epoch_split(self._trace4(128))) == 1

    def test_count_384(self):
        eps = epoch_split(self._trace4(384))
        assert len(eps) == 5
        assert [e.epoch_index for e in eps] == [0, 1, 2, 3, 4]

    def test_count_383(self):
        assert len(epoch_split(self._trace4(383))) == 4

    def test_too_short(self):
        with pytest.raises(TraceTooShort):
            epoch_split(self._trace4(127))

    @given(n=st.integers(128, 2000))
    @settings(max_examples=40, deadline=None)
    def test_count_formula_and_coverage(self, n):
        tr = self._trace4(n)
        eps = epoch_split(tr)
        assert len(eps) == (n - 128) // 64 + 1
        # even-indexed epochs tile the trace prefix without gaps
        even = [e.data for e in eps if e.epoch_index % 2 == 0]
        prefix = np.concatenate(even, axis=1)
        assert np.array_equal(prefix, tr.samples[:, : prefix.shape[1]])


class TestPipeline:
    def _gait_like(self, duration_s, rate=50.0, seed=0):
        rng = np.random.default_rng(seed)
        t = np.arange(int(duration_s * rate)) / rate
        vert = np.sin(2 * np.pi * 2.0 * t) + 0.3 * np.sin(2 * np.pi * 4.0 * t)
        lat = 0.4 * np.sin(2 * np.pi * 1.0 * t + 0.7)
        x = np.vstack(
            [
                lat + rng.normal(0, 0.1, t.size),
                9.81 + vert + rng.normal(0, 0.1, t.size),
                rng.normal(0, 0.1, t.size),
            ]
        )
        return make_trace(x, rate=rate)

    def test_constant_trace_degenerate(self):
        with pytest.raises(DegenerateChannel):
            preprocess_pipeline(make_trace(np.full((3, 60), 2.0), rate=20.0))

    def test_single_epoch_stats(self):
        tr = self._gait_like(2.56)
        eps = preprocess_pipeline(tr)
        assert len(eps) == 1
        assert np.abs(eps[0].data.mean(axis=1)).max() < 1e-6
        assert np.abs(eps[0].data.var(axis=1) - 1.0).max() < 1e-4

    def test_ten_seconds_gives_six_epochs(self):
        eps = preprocess_pipeline(self._gait_like(10.0))
        assert len(eps) == 6

    def test_trace_level_normalization(self):
        # reconstruct the full normalized trace from non-overlapping epochs and
        # check trace-level statistics
        tr = self._gait_like(20.0)
        eps = preprocess_pipeline(tr)
        even = [e.data for e in eps if e.epoch_index % 2 == 0]
        full = np.concatenate(even, axis=1)
        assert np.abs(full.mean(axis=1)).max() < 2e-2  # prefix of the trace only
        assert np.abs(full.var(axis=1) - 1.0).max() < 0.2

    def test_determinism(self):
        tr = self._gait_like(8.0)
        a = preprocess_pipeline(tr)
        b = preprocess_pipeline(tr)
        assert all(np.array_equal(x.data, y.data) for x, y in zip(a, b))
