import math

import numpy as np
import pytest

from jrc_rsp.channel import (
    array_phase, delay_bin, dump_cube, echo, load_cube, noise_sigma, realize_targets,
    sample_rcs, synthesize_cube, trial_rng,
)
from jrc_rsp.params import RadarParams, TargetSpec, ValidationError
from jrc_rsp.waveform import build_waveform


def test_delay_bin_hand_value():
    assert delay_bin(8.5, RadarParams()) == 100


def test_broadside_phases_are_zero(small):
    assert np.all(array_phase(0.0, small) == 0.0)


def test_array_phase_progression(small):
    ph = array_phase(30.0, small)
    # half-wavelength spacing: pi * sin(30 deg) per element
    assert np.allclose(np.diff(ph), np.pi * 0.5)


@pytest.mark.parametrize("mean", [10.0, 5.0, 3.0])
def test_swerling_mean(mean):
    rng = np.random.default_rng(7)
    draws = np.array([sample_rcs(mean, rng) ** 2 for _ in range(100_000)])
    assert abs(draws.mean() / mean - 1) < 0.03


def test_zero_mean_rcs_rejected():
    with pytest.raises(ValidationError):
        sample_rcs(0.0, np.random.default_rng(0))


def test_noise_only_variance():
    p = RadarParams(K=256, golay_len=64, Q=8, N=64, range_gate_m=(0.0, 10.0))
    sigma = noise_sigma(-3.0, [])
    cube = synthesize_cube(build_waveform(p), [], -3.0, p, np.random.default_rng(3))
    var = np.mean(np.abs(cube.samples) ** 2)
    assert cube.samples.size >= 10**5
    assert var == pytest.approx(sigma**2, rel=0.02)
    assert abs(np.mean(cube.samples.real ** 2) - sigma**2 / 2) < 0.02 * sigma**2


def test_noiseless_broadside_static_target(small):
    wf = build_waveform(small)
    spec = TargetSpec(5 * small.range_res, 0.0, 0.0, fixed_amplitude=2.0)
    real = realize_targets([spec], small, np.random.default_rng(0))
    cube = synthesize_cube(wf, real, math.inf, small, np.random.default_rng(0))
    k = 5
    for n in range(small.N):
        for q in range(small.Q):
            expect = np.zeros(small.K)
            expect[k:k + small.golay_len] = 2.0 * wf.G[n, :small.golay_len]
            assert np.array_equal(cube.samples[:, q, n], expect)


def test_slow_time_doppler_phase(small):
    wf = build_waveform(small)
    spec = TargetSpec(3 * small.range_res, 20.0, 12.0, fixed_amplitude=1.0)
    r = realize_targets([spec], small, np.random.default_rng(0))[0]
    x = echo(wf, r, small)
    fd = 2 * 12.0 / small.wavelength
    # chip 3 of every packet: same sign for packets with the same sequence
    ratio = x[3, 0, 3] / x[3, 0, 0]
    assert ratio == pytest.approx(np.exp(-2j * np.pi * fd * 3 * small.t_pri))


def test_synthesis_matches_echo_sum(small):
    wf = build_waveform(small)
    specs = [TargetSpec(1.0, -40.0, 5.0, fixed_amplitude=1.5), TargetSpec(2.5, 33.0, -20.0, fixed_amplitude=0.7)]
    real = realize_targets(specs, small, np.random.default_rng(0))
    cube = synthesize_cube(wf, real, math.inf, small, np.random.default_rng(0))
    assert np.allclose(cube.samples, echo(wf, real[0], small) + echo(wf, real[1], small), atol=1e-12)


def test_superposition_is_linear(small):
    wf = build_waveform(small)
    spec = TargetSpec(1.0, 10.0, 3.0, fixed_amplitude=1.0)
    r1 = realize_targets([spec], small, np.random.default_rng(0))
    r3 = realize_targets([TargetSpec(1.0, 10.0, 3.0, fixed_amplitude=3.0)], small, np.random.default_rng(0))
    a = synthesize_cube(wf, r1, math.inf, small, np.random.default_rng(0)).samples
    b = synthesize_cube(wf, r3, math.inf, small, np.random.default_rng(0)).samples
    assert np.allclose(3 * a, b)


def test_same_trial_seed_same_cube(small):
    wf = build_waveform(small)
    specs = [TargetSpec(1.0, 10.0, 3.0, 4.0)]

    def make(seed, trial):
        rng = trial_rng(seed, trial)
        return synthesize_cube(wf, realize_targets(specs, small, rng), 0.0, small, rng).samples

    assert np.array_equal(make(9, 2), make(9, 2))
    assert not np.array_equal(make(9, 2), make(9, 3))


def test_noise_sigma_convention():
    assert noise_sigma(0.0, [TargetSpec(1, 0, 0, 10.0)]) == pytest.approx(math.sqrt(10))
    assert noise_sigma(20.0, [TargetSpec(1, 0, 0, 4.0, fixed_amplitude=2.0)]) == pytest.approx(0.2)
    assert noise_sigma(math.inf, []) == 0.0


def test_binary_dump_round_trip(small, tmp_path):
    wf = build_waveform(small)
    rng = np.random.default_rng(1)
    cube = synthesize_cube(wf, realize_targets([TargetSpec(1, 5, 5, 2)], small, rng), 5.0, small, rng)
    path = tmp_path / "cube.bin"
    dump_cube(cube, path)
    raw = path.read_bytes()
    assert len(raw) == 12 + 16 * small.K * small.Q * small.N
    assert np.frombuffer(raw[:12], "<i4").tolist() == [small.K, small.Q, small.N]
    # k fastest: the second complex sample is (k=1, q=0, n=0)
    assert np.frombuffer(raw[12 + 16:12 + 32], "<c16")[0] == cube.samples[1, 0, 0]
    assert np.array_equal(load_cube(path, small).samples, cube.samples)
