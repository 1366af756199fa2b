"""Acceptance criteria, one test per criterion.

Each test prints (and records for the end-of-run summary) a single
``CRITERION n: PASS|FAIL`` line with the measured numbers, then asserts.
Criteria 6 and 7 run the full-size three-target setup with 100 trials per
mode and take tens of minutes; their Monte Carlo runs are shared.
"""

import dataclasses
import math
import os
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, on_grid_target
from jrc_rsp.bench import monte_carlo, run_trial
from jrc_rsp.cli import main as cli_main
from jrc_rsp.complexity import (
    ArchConfig, count_direct, count_efficient, estimate_relative_time, post_beamform_direct,
    post_beamform_efficient,
)
from jrc_rsp.music import autocov, evd_qr_iteration, music_doppler
from jrc_rsp.params import RadarParams, Scenario, derive, load_scenario
from jrc_rsp.rsp_ra import (
    OpCounter, range_azimuth_image, range_azimuth_image_direct, steering_matrix,
)
from jrc_rsp.waveform import aperiodic_autocorr, build_waveform, golay_pair

TRIALS = 100
RANGE, AZIMUTH, VELOCITY = 0, 1, 2


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@lru_cache(maxsize=None)
def full_reports(mode: str, music_mode: str = "f32", N: int | None = None, snrs: tuple | None = None):
    sc = load_scenario("paper3t").with_(trials=TRIALS)
    if N is not None:
        sc = sc.with_(params=sc.params.with_(N=N))
    if snrs is not None:
        sc = sc.with_(snr_db=snrs)
    return {rep.snr_db: rep for rep in monte_carlo(sc, mode, music_mode)}


def test_criterion_1_efficient_equals_direct():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst, count = 0.0, 0
    for _ in range(120):
        K = int(rng.choice([8, 16, 32]))
        Q = int(rng.integers(1, 9))
        dphi = float(rng.choice([30.0, 45.0, 60.0, 90.0]))
        p = RadarParams(K=K, golay_len=K // 2, Q=Q, N=2, D=9, delta_phi_deg=dphi,
                        range_gate_m=(0.0, 0.5 * K * 0.084))
        assert p.I <= 8
        wf, W = build_waveform(p), steering_matrix(p)
        packet = rand_c(rng, K, Q)
        n = int(rng.integers(0, 2))
        eff = range_azimuth_image(packet, wf, n, W, p).gamma
        dirc = range_azimuth_image_direct(packet, wf, n, W)
        worst = max(worst, np.max(np.abs(eff - dirc)) / np.max(np.abs(dirc)))
        count += 1
    dt = time.perf_counter() - t0
    verdict(1, worst < 1e-9 and dt < 5.0,
            f"{count} instances, max |diff|/||Gamma||inf = {worst:.2e} (< 1e-9), {dt:.2f} s (< 5 s)")


def test_criterion_2_range_column_is_circular_correlation():
    p = RadarParams(K=1024, golay_len=512, Q=1, N=2, D=9, delta_phi_deg=90.0)
    wf, W = build_waveform(p), steering_matrix(p)
    x = rand_c(np.random.default_rng(202), p.K)
    t0 = time.perf_counter()
    col = range_azimuth_image(x[:, None], wf, 0, W, p, azimuth_bins=[0]).gamma[:, 0]
    g = wf.G[0]
    idx = (np.arange(p.K)[:, None] + np.arange(p.K)[None, :]) % p.K
    direct = x[idx] @ np.conj(g)  # sum_m x[(m + k) mod K] g*[m]
    dt = time.perf_counter() - t0
    err = np.max(np.abs(col - direct))
    verdict(2, err < 1e-8 and dt < 5.0, f"K=1024, max |diff| = {err:.2e} (< 1e-8), {dt:.2f} s (< 5 s)")


def test_criterion_3_golay_complementarity():
    t0 = time.perf_counter()
    bad = []
    length = 2
    while length <= 4096:
        pair = golay_pair(length)
        s = aperiodic_autocorr(pair.a) + aperiodic_autocorr(pair.b)
        expect = np.zeros(length, dtype=np.int64)
        expect[0] = 2 * length
        if s.dtype.kind != "i" or not np.array_equal(s, expect):
            bad.append(length)
        length *= 2
    dt = time.perf_counter() - t0
    verdict(3, not bad and dt < 5.0, f"lengths 2..4096 integer-exact, failures {bad}, {dt:.2f} s (< 5 s)")


def test_criterion_4_ratio_k():
    ratios, instrumented = {}, {}
    for K in (8, 64, 1024):
        p = RadarParams(K=K, golay_len=K // 2, Q=4, N=2, D=9, delta_phi_deg=45.0,
                        range_gate_m=(0.0, 0.5 * K * 0.084))
        ratios[K] = post_beamform_direct(p).cm / post_beamform_efficient(p).cm
        if K <= 64:
            wf, W = build_waveform(p), steering_matrix(p)
            eff, dirc = OpCounter(), OpCounter()
            packet = np.ones((K, p.Q), complex)
            range_azimuth_image(packet, wf, 0, W, p, counter=eff)
            range_azimuth_image_direct(packet, wf, 0, W, counter=dirc)
            bf = K * p.Q * p.I
            instrumented[K] = ((dirc.cm - bf) / (eff.cm - bf),
                               eff.cm == count_efficient(p).cm and dirc.cm == count_direct(p).cm)
    ok = all(ratios[K] == K for K in ratios) and all(r == K and same for K, (r, same) in instrumented.items())
    verdict(4, ok, f"closed-form ratios {ratios}; instrumented (ratio, matches closed form) {instrumented}")


def _noiseless_three(params):
    der = derive(params)
    rb = [int(round(b * params.max_range_bin)) for b in (0.2, 0.5, 0.8)]
    az = [int(round(f * (params.I - 1))) for f in (0.3, 0.55, 0.8)]
    vb = [int(round(f * (params.D - 1))) for f in (0.25, 0.5, 0.9)]
    specs = tuple(on_grid_target(params, k, a, v, amp=math.sqrt(rcs), rcs=rcs)
                  for k, a, v, rcs in zip(rb, az, vb, (10.0, 5.0, 3.0)))
    truth = [(k, a, der.velocity_mps[v]) for k, a, v in zip(rb, az, vb)]
    return Scenario(params=params, targets=specs, snr_db=(math.inf,)), truth


def test_criterion_5_noiseless_exact_recovery():
    details, ok = [], True
    for name, budget in (("ci", 5.0), ("paper3t", 60.0)):
        sc, truth = _noiseless_three(load_scenario(name).params)
        t0 = time.perf_counter()
        res = run_trial(sc, 0, mode="f64", music_mode="f64")
        dt = time.perf_counter() - t0
        got = [(d.range_bin, d.azimuth_bin, d.velocity_mps) for d in res.detections]
        exact = got == truth
        ok &= exact and dt < budget
        details.append(f"{name}: exact={exact} in {dt:.1f} s (< {budget:g} s)")
    verdict(5, ok, "; ".join(details))


def _crossing(reports, target):
    """Lowest SNR from which the target's range RMSE stays at or below 0.5 %."""
    snrs = sorted(reports)
    cross = None
    for s in reversed(snrs):
        if reports[s].rmse_pct[target, RANGE] <= 0.5:
            cross = s
        else:
            break
    return cross


def _table(reports, param=RANGE):
    return " ".join(f"{s:g}:[" + ",".join(f"{v:.2f}" for v in reports[s].rmse_pct[:, param]) + "]"
                    for s in sorted(reports))


@pytest.mark.slow
def test_criterion_6_rmse_structure():
    reps = full_reports("f32")
    snrs = sorted(reps)
    a_ok = all(reps[s].rmse_pct[0, RANGE] <= 0.5 for s in snrs)
    c2, c3 = _crossing(reps, 1), _crossing(reps, 2)
    # "crosses below 0.5 % by SNR X" with 5 dB tolerance: no later than X + 5
    b_ok = c2 is not None and c3 is not None and c2 <= -5 + 5 and c3 <= 5 + 5
    strict = c2 is not None and c3 is not None and abs(c2 - -5) <= 5 and abs(c3 - 5) <= 5
    c_fail = [(s, j) for s in snrs if s <= 0 for j in (RANGE, AZIMUTH, VELOCITY)
              if not (reps[s].rmse_pct[2, j] >= reps[s].rmse_pct[1, j] >= reps[s].rmse_pct[0, j])]
    c_ok = not c_fail
    verdict(6, a_ok and b_ok and c_ok,
            f"paper3t, {TRIALS} trials, f32; (a) target-1 range <= 0.5 %: {a_ok}; "
            f"(b) crossings t2={c2} dB (<= 0), t3={c3} dB (<= 10): {b_ok} "
            f"[within +-5 dB window: {strict}]; (c) ordering at SNR <= 0: {c_ok} {c_fail}; "
            f"range % {_table(reps)}")


@pytest.mark.slow
def test_criterion_7_wordlength():
    base = full_reports("f32")
    snrs = sorted(base)
    close, detail = True, []
    for mode in ("fx32_5", "fx24_5"):
        reps = full_reports(mode)
        worst = 0.0
        for s in snrs:
            diff = np.abs(reps[s].rmse - base[s].rmse)
            tol = 0.1 * base[s].rmse + 1e-12
            worst = max(worst, float(np.max(diff / (base[s].rmse + 1e-12))))
            close &= bool(np.all(diff <= tol))
        detail.append(f"{mode} worst relative deviation {worst:.3f}")
    fx19 = full_reports("fx19_5")
    ratios = {s: fx19[s].rmse[2, RANGE] / max(base[s].rmse[2, RANGE], 1e-12) for s in snrs if s <= 0}
    degrade = all(r >= 2.0 for r in ratios.values())
    detail.append("fx19_5/f32 target-3 range RMSE " + ", ".join(f"{s:g} dB: {r:.2f}" for s, r in ratios.items()))
    fxm = full_reports("f32", "fx24_5")
    v_float = math.sqrt(np.nanmean([base[s].rmse[:, VELOCITY] ** 2 for s in snrs]))
    v_fixed = math.sqrt(np.nanmean([fxm[s].rmse[:, VELOCITY] ** 2 for s in snrs]))
    music_worse = v_fixed > v_float
    detail.append(f"Doppler RMSE MUSIC fx24_5 {v_fixed:.4f} vs float {v_float:.4f} m/s")
    detail.append(f"fx19_5 range % {_table(fx19)}")
    verdict(7, close and degrade and music_worse,
            f"fx32/fx24 within 10 %: {close}; fx19 >= 2x at SNR <= 0: {degrade}; "
            f"fixed MUSIC worse: {music_worse}; " + "; ".join(detail))


@pytest.mark.slow
def test_criterion_8_reconfiguration():
    p = RadarParams()
    base = ArchConfig(delta_phi_deg=1.0)
    r2 = estimate_relative_time(base, ArchConfig(delta_phi_deg=2.0), p)
    r4 = estimate_relative_time(base, ArchConfig(delta_phi_deg=4.0), p)
    ratio_ok = (math.isclose(r2, 181 / 91) and math.isclose(r4, 181 / 46)
                and abs(r2 / 1.96 - 1) <= 0.2 and abs(r4 / 3.75 - 1) <= 0.2)

    # Doppler RMSE against packet count at fixed SNR >= 0
    snrs = (0.0, 10.0)
    vel = {N: full_reports("f32", "f32", N, snrs) for N in (10, 20, 50, 100)}
    mono_fail = []
    for s in snrs:
        for t in range(3):
            seq = [vel[N][s].rmse[t, VELOCITY] for N in (10, 20, 50, 100)]
            if any(b > a + 1e-12 for a, b in zip(seq, seq[1:])):
                mono_fail.append((s, t + 1, [round(v, 4) for v in seq]))
    mono_ok = not mono_fail

    # D = 40 vs 200 over +-5 m/s: grid quantization bound, then end-to-end error
    ci = load_scenario("ci")
    rt = dataclasses.replace(ci.targets, positions="continuous")
    d_rmse, bound_ok, bound_txt = {}, True, []
    for D in (40, 200):
        params = ci.params.with_(v_span_mps=5.0, D=D, T_PRI_s=ci.params.t_pri)
        step = derive(params).velocity_step
        sc = ci.with_(params=params, targets=rt, snr_db=(10.0,), trials=TRIALS)
        rng = np.random.default_rng(D)
        worst = 0.0
        n = np.arange(params.N)
        for v in rng.uniform(-5.0, 5.0, 200):
            fd = 2 * v / params.wavelength
            _, v_hat, _, _ = music_doppler(np.exp(-2j * np.pi * fd * n * params.t_pri), params)
            worst = max(worst, abs(v_hat - v))
        bound_ok &= worst <= step / 2 + 1e-9
        bound_txt.append(f"D={D}: max grid error {worst:.4f} <= step/2 {step / 2:.4f}")
        d_rmse[D] = monte_carlo(sc, "f64", "f64")[0].rmse[0, VELOCITY]
    d_ok = d_rmse[40] > d_rmse[200]
    verdict(8, ratio_ok and mono_ok and bound_ok and d_ok,
            f"MF time ratios {r2:.3f} (181/91), {r4:.3f} (181/46): {ratio_ok}; "
            f"Doppler RMSE non-increasing in N: {mono_ok} {mono_fail}; {'; '.join(bound_txt)}; "
            f"target-1 Doppler RMSE at 10 dB D=40 {d_rmse[40]:.3f} > D=200 {d_rmse[200]:.3f} m/s: {d_ok}")


def test_criterion_9_rank_one_evd():
    rng = np.random.default_rng(909)
    t0 = time.perf_counter()
    worst = [0.0, 0.0, 0.0]
    for _ in range(1000):
        y = rand_c(rng, 100)
        res = evd_qr_iteration(autocov(y))
        lam = np.linalg.norm(y) ** 2
        E = res.eigvecs[:, 1:]
        worst[0] = max(worst[0], abs(res.eigvals[0] - lam) / lam)
        worst[1] = max(worst[1], float(np.max(res.eigvals[1:])) / res.eigvals[0])
        worst[2] = max(worst[2], np.linalg.norm(E.conj().T @ y) / math.sqrt(lam))
    dt = time.perf_counter() - t0
    ok = max(worst) <= 1e-6 and dt < 30.0
    verdict(9, ok, f"1000 vectors, N=100: max rel |lambda1 - ||y||^2| {worst[0]:.1e}, "
                   f"max lambda_rest/lambda1 {worst[1]:.1e}, max ||E^H y||/||y|| {worst[2]:.1e} "
                   f"(all <= 1e-6), {dt:.1f} s (< 30 s)")


@pytest.mark.slow
def test_criterion_10_thread_determinism(tmp_path):
    many = max(4, os.cpu_count() or 1)
    outs = {}
    for threads in (1, many):
        d = tmp_path / f"t{threads}"
        rc = cli_main(["sweep", "snr", "--scenario", "ci", "--threads", str(threads), "--out-dir", str(d)])
        assert rc == 0
        outs[threads] = (d / "rmse_vs_snr.csv").read_bytes()
    same = outs[1] == outs[many]
    n_rows = outs[1].count(b"\n") - 1
    verdict(10, same, f"ci sweep snr (6 SNRs x 100 trials), 1 vs {many} threads: byte-identical={same}, "
                      f"{n_rows} rows")
