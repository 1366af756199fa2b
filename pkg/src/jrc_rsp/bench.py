"""Per-trial pipeline, Monte Carlo RMSE aggregation and parameter sweeps."""

from __future__ import annotations

import csv
import io
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .channel import realize_targets, synthesize_cube, trial_rng
from .clean import Detection, clean
from .fxp import NumericMode, parse_mode
from .music import doppler_steering, music_doppler, MusicSpectrum
from .params import RadarParams, Scenario, ValidationError
from .rsp_ra import packet_spectrum, range_azimuth_image, steering_matrix
from .waveform import TxWaveform, build_waveform

PARAMS = ("range", "azimuth", "velocity")


@dataclass(frozen=True)
class Pipeline:
    params: RadarParams
    waveform: TxWaveform
    steering: np.ndarray
    doppler_steering: np.ndarray


@lru_cache(maxsize=16)
def pipeline_for(params: RadarParams) -> Pipeline:
    return Pipeline(params, build_waveform(params), steering_matrix(params), doppler_steering(params))


@dataclass(frozen=True)
class Truth:
    range_m: float
    azimuth_deg: float
    velocity_mps: float
    amplitude: float
    mean_rcs_sqm: float


@dataclass
class TrialResult:
    trial: int
    snr_db: float
    detections: list[Detection]
    truths: list[Truth]  # sorted by realized amplitude, strongest first
    spectra: list[MusicSpectrum] = field(default_factory=list, repr=False)

    pairing: str = "nearest"
    # lambda / d: sin-angle shift that leaves the ULA steering vector unchanged
    alias_period: float = 2.0
    # lambda / (2 T_PRI): velocity shift that leaves the slow-time phase ramp unchanged
    velocity_period: float = math.inf

    def _sin_distance(self, az_a: float, az_b: float) -> float:
        du = abs(math.sin(math.radians(az_a)) - math.sin(math.radians(az_b)))
        return min(du, abs(self.alias_period - du))

    def _aliases(self, az_deg: float) -> list[float]:
        s = math.sin(math.radians(az_deg))
        return [az_deg] + [math.degrees(math.asin(s + k * self.alias_period))
                           for k in (-1, 1) if abs(s + k * self.alias_period) <= 1.0]

    def azimuth_error(self, estimate_deg: float, truth_deg: float) -> float:
        """``estimate - truth`` between the closest array-equivalent angles of each.

        With ``d = lambda / 2`` the -90 deg and +90 deg steering vectors coincide,
        so a -90 deg estimate for an 85 deg target is a 5 deg error. The angle
        axis then closes into a loop through endfire, and the difference is
        wrapped into [-90, 90): a -88 deg estimate for an 89 deg target is 3 deg.
        """
        if math.isclose(self.alias_period, 2.0):
            return (estimate_deg - truth_deg + 90.0) % 180.0 - 90.0
        return min((a - b for a in self._aliases(estimate_deg) for b in self._aliases(truth_deg)),
                   key=abs)

    def velocity_error(self, estimate: float, truth: float) -> float:
        """``estimate - truth`` wrapped by the unambiguous velocity period."""
        e = estimate - truth
        if math.isfinite(self.velocity_period) and math.isfinite(e):
            e -= self.velocity_period * round(e / self.velocity_period)
        return e

    def pairs(self) -> list[tuple[int, int]]:
        """``(truth_index, detection_index)`` pairs.

        ``rank`` pairs detection ``i`` with the ``i``-th strongest target.
        ``nearest`` keeps the strongest-first target labels; each target, in
        that order, claims the closest unclaimed detection (normalized range and
        wrapped sin-angle distance), so two targets of nearly equal strength
        cannot trade places.
        """
        nt, nd = len(self.truths), len(self.detections)
        if self.pairing == "rank":
            return [(i, i) for i in range(min(nt, nd))]
        if nt == 0 or nd == 0:
            return []
        cost = np.empty((nt, nd))
        for i, t in enumerate(self.truths):
            for j, d in enumerate(self.detections):
                du = self._sin_distance(d.azimuth_deg, t.azimuth_deg)
                cost[i, j] = ((d.range_m - t.range_m) / 40.0) ** 2 + (du / 2.0) ** 2
        out, free = [], list(range(nd))
        for i in range(nt):
            if not free:
                break
            j = min(free, key=lambda j: (cost[i, j], j))
            free.remove(j)
            out.append((i, j))
        return out

    def errors(self, n_targets: int | None = None) -> np.ndarray:
        """Signed errors ``[target, (range, azimuth, velocity)]``; NaN marks a miss."""
        n = len(self.truths) if n_targets is None else n_targets
        out = np.full((n, 3), np.nan)
        for i, j in self.pairs():
            if i >= n:
                continue
            d, t = self.detections[j], self.truths[i]
            out[i] = (d.range_m - t.range_m, self.azimuth_error(d.azimuth_deg, t.azimuth_deg),
                      self.velocity_error(d.velocity_mps, t.velocity_mps))
        return out


def run_trial(
    scenario: Scenario,
    trial_index: int,
    snr_db: float | None = None,
    mode: NumericMode | str = "f64",
    music_mode: NumericMode | str = "f64",
    keep_spectra: bool = False,
    pairing: str = "nearest",
) -> TrialResult:
    """Synthesize, image, CLEAN packet 0, then MUSIC each detection over all packets.

    Targets are labelled strongest-first by realized amplitude; see
    :meth:`TrialResult.pairs` for how detections are matched to them.
    """
    p = scenario.params
    mode, music_mode = parse_mode(mode), parse_mode(music_mode)
    snr = scenario.snr_db[0] if snr_db is None else snr_db
    pipe = pipeline_for(p)
    rng = trial_rng(scenario.rng_seed, trial_index)
    specs = scenario.targets_for_trial(rng)
    real = realize_targets(specs, p, rng)
    cube = synthesize_cube(pipe.waveform, real, snr, p, rng)

    spectra = packet_spectrum(cube.samples, mode)  # DFT along fast time, K x Q x N
    first = range_azimuth_image(cube.samples[:, :, 0], pipe.waveform, 0, pipe.steering, p, mode,
                                spectrum=spectra[:, :, 0])
    dets, _ = clean(first.gamma, p, pipe.waveform, pipe.steering)

    bins = sorted({d.azimuth_bin for d in dets})
    col = {b: j for j, b in enumerate(bins)}
    slow = np.empty((len(dets), p.N), dtype=complex)
    for n in range(p.N):
        if n == 0:
            img = first.gamma[:, bins]
        else:
            img = range_azimuth_image(None, pipe.waveform, n, pipe.steering, p, mode,
                                      azimuth_bins=bins, spectrum=spectra[:, :, n]).gamma
        for j, d in enumerate(dets):
            slow[j, n] = img[d.range_bin, col[d.azimuth_bin]]

    out_dets, kept = [], []
    for j, d in enumerate(dets):
        if p.N >= 2:
            fd, v, spec, _ = music_doppler(slow[j], p, pipe.doppler_steering, music_mode)
            kept.append(spec)
        else:
            fd = v = float("nan")
        out_dets.append(d.with_doppler(fd, v))

    order = sorted(range(len(real)), key=lambda i: -abs(real[i].amplitude))
    truths = [Truth(real[i].spec.range_m, real[i].spec.azimuth_deg, real[i].spec.velocity_mps,
                    abs(real[i].amplitude), real[i].spec.mean_rcs_sqm) for i in order]
    return TrialResult(trial_index, snr, out_dets, truths, kept if keep_spectra else [], pairing,
                       alias_period=p.wavelength / p.spacing,
                       velocity_period=p.wavelength / (2.0 * p.t_pri))


def rmse(errors: Iterable[float]) -> tuple[float, int]:
    """Root mean square of the non-NaN errors and the number of NaN misses."""
    e = np.asarray(list(errors), dtype=float)
    if e.size == 0:
        raise ValidationError("rmse of an empty error vector")
    miss = int(np.isnan(e).sum())
    good = e[~np.isnan(e)]
    if good.size == 0:
        return float("nan"), miss
    return float(np.sqrt(np.mean(good ** 2))), miss


def spans(params: RadarParams) -> tuple[float, float, float]:
    lo, hi = params.range_gate_m
    return hi - lo, 180.0, 2.0 * params.v_span_mps


@dataclass
class RmseReport:
    snr_db: float
    trials: int
    rmse: np.ndarray       # [target, param]
    rmse_pct: np.ndarray   # span-normalized, percent
    misses: np.ndarray     # [target, param]
    mode: str = "f64"
    music_mode: str = "f64"

    def rows(self, extra: dict | None = None) -> list[dict]:
        out = []
        for t in range(self.rmse.shape[0]):
            for j, name in enumerate(PARAMS):
                row = dict(extra or {})
                row.update(snr_db=self.snr_db, target=t + 1, param=name,
                           rmse=self.rmse[t, j], rmse_pct=self.rmse_pct[t, j],
                           misses=int(self.misses[t, j]), trials=self.trials,
                           mode=self.mode, music_mode=self.music_mode)
                out.append(row)
        return out


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("RSP_THREADS", "0") or 0) or (os.cpu_count() or 1)
    return max(1, int(threads))


def run_trials(scenario: Scenario, snr_db: float, mode="f64", music_mode="f64",
               threads: int | None = None) -> list[TrialResult]:
    """All trials at one SNR; order and content are independent of ``threads``."""
    def job(t):
        return run_trial(scenario, t, snr_db, mode, music_mode)

    n = resolve_threads(threads)
    if n == 1:
        return [job(t) for t in range(scenario.trials)]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(job, range(scenario.trials)))


def aggregate(results: Sequence[TrialResult], params: RadarParams, n_targets: int,
              mode: str = "f64", music_mode: str = "f64") -> RmseReport:
    results = sorted(results, key=lambda r: r.trial)
    errs = np.stack([r.errors(n_targets) for r in results])  # trial x target x param
    rm = np.empty((n_targets, 3))
    miss = np.empty((n_targets, 3), dtype=int)
    for t in range(n_targets):
        for j in range(3):
            rm[t, j], miss[t, j] = rmse(errs[:, t, j])
    pct = 100.0 * rm / np.array(spans(params))[None, :]
    return RmseReport(results[0].snr_db, len(results), rm, pct, miss, str(mode), str(music_mode))


def n_targets(scenario: Scenario) -> int:
    t = scenario.targets
    return t.count if hasattr(t, "count") else len(t)


def monte_carlo(scenario: Scenario, mode="f64", music_mode="f64",
                threads: int | None = None, progress: Callable[[str], None] | None = None) -> list[RmseReport]:
    """One :class:`RmseReport` per SNR in the scenario."""
    if scenario.trials < 1:
        raise ValidationError("trials must be >= 1")
    mode, music_mode = parse_mode(mode), parse_mode(music_mode)
    reports = []
    for snr in scenario.snr_db:
        res = run_trials(scenario, snr, mode, music_mode, threads)
        reports.append(aggregate(res, scenario.params, n_targets(scenario), str(mode), str(music_mode)))
        if progress:
            progress(f"snr={snr:g} dB mode={mode} done ({scenario.trials} trials)")
    return reports


# -- sweeps -------------------------------------------------------------------

SWEEP_KINDS = ("snr", "wordlength", "delta_phi", "packets", "doppler_elems")
WORDLENGTH_MODES = ("f64", "f32", "fx32_5", "fx24_5", "fx19_5")


def parse_values(kind: str, text: str | Sequence) -> list:
    """``"a:step:b"`` ranges or comma lists; word lengths are mode names."""
    if not isinstance(text, str):
        vals = list(text)
    elif kind == "wordlength":
        # commas inside fx<W,L> do not separate values
        vals = [v.strip() for v in re.findall(r"(?:[^,<]|<[^>]*>)+", text) if v.strip()]
    elif ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[1] == 0:
            raise ValidationError(f"range must be start:step:stop, got {text!r}")
        a, s, b = parts
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        if n < 1:
            raise ValidationError(f"empty range {text!r}")
        vals = [a + i * s for i in range(n)]
    else:
        vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValidationError("sweep needs at least one value")
    if kind == "wordlength":
        return [str(parse_mode(v)) for v in vals]
    if kind in ("packets", "doppler_elems"):
        ints = [int(v) for v in vals]
        if any(i != v for i, v in zip(ints, vals)):
            raise ValidationError(f"{kind} values must be integers")
        return ints
    return [float(v) for v in vals]


def sweep(kind: str, scenario: Scenario, values, mode="f64", music_mode="f64",
          threads: int | None = None, progress=None) -> list[dict]:
    """Rerun :func:`monte_carlo` varying one parameter; returns flat CSV rows.

    For ``wordlength`` each value is the MF-stage mode; ``music_mode="follow"``
    runs MUSIC in the same mode.
    """
    if kind not in SWEEP_KINDS:
        raise ValidationError(f"unknown sweep kind {kind!r}; choose from {SWEEP_KINDS}")
    values = parse_values(kind, values)
    rows: list[dict] = []
    for v in values:
        sc, m, mm = scenario, mode, music_mode
        if kind == "snr":
            sc = scenario.with_(snr_db=(v,))
        elif kind == "wordlength":
            m = v
            if music_mode == "follow":
                mm = v
        elif kind == "delta_phi":
            sc = scenario.with_(params=scenario.params.with_(delta_phi_deg=v))
        elif kind == "packets":
            sc = scenario.with_(params=scenario.params.with_(N=v))
        elif kind == "doppler_elems":
            sc = scenario.with_(params=scenario.params.with_(D=v))
        if mm == "follow":
            mm = m
        for rep in monte_carlo(sc, m, mm, threads, progress):
            rows.extend(rep.rows({"sweep": kind, "value": v}))
    return rows


CSV_FIELDS = ("sweep", "value", "snr_db", "target", "param", "rmse", "rmse_pct", "misses",
              "trials", "mode", "music_mode")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def rows_to_csv(rows: Sequence[dict], fieldnames: Sequence[str] = CSV_FIELDS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fieldnames), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in fieldnames})
    return buf.getvalue()


DETECTION_FIELDS = ("trial", "snr_db", "iteration", "amp", "range_m", "azimuth_deg",
                    "f_D_hz", "velocity_mps", "range_bin", "azimuth_bin",
                    "true_range_m", "true_azimuth_deg", "true_velocity_mps")


def detection_rows(results: Sequence[TrialResult]) -> list[dict]:
    rows = []
    for r in results:
        truth_of = {j: i for i, j in r.pairs()}
        for j, d in enumerate(r.detections):
            t = r.truths[truth_of[j]] if j in truth_of else None
            rows.append(dict(
                trial=r.trial, snr_db=r.snr_db, iteration=d.iteration, amp=d.amplitude,
                range_m=d.range_m, azimuth_deg=d.azimuth_deg, f_D_hz=d.doppler_hz,
                velocity_mps=d.velocity_mps, range_bin=d.range_bin, azimuth_bin=d.azimuth_bin,
                true_range_m=t.range_m if t else float("nan"),
                true_azimuth_deg=t.azimuth_deg if t else float("nan"),
                true_velocity_mps=t.velocity_mps if t else float("nan"),
            ))
    return rows
