"""Peak search and CLEAN on the first packet's range-azimuth image."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import TargetRealization, array_phase, echo
from .params import RadarParams, TargetSpec, ValidationError, derive
from .rsp_ra import range_azimuth_image
from .waveform import TxWaveform


@dataclass(frozen=True)
class Detection:
    amplitude: float
    range_bin: int
    azimuth_bin: int
    range_m: float
    azimuth_deg: float
    iteration: int = 0
    doppler_hz: float = float("nan")
    velocity_mps: float = float("nan")

    def with_doppler(self, doppler_hz: float, velocity_mps: float) -> "Detection":
        return replace(self, doppler_hz=doppler_hz, velocity_mps=velocity_mps)


@dataclass
class CleanState:
    residue: np.ndarray
    iteration: int = 0
    detections: list[Detection] = field(default_factory=list)


def peak_search(image: np.ndarray, params: RadarParams) -> tuple[float, int, int]:
    """Strongest cell of ``|image|`` inside the range gate.

    Ties go to the smallest range bin, then the smallest azimuth bin (row-major
    argmax order).
    """
    mag = np.abs(np.asarray(image))
    if mag.size == 0:
        raise ValidationError("empty image")
    lo = params.min_range_bin
    hi = min(params.max_range_bin, mag.shape[0] - 1)
    if hi < lo:
        raise ValidationError("range gate selects no bins")
    gated = mag[lo:hi + 1]
    k, i = np.unravel_index(int(np.argmax(gated)), gated.shape)
    return float(gated[k, i]), int(k + lo), int(i)


def psf(
    params: RadarParams,
    waveform: TxWaveform,
    steering: np.ndarray,
    amp: complex,
    range_bin: int,
    azimuth_bin: int,
) -> np.ndarray:
    """Image of a dummy zero-Doppler target at the given cell, scaled so its peak equals ``amp``.

    The dummy echo uses packet 0's sequence and goes through the same
    double-precision imaging path.  Pass the complex residue value as ``amp``
    to cancel that cell exactly.
    """
    if not (0 <= range_bin <= params.K - params.golay_len) or not (0 <= azimuth_bin < steering.shape[0]):
        raise ValidationError("psf cell out of range")
    az = float(derive(params).azimuth_deg[azimuth_bin])
    dummy = TargetRealization(
        amplitude=1.0, delay_bin=range_bin, doppler_hz=0.0,
        steer_phase_rad=array_phase(az, params), spec=TargetSpec(range_bin * params.range_res, az, 0.0),
    )
    packet = echo(waveform, dummy, params, packets=[0])[:, :, 0]
    unit = range_azimuth_image(packet, waveform, 0, steering, params, "f64").gamma
    return unit * (amp / unit[range_bin, azimuth_bin])


def clean(
    image: np.ndarray,
    params: RadarParams,
    waveform: TxWaveform,
    steering: np.ndarray,
    P_tilde: int | None = None,
    residue_threshold: float | None = None,
) -> tuple[list[Detection], np.ndarray]:
    """Detect, record and subtract the strongest scatterer up to ``P_tilde`` times.

    Stops early once the residue peak drops below ``residue_threshold`` times
    the first peak (0 disables).  Returns the detections in extraction order and
    the final residue.
    """
    P_tilde = params.P_tilde if P_tilde is None else P_tilde
    threshold = params.residue_threshold if residue_threshold is None else residue_threshold
    if P_tilde < 1:
        raise ValidationError("P_tilde must be >= 1")
    der = derive(params)
    state = CleanState(residue=np.array(image, dtype=np.complex128))
    first_peak = None
    while state.iteration < P_tilde:
        amp, k, i = peak_search(state.residue, params)
        if first_peak is None:
            first_peak = amp
        elif threshold > 0 and amp < threshold * first_peak:
            break
        state.detections.append(Detection(
            amplitude=amp, range_bin=k, azimuth_bin=i,
            range_m=k * params.range_res, azimuth_deg=float(der.azimuth_deg[i]),
            iteration=state.iteration,
        ))
        state.residue = state.residue - psf(params, waveform, steering, state.residue[k, i], k, i)
        state.iteration += 1
    return state.detections, state.residue
