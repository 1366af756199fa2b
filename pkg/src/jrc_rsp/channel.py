"""Received data cube synthesis: delayed Golay echoes, Doppler and array phase, AWGN.

SNR convention: ``snr_db = 10 log10(a_ref**2 / sigma_n**2)`` per sample and per
antenna, where ``a_ref`` is the mean amplitude of the strongest target
(``sqrt`` of its mean RCS, or its fixed amplitude).  A noise-only scene uses
``a_ref = 1``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .params import RadarParams, TargetSpec, ValidationError
from .waveform import TxWaveform


@dataclass(frozen=True)
class TargetRealization:
    amplitude: complex
    delay_bin: int
    doppler_hz: float
    steer_phase_rad: np.ndarray  # length Q
    spec: TargetSpec


@dataclass(frozen=True)
class DataCube:
    samples: np.ndarray  # complex [K][Q][N]
    meta: RadarParams

    def __post_init__(self):
        p = self.meta
        if self.samples.shape != (p.K, p.Q, p.N):
            raise ValidationError(f"cube shape {self.samples.shape} != {(p.K, p.Q, p.N)}")

    def packet(self, n: int) -> np.ndarray:
        return self.samples[:, :, n]


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, trial_index]))


def sample_rcs(mean_rcs: float, rng: np.random.Generator) -> float:
    """Swerling-1 amplitude: RCS power ~ Exponential(mean_rcs), returns its square root."""
    if not mean_rcs > 0:
        raise ValidationError("mean_rcs must be positive")
    return math.sqrt(rng.exponential(mean_rcs))


def delay_bin(range_m: float, params: RadarParams) -> int:
    return int(round(2.0 * range_m / (299_792_458.0 * params.ts)))


def array_phase(azimuth_deg: float, params: RadarParams) -> np.ndarray:
    kc = 2 * np.pi / params.wavelength
    return kc * params.spacing * np.arange(params.Q) * math.sin(math.radians(azimuth_deg))


def realize_targets(
    specs: Sequence[TargetSpec], params: RadarParams, rng: np.random.Generator
) -> list[TargetRealization]:
    out = []
    for s in specs:
        s.check(params)
        k = delay_bin(s.range_m, params)
        if k + params.golay_len > params.K:
            raise ValidationError(f"delay bin {k} out of gate")
        amp = s.fixed_amplitude if s.fixed_amplitude is not None else sample_rcs(s.mean_rcs_sqm, rng)
        out.append(TargetRealization(
            amplitude=complex(amp),
            delay_bin=k,
            doppler_hz=2.0 * s.velocity_mps / params.wavelength,
            steer_phase_rad=array_phase(s.azimuth_deg, params),
            spec=s,
        ))
    return out


def reference_amplitude(specs: Sequence[TargetSpec]) -> float:
    if not specs:
        return 1.0
    return max(s.fixed_amplitude if s.fixed_amplitude is not None else math.sqrt(s.mean_rcs_sqm)
               for s in specs)


def noise_sigma(snr_db: float, specs: Sequence[TargetSpec]) -> float:
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return reference_amplitude(specs) / 10 ** (snr_db / 20)


def echo(waveform: TxWaveform, r: TargetRealization, params: RadarParams,
         packets: Sequence[int] | None = None) -> np.ndarray:
    """Noiseless contribution of one target, shape [K][Q][len(packets)]."""
    n = np.arange(params.N) if packets is None else np.asarray(packets)
    k = r.delay_bin
    shifted = np.zeros((len(n), params.K))
    shifted[:, k:] = waveform.G[n, : params.K - k]
    slow = np.exp(-2j * np.pi * r.doppler_hz * n * params.t_pri)
    spatial = np.exp(1j * r.steer_phase_rad)
    return r.amplitude * shifted.T[:, None, :] * spatial[None, :, None] * slow[None, None, :]


def synthesize_cube(
    waveform: TxWaveform,
    realizations: Sequence[TargetRealization],
    snr_db: float,
    params: RadarParams,
    rng: np.random.Generator,
    sigma: float | None = None,
) -> DataCube:
    """Sum of target echoes plus circular complex AWGN of variance ``sigma**2``.

    ``sigma`` defaults to the SNR convention above.
    """
    if sigma is None:
        sigma = noise_sigma(snr_db, [r.spec for r in realizations])
    shape = (params.K, params.Q, params.N)
    if sigma > 0:
        samples = rng.standard_normal(shape + (2,)).view(np.complex128)[..., 0]
        samples *= sigma / math.sqrt(2)
    else:
        samples = np.zeros(shape, dtype=np.complex128)
    n = np.arange(params.N)
    L = params.golay_len
    for r in realizations:
        k = r.delay_bin
        slow = np.exp(-2j * np.pi * r.doppler_hz * n * params.t_pri)
        spatial = np.exp(1j * r.steer_phase_rad)
        chips = r.amplitude * waveform.G[:, :L].T  # L x N
        samples[k:k + L] += chips[:, None, :] * spatial[None, :, None] * slow[None, None, :]
    return DataCube(samples, params)


# -- binary dump ------------------------------------------------------------
# header: K, Q, N as little-endian int32; payload: complex128 LE (re, im
# interleaved float64), k fastest, then q, then n.

def dump_cube(cube: DataCube, path: str | Path) -> None:
    K, Q, N = cube.samples.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3i", K, Q, N))
        fh.write(np.ascontiguousarray(cube.samples.transpose(2, 1, 0)).astype("<c16").tobytes())


def load_cube_samples(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    K, Q, N = struct.unpack("<3i", data[:12])
    payload = np.frombuffer(data[12:], dtype="<c16")
    if payload.size != K * Q * N:
        raise ValueError(f"cube payload has {payload.size} samples, header says {K * Q * N}")
    return payload.reshape(N, Q, K).transpose(2, 1, 0).astype(complex)


def load_cube(path: str | Path, params: RadarParams) -> DataCube:
    return DataCube(load_cube_samples(path), params)
