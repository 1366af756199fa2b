"""Range-azimuth imaging: per-antenna DFT, beamformed matched filter, IDFT.

DFT scaling is forward-unnormalized and inverse ``1/K``.  With that choice a
unit-amplitude, on-grid, broadside-steered target gives an image peak of
exactly ``Q * golay_len`` at its delay bin.

The DFT/IDFT run in double precision in ``f64`` mode and in single precision
otherwise; a fixed-point mode only affects the beamforming / Golay-spectrum
multiply stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fxp
from .fxp import NumericMode, parse_mode
from .params import RadarParams, ValidationError, derive
from .waveform import TxWaveform

# azimuth columns processed per fixed-point block; bounds int64 temporaries
_FX_BLOCK = 16


def _check_len(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise ValidationError(f"DFT length must be a power of two, got {n}")


def dft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalized forward DFT ``X[m] = sum_k x[k] exp(-2j pi k m / K)``."""
    x = np.asarray(x)
    _check_len(x.shape[axis])
    return np.fft.fft(x, axis=axis)


def idft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    x = np.asarray(x)
    _check_len(x.shape[axis])
    return np.fft.ifft(x, axis=axis)


@dataclass
class OpCounter:
    """Running tally of complex multiplies, adder inputs and peak working storage."""

    cm: int = 0
    ca_inputs: int = 0
    mem_words: int = 0

    def add(self, cm: int = 0, ca_inputs: int = 0, mem_words: int = 0) -> None:
        self.cm += cm
        self.ca_inputs += ca_inputs
        self.mem_words = max(self.mem_words, mem_words)


def steering_matrix(params: RadarParams) -> np.ndarray:
    """``W[i, q] = exp(-j k_c d q sin(phi_i))``, shape ``I x Q``."""
    az = np.radians(derive(params).azimuth_deg)
    kc = 2 * np.pi / params.wavelength
    q = np.arange(params.Q)
    W = np.exp(-1j * kc * params.spacing * np.outer(np.sin(az), q))
    W[:, 0] = 1.0
    W.setflags(write=False)
    return W


def golay_spec_scale(params: RadarParams) -> float:
    """Power-of-two normalizer bringing ``|DFT(g_n)| <= sqrt(2 golay_len)`` to at most 1."""
    return 2.0 ** -int(np.ceil(np.log2(np.sqrt(2.0 * params.golay_len))))


def beamform_mf_efficient(
    S: np.ndarray,
    w: np.ndarray,
    g_conj: np.ndarray,
    mode: NumericMode | str = "f64",
    counter: OpCounter | None = None,
    fx_scale: float = 1.0,
    g_scale: float = 1.0,
) -> np.ndarray:
    """``out[k] = (sum_q S[k, q] w[q]) * g_conj[k]`` with accumulation before the multiply.

    ``w`` may be a single weight vector (length Q) or a stack ``I x Q``; the
    result is then length K or ``K x I``.  In fixed-point modes ``S`` is
    multiplied by ``fx_scale`` and ``g_conj`` by ``g_scale`` before
    quantization, and the float result is scaled back.
    """
    mode = parse_mode(mode)
    W = np.atleast_2d(w)
    K, Q = S.shape
    n_az = W.shape[0]
    if W.shape[1] != Q or g_conj.shape != (K,):
        raise ValidationError("dimension mismatch in beamform_mf_efficient")
    if counter is not None:
        for _ in range(n_az):
            counter.add(cm=K * Q, ca_inputs=K * (Q - 1), mem_words=K)
            counter.add(cm=K)

    if mode.is_fixed:
        out = _beamform_mf_fixed(S, W, g_conj, mode.fx, fx_scale, g_scale)
    else:
        dt = mode.float_dtype
        out = (np.asarray(S, dt) @ np.asarray(W, dt).T) * np.asarray(g_conj, dt)[:, None]
    return out[:, 0] if np.ndim(w) == 1 else out


def _beamform_mf_fixed(S, W, g_conj, fmt, fx_scale, g_scale) -> np.ndarray:
    K = S.shape[0]
    Sq = fxp.quantize_complex_array(np.asarray(S, complex) * fx_scale, fmt)
    Gq = fxp.quantize_complex_array(np.asarray(g_conj, complex) * g_scale, fmt)
    g_col = fxp.FxArray(Gq.re[:, None], Gq.im[:, None], fmt)
    out = np.empty((K, W.shape[0]), dtype=np.complex64)
    for start in range(0, W.shape[0], _FX_BLOCK):
        Wq = fxp.quantize_complex_array(W[start:start + _FX_BLOCK], fmt)
        beam = fxp.cmatmul_array(Sq, Wq)
        prod = fxp.cmul_array(beam, g_col)
        out[:, start:start + _FX_BLOCK] = prod.value() / (fx_scale * g_scale)
    return out


def beamform_mf_direct(
    S: np.ndarray, w: np.ndarray, g: np.ndarray, counter: OpCounter | None = None
) -> np.ndarray:
    """Oracle: forms the full ``K x K`` product ``(S w) g^H`` and returns its diagonal."""
    S = np.asarray(S, np.complex128)
    K, Q = S.shape
    beam = S @ np.asarray(w, np.complex128)
    outer = np.outer(beam, np.conj(np.asarray(g, np.complex128)))
    if counter is not None:
        counter.add(cm=K * Q, ca_inputs=K * (Q - 1), mem_words=K * K)
        counter.add(cm=K * K)
    return np.diag(outer).copy()


@dataclass(frozen=True)
class RangeAzimuthImage:
    gamma: np.ndarray  # K x len(azimuth_bins)
    mode: NumericMode
    azimuth_bins: np.ndarray = field(default=None)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.gamma)


def packet_spectrum(packet: np.ndarray, mode: NumericMode | str = "f64") -> np.ndarray:
    """Fast-time DFT of each antenna column (``K x Q``) of one packet."""
    mode = parse_mode(mode)
    return dft(np.asarray(packet, mode.float_dtype), axis=0)


def range_azimuth_image(
    packet: np.ndarray,
    waveform: TxWaveform,
    n: int,
    steering: np.ndarray,
    params: RadarParams,
    mode: NumericMode | str = "f64",
    azimuth_bins: Sequence[int] | None = None,
    counter: OpCounter | None = None,
    spectrum: np.ndarray | None = None,
) -> RangeAzimuthImage:
    """Gamma_n for packet ``n``: columns for every azimuth, or only ``azimuth_bins``.

    ``spectrum`` lets callers pass a precomputed :func:`packet_spectrum`.
    """
    mode = parse_mode(mode)
    if not (0 <= n < params.N):
        raise ValidationError(f"packet index {n} out of range")
    bins = np.arange(steering.shape[0]) if azimuth_bins is None else np.asarray(azimuth_bins, int)
    S = packet_spectrum(packet, mode) if spectrum is None else spectrum
    g_conj = np.conj(waveform.G_spec[n])
    mf = beamform_mf_efficient(
        S, steering[bins], g_conj, mode, counter,
        fx_scale=2.0 ** params.fx_scale_log2, g_scale=golay_spec_scale(params),
    )
    gamma = idft(np.asarray(mf, mode.float_dtype), axis=0)
    return RangeAzimuthImage(gamma=gamma, mode=mode, azimuth_bins=bins)


def range_azimuth_image_direct(
    packet: np.ndarray, waveform: TxWaveform, n: int, steering: np.ndarray,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Double-precision oracle image built column by column from :func:`beamform_mf_direct`."""
    S = dft(np.asarray(packet, np.complex128), axis=0)
    cols = [beamform_mf_direct(S, w, waveform.G_spec[n], counter) for w in steering]
    return idft(np.stack(cols, axis=1), axis=0)


def mf_peak_constant(params: RadarParams) -> float:
    """Image peak for a unit, zero-Doppler target on an azimuth grid point."""
    return float(params.Q * params.golay_len)


def dump_image_csv(image: RangeAzimuthImage, path) -> None:
    """Magnitude as CSV: K rows, one column per azimuth bin, header of bin indices."""
    header = ",".join(f"az{int(b)}" for b in image.azimuth_bins)
    np.savetxt(path, image.magnitude, delimiter=",", header=header, comments="", fmt="%.9g")
