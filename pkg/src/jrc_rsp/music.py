"""Slow-time MUSIC Doppler estimation with a QR-iteration eigendecomposition."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import fxp
from .fxp import NumericMode, parse_mode
from .params import RadarParams, ValidationError, derive

log = logging.getLogger(__name__)

DENOM_FLOOR = 1e-300


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EvdResult:
    eigvals: np.ndarray  # descending
    eigvecs: np.ndarray  # columns match eigvals
    iterations: int
    residual: float
    converged: bool

    @property
    def signal(self) -> np.ndarray:
        return self.eigvecs[:, :1]

    @property
    def noise(self) -> np.ndarray:
        return self.eigvecs[:, 1:]


@dataclass(frozen=True)
class MusicSpectrum:
    mu: np.ndarray
    doppler_hz: np.ndarray
    velocity_mps: np.ndarray

    @property
    def mu_db(self) -> np.ndarray:
        return 10 * np.log10(self.mu / self.mu.max())


def extract_slow_time(images: Sequence[np.ndarray], range_bin: int, azimuth_bin: int) -> np.ndarray:
    """``y[n] = images[n][range_bin, azimuth_bin]``."""
    shape = np.shape(images[0])
    if any(np.shape(im) != shape for im in images):
        raise ValidationError("images differ in shape")
    if not (0 <= range_bin < shape[0] and 0 <= azimuth_bin < shape[1]):
        raise ValidationError("cell out of range")
    return np.array([im[range_bin, azimuth_bin] for im in images], dtype=np.complex128)


def autocov(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, np.complex128)
    if y.ndim != 1 or len(y) < 2:
        raise ValidationError("autocovariance needs a vector of length >= 2")
    return np.outer(y, np.conj(y))


def qr_decompose(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder QR, ``A = Q R`` with ``R`` having a real non-negative diagonal."""
    R = np.array(A, dtype=np.complex128)
    n, m = R.shape
    if n != m:
        raise ValidationError("qr_decompose expects a square matrix")
    Q = np.eye(n, dtype=np.complex128)
    for j in range(n - 1):
        x = R[j:, j]
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * norm
        v /= np.linalg.norm(v)
        # H = I - 2 v v^H applied from the left to R and from the right to Q
        R[j:, j:] -= 2.0 * np.outer(v, np.conj(v) @ R[j:, j:])
        Q[:, j:] -= 2.0 * np.outer(Q[:, j:] @ v, np.conj(v))
        R[j + 1:, j] = 0.0
    d = np.diag(R)
    ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    R = np.conj(ph)[:, None] * R
    Q = Q * ph[None, :]
    R[np.diag_indices(n)] = np.abs(np.diag(R))
    return Q, R


def _offdiag_norm(A: np.ndarray) -> float:
    return float(np.sqrt(max(np.linalg.norm(A) ** 2 - np.linalg.norm(np.diag(A)) ** 2, 0.0)))


def evd_qr_iteration(Y: np.ndarray, tol: float = 1e-10, max_iter: int = 500,
                     psd: bool = True, signal_dim: int | None = None) -> EvdResult:
    """Unshifted QR iteration ``A <- R Q``, ``V <- V Q`` on a Hermitian matrix.

    Stops once the off-diagonal Frobenius norm is at most ``tol * ||Y||_F``.
    With ``signal_dim`` only the coupling between the leading ``signal_dim``
    rows and the rest must vanish: the leading eigenvectors have then split off
    and the remaining columns span their orthogonal complement, even when a
    cluster of near-equal small eigenvalues has not separated internally.
    Non-convergence is logged and flagged rather than raised.
    """
    A = np.array(Y, dtype=np.complex128)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.conj().T, atol=1e-12 * max(np.abs(A).max(), 1e-300)):
        raise ValidationError("evd_qr_iteration expects a Hermitian matrix")
    scale = np.linalg.norm(A)
    V = np.eye(n, dtype=np.complex128)
    it = 0
    if signal_dim is not None and not 1 <= signal_dim < n:
        raise ValidationError("signal_dim must be between 1 and n - 1")

    def residual(A):
        if signal_dim is None:
            return _offdiag_norm(A)
        return float(np.sqrt(2.0) * np.linalg.norm(A[signal_dim:, :signal_dim]))

    resid = residual(A)
    while resid > tol * scale and it < max_iter:
        Qk, Rk = qr_decompose(A)
        A = Rk @ Qk
        V = V @ Qk
        it += 1
        resid = residual(A)
    converged = resid <= tol * scale
    if not converged:
        log.warning("QR iteration did not converge: residual %.3g after %d iterations", resid, it)
    vals = np.real(np.diag(A))
    if psd:
        vals = np.maximum(vals, 0.0)
    order = np.argsort(-vals, kind="stable")
    return EvdResult(vals[order], V[:, order], it, resid, converged)


def doppler_steering(params: RadarParams) -> np.ndarray:
    """``U[n, j] = exp(-j 2 pi f_D[j] n T_PRI)``, shape ``N x D``."""
    fd = derive(params).doppler_hz
    n = np.arange(params.N)
    return np.exp(-2j * np.pi * np.outer(n, fd) * params.t_pri)


def music_spectrum(E: np.ndarray, steering: np.ndarray, params: RadarParams | None = None,
                   mode: NumericMode | str = "f64") -> MusicSpectrum:
    """``mu[j] = 1 / ||E^H u_j||^2`` with the denominator floored at 1e-300."""
    mode = parse_mode(mode)
    if E.shape[0] != steering.shape[0]:
        raise ValidationError("noise subspace and steering disagree on N")
    if mode.is_fixed:
        fmt = mode.fx
        proj = fxp.cmac_array(
            fxp.quantize_complex_array(np.conj(E.T)[:, :, None], fmt),
            fxp.quantize_complex_array(steering[None, :, :], fmt),
            axis=1,
        )
        # |.|^2 accumulated over the N-1 eigenvectors, one requantize
        denom_raw = fxp._requantize_sum(
            [(1, proj.re, proj.re), (1, proj.im, proj.im)], 0, fmt.F, fmt)
        denom = denom_raw * fmt.step
    else:
        proj = np.conj(E.T) @ steering
        denom = np.sum(np.abs(proj) ** 2, axis=0)
    mu = 1.0 / np.maximum(denom, DENOM_FLOOR)
    if params is not None:
        der = derive(params)
        fd, v = der.doppler_hz, der.velocity_mps
    else:
        fd = v = np.arange(steering.shape[1], dtype=float)
    return MusicSpectrum(mu=mu, doppler_hz=fd, velocity_mps=v)


def estimate_doppler(spectrum: MusicSpectrum, params: RadarParams) -> tuple[float, float]:
    """Grid peak of the raw spectrum (first index on ties) as ``(f_D, v)``."""
    j = int(np.argmax(spectrum.mu))
    fd = float(spectrum.doppler_hz[j])
    return fd, fd * params.wavelength / 2.0


def music_doppler(y: np.ndarray, params: RadarParams, steering: np.ndarray | None = None,
                  mode: NumericMode | str = "f64") -> tuple[float, float, MusicSpectrum, EvdResult]:
    """Full Doppler chain for one slow-time vector.

    In fixed-point modes ``y`` is normalized by a power of two to its peak
    magnitude, quantized, and the covariance products, the eigenvectors and the
    spectrum accumulations are requantized to the format.  The QR iteration
    itself runs in double precision on the quantized covariance.
    """
    mode = parse_mode(mode)
    if len(y) < 2:
        raise ValidationError("MUSIC needs at least two packets")
    U = doppler_steering(params) if steering is None else steering
    if mode.is_fixed:
        fmt = mode.fx
        peak = float(np.max(np.abs(y)))
        shift = 2.0 ** -np.ceil(np.log2(peak)) if peak > 0 else 1.0
        yq = fxp.quantize_complex_array(np.asarray(y) * shift, fmt)
        Yq = fxp.cmul_array(
            fxp.FxArray(yq.re[:, None], yq.im[:, None], fmt),
            fxp.FxArray(yq.re[None, :], -yq.im[None, :], fmt),
        )
        Y = Yq.value()
        Y = 0.5 * (Y + Y.conj().T)
        evd = evd_qr_iteration(Y, signal_dim=1)
        E = fxp.quantize_complex_array(evd.noise, fmt).value()
    else:
        evd = evd_qr_iteration(autocov(y), signal_dim=1)
        E = evd.noise
    spec = music_spectrum(E, U, params, mode)
    fd, v = estimate_doppler(spec, params)
    if not evd.converged:
        fd = v = float("nan")
    return fd, v, spec, evd


def dump_spectrum_csv(spectrum: MusicSpectrum, path) -> None:
    data = np.column_stack([spectrum.doppler_hz, spectrum.velocity_mps, spectrum.mu, spectrum.mu_db])
    np.savetxt(path, data, delimiter=",", header="f_D_hz,velocity_mps,mu,mu_db", comments="", fmt="%.12g")
