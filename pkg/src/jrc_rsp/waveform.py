"""Golay complementary pairs, packet ordering and the transmit matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import RadarParams, ValidationError


@dataclass(frozen=True)
class GolayPair:
    a: np.ndarray
    b: np.ndarray

    def __len__(self) -> int:
        return len(self.a)


def golay_pair(length: int) -> GolayPair:
    """Complementary pair by recursive doubling ``a' = [a|b], b' = [a|-b]``."""
    if length < 1 or length & (length - 1):
        raise ValidationError(f"Golay length must be a power of two, got {length}")
    a = np.ones(1, dtype=np.int64)
    b = np.ones(1, dtype=np.int64)
    while len(a) < length:
        a, b = np.concatenate([a, b]), np.concatenate([a, -b])
    return GolayPair(a, b)


def aperiodic_autocorr(x: np.ndarray) -> np.ndarray:
    """Aperiodic autocorrelation at lags ``0..len(x)-1`` (integer exact for int input)."""
    x = np.asarray(x)
    n = len(x)
    return np.array([np.dot(x[: n - t], x[t:]) for t in range(n)])


def ptm_order(n_packets: int) -> np.ndarray:
    """Prouhet-Thue-Morse bits: popcount parity of each packet index."""
    if n_packets < 1:
        raise ValidationError("packet count must be >= 1")
    idx = np.arange(n_packets, dtype=np.uint64)
    bits = np.zeros(n_packets, dtype=np.uint8)
    while idx.any():
        bits ^= (idx & np.uint64(1)).astype(np.uint8)
        idx >>= np.uint64(1)
    return bits


@dataclass(frozen=True)
class TxWaveform:
    G: np.ndarray       # N x K real, row n = zero-padded g_n
    G_spec: np.ndarray  # N x K complex, forward DFT of each row
    order: np.ndarray   # ptm bits, 0 -> a, 1 -> b


def build_waveform(params: RadarParams, pair: GolayPair | None = None) -> TxWaveform:
    from .rsp_ra import dft

    if pair is None:
        pair = golay_pair(params.golay_len)
    if len(pair) != params.golay_len:
        raise ValidationError(f"pair length {len(pair)} != golay_len {params.golay_len}")
    order = ptm_order(params.N)
    G = np.zeros((params.N, params.K))
    G[:, : params.golay_len] = np.where(order[:, None] == 0, pair.a, pair.b)
    G.setflags(write=False)
    G_spec = dft(G.astype(complex), axis=1)
    G_spec.setflags(write=False)
    return TxWaveform(G=G, G_spec=G_spec, order=order)
