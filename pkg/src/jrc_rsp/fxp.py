"""<W,L> two's-complement fixed point: scalar values and vectorized kernels.

``L`` counts the sign bit, so ``<24,5>`` is 1 sign + 4 integer + 19 fraction
bits.  Every result is rounded half away from zero and saturated.  Products
and accumulations are carried exactly before the single final requantize.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_FMT_RE = re.compile(r"^fx\s*(?:<\s*(\d+)\s*,\s*(\d+)\s*>|(\d+)_(\d+))$", re.IGNORECASE)


@dataclass(frozen=True)
class FxFormat:
    W: int
    L: int

    def __post_init__(self):
        if not (2 <= self.W <= 63):
            raise ValueError(f"W must be in 2..63, got {self.W}")
        if not (1 <= self.L <= self.W):
            raise ValueError(f"L must be in 1..W, got {self.L}")

    @property
    def F(self) -> int:
        return self.W - self.L

    @property
    def raw_min(self) -> int:
        return -(1 << (self.W - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.W - 1)) - 1

    @property
    def step(self) -> float:
        return 2.0 ** -self.F

    @property
    def min_value(self) -> float:
        return self.raw_min * self.step

    @property
    def max_value(self) -> float:
        return self.raw_max * self.step

    @classmethod
    def parse(cls, text: str) -> "FxFormat":
        m = _FMT_RE.match(text.strip())
        if not m:
            raise ValueError(f"not a fixed-point format: {text!r}")
        w, l = (m.group(1), m.group(2)) if m.group(1) else (m.group(3), m.group(4))
        return cls(int(w), int(l))

    def __str__(self) -> str:
        return f"fx<{self.W},{self.L}>"


# -- exact integer helpers --------------------------------------------------

def round_shift(x: int, s: int) -> int:
    """``x / 2**s`` rounded half away from zero (``s < 0`` shifts left)."""
    if s <= 0:
        return x << -s
    half = 1 << (s - 1)
    return (abs(x) + half) >> s if x >= 0 else -((abs(x) + half) >> s)


def saturate(raw: int, fmt: FxFormat) -> int:
    return min(max(raw, fmt.raw_min), fmt.raw_max)


def _round_half_away(y: float) -> int:
    if abs(y) >= 2.0**52:
        return int(y)
    return int(math.copysign(math.floor(abs(y) + 0.5), y))


# -- scalars ----------------------------------------------------------------

@dataclass(frozen=True, order=False)
class FxValue:
    raw: int
    fmt: FxFormat

    def __post_init__(self):
        if not (self.fmt.raw_min <= self.raw <= self.fmt.raw_max):
            raise ValueError(f"raw {self.raw} outside {self.fmt}")

    @property
    def value(self) -> float:
        return self.raw * self.fmt.step

    def __float__(self) -> float:
        return self.value

    def _cmp(self, other: "FxValue") -> int:
        if self.fmt != other.fmt:
            raise ValueError("format mismatch")
        return (self.raw > other.raw) - (self.raw < other.raw)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0


@dataclass(frozen=True)
class FxComplex:
    re: FxValue
    im: FxValue

    @property
    def fmt(self) -> FxFormat:
        return self.re.fmt

    @property
    def value(self) -> complex:
        return complex(self.re.value, self.im.value)


def quantize(x: float, fmt: FxFormat) -> FxValue:
    if math.isnan(x):
        raise ValueError("cannot quantize NaN")
    if math.isinf(x):
        return FxValue(fmt.raw_max if x > 0 else fmt.raw_min, fmt)
    return FxValue(saturate(_round_half_away(math.ldexp(x, fmt.F)), fmt), fmt)


def quantize_complex(z: complex, fmt: FxFormat) -> FxComplex:
    return FxComplex(quantize(z.real, fmt), quantize(z.imag, fmt))


def _same(*vals) -> FxFormat:
    fmt = vals[0].fmt
    if any(v.fmt != fmt for v in vals):
        raise ValueError("operands must share a format")
    return fmt


def fx_add(a: FxValue, b: FxValue) -> FxValue:
    fmt = _same(a, b)
    return FxValue(saturate(a.raw + b.raw, fmt), fmt)


def fx_sub(a: FxValue, b: FxValue) -> FxValue:
    fmt = _same(a, b)
    return FxValue(saturate(a.raw - b.raw, fmt), fmt)


def fx_mul(a: FxValue, b: FxValue) -> FxValue:
    fmt = _same(a, b)
    return FxValue(saturate(round_shift(a.raw * b.raw, fmt.F), fmt), fmt)


def fx_cadd(a: FxComplex, b: FxComplex) -> FxComplex:
    return FxComplex(fx_add(a.re, b.re), fx_add(a.im, b.im))


def fx_cmul(a: FxComplex, b: FxComplex) -> FxComplex:
    """Four real products, two adds, one requantize per component."""
    fmt = _same(a, b)
    re_ = a.re.raw * b.re.raw - a.im.raw * b.im.raw
    im_ = a.re.raw * b.im.raw + a.im.raw * b.re.raw
    return FxComplex(FxValue(saturate(round_shift(re_, fmt.F), fmt), fmt),
                     FxValue(saturate(round_shift(im_, fmt.F), fmt), fmt))


def fx_mac_vector(acc_fmt: FxFormat, pairs: Iterable[tuple]) -> FxValue | FxComplex:
    """Sum of products over ``pairs`` with a single requantize into ``acc_fmt``.

    Operands are all FxValue or all FxComplex and share one input format.
    An empty vector yields zero.
    """
    pairs = list(pairs)
    if not pairs:
        return FxValue(0, acc_fmt)
    fmt = _same(*(v for p in pairs for v in p))
    shift = 2 * fmt.F - acc_fmt.F
    if isinstance(pairs[0][0], FxComplex):
        re_ = sum(a.re.raw * b.re.raw - a.im.raw * b.im.raw for a, b in pairs)
        im_ = sum(a.re.raw * b.im.raw + a.im.raw * b.re.raw for a, b in pairs)
        return FxComplex(FxValue(saturate(round_shift(re_, shift), acc_fmt), acc_fmt),
                         FxValue(saturate(round_shift(im_, shift), acc_fmt), acc_fmt))
    acc = sum(a.raw * b.raw for a, b in pairs)
    return FxValue(saturate(round_shift(acc, shift), acc_fmt), acc_fmt)


# -- vectorized kernels -------------------------------------------------------

@dataclass(frozen=True)
class FxArray:
    """Complex fixed-point array held as int64 mantissas."""

    re: np.ndarray
    im: np.ndarray
    fmt: FxFormat

    def value(self) -> np.ndarray:
        return (self.re.astype(float) + 1j * self.im.astype(float)) * self.fmt.step

    @property
    def shape(self):
        return self.re.shape


def quantize_array(x: np.ndarray, fmt: FxFormat) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any():
        raise ValueError("cannot quantize NaN")
    y = np.ldexp(x, fmt.F)
    a = np.abs(y)
    r = np.where(a < 2.0**52, np.floor(a + 0.5), a)
    r = np.copysign(np.minimum(r, 2.0 ** (fmt.W - 1)), y)
    return np.clip(r.astype(np.int64), fmt.raw_min, fmt.raw_max)


def quantize_complex_array(z: np.ndarray, fmt: FxFormat) -> FxArray:
    z = np.asarray(z)
    return FxArray(quantize_array(z.real, fmt), quantize_array(z.imag, fmt), fmt)


def _round_shift_array(x: np.ndarray, s: int) -> np.ndarray:
    if s <= 0:
        return x << -s
    half = np.int64(1) << np.int64(s - 1)
    mag = (np.abs(x) + half) >> np.int64(s)
    return np.where(x >= 0, mag, -mag)


_SAFE = 2.0**62


_EXACT = 2.0**53


def _float_exact(terms, axis) -> bool:
    """True when every partial sum of the products is an integer below 2**53,
    so float64 arithmetic (in any summation order) gives the exact result."""
    bound = 0.0
    for _, a, b in terms:
        n = 1 if axis is None else np.broadcast_shapes(np.shape(a), np.shape(b))[axis]
        amax = float(np.max(np.abs(a))) if np.size(a) else 0.0
        bmax = float(np.max(np.abs(b))) if np.size(b) else 0.0
        bound += amax * bmax * n
    return bound < _EXACT


def _finish(w: np.ndarray, shift: int, fmt: FxFormat) -> np.ndarray:
    """Round an exact int64 sum by ``shift`` bits and saturate to ``fmt``."""
    # clip before rounding so the shift cannot overflow
    lim = (fmt.raw_max + 1) << shift if 0 <= shift and fmt.W + shift < 63 else None
    if lim is not None:
        w = np.clip(w, -lim, lim)
    return np.clip(_round_shift_array(np.asarray(w, np.int64), shift), fmt.raw_min, fmt.raw_max)


def _requantize_sum(terms: Sequence[tuple[int, np.ndarray, np.ndarray]], axis: int | None,
                    shift: int, fmt: FxFormat) -> np.ndarray:
    """Exact ``sum(sign * a * b)`` (reduced over ``axis``), rounded by ``shift`` bits, saturated.

    int64 arithmetic wraps modulo 2**64; the float64 estimate proves the true
    sum is inside int64 so the wrapped value is exact.  Elements it cannot
    certify are either clearly saturated or recomputed with Python ints.
    """
    def red(x):
        return x if axis is None else np.sum(x, axis=axis)

    if _float_exact(terms, axis):
        est = sum(s * red(a.astype(float) * b.astype(float)) for s, a, b in terms)
        return _finish(est.astype(np.int64), shift, fmt)

    with np.errstate(over="ignore"):
        wrapped = sum(s * red(a * b) for s, a, b in terms)
    est = sum(s * red(a.astype(float) * b.astype(float)) for s, a, b in terms)
    mag = sum(red(np.abs(a.astype(float)) * np.abs(b.astype(float))) for s, a, b in terms)
    err = mag * 2.0**-40 + 1.0
    ok = np.abs(est) + err < _SAFE

    out = _finish(np.where(ok, wrapped, 0), shift, fmt)
    if not ok.all():
        bad = np.argwhere(~ok)
        sat = 2.0 ** (fmt.W - 1 + max(shift, 0))
        for idx in map(tuple, bad):
            if abs(est[idx]) - err[idx] > 2 * sat:
                out[idx] = fmt.raw_max if est[idx] > 0 else fmt.raw_min
                continue
            exact = 0
            for s, a, b in terms:
                aa = np.broadcast_to(a, np.broadcast_shapes(a.shape, b.shape))
                bb = np.broadcast_to(b, aa.shape)
                if axis is None:
                    exact += s * int(aa[idx]) * int(bb[idx])
                else:
                    sl = list(idx)
                    sl.insert(axis if axis >= 0 else len(aa.shape) + axis, slice(None))
                    exact += s * sum(int(u) * int(v) for u, v in zip(aa[tuple(sl)], bb[tuple(sl)]))
            out[idx] = saturate(round_shift(exact, shift), fmt)
    return out


def cmul_array(a: FxArray, b: FxArray) -> FxArray:
    """Elementwise complex product, one requantize per component."""
    fmt = a.fmt
    if b.fmt != fmt:
        raise ValueError("operands must share a format")
    re_ = _requantize_sum([(1, a.re, b.re), (-1, a.im, b.im)], None, fmt.F, fmt)
    im_ = _requantize_sum([(1, a.re, b.im), (1, a.im, b.re)], None, fmt.F, fmt)
    return FxArray(re_, im_, fmt)


def cmac_array(a: FxArray, b: FxArray, axis: int = -1, out_fmt: FxFormat | None = None) -> FxArray:
    """Complex multiply-accumulate along ``axis`` with one final requantize."""
    fmt = a.fmt
    if b.fmt != fmt:
        raise ValueError("operands must share a format")
    out_fmt = out_fmt or fmt
    shift = 2 * fmt.F - out_fmt.F
    re_ = _requantize_sum([(1, a.re, b.re), (-1, a.im, b.im)], axis, shift, out_fmt)
    im_ = _requantize_sum([(1, a.re, b.im), (1, a.im, b.re)], axis, shift, out_fmt)
    return FxArray(re_, im_, out_fmt)


def cmatmul_array(a: FxArray, b: FxArray, out_fmt: FxFormat | None = None) -> FxArray:
    """``a @ b.T`` for ``a`` of shape ``(M, Q)`` and ``b`` of shape ``(P, Q)``, one requantize.

    Same result as :func:`cmac_array` on broadcast operands; uses a float64
    matrix product when that is provably exact.
    """
    fmt = a.fmt
    if b.fmt != fmt:
        raise ValueError("operands must share a format")
    out_fmt = out_fmt or fmt
    shift = 2 * fmt.F - out_fmt.F
    A = [a.re[:, None, :], a.im[:, None, :]]
    B = [b.re[None], b.im[None]]
    exact = (_float_exact([(1, A[0], B[0]), (1, A[1], B[1])], -1)
             and _float_exact([(1, A[0], B[1]), (1, A[1], B[0])], -1))
    if not exact:
        return cmac_array(FxArray(a.re[:, None, :], a.im[:, None, :], fmt),
                          FxArray(b.re[None], b.im[None], fmt), axis=-1, out_fmt=out_fmt)
    ar, ai = a.re.astype(float), a.im.astype(float)
    br, bi = b.re.astype(float).T, b.im.astype(float).T
    re_ = ar @ br - ai @ bi
    im_ = ar @ bi + ai @ br
    return FxArray(_finish(re_.astype(np.int64), shift, out_fmt),
                   _finish(im_.astype(np.int64), shift, out_fmt), out_fmt)


def mac_array(a: np.ndarray, b: np.ndarray, fmt: FxFormat, axis: int = -1) -> np.ndarray:
    """Real multiply-accumulate of raw mantissas along ``axis``."""
    return _requantize_sum([(1, a, b)], axis, fmt.F, fmt)


# -- numeric modes ----------------------------------------------------------

@dataclass(frozen=True)
class NumericMode:
    """``f64``, ``f32`` or a fixed-point format."""

    name: str
    fx: FxFormat | None = None

    @property
    def is_fixed(self) -> bool:
        return self.fx is not None

    @property
    def float_dtype(self):
        return np.complex128 if self.name == "f64" else np.complex64

    def __str__(self) -> str:
        return self.name


F64 = NumericMode("f64")
F32 = NumericMode("f32")


def parse_mode(text: str | NumericMode) -> NumericMode:
    if isinstance(text, NumericMode):
        return text
    t = text.strip().lower()
    if t in ("f64", "float64", "double"):
        return F64
    if t in ("f32", "float32", "single"):
        return F32
    fmt = FxFormat.parse(t)
    return NumericMode(f"fx{fmt.W}_{fmt.L}", fmt)
