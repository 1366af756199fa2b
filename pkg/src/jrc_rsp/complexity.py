"""Operation counts for the matched-filter stage and a serial-parallel time model.

Counts are per packet.  CM = complex multiply, CA inputs = adder operands
(a ``(Q-1)``-input adder counts ``Q-1``), memory = intermediate complex words
held by one MF unit.

Three mappings of the beamformed matched filter are counted:

* ``efficient``: accumulate across antennas, then one multiply by ``g*`` per bin.
* ``direct``: the literal oracle, beamform then the full ``K x K`` outer
  product with ``g*`` whose diagonal is kept.
* ``direct_matrix``: beamform weights folded into ``g*`` first, then the
  ``(K x Q)(Q x K)`` product (``K^2 Q`` CMs, ``K^2`` adders of ``Q-1`` inputs),
  with ``K x Q`` products buffered before accumulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .fxp import NumericMode, parse_mode
from .params import RadarParams


@dataclass(frozen=True)
class OpCount:
    cm: int = 0
    ca_inputs: int = 0
    mem_words: int = 0

    def __post_init__(self):
        if min(self.cm, self.ca_inputs, self.mem_words) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "OpCount") -> "OpCount":
        return OpCount(self.cm + other.cm, self.ca_inputs + other.ca_inputs,
                       max(self.mem_words, other.mem_words))

    def scaled(self, factor: int) -> "OpCount":
        return OpCount(self.cm * factor, self.ca_inputs * factor, self.mem_words)


def beamform_count(params: RadarParams) -> OpCount:
    K, Q = params.K, params.Q
    return OpCount(cm=K * Q, ca_inputs=K * (Q - 1))


def post_beamform_efficient(params: RadarParams) -> OpCount:
    return OpCount(cm=params.K, mem_words=params.K)


def post_beamform_direct(params: RadarParams) -> OpCount:
    return OpCount(cm=params.K ** 2, mem_words=params.K ** 2)


def count_efficient(params: RadarParams) -> OpCount:
    return (beamform_count(params) + post_beamform_efficient(params)).scaled(params.I)


def count_direct(params: RadarParams) -> OpCount:
    return (beamform_count(params) + post_beamform_direct(params)).scaled(params.I)


def count_direct_matrix(params: RadarParams) -> OpCount:
    K, Q = params.K, params.Q
    per_az = OpCount(cm=Q * K + K * K * Q, ca_inputs=K * K * (Q - 1), mem_words=K * Q)
    return per_az.scaled(params.I)


def efficient_matrix_stage(params: RadarParams) -> OpCount:
    """Stage-for-stage counterpart of ``direct_matrix`` (``KQ`` CMs, ``K`` adders)."""
    K, Q = params.K, params.Q
    return OpCount(cm=Q * K + K * Q, ca_inputs=K * (Q - 1), mem_words=K).scaled(params.I)


@dataclass(frozen=True)
class ArchConfig:
    mf_units: int = 1
    delta_phi_deg: float = 1.0
    N: int = 100
    D: int = 201
    numeric_mode: NumericMode | str = "f32"

    def __post_init__(self):
        if self.mf_units < 1:
            raise ValueError("mf_units must be >= 1")
        object.__setattr__(self, "numeric_mode", parse_mode(self.numeric_mode))

    def apply(self, params: RadarParams) -> RadarParams:
        return params.with_(delta_phi_deg=self.delta_phi_deg, N=self.N, D=self.D)


@dataclass(frozen=True)
class StageTimes:
    fft: float
    mf: float
    ifft: float
    music_evd: float
    music_spectrum: float

    @property
    def total(self) -> float:
        return self.fft + self.mf + self.ifft + self.music_evd + self.music_spectrum


def stage_times(config: ArchConfig, params: RadarParams, targets: int = 1) -> StageTimes:
    """Modeled time in units of one complex multiply-accumulate.

    MF units split the azimuth columns; each unit runs ``ceil(I / mf_units)``
    columns serially.  FFT/IFFT are costed at ``K log2 K`` per transform.
    """
    p = config.apply(params)
    K, Q, N, D = p.K, p.Q, p.N, p.D
    I = p.I  # noqa: E741
    per_unit = math.ceil(I / config.mf_units)
    eff = beamform_count(p) + post_beamform_efficient(p)
    flog = K * math.log2(K)
    return StageTimes(
        fft=N * Q * flog,
        mf=N * per_unit * eff.cm,
        ifft=N * per_unit * flog,
        music_evd=targets * N ** 3,
        music_spectrum=targets * N * D * (N - 1),
    )


def estimate_relative_time(config_a: ArchConfig, config_b: ArchConfig, params: RadarParams,
                           stage: str = "mf") -> float:
    """``time_a / time_b`` for one stage (``mf``, ``fft``, ``ifft``, ``music_evd``,
    ``music_spectrum``) or ``total``."""
    ta, tb = stage_times(config_a, params), stage_times(config_b, params)
    return getattr(ta, stage) / getattr(tb, stage)


def complexity_table(params: RadarParams) -> list[dict]:
    """Rows for the ``complexity`` CLI output."""
    eff, dirc, mat = count_efficient(params), count_direct(params), count_direct_matrix(params)
    eff_mat = efficient_matrix_stage(params)
    pb_e, pb_d = post_beamform_efficient(params), post_beamform_direct(params)
    rows = [
        dict(path="efficient", cm=eff.cm, ca_inputs=eff.ca_inputs, mem_words=eff.mem_words),
        dict(path="direct_outer", cm=dirc.cm, ca_inputs=dirc.ca_inputs, mem_words=dirc.mem_words),
        dict(path="direct_matrix", cm=mat.cm, ca_inputs=mat.ca_inputs, mem_words=mat.mem_words),
        dict(path="ratio_post_beamform_cm(direct/efficient)", cm=pb_d.cm // pb_e.cm, ca_inputs="", mem_words=""),
        dict(path="ratio_matrix_stage(direct_matrix/efficient)",
             cm=(mat.cm - beamform_count(params).cm * params.I) // (eff_mat.cm - beamform_count(params).cm * params.I),
             ca_inputs=mat.ca_inputs // eff_mat.ca_inputs if eff_mat.ca_inputs else "",
             mem_words=mat.mem_words // eff_mat.mem_words),
    ]
    return rows
