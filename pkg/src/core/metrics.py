#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
星座品质指标
频谱效率、能量、渐近功率效率与灵敏度代价、联合界、平均 kissing 数，
以及多维格的编码/整形增益参考表
"""
import math
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.spatial.distance import pdist
from scipy.special import erfc

from ..lattice.cpa import closest_point
from ..lattice.lattice_core import FIXED_DIMENSIONS, LatticeFamily, LatticeSpec, make_lattice, minimal_vectors
from .rng import block_generator, derive_seed
from .shaping import build_constellation, sample_shift_uniform
from .vc_codec import (
    MAX_ENUMERATION,
    VoronoiConstellation,
    check_scale,
    constellation_points,
    encode_digits_batch,
    enumerate_constellation,
    make_constellation,
)

logger = logging.getLogger(__name__)

# 完整成对距离联合界的星座上限
MAX_UNION_BOUND = 4096
DEFAULT_KISSING_SAMPLES = 2000

# 编码增益 γ_c 与整形增益 γ_s (dB)
_GAIN_DB = {
    'Z': (0.0, 0.0),
    'A2': (0.62, 0.17),
    'D4': (1.51, 0.37),
    'E8': (3.01, 0.65),
    'LEECH24': (6.02, 1.03),
}

_CARDINALITY_FAMILIES = (LatticeFamily.A2, LatticeFamily.D4, LatticeFamily.E8, LatticeFamily.LEECH24)
_CARDINALITY_SE = (2, 4, 6, 8)


class MeritReport(BaseModel):
    """能量与距离均为信道坐标 (每维度对 E_s = 1)，lattice_energy 为格坐标下的 E_s"""
    family: str
    N: int
    r: int
    M: int
    SE: float
    m: int
    E_s: float
    E_b: float
    lattice_energy: float
    d_min: float
    gamma: float
    gamma_db: float
    sensitivity_penalty_db: float
    tau_bar: Optional[float] = None
    tau_bar_stderr: Optional[float] = None
    energy_exact: bool = True

    def to_row(self) -> Dict[str, object]:
        return self.model_dump()


class GainEntry(BaseModel):
    family: str
    gamma_c_db: float
    gamma_s_db: float


class GainTable(BaseModel):
    entries: List[GainEntry]

    def get(self, family: str) -> GainEntry:
        for entry in self.entries:
            if entry.family == family:
                return entry
        raise KeyError(family)


def db(value: float) -> float:
    return 10.0 * math.log10(value)


def spectral_efficiency(r: int) -> float:
    """SE = log2 M / (N/2) = 2 log2 r"""
    return 2.0 * math.log2(check_scale(r))


def gain_table() -> GainTable:
    return GainTable(entries=[GainEntry(family=k, gamma_c_db=v[0], gamma_s_db=v[1]) for k, v in _GAIN_DB.items()])


def cardinality_table() -> Dict[str, Dict[int, int]]:
    """各格在 SE = 2, 4, 6, 8 下的星座大小 M = r^N (精确整数)"""
    table = {}
    for family in _CARDINALITY_FAMILIES:
        spec = make_lattice(family, FIXED_DIMENSIONS[family])
        table[spec.name] = {se: (2 ** (se // 2)) ** spec.dimension for se in _CARDINALITY_SE}
    return table


def qam_gamma(r: int) -> float:
    """r²-QAM 的渐近功率效率 3·log2(r)/(r²-1)"""
    return 3.0 * math.log2(r) / (r * r - 1)


def qam_ber_theory(order: int, eb_n0_db: float) -> float:
    """格雷方形 QAM 的最近邻近似 BER，4-QAM 时精确等于 ½erfc(√(Eb/N0))"""
    k = math.log2(order)
    side = math.isqrt(order)
    if side * side != order or k != int(k):
        raise ValueError(f"QAM 阶数必须是 4 的幂: {order}")
    ebn0 = 10.0 ** (eb_n0_db / 10.0)
    arg = math.sqrt(3.0 * k * ebn0 / (2.0 * (order - 1)))
    return float((4.0 / k) * (1.0 - 1.0 / side) * 0.5 * erfc(arg))


def qpsk_ber_theory(eb_n0_db: float) -> float:
    return float(0.5 * erfc(math.sqrt(10.0 ** (eb_n0_db / 10.0))))


def n0_from_ebn0(eb_n0_db: float, m: int, n: int) -> float:
    """每维度对 E_s = 1 时的 N0"""
    eb = (n / 2.0) / m
    return eb / (10.0 ** (eb_n0_db / 10.0))


def snr_from_ebn0(eb_n0_db: float, m: int, n: int) -> float:
    """SNR = E_s / (N·N0/2)，返回 dB"""
    return eb_n0_db + db(2.0 * m / n)


def _membership(spec: LatticeSpec, q: np.ndarray) -> np.ndarray:
    """q = p/r 是否落在 V(0) (内切球内必在、外接球外必不在，其余调用最近点)"""
    norm2 = np.sum(q ** 2, axis=1)
    inside = norm2 < float(spec.dmin2_internal) / 4.0 * (1.0 - 1e-9)
    outside = norm2 > float(spec.covering_radius2) * (1.0 + 1e-9)
    member = inside.copy()
    ambiguous = ~(inside | outside)
    if np.any(ambiguous):
        member[ambiguous] = np.all(closest_point(spec, q[ambiguous]) == 0, axis=1)
    return member


def _neighbour_counts(vc: VoronoiConstellation, c: np.ndarray) -> np.ndarray:
    """每个星座点 (内部坐标) 在星座内的最小距离邻居数"""
    vectors = minimal_vectors(vc.lattice)
    counts = np.empty(c.shape[0], dtype=np.int64)
    chunk = max(1, (1 << 18) // vectors.shape[0])
    for start in range(0, c.shape[0], chunk):
        block = c[start:start + chunk]
        q = (block[:, None, :] + vectors[None, :, :]).reshape(-1, block.shape[1]) / vc.r
        member = _membership(vc.lattice, q).reshape(block.shape[0], -1)
        counts[start:start + chunk] = member.sum(axis=1)
    return counts


def average_kissing(vc: VoronoiConstellation, n_samples: int = DEFAULT_KISSING_SAMPLES,
                    seed: int = 0) -> Tuple[float, float, bool]:
    """
    平均最小距离邻居数 τ̄

    Returns:
        (τ̄, 标准误差, 是否精确)。M <= 2^16 时遍历全部星座点，否则均匀抽样。
    """
    if vc.M <= MAX_ENUMERATION:
        counts = _neighbour_counts(vc, enumerate_constellation(vc.lattice, vc.r, vc.a))
        return float(counts.mean()), 0.0, True
    rng = block_generator(seed, 3)
    digits = rng.integers(0, vc.r, size=(n_samples, vc.dimension))
    c = encode_digits_batch(vc.lattice, vc.r, vc.a, digits)
    counts = _neighbour_counts(vc, c)
    return float(counts.mean()), float(counts.std(ddof=1) / math.sqrt(n_samples)), False


def merit_report(vc: VoronoiConstellation, kissing_samples: int = DEFAULT_KISSING_SAMPLES,
                 seed: int = 0) -> MeritReport:
    """
    计算星座品质指标

    kissing_samples = 0 且星座不可枚举时跳过 τ̄。
    """
    n, m = vc.dimension, vc.bits_per_symbol
    e_s = n / 2.0
    e_b = e_s / m
    d_min = vc.norm_factor * math.sqrt(vc.lattice.dmin2_physical)
    gamma = d_min ** 2 / (4.0 * e_b)

    tau, tau_se = None, None
    if vc.M <= MAX_ENUMERATION or kissing_samples > 0:
        tau, tau_se, _ = average_kissing(vc, kissing_samples, seed)

    return MeritReport(
        family=vc.lattice.name,
        N=n,
        r=vc.r,
        M=vc.M,
        SE=vc.spectral_efficiency,
        m=m,
        E_s=e_s,
        E_b=e_b,
        lattice_energy=vc.energy,
        d_min=d_min,
        gamma=gamma,
        gamma_db=db(gamma),
        sensitivity_penalty_db=-db(gamma),
        tau_bar=tau,
        tau_bar_stderr=tau_se,
        energy_exact=vc.energy_exact,
    )


def union_bound_ser(vc: VoronoiConstellation, n0: float) -> float:
    """全部成对错误概率之和: (1/M) Σ_i Σ_{j≠i} ½erfc(d_ij / (2√N0))"""
    if vc.M > MAX_UNION_BOUND:
        raise ValueError(f"M = {vc.M} 超过成对联合界上限 {MAX_UNION_BOUND}")
    distances = pdist(constellation_points(vc))
    return float(2.0 * np.sum(0.5 * erfc(distances / (2.0 * math.sqrt(n0)))) / vc.M)


def ser_bounds(vc: VoronoiConstellation, n0: float, tau_bar: Optional[float] = None) -> Tuple[float, float]:
    """下界 ½erfc(d_min/(2√N0)) 与近似上界 τ̄·下界"""
    if tau_bar is None:
        tau_bar, _, _ = average_kissing(vc)
    d_min = vc.norm_factor * math.sqrt(vc.lattice.dmin2_physical)
    lower = float(0.5 * erfc(d_min / (2.0 * math.sqrt(n0))))
    return lower, tau_bar * lower


def kissing_shift_distribution(spec: LatticeSpec, r: int, n_shifts: int, seed: int = 0) -> List[float]:
    """随机平移下 τ̄ 的分布 (只针对可枚举的星座)"""
    if check_scale(r) ** spec.dimension > MAX_ENUMERATION:
        raise ValueError("τ̄ 平移分布只对可枚举星座计算")
    values = []
    for i in range(n_shifts):
        vc = make_constellation(spec, r, sample_shift_uniform(spec, derive_seed(seed, i)), shift_source='random')
        values.append(average_kissing(vc)[0])
    return values


def merit_sweep(cells: Sequence[Tuple[LatticeSpec, int]], shift: str = 'auto', seed: int = 0,
                kissing_samples: int = DEFAULT_KISSING_SAMPLES) -> List[MeritReport]:
    """按 (格, r) 单元逐一生成品质报告 (SE 对灵敏度代价)"""
    reports = []
    for cell, (spec, r) in enumerate(cells):
        vc = build_constellation(spec, r, shift, shift_seed=derive_seed(seed, cell))
        reports.append(merit_report(vc, kissing_samples, seed))
    return reports
