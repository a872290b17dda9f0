#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
调制解调器
VcModem (Voronoi 星座，alg2 译码或 ML 检测) 与 QamModem (格雷方形 QAM，逐路门限判决)
共用 modulate(bits) -> 信道符号、detect(y) -> bits 接口，AWGN 与光纤实验都用它们
"""
import math
import logging
from enum import Enum
from typing import Union

import numpy as np

from .vc_codec import (
    Labeling,
    MAX_TABLE,
    VoronoiConstellation,
    all_digits,
    bits_to_digits_batch,
    constellation_points,
    decode_batch,
    digits_to_bits_batch,
    encode_batch,
    gray_decode,
    gray_encode,
    parse_labeling,
)

logger = logging.getLogger(__name__)

# ML 距离矩阵每块的元素上限
_ML_BLOCK_ELEMENTS = 1 << 24


class Detector(str, Enum):
    ALG2 = 'alg2'
    ML = 'ml'


def parse_detector(value: Union[str, Detector]) -> Detector:
    if isinstance(value, Detector):
        return value
    try:
        return Detector(str(value).strip().lower())
    except ValueError:
        raise ValueError(f"未知的检测器: {value}，可选 alg2 / ml")


def vc_ml_detect(vc: VoronoiConstellation, y: np.ndarray) -> np.ndarray:
    """
    查表最大似然检测: 欧氏距离最小的星座点索引，并列时取最小索引

    Raises:
        ValueError: M 超过 2^20
    """
    if vc.M > MAX_TABLE:
        raise ValueError(f"ML 检测要求 M <= {MAX_TABLE}，实际 M = {vc.M}")
    table = constellation_points(vc)
    norms = np.sum(table ** 2, axis=1)
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    y = y.reshape(1, -1) if single else y
    out = np.empty(y.shape[0], dtype=np.int64)
    block = max(1, _ML_BLOCK_ELEMENTS // vc.M)
    for start in range(0, y.shape[0], block):
        chunk = y[start:start + block]
        # ‖y‖² 对 argmin 无影响
        dist = norms[None, :] - 2.0 * chunk @ table.T
        out[start:start + block] = np.argmin(dist, axis=1)
    return out[0] if single else out


def _qam_side(order: int) -> int:
    side = math.isqrt(int(order))
    if side < 2 or side * side != order or (side & (side - 1)) != 0:
        raise ValueError(f"只支持方形 QAM (阶数为 4 的幂)，实际为 {order}")
    return side


def qam_scale(order: int) -> float:
    """单位间距电平 ±1, ±3, … 归一到每维度对 E_s = 1 的比例"""
    side = _qam_side(order)
    return 1.0 / math.sqrt(2.0 * (side * side - 1) / 3.0)


def qam_modulate(bits: np.ndarray, order: int) -> np.ndarray:
    """(B, log2 order) 比特 -> (B, 2) 的 I/Q，前一半比特为 I 路"""
    side = _qam_side(order)
    b = int(math.log2(side))
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 2 or bits.shape[1] != 2 * b:
        raise ValueError(f"比特数组形状 {bits.shape} 与 (B, {2 * b}) 不一致")
    weights = 1 << np.arange(b - 1, -1, -1)
    levels = gray_decode(bits.reshape(-1, 2, b) @ weights)
    return (2.0 * levels - (side - 1)) * qam_scale(order)


def qam_ml_detect(y: np.ndarray, order: int) -> np.ndarray:
    """逐路门限判决 (AWGN 下即 ML)，返回 (B, log2 order) 比特"""
    side = _qam_side(order)
    b = int(math.log2(side))
    amplitude = np.asarray(y, dtype=np.float64).reshape(-1, 2) / qam_scale(order)
    levels = np.clip(np.floor((amplitude + (side - 1)) / 2.0 + 0.5), 0, side - 1).astype(np.int64)
    values = gray_encode(levels)
    bits = (values[..., None] >> np.arange(b - 1, -1, -1)) & 1
    return bits.reshape(-1, 2 * b).astype(np.uint8)


class VcModem:
    """Voronoi 星座调制解调器"""

    def __init__(self, vc: VoronoiConstellation, labeling: Union[str, Labeling] = Labeling.QUASI_GRAY,
                 detector: Union[str, Detector] = Detector.ALG2):
        self.vc = vc
        self.labeling = parse_labeling(labeling)
        self.detector = parse_detector(detector)
        if self.detector == Detector.ML and vc.M > MAX_TABLE:
            raise ValueError(f"ML 检测要求 M <= {MAX_TABLE}，{vc.name} 的 M = {vc.M}")

    @property
    def dimension(self) -> int:
        return self.vc.dimension

    @property
    def bits_per_symbol(self) -> int:
        return self.vc.bits_per_symbol

    @property
    def family(self) -> str:
        return self.vc.lattice.name

    @property
    def r(self) -> int:
        return self.vc.r

    @property
    def spectral_efficiency(self) -> float:
        return self.vc.spectral_efficiency

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        digits = bits_to_digits_batch(bits, self.labeling, self.vc.r, self.vc.dimension)
        return encode_batch(self.vc, digits)

    def detect(self, y: np.ndarray) -> np.ndarray:
        if self.detector == Detector.ML:
            digits = all_digits(self.vc.r, self.vc.dimension)[vc_ml_detect(self.vc, y)]
        else:
            digits = decode_batch(self.vc, y)
        return digits_to_bits_batch(digits, self.labeling, self.vc.r)

    def __repr__(self) -> str:
        return f"VcModem({self.vc.name}, {self.labeling.value}, {self.detector.value})"


class QamModem:
    """
    格雷方形 QAM，n_pairs 个 I/Q 对组成一个 2·n_pairs 维符号
    (光纤实验中 4-QAM 双偏振 x 6 通道即 n_pairs = 12)
    """

    labeling = 'gray'
    detector = Detector.ML

    def __init__(self, order: int, n_pairs: int = 1):
        self.side = _qam_side(order)
        self.order = int(order)
        self.n_pairs = int(n_pairs)
        if self.n_pairs < 1:
            raise ValueError(f"n_pairs 必须为正整数: {n_pairs}")
        self.bits_per_pair = int(math.log2(self.order))

    @property
    def dimension(self) -> int:
        return 2 * self.n_pairs

    @property
    def bits_per_symbol(self) -> int:
        return self.n_pairs * self.bits_per_pair

    @property
    def family(self) -> str:
        return f"QAM{self.order}"

    @property
    def r(self) -> int:
        return self.side

    @property
    def spectral_efficiency(self) -> float:
        return float(self.bits_per_pair)

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        if bits.ndim != 2 or bits.shape[1] != self.bits_per_symbol:
            raise ValueError(f"比特数组形状 {bits.shape} 与 (B, {self.bits_per_symbol}) 不一致")
        pairs = qam_modulate(bits.reshape(-1, self.bits_per_pair), self.order)
        return pairs.reshape(bits.shape[0], self.dimension)

    def detect(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        bits = qam_ml_detect(y.reshape(-1, 2), self.order)
        return bits.reshape(y.shape[0], self.bits_per_symbol)

    def __repr__(self) -> str:
        return f"QamModem({self.order}, n_pairs={self.n_pairs})"
