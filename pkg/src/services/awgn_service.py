#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AWGN 蒙特卡洛误码服务
随机比特 -> 标号 -> 调制 -> 加性高斯噪声 (每维方差 N0/2) -> 检测 -> 统计比特/符号错误。
每个 (种子, 网格点, 块) 对应一条独立随机流，同一次扫描的各条曲线共用噪声，
结果与线程数无关。
"""
import math
import time
import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import beta

from ..core.metrics import n0_from_ebn0
from ..core.modems import Detector, QamModem, VcModem, parse_detector
from ..core.rng import block_generator
from ..core.vc_codec import MAX_TABLE, check_scale, parse_labeling
from ..core.shaping import build_constellation
from ..lattice.lattice_core import FIXED_DIMENSIONS, LatticeFamily, make_lattice

logger = logging.getLogger(__name__)

AWGN_COLUMNS = ['family', 'r', 'SE', 'labeling', 'detector', 'eb_n0_db', 'symbols',
                'bit_errors', 'sym_errors', 'ber', 'ser', 'ci_lo', 'ci_hi']

Modem = Union[VcModem, QamModem]


class AwgnConfig(BaseModel):
    """单条曲线的配置；family = 'qam' 时为格雷方形 QAM 基准"""
    model_config = ConfigDict(extra='forbid')

    family: str
    dimension: int = 0
    r: int = 2
    qam_order: Optional[int] = None
    labeling: str = 'quasi-gray'
    detector: str = 'alg2'
    shift: str = 'auto'
    shift_seed: int = 0
    eb_n0_db: List[float] = Field(min_length=1)
    min_bit_errors: int = Field(default=100, ge=1)
    max_symbols: int = Field(default=10 ** 8, ge=1)
    block_symbols: int = Field(default=10000, ge=1)
    seed: int = Field(ge=0)
    threads: int = Field(default=1, ge=1)

    @model_validator(mode='after')
    def _check_descriptor(self) -> 'AwgnConfig':
        family = self.family.lower()
        if family == 'qam':
            if self.qam_order is None:
                raise ValueError("family = qam 时必须给出 qam_order")
            return self
        lattice_family = LatticeFamily(family)
        if self.dimension == 0:
            self.dimension = FIXED_DIMENSIONS.get(lattice_family, 0)
            if self.dimension == 0:
                raise ValueError("cubic 格必须给出 dimension")
        check_scale(self.r)
        parse_labeling(self.labeling)
        if parse_detector(self.detector) == Detector.ML and self.r ** self.dimension > MAX_TABLE:
            raise ValueError(f"ML 检测要求 M <= {MAX_TABLE}，实际 M = {self.r ** self.dimension}")
        return self


class GridPointResult(BaseModel):
    eb_n0_db: float
    symbols: int
    bit_errors: int
    sym_errors: int
    ber: float
    ser: float
    ci_lo: float
    ci_hi: float
    wall_time: float
    low_confidence: bool


class TrialResult(BaseModel):
    family: str
    r: int
    SE: float
    labeling: str
    detector: str
    points: List[GridPointResult] = Field(default_factory=list)

    def to_rows(self) -> List[Dict[str, object]]:
        rows = []
        for p in self.points:
            rows.append({
                'family': self.family, 'r': self.r, 'SE': self.SE,
                'labeling': self.labeling, 'detector': self.detector,
                'eb_n0_db': p.eb_n0_db, 'symbols': p.symbols,
                'bit_errors': p.bit_errors, 'sym_errors': p.sym_errors,
                'ber': p.ber, 'ser': p.ser, 'ci_lo': p.ci_lo, 'ci_hi': p.ci_hi,
            })
        return rows


def clopper_pearson(k: int, n: int, alpha: float = 0.05) -> Tuple[float, float]:
    """二项比例的 Clopper-Pearson 区间"""
    if n <= 0:
        return 0.0, 1.0
    lower = 0.0 if k == 0 else beta.ppf(alpha / 2.0, k, n - k + 1)
    upper = 1.0 if k >= n else beta.ppf(1.0 - alpha / 2.0, k + 1, n - k)
    return float(np.nan_to_num(lower, nan=0.0)), float(np.nan_to_num(upper, nan=1.0))


def build_modem(config: AwgnConfig) -> Modem:
    if config.family.lower() == 'qam':
        return QamModem(config.qam_order)
    spec = make_lattice(config.family, config.dimension)
    vc = build_constellation(spec, config.r, config.shift, shift_seed=config.shift_seed)
    return VcModem(vc, config.labeling, config.detector)


def _label(value) -> str:
    return str(getattr(value, 'value', value))


class AwgnBenchService:
    """AWGN 误码率扫描"""

    def __init__(self, config: AwgnConfig, modem: Optional[Modem] = None):
        self.config = config
        self.modem = modem or build_modem(config)
        self.settings = {
            'min_bit_errors': config.min_bit_errors,   # 停止规则: 比特错误数下限
            'max_symbols': config.max_symbols,         # 停止规则: 每个网格点符号数上限
            'block_symbols': config.block_symbols,     # 每块符号数，随机流粒度
            'max_workers': config.threads,             # 并发块数
        }
        logger.info(f"[{self._timestamp()}] 🚀 AWGN 扫描初始化: {self.modem}, "
                    f"{len(config.eb_n0_db)} 个网格点, {self.settings['max_workers']} 个worker")

    def _timestamp(self) -> str:
        """生成带毫秒的时间戳"""
        return datetime.now().strftime("%Y-%m-%d %H:%M:%S.%f")[:-3]

    def _run_block(self, grid_index: int, block: int, n_symbols: int, n0: float) -> Tuple[int, int]:
        """一个块: 返回 (比特错误数, 符号错误数)"""
        rng = block_generator(self.config.seed, grid_index, block)
        m, n = self.modem.bits_per_symbol, self.modem.dimension
        bits = rng.integers(0, 2, size=(n_symbols, m), dtype=np.uint8)
        noise = rng.standard_normal((n_symbols, n)) * math.sqrt(n0 / 2.0)
        detected = self.modem.detect(self.modem.modulate(bits) + noise)
        wrong = detected != bits
        return int(wrong.sum()), int(np.count_nonzero(wrong.any(axis=1)))

    def run_point(self, grid_index: int, eb_n0_db: float, executor: ThreadPoolExecutor) -> GridPointResult:
        start = time.time()
        n0 = n0_from_ebn0(eb_n0_db, self.modem.bits_per_symbol, self.modem.dimension)
        block_symbols = self.settings['block_symbols']
        max_symbols = self.settings['max_symbols']
        n_blocks = math.ceil(max_symbols / block_symbols)
        symbols = bit_errors = sym_errors = 0
        next_block = 0
        done = False

        while not done and next_block < n_blocks:
            wave = range(next_block, min(n_blocks, next_block + self.settings['max_workers']))
            futures = []
            for block in wave:
                size = min(block_symbols, max_symbols - block * block_symbols)
                futures.append((size, executor.submit(self._run_block, grid_index, block, size, n0)))
            # 按块顺序累加，达到停止条件后丢弃后续块
            for size, future in futures:
                b_err, s_err = future.result()
                if done:
                    continue
                symbols += size
                bit_errors += b_err
                sym_errors += s_err
                if bit_errors >= self.settings['min_bit_errors']:
                    done = True
            next_block = wave.stop

        total_bits = symbols * self.modem.bits_per_symbol
        ber = bit_errors / total_bits
        ci_lo, ci_hi = clopper_pearson(bit_errors, total_bits)
        low_confidence = bit_errors < self.settings['min_bit_errors']
        if low_confidence:
            logger.warning(f"[{self._timestamp()}] ⚠️ Eb/N0={eb_n0_db} dB 达到符号上限 {max_symbols}，"
                           f"仅 {bit_errors} 个比特错误，结果置信度低")
        return GridPointResult(
            eb_n0_db=eb_n0_db,
            symbols=symbols,
            bit_errors=bit_errors,
            sym_errors=sym_errors,
            ber=ber,
            ser=sym_errors / symbols,
            ci_lo=ci_lo,
            ci_hi=ci_hi,
            wall_time=time.time() - start,
            low_confidence=low_confidence,
        )

    def run(self) -> TrialResult:
        result = TrialResult(
            family=self.modem.family,
            r=self.modem.r,
            SE=self.modem.spectral_efficiency,
            labeling=_label(self.modem.labeling),
            detector=_label(self.modem.detector),
        )
        with ThreadPoolExecutor(max_workers=self.settings['max_workers']) as executor:
            for grid_index, eb_n0_db in enumerate(self.config.eb_n0_db):
                point = self.run_point(grid_index, eb_n0_db, executor)
                result.points.append(point)
                logger.info(f"[{self._timestamp()}] 📊 {result.family} r={result.r} {result.labeling}/{result.detector} "
                            f"Eb/N0={eb_n0_db} dB: BER={point.ber:.3e} SER={point.ser:.3e} ({point.symbols} 符号)")
        logger.info(f"[{self._timestamp()}] ✅ AWGN 扫描完成: {self.modem}")
        return result


def run_awgn(config: AwgnConfig, modem: Optional[Modem] = None) -> TrialResult:
    return AwgnBenchService(config, modem).run()
