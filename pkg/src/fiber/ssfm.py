#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Manakov 方程对称分步傅里叶传输
每步: 半步色散/损耗 (频域) -> 非线性相移 (8/9)γ(|Ax|²+|Ay|²) (时域) -> 半步色散/损耗；
每个跨段末 EDFA 补偿跨段损耗并叠加 ASE 噪声
"""
import math
import logging
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy import fft

from .signal import FiberConfig, WdmFrame, angular_frequency

logger = logging.getLogger(__name__)

MANAKOV_FACTOR = 8.0 / 9.0


class NumericalInstabilityError(FloatingPointError):
    """传输过程中出现溢出或非有限值，通常是步长或功率配置不当"""


def _check_finite(frame: WdmFrame, span: int) -> None:
    if not (np.all(np.isfinite(frame.x)) and np.all(np.isfinite(frame.y))):
        raise NumericalInstabilityError(
            f"第 {span} 个跨段后出现非有限值 (发射功率 {frame.params.launch_power_dbm} dBm)，请检查步长或功率")


def _linear_operator(frame: WdmFrame, fiber: FiberConfig, length_km: float) -> np.ndarray:
    """exp((-α/2 + iβ2ω²/2)·L)"""
    alpha, beta2 = fiber.alpha, fiber.beta2
    w = angular_frequency(frame.params)
    return np.exp((-alpha / 2.0 + 1j * beta2 / 2.0 * w ** 2) * length_km)


def nonlinear_step(x: np.ndarray, y: np.ndarray, gamma: float, length_km: float) -> Tuple[np.ndarray, np.ndarray]:
    """SPM/XPM 相移，逐采样幺正"""
    phase = MANAKOV_FACTOR * gamma * (np.abs(x) ** 2 + np.abs(y) ** 2) * length_km
    rotation = np.exp(1j * phase)
    return x * rotation, y * rotation


def add_ase(frame: WdmFrame, fiber: FiberConfig, rng: np.random.Generator) -> None:
    """每个偏振叠加复高斯白噪声，方差 = PSD × 采样率"""
    sigma = math.sqrt(fiber.ase_psd_per_pol() * frame.params.sample_rate / 2.0)
    n = frame.x.shape[0]
    frame.x = frame.x + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    frame.y = frame.y + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def propagate_span(frame: WdmFrame, fiber: FiberConfig, rng: Optional[np.random.Generator] = None,
                   workers: int = 1, amplify: bool = True) -> WdmFrame:
    """传输一个跨段 (原地更新并返回 frame)；rng 为 None 时不加 ASE"""
    h = fiber.ssfm_step_km
    half = _linear_operator(frame, fiber, h / 2.0)
    full = half * half
    gamma = fiber.gamma_nl_per_w_km
    steps = fiber.steps_per_span

    spec_x = fft.fft(frame.x, workers=workers) * half
    spec_y = fft.fft(frame.y, workers=workers) * half
    for step in range(steps):
        x = fft.ifft(spec_x, workers=workers)
        y = fft.ifft(spec_y, workers=workers)
        if gamma > 0:
            x, y = nonlinear_step(x, y, gamma, h)
        # 相邻两个半步合并为一个整步
        operator = half if step == steps - 1 else full
        spec_x = fft.fft(x, workers=workers) * operator
        spec_y = fft.fft(y, workers=workers) * operator
    frame.x = fft.ifft(spec_x, workers=workers)
    frame.y = fft.ifft(spec_y, workers=workers)

    if amplify:
        # 损耗在线性算子中按 exp(-αL) 计入，增益 G 恰好抵消
        gain = math.sqrt(math.exp(fiber.alpha * fiber.span_length_km))
        frame.x *= gain
        frame.y *= gain
        if rng is not None and fiber.ase_enabled:
            add_ase(frame, fiber, rng)
    frame.distance_km += fiber.span_length_km
    return frame


def iter_spans(frame: WdmFrame, fiber: FiberConfig, n_spans: int, rng: Optional[np.random.Generator] = None,
               workers: int = 1) -> Iterator[Tuple[int, WdmFrame]]:
    """逐跨段传输，每个跨段结束后产出 (跨段序号, 当前帧)；输入帧不被修改"""
    current = frame.copy()
    for span in range(1, n_spans + 1):
        propagate_span(current, fiber, rng, workers)
        _check_finite(current, span)
        yield span, current


def propagate(frame: WdmFrame, fiber: FiberConfig, rng: Optional[np.random.Generator] = None,
              n_spans: Optional[int] = None, workers: int = 1) -> WdmFrame:
    """
    传输 n_spans 个跨段 (默认 fiber.n_spans)

    Raises:
        NumericalInstabilityError: 波形出现非有限值
    """
    n_spans = fiber.n_spans if n_spans is None else n_spans
    result = frame.copy()
    for _, result in iter_spans(frame, fiber, n_spans, rng, workers):
        pass
    logger.debug(f"🔧 传输完成: {n_spans} 个跨段, {result.distance_km} km")
    return result


def checkpoints(frame: WdmFrame, fiber: FiberConfig, span_list: Sequence[int],
                rng: Optional[np.random.Generator] = None, workers: int = 1) -> Iterator[Tuple[int, WdmFrame]]:
    """只在 span_list 中的跨段数处产出帧副本，共用一次传输"""
    wanted = set(int(s) for s in span_list)
    for span, current in iter_spans(frame, fiber, max(wanted), rng, workers):
        if span in wanted:
            yield span, current.copy()
