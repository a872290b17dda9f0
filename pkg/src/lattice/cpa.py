#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
最近格点算法 (CPA)
Z^N、A2、D4、E8、Λ24 的精确最近点译码，全部按批向量化

取整规则统一为 floor(x + 0.5)，并列时取枚举顺序中的第一个候选。
"""
import logging
from functools import lru_cache
from typing import Tuple

import numpy as np

from .golay import golay_codewords
from .lattice_core import (
    LatticeFamily,
    LatticeSpec,
    EnumerationBudgetError,
    ENUMERATION_BUDGET,
    enumerate_ball,
)

logger = logging.getLogger(__name__)

# Leech 两个半格陪集的平移向量
_LEECH_OFFSETS = (
    np.zeros(24),
    np.array([-3.0] + [1.0] * 23),
)
# 每批处理的点数，(批, 4096, 24) 的中间数组约 25 MB
_LEECH_CHUNK = 32


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def _closest_dn(x: np.ndarray) -> np.ndarray:
    """D_N: 取整后若坐标和为奇数，把误差最大的坐标反向取整"""
    f = _round_half_up(x)
    odd = np.mod(f.sum(axis=1), 2.0) != 0
    if np.any(odd):
        rows = np.nonzero(odd)[0]
        err = x[rows] - f[rows]
        idx = np.argmax(np.abs(err), axis=1)
        step = np.where(err[np.arange(len(rows)), idx] >= 0, 1.0, -1.0)
        f[rows, idx] += step
    return f


def _closest_e8(x: np.ndarray) -> np.ndarray:
    """E8 = D8 ∪ (D8 + ½)，取两个陪集中较近者，相等时取 D8"""
    even = _closest_dn(x)
    odd = _closest_dn(x - 0.5) + 0.5
    d_even = np.sum((x - even) ** 2, axis=1)
    d_odd = np.sum((x - odd) ** 2, axis=1)
    return np.where((d_odd < d_even)[:, None], odd, even)


def _closest_a2(x: np.ndarray) -> np.ndarray:
    """A2 (3维零和嵌入): 取整后按误差排序修正坐标和"""
    x = x - x.mean(axis=1, keepdims=True)
    f = _round_half_up(x)
    deficiency = f.sum(axis=1).astype(np.int64)
    if np.any(deficiency != 0):
        err = x - f
        order = np.argsort(err, axis=1, kind='stable')
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(x.shape[1])[None, :].repeat(x.shape[0], axis=0), axis=1)
        n = x.shape[1]
        # 和偏大: 误差最小(向上取整最多)的几个坐标减一；偏小: 误差最大的几个加一
        dec = (deficiency[:, None] > 0) & (rank < deficiency[:, None])
        inc = (deficiency[:, None] < 0) & (rank >= n + deficiency[:, None])
        f = f - dec + inc
    return f


@lru_cache(maxsize=1)
def _golay_tables() -> Tuple[np.ndarray, np.ndarray]:
    codes = golay_codewords()
    return codes.astype(np.float64), codes.astype(bool)


def _closest_leech_chunk(x: np.ndarray) -> np.ndarray:
    codes, mask = _golay_tables()
    b = x.shape[0]
    rows = np.arange(b)
    best = np.zeros_like(x)
    best_dist = np.full(b, np.inf)

    for offset in _LEECH_OFFSETS:
        # 码字比特为0/1时，坐标分别落在 offset (mod 4) 或 offset+2 (mod 4) 同余类
        u0 = (x - offset) / 4.0
        u1 = (x - offset - 2.0) / 4.0
        f0 = _round_half_up(u0)
        f1 = _round_half_up(u1)
        e0 = u0 - f0
        e1 = u1 - f1
        cost0 = 16.0 * e0 ** 2
        cost1 = 16.0 * e1 ** 2
        # 把某一坐标改到另一侧相邻整数的代价增量
        flip0 = 16.0 * (1.0 - 2.0 * np.abs(e0))
        flip1 = 16.0 * (1.0 - 2.0 * np.abs(e1))
        par0 = np.mod(f0, 2.0)
        par1 = np.mod(f1, 2.0)

        total = cost0.sum(axis=1)[:, None] + (cost1 - cost0) @ codes.T
        parity = np.mod(par0.sum(axis=1)[:, None] + (par1 - par0) @ codes.T, 2.0)
        flips = np.where(mask[None, :, :], flip1[:, None, :], flip0[:, None, :])
        flip_idx = np.argmin(flips, axis=2)
        flip_cost = np.take_along_axis(flips, flip_idx[..., None], axis=2)[..., 0]
        total = total + parity * flip_cost

        j = np.argmin(total, axis=1)
        dist = total[rows, j]
        better = dist < best_dist
        if not np.any(better):
            continue
        sel = rows[better]
        jj = j[better]
        chosen = mask[jj]
        f = np.where(chosen, f1[sel], f0[sel])
        e = np.where(chosen, e1[sel], e0[sel])
        odd = parity[sel, jj] > 0.5
        if np.any(odd):
            r_odd = np.nonzero(odd)[0]
            i = flip_idx[sel[r_odd], jj[r_odd]]
            f[r_odd, i] += np.where(e[r_odd, i] >= 0, 1.0, -1.0)
        best[sel] = offset + 2.0 * chosen + 4.0 * f
        best_dist[sel] = dist[better]
    return best


def _closest_leech(x: np.ndarray) -> np.ndarray:
    """Λ24 精确最大似然译码: 两个陪集 x 4096 个码字，每个码字逐坐标选最优代表再修正奇偶"""
    out = np.empty_like(x)
    for start in range(0, x.shape[0], _LEECH_CHUNK):
        out[start:start + _LEECH_CHUNK] = _closest_leech_chunk(x[start:start + _LEECH_CHUNK])
    return out


_DECODERS = {
    LatticeFamily.CUBIC: _round_half_up,
    LatticeFamily.A2: _closest_a2,
    LatticeFamily.D4: _closest_dn,
    LatticeFamily.E8: _closest_e8,
    LatticeFamily.LEECH24: _closest_leech,
}


def closest_point(spec: LatticeSpec, w: np.ndarray) -> np.ndarray:
    """
    最近格点 (内部坐标)

    Args:
        spec: 格描述
        w: 形状 (M,) 或 (B, M)，M 为内部坐标维数

    Returns:
        与输入同形状的格点
    """
    w = np.asarray(w, dtype=np.float64)
    single = w.ndim == 1
    batch = w.reshape(1, -1) if single else w
    if batch.shape[1] != spec.ambient_dimension:
        raise ValueError(f"输入维数 {batch.shape[1]} 与内部坐标维数 {spec.ambient_dimension} 不一致")
    result = _DECODERS[spec.family](batch.copy())
    return result[0] if single else result


def closest_point_bruteforce(spec: LatticeSpec, w: np.ndarray,
                             budget: int = ENUMERATION_BUDGET) -> np.ndarray:
    """
    穷举最近点 (测试基准)，在覆盖半径球内枚举全部格点

    Raises:
        ValueError: Λ24 不提供穷举
        EnumerationBudgetError: 超出枚举预算
    """
    if spec.family == LatticeFamily.LEECH24:
        raise ValueError("Λ24 不提供穷举最近点，请使用填充半径构造校验")
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    radius2 = float(spec.covering_radius2) * (1.0 + 1e-9) + 1e-9
    candidates = enumerate_ball(spec, w, radius2, budget=budget)
    if not candidates:
        raise EnumerationBudgetError("覆盖半径球内未找到格点")
    dists = [float(np.sum((w - c) ** 2)) for c in candidates]
    return candidates[int(np.argmin(dists))]
