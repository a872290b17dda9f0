#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
扩展Golay码 [24,12,8] 与 Leech 格最小向量
生成矩阵为标准形 [I | B]，4096个码字一次性预计算
"""
import logging
from functools import lru_cache
from itertools import combinations, product
from typing import Dict

import numpy as np

logger = logging.getLogger(__name__)

# 二次剩余构造的 B 矩阵 (12x12)
GOLAY_B = np.array([
    [1, 1, 0, 1, 1, 1, 0, 0, 0, 1, 0, 1],
    [1, 0, 1, 1, 1, 0, 0, 0, 1, 0, 1, 1],
    [0, 1, 1, 1, 0, 0, 0, 1, 0, 1, 1, 1],
    [1, 1, 1, 0, 0, 0, 1, 0, 1, 1, 0, 1],
    [1, 1, 0, 0, 0, 1, 0, 1, 1, 0, 1, 1],
    [1, 0, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1],
    [0, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 1],
    [0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1],
    [0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 0, 1],
    [1, 0, 1, 1, 0, 1, 1, 1, 0, 0, 0, 1],
    [0, 1, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0],
], dtype=np.uint8)

LEECH_KISSING = 196560


def golay_generator() -> np.ndarray:
    """Golay码生成矩阵 [I12 | B]，12x24 (GF(2))"""
    return np.hstack([np.eye(12, dtype=np.uint8), GOLAY_B])


@lru_cache(maxsize=1)
def golay_codewords() -> np.ndarray:
    """
    全部4096个码字，行序与12比特消息的二进制值一致 (MSB在前)

    Returns:
        np.ndarray: (4096, 24) uint8，只读
    """
    messages = (np.arange(4096)[:, None] >> np.arange(11, -1, -1)) & 1
    codewords = (messages.astype(np.int64) @ golay_generator().astype(np.int64)) % 2
    table = codewords.astype(np.uint8)
    table.setflags(write=False)
    logger.debug(f"🔧 Golay码表已生成: {table.shape}, {table.nbytes // 1024} KiB")
    return table


def golay_weight_distribution() -> Dict[int, int]:
    """码重分布，正确的扩展Golay码为 {0:1, 8:759, 12:2576, 16:759, 24:1}"""
    weights, counts = np.unique(golay_codewords().sum(axis=1), return_counts=True)
    return {int(w): int(c) for w, c in zip(weights, counts)}


@lru_cache(maxsize=1)
def leech_minimal_vectors() -> np.ndarray:
    """
    Leech格的196560个最小向量 (√8缩放坐标，范数32)

    三类:
      (±4, ±4, 0^22)              1104 个
      (±2^8 落在八元组上, 偶数个负号)  759 * 128 个
      (∓3, ±1^23)                 4096 * 24 个
    """
    codewords = golay_codewords().astype(np.int8)
    n = 24

    # 第一类
    pair_vectors = []
    for i, j in combinations(range(n), 2):
        for si, sj in product((4, -4), repeat=2):
            v = np.zeros(n, dtype=np.int8)
            v[i], v[j] = si, sj
            pair_vectors.append(v)
    type_pairs = np.array(pair_vectors, dtype=np.int8)

    # 第二类: 八元组 = 重量为8的码字
    octads = codewords[codewords.sum(axis=1) == 8]
    signs = np.array([s for s in product((1, -1), repeat=8) if s.count(-1) % 2 == 0], dtype=np.int8)
    type_octads = np.zeros((len(octads) * len(signs), n), dtype=np.int8)
    row = 0
    for octad in octads:
        positions = np.nonzero(octad)[0]
        block = type_octads[row:row + len(signs)]
        block[:, positions] = 2 * signs
        row += len(signs)

    # 第三类: 码字c决定 ±1 的符号，再把其中一个坐标改为 ∓3
    base = (1 - 2 * codewords).astype(np.int8)
    type_odd = np.repeat(base[None, :, :], n, axis=0)
    for i in range(n):
        type_odd[i, :, i] *= -3
    type_odd = type_odd.reshape(-1, n)

    vectors = np.vstack([type_pairs, type_octads, type_odd])
    if len(vectors) != LEECH_KISSING:
        raise RuntimeError(f"Leech最小向量数量异常: {len(vectors)}")
    vectors.setflags(write=False)
    return vectors
