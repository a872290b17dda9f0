#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
计数器型随机数流
按 (master_seed, cell, block, ...) 派生独立的 Philox 流，
结果与线程数、执行顺序无关
"""
from typing import Sequence

import numpy as np


def _entropy(master_seed: int, keys: Sequence[int]) -> list:
    values = [int(master_seed)] + [int(k) for k in keys]
    if any(v < 0 for v in values):
        raise ValueError(f"随机流键必须为非负整数: {values}")
    return values


def block_generator(master_seed: int, *keys: int) -> np.random.Generator:
    """同一组键永远得到同一条随机流"""
    sequence = np.random.SeedSequence(_entropy(master_seed, keys))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(master_seed: int, *keys: int) -> int:
    """由主种子和单元编号派生稳定的子种子 (32位)"""
    sequence = np.random.SeedSequence(_entropy(master_seed, keys))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
