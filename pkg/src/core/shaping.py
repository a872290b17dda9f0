#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
平移向量选择
V(0) 内均匀抽样、带步长保护的质心迭代优化，以及能量差 μ 的蒙特卡洛估计
"""
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..lattice.cpa import closest_point
from ..lattice.lattice_core import LatticeSpec, lattice_points, to_internal
from .rng import block_generator, derive_seed
from .vc_codec import (
    DEFAULT_ENERGY_SAMPLES,
    MAX_ENUMERATION,
    VoronoiConstellation,
    all_digits,
    check_scale,
    make_constellation,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 50
DEFAULT_TOL = 1e-6
# Λ24 等大星座每次迭代的均匀索引样本数
DEFAULT_OPT_SAMPLES = 100000
# 步长减半的下限
_MIN_STEP = 1.0 / 1024


@dataclass
class ShiftResult:
    a: np.ndarray
    energy: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)
    exact: bool = True


@dataclass
class MuEstimate:
    mu: float
    stderr: float
    mean_energy: float
    opt_energy: float
    n_samples: int


def reduce_shift(spec: LatticeSpec, a: np.ndarray) -> np.ndarray:
    """a - CPA(a)，把平移向量折回 V(0)；星座不变"""
    a = np.asarray(a, dtype=np.float64)
    return a - closest_point(spec, a)


def parallelotope_centre(spec: LatticeSpec) -> np.ndarray:
    """基本平行体中心 G·(½, …, ½) 折回 V(0)"""
    return reduce_shift(spec, spec.G @ np.full(spec.dimension, 0.5))


def sample_shift_uniform(spec: LatticeSpec, rng_seed: int) -> np.ndarray:
    """u ~ U[0,1)^N, x = Gu, a = x - CPA(x)，在 V(0) 内均匀"""
    rng = block_generator(rng_seed)
    return reduce_shift(spec, spec.G @ rng.random(spec.dimension))


def sample_shifts(spec: LatticeSpec, n: int, rng_seed: int) -> np.ndarray:
    rng = block_generator(rng_seed)
    return reduce_shift(spec, rng.random((n, spec.dimension)) @ spec.G.T)


class ShiftEvaluator:
    """
    固定一组数字向量 (全枚举或均匀抽样)，对任意平移向量重算成员关系，
    返回物理坐标能量与内部坐标质心
    """

    def __init__(self, spec: LatticeSpec, r: int, n_samples: int = DEFAULT_OPT_SAMPLES, seed: int = 0):
        self.spec = spec
        self.r = check_scale(r)
        self.M = self.r ** spec.dimension
        self.exact = self.M <= MAX_ENUMERATION
        if self.exact:
            digits = all_digits(self.r, spec.dimension)
        else:
            digits = block_generator(seed, 1).integers(0, self.r, size=(n_samples, spec.dimension))
        self.x = lattice_points(spec, digits)
        self.evaluations = 0

    def evaluate(self, a: np.ndarray) -> Tuple[float, np.ndarray]:
        self.evaluations += 1
        c = self.x - self.r * closest_point(self.spec, (self.x - a) / self.r) - a
        energy = float(np.mean(np.sum(c ** 2, axis=1))) / float(self.spec.coord_scale2)
        return energy, c.mean(axis=0)


def optimize_shift(spec: LatticeSpec, r: int, a_init: Optional[np.ndarray] = None,
                   max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
                   n_samples: int = DEFAULT_OPT_SAMPLES, seed: int = 0,
                   evaluator: Optional[ShiftEvaluator] = None) -> ShiftResult:
    """
    质心迭代 a <- a + centroid(C(r, a))

    每步重算成员关系，只接受使 E_s 下降的步长，否则步长减半；
    相对能量变化小于 tol 或找不到下降步长即收敛。max_iter 用尽时
    converged=False，结果照常返回。
    """
    evaluator = evaluator or ShiftEvaluator(spec, r, n_samples, seed)
    a = reduce_shift(spec, parallelotope_centre(spec) if a_init is None else a_init)
    energy, centroid = evaluator.evaluate(a)
    history = [energy]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        if float(centroid @ centroid) / float(spec.coord_scale2) <= tol * energy:
            converged = True
            break
        step = 1.0
        accepted = False
        while step >= _MIN_STEP:
            candidate = reduce_shift(spec, a + step * centroid)
            cand_energy, cand_centroid = evaluator.evaluate(candidate)
            if cand_energy < energy:
                accepted = True
                break
            step /= 2.0
        if not accepted:
            converged = True
            break
        improvement = (energy - cand_energy) / energy
        a, energy, centroid = candidate, cand_energy, cand_centroid
        history.append(energy)
        if improvement < tol:
            converged = True
            break

    if not converged:
        logger.warning(f"⚠️ 平移优化未在 {max_iter} 次迭代内收敛 ({spec.name}, r={r})")
    logger.debug(f"🔧 平移优化完成: {spec.name} r={r} E_s={energy:.6g} 迭代 {iterations} 次")
    return ShiftResult(a=a, energy=energy, iterations=iterations, converged=converged,
                       history=history, exact=evaluator.exact)


def best_shift(spec: LatticeSpec, r: int, n_starts: int = 1, seed: int = 0,
               max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
               n_samples: int = DEFAULT_OPT_SAMPLES,
               evaluator: Optional[ShiftEvaluator] = None) -> ShiftResult:
    """多起点优化: 第一个起点为平行体中心，其余为按种子派生的均匀平移"""
    evaluator = evaluator or ShiftEvaluator(spec, r, n_samples, seed)
    best: Optional[ShiftResult] = None
    for i in range(max(1, n_starts)):
        start = None if i == 0 else sample_shift_uniform(spec, derive_seed(seed, i))
        result = optimize_shift(spec, r, start, max_iter=max_iter, tol=tol, evaluator=evaluator)
        if best is None or result.energy < best.energy:
            best = result
    return best


def parse_shift_source(source: Union[str, Sequence[float]]) -> Tuple[str, Optional[List[float]]]:
    """'auto' / 'optimized' / 'random' 或逗号分隔的显式向量"""
    if not isinstance(source, str):
        return 'explicit', [float(v) for v in source]
    text = source.strip().lower()
    if text in ('auto', 'optimized', 'random'):
        return text, None
    try:
        return 'explicit', [float(v) for v in text.replace(';', ',').split(',') if v.strip()]
    except ValueError:
        raise ValueError(f"无法解析平移向量: {source!r}，可选 auto / optimized / random / 逗号分隔向量")


def resolve_shift(spec: LatticeSpec, r: int, source: Union[str, Sequence[float]] = 'auto',
                  seed: int = 0) -> Tuple[np.ndarray, str]:
    """
    确定平移向量 (内部坐标)

    auto: M <= 2^16 时优化，否则按种子随机；显式向量以物理坐标给出。
    """
    kind, vector = parse_shift_source(source)
    if kind == 'auto':
        kind = 'optimized' if check_scale(r) ** spec.dimension <= MAX_ENUMERATION else 'random'
    if kind == 'optimized':
        return best_shift(spec, r, seed=seed).a, 'optimized'
    if kind == 'random':
        return sample_shift_uniform(spec, seed), 'random'
    if len(vector) != spec.dimension:
        raise ValueError(f"显式平移向量长度 {len(vector)} 与格维数 {spec.dimension} 不一致")
    return to_internal(spec, np.array(vector)), 'explicit'


def build_constellation(spec: LatticeSpec, r: int, shift: Union[str, Sequence[float]] = 'auto',
                        shift_seed: int = 0, energy_samples: int = DEFAULT_ENERGY_SAMPLES,
                        energy_seed: int = 0) -> VoronoiConstellation:
    """按平移来源构造星座"""
    a, source = resolve_shift(spec, r, shift, shift_seed)
    return make_constellation(spec, r, a, shift_source=source,
                              energy_samples=energy_samples, energy_seed=energy_seed)


def estimate_mu(spec: LatticeSpec, r: int, n_samples: int = 100, rng_seed: int = 0,
                energy_samples: int = DEFAULT_ENERGY_SAMPLES) -> MuEstimate:
    """
    μ = (E_a[E_s] - E_s,opt) / E_s,opt

    所有平移共用同一组数字向量；E_s,opt 取平行体中心起点、最优抽样平移
    起点两次优化与全部抽样能量中的最小值，因此 μ >= 0。
    """
    if n_samples < 100:
        raise ValueError(f"n_samples 至少为 100，实际为 {n_samples}")
    evaluator = ShiftEvaluator(spec, r, energy_samples, rng_seed)
    shifts = sample_shifts(spec, n_samples, derive_seed(rng_seed, 0))
    energies = np.array([evaluator.evaluate(a)[0] for a in shifts])

    from_centre = optimize_shift(spec, r, evaluator=evaluator)
    from_best = optimize_shift(spec, r, shifts[int(np.argmin(energies))], evaluator=evaluator)
    opt = min(from_centre.energy, from_best.energy, float(energies.min()))

    mean = float(energies.mean())
    stderr = float(energies.std(ddof=1) / math.sqrt(n_samples))
    return MuEstimate(mu=(mean - opt) / opt, stderr=stderr / opt,
                      mean_energy=mean, opt_energy=opt, n_samples=n_samples)


def mu_study(cells: Sequence[Tuple[LatticeSpec, int]], n_samples: int = 100, seed: int = 0,
             threads: int = 1, energy_samples: int = DEFAULT_ENERGY_SAMPLES) -> List[MuEstimate]:
    """多个 (格, r) 单元并发估计 μ，每个单元的种子由主种子和单元编号派生"""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        futures = [
            executor.submit(estimate_mu, spec, r, n_samples, derive_seed(seed, cell), energy_samples)
            for cell, (spec, r) in enumerate(cells)
        ]
        # 按提交顺序收集
        return [f.result() for f in futures]


def energy_grid_search(spec: LatticeSpec, r: int, points_per_axis: int = 101) -> Tuple[np.ndarray, float]:
    """二维格的稠密网格搜索 (优化结果的对照基准)"""
    if spec.dimension != 2:
        raise ValueError(f"网格搜索只支持二维格，实际维数 {spec.dimension}")
    evaluator = ShiftEvaluator(spec, r)
    if not evaluator.exact:
        raise ValueError("网格搜索要求星座可全枚举")
    grid = np.arange(points_per_axis) / points_per_axis
    u = np.stack(np.meshgrid(grid, grid, indexing='ij'), axis=-1).reshape(-1, 2)
    shifts = reduce_shift(spec, u @ spec.G.T)
    best_a, best_energy = shifts[0], math.inf
    for a in shifts:
        energy, _ = evaluator.evaluate(a)
        if energy < best_energy:
            best_a, best_energy = a, energy
    return best_a, best_energy
