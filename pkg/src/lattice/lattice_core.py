#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
格核心定义
支持 Z^N、A2、D4、E8、Λ24 五类满秩格，生成矩阵以精确有理数保存，
浮点副本只在计算边界使用
"""
import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import List, Sequence, Tuple, Union

import numpy as np

from .golay import golay_generator, leech_minimal_vectors

logger = logging.getLogger(__name__)

# 系数取整校验容差 (每个系数的绝对误差)
COEFF_TOLERANCE = 1e-6
# 枚举节点预算
ENUMERATION_BUDGET = 10 ** 7

Matrix = Tuple[Tuple[Fraction, ...], ...]


class NotALatticePointError(ValueError):
    """G^{-1}λ 的取整残差超过容差"""


class EnumerationBudgetError(RuntimeError):
    """枚举候选数超过预算"""


class LatticeFamily(str, Enum):
    CUBIC = 'cubic'
    A2 = 'a2'
    D4 = 'd4'
    E8 = 'e8'
    LEECH24 = 'leech24'


# 各格族固定维数，CUBIC 任意 N >= 1
FIXED_DIMENSIONS = {
    LatticeFamily.A2: 2,
    LatticeFamily.D4: 4,
    LatticeFamily.E8: 8,
    LatticeFamily.LEECH24: 24,
}

# A2 的 3 维零和嵌入 -> 2 维物理坐标的正交投影 (行向量)
_A2_PROJECTION = np.array([
    [1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0), 0.0],
    [1.0 / math.sqrt(6.0), 1.0 / math.sqrt(6.0), -2.0 / math.sqrt(6.0)],
])


@dataclass(frozen=True)
class LatticeSpec:
    """
    一个格的完整描述

    generator 的列是基向量 (内部坐标)；A2 的内部坐标是 3 维零和嵌入，
    因此其 generator 为 3x2。物理坐标 = 内部坐标 / coord_scale。
    """
    family: LatticeFamily
    dimension: int
    generator: Matrix
    coord_scale2: Fraction
    dmin2_internal: Fraction
    kissing: int
    covering_radius2: Fraction
    G: np.ndarray = field(repr=False, compare=False)
    G_inv: np.ndarray = field(repr=False, compare=False)

    @property
    def coord_scale(self) -> float:
        return math.sqrt(self.coord_scale2)

    @property
    def ambient_dimension(self) -> int:
        """内部坐标维数 (A2 为 3，其余等于 dimension)"""
        return self.G.shape[0]

    @property
    def dmin2_physical(self) -> float:
        return float(self.dmin2_internal / self.coord_scale2)

    @property
    def name(self) -> str:
        if self.family == LatticeFamily.CUBIC:
            return f"Z{self.dimension}"
        return self.family.value.upper()

    def __repr__(self) -> str:
        return f"LatticeSpec({self.name}, N={self.dimension}, kissing={self.kissing})"


def _to_fraction_matrix(rows: Sequence[Sequence]) -> Matrix:
    return tuple(tuple(Fraction(v) for v in row) for row in rows)


def _columns_to_matrix(columns: Sequence[Sequence]) -> Matrix:
    """按列给出的基向量 -> 行主序矩阵"""
    n_rows = len(columns[0])
    return _to_fraction_matrix([[col[i] for col in columns] for i in range(n_rows)])


def _exact_inverse(matrix: Matrix) -> Matrix:
    """有理数 Gauss-Jordan 求逆"""
    n = len(matrix)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ValueError("生成矩阵奇异，det(G) = 0")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return tuple(tuple(row[n:]) for row in aug)


def exact_determinant(matrix: Matrix) -> Fraction:
    """有理数消元求行列式"""
    rows = [list(row) for row in matrix]
    n = len(rows)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            rows[col], rows[pivot] = rows[pivot], rows[col]
            det = -det
        det *= rows[col][col]
        for r in range(col + 1, n):
            if rows[r][col] != 0:
                factor = rows[r][col] / rows[col][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
    return det


def hermite_basis(vectors: Sequence[Sequence[int]]) -> List[List[int]]:
    """
    由整数生成集求阶梯形 (Hermite) 基，纯 Python 整数运算

    返回的第 k 个基向量首个非零分量位于第 k 列且为正。
    """
    rows = [list(int(v) for v in vec) for vec in vectors]
    n_cols = len(rows[0])
    basis = []
    for col in range(n_cols):
        active = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        # 欧几里得消元直到该列只剩一个非零行
        while len(active) > 1:
            active.sort(key=lambda r: abs(r[col]))
            pivot = active[0]
            remaining = [pivot]
            for r in active[1:]:
                q = r[col] // pivot[col]
                reduced = [a - q * b for a, b in zip(r, pivot)]
                if reduced[col] != 0:
                    remaining.append(reduced)
                else:
                    rest.append(reduced)
            active = remaining
        if active:
            pivot = active[0]
            if pivot[col] < 0:
                pivot = [-a for a in pivot]
            basis.append(pivot)
        rows = [r for r in rest if any(r)]
    return basis


def _leech_basis_columns() -> List[List[int]]:
    """Leech格 (√8 缩放) 的整数基: 由 2·Golay、4·D24 与粘合向量 (-3, 1^23) 生成"""
    n = 24
    spanning = [list(2 * int(v) for v in row) for row in golay_generator()]
    for i in range(n - 1):
        v = [0] * n
        v[i], v[i + 1] = 4, -4
        spanning.append(v)
    spanning.append([4, 4] + [0] * (n - 2))
    spanning.append([-3] + [1] * (n - 1))
    basis = hermite_basis(spanning)
    if len(basis) != n:
        raise RuntimeError(f"Leech生成集秩异常: {len(basis)}")
    return basis


def _a2_left_inverse() -> Matrix:
    # 零和向量 x = z1(1,-1,0) + z2(1,0,-1) => z1 = -x2, z2 = -x3
    return _to_fraction_matrix([[0, -1, 0], [0, 0, -1]])


def _build(family: LatticeFamily, n: int) -> LatticeSpec:
    if family == LatticeFamily.CUBIC:
        generator = _to_fraction_matrix([[int(i == j) for j in range(n)] for i in range(n)])
        scale2, dmin2, kissing, covering2 = Fraction(1), Fraction(1), 2 * n, Fraction(n, 4)
    elif family == LatticeFamily.A2:
        generator = _columns_to_matrix([(1, -1, 0), (1, 0, -1)])
        scale2, dmin2, kissing, covering2 = Fraction(2), Fraction(2), 6, Fraction(2, 3)
    elif family == LatticeFamily.D4:
        generator = _columns_to_matrix([(-1, -1, 0, 0), (1, -1, 0, 0), (0, 1, -1, 0), (0, 0, 1, -1)])
        scale2, dmin2, kissing, covering2 = Fraction(2), Fraction(2), 24, Fraction(1)
    elif family == LatticeFamily.E8:
        columns = [[2, 0, 0, 0, 0, 0, 0, 0]]
        for i in range(1, 7):
            col = [0] * 8
            col[i - 1], col[i] = -1, 1
            columns.append(col)
        columns.append([Fraction(1, 2)] * 8)
        generator = _columns_to_matrix(columns)
        scale2, dmin2, kissing, covering2 = Fraction(2), Fraction(2), 240, Fraction(1)
    elif family == LatticeFamily.LEECH24:
        generator = _columns_to_matrix(_leech_basis_columns())
        scale2, dmin2, kissing, covering2 = Fraction(8), Fraction(32), 196560, Fraction(16)
    else:
        raise ValueError(f"不支持的格族: {family}")

    if family == LatticeFamily.A2:
        inverse = _a2_left_inverse()
    else:
        inverse = _exact_inverse(generator)

    G = np.array([[float(v) for v in row] for row in generator])
    G_inv = np.array([[float(v) for v in row] for row in inverse])
    G.setflags(write=False)
    G_inv.setflags(write=False)

    spec = LatticeSpec(
        family=family,
        dimension=n,
        generator=generator,
        coord_scale2=scale2,
        dmin2_internal=dmin2,
        kissing=kissing,
        covering_radius2=covering2,
        G=G,
        G_inv=G_inv,
    )
    logger.debug(f"🔧 格已构造: {spec}")
    return spec


@lru_cache(maxsize=None)
def _cached_lattice(family: LatticeFamily, n: int) -> LatticeSpec:
    return _build(family, n)


def make_lattice(family: Union[LatticeFamily, str], n: int) -> LatticeSpec:
    """
    构造格描述

    Args:
        family: 格族 (枚举或 'cubic'/'a2'/'d4'/'e8'/'leech24')
        n: 维数

    Returns:
        LatticeSpec: 不可变，可在线程间共享
    """
    try:
        family = LatticeFamily(str(family.value if isinstance(family, LatticeFamily) else family).lower())
    except ValueError:
        raise ValueError(f"不支持的格族: {family}")
    n = int(n)
    expected = FIXED_DIMENSIONS.get(family)
    if expected is not None and n != expected:
        raise ValueError(f"格族 {family.value} 的维数必须为 {expected}，实际为 {n}")
    if n < 1:
        raise ValueError(f"维数必须为正整数: {n}")
    return _cached_lattice(family, n)


def lattice_point(spec: LatticeSpec, z: Sequence[int]) -> np.ndarray:
    """精确计算 Gz (有理运算)，在边界转为浮点"""
    z = [int(v) for v in z]
    if len(z) != spec.dimension:
        raise ValueError(f"整数向量长度 {len(z)} 与格维数 {spec.dimension} 不一致")
    exact = [sum((g * v for g, v in zip(row, z)), Fraction(0)) for row in spec.generator]
    return np.array([float(v) for v in exact])


def lattice_points(spec: LatticeSpec, z: np.ndarray) -> np.ndarray:
    """批量 Gz，z 形状 (B, N)"""
    z = np.asarray(z)
    if z.shape[-1] != spec.dimension:
        raise ValueError(f"整数向量长度 {z.shape[-1]} 与格维数 {spec.dimension} 不一致")
    return z.astype(np.float64) @ spec.G.T


def coeffs_of(spec: LatticeSpec, point: np.ndarray) -> np.ndarray:
    """
    求整数系数 z 使 Gz = λ，支持单点 (M,) 或批量 (B, M)

    Raises:
        NotALatticePointError: 残差超过 1e-6
    """
    point = np.asarray(point, dtype=np.float64)
    if point.shape[-1] != spec.ambient_dimension:
        raise ValueError(f"点的维数 {point.shape[-1]} 与内部坐标维数 {spec.ambient_dimension} 不一致")
    real = point @ spec.G_inv.T
    z = np.floor(real + 0.5)
    residual = np.max(np.abs(real - z)) if real.size else 0.0
    if residual > COEFF_TOLERANCE:
        raise NotALatticePointError(f"不是格点: 系数残差 {residual:.3e} 超过 {COEFF_TOLERANCE}")
    # 左逆不能排除平面外的点 (A2)，再核对一次 Gz
    back = np.max(np.abs(z @ spec.G.T - point)) if real.size else 0.0
    if back > COEFF_TOLERANCE:
        raise NotALatticePointError(f"不是格点: 重构残差 {back:.3e} 超过 {COEFF_TOLERANCE}")
    return z.astype(np.int64)


def to_physical(spec: LatticeSpec, x: np.ndarray) -> np.ndarray:
    """内部坐标 -> 物理坐标 (除以 s；A2 再投影到 2 维)"""
    x = np.asarray(x, dtype=np.float64)
    if spec.family == LatticeFamily.A2:
        return (x @ _A2_PROJECTION.T) / spec.coord_scale
    return x / spec.coord_scale


def to_internal(spec: LatticeSpec, p: np.ndarray) -> np.ndarray:
    """物理坐标 -> 内部坐标"""
    p = np.asarray(p, dtype=np.float64)
    if spec.family == LatticeFamily.A2:
        return spec.coord_scale * (p @ _A2_PROJECTION)
    return p * spec.coord_scale


def _enumerate_coefficients(R: np.ndarray, target: np.ndarray, radius2: float, budget: int) -> List[np.ndarray]:
    """
    Fincke-Pohst 深度优先枚举 ‖Rz - target‖² <= radius2 的全部整数 z
    R 为上三角
    """
    n = R.shape[0]
    z = np.zeros(n, dtype=np.int64)
    found: List[np.ndarray] = []
    nodes = 0
    limit = radius2 * (1.0 + 1e-9) + 1e-12

    def descend(k: int, partial: float) -> None:
        nonlocal nodes
        shift = target[k] - float(R[k, k + 1:] @ z[k + 1:])
        centre = shift / R[k, k]
        half = math.sqrt(max(limit - partial, 0.0)) / abs(R[k, k])
        for v in range(math.ceil(centre - half - 1e-9), math.floor(centre + half + 1e-9) + 1):
            nodes += 1
            if nodes > budget:
                raise EnumerationBudgetError(f"枚举节点数超过预算 {budget}")
            z[k] = v
            total = partial + (R[k, k] * v - shift) ** 2
            if total <= limit:
                if k == 0:
                    found.append(z.copy())
                else:
                    descend(k - 1, total)
        z[k] = 0

    descend(n - 1, 0.0)
    return found


def enumerate_ball(spec: LatticeSpec, center: np.ndarray, radius2: float,
                   budget: int = ENUMERATION_BUDGET) -> List[np.ndarray]:
    """
    列出 ‖λ - center‖² <= radius2 的全部格点 (内部坐标)

    先对 G 做 QR 分解，距离拆成平面内 ‖Rz - Qᵀc‖² 与平面外分量之和，
    再做穷举枚举。返回顺序由枚举顺序确定。
    """
    center = np.asarray(center, dtype=np.float64).reshape(-1)
    if center.shape[0] != spec.ambient_dimension:
        raise ValueError(f"中心维数 {center.shape[0]} 与内部坐标维数 {spec.ambient_dimension} 不一致")
    Q, R = np.linalg.qr(spec.G)
    target = Q.T @ center
    off_plane = float(np.sum((center - Q @ target) ** 2))
    remaining = float(radius2) - off_plane
    if remaining < -1e-12:
        return []
    coeffs = _enumerate_coefficients(R, target, max(remaining, 0.0), budget)
    return [spec.G @ z.astype(np.float64) for z in coeffs]


@lru_cache(maxsize=None)
def _minimal_vectors_cached(family: LatticeFamily, n: int) -> np.ndarray:
    spec = _cached_lattice(family, n)
    if family == LatticeFamily.LEECH24:
        vectors = leech_minimal_vectors().astype(np.float64)
    else:
        origin = np.zeros(spec.ambient_dimension)
        points = enumerate_ball(spec, origin, float(spec.dmin2_internal))
        vectors = np.array([p for p in points if np.any(np.abs(p) > 1e-12)])
    if vectors.shape[0] != spec.kissing:
        raise RuntimeError(f"{spec.name} 最小向量数 {vectors.shape[0]} 与 kissing 数 {spec.kissing} 不一致")
    vectors.setflags(write=False)
    return vectors


def minimal_vectors(spec: LatticeSpec) -> np.ndarray:
    """全部最小范数向量 (内部坐标)，形状 (kissing, M)"""
    return _minimal_vectors_cached(spec.family, spec.dimension)
