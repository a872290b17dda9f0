#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Voronoi 星座编解码
星座 C = {x - a | x ∈ Λ ∩ (a + rV)}，不存储星座表:
索引 K <-> 数字向量 k <-> 星座点 c，全部靠最近点算法在线完成。
另含两种比特标号 (自然二进制 / 准格雷) 与 CLI 使用的文件读写。
"""
import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from ..lattice.cpa import closest_point
from ..lattice.lattice_core import (
    LatticeFamily,
    LatticeSpec,
    coeffs_of,
    lattice_points,
    minimal_vectors,
    to_internal,
    to_physical,
)
from .cache_manager import constellation_cache, CacheKey
from .rng import block_generator

logger = logging.getLogger(__name__)

MAX_R = 16
# 能量、整形与边界检查走精确枚举的上限
MAX_ENUMERATION = 2 ** 16
# ML 检测查表的上限
MAX_TABLE = 2 ** 20
DEFAULT_ENERGY_SAMPLES = 20000

PathLike = Union[str, Path]


class Labeling(str, Enum):
    NATURAL_BINARY = 'natural-binary'
    QUASI_GRAY = 'quasi-gray'


_LABELING_ALIASES = {
    'natural': Labeling.NATURAL_BINARY,
    'natural-binary': Labeling.NATURAL_BINARY,
    'natural_binary': Labeling.NATURAL_BINARY,
    'binary': Labeling.NATURAL_BINARY,
    'quasi-gray': Labeling.QUASI_GRAY,
    'quasi_gray': Labeling.QUASI_GRAY,
    'gray': Labeling.QUASI_GRAY,
}


def parse_labeling(value: Union[str, Labeling]) -> Labeling:
    if isinstance(value, Labeling):
        return value
    key = str(value).strip().lower()
    if key not in _LABELING_ALIASES:
        raise ValueError(f"未知的比特标号: {value}，可选 natural-binary / quasi-gray")
    return _LABELING_ALIASES[key]


def check_scale(r: int) -> int:
    """r 必须是 2..16 之间的 2 的幂"""
    r = int(r)
    if r < 2 or r > MAX_R or (r & (r - 1)) != 0:
        raise ValueError(f"缩放因子 r 必须是 2 到 {MAX_R} 之间的 2 的幂，实际为 {r}")
    return r


@dataclass(frozen=True, eq=False)
class VoronoiConstellation:
    """
    Voronoi 星座 (不可变，可在线程间共享)

    a 为内部坐标下的平移向量，满足 closest_point(a) = 0；
    energy 为物理坐标下的平均符号能量 E_s。
    """
    lattice: LatticeSpec
    r: int
    a: np.ndarray = field(repr=False)
    energy: float
    energy_stderr: float = 0.0
    energy_exact: bool = True
    shift_source: str = 'explicit'

    @property
    def dimension(self) -> int:
        return self.lattice.dimension

    @property
    def M(self) -> int:
        return self.r ** self.lattice.dimension

    @property
    def digit_bits(self) -> int:
        return int(math.log2(self.r))

    @property
    def bits_per_symbol(self) -> int:
        return self.lattice.dimension * self.digit_bits

    @property
    def spectral_efficiency(self) -> float:
        return 2.0 * math.log2(self.r)

    @property
    def norm_factor(self) -> float:
        """物理坐标 -> 信道坐标，使每个维度对的 E_s 为 1"""
        return math.sqrt(self.lattice.dimension / (2.0 * self.energy))

    @property
    def name(self) -> str:
        return f"{self.lattice.name}-r{self.r}"

    def __repr__(self) -> str:
        return (f"VoronoiConstellation({self.lattice.name}, r={self.r}, M={self.M}, "
                f"E_s={self.energy:.6g}, shift={self.shift_source})")


# ---------------------------------------------------------------------------
# 索引 / 数字 / 比特
# ---------------------------------------------------------------------------

def index_to_digits(K: int, r: int, n: int) -> List[int]:
    """大端 r 进制展开，任意精度整数"""
    K = int(K)
    M = r ** n
    if K < 0 or K >= M:
        raise ValueError(f"索引 {K} 超出范围 [0, {r}^{n})")
    digits = [0] * n
    for i in range(n - 1, -1, -1):
        K, digits[i] = divmod(K, r)
    return digits


def digits_to_index(k: Sequence[int], r: int) -> int:
    K = 0
    for d in k:
        d = int(d)
        if d < 0 or d >= r:
            raise ValueError(f"数字 {d} 超出范围 [0, {r})")
        K = K * r + d
    return K


def gray_encode(value):
    return value ^ (value >> 1)


def gray_decode(value):
    """二进制反射格雷码的逆，支持 Python 整数与 numpy 数组"""
    out = value
    shifted = value >> 1
    while np.any(shifted):
        out = out ^ shifted
        shifted = shifted >> 1
    return out


def index_to_bits(K: int, labeling: Union[str, Labeling], r: int, n: int) -> List[int]:
    labeling = parse_labeling(labeling)
    b = int(math.log2(check_scale(r)))
    bits: List[int] = []
    for d in index_to_digits(K, r, n):
        value = gray_encode(d) if labeling == Labeling.QUASI_GRAY else d
        bits.extend((value >> (b - 1 - j)) & 1 for j in range(b))
    return bits


def bits_to_index(bits: Sequence[int], labeling: Union[str, Labeling], r: int, n: int) -> int:
    labeling = parse_labeling(labeling)
    b = int(math.log2(check_scale(r)))
    bits = [int(v) for v in bits]
    if len(bits) != n * b:
        raise ValueError(f"比特数 {len(bits)} 与 m = {n * b} 不一致")
    if any(v not in (0, 1) for v in bits):
        raise ValueError("比特只能是 0 或 1")
    digits = []
    for i in range(n):
        value = 0
        for v in bits[i * b:(i + 1) * b]:
            value = (value << 1) | v
        digits.append(gray_decode(value) if labeling == Labeling.QUASI_GRAY else value)
    return digits_to_index(digits, r)


def bits_to_digits_batch(bits: np.ndarray, labeling: Union[str, Labeling], r: int, n: int) -> np.ndarray:
    """(B, m) 比特 -> (B, N) 数字"""
    labeling = parse_labeling(labeling)
    b = int(math.log2(check_scale(r)))
    bits = np.asarray(bits)
    if bits.ndim != 2 or bits.shape[1] != n * b:
        raise ValueError(f"比特数组形状 {bits.shape} 与 (B, {n * b}) 不一致")
    weights = (1 << np.arange(b - 1, -1, -1)).astype(np.int64)
    values = bits.reshape(bits.shape[0], n, b).astype(np.int64) @ weights
    if labeling == Labeling.QUASI_GRAY:
        values = gray_decode(values)
    return values


def digits_to_bits_batch(digits: np.ndarray, labeling: Union[str, Labeling], r: int) -> np.ndarray:
    """(B, N) 数字 -> (B, m) 比特 (uint8)"""
    labeling = parse_labeling(labeling)
    b = int(math.log2(check_scale(r)))
    digits = np.asarray(digits, dtype=np.int64)
    values = gray_encode(digits) if labeling == Labeling.QUASI_GRAY else digits
    bits = (values[..., None] >> np.arange(b - 1, -1, -1)) & 1
    return bits.reshape(digits.shape[0], -1).astype(np.uint8)


def all_digits(r: int, n: int) -> np.ndarray:
    """按索引顺序列出全部数字向量，形状 (r^N, N)"""
    M = r ** n
    if M > MAX_TABLE:
        raise ValueError(f"M = {M} 超过可枚举上限 {MAX_TABLE}")

    def build():
        table = np.stack(np.unravel_index(np.arange(M, dtype=np.int64), (r,) * n), axis=1)
        table.setflags(write=False)
        return table

    return constellation_cache.get_or_compute(CacheKey.index_digits(r, n), build)


# ---------------------------------------------------------------------------
# 编码 / 译码 (内部坐标，批量)
# ---------------------------------------------------------------------------

def encode_digits_batch(spec: LatticeSpec, r: int, a: np.ndarray, digits: np.ndarray) -> np.ndarray:
    """数字 -> 星座点 (内部坐标): x = Gk, λ = CPA((x - a)/r), c = x - rλ - a"""
    digits = np.asarray(digits)
    if digits.size and (digits.min() < 0 or digits.max() >= r):
        raise ValueError(f"数字超出范围 [0, {r})")
    x = lattice_points(spec, digits)
    lam = closest_point(spec, (x - a) / r)
    return x - r * lam - a


def decode_digits_batch(spec: LatticeSpec, r: int, a: np.ndarray, y: np.ndarray) -> np.ndarray:
    """接收点 (内部坐标) -> 数字: λ = CPA(y + a), k = G⁻¹λ mod r"""
    lam = closest_point(spec, np.asarray(y, dtype=np.float64) + a)
    return np.mod(coeffs_of(spec, lam), r)


def to_channel(vc: VoronoiConstellation, c: np.ndarray) -> np.ndarray:
    return vc.norm_factor * to_physical(vc.lattice, c)


def from_channel(vc: VoronoiConstellation, y: np.ndarray) -> np.ndarray:
    return to_internal(vc.lattice, np.asarray(y, dtype=np.float64) / vc.norm_factor)


def encode(vc: VoronoiConstellation, K: int) -> np.ndarray:
    """索引 -> 信道坐标星座点"""
    digits = np.array([index_to_digits(K, vc.r, vc.dimension)], dtype=np.int64)
    return to_channel(vc, encode_digits_batch(vc.lattice, vc.r, vc.a, digits))[0]


def decode(vc: VoronoiConstellation, y: Sequence[float]) -> int:
    """信道坐标接收点 -> 索引，对任意有限输入都返回合法索引"""
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    if y.shape[1] != vc.dimension:
        raise ValueError(f"接收点维数 {y.shape[1]} 与星座维数 {vc.dimension} 不一致")
    if not np.all(np.isfinite(y)):
        raise ValueError("接收点含非有限值")
    digits = decode_digits_batch(vc.lattice, vc.r, vc.a, from_channel(vc, y))[0]
    return digits_to_index(digits.tolist(), vc.r)


def encode_batch(vc: VoronoiConstellation, digits: np.ndarray) -> np.ndarray:
    """(B, N) 数字 -> (B, N) 信道坐标"""
    return to_channel(vc, encode_digits_batch(vc.lattice, vc.r, vc.a, digits))


def decode_batch(vc: VoronoiConstellation, y: np.ndarray) -> np.ndarray:
    """(B, N) 信道坐标 -> (B, N) 数字"""
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("接收点含非有限值")
    return decode_digits_batch(vc.lattice, vc.r, vc.a, from_channel(vc, y))


# ---------------------------------------------------------------------------
# 能量与枚举
# ---------------------------------------------------------------------------

def enumerate_constellation(spec: LatticeSpec, r: int, a: np.ndarray) -> np.ndarray:
    """全部星座点 (内部坐标)，按索引顺序"""
    return encode_digits_batch(spec, r, a, all_digits(r, spec.dimension))


def constellation_energy(spec: LatticeSpec, r: int, a: np.ndarray,
                         n_samples: int = DEFAULT_ENERGY_SAMPLES, seed: int = 0) -> Tuple[float, float, bool]:
    """
    平均符号能量 E_s (物理坐标)

    Returns:
        (E_s, 标准误差, 是否精确)。M <= 2^16 时全枚举，否则按均匀索引抽样。
    """
    a = np.asarray(a, dtype=np.float64)
    M = r ** spec.dimension
    if M <= MAX_ENUMERATION:
        def exact():
            c = to_physical(spec, enumerate_constellation(spec, r, a))
            return float(np.mean(np.sum(c ** 2, axis=1))), 0.0, True
        return constellation_cache.get_or_compute(CacheKey.energy(spec.name, r, a, 0, 0), exact)

    def sampled():
        rng = block_generator(seed)
        digits = rng.integers(0, r, size=(n_samples, spec.dimension))
        c = to_physical(spec, encode_digits_batch(spec, r, a, digits))
        e = np.sum(c ** 2, axis=1)
        return float(e.mean()), float(e.std(ddof=1) / math.sqrt(n_samples)), False

    return constellation_cache.get_or_compute(CacheKey.energy(spec.name, r, a, n_samples, seed), sampled)


def make_constellation(spec: LatticeSpec, r: int, a: Sequence[float], shift_source: str = 'explicit',
                       energy_samples: int = DEFAULT_ENERGY_SAMPLES, energy_seed: int = 0) -> VoronoiConstellation:
    """
    构造星座并计算其能量

    Raises:
        ValueError: r 非法、a 维数不符或 a 不在 V(0) 内
    """
    r = check_scale(r)
    a = np.array(a, dtype=np.float64).reshape(-1)
    if a.shape[0] != spec.ambient_dimension:
        raise ValueError(f"平移向量维数 {a.shape[0]} 与内部坐标维数 {spec.ambient_dimension} 不一致")
    if np.any(closest_point(spec, a) != 0):
        raise ValueError("平移向量不在 V(0) 内: closest_point(a) ≠ 0")
    a.setflags(write=False)
    energy, stderr, exact = constellation_energy(spec, r, a, energy_samples, energy_seed)
    vc = VoronoiConstellation(
        lattice=spec,
        r=r,
        a=a,
        energy=energy,
        energy_stderr=stderr,
        energy_exact=exact,
        shift_source=shift_source,
    )
    logger.debug(f"🔧 星座已构造: {vc}")
    return vc


def constellation_points(vc: VoronoiConstellation) -> np.ndarray:
    """全部星座点 (信道坐标)，按索引顺序，缓存后只读"""
    if vc.M > MAX_TABLE:
        raise ValueError(f"M = {vc.M} 超过星座表上限 {MAX_TABLE}")

    def build():
        table = to_channel(vc, enumerate_constellation(vc.lattice, vc.r, vc.a))
        table.setflags(write=False)
        return table

    key = CacheKey.constellation_table(vc.lattice.name, vc.r, vc.a) + f":n{vc.norm_factor!r}"
    return constellation_cache.get_or_compute(key, build)


def boundary_ties(vc: VoronoiConstellation, tol: float = 1e-9) -> int:
    """
    统计落在 a + rV 边界上的星座点个数 (按最小向量确定的边界面)

    Z^N、A2、D4、E8 的 Voronoi 相关向量都是最小向量；Λ24 的星座无法枚举。
    """
    if vc.lattice.family == LatticeFamily.LEECH24 or vc.M > MAX_ENUMERATION:
        raise ValueError(f"{vc.name} 无法枚举检查边界")
    q = enumerate_constellation(vc.lattice, vc.r, vc.a) / vc.r
    vectors = minimal_vectors(vc.lattice)
    norms = np.sum(vectors ** 2, axis=1)
    ties = 0
    for start in range(0, q.shape[0], 4096):
        chunk = q[start:start + 4096]
        margin = 2.0 * chunk @ vectors.T - norms[None, :]
        ties += int(np.count_nonzero(np.any(np.abs(margin) < tol, axis=1)))
    return ties


# ---------------------------------------------------------------------------
# 文件读写
# ---------------------------------------------------------------------------

def write_symbols(path: PathLike, symbols: np.ndarray) -> None:
    """符号记录文件: 每条记录 N 个小端 float64"""
    np.ascontiguousarray(symbols, dtype='<f8').tofile(str(path))


def read_symbols(path: PathLike, n: int) -> np.ndarray:
    data = np.fromfile(str(path), dtype='<f8')
    if data.size % n != 0:
        raise ValueError(f"{path}: 浮点数个数 {data.size} 不是维数 {n} 的整数倍")
    return data.reshape(-1, n)


def read_bits(path: PathLike, m: int) -> np.ndarray:
    """比特文本文件 ('0'/'1' 字符，忽略空白)，返回 (B, m)"""
    text = Path(path).read_text(encoding='utf-8')
    chars = [ch for ch in text if not ch.isspace()]
    if any(ch not in '01' for ch in chars):
        raise ValueError(f"{path}: 比特文件只能包含 0 和 1")
    if len(chars) % m != 0:
        raise ValueError(f"{path}: 比特数 {len(chars)} 不是 m = {m} 的整数倍")
    return np.array([int(ch) for ch in chars], dtype=np.uint8).reshape(-1, m)


def write_bits(path: PathLike, bits: np.ndarray) -> None:
    """每个符号的比特写成一行"""
    lines = [''.join('1' if v else '0' for v in row) for row in np.asarray(bits)]
    Path(path).write_text('\n'.join(lines) + ('\n' if lines else ''), encoding='utf-8')


def read_indices(path: PathLike) -> List[int]:
    """十进制索引文件，每行一个"""
    values = []
    for lineno, line in enumerate(Path(path).read_text(encoding='utf-8').splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if not line.isdigit():
            raise ValueError(f"{path}:{lineno}: 不是非负十进制整数: {line!r}")
        values.append(int(line))
    return values


def write_indices(path: PathLike, indices: Iterable[int]) -> None:
    lines = [str(int(K)) for K in indices]
    Path(path).write_text('\n'.join(lines) + ('\n' if lines else ''), encoding='utf-8')
