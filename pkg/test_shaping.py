#!/usr/bin/env python3
"""
平移向量选择测试脚本
V(0) 内均匀抽样、质心迭代优化 (对照网格搜索)、μ 估计 (对照一维积分)
"""
import sys
import os
import math

import numpy as np
from scipy import integrate

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.lattice.cpa import closest_point
from src.lattice.lattice_core import make_lattice, to_internal
from src.core.shaping import (
    ShiftEvaluator,
    best_shift,
    build_constellation,
    energy_grid_search,
    estimate_mu,
    mu_study,
    optimize_shift,
    parallelotope_centre,
    parse_shift_source,
    resolve_shift,
    sample_shift_uniform,
    sample_shifts,
)

FULL = os.getenv('VC_FULL_ACCEPTANCE') == '1'


def test_uniform_shift_cubic():
    print("🔧 测试 Z^N 平移抽样范围...")
    spec = make_lattice('cubic', 3)
    shifts = sample_shifts(spec, 5000, 1)
    assert shifts.min() >= -0.5 and shifts.max() < 0.5
    a = sample_shift_uniform(spec, 1)
    assert np.array_equal(a, sample_shift_uniform(spec, 1))
    assert not np.array_equal(a, sample_shift_uniform(spec, 2))
    print("✅ a ∈ [-0.5, 0.5)^N，同一种子结果相同")


def test_uniform_shift_in_voronoi_cell():
    """CPA(a) = 0，且 V(0) 关于原点对称，样本均值在 4σ 内为 0"""
    n = 20000 if FULL else 4000
    print(f"🔧 测试 V(0) 内均匀抽样 ({n} 个)...")
    for family, dim in (('a2', 2), ('d4', 4), ('e8', 8), ('leech24', 24)):
        spec = make_lattice(family, dim)
        shifts = sample_shifts(spec, n, 3)
        assert np.all(closest_point(spec, shifts) == 0), spec.name
        mean = shifts.mean(axis=0)
        stderr = shifts.std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(mean) <= 4.0 * stderr + 1e-12), (spec.name, mean, stderr)
        print(f"   {spec.name}: 均值最大偏差 {np.max(np.abs(mean / stderr)):.2f}σ")
    print("✅ 抽样落在 V(0) 内且无偏")


def test_parallelotope_centre():
    print("🔧 测试平行体中心...")
    assert np.array_equal(parallelotope_centre(make_lattice('cubic', 2)), [-0.5, -0.5])
    d4 = make_lattice('d4', 4)
    assert np.all(closest_point(d4, parallelotope_centre(d4)) == 0)
    print("✅ 中心折回 V(0)")


def test_optimize_matches_grid_search():
    """Z^2, r = 2: 优化能量与 101x101 网格搜索最优值相差不超过 1%"""
    print("🔧 测试优化结果对照网格搜索...")
    spec = make_lattice('cubic', 2)
    result = best_shift(spec, 2, n_starts=3, seed=5)
    _, grid_energy = energy_grid_search(spec, 2, 101)
    assert result.converged
    assert result.energy <= grid_energy * (1.0 + 1e-9)
    assert abs(result.energy - grid_energy) <= 0.01 * grid_energy
    assert math.isclose(result.energy, 0.5)
    print(f"✅ 优化 E_s = {result.energy:.6f}，网格 E_s = {grid_energy:.6f}")


def test_monotone_history():
    print("🔧 测试能量单调下降...")
    for family, dim, r in (('a2', 2, 4), ('d4', 4, 4), ('e8', 8, 2)):
        spec = make_lattice(family, dim)
        start = sample_shift_uniform(spec, 9)
        result = optimize_shift(spec, r, start)
        history = result.history
        assert all(b < a for a, b in zip(history, history[1:])), (spec.name, history)
        start_energy, _ = ShiftEvaluator(spec, r).evaluate(start)
        assert result.energy <= start_energy
        print(f"   {spec.name} r={r}: {history[0]:.5f} -> {result.energy:.5f} ({result.iterations} 次)")
    print("✅ 每次接受的步长都使能量下降")


def test_d4_convergence():
    print("🔧 测试 D4 r=2 收敛速度...")
    result = optimize_shift(make_lattice('d4', 4), 2, max_iter=10, tol=1e-6)
    assert result.converged, result.history
    assert result.iterations <= 10
    print(f"✅ {result.iterations} 次迭代收敛，E_s = {result.energy:.6f}")


def test_large_constellation_sampled():
    print("🔧 测试大星座抽样优化...")
    spec = make_lattice('leech24', 24)
    result = optimize_shift(spec, 4, sample_shift_uniform(spec, 1), max_iter=2, n_samples=1000, seed=2)
    assert not result.exact
    assert len(result.history) >= 1
    assert np.all(closest_point(spec, result.a) == 0)
    print(f"✅ Λ24 r=4 抽样优化 E_s = {result.energy:.4f}")


def _cubic_r2_energy(a: float) -> float:
    """Z, r = 2 的两点星座能量"""
    t = abs(a)
    return (t * t + (1.0 - t) ** 2) / 2.0


def test_mu_closed_form():
    """Z, r = 2: E_a[E_s] 由一维积分给出，E_s,opt = 0.25"""
    n = 5000 if FULL else 1000
    print(f"🔧 测试 μ 对照一维积分 ({n} 个平移)...")
    mean, _ = integrate.quad(_cubic_r2_energy, -0.5, 0.5)
    expected = (mean - 0.25) / 0.25
    assert math.isclose(expected, 1.0 / 3.0, rel_tol=1e-9)

    estimate = estimate_mu(make_lattice('cubic', 1), 2, n_samples=n, rng_seed=4)
    assert math.isclose(estimate.opt_energy, 0.25)
    assert estimate.mu >= 0
    assert abs(estimate.mu - expected) <= 3.0 * estimate.stderr, (estimate.mu, expected, estimate.stderr)
    print(f"✅ μ = {estimate.mu:.4f} ± {estimate.stderr:.4f}，积分值 {expected:.4f}")


def test_mu_decreases_with_r():
    print("🔧 测试 μ 随 r 增大而减小...")
    d4 = make_lattice('d4', 4)
    small, large = mu_study([(d4, 2), (d4, 16)], n_samples=100, seed=6, threads=2)
    gap = 3.0 * math.hypot(small.stderr, large.stderr)
    assert large.mu + gap < small.mu, (small, large)
    print(f"✅ D4: μ(2) = {small.mu:.4f}，μ(16) = {large.mu:.5f}")

    try:
        estimate_mu(d4, 2, n_samples=10)
    except ValueError:
        pass
    else:
        raise AssertionError("n_samples < 100 应当报错")


def test_resolve_shift():
    print("🔧 测试平移来源...")
    a2 = make_lattice('a2', 2)
    a, source = resolve_shift(a2, 4, '0.1, -0.2')
    assert source == 'explicit'
    assert np.allclose(a, to_internal(a2, np.array([0.1, -0.2])))

    a, source = resolve_shift(a2, 4, 'random', seed=7)
    assert source == 'random' and np.array_equal(a, sample_shift_uniform(a2, 7))

    assert resolve_shift(make_lattice('d4', 4), 2, 'auto')[1] == 'optimized'
    assert resolve_shift(make_lattice('leech24', 24), 2, 'auto', seed=1)[1] == 'random'
    assert parse_shift_source([0.0, 1.0]) == ('explicit', [0.0, 1.0])

    for bad in ('abc', '0.1'):
        try:
            resolve_shift(a2, 4, bad)
        except ValueError as e:
            print(f"   {bad!r} -> {e}")
        else:
            raise AssertionError(f"{bad!r} 应当报错")

    # 显式平移不在 V(0) 内
    try:
        build_constellation(make_lattice('cubic', 2), 2, '0.9,0')
    except ValueError:
        pass
    else:
        raise AssertionError("V(0) 外的平移应当报错")
    print("✅ 平移来源解析正确")


def main():
    """主测试函数"""
    print("🚀 开始平移向量选择测试")
    print("=" * 60)

    tests = [
        ("Z^N 抽样", test_uniform_shift_cubic),
        ("V(0) 抽样", test_uniform_shift_in_voronoi_cell),
        ("平行体中心", test_parallelotope_centre),
        ("网格搜索对照", test_optimize_matches_grid_search),
        ("单调下降", test_monotone_history),
        ("D4 收敛", test_d4_convergence),
        ("大星座优化", test_large_constellation_sampled),
        ("μ 一维积分", test_mu_closed_form),
        ("μ 随 r 减小", test_mu_decreases_with_r),
        ("平移来源", test_resolve_shift),
    ]

    passed = 0
    for test_name, test_func in tests:
        print(f"\n{'=' * 20} {test_name} {'=' * 20}")
        try:
            test_func()
            passed += 1
        except AssertionError as e:
            print(f"❌ {test_name} 失败: {e}")

    print("\n" + "=" * 60)
    print(f"🎯 测试结果: {passed}/{len(tests)} 通过")
    return passed == len(tests)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
