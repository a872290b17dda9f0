#!/usr/bin/env python3
"""
星座品质指标测试脚本
SE、γ 与 QAM 公式一致、M 表、增益表、τ̄、联合界与理论 BER
"""
import sys
import os
import math

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.lattice.lattice_core import make_lattice
from src.core.shaping import build_constellation
from src.core.metrics import (
    average_kissing,
    cardinality_table,
    gain_table,
    kissing_shift_distribution,
    merit_report,
    merit_sweep,
    n0_from_ebn0,
    qam_ber_theory,
    qam_gamma,
    qpsk_ber_theory,
    ser_bounds,
    snr_from_ebn0,
    spectral_efficiency,
    union_bound_ser,
)

FULL = os.getenv('VC_FULL_ACCEPTANCE') == '1'


def _qam(r: int):
    """Z^2 最优平移即 r²-QAM"""
    return build_constellation(make_lattice('cubic', 2), r, 'optimized')


def test_spectral_efficiency():
    print("🔧 测试频谱效率...")
    for r, se in ((2, 2.0), (4, 4.0), (8, 6.0), (16, 8.0)):
        assert spectral_efficiency(r) == se
    vc = build_constellation(make_lattice('e8', 8), 4, 'random', shift_seed=1)
    assert vc.spectral_efficiency == 4.0 and vc.bits_per_symbol == 16
    print("✅ SE = 2·log2(r)")


def test_gamma_matches_qam():
    print("🔧 测试 Z^2 的 γ 与 QAM 公式一致...")
    for r in (2, 4, 8, 16):
        report = merit_report(_qam(r))
        assert math.isclose(report.gamma, qam_gamma(r), rel_tol=1e-9), (r, report.gamma)
        assert math.isclose(report.E_s, 1.0)
        assert math.isclose(report.sensitivity_penalty_db, -report.gamma_db)
    assert math.isclose(merit_report(_qam(2)).gamma_db, 0.0, abs_tol=1e-9)
    print("✅ 4-QAM γ = 0 dB，r²-QAM γ = 3·log2(r)/(r²-1)")


def test_e8_beats_cubic():
    print("🔧 测试 E8 与 Z^8 的 γ (r = 16)...")
    e8 = build_constellation(make_lattice('e8', 8), 16, 'random', shift_seed=3)
    z8 = build_constellation(make_lattice('cubic', 8), 16, 'random', shift_seed=3)
    g_e8 = merit_report(e8, kissing_samples=0).gamma_db
    g_z8 = merit_report(z8, kissing_samples=0).gamma_db
    assert g_e8 > g_z8 + 2.5, (g_e8, g_z8)
    assert abs(g_z8 - 10.0 * math.log10(qam_gamma(16))) < 0.2
    print(f"✅ E8 γ = {g_e8:.2f} dB，Z^8 γ = {g_z8:.2f} dB")


def test_cardinality_table():
    print("🔧 测试星座大小表...")
    table = cardinality_table()
    assert table['LEECH24'][2] == 16777216
    assert table['LEECH24'][8] == 16 ** 24
    assert table['E8'][4] == 65536
    assert table['A2'][2] == 4 and table['D4'][6] == 4096
    print("✅ M = r^N 精确整数")


def test_gain_table():
    print("🔧 测试增益参考表...")
    table = gain_table()
    assert table.get('E8').gamma_c_db == 3.01
    assert table.get('LEECH24').gamma_s_db == 1.03
    assert table.get('Z').gamma_c_db == 0.0
    try:
        table.get('D16')
    except KeyError:
        pass
    else:
        raise AssertionError("未知格族应当报错")
    print("✅ 增益表正确")


def test_average_kissing_small():
    print("🔧 测试平均 kissing 数...")
    tau, se, exact = average_kissing(_qam(2))
    assert exact and se == 0.0 and tau == 2.0
    tau16, _, _ = average_kissing(_qam(4))
    assert tau16 == 3.0

    a2 = build_constellation(make_lattice('a2', 2), 2, 'optimized')
    tau, _, _ = average_kissing(a2)
    assert math.isclose(tau, 2.5), tau
    print("✅ 4-QAM τ̄ = 2，16-QAM τ̄ = 3，A2 r=2 τ̄ = 2.5")


def test_e8_kissing_deficit():
    """E8 的 τ̄ 随 r 增大趋近 240，缺口大致与 r 成反比"""
    n = 10000 if FULL else 2000
    print(f"🔧 测试 E8 τ̄ 缺口 ({n} 个样本)...")
    e8 = make_lattice('e8', 8)
    values = {}
    for r in (4, 8, 16):
        vc = build_constellation(e8, r, 'random', shift_seed=8)
        values[r], _, _ = average_kissing(vc, n_samples=n, seed=1)
    assert values[4] < values[8] < values[16] < 240.0
    ratio = (240.0 - values[8]) / (240.0 - values[16])
    assert 1.5 <= ratio <= 2.5, ratio
    print(f"✅ τ̄: {values}，缺口比 {ratio:.2f}")


def test_kissing_shift_distribution():
    print("🔧 测试 τ̄ 的平移分布...")
    values = kissing_shift_distribution(make_lattice('d4', 4), 4, 5, seed=2)
    assert len(values) == 5 and all(0 < v <= 24 for v in values)
    try:
        kissing_shift_distribution(make_lattice('e8', 8), 8, 2)
    except ValueError:
        pass
    else:
        raise AssertionError("不可枚举星座应当报错")
    print(f"✅ D4 r=4 τ̄ 分布: {[round(v, 3) for v in values]}")


def test_union_bound():
    print("🔧 测试联合界...")
    bpsk = build_constellation(make_lattice('cubic', 1), 2, 'optimized')
    n0 = n0_from_ebn0(4.0, 1, 1)
    lower, upper = ser_bounds(bpsk, n0)
    assert math.isclose(union_bound_ser(bpsk, n0), lower, rel_tol=1e-12)
    assert math.isclose(upper, lower)

    qam16 = _qam(4)
    n0 = n0_from_ebn0(16.0, 4, 2)
    lower, upper = ser_bounds(qam16, n0)
    union = union_bound_ser(qam16, n0)
    assert lower <= union and math.isclose(upper / lower, 3.0)
    assert abs(union / lower - 3.0) < 0.03, union / lower

    try:
        union_bound_ser(build_constellation(make_lattice('e8', 8), 4, 'random'), n0)
    except ValueError:
        pass
    else:
        raise AssertionError("M > 4096 应当报错")
    print("✅ BPSK 联合界等于下界，16-QAM 高 SNR 时联合界/下界 → τ̄")


def test_theory_curves():
    print("🔧 测试理论 BER...")
    ber = qpsk_ber_theory(9.6)
    assert 0.9e-5 < ber < 1.1e-5, ber
    for eb in (0.0, 5.0, 10.0):
        assert math.isclose(qam_ber_theory(4, eb), qpsk_ber_theory(eb), rel_tol=1e-12)
    assert qam_ber_theory(16, 10.0) > qam_ber_theory(4, 10.0)
    try:
        qam_ber_theory(8, 10.0)
    except ValueError:
        pass
    else:
        raise AssertionError("8-QAM 不是方形星座")
    # E8 r=4: m = 16, N = 8，SNR = Eb/N0 + 10·log10(4)
    assert math.isclose(snr_from_ebn0(10.0, 16, 8), 10.0 + 10.0 * math.log10(4.0))
    assert math.isclose(n0_from_ebn0(0.0, 2, 2), 0.5)
    print(f"✅ QPSK BER(9.6 dB) = {ber:.3e}")


def test_merit_sweep():
    print("🔧 测试品质扫描...")
    cells = [(make_lattice('d4', 4), 2), (make_lattice('d4', 4), 4), (make_lattice('leech24', 24), 2)]
    reports = merit_sweep(cells, shift='auto', seed=3, kissing_samples=0)
    assert [r.SE for r in reports] == [2.0, 4.0, 2.0]
    assert reports[0].tau_bar is not None and reports[2].tau_bar is None
    assert reports[2].M == 16777216 and not reports[2].energy_exact
    row = reports[0].to_row()
    assert row['family'] == 'D4' and row['N'] == 4
    print(f"✅ {len(reports)} 个单元，Λ24 跳过 τ̄")


def main():
    """主测试函数"""
    print("🚀 开始星座品质指标测试")
    print("=" * 60)

    tests = [
        ("频谱效率", test_spectral_efficiency),
        ("γ 与 QAM", test_gamma_matches_qam),
        ("E8 对 Z^8", test_e8_beats_cubic),
        ("星座大小表", test_cardinality_table),
        ("增益表", test_gain_table),
        ("平均 kissing 数", test_average_kissing_small),
        ("E8 τ̄ 缺口", test_e8_kissing_deficit),
        ("τ̄ 平移分布", test_kissing_shift_distribution),
        ("联合界", test_union_bound),
        ("理论 BER", test_theory_curves),
        ("品质扫描", test_merit_sweep),
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
