#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Voronoi 星座工具命令行入口
子命令: encode, decode, metrics, shift-opt, awgn, fiber

退出码: 0 成功，1 配置错误 (消息给出出错的键)，2 运行时数值失败
"""
import os
import sys
import time
import logging
import argparse
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from ..core.cache_manager import constellation_cache
from ..core.metrics import (
    DEFAULT_KISSING_SAMPLES, MAX_UNION_BOUND, MeritReport,
    merit_report, n0_from_ebn0, ser_bounds, snr_from_ebn0, union_bound_ser,
)
from ..core.modems import Detector, VcModem
from ..core.rng import derive_seed
from ..core.shaping import best_shift, build_constellation, mu_study
from ..core.vc_codec import (
    VoronoiConstellation, bits_to_digits_batch, decode_batch, digits_to_bits_batch, digits_to_index,
    encode_batch, index_to_digits, read_bits, read_indices, read_symbols,
    write_bits, write_indices, write_symbols,
)
from ..fiber.signal import FiberConfig, SignalParams
from ..fiber.ssfm import NumericalInstabilityError
from ..lattice.lattice_core import (
    FIXED_DIMENSIONS, EnumerationBudgetError, LatticeFamily, LatticeSpec,
    NotALatticePointError, make_lattice, to_physical,
)
from ..services.awgn_service import AWGN_COLUMNS, AwgnConfig, build_modem, run_awgn
from ..services.config_manager import (
    ConfigError, ConstellationSection, DetectorSection, ExperimentConfig, FiberSection,
    MetricsSection, ShapingSection, SignalSection, load_config, output_sibling, resolve_threads,
)
from ..services.fiber_service import (
    FIBER_COLUMNS, OPTIMUM_COLUMNS, FiberExperimentService, FiberSweep, optimum_trace, qam_baseline,
)
from .results_writer import write_results, write_rows

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

NUMERICAL_ERRORS = (NumericalInstabilityError, NotALatticePointError, FloatingPointError, EnumerationBudgetError)

METRICS_BOUND_COLUMNS = ['eb_n0_db', 'snr_db', 'ser_lower', 'ser_upper', 'ser_union']
SHIFT_COLUMNS = ['family', 'N', 'r', 'M', 'energy', 'iterations', 'converged', 'exact', 'shift',
                 'mu', 'mu_stderr', 'mean_energy', 'opt_energy']


def _setup_logging() -> None:
    level = getattr(logging, os.getenv('LOG_LEVEL', 'INFO').upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


# ---------------------------------------------------------------------------
# 参数定义
# ---------------------------------------------------------------------------

def _add_constellation_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('星座 [constellation]')
    group.add_argument('--lattice', help='格族: cubic / a2 / d4 / e8 / leech24')
    group.add_argument('--dimension', type=int, help='维数 (cubic 必填，其余格族固定)')
    group.add_argument('--r', type=int, help='缩放因子，2 的幂，2..16')
    group.add_argument('--labeling', help='比特标号: natural-binary / quasi-gray')
    group.add_argument('--shift', help='平移: auto / optimized / random / 逗号分隔的物理坐标向量')
    group.add_argument('--shift-seed', dest='shift_seed', type=int, help='随机平移或优化起点的种子')


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('运行 [run]')
    group.add_argument('--seed', type=int, help='主随机种子 (必填)')
    group.add_argument('--output', help='结果 CSV 路径')
    group.add_argument('--threads', type=int, help='工作线程数 (受 VC_THREADS 限制)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='vc-tool',
        description='格 Voronoi 星座: 编解码、品质指标、平移优化、AWGN 与光纤误码仿真',
        epilog='环境变量: VC_THREADS 限制并行线程数，LOG_LEVEL 设置日志级别',
    )
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    for name, help_text in (('encode', '比特或索引 -> 信道符号记录文件'),
                            ('decode', '信道符号记录文件 -> 比特或索引')):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--config', help='配置文件')
        _add_constellation_flags(p)
        group = p.add_argument_group('文件 [io]')
        group.add_argument('--in', dest='input', help='输入文件')
        group.add_argument('--out', dest='output_path', help='输出文件')
        group.add_argument('--input-format', dest='input_format', help='encode 输入: bits / index')
        group.add_argument('--output-format', dest='output_format', help='decode 输出: bits / index')

    p = sub.add_parser('metrics', help='星座品质指标 (CSV 输出到标准输出)')
    p.add_argument('--config', help='配置文件')
    _add_constellation_flags(p)
    group = p.add_argument_group('指标 [metrics]')
    group.add_argument('--kissing-samples', dest='kissing_samples', type=int,
                       help='τ̄ 抽样数 (不可枚举星座)，0 表示跳过')
    group.add_argument('--r-list', dest='r_list', type=int, nargs='+', help='多个 r 值，每个一行')
    group.add_argument('--eb-n0-db', dest='eb_n0_db', type=float, help='给出时附加 SER 上下界')

    p = sub.add_parser('shift-opt', help='平移向量优化与 μ 估计')
    p.add_argument('--config', help='配置文件')
    _add_run_flags(p)
    _add_constellation_flags(p)
    group = p.add_argument_group('成形 [shaping]')
    group.add_argument('--mu-samples', dest='mu_samples', type=int, help='估计 μ 的随机平移数，0 表示跳过')
    group.add_argument('--n-starts', dest='n_starts', type=int, help='优化起点数')
    group.add_argument('--r-list', dest='r_list', type=int, nargs='+', help='多个 r 值')

    p = sub.add_parser('awgn', help='AWGN 信道误码率扫描')
    p.add_argument('--config', help='配置文件')
    _add_run_flags(p)
    _add_constellation_flags(p)
    group = p.add_argument_group('检测与网格 [detector] [grid] [baseline]')
    group.add_argument('--detector', nargs='+', help='检测器: alg2 / ml')
    group.add_argument('--eb-n0-db', dest='eb_n0_db', type=float, nargs='+', help='Eb/N0 网格 (dB)')
    group.add_argument('--min-bit-errors', dest='min_bit_errors', type=int, help='每个网格点的比特错误数下限')
    group.add_argument('--max-symbols', dest='max_symbols', type=int, help='每个网格点的符号数上限')
    group.add_argument('--qam-order', dest='qam_order', type=int, help='格雷 QAM 基准阶数')

    p = sub.add_parser('fiber', help='光纤传输误码率扫描 (功率 x 距离)')
    p.add_argument('--config', help='配置文件')
    _add_run_flags(p)
    _add_constellation_flags(p)
    group = p.add_argument_group('扫描 [sweep] [fiber] [baseline]')
    group.add_argument('--power-dbm', dest='power_dbm', type=float, nargs='+', help='发射功率 (dBm)')
    group.add_argument('--n-spans', dest='n_spans', type=int, nargs='+', help='跨段数')
    group.add_argument('--n-symbols', dest='n_symbols', type=int, help='每个单元的符号数')
    group.add_argument('--noise-loading-db', dest='noise_loading_db', type=float, help='ASE 噪声加载 (dB)')
    group.add_argument('--qam-order', dest='qam_order', type=int, help='双偏振 QAM 基准阶数')
    return parser


# ---------------------------------------------------------------------------
# 公共构造
# ---------------------------------------------------------------------------

def _lattice(section: ConstellationSection) -> LatticeSpec:
    try:
        family = LatticeFamily(section.family.lower())
    except ValueError:
        raise ConfigError(f"constellation.family: 不支持的格族 {section.family!r}")
    n = section.dimension or FIXED_DIMENSIONS.get(family, 0)
    if n == 0:
        raise ConfigError("constellation.dimension: cubic 格必须给出维数")
    try:
        return make_lattice(family, n)
    except ValueError as e:
        raise ConfigError(f"constellation.dimension: {e}")


def _constellation(section: ConstellationSection, r: Optional[int] = None) -> VoronoiConstellation:
    spec = _lattice(section)
    return build_constellation(spec, section.r if r is None else r, section.shift, shift_seed=section.shift_seed)


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------

def cmd_encode(config: ExperimentConfig) -> int:
    c, io = config.constellation, config.io
    vc = _constellation(c)
    n = vc.dimension
    if io.input_format == 'bits':
        digits = bits_to_digits_batch(read_bits(io.input_path, vc.bits_per_symbol), c.labeling, vc.r, n)
    else:
        indices = read_indices(io.input_path)
        digits = np.array([index_to_digits(K, vc.r, n) for K in indices], dtype=np.int64).reshape(-1, n)
    symbols = encode_batch(vc, digits)
    write_symbols(io.output_path, symbols)
    logger.info(f"✅ 编码完成: {vc.name}, {symbols.shape[0]} 个符号 -> {io.output_path}")
    return EXIT_OK


def cmd_decode(config: ExperimentConfig) -> int:
    c, io = config.constellation, config.io
    vc = _constellation(c)
    digits = decode_batch(vc, read_symbols(io.input_path, vc.dimension))
    if io.output_format == 'bits':
        write_bits(io.output_path, digits_to_bits_batch(digits, c.labeling, vc.r))
    else:
        write_indices(io.output_path, (digits_to_index(row, vc.r) for row in digits))
    logger.info(f"✅ 解码完成: {vc.name}, {digits.shape[0]} 个符号 -> {io.output_path}")
    return EXIT_OK


def _metrics_row(vc: VoronoiConstellation, report: MeritReport, eb_n0_db: Optional[float]) -> Dict[str, Any]:
    row = report.to_row()
    if eb_n0_db is None:
        return row
    n0 = n0_from_ebn0(eb_n0_db, vc.bits_per_symbol, vc.dimension)
    lower, upper = ser_bounds(vc, n0, report.tau_bar if report.tau_bar is not None else 0.0)
    row.update({
        'eb_n0_db': eb_n0_db,
        'snr_db': snr_from_ebn0(eb_n0_db, vc.bits_per_symbol, vc.dimension),
        'ser_lower': lower,
        'ser_upper': upper if report.tau_bar is not None else None,
        'ser_union': union_bound_ser(vc, n0) if vc.M <= MAX_UNION_BOUND else None,
    })
    return row


def cmd_metrics(config: ExperimentConfig, stream=None) -> int:
    c = config.constellation
    m = config.metrics or MetricsSection()
    spec = _lattice(c)
    if m.kissing_samples is not None:
        kissing = m.kissing_samples
    else:
        # Λ24 的 τ̄ 抽样代价高，默认跳过
        kissing = 0 if spec.family == LatticeFamily.LEECH24 else DEFAULT_KISSING_SAMPLES
    rows = []
    for r in (m.r_list or [c.r]):
        vc = _constellation(c, r)
        report = merit_report(vc, kissing, seed=c.shift_seed)
        rows.append(_metrics_row(vc, report, m.eb_n0_db))
    columns = list(MeritReport.model_fields)
    if m.eb_n0_db is not None:
        columns += METRICS_BOUND_COLUMNS
    write_rows(stream or sys.stdout, rows, columns)
    return EXIT_OK


def cmd_shift_opt(config: ExperimentConfig) -> int:
    run, c = config.run, config.constellation
    sh = config.shaping or ShapingSection()
    spec = _lattice(c)
    threads = resolve_threads(run.threads)
    r_values = sh.r_list or [c.r]
    cells = [(spec, r) for r in r_values]

    rows: List[Dict[str, Any]] = []
    for cell, r in enumerate(r_values):
        result = best_shift(spec, r, n_starts=sh.n_starts, seed=derive_seed(run.seed, cell),
                            max_iter=sh.max_iter, tol=sh.tol)
        rows.append({
            'family': spec.name, 'N': spec.dimension, 'r': r, 'M': r ** spec.dimension,
            'energy': result.energy, 'iterations': result.iterations,
            'converged': result.converged, 'exact': result.exact,
            'shift': to_physical(spec, result.a),
        })
        logger.info(f"📊 {spec.name} r={r}: E_s={result.energy:.6g}, 迭代 {result.iterations} 次")

    if sh.n_samples > 0:
        for row, estimate in zip(rows, mu_study(cells, sh.n_samples, run.seed, threads)):
            row.update({'mu': estimate.mu, 'mu_stderr': estimate.stderr,
                        'mean_energy': estimate.mean_energy, 'opt_energy': estimate.opt_energy})
            logger.info(f"📊 {spec.name} r={row['r']}: μ={estimate.mu:.4f} ± {estimate.stderr:.4f}")

    write_results(rows, run.output, SHIFT_COLUMNS)
    return EXIT_OK


def _awgn_curves(config: ExperimentConfig, threads: int) -> List[Tuple[AwgnConfig, Any]]:
    run, grid = config.run, config.grid
    common = dict(eb_n0_db=grid.eb_n0_db, min_bit_errors=grid.min_bit_errors, max_symbols=grid.max_symbols,
                  block_symbols=grid.block_symbols, seed=run.seed, threads=threads)
    curves = []
    if config.constellation is not None:
        c = config.constellation
        det = config.detector or DetectorSection()
        vc = _constellation(c)
        # 所有标号/检测器组合共用同一个星座
        for labeling in (det.labelings or [c.labeling]):
            for kind in det.kinds:
                cfg = AwgnConfig(family=c.family, dimension=vc.dimension, r=vc.r, labeling=labeling,
                                 detector=kind, shift=c.shift, shift_seed=c.shift_seed, **common)
                curves.append((cfg, VcModem(vc, labeling, kind)))
    if config.baseline is not None and config.baseline.qam_order:
        cfg = AwgnConfig(family='qam', qam_order=config.baseline.qam_order, **common)
        curves.append((cfg, build_modem(cfg)))
    if not curves:
        raise ConfigError("constellation.family: 需要 [constellation] 节或 [baseline] qam_order")
    return curves


def cmd_awgn(config: ExperimentConfig) -> int:
    threads = resolve_threads(config.run.threads)
    rows: List[Dict[str, Any]] = []
    for cfg, modem in _awgn_curves(config, threads):
        rows.extend(run_awgn(cfg, modem).to_rows())
    write_results(rows, config.run.output, AWGN_COLUMNS)
    return EXIT_OK


def _signal_params(section: Optional[SignalSection], n_wavelengths: int, n_symbols: int) -> SignalParams:
    values = (section or SignalSection()).model_dump()
    values['n_wavelengths'] = values['n_wavelengths'] or n_wavelengths
    return SignalParams(n_symbols=n_symbols, **values)


def cmd_fiber(config: ExperimentConfig) -> int:
    run, sweep = config.run, config.sweep
    threads = resolve_threads(run.threads)

    vc_modem = None
    if config.constellation is not None:
        vc_modem = VcModem(_constellation(config.constellation), config.constellation.labeling, Detector.ALG2)
    n_wavelengths = vc_modem.dimension // 4 if vc_modem is not None else 1
    signal = _signal_params(config.signal, n_wavelengths, sweep.n_symbols)
    fiber = FiberConfig(**(config.fiber or FiberSection()).model_dump())

    modems = [vc_modem] if vc_modem is not None else []
    if config.baseline is not None and config.baseline.qam_order:
        modems.append(qam_baseline(config.baseline.qam_order, signal))
    if not modems:
        raise ConfigError("constellation.family: 需要 [constellation] 节或 [baseline] qam_order")

    fiber_sweep = FiberSweep(power_dbm=sweep.power_dbm, n_spans=sweep.n_spans, seed=run.seed,
                             threads=threads, fft_workers=sweep.fft_workers)
    rows: List[Dict[str, Any]] = []
    optimum: List[Dict[str, Any]] = []
    services = [FiberExperimentService(modem, signal, fiber, fiber_sweep) for modem in modems]
    for service in services:
        result = service.run()
        rows.extend(row.model_dump() for row in result)
        optimum.extend(optimum_trace(result))

    write_results(rows, run.output, FIBER_COLUMNS)
    write_results(optimum, output_sibling(run.output, '_optimum'), OPTIMUM_COLUMNS)

    waveform_path = config.output.waveform_path if config.output is not None else None
    if waveform_path:
        frame = services[0].build_frame(sweep.power_dbm[0])
        write_symbols(waveform_path, frame.interleaved())
        logger.info(f"📝 发射波形已写出: {waveform_path} ({frame.params.n_samples} 个采样)")
    return EXIT_OK


COMMANDS = {
    'encode': cmd_encode,
    'decode': cmd_decode,
    'metrics': cmd_metrics,
    'shift-opt': cmd_shift_opt,
    'awgn': cmd_awgn,
    'fiber': cmd_fiber,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ('command', 'config')}

    start = time.time()
    try:
        config = load_config(args.command, args.config, flags)
        code = COMMANDS[args.command](config)
    except NUMERICAL_ERRORS as e:
        logger.error(f"❌ 数值计算失败: {e}")
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, OSError) as e:
        logger.error(f"❌ {args.command} 失败: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"❌ {args.command} 意外失败: {e}")
        return EXIT_NUMERICAL
    finally:
        constellation_cache.clear_and_report()
    logger.info(f"🎯 {args.command} 完成，耗时 {time.time() - start:.1f}s")
    return code


if __name__ == '__main__':
    sys.exit(main())
