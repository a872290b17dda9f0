#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实验配置管理器
分节 key = value 文本 (configparser) -> 各节 pydantic 模型 (未知键报错)，
命令行参数按映射表覆盖文件中的键
"""
import os
import logging
import configparser
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """配置文件或命令行参数不合法，消息中给出 section.key"""


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [v.strip() for v in value.replace(';', ',').split(',') if v.strip()]
    return value


IntList = Annotated[List[int], BeforeValidator(_split_list)]
FloatList = Annotated[List[float], BeforeValidator(_split_list)]
StrList = Annotated[List[str], BeforeValidator(_split_list)]


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class ConstellationSection(_Section):
    family: str
    dimension: int = Field(default=0, ge=0)
    r: int = 2
    labeling: str = 'quasi-gray'
    shift: str = 'auto'
    shift_seed: int = Field(default=0, ge=0)


class IoSection(_Section):
    input_path: str
    output_path: str
    input_format: str = 'bits'
    output_format: str = 'bits'

    @field_validator('input_format', 'output_format')
    @classmethod
    def _check_format(cls, v: str) -> str:
        if v not in ('bits', 'index'):
            raise ValueError("只能是 bits 或 index")
        return v


class RunSection(_Section):
    seed: int = Field(ge=0)
    output: str = 'results.csv'
    threads: Optional[int] = Field(default=None, ge=1)


class MetricsSection(_Section):
    kissing_samples: Optional[int] = Field(default=None, ge=0)
    eb_n0_db: Optional[float] = None
    r_list: Optional[IntList] = None


class ShapingSection(_Section):
    n_samples: int = Field(default=0, ge=0)
    max_iter: int = Field(default=50, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    n_starts: int = Field(default=1, ge=1)
    r_list: Optional[IntList] = None


class DetectorSection(_Section):
    kinds: StrList = ["alg2"]
    labelings: Optional[StrList] = None


class GridSection(_Section):
    eb_n0_db: FloatList = Field(min_length=1)
    min_bit_errors: int = Field(default=100, ge=1)
    max_symbols: int = Field(default=10 ** 8, ge=1)
    block_symbols: int = Field(default=10000, ge=1)


class BaselineSection(_Section):
    qam_order: Optional[int] = None


class SignalSection(_Section):
    symbol_rate_gbaud: float = 28.0
    rrc_rolloff: float = 0.2
    oversampling: int = 32
    wdm_spacing_ghz: float = 50.0
    n_wavelengths: Optional[int] = Field(default=None, ge=1)
    pilot_overhead: float = 0.0156


class FiberSection(_Section):
    gamma_nl_per_w_km: float = 1.3
    dispersion_ps_nm_km: float = 17.0
    attenuation_db_km: float = 0.2
    span_length_km: float = 80.0
    noise_figure_db: float = 5.0
    ssfm_step_km: float = 0.5
    wavelength_nm: float = 1550.0
    noise_loading_db: float = 0.0
    ase_enabled: bool = True


class SweepSection(_Section):
    power_dbm: FloatList = Field(min_length=1)
    n_spans: IntList = Field(min_length=1)
    n_symbols: int = Field(default=2 ** 14, ge=16)
    fft_workers: int = Field(default=1, ge=1)


class OutputSection(_Section):
    waveform_path: Optional[str] = None


SECTION_MODELS: Dict[str, Type[_Section]] = {
    'constellation': ConstellationSection,
    'io': IoSection,
    'run': RunSection,
    'metrics': MetricsSection,
    'shaping': ShapingSection,
    'detector': DetectorSection,
    'grid': GridSection,
    'baseline': BaselineSection,
    'signal': SignalSection,
    'fiber': FiberSection,
    'sweep': SweepSection,
    'output': OutputSection,
}

# 每个子命令: (必需的节, 可选的节)
COMMAND_SECTIONS: Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...]]] = {
    'encode': (('constellation', 'io'), ()),
    'decode': (('constellation', 'io'), ()),
    'metrics': (('constellation',), ('metrics',)),
    'shift-opt': (('run', 'constellation'), ('shaping',)),
    'awgn': (('run', 'grid'), ('constellation', 'detector', 'baseline')),
    'fiber': (('run', 'sweep'), ('constellation', 'baseline', 'signal', 'fiber', 'output')),
}

# 命令行参数 -> (节, 键)
FLAG_MAP: Dict[str, Tuple[str, str]] = {
    'lattice': ('constellation', 'family'),
    'dimension': ('constellation', 'dimension'),
    'r': ('constellation', 'r'),
    'labeling': ('constellation', 'labeling'),
    'shift': ('constellation', 'shift'),
    'shift_seed': ('constellation', 'shift_seed'),
    'input': ('io', 'input_path'),
    'output_path': ('io', 'output_path'),
    'input_format': ('io', 'input_format'),
    'output_format': ('io', 'output_format'),
    'seed': ('run', 'seed'),
    'output': ('run', 'output'),
    'threads': ('run', 'threads'),
    'kissing_samples': ('metrics', 'kissing_samples'),
    'r_list': ('metrics', 'r_list'),
    'mu_samples': ('shaping', 'n_samples'),
    'n_starts': ('shaping', 'n_starts'),
    'detector': ('detector', 'kinds'),
    'eb_n0_db': ('grid', 'eb_n0_db'),
    'min_bit_errors': ('grid', 'min_bit_errors'),
    'max_symbols': ('grid', 'max_symbols'),
    'qam_order': ('baseline', 'qam_order'),
    'power_dbm': ('sweep', 'power_dbm'),
    'n_spans': ('sweep', 'n_spans'),
    'n_symbols': ('sweep', 'n_symbols'),
    'noise_loading_db': ('fiber', 'noise_loading_db'),
}

# metrics 的 --eb-n0-db 属于 [metrics] 节，shift-opt 的 --r-list 属于 [shaping] 节
COMMAND_FLAG_OVERRIDES: Dict[str, Dict[str, Tuple[str, str]]] = {
    'metrics': {'eb_n0_db': ('metrics', 'eb_n0_db')},
    'shift-opt': {'r_list': ('shaping', 'r_list')},
}


class ExperimentConfig(BaseModel):
    """按子命令解析后的配置，未出现的可选节为 None"""
    command: str
    constellation: Optional[ConstellationSection] = None
    io: Optional[IoSection] = None
    run: Optional[RunSection] = None
    metrics: Optional[MetricsSection] = None
    shaping: Optional[ShapingSection] = None
    detector: Optional[DetectorSection] = None
    grid: Optional[GridSection] = None
    baseline: Optional[BaselineSection] = None
    signal: Optional[SignalSection] = None
    fiber: Optional[FiberSection] = None
    sweep: Optional[SweepSection] = None
    output: Optional[OutputSection] = None


def _read_file(path: str) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser(inline_comment_prefixes=('#', ';'), interpolation=None)
    parser.optionxform = str
    if not os.path.exists(path):
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            parser.read_file(f, source=path)
    except configparser.Error as e:
        raise ConfigError(f"配置文件格式错误 {path}: {e}")
    return {name: dict(parser.items(name)) for name in parser.sections()}


def _validation_message(section: str, error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = '.'.join(str(v) for v in item['loc'] if not isinstance(v, int))
        key = f"{section}.{loc}" if loc else section
        parts.append(f"{key}: {item['msg']}")
    return '; '.join(parts)


def load_config(command: str, path: Optional[str] = None,
                flags: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    读取配置文件并应用命令行覆盖

    Raises:
        ConfigError: 未知节/键、缺少必需节或键、值非法
    """
    if command not in COMMAND_SECTIONS:
        raise ConfigError(f"未知子命令: {command}")
    required, optional = COMMAND_SECTIONS[command]
    allowed = set(required) | set(optional)

    raw = _read_file(path) if path else {}
    for section in raw:
        if section not in allowed:
            raise ConfigError(f"{section}: 子命令 {command} 不接受该节")

    mapping = dict(FLAG_MAP)
    mapping.update(COMMAND_FLAG_OVERRIDES.get(command, {}))
    for name, value in (flags or {}).items():
        if value is None or name not in mapping:
            continue
        section, key = mapping[name]
        if section not in allowed:
            continue
        if isinstance(value, (list, tuple)):
            value = ','.join(str(v) for v in value)
        raw.setdefault(section, {})[key] = value

    sections: Dict[str, Any] = {}
    for section in allowed:
        if section not in raw:
            if section in required:
                model = SECTION_MODELS[section]
                missing = [k for k, f in model.model_fields.items() if f.is_required()]
                raise ConfigError(f"{section}.{missing[0] if missing else ''}: 缺少必需的节 [{section}]")
            continue
        try:
            sections[section] = SECTION_MODELS[section](**raw[section])
        except ValidationError as e:
            raise ConfigError(_validation_message(section, e))

    logger.debug(f"🔧 配置已加载: {command} {path or '(仅命令行参数)'}")
    return ExperimentConfig(command=command, **sections)


def resolve_threads(requested: Optional[int] = None) -> int:
    """线程数: 配置值或 CPU 数，受环境变量 VC_THREADS 限制"""
    threads = requested or os.cpu_count() or 1
    cap = os.getenv('VC_THREADS')
    if cap:
        try:
            threads = min(threads, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"VC_THREADS: 不是整数: {cap!r}")
    return threads


def output_sibling(path: str, suffix: str) -> str:
    """results.csv -> results_optimum.csv"""
    p = Path(path)
    return str(p.with_name(f"{p.stem}{suffix}{p.suffix or '.csv'}"))
