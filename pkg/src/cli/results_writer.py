#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
CSV 结果写出
表头 + 按网格顺序的行；浮点数按完整精度输出，先写临时文件再原子替换
"""
import os
import csv
import math
import logging
import tempfile
from typing import Any, Dict, Iterable, Sequence, TextIO

import numpy as np

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return repr(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return ' '.join(format_value(v) for v in value)
    return str(getattr(value, 'value', value))


def write_rows(stream: TextIO, rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> int:
    """写到已打开的文本流，返回行数"""
    writer = csv.writer(stream, lineterminator='\r\n')
    writer.writerow(columns)
    count = 0
    for row in rows:
        writer.writerow([format_value(row.get(col)) for col in columns])
        count += 1
    return count


def write_results(rows: Iterable[Dict[str, Any]], path: str, columns: Sequence[str]) -> str:
    """
    原子写出 CSV，返回绝对路径

    Raises:
        OSError: 目录不可写等，消息中带目标路径
    """
    full_path = os.path.abspath(path)
    dir_path = os.path.dirname(full_path)
    tmp_path = None
    try:
        if dir_path:
            os.makedirs(dir_path, exist_ok=True)
        with tempfile.NamedTemporaryFile('w', delete=False, dir=dir_path, encoding='utf-8',
                                         newline='', suffix='.csv.tmp') as f:
            tmp_path = f.name
            count = write_rows(f, rows, columns)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, full_path)
        tmp_path = None
    except OSError as e:
        raise OSError(f"写出结果失败 {full_path}: {e}") from e
    finally:
        if tmp_path is not None and os.path.exists(tmp_path):
            os.remove(tmp_path)
    logger.info(f"📝 结果已写出: {full_path} ({count} 行)")
    return full_path
