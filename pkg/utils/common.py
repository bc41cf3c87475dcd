"""
公共定义模块 - 单一数据源
异常类型、随机数流、数值格式化、JSON/CSV 写出集中在此
所有 utils 模块和 tsinfo.py 统一 import
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd

from config import (
    CSV_FLOAT_FORMAT, EXIT_CONFIG, EXIT_GUARD, EXIT_PROPERTY, EXIT_UNEXPECTED,
)


# ============== Errors ==============
# 每个异常都带 module / operation，消息格式: "<module>.<operation>: <message>"
# CLI 根据异常类型映射退出码 (见 config.EXIT_*)


class TsInfoError(Exception):
    """Base class for every error raised by the library."""

    exit_code = EXIT_UNEXPECTED

    def __init__(self, module, operation, message):
        self.module = module
        self.operation = operation
        self.detail = message
        super().__init__(f"{module}.{operation}: {message}")


class ValidationError(TsInfoError, ValueError):
    """Invalid input or configuration (exit 2)."""

    exit_code = EXIT_CONFIG


class GuardError(TsInfoError):
    """A numeric guard (enumeration cap, search cap) was exceeded (exit 3)."""

    exit_code = EXIT_GUARD


class PropertyViolation(TsInfoError):
    """A verification suite found counterexamples (exit 4)."""

    exit_code = EXIT_PROPERTY


class DomainMismatchError(ValidationError):
    pass


class SequenceTooShortError(ValidationError):
    pass


class ReducibleChainError(ValidationError):
    """Chain has more than one closed communicating class."""

    def __init__(self, module, operation, classes):
        self.classes = [list(c) for c in classes]
        super().__init__(
            module, operation,
            f"reducible chain, closed classes {self.classes}",
        )


class AdmissibilityError(ReducibleChainError):
    pass


class NotWeaklyConnectedError(ValidationError):
    pass


class UnattainableError(GuardError):
    pass


# ============== Random Streams ==============

def make_rng(seed, stream=0):
    """
    Counter-based generator keyed by (seed, stream).

    同一个 seed 下不同 stream 互不相关，并行实验各自持有自己的 stream。
    """
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValidationError("common", "make_rng", f"seed {seed} is not a 64-bit unsigned integer")
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


# ============== Formatting ==============

def format_number(value):
    """6 significant digits, the same rendering CSV cells get."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return CSV_FLOAT_FORMAT % float(value)


def _to_builtin(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dump_json(data, path):
    """写 JSON (排序 key, 末尾换行), 返回路径"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(data, sort_keys=True, indent=2, default=_to_builtin)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def load_json(path, module="common", operation="load_json"):
    """读 JSON, 文件缺失或格式错误统一报 ValidationError"""
    path = Path(path)
    if not path.exists():
        raise ValidationError(module, operation, f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValidationError(module, operation, f"invalid JSON in {path}: {e}") from e


def _frame(rows, columns=None, dtypes=None):
    df = pd.DataFrame(rows, columns=columns)
    # 从原始值建列，避免先经过 float64
    for column, dtype in (dtypes or {}).items():
        df[column] = pd.array([row.get(column) for row in rows], dtype=dtype)
    return df


def write_csv(rows, path, columns=None, dtypes=None):
    """
    Write a list of dict rows as CSV.

    Floats use 6 significant digits; line endings are always "\\n".
    dtypes: optional column casts, e.g. {"n": "Int64"} keeps integers exact
    next to empty cells.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = _frame(rows, columns, dtypes)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def csv_text(rows, columns=None, dtypes=None):
    """Same rendering as write_csv, returned as a string (for stdout)."""
    df = _frame(rows, columns, dtypes)
    return df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
