"""
项目配置文件
所有默认值集中在这里，环境变量可以覆盖路径类配置：
  1. 本地开发: fallback 默认路径 (./data, ./logs, ./out)
  2. 批量实验: 环境变量指向共享目录

数值行为 (guard, 容差, 随机种子) 不读环境变量，保证结果可复现。
"""
import os
from pathlib import Path

# ============== 路径配置 ==============
PROJECT_ROOT = Path(__file__).parent
DATA_DIR = Path(os.getenv("DATA_DIR", str(PROJECT_ROOT / "data")))
LOGS_DIR = Path(os.getenv("LOGS_DIR", str(PROJECT_ROOT / "logs")))
OUT_DIR = Path(os.getenv("OUT_DIR", str(PROJECT_ROOT / "out")))

# 运行记录数据库 (run ledger, 不属于实验产物)
DATABASE_PATH = Path(os.getenv("DATABASE_PATH", str(DATA_DIR / "runs.db")))

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

# ============== 数值默认值 ==============
# Selection equivalence tolerance, bits
DEFAULT_TAU = 1e-3

# Oracle conditional-independence tolerance
DEFAULT_CI_TOL = 1e-9

# |X|^(k+1) cap for exact block enumeration
ENUMERATION_GUARD = 10**8

# |Y|^|X| cap for exhaustive lookup-table families
FAMILY_GUARD = 10**6

# k_n schedule keeps |Y|^(k+1) <= n / SUPPORT_GUARD_FACTOR
SUPPORT_GUARD_FACTOR = 10

# stationary_distribution switches to power iteration above this many states
POWER_ITERATION_THRESHOLD = 2000

# required_n gives up beyond this sample size
REQUIRED_N_CAP = 10**12

# 候选函数并行评估的线程数 (1 = 顺序执行)
DEFAULT_WORKERS = 1

# ============== CLI ==============
SUBCOMMANDS = [
    "gen",
    "sample",
    "estimate",
    "select",
    "select-active",
    "oracle",
    "bound",
    "verify",
]

# 退出码
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_PROPERTY = 4

# CSV 数值格式: 6 位有效数字
CSV_FLOAT_FORMAT = "%.6g"
