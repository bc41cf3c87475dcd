"""
运行记录数据库 (run ledger)
每次 CLI 调用写一行: 子命令、配置摘要、状态、产物列表

只记录操作历史，不参与任何实验产物的计算。
"""
import json
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional

import config
from utils.logger import get_logger

logger = get_logger("tsinfo.db")


def _db_path(db_path=None):
    # 调用时再读 config，测试里 reload(config) 后立即生效
    return Path(db_path) if db_path else Path(config.DATABASE_PATH)


def init_database(db_path=None):
    """初始化数据库，创建表结构"""
    path = _db_path(db_path)
    path.parent.mkdir(parents=True, exist_ok=True)

    conn = sqlite3.connect(path)
    cursor = conn.cursor()

    cursor.execute("""
        CREATE TABLE IF NOT EXISTS run_log (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_time TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
            subcommand TEXT,
            config_digest TEXT,
            status TEXT,
            artifacts TEXT,
            message TEXT
        )
    """)
    cursor.execute("CREATE INDEX IF NOT EXISTS idx_subcommand ON run_log(subcommand)")
    cursor.execute("CREATE INDEX IF NOT EXISTS idx_status ON run_log(status)")

    conn.commit()
    conn.close()
    logger.debug(f"Run ledger initialized: {path}")


@contextmanager
def get_connection(db_path=None):
    """获取数据库连接的上下文管理器"""
    conn = sqlite3.connect(_db_path(db_path))
    conn.row_factory = sqlite3.Row  # 返回 dict-like 对象
    try:
        yield conn
    finally:
        conn.close()


def log_run(subcommand: str, config_digest: str, status: str,
            artifacts: Optional[List[str]] = None, message: str = "", db_path=None):
    """记录一次运行"""
    init_database(db_path)
    with get_connection(db_path) as conn:
        conn.execute(
            "INSERT INTO run_log (subcommand, config_digest, status, artifacts, message) VALUES (?, ?, ?, ?, ?)",
            (subcommand, config_digest, status, json.dumps(artifacts or []), message),
        )
        conn.commit()


def _row(row):
    out = dict(row)
    out["artifacts"] = json.loads(out["artifacts"] or "[]")
    return out


def get_last_run(subcommand: Optional[str] = None, db_path=None) -> Optional[Dict[str, Any]]:
    """获取最后一次运行记录"""
    with get_connection(db_path) as conn:
        if subcommand:
            cursor = conn.execute(
                "SELECT * FROM run_log WHERE subcommand = ? ORDER BY id DESC LIMIT 1", (subcommand,)
            )
        else:
            cursor = conn.execute("SELECT * FROM run_log ORDER BY id DESC LIMIT 1")
        row = cursor.fetchone()
        return _row(row) if row else None


def get_runs(status: Optional[str] = None, limit: int = 100, db_path=None) -> List[Dict[str, Any]]:
    """按状态筛选运行记录 (新的在前)"""
    with get_connection(db_path) as conn:
        if status:
            cursor = conn.execute(
                "SELECT * FROM run_log WHERE status = ? ORDER BY id DESC LIMIT ?", (status, limit)
            )
        else:
            cursor = conn.execute("SELECT * FROM run_log ORDER BY id DESC LIMIT ?", (limit,))
        return [_row(row) for row in cursor.fetchall()]


def get_statistics(db_path=None) -> Dict[str, Any]:
    """按子命令 / 状态统计运行次数"""
    with get_connection(db_path) as conn:
        stats = {"total": conn.execute("SELECT COUNT(*) FROM run_log").fetchone()[0]}
        cursor = conn.execute("SELECT status, COUNT(*) FROM run_log GROUP BY status")
        stats["by_status"] = {row[0]: row[1] for row in cursor.fetchall()}
        cursor = conn.execute(
            "SELECT subcommand, COUNT(*) AS count FROM run_log GROUP BY subcommand ORDER BY count DESC"
        )
        stats["by_subcommand"] = {row[0]: row[1] for row in cursor.fetchall()}
        return stats


if __name__ == "__main__":
    init_database()
    print(f"数据库路径: {config.DATABASE_PATH}")
    print(f"运行次数: {get_statistics()['total']}")
