#!/usr/bin/env python3
"""
tsinfo - 时间序列信息量驱动的表示函数选择

用法:
    python tsinfo.py gen --config experiments/ideal.json --out out/ideal
    python tsinfo.py oracle --chain out/ideal/chain.json --representation out/ideal/representation.json
    python tsinfo.py verify --suite ideal-ci --seed 0
"""

import sys
from pathlib import Path

# Add project root to path
PROJECT_ROOT = Path(__file__).parent
sys.path.insert(0, str(PROJECT_ROOT))

from utils.cli import main

if __name__ == "__main__":
    sys.exit(main())
