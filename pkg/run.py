#!/usr/bin/env python3
"""
Weak Gauge Lab - Launcher Script

This script runs Weak Gauge Lab from a source checkout with the src directory
on the Python path.
"""

import sys
from pathlib import Path

src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

from weak_gauge_lab.main import main

if __name__ == "__main__":
    sys.exit(main())
