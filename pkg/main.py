"""
Entry script for the determinism audit toolkit.
Workflow: experimental design (scenario) -> simulator settings -> external
settings (load, priority, pinning) -> execution (repeats) -> analysis (report).

    python main.py selftest
    python main.py run --scenario test4 --n 100 --inject collision_impulse_jitter=0.01
"""
import sys
from pathlib import Path

# Ensure the simvar package is importable when run from a checkout
ROOT_DIR = Path(__file__).resolve().parent
sys.path.append(str(ROOT_DIR))

from simvar.cli import main

if __name__ == "__main__":
    sys.exit(main())
