#!/usr/bin/env python3
"""
VLD Navigation - Main Entry Point

Runs the vldnav command line from a source checkout without installing the
package.
"""

import sys
from pathlib import Path

# Set up directories for imports
src_dir = Path(__file__).resolve().parent / "src"
if str(src_dir) not in sys.path:
    sys.path.insert(0, str(src_dir))

from vldnav.cli import main  # noqa: E402


if __name__ == "__main__":
    sys.exit(main())
