#!/usr/bin/env python3
"""
Fuzzy-manifold simulator - Main Entry Point
Forwards to the command-line interface, e.g. ``python main.py demo winding``.
"""

import sys

from fuzzmech.__main__ import main

if __name__ == "__main__":
    sys.exit(main())
