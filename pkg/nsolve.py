#!/usr/bin/env python3
# nsolve.py
# Command-line entry point
from cli import main


if __name__ == "__main__":
    raise SystemExit(main())
