"""Allows `python -m simvar <subcommand>`."""
import sys

from simvar.cli import main

if __name__ == "__main__":
    sys.exit(main())
