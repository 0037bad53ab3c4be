"""Entry point for the qcurv CLI."""

import sys

from src.qcurv.cli import main

if __name__ == "__main__":
    sys.exit(main())
