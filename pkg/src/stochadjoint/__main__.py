"""Main module entry point for python -m stochadjoint."""

import sys

from stochadjoint.main import main

if __name__ == "__main__":
    sys.exit(main())
