import sys

from fpe_toolkit.cli_harness import main

if __name__ == "__main__":
    sys.exit(main())
