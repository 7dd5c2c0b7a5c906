import sys

from src.cli import main

if __name__ == "__main__":
    # e.g. python run_scenario.py hilbert --config scenarios/hilbert.cfg --out-dir output/hilbert
    sys.exit(main())
