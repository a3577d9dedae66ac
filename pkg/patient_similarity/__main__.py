"""
Main entry point for the patient_similarity package.

Usage:
    python -m patient_similarity gen --out data
    python -m patient_similarity dist --input data/records.csv --metric ted
    python -m patient_similarity --help
"""

import sys

from .cli import main


if __name__ == '__main__':
    sys.exit(main())
