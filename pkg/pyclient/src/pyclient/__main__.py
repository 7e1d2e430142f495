"""Module entry point: python -m pyclient SPEC.json"""

import sys

from .serve import main

if __name__ == "__main__":
    sys.exit(main())
