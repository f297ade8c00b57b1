import os
import sys

# the repository root holds the core/, utils/ and cli/ packages
ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)
