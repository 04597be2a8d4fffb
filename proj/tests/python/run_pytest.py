"""Runs the Python smoke tests; exit 77 (skipped) when the module is not installed."""
import importlib.util
import sys

if importlib.util.find_spec("accsev") is None or importlib.util.find_spec("pytest") is None:
    print("accsev Python module not installed (pip install --no-build-isolation .); skipping")
    sys.exit(77)

import pytest

sys.exit(pytest.main(["-q", "-p", "no:cacheprovider", sys.argv[1]]))
