"""Differential probe: call one function with JSON arguments and print the result."""
import importlib
import json
import sys

sys.path.insert(0, "src")
module, func, args = sys.argv[1], sys.argv[2], json.loads(sys.argv[3])
try:
    print(repr(getattr(importlib.import_module(module), func)(*args)))
except Exception as exc:
    print("raised", type(exc).__name__)
