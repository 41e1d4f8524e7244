"""Specification-first program repair: infer a Gherkin spec from a failing
test, verify it against buggy and fixed code, then use it to guide a patch."""

__version__ = "0.1.0"
