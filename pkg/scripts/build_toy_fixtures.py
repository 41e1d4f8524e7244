#!/usr/bin/env python3
"""Regenerate the bundled toy corpus, reference specs and scripted agent responses.

    python3 scripts/build_toy_fixtures.py [--out fixtures]

Everything under fixtures/toy-corpus, fixtures/toy-specs and
fixtures/toy-scripts is produced here; edit this file, not the outputs.
"""

from __future__ import annotations

import argparse
import json
import re
import shutil
import textwrap
from pathlib import Path

TEST_CMD = "{python} -B -m unittest discover -s tests -t ."
PROBE_CMD = "{python} -B {corpus}/probes/call.py %s %s {input}"

TESTS_INIT = """\
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))
"""

PROBE_SCRIPT = """\
\"\"\"Differential probe: call one function with JSON arguments and print the result.\"\"\"
import importlib
import json
import sys

sys.path.insert(0, "src")
module, func, args = sys.argv[1], sys.argv[2], json.loads(sys.argv[3])
try:
    print(repr(getattr(importlib.import_module(module), func)(*args)))
except Exception as exc:
    print("raised", type(exc).__name__)
"""

STEPS_SCRIPT = """\
\"\"\"Step glue for toy specs: import / call / expect, with state in .spec_anvil/state.json.\"\"\"
import importlib
import json
import pathlib
import sys

sys.path.insert(0, "src")
STATE = pathlib.Path(".spec_anvil/state.json")


def main(argv):
    op = argv[0]
    if op == "import":
        importlib.import_module(argv[1])
        return 0
    if op == "call":
        module, func, args = argv[1], argv[2], json.loads(argv[3])
        try:
            state = {"value": getattr(importlib.import_module(module), func)(*args)}
        except Exception as exc:
            state = {"error": type(exc).__name__}
        STATE.parent.mkdir(exist_ok=True)
        STATE.write_text(json.dumps(state))
        return 0
    if op == "expect":
        state = json.loads(STATE.read_text())
        expected = json.loads(argv[1])
        if "value" in state and state["value"] == expected:
            return 0
        print("expected:<%s> but was:<%s>" % (expected, state.get("value", state.get("error"))))
        return 1
    print("unknown step op", op)
    return 2


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
"""

STEP_BINDINGS = {
    "bindings": [
        {"pattern": r'^the module "([\w.]+)" is available$',
         "command": "{python} -B .spec_anvil/steps.py import {1}", "role": "Context"},
        {"pattern": r'^I call "(\w+)" from "([\w.]+)" with (.+)$',
         "command": "{python} -B .spec_anvil/steps.py call {2} {1} {3}", "role": "Action"},
        {"pattern": r"^the result should be (.+)$",
         "command": "{python} -B .spec_anvil/steps.py expect {1}", "timeout_s": 30, "role": "Assertion"},
    ],
    "env": {},
    "files": {".spec_anvil/steps.py": STEPS_SCRIPT},
}

# Bindings that cannot bind any Then step (used for the harness-failure fixture).
BROKEN_BINDINGS = {
    "bindings": STEP_BINDINGS["bindings"][:2],
    "env": {},
    "files": {".spec_anvil/steps.py": STEPS_SCRIPT},
}


def d(s: str) -> str:
    return textwrap.dedent(s).lstrip("\n")


def scenario(title: str, module: str, func: str, args: str, result: str) -> str:
    return (
        f"  Scenario: {title}\n"
        f'    Given the module "{module}" is available\n'
        f'    When I call "{func}" from "{module}" with {args}\n'
        f"    Then the result should be {result}\n"
    )


def feature(title: str, description: str, *scenarios: str) -> str:
    return f"Feature: {title}\n  {description}\n\n" + "\n".join(scenarios)


DEFECTS = []


def defect(**kw):
    DEFECTS.append(kw)


# --- calc ------------------------------------------------------------------

defect(
    id="calc-1", project="calc", module="calc.stats", path="src/calc/stats.py", func="median",
    buggy=d('''
        """Descriptive statistics."""


        def mean(values):
            return sum(values) / len(values)


        def median(values):
            ordered = list(values)
            n = len(ordered)
            mid = n // 2
            if n % 2:
                return ordered[mid]
            return (ordered[mid - 1] + ordered[mid]) / 2
    '''),
    fixed_from=("ordered = list(values)", "ordered = sorted(values)"),
    test_name="test_stats", test_class="StatsTest",
    tests=d('''
        import unittest

        from calc.stats import mean, median


        class StatsTest(unittest.TestCase):
            def test_mean(self):
                self.assertEqual(mean([1, 2, 3]), 2)

            def test_median_sorted(self):
                self.assertEqual(median([1, 2, 3]), 2)

            def test_median_unsorted(self):
                got = median([3, 1, 2])
                self.assertEqual(got, 2, "expected:<2> but was:<%s>" % got)
    '''),
    failing=["test_median_unsorted"],
    probes=["[[3, 1, 2]]", "[[4, 1, 3, 2]]", "[[5]]", "[[9, 7, 8, 1]]"],
    spec=feature("Median of unordered data",
                 "median must not depend on the order of its input.",
                 scenario("Unsorted input", "calc.stats", "median", "[[3, 1, 2]]", "2")),
)

defect(
    id="calc-2", project="calc", module="calc.interval", path="src/calc/interval.py", func="clamp",
    buggy=d('''
        """Closed-interval helpers."""


        def clamp(x, lo, hi):
            if x < lo:
                return lo
            if x > hi:
                return lo
            return x
    '''),
    fixed_from=("    if x > hi:\n        return lo", "    if x > hi:\n        return hi"),
    test_name="test_interval", test_class="IntervalTest",
    tests=d('''
        import unittest

        from calc.interval import clamp


        class IntervalTest(unittest.TestCase):
            def test_inside(self):
                self.assertEqual(clamp(5, 0, 10), 5)

            def test_below(self):
                self.assertEqual(clamp(-3, 0, 10), 0)

            def test_above(self):
                got = clamp(15, 0, 10)
                self.assertEqual(got, 10, "expected:<10> but was:<%s>" % got)
    '''),
    failing=["test_above"],
    probes=["[15, 0, 10]", "[-1, 0, 10]", "[3, 0, 10]", "[11, 2, 11]"],
    spec=feature("Clamping above the interval",
                 "Values above the interval are pulled down to the upper bound.",
                 scenario("Value above the upper bound", "calc.interval", "clamp", "[15, 0, 10]", "10")),
)

defect(
    id="calc-3", project="calc", module="calc.mathx", path="src/calc/mathx.py", func="gcd",
    buggy=d('''
        """Integer helpers."""


        def gcd(a, b):
            a, b = abs(a), abs(b)
            while b:
                a, b = b, a % b
            return b
    '''),
    fixed_from=("    return b\n", "    return a\n"),
    test_name="test_mathx", test_class="MathxTest",
    tests=d('''
        import unittest

        from calc.mathx import gcd


        class MathxTest(unittest.TestCase):
            def test_zero(self):
                self.assertEqual(gcd(0, 0), 0)

            def test_common_divisor(self):
                got = gcd(12, 18)
                self.assertEqual(got, 6, "expected:<6> but was:<%s>" % got)
    '''),
    failing=["test_common_divisor"],
    probes=["[12, 18]", "[-4, 6]", "[7, 0]", "[0, 9]"],
    spec=feature("Greatest common divisor",
                 "gcd returns the largest integer dividing both arguments.",
                 scenario("Two composite numbers", "calc.mathx", "gcd", "[12, 18]", "6")),
)

# Overfitting trap: dropping the comparison passes the failing test but not the probes.
CALC4_TRAP = d('''
    """Running aggregates over a series."""


    def running_max(values):
        out = []
        cur = None
        for v in values:
            cur = v
            out.append(cur)
        return out
''')

defect(
    id="calc-4", project="calc", module="calc.series", path="src/calc/series.py", func="running_max",
    buggy=d('''
        """Running aggregates over a series."""


        def running_max(values):
            out = []
            cur = None
            for v in values:
                if cur is None or v < cur:
                    cur = v
                out.append(cur)
            return out
    '''),
    fixed_from=("v < cur", "v > cur"),
    test_name="test_series", test_class="SeriesTest",
    tests=d('''
        import unittest

        from calc.series import running_max


        class SeriesTest(unittest.TestCase):
            def test_empty(self):
                self.assertEqual(running_max([]), [])

            def test_increasing(self):
                got = running_max([1, 2, 3])
                self.assertEqual(got, [1, 2, 3], "expected:<[1, 2, 3]> but was:<%s>" % got)
    '''),
    failing=["test_increasing"],
    probes=["[[1, 2, 3]]", "[[3, 1, 2]]", "[[2, 2, 1, 5, 4]]", "[[]]"],
    spec=feature("Running maximum never decreases",
                 "running_max reports, for each position, the largest value seen so far.",
                 scenario("A smaller value keeps the current maximum", "calc.series", "running_max",
                          "[[3, 1, 2]]", "[3, 3, 3]"),
                 scenario("Increasing values are tracked", "calc.series", "running_max",
                          "[[1, 2, 3]]", "[1, 2, 3]")),
)

CALC5_FIXED = d('''
    """Rounding helpers."""

    from decimal import ROUND_HALF_UP, Decimal


    def round_half_up(x, ndigits=0):
        quantum = Decimal(1).scaleb(-ndigits)
        return float(Decimal(str(x)).quantize(quantum, rounding=ROUND_HALF_UP))
''')

defect(
    id="calc-5", project="calc", module="calc.rounding", path="src/calc/rounding.py", func="round_half_up",
    buggy=d('''
        """Rounding helpers."""


        def round_half_up(x, ndigits=0):
            return round(x, ndigits)
    '''),
    fixed=CALC5_FIXED,
    test_name="test_rounding", test_class="RoundingTest",
    tests=d('''
        import unittest

        from calc.rounding import round_half_up


        class RoundingTest(unittest.TestCase):
            def test_round_down(self):
                self.assertEqual(round_half_up(2.4), 2)

            def test_half_rounds_up(self):
                got = round_half_up(2.5)
                self.assertEqual(got, 3, "expected:<3> but was:<%s>" % got)
    '''),
    failing=["test_half_rounds_up"],
    probes=["[2.5]", "[2.4]", "[-2.5]", "[0.125, 2]", "[1.005, 2]"],
    spec=feature("Half-up rounding",
                 "Ties round away from zero instead of to the nearest even digit.",
                 scenario("A tie rounds up", "calc.rounding", "round_half_up", "[2.5]", "3")),
)

defect(
    id="calc-6", project="calc", module="calc.ratio", path="src/calc/ratio.py", func="parse_ratio",
    buggy=d('''
        """Ratio parsing."""


        def parse_ratio(text):
            num, den = text.split("/")
            return int(num) / int(den)
    '''),
    fixed_from=('text.split("/")', 'text.split(":")'),
    test_name="test_ratio", test_class="RatioTest",
    tests=d('''
        import unittest

        from calc.ratio import parse_ratio


        class RatioTest(unittest.TestCase):
            def test_colon_ratio(self):
                self.assertEqual(parse_ratio("3:4"), 0.75)
    '''),
    failing=["test_colon_ratio"],
    probes=['["3:4"]', '["1:8"]', '["3/4"]'],
    spec=feature("Colon-separated ratios",
                 "Ratios are written as numerator:denominator.",
                 scenario("Three to four", "calc.ratio", "parse_ratio", '["3:4"]', "0.75")),
)

# --- textkit ---------------------------------------------------------------

defect(
    id="textkit-1", project="textkit", module="textkit.case", path="src/textkit/case.py", func="title_case",
    buggy=d('''
        """Letter-case helpers."""


        def title_case(text):
            return text.capitalize()
    '''),
    fixed_from=("return text.capitalize()", 'return " ".join(w.capitalize() for w in text.split(" "))'),
    test_name="test_case", test_class="CaseTest",
    tests=d('''
        import unittest

        from textkit.case import title_case


        class CaseTest(unittest.TestCase):
            def test_single_word(self):
                self.assertEqual(title_case("hello"), "Hello")

            def test_two_words(self):
                got = title_case("hello world")
                self.assertEqual(got, "Hello World", "expected:<Hello World> but was:<%s>" % got)
    '''),
    failing=["test_two_words"],
    probes=['["hello world"]', '["a b c"]', '["mIxEd case"]', '[""]'],
    spec=feature("Title case every word",
                 "Each space-separated word starts with a capital letter.",
                 scenario("Two words", "textkit.case", "title_case", '["hello world"]', '"Hello World"')),
)

defect(
    id="textkit-2", project="textkit", module="textkit.wrap", path="src/textkit/wrap.py", func="truncate",
    buggy=d('''
        """Width-limited text."""

        ELLIPSIS = "…"


        def truncate(text, width):
            if len(text) <= width:
                return text
            return text[:width] + ELLIPSIS
    '''),
    fixed_from=("text[:width] + ELLIPSIS", "text[: width - 1] + ELLIPSIS"),
    test_name="test_wrap", test_class="WrapTest",
    tests=d('''
        import unittest

        from textkit.wrap import truncate


        class WrapTest(unittest.TestCase):
            def test_short_text_untouched(self):
                self.assertEqual(truncate("abc", 5), "abc")

            def test_long_text_fits_width(self):
                got = truncate("abcdef", 4)
                self.assertEqual(got, "abc…", "expected:<abc…> but was:<%s>" % got)
    '''),
    failing=["test_long_text_fits_width"],
    probes=['["abcdef", 4]', '["abc", 3]', '["abcd", 3]', '["hello world", 6]'],
    spec=feature("Truncation respects the width",
                 "Truncated text including the ellipsis never exceeds the width.",
                 scenario("Long text", "textkit.wrap", "truncate", '["abcdef", 4]', '"abc\\u2026"')),
)

defect(
    id="textkit-3", project="textkit", module="textkit.slug", path="src/textkit/slug.py", func="slugify",
    buggy=d('''
        """URL slugs."""

        import re


        def slugify(text):
            return re.sub(r"[^a-z0-9]+", "-", text).strip("-")
    '''),
    fixed_from=('"-", text)', '"-", text.lower())'),
    test_name="test_slug", test_class="SlugTest",
    tests=d('''
        import unittest

        from textkit.slug import slugify


        class SlugTest(unittest.TestCase):
            def test_lowercase_input(self):
                self.assertEqual(slugify("hello world"), "hello-world")

            def test_mixed_case_input(self):
                got = slugify("Hello World")
                self.assertEqual(got, "hello-world", "expected:<hello-world> but was:<%s>" % got)
    '''),
    failing=["test_mixed_case_input"],
    probes=['["Hello World"]', '["ABC def"]', '["  x  "]'],
    spec=feature("Slugs are lowercase",
                 "Uppercase letters are folded before separators are collapsed.",
                 scenario("Mixed case", "textkit.slug", "slugify", '["Hello World"]', '"hello-world"')),
)

defect(
    id="textkit-4", project="textkit", module="textkit.count", path="src/textkit/count.py", func="word_count",
    buggy=d('''
        """Word statistics."""


        def word_count(text):
            return len(text.split(" "))
    '''),
    fixed_from=('text.split(" ")', "text.split()"),
    extra_files={"src/textkit/util.py": d('''
        """Shared text utilities."""


        def normalize_space(text):
            return " ".join(text.split())
    ''')},
    test_name="test_count", test_class="CountTest",
    tests=d('''
        import unittest

        from textkit.count import word_count


        class CountTest(unittest.TestCase):
            def test_single_spaces(self):
                self.assertEqual(word_count("a b c"), 3)

            def test_repeated_spaces(self):
                got = word_count("a  b")
                self.assertEqual(got, 2, "expected:<2> but was:<%s>" % got)
    '''),
    failing=["test_repeated_spaces"],
    probes=['["a  b"]', '[""]', '["  lead and trail  "]', '["tab\\tsep"]'],
    spec=feature("Words are separated by any whitespace",
                 "Runs of whitespace count as one separator.",
                 scenario("Repeated spaces", "textkit.count", "word_count", '["a  b"]', "2")),
)


DIFF_HELPER = '''

def diff(expected, actual):
    return "expected:<%s> but was:<%s>" % (expected, actual)
'''


def test_source(spec: dict) -> str:
    """Route assertion messages through a helper so tracebacks show the values, not the template."""
    text = re.sub(r'"expected:<(.*?)> but was:<%s>" % got', lambda m: f"diff({m.group(1)!r}, got)", spec["tests"])
    if "diff(" in text:
        head, sep, tail = text.partition("\n\n\nclass ")
        text = head + "\n" + DIFF_HELPER + "\n\nclass " + tail
    return text


def fixed_source(spec: dict) -> str:
    if "fixed" in spec:
        return spec["fixed"]
    old, new = spec["fixed_from"]
    assert spec["buggy"].count(old) == 1, (spec["id"], old)
    return spec["buggy"].replace(old, new)


def write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def build_corpus(out: Path) -> None:
    root = out / "toy-corpus"
    shutil.rmtree(root, ignore_errors=True)
    manifest = []
    write(root / "probes" / "call.py", PROBE_SCRIPT)
    for spec in DEFECTS:
        pkg = spec["module"].split(".")[0]
        test_file = f"tests/{spec['test_name']}.py"
        for variant, source in (("buggy", spec["buggy"]), ("fixed", fixed_source(spec))):
            tree = root / spec["id"] / variant
            write(tree / "src" / pkg / "__init__.py", "")
            write(tree / spec["path"], source)
            for rel, content in spec.get("extra_files", {}).items():
                write(tree / rel, content)
            write(tree / "tests" / "__init__.py", TESTS_INIT)
            write(tree / test_file, test_source(spec))
        manifest.append({
            "id": spec["id"],
            "project": spec["project"],
            "buggy_dir": f"{spec['id']}/buggy",
            "fixed_dir": f"{spec['id']}/fixed",
            "failing_tests": [
                f"tests.{spec['test_name']}.{spec['test_class']}.{t}" for t in spec["failing"]
            ],
            "modified_files": [spec["path"]],
            "test": {"setup": None, "cmd": TEST_CMD, "timeout_s": 60},
            "test_files": [test_file],
            "probes": {
                "cmd": PROBE_CMD % (spec["module"], spec["func"]),
                "inputs": spec["probes"],
                "timeout_s": 30,
            },
            "tags": {},
        })
    write(root / "corpus.json", json.dumps({"defects": manifest}, indent=2, ensure_ascii=False) + "\n")


def build_specs(out: Path) -> None:
    root = out / "toy-specs"
    shutil.rmtree(root, ignore_errors=True)
    write(root / "bindings.json", json.dumps(STEP_BINDINGS, indent=2) + "\n")
    write(root / "broken-bindings.json", json.dumps(BROKEN_BINDINGS, indent=2) + "\n")
    for spec in DEFECTS:
        write(root / spec["id"] / "spec.feature", spec["spec"])
    # calc-5 variants used by verification tests
    write(root / "calc-5" / "vacuous.feature", feature(
        "Rounding keeps small fractions down", "Values below one half round down.",
        scenario("Below the tie", "calc.rounding", "round_half_up", "[2.4]", "2")))
    write(root / "calc-5" / "misaligned.feature", feature(
        "Rounding always goes up", "Any fraction rounds to the next integer.",
        scenario("A small fraction", "calc.rounding", "round_half_up", "[2.4]", "3")))
    write(root / "calc-6" / "misaligned.feature", feature(
        "Ratios scale by a fifth", "A wrong reading of the ratio contract.",
        scenario("Three to four", "calc.ratio", "parse_ratio", '["3:4"]', "0.8")))


# --- scripted agent responses -----------------------------------------------

def architect_response(spec_text: str, analysis: str) -> str:
    return f"Root cause analysis:\n{analysis}\n\n```gherkin\n{spec_text}```\n"


def engineer_response(doc: dict) -> str:
    return "Step bindings for the scenarios:\n\n```json\n" + json.dumps(doc, indent=2) + "\n```\n"


def fixer_response(path: str, content: str, rationale: str) -> str:
    return f"{rationale}\n\n=== FILE: {path} ===\n{content}=== END ===\n"


def build_scripts(out: Path) -> None:
    root = out / "toy-scripts"
    shutil.rmtree(root, ignore_errors=True)
    by_id = {s["id"]: s for s in DEFECTS}

    def put(set_name: str, defect_id: str, mode: str, role: str, responses: list[str]) -> None:
        for i, text in enumerate(responses, start=1):
            write(root / set_name / defect_id / mode / role / f"{i:03d}.txt", text)

    def correct_fix(defect_id: str, note: str) -> str:
        s = by_id[defect_id]
        return fixer_response(s["path"], fixed_source(s), note)

    def correct_architect(defect_id: str) -> str:
        return architect_response(
            by_id[defect_id]["spec"],
            f"The failing test shows {by_id[defect_id]['func']} diverging from the expected value.",
        )

    bindings = engineer_response(STEP_BINDINGS)

    # Campaign plan: blind fixes calc-1..3 and textkit-1..3 (6/10).
    for defect_id in ("calc-1", "calc-2", "calc-3", "textkit-1", "textkit-2", "textkit-3"):
        put("campaign", defect_id, "blind", "fixer",
            [correct_fix(defect_id, "Restore the intended comparison.")])

    # calc-4: blind overfits (PlausibleOnly); enlightened rescues with a validated spec.
    s = by_id["calc-4"]
    put("campaign", "calc-4", "blind", "fixer",
        [fixer_response(s["path"], CALC4_TRAP, "Always take the newest value.")])
    put("campaign", "calc-4", "enlightened", "architect", [correct_architect("calc-4")])
    put("campaign", "calc-4", "enlightened", "engineer", [bindings])
    put("campaign", "calc-4", "enlightened", "fixer", [correct_fix("calc-4", "Keep the larger value.")])

    # calc-5: blind patch fails the tests (NoFix); enlightened spec is too weak on
    # attempt 1, validated on attempt 2, then the fixer succeeds.
    s = by_id["calc-5"]
    ceil_patch = d('''
        """Rounding helpers."""

        import math


        def round_half_up(x, ndigits=0):
            return math.ceil(x)
    ''')
    weak = architect_response(
        (out / "toy-specs" / "calc-5" / "vacuous.feature").read_text(encoding="utf-8"),
        "Rounding seems off for some inputs.",
    )
    put("campaign", "calc-5", "blind", "fixer", [fixer_response(s["path"], ceil_patch, "Round upwards.")])
    put("campaign", "calc-5", "enlightened", "architect", [weak, correct_architect("calc-5")])
    put("campaign", "calc-5", "enlightened", "engineer", [bindings, bindings])
    put("campaign", "calc-5", "enlightened", "fixer", [correct_fix("calc-5", "Use decimal half-up rounding.")])

    # calc-6: blind NoFix; every spec is misaligned, RQA exhausts after 3 attempts,
    # and the degraded fixer still fails.
    s = by_id["calc-6"]
    wrong = s["buggy"].replace('text.split("/")', 'text.split(",")')
    misaligned = architect_response(
        (out / "toy-specs" / "calc-6" / "misaligned.feature").read_text(encoding="utf-8"),
        "The ratio appears to be scaled incorrectly.",
    )
    put("campaign", "calc-6", "blind", "fixer", [fixer_response(s["path"], wrong, "Split on commas.")])
    put("campaign", "calc-6", "enlightened", "architect", [misaligned] * 3)
    put("campaign", "calc-6", "enlightened", "engineer", [bindings] * 3)
    put("campaign", "calc-6", "enlightened", "fixer", [fixer_response(s["path"], wrong, "Split on commas.")])

    # textkit-4: blind patch edits two files (scope violation); enlightened fixes in scope.
    s = by_id["textkit-4"]
    two_file = (
        "Move whitespace handling into util.\n\n"
        f"=== FILE: {s['path']} ===\n"
        + d('''
            """Word statistics."""

            from textkit.util import normalize_space


            def word_count(text):
                text = normalize_space(text)
                return len(text.split(" ")) if text else 0
        ''')
        + "=== FILE: src/textkit/util.py ===\n"
        + s["extra_files"]["src/textkit/util.py"]
        + "=== END ===\n"
    )
    put("campaign", "textkit-4", "blind", "fixer", [two_file])
    put("campaign", "textkit-4", "enlightened", "architect", [correct_architect("textkit-4")])
    put("campaign", "textkit-4", "enlightened", "engineer", [bindings])
    put("campaign", "textkit-4", "enlightened", "fixer", [correct_fix("textkit-4", "Split on any whitespace.")])

    # Harness failure: the engineer never covers the Then steps. RQA tolerates one
    # harness failure, regenerates, fails again, and the fixer still sees the spec.
    broken = engineer_response(BROKEN_BINDINGS)
    put("fallback", "calc-5", "enlightened", "architect", [correct_architect("calc-5")] * 2)
    put("fallback", "calc-5", "enlightened", "engineer", [broken] * 6)
    put("fallback", "calc-5", "enlightened", "fixer", [correct_fix("calc-5", "Use decimal half-up rounding.")])

    # Degraded: a vacuous spec with a single RQA attempt, then a failing blind-style fix.
    put("degraded", "calc-5", "enlightened", "architect", [weak])
    put("degraded", "calc-5", "enlightened", "engineer", [bindings])
    put("degraded", "calc-5", "enlightened", "fixer",
        [fixer_response(by_id["calc-5"]["path"], ceil_patch, "Round upwards.")])

    write(root / "campaign" / "PLAN.md", PLAN)


PLAN = """\
# Composite campaign plan for the toy corpus

| defect    | blind outcome            | enlightened                                   |
|-----------|--------------------------|-----------------------------------------------|
| calc-1    | CorrectFix               | not run                                       |
| calc-2    | CorrectFix               | not run                                       |
| calc-3    | CorrectFix               | not run                                       |
| calc-4    | PlausibleOnly (overfit)  | spec validated on attempt 1, CorrectFix       |
| calc-5    | NoFix (tests fail)       | SpecTooWeak, then validated on attempt 2, CorrectFix |
| calc-6    | NoFix (tests fail)       | SpecMisaligned x3, exhausted, degraded NoFix  |
| textkit-1 | CorrectFix               | not run                                       |
| textkit-2 | CorrectFix               | not run                                       |
| textkit-3 | CorrectFix               | not run                                       |
| textkit-4 | NoFix (scope violation)  | spec validated on attempt 1, CorrectFix       |

Blind 6/10, rescued 3/4 (75.0%), total 9/10 (90.0%).
calc: 6 bugs, 3 blind, 3 fail, 2 rescued, total 5 (83.3%).
textkit: 4 bugs, 3 blind, 1 fail, 1 rescued, total 4 (100.0%).
"""


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    build_corpus(out)
    build_specs(out)
    build_scripts(out)
    print(f"wrote toy fixtures under {out}")


if __name__ == "__main__":
    main()
