"""Command templates and subprocess execution.

Templates are tokenized with POSIX shell quoting rules (``shlex.split``) and
then run directly, never through a shell. After tokenizing, these
placeholders are expanded inside each token:

``{1}`` .. ``{n}``
    regex captures of a step binding
``{workspace}``
    absolute path of the workspace root
``{python}``
    the running interpreter (``sys.executable``)
``{corpus}``
    the corpus root directory (probe commands only)
``{input}``
    one probe input (probe commands only)

Any other brace expression is left untouched, so inline Python such as
``{'a': 1}`` survives. Expansion happens per token, so a capture containing
spaces stays a single argv entry.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

PLACEHOLDER_RE = re.compile(r"\{(\d+|workspace|python|corpus|input)\}")


class TemplateError(ValueError):
    """A command template cannot be tokenized or references a bad placeholder."""


def split_template(template: str) -> list[str]:
    try:
        tokens = shlex.split(template, comments=False, posix=True)
    except ValueError as exc:
        raise TemplateError(f"cannot tokenize {template!r}: {exc}") from exc
    if not tokens:
        raise TemplateError("empty command template")
    return tokens


def capture_indices(template: str) -> list[int]:
    return [int(m.group(1)) for m in PLACEHOLDER_RE.finditer(template) if m.group(1).isdigit()]


def expand_tokens(
    tokens: Sequence[str],
    captures: Sequence[str] = (),
    **named: str,
) -> list[str]:
    """Substitute placeholders in already-split tokens.

    Named placeholders that are not supplied are kept verbatim so a template
    can be expanded in two stages (captures at bind time, workspace at run time).
    """
    named = {"python": sys.executable, **named}

    def sub(match: re.Match[str]) -> str:
        key = match.group(1)
        if key.isdigit():
            idx = int(key)
            if idx < 1 or idx > len(captures):
                raise TemplateError(f"placeholder {{{idx}}} has no capture")
            return captures[idx - 1]
        if key in named:
            return named[key]
        return match.group(0)

    return [PLACEHOLDER_RE.sub(sub, tok) for tok in tokens]


@dataclass(frozen=True)
class ProcessResult:
    argv: tuple[str, ...]
    exit_code: int | None
    output: str
    duration: float
    timed_out: bool = False
    spawn_error: str | None = None

    @property
    def ok(self) -> bool:
        return self.exit_code == 0 and not self.timed_out and self.spawn_error is None


def run_process(
    argv: Sequence[str],
    cwd: str | os.PathLike[str],
    timeout: float,
    env: Mapping[str, str] | None = None,
) -> ProcessResult:
    """Run ``argv`` with stdout and stderr merged; never raises for process failures."""
    full_env = dict(os.environ)
    full_env["PYTHONDONTWRITEBYTECODE"] = "1"
    if env:
        full_env.update(env)
    start = time.monotonic()
    try:
        proc = subprocess.run(
            list(argv),
            cwd=cwd,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            stdin=subprocess.DEVNULL,
            timeout=timeout,
            env=full_env,
            shell=False,
        )
    except subprocess.TimeoutExpired as exc:
        out = exc.output or b""
        return ProcessResult(
            tuple(argv), None, out.decode("utf-8", errors="replace"),
            time.monotonic() - start, timed_out=True,
        )
    except OSError as exc:
        return ProcessResult(
            tuple(argv), None, "", time.monotonic() - start, spawn_error=str(exc)
        )
    return ProcessResult(
        tuple(argv),
        proc.returncode,
        proc.stdout.decode("utf-8", errors="replace"),
        time.monotonic() - start,
    )
