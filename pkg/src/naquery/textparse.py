"""Lenient extraction of structured blocks from LLM chat responses.

The accepted repairs are deliberately narrow: code fences, `//` line
comments, trailing commas, and Python-literal dicts (single-quoted chat
transcripts). Anything else is a hard parse error.
"""

from __future__ import annotations

import ast
import json
import re

from .errors import NoJsonFound

_FENCE_RE = re.compile(r"```[ \t]*(\w+)?[ \t]*\n(.*?)```", re.DOTALL)


def extract_fenced_blocks(text: str, lang: str | None = None) -> list[str]:
    """Return the bodies of ``` fenced blocks, optionally filtered by tag."""
    blocks = []
    for m in _FENCE_RE.finditer(text):
        tag = (m.group(1) or "").lower()
        if lang is None or tag == lang or tag == "":
            blocks.append(m.group(2))
    return blocks


def strip_line_comments(text: str) -> str:
    """Drop // comments that appear outside string literals."""
    out = []
    in_str: str | None = None
    i = 0
    while i < len(text):
        ch = text[i]
        if in_str:
            out.append(ch)
            if ch == "\\" and i + 1 < len(text):
                out.append(text[i + 1])
                i += 2
                continue
            if ch == in_str:
                in_str = None
        elif ch in "\"'":
            in_str = ch
            out.append(ch)
        elif ch == "/" and text[i:i + 2] == "//":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def strip_trailing_commas(text: str) -> str:
    return re.sub(r",(\s*[}\]])", r"\1", text)


def _candidate_objects(text: str) -> list[str]:
    """Brace-balanced top-level {...} spans, fenced blocks first."""
    sources = extract_fenced_blocks(text) or []
    sources.append(text)
    spans = []
    for src in sources:
        depth = 0
        start = None
        in_str: str | None = None
        i = 0
        while i < len(src):
            ch = src[i]
            if in_str:
                if ch == "\\":
                    i += 2
                    continue
                if ch == in_str:
                    in_str = None
            elif ch in "\"'":
                in_str = ch
            elif ch == "{":
                if depth == 0:
                    start = i
                depth += 1
            elif ch == "}":
                if depth > 0:
                    depth -= 1
                    if depth == 0 and start is not None:
                        spans.append(src[start:i + 1])
                        start = None
            i += 1
    return spans


def loads_object(text: str) -> dict:
    """Parse the first JSON-ish object found anywhere in an LLM response."""
    for span in _candidate_objects(text):
        cleaned = strip_trailing_commas(strip_line_comments(span))
        try:
            obj = json.loads(cleaned)
        except (json.JSONDecodeError, ValueError):
            try:
                obj = ast.literal_eval(cleaned)
            except (ValueError, SyntaxError):
                continue
        if isinstance(obj, dict):
            return obj
    raise NoJsonFound("no parsable JSON object in response")
