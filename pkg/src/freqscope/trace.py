"""Frequency traces and the .ftrace on-disk format.

A trace is a fixed-interval series of integer kHz readings plus metadata.
The file format is line oriented so labels are percent-encoded:

    #ftrace v1
    #interval_ms=10
    #device=comet_lake
    #label=facebook.com
    0,800000
    1,1600000

Header lines start with '#'; body lines are `index,freq_khz`. Files are
UTF-8 with LF endings and are written atomically (temp file + rename).
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from urllib.parse import quote, unquote

MAGIC = "#ftrace v1"

_HEADER_KEYS = ("interval_ms", "device", "label", "start_index")


class TraceFormatError(ValueError):
    """Raised for malformed trace files; carries the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class FrequencyTrace:
    samples: list[int]
    interval_ms: int
    device: str = "unknown"
    label: str | None = None
    start_index: int = 0

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("trace needs at least one sample")
        if self.interval_ms < 1:
            raise ValueError("interval_ms must be >= 1")
        if self.start_index < 0:
            raise ValueError("start_index must be >= 0")
        for s in self.samples:
            if not isinstance(s, int) or isinstance(s, bool) or s < 0:
                raise ValueError(f"samples must be non-negative integers, got {s!r}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_ms(self) -> int:
        return len(self.samples) * self.interval_ms


def encode_label(label: str) -> str:
    """Percent-encode so commas, newlines and separators survive the format."""
    return quote(label, safe="")


def decode_label(text: str) -> str:
    return unquote(text)


def save_trace(trace: FrequencyTrace, path: str | os.PathLike) -> None:
    """Write a trace atomically; an existing file is replaced in one step."""
    path = os.fspath(path)
    lines = [MAGIC, f"#interval_ms={trace.interval_ms}", f"#device={encode_label(trace.device)}"]
    if trace.label is not None:
        lines.append(f"#label={encode_label(trace.label)}")
    if trace.start_index:
        lines.append(f"#start_index={trace.start_index}")
    for i, freq in enumerate(trace.samples, start=trace.start_index):
        lines.append(f"{i},{freq}")
    data = "\n".join(lines) + "\n"

    parent = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=parent, suffix=".ftrace.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_trace(path: str | os.PathLike) -> FrequencyTrace:
    """Parse a .ftrace file; inverse of save_trace."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw = fh.read()

    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != MAGIC:
        raise TraceFormatError(1, f"missing magic header {MAGIC!r}")

    header: dict[str, str] = {}
    body_start = None
    for n, line in enumerate(lines[1:], start=2):
        if not line.startswith("#"):
            body_start = n
            break
        key, sep, value = line[1:].partition("=")
        if not sep:
            raise TraceFormatError(n, f"malformed header line {line!r}")
        if key not in _HEADER_KEYS:
            raise TraceFormatError(n, f"unknown header key {key!r}")
        if key in header:
            raise TraceFormatError(n, f"duplicate header key {key!r}")
        header[key] = value

    if "interval_ms" not in header:
        raise TraceFormatError(1, "header lacks interval_ms")
    try:
        interval = int(header["interval_ms"])
    except ValueError:
        raise TraceFormatError(1, f"interval_ms is not an integer: {header['interval_ms']!r}") from None
    try:
        start_index = int(header.get("start_index", "0"))
    except ValueError:
        raise TraceFormatError(1, f"start_index is not an integer: {header['start_index']!r}") from None

    if body_start is None:
        raise TraceFormatError(len(lines), "empty body")

    samples: list[int] = []
    expected = start_index
    for n, line in enumerate(lines[body_start - 1 :], start=body_start):
        idx_text, sep, freq_text = line.partition(",")
        if not sep:
            raise TraceFormatError(n, f"body line lacks comma separator: {line!r}")
        try:
            idx = int(idx_text)
            freq = int(freq_text)
        except ValueError:
            raise TraceFormatError(n, f"non-numeric sample line: {line!r}") from None
        if idx != expected:
            raise TraceFormatError(n, f"sample index {idx} out of sequence (expected {expected})")
        samples.append(freq)
        expected += 1

    try:
        return FrequencyTrace(
            samples=samples,
            interval_ms=interval,
            device=decode_label(header.get("device", "unknown")),
            label=decode_label(header["label"]) if "label" in header else None,
            start_index=start_index,
        )
    except ValueError as exc:
        raise TraceFormatError(body_start, str(exc)) from None
