"""Per-checkpoint training records and their CSV form."""

import csv
import io
import json
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

from coadapt.exceptions import DomainError

__all__ = ["TRACE_COLUMNS", "CheckpointRecord", "MetricTrace"]

TRACE_COLUMNS = ("step", "loss", "mean_q", "feat_dot", "cosine", "srank", "eval_return", "r_td", "diverged")
_META_PREFIX = "# meta "


@dataclass(frozen=True)
class CheckpointRecord:
    step: int
    loss: float
    mean_q: float
    feat_dot: float
    cosine: float
    srank: int
    eval_return: float
    r_td: float
    diverged: bool = False


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


@dataclass
class MetricTrace:
    """Ordered checkpoint records of one run plus provenance metadata."""

    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, record):
        if self.records and record.step <= self.records[-1].step:
            raise DomainError("checkpoint steps must be strictly increasing")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def diverged(self):
        return bool(self.records) and self.records[-1].diverged

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    def final(self, name):
        return getattr(self.records[-1], name)

    def average(self, name):
        vals = [v for v in self.column(name) if not (isinstance(v, float) and math.isnan(v))]
        return sum(vals) / len(vals) if vals else math.nan

    def to_csv(self, path=None):
        """Serialise; returns the text and writes it when ``path`` is given."""
        buf = io.StringIO()
        buf.write(_META_PREFIX + json.dumps(self.metadata, sort_keys=True, default=str) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in self.records:
            writer.writerow([_fmt(v) for v in astuple(rec)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source):
        """Parse a trace from a path or from CSV text; errors name the offending line."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            name = str(source)
            text = Path(source).read_text()
        else:
            name = "<text>"
            text = source
        meta = {}
        trace = None
        kinds = [f.type for f in fields(CheckpointRecord)]
        for lineno, line in enumerate(text.splitlines(), start=1):
            if line.startswith(_META_PREFIX):
                meta = json.loads(line[len(_META_PREFIX):])
                continue
            if not line.strip() or line.startswith("#"):
                continue
            row = next(csv.reader([line]))
            if trace is None:
                if tuple(row) != TRACE_COLUMNS:
                    raise ValueError(f"{name}: line {lineno}: expected header {','.join(TRACE_COLUMNS)}")
                trace = cls(metadata=meta)
                continue
            if len(row) != len(TRACE_COLUMNS):
                raise ValueError(f"{name}: line {lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
            try:
                values = []
                for kind, raw in zip(kinds, row):
                    if kind in (bool, "bool"):
                        if raw not in ("0", "1"):
                            raise ValueError(f"bad flag {raw!r}")
                        values.append(raw == "1")
                    elif kind in (int, "int"):
                        values.append(int(raw))
                    else:
                        values.append(float(raw))
                trace.append(CheckpointRecord(*values))
            except (ValueError, DomainError) as exc:
                raise ValueError(f"{name}: line {lineno}: {exc}") from None
        if trace is None:
            raise ValueError(f"{name}: missing CSV header")
        return trace
