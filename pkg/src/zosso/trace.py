"""Per-iteration run records and their CSV serialization."""

from __future__ import annotations

import io
import time
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import List, Union

FIELDS = ("k", "i", "evals", "beta", "m_norm", "s1", "s2", "best_f", "wall_ms")


def fmt(value: float) -> str:
    return f"{float(value):.17g}"


@dataclass(frozen=True)
class TraceRecord:
    k: int
    i: int
    evals: int
    beta: float
    m_norm: float
    s1: float
    s2: float
    best_f: float
    wall_ms: float = 0.0

    def to_row(self) -> str:
        k, i, evals, *rest = astuple(self)
        return ",".join([str(k), str(i), str(evals)] + [fmt(v) for v in rest])

    @classmethod
    def from_row(cls, row: str) -> TraceRecord:
        parts = row.strip().split(",")
        if len(parts) != len(FIELDS):
            raise ValueError(f"trace row has {len(parts)} fields, expected {len(FIELDS)}: {row!r}")
        return cls(int(parts[0]), int(parts[1]), int(parts[2]), *map(float, parts[3:]))


@dataclass
class RunTrace:
    """Ordered iteration records.

    Wall time is only measured when ``wall_clock`` is set; otherwise the
    column holds 0 so that traces of the same seed are byte-identical.
    """

    records: List[TraceRecord] = field(default_factory=list)
    wall_clock: bool = False
    thin: int = 1
    _t0: float = field(default_factory=time.perf_counter, repr=False, compare=False)

    def __post_init__(self):
        if int(self.thin) < 1:
            raise ValueError(f"thin must be >= 1, got {self.thin!r}")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        return self.records == other.records

    def wants(self, k: int) -> bool:
        return k % self.thin == 0

    def record(self, k, i, evals, beta, m_norm, s1, s2, best_f) -> TraceRecord:
        wall = (time.perf_counter() - self._t0) * 1e3 if self.wall_clock else 0.0
        rec = TraceRecord(int(k), int(i), int(evals), float(beta), float(m_norm), float(s1), float(s2), float(best_f), wall)
        self.records.append(rec)
        return rec

    def column(self, name: str) -> list:
        idx = FIELDS.index(name)
        return [astuple(r)[idx] for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(FIELDS) + "\n")
        for rec in self.records:
            buf.write(rec.to_row() + "\n")
        return buf.getvalue()

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv(), encoding="ascii")

    @classmethod
    def from_csv(cls, text: str) -> RunTrace:
        lines = text.splitlines()
        if not lines or lines[0].strip() != ",".join(FIELDS):
            raise ValueError("missing or unexpected trace header")
        return cls(records=[TraceRecord.from_row(line) for line in lines[1:] if line.strip()])

    @classmethod
    def read(cls, path: Union[str, Path]) -> RunTrace:
        return cls.from_csv(Path(path).read_text(encoding="ascii"))


assert tuple(f.name for f in fields(TraceRecord)) == FIELDS
