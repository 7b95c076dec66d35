"""Per-iteration records of an alternating-optimization run."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field


@dataclass
class RunTrace:
    """Outer-iteration log.

    ``rows[i]`` describes the state after outer iteration ``i + 1``; the rate
    before the first iteration is kept in ``initial_rate``.
    """

    algorithm: str
    columns: tuple
    initial_rate: float = float("nan")
    rows: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    safeguard_hits: int = 0

    def append(self, **values) -> None:
        missing = set(self.columns) - set(values)
        if missing:
            raise KeyError(f"missing trace columns: {sorted(missing)}")
        self.rows.append({k: values[k] for k in self.columns})

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def iterations(self) -> int:
        return len(self.rows)

    @property
    def min_rates(self) -> list:
        return [r["min_rate"] for r in self.rows]

    @property
    def final_rate(self) -> float:
        return self.rows[-1]["min_rate"] if self.rows else self.initial_rate

    def last_change(self) -> float:
        seq = [self.initial_rate] + self.min_rates
        return abs(seq[-1] - seq[-2]) if len(seq) >= 2 else float("inf")

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
