from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path


def pct(x: float | None) -> str:
    if x is None or x != x:
        return "n/a"
    return f"{x:.1f}%"


@dataclass
class ReportTable:
    name: str
    headers: list[str]
    rows: list[list[str]]
    # wall-clock tables are the one report that is not byte-reproducible
    timing: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.headers)
        w.writerows(self.rows)
        return buf.getvalue()

    def to_text(self) -> str:
        table = [self.headers, *self.rows]
        widths = [max(len(r[i]) for r in table) for i in range(len(self.headers))]
        lines = [self.name]
        for n, row in enumerate(table):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.name}.csv"
        txt_path = out / f"{self.name}.txt"
        csv_path.write_text(self.to_csv())
        txt_path.write_text(self.to_text())
        return csv_path, txt_path
