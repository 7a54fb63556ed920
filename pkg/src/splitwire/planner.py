"""Accuracy-table ingestion and split/feature-size planning.

Selects the (split point, n_c) pair minimizing task latency subject to an
accuracy floor, by exhaustive search over the rows of an accuracy table.
The repository ships a versioned table of published results; users swap in
their own tables (e.g. from the trainer's eval-grid).
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .accounting import FlopReport
from .channel import ChannelProfile, payload_bits
from .cost import CostReport, DeviceProfile, total_task_time
from .graph import SplitPoint, split_point

REQUIRED_COLUMNS = ("model", "split", "n_c", "snr_db", "top1")
DATA_ENV_VAR = "SPLITWIRE_DATA"
BUNDLED_TABLE = "paper_tables.csv"


@dataclass(frozen=True)
class AccuracyRecord:
    model: str
    split: SplitPoint
    n_c: int
    snr_db: float
    top1: float
    provenance: str = ""

    def key(self):
        return (self.model, self.split.id, self.n_c, self.snr_db)


@dataclass(frozen=True)
class AccuracyTable:
    records: tuple
    provenance: str

    def __len__(self):
        return len(self.records)

    def rows(self, model: str | None = None, split=None, snr_db: float | None = None):
        sp = split_point(split) if split is not None else None
        out = []
        for rec in self.records:
            if model is not None and rec.model != model:
                continue
            if sp is not None and rec.split.id != sp.id:
                continue
            if snr_db is not None and not math.isclose(rec.snr_db, snr_db, abs_tol=1e-9):
                continue
            out.append(rec)
        return out


def data_dir() -> Path:
    """Bundled data directory, overridable via the SPLITWIRE_DATA env var."""
    override = os.environ.get(DATA_ENV_VAR)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "data"


def bundled_table_path() -> Path:
    return data_dir() / BUNDLED_TABLE


def load_accuracy_table(source) -> AccuracyTable:
    """Parse and validate an accuracy CSV (header: model,split,n_c,snr_db,top1).

    Extra columns (e.g. provenance) are kept; malformed rows are rejected
    with their line number, duplicate keys with the offending key.
    """
    if isinstance(source, (str, Path)):
        name = str(source)
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        name, data = "<bytes>", bytes(source)
    else:
        name, data = getattr(source, "name", "<stream>"), source.read()
        if isinstance(data, str):
            data = data.encode("utf-8")

    digest = hashlib.sha256(data).hexdigest()
    reader = csv.DictReader(io.StringIO(data.decode("utf-8")))
    if reader.fieldnames is None:
        raise ValueError("no records: empty accuracy table")
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ValueError(f"accuracy table header lacks columns: {', '.join(missing)}")

    records = []
    seen = {}
    for line, row in enumerate(reader, start=2):
        try:
            rec = AccuracyRecord(
                model=row["model"].strip(),
                split=split_point(row["split"]),
                n_c=int(row["n_c"]),
                snr_db=float(row["snr_db"]),
                top1=float(row["top1"]),
                provenance=(row.get("provenance") or "").strip(),
            )
        except (ValueError, AttributeError, TypeError) as exc:
            raise ValueError(f"line {line}: malformed row {row!r}: {exc}") from exc
        if not rec.model:
            raise ValueError(f"line {line}: empty model identifier")
        if rec.n_c < 1:
            raise ValueError(f"line {line}: n_c must be positive")
        if not 0.0 <= rec.top1 <= 1.0:
            raise ValueError(f"line {line}: top1 {rec.top1} outside [0, 1]")
        if rec.key() in seen:
            raise ValueError(f"duplicate key {rec.key()} on lines {seen[rec.key()]} and {line}")
        seen[rec.key()] = line
        records.append(rec)
    if not records:
        raise ValueError("no records: accuracy table has a header but no rows")
    return AccuracyTable(tuple(records), provenance=f"{name} sha256:{digest}")


def load_bundled_table() -> AccuracyTable:
    return load_accuracy_table(bundled_table_path())


def min_nc(table: AccuracyTable, split, snr_db: float, floor: float, model: str | None = None):
    """Smallest n_c in the table reaching the accuracy floor at (split, snr).

    Returns None when infeasible (no such row).
    """
    candidates = [r.n_c for r in table.rows(model=model, split=split, snr_db=snr_db) if r.top1 >= floor]
    return min(candidates) if candidates else None


@dataclass(frozen=True)
class PlanResult:
    feasible: bool
    split: SplitPoint | None = None
    n_c: int | None = None
    top1: float | None = None
    snr_db_used: float | None = None
    cost: CostReport | None = None
    diagnostics: str = ""

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "split": self.split.key if self.split else None,
            "n_c": self.n_c,
            "top1": self.top1,
            "snr_db_used": self.snr_db_used,
            "cost": self.cost.to_dict() if self.cost else None,
            "diagnostics": self.diagnostics,
        }


def _rows_at_snr(table: AccuracyTable, snr_db: float, model: str | None):
    """One row per (model, split, n_c): exact SNR match, else nearest lower.

    Rows only above the configured SNR are dropped (never over-promise
    accuracy by borrowing a better channel's numbers).
    """
    groups = {}
    for rec in table.records:
        if model is not None and rec.model != model:
            continue
        if rec.snr_db > snr_db + 1e-9:
            continue
        key = (rec.model, rec.split.id, rec.n_c)
        best = groups.get(key)
        if best is None or rec.snr_db > best.snr_db:
            groups[key] = rec
    return list(groups.values())


def plan(
    table: AccuracyTable,
    flop_reports: dict,
    dev_t: DeviceProfile,
    dev_r: DeviceProfile,
    channel: ChannelProfile,
    floor: float,
    model: str | None = None,
) -> PlanResult:
    """Exhaustive search for the feasible (split, n_c) minimizing task time.

    flop_reports maps split keys ('SP-2') to FlopReport; it must cover every
    split occurring in the table. Ties break toward smaller n_c, then the
    earlier split.
    """
    candidates = _rows_at_snr(table, channel.snr_db, model)
    usable = []
    for rec in candidates:
        report = flop_reports.get(rec.split.key)
        if report is None:
            raise ValueError(f"flop_reports lacks an entry for {rec.split.key} (present in the table)")
        if not isinstance(report, FlopReport):
            raise TypeError(f"flop_reports[{rec.split.key!r}] is not a FlopReport")
        usable.append(rec)

    feasible = [r for r in usable if r.top1 >= floor]
    if not feasible:
        best = max(usable, key=lambda r: r.top1, default=None)
        diag = "no rows at or below the configured SNR" if best is None else (
            f"best achievable top1 is {best.top1:.4f} at {best.split.key}, n_c={best.n_c}, "
            f"snr={best.snr_db:g} dB (floor {floor:.4f})"
        )
        return PlanResult(feasible=False, diagnostics=diag)

    def cost_of(rec: AccuracyRecord) -> CostReport:
        bits = payload_bits(rec.n_c, channel.payload_dtype, rec.split)
        return total_task_time(flop_reports[rec.split.key], dev_t, dev_r, bits, channel)

    best_rec = min(feasible, key=lambda r: (cost_of(r).t_task, r.n_c, r.split.id, r.model))
    cost = cost_of(best_rec)
    return PlanResult(
        feasible=True,
        split=best_rec.split,
        n_c=best_rec.n_c,
        top1=best_rec.top1,
        snr_db_used=best_rec.snr_db,
        cost=cost,
    )
