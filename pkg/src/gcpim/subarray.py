"""Sub-array simulator: writes, nondestructive reads, refresh, and the
two-phase stateful logic pulse, with time and energy recorded in a ledger.

The sub-array is 64x64 by default.  Cell state is kept lazily: each cell
stores its voltage as of its own ``last_update`` timestamp and is decayed
on demand when an operation touches it, which is exact for the
single-pole decay law.  Per-cell variation (tau multiplier, drive offset)
and per-column sense thresholds are plain numpy grids so one operation
evaluates all 64 columns at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from gcpim.charge import (
    CellParams,
    CellState,
    ConfigError,
    ModelConfig,
    overdrive,
    residual_from_overdrive,
)

__all__ = [
    "EventLedger",
    "LedgerEntry",
    "MicroOp",
    "OpKind",
    "SubArray",
    "TimingEnergyConfig",
    "TraceSample",
]


class OpKind(str, Enum):
    WRITE = "WRITE"
    READ = "READ"
    REFRESH = "REFRESH"
    LOGIC = "LOGIC"


@dataclass(frozen=True)
class MicroOp:
    """One array instruction.

    ``rows`` is the written/read/refreshed row for WRITE/READ/REFRESH, or the
    input rows for LOGIC (``out_row`` then names the destination).  WRITE
    carries either literal ``bits`` or a ``source`` binding ("input:<name>",
    "const:0", "const:1") resolved when the program runs.
    """

    kind: OpKind
    rows: tuple[int, ...]
    out_row: int | None = None
    bits: tuple[int, ...] | None = None
    source: str | None = None
    t_start_ns: int = 0

    def __post_init__(self) -> None:
        if len(self.rows) == 0:
            raise ValueError(f"{self.kind.value} op needs at least one row")
        if any(r < 0 for r in self.rows):
            raise ValueError(f"negative row in {self.rows}")
        if self.kind is OpKind.LOGIC:
            if self.out_row is None:
                raise ValueError("LOGIC op needs an output row")
            if self.out_row in self.rows:
                raise ValueError(
                    f"in-place logic is undefined: output row {self.out_row} "
                    f"is also an input"
                )
            if len(set(self.rows)) != len(self.rows):
                raise ValueError(f"duplicate input rows in {self.rows}")
        else:
            if len(self.rows) != 1:
                raise ValueError(f"{self.kind.value} op takes exactly one row")
            if self.out_row is not None:
                raise ValueError(f"{self.kind.value} op has no output row")
        if self.kind is OpKind.WRITE:
            if (self.bits is None) == (self.source is None):
                raise ValueError("WRITE needs exactly one of bits or source")
        elif self.bits is not None or self.source is not None:
            raise ValueError(f"{self.kind.value} op carries no data")


@dataclass(frozen=True)
class TimingEnergyConfig:
    """Pulse durations (ns) and per-active-column energies (fJ).

    The logic pulse splits into a 1 ns init phase that precharges the output
    row and a 2 ns evaluation phase during which the asserted input rows
    conditionally discharge it.
    """

    t_write_ns: int = 1
    t_read_ns: int = 3
    t_init_ns: int = 1
    t_eval_ns: int = 2
    e_write_fj: float = 5.7
    e_read_fj: float = 13.3
    e_not_fj: float = 13.4
    e_nor_fj: float = 13.5
    e_dual_sense_fj: float = 13.34

    def __post_init__(self) -> None:
        for name in (
            "t_write_ns", "t_read_ns", "t_init_ns", "t_eval_ns",
            "e_write_fj", "e_read_fj", "e_not_fj", "e_nor_fj",
            "e_dual_sense_fj",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def t_logic_ns(self) -> int:
        return self.t_init_ns + self.t_eval_ns

    @property
    def t_refresh_ns(self) -> int:
        return self.t_read_ns + self.t_write_ns

    def duration_ns(self, kind: OpKind) -> int:
        return {
            OpKind.WRITE: self.t_write_ns,
            OpKind.READ: self.t_read_ns,
            OpKind.REFRESH: self.t_refresh_ns,
            OpKind.LOGIC: self.t_logic_ns,
        }[kind]

    def energy_fj(self, kind: OpKind, n_inputs: int, active_columns: int) -> float:
        """Ledger energy for one op; logic energy depends on gate arity."""
        if kind is OpKind.WRITE:
            per_col = self.e_write_fj
        elif kind is OpKind.READ:
            per_col = self.e_read_fj
        elif kind is OpKind.REFRESH:
            per_col = self.e_read_fj + self.e_write_fj
        else:
            per_col = self.e_not_fj if n_inputs == 1 else self.e_nor_fj
        return per_col * active_columns


@dataclass(frozen=True)
class LedgerEntry:
    start_ns: int
    duration_ns: int
    op: str
    rows: tuple[int, ...]
    active_columns: int
    energy_fj: float

    @property
    def end_ns(self) -> int:
        return self.start_ns + self.duration_ns

    def rows_label(self) -> str:
        if self.op == OpKind.LOGIC.value:
            *ins, out = self.rows
            return "+".join(str(r) for r in ins) + ">" + str(out)
        return "+".join(str(r) for r in self.rows)


LEDGER_CSV_HEADER = ["start_ns", "duration_ns", "op", "rows", "energy_fj"]


class EventLedger:
    """Append-only, time-ordered record of executed operations."""

    def __init__(self) -> None:
        self.entries: list[LedgerEntry] = []

    def append(self, entry: LedgerEntry) -> None:
        if self.entries and entry.start_ns < self.entries[-1].start_ns:
            raise ValueError(
                f"ledger entries must be appended in start-time order: "
                f"{entry.start_ns} after {self.entries[-1].start_ns}"
            )
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def total_energy_fj(self) -> float:
        return sum(e.energy_fj for e in self.entries)

    def makespan_ns(self) -> int:
        """End of the last operation, measured from simulation time 0."""
        return max((e.end_ns for e in self.entries), default=0)

    def refresh_time_ns(self) -> int:
        return sum(e.duration_ns for e in self.entries if e.op == OpKind.REFRESH.value)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LEDGER_CSV_HEADER)
            for e in self.entries:
                writer.writerow(
                    [e.start_ns, e.duration_ns, e.op, e.rows_label(), repr(e.energy_fj)]
                )

    @staticmethod
    def read_csv_rows(path) -> list[dict]:
        """Parse a ledger CSV back into dicts (used by the report command)."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != LEDGER_CSV_HEADER:
                raise ValueError(
                    f"{path}: not a ledger CSV (header {reader.fieldnames})"
                )
            rows = []
            for line in reader:
                rows.append(
                    {
                        "start_ns": int(line["start_ns"]),
                        "duration_ns": int(line["duration_ns"]),
                        "op": line["op"],
                        "rows": line["rows"],
                        "energy_fj": float(line["energy_fj"]),
                    }
                )
        return rows


@dataclass(frozen=True)
class TraceSample:
    time_ns: int
    signal: str
    value: float


class SubArray:
    """One 64x64 tile of gain cells plus its per-column sense amplifiers.

    Operations are strictly sequential within a tile: callers supply each
    op's start time and those times must be non-decreasing.  Distinct tiles
    share no state and may be simulated concurrently.
    """

    def __init__(
        self,
        model: ModelConfig,
        timing: TimingEnergyConfig | None = None,
        rows: int = 64,
        cols: int = 64,
        *,
        tau_scale=None,
        drive_offset=None,
        sa_threshold=None,
        trace: bool = False,
    ) -> None:
        if rows <= 0 or cols <= 0:
            raise ConfigError(f"bad dimensions {rows}x{cols}")
        self.model = model
        self.timing = timing or TimingEnergyConfig()
        self.rows = rows
        self.cols = cols
        self.voltage = np.zeros((rows, cols))
        self.last_update = np.zeros((rows, cols), dtype=np.int64)
        self.tau_scale = self._grid(tau_scale, 1.0)
        self.drive_offset = self._grid(drive_offset, 0.0)
        if sa_threshold is None:
            self.sa_threshold = np.full(cols, model.v_sa_read)
        else:
            self.sa_threshold = np.asarray(sa_threshold, dtype=float).copy()
            if self.sa_threshold.shape != (cols,):
                raise ConfigError(
                    f"sa_threshold must have one entry per column ({cols})"
                )
        if np.any(self.tau_scale <= 0):
            raise ConfigError("tau_scale grid must be strictly positive")
        self.ledger = EventLedger()
        self.trace_samples: list[TraceSample] | None = [] if trace else None

    def _grid(self, values, fill: float) -> np.ndarray:
        if values is None:
            return np.full((self.rows, self.cols), fill)
        arr = np.asarray(values, dtype=float).copy()
        if arr.shape != (self.rows, self.cols):
            raise ConfigError(
                f"grid shape {arr.shape} does not match {self.rows}x{self.cols}"
            )
        return arr

    # -- state access -------------------------------------------------

    def cell_state(self, row: int, col: int) -> CellState:
        return CellState(
            voltage=float(self.voltage[row, col]),
            last_update=int(self.last_update[row, col]),
        )

    def cell_params(self, row: int, col: int) -> CellParams:
        return CellParams(
            tau_scale=float(self.tau_scale[row, col]),
            drive_offset=float(self.drive_offset[row, col]),
        )

    def _check_row(self, row: int) -> None:
        if not (0 <= row < self.rows):
            raise IndexError(f"row {row} out of range [0, {self.rows})")

    def _row_voltage_at(self, row: int, t: int) -> np.ndarray:
        """Row voltages decayed to time ``t`` (no state change)."""
        dt = np.maximum(t - self.last_update[row], 0)
        return self.voltage[row] * np.exp(
            -dt / (self.model.tau_ns * self.tau_scale[row])
        )

    def _record(self, t: int, kind: OpKind, rows: tuple[int, ...], n_inputs: int = 1) -> None:
        self.ledger.append(
            LedgerEntry(
                start_ns=t,
                duration_ns=self.timing.duration_ns(kind),
                op=kind.value,
                rows=rows,
                active_columns=self.cols,
                energy_fj=self.timing.energy_fj(kind, n_inputs, self.cols),
            )
        )

    def _sample_row(self, t: int, row: int, values: np.ndarray) -> None:
        if self.trace_samples is None:
            return
        for c in range(self.cols):
            self.trace_samples.append(
                TraceSample(time_ns=t, signal=f"sn_r{row}_c{c}", value=float(values[c]))
            )

    # -- operations ---------------------------------------------------

    def write_row(self, row: int, bits: Sequence[int], t_now: int) -> None:
        """Drive the row to full rail levels; the data is valid (and starts
        decaying) at the end of the 1 ns write pulse."""
        self._check_row(row)
        bits = np.asarray(bits)
        if bits.shape != (self.cols,):
            raise ValueError(f"need exactly {self.cols} bits, got shape {bits.shape}")
        t_done = t_now + self.timing.t_write_ns
        self.voltage[row] = np.where(bits != 0, self.model.vdd, 0.0)
        self.last_update[row] = t_done
        self._record(t_now, OpKind.WRITE, (row,))
        self._sample_row(t_done, row, self.voltage[row])

    def read_row(self, row: int, t_now: int) -> np.ndarray:
        """Sense the row against the per-column thresholds.

        Nondestructive: cell charge is untouched apart from the decay that
        time itself causes; the elapsed decay is folded into the stored
        state so cell_state() reflects the sensed level.
        """
        self._check_row(row)
        level = self._row_voltage_at(row, t_now)
        bits = np.greater_equal(level, self.sa_threshold).astype(np.uint8)
        self.voltage[row] = level
        self.last_update[row] = np.maximum(self.last_update[row], t_now)
        self._record(t_now, OpKind.READ, (row,))
        self._sample_row(t_now, row, level)
        return bits

    def refresh_row(self, row: int, t_now: int) -> np.ndarray:
        """Sense the row, then rewrite the sensed bits at full level.

        Takes ``t_read_ns + t_write_ns`` = 4 ns, so a full 64-row sweep
        costs 256 ns.  Recorded as a single REFRESH ledger entry.
        """
        self._check_row(row)
        level = self._row_voltage_at(row, t_now)
        bits = np.greater_equal(level, self.sa_threshold).astype(np.uint8)
        t_done = t_now + self.timing.t_refresh_ns
        self.voltage[row] = np.where(bits != 0, self.model.vdd, 0.0)
        self.last_update[row] = t_done
        self._record(t_now, OpKind.REFRESH, (row,))
        self._sample_row(t_now, row, level)
        self._sample_row(t_done, row, self.voltage[row])
        return bits

    def refresh_all(self, t_now: int) -> int:
        """Refresh every row back to back; returns the total duration."""
        t = t_now
        for row in range(self.rows):
            self.refresh_row(row, t)
            t += self.timing.t_refresh_ns
        return t - t_now

    def exec_logic(self, in_rows: Sequence[int], out_row: int, t_now: int) -> None:
        """Two-phase stateful gate: NOT for one input row, NOR for several.

        Phase 1 (1 ns) precharges every output-row cell to '1'.  Phase 2
        (2 ns) asserts the input rows' read word lines; any input cell still
        holding enough charge opens a discharge path and pulls its column's
        output cell low.  Input cells only age; they are never disturbed.
        """
        in_rows = tuple(in_rows)
        # constructing the op runs the structural checks (disjoint rows etc)
        MicroOp(kind=OpKind.LOGIC, rows=in_rows, out_row=out_row, t_start_ns=t_now)
        for r in (*in_rows, out_row):
            self._check_row(r)
        t_eval = t_now + self.timing.t_init_ns
        t_done = t_now + self.timing.t_logic_ns

        if self.trace_samples is not None:
            self._sample_row(t_now, out_row, self._row_voltage_at(out_row, t_now))
            self._sample_row(t_eval, out_row, np.full(self.cols, self.model.vdd))

        total = np.zeros(self.cols)
        for r in in_rows:
            level = self._row_voltage_at(r, t_eval)
            total += overdrive(level, self.drive_offset[r], self.model)
            self._sample_row(t_eval, r, level)
        out_level = residual_from_overdrive(total, self.model)

        self.voltage[out_row] = out_level
        self.last_update[out_row] = t_done
        self._record(t_now, OpKind.LOGIC, (*in_rows, out_row), n_inputs=len(in_rows))
        self._sample_row(t_done, out_row, self.voltage[out_row])

    # -- trace export -------------------------------------------------

    def dump_trace(self, t_start_ns: int, t_end_ns: int) -> list[TraceSample]:
        """Samples recorded within [t_start_ns, t_end_ns], sorted by time
        then signal name.  Empty when tracing was off or the window is empty.
        """
        if self.trace_samples is None:
            return []
        window = [
            s for s in self.trace_samples if t_start_ns <= s.time_ns <= t_end_ns
        ]
        return sorted(window, key=lambda s: (s.time_ns, s.signal))

    def trace_to_csv(self, path, t_start_ns: int = 0, t_end_ns: int | None = None) -> None:
        if t_end_ns is None:
            t_end_ns = self.ledger.makespan_ns()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_ns", "signal", "value"])
            for s in self.dump_trace(t_start_ns, t_end_ns):
                writer.writerow([s.time_ns, s.signal, repr(s.value)])
