"""Scheduled micro-op programs: emission, refresh insertion, audits, JSON.

A compiled program is a straight-line, back-to-back sequence of micro-ops
for one sub-array: constant writes, operand writes, one LOGIC op per
netlist gate in topological order, and one READ per program output.
Refresh insertion then walks the timed sequence and splices REFRESH ops
in front of any op that would otherwise consume a value older than the
logic retention budget, plus (for very long programs) wherever a live
value would outlive the read retention window and become unrefreshable.
Insertion is greedy latest-possible: a refresh lands immediately before
the op that needs it, never earlier than required.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, replace

from gcpim.charge import ConfigError, ModelConfig
from gcpim.subarray import MicroOp, OpKind, TimingEnergyConfig
from gcpim.compiler.allocate import RowAssignment, allocate_rows
from gcpim.compiler.expr import Program, parse_program
from gcpim.compiler.netlist import NorNetlist, lower_program

__all__ = [
    "AuditViolation",
    "CompilerConfig",
    "PimProgram",
    "RefreshScheduleError",
    "audit_refresh_safety",
    "audit_row_soundness",
    "compile_program",
    "emit_ops",
    "insert_refresh",
]

PROGRAM_FORMAT = "gcpim-program"
PROGRAM_VERSION = 1


class RefreshScheduleError(RuntimeError):
    """A required refresh could not be placed while its row was still
    readable.  Unreachable for the default retention windows; kept as a
    guard for degenerate configurations."""


@dataclass(frozen=True)
class CompilerConfig:
    rows: int = 64
    cols: int = 64
    rows_available: int = 62
    max_nor_arity: int = 2
    insert_refreshes: bool = True

    def __post_init__(self) -> None:
        if self.rows < 4 or self.cols < 1:
            raise ConfigError(f"implausible array shape {self.rows}x{self.cols}")
        if not (1 <= self.rows_available <= self.rows - 2):
            raise ConfigError(
                "rows_available must leave the two reserved constant rows"
            )
        if not (2 <= self.max_nor_arity <= self.rows_available - 1):
            raise ConfigError("max_nor_arity out of range for the row budget")


@dataclass(frozen=True)
class PimProgram:
    """Timestamped micro-op program plus the metadata to run and audit it."""

    ops: tuple[MicroOp, ...]
    netlist: NorNetlist
    assignment: RowAssignment
    timing: TimingEnergyConfig
    drt_logic_ns: int
    drt_read_ns: int
    rows: int
    cols: int
    logic_nodes: tuple = ()   # per op: netlist node id for LOGIC ops, else None
    read_outputs: tuple = ()  # per op: output name for output READ ops, else None

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.netlist.inputs

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.netlist.outputs)

    @property
    def n_refresh(self) -> int:
        return sum(1 for op in self.ops if op.kind is OpKind.REFRESH)

    @property
    def duration_ns(self) -> int:
        if not self.ops:
            return 0
        last = self.ops[-1]
        return last.t_start_ns + self.timing.duration_ns(last.kind)

    @property
    def energy_fj(self) -> float:
        return sum(
            self.timing.energy_fj(op.kind, len(op.rows), self.cols)
            for op in self.ops
        )

    def stats(self) -> dict:
        return {
            "n_gates": self.netlist.n_gates,
            "n_not": self.netlist.n_not,
            "n_nor": self.netlist.n_nor,
            "n_ops": len(self.ops),
            "n_refresh": self.n_refresh,
            "peak_live_rows": self.assignment.peak_live,
            "rows_available": self.assignment.rows_available,
            "duration_ns": self.duration_ns,
            "energy_fj": self.energy_fj,
        }

    # -- serialization -------------------------------------------------

    def to_json_dict(self) -> dict:
        ops = []
        for i, op in enumerate(self.ops):
            entry: dict = {"op": op.kind.value, "rows": list(op.rows),
                           "t_start_ns": op.t_start_ns}
            if op.out_row is not None:
                entry["out_row"] = op.out_row
            if op.bits is not None:
                entry["bits"] = list(op.bits)
            if op.source is not None:
                entry["source"] = op.source
            if self.logic_nodes and self.logic_nodes[i] is not None:
                entry["node"] = self.logic_nodes[i]
            if self.read_outputs and self.read_outputs[i] is not None:
                entry["output"] = self.read_outputs[i]
            ops.append(entry)
        a = self.assignment
        return {
            "format": PROGRAM_FORMAT,
            "version": PROGRAM_VERSION,
            "rows": self.rows,
            "cols": self.cols,
            "drt_logic_ns": self.drt_logic_ns,
            "drt_read_ns": self.drt_read_ns,
            "timing_energy": {
                k: getattr(self.timing, k)
                for k in ("t_write_ns", "t_read_ns", "t_init_ns", "t_eval_ns",
                          "e_write_fj", "e_read_fj", "e_not_fj", "e_nor_fj",
                          "e_dual_sense_fj")
            },
            "netlist": self.netlist.to_json_dict(),
            "row_assignment": {
                "row_of": {str(nid): row for nid, row in sorted(a.row_of.items())},
                "input_rows": dict(a.input_rows),
                "const_rows": {str(v): row for v, row in sorted(a.const_rows.items())},
                "output_rows": dict(a.output_rows),
                "peak_live": a.peak_live,
                "rows_available": a.rows_available,
            },
            "ops": ops,
            "stats": self.stats(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_json_dict(data: dict) -> "PimProgram":
        if data.get("format") != PROGRAM_FORMAT:
            raise ValueError("not a compiled program file")
        if data.get("version") != PROGRAM_VERSION:
            raise ValueError(f"unsupported program version {data.get('version')}")
        timing = TimingEnergyConfig(**data["timing_energy"])
        netlist = NorNetlist.from_json_dict(data["netlist"])
        ra = data["row_assignment"]
        assignment = RowAssignment(
            row_of={int(k): v for k, v in ra["row_of"].items()},
            input_rows=dict(ra["input_rows"]),
            const_rows={int(k): v for k, v in ra["const_rows"].items()},
            output_rows=dict(ra["output_rows"]),
            peak_live=int(ra["peak_live"]),
            rows_available=int(ra["rows_available"]),
        )
        ops, logic_nodes, read_outputs = [], [], []
        for entry in data["ops"]:
            ops.append(
                MicroOp(
                    kind=OpKind(entry["op"]),
                    rows=tuple(entry["rows"]),
                    out_row=entry.get("out_row"),
                    bits=tuple(entry["bits"]) if "bits" in entry else None,
                    source=entry.get("source"),
                    t_start_ns=int(entry["t_start_ns"]),
                )
            )
            logic_nodes.append(entry.get("node"))
            read_outputs.append(entry.get("output"))
        return PimProgram(
            ops=tuple(ops),
            netlist=netlist,
            assignment=assignment,
            timing=timing,
            drt_logic_ns=int(data["drt_logic_ns"]),
            drt_read_ns=int(data["drt_read_ns"]),
            rows=int(data["rows"]),
            cols=int(data["cols"]),
            logic_nodes=tuple(logic_nodes),
            read_outputs=tuple(read_outputs),
        )

    @staticmethod
    def from_json(path) -> "PimProgram":
        with open(path) as fh:
            return PimProgram.from_json_dict(json.load(fh))


def emit_ops(
    netlist: NorNetlist, assignment: RowAssignment, timing: TimingEnergyConfig
) -> tuple[list[MicroOp], list, list]:
    """Untimed op sequence: constants, operands, gates, output reads."""
    ops: list[MicroOp] = []
    logic_nodes: list = []
    read_outputs: list = []

    def push(op: MicroOp, node=None, output=None) -> None:
        ops.append(op)
        logic_nodes.append(node)
        read_outputs.append(output)

    for value in sorted(assignment.const_rows):
        push(MicroOp(OpKind.WRITE, (assignment.const_rows[value],),
                     source=f"const:{value}"))
    for name in netlist.inputs:
        push(MicroOp(OpKind.WRITE, (assignment.input_rows[name],),
                     source=f"input:{name}"))
    for nid in netlist.gate_ids():
        node = netlist.nodes[nid]
        in_rows = tuple(assignment.row_of[a] for a in node.args)
        push(MicroOp(OpKind.LOGIC, in_rows, out_row=assignment.row_of[nid]),
             node=nid)
    for name, nid in netlist.outputs:
        push(MicroOp(OpKind.READ, (assignment.row_of[nid],)), output=name)
    return ops, logic_nodes, read_outputs


def with_timestamps(
    ops: list[MicroOp], timing: TimingEnergyConfig, t_start: int = 0
) -> list[MicroOp]:
    """Back-to-back schedule: each op starts when the previous one ends."""
    out = []
    t = t_start
    for op in ops:
        out.append(replace(op, t_start_ns=t))
        t += timing.duration_ns(op.kind)
    return out


def _consumed_rows(op: MicroOp) -> tuple[int, ...]:
    if op.kind is OpKind.READ:
        return op.rows
    if op.kind is OpKind.LOGIC:
        return op.rows  # input rows; the output row's old value is not consumed
    return ()


def _consumption_offset(op: MicroOp, timing: TimingEnergyConfig) -> int:
    # READ senses at pulse start; LOGIC samples inputs when the
    # evaluation phase begins
    return timing.t_init_ns if op.kind is OpKind.LOGIC else 0


def insert_refresh(program: "PimProgram", drt_logic_ns: int | None = None) -> "PimProgram":
    """Splice in the refreshes needed to honor the retention budgets.

    Every consumed value must be at most drt_logic_ns old at its
    consumption instant, and every live value must stay young enough
    (drt_read_ns) that a refresh can still sense it correctly.
    Timestamps are recomputed; the result is a new program.
    """
    budget = program.drt_logic_ns if drt_logic_ns is None else drt_logic_ns
    drt_read = program.drt_read_ns
    timing = program.timing

    # original-order consumption and redefinition indices per row, for
    # "does the value now in this row have a later consumer" queries
    # while the walk splices new ops in.  Uses past the row's next
    # redefinition belong to a different value and must not count.
    future_use: dict[int, list[int]] = {}
    redefs: dict[int, list[int]] = {}
    for i, op in enumerate(program.ops):
        for r in _consumed_rows(op):
            future_use.setdefault(r, []).append(i)
        if op.kind is OpKind.WRITE:
            redefs.setdefault(op.rows[0], []).append(i)
        elif op.kind is OpKind.LOGIC:
            redefs.setdefault(op.out_row, []).append(i)

    def needed_after(row: int, i: int) -> bool:
        uses = future_use.get(row, ())
        j = bisect.bisect_right(uses, i)
        if j >= len(uses):
            return False
        defs = redefs.get(row, ())
        d = bisect.bisect_right(defs, i)
        return d >= len(defs) or uses[j] < defs[d]

    new_ops: list[MicroOp] = []
    new_nodes: list = []
    new_reads: list = []
    t = 0
    t_valid: dict[int, int] = {}

    def emit_refresh(row: int) -> None:
        nonlocal t
        if t - t_valid[row] > drt_read:
            raise RefreshScheduleError(
                f"row {row} is {t - t_valid[row]}ns old at t={t}ns; its "
                f"refresh would sense garbage (limit {drt_read}ns)"
            )
        new_ops.append(MicroOp(OpKind.REFRESH, (row,), t_start_ns=t))
        new_nodes.append(None)
        new_reads.append(None)
        t_valid[row] = t + timing.t_refresh_ns
        t += timing.t_refresh_ns

    for i, op in enumerate(program.ops):
        if op.kind is OpKind.REFRESH:
            # re-inserting over an already-refreshed program: drop old
            # refreshes, they are re-derived below
            continue
        dur = timing.duration_ns(op.kind)
        offset = _consumption_offset(op, timing)
        while True:
            stale = [
                r for r in _consumed_rows(op)
                if r in t_valid and (t + offset) - t_valid[r] > budget
            ]
            expiring = [
                r for r in sorted(t_valid)
                if needed_after(r, i) and t + dur > t_valid[r] + drt_read
            ]
            candidates = sorted(set(stale) | set(expiring))
            if not candidates:
                break
            emit_refresh(candidates[0])
        new_ops.append(replace(op, t_start_ns=t))
        new_nodes.append(program.logic_nodes[i] if program.logic_nodes else None)
        new_reads.append(program.read_outputs[i] if program.read_outputs else None)
        if op.kind is OpKind.WRITE:
            t_valid[op.rows[0]] = t + timing.t_write_ns
        elif op.kind is OpKind.LOGIC:
            t_valid[op.out_row] = t + timing.t_logic_ns
        t += dur

    return replace(
        program,
        ops=tuple(new_ops),
        logic_nodes=tuple(new_nodes),
        read_outputs=tuple(new_reads),
    )


@dataclass(frozen=True)
class AuditViolation:
    op_index: int
    t_ns: int
    row: int
    kind: str
    message: str


def audit_refresh_safety(program: PimProgram, drt_logic_ns: int | None = None,
                         drt_read_ns: int | None = None) -> list[AuditViolation]:
    """Independent timestamp replay; returns every stale consumption.

    Checks both budgets: consumed values must be within the logic window,
    and refreshes must sense values still within the read window.
    """
    budget = program.drt_logic_ns if drt_logic_ns is None else drt_logic_ns
    drt_read = program.drt_read_ns if drt_read_ns is None else drt_read_ns
    timing = program.timing
    violations: list[AuditViolation] = []
    t_valid: dict[int, int] = {}

    for i, op in enumerate(program.ops):
        t = op.t_start_ns
        if op.kind is OpKind.REFRESH:
            row = op.rows[0]
            if row not in t_valid:
                violations.append(AuditViolation(i, t, row, "unwritten",
                                                 f"refresh of never-written row {row}"))
            elif t - t_valid[row] > drt_read:
                violations.append(AuditViolation(
                    i, t, row, "stale-refresh",
                    f"refresh senses row {row} at age {t - t_valid[row]}ns "
                    f"(> {drt_read}ns)"))
            t_valid[row] = t + timing.t_refresh_ns
            continue
        t_c = t + _consumption_offset(op, timing)
        for row in _consumed_rows(op):
            if row not in t_valid:
                violations.append(AuditViolation(i, t_c, row, "unwritten",
                                                 f"row {row} consumed before any write"))
            elif t_c - t_valid[row] > budget:
                violations.append(AuditViolation(
                    i, t_c, row, "stale-value",
                    f"row {row} consumed at age {t_c - t_valid[row]}ns "
                    f"(> {budget}ns)"))
        if op.kind is OpKind.WRITE:
            t_valid[op.rows[0]] = t + timing.t_write_ns
        elif op.kind is OpKind.LOGIC:
            t_valid[op.out_row] = t + timing.t_logic_ns
    return violations


def audit_row_soundness(program: PimProgram) -> list[AuditViolation]:
    """Symbolic replay of row contents: every consumed row must hold
    exactly the netlist value the op was compiled against."""
    netlist = program.netlist
    input_ids = {
        n.name: i for i, n in enumerate(netlist.nodes) if n.op == "input"
    }
    const_ids = {
        n.value: i for i, n in enumerate(netlist.nodes) if n.op == "const"
    }
    contents: dict[int, int] = {}  # row -> node id
    violations: list[AuditViolation] = []

    def check(i: int, op: MicroOp, row: int, expected: int) -> None:
        found = contents.get(row)
        if found != expected:
            violations.append(AuditViolation(
                i, op.t_start_ns, row, "clobbered",
                f"row {row} holds node {found}, expected node {expected}"))

    for i, op in enumerate(program.ops):
        if op.kind is OpKind.WRITE:
            row = op.rows[0]
            if op.source and op.source.startswith("input:"):
                contents[row] = input_ids[op.source.split(":", 1)[1]]
            elif op.source and op.source.startswith("const:"):
                contents[row] = const_ids[int(op.source.split(":", 1)[1])]
            else:
                contents.pop(row, None)  # literal data: no netlist identity
        elif op.kind is OpKind.LOGIC:
            nid = program.logic_nodes[i] if program.logic_nodes else None
            if nid is not None:
                expected_args = set(netlist.nodes[nid].args)
                found_args = {contents.get(r) for r in op.rows}
                if found_args != expected_args:
                    violations.append(AuditViolation(
                        i, op.t_start_ns, op.out_row, "clobbered",
                        f"gate {nid} reads rows holding {sorted(map(str, found_args))}, "
                        f"expected nodes {sorted(expected_args)}"))
                contents[op.out_row] = nid
            else:
                contents.pop(op.out_row, None)
        elif op.kind is OpKind.READ:
            name = program.read_outputs[i] if program.read_outputs else None
            if name is not None:
                check(i, op, op.rows[0], netlist.output_map[name])
    return violations


def compile_program(
    source,
    compiler_cfg: CompilerConfig | None = None,
    model_cfg: ModelConfig | None = None,
    timing_cfg: TimingEnergyConfig | None = None,
) -> PimProgram:
    """Full pipeline: parse, lower, allocate, emit, timestamp, refresh.

    ``source`` is program text, a parsed Program, or a NorNetlist.
    """
    cfg = compiler_cfg or CompilerConfig()
    model = model_cfg or ModelConfig()
    timing = timing_cfg or TimingEnergyConfig()

    if isinstance(source, str):
        source = parse_program(source)
    if isinstance(source, Program):
        netlist = lower_program(source, cfg.max_nor_arity)
    elif isinstance(source, NorNetlist):
        netlist = source
    else:
        raise TypeError(f"cannot compile {type(source).__name__}")

    assignment = allocate_rows(netlist, cfg.rows_available)
    used_rows = set(assignment.row_of.values())
    if used_rows and max(used_rows) >= cfg.rows:
        raise ConfigError(
            f"assignment uses row {max(used_rows)} outside the {cfg.rows}-row array"
        )

    ops, logic_nodes, read_outputs = emit_ops(netlist, assignment, timing)
    program = PimProgram(
        ops=tuple(with_timestamps(ops, timing)),
        netlist=netlist,
        assignment=assignment,
        timing=timing,
        drt_logic_ns=model.drt_logic_ns,
        drt_read_ns=model.drt_read_ns,
        rows=cfg.rows,
        cols=cfg.cols,
        logic_nodes=tuple(logic_nodes),
        read_outputs=tuple(read_outputs),
    )
    if cfg.insert_refreshes:
        program = insert_refresh(program)
    return program
