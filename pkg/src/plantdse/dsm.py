"""Design space matrix: ports, permissible connections, design enumeration.

A design space is given as a boolean matrix over module output ports (rows)
and input ports (columns), plus per-port connection-count bounds and an
optional all-or-none rule per module (either every port of the module is
connected or none is). A design is one admissible subset of the allowed
cells; designs are enumerated in a fixed lexicographic order over the
connection bitvector so design ids are reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence


class DsmError(ValueError):
    """Malformed or infeasible design space matrix document."""


@dataclass(frozen=True)
class PortRef:
    """One module port; (module_id, port_name, direction) is unique per DSM."""

    module_id: str
    port_name: str
    direction: str  # "output" | "input"

    @property
    def key(self) -> str:
        return f"{self.module_id}.{self.port_name}"

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class PortBounds:
    min_connections: int
    max_connections: int

    def __post_init__(self) -> None:
        if self.min_connections < 0:
            raise DsmError(f"negative min_connections: {self.min_connections}")
        if self.min_connections > self.max_connections:
            raise DsmError(
                f"bounds with min > max: ({self.min_connections}, {self.max_connections})"
            )


@dataclass(frozen=True)
class Design:
    """A concrete set of port-to-port connections selecting active modules.

    ``design_id`` is the 0-based position in the deterministic enumeration
    order of the source DSM. Connections are (output key, input key) pairs
    using the ``module.port`` key form.
    """

    design_id: int
    connections: frozenset[tuple[str, str]]
    active_modules: frozenset[str]

    @staticmethod
    def from_connections(connections: Iterable[tuple[str, str]], design_id: int = -1) -> "Design":
        conns = frozenset((str(o), str(i)) for o, i in connections)
        modules = frozenset(k.split(".", 1)[0] for pair in conns for k in pair)
        return Design(design_id=design_id, connections=conns, active_modules=modules)


@dataclass(frozen=True)
class DesignSpaceMatrix:
    output_ports: tuple[PortRef, ...]
    input_ports: tuple[PortRef, ...]
    allowed: tuple[tuple[bool, ...], ...]  # [out_index][in_index]
    bounds: Mapping[str, PortBounds]  # keyed by "module.port"
    all_or_none_modules: frozenset[str]

    @cached_property
    def cells(self) -> tuple[tuple[int, int], ...]:
        """Allowed cells in (output, input) index order — the bitvector order."""
        return tuple(
            (o, i)
            for o in range(len(self.output_ports))
            for i in range(len(self.input_ports))
            if self.allowed[o][i]
        )

    @cached_property
    def out_bounds(self) -> tuple[PortBounds, ...]:
        return tuple(self.bounds[p.key] for p in self.output_ports)

    @cached_property
    def in_bounds(self) -> tuple[PortBounds, ...]:
        return tuple(self.bounds[p.key] for p in self.input_ports)

    @cached_property
    def modules(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for p in (*self.output_ports, *self.input_ports):
            seen.setdefault(p.module_id, None)
        return tuple(seen)

    def port_by_key(self, key: str) -> PortRef:
        for p in (*self.output_ports, *self.input_ports):
            if p.key == key:
                return p
        raise DsmError(f"unknown port: {key}")


def make_dsm(
    output_ports: Sequence[PortRef],
    input_ports: Sequence[PortRef],
    allowed_pairs: Iterable[tuple[int, int]],
    bounds: Mapping[str, tuple[int, int] | PortBounds],
    all_or_none_modules: Iterable[str] = (),
) -> DesignSpaceMatrix:
    """Build and validate a DesignSpaceMatrix from index pairs and bounds.

    Ports missing from ``bounds`` default to (0, number of allowed cells on
    that port). Bounds whose min exceeds the port's allowed-cell count (or
    whose max does) are rejected: no valid design could exist for that port.
    """
    outs = tuple(output_ports)
    ins = tuple(input_ports)
    seen: set[tuple[str, str, str]] = set()
    for p in (*outs, *ins):
        if p.direction not in ("output", "input"):
            raise DsmError(f"bad port direction for {p.key}: {p.direction}")
        ident = (p.module_id, p.port_name, p.direction)
        if ident in seen:
            raise DsmError(f"duplicate port: {p.key} ({p.direction})")
        seen.add(ident)

    matrix = [[False] * len(ins) for _ in outs]
    for o, i in allowed_pairs:
        if not (0 <= o < len(outs)) or not (0 <= i < len(ins)):
            raise DsmError(f"allowed pair out of range: ({o}, {i})")
        matrix[o][i] = True

    key_to_port: dict[str, PortRef] = {}
    for p in (*outs, *ins):
        if p.key in key_to_port:
            # same module.port key used as both output and input
            raise DsmError(f"ambiguous port key used for both directions: {p.key}")
        key_to_port[p.key] = p

    row_counts = [sum(row) for row in matrix]
    col_counts = [sum(matrix[o][i] for o in range(len(outs))) for i in range(len(ins))]

    norm_bounds: dict[str, PortBounds] = {}
    for key, b in bounds.items():
        if key not in key_to_port:
            raise DsmError(f"bounds reference unknown port: {key}")
        norm_bounds[key] = b if isinstance(b, PortBounds) else PortBounds(*b)
    for idx, p in enumerate(outs):
        norm_bounds.setdefault(p.key, PortBounds(0, row_counts[idx]))
    for idx, p in enumerate(ins):
        norm_bounds.setdefault(p.key, PortBounds(0, col_counts[idx]))

    for idx, p in enumerate(outs):
        b = norm_bounds[p.key]
        if b.min_connections > row_counts[idx] or b.max_connections > row_counts[idx]:
            raise DsmError(
                f"no valid design for output port {p.key}: bounds "
                f"({b.min_connections}, {b.max_connections}) exceed its "
                f"{row_counts[idx]} allowed cells"
            )
    for idx, p in enumerate(ins):
        b = norm_bounds[p.key]
        if b.min_connections > col_counts[idx] or b.max_connections > col_counts[idx]:
            raise DsmError(
                f"no valid design for input port {p.key}: bounds "
                f"({b.min_connections}, {b.max_connections}) exceed its "
                f"{col_counts[idx]} allowed cells"
            )

    module_ids = {p.module_id for p in (*outs, *ins)}
    aon = frozenset(all_or_none_modules)
    unknown = aon - module_ids
    if unknown:
        raise DsmError(f"all-or-none rule references unknown modules: {sorted(unknown)}")

    return DesignSpaceMatrix(
        output_ports=outs,
        input_ports=ins,
        allowed=tuple(tuple(row) for row in matrix),
        bounds=norm_bounds,
        all_or_none_modules=aon,
    )


# ---------------------------------------------------------------------------
# parsing


def parse_dsm(document: str | Mapping) -> DesignSpaceMatrix:
    """Parse the DSM JSON document (text or already-decoded mapping).

    Schema: ``output_ports`` / ``input_ports`` as arrays of ``{module, port}``
    objects, ``allowed`` as an array of ``[out_index, in_index]`` pairs,
    ``bounds`` as a map from ``"module.port"`` to ``{min, max}``, and
    ``all_or_none_modules`` as an array of module ids. Unknown top-level keys
    (e.g. ``notes``) are ignored.
    """
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise DsmError(f"not valid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, Mapping):
        raise DsmError("DSM document must be a JSON object")
    for req in ("output_ports", "input_ports", "allowed", "bounds"):
        if req not in doc:
            raise DsmError(f"missing required key: {req}")

    def ports(items, direction):
        refs = []
        for item in items:
            if not isinstance(item, Mapping) or "module" not in item or "port" not in item:
                raise DsmError(f"bad port entry in {direction}_ports: {item!r}")
            refs.append(PortRef(str(item["module"]), str(item["port"]), direction))
        return refs

    outs = ports(doc["output_ports"], "output")
    ins = ports(doc["input_ports"], "input")

    pairs = []
    for pair in doc["allowed"]:
        if not isinstance(pair, Sequence) or len(pair) != 2:
            raise DsmError(f"bad allowed entry: {pair!r}")
        pairs.append((int(pair[0]), int(pair[1])))

    bounds = {}
    for key, b in doc["bounds"].items():
        if not isinstance(b, Mapping) or "min" not in b or "max" not in b:
            raise DsmError(f"bad bounds for {key}: {b!r}")
        bounds[key] = PortBounds(int(b["min"]), int(b["max"]))

    return make_dsm(outs, ins, pairs, bounds, doc.get("all_or_none_modules", ()))


def dsm_to_json(dsm: DesignSpaceMatrix) -> dict:
    return {
        "output_ports": [{"module": p.module_id, "port": p.port_name} for p in dsm.output_ports],
        "input_ports": [{"module": p.module_id, "port": p.port_name} for p in dsm.input_ports],
        "allowed": [[o, i] for o, i in dsm.cells],
        "bounds": {
            key: {"min": b.min_connections, "max": b.max_connections}
            for key, b in sorted(dsm.bounds.items())
        },
        "all_or_none_modules": sorted(dsm.all_or_none_modules),
    }


_CSV_MARKS = {"x", "X", "✓", "1", "true", "yes"}
_MIN_LABEL = "Min. connections"
_MAX_LABEL = "Max. connections"
_AON_LABEL = "All-or-none modules"


def parse_dsm_csv(text: str) -> DesignSpaceMatrix:
    """Parse the matrix-shaped CSV rendering (header row/column of port keys,
    trailing min/max rows and columns, optional all-or-none row)."""
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise DsmError("empty CSV document")
    header = rows[0]
    try:
        min_col = header.index(_MIN_LABEL)
        max_col = header.index(_MAX_LABEL)
    except ValueError as exc:
        raise DsmError("CSV header must contain min/max connection columns") from exc
    in_keys = [c.strip() for c in header[1:min_col]]

    out_keys: list[str] = []
    pairs: list[tuple[int, int]] = []
    bounds: dict[str, tuple[int, int]] = {}
    aon: list[str] = []
    for row in rows[1:]:
        label = row[0].strip()
        if label == _AON_LABEL:
            aon = row[1].split() if len(row) > 1 else []
            continue
        if label in (_MIN_LABEL, _MAX_LABEL):
            for i, key in enumerate(in_keys):
                cell = row[1 + i].strip()
                if not cell:
                    raise DsmError(f"missing {label} for input port {key}")
                lo, hi = bounds.get(key, (0, 0))
                bounds[key] = (int(cell), hi) if label == _MIN_LABEL else (lo, int(cell))
            continue
        o = len(out_keys)
        out_keys.append(label)
        for i in range(len(in_keys)):
            if row[1 + i].strip() in _CSV_MARKS:
                pairs.append((o, i))
        bounds[label] = (int(row[min_col]), int(row[max_col]))

    def split(key: str, direction: str) -> PortRef:
        if "." not in key:
            raise DsmError(f"port key without module prefix: {key}")
        mod, port = key.split(".", 1)
        return PortRef(mod, port, direction)

    return make_dsm(
        [split(k, "output") for k in out_keys],
        [split(k, "input") for k in in_keys],
        pairs,
        bounds,
        aon,
    )


def dsm_to_csv(dsm: DesignSpaceMatrix) -> str:
    """Render the DSM as the matrix-shaped CSV (lossless round-trip)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    in_keys = [p.key for p in dsm.input_ports]
    writer.writerow([""] + in_keys + [_MIN_LABEL, _MAX_LABEL])
    for o, port in enumerate(dsm.output_ports):
        b = dsm.bounds[port.key]
        marks = ["x" if dsm.allowed[o][i] else "" for i in range(len(in_keys))]
        writer.writerow([port.key] + marks + [b.min_connections, b.max_connections])
    writer.writerow(
        [_MIN_LABEL] + [dsm.bounds[k].min_connections for k in in_keys] + ["", ""]
    )
    writer.writerow(
        [_MAX_LABEL] + [dsm.bounds[k].max_connections for k in in_keys] + ["", ""]
    )
    if dsm.all_or_none_modules:
        writer.writerow([_AON_LABEL, " ".join(sorted(dsm.all_or_none_modules))])
    return buf.getvalue()


def load_dsm(path) -> DesignSpaceMatrix:
    """Load a DSM from a JSON or CSV file (dispatch on content)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return parse_dsm(text)
    return parse_dsm_csv(text)


# ---------------------------------------------------------------------------
# enumeration

# Module bookkeeping for the all-or-none rule during search: a module is
# inconsistent as soon as one of its ports is known connected while another
# is finalized with zero connections.


class _AonTracker:
    __slots__ = ("n_connected", "n_zero")

    def __init__(self) -> None:
        self.n_connected = 0
        self.n_zero = 0

    @property
    def conflict(self) -> bool:
        return self.n_connected > 0 and self.n_zero > 0


def _iter_cell_sets(dsm: DesignSpaceMatrix) -> Iterator[tuple[tuple[int, int], ...]]:
    """Yield admissible cell subsets in bitvector-lexicographic order.

    Depth-first over cells in (output, input) index order, branching
    0-before-1, with feasibility pruning on residual row/column capacity and
    incremental all-or-none checks.
    """
    cells = dsm.cells
    n_cells = len(cells)
    n_out = len(dsm.output_ports)
    n_in = len(dsm.input_ports)

    out_min = [b.min_connections for b in dsm.out_bounds]
    out_max = [b.max_connections for b in dsm.out_bounds]
    in_min = [b.min_connections for b in dsm.in_bounds]
    in_max = [b.max_connections for b in dsm.in_bounds]

    out_count = [0] * n_out
    in_count = [0] * n_in
    out_remaining = [0] * n_out
    in_remaining = [0] * n_in
    for o, i in cells:
        out_remaining[o] += 1
        in_remaining[i] += 1

    trackers: dict[str, _AonTracker] = {m: _AonTracker() for m in dsm.all_or_none_modules}
    out_tracker = [trackers.get(p.module_id) for p in dsm.output_ports]
    in_tracker = [trackers.get(p.module_id) for p in dsm.input_ports]

    # Ports with no allowed cells are finalized at zero before the search.
    for o in range(n_out):
        if out_remaining[o] == 0:
            if out_min[o] > 0:
                return
            t = out_tracker[o]
            if t is not None:
                t.n_zero += 1
    for i in range(n_in):
        if in_remaining[i] == 0:
            if in_min[i] > 0:
                return
            t = in_tracker[i]
            if t is not None:
                t.n_zero += 1
    if any(t.conflict for t in trackers.values()):
        return

    chosen: list[tuple[int, int]] = []

    def walk(ptr: int) -> Iterator[tuple[tuple[int, int], ...]]:
        if ptr == n_cells:
            yield tuple(chosen)
            return
        o, i = cells[ptr]
        ot, it = out_tracker[o], in_tracker[i]
        out_remaining[o] -= 1
        in_remaining[i] -= 1

        # branch 0: leave the cell unconnected
        if (
            out_count[o] + out_remaining[o] >= out_min[o]
            and in_count[i] + in_remaining[i] >= in_min[i]
        ):
            o_zeroed = out_remaining[o] == 0 and out_count[o] == 0 and ot is not None
            i_zeroed = in_remaining[i] == 0 and in_count[i] == 0 and it is not None
            if o_zeroed:
                ot.n_zero += 1
            if i_zeroed:
                it.n_zero += 1
            if not (o_zeroed and ot.conflict) and not (i_zeroed and it.conflict):
                yield from walk(ptr + 1)
            if o_zeroed:
                ot.n_zero -= 1
            if i_zeroed:
                it.n_zero -= 1

        # branch 1: connect the cell
        if out_count[o] < out_max[o] and in_count[i] < in_max[i]:
            o_first = out_count[o] == 0 and ot is not None
            i_first = in_count[i] == 0 and it is not None
            out_count[o] += 1
            in_count[i] += 1
            if o_first:
                ot.n_connected += 1
            if i_first:
                it.n_connected += 1
            conflict = (o_first and ot.conflict) or (i_first and it.conflict)
            if not conflict:
                chosen.append((o, i))
                yield from walk(ptr + 1)
                chosen.pop()
            if o_first:
                ot.n_connected -= 1
            if i_first:
                it.n_connected -= 1
            out_count[o] -= 1
            in_count[i] -= 1

        out_remaining[o] += 1
        in_remaining[i] += 1

    yield from walk(0)


def enumerate_designs(dsm: DesignSpaceMatrix) -> Iterator[Design]:
    """Yield every valid design exactly once, in deterministic order.

    The order is lexicographic over the connection bitvector in
    (output, input) index order; design_id is the 0-based position.
    """
    outs = dsm.output_ports
    ins = dsm.input_ports
    for design_id, cell_set in enumerate(_iter_cell_sets(dsm)):
        connections = frozenset((outs[o].key, ins[i].key) for o, i in cell_set)
        active = frozenset(
            m
            for pair in ((outs[o].module_id, ins[i].module_id) for o, i in cell_set)
            for m in pair
        )
        yield Design(design_id=design_id, connections=connections, active_modules=active)


def count_designs(dsm: DesignSpaceMatrix) -> int:
    """Number of valid designs (iterates the enumeration without materializing)."""
    return sum(1 for _ in _iter_cell_sets(dsm))


def sample_designs(dsm: DesignSpaceMatrix, k: int, seed: int) -> list[Design]:
    """Draw k designs uniformly without replacement (reservoir over the stream).

    Deterministic for a fixed seed; returns all designs when k is at least
    the total count. The result is sorted by design_id.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    rng = random.Random(seed)
    reservoir: list[Design] = []
    for n, design in enumerate(enumerate_designs(dsm)):
        if n < k:
            reservoir.append(design)
        else:
            j = rng.randrange(n + 1)
            if j < k:
                reservoir[j] = design
    reservoir.sort(key=lambda d: d.design_id)
    return reservoir


def design_id_of(dsm: DesignSpaceMatrix, connections: Iterable[tuple[str, str]]) -> int | None:
    """Enumeration index of the given connection set, or None if not valid."""
    target = frozenset((str(o), str(i)) for o, i in connections)
    for design in enumerate_designs(dsm):
        if design.connections == target:
            return design.design_id
    return None


def design_by_id(dsm: DesignSpaceMatrix, design_id: int) -> Design:
    for design in enumerate_designs(dsm):
        if design.design_id == design_id:
            return design
    raise DsmError(f"design_id {design_id} out of range for this DSM")


def load_design(path, dsm: DesignSpaceMatrix | None = None) -> Design:
    """Load a design file: ``{"connections": [["out.port", "in.port"], ...]}``.

    When a DSM is given, the design's enumeration id is resolved against it.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    conns = [(str(o), str(i)) for o, i in doc["connections"]]
    design = Design.from_connections(conns, design_id=int(doc.get("design_id", -1)))
    if dsm is not None:
        resolved = design_id_of(dsm, conns)
        if resolved is None:
            raise DsmError("design file is not a valid design of the given DSM")
        design = Design(resolved, design.connections, design.active_modules)
    return design


def freeze_except(
    dsm: DesignSpaceMatrix,
    reference: Design,
    free_modules: Iterable[str],
) -> DesignSpaceMatrix:
    """Restrict the DSM so only connections touching ``free_modules`` vary.

    Connections between two non-free ports are frozen to those of the
    reference design, augmented with pass-through contractions: when a free
    module sits between two non-free ports in the reference (feeder -> free
    module -> successor), the direct feeder -> successor cell is kept if the
    original matrix allows it, so designs that omit the free module remain
    expressible.
    """
    free = set(free_modules)
    unknown = free - set(dsm.modules)
    if unknown:
        raise DsmError(f"freeze_except references unknown modules: {sorted(unknown)}")

    ref = set(reference.connections)
    # pass-through contraction edges, one free module deep
    contracted: set[tuple[str, str]] = set()
    for o_key, i_key in ref:
        mid = i_key.split(".", 1)[0]
        if mid in free and o_key.split(".", 1)[0] not in free:
            for o2_key, i2_key in ref:
                if o2_key.split(".", 1)[0] == mid and i2_key.split(".", 1)[0] not in free:
                    contracted.add((o_key, i2_key))

    keep = ref | contracted
    pairs = []
    for o, i in dsm.cells:
        o_port, i_port = dsm.output_ports[o], dsm.input_ports[i]
        if o_port.module_id in free or i_port.module_id in free:
            pairs.append((o, i))
        elif (o_port.key, i_port.key) in keep:
            pairs.append((o, i))

    # Caps only shrink the max side; a reference design is itself valid, so
    # every port keeps at least min_connections cells and mins stay intact.
    bounds = {}
    for idx, p in enumerate(dsm.output_ports):
        b = dsm.bounds[p.key]
        cap = sum(1 for o, _ in pairs if o == idx)
        bounds[p.key] = PortBounds(b.min_connections, min(b.max_connections, cap))
    for idx, p in enumerate(dsm.input_ports):
        b = dsm.bounds[p.key]
        cap = sum(1 for _, i in pairs if i == idx)
        bounds[p.key] = PortBounds(b.min_connections, min(b.max_connections, cap))

    return make_dsm(dsm.output_ports, dsm.input_ports, pairs, bounds, dsm.all_or_none_modules)
