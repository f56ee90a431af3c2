"""Plant topology construction and routing derivation.

A design's connection set is turned into a concrete plant: lanes walked from
each origin through weigher, assigner, optional trimmer and the distributor
chain, ending at destinations. The routing table the production controller
needs (which destinations each lane can reach, which lanes can trim) is
derived purely from the connections.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .dsm import Design

KIND_ORIGIN = "origin"
KIND_WEIGHER = "weigher"
KIND_ASSIGNER = "assigner"
KIND_TRIMMER = "trimmer"
KIND_DISTRIBUTOR = "distributor"
KIND_DESTINATION = "destination"

_KINDS = {
    KIND_ORIGIN,
    KIND_WEIGHER,
    KIND_ASSIGNER,
    KIND_TRIMMER,
    KIND_DISTRIBUTOR,
    KIND_DESTINATION,
}

# legal successor kinds along the product flow (fixed process order)
_NEXT_KINDS = {
    KIND_ORIGIN: {KIND_WEIGHER},
    KIND_WEIGHER: {KIND_ASSIGNER},
    KIND_ASSIGNER: {KIND_TRIMMER, KIND_DISTRIBUTOR},
    KIND_TRIMMER: {KIND_DISTRIBUTOR, KIND_DESTINATION},
    KIND_DISTRIBUTOR: {KIND_DISTRIBUTOR, KIND_DESTINATION},
    KIND_DESTINATION: set(),
}

TRIM_BYPRODUCT_PORT = "out2"


class PlantError(ValueError):
    """A design cannot be realized as a valid plant topology."""


@dataclass(frozen=True)
class ModuleKind:
    """Module role plus per-kind parameters from the module catalog."""

    kind: str
    lane: int | None = None  # origin only
    destination_id: str | None = None  # destination only
    recipe_binding: str | None = None
    is_default: bool = False
    is_trim_sink: bool = False

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise PlantError(f"unknown module kind: {self.kind!r}")
        if self.kind == KIND_ORIGIN and self.lane is None:
            raise PlantError("origin module needs a lane index")
        if self.kind == KIND_DESTINATION and not self.destination_id:
            raise PlantError("destination module needs a destination_id")


def load_catalog(source) -> dict[str, ModuleKind]:
    """Load a module catalog: JSON map of module id -> {kind, params}.

    The catalog must name exactly one default destination and at most one
    trim sink.
    """
    if isinstance(source, Mapping):
        doc = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    catalog: dict[str, ModuleKind] = {}
    for module_id, entry in doc.items():
        catalog[module_id] = ModuleKind(
            kind=entry["kind"],
            lane=entry.get("lane"),
            destination_id=entry.get("destination_id"),
            recipe_binding=entry.get("recipe"),
            is_default=bool(entry.get("default", False)),
            is_trim_sink=bool(entry.get("trim_sink", False)),
        )
    defaults = [m for m, k in catalog.items() if k.kind == KIND_DESTINATION and k.is_default]
    if len(defaults) != 1:
        raise PlantError(f"catalog must define exactly one default destination, found {defaults}")
    sinks = [m for m, k in catalog.items() if k.kind == KIND_DESTINATION and k.is_trim_sink]
    if len(sinks) > 1:
        raise PlantError(f"catalog defines more than one trim sink: {sinks}")
    return catalog


@dataclass(frozen=True)
class Lane:
    lane_index: int
    modules: tuple[str, ...]  # origin .. assigner (+trimmer) + distributor chain
    has_trimmer: bool


@dataclass(frozen=True)
class PlantTopology:
    modules: Mapping[str, ModuleKind]  # active modules only
    edges: tuple[tuple[str, str], ...]  # ("module.port", "module.port")
    lanes: tuple[Lane, ...]
    warnings: tuple[str, ...] = ()

    @cached_property
    def out_edges(self) -> dict[str, list[tuple[str, str, str]]]:
        """module id -> [(out_port_name, successor module, in_port_name)]."""
        table: dict[str, list[tuple[str, str, str]]] = {m: [] for m in self.modules}
        for o_key, i_key in self.edges:
            o_mod, o_port = o_key.split(".", 1)
            i_mod, i_port = i_key.split(".", 1)
            table[o_mod].append((o_port, i_mod, i_port))
        for lst in table.values():
            lst.sort()
        return table

    @cached_property
    def default_destination_id(self) -> str | None:
        for kind in self.modules.values():
            if kind.kind == KIND_DESTINATION and kind.is_default:
                return kind.destination_id
        return None

    @cached_property
    def trim_sink_id(self) -> str | None:
        for kind in self.modules.values():
            if kind.kind == KIND_DESTINATION and kind.is_trim_sink:
                return kind.destination_id
        return None

    @property
    def trimmer_count(self) -> int:
        return sum(1 for k in self.modules.values() if k.kind == KIND_TRIMMER)


@dataclass(frozen=True)
class LaneRouting:
    reachable_destinations: frozenset[str]
    has_trimmer: bool


@dataclass(frozen=True)
class RoutingTable:
    lanes: Mapping[int, LaneRouting]
    default_destination_id: str | None
    trim_sink_id: str | None


def count_trimmers(design: Design, catalog: Mapping[str, ModuleKind]) -> int:
    return sum(
        1
        for m in design.active_modules
        if m in catalog and catalog[m].kind == KIND_TRIMMER
    )


def build_topology(design: Design, catalog: Mapping[str, ModuleKind]) -> PlantTopology:
    """Construct the plant topology for one design and validate it.

    Raises PlantError on cycles, process-order violations, flow merges
    outside destinations, trimmers lacking a one-hop trim-sink edge, and
    lanes that cannot reach the default destination. Active modules that no
    origin reaches are reported as warnings, not errors.
    """
    missing = [m for m in design.active_modules if m not in catalog]
    if missing:
        raise PlantError(f"design references modules absent from the catalog: {sorted(missing)}")

    modules = {m: catalog[m] for m in design.active_modules}
    edges = tuple(sorted(design.connections))

    out_port_degree: dict[str, int] = {}
    in_port_degree: dict[str, int] = {}
    succ: dict[str, list[tuple[str, str, str]]] = {m: [] for m in modules}
    for o_key, i_key in edges:
        o_mod, o_port = o_key.split(".", 1)
        i_mod, i_port = i_key.split(".", 1)
        out_port_degree[o_key] = out_port_degree.get(o_key, 0) + 1
        in_port_degree[i_key] = in_port_degree.get(i_key, 0) + 1
        a, b = modules[o_mod], modules[i_mod]
        if b.kind not in _NEXT_KINDS[a.kind]:
            raise PlantError(
                f"process-order violation: {o_key} ({a.kind}) cannot feed {i_key} ({b.kind})"
            )
        if a.kind == KIND_TRIMMER:
            if o_port == TRIM_BYPRODUCT_PORT and not b.is_trim_sink:
                raise PlantError(f"trim by-product edge {o_key} -> {i_key} must hit the trim sink")
            if o_port != TRIM_BYPRODUCT_PORT and b.kind == KIND_DESTINATION:
                raise PlantError(f"trimmer main flow {o_key} cannot feed a destination directly")
        succ[o_mod].append((o_port, i_mod, i_port))

    # product flows only diverge: one edge per output port, merges only at
    # destination inputs
    for key, deg in out_port_degree.items():
        if deg > 1:
            raise PlantError(f"output port {key} feeds {deg} inputs; flows may only diverge")
    for key, deg in in_port_degree.items():
        mod = key.split(".", 1)[0]
        if deg > 1 and modules[mod].kind != KIND_DESTINATION:
            raise PlantError(f"input port {key} merges {deg} flows; merging is destination-only")

    _reject_cycles(succ)

    lanes = []
    visited: set[str] = set()
    origins = sorted(
        (m for m, k in modules.items() if k.kind == KIND_ORIGIN),
        key=lambda m: (modules[m].lane, m),
    )
    for origin in origins:
        lanes.append(_walk_lane(origin, modules, succ, visited))

    reachable = _forward_closure((lane.modules[0] for lane in lanes), succ)
    stranded = sorted(set(modules) - reachable)
    warnings = tuple(
        f"active module {m} is not reachable from any origin" for m in stranded
    )

    topology = PlantTopology(
        modules=modules, edges=edges, lanes=tuple(lanes), warnings=warnings
    )

    default_id = topology.default_destination_id
    if lanes and default_id is None:
        raise PlantError("no active default destination")
    for lane in lanes:
        assigner = lane.modules[2]
        dests = _destinations_from(assigner, modules, succ)
        if default_id not in dests:
            raise PlantError(
                f"lane {lane.lane_index} has no route to the default destination {default_id}"
            )
    return topology


def _reject_cycles(succ: Mapping[str, list[tuple[str, str, str]]]) -> None:
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {m: WHITE for m in succ}
    for start in succ:
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        color[start] = GRAY
        while stack:
            node, idx = stack[-1]
            nexts = succ[node]
            if idx == len(nexts):
                color[node] = BLACK
                stack.pop()
                continue
            stack[-1] = (node, idx + 1)
            child = nexts[idx][1]
            if color[child] == GRAY:
                raise PlantError(f"cycle detected through module {child}")
            if color[child] == WHITE:
                color[child] = GRAY
                stack.append((child, 0))


def _walk_lane(
    origin: str,
    modules: Mapping[str, ModuleKind],
    succ: Mapping[str, list[tuple[str, str, str]]],
    visited: set[str],
) -> Lane:
    chain = [origin]
    has_trimmer = False

    def sole_successor(module: str) -> str:
        nexts = succ[module]
        if len(nexts) != 1:
            raise PlantError(f"{module} must have exactly one outgoing product edge")
        return nexts[0][1]

    weigher = sole_successor(origin)
    if modules[weigher].kind != KIND_WEIGHER:
        raise PlantError(f"origin {origin} must feed a weigher, got {weigher}")
    assigner = sole_successor(weigher)
    if modules[assigner].kind != KIND_ASSIGNER:
        raise PlantError(f"weigher {weigher} must feed an assigner, got {assigner}")
    chain += [weigher, assigner]

    nxt = sole_successor(assigner)
    if modules[nxt].kind == KIND_TRIMMER:
        has_trimmer = True
        trimmer = nxt
        chain.append(trimmer)
        main = [t for p, t, _ in succ[trimmer] if p != TRIM_BYPRODUCT_PORT]
        byproduct = [t for p, t, _ in succ[trimmer] if p == TRIM_BYPRODUCT_PORT]
        if not byproduct:
            raise PlantError(f"trimmer {trimmer} has no route to the trim sink")
        if len(main) != 1:
            raise PlantError(f"trimmer {trimmer} must continue to exactly one distributor")
        nxt = main[0]
    if modules[nxt].kind != KIND_DISTRIBUTOR:
        raise PlantError(f"lane of {origin} must continue into a distributor, got {nxt}")

    # distributor chain: follow the main (out1) branch while it stays a
    # distributor; side branches are routing alternatives, not lane members
    while modules[nxt].kind == KIND_DISTRIBUTOR and nxt not in chain:
        chain.append(nxt)
        out1 = [t for p, t, _ in succ[nxt] if p == "out1"]
        if not out1:
            break
        nxt = out1[0]

    visited.update(chain)
    lane_index = modules[origin].lane
    return Lane(lane_index=lane_index, modules=tuple(chain), has_trimmer=has_trimmer)


def _forward_closure(
    roots: Iterable[str], succ: Mapping[str, list[tuple[str, str, str]]]
) -> set[str]:
    seen: set[str] = set()
    stack = list(roots)
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        stack.extend(t for _, t, _ in succ.get(node, ()))
    return seen


def _destinations_from(
    start: str,
    modules: Mapping[str, ModuleKind],
    succ: Mapping[str, list[tuple[str, str, str]]],
    skip_trim_byproduct: bool = True,
) -> set[str]:
    """Destination ids reachable by product flow from ``start``.

    The trimmer by-product branch carries trim pieces, not fillets, so it is
    excluded from fillet reachability.
    """
    dests: set[str] = set()
    seen: set[str] = set()
    stack = [start]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        kind = modules[node]
        if kind.kind == KIND_DESTINATION:
            dests.add(kind.destination_id)
            continue
        for port, target, _ in succ[node]:
            if (
                skip_trim_byproduct
                and kind.kind == KIND_TRIMMER
                and port == TRIM_BYPRODUCT_PORT
            ):
                continue
            stack.append(target)
    return dests


def derive_routings(topology: PlantTopology) -> RoutingTable:
    """Per-lane destination reachability and trim capability."""
    succ = topology.out_edges
    lanes: dict[int, LaneRouting] = {}
    for lane in topology.lanes:
        assigner = lane.modules[2]
        dests = _destinations_from(assigner, topology.modules, succ)
        lanes[lane.lane_index] = LaneRouting(
            reachable_destinations=frozenset(dests),
            has_trimmer=lane.has_trimmer,
        )
    return RoutingTable(
        lanes=lanes,
        default_destination_id=topology.default_destination_id,
        trim_sink_id=topology.trim_sink_id,
    )


def route_path(topology: PlantTopology, lane_index: int, destination_id: str) -> list[tuple[str, str]]:
    """One concrete edge path from the lane's assigner to the destination.

    Used to replay routes against the design's connections; trim by-product
    edges are not part of fillet routes.
    """
    matches = [l for l in topology.lanes if l.lane_index == lane_index]
    if not matches:
        raise PlantError(f"no lane with index {lane_index}")
    start = matches[0].modules[2]
    succ = topology.out_edges
    parents: dict[str, tuple[str, tuple[str, str]]] = {}
    queue = [start]
    seen = {start}
    goal = None
    while queue:
        node = queue.pop(0)
        kind = topology.modules[node]
        if kind.kind == KIND_DESTINATION:
            if kind.destination_id == destination_id:
                goal = node
                break
            continue
        for port, target, in_port in succ[node]:
            if kind.kind == KIND_TRIMMER and port == TRIM_BYPRODUCT_PORT:
                continue
            if target not in seen:
                seen.add(target)
                parents[target] = (node, (f"{node}.{port}", f"{target}.{in_port}"))
                queue.append(target)
    if goal is None:
        raise PlantError(f"lane {lane_index} has no route to {destination_id}")
    path = []
    node = goal
    while node != start:
        node, edge = parents[node]
        path.append(edge)
    path.reverse()
    return path


def topology_to_dot(topology: PlantTopology) -> str:
    """GraphViz digraph with one line per edge, for documentation."""
    lines = ["digraph plant {"]
    for o_key, i_key in topology.edges:
        lines.append(f'  "{o_key}" -> "{i_key}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
