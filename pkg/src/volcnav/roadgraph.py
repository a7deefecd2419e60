"""Road-network graphs, target projection, A* planning, and path resampling.

Graphs are geo-referenced (nodes in lat/lon/alt) and carry precomputed ENU
coordinates for a declared origin. Planning is planar: edge costs and
resampling use horizontal ENU distance; node altitudes are interpolated and
carried along for consumers that want them.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geo import GeoidModel, GeoPoint, enu_to_lla, lla_to_enu, EnuPoint

GRAPH_SCHEMA_VERSION = 1


class GraphParseError(ValueError):
    """Graph document failed validation; message carries the offending location."""


class PlanningError(RuntimeError):
    """No route exists between a pair of mission targets."""


def _id_key(node_id):
    # deterministic ordering across int and string ids
    if isinstance(node_id, bool):
        node_id = int(node_id)
    if isinstance(node_id, (int, float)):
        return (0, "", node_id)
    return (1, str(node_id), 0)


@dataclass
class RoadGraph:
    origin: GeoPoint
    nodes: dict
    edges: list
    enu: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.enu:
            self.enu = {
                nid: lla_to_enu(self.origin, p).as_array() for nid, p in self.nodes.items()
            }
        self.adjacency = {nid: [] for nid in self.nodes}
        for a, b in self.edges:
            cost = self.edge_length(a, b)
            self.adjacency[a].append((b, cost))
            self.adjacency[b].append((a, cost))
        for nid in self.adjacency:
            self.adjacency[nid].sort(key=lambda item: _id_key(item[0]))

    def edge_length(self, a, b) -> float:
        pa, pb = self.enu[a], self.enu[b]
        return float(math.hypot(pa[0] - pb[0], pa[1] - pb[1]))

    def components(self) -> dict:
        """Map node id -> component index (BFS, deterministic order)."""
        comp = {}
        idx = 0
        for nid in sorted(self.nodes, key=_id_key):
            if nid in comp:
                continue
            stack = [nid]
            comp[nid] = idx
            while stack:
                cur = stack.pop()
                for nbr, _ in self.adjacency[cur]:
                    if nbr not in comp:
                        comp[nbr] = idx
                        stack.append(nbr)
            idx += 1
        return comp


def load_graph(document) -> RoadGraph:
    """Validate and load a graph document (dict or JSON text)."""
    if isinstance(document, str):
        document = json.loads(document)
    version = document.get("version")
    if version != GRAPH_SCHEMA_VERSION:
        raise GraphParseError(f"unsupported graph schema version {version!r}")
    o = document.get("origin")
    if not o:
        raise GraphParseError("missing origin")
    origin = GeoPoint(o["lat"], o["lon"], o.get("alt", 0.0))
    raw_nodes = document.get("nodes", [])
    if not raw_nodes:
        raise GraphParseError("empty graph: no nodes")
    nodes = {}
    for i, n in enumerate(raw_nodes):
        nid = n.get("id")
        if nid is None:
            raise GraphParseError(f"nodes[{i}]: missing id")
        if nid in nodes:
            raise GraphParseError(f"nodes[{i}]: duplicate node id {nid!r}")
        nodes[nid] = GeoPoint(n["lat"], n["lon"], n.get("alt", 0.0))
    edges = []
    enu = {nid: lla_to_enu(origin, p).as_array() for nid, p in nodes.items()}
    for i, e in enumerate(document.get("edges", [])):
        if len(e) != 2:
            raise GraphParseError(f"edges[{i}]: expected [id, id]")
        a, b = e
        for nid in (a, b):
            if nid not in nodes:
                raise GraphParseError(f"edges[{i}]: references unknown node {nid!r}")
        pa, pb = enu[a], enu[b]
        if math.hypot(pa[0] - pb[0], pa[1] - pb[1]) < 1e-9:
            raise GraphParseError(f"edges[{i}]: zero-length edge {a!r}-{b!r}")
        edges.append((a, b))
    return RoadGraph(origin, nodes, edges, enu)


@dataclass
class MissionPlan:
    targets: list
    return_to_start: bool = False

    def __post_init__(self):
        if not self.targets:
            raise GraphParseError("mission needs at least one target")

    @classmethod
    def from_document(cls, document) -> "MissionPlan":
        if isinstance(document, str):
            document = json.loads(document)
        targets = [GeoPoint(t["lat"], t["lon"], t.get("alt", 0.0)) for t in document.get("targets", [])]
        return cls(targets, bool(document.get("return_to_start", False)))


@dataclass
class ProjectedTarget:
    target_enu: np.ndarray
    attach_enu: np.ndarray
    edge: tuple | None       # None when the graph has a single isolated node
    edge_fraction: float
    distance: float

    def attach_geo(self, graph: RoadGraph) -> GeoPoint:
        e = self.attach_enu
        return enu_to_lla(graph.origin, EnuPoint(e[0], e[1], e[2]))


def project_target(graph: RoadGraph, target: GeoPoint) -> ProjectedTarget:
    """Closest point to the target over all edges (point-to-segment, planar)."""
    t = lla_to_enu(graph.origin, target).as_array()
    best = None
    for a, b in graph.edges:
        pa, pb = graph.enu[a], graph.enu[b]
        d = pb[:2] - pa[:2]
        denom = float(d @ d)
        frac = 0.0 if denom == 0 else float(np.clip((t[:2] - pa[:2]) @ d / denom, 0.0, 1.0))
        point = pa + (pb - pa) * frac
        dist = float(np.hypot(*(t[:2] - point[:2])))
        if best is None or dist < best.distance - 1e-12:
            best = ProjectedTarget(t, point, (a, b), frac, dist)
    if best is None:
        # edgeless graph: attach to the nearest node
        nid = min(graph.nodes, key=lambda n: (np.hypot(*(t[:2] - graph.enu[n][:2])), _id_key(n)))
        p = graph.enu[nid]
        best = ProjectedTarget(t, p, None, 0.0, float(np.hypot(*(t[:2] - p[:2]))))
    return best


def a_star(adjacency, enu, start, goal):
    """A* with Euclidean heuristic; ties broken by smallest node id.

    Returns (cost, node list). Raises PlanningError when unreachable.
    """
    goal_xy = enu[goal][:2]

    def h(nid):
        p = enu[nid][:2]
        return math.hypot(p[0] - goal_xy[0], p[1] - goal_xy[1])

    open_heap = [(h(start), _id_key(start), start, 0.0)]
    g_score = {start: 0.0}
    came_from = {}
    closed = set()
    while open_heap:
        _, _, current, g = heapq.heappop(open_heap)
        if current in closed:
            continue
        if current == goal:
            path = [current]
            while current in came_from:
                current = came_from[current]
                path.append(current)
            return g, path[::-1]
        closed.add(current)
        for nbr, cost in adjacency[current]:
            if nbr in closed:
                continue
            tentative = g + cost
            if tentative < g_score.get(nbr, math.inf):
                g_score[nbr] = tentative
                came_from[nbr] = current
                heapq.heappush(open_heap, (tentative + h(nbr), _id_key(nbr), nbr, tentative))
    raise PlanningError(f"no route from {start!r} to {goal!r}")


@dataclass
class GlobalPath:
    polyline: list            # GeoPoint vertices (targets, connectors, graph nodes)
    enu: np.ndarray           # resampled vertices, (N, 3)
    tags: list                # per resampled vertex: "graph" | "connector"
    spacing: float
    target_indices: list      # resampled index closest to each mission target

    @property
    def length(self) -> float:
        if len(self.enu) < 2:
            return 0.0
        return float(np.sum(np.hypot(*np.diff(self.enu[:, :2], axis=0).T)))


def _splice_attach(adjacency, enu, proj: ProjectedTarget, name: str):
    """Insert a virtual node at the attach point, splitting its host edge."""
    enu[name] = proj.attach_enu.copy()
    adjacency[name] = []
    if proj.edge is None:
        return
    a, b = proj.edge
    pa, pb = enu[a], enu[b]
    for endpoint, p in ((a, pa), (b, pb)):
        cost = float(math.hypot(*(proj.attach_enu[:2] - p[:2])))
        if cost < 1e-12 and endpoint != name:
            # attach point coincides with a node; alias via zero-cost link
            cost = 0.0
        adjacency[name].append((endpoint, cost))
        adjacency[endpoint] = adjacency[endpoint] + [(name, cost)]


def plan(graph: RoadGraph, mission: MissionPlan, spacing: float = 0.5) -> GlobalPath:
    """Assemble the mission path: connector + A* graph route + connector per leg.

    Euclidean edge weights with the straight-line heuristic keep A* optimal;
    legs are concatenated, deduplicated at joints, and resampled at `spacing`.
    """
    targets = list(mission.targets)
    if mission.return_to_start and len(targets) >= 1:
        targets.append(targets[0])
    projections = [project_target(graph, t) for t in targets]

    comp = graph.components()

    def comp_of(proj):
        if proj.edge is None:
            return -1
        return comp[proj.edge[0]]

    vertices = [projections[0].target_enu.copy()]
    vertex_tags = ["connector"]
    target_arcs = [0.0]

    for leg in range(len(targets) - 1):
        pa, pb = projections[leg], projections[leg + 1]
        if comp_of(pa) != comp_of(pb):
            raise PlanningError(
                f"targets {leg} and {leg + 1} are on disconnected road components "
                f"({targets[leg].latitude:.6f},{targets[leg].longitude:.6f}) -> "
                f"({targets[leg + 1].latitude:.6f},{targets[leg + 1].longitude:.6f})"
            )
        adjacency = {nid: list(nbrs) for nid, nbrs in graph.adjacency.items()}
        enu = dict(graph.enu)
        _splice_attach(adjacency, enu, pa, "__attach_a")
        _splice_attach(adjacency, enu, pb, "__attach_b")
        if pa.edge is not None and pb.edge is not None and set(pa.edge) == set(pb.edge):
            # both targets attach to the same edge: allow the direct hop
            direct = float(np.hypot(*(pa.attach_enu[:2] - pb.attach_enu[:2])))
            adjacency["__attach_a"].append(("__attach_b", direct))
            adjacency["__attach_b"].append(("__attach_a", direct))
        _, node_path = a_star(adjacency, enu, "__attach_a", "__attach_b")
        leg_points = [pa.attach_enu] + [enu[nid] for nid in node_path[1:-1]] + [pb.attach_enu, pb.target_enu]
        leg_tags = ["connector"] + ["graph"] * (len(leg_points) - 2) + ["connector"]
        for p, tag in zip(leg_points, leg_tags):
            if np.hypot(*(p[:2] - vertices[-1][:2])) < 1e-9:
                continue
            vertices.append(np.asarray(p, dtype=float))
            vertex_tags.append(tag)
        target_arcs.append(_polyline_length(vertices))

    resampled, tags = _resample(vertices, vertex_tags, spacing)
    arcs = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(resampled[:, :2], axis=0).T))]) if len(resampled) > 1 else np.array([0.0])
    target_indices = [int(np.argmin(np.abs(arcs - ta))) for ta in target_arcs]

    polyline = [enu_to_lla(graph.origin, EnuPoint(v[0], v[1], v[2])) for v in vertices]
    return GlobalPath(polyline, resampled, tags, spacing, target_indices)


def _polyline_length(vertices) -> float:
    total = 0.0
    for i in range(1, len(vertices)):
        total += float(np.hypot(*(vertices[i][:2] - vertices[i - 1][:2])))
    return total


def _resample(vertices, vertex_tags, spacing: float):
    if len(vertices) == 1:
        return np.asarray(vertices, dtype=float), [vertex_tags[0]]
    pts = np.asarray(vertices, dtype=float)
    seg = np.hypot(*np.diff(pts[:, :2], axis=0).T)
    arcs = np.concatenate([[0.0], np.cumsum(seg)])
    total = arcs[-1]
    stations = np.arange(0.0, total, spacing)
    if total - (stations[-1] if stations.size else 0.0) > 1e-9:
        stations = np.append(stations, total)
    out = np.empty((stations.size, 3))
    tags = []
    for k, s in enumerate(stations):
        i = int(np.clip(np.searchsorted(arcs, s, side="right") - 1, 0, len(seg) - 1))
        f = 0.0 if seg[i] == 0 else (s - arcs[i]) / seg[i]
        out[k] = pts[i] + (pts[i + 1] - pts[i]) * f
        segment_tag = "connector" if "connector" in (vertex_tags[i], vertex_tags[i + 1]) else "graph"
        tags.append(segment_tag)
    return out, tags


# Synthetic graph templates (hermetic stand-ins for offline map extracts).

def grid_graph_document(origin: GeoPoint, rows: int, cols: int, spacing: float):
    """Rectangular street grid; returns (document, manifest)."""
    nodes = []
    edges = []
    geoid = GeoidModel.zero()
    for r in range(rows):
        for c in range(cols):
            enu = EnuPoint(c * spacing, r * spacing, 0.0)
            g = enu_to_lla(origin, enu, geoid)
            nodes.append({"id": r * cols + c, "lat": g.latitude, "lon": g.longitude, "alt": g.altitude})
            if c > 0:
                edges.append([r * cols + c - 1, r * cols + c])
            if r > 0:
                edges.append([(r - 1) * cols + c, r * cols + c])
    doc = {
        "version": GRAPH_SCHEMA_VERSION,
        "origin": {"lat": origin.latitude, "lon": origin.longitude, "alt": origin.altitude},
        "nodes": nodes,
        "edges": edges,
    }
    manifest = {"nodes": len(nodes), "edges": len(edges)}
    return doc, manifest


def rim_loop_graph_document(origin: GeoPoint, radius: float, n_rim: int = 36,
                            access_length: float = 0.0, center=(0.0, 0.0)):
    """Closed loop of nodes on a circle (a crater-rim trail), optional access spur."""
    nodes = []
    edges = []
    for i in range(n_rim):
        ang = 2.0 * math.pi * i / n_rim
        enu = EnuPoint(center[0] + radius * math.cos(ang), center[1] + radius * math.sin(ang), 0.0)
        g = enu_to_lla(origin, enu)
        nodes.append({"id": i, "lat": g.latitude, "lon": g.longitude, "alt": g.altitude})
        edges.append([i, (i + 1) % n_rim])
    if access_length > 0:
        g = enu_to_lla(origin, EnuPoint(center[0] + radius + access_length, center[1], 0.0))
        nodes.append({"id": n_rim, "lat": g.latitude, "lon": g.longitude, "alt": g.altitude})
        edges.append([0, n_rim])
    doc = {
        "version": GRAPH_SCHEMA_VERSION,
        "origin": {"lat": origin.latitude, "lon": origin.longitude, "alt": origin.altitude},
        "nodes": nodes,
        "edges": edges,
    }
    manifest = {"nodes": len(nodes), "edges": len(edges)}
    return doc, manifest


def random_graph_document(origin: GeoPoint, seed: int, n_nodes: int = 40, extent: float = 400.0,
                          k_nearest: int = 3):
    """Random geometric road network, made connected by bridging components."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-extent / 2, extent / 2, size=(n_nodes, 2))
    edge_set = set()
    for i in range(n_nodes):
        d = np.hypot(*(pts - pts[i]).T)
        for j in np.argsort(d)[1 : k_nearest + 1]:
            edge_set.add((min(i, int(j)), max(i, int(j))))
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edge_set:
        parent[find(a)] = find(b)
    roots = sorted({find(i) for i in range(n_nodes)})
    for a, b in zip(roots, roots[1:]):
        edge_set.add((min(a, b), max(a, b)))
        parent[find(a)] = find(b)
    nodes = []
    for i, (x, y) in enumerate(pts):
        g = enu_to_lla(origin, EnuPoint(float(x), float(y), 0.0))
        nodes.append({"id": i, "lat": g.latitude, "lon": g.longitude, "alt": g.altitude})
    doc = {
        "version": GRAPH_SCHEMA_VERSION,
        "origin": {"lat": origin.latitude, "lon": origin.longitude, "alt": origin.altitude},
        "nodes": nodes,
        "edges": sorted([list(e) for e in edge_set]),
    }
    return doc
