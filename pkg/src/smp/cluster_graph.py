"""Cluster graphs: join graphs with an i-bound, junction trees, RIP checks.

Join graphs are built by schematic mini-bucket elimination along a min-fill
order.  Every bucket is split first-fit into mini-buckets of at most
``i_bound`` variables; each mini-bucket becomes a cluster, mini-buckets of
the same bucket are chained by edges labeled with the bucket variable, and
each mini-bucket is joined to the cluster receiving its message by an edge
labeled with the message scope.
"""
from __future__ import annotations

import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import ConstructionError, WidthCapError
from .factor import GraphicalModel

log = logging.getLogger(__name__)

DEFAULT_WIDTH_CAP = int(os.environ.get("SMP_WIDTH_CAP", "20"))


@dataclass(frozen=True)
class ClusterGraph:
    labels: tuple                      # frozenset of variables per vertex
    edges: dict                        # (i, j) with i < j -> frozenset label
    assignment: dict = field(default_factory=dict)   # factor index -> vertex

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(frozenset(l) for l in self.labels))
        edges = {}
        for (i, j), lab in self.edges.items():
            if i == j:
                raise ConstructionError(f"self-loop on vertex {i}")
            edges[(min(i, j), max(i, j))] = frozenset(lab)
        object.__setattr__(self, "edges", dict(sorted(edges.items())))

    @property
    def num_vertices(self):
        return len(self.labels)

    def neighbors(self, i):
        return sorted(
            [b for (a, b) in self.edges if a == i] + [a for (a, b) in self.edges if b == i]
        )

    def adjacency(self):
        adj = defaultdict(list)
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return {i: sorted(adj[i]) for i in range(self.num_vertices)}

    def edge_label(self, i, j):
        return self.edges[(min(i, j), max(i, j))]

    def components(self):
        adj = self.adjacency()
        comp = [-1] * self.num_vertices
        c = 0
        for s in range(self.num_vertices):
            if comp[s] >= 0:
                continue
            stack = [s]
            comp[s] = c
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if comp[w] < 0:
                        comp[w] = c
                        stack.append(w)
            c += 1
        return comp

    def is_forest(self):
        ncomp = len(set(self.components())) if self.labels else 0
        return len(self.edges) == self.num_vertices - ncomp

    def is_tree(self):
        return self.is_forest() and len(set(self.components())) <= 1

    def factors_at(self, vertex):
        return sorted(j for j, v in self.assignment.items() if v == vertex)

    def with_assignment(self, assignment):
        return ClusterGraph(self.labels, self.edges, dict(assignment))

    def dump(self) -> str:
        lines = [f"clusters {self.num_vertices}"]
        for i, lab in enumerate(self.labels):
            lines.append(f"cluster {i} : " + " ".join(map(str, sorted(lab))))
        lines.append(f"edges {len(self.edges)}")
        for (i, j), lab in self.edges.items():
            lines.append(f"edge {i} {j} : " + " ".join(map(str, sorted(lab))))
        lines.append(f"assignments {len(self.assignment)}")
        for f, v in sorted(self.assignment.items()):
            lines.append(f"factor {f} -> {v}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class JoinGraphParams:
    i_bound: int = 6
    minimize_labels: bool = True
    merge_subsumed: bool = True


def primal_graph(model: GraphicalModel):
    adj = {v: set() for v in range(model.n)}
    for f in model.factors:
        for a in f.scope:
            adj[a].update(u for u in f.scope if u != a)
    return adj


def min_fill_order(model: GraphicalModel):
    """Greedy min-fill elimination order (ties: lowest index) and its induced width."""
    adj = {v: set(ns) for v, ns in primal_graph(model).items()}
    order = []
    width = 0
    remaining = set(adj)
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            ns = sorted(adj[v])
            fill = 0
            for i, a in enumerate(ns):
                for b in ns[i + 1:]:
                    if b not in adj[a]:
                        fill += 1
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
                if fill == 0:
                    break
        ns = adj[best]
        width = max(width, len(ns))
        for a in ns:
            adj[a].update(ns - {a})
            adj[a].discard(best)
        del adj[best]
        remaining.discard(best)
        order.append(best)
    return order, width


def elimination_cliques(model: GraphicalModel, order):
    adj = {v: set(ns) for v, ns in primal_graph(model).items()}
    cliques = []
    for v in order:
        ns = adj.pop(v)
        cliques.append(frozenset(ns | {v}))
        for a in ns:
            adj[a].update(ns - {a})
            adj[a].discard(v)
    return cliques


def _merge_subsumed(labels, edges, assignment=None):
    """Contract edges (u, w) whose label equals L(u) with L(u) a subset of L(w)."""
    labels = list(labels)
    edges = {tuple(sorted(e)): set(l) for e, l in edges.items()}
    alive = set(range(len(labels)))
    owner = list(range(len(labels)))
    changed = True
    while changed:
        changed = False
        for (a, b), lab in sorted(edges.items()):
            for u, w in ((a, b), (b, a)):
                if lab == labels[u] and labels[u] <= labels[w]:
                    del edges[(a, b)]
                    for (x, y), l2 in list(edges.items()):
                        if u in (x, y):
                            z = y if x == u else x
                            del edges[(x, y)]
                            key = (min(w, z), max(w, z))
                            edges.setdefault(key, set()).update(l2)
                    alive.discard(u)
                    owner[u] = w
                    changed = True
                    break
            if changed:
                break
    keep = sorted(alive)
    remap = {old: new for new, old in enumerate(keep)}

    def find(v):
        while owner[v] != v:
            v = owner[v]
        return v

    new_edges = {(remap[a], remap[b]): frozenset(l) for (a, b), l in edges.items()}
    new_assign = None
    if assignment is not None:
        new_assign = {f: remap[find(v)] for f, v in assignment.items()}
    return [labels[i] for i in keep], new_edges, new_assign, {i: remap[find(i)] for i in range(len(owner))}


def minimize_edge_labels(labels, edges):
    """Per variable, keep it only on a spanning forest of the clusters mentioning it.

    Edges already carrying the variable are preferred, so a labeling that
    satisfies running intersection is returned unchanged.
    """
    labels = [frozenset(l) for l in labels]
    new = {e: set() for e in edges}
    variables = set().union(*labels) if labels else set()
    for x in sorted(variables):
        verts = [i for i, l in enumerate(labels) if x in l]
        parent = {i: i for i in verts}

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        cand = [e for e in edges if x in labels[e[0]] and x in labels[e[1]]]
        cand.sort(key=lambda e: (x not in edges[e], e))
        for a, b in cand:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                new[(a, b)].add(x)
    return {e: frozenset(l) for e, l in new.items() if l}


def _finish(model, labels, edges, params_minimize, merge, assignment=None):
    if merge:
        labels, edges, assignment, _ = _merge_subsumed(labels, edges, assignment)
    if params_minimize:
        edges = minimize_edge_labels(labels, edges)
    else:
        edges = {e: frozenset(labels[e[0]] & labels[e[1]]) for e in edges}
    g = ClusterGraph(labels, edges)
    return assign_factors(model, g)


def build_join_graph(model: GraphicalModel, params: JoinGraphParams = JoinGraphParams()):
    max_arity = max((len(f.scope) for f in model.factors), default=0)
    if params.i_bound < max(1, max_arity):
        raise ConstructionError(
            f"i-bound {params.i_bound} is below the maximum factor arity {max_arity}"
        )
    order, _ = min_fill_order(model)
    pos = {v: i for i, v in enumerate(order)}
    buckets = defaultdict(list)
    for j, f in enumerate(model.factors):
        if f.scope:
            buckets[min(f.scope, key=pos.__getitem__)].append((frozenset(f.scope), None))
    labels = []
    edges = {}
    for v in order:
        items = sorted(buckets.pop(v, []), key=lambda it: -len(it[0]))
        if not items:
            labels.append(frozenset({v}))
            continue
        minis = []
        for scope, src in items:
            for mb in minis:
                if len(mb[0] | scope) <= params.i_bound:
                    mb[0] |= scope
                    mb[1].append(src)
                    break
            else:
                minis.append([set(scope), [src]])
        ids = []
        for label, sources in minis:
            cid = len(labels)
            labels.append(frozenset(label))
            ids.append(cid)
            for src in sources:
                if src is not None:
                    sender, msg_scope = src
                    edges[(sender, cid)] = set(msg_scope)
        for a, b in zip(ids, ids[1:]):
            edges[(a, b)] = {v}
        for cid in ids:
            msg = labels[cid] - {v}
            if msg:
                buckets[min(msg, key=pos.__getitem__)].append((msg, (cid, msg)))
    g = _finish(model, labels, edges, params.minimize_labels, params.merge_subsumed)
    if params.minimize_labels:
        problems = validate_running_intersection(g)
        if problems:
            raise ConstructionError("join graph violates running intersection: " + "; ".join(problems))
    else:
        problems = validate_running_intersection(g)
        if problems:
            log.warning("full-intersection edge labels break running intersection: %s", problems[:3])
    return g


def build_junction_tree(model: GraphicalModel, width_cap: int = DEFAULT_WIDTH_CAP):
    order, width = min_fill_order(model)
    if width > width_cap:
        raise WidthCapError(f"induced width {width} exceeds the cap of {width_cap}")
    pos = {v: i for i, v in enumerate(order)}
    cliques = elimination_cliques(model, order)
    edges = {}
    for i, (v, c) in enumerate(zip(order, cliques)):
        rest = c - {v}
        if rest:
            parent = pos[min(rest, key=pos.__getitem__)]
            edges[(i, parent)] = c & cliques[parent]
    g = _finish(model, cliques, edges, params_minimize=False, merge=True)
    return g


def validate_running_intersection(g: ClusterGraph):
    """List Def-1 violations; empty when every variable spans a connected sub-tree."""
    problems = []
    for (i, j), lab in g.edges.items():
        extra = lab - (g.labels[i] & g.labels[j])
        if extra:
            problems.append(f"edge ({i},{j}) label has {sorted(extra)} outside both endpoints")
    variables = set().union(*g.labels) if g.labels else set()
    for x in sorted(variables):
        verts = [i for i, l in enumerate(g.labels) if x in l]
        es = [e for e, l in g.edges.items() if x in l]
        parent = {i: i for i in verts}

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        cycle = False
        for a, b in es:
            if a not in parent or b not in parent:
                continue
            ra, rb = find(a), find(b)
            if ra == rb:
                cycle = True
            else:
                parent[ra] = rb
        roots = {find(i) for i in verts}
        if len(roots) > 1:
            problems.append(f"variable {x}: clusters mentioning it are disconnected")
        if cycle:
            problems.append(f"variable {x}: edges mentioning it form a cycle")
    for f, v in g.assignment.items():
        if not 0 <= v < g.num_vertices:
            problems.append(f"factor {f} assigned to missing vertex {v}")
    return problems


def assign_factors(model: GraphicalModel, g: ClusterGraph) -> ClusterGraph:
    """Put each factor in the smallest covering cluster (ties: lowest index)."""
    assignment = {}
    for j, f in enumerate(model.factors):
        scope = set(f.scope)
        best = None
        for i, lab in enumerate(g.labels):
            if scope <= lab and (best is None or len(lab) < len(g.labels[best])):
                best = i
        if best is None:
            raise ConstructionError(f"no cluster covers the scope {sorted(scope)} of factor {j}")
        assignment[j] = best
    return g.with_assignment(assignment)
