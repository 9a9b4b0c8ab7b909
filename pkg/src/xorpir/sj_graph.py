"""
Star graphs that pair up server replies in the explicit n-server scheme.

Vectors ``v`` are tuples over {0..n-1} of length k; records ``ell`` and servers
``r`` are 1-based. A vertex is a pair ``(r, v)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

from .errors import ParameterError

Vector = tuple[int, ...]
Vertex = tuple[int, Vector]


@lru_cache(maxsize=None)
def enumerate_V(n: int, k: int) -> tuple[Vector, ...]:
    """Non-zero vectors over {0..n-1}^k whose entries sum to 0 mod (n-1), in lexicographic order."""
    if n < 2 or k < 1:
        raise ParameterError("enumerate_V needs n >= 2 and k >= 1")
    return tuple(
        v for v in itertools.product(range(n), repeat=k)
        if any(v) and sum(v) % (n - 1) == 0
    )


def v_size(n: int, k: int) -> int:
    """(n^k - 1)/(n - 1), the closed-form size of the vector set."""
    return (n**k - 1) // (n - 1)


def component_count(n: int, k: int) -> int:
    """n + (n^k - n)/(n - 1): isolated vertices plus stars."""
    return n + (n**k - n) // (n - 1)


def edge_target(ell: int, vertex: Vertex, n: int, k: int) -> Vertex | None:
    """Neighbour in the zero-at-``ell`` part of a vertex whose ``ell``-th entry is non-zero.

    Returns None when ``v_ell`` is the only non-zero entry (an isolated vertex).
    """
    r, v = vertex
    if len(v) != k or not 1 <= ell <= k:
        raise ParameterError("vertex or record index does not match k")
    vl = v[ell - 1]
    if vl == 0:
        raise ParameterError(f"vertex {format_vertex(vertex)} has v_{ell} = 0")
    # next non-zero coordinate after ell, cyclically
    ell2 = next(
        (j for j in (((ell - 1 + d) % k) + 1 for d in range(1, k)) if v[j - 1] != 0),
        None,
    )
    if ell2 is None:
        return None
    w = (vl + v[ell2 - 1] - 1) % (n - 1) + 1
    target = list(v)
    target[ell - 1] = 0
    target[ell2 - 1] = w
    return ((r - 1 + vl) % n + 1, tuple(target))


@dataclass(frozen=True)
class GammaGraph:
    """Bipartite graph on {1..n} x V for record ``ell``.

    ``part1`` holds vertices with ``v_ell != 0``; each has at most one edge,
    into ``part2``. Components are listed in order of their smallest vertex,
    which is also each component's id.
    """

    ell: int
    n: int
    k: int
    part1: tuple[Vertex, ...]
    part2: tuple[Vertex, ...]
    edges: tuple[tuple[Vertex, Vertex], ...]
    components: tuple[tuple[Vertex, ...], ...]

    @cached_property
    def component_index(self) -> dict[Vertex, int]:
        return {x: i for i, comp in enumerate(self.components) for x in comp}

    @cached_property
    def centers(self) -> dict[int, Vertex]:
        """Component index -> its vertex in ``part2`` (stars only)."""
        out = {}
        for i, comp in enumerate(self.components):
            for x in comp:
                if x[1][self.ell - 1] == 0:
                    out[i] = x
        return out

    @property
    def vertices(self) -> tuple[Vertex, ...]:
        return tuple(sorted(self.part1 + self.part2))

    @property
    def isolated(self) -> tuple[Vertex, ...]:
        return tuple(c[0] for c in self.components if len(c) == 1)

    def component_of(self, vertex: Vertex) -> tuple[Vertex, ...]:
        return self.components[self.component_index[vertex]]

    def to_dot(self) -> str:
        lines = [f'graph "Gamma_{self.ell}" {{', "  rankdir=LR;"]
        lines.append("  subgraph cluster_W1 { label=\"W1\";")
        lines += [f'    "{format_vertex(x)}";' for x in self.part1]
        lines.append("  }")
        lines.append("  subgraph cluster_W2 { label=\"W2\";")
        lines += [f'    "{format_vertex(x)}";' for x in self.part2]
        lines.append("  }")
        lines += [f'  "{format_vertex(a)}" -- "{format_vertex(b)}";' for a, b in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "ell": self.ell,
            "part1": [format_vertex(x) for x in self.part1],
            "part2": [format_vertex(x) for x in self.part2],
            "edges": [[format_vertex(a), format_vertex(b)] for a, b in self.edges],
            "components": [[format_vertex(x) for x in c] for c in self.components],
        }


@lru_cache(maxsize=None)
def build_gamma(ell: int, n: int, k: int) -> GammaGraph:
    if n < 2 or k < 1:
        raise ParameterError("build_gamma needs n >= 2 and k >= 1")
    if not 1 <= ell <= k:
        raise ParameterError(f"record {ell} outside 1..{k}")
    V = enumerate_V(n, k)
    W = [(r, v) for r in range(1, n + 1) for v in V]
    part1 = tuple(x for x in W if x[1][ell - 1] != 0)
    part2 = tuple(x for x in W if x[1][ell - 1] == 0)

    edges = []
    leaves: dict[Vertex, list[Vertex]] = {c: [] for c in part2}
    lone = []
    for x in part1:
        y = edge_target(ell, x, n, k)
        if y is None:
            lone.append(x)
        else:
            edges.append((x, y))
            leaves[y].append(x)
    # part1 vertices have degree <= 1, so each component holds at most one part2 vertex
    comps = [(x,) for x in lone]
    comps += [tuple(sorted([c, *ls])) for c, ls in leaves.items()]
    comps.sort()
    return GammaGraph(ell, n, k, part1, part2, tuple(edges), tuple(comps))


def format_vertex(x: Vertex) -> str:
    """Compact label, e.g. ``(1,101)``; digits are comma-separated when n > 10."""
    r, v = x
    sep = "," if any(d > 9 for d in v) else ""
    return f"({r},{sep.join(str(d) for d in v)})"


def parse_vertex(text: str) -> Vertex:
    body = text.strip().strip("()")
    r, _, digits = body.partition(",")
    v = tuple(int(d) for d in (digits.split(",") if "," in digits else digits))
    return int(r), v
