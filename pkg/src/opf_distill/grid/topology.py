"""
Radial feeder traversal.

Validates that feeder lines form a spanning tree rooted at the substation and
orients every line away from it. The resulting FeederTree is what the matrix
builder and the AC sweep iterate over.
"""

from typing import List

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict

from opf_distill.domain.models import FeederModel
from opf_distill.exceptions import TopologyError


class FeederTree(BaseModel):
    """
    Substation-rooted orientation of a radial feeder.

    Attributes:
        order: Non-substation buses in breadth-first order from bus 0
        parent: Parent bus per bus (parent[0] = -1)
        r: Resistance of the line feeding each bus (r[0] = 0)
        x: Reactance of the line feeding each bus (x[0] = 0)
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    order: List[int]
    parent: np.ndarray
    r: np.ndarray
    x: np.ndarray

    @property
    def n(self) -> int:
        return len(self.order)

    def ancestor_matrix(self) -> np.ndarray:
        """
        N×N path incidence: entry [n-1, k-1] is 1 when the line feeding bus k
        lies on the substation-to-n path.
        """
        n = self.n
        anc = np.zeros((n + 1, n + 1))
        for bus in self.order:
            anc[bus] = anc[self.parent[bus]]
            anc[bus, bus] = 1.0
        return anc[1:, 1:]


def feeder_tree(model: FeederModel) -> FeederTree:
    """
    Orient a feeder from the substation.

    Raises:
        TopologyError: If lines repeat, loop, leave buses unreached or close a cycle
    """
    n = model.n
    graph = nx.Graph()
    graph.add_nodes_from(range(n + 1))
    for idx, line in enumerate(model.lines):
        if line.from_bus == line.to_bus:
            raise TopologyError(f"line {idx} connects bus {line.from_bus} to itself")
        if graph.has_edge(line.from_bus, line.to_bus):
            raise TopologyError(f"duplicate line between buses {line.from_bus} and {line.to_bus}")
        graph.add_edge(line.from_bus, line.to_bus, r=line.r, x=line.x)

    if len(model.lines) != n:
        raise TopologyError(f"expected {n} lines for {n + 1} buses, got {len(model.lines)}")
    if not nx.is_tree(graph):
        unreached = sorted(set(range(n + 1)) - nx.node_connected_component(graph, 0))
        raise TopologyError(f"lines do not form a tree; buses unreachable from 0: {unreached}")

    parent = np.full(n + 1, -1, dtype=int)
    r = np.zeros(n + 1)
    x = np.zeros(n + 1)
    order: List[int] = []
    for child, par in nx.bfs_predecessors(graph, 0):
        parent[child] = par
        edge = graph.edges[par, child]
        r[child] = edge["r"]
        x[child] = edge["x"]
        order.append(int(child))

    return FeederTree(order=order, parent=parent, r=r, x=x)
