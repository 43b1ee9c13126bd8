"""Layered leader/employee network structure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

from .errors import InvalidRate, InvalidWidths, NoEmployees, NoLeaders


class NodeRef(NamedTuple):
    """1-based (layer, index) address of a model in the network."""

    layer: int
    index: int

    def key(self) -> str:
        return f"{self.layer},{self.index}"

    @classmethod
    def parse(cls, key: str) -> "NodeRef":
        layer, index = key.split(",")
        return cls(int(layer), int(index))

    def __str__(self) -> str:
        return f"m[{self.layer},{self.index}]"


@dataclass(frozen=True)
class NetworkTopology:
    layer_widths: tuple[int, ...]
    dropout_rate: float

    @property
    def depth(self) -> int:
        return len(self.layer_widths)

    @property
    def top(self) -> NodeRef:
        return NodeRef(self.depth, 1)

    def width(self, layer: int) -> int:
        return self.layer_widths[layer - 1]

    def layer(self, layer: int) -> list[NodeRef]:
        return [NodeRef(layer, j) for j in range(1, self.width(layer) + 1)]

    @property
    def node_ids(self) -> list[NodeRef]:
        return list(self)

    def __iter__(self) -> Iterator[NodeRef]:
        for i in range(1, self.depth + 1):
            yield from self.layer(i)

    def __len__(self) -> int:
        return sum(self.layer_widths)

    def __contains__(self, node: object) -> bool:
        if not isinstance(node, tuple) or len(node) != 2:
            return False
        layer, index = node
        return 1 <= layer <= self.depth and 1 <= index <= self.width(layer)

    def check(self, node: NodeRef) -> None:
        if node not in self:
            raise ValueError(f"{node} is not part of topology {list(self.layer_widths)}")


def build_network(layer_widths: list[int], dropout_rate: float) -> NetworkTopology:
    widths = list(layer_widths)
    if len(widths) < 2:
        raise InvalidWidths(f"need at least two layers, got {widths}")
    if any(not isinstance(w, int) or isinstance(w, bool) or w < 1 for w in widths):
        raise InvalidWidths(f"layer widths must be positive integers, got {widths}")
    if widths[-1] != 1:
        raise InvalidWidths(f"final aggregation layer must have width 1, got {widths}")
    rate = float(dropout_rate)
    if not 0.0 <= rate <= 1.0:
        raise InvalidRate(f"dropout rate must lie in [0, 1], got {dropout_rate}")
    return NetworkTopology(tuple(widths), rate)


def leaders_of(t: NetworkTopology, node: NodeRef) -> list[NodeRef]:
    t.check(node)
    if node.layer == t.depth:
        raise NoLeaders(f"{node} is the aggregation leader")
    return t.layer(node.layer + 1)


def employees_of(t: NetworkTopology, node: NodeRef) -> list[NodeRef]:
    t.check(node)
    if node.layer == 1:
        raise NoEmployees(f"{node} is in the first layer")
    return t.layer(node.layer - 1)
