"""Cross-stock topic-similarity network.

Topics selected for different stocks are compared by Jensen-Shannon
divergence after embedding their word distributions into the union
vocabulary (zero-filled), linked when the divergence is below a
threshold, and exported as GEXF, GraphML or a tab-separated edge list
for external layout tools.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np

from .corpus import Vocabulary

log = logging.getLogger(__name__)

_SUM_TOL = 1e-9
_FIXED_DATE = "1970-01-01"  # pinned GEXF modification date, keeps exports reproducible


def jsd(p: np.ndarray, q: np.ndarray) -> float:
    """Base-2 Jensen-Shannon divergence between two distributions.

    JSD = 1/2 KL(p||m) + 1/2 KL(q||m) with m = (p+q)/2; zero entries
    contribute nothing. Lies in [0, 1], is 0 iff p == q and 1 on
    disjoint supports.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("distributions must be 1-d and the same length")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("negative probability entries")
    if abs(p.sum() - 1.0) > _SUM_TOL or abs(q.sum() - 1.0) > _SUM_TOL:
        raise ValueError("inputs must each sum to 1")
    m = 0.5 * (p + q)
    left = p > 0
    right = q > 0
    kl_p = np.sum(p[left] * np.log2(p[left] / m[left]))
    kl_q = np.sum(q[right] * np.log2(q[right] / m[right]))
    return float(0.5 * kl_p + 0.5 * kl_q)


@dataclass(frozen=True)
class TopicNode:
    stock: str
    topic_id: int
    label: str  # "stock: w1, w2, w3"
    size: float  # the topic's FVE

    @property
    def key(self) -> str:
        return f"{self.stock}:{self.topic_id}"


@dataclass
class TopicGraph:
    """Undirected network of selected topics plus one node per company."""

    topic_nodes: list[TopicNode] = field(default_factory=list)
    company_nodes: list[str] = field(default_factory=list)
    topic_edges: list[tuple[str, str, float]] = field(default_factory=list)
    company_edges: list[tuple[str, str, float]] = field(default_factory=list)

    COMPANY_SIZE = 0.5

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        for stock in self.company_nodes:
            g.add_node(stock, label=stock, size=self.COMPANY_SIZE, kind="company")
        for node in self.topic_nodes:
            g.add_node(node.key, label=node.label, size=node.size, kind="topic")
        for u, v, w in self.topic_edges:
            g.add_edge(u, v, weight=w)
        for u, v, w in self.company_edges:
            g.add_edge(u, v, weight=w)
        return g


@dataclass(frozen=True)
class StockTopics:
    """One stock's contribution to the network: its vocabulary, the word
    distributions of its topics and the selected (topic_id, fve) pairs."""

    stock: str
    vocabulary: Vocabulary
    phi: np.ndarray  # K x V
    selected: tuple[tuple[int, float], ...]


def _top_word_ids(row: np.ndarray, n: int) -> np.ndarray:
    order = np.lexsort((np.arange(row.shape[0]), -row))
    return order[:n]


def embed_union(stocks: Sequence[StockTopics]) -> tuple[list[str], dict[tuple[str, int], np.ndarray]]:
    """Re-express every selected topic's distribution over the union
    vocabulary, zero-filling words a stock never saw. Measure-preserving:
    each embedded vector still sums to 1."""
    union = Vocabulary()
    for st in stocks:
        for token in st.vocabulary.tokens:
            union.add(token)
    embedded: dict[tuple[str, int], np.ndarray] = {}
    for st in stocks:
        positions = np.array(
            [union.index[token] for token in st.vocabulary.tokens], dtype=np.int64
        )
        for topic_id, _ in st.selected:
            vec = np.zeros(len(union.tokens))
            vec[positions] = st.phi[topic_id]
            embedded[(st.stock, topic_id)] = vec
    return list(union.tokens), embedded


def build_graph(
    stocks: Sequence[StockTopics], threshold: float = 0.5, label_words: int = 3
) -> TopicGraph:
    """Assemble the network: topic-topic edges where JSD < threshold with
    weight 1 - JSD, plus a company node per stock connected to each of
    its selected topics with the topic's FVE as weight."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    graph = TopicGraph()
    graph.company_nodes = sorted(st.stock for st in stocks)
    _, embedded = embed_union(stocks)

    nodes: list[TopicNode] = []
    for st in sorted(stocks, key=lambda s: s.stock):
        for topic_id, fve in sorted(st.selected):
            words = [st.vocabulary.tokens[w] for w in _top_word_ids(st.phi[topic_id], label_words)]
            label = f"{st.stock}: {', '.join(words)}"
            node = TopicNode(st.stock, topic_id, label, float(fve))
            nodes.append(node)
            graph.company_edges.append((st.stock, node.key, float(fve)))
    graph.topic_nodes = nodes

    for i in range(len(nodes)):
        pi = embedded[(nodes[i].stock, nodes[i].topic_id)]
        for j in range(i + 1, len(nodes)):
            div = jsd(pi, embedded[(nodes[j].stock, nodes[j].topic_id)])
            if div < threshold:
                graph.topic_edges.append((nodes[i].key, nodes[j].key, 1.0 - div))
    log.info(
        "graph: %d topics, %d companies, %d similarity edges",
        len(nodes), len(graph.company_nodes), len(graph.topic_edges),
    )
    return graph


def export_graph(graph: TopicGraph | nx.Graph, path: str | Path, fmt: str | None = None) -> Path:
    """Write the network as gexf, graphml or a tab-separated edge list.

    The format defaults to the file extension. Outputs carry label, size
    and kind on nodes and weight on edges, and are byte-stable across
    reruns.
    """
    path = Path(path)
    g = graph.to_networkx() if isinstance(graph, TopicGraph) else graph
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower() or "gexf"
    fmt = {"edgelist": "edge-list", "tsv": "edge-list"}.get(fmt, fmt)
    if fmt == "gexf":
        nx.write_gexf(g, path, version="1.2draft")
        text = path.read_text(encoding="utf-8")
        text = re.sub(r'lastmodifieddate="[^"]*"', f'lastmodifieddate="{_FIXED_DATE}"', text)
        path.write_text(text, encoding="utf-8")
    elif fmt == "graphml":
        nx.write_graphml(g, path)
    elif fmt == "edge-list":
        with open(path, "w", encoding="utf-8") as fh:
            for u, v, data in sorted(g.edges(data=True)):
                fh.write(f"{u}\t{v}\t{repr(float(data['weight']))}\n")
    else:
        raise ValueError(f"unknown graph format: {fmt}")
    return path


def load_graph(path: str | Path, fmt: str | None = None) -> nx.Graph:
    """Parse a graph written by export_graph (gexf or graphml)."""
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt == "gexf":
        g = nx.read_gexf(path)
    elif fmt == "graphml":
        g = nx.read_graphml(path)
    else:
        raise ValueError(f"unknown graph format: {fmt}")
    return g
