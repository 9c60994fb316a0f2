"""Unigram co-occurrence graphs, Louvain communities, and topic scoring.

Pipeline: build a word graph from tokenized documents, detect communities
by modularity maximization, rank each community's keywords by link weight,
assign new documents to topics, and score topics by coherence and PMI.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .embeddings import EmbeddingTable
from .vector_metrics import vector_similarity

__all__ = [
    "WordGraph",
    "Partition",
    "Topic",
    "BuildConfig",
    "build_word_graph",
    "modularity",
    "modularity_gain",
    "louvain",
    "extract_topics",
    "assign_topic",
    "topic_coherence",
    "topic_pmi",
    "topic_prf",
    "save_graph_tsv",
    "load_graph_tsv",
    "topics_to_json",
    "topics_from_json",
]

VERTEX_MODES = ("word", "bigram", "trigram", "hashtag", "biha")
EDGE_MODES = ("cooccur", "embed_cosine")
AGG_MODES = ("none", "by_hashtag", "by_mention")


@dataclass(frozen=True)
class WordGraph:
    """Undirected weighted graph; edge keys are (min, max) label pairs."""

    nodes: tuple[str, ...]
    edges: Mapping[tuple[str, str], float] = field(default_factory=dict)
    self_loops: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        known = set(self.nodes)
        for (u, v), w in self.edges.items():
            if u >= v:
                raise ValueError(f"edge key ({u!r}, {v!r}) is not canonical")
            if u not in known or v not in known:
                raise ValueError(f"edge ({u!r}, {v!r}) references unknown node")
            if w <= 0:
                raise ValueError(f"edge ({u!r}, {v!r}) has nonpositive weight {w}")
        for u, w in self.self_loops.items():
            if u not in known:
                raise ValueError(f"self-loop on unknown node {u!r}")
            if w < 0:
                raise ValueError(f"self-loop on {u!r} has negative weight {w}")

    @property
    def total_weight(self) -> float:
        return sum(self.edges.values()) + sum(self.self_loops.values())

    def strength(self, node: str) -> float:
        # self-loops count twice toward node strength
        k = 2.0 * self.self_loops.get(node, 0.0)
        for (u, v), w in self.edges.items():
            if u == node or v == node:
                k += w
        return k

    def adjacency(self) -> dict[str, dict[str, float]]:
        adj: dict[str, dict[str, float]] = {u: {} for u in self.nodes}
        for (u, v), w in self.edges.items():
            adj[u][v] = adj[u].get(v, 0.0) + w
            adj[v][u] = adj[v].get(u, 0.0) + w
        return adj


@dataclass(frozen=True)
class Partition:
    """Node -> community assignment with the inverse community -> node map."""

    community_of: Mapping[str, int]
    communities: Mapping[int, frozenset[str]]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for cid, members in self.communities.items():
            for node in members:
                if node in seen:
                    raise ValueError(f"node {node!r} assigned to multiple communities")
                seen.add(node)
                if self.community_of.get(node) != cid:
                    raise ValueError(f"inconsistent assignment for node {node!r}")
        if seen != set(self.community_of):
            raise ValueError("community_of and communities cover different nodes")

    @staticmethod
    def from_mapping(mapping: Mapping[str, int]) -> "Partition":
        communities: dict[int, set[str]] = {}
        for node, cid in mapping.items():
            communities.setdefault(cid, set()).add(node)
        return Partition(
            community_of=dict(mapping),
            communities={c: frozenset(m) for c, m in communities.items()},
        )

    @staticmethod
    def singletons(graph: WordGraph) -> "Partition":
        return Partition.from_mapping({u: i for i, u in enumerate(sorted(graph.nodes))})


@dataclass(frozen=True)
class Topic:
    """Community keywords ranked by total link weight, heaviest first."""

    id: int
    keywords: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class BuildConfig:
    """How to turn documents into graph vertices and weighted edges."""

    vertex_mode: str = "word"
    edge_mode: str = "cooccur"
    table: EmbeddingTable | None = None
    agg_mode: str = "none"
    window: int | None = None

    def __post_init__(self) -> None:
        if self.vertex_mode not in VERTEX_MODES:
            raise ValueError(f"unknown vertex_mode {self.vertex_mode!r}")
        if self.edge_mode not in EDGE_MODES:
            raise ValueError(f"unknown edge_mode {self.edge_mode!r}")
        if self.agg_mode not in AGG_MODES:
            raise ValueError(f"unknown agg_mode {self.agg_mode!r}")
        if self.edge_mode == "embed_cosine" and self.table is None:
            raise ValueError("embed_cosine requires an embedding table")
        if self.window is not None and self.window < 2:
            raise ValueError("window must be >= 2 when set")


def _is_tag(token: str, prefix: str) -> bool:
    return token.startswith(prefix) and len(token) > 1


def _merge_docs(docs: Sequence[Sequence[str]], prefix: str) -> list[tuple[str, ...]]:
    """Union documents sharing any tag token; others stay singletons."""
    parent = list(range(len(docs)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[str, int] = {}
    for idx, doc in enumerate(docs):
        for tok in doc:
            if _is_tag(tok, prefix):
                if tok in owner:
                    parent[find(idx)] = find(owner[tok])
                else:
                    owner[tok] = idx
    groups: dict[int, list[str]] = {}
    for idx, doc in enumerate(docs):
        groups.setdefault(find(idx), []).extend(doc)
    return [tuple(groups[root]) for root in sorted(groups)]


def _vertex_streams(doc: Sequence[str], vertex_mode: str) -> list[list[str]]:
    if vertex_mode == "word":
        return [list(doc)]
    if vertex_mode == "bigram":
        return [["_".join(doc[i : i + 2]) for i in range(len(doc) - 1)]]
    if vertex_mode == "trigram":
        return [["_".join(doc[i : i + 3]) for i in range(len(doc) - 2)]]
    if vertex_mode == "hashtag":
        return [[t for t in doc if _is_tag(t, "#")]]
    # biha: bigram stream plus hashtag co-usage stream
    return [
        ["_".join(doc[i : i + 2]) for i in range(len(doc) - 1)],
        [t for t in doc if _is_tag(t, "#")],
    ]


def _stream_pairs(stream: Sequence[str], window: int | None) -> set[tuple[str, str]]:
    pairs: set[tuple[str, str]] = set()
    if window is None:
        labels = sorted(set(stream))
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                pairs.add((labels[i], labels[j]))
        return pairs
    for i in range(len(stream)):
        for j in range(i + 1, min(i + window, len(stream))):
            if stream[i] != stream[j]:
                pairs.add((min(stream[i], stream[j]), max(stream[i], stream[j])))
    return pairs


def build_word_graph(docs: Sequence[Sequence[str]], cfg: BuildConfig | None = None) -> WordGraph:
    """Vertices per cfg.vertex_mode; one weight unit (or a cosine) per
    co-occurring pair per (pseudo-)document."""
    cfg = cfg or BuildConfig()
    if cfg.agg_mode == "by_hashtag":
        pseudo_docs = _merge_docs(docs, "#")
    elif cfg.agg_mode == "by_mention":
        pseudo_docs = _merge_docs(docs, "@")
    else:
        pseudo_docs = [tuple(d) for d in docs]

    nodes: set[str] = set()
    weights: dict[tuple[str, str], float] = {}
    for doc in pseudo_docs:
        doc_pairs: set[tuple[str, str]] = set()
        for stream in _vertex_streams(doc, cfg.vertex_mode):
            nodes.update(stream)
            doc_pairs |= _stream_pairs(stream, cfg.window)
        for pair in doc_pairs:
            if cfg.edge_mode == "cooccur":
                weights[pair] = weights.get(pair, 0.0) + 1.0
            else:
                if pair in weights:
                    continue
                vecs = []
                for label in pair:
                    if not cfg.table.resolves(label):
                        raise ValueError(f"no vector for vertex {label!r}")
                    vecs.append(cfg.table.lookup(label))
                cos = max(0.0, vector_similarity("cosine", vecs[0], vecs[1]))
                if cos > 0.0:
                    weights[pair] = cos
    return WordGraph(nodes=tuple(sorted(nodes)), edges=weights, self_loops={})


def _community_sums(
    graph: WordGraph, partition: Partition
) -> tuple[dict[int, float], dict[int, float]]:
    """Per community: sigma_in (twice intra weight plus twice self-loops)
    and sigma_tot (sum of member strengths)."""
    sigma_in = {c: 0.0 for c in partition.communities}
    sigma_tot = {c: 0.0 for c in partition.communities}
    for (u, v), w in graph.edges.items():
        cu, cv = partition.community_of[u], partition.community_of[v]
        sigma_tot[cu] += w
        sigma_tot[cv] += w
        if cu == cv:
            sigma_in[cu] += 2.0 * w
    for u, w in graph.self_loops.items():
        c = partition.community_of[u]
        sigma_in[c] += 2.0 * w
        sigma_tot[c] += 2.0 * w
    return sigma_in, sigma_tot


def modularity(graph: WordGraph, partition: Partition) -> float:
    if set(partition.community_of) != set(graph.nodes):
        raise ValueError("partition does not cover exactly the graph's nodes")
    m = graph.total_weight
    if m == 0:
        raise ValueError("modularity undefined on a graph with zero total weight")
    sigma_in, sigma_tot = _community_sums(graph, partition)
    two_m = 2.0 * m
    return sum(
        sigma_in[c] / two_m - (sigma_tot[c] / two_m) ** 2 for c in partition.communities
    )


def modularity_gain(
    graph: WordGraph, partition: Partition, node: str, target_community: int
) -> float:
    """Q(after moving node into target) - Q(before), computed from the two
    affected communities' aggregates only."""
    if node not in partition.community_of:
        raise ValueError(f"unknown node {node!r}")
    if target_community not in partition.communities:
        raise ValueError(f"unknown community {target_community!r}")
    current = partition.community_of[node]
    if current == target_community:
        return 0.0
    m = graph.total_weight
    if m == 0:
        raise ValueError("modularity undefined on a graph with zero total weight")
    two_m = 2.0 * m
    sigma_in, sigma_tot = _community_sums(graph, partition)
    k_i = graph.strength(node)
    self_w = graph.self_loops.get(node, 0.0)
    links = {current: 0.0, target_community: 0.0}
    for (u, v), w in graph.edges.items():
        other = v if u == node else (u if v == node else None)
        if other is None:
            continue
        c = partition.community_of[other]
        if c in links:
            links[c] += w

    def term(s_in: float, s_tot: float) -> float:
        return s_in / two_m - (s_tot / two_m) ** 2

    before = term(sigma_in[current], sigma_tot[current]) + term(
        sigma_in[target_community], sigma_tot[target_community]
    )
    after = term(
        sigma_in[current] - 2.0 * links[current] - 2.0 * self_w,
        sigma_tot[current] - k_i,
    ) + term(
        sigma_in[target_community] + 2.0 * links[target_community] + 2.0 * self_w,
        sigma_tot[target_community] + k_i,
    )
    return after - before


@dataclass
class _Level:
    """Mutable working graph for one Louvain level."""

    nodes: list[int]
    adj: dict[int, dict[int, float]]
    self_loops: dict[int, float]
    strengths: dict[int, float]
    m: float


def _level_from(graph: WordGraph) -> tuple[_Level, list[str]]:
    labels = sorted(graph.nodes)
    index = {u: i for i, u in enumerate(labels)}
    adj: dict[int, dict[int, float]] = {i: {} for i in range(len(labels))}
    loops: dict[int, float] = {}
    for (u, v), w in graph.edges.items():
        i, j = index[u], index[v]
        adj[i][j] = adj[i].get(j, 0.0) + w
        adj[j][i] = adj[j].get(i, 0.0) + w
    for u, w in graph.self_loops.items():
        loops[index[u]] = loops.get(index[u], 0.0) + w
    strengths = {
        i: sum(adj[i].values()) + 2.0 * loops.get(i, 0.0) for i in range(len(labels))
    }
    m = sum(w for nbrs in adj.values() for w in nbrs.values()) / 2.0 + sum(loops.values())
    return (
        _Level(
            nodes=list(range(len(labels))),
            adj=adj,
            self_loops=loops,
            strengths=strengths,
            m=m,
        ),
        labels,
    )


def _level_modularity(level: _Level, comm: dict[int, int]) -> float:
    sigma_in: dict[int, float] = {}
    sigma_tot: dict[int, float] = {}
    for i in level.nodes:
        c = comm[i]
        sigma_tot[c] = sigma_tot.get(c, 0.0) + level.strengths[i]
        sigma_in[c] = sigma_in.get(c, 0.0) + 2.0 * level.self_loops.get(i, 0.0)
        for j, w in level.adj[i].items():
            if comm[j] == c:
                sigma_in[c] = sigma_in[c] + w  # each intra edge seen from both ends
    two_m = 2.0 * level.m
    return sum(sigma_in[c] / two_m - (sigma_tot[c] / two_m) ** 2 for c in sigma_in)


def _local_moving(level: _Level, rng: random.Random) -> tuple[dict[int, int], bool]:
    comm = {i: i for i in level.nodes}
    sigma_tot = {i: level.strengths[i] for i in level.nodes}
    two_m = 2.0 * level.m
    order = list(level.nodes)
    rng.shuffle(order)
    moved_any = False
    while True:
        moves = 0
        for i in order:
            home = comm[i]
            k_i = level.strengths[i]
            links: dict[int, float] = {home: 0.0}
            for j, w in level.adj[i].items():
                links[comm[j]] = links.get(comm[j], 0.0) + w
            sigma_tot[home] -= k_i
            # insertion score differs across candidates only through these terms
            two_m_sq = two_m * two_m / 2.0
            best_c = home
            best_score = links[home] / level.m - sigma_tot[home] * k_i / two_m_sq
            for c in sorted(links):
                score = links[c] / level.m - sigma_tot[c] * k_i / two_m_sq
                if score > best_score + 1e-12:
                    best_c, best_score = c, score
            sigma_tot[best_c] += k_i
            if best_c != home:
                comm[i] = best_c
                moves += 1
                moved_any = True
        if moves == 0:
            return comm, moved_any


def _aggregate(level: _Level, comm: dict[int, int]) -> tuple[_Level, dict[int, int]]:
    ids = sorted(set(comm.values()))
    relabel = {c: i for i, c in enumerate(ids)}
    new_adj: dict[int, dict[int, float]] = {i: {} for i in range(len(ids))}
    new_loops: dict[int, float] = {}
    for i in level.nodes:
        ci = relabel[comm[i]]
        new_loops[ci] = new_loops.get(ci, 0.0) + level.self_loops.get(i, 0.0)
        for j, w in level.adj[i].items():
            cj = relabel[comm[j]]
            if ci == cj:
                if i < j:
                    new_loops[ci] = new_loops.get(ci, 0.0) + w
            else:
                new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
    strengths = {
        i: sum(new_adj[i].values()) + 2.0 * new_loops.get(i, 0.0) for i in range(len(ids))
    }
    new_level = _Level(
        nodes=list(range(len(ids))),
        adj=new_adj,
        self_loops=new_loops,
        strengths=strengths,
        m=level.m,
    )
    return new_level, {i: relabel[c] for i, c in comm.items()}


def louvain(
    graph: WordGraph, seed: int = 0, max_passes: int = 20
) -> tuple[Partition, list[float]]:
    """Two-phase modularity maximization; deterministic for a fixed seed.

    Returns the partition of the original nodes and the modularity value
    after the initial singleton state and after each local-moving pass.
    """
    if not graph.nodes:
        raise ValueError("louvain requires a non-empty graph")
    if graph.total_weight == 0:
        raise ValueError("louvain requires positive total edge weight")
    rng = random.Random(seed)
    level, labels = _level_from(graph)
    node_comm = {i: i for i in level.nodes}  # original index -> current community
    q_trace = [_level_modularity(level, {i: i for i in level.nodes})]
    for _ in range(max_passes):
        comm, moved = _local_moving(level, rng)
        if not moved:
            break
        q_trace.append(_level_modularity(level, comm))
        level, relabeled = _aggregate(level, comm)
        node_comm = {orig: relabeled[c] for orig, c in node_comm.items()}
        if len(level.nodes) == 1:
            break
    # stable public ids: communities numbered by their smallest member label
    groups: dict[int, list[str]] = {}
    for orig, c in node_comm.items():
        groups.setdefault(c, []).append(labels[orig])
    ordered = sorted(groups.values(), key=min)
    mapping = {node: cid for cid, members in enumerate(ordered) for node in members}
    return Partition.from_mapping(mapping), q_trace


def extract_topics(graph: WordGraph, partition: Partition, top_k: int) -> list[Topic]:
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    strengths: dict[str, float] = {u: 2.0 * graph.self_loops.get(u, 0.0) for u in graph.nodes}
    for (u, v), w in graph.edges.items():
        strengths[u] += w
        strengths[v] += w
    topics = []
    for cid in sorted(partition.communities):
        members = partition.communities[cid]
        ranked = sorted(((u, strengths.get(u, 0.0)) for u in members), key=lambda kv: (-kv[1], kv[0]))
        topics.append(Topic(id=cid, keywords=tuple(ranked[:top_k])))
    return topics


def assign_topic(doc: Sequence[str], topics: Sequence[Topic]) -> int | None:
    """Community whose keywords cover the doc with the most link weight."""
    if not topics:
        raise ValueError("topics must be non-empty")
    scores: dict[int, float] = {}
    for topic in topics:
        weight_of = dict(topic.keywords)
        score = sum(weight_of[t] for t in doc if t in weight_of)
        scores[topic.id] = score
    best = max(scores.values())
    if best <= 0.0:
        return None
    return min(c for c, s in scores.items() if s == best)


def _doc_frequencies(
    terms: Sequence[str], corpus: Sequence[Sequence[str]]
) -> tuple[dict[str, int], dict[tuple[str, str], int]]:
    singles = {t: 0 for t in terms}
    pairs = {
        (min(a, b), max(a, b)): 0
        for i, a in enumerate(terms)
        for b in terms[i + 1 :]
        if a != b
    }
    for doc in corpus:
        present = set(doc)
        for t in terms:
            if t in present:
                singles[t] += 1
        for (a, b) in pairs:
            if a in present and b in present:
                pairs[(a, b)] += 1
    return singles, pairs


def _top_terms(topic: Topic, top_k: int) -> list[str]:
    if top_k < 2:
        raise ValueError("top_k must be >= 2")
    return [u for u, _ in topic.keywords[:top_k]]


def topic_coherence(topic: Topic, corpus: Sequence[Sequence[str]], top_k: int) -> float:
    """Sum over ordered keyword pairs of log (D(ui,uj)+1)/(D(uj)+1)."""
    terms = _top_terms(topic, top_k)
    singles, pairs = _doc_frequencies(terms, corpus)
    total = 0.0
    for i, ui in enumerate(terms):
        for j, uj in enumerate(terms):
            if i == j:
                continue
            joint = pairs.get((min(ui, uj), max(ui, uj)), 0)
            total += math.log((joint + 1) / (singles[uj] + 1))
    return total


def topic_pmi(topic: Topic, corpus: Sequence[Sequence[str]], top_k: int) -> float:
    """Sum over ordered keyword pairs of log P(ui,uj)/(P(ui)P(uj)), with
    add-one smoothed counts over N = len(corpus) documents."""
    terms = _top_terms(topic, top_k)
    if not corpus:
        raise ValueError("corpus must be non-empty")
    n = len(corpus)
    singles, pairs = _doc_frequencies(terms, corpus)
    total = 0.0
    for i, ui in enumerate(terms):
        for j, uj in enumerate(terms):
            if i == j:
                continue
            p_joint = (pairs.get((min(ui, uj), max(ui, uj)), 0) + 1) / n
            p_i = (singles[ui] + 1) / n
            p_j = (singles[uj] + 1) / n
            total += math.log(p_joint / (p_i * p_j))
    return total


def topic_prf(
    detected: Sequence[str], truth: Sequence[str], k: int
) -> tuple[float, float, float]:
    if k < 1:
        raise ValueError("k must be >= 1")
    truth_set = set(truth)
    if not truth_set:
        raise ValueError("truth keywords must be non-empty")
    detected_set = set(detected[:k])
    if not detected_set:
        return (0.0, 0.0, 0.0)
    inter = len(detected_set & truth_set)
    precision = inter / len(detected_set)
    recall = inter / len(truth_set)
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return (precision, recall, f)


def save_graph_tsv(graph: WordGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (u, v) in sorted(graph.edges):
            fh.write(f"{u}\t{v}\t{repr(graph.edges[(u, v)])}\n")
        for u in sorted(graph.self_loops):
            fh.write(f"{u}\t{u}\t{repr(graph.self_loops[u])}\n")


def load_graph_tsv(path: str) -> WordGraph:
    edges: dict[tuple[str, str], float] = {}
    loops: dict[str, float] = {}
    nodes: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected u<TAB>v<TAB>weight")
            u, v, raw = parts
            weight = float(raw)
            nodes.update((u, v))
            if u == v:
                loops[u] = loops.get(u, 0.0) + weight
            else:
                key = (min(u, v), max(u, v))
                edges[key] = edges.get(key, 0.0) + weight
    return WordGraph(nodes=tuple(sorted(nodes)), edges=edges, self_loops=loops)


def topics_to_json(topics: Sequence[Topic]) -> list[dict]:
    return [
        {"id": t.id, "keywords": [[u, w] for u, w in t.keywords]} for t in topics
    ]


def topics_from_json(data: Iterable[Mapping]) -> list[Topic]:
    return [
        Topic(id=int(row["id"]), keywords=tuple((str(u), float(w)) for u, w in row["keywords"]))
        for row in data
    ]
