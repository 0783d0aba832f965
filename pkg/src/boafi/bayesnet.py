"""Bayesian networks over string positions with decision-tree local structure.

Each variable owns one binary decision tree. Internal nodes split on a
parent variable; leaves hold the counts behind p(X_i = 1 | path) and the
fitness statistics used for fitness inheritance. Full conditional
probability tables are the special case where every leaf of a tree is
split on the same variable at once.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Union

import numpy as np
from scipy.special import gammaln

from .core import Population, RandomStream

LN2 = math.log(2.0)


class Metric(enum.Enum):
    BDE = "bde"
    BIC = "bic"


class Mode(enum.Enum):
    TREE = "tree"
    FULL_CPT = "cpt"


class NetworkInvariantError(RuntimeError):
    """Internal consistency failure: a cycle or a bad sampling order."""


@dataclass(frozen=True)
class ScoreParams:
    metric: Metric = Metric.BDE
    data_size: int = 1
    pseudo_count: float = 1.0

    def __post_init__(self):
        if self.data_size < 1:
            raise ValueError("data_size must be at least 1")
        if self.pseudo_count <= 0:
            raise ValueError("pseudo_count must be positive")

    @property
    def penalty(self) -> float:
        return 0.5 * math.log2(self.data_size)

    def with_size(self, data_size: int) -> "ScoreParams":
        return ScoreParams(self.metric, data_size, self.pseudo_count)


def _scores(m0, m1, params: ScoreParams):
    """Vectorized leaf score in bits, penalty included."""
    m0 = np.asarray(m0, dtype=float)
    m1 = np.asarray(m1, dtype=float)
    if params.metric is Metric.BDE:
        s = params.pseudo_count
        ll = (gammaln(2 * s) - gammaln(2 * s + m0 + m1)
              + gammaln(s + m0) + gammaln(s + m1) - 2 * gammaln(s)) / LN2
    else:
        m = m0 + m1
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = np.where(m0 > 0, m0 * np.log2(m0 / m), 0.0)
            t1 = np.where(m1 > 0, m1 * np.log2(m1 / m), 0.0)
        ll = t0 + t1
    return ll - params.penalty


def leaf_score(m0: int, m1: int, params: ScoreParams) -> float:
    if m0 < 0 or m1 < 0:
        raise ValueError("counts must be non-negative")
    return float(_scores(m0, m1, params))


# --------------------------------------------------------------------------
# trees


@dataclass(eq=False)
class Leaf:
    count0: int = 0
    count1: int = 0
    fit_sum0: float = 0.0
    fit_sum1: float = 0.0
    fit_count0: int = 0
    fit_count1: int = 0
    index: int = 0

    def fit_sum(self, x: int) -> float:
        return self.fit_sum1 if x else self.fit_sum0

    def fit_count(self, x: int) -> int:
        return self.fit_count1 if x else self.fit_count0

    def clear_fitness(self) -> None:
        self.fit_sum0 = self.fit_sum1 = 0.0
        self.fit_count0 = self.fit_count1 = 0


@dataclass(eq=False)
class Internal:
    split_var: int
    child0: "TreeNode"
    child1: "TreeNode"


TreeNode = Union[Leaf, Internal]


def leaf_probability(leaf: Leaf) -> float:
    """Laplace-corrected p(X_i = 1) at a leaf."""
    return (leaf.count1 + 1) / (leaf.count0 + leaf.count1 + 2)


class DecisionTree:
    def __init__(self, target: int, root: Optional[TreeNode] = None):
        self.target = target
        self.root: TreeNode = Leaf() if root is None else root
        self.reindex()

    def reindex(self) -> None:
        """Number leaves in pre-order (0-branch first)."""
        self._leaves = list(self._walk_leaves(self.root))
        for k, leaf in enumerate(self._leaves):
            leaf.index = k

    @staticmethod
    def _walk_leaves(node: TreeNode) -> Iterator[Leaf]:
        stack = [node]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                yield node
            else:
                stack.append(node.child1)
                stack.append(node.child0)

    @property
    def leaves(self) -> List[Leaf]:
        return self._leaves

    def parents(self) -> set:
        out = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Internal):
                out.add(node.split_var)
                stack.extend((node.child0, node.child1))
        return out

    def leaf_for(self, bits) -> Leaf:
        node = self.root
        while isinstance(node, Internal):
            node = node.child1 if bits[node.split_var] else node.child0
        return node

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        """Pre-order leaf number reached by each row of ``X``."""
        out = np.zeros(X.shape[0], dtype=np.intp)
        if isinstance(self.root, Leaf):
            return out
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if isinstance(node, Leaf):
                out[idx] = node.index
                continue
            ones = X[:, node.split_var][idx].view(bool) if X.dtype == np.uint8 else X[idx, node.split_var] > 0
            stack.append((node.child0, idx[~ones]))
            stack.append((node.child1, idx[ones]))
        return out

    def leaf_paths(self):
        """Yield ``(leaf, {var: value})`` for each leaf, in pre-order."""
        stack = [(self.root, {})]
        while stack:
            node, cond = stack.pop()
            if isinstance(node, Leaf):
                yield node, cond
            else:
                stack.append((node.child1, {**cond, node.split_var: 1}))
                stack.append((node.child0, {**cond, node.split_var: 0}))

    def probabilities(self) -> np.ndarray:
        return np.array([leaf_probability(leaf) for leaf in self._leaves])


@dataclass
class BayesianNetwork:
    trees: List[DecisionTree]
    mode: Mode = Mode.TREE

    @classmethod
    def empty(cls, n: int, mode: Mode = Mode.TREE) -> "BayesianNetwork":
        return cls([DecisionTree(i) for i in range(n)], mode)

    @property
    def n(self) -> int:
        return len(self.trees)

    def parents(self, i: int) -> set:
        return self.trees[i].parents()

    def edges(self) -> set:
        """Set of ``(j, i)`` pairs, one per dependency j -> i."""
        return {(j, t.target) for t in self.trees for j in t.parents()}

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for j, i in self.edges():
            adj[j, i] = True
        return adj

    def leaves(self):
        for tree in self.trees:
            yield from tree.leaves


def topological_order(net: BayesianNetwork) -> List[int]:
    """Ancestral order; among ready variables the lowest index goes first."""
    parents = [net.parents(i) for i in range(net.n)]
    children = [[] for _ in range(net.n)]
    indegree = [len(p) for p in parents]
    for i, ps in enumerate(parents):
        for j in ps:
            children[j].append(i)
    ready = [i for i in range(net.n) if indegree[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for c in children[v]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != net.n:
        raise NetworkInvariantError("dependency graph contains a cycle")
    return order


# --------------------------------------------------------------------------
# learning


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, Population):
        data = data.bits
    data = np.asarray(data)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("learning needs a non-empty 2-d data set")
    return data


class _Scorer:
    """Table-driven leaf scores for integer counts up to the data size.

    Both metrics take the form T1[m0] + T1[m1] - T2[m0 + m1] + C.
    """

    def __init__(self, params: ScoreParams, size: int):
        k = np.arange(size + 1, dtype=float)
        if params.metric is Metric.BDE:
            s = params.pseudo_count
            self.t1 = gammaln(s + k) / LN2
            self.t2 = gammaln(2 * s + k) / LN2
            self.const = (gammaln(2 * s) - 2 * gammaln(s)) / LN2 - params.penalty
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                self.t1 = np.where(k > 0, k * np.log2(k), 0.0)
            self.t2 = self.t1
            self.const = -params.penalty

    def gains(self, D: np.ndarray, i: int, rows: np.ndarray) -> np.ndarray:
        """Gain of splitting a leaf of tree ``i`` (holding ``rows``) on each variable."""
        return self.from_stats(leaf_stats(D, i, rows))

    def from_stats(self, stats) -> np.ndarray:
        r, c1, ones, both = stats
        t1, t2 = self.t1, self.t2
        # child X_j = 1 holds (ones - both, both); child X_j = 0 the rest
        return (t1[ones - both] + t1[both] - t2[ones]
                + t1[r - ones - c1 + both] + t1[c1 - both] - t2[r - ones]
                - t1[r - c1] - t1[c1] + t2[r] + self.const)


def leaf_stats(D: np.ndarray, i: int, rows: np.ndarray):
    """(rows, ones in X_i, ones per column, joint ones with X_i) for a leaf's data."""
    X = D[rows]
    r = X.shape[0]
    if r == 0:
        zero = np.zeros(D.shape[1], dtype=np.intp)
        return 0, 0, zero, zero
    ones = np.rint(X.sum(axis=0)).astype(np.intp)
    both = np.rint(X[:, i] @ X).astype(np.intp)
    return r, int(ones[i]), ones, both


def _minus(a, b):
    return a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]


def split_gain(i: int, leaf_condition: dict, j: int, data, params: ScoreParams,
               net: Optional[BayesianNetwork] = None) -> Optional[float]:
    """Score change from splitting the leaf of tree ``i`` reached by
    ``leaf_condition`` on ``X_j``.

    Returns ``None`` when the split would close a cycle in ``net``.
    """
    D = _as_matrix(data)
    if j == i or j in leaf_condition:
        raise ValueError(f"variable {j} cannot split this leaf of tree {i}")
    if net is not None and j not in net.parents(i) and _reaches(net.adjacency(), i, j):
        return None
    mask = np.ones(D.shape[0], dtype=bool)
    for var, val in leaf_condition.items():
        mask &= D[:, var] == val
    rows = np.flatnonzero(mask)
    params = params.with_size(params.data_size)
    return float(_Scorer(params, D.shape[0]).gains(D.astype(np.float32), i, rows)[j])


def _reaches(adj: np.ndarray, src: int, dst: int) -> bool:
    seen = {src}
    stack = [src]
    while stack:
        v = stack.pop()
        if v == dst:
            return True
        for w in np.flatnonzero(adj[v]):
            if w not in seen:
                seen.add(int(w))
                stack.append(int(w))
    return False


class _Slots:
    """Growable table of split candidates, one row per leaf (or per tree in CPT mode)."""

    def __init__(self, n: int, capacity: int):
        self.gains = np.full((capacity, n), -np.inf)
        self.fixed = np.ones((capacity, n), dtype=bool)  # self or already on the path
        self.tree = np.zeros(capacity, dtype=np.intp)
        self.keys: list = []
        self.leaves: list = []  # per row: list of (leaf, holder, branch, rows, stats)
        self.size = 0

    def add(self, tree, key, leaves, gains, fixed) -> None:
        if self.size == len(self.tree):
            grow = len(self.tree)
            self.gains = np.vstack([self.gains, np.full_like(self.gains[:grow], -np.inf)])
            self.fixed = np.vstack([self.fixed, np.ones_like(self.fixed[:grow])])
            self.tree = np.concatenate([self.tree, np.zeros(grow, dtype=np.intp)])
        k = self.size
        self.gains[k] = gains
        self.fixed[k] = fixed
        self.tree[k] = tree
        self.keys.append(key)
        self.leaves.append(leaves)
        self.size += 1

    def kill(self, k: int) -> None:
        self.fixed[k] = True
        self.leaves[k] = None


def learn_network(data, params: Optional[ScoreParams] = None,
                  mode: Mode = Mode.TREE, leaf_ids: Optional[List[np.ndarray]] = None) -> BayesianNetwork:
    """Greedy structure learning: apply the best positive split until none remains.

    Ties go to the lowest (tree, leaf in pre-order, split variable). If
    ``leaf_ids`` is a list it receives, per tree, the leaf number of every
    data row.
    """
    # float32 holds every count exactly up to 2**24 rows
    D = _as_matrix(data).astype(np.float32)
    M, n = D.shape
    params = (params or ScoreParams()).with_size(M)
    scorer = _Scorer(params, M)
    net = BayesianNetwork.empty(n, mode)
    reach = np.zeros((n, n), dtype=bool)  # reach[a, b]: path a -> b exists
    parents = [set() for _ in range(n)]

    slots = _Slots(n, 4 * n)
    all_rows = np.arange(M)
    ones = np.rint(D.sum(axis=0)).astype(np.intp)
    joint = np.rint(D.T @ D).astype(np.intp)
    for i in range(n):
        fixed = np.zeros(n, dtype=bool)
        fixed[i] = True
        stats = (M, int(ones[i]), ones, joint[i])
        slots.add(i, (), [(net.trees[i].root, None, 0, all_rows, stats)],
                  scorer.from_stats(stats), fixed)

    while True:
        k = slots.size
        G = np.where(slots.fixed[:k] | reach[slots.tree[:k]], -np.inf, slots.gains[:k])
        best = G.max()
        if not best > 0:
            break
        rows, cols = np.nonzero(G == best)
        k, j = min(zip(rows.tolist(), cols.tolist()),
                   key=lambda rc: (slots.tree[rc[0]], slots.keys[rc[0]], rc[1]))
        i = int(slots.tree[k])
        _apply_split(net, D, slots, k, j, scorer)
        if j not in parents[i]:
            parents[i].add(j)
            src = reach[:, j].copy()
            src[j] = True
            dst = reach[i].copy()
            dst[i] = True
            reach |= np.outer(src, dst)
            if reach[i, i]:
                raise NetworkInvariantError(f"split {j} -> {i} closed a cycle")

    for k in range(slots.size):
        if slots.leaves[k] is None:
            continue
        for leaf, _, _, rows, stats in slots.leaves[k]:
            leaf.count1 = stats[1]
            leaf.count0 = stats[0] - stats[1]
    for tree in net.trees:
        tree.reindex()
    if leaf_ids is not None:
        leaf_ids.clear()
        leaf_ids.extend(np.empty(M, dtype=np.intp) for _ in range(n))
        for k in range(slots.size):
            if slots.leaves[k] is None:
                continue
            i = slots.tree[k]
            for leaf, _, _, rows, _ in slots.leaves[k]:
                leaf_ids[i][rows] = leaf.index
    return net


def _apply_split(net: BayesianNetwork, D: np.ndarray, slots: _Slots, k: int, j: int,
                 scorer: _Scorer) -> None:
    i = int(slots.tree[k])
    tree = net.trees[i]
    fixed = slots.fixed[k].copy()
    fixed[j] = True
    key = slots.keys[k]
    children = []
    for leaf, holder, branch, rows, stats in slots.leaves[k]:
        ones = D[rows, j] > 0
        node = Internal(j, Leaf(), Leaf())
        if holder is None:
            tree.root = node
        elif branch:
            holder.child1 = node
        else:
            holder.child0 = node
        rows0, rows1 = rows[~ones], rows[ones]
        # count the smaller child; the sibling is the difference
        if len(rows1) <= len(rows0):
            stats1 = leaf_stats(D, i, rows1)
            stats0 = _minus(stats, stats1)
        else:
            stats0 = leaf_stats(D, i, rows0)
            stats1 = _minus(stats, stats0)
        children.append((node.child0, node, 0, rows0, stats0))
        children.append((node.child1, node, 1, rows1, stats1))
    slots.kill(k)
    if net.mode is Mode.TREE:
        for b, child in enumerate(children):
            slots.add(i, key + (b,), [child], scorer.from_stats(child[4]), fixed)
    else:
        gains = sum(scorer.from_stats(child[4]) for child in children)
        slots.add(i, key, children, gains, fixed)


# --------------------------------------------------------------------------
# sampling


def sample(net: BayesianNetwork, count: int, rng: RandomStream,
           leaf_ids: Optional[List[np.ndarray]] = None) -> np.ndarray:
    """Draw ``count`` strings by ancestral sampling.

    If ``leaf_ids`` is a list, it is filled with each tree's leaf numbers
    for the sampled rows (indexed by variable), sparing a second traversal.
    """
    # column-major while sampling: every step reads and writes whole columns
    X = np.zeros((count, net.n), dtype=np.uint8, order="F")
    assigned = np.zeros(net.n, dtype=bool)
    ids_out = [None] * net.n
    for i in topological_order(net):
        tree = net.trees[i]
        if not all(assigned[j] for j in tree.parents()):
            raise NetworkInvariantError(f"tree {i} splits on a variable not yet sampled")
        ids = tree.leaf_index(X)
        p = tree.probabilities()[ids]
        X[:, i] = rng.random(count) < p
        assigned[i] = True
        ids_out[i] = ids
    if leaf_ids is not None:
        leaf_ids[:] = ids_out
    return np.ascontiguousarray(X)


def sample_individual(net: BayesianNetwork, rng: RandomStream) -> np.ndarray:
    return sample(net, 1, rng)[0]


def log_probability(net: BayesianNetwork, X: np.ndarray) -> np.ndarray:
    """log p(x) of each row under the network's joint distribution."""
    X = np.atleast_2d(X)
    total = np.zeros(X.shape[0])
    for tree in net.trees:
        p1 = tree.probabilities()[tree.leaf_index(X)]
        total += np.log(np.where(X[:, tree.target] > 0, p1, 1.0 - p1))
    return total


# --------------------------------------------------------------------------
# text dump


def dump_model(net: BayesianNetwork) -> str:
    """One ``tree <i>`` block per variable, nodes in pre-order."""
    lines = []
    for tree in net.trees:
        lines.append(f"tree {tree.target}")
        stack = [tree.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Internal):
                lines.append(f"node {node.split_var}")
                stack.extend((node.child1, node.child0))
            else:
                lines.append(f"leaf {node.count0} {node.count1} {node.fit_sum0!r} "
                             f"{node.fit_count0} {node.fit_sum1!r} {node.fit_count1}")
    return "\n".join(lines) + "\n"


def load_model(text: str, mode: Mode = Mode.TREE) -> BayesianNetwork:
    tokens = [line.split() for line in text.splitlines() if line.strip()]
    pos = 0

    def parse():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok[0] == "node":
            var = int(tok[1])
            child0 = parse()
            child1 = parse()
            return Internal(var, child0, child1)
        if tok[0] == "leaf":
            c0, c1, fs0, fc0, fs1, fc1 = tok[1:]
            return Leaf(int(c0), int(c1), float(fs0), float(fs1), int(fc0), int(fc1))
        raise ValueError(f"unexpected line {' '.join(tok)!r}")

    trees = []
    while pos < len(tokens):
        tok = tokens[pos]
        if tok[0] != "tree":
            raise ValueError(f"expected 'tree', got {' '.join(tok)!r}")
        pos += 1
        trees.append(DecisionTree(int(tok[1]), parse()))
    return BayesianNetwork(trees, mode)
