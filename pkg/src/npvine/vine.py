"""
Regular vine structures, sequential pair-copula estimation and structure
selection by maximum spanning trees.

Variables are labelled 1..d; column ``i - 1`` of a data matrix holds variable
``i``. An edge ``(j, k; D)`` of tree m joins two nodes of tree m - 1 whose
variable sets are ``{j} | D`` and ``{k} | D``; ``j < k`` and ``|D| = m - 1``.
Its pair-copula is a density ``c(u, v)`` with u the conditional
pseudo-observation of j and v that of k, both given D.
"""
import json
import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import CLIP_EPS, as_copula_data, clip_unit, kendalls_tau
from .pair import PDF_FLOOR

log = logging.getLogger(__name__)

ESTIMATORS = ("par", "bern", "pbern", "pspl1", "pspl2", "tll0", "tll1", "tll2")
CRITERIA = ("tau", "caic")


@dataclass(frozen=True)
class Edge:
    """Edge ``(j, k; D)``. ``nodes`` optionally records the two joined node
    variable sets when they cannot be recovered from the labels."""

    j: int
    k: int
    D: tuple = ()
    nodes: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "D", tuple(sorted(int(x) for x in self.D)))

    @classmethod
    def from_nodes(cls, va, vb):
        """Label the edge joining nodes with variable sets ``va`` and ``vb``."""
        va, vb = frozenset(va), frozenset(vb)
        D = va & vb
        cond = sorted(va ^ vb)
        return cls(cond[0], cond[-1], tuple(D), nodes=(va, vb))

    @property
    def key(self):
        return (self.j, self.k, self.D)

    @property
    def variables(self):
        return frozenset((self.j, self.k)) | frozenset(self.D)

    def node_sets(self):
        if self.nodes is not None:
            return self.nodes
        D = frozenset(self.D)
        return (D | {self.j}, D | {self.k})

    def to_dict(self):
        return {"j": self.j, "k": self.k, "D": list(self.D)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["j"]), int(d["k"]), tuple(d.get("D", ())))

    def __str__(self):
        if self.D:
            return f"{self.j},{self.k};{','.join(map(str, self.D))}"
        return f"{self.j},{self.k}"


class RVineStructure:
    """Tree sequence ``T_1, ..., T_{d-1}`` given as lists of edges."""

    def __init__(self, trees, d=None):
        self.trees = [list(t) for t in trees]
        if d is None:
            vars_ = set()
            for e in (self.trees[0] if self.trees else []):
                vars_ |= {e.j, e.k}
            d = max(vars_) if vars_ else 0
        self.d = int(d)

    @property
    def edges(self):
        return [e for t in self.trees for e in t]

    def validate(self):
        return validate_structure(self)

    def to_dict(self):
        return {"d": self.d, "trees": [[e.to_dict() for e in t] for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        trees = [[Edge.from_dict(e) for e in t] for t in d["trees"]]
        return cls(trees, d.get("d"))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        return (isinstance(other, RVineStructure) and self.d == other.d
                and [sorted(e.key for e in t) for t in self.trees]
                == [sorted(e.key for e in t) for t in other.trees])

    def __repr__(self):
        return "RVineStructure(" + " | ".join(" ".join(str(e) for e in t) for t in self.trees) + ")"


@dataclass
class ValidationReport:
    ok: bool
    condition: str = ""
    edge: Edge = None
    tree: int = 0
    message: str = ""

    def __bool__(self):
        return self.ok


def _is_tree(nodes, links):
    """True when ``links`` (pairs of node ids) form a spanning tree."""
    parent = {v: v for v in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if len(links) != len(nodes) - 1:
        return False
    for a, b in links:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def validate_structure(s):
    """Check the tree-sequence conditions and the edge labelling.

    Returns a :class:`ValidationReport`; on failure it names the first
    violated condition ("tree", "proximity" or "labeling") with the offending
    tree level and edge.
    """
    d = s.d
    if d < 2:
        return ValidationReport(False, "tree", None, 0, "need at least two variables")
    if len(s.trees) != d - 1:
        return ValidationReport(False, "tree", None, 0,
                                f"expected {d - 1} trees, got {len(s.trees)}")
    prev_sets = None
    prev_nodes = None
    for m, tree in enumerate(s.trees, start=1):
        if m == 1:
            nodes = [frozenset([v]) for v in range(1, d + 1)]
        else:
            nodes = prev_sets
        node_ids = {ns: i for i, ns in enumerate(nodes)}
        links = []
        cur_sets = []
        cur_nodes = []
        for e in tree:
            if not (1 <= e.j <= d and 1 <= e.k <= d):
                return ValidationReport(False, "tree", e, m, f"edge {e} uses an unknown variable")
            va, vb = e.node_sets()
            if va not in node_ids or vb not in node_ids or va == vb:
                where = "two variables" if m == 1 else f"two edges of tree {m - 1}"
                return ValidationReport(False, "tree", e, m, f"edge {e} does not join {where}")
            if m >= 2:
                na, nb = prev_nodes[node_ids[va]], prev_nodes[node_ids[vb]]
                if not (na & nb):
                    return ValidationReport(False, "proximity", e, m,
                                            f"edge {e} joins nodes without a common node")
            D = va & vb
            cond = va ^ vb
            if (len(cond) != 2 or frozenset(e.D) != D or (e.j, e.k) != tuple(sorted(cond))
                    or len(e.D) != m - 1):
                return ValidationReport(False, "labeling", e, m, f"edge {e} is mislabelled")
            links.append((node_ids[va], node_ids[vb]))
            cur_sets.append(va | vb)
            cur_nodes.append(frozenset([va, vb]))
        if not _is_tree(range(len(nodes)), links):
            return ValidationReport(False, "tree", None, m, f"tree {m} is not a spanning tree")
        prev_sets = cur_sets
        prev_nodes = cur_nodes
    return ValidationReport(True)


# --------------------------------------------------------------------------
# maximum spanning trees

def max_spanning_tree(nodes, edges):
    """Maximum spanning tree by Prim's algorithm.

    Parameters
    ----------
    nodes : sequence
        Sortable node identifiers.
    edges : dict
        Maps ``(a, b)`` to ``(weight, tiekey)``; ``tiekey`` may be None, in
        which case ``tuple(sorted((a, b)))`` is used. Among equal weights the
        smallest tie key wins.

    Returns
    -------
    list of (a, b)
        Selected edges, in the order they were added.
    """
    nodes = sorted(nodes)
    if len(nodes) <= 1:
        return []
    adj = {v: [] for v in nodes}
    for (a, b), val in edges.items():
        w, key = val if isinstance(val, tuple) else (val, None)
        if key is None:
            key = tuple(sorted((a, b)))
        adj[a].append((w, key, a, b))
        adj[b].append((w, key, a, b))
    in_tree = {nodes[0]}
    chosen = []
    while len(in_tree) < len(nodes):
        best = None
        for v in in_tree:
            for w, key, a, b in adj[v]:
                other = b if a == v else a
                if other in in_tree:
                    continue
                if best is None or w > best[0] or (w == best[0] and key < best[1]):
                    best = (w, key, a, b, other)
        if best is None:
            raise RuntimeError("admissible edge graph is disconnected")
        chosen.append((best[2], best[3]))
        in_tree.add(best[4])
    return chosen


# --------------------------------------------------------------------------
# pair-copula estimation

def fit_pair(u, v, estimator, **options):
    """Fit one pair-copula with the named estimator."""
    if estimator == "par":
        from .families import fit_parametric
        return fit_parametric(u, v, **options)
    if estimator == "bern":
        from .bernstein import fit_bern
        return fit_bern(u, v, **options)
    if estimator in ("pbern", "pspl1", "pspl2"):
        from .penalized import BasisSpec, fit_penalized
        spec = BasisSpec.default(estimator)
        if "K" in options:
            spec = BasisSpec(spec.kind, int(options["K"]), spec.q)
        return fit_penalized(u, v, spec, options.get("lambdas"))
    if estimator in ("tll0", "tll1", "tll2"):
        from .tll import fit_tll
        return fit_tll(u, v, int(estimator[-1]), **options)
    raise ValueError(f"unknown estimator {estimator!r}")


def _key(var, D):
    return (var, frozenset(D))


class Vine:
    """A structure with one pair-copula per edge; evaluates the simplified
    vine copula density and samples from it."""

    def __init__(self, structure, pairs):
        self.structure = structure
        self.pairs = dict(pairs)
        missing = [e for e in structure.edges if e not in self.pairs]
        if missing:
            raise ValueError(f"no pair-copula for edges {[str(e) for e in missing]}")

    @property
    def d(self):
        return self.structure.d

    def _pair_args(self, pobs, e):
        return pobs[_key(e.j, e.D)], pobs[_key(e.k, e.D)]

    @staticmethod
    def _push(pobs, e, pair, u, v):
        D = frozenset(e.D)
        pobs[_key(e.j, D | {e.k})] = clip_unit(pair.hfunc1(u, v))
        pobs[_key(e.k, D | {e.j})] = clip_unit(pair.hfunc2(u, v))

    def logpdf(self, u):
        """Log density at the rows of ``u`` (shape (n, d) or (d,))."""
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        u = np.atleast_2d(u)
        if u.shape[1] != self.d:
            raise ValueError(f"expected {self.d} columns, got {u.shape[1]}")
        u = clip_unit(u)
        pobs = {_key(i + 1, ()): u[:, i] for i in range(self.d)}
        out = np.zeros(u.shape[0])
        last = len(self.structure.trees)
        for m, tree in enumerate(self.structure.trees, start=1):
            for e in tree:
                pair = self.pairs[e]
                a, b = self._pair_args(pobs, e)
                out += pair.logpdf(a, b)
                if m < last:
                    self._push(pobs, e, pair, a, b)
        return out[0] if single else out

    def pdf(self, u):
        return np.exp(self.logpdf(u))

    def loglik(self, data):
        return float(np.sum(self.logpdf(data)))

    @property
    def edf(self):
        return float(sum(self.pairs[e].edf for e in self.structure.edges))

    def sampling_order(self):
        """Peel variables off the top tree; returns ``[(var, edges), ...]`` in
        sampling order, where ``edges[m - 1]`` is the tree-m edge whose
        conditioned set contains var and whose other variables come earlier."""
        trees = [list(t) for t in self.structure.trees]
        peeled = []
        remaining = set(range(1, self.d + 1))
        while len(remaining) > 1:
            top = next(t for t in reversed(trees) if t)
            x = top[0].k
            mine = []
            for t in trees:
                hits = [e for e in t if x in (e.j, e.k)]
                if len(hits) > 1:
                    raise RuntimeError(f"variable {x} is not a leaf of the remaining vine")
                if hits:
                    mine.append(hits[0])
                    t.remove(hits[0])
            peeled.append((x, mine))
            remaining.discard(x)
        peeled.append((remaining.pop(), []))
        return peeled[::-1]

    def sample(self, n, rng):
        """Draw n observations by the inverse Rosenblatt transform."""
        w = rng.uniform(size=(n, self.d))
        return self.inverse_rosenblatt(w)

    def inverse_rosenblatt(self, w):
        w = clip_unit(np.asarray(w, dtype=float))
        n = w.shape[0]
        out = np.empty((n, self.d))
        pobs = {}
        for t, (x, edges) in enumerate(self.sampling_order()):
            p = w[:, t]
            for e in reversed(edges):
                pair = self.pairs[e]
                if x == e.j:
                    p = pair.hinv1(p, pobs[_key(e.k, e.D)])
                else:
                    p = pair.hinv2(p, pobs[_key(e.j, e.D)])
                p = clip_unit(p)
                pobs[_key(x, e.D)] = p
            pobs[_key(x, ())] = p
            out[:, x - 1] = p
            for e in edges:
                pair = self.pairs[e]
                self._push(pobs, e, pair, *self._pair_args(pobs, e))
        return out


class VineModel(Vine):
    """A fitted vine copula model."""

    def __init__(self, structure, pairs, estimator, criterion=None, nobs=0,
                 fit_calls=0, failures=None):
        super().__init__(structure, pairs)
        self.estimator = estimator
        self.criterion = criterion
        self.nobs = int(nobs)
        self.fit_calls = int(fit_calls)
        self.failures = list(failures or [])

    def report(self):
        rows = []
        for m, tree in enumerate(self.structure.trees, start=1):
            for e in tree:
                p = self.pairs[e]
                rows.append({"tree": m, "edge": str(e), "estimator": p.estimator,
                             "loglik": float(p.loglik), "edf": float(p.edf),
                             "caic": float(p.caic)})
        return {"estimator": self.estimator, "criterion": self.criterion, "nobs": self.nobs,
                "loglik": float(sum(r["loglik"] for r in rows)),
                "edf": float(sum(r["edf"] for r in rows)), "fit_calls": self.fit_calls,
                "failures": [str(e) for e in self.failures], "edges": rows}

    def to_dict(self):
        return {"estimator": self.estimator, "criterion": self.criterion, "nobs": self.nobs,
                "structure": self.structure.to_dict(),
                "pairs": [{"edge": e.to_dict(), "fit": self.pairs[e].to_dict()}
                          for e in self.structure.edges]}

    @classmethod
    def from_dict(cls, d):
        structure = RVineStructure.from_dict(d["structure"])
        pairs = {Edge.from_dict(p["edge"]): pair_from_dict(p["fit"]) for p in d["pairs"]}
        return cls(structure, pairs, d.get("estimator"), d.get("criterion"), d.get("nobs", 0))


def pair_from_dict(d):
    """Rebuild a fitted pair-copula from its ``to_dict`` output."""
    est = d["estimator"]
    if est == "par":
        from .families import ParametricCopula
        return ParametricCopula.from_dict(d)
    if est == "bern":
        from .bernstein import BernsteinCopula
        return BernsteinCopula.from_dict(d)
    if est in ("pbern", "pspl1", "pspl2"):
        from .penalized import PenalizedCopula
        return PenalizedCopula.from_dict(d)
    if est.startswith("tll"):
        from .tll import TllCopula
        return TllCopula.from_dict(d)
    raise ValueError(f"unknown estimator {est!r}")


class _Fitter:
    """Shared state of Algorithms 1 and 2: pseudo-observations and counters."""

    def __init__(self, data, estimator, options):
        if estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {estimator!r}")
        self.data = as_copula_data(data)
        self.n, self.d = self.data.shape
        if self.n < 10:
            raise ValueError("vine fitting needs at least 10 observations")
        self.estimator = estimator
        self.options = options or {}
        self.pobs = {_key(i + 1, ()): self.data[:, i] for i in range(self.d)}
        self.fit_calls = 0
        self.failures = []

    def args(self, e):
        return self.pobs[_key(e.j, e.D)], self.pobs[_key(e.k, e.D)]

    def fit(self, e):
        from .families import independence_copula
        self.fit_calls += 1
        u, v = self.args(e)
        try:
            return fit_pair(u, v, self.estimator, **self.options)
        except Exception as exc:  # degrade the edge, keep the vine
            log.warning("edge %s: %s fit failed (%s); using independence", e, self.estimator, exc)
            self.failures.append(e)
            return independence_copula(self.n)

    def push(self, e, pair):
        Vine._push(self.pobs, e, pair, *self.args(e))


def fit_sequential(data, structure, estimator, options=None):
    """Fit every pair-copula of a given structure tree by tree.

    Parameters
    ----------
    data : array_like, shape (n, d)
        Copula-scale observations.
    structure : RVineStructure
    estimator : str
        One of :data:`ESTIMATORS`.
    options : dict, optional
        Keyword arguments for the pair estimator (e.g. ``{"K": 8}``).

    Returns
    -------
    VineModel
    """
    rep = validate_structure(structure)
    if not rep:
        raise ValueError(f"invalid structure: {rep.message}")
    f = _Fitter(data, estimator, options)
    if f.d != structure.d:
        raise ValueError(f"data has {f.d} columns, structure has {structure.d} variables")
    pairs = {}
    for m, tree in enumerate(structure.trees, start=1):
        for e in tree:
            pairs[e] = f.fit(e)
        if m < len(structure.trees):
            for e in tree:
                f.push(e, pairs[e])
    return VineModel(structure, pairs, estimator, None, f.n, f.fit_calls, f.failures)


def candidate_edges(prev_tree, m):
    """Proximity-admissible edges of tree m given the edges of tree m - 1.

    For m = 1, ``prev_tree`` is the number of variables d.
    """
    if m == 1:
        d = prev_tree
        return [Edge(a, b) for a, b in combinations(range(1, d + 1), 2)]
    out = []
    for ea, eb in combinations(prev_tree, 2):
        # nodes of tree m - 1 are identified by their variable sets
        if set(ea.node_sets()) & set(eb.node_sets()):
            out.append(Edge.from_nodes(ea.variables, eb.variables))
    return out


def _strip(e):
    return Edge(e.j, e.k, e.D)


def select_structure_and_fit(data, estimator, criterion="tau", options=None):
    """Select the structure tree by tree and fit it (Algorithm 2).

    Each tree is the maximum spanning tree over proximity-admissible edges.
    With ``criterion="tau"`` the weight is the absolute empirical Kendall's
    tau of the edge's pseudo-observations and only selected edges are fitted.
    With ``criterion="caic"`` every candidate is fitted and weighted by its
    negative corrected AIC.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    f = _Fitter(data, estimator, options)
    trees = []
    pairs = {}
    prev = f.d
    for m in range(1, f.d):
        cands = candidate_edges(prev, m)
        fitted = {}
        weights = {}
        for e in cands:
            if criterion == "tau":
                w = abs(kendalls_tau(*f.args(e)))
            else:
                fitted[e] = f.fit(e)
                w = -fitted[e].caic
            weights[e] = w
        tree = _select_tree(cands, weights, m, prev)
        for e in tree:
            pairs[e] = fitted[e] if e in fitted else f.fit(e)
        if m < f.d - 1:
            for e in tree:
                f.push(e, pairs[e])
        trees.append(tree)
        prev = tree
    structure = RVineStructure([[_strip(e) for e in t] for t in trees], f.d)
    pairs = {_strip(e): p for e, p in pairs.items()}
    return VineModel(structure, pairs, estimator, criterion, f.n, f.fit_calls, f.failures)


def _select_tree(cands, weights, m, prev):
    if m == 1:
        node_of = {e: (e.j, e.k) for e in cands}
        nodes = range(1, prev + 1)
    else:
        index = {frozenset(e.variables): i for i, e in enumerate(prev)}
        node_of = {e: tuple(index[frozenset(s)] for s in e.node_sets()) for e in cands}
        nodes = range(len(prev))
    by_link = {}
    for e in cands:
        a, b = node_of[e]
        by_link[(a, b)] = (weights[e], e.key, e)
    mst = max_spanning_tree(nodes, {ab: (w, key) for ab, (w, key, _) in by_link.items()})
    return sorted((by_link[ab][2] for ab in mst), key=lambda e: e.key)


def tau_structure(data):
    """Structure selected by the |tau| criterion without fitting any pair
    (every pair-copula taken as independence)."""
    from .families import independence_copula
    u = as_copula_data(data)
    n, d = u.shape
    pobs = {_key(i + 1, ()): u[:, i] for i in range(d)}
    trees = []
    prev = d
    for m in range(1, d):
        cands = candidate_edges(prev, m)
        weights = {e: abs(kendalls_tau(pobs[_key(e.j, e.D)], pobs[_key(e.k, e.D)]))
                   for e in cands}
        tree = _select_tree(cands, weights, m, prev)
        indep = independence_copula()
        for e in tree:
            Vine._push(pobs, e, indep, pobs[_key(e.j, e.D)], pobs[_key(e.k, e.D)])
        trees.append(tree)
        prev = tree
    return RVineStructure([[_strip(e) for e in t] for t in trees], d)


def vine_pdf(model, u):
    return model.pdf(u)


def vine_loglik(model, data):
    return model.loglik(data)


def vine_edf(model):
    return model.edf


__all__ = [
    "CRITERIA", "ESTIMATORS", "Edge", "RVineStructure", "ValidationReport", "Vine",
    "VineModel", "candidate_edges", "fit_pair", "fit_sequential", "max_spanning_tree",
    "pair_from_dict", "select_structure_and_fit", "tau_structure", "validate_structure",
    "vine_edf", "vine_loglik", "vine_pdf", "CLIP_EPS", "PDF_FLOOR",
]
