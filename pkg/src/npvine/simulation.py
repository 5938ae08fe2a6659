"""
Random simulation models and vine sampling.

A scenario fixes the dimension, sample size, the kind of dependence (with or
without tail dependence) and its strength. A true model is drawn in three
stages: a structure selected by |tau| on independent uniforms, a family per
edge, and a Kendall's tau per edge that shrinks geometrically with the tree
level. Samples come from the inverse Rosenblatt transform.
"""
import json
import zlib
from dataclasses import asdict, dataclass

import numpy as np

from .families import ParametricCopula, param_to_tau, spec_from_tau, FamilySpec, INDEPENDENCE
from .vine import Edge, RVineStructure, Vine, tau_structure

DEP_TYPES = ("TailOnly", "NoTail", "Both")
STRENGTHS = ("Weak", "Strong")
TAIL_FAMILIES = ("StudentT", "Gumbel", "Clayton")
NOTAIL_FAMILIES = ("Gaussian", "Frank")
TAU_BETA = {"Weak": (1.0, 4.0), "Strong": (5.0, 5.0)}
DECAY = 0.8
STUDENT_DF = 4.0
# keeps every drawn tau inside the parameter bounds of all families
TAU_MAX = 0.9

# substream purposes
STRUCTURE, MODEL, SAMPLE, EVALUATION = 0, 1, 2, 3


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario.

    Parameters
    ----------
    d, n : int
        Dimension and training sample size.
    dep_type : {"TailOnly", "NoTail", "Both"}
    strength : {"Weak", "Strong"}
    replications : int
    seed : int
        Master seed shared by all scenarios of a run.
    """

    d: int
    n: int
    dep_type: str
    strength: str
    replications: int = 20
    seed: int = 0

    def __post_init__(self):
        if int(self.d) < 2:
            raise ValueError("d must be at least 2")
        if int(self.n) < 10:
            raise ValueError("n must be at least 10")
        if self.dep_type not in DEP_TYPES:
            raise ValueError(f"dep_type must be one of {DEP_TYPES}")
        if self.strength not in STRENGTHS:
            raise ValueError(f"strength must be one of {STRENGTHS}")
        if int(self.replications) < 1:
            raise ValueError("replications must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def name(self):
        return f"d{self.d}_n{self.n}_{self.dep_type}_{self.strength}"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["d"]), int(d["n"]), d["dep_type"], d["strength"],
                   int(d.get("replications", 20)), int(d.get("seed", 0)))


def table1_grid(replications=20, seed=0):
    """The 24 scenarios crossing d, n, dependence type and strength."""
    return [ScenarioConfig(d, n, t, s, replications, seed)
            for d in (5, 10) for n in (400, 2000) for t in DEP_TYPES for s in STRENGTHS]


def substream(seed, scenario, rep, purpose):
    """Independent counter-based generator for one (scenario, replication, purpose).

    ``scenario`` may be a name; it is hashed to a 32-bit id.
    """
    sid = zlib.crc32(scenario.encode()) if isinstance(scenario, str) else int(scenario)
    ss = np.random.SeedSequence([int(seed), sid, int(rep), int(purpose)])
    return np.random.Generator(np.random.Philox(ss))


def draw_structure(d, n, rng):
    """Structure selected by |tau| on an ``n x d`` sample of independent uniforms."""
    if d < 2:
        raise ValueError("d must be at least 2")
    u = rng.uniform(size=(max(int(n), 2), int(d)))
    return tau_structure(u)


def _draw_family(dep_type, rng):
    if dep_type == "Both":
        dep_type = "TailOnly" if rng.random() < 0.5 else "NoTail"
    pool = TAIL_FAMILIES if dep_type == "TailOnly" else NOTAIL_FAMILIES
    return pool[rng.integers(len(pool))]


def draw_abs_tau(strength, rng, size=None):
    """Pre-decay absolute Kendall's tau."""
    a, b = TAU_BETA[strength]
    return rng.beta(a, b, size=size)


def draw_model(cfg, rng, decay_from_zero=False, structure=None):
    """Draw a true vine model for a scenario.

    Per edge of tree m: a family from the scenario's set, ``|tau|`` from the
    strength's Beta law scaled by ``0.8^m`` (``0.8^(m-1)`` with
    ``decay_from_zero``), and a fair random sign. Clayton and Gumbel get a
    uniformly drawn rotation that is flipped when it disagrees with the sign.

    Returns
    -------
    TrueVineModel
    """
    if structure is None:
        structure = draw_structure(cfg.d, cfg.n, rng)
    specs = {}
    taus = {}
    for m, tree in enumerate(structure.trees, start=1):
        power = m - 1 if decay_from_zero else m
        for e in tree:
            fam = _draw_family(cfg.dep_type, rng)
            a = min(draw_abs_tau(cfg.strength, rng) * DECAY ** power, TAU_MAX)
            tau = a if rng.random() < 0.5 else -a
            rot = int(rng.choice((0, 90, 180, 270))) if fam in ("Clayton", "Gumbel") else 0
            specs[e] = spec_from_tau(fam, tau, rotation=rot)
            taus[e] = float(tau)
    return TrueVineModel(structure, specs, taus)


class TrueVineModel(Vine):
    """A vine with known parametric pair-copulas and their Kendall's taus."""

    def __init__(self, structure, specs, taus=None):
        specs = dict(specs)
        super().__init__(structure, {e: ParametricCopula(s) for e, s in specs.items()})
        self.specs = specs
        self.taus = dict(taus) if taus is not None else {
            e: float(param_to_tau(s)) for e, s in specs.items()}

    def to_dict(self):
        return {"structure": self.structure.to_dict(),
                "edges": [{"edge": e.to_dict(), "tau": self.taus[e], **self.specs[e].to_dict()}
                          for e in self.structure.edges]}

    @classmethod
    def from_dict(cls, d):
        structure = RVineStructure.from_dict(d["structure"])
        specs, taus = {}, {}
        for row in d["edges"]:
            e = Edge.from_dict(row["edge"])
            specs[e] = FamilySpec.from_dict(row)
            taus[e] = float(row["tau"])
        return cls(structure, specs, taus)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def independence_model(structure):
    return TrueVineModel(structure, {e: INDEPENDENCE for e in structure.edges},
                         {e: 0.0 for e in structure.edges})


def sample_vine(model, n, rng):
    """n draws from the model by the inverse Rosenblatt transform."""
    try:
        return model.sample(int(n), rng)
    except (RuntimeError, FloatingPointError) as exc:
        raise RuntimeError(f"sampling failed: {exc}") from exc


def true_vine_pdf(model, u):
    """Exact simplified-vine density of a true model."""
    return model.pdf(u)


__all__ = [
    "DEP_TYPES", "STRENGTHS", "ScenarioConfig", "TrueVineModel", "draw_abs_tau",
    "draw_model", "draw_structure", "independence_model", "sample_vine", "substream",
    "table1_grid", "true_vine_pdf",
]
