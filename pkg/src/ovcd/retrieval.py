"""Open-vocabulary category assignment by cosine retrieval against prototypes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .proposals import ChangeProposal, cosine
from .prototypes import PrototypeSet

STRATEGIES = ("category_mean", "global_max")


@dataclass
class RetrievalConfig:
    strategy: str = "global_max"
    discard_same_class: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")


@dataclass
class CategoryAssignment:
    proposal_id: int
    c1: int
    c2: int
    sim1: float
    sim2: float


@dataclass
class SemanticChangeMap:
    """Bi-temporal label rasters; label 0 = no change."""

    t1: np.ndarray
    t2: np.ndarray

    def __post_init__(self):
        if self.t1.shape != self.t2.shape:
            raise ValueError("temporal rasters must share dimensions")


def retrieve(
    z: np.ndarray, bank: PrototypeSet, config: RetrievalConfig
) -> tuple[int, float]:
    """Best class for a query vector, with its similarity.

    category_mean: argmax over classes of the mean prototype similarity.
    global_max: class owning the single most similar prototype.
    Ties break to the lowest class index, then the lowest prototype index.
    """
    classes = bank.classes()
    if not classes:
        raise ConfigError("prototype bank is empty")
    best_class, best_sim = None, None
    for c in classes:  # ascending, so strict > keeps the lowest index on ties
        sims = [cosine(z, p) for p in bank.centroids[c]]
        score = float(np.mean(sims)) if config.strategy == "category_mean" else max(sims)
        if best_sim is None or score > best_sim:
            best_class, best_sim = c, score
    return best_class, best_sim


def assign_categories(
    proposals: list[ChangeProposal], bank: PrototypeSet, config: RetrievalConfig
) -> list[CategoryAssignment]:
    """Retrieve a class per temporal feature of each proposal."""
    out = []
    for i, p in enumerate(proposals):
        c1, s1 = retrieve(p.z1, bank, config)
        c2, s2 = retrieve(p.z2, bank, config)
        if config.discard_same_class and c1 == c2:
            continue
        out.append(CategoryAssignment(proposal_id=i, c1=c1, c2=c2, sim1=s1, sim2=s2))
    return out


def rasterize(
    assignments: list[CategoryAssignment],
    proposals: list[ChangeProposal],
    image_h: int,
    image_w: int,
) -> SemanticChangeMap:
    """Paint proposals in ascending change-score order; highest score wins overlaps."""
    t1 = np.zeros((image_h, image_w), dtype=np.int64)
    t2 = np.zeros((image_h, image_w), dtype=np.int64)
    ordered = sorted(assignments, key=lambda a: proposals[a.proposal_id].change_score)
    for a in ordered:
        fg = proposals[a.proposal_id].mask.to_dense()
        t1[fg] = a.c1
        t2[fg] = a.c2
    return SemanticChangeMap(t1=t1, t2=t2)
