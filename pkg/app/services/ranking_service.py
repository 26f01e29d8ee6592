import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import TrainingError, UsageError
from ..schemas.models import SvmConfig
from ..schemas.ranking import EliminationStep, Ranking
from .learner_service import learner_service

logger = logging.getLogger(__name__)


class RankingService:
    @staticmethod
    def rfe_rank(X, y, cfg: SvmConfig, attribute_names: Optional[Sequence[str]] = None) -> Ranking:
        """Recursive feature elimination, one attribute per iteration.

        Each round retrains the linear SVM on the surviving columns (warm
        started from the previous dual solution) and removes the column with
        the smallest squared weight, the lowest index on ties.
        """
        X = np.asarray(X, dtype=float)
        d = X.shape[1]
        if attribute_names is not None and len(attribute_names) != d:
            raise UsageError(f"{len(attribute_names)} attribute names for {d} columns")
        support = np.ones(d, dtype=bool)
        alphas = None
        trace: List[EliminationStep] = []
        for iteration in range(1, d):
            features = np.flatnonzero(support)
            try:
                fit = learner_service.fit_linear_svm(X[:, features], y, cfg, initial_alphas=alphas)
            except TrainingError as e:
                raise TrainingError(e.detail, iteration=iteration)
            alphas = fit.alphas
            criteria = np.square(fit.model.weights)
            position = int(np.argmin(criteria))
            removed = int(features[position])
            support[removed] = False
            trace.append(EliminationStep(iteration=iteration, removed=removed, criterion=float(criteria[position])))
            logger.debug("rfe iteration %d: removed %d (w^2 = %.3g)", iteration, removed, criteria[position])

        survivor = int(np.flatnonzero(support)[0]) if d else None
        eliminated = [step.removed for step in trace]
        order = ([survivor] if survivor is not None else []) + eliminated[::-1]
        names = list(attribute_names) if attribute_names is not None else None
        return Ranking(order=order, trace=trace, attribute_names=names, seed=cfg.seed)

    @staticmethod
    def _check_k(r: Ranking, k: int):
        if not 1 <= k <= r.n_attributes:
            raise UsageError(f"k = {k} is outside 1..{r.n_attributes}")

    @staticmethod
    def top_k(r: Ranking, k: int) -> List[int]:
        RankingService._check_k(r, k)
        return r.order[:k]

    @staticmethod
    def bottom_k(r: Ranking, k: int) -> List[int]:
        """The k lowest-ranked attributes, least important first."""
        RankingService._check_k(r, k)
        return r.order[::-1][:k]

    @staticmethod
    def summary_frame(r: Ranking, k_top: int, k_bottom: int) -> pd.DataFrame:
        top = r.names(RankingService.top_k(r, k_top))
        bottom = r.names(RankingService.bottom_k(r, k_bottom))
        rows = max(len(top), len(bottom))
        return pd.DataFrame({
            "position": list(range(1, rows + 1)),
            f"top_{k_top}": top + [""] * (rows - len(top)),
            f"bottom_{k_bottom}": bottom + [""] * (rows - len(bottom)),
        })


ranking_service = RankingService()
