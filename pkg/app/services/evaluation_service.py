import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold, StratifiedShuffleSplit

from ..config import RunConfig
from ..errors import DegenerateDatasetError, SchemaMismatchError, UsageError
from ..schemas.dataset import Dataset
from ..schemas.ensemble import PatientPrediction, PredictionClass, SweepPoint
from ..schemas.evaluation import EnsembleRun, FoldSummary, TrainedEnsemble
from ..schemas.models import MlpConfig, SvmConfig, TrainConfig
from ..schemas.preprocess import LinearizationMap, SurvivalLabel
from ..schemas.ranking import Ranking
from .ensemble_service import ensemble_service, label_class
from .learner_service import learner_service
from .preprocess_service import preprocess_service
from .ranking_service import ranking_service
from .seeding import derive_seed
from .tabular_service import tabular_service

logger = logging.getLogger(__name__)

VARIANTS = ("raw", "linearized")


def survival_targets(labels: Sequence[SurvivalLabel]) -> np.ndarray:
    """1 for Survived, 0 for Died."""
    return np.array([label_class(label) == PredictionClass.SURVIVE for label in labels], dtype=float)


class _Prepared:
    def __init__(self, linearization, imputation, standardization, X):
        self.linearization = linearization
        self.imputation = imputation
        self.standardization = standardization
        self.X = X


def _prepare(ds: Dataset, labels: Sequence[SurvivalLabel], linearize: bool) -> _Prepared:
    linearization = preprocess_service.fit_linearization(ds, labels) if linearize else LinearizationMap()
    ds = preprocess_service.apply_linearization(ds, linearization)
    imputation = preprocess_service.fit_imputation(ds)
    X = preprocess_service.apply_imputation(ds, imputation).matrix()
    standardization = learner_service.fit_standardizer(X)
    return _Prepared(linearization, imputation, standardization, learner_service.apply_standardizer(standardization, X))


def _transform(ds: Dataset, attribute_names: Sequence[str], prepared: _Prepared) -> np.ndarray:
    missing = [n for n in attribute_names if n not in ds.attribute_names]
    if missing:
        raise SchemaMismatchError(f"dataset lacks model attributes: {', '.join(missing)}")
    ds = tabular_service.select_attributes(ds, attribute_names)
    ds = preprocess_service.apply_linearization(ds, prepared.linearization)
    X = preprocess_service.apply_imputation(ds, prepared.imputation).matrix()
    return learner_service.apply_standardizer(prepared.standardization, X)


def _train_config(cfg: RunConfig, seed: int, stream: str = "learner") -> TrainConfig:
    # ranking and the learner share the "svm" stream; the anti-learner has its own
    svm_stream = "svm" if stream == "learner" else stream
    return TrainConfig(
        svm=SvmConfig(**cfg.svm.model_dump(), seed=derive_seed(seed, svm_stream)),
        mlp=MlpConfig(**cfg.mlp.model_dump(), seed=derive_seed(seed, stream)),
    )


class EvaluationService:
    @staticmethod
    def fit_ensemble(
        ds: Dataset, labels: Sequence[SurvivalLabel], cfg: RunConfig, seed: int, linearize: Optional[bool] = None,
    ) -> TrainedEnsemble:
        """Fit the whole per-fold chain on one labelled cohort.

        Linearization, imputation and standardization are fitted here, then
        the RFE ranking, the learner on the top attributes and the
        anti-learner's base model on the bottom attributes.
        """
        linearize = cfg.linearize if linearize is None else linearize
        prepared = _prepare(ds, labels, linearize)
        y01 = survival_targets(labels)
        y_pm = 2.0 * y01 - 1.0
        learner_cfg = _train_config(cfg, seed)
        anti_cfg = _train_config(cfg, seed, "antilearner")
        ranking = ranking_service.rfe_rank(prepared.X, y_pm, learner_cfg.svm, ds.attribute_names)
        top = ranking_service.top_k(ranking, cfg.k_top)
        bottom = ranking_service.bottom_k(ranking, cfg.k_bottom)

        learner = learner_service.train_mlp(prepared.X[:, top], y01, learner_cfg.mlp)
        if cfg.evaluation.antilearner == "linear":
            antilearner = learner_service.train_linear_svm(prepared.X[:, bottom], y_pm, anti_cfg.svm)
        else:
            antilearner = learner_service.train_mlp(prepared.X[:, bottom], y01, anti_cfg.mlp)

        return TrainedEnsemble(
            attribute_names=list(ds.attribute_names),
            linearization=prepared.linearization,
            imputation=prepared.imputation,
            standardization=prepared.standardization,
            ranking=ranking,
            k_top=cfg.k_top,
            k_bottom=cfg.k_bottom,
            learner=learner,
            antilearner=antilearner,
            seed=seed,
        )

    @staticmethod
    def rank_attributes(
        ds: Dataset, labels: Sequence[SurvivalLabel], cfg: RunConfig, seed: int, linearize: Optional[bool] = None,
    ) -> Ranking:
        """RFE ranking of the whole labelled cohort, prepared as in ``fit_ensemble``."""
        X, y_pm, svm = EvaluationService.ranking_problem(ds, labels, cfg, seed, linearize)
        return ranking_service.rfe_rank(X, y_pm, svm, ds.attribute_names)

    @staticmethod
    def ranking_problem(
        ds: Dataset, labels: Sequence[SurvivalLabel], cfg: RunConfig, seed: int, linearize: Optional[bool] = None,
    ) -> Tuple[np.ndarray, np.ndarray, SvmConfig]:
        """The standardized matrix, +-1 targets and SVM settings that RFE starts from."""
        linearize = cfg.linearize if linearize is None else linearize
        prepared = _prepare(ds, labels, linearize)
        return prepared.X, 2.0 * survival_targets(labels) - 1.0, _train_config(cfg, seed).svm

    @staticmethod
    def predict_sources(te: TrainedEnsemble, ds: Dataset) -> Tuple[List[PredictionClass], List[PredictionClass]]:
        """Learner and anti-learner classes for every patient of ``ds``."""
        prepared = _Prepared(te.linearization, te.imputation, te.standardization, None)
        X = _transform(ds, te.attribute_names, prepared)
        learned = ensemble_service.base_classes(te.learner, X[:, te.top_indices])
        anti = ensemble_service.antilearn_classes(te.antilearner, X[:, te.bottom_indices])
        return learned, anti

    @staticmethod
    def splits(labels: Sequence[SurvivalLabel], cfg: RunConfig) -> List[Tuple[np.ndarray, np.ndarray]]:
        y = survival_targets(labels)
        n = y.size
        settings = cfg.evaluation
        if np.unique(y).size < 2:
            raise DegenerateDatasetError("the labelled cohort holds a single class")
        split_seed = derive_seed(cfg.master_seed, "splits")
        if settings.mode == "holdout":
            splitter = StratifiedShuffleSplit(n_splits=1, test_size=settings.holdout_fraction, random_state=split_seed)
            return list(splitter.split(np.zeros((n, 1)), y))
        if settings.folds == 1:
            everyone = np.arange(n)
            return [(everyone, everyone)]
        smallest = int(min(y.sum(), n - y.sum()))
        if smallest < settings.folds:
            raise DegenerateDatasetError(f"{settings.folds} folds need at least that many patients per class, got {smallest}")
        splitter = StratifiedKFold(n_splits=settings.folds, shuffle=True, random_state=split_seed)
        return list(splitter.split(np.zeros((n, 1)), y))

    @staticmethod
    def _run_fold(fold: int, ds: Dataset, labels, train, test, cfg: RunConfig):
        seed = derive_seed(cfg.master_seed, "fold", fold)
        logger.info("fold %d: %d train / %d test patients", fold, train.size, test.size)
        keep = np.ones(ds.n_attributes, dtype=bool)
        train_ds = tabular_service.select(ds, np.isin(np.arange(ds.n_patients), train), keep)
        test_ds = tabular_service.select(ds, np.isin(np.arange(ds.n_patients), test), keep)
        te = EvaluationService.fit_ensemble(train_ds, [labels[i] for i in sorted(train)], cfg, seed)
        learned, anti = EvaluationService.predict_sources(te, test_ds)
        return np.sort(test), learned, anti, te

    @staticmethod
    def evaluate_ensemble(ds: Dataset, labels: Sequence[SurvivalLabel], cfg: RunConfig) -> EnsembleRun:
        """T, L and A predictions for every held-out patient, fold by fold."""
        if len(labels) != ds.n_patients:
            raise SchemaMismatchError(f"{len(labels)} labels for {ds.n_patients} patients")
        tnm = [ensemble_service.tnm_rule(stage) for stage in ds.stages]
        splits = EvaluationService.splits(labels, cfg)
        results = Parallel(n_jobs=cfg.evaluation.n_jobs)(
            delayed(EvaluationService._run_fold)(fold, ds, labels, train, test, cfg)
            for fold, (train, test) in enumerate(splits, start=1)
        )

        by_patient = {}
        folds, models = [], []
        for fold, (test, learned, anti, te) in enumerate(results, start=1):
            for i, l_class, a_class in zip(test, learned, anti):
                by_patient[int(i)] = PatientPrediction(
                    patient_id=ds.patient_ids[i],
                    tnm_stage=int(ds.stages[i]),
                    label=labels[i].value,
                    fold=fold,
                    T=tnm[i],
                    L=l_class,
                    A=a_class,
                )
            folds.append(FoldSummary(
                fold=fold,
                seed=te.seed,
                n_train=int(splits[fold - 1][0].size),
                n_test=int(test.size),
                top_attributes=te.top_attributes,
                bottom_attributes=te.bottom_attributes,
            ))
            models.append(te)
        predictions = [by_patient[i] for i in sorted(by_patient)]
        return EnsembleRun(seed=cfg.master_seed, mode=cfg.evaluation.mode, predictions=predictions, folds=folds, models=models)

    @staticmethod
    def attribute_sweep(
        ds: Dataset,
        labels: Sequence[SurvivalLabel],
        k_values: Sequence[int],
        cfg: RunConfig,
        with_linearization: Optional[bool] = None,
        ranking: Optional[Ranking] = None,
        fold_rankings: Optional[Sequence[Ranking]] = None,
    ) -> List[SweepPoint]:
        """Mean held-out learner accuracy on the top-k attributes, for each k.

        ``with_linearization`` selects the linearized variant (True), the raw
        one (False) or both (None). Without a precomputed ``ranking`` each
        fold ranks its own training patients once and reuses that ranking for
        every k. ``fold_rankings`` (one per fold, from ``evaluate_ensemble``
        with the same config) stand in for the variant matching
        ``cfg.linearize``.
        """
        for k in k_values:
            if not 1 <= k <= ds.n_attributes:
                raise UsageError(f"sweep k = {k} is outside 1..{ds.n_attributes}")
        if ranking is not None and ranking.n_attributes != ds.n_attributes:
            raise SchemaMismatchError(f"ranking covers {ranking.n_attributes} attributes, dataset has {ds.n_attributes}")
        variants = VARIANTS if with_linearization is None else (VARIANTS[int(bool(with_linearization))],)
        splits = EvaluationService.splits(labels, cfg)
        if fold_rankings is not None and len(fold_rankings) != len(splits):
            raise SchemaMismatchError(f"{len(fold_rankings)} fold rankings for {len(splits)} folds")
        reused_variant = VARIANTS[int(cfg.linearize)]
        keep = np.ones(ds.n_attributes, dtype=bool)

        points = []
        for variant in variants:
            per_fold = []
            for fold, (train, test) in enumerate(splits, start=1):
                seed = derive_seed(cfg.master_seed, "fold", fold)
                train_ds = tabular_service.select(ds, np.isin(np.arange(ds.n_patients), train), keep)
                test_ds = tabular_service.select(ds, np.isin(np.arange(ds.n_patients), test), keep)
                train_labels = [labels[i] for i in sorted(train)]
                prepared = _prepare(train_ds, train_labels, variant == "linearized")
                X_test = _transform(test_ds, ds.attribute_names, prepared)
                y_train = survival_targets(train_labels)
                y_test = survival_targets([labels[i] for i in sorted(test)])
                train_cfg = _train_config(cfg, seed)
                if ranking is not None:
                    fold_ranking = ranking
                elif fold_rankings is not None and variant == reused_variant:
                    fold_ranking = fold_rankings[fold - 1]
                else:
                    fold_ranking = ranking_service.rfe_rank(prepared.X, 2.0 * y_train - 1.0, train_cfg.svm)
                accuracies = []
                for k in k_values:
                    top = ranking_service.top_k(fold_ranking, k)
                    model = learner_service.train_mlp(prepared.X[:, top], y_train, train_cfg.mlp)
                    predicted = learner_service.predict_mlp_batch(model, X_test[:, top]) >= 0.5
                    accuracies.append(float(np.mean(predicted == (y_test == 1.0))))
                per_fold.append(accuracies)
                logger.info("sweep %s fold %d done", variant, fold)
            means = np.mean(per_fold, axis=0)
            points.extend(SweepPoint(k=k, variant=variant, accuracy=float(a)) for k, a in zip(k_values, means))
        return points


evaluation_service = EvaluationService()
