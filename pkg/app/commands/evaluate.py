import logging
from typing import List, Optional

from ..config import RunConfig
from ..schemas.dataset import Dataset
from ..schemas.ensemble import SweepPoint
from ..schemas.evaluation import EnsembleRun
from ..schemas.preprocess import SurvivalLabel
from ..services.ensemble_service import ensemble_service
from ..services.evaluation_service import evaluation_service
from ..storage.artifacts import ArtifactStore, rows_frame
from .common import emit, labelled, load_cohort, model_arguments, open_store, run_config

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["k", "variant", "accuracy"]


def register(subparsers, parent):
    parser = subparsers.add_parser(
        "evaluate", parents=[parent], help="cross-validated T/L/A predictions and the attribute-count sweep",
    )
    model_arguments(parser)
    parser.add_argument("--no-sweep", action="store_true", help="skip the attribute-count sweep")
    parser.set_defaults(handler=run)


def evaluate_cohort(cohort: Dataset, labels: List[SurvivalLabel], cfg: RunConfig, store: ArtifactStore) -> EnsembleRun:
    run_ = evaluation_service.evaluate_ensemble(cohort, labels, cfg)
    store.write_csv("predictions.csv", ensemble_service.predictions_frame(run_.predictions))
    store.write_json("evaluation.json", run_)
    for fold, te in enumerate(run_.models, start=1):
        store.write_json(f"folds/fold_{fold}.json", te)
    return run_


def sweep_cohort(
    cohort: Dataset, labels: List[SurvivalLabel], cfg: RunConfig, store: ArtifactStore, evaluated: Optional[EnsembleRun] = None,
) -> List[SweepPoint]:
    k_values = [k for k in cfg.evaluation.sweep_k_values if k <= cohort.n_attributes]
    skipped = sorted(set(cfg.evaluation.sweep_k_values) - set(k_values))
    if skipped:
        logger.warning("sweep k values %s exceed the %d attributes and are skipped", skipped, cohort.n_attributes)
    fold_rankings = [te.ranking for te in evaluated.models] if evaluated is not None else None
    points = evaluation_service.attribute_sweep(cohort, labels, k_values, cfg, fold_rankings=fold_rankings)
    store.write_csv("sweep.csv", rows_frame(points, SWEEP_COLUMNS))
    return points


def run(args) -> int:
    cfg = run_config(args)
    store = open_store(cfg)
    cohort, labels = labelled(load_cohort(cfg), cfg)
    result = evaluate_cohort(cohort, labels, cfg, store)
    if args.no_sweep:
        emit(ensemble_service.predictions_frame(result.predictions), args.format, result.predictions)
        return 0
    points = sweep_cohort(cohort, labels, cfg, store, result)
    emit(rows_frame(points, SWEEP_COLUMNS), args.format, points)
    return 0
