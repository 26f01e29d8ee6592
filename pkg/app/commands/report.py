import io
import logging
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from ..config import RunConfig
from ..errors import SchemaMismatchError
from ..schemas.dataset import Dataset
from ..schemas.ensemble import AgreementReport, AttributeScore, PatientPrediction
from ..schemas.preprocess import SurvivalLabel
from ..services.ensemble_service import ensemble_service
from ..storage.artifacts import ArtifactStore, read_text, rows_frame
from .common import emit, labelled, load_cohort, open_store, run_config

logger = logging.getLogger(__name__)

BASELINE_COLUMNS = ["attribute", "threshold", "direction", "accuracy"]


def register(subparsers, parent):
    parser = subparsers.add_parser(
        "report", parents=[parent], help="agreement report from a predictions table",
    )
    parser.add_argument("--predictions", help="predictions CSV (default: <out>/predictions.csv)")
    parser.set_defaults(handler=run)


def read_predictions(path: Path) -> List[PatientPrediction]:
    text = read_text(path, "predictions table")
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except (ValueError, pd.errors.ParserError) as e:
        raise SchemaMismatchError(f"cannot parse predictions table {path}: {e}")
    return ensemble_service.predictions_from_frame(frame)


def write_report(store: ArtifactStore, predictions: Sequence[PatientPrediction], seed: Optional[int]) -> AgreementReport:
    report = ensemble_service.report_from_predictions(predictions, seed=seed)
    store.write_json("report.json", report)
    store.write_csv("report.csv", ensemble_service.report_frame(report))
    store.write_text("report.txt", ensemble_service.format_report(report))
    return report


def write_baseline(store: ArtifactStore, cohort: Dataset, labels: List[SurvivalLabel]) -> List[AttributeScore]:
    scores = ensemble_service.single_attribute_scan(cohort, labels)
    store.write_csv("baseline.csv", rows_frame(scores, BASELINE_COLUMNS))
    if scores:
        best = scores[0]
        logger.info("best single attribute: %s at %.1f%% accuracy", best.attribute, 100 * best.accuracy)
    return scores


def run(args) -> int:
    cfg: RunConfig = run_config(args)
    store = open_store(cfg)
    path = Path(args.predictions) if args.predictions else store.path("predictions.csv")
    report = write_report(store, read_predictions(path), cfg.seed)
    if cfg.dataset is not None and cfg.schema_path is not None:
        write_baseline(store, *labelled(load_cohort(cfg), cfg))
    emit(ensemble_service.report_frame(report), args.format, report, ensemble_service.format_report(report))
    return 0
