import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ..errors import UsageError
from ..schemas.dataset import Dataset
from ..schemas.ensemble import PredictionClass, PrognosisGroup
from ..schemas.evaluation import TrainedEnsemble
from ..schemas.survival import GroupSummary
from ..services.ensemble_service import ensemble_service
from ..services.evaluation_service import evaluation_service
from ..services.preprocess_service import preprocess_service
from ..services.survival_service import survival_service
from ..storage.artifacts import ArtifactStore, read_model, rows_frame
from .common import emit, load_cohort, open_store, run_config

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["group", "n_patients", "survival_at_horizon", "median_survival"]
PROGNOSIS_GROUPS = [g.value for g in PrognosisGroup]


def register(subparsers, parent):
    parser = subparsers.add_parser(
        "km", parents=[parent], help="Kaplan-Meier curves by TNM stage or by prognosis group",
    )
    parser.add_argument("--grouping", choices=("tnm", "prognosis"), default="tnm")
    parser.add_argument("--model", help="trained ensemble (model.json); required for prognosis grouping")
    parser.add_argument("--horizon", type=int, help="last time point of the exported curves, in months")
    parser.add_argument("--exclude-other-deaths", action="store_true", help="drop other-cause deaths instead of censoring them")
    parser.set_defaults(handler=run)


def tnm_groups(ds: Dataset) -> List[str]:
    return [f"TNM{stage}" for stage in ds.stages]


def prognosis_groups(stages: Sequence[int], learned: Sequence[PredictionClass]) -> List[str]:
    return [ensemble_service.prognosis_group(int(s), c).value for s, c in zip(stages, learned)]


def export_curves(
    store: ArtifactStore,
    name: str,
    ds: Dataset,
    groups: Sequence[str],
    horizon: Optional[int],
    summary_horizon: int,
    exclude_other_deaths: bool = False,
    expected_groups: Optional[Sequence[str]] = None,
) -> List[GroupSummary]:
    outcomes, rows = survival_service.timed_outcomes(ds, exclude_other_deaths)
    grouped, frame = survival_service.curves_frame(outcomes, [groups[i] for i in rows], horizon, expected_groups)
    store.write_csv(f"{name}.csv", frame)
    store.write_json(f"{name}.json", grouped)
    return survival_service.prognosis_summary(grouped, summary_horizon)


def run(args) -> int:
    cfg = run_config(args)
    if args.grouping == "prognosis" and not args.model:
        raise UsageError("prognosis grouping needs a trained model (--model)")
    te = read_model(Path(args.model), TrainedEnsemble, "trained model") if args.model else None
    store = open_store(cfg)
    ds = load_cohort(cfg)

    if args.grouping == "tnm":
        groups, expected = tnm_groups(ds), None
    else:
        in_scope = np.isin(ds.stages, [2, 3])
        if not in_scope.all():
            logger.warning("%d patients outside TNM stages 2/3 have no prognosis group and are skipped", int((~in_scope).sum()))
            ds = preprocess_service.restrict_stages(ds, [2, 3])
        learned, _ = evaluation_service.predict_sources(te, ds)
        groups, expected = prognosis_groups(ds.stages, learned), PROGNOSIS_GROUPS

    horizon = cfg.km_horizon
    summary = export_curves(
        store, f"km_{args.grouping}", ds, groups, horizon, horizon or cfg.survival_threshold_months,
        args.exclude_other_deaths, expected,
    )
    logger.info("%d %s curves from %d patients", len(summary), args.grouping, ds.n_patients)
    emit(rows_frame(summary, SUMMARY_COLUMNS), args.format, summary)
    return 0
