import logging

from ..services.ensemble_service import ensemble_service
from ..storage.artifacts import rows_frame
from .common import emit, load_cohort, model_arguments, open_store, run_config
from .evaluate import evaluate_cohort, sweep_cohort
from .km import PROGNOSIS_GROUPS, SUMMARY_COLUMNS, export_curves, prognosis_groups, tnm_groups
from .preprocess import prepare_cohort, write_cohort
from .report import write_baseline, write_report
from .train import train_cohort_model

logger = logging.getLogger(__name__)


def register(subparsers, parent):
    parser = subparsers.add_parser(
        "pipeline", parents=[parent], help="preprocess, evaluate, report, sweep, train and export survival curves",
    )
    model_arguments(parser)
    parser.add_argument("--horizon", type=int, help="last time point of the exported curves, in months")
    parser.set_defaults(handler=run)


def run(args) -> int:
    """The whole procedure on one cohort; every artifact lands in the output directory."""
    cfg = run_config(args)
    seed = cfg.master_seed
    store = open_store(cfg)
    store.write_json("config.json", cfg)

    protocol_ds, cohort, labels, audit = prepare_cohort(load_cohort(cfg), cfg)
    write_cohort(store, cohort, labels, audit)
    logger.info("labelled cohort: %d patients, %d attributes", cohort.n_patients, cohort.n_attributes)

    result = evaluate_cohort(cohort, labels, cfg, store)
    report = write_report(store, result.predictions, seed)
    write_baseline(store, cohort, labels)
    sweep_cohort(cohort, labels, cfg, store, result)
    train_cohort_model(cohort, labels, cfg, store)

    horizon = cfg.km_horizon
    summary_horizon = horizon or cfg.survival_threshold_months
    summaries = export_curves(store, "km_tnm", protocol_ds, tnm_groups(protocol_ds), horizon, summary_horizon)
    # held-out learner predictions, one per cohort patient in cohort order
    learned = [p.L for p in result.predictions]
    summaries += export_curves(
        store, "km_prognosis", cohort, prognosis_groups(cohort.stages, learned), horizon, summary_horizon,
        expected_groups=PROGNOSIS_GROUPS,
    )
    store.write_csv("km_summary.csv", rows_frame(summaries, SUMMARY_COLUMNS))

    emit(ensemble_service.report_frame(report), args.format, report, ensemble_service.format_report(report))
    return 0
