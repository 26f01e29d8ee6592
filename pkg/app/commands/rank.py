import logging

from ..services.evaluation_service import evaluation_service
from ..services.ranking_service import ranking_service
from ..services.seeding import derive_seed
from .common import emit, labelled, load_cohort, model_arguments, open_store, run_config

logger = logging.getLogger(__name__)


def register(subparsers, parent):
    parser = subparsers.add_parser(
        "rank", parents=[parent], help="SVM-RFE ranking of a preprocessed cohort",
    )
    model_arguments(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    cfg = run_config(args)
    store = open_store(cfg)
    cohort, labels = labelled(load_cohort(cfg), cfg)
    ranking = evaluation_service.rank_attributes(cohort, labels, cfg, derive_seed(cfg.master_seed, "cohort"))
    store.write_json("ranking.json", ranking)
    frame = ranking_service.summary_frame(ranking, cfg.k_top, cfg.k_bottom)
    store.write_csv("ranking_summary.csv", frame)
    emit(frame, args.format, ranking)
    return 0
