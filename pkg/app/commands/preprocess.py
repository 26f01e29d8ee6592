import logging
from typing import List, Tuple

import pandas as pd

from ..config import RunConfig
from ..schemas.dataset import Dataset
from ..schemas.preprocess import AuditLog, SurvivalLabel
from ..services.preprocess_service import preprocess_service
from ..services.tabular_service import tabular_service
from ..storage.artifacts import ArtifactStore, rows_frame
from ..storage.dataset_codec import dataset_codec
from .common import emit, load_cohort, open_store, run_config

logger = logging.getLogger(__name__)

AUDIT_COLUMNS = ["step", "patients_removed", "attributes_removed", "patients_left", "attributes_left"]


def register(subparsers, parent):
    parser = subparsers.add_parser(
        "preprocess", parents=[parent], help="apply the exclusion protocol and stage restriction, then label",
    )
    parser.set_defaults(handler=run)


def prepare_cohort(ds: Dataset, cfg: RunConfig) -> Tuple[Dataset, Dataset, List[SurvivalLabel], AuditLog]:
    """Protocol, then stage restriction, then five-year labels.

    Returns the post-protocol dataset (all stages), the labelled cohort,
    its labels and the audit log.
    """
    protocol_ds, audit = preprocess_service.apply_protocol(ds, cfg.exclusion)
    cohort = preprocess_service.restrict_stages(protocol_ds, cfg.stages, audit)
    labels = preprocess_service.label_all(cohort, cfg.survival_threshold_months)
    cohort, labels = preprocess_service.drop_excluded(cohort, labels)
    return protocol_ds, cohort, labels, audit


def write_cohort(store: ArtifactStore, cohort: Dataset, labels: List[SurvivalLabel], audit: AuditLog):
    store.write_text("cohort.csv", tabular_service.serialize_dataset(cohort))
    store.write_text("cohort.schema.json", dataset_codec.dump_schema(cohort.attributes))
    store.write_csv("labels.csv", pd.DataFrame({"patient_id": cohort.patient_ids, "label": [label.value for label in labels]}))
    store.write_json("audit.json", audit)
    store.write_csv("audit.csv", rows_frame(audit.steps, AUDIT_COLUMNS))


def run(args) -> int:
    cfg = run_config(args)
    store = open_store(cfg)
    _, cohort, labels, audit = prepare_cohort(load_cohort(cfg), cfg)
    write_cohort(store, cohort, labels, audit)
    frame = rows_frame(audit.steps, AUDIT_COLUMNS)
    emit(frame, args.format, audit)
    return 0
