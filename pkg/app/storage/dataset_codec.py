import io
import json
import logging
from typing import List, Sequence

import numpy as np
import pandas as pd
from pydantic import TypeAdapter, ValidationError

from ..errors import CellParseError, SchemaMismatchError
from ..schemas.dataset import (
    MISSING_MARKERS,
    OUTCOME_COLUMNS,
    AttributeKind,
    AttributeSpec,
    Dataset,
    OutcomeRecord,
    VitalStatus,
)

logger = logging.getLogger(__name__)

PATIENT_ID_COLUMN = "patient_id"
MISSING_TOKEN = "NA"

_schema_adapter = TypeAdapter(List[AttributeSpec])


class DatasetCodec:
    """CSV text <-> Dataset, plus the JSON schema sidecar."""

    @staticmethod
    def load_schema(text: str) -> List[AttributeSpec]:
        try:
            schema = _schema_adapter.validate_json(text)
        except ValidationError as e:
            raise SchemaMismatchError(f"invalid schema sidecar: {e}")
        outcome_names = {a.name for a in schema if a.is_outcome}
        if not outcome_names <= set(OUTCOME_COLUMNS):
            raise SchemaMismatchError(
                f"outcome-role attributes must be named from {OUTCOME_COLUMNS}, got {sorted(outcome_names)}"
            )
        for a in schema:
            if not a.is_outcome and a.name in OUTCOME_COLUMNS:
                raise SchemaMismatchError(f"'{a.name}' is an outcome column and must carry the outcome role")
        names = [a.name for a in schema]
        if len(set(names)) != len(names):
            raise SchemaMismatchError("schema attribute names must be unique")
        return schema

    @staticmethod
    def dump_schema(attributes: Sequence[AttributeSpec]) -> str:
        return json.dumps([a.to_sidecar() for a in attributes], indent=2) + "\n"

    @staticmethod
    def parse(csv_text: str, schema: Sequence[AttributeSpec]) -> Dataset:
        features = [a for a in schema if not a.is_outcome]
        try:
            frame = pd.read_csv(
                io.StringIO(csv_text), dtype=str, keep_default_na=False, na_filter=False
            )
        except pd.errors.EmptyDataError:
            raise SchemaMismatchError("CSV text has no header row")

        header = list(frame.columns)
        has_ids = bool(header) and header[0] == PATIENT_ID_COLUMN
        expected = [a.name for a in features] + list(OUTCOME_COLUMNS)
        if (header[1:] if has_ids else header) != expected:
            raise SchemaMismatchError(f"CSV header {header} does not match schema columns {expected}")

        n = len(frame)
        if has_ids:
            patient_ids = [str(v) for v in frame[PATIENT_ID_COLUMN]]
        else:
            patient_ids = [f"row{i + 1}" for i in range(n)]

        values = np.zeros((n, len(features)))
        present = np.zeros((n, len(features)), dtype=bool)
        for j, attribute in enumerate(features):
            raw = frame[attribute.name].to_numpy(dtype=object)
            is_missing = np.isin(raw, list(MISSING_MARKERS))
            rows = np.flatnonzero(~is_missing)
            parsed = _to_float(raw[rows], rows, attribute.name)
            admitted = attribute.admits(parsed)
            if not admitted.all():
                bad = rows[np.argmin(admitted)]
                raise CellParseError(bad + 1, attribute.name, raw[bad], f"not a valid {_describe(attribute)} value")
            values[rows, j] = parsed
            present[rows, j] = True

        outcomes = [
            _parse_outcome(i + 1, frame["survival_months"].iat[i], frame["vital_status"].iat[i], frame["tnm_stage"].iat[i])
            for i in range(n)
        ]
        logger.debug("parsed %d patients x %d attributes", n, len(features))
        try:
            return Dataset(tuple(features), tuple(patient_ids), values, present, tuple(outcomes))
        except ValueError as e:
            raise SchemaMismatchError(str(e))

    @staticmethod
    def serialize(ds: Dataset) -> str:
        columns = {PATIENT_ID_COLUMN: list(ds.patient_ids)}
        for j, attribute in enumerate(ds.attributes):
            columns[attribute.name] = [
                _format_cell(attribute, v) if p else MISSING_TOKEN
                for v, p in zip(ds.values[:, j], ds.present[:, j])
            ]
        columns["survival_months"] = [str(o.survival_months) for o in ds.outcomes]
        columns["vital_status"] = [o.vital_status.value for o in ds.outcomes]
        columns["tnm_stage"] = [str(o.tnm_stage) for o in ds.outcomes]
        frame = pd.DataFrame(columns, columns=list(columns))
        return frame.to_csv(index=False, lineterminator="\n")


def _describe(attribute: AttributeSpec) -> str:
    if attribute.levels is not None:
        return f"{attribute.kind.value} (levels 0..{attribute.levels - 1})"
    return attribute.kind.value


def _to_float(raw: np.ndarray, rows: np.ndarray, column: str) -> np.ndarray:
    try:
        parsed = raw.astype(float)
    except ValueError:
        for row, text in zip(rows, raw):
            try:
                float(text)
            except ValueError:
                raise CellParseError(row + 1, column, text, "not a number")
        raise
    finite = np.isfinite(parsed)
    if not finite.all():
        bad = np.argmin(finite)
        raise CellParseError(rows[bad] + 1, column, raw[bad], "not a finite number")
    return parsed


def _format_cell(attribute: AttributeSpec, value: float) -> str:
    if attribute.kind == AttributeKind.CONTINUOUS:
        return repr(float(value))
    return str(int(value))


def _parse_outcome(row: int, months: str, status: str, stage: str) -> OutcomeRecord:
    for column, text in (("survival_months", months), ("vital_status", status), ("tnm_stage", stage)):
        if text in MISSING_MARKERS:
            raise CellParseError(row, column, text, "outcome values are mandatory")
    try:
        months_value = int(months)
    except ValueError:
        raise CellParseError(row, "survival_months", months, "not a whole number of months")
    if months_value < 0:
        raise CellParseError(row, "survival_months", months, "months cannot be negative")
    try:
        status_value = VitalStatus(status)
    except ValueError:
        raise CellParseError(row, "vital_status", status, f"expected one of {[v.value for v in VitalStatus]}")
    try:
        stage_value = int(stage)
    except ValueError:
        raise CellParseError(row, "tnm_stage", stage, "not a TNM stage")
    if not 1 <= stage_value <= 4:
        raise CellParseError(row, "tnm_stage", stage, "TNM stage must be 1..4")
    return OutcomeRecord(survival_months=months_value, vital_status=status_value, tnm_stage=stage_value)


dataset_codec = DatasetCodec()
