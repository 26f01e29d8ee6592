import logging
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DegenerateDatasetError, DimensionMismatchError
from ..schemas.dataset import AttributeSpec, Dataset
from ..storage.artifacts import read_text
from ..storage.dataset_codec import dataset_codec

logger = logging.getLogger(__name__)


class TabularService:
    @staticmethod
    def parse_dataset(csv_text: str, schema: Sequence[AttributeSpec]) -> Dataset:
        return dataset_codec.parse(csv_text, schema)

    @staticmethod
    def serialize_dataset(ds: Dataset) -> str:
        return dataset_codec.serialize(ds)

    @staticmethod
    def load_dataset(csv_path: Path, schema_path: Path) -> Dataset:
        schema = dataset_codec.load_schema(read_text(Path(schema_path), "schema"))
        ds = dataset_codec.parse(read_text(Path(csv_path), "dataset"), schema)
        logger.info("loaded %s: %d patients, %d attributes", csv_path, ds.n_patients, ds.n_attributes)
        return ds

    @staticmethod
    def coverage_by_patient(ds: Dataset) -> List[float]:
        """Fraction of feature attributes Present for each patient."""
        if ds.n_attributes == 0:
            return [0.0] * ds.n_patients
        return (ds.present.sum(axis=1) / ds.n_attributes).tolist()

    @staticmethod
    def coverage_by_attribute(ds: Dataset) -> List[float]:
        """Fraction of patients with a Present cell, per attribute."""
        if ds.n_patients == 0:
            raise DegenerateDatasetError("attribute coverage is undefined for a dataset without patients")
        return (ds.present.sum(axis=0) / ds.n_patients).tolist()

    @staticmethod
    def missing_fraction(ds: Dataset) -> float:
        cells = ds.present.size
        if cells == 0:
            return 0.0
        return float((cells - ds.present.sum()) / cells)

    @staticmethod
    def select(ds: Dataset, patient_mask: Sequence[bool], attribute_mask: Sequence[bool]) -> Dataset:
        patients = np.asarray(patient_mask, dtype=bool)
        attributes = np.asarray(attribute_mask, dtype=bool)
        if patients.shape != (ds.n_patients,):
            raise DimensionMismatchError(ds.n_patients, patients.size, "patient mask entries")
        if attributes.shape != (ds.n_attributes,):
            raise DimensionMismatchError(ds.n_attributes, attributes.size, "attribute mask entries")
        rows, cols = np.flatnonzero(patients), np.flatnonzero(attributes)
        return Dataset(
            attributes=tuple(ds.attributes[j] for j in cols),
            patient_ids=tuple(ds.patient_ids[i] for i in rows),
            values=ds.values[np.ix_(rows, cols)],
            present=ds.present[np.ix_(rows, cols)],
            outcomes=tuple(ds.outcomes[i] for i in rows),
            _checked=False,
        )

    @staticmethod
    def select_attributes(ds: Dataset, names: Sequence[str]) -> Dataset:
        """Project onto the named attributes, in the given order."""
        cols = [ds.attribute_index(n) for n in names]
        return Dataset(
            attributes=tuple(ds.attributes[j] for j in cols),
            patient_ids=ds.patient_ids,
            values=ds.values[:, cols],
            present=ds.present[:, cols],
            outcomes=ds.outcomes,
            _checked=False,
        )

    @staticmethod
    def summary(ds: Dataset) -> Tuple[int, int, float]:
        return ds.n_patients, ds.n_attributes, TabularService.missing_fraction(ds)


tabular_service = TabularService()
