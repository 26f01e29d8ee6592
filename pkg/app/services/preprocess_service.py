import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import chi2_contingency

from ..errors import DegenerateDatasetError, InvariantError, SchemaMismatchError
from ..schemas.dataset import AttributeKind, AttributeSpec, Dataset, OutcomeRecord, VitalStatus
from ..schemas.preprocess import (
    AuditLog,
    ExclusionConfig,
    ImputationEntry,
    ImputationPlan,
    ImputationStatistic,
    LevelAssignment,
    LinearizationMap,
    LinearizedAttribute,
    SurvivalLabel,
)
from .tabular_service import tabular_service

logger = logging.getLogger(__name__)

LEVELLED_KINDS = (AttributeKind.ORDINAL, AttributeKind.CATEGORICAL)


class PreprocessService:
    @staticmethod
    def apply_protocol(ds: Dataset, cfg: ExclusionConfig) -> Tuple[Dataset, AuditLog]:
        """Run the exclusion protocol in its fixed order, auditing every step.

        Coverage rules remove strictly below the threshold. Raises
        DegenerateDatasetError (carrying the audit so far) as soon as a step
        leaves no patients or no attributes.
        """
        audit = AuditLog(initial_patients=ds.n_patients, initial_attributes=ds.n_attributes)
        if ds.n_patients == 0 or ds.n_attributes == 0:
            raise DegenerateDatasetError("the dataset has no patients or no attributes", audit)
        threshold = cfg.survival_threshold_months

        def step(name, current, patient_mask=None, attribute_mask=None):
            if patient_mask is None:
                patient_mask = np.ones(current.n_patients, dtype=bool)
            if attribute_mask is None:
                attribute_mask = np.ones(current.n_attributes, dtype=bool)
            reduced = tabular_service.select(current, patient_mask, attribute_mask)
            entry = audit.record(name, reduced.n_patients, reduced.n_attributes)
            logger.info(
                "protocol step %s: removed %d patients, %d attributes (%d x %d left)",
                name, entry.patients_removed, entry.attributes_removed, entry.patients_left, entry.attributes_left,
            )
            if reduced.n_patients == 0 or reduced.n_attributes == 0:
                raise DegenerateDatasetError(f"protocol step '{name}' removed every patient or attribute", audit)
            return reduced

        coverage = np.asarray(tabular_service.coverage_by_patient(ds))
        ds = step("patient_coverage", ds, patient_mask=coverage >= cfg.min_patient_coverage)

        coverage = np.asarray(tabular_service.coverage_by_attribute(ds))
        ds = step("attribute_coverage", ds, attribute_mask=coverage >= cfg.min_attribute_coverage)

        early_alive = [o.vital_status == VitalStatus.ALIVE and o.survival_months < threshold for o in ds.outcomes]
        ds = step("alive_before_threshold", ds, patient_mask=~np.asarray(early_alive, dtype=bool))

        early_other = [o.vital_status == VitalStatus.DEAD_OTHER and o.survival_months < threshold for o in ds.outcomes]
        ds = step("dead_other_before_threshold", ds, patient_mask=~np.asarray(early_other, dtype=bool))

        by_role = [not (a.roles & cfg.drop_roles) for a in ds.attributes]
        ds = step("dropped_roles", ds, attribute_mask=np.asarray(by_role, dtype=bool))

        keep = PreprocessService._derived_or_correlated(ds, cfg)
        ds = step("derived_or_correlated", ds, attribute_mask=keep)

        if not audit.telescopes():
            raise InvariantError("protocol audit counts do not telescope")
        return ds, audit

    @staticmethod
    def _derived_or_correlated(ds: Dataset, cfg: ExclusionConfig) -> np.ndarray:
        names = ds.attribute_names
        unknown = sorted(set(cfg.drop_attributes) - set(names))
        if unknown:
            logger.warning("drop_attributes names not in the dataset (already removed?): %s", ", ".join(unknown))
        keep = np.array([n not in set(cfg.drop_attributes) for n in names], dtype=bool)
        if cfg.correlation_threshold is None:
            return keep

        frame = pd.DataFrame(np.where(ds.present, ds.values, np.nan), columns=list(names))
        corr = frame.corr().abs().to_numpy()
        for j in range(len(names)):
            if not keep[j]:
                continue
            for k in range(j + 1, len(names)):
                if keep[k] and corr[j, k] > cfg.correlation_threshold:
                    logger.warning("dropping '%s': |r| = %.3f with '%s'", names[k], corr[j, k], names[j])
                    keep[k] = False
        return keep

    @staticmethod
    def restrict_stages(ds: Dataset, stages: Iterable[int], audit: Optional[AuditLog] = None) -> Dataset:
        wanted = set(stages)
        mask = np.isin(ds.stages, sorted(wanted))
        restricted = tabular_service.select(ds, mask, np.ones(ds.n_attributes, dtype=bool))
        if audit is not None:
            audit.record("stage_restriction", restricted.n_patients, restricted.n_attributes)
        if restricted.n_patients == 0:
            raise DegenerateDatasetError(f"no patients with TNM stage in {sorted(wanted)}", audit)
        logger.info("restricted to stages %s: %d patients", sorted(wanted), restricted.n_patients)
        return restricted

    @staticmethod
    def label_five_year(o: OutcomeRecord, threshold: int) -> SurvivalLabel:
        if o.vital_status == VitalStatus.DEAD_OTHER:
            return SurvivalLabel.EXCLUDED
        if o.survival_months >= threshold:
            return SurvivalLabel.SURVIVED
        if o.vital_status == VitalStatus.DEAD_OF_DISEASE:
            return SurvivalLabel.DIED
        return SurvivalLabel.EXCLUDED

    @staticmethod
    def label_all(ds: Dataset, threshold: int) -> List[SurvivalLabel]:
        return [PreprocessService.label_five_year(o, threshold) for o in ds.outcomes]

    @staticmethod
    def drop_excluded(ds: Dataset, labels: Sequence[SurvivalLabel]) -> Tuple[Dataset, List[SurvivalLabel]]:
        if len(labels) != ds.n_patients:
            raise SchemaMismatchError(f"{len(labels)} labels for {ds.n_patients} patients")
        keep = np.array([label != SurvivalLabel.EXCLUDED for label in labels], dtype=bool)
        kept = tabular_service.select(ds, keep, np.ones(ds.n_attributes, dtype=bool))
        return kept, [label for label, k in zip(labels, keep) if k]

    @staticmethod
    def fit_imputation(ds: Dataset) -> ImputationPlan:
        entries = []
        for j, attribute in enumerate(ds.attributes):
            observed = ds.values[ds.present[:, j], j]
            if observed.size == 0:
                raise DegenerateDatasetError(f"attribute '{attribute.name}' has no present cells to impute from")
            if attribute.kind == AttributeKind.CONTINUOUS:
                statistic, fill = ImputationStatistic.MEAN, float(np.mean(observed))
            elif attribute.kind == AttributeKind.ORDINAL:
                # half-up rounding keeps the fill on a valid level
                median = float(np.median(observed))
                statistic = ImputationStatistic.MEDIAN
                fill = float(min(max(math.floor(median + 0.5), 0), attribute.levels - 1))
            else:
                counts = np.bincount(observed.astype(int), minlength=attribute.levels or 2)
                statistic, fill = ImputationStatistic.MODE, float(np.argmax(counts))
            entries.append(ImputationEntry(attribute=attribute.name, statistic=statistic, fill_value=fill))
        return ImputationPlan(entries=entries)

    @staticmethod
    def apply_imputation(ds: Dataset, plan: ImputationPlan) -> Dataset:
        fills = {e.attribute: e.fill_value for e in plan.entries}
        missing = [n for n in ds.attribute_names if n not in fills]
        if missing:
            raise SchemaMismatchError(f"imputation plan has no entry for: {', '.join(missing)}")
        fill_row = np.array([fills[n] for n in ds.attribute_names])
        values = np.where(ds.present, ds.values, fill_row)
        return Dataset(ds.attributes, ds.patient_ids, values, np.ones_like(ds.present), ds.outcomes)

    @staticmethod
    def fit_linearization(ds: Dataset, labels: Sequence[SurvivalLabel]) -> LinearizationMap:
        """Binary regrouping of multi-level attributes by observed survival rate.

        Levels are sorted by survival rate (descending, ties by level) and the
        prefix split with the largest chi-square statistic becomes group 1.
        """
        if len(labels) != ds.n_patients:
            raise SchemaMismatchError(f"{len(labels)} labels for {ds.n_patients} patients")
        labelled = np.array([label != SurvivalLabel.EXCLUDED for label in labels], dtype=bool)
        survived = np.array([label == SurvivalLabel.SURVIVED for label in labels], dtype=bool)

        fitted = []
        for j, attribute in enumerate(ds.attributes):
            if attribute.kind not in LEVELLED_KINDS:
                continue
            column = ds.values[:, j].astype(int)
            observed_levels = np.unique(column[ds.present[:, j]])
            if observed_levels.size < 3:
                continue
            result = PreprocessService._fit_attribute(
                attribute, column, ds.present[:, j] & labelled, survived, observed_levels
            )
            if result is not None:
                fitted.append(result)
        return LinearizationMap(attributes=fitted)

    @staticmethod
    def _fit_attribute(attribute: AttributeSpec, column, usable, survived, observed_levels) -> Optional[LinearizedAttribute]:
        n_labeled = np.bincount(column[usable], minlength=attribute.levels)
        n_survived = np.bincount(column[usable & survived], minlength=attribute.levels)
        rated = [int(level) for level in observed_levels if n_labeled[level] > 0]
        if len(rated) < 2:
            logger.warning("'%s': fewer than two levels carry labelled patients, not linearized", attribute.name)
            return None

        rate = {level: n_survived[level] / n_labeled[level] for level in rated}
        ordered = sorted(rated, key=lambda level: (-rate[level], level))
        best_size, best_statistic = 1, -1.0
        for size in range(1, len(ordered)):
            statistic = split_statistic(ordered[:size], ordered[size:], n_labeled, n_survived)
            if statistic > best_statistic:
                best_size, best_statistic = size, statistic
        high = set(ordered[:best_size])

        assignments = []
        for level in observed_levels.tolist():
            if level in rate:
                group = 1 if level in high else 0
                assignments.append(LevelAssignment(
                    level=level, group=group, n_labeled=int(n_labeled[level]),
                    n_survived=int(n_survived[level]), survival_rate=float(rate[level]),
                ))
            else:
                nearest = min(rated, key=lambda r: (abs(r - level), r))
                group = 1 if nearest in high else 0
                logger.warning(
                    "'%s' level %d has no labelled patients; grouped with level %d", attribute.name, level, nearest
                )
                assignments.append(LevelAssignment(level=level, group=group, n_labeled=0, n_survived=0, flagged=True))
        return LinearizedAttribute(name=attribute.name, levels=assignments, split_statistic=float(best_statistic))

    @staticmethod
    def apply_linearization(ds: Dataset, linearization: LinearizationMap) -> Dataset:
        if not linearization.attributes:
            return ds
        attributes = list(ds.attributes)
        values = np.array(ds.values)
        for mapped in linearization.attributes:
            if mapped.name not in ds.attribute_names:
                raise SchemaMismatchError(f"linearized attribute '{mapped.name}' is not in the dataset")
            j = ds.attribute_index(mapped.name)
            spec = attributes[j]
            if spec.kind not in LEVELLED_KINDS:
                raise SchemaMismatchError(f"'{spec.name}' is {spec.kind.value}, not a levelled attribute")
            lookup = np.array([mapped.group_of(level) for level in range(spec.levels)], dtype=float)
            values[:, j] = np.where(ds.present[:, j], lookup[values[:, j].astype(int)], 0.0)
            attributes[j] = AttributeSpec(name=spec.name, kind=AttributeKind.BINARY, roles=spec.roles)
        return Dataset(tuple(attributes), ds.patient_ids, values, ds.present, ds.outcomes)


def split_statistic(high: Sequence[int], low: Sequence[int], n_labeled, n_survived) -> float:
    """Pearson chi-square (no continuity correction) of group x survived; 0 when a margin is empty."""
    high_total = sum(int(n_labeled[level]) for level in high)
    high_survived = sum(int(n_survived[level]) for level in high)
    low_total = sum(int(n_labeled[level]) for level in low)
    low_survived = sum(int(n_survived[level]) for level in low)
    table = np.array([
        [high_survived, high_total - high_survived],
        [low_survived, low_total - low_survived],
    ])
    if (table.sum(axis=0) == 0).any() or (table.sum(axis=1) == 0).any():
        return 0.0
    return float(chi2_contingency(table, correction=False)[0])


preprocess_service = PreprocessService()
