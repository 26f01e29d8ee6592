import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import DegenerateDatasetError, SchemaMismatchError
from ..schemas.dataset import Dataset, VitalStatus
from ..schemas.survival import GroupedCurves, GroupSummary, KmCurve, KmStep, TimedOutcome

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["group", "time", "at_risk", "deaths", "survival"]


def _event_table(outcomes: Sequence[TimedOutcome]) -> pd.DataFrame:
    frame = pd.DataFrame({
        "time": [o.time for o in outcomes],
        "event": [int(o.event) for o in outcomes],
    })
    table = frame.groupby("time")["event"].agg(deaths="sum", observed="count").sort_index()
    # everyone observed at or after t is at risk at t
    table["at_risk"] = table["observed"][::-1].cumsum()[::-1]
    return table[table["deaths"] > 0]


class SurvivalService:
    @staticmethod
    def timed_outcomes(ds: Dataset, exclude_other_deaths: bool = False) -> Tuple[List[TimedOutcome], List[int]]:
        """Curve inputs from outcome records, with the patient rows they came from.

        Death from disease is the event; other deaths are censored at their
        death time, or left out entirely with ``exclude_other_deaths``.
        """
        outcomes, rows = [], []
        for i, o in enumerate(ds.outcomes):
            if exclude_other_deaths and o.vital_status == VitalStatus.DEAD_OTHER:
                continue
            outcomes.append(TimedOutcome(time=o.survival_months, event=o.vital_status == VitalStatus.DEAD_OF_DISEASE))
            rows.append(i)
        return outcomes, rows

    @staticmethod
    def km_estimate(outcomes: Sequence[TimedOutcome]) -> KmCurve:
        """Product-limit estimate with steps at distinct death times.

        Patients censored at a death time still count as at risk there.
        """
        if not outcomes:
            raise DegenerateDatasetError("Kaplan-Meier estimation needs at least one outcome")
        table = _event_table(outcomes)
        survival = np.cumprod(1.0 - table["deaths"].to_numpy() / table["at_risk"].to_numpy())
        steps = [
            KmStep(time=int(t), at_risk=int(n), deaths=int(d), survival=float(s))
            for t, n, d, s in zip(table.index, table["at_risk"], table["deaths"], survival)
        ]
        return KmCurve(n_patients=len(outcomes), steps=steps)

    @staticmethod
    def km_by_group(
        outcomes: Sequence[TimedOutcome],
        groups: Sequence[str],
        expected_groups: Optional[Iterable[str]] = None,
    ) -> GroupedCurves:
        """One independent curve per group key, ordered by key.

        Keys listed in ``expected_groups`` that no patient falls into are
        reported in ``omitted`` and logged as a warning.
        """
        if len(groups) != len(outcomes):
            raise SchemaMismatchError(f"{len(groups)} group keys for {len(outcomes)} outcomes")
        members: Dict[str, List[TimedOutcome]] = {}
        for outcome, key in zip(outcomes, groups):
            members.setdefault(key, []).append(outcome)
        omitted = sorted(set(expected_groups or ()) - set(members))
        for key in omitted:
            logger.warning("survival group '%s' has no patients; curve omitted", key)
        curves = {key: SurvivalService.km_estimate(members[key]) for key in sorted(members)}
        return GroupedCurves(curves=curves, omitted=omitted)

    @staticmethod
    def survival_rate_at(curve: KmCurve, t: float) -> float:
        rate = 1.0
        for step in curve.steps:
            if step.time > t:
                break
            rate = step.survival
        return rate

    @staticmethod
    def median_survival(curve: KmCurve) -> Optional[int]:
        for step in curve.steps:
            if step.survival <= 0.5:
                return step.time
        return None

    @staticmethod
    def prognosis_summary(curves: GroupedCurves, horizon: int) -> List[GroupSummary]:
        return [
            GroupSummary(
                group=key,
                n_patients=curve.n_patients,
                survival_at_horizon=SurvivalService.survival_rate_at(curve, horizon),
                median_survival=SurvivalService.median_survival(curve),
            )
            for key, curve in curves.curves.items()
        ]

    @staticmethod
    def curves_frame(
        outcomes: Sequence[TimedOutcome],
        groups: Sequence[str],
        horizon: Optional[int] = None,
        expected_groups: Optional[Iterable[str]] = None,
    ) -> Tuple[GroupedCurves, pd.DataFrame]:
        """Plot-ready rows: a t = 0 row per group (unless a death falls at t = 0), its steps, and a closing row at ``horizon`` if given."""
        grouped = SurvivalService.km_by_group(outcomes, groups, expected_groups)
        times = np.array([o.time for o in outcomes])
        keys = np.array(list(groups), dtype=object)
        rows = []
        for key, curve in grouped.curves.items():
            if not curve.steps or curve.steps[0].time > 0:
                rows.append((key, 0, curve.n_patients, 0, 1.0))
            for step in curve.steps:
                if horizon is not None and step.time > horizon:
                    break
                rows.append((key, step.time, step.at_risk, step.deaths, step.survival))
            if horizon is not None and rows[-1][1] != horizon:
                at_risk = int(((keys == key) & (times >= horizon)).sum())
                rows.append((key, horizon, at_risk, 0, SurvivalService.survival_rate_at(curve, horizon)))
        return grouped, pd.DataFrame(rows, columns=CURVE_COLUMNS)


survival_service = SurvivalService()
