import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.stats import ortho_group

from ..config import RunConfig
from ..errors import SpecValidationError
from ..schemas.dataset import AttributeKind, AttributeSpec, Dataset, OutcomeRecord, Role, VitalStatus
from ..schemas.synth import AntiSpec, LinearSpec, SurrogateSpec
from .evaluation_service import evaluation_service
from .learner_service import learner_service
from .preprocess_service import preprocess_service
from .seeding import derive_seed, rng_for
from .tabular_service import tabular_service

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-9

# planted non-linear marker: levels 1 and 2 carry the good prognosis
GRADED_LEVELS = 4
GRADED_GOOD_LEVELS = (1, 2)
GRADED_GOOD_RATE = {True: 0.8, False: 0.2}

NOISE_ORDINAL_LEVELS = 5
SPARSE_PATIENT_BLANK_FRACTION = 0.6

# cohort patients this close to the SVM margin get shrunken anti-signal rows
ANTI_MARGIN_BAND = 0.1
ANTI_MARGIN_DAMPING = 0.05


def gram_factor(G: np.ndarray, n_columns: int, random_state) -> np.ndarray:
    """Rows whose inner products reproduce ``G`` when ``n_columns`` equals its order.

    The symmetric square root of ``G`` is turned by a random orthogonal
    matrix; fewer columns keep only the first ``n_columns`` of that rotation.
    """
    eigenvalues, U = eigh(G)
    if eigenvalues.min() < -PSD_TOLERANCE:
        raise SpecValidationError(f"similarity matrix is not positive semidefinite (min eigenvalue {eigenvalues.min():.3g})")
    root = (U * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ U.T
    rotation = ortho_group.rvs(G.shape[0], random_state=random_state)
    return root @ rotation[:, :n_columns]


class SynthService:
    @staticmethod
    def gen_linear(spec: LinearSpec) -> Tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(spec.seed)
        y = np.where(np.arange(spec.n) < spec.n // 2, 1.0, -1.0)
        y = y[rng.permutation(spec.n)]
        X = rng.standard_normal((spec.n, spec.d_informative + spec.d_noise))
        X[:, : spec.d_informative] += y[:, None] * spec.separation / 2.0
        return X, y

    @staticmethod
    def antilearnable_gram(spec: AntiSpec) -> Tuple[np.ndarray, np.ndarray]:
        half = spec.n // 2
        y = np.repeat([1.0, -1.0], half)
        same = y[:, None] == y[None, :]
        G = np.where(same, spec.rho_within, spec.rho_between)
        np.fill_diagonal(G, 1.0)
        return G, y

    @staticmethod
    def gen_antilearnable(spec: AntiSpec) -> Tuple[np.ndarray, np.ndarray]:
        """Vectors whose Gram matrix has unit diagonal, ``rho_within`` inside a
        class and the larger ``rho_between`` across classes.

        Each held-out vector is then closer, on mean inner product, to the
        other class than to its own.
        """
        G, y = SynthService.antilearnable_gram(spec)
        X = gram_factor(G, spec.n, spec.seed)
        order = np.random.default_rng(spec.seed).permutation(spec.n)
        return X[order], y[order]

    @staticmethod
    def gen_clinical_surrogate(spec: SurrogateSpec) -> Dataset:
        """A labelled stage 2/3 core cohort plus the patients and attributes the
        exclusion protocol is meant to remove.

        Signal attributes depend on the 5-year label only, so they are
        conditionally independent of the stage given the label. In the
        labelled cohort the anti-signal block has zero class sums, so a
        held-out patient always sits nearer the other class's centroid, and
        SVM-RFE under the default run configuration eliminates it first.
        """
        return _SurrogateBuilder(spec).build()


class _SurrogateBuilder:
    def __init__(self, spec: SurrogateSpec):
        self.spec = spec
        self.rng = rng_for(spec.seed, "surrogate")
        self.columns: List[Tuple[AttributeSpec, np.ndarray]] = []

    # -- patients ------------------------------------------------------------

    def _stage(self, size) -> np.ndarray:
        return np.where(self.rng.random(size) < self.spec.stage2_fraction, 2, 3)

    def _months(self, low, high, size) -> np.ndarray:
        return self.rng.integers(low, high + 1, size)

    def _patients(self):
        spec = self.spec
        stages, classes, months, status, core = [], [], [], [], []

        n = spec.core_patients
        stage = self._stage(n)
        survived = self.rng.random(n) < np.where(stage == 2, spec.stage2_survival, spec.stage3_survival)
        alive = self.rng.random(n) < 0.8
        core_months = np.where(survived, self._months(60, 120, n), self._months(1, 59, n))
        core_status = np.where(
            survived & alive, VitalStatus.ALIVE.value, VitalStatus.DEAD_OF_DISEASE.value
        )
        stages.append(stage)
        classes.append(survived)
        months.append(core_months)
        status.append(core_status)
        core.append(np.ones(n, dtype=bool))

        def extra(count, stage_values, cls, month_values, vital):
            stages.append(stage_values)
            classes.append(cls)
            months.append(month_values)
            status.append(np.full(count, vital, dtype=object))
            core.append(np.zeros(count, dtype=bool))

        def stage_odds(stage_values):
            return self.rng.random(stage_values.size) < np.where(
                stage_values == 2, spec.stage2_survival, spec.stage3_survival
            )

        s = self._stage(spec.n_censored)
        extra(spec.n_censored, s, stage_odds(s), self._months(6, 59, spec.n_censored), VitalStatus.ALIVE.value)
        s = self._stage(spec.n_other_deaths)
        extra(spec.n_other_deaths, s, stage_odds(s), self._months(1, 59, spec.n_other_deaths), VitalStatus.DEAD_OTHER.value)
        s = self._stage(spec.n_sparse)
        extra(spec.n_sparse, s, np.ones(spec.n_sparse, dtype=bool), self._months(60, 120, spec.n_sparse), VitalStatus.ALIVE.value)

        n_outer = spec.n_outer
        if n_outer:
            outer_stage = np.where(np.arange(n_outer) % 2 == 0, 1, 4)
            draw = self.rng.random(n_outer)
            # stage 1: ~95% alive past 30 months; stage 4: ~95% dead before 30
            early_death = np.where(outer_stage == 1, draw < 0.05, draw < 0.95)
            late_death = (outer_stage == 1) & (draw >= 0.05) & (draw < 0.30)
            outer_months = np.where(
                early_death, self._months(1, 29, n_outer),
                np.where(late_death, self._months(31, 59, n_outer), self._months(60, 120, n_outer)),
            )
            outer_status = np.where(
                early_death | late_death, VitalStatus.DEAD_OF_DISEASE.value, VitalStatus.ALIVE.value
            )
            extra(n_outer, outer_stage, ~(early_death | late_death), outer_months, outer_status)

        self.stage = np.concatenate(stages).astype(int)
        self.survived = np.concatenate(classes).astype(bool)
        self.months = np.concatenate(months).astype(int)
        self.status = np.concatenate(status)
        self.core = np.concatenate(core)
        self.sparse_rows = np.zeros(self.stage.size, dtype=bool)
        start = spec.core_patients + spec.n_censored + spec.n_other_deaths
        self.sparse_rows[start:start + spec.n_sparse] = True

    # -- attributes ----------------------------------------------------------

    def _affine(self, z: np.ndarray, decimals: Optional[int] = 4) -> np.ndarray:
        loc = self.rng.uniform(0.0, 50.0)
        scale = self.rng.uniform(0.5, 5.0)
        values = loc + scale * z
        return values if decimals is None else np.round(values, decimals)

    def _add(self, name, kind, values, levels=None, roles=(Role.FEATURE,)):
        spec = AttributeSpec(name=name, kind=kind, levels=levels, roles=frozenset(roles))
        self.columns.append((spec, np.asarray(values, dtype=float)))

    def _kind_for(self, j: int, with_ordinal: bool) -> AttributeKind:
        if with_ordinal and j % 3 == 2:
            return AttributeKind.ORDINAL
        return AttributeKind.CONTINUOUS if j % 2 == 0 else AttributeKind.BINARY

    def _attributes(self):
        spec, rng, n = self.spec, self.rng, self.stage.size
        sign = np.where(self.survived, 1.0, -1.0)
        delta = spec.signal_strength

        plain_signals = spec.n_signal - (1 if spec.nonlinear_attribute else 0)
        continuous_signal = np.zeros(n)
        for j in range(plain_signals):
            name = f"signal_{j + 1:02d}"
            if self._kind_for(j, False) == AttributeKind.CONTINUOUS:
                z = rng.standard_normal(n) + sign * delta / 2.0
                continuous_signal += z
                self._add(name, AttributeKind.CONTINUOUS, self._affine(z))
            else:
                # standardized class gap of a balanced Bernoulli(0.5 +- delta/4) is delta
                p = np.clip(0.5 + sign * delta / 4.0, 0.01, 0.99)
                self._add(name, AttributeKind.BINARY, rng.random(n) < p)
        if spec.nonlinear_attribute:
            good = rng.random(n) < np.where(self.survived, GRADED_GOOD_RATE[True], GRADED_GOOD_RATE[False])
            bad_levels = [level for level in range(GRADED_LEVELS) if level not in GRADED_GOOD_LEVELS]
            pick = rng.integers(0, 2, n)
            level = np.where(good, np.array(GRADED_GOOD_LEVELS)[pick], np.array(bad_levels)[pick])
            self._add("graded_marker", AttributeKind.ORDINAL, level, levels=GRADED_LEVELS)

        for j in range(spec.n_noise):
            name = f"noise_{j + 1:02d}"
            kind = self._kind_for(j, True)
            if kind == AttributeKind.CONTINUOUS:
                self._add(name, kind, self._affine(rng.standard_normal(n)))
            elif kind == AttributeKind.BINARY:
                self._add(name, kind, rng.random(n) < 0.5)
            else:
                self._add(name, kind, rng.integers(0, NOISE_ORDINAL_LEVELS, n), levels=NOISE_ORDINAL_LEVELS)

        # labelled cohort rows are replaced in _plant_anti_block, after missingness
        self.anti_columns = []
        for j in range(spec.n_antisignal):
            self.anti_columns.append(len(self.columns))
            self._add(f"anti_{j + 1:02d}", AttributeKind.CONTINUOUS, rng.standard_normal(n))

        if spec.protocol_attributes:
            self._add("tnm_grade", AttributeKind.ORDINAL, self.stage - 1, levels=4, roles=(Role.TNM_DERIVED,))
            radio = rng.random(n) < np.where(self.stage <= 2, 0.3, 0.6)
            self._add("radiotherapy", AttributeKind.BINARY, radio, roles=(Role.POST_OPERATIVE,))
            composite = continuous_signal + 0.1 * rng.standard_normal(n)
            self._add("immune_composite", AttributeKind.CONTINUOUS, self._affine(composite), roles=(Role.COMPOUND,))
            self.sparse_column = len(self.columns)
            self._add("sparse_marker", AttributeKind.CONTINUOUS, self._affine(rng.standard_normal(n)))
        else:
            self.sparse_column = None

    # -- anti-signal block ---------------------------------------------------

    def _outcomes(self, rows) -> Tuple[OutcomeRecord, ...]:
        return tuple(
            OutcomeRecord(survival_months=int(self.months[i]), vital_status=VitalStatus(self.status[i]), tnm_stage=int(self.stage[i]))
            for i in rows
        )

    def _plant_anti_block(self, values: np.ndarray, present: np.ndarray):
        """Fill the anti-signal cells of the labelled cohort in place.

        The cohort is the one the default run configuration labels. Its other
        attributes are prepared for ranking and fitted with the linear SVM.
        The block then comes from the Gram root of the projector orthogonal
        to the constant, the class and the dual direction alpha*y (rows near
        the margin shrunken), so its class sums vanish and the SVM optimum
        gives it zero weight.
        """
        spec, n = self.spec, self.stage.size
        cfg = RunConfig()
        provisional = Dataset(
            attributes=tuple(a for a, _ in self.columns),
            patient_ids=tuple(str(i) for i in range(n)),
            values=values,
            present=present,
            outcomes=self._outcomes(range(n)),
        )
        ds, _ = preprocess_service.apply_protocol(provisional, cfg.exclusion)
        ds = preprocess_service.restrict_stages(ds, cfg.stages)
        ds, labels = preprocess_service.drop_excluded(ds, preprocess_service.label_all(ds, cfg.survival_threshold_months))
        rows = np.array([int(i) for i in ds.patient_ids])

        anti_names = {self.columns[j][0].name for j in self.anti_columns}
        view = tabular_service.select_attributes(ds, [a for a in ds.attribute_names if a not in anti_names])
        X, y, svm = evaluation_service.ranking_problem(view, labels, cfg, derive_seed(spec.seed, "anti"))
        fit = learner_service.fit_linear_svm(X, y, svm)
        margins = y * learner_service.decision_linear(fit.model, X)
        damping = np.where(np.abs(margins - 1.0) < ANTI_MARGIN_BAND, ANTI_MARGIN_DAMPING, 1.0)

        basis, _ = np.linalg.qr(damping[:, None] * np.column_stack([np.ones(y.size), y, fit.alphas * y]))
        projector = np.eye(y.size) - basis @ basis.T
        block = damping[:, None] * gram_factor(projector, spec.n_antisignal, self.rng)
        block /= block.std(axis=0)
        values[np.ix_(rows, self.anti_columns)] = block
        for j in self.anti_columns:
            # unrounded: rounding would break the zero class sums
            values[:, j] = self._affine(values[:, j], decimals=None)
        logger.debug(
            "anti-signal block planted on %d cohort patients (%d near the margin)", rows.size, int((damping < 1.0).sum()),
        )

    # -- missingness ---------------------------------------------------------

    def _missingness(self, d: int) -> np.ndarray:
        spec, rng, n = self.spec, self.rng, self.stage.size
        present = np.ones((n, d), dtype=bool)
        if spec.missing_rate == 0:
            return present
        target = int(round(spec.missing_rate * n * d))

        if self.sparse_column is not None:
            blank = rng.random(n) >= spec.sparse_attribute_coverage
            present[blank, self.sparse_column] = False
        for i in np.flatnonzero(self.sparse_rows):
            cells = rng.permutation(d)[: int(np.ceil(SPARSE_PATIENT_BLANK_FRACTION * d))]
            present[i, cells] = False

        eligible = present.copy()
        eligible[self.sparse_rows, :] = False
        if self.sparse_column is not None:
            eligible[:, self.sparse_column] = False
        eligible[np.ix_(self.core, self.anti_columns)] = False
        remaining = target - int((~present).sum())
        if remaining > 0:
            cells = np.flatnonzero(eligible.ravel())
            if remaining > cells.size:
                raise SpecValidationError(f"missing_rate {spec.missing_rate} leaves too few cells to blank")
            chosen = rng.choice(cells, size=remaining, replace=False)
            present[np.unravel_index(chosen, present.shape)] = False
        return present

    def build(self) -> Dataset:
        self._patients()
        self._attributes()
        n, d = self.stage.size, len(self.columns)
        values = np.column_stack([v for _, v in self.columns])
        present = self._missingness(d)
        self._plant_anti_block(values, present)

        order = self.rng.permutation(n)
        outcomes = self._outcomes(order)
        ds = Dataset(
            attributes=tuple(spec for spec, _ in self.columns),
            patient_ids=tuple(f"P{k + 1:04d}" for k in range(n)),
            values=values[order],
            present=present[order],
            outcomes=outcomes,
        )
        logger.info(
            "surrogate cohort: %d patients (%d core), %d attributes, %.1f%% missing",
            n, int(self.core.sum()), d, 100.0 * (~present).mean(),
        )
        return ds


synth_service = SynthService()
