"""Synthetic donor/patient cohorts and the simulated allocation response.

Donor and patient feature vectors are drawn from a latent Gaussian with a
configurable correlation structure, then pushed through per-feature
marginal maps (affine for continuous features, quantile cuts for binary
and categorical ones). The ground-truth score matrix combines life-years,
dialysis time, donor quality and sensitization through the published
allocation formula; the component proxies are synthetic and deliberately
separable so the full matrix has numerical rank at most 3.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .errors import ConfigurationError, ParameterError
from .matrices import CovariateTable, MaskedResponseMatrix
from .prox import sigmoid

# (name, kind, params): normal -> (mean, sd); bernoulli -> probability of
# the first-listed category, encoded 1; categorical -> probabilities in
# listing order, encoded as integer codes 0, 1, ...
PATIENT_FEATURES = (
    ("age", "normal", (46.56, 12.66)),
    ("bmi", "normal", (25.91, 5.46)),
    ("blood_type", "categorical", (0.45, 0.40, 0.11, 0.04)),
    ("gender_male", "bernoulli", 0.62),
    ("ethnicity", "categorical", (0.354, 0.321, 0.208, 0.092, 0.025)),
    ("waiting_time", "normal", (3.2, 2.47)),
    ("albumin", "normal", (3.83, 0.72)),
    ("cause_esrd", "categorical", (0.39, 0.145, 0.138, 0.08, 0.053, 0.194)),
    ("hypertension", "bernoulli", 0.16),
    ("diabetes", "bernoulli", 0.37),
    ("prior_transplant_primary", "bernoulli", 0.88),
)

DONOR_FEATURES = (
    ("age", "normal", (32.4, 13.8)),
    ("bmi", "normal", (25.7, 4.3)),
    ("blood_type", "categorical", (0.45, 0.40, 0.11, 0.04)),
    ("gender_male", "bernoulli", 0.60),
    ("ethnicity", "categorical", (0.655, 0.151, 0.149, 0.026, 0.019)),
    ("aki", "bernoulli", 0.171),
    ("serum_creatinine", "normal", (1.05, 0.6)),
    ("cause_death", "categorical", (0.10, 0.31, 0.01, 0.47, 0.11)),
    ("egfr", "normal", (83.1, 31.2)),
    ("hypertension", "bernoulli", 0.14),
    ("diabetes", "bernoulli", 0.06),
)

N_FEATURES = 11

# Synthetic proxy coefficients for the response components. These are
# auditable knobs, not clinical calculators; override through the
# [simulator] config section.
DEFAULT_CONSTANTS: dict[str, float] = {
    "kdpi_age": 0.05,
    "kdpi_age_center": 40.0,
    "kdpi_creatinine": 0.8,
    "kdpi_egfr": -0.01,
    "kdpi_egfr_center": 80.0,
    "kdpi_hypertension": 0.7,
    "kdpi_diabetes": 0.9,
    "kdpi_aki": 0.6,
    "lyft_base": 20.0,
    "lyft_age": -0.2,
    "lyft_diabetes": -3.0,
    "lyft_hypertension": -1.0,
    "lyft_albumin": 0.5,
    "lyft_quality_offset": 1.5,
    "cpra_zero_prob": 0.5,
}


@dataclass(frozen=True)
class CohortSpec:
    m: int
    n: int
    seed: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ParameterError("cohort sizes must be positive")


@dataclass(frozen=True)
class CorrelationScenario:
    """Latent covariance: serial decay by rho, or disjoint scaled blocks."""

    kind: str = "serial"
    rho: float = 0.0
    phi: float = 1.0
    block_sizes: tuple[int, ...] = (4, 4, 3)

    def __post_init__(self):
        if self.kind not in ("serial", "block"):
            raise ConfigurationError(f"unknown scenario kind {self.kind!r}")
        if self.kind == "serial" and not 0.0 <= self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in [0, 1), got {self.rho}")
        if self.kind == "block":
            if self.phi <= 0:
                raise ConfigurationError(f"phi must be positive, got {self.phi}")
            if sum(self.block_sizes) != N_FEATURES:
                raise ConfigurationError(
                    f"block sizes must sum to {N_FEATURES}, got {self.block_sizes}"
                )

    @property
    def param(self) -> float:
        return self.rho if self.kind == "serial" else self.phi

    def covariance(self) -> np.ndarray:
        if self.kind == "serial":
            idx = np.arange(N_FEATURES)
            cov = self.rho ** np.abs(idx[:, None] - idx[None, :])
        else:
            cov = np.zeros((N_FEATURES, N_FEATURES))
            start = 0
            for size in self.block_sizes:
                block = self.phi * (0.5 * np.ones((size, size)) + 0.5 * np.eye(size))
                cov[start:start + size, start:start + size] = block
                start += size
        return cov


@dataclass(frozen=True)
class Cohort:
    """Encoded feature matrix (one row per individual) plus 2-D locations."""

    features: np.ndarray
    names: tuple[str, ...]
    locations: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.names.index(name)]


@dataclass(frozen=True)
class KasComponents:
    """Inputs of the allocation score: per-pair life years, donor quality,
    patient dialysis time and sensitization."""

    LYFT: np.ndarray
    KDPI: np.ndarray
    DT: np.ndarray
    CPRA: np.ndarray

    def __post_init__(self):
        if not ((self.KDPI >= 0).all() and (self.KDPI <= 1).all()):
            raise ParameterError("KDPI must lie in [0, 1]")
        if not ((self.CPRA >= 0).all() and (self.CPRA <= 100).all()):
            raise ParameterError("CPRA must lie in [0, 100]")
        if (self.LYFT < 0).any() or (self.DT < 0).any():
            raise ParameterError("LYFT and DT must be nonnegative")


def _apply_marginal(kind: str, params, z: np.ndarray) -> np.ndarray:
    if kind == "normal":
        mean, sd = params
        return mean + sd * z
    if kind == "bernoulli":
        # 1 for the first-listed category; threshold at the quantile of
        # the complementary probability.
        return (z > norm.ppf(1.0 - params)).astype(float)
    if kind == "categorical":
        cuts = norm.ppf(np.cumsum(params)[:-1])
        return np.searchsorted(cuts, z, side="left").astype(float)
    raise ConfigurationError(f"unknown marginal kind {kind!r}")


def _sample_table(features, count: int, cov: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("scenario covariance is not positive definite") from exc
    latent = rng.standard_normal((count, N_FEATURES)) @ chol.T
    out = np.empty_like(latent)
    for k, (_, kind, params) in enumerate(features):
        out[:, k] = _apply_marginal(kind, params, latent[:, k])
    return out


def sample_cohort(spec: CohortSpec, scenario: CorrelationScenario
                  ) -> tuple[Cohort, Cohort]:
    """Draw (donors, patients); deterministic in (spec.seed, scenario)."""
    rng = np.random.default_rng(spec.seed)
    cov = scenario.covariance()
    donor_rows = _sample_table(DONOR_FEATURES, spec.m, cov, rng)
    patient_rows = _sample_table(PATIENT_FEATURES, spec.n, cov, rng)
    donor_loc = rng.uniform(size=(spec.m, 2))
    patient_loc = rng.uniform(size=(spec.n, 2))
    donors = Cohort(donor_rows, tuple(f[0] for f in DONOR_FEATURES), donor_loc)
    patients = Cohort(patient_rows, tuple(f[0] for f in PATIENT_FEATURES), patient_loc)
    return donors, patients


def build_covariates(donors: Cohort, patients: Cohort) -> CovariateTable:
    """One row per (donor, patient) pair, z-scored per column.

    Layout: 11 donor features, 11 patient features, the 121 donor x
    patient products (donor-major), then the geographic distance.
    """
    m = donors.features.shape[0]
    n = patients.features.shape[0]
    d = donors.features
    q = patients.features
    donor_part = np.repeat(d, n, axis=0)
    patient_part = np.tile(q, (m, 1))
    inter = (d[:, None, :, None] * q[None, :, None, :]).reshape(m * n, N_FEATURES ** 2)
    dist = np.linalg.norm(
        donors.locations[:, None, :] - patients.locations[None, :, :], axis=2
    ).reshape(m * n, 1)
    X = np.hstack([donor_part, patient_part, inter, dist])
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    nonconst = sd > 0
    X = X - mean
    X[:, nonconst] /= sd[nonconst]
    return CovariateTable(X)


def synthesize_kas(donors: Cohort, patients: Cohort, seed: int,
                   constants: dict[str, float] | None = None
                   ) -> tuple[KasComponents, np.ndarray]:
    """Build the score components and the full response matrix.

    The combination rule is
    0.8 * LYFT * (1 - KDPI) + 0.8 * DT * KDPI + 0.2 * DT + 0.04 * CPRA.
    Every donor-dependent factor is separable from every patient-dependent
    one, so the full matrix is a sum of three rank-1 terms.
    """
    c = dict(DEFAULT_CONSTANTS)
    if constants:
        c.update(constants)
    rng = np.random.default_rng(seed)

    kdpi = sigmoid(
        c["kdpi_age"] * (donors.column("age") - c["kdpi_age_center"])
        + c["kdpi_creatinine"] * (donors.column("serum_creatinine") - 1.05) / 0.6
        + c["kdpi_egfr"] * (donors.column("egfr") - c["kdpi_egfr_center"])
        + c["kdpi_hypertension"] * donors.column("hypertension")
        + c["kdpi_diabetes"] * donors.column("diabetes")
        + c["kdpi_aki"] * donors.column("aki")
    )
    patient_base = np.maximum(
        0.0,
        c["lyft_base"]
        + c["lyft_age"] * patients.column("age")
        + c["lyft_diabetes"] * patients.column("diabetes")
        + c["lyft_hypertension"] * patients.column("hypertension")
        + c["lyft_albumin"] * patients.column("albumin"),
    )
    lyft = np.outer(c["lyft_quality_offset"] - kdpi, patient_base)
    dt = np.maximum(0.0, patients.column("waiting_time"))
    n = patients.features.shape[0]
    cpra = np.where(
        rng.uniform(size=n) < c["cpra_zero_prob"],
        0.0,
        rng.uniform(1.0, 100.0, size=n),
    )
    components = KasComponents(LYFT=lyft, KDPI=kdpi, DT=dt, CPRA=cpra)
    return components, kas_response(components)


def kas_response(components: KasComponents) -> np.ndarray:
    """Recompute the full response from stored components."""
    kdpi = components.KDPI[:, None]
    dt = components.DT[None, :]
    cpra = components.CPRA[None, :]
    return 0.8 * components.LYFT * (1.0 - kdpi) + 0.8 * dt * kdpi + 0.2 * dt + 0.04 * cpra


def apply_sparsity(Y_full: np.ndarray, level: float, seed: int) -> MaskedResponseMatrix:
    """Mask exactly round(level * m * n) uniformly chosen entries."""
    if not 0.0 <= level < 1.0:
        raise ParameterError(f"sparsity level must lie in [0, 1), got {level}")
    Y_full = np.asarray(Y_full, dtype=float)
    m, n = Y_full.shape
    total = m * n
    n_masked = int(round(level * total))
    rng = np.random.default_rng(seed)
    masked_flat = rng.choice(total, size=n_masked, replace=False)
    mask = np.ones(total, dtype=bool)
    mask[masked_flat] = False
    mask = mask.reshape(m, n)
    return MaskedResponseMatrix(np.where(mask, Y_full, 0.0), mask)


def dump_cohort_csv(cohort: Cohort, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(cohort.names) + ["loc_x", "loc_y"])
        for row, loc in zip(cohort.features, cohort.locations):
            writer.writerow([repr(float(x)) for x in row]
                            + [repr(float(loc[0])), repr(float(loc[1]))])


def dump_kas_components_csv(components: KasComponents, path: str | Path) -> None:
    """Long-format dump: donor-level, patient-level, then pair-level rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "i", "j", "value"])
        for i, val in enumerate(components.KDPI):
            writer.writerow(["KDPI", i, "", repr(float(val))])
        for j, val in enumerate(components.DT):
            writer.writerow(["DT", "", j, repr(float(val))])
        for j, val in enumerate(components.CPRA):
            writer.writerow(["CPRA", "", j, repr(float(val))])
        m, n = components.LYFT.shape
        for i in range(m):
            for j in range(n):
                writer.writerow(["LYFT", i, j, repr(float(components.LYFT[i, j]))])
