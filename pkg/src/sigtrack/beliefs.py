"""Belief and message containers used by the variational engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BeliefError(ValueError):
    pass


def _check_sym_pd(mat: np.ndarray, name: str, hermitian: bool = False):
    if hermitian:
        if not np.allclose(mat, mat.conj().T, rtol=1e-8, atol=1e-12):
            raise BeliefError(f"{name} not Hermitian")
    else:
        if not np.allclose(mat, mat.T, rtol=1e-8, atol=1e-12):
            raise BeliefError(f"{name} not symmetric")
    # Check definiteness on the diagonally equilibrated matrix. The raw
    # eigensolve has absolute error ~eps*norm(mat), so a matrix whose diagonal
    # spans many orders of magnitude (precision with live and dead components)
    # would fail spuriously on its smallest, perfectly healthy eigenvalue.
    diag = np.real(np.diag(mat))
    if mat.shape[0] and diag.min() <= 0:
        raise BeliefError(f"{name} not positive definite (min diag {diag.min():.3e})")
    scale = 1.0 / np.sqrt(diag)
    eigs = np.linalg.eigvalsh(scale[:, None] * mat * scale[None, :])
    if mat.shape[0] and eigs.min() <= 1e-10:
        raise BeliefError(f"{name} not positive definite (min scaled eig {eigs.min():.3e})")


@dataclass
class GaussianBelief:
    """q(Phi): mean [x, y, vx, vy] and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.mean.shape != (4,) or self.cov.shape != (4, 4):
            raise BeliefError("state belief must be 4-dimensional")
        _check_sym_pd(self.cov, "state covariance")


@dataclass
class GaussianMessage:
    """A Gaussian factor in precision form; precision may be singular.

    Data messages carry a diagonal precision with zeros on dimensions the
    measurement says nothing about (velocities).
    """

    mean: np.ndarray
    precision: np.ndarray
    converged: bool = True

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.precision = np.asarray(self.precision, dtype=float)
        if self.precision.ndim == 1:
            self.precision = np.diag(self.precision)
        n = self.mean.shape[0]
        if self.precision.shape != (n, n):
            raise BeliefError("message mean/precision shape mismatch")
        if not np.allclose(self.precision, self.precision.T, rtol=1e-8, atol=1e-12):
            raise BeliefError("message precision not symmetric")
        if np.linalg.eigvalsh(self.precision).min() < -1e-10:
            raise BeliefError("message precision not positive semidefinite")

    @classmethod
    def from_moments(cls, mean, cov) -> "GaussianMessage":
        cov = np.asarray(cov, dtype=float)
        _check_sym_pd(cov, "message covariance")
        return cls(mean=mean, precision=np.linalg.inv(cov))

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.precision)


@dataclass
class ReflectivityBelief:
    """q(alpha): complex mean vector and Hermitian positive-definite precision."""

    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=complex)
        self.precision = np.asarray(self.precision, dtype=complex)
        k = self.mean.shape[0]
        if self.precision.shape != (k, k):
            raise BeliefError("reflectivity mean/precision shape mismatch")
        if k:
            _check_sym_pd(self.precision, "reflectivity precision", hermitian=True)

    @property
    def variances(self) -> np.ndarray:
        """Marginal variances, diag of the inverse precision."""
        k = len(self.mean)
        if k == 0:
            return np.zeros(0)
        return np.real(np.diag(np.linalg.inv(self.precision)))


@dataclass
class ExistenceBelief:
    prob: float

    def __post_init__(self):
        if not (-1e-12 <= self.prob <= 1.0 + 1e-12):
            raise BeliefError(f"existence probability {self.prob} outside [0, 1]")
        self.prob = float(min(max(self.prob, 0.0), 1.0))


@dataclass
class ProcessNoiseBelief:
    """Per-axis gamma posteriors on the process-noise precision."""

    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        self.shape = np.broadcast_to(np.asarray(self.shape, dtype=float), (4,)).copy()
        self.rate = np.broadcast_to(np.asarray(self.rate, dtype=float), (4,)).copy()
        if np.any(self.shape <= 0) or np.any(self.rate <= 0):
            raise BeliefError("gamma shape/rate must be positive")

    @property
    def mean(self) -> np.ndarray:
        return self.shape / self.rate

    @classmethod
    def prior(cls, zeta: float, chi: float) -> "ProcessNoiseBelief":
        return cls(shape=np.full(4, zeta / 2.0), rate=np.full(4, chi / 2.0))
