"""Singular values of matrix products and the singular value function.

The singular value function interpolates between products of the leading
singular values: for ``m - 1 < s <= m`` it is
``a_1 * ... * a_{m-1} * a_m**(s - m + 1)`` and for ``s`` above the matrix
dimension it continues as ``det**(s/d)``. It is continuous, strictly
decreasing in ``s`` for contractions, and submultiplicative over matrix
products. Everything here is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codespace import Word
from .errors import SingularMatrixError

__all__ = [
    "SingularSpectrum",
    "singular_values",
    "singular_value_function",
    "svf_log",
    "word_product",
    "word_spectrum",
    "singular_value_envelope",
    "within_envelope",
]

CONDITION_LIMIT = 1e14


@dataclass(frozen=True)
class SingularSpectrum:
    """Singular values sorted nonincreasing, kept alongside their logs."""

    values: np.ndarray
    log_values: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.values)


def singular_values(matrix) -> SingularSpectrum:
    """Singular values of a square nonsingular matrix, largest first.

    Computed from the symmetric eigendecomposition of ``T^t T``. Raises
    ``SingularMatrixError`` when the matrix is numerically singular or its
    condition estimate exceeds ``CONDITION_LIMIT``.
    """
    T = np.asarray(matrix, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {T.shape}")
    if not np.all(np.isfinite(T)):
        raise ValueError("matrix entries must be finite")
    eigs = np.linalg.eigvalsh(T.T @ T)
    eigs = eigs[::-1]
    if eigs[0] <= 0.0 or eigs[-1] <= 0.0:
        raise SingularMatrixError("matrix is numerically singular")
    vals = np.sqrt(eigs)
    if vals[0] / vals[-1] > CONDITION_LIMIT:
        raise SingularMatrixError(
            f"condition estimate {vals[0] / vals[-1]:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )
    logs = np.log(vals)
    # anchor the smallest value through the determinant: the leading values
    # are well conditioned, so this pins the product identity exactly and
    # sharpens the smallest value, which squaring T^t T smears the most
    sign, logdet = np.linalg.slogdet(T)
    if sign == 0.0:
        raise SingularMatrixError("matrix is numerically singular")
    logs[-1] = logdet - logs[:-1].sum()
    logs = -np.sort(-logs)  # anchoring can flip a near-tie by an epsilon
    vals = np.exp(logs)
    vals.setflags(write=False)
    logs.setflags(write=False)
    return SingularSpectrum(values=vals, log_values=logs)


def batched_log_singular_values(mats: np.ndarray) -> np.ndarray:
    """Log singular values for a stack of matrices, sorted nonincreasing.

    Same determinant anchoring as :func:`singular_values`, vectorized over
    the leading axes.
    """
    logs = np.log(np.linalg.svd(mats, compute_uv=False))
    _, logdet = np.linalg.slogdet(mats)
    logs[..., -1] = logdet - logs[..., :-1].sum(axis=-1)
    return -np.sort(-logs, axis=-1)


def svf_log(log_values: np.ndarray, s: float) -> np.ndarray:
    """log of the singular value function, vectorized over leading axes.

    ``log_values`` holds log singular values sorted nonincreasing along the
    last axis. Integer ``s = m`` uses the m-term product (exponent 1), which
    makes the function continuous across integer ``s`` by construction.
    """
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    logs = np.asarray(log_values, dtype=float)
    d = logs.shape[-1]
    if s == 0:
        return np.zeros(logs.shape[:-1])
    if s > d:
        return (s / d) * logs.sum(axis=-1)
    m = int(np.ceil(s))
    return logs[..., : m - 1].sum(axis=-1) + (s - m + 1) * logs[..., m - 1]


def singular_value_function(matrix_or_spectrum, s: float) -> float:
    """Evaluate the singular value function at ``s >= 0``."""
    spec = matrix_or_spectrum
    if not isinstance(spec, SingularSpectrum):
        spec = singular_values(spec)
    return float(np.exp(svf_log(spec.log_values, s)))


def word_product(system, word: Word) -> np.ndarray:
    """Product of the system's linear parts along ``word``; identity if empty.

    The plain floating product is fine for short words; for long words whose
    spectra are needed, use :func:`word_spectrum`, which re-factorizes as it
    goes and tracks magnitudes in the log domain.
    """
    system.profile.validate_letters(word.letters)
    d = system.ambient_dim
    out = np.eye(d)
    for level, letter in enumerate(word.letters, start=1):
        out = out @ system.linear_maps(level)[letter - 1]
    return out


def word_spectrum(system, word: Word) -> SingularSpectrum:
    """Singular spectrum of the matrix product along ``word``.

    Maintains an SVD factorization of the running product, re-factorizing
    after every multiplication and carrying the magnitude in the log domain,
    so products of hundreds of contractions neither underflow nor collapse
    the small singular values.
    """
    system.profile.validate_letters(word.letters)
    d = system.ambient_dim
    U = np.eye(d)
    V = np.eye(d)
    logs = np.zeros(d)
    log_det = 0.0
    for level, letter in enumerate(word.letters, start=1):
        T = system.linear_maps(level)[letter - 1]
        sign, step_det = np.linalg.slogdet(T)
        if sign == 0.0:
            raise SingularMatrixError(f"factor at level {level} is singular")
        log_det += step_det
        top = logs.max()
        C = np.exp(logs - top)[:, None] * (V.T @ T)
        u2, sv, vt = np.linalg.svd(C)
        if sv[-1] <= 0.0:
            raise SingularMatrixError(
                f"product along {word.letters[:level]} is numerically singular"
            )
        logs = np.log(sv) + top
        logs[-1] = log_det - logs[:-1].sum()
        logs = -np.sort(-logs)
        U = U @ u2
        V = vt.T
    vals = np.exp(logs)
    vals.setflags(write=False)
    logs.setflags(write=False)
    return SingularSpectrum(values=vals, log_values=logs)


def singular_value_envelope(system) -> tuple[float, float]:
    """(smallest, largest) extreme singular values over the stored level table."""
    lo = np.inf
    hi = 0.0
    for mats in system.matrix_schedule.distinct_entries():
        for T in mats:
            spec = singular_values(T)
            hi = max(hi, float(spec.values[0]))
            lo = min(lo, float(spec.values[-1]))
    return lo, hi


def within_envelope(system, word: Word, s: float) -> bool:
    """Check ``alpha_-**(s k) <= svf(product) <= alpha_+**(s k)`` for ``word``."""
    lo, hi = singular_value_envelope(system)
    k = len(word)
    val = svf_log(word_spectrum(system, word).log_values, s)
    slack = 1e-9 * max(1.0, abs(val))
    return (s * k * np.log(lo) - slack) <= val <= (s * k * np.log(hi) + slack)
