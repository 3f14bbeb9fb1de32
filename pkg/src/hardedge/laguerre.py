"""Tridiagonal beta-Laguerre sampling and small-eigenvalue extraction.

The bidiagonal model has independent chi entries; its Gram matrix is
symmetric tridiagonal and positive definite, and the k smallest eigenvalues
are located by bisection with Sturm counts, which certifies the index of
every returned eigenvalue.  The rescaling mu = beta*ln(1/lambda) connects the
smallest eigenvalues to the decreasing limit point process.

Conditioning caveat: lambda_min ~ exp(-mu/beta), so in double precision the
usable range is roughly beta >= 0.02 for mu <= 6; below the 1e-280 underflow
guard the rescaling refuses to proceed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import RandomStream

__all__ = [
    "LaguerreSpec",
    "BidiagonalL",
    "SymTridiag",
    "SpectrumResult",
    "sample_laguerre",
    "gram_tridiag",
    "smallest_eigenvalues",
    "rescale_spectrum",
    "sample_rescaled_points",
]

UNDERFLOW_FLOOR = 1e-280


@dataclass(frozen=True)
class LaguerreSpec:
    n: int
    beta: float
    a: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not (self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.a <= -1:
            raise ValueError(f"requires a > -1, got {self.a}")


@dataclass(frozen=True)
class BidiagonalL:
    """Upper-bidiagonal factor: diag chi_{(a+n+1-i)beta}/sqrt(beta),
    superdiag chi_{(n-i)beta}/sqrt(beta) (1-based i)."""

    diag: np.ndarray
    superdiag: np.ndarray


@dataclass(frozen=True)
class SymTridiag:
    diag: np.ndarray
    offdiag: np.ndarray

    def dense(self) -> np.ndarray:
        n = self.diag.size
        m = np.diag(self.diag)
        if n > 1:
            m += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return m


@dataclass(frozen=True)
class SpectrumResult:
    """Ascending eigenvalues and their order-reversing rescaling
    mu_i = beta*ln(1/lambda_i) (descending)."""

    eigenvalues: np.ndarray
    rescaled: np.ndarray


def sample_laguerre(spec: LaguerreSpec, stream: RandomStream | np.random.Generator):
    """Draw the bidiagonal factor with the indicated chi parameters."""
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    i = np.arange(1, spec.n + 1, dtype=float)
    r_diag = (spec.a + spec.n + 1 - i) * spec.beta
    diag = np.sqrt(2.0 * rng.standard_gamma(0.5 * r_diag)) / math.sqrt(spec.beta)
    if spec.n > 1:
        r_sup = (spec.n - i[:-1]) * spec.beta
        sup = np.sqrt(2.0 * rng.standard_gamma(0.5 * r_sup)) / math.sqrt(spec.beta)
    else:
        sup = np.empty(0)
    return BidiagonalL(diag=diag, superdiag=sup)


def gram_tridiag(L: BidiagonalL) -> SymTridiag:
    """Exact symmetric tridiagonal product L L^T."""
    x = np.asarray(L.diag, dtype=float)
    y = np.asarray(L.superdiag, dtype=float)
    n = x.size
    if y.size != max(n - 1, 0):
        raise ValueError("superdiag must have length n-1")
    diag = x * x
    if n > 1:
        diag[:-1] += y * y
        off = y * x[1:]
    else:
        off = np.empty(0)
    return SymTridiag(diag=diag, offdiag=off)


def sturm_count(T: SymTridiag, sigma: float) -> int:
    """Number of eigenvalues of T strictly below the shift sigma."""
    off2 = T.offdiag * T.offdiag
    return int(_kernels.sturm_count(T.diag, off2, float(sigma)))


def smallest_eigenvalues(T: SymTridiag, k: int, rel_tol: float = 1e-12) -> np.ndarray:
    """The k smallest eigenvalues, each bracketed to relative width rel_tol.

    Bisection on [min(0, Gershgorin low), Gershgorin high]; the Sturm count
    at the final brackets certifies that the j-th returned value is the j-th
    eigenvalue.
    """
    n = T.diag.size
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n={n}, got k={k}")
    if not (rel_tol > 0):
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    if not (np.all(np.isfinite(T.diag)) and np.all(np.isfinite(T.offdiag))):
        raise ValueError("matrix entries must be finite")
    off2 = T.offdiag * T.offdiag
    radius = np.zeros(n)
    if n > 1:
        radius[:-1] += np.abs(T.offdiag)
        radius[1:] += np.abs(T.offdiag)
    lo0 = min(0.0, float(np.min(T.diag - radius)))
    hi0 = float(np.max(T.diag + radius))
    out = np.empty(k)
    lo = lo0
    for j in range(1, k + 1):
        # eigenvalues come out ascending, so the previous bracket floor holds
        a, b = lo, hi0
        while _kernels.sturm_count(T.diag, off2, b) < j:
            b = b + max(1.0, abs(b))  # defensive; Gershgorin should cover
        for _ in range(4000):
            width = b - a
            mid = 0.5 * (a + b)
            if width <= rel_tol * max(abs(mid), 1e-300) or mid == a or mid == b:
                break
            if _kernels.sturm_count(T.diag, off2, mid) >= j:
                b = mid
            else:
                a = mid
        out[j - 1] = 0.5 * (a + b)
        lo = a
    return out


def rescale_spectrum(eigs, beta: float) -> SpectrumResult:
    """Apply mu = beta*ln(1/lambda); ascending eigenvalues map to a
    descending rescaled sequence."""
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs <= UNDERFLOW_FLOOR):
        raise ValueError(
            f"eigenvalue at or below the {UNDERFLOW_FLOOR} underflow floor; "
            "lambda ~ exp(-mu/beta) needs a larger beta for this mu range"
        )
    return SpectrumResult(eigenvalues=eigs, rescaled=-beta * np.log(eigs))


def sample_rescaled_points(
    spec: LaguerreSpec,
    k: int,
    stream: RandomStream | np.random.Generator,
    rel_tol: float = 1e-12,
) -> np.ndarray:
    """One draw of the k largest rescaled points (descending)."""
    T = gram_tridiag(sample_laguerre(spec, stream))
    eigs = smallest_eigenvalues(T, k, rel_tol)
    return rescale_spectrum(eigs, spec.beta).rescaled
