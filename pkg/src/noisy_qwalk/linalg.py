"""
Small dense 2x2 complex matrix helpers.

Hadamard products, the SU(2)/U(1) coset parametrization of coin matrices,
and the bistochastic branch-probability matrix W o W*.

Matrices are plain ``numpy`` arrays of shape (2, 2) and dtype complex128.
Basis index 0 is the coin state ``|+>`` and index 1 is ``|->``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateCoset

__all__ = [
    "CosetPoint",
    "SIGMA1",
    "SIGMA3",
    "bistochastic_of",
    "coin_index",
    "coset_decompose",
    "coset_matrix",
    "direct_probabilities",
    "hadamard_product",
    "is_unitary",
    "lemma1_probabilities",
    "lemma1_residuals",
    "random_unitary",
]

Mat2C = NDArray[np.complex128]

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=np.complex128)

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class CosetPoint:
    """Complex-projective coordinate of a coset element W(theta)."""

    theta: complex

    @property
    def z(self) -> complex:
        return self.theta / np.sqrt(1.0 + abs(self.theta) ** 2)

    @property
    def p(self) -> float:
        return 1.0 / (1.0 + abs(self.theta) ** 2)


def coin_index(c) -> int:
    """Map a coin label (``'+'``, ``'-'``, or a basis index 0/1) to its index."""
    labels = {"+": 0, "-": 1, 0: 0, 1: 1}
    try:
        return labels[c]
    except (KeyError, TypeError):
        raise ValueError(f"unknown coin basis label {c!r}") from None


def is_unitary(m: NDArray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    eye = np.eye(m.shape[0])
    return bool(np.max(np.abs(m.conj().T @ m - eye)) < tol)


def hadamard_product(a: NDArray, b: NDArray) -> NDArray:
    """Element-wise product ``(a o b)_ij = a_ij * b_ij``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a * b


def coset_matrix(theta: complex) -> Mat2C:
    """
    Coset representative W(theta) = (1+|theta|^2)^(-1/2) [[1, theta], [-theta*, 1]].

    Unitary with unit determinant for any finite ``theta``.
    """
    theta = complex(theta)
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    # 1/sqrt(1+|t|^2) and t/sqrt(1+|t|^2) without overflow for large |t|
    mag = abs(theta)
    if mag > 1.0:
        n = 1.0 / (mag * np.sqrt(1.0 + mag ** -2))
    else:
        n = 1.0 / np.sqrt(1.0 + mag * mag)
    return np.array(
        [[n, theta * n], [-theta.conjugate() * n, n]], dtype=np.complex128
    )


def coset_decompose(u: NDArray) -> tuple[Mat2C, Mat2C]:
    """
    Factor a 2x2 unitary as ``u = d @ w``.

    ``d`` is diagonal with unimodular entries and ``w = coset_matrix(theta)``
    has a real positive (1,1) entry.

    Raises
    ------
    DegenerateCoset
        If ``|u[0, 0]| < 1e-12``; the coordinate theta = u01/u00 diverges.
    """
    u = np.asarray(u, dtype=np.complex128)
    if abs(u[0, 0]) < DEGENERATE_TOL or abs(u[1, 1]) < DEGENERATE_TOL:
        raise DegenerateCoset(
            "unitary has (near-)zero diagonal; coset coordinate is infinite"
        )
    theta = u[0, 1] / u[0, 0]
    d = np.diag([u[0, 0] / abs(u[0, 0]), u[1, 1] / abs(u[1, 1])])
    return d.astype(np.complex128), coset_matrix(theta)


def bistochastic_of(w: NDArray) -> NDArray[np.float64]:
    """Return the real bistochastic matrix ``w o w*``."""
    w = np.asarray(w)
    return np.real(hadamard_product(w, w.conj()))


def lemma1_probabilities(u: NDArray, c) -> tuple[float, float]:
    """
    Branch probabilities (p_plus, p_minus) of coin matrix ``u`` for basis input ``c``.

    Computed through the coset factor: p_i = <i| W o W* |c> with u = D W.
    """
    _, w = coset_decompose(u)
    col = bistochastic_of(w)[:, coin_index(c)]
    return float(col[0]), float(col[1])


def direct_probabilities(u: NDArray, c) -> tuple[float, float]:
    """p_i = Tr(P_i u |c><c| u^dagger), evaluated by explicit matrix products."""
    u = np.asarray(u, dtype=np.complex128)
    rho_c = np.zeros((2, 2), dtype=np.complex128)
    j = coin_index(c)
    rho_c[j, j] = 1.0
    out = u @ rho_c @ u.conj().T
    projectors = (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    p_plus, p_minus = (float(np.real(np.trace(p @ out))) for p in projectors)
    return p_plus, p_minus


def random_unitary(rng: np.random.Generator) -> Mat2C:
    """exp(i phi s3) W(theta) exp(i psi s3), theta complex Gaussian, phases uniform."""
    phi, psi = rng.uniform(0.0, 2.0 * np.pi, size=2)
    theta = complex(rng.normal(), rng.normal())
    left = np.diag(np.exp([1j * phi, -1j * phi]))
    right = np.diag(np.exp([1j * psi, -1j * psi]))
    return left @ coset_matrix(theta) @ right


def lemma1_residuals(n_samples: int = 1000, seed: int = 0) -> dict[str, float]:
    """
    Worst-case residuals of the branch-probability identities over random unitaries.

    ``phase_invariance``: |p(D U) - p(U)| for random unimodular diagonal D.
    ``hadamard_vs_trace``: |p via W o W* - p via Tr(P_i U rho_c U^dagger)|.
    ``bistochastic``: row/column sums of W o W* away from 1.
    """
    rng = np.random.default_rng(seed)
    worst = {"phase_invariance": 0.0, "hadamard_vs_trace": 0.0, "bistochastic": 0.0}
    for _ in range(n_samples):
        u = random_unitary(rng)
        d = np.diag(np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=2)))
        _, w = coset_decompose(u)
        b = bistochastic_of(w)
        worst["bistochastic"] = max(
            worst["bistochastic"],
            float(np.max(np.abs(b.sum(axis=0) - 1))),
            float(np.max(np.abs(b.sum(axis=1) - 1))),
        )
        for c in ("+", "-"):
            p = np.array(lemma1_probabilities(u, c))
            worst["phase_invariance"] = max(
                worst["phase_invariance"],
                float(np.max(np.abs(np.array(lemma1_probabilities(d @ u, c)) - p))),
            )
            worst["hadamard_vs_trace"] = max(
                worst["hadamard_vs_trace"],
                float(np.max(np.abs(np.array(direct_probabilities(u, c)) - p))),
            )
    return worst
