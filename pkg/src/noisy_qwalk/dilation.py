"""
The averaged step as a non-random walk on a larger space.

An auxiliary two-level "coin" is prepared in |a>, rotated by Q, and then
selects which V(s) acts on coin (x) walker:

    Y = sum_s P_s Q (x) V(s)  =  Y_cl (Q (x) 1),   Y_cl = sum_s P_s (x) V(s).

Tracing out the auxiliary system after Y gives sum_s |<s|Q|a>|^2 V(s) rho V(s)^dagger,
which is the CPTP step when |<s|Q|a>|^2 = q_s.

Operators here are materialized densely; windows are small (halfwidth <= 64).
The walker shift is cyclic on the window, which makes V(s) and Y exactly
unitary there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .errors import SupportOverflow
from .evolution import NoiseSpec, cptp_step, reshuffling_matrix
from .linalg import bistochastic_of
from .state import DENSE_MAX_HALFWIDTH, CoinWalkerDensity, LatticeWindow


def q_matrix(q_plus: float) -> np.ndarray:
    """Q = [[sqrt(q+), sqrt(q-)], [-sqrt(q-), sqrt(q+)]]."""
    if not 0.0 <= q_plus <= 1.0:
        raise ValueError("q_plus must lie in [0, 1]")
    a, b = np.sqrt(q_plus), np.sqrt(1.0 - q_plus)
    return np.array([[a, b], [-b, a]], dtype=np.complex128)


@dataclass(frozen=True)
class DilationSpec:
    noise: NoiseSpec
    aux_index: int = 0

    def __post_init__(self):
        if self.aux_index not in (0, 1):
            raise ValueError("aux_index must be 0 or 1")

    @property
    def q_plus(self) -> float:
        return self.noise.q_plus

    @property
    def q(self) -> np.ndarray:
        """Q whose column ``aux_index`` carries probabilities (q+, q-) in Q o Q*."""
        if self.aux_index == 0:
            return q_matrix(self.noise.q_plus)
        return q_matrix(self.noise.q_minus)

    def branch_probabilities(self) -> tuple[float, float]:
        col = bistochastic_of(self.q)[:, self.aux_index]
        return float(col[0]), float(col[1])


def shift_matrix(window: LatticeWindow) -> np.ndarray:
    """V_cl = P_+ (x) E_+ + P_- (x) E_- with cyclic E_+- on the window."""
    n = window.n_sites
    e_plus = np.roll(np.eye(n), 1, axis=0)
    return np.kron(np.diag([1.0, 0.0]), e_plus) + np.kron(np.diag([0.0, 1.0]), e_plus.T)


def branch_unitary_matrix(spec: NoiseSpec, s: int, window: LatticeWindow) -> np.ndarray:
    """Dense V(s) = V_cl (U(s) (x) 1)."""
    u = np.kron(reshuffling_matrix(spec, s), np.eye(window.n_sites))
    return shift_matrix(window) @ u


def dilation_unitary(dspec: DilationSpec, window: LatticeWindow) -> np.ndarray:
    """Dense Y on aux (x) coin (x) walker, aux as the slowest index."""
    n_sys = 2 * window.n_sites
    y = np.zeros((2 * n_sys, 2 * n_sys), dtype=np.complex128)
    q = dspec.q
    for idx, s in enumerate((1, -1)):
        proj_q = np.zeros((2, 2), dtype=np.complex128)
        proj_q[idx] = q[idx]  # P_s Q
        y += np.kron(proj_q, branch_unitary_matrix(dspec.noise, s, window))
    return y


def y_unitarity_residual(dspec: DilationSpec, window: LatticeWindow) -> float:
    y = dilation_unitary(dspec, window)
    return float(np.max(np.abs(y.conj().T @ y - np.eye(y.shape[0]))))


def partial_trace_aux(joint: np.ndarray, n_sys: int) -> np.ndarray:
    t = joint.reshape(2, n_sys, 2, n_sys)
    return np.einsum("aiaj->ij", t)


def _check_boundary(rho: CoinWalkerDensity) -> None:
    t = rho.tensor
    if np.any(t[:, [0, -1]] != 0) or np.any(t[:, :, :, [0, -1]] != 0):
        raise SupportOverflow("density touches the window boundary")


def dilated_step(rho: CoinWalkerDensity, dspec: DilationSpec) -> CoinWalkerDensity:
    """Tr_aux [ Y (|a><a| (x) rho) Y^dagger ]."""
    if rho.window.halfwidth > DENSE_MAX_HALFWIDTH:
        raise ValueError(f"dilation is dense; halfwidth capped at {DENSE_MAX_HALFWIDTH}")
    _check_boundary(rho)
    aux = np.zeros((2, 2), dtype=np.complex128)
    aux[dspec.aux_index, dspec.aux_index] = 1.0
    y = dilation_unitary(dspec, rho.window)
    joint = y @ np.kron(aux, rho.rho) @ y.conj().T
    out = partial_trace_aux(joint, rho.rho.shape[0])
    return CoinWalkerDensity(rho.window, out, rho.step + 1)


def trace_norm(m: np.ndarray) -> float:
    """Schatten-1 norm of a Hermitian matrix."""
    return float(np.abs(np.linalg.eigvalsh(m)).sum())


def random_density(window: LatticeWindow, rng: np.random.Generator, rank: int | None = None) -> CoinWalkerDensity:
    """Ginibre-style density supported away from the window boundary."""
    n = window.n_sites
    inner = [c * n + i for c in range(2) for i in range(1, n - 1)]
    d = len(inner)
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    sub = g @ g.conj().T
    sub /= np.trace(sub).real
    rho = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    rho[np.ix_(inner, inner)] = sub
    return CoinWalkerDensity(window, rho)


DEFAULT_GRID = {"epsilon": (0.1, 0.5, 1.0), "q_plus": (0.3, 0.5, 0.9), "aux_index": (0, 1)}


def equivalence_check(
    grid: dict | None = None,
    n_random: int = 100,
    halfwidth: int = 16,
    seed: int = 0,
) -> list[dict]:
    """
    For every grid point, the largest ||dilated_step(rho) - cptp_step(rho)||_1
    over ``n_random`` random densities, plus the unitarity residual of Y.
    """
    if halfwidth > 16:
        raise ValueError("verification windows are limited to halfwidth <= 16")
    grid = {**DEFAULT_GRID, **(grid or {})}
    window = LatticeWindow(0, halfwidth)
    rng = np.random.default_rng(seed)
    densities = [random_density(window, rng) for _ in range(n_random)]
    rows = []
    for eps, qp, aux in product(grid["epsilon"], grid["q_plus"], grid["aux_index"]):
        dspec = DilationSpec(NoiseSpec(eps, qp), aux)
        dev = max(
            trace_norm(dilated_step(r, dspec).rho - cptp_step(r, dspec.noise).rho) for r in densities
        )
        rows.append(
            {
                "epsilon": eps,
                "q_plus": qp,
                "aux_index": aux,
                "max_trace_norm_deviation": dev,
                "y_unitarity_residual": y_unitarity_residual(dspec, window),
            }
        )
    return rows


def write_report(rows: list[dict], path, metadata: dict | None = None) -> None:
    payload = {"metadata": metadata or {}, "grid": rows}
    Path(path).write_text(json.dumps(payload, indent=1))
