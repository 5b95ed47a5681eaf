"""
One step of the noisy walk and its iteration.

A single noise realization is the unitary V(s) = V_cl (U(s) (x) 1): the coin is
rotated by the reshuffling matrix U(s) = W(s*epsilon), then the walker moves
one site right on coin ``|+>`` and one site left on coin ``|->``.  Averaging
over s = +-1 gives the CPTP step map.

Three routes are provided:

* ``diagonal_step``: the alpha/beta recurrence, O(window) per step.
* ``cptp_step``: dense density operator, coin channel followed by the shift.
* ``apply_branch_unitary``: a single V(s), for states or pure vectors.

Shifts are applied cyclically on the window; any state with an empty
boundary site therefore evolves exactly as on the infinite line, and mass
reaching the boundary raises ``SupportOverflow``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .errors import SupportOverflow
from .linalg import coset_matrix
from .state import (
    DENSE_MAX_HALFWIDTH,
    CoinWalkerDensity,
    CoinWalkerVector,
    DiagonalWalkState,
    InitialCondition,
    init_density,
    init_diagonal,
)

Mode = Literal["diagonal", "dense"]

# site displacement for coin index 0 (|+>) and 1 (|->)
_SHIFT = (1, -1)


@dataclass(frozen=True)
class NoiseSpec:
    epsilon: float
    q_plus: float = 0.5

    def __post_init__(self):
        if not self.epsilon >= 0 or not np.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not 0.0 <= self.q_plus <= 1.0:
            raise ValueError(f"q_plus must lie in [0, 1], got {self.q_plus}")

    @property
    def q_minus(self) -> float:
        return 1.0 - self.q_plus

    @property
    def normalizer(self) -> float:
        return 1.0 / np.sqrt(1.0 + self.epsilon ** 2)

    @property
    def transition_weights(self) -> tuple[float, float]:
        """(keep, flip) coin probabilities N^2 and eps^2 N^2, summing to exactly 1."""
        e2 = self.epsilon ** 2
        if e2 <= 1.0:
            keep = 1.0 / (1.0 + e2)
            return keep, 1.0 - keep
        flip = e2 / (1.0 + e2)
        return 1.0 - flip, flip

    def branches(self) -> list[tuple[int, float]]:
        """Signs with nonzero probability, paired with that probability."""
        return [(s, q) for s, q in ((1, self.q_plus), (-1, self.q_minus)) if q > 0]


def reshuffling_matrix(spec: NoiseSpec, s: int) -> np.ndarray:
    """U(s) = N [[1, s eps], [-s eps, 1]]."""
    if s not in (1, -1):
        raise ValueError("s must be +1 or -1")
    return coset_matrix(s * spec.epsilon)


def _check_vector_headroom(mixed: np.ndarray) -> None:
    if mixed[0, -1] != 0 or mixed[1, 0] != 0:
        raise SupportOverflow("amplitude would be shifted out of the window")


def _shift_vector(mixed: np.ndarray) -> np.ndarray:
    out = np.empty_like(mixed)
    for c, d in enumerate(_SHIFT):
        out[c] = np.roll(mixed[c], d, axis=-1)
    return out


def _check_tensor_headroom(t: np.ndarray) -> None:
    # rows/cols that the shift would carry across the boundary
    if (
        np.any(t[0, -1] != 0)
        or np.any(t[1, 0] != 0)
        or np.any(t[:, :, 0, -1] != 0)
        or np.any(t[:, :, 1, 0] != 0)
    ):
        raise SupportOverflow("density support would be shifted out of the window")


def _shift_tensor(t: np.ndarray, sign: int = 1) -> np.ndarray:
    """Apply V_cl . V_cl^dagger (sign=+1) or V_cl^dagger . V_cl (sign=-1) to (c,k,c',l)."""
    out = np.empty_like(t)
    for c, dc in enumerate(_SHIFT):
        for cp, dcp in enumerate(_SHIFT):
            out[c, :, cp, :] = np.roll(t[c, :, cp, :], (sign * dc, sign * dcp), axis=(0, 1))
    return out


def _coin_conjugate(t: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("ab,bkcl,dc->akdl", u, t, u.conj(), optimize=True)


def apply_branch_unitary(state, spec: NoiseSpec, s: int):
    """Apply V(s) to a pure ``CoinWalkerVector`` or conjugate a ``CoinWalkerDensity``."""
    u = reshuffling_matrix(spec, s)
    if isinstance(state, CoinWalkerVector):
        mixed = u @ state.psi
        _check_vector_headroom(mixed)
        return CoinWalkerVector(state.window, _shift_vector(mixed), state.step + 1)
    if isinstance(state, CoinWalkerDensity):
        mixed = _coin_conjugate(state.tensor, u)
        _check_tensor_headroom(mixed)
        n = state.window.n_sites
        rho = _shift_tensor(mixed).reshape(2 * n, 2 * n)
        return CoinWalkerDensity(state.window, rho, state.step + 1)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def coin_channel(t: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Noise average of the coin rotation, sum_s q_s Ad(U(s) (x) 1), on a (c,k,c',l) tensor."""
    out = np.zeros_like(t)
    for s, q in spec.branches():
        out += q * _coin_conjugate(t, reshuffling_matrix(spec, s))
    return out


def cptp_step(state: CoinWalkerDensity, spec: NoiseSpec) -> CoinWalkerDensity:
    """rho -> sum_s q_s V(s) rho V(s)^dagger, evaluated as Ad V_cl applied after the coin channel."""
    mixed = coin_channel(state.tensor, spec)
    _check_tensor_headroom(mixed)
    n = state.window.n_sites
    rho = _shift_tensor(mixed).reshape(2 * n, 2 * n)
    return CoinWalkerDensity(state.window, rho, state.step + 1)


def _require_unbiased(spec: NoiseSpec) -> None:
    if spec.q_plus != 0.5:
        # for q_plus != 1/2 the map creates coin coherences that feed back into the
        # diagonal two steps later, so the alpha/beta recurrence no longer closes
        raise ValueError("diagonal recurrence requires q_plus = 1/2; use mode='dense'")


def _diagonal_into(alpha, beta, keep, flip, out_alpha, out_beta) -> None:
    if alpha[-1] != 0 or beta[-1] != 0 or alpha[0] != 0 or beta[0] != 0:
        raise SupportOverflow("probability would be shifted out of the window")
    np.multiply(alpha[:-1], keep, out=out_alpha[1:])
    out_alpha[1:] += flip * beta[:-1]
    out_alpha[0] = 0.0
    np.multiply(alpha[1:], flip, out=out_beta[:-1])
    out_beta[:-1] += keep * beta[1:]
    out_beta[-1] = 0.0


def diagonal_step(state: DiagonalWalkState, spec: NoiseSpec) -> DiagonalWalkState:
    """
    alpha'_k = N^2 (alpha_{k-1} + eps^2 beta_{k-1}),
    beta'_k  = N^2 (eps^2 alpha_{k+1} + beta_{k+1}).
    """
    _require_unbiased(spec)
    keep, flip = spec.transition_weights
    a = np.empty_like(state.alpha)
    b = np.empty_like(state.beta)
    _diagonal_into(state.alpha, state.beta, keep, flip, a, b)
    return DiagonalWalkState(state.window, a, b, state.step + 1)


def iterate_diagonal(state: DiagonalWalkState, spec: NoiseSpec, n_steps: int) -> Iterator[DiagonalWalkState]:
    """
    Yield the state after each of ``n_steps`` steps.

    Two buffers are reused; each yielded state is only valid until the next
    iteration.  Call ``.copy()`` to keep one.
    """
    _require_unbiased(spec)
    keep, flip = spec.transition_weights
    cur = state.copy()
    nxt = DiagonalWalkState(state.window, np.empty_like(cur.alpha), np.empty_like(cur.beta), cur.step)
    for _ in range(n_steps):
        _diagonal_into(cur.alpha, cur.beta, keep, flip, nxt.alpha, nxt.beta)
        nxt.step = cur.step + 1
        cur, nxt = nxt, cur
        yield cur


def dual_step_observable(obs: np.ndarray, window, spec: NoiseSpec) -> np.ndarray:
    """
    Heisenberg-picture step A -> sum_s q_s V(s)^dagger A V(s).

    ``obs`` is a (2n, 2n) operator in the coin-major layout of ``window``.
    The shift acts cyclically, so the result is exact on the line for
    expectation values in states with an empty boundary site.
    """
    n = window.n_sites
    t = np.asarray(obs, dtype=np.complex128).reshape(2, n, 2, n)
    shifted = _shift_tensor(t, sign=-1)
    out = np.zeros_like(shifted)
    for s, q in spec.branches():
        out += q * _coin_conjugate(shifted, reshuffling_matrix(spec, s).conj().T)
    return out.reshape(2 * n, 2 * n)


def traced_coin_step(rho_w: np.ndarray, spec: NoiseSpec, coin_weights=(0.5, 0.5)) -> np.ndarray:
    """
    Walker-only variant: the coin is reset to diag(coin_weights) every step and
    traced out afterwards, rho_w -> Tr_c Ad V_cl (E_c(rho_c) (x) rho_w).

    Unlike the coin-walker map it carries no coin memory between steps.
    Provided for comparison only.
    """
    n = rho_w.shape[0]
    rho_c = np.diag(np.asarray(coin_weights, dtype=np.complex128))
    t = np.einsum("ab,kl->akbl", rho_c, rho_w)
    mixed = coin_channel(t, spec)
    _check_tensor_headroom(mixed)
    out = _shift_tensor(mixed)
    return out[0, :, 0, :] + out[1, :, 1, :]


def position_operator(window, power: int = 1) -> np.ndarray:
    """1_c (x) L^p on the window, coin-major layout."""
    return np.kron(np.eye(2), np.diag(window.sites.astype(float) ** power))


def evolve(
    ic: InitialCondition,
    spec: NoiseSpec,
    n_steps: int,
    mode: Mode = "diagonal",
    capacity: int | None = None,
    snapshots: bool = False,
    max_dense: int = DENSE_MAX_HALFWIDTH,
):
    """
    Run ``n_steps`` steps from the product initial state.

    Returns the final state, or the list of all states (initial included)
    when ``snapshots`` is true.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    capacity = n_steps if capacity is None else capacity
    if mode == "diagonal":
        _require_unbiased(spec)
        state = init_diagonal(ic, capacity)
        history = [state.copy()] if snapshots else None
        for state in iterate_diagonal(state, spec, n_steps):
            if snapshots:
                history.append(state.copy())
        return history if snapshots else state.copy()
    if mode == "dense":
        state = init_density(ic, capacity, max_dense=max_dense)
        history = [state] if snapshots else None
        for _ in range(n_steps):
            state = cptp_step(state, spec)
            if snapshots:
                history.append(state)
        return history if snapshots else state
    raise ValueError(f"unknown mode {mode!r}")
