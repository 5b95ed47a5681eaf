"""
Coin-walker state containers.

Two representations of the same physical state are kept:

* ``DiagonalWalkState`` holds only the coin-resolved site probabilities
  alpha_k = <P_+ (x) P_k> and beta_k = <P_- (x) P_k>.  It is exact for the
  unbiased walk started from a diagonal product state, and costs O(window).
* ``CoinWalkerDensity`` holds the full density operator on coin (x) window.

Dense arrays use a coin-major, site-minor layout: flat index
``c * n_sites + (k - center + halfwidth)`` with coin 0 = ``|+>``, 1 = ``|->``.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import CapacityError, NegativeProbability

NEG_TOL = 1e-14
DEFAULT_MAX_HALFWIDTH = 10_000_000
DENSE_MAX_HALFWIDTH = 64


def max_halfwidth() -> int:
    """Window cap, overridable through the ``QWALK_MAX_WINDOW`` environment variable."""
    return int(os.environ.get("QWALK_MAX_WINDOW", DEFAULT_MAX_HALFWIDTH))


@dataclass(frozen=True)
class LatticeWindow:
    center: int
    halfwidth: int

    def __post_init__(self):
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be nonnegative")

    @property
    def n_sites(self) -> int:
        return 2 * self.halfwidth + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.center - self.halfwidth, self.center + self.halfwidth + 1)

    def index(self, k: int) -> int:
        i = k - self.center + self.halfwidth
        if not 0 <= i < self.n_sites:
            raise IndexError(f"site {k} outside window {self}")
        return i


@dataclass(frozen=True)
class InitialCondition:
    """Product state diag(cos^2 gamma, sin^2 gamma) (x) |origin><origin|."""

    gamma: float = np.pi / 4
    origin: int = 0

    @property
    def coin_weights(self) -> tuple[float, float]:
        return float(np.cos(self.gamma) ** 2), float(np.sin(self.gamma) ** 2)


@dataclass
class DiagonalWalkState:
    window: LatticeWindow
    alpha: np.ndarray
    beta: np.ndarray
    step: int = 0

    def validate(self, tol: float = 1e-12) -> None:
        lo = min(self.alpha.min(), self.beta.min())
        if lo < -NEG_TOL:
            raise NegativeProbability(f"probability {lo:.3e} below -{NEG_TOL}")
        total = self.total_probability()
        if abs(total - 1.0) > tol:
            raise ValueError(f"state not normalized: sum = {total!r}")

    def total_probability(self) -> float:
        return float(np.sum(self.alpha) + np.sum(self.beta))

    def copy(self) -> "DiagonalWalkState":
        return DiagonalWalkState(self.window, self.alpha.copy(), self.beta.copy(), self.step)

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "window": {"center": self.window.center, "halfwidth": self.window.halfwidth},
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiagonalWalkState":
        w = data["window"]
        return cls(
            window=LatticeWindow(int(w["center"]), int(w["halfwidth"])),
            alpha=np.asarray(data["alpha"], dtype=float),
            beta=np.asarray(data["beta"], dtype=float),
            step=int(data["step"]),
        )


@dataclass
class CoinWalkerDensity:
    window: LatticeWindow
    rho: np.ndarray  # (2 * n_sites, 2 * n_sites), coin-major
    step: int = 0

    @property
    def tensor(self) -> np.ndarray:
        """View with axes (coin, site, coin', site')."""
        n = self.window.n_sites
        return self.rho.reshape(2, n, 2, n)

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho.conj().T, self.rho)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.rho).min())

    def validate(self, tol: float = 1e-12, check_psd: bool = False) -> None:
        if self.hermiticity_error() > tol:
            raise ValueError("density is not Hermitian")
        if abs(self.trace() - 1.0) > tol:
            raise ValueError(f"density trace {self.trace()!r} != 1")
        if check_psd and self.min_eigenvalue() < -1e-10:
            raise ValueError("density is not positive semidefinite")

    def diagonal_state(self) -> DiagonalWalkState:
        """Coin-resolved site probabilities read off the dense diagonal."""
        n = self.window.n_sites
        d = np.real(np.diagonal(self.rho)).copy()
        return DiagonalWalkState(self.window, d[:n], d[n:], self.step)


@dataclass
class CoinWalkerVector:
    """Pure coin-walker state, amplitudes with axes (coin, site)."""

    window: LatticeWindow
    psi: np.ndarray
    step: int = 0

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2)))

    def density(self) -> CoinWalkerDensity:
        v = self.psi.reshape(-1)
        return CoinWalkerDensity(self.window, np.outer(v, v.conj()), self.step)


WalkState = Union[DiagonalWalkState, CoinWalkerDensity, CoinWalkerVector]


def _checked_window(ic: InitialCondition, capacity: int, cap: int) -> LatticeWindow:
    if capacity < 0:
        raise ValueError("capacity must be nonnegative")
    if capacity > cap:
        raise CapacityError(f"window halfwidth {capacity} exceeds cap {cap}")
    return LatticeWindow(ic.origin, capacity)


def init_diagonal(ic: InitialCondition, capacity: int) -> DiagonalWalkState:
    """Point source at ``ic.origin`` in a window wide enough for ``capacity`` steps."""
    window = _checked_window(ic, capacity, max_halfwidth())
    alpha = np.zeros(window.n_sites)
    beta = np.zeros(window.n_sites)
    a, b = ic.coin_weights
    alpha[window.halfwidth] = a
    beta[window.halfwidth] = b
    return DiagonalWalkState(window, alpha, beta, 0)


def init_density(
    ic: InitialCondition, capacity: int, max_dense: int = DENSE_MAX_HALFWIDTH
) -> CoinWalkerDensity:
    window = _checked_window(ic, capacity, min(max_dense, max_halfwidth()))
    n = window.n_sites
    rho = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    a, b = ic.coin_weights
    i = window.halfwidth
    rho[i, i] = a
    rho[n + i, n + i] = b
    return CoinWalkerDensity(window, rho, 0)


def partial_trace_coin(state: CoinWalkerDensity) -> np.ndarray:
    """Walker density Tr_c rho, indexed (k, l) over the window."""
    t = state.tensor
    return t[0, :, 0, :] + t[1, :, 1, :]


def position_distribution(state: WalkState) -> np.ndarray:
    """P(k) over the window sites."""
    if isinstance(state, DiagonalWalkState):
        return state.alpha + state.beta
    if isinstance(state, CoinWalkerDensity):
        return np.real(np.diagonal(partial_trace_coin(state))).copy()
    if isinstance(state, CoinWalkerVector):
        return np.sum(np.abs(state.psi) ** 2, axis=0)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_state_csv(state: DiagonalWalkState, path, metadata: dict | None = None) -> None:
    """Columns k, alpha, beta, total; ``# key: value`` metadata lines first."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}: {json.dumps(value)}\n")
        writer = csv.writer(fh)
        writer.writerow(["k", "alpha", "beta", "total"])
        for k, a, b in zip(state.window.sites, state.alpha, state.beta):
            writer.writerow([int(k), _fmt(a), _fmt(b), _fmt(a + b)])


def read_state_csv(path) -> tuple[dict, list[dict]]:
    """Return (metadata, rows) from a file written by ``write_state_csv``."""
    metadata = {}
    lines = []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                metadata[key] = json.loads(value)
            else:
                lines.append(line)
    rows = [
        {"k": int(r["k"]), **{c: float(r[c]) for c in ("alpha", "beta", "total")}}
        for r in csv.DictReader(lines)
    ]
    return metadata, rows


def write_state_json(state: DiagonalWalkState, path, metadata: dict | None = None) -> None:
    payload = state.to_dict()
    if metadata:
        payload["metadata"] = metadata
    Path(path).write_text(json.dumps(payload, indent=1))


def read_state_json(path) -> DiagonalWalkState:
    return DiagonalWalkState.from_dict(json.loads(Path(path).read_text()))
