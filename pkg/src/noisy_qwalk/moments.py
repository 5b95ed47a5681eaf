"""
Position moments of the walk: numeric sums, closed forms, and the
ballistic-to-diffusive crossover scan.

Conventions
-----------
A^(p) = sum_k alpha_k k^p, B^(p) = sum_k beta_k k^p, S = A + B, D = A - B.

The decay ratio of the coin imbalance is r = (1 - eps^2) / (1 + eps^2); summing
the alpha/beta recurrence over k gives D^(0)_{N+1} = r D^(0)_N.  Every closed
form below assumes the unbiased noise q_plus = 1/2.

The explicit eps-form of S^(2) carries a plus sign on its last term.  With a
minus sign (``second_moment_printed``) it gives S^(2)_1 = (2 eps^2 - 1)/eps^4
instead of 1 and a nonzero S^(2)_0; the plus-sign form agrees with the
r-form identically.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ClosedFormInapplicable
from .evolution import NoiseSpec, iterate_diagonal
from .state import DiagonalWalkState, InitialCondition, init_diagonal

SIGN_NOTE = (
    "explicit eps-form of S2 uses +(1-eps^2)^(N+1)/(1+eps^2)^(N-1); the minus-sign "
    "variant fails S2(N=1)=1 and is available only as second_moment_printed"
)

BALLISTIC_BELOW = 0.1
DIFFUSIVE_ABOVE = 10.0
SLOPE_THRESHOLD = 1.5


@dataclass(frozen=True)
class MomentRecord:
    step: int
    order: int
    A: float
    B: float

    @property
    def S(self) -> float:
        return self.A + self.B

    @property
    def D(self) -> float:
        return self.A - self.B


def numeric_moments(state: DiagonalWalkState, p: int) -> MomentRecord:
    """Exact finite sums over the window; the support is finite so nothing is truncated."""
    if p < 0:
        raise ValueError("moment order must be nonnegative")
    kp = state.window.sites.astype(float) ** p
    return MomentRecord(state.step, p, float(state.alpha @ kp), float(state.beta @ kp))


def ratio_r(epsilon: float) -> float:
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    e2 = epsilon * epsilon
    return (1.0 - e2) / (1.0 + e2)


def _one_minus_r(epsilon: float) -> float:
    e2 = epsilon * epsilon
    return 2.0 * e2 / (1.0 + e2)


def _r_powers(epsilon: float, n: int) -> tuple[float, float]:
    """(r^N, 1 - r^N) without cancellation for small eps."""
    if n == 0:
        return 1.0, 0.0
    if 0 < epsilon < 1:
        log_r = math.log1p(-_one_minus_r(epsilon))
        return math.exp(n * log_r), -math.expm1(n * log_r)
    rn = ratio_r(epsilon) ** n
    return rn, 1.0 - rn


def _check_unbiased(spec: NoiseSpec) -> None:
    if spec.q_plus != 0.5:
        raise ClosedFormInapplicable(f"closed forms need q_plus = 1/2, got {spec.q_plus}")


def closed_form_zeroth(n: int, spec: NoiseSpec, gamma: float) -> tuple[float, float]:
    """(A^(0)_N, B^(0)_N) = ((1 + r^N cos 2g)/2, (1 - r^N cos 2g)/2)."""
    _check_unbiased(spec)
    rn, _ = _r_powers(spec.epsilon, n)
    c = math.cos(2.0 * gamma)
    return 0.5 * (1.0 + rn * c), 0.5 * (1.0 - rn * c)


def closed_form_first(n: int, spec: NoiseSpec, gamma: float) -> tuple[float, float]:
    """(D^(1)_N, S^(1)_N); at eps = 0 the r -> 1 limits (N, N cos 2g)."""
    _check_unbiased(spec)
    c = math.cos(2.0 * gamma)
    if spec.epsilon == 0:
        return float(n), n * c
    r = ratio_r(spec.epsilon)
    _, one_minus_rn = _r_powers(spec.epsilon, n)
    d1 = one_minus_rn / _one_minus_r(spec.epsilon)
    return d1, r * c * d1


def closed_form_second(n: int, spec: NoiseSpec, gamma: float) -> tuple[float, float]:
    """
    (D^(2)_N, S^(2)_N) in the r-parametrized form.

    S2 = N(1+r)/(1-r) - 2r(1-r^N)/(1-r)^2
    D2 = 2r cos2g (1-r^N)/(1-r)^2 - N r^N cos2g (1+r)/(1-r)

    At eps = 0 the limits are S2 = N^2, D2 = N^2 cos 2g.
    """
    _check_unbiased(spec)
    c = math.cos(2.0 * gamma)
    if spec.epsilon == 0:
        return n * n * c, float(n * n)
    r = ratio_r(spec.epsilon)
    omr = _one_minus_r(spec.epsilon)
    rn, one_minus_rn = _r_powers(spec.epsilon, n)
    s2 = n * (1.0 + r) / omr - 2.0 * r * one_minus_rn / omr ** 2
    d2 = 2.0 * r * c * one_minus_rn / omr ** 2 - n * rn * c * (1.0 + r) / omr
    return d2, s2


def _decay_term(n: int, epsilon: float) -> float:
    """(1-eps^2)^(N+1) / (1+eps^2)^(N-1) - 1, accurate for small eps."""
    e2 = epsilon * epsilon
    if epsilon < 1:
        return math.expm1((n + 1) * math.log1p(-e2) - (n - 1) * math.log1p(e2))
    # same quantity as r^(N+1) (1+eps^2)^2 - 1; bounded since |r| <= 1
    return ratio_r(epsilon) ** (n + 1) * (1.0 + e2) ** 2 - 1.0


def second_moment_explicit(n: int, epsilon: float) -> float:
    """S2 = (2N eps^2 - 1 + eps^4 + (1-eps^2)^(N+1)/(1+eps^2)^(N-1)) / (2 eps^4)."""
    if epsilon <= 0:
        raise ValueError("explicit eps-form is singular at eps = 0; use closed_form_second")
    e2 = epsilon * epsilon
    bracket = 2.0 * n * e2 + e2 * e2 + _decay_term(n, epsilon)
    return bracket / (2.0 * e2 * e2)


def second_moment_printed(n: int, epsilon: float) -> float:
    """The same expression with a minus sign on the last term (not a valid moment)."""
    e2 = epsilon * epsilon
    x = ratio_r(epsilon) ** (n + 1) * (1.0 + e2) ** 2
    return (2.0 * n * e2 - 1.0 + e2 * e2 - x) / (2.0 * e2 * e2)


class Regime(str, enum.Enum):
    BALLISTIC = "Ballistic"
    CROSSOVER = "Crossover"
    DIFFUSIVE = "Diffusive"


def regime_classify(n: int, epsilon: float) -> Regime:
    """Label by N eps^2: < 0.1 ballistic, > 10 diffusive, crossover in between."""
    x = n * epsilon * epsilon
    if x < BALLISTIC_BELOW:
        return Regime.BALLISTIC
    if x > DIFFUSIVE_ABOVE:
        return Regime.DIFFUSIVE
    return Regime.CROSSOVER


@dataclass
class CrossoverScan:
    epsilon: float
    gamma: float
    q_plus: float
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    regimes: list[Regime] = field(default_factory=list)
    n_star: int | None = None

    @property
    def r(self) -> float:
        return ratio_r(self.epsilon)

    def metadata(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "q_plus": self.q_plus,
            "r": self.r,
            "n_star": self.n_star,
            "slope_threshold": SLOPE_THRESHOLD,
            "regime_thresholds": [BALLISTIC_BELOW, DIFFUSIVE_ABOVE],
            "sign_note": SIGN_NOTE,
        }


SCAN_COLUMNS = (
    "N", "S0", "D0", "S1", "D1", "S2", "D2", "S2_closed_r", "S2_closed_eps", "slope", "regime",
)


def log_slope(n: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """d ln S2 / d ln N by central differences (one-sided at the ends)."""
    if len(n) < 2:
        return np.full(len(n), np.nan)
    return np.gradient(np.log(s2), np.log(n.astype(float)))


def crossover_scan(spec: NoiseSpec, gamma: float, n_max: int) -> CrossoverScan:
    """Evolve once to ``n_max`` and tabulate moments, closed forms and slopes for N = 1..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    state = init_diagonal(InitialCondition(gamma), n_max)
    k = state.window.sites.astype(float)
    k2 = k * k
    rows = np.empty((n_max, 6))
    for i, st in enumerate(iterate_diagonal(state, spec, n_max)):
        a0, b0 = st.alpha.sum(), st.beta.sum()
        a1, b1 = st.alpha @ k, st.beta @ k
        a2, b2 = st.alpha @ k2, st.beta @ k2
        rows[i] = (a0 + b0, a0 - b0, a1 + b1, a1 - b1, a2 + b2, a2 - b2)
    n = np.arange(1, n_max + 1)
    scan = CrossoverScan(spec.epsilon, gamma, spec.q_plus)
    cols = scan.columns
    cols["N"] = n
    for j, name in enumerate(("S0", "D0", "S1", "D1", "S2", "D2")):
        cols[name] = rows[:, j]
    cols["S2_closed_r"] = np.array([closed_form_second(int(m), spec, gamma)[1] for m in n])
    if spec.epsilon > 0:
        cols["S2_closed_eps"] = np.array([second_moment_explicit(int(m), spec.epsilon) for m in n])
    else:
        cols["S2_closed_eps"] = np.full(n_max, np.nan)
    cols["slope"] = log_slope(n, cols["S2"])
    scan.regimes = [regime_classify(int(m), spec.epsilon) for m in n]
    below = np.nonzero(cols["slope"] < SLOPE_THRESHOLD)[0]
    scan.n_star = int(n[below[0]]) if len(below) else None
    return scan


def write_scan_csv(scan: CrossoverScan, dest, metadata: dict | None = None) -> None:
    """Write the scan to a path or an open text stream, metadata as ``# key: value`` lines."""
    if hasattr(dest, "write"):
        _write_scan(scan, dest, metadata)
    else:
        with Path(dest).open("w", newline="") as fh:
            _write_scan(scan, fh, metadata)


def _write_scan(scan: CrossoverScan, fh, metadata: dict | None) -> None:
    meta = {**scan.metadata(), **(metadata or {})}
    for key, value in meta.items():
        fh.write(f"# {key}: {json.dumps(value)}\n")
    writer = csv.writer(fh)
    writer.writerow(SCAN_COLUMNS)
    cols = scan.columns
    for i in range(len(cols["N"])):
        row = [int(cols["N"][i])]
        row += [repr(float(cols[c][i])) for c in SCAN_COLUMNS[1:-1]]
        row.append(scan.regimes[i].value)
        writer.writerow(row)
