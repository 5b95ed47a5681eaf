"""
Monte Carlo over noise realizations.

Each trajectory draws its initial coin basis state from diag(cos^2 g, sin^2 g)
and a sign sequence s_1..s_N, then evolves a pure state by V(s_t).  Because
the initial coin density is diagonal, sampling its basis is an exact
unravelling, and the ensemble average of |psi><psi| is the CPTP evolution.

Random streams
--------------
Trajectory ``i`` under master seed ``S`` uses
``numpy.random.Generator(PCG64(SeedSequence(S, spawn_key=(i,))))``.
Its first uniform picks the coin (``u < cos^2 g`` -> ``|+>``), the next N
uniforms pick the signs (``u < q_plus`` -> +1).  This mapping is part of the
report contract and is echoed in its metadata.

Amplitudes stay real throughout: U(s) is real and the coin starts in a basis
state.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import SupportOverflow
from .evolution import NoiseSpec, cptp_step, evolve
from .moments import closed_form_second
from .state import (
    CoinWalkerVector,
    DiagonalWalkState,
    InitialCondition,
    LatticeWindow,
    init_density,
    position_distribution,
)

RNG_CONTRACT = (
    "numpy PCG64 seeded by SeedSequence(master_seed, spawn_key=(trajectory_index,)); "
    "u[0] < cos^2(gamma) -> coin |+>; u[1+t] < q_plus -> s_t = +1"
)
CHUNK = 4096


@dataclass(frozen=True)
class TrajectorySpec:
    n_traj: int
    seed: int
    steps: int
    noise: NoiseSpec
    ic: InitialCondition = InitialCondition()

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _draws(spec: TrajectorySpec, index: int) -> tuple[int, np.ndarray]:
    if not 0 <= index < spec.n_traj:
        raise IndexError(f"trajectory index {index} outside [0, {spec.n_traj})")
    u = trajectory_rng(spec.seed, index).random(spec.steps + 1)
    coin = 0 if u[0] < spec.ic.coin_weights[0] else 1
    signs = np.where(u[1:] < spec.noise.q_plus, 1, -1).astype(np.int8)
    return coin, signs


def sample_signs(spec: TrajectorySpec, index: int) -> np.ndarray:
    """The +-1 noise sequence of trajectory ``index``."""
    return _draws(spec, index)[1]


def sample_coin(spec: TrajectorySpec, index: int) -> int:
    """Initial coin basis index (0 = |+>, 1 = |->) of trajectory ``index``."""
    return _draws(spec, index)[0]


def _evolve_batch(coins: np.ndarray, signs: np.ndarray, epsilon: float, halfwidth: int) -> np.ndarray:
    """
    Evolve a batch of basis-state trajectories.

    ``coins`` has shape (B,), ``signs`` shape (B, N).  Returns real amplitudes
    with shape (B, 2, 2*halfwidth + 1).
    """
    b, n_steps = signs.shape
    n_sites = 2 * halfwidth + 1
    psi = np.zeros((b, 2, n_sites))
    psi[np.arange(b), coins, halfwidth] = 1.0
    norm = 1.0 / np.sqrt(1.0 + epsilon * epsilon)
    for t in range(n_steps):
        se = (signs[:, t] * epsilon)[:, None]
        up = norm * (psi[:, 0] + se * psi[:, 1])
        down = norm * (psi[:, 1] - se * psi[:, 0])
        if np.any(up[:, -1] != 0) or np.any(down[:, 0] != 0):
            raise SupportOverflow("trajectory amplitude would leave the window")
        psi[:, 0, 1:] = up[:, :-1]
        psi[:, 0, 0] = 0.0
        psi[:, 1, :-1] = down[:, 1:]
        psi[:, 1, -1] = 0.0
    return psi


def trajectory_evolve(
    signs, spec: TrajectorySpec, coin: int = 0, halfwidth: int | None = None
) -> CoinWalkerVector:
    """Apply V(s_1), ..., V(s_N) to |coin> (x) |origin>."""
    signs = np.asarray(signs)
    halfwidth = len(signs) if halfwidth is None else halfwidth
    psi = _evolve_batch(np.array([coin]), signs[None, :], spec.noise.epsilon, halfwidth)[0]
    window = LatticeWindow(spec.ic.origin, halfwidth)
    return CoinWalkerVector(window, psi.astype(np.complex128), len(signs))


@dataclass
class MomentEstimate:
    estimate: float
    stderr: float
    exact: float


@dataclass
class TrajectoryEnsembleReport:
    config: dict
    seed: int
    n_traj: int
    moments: dict[int, MomentEstimate]
    sites: np.ndarray
    distribution: np.ndarray
    exact_distribution: np.ndarray
    tv_distance: float
    max_abs_deviation: float
    rng_contract: str = RNG_CONTRACT
    extra: dict = field(default_factory=dict)

    def to_dict(self, distribution_csv_path: str | None = None) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "n_traj": self.n_traj,
            "moments": {str(p): asdict(m) for p, m in self.moments.items()},
            "distribution_csv_path": distribution_csv_path,
            "tv_distance": self.tv_distance,
            "max_abs_deviation": self.max_abs_deviation,
            "rng_contract": self.rng_contract,
            **self.extra,
        }

    def write(self, json_path, csv_path=None, metadata: dict | None = None) -> None:
        if csv_path is not None:
            with Path(csv_path).open("w") as fh:
                for key, value in (metadata or {}).items():
                    fh.write(f"# {key}: {json.dumps(value)}\n")
                fh.write("k,estimate,exact\n")
                for k, p, e in zip(self.sites, self.distribution, self.exact_distribution):
                    fh.write(f"{int(k)},{float(p)!r},{float(e)!r}\n")
        payload = self.to_dict(str(csv_path) if csv_path is not None else None)
        if metadata:
            payload["metadata"] = metadata
        Path(json_path).write_text(json.dumps(payload, indent=1))


def _chunk_stats(spec: TrajectorySpec, start: int, stop: int):
    draws = [_draws(spec, i) for i in range(start, stop)]
    coins = np.array([c for c, _ in draws])
    signs = np.array([s for _, s in draws]).reshape(stop - start, spec.steps)
    psi = _evolve_batch(coins, signs, spec.noise.epsilon, spec.steps)
    prob = np.sum(psi * psi, axis=1)  # (B, sites)
    k = np.arange(-spec.steps, spec.steps + 1, dtype=float) + spec.ic.origin
    per_traj = np.stack([prob.sum(axis=1), prob @ k, prob @ (k * k)], axis=1)
    return per_traj, prob.sum(axis=0)


def exact_reference(spec: TrajectorySpec) -> tuple[np.ndarray, dict[int, float]]:
    """CPTP position distribution and moments S^(0..2) over the trajectory window."""
    if spec.noise.q_plus == 0.5:
        p = position_distribution(evolve(spec.ic, spec.noise, spec.steps))
    else:
        state = init_density(spec.ic, spec.steps, max_dense=max(spec.steps, 64))
        for _ in range(spec.steps):
            state = cptp_step(state, spec.noise)
        p = position_distribution(state)
    k = np.arange(-spec.steps, spec.steps + 1, dtype=float) + spec.ic.origin
    moments = {q: float(p @ k ** q) for q in range(3)}
    if spec.noise.q_plus == 0.5:
        moments[2] = closed_form_second(spec.steps, spec.noise, spec.ic.gamma)[1]
    return p, moments


def ensemble_average(
    spec: TrajectorySpec, parallel: bool = False, chunk: int = CHUNK
) -> TrajectoryEnsembleReport:
    """
    Monte Carlo estimate of the averaged state and its moments.

    Chunks are reduced in trajectory-index order, so the report is
    bit-reproducible for fixed (seed, n_traj, config, chunk) whether or not
    ``parallel`` is set.
    """
    bounds = [(i, min(i + chunk, spec.n_traj)) for i in range(0, spec.n_traj, chunk)]
    if parallel:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(lambda b: _chunk_stats(spec, *b), bounds))
    else:
        results = [_chunk_stats(spec, *b) for b in bounds]
    per_traj = np.concatenate([r[0] for r in results])
    dist = np.zeros(2 * spec.steps + 1)
    for _, d in results:
        dist += d
    m = spec.n_traj
    dist /= m
    exact_p, exact_m = exact_reference(spec)
    estimates = per_traj.sum(axis=0) / m
    if m > 1:
        stderr = per_traj.std(axis=0, ddof=1) / np.sqrt(m)
    else:
        stderr = np.full(3, np.nan)
    moments = {
        p: MomentEstimate(float(estimates[p]), float(stderr[p]), exact_m[p]) for p in range(3)
    }
    sites = np.arange(-spec.steps, spec.steps + 1) + spec.ic.origin
    return TrajectoryEnsembleReport(
        config={
            "epsilon": spec.noise.epsilon,
            "q_plus": spec.noise.q_plus,
            "gamma": spec.ic.gamma,
            "origin": spec.ic.origin,
            "steps": spec.steps,
        },
        seed=spec.seed,
        n_traj=m,
        moments=moments,
        sites=sites,
        distribution=dist,
        exact_distribution=exact_p,
        tv_distance=float(0.5 * np.abs(dist - exact_p).sum()),
        max_abs_deviation=float(np.abs(dist - exact_p).max()),
    )


def exhaustive_average(spec: TrajectorySpec, max_steps: int = 12) -> DiagonalWalkState:
    """
    Exact average over all 2^N sign sequences and both initial coin states.

    Sequence weight is q_+^(#plus) q_-^(#minus) times the coin weight.
    """
    n = spec.steps
    if n > max_steps:
        raise ValueError(f"exhaustive enumeration limited to N <= {max_steps}")
    q_plus, q_minus = spec.noise.q_plus, spec.noise.q_minus
    coin_w = spec.ic.coin_weights
    window = LatticeWindow(spec.ic.origin, n)
    alpha = np.zeros(window.n_sites)
    beta = np.zeros(window.n_sites)
    seqs = np.array(list(itertools.product((1, -1), repeat=n)), dtype=np.int8).reshape(2 ** n, n)
    n_plus = (seqs == 1).sum(axis=1)
    seq_w = q_plus ** n_plus * q_minus ** (n - n_plus)
    for coin in (0, 1):
        if coin_w[coin] == 0:
            continue
        keep = seq_w > 0
        psi = _evolve_batch(np.full(keep.sum(), coin), seqs[keep], spec.noise.epsilon, n)
        w = coin_w[coin] * seq_w[keep]
        alpha += w @ (psi[:, 0] ** 2)
        beta += w @ (psi[:, 1] ** 2)
    return DiagonalWalkState(window, alpha, beta, n)
