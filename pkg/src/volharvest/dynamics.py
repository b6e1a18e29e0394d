"""Counter-addressed correlated return draws.

Every draw is a pure function of ``(master_seed, path_index, step_index)``.
Each path owns a Philox-4x64 key ``master_seed + path_index * 2**64`` and
step ``j`` reads counter block ``j``: four 64-bit words, of which lane 0
drives the Bernoulli pair and lanes 0-1 the Gaussian pair (Box-Muller).
Paths can therefore be generated in any order, chunking or thread layout
and still produce the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytics import BinomialParams, GaussianParams, joint_bernoulli
from .errors import ParameterError

LANES = 4
_U64 = 1 << 64
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    path_index: int = 0
    step_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < _U64:
            raise ParameterError("master_seed must be an unsigned 64-bit integer")
        if self.path_index < 0 or self.step_index < 0:
            raise ParameterError("path and step indices must be non-negative")


@dataclass(frozen=True)
class ReturnPair:
    r1: float
    r2: float


def _key(master_seed: int, path_index: int) -> int:
    return int(master_seed) + int(path_index) * _U64


def raw_blocks(master_seed: int, path_index: int, steps: int, start: int = 0) -> np.ndarray:
    """Philox output for ``steps`` consecutive counters, shape (steps, 4), uint64."""
    bitgen = np.random.Philox(key=_key(master_seed, path_index), counter=start)
    return bitgen.random_raw(LANES * steps).reshape(steps, LANES)


def _to_unit(raw: np.ndarray) -> np.ndarray:
    # top 53 bits, centred in their cell: strictly inside (0, 1)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def uniforms(master_seed: int, paths, steps: int, start: int = 0) -> np.ndarray:
    """Open-interval uniforms, shape (len(paths), steps, 4)."""
    paths = np.atleast_1d(np.asarray(paths, dtype=np.int64))
    out = np.empty((len(paths), steps, LANES), dtype=np.float64)
    for row, path in enumerate(paths):
        out[row] = _to_unit(raw_blocks(master_seed, int(path), steps, start))
    return out


def _bernoulli_from_uniform(u: np.ndarray, p: float, rho: float):
    jb = joint_bernoulli(p, rho)
    c1 = jb.beta1
    c2 = jb.beta1 + 0.5 * jb.beta2
    c3 = jb.beta1 + jb.beta2
    b1 = u < c2
    b2 = (u < c1) | ((u >= c2) & (u < c3))
    return b1.astype(np.int8), b2.astype(np.int8)


def _gaussian_from_uniforms(u0: np.ndarray, u1: np.ndarray, rho: float):
    if not -1.0 <= rho <= 1.0:
        raise ParameterError(f"rho must lie in [-1, 1], got {rho}")
    radius = np.sqrt(-2.0 * np.log(u0))
    angle = _TWO_PI * u1
    z1 = radius * np.cos(angle)
    z2 = radius * np.sin(angle)
    x2 = rho * z1 + np.sqrt(1.0 - rho * rho) * z2
    return z1, x2


def bernoulli_pairs(p: float, rho: float, master_seed: int, paths, steps: int, start: int = 0):
    """Correlated Bernoulli(p) bits for each (path, step); two int8 arrays."""
    u = uniforms(master_seed, paths, steps, start)
    return _bernoulli_from_uniform(u[..., 0], p, rho)


def gaussian_pairs(rho: float, master_seed: int, paths, steps: int, start: int = 0):
    """Standard normals with correlation ``rho`` for each (path, step)."""
    u = uniforms(master_seed, paths, steps, start)
    return _gaussian_from_uniforms(u[..., 0], u[..., 1], rho)


def binomial_returns_from_uniforms(params: BinomialParams, u: np.ndarray):
    b1, b2 = _bernoulli_from_uniform(u[..., 0], params.p, params.rho)
    return params.mu + params.r * b1, params.mu + params.r * b2


def gaussian_returns_from_uniforms(params: GaussianParams, u: np.ndarray):
    x1, x2 = _gaussian_from_uniforms(u[..., 0], u[..., 1], params.rho)
    return params.mu1 + params.sigma1 * x1, params.mu2 + params.sigma2 * x2


def returns_from_uniforms(market, u: np.ndarray):
    if isinstance(market, BinomialParams):
        return binomial_returns_from_uniforms(market, u)
    if isinstance(market, GaussianParams):
        return gaussian_returns_from_uniforms(market, u)
    raise ParameterError(f"unsupported market type {type(market).__name__}")


# single-draw accessors, addressed by SeedSpec

def _unit_at(seed: SeedSpec) -> np.ndarray:
    return _to_unit(raw_blocks(seed.master_seed, seed.path_index, 1, seed.step_index))[0]


def sample_bernoulli_pair(p: float, rho: float, seed: SeedSpec) -> tuple[int, int]:
    b1, b2 = _bernoulli_from_uniform(_unit_at(seed)[0], p, rho)
    return int(b1), int(b2)


def sample_gaussian_pair(rho: float, seed: SeedSpec) -> tuple[float, float]:
    u = _unit_at(seed)
    x1, x2 = _gaussian_from_uniforms(u[0], u[1], rho)
    return float(x1), float(x2)


def binomial_return_pair(params: BinomialParams, seed: SeedSpec) -> ReturnPair:
    r1, r2 = binomial_returns_from_uniforms(params, _unit_at(seed))
    return ReturnPair(float(r1), float(r2))


def gaussian_return_pair(params: GaussianParams, seed: SeedSpec) -> ReturnPair:
    r1, r2 = gaussian_returns_from_uniforms(params, _unit_at(seed))
    return ReturnPair(float(r1), float(r2))
