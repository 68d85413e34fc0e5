"""Seeded random streams and the samplers used by the model.

Every stream is a PCG64 generator keyed by ``(seed, stream_id, purpose)``
through :class:`numpy.random.SeedSequence`. Both algorithms are fully
specified and numpy guarantees their output stability, so draw sequences
are reproducible across platforms. All samplers below are written on top
of 53-bit uniforms taken from the raw 64-bit output; none of numpy's
distribution methods are used, since those may change between releases.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "DegreeDistributionSpec",
    "RandomStream",
    "normalize",
    "sample_degree",
    "sample_degrees",
    "sample_poisson",
    "sample_uniform_int",
    "sample_uniform_real",
    "Purpose",
]

_BLOCK = 1024
_TO_UNIT = 2.0**-53
# Below this mean Poisson draws use sequential inversion; above, PTRS.
POISSON_INVERSION_LIMIT = 30.0


class Purpose:
    """Sub-stream identifiers used inside one run."""

    BUILD = 0
    INFECTION = 1
    PROGRESSION = 2
    DEMOGRAPHY = 3


class RandomStream:
    """A single-owner stream of uniform doubles in [0, 1).

    Parameters
    ----------
    seed : int
        Master seed (any non-negative integer, normally 64-bit).
    stream_id : int
        Run index.
    purpose : int
        Sub-stream index within the run, see :class:`Purpose`.
    """

    def __init__(self, seed: int, stream_id: int = 0, purpose: int = 0):
        if seed < 0 or stream_id < 0 or purpose < 0:
            raise ValueError("seed, stream_id and purpose must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.purpose = int(purpose)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, self.purpose))
        self._bitgen = np.random.PCG64(seq)
        self._block_state: dict[str, Any] | None = None
        self._array = np.empty(0)
        self._values: list[float] = []
        self._pos = 0

    def _refill(self) -> None:
        self._block_state = self._bitgen.state
        raw = self._bitgen.random_raw(_BLOCK)
        self._array = (raw >> np.uint64(11)).astype(np.float64) * _TO_UNIT
        self._values = self._array.tolist()
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._values):
            self._refill()
        u = self._values[self._pos]
        self._pos += 1
        return u

    def randoms(self, n: int) -> np.ndarray:
        """``n`` uniforms, identical to ``n`` successive :meth:`random` calls."""
        out = np.empty(n)
        filled = 0
        while filled < n:
            if self._pos >= len(self._values):
                self._refill()
            take = min(n - filled, len(self._values) - self._pos)
            out[filled:filled + take] = self._array[self._pos:self._pos + take]
            self._pos += take
            filled += take
        return out

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of ``range(n)`` (argsort of uniforms)."""
        return np.argsort(self.randoms(n), kind="stable")

    def getstate(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "stream_id": self.stream_id,
            "purpose": self.purpose,
            "block_state": self._block_state,
            "pos": self._pos,
        }

    @classmethod
    def fromstate(cls, state: dict[str, Any]) -> "RandomStream":
        stream = cls(state["seed"], state["stream_id"], state["purpose"])
        if state["block_state"] is not None:
            stream._bitgen.state = state["block_state"]
            stream._refill()
            stream._pos = int(state["pos"])
        return stream

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, purpose={self.purpose})"


@dataclass(frozen=True)
class DegreeDistributionSpec:
    """Truncated power law with a separate mass at zero.

    ``p_k = norm_c * k**-gamma`` for ``1 <= k <= k_max`` and ``p_0 = p_zero``.
    The cumulative table used for inverse-CDF sampling is built once here.
    """

    gamma: float
    k_max: int
    p_zero: float
    norm_c: float
    _cdf: tuple[float, ...] = field(repr=False, compare=False, default=())

    def probabilities(self) -> np.ndarray:
        k = np.arange(1, self.k_max + 1, dtype=float)
        return np.concatenate(([self.p_zero], self.norm_c * k ** (-self.gamma)))

    def mean_degree(self) -> float:
        k = np.arange(1, self.k_max + 1, dtype=float)
        return float(self.norm_c * np.sum(k ** (1.0 - self.gamma)))

    @property
    def cdf(self) -> tuple[float, ...]:
        return self._cdf


def normalize(gamma: float, k_max: int, p_zero: float) -> DegreeDistributionSpec:
    """Build a :class:`DegreeDistributionSpec`, solving for the constant C."""
    if not gamma > 1:
        raise ValueError(f"gamma must be > 1, got {gamma}")
    if int(k_max) != k_max or k_max < 1:
        raise ValueError(f"k_max must be an integer >= 1, got {k_max}")
    if not 0.0 <= p_zero <= 1.0:
        raise ValueError(f"p_zero must lie in [0, 1], got {p_zero}")
    k_max = int(k_max)
    weights = np.arange(1, k_max + 1, dtype=float) ** (-gamma)
    norm_c = (1.0 - p_zero) / float(weights.sum())
    probs = np.concatenate(([p_zero], norm_c * weights))
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return DegreeDistributionSpec(float(gamma), k_max, float(p_zero), norm_c, tuple(cdf.tolist()))


def sample_degree(spec: DegreeDistributionSpec, stream: RandomStream) -> int:
    # bisect_right: u == cdf[k] belongs to k + 1, so zero-mass degrees are never drawn
    k = bisect.bisect_right(spec.cdf, stream.random())
    return min(k, spec.k_max)


def sample_degrees(spec: DegreeDistributionSpec, stream: RandomStream, n: int) -> np.ndarray:
    """Vectorised :func:`sample_degree`, consuming the same uniforms in order."""
    ks = np.searchsorted(np.asarray(spec.cdf), stream.randoms(n), side="right")
    return np.minimum(ks, spec.k_max)


def sample_poisson(mean: float, stream: RandomStream) -> int:
    """Poisson draw: inversion for small means, PTRS (Hormann 1993) otherwise."""
    if mean < 0 or math.isnan(mean):
        raise ValueError(f"Poisson mean must be >= 0, got {mean}")
    if mean == 0:
        return 0
    if mean < POISSON_INVERSION_LIMIT:
        return _poisson_inversion(mean, stream)
    return _poisson_ptrs(mean, stream)


def _poisson_inversion(mean: float, stream: RandomStream) -> int:
    u = stream.random()
    k = 0
    p = math.exp(-mean)
    cum = p
    while u >= cum:
        k += 1
        p *= mean / k
        cum += p
        if p == 0.0 and k > mean:
            # u landed in the rounding gap at the far tail
            break
    return k


def _poisson_ptrs(mean: float, stream: RandomStream) -> int:
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2)
    while True:
        u = stream.random() - 0.5
        v = stream.random()
        us = 0.5 - abs(u)
        k = math.floor((2 * a / us + b) * u + mean + 0.43)
        if us >= 0.07 and v <= v_r:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= -mean + k * loglam - math.lgamma(k + 1)):
            return int(k)


def sample_uniform_int(a: int, b: int, stream: RandomStream) -> int:
    """Discrete uniform on the closed range [a, b]."""
    if a > b:
        raise ValueError(f"empty range [{a}, {b}]")
    return a + min(int(stream.random() * (b - a + 1)), b - a)


def sample_uniform_real(a: float, b: float, stream: RandomStream) -> float:
    """Continuous uniform on [a, b)."""
    if a > b:
        raise ValueError(f"empty range [{a}, {b})")
    return a + (b - a) * stream.random()
