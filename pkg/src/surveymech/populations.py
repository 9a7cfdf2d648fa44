"""Synthetic populations of (cost, datum) pairs for simulation runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["Population", "gen_population"]


@dataclass(frozen=True)
class Population:
    """Paired costs and data with the cost cap and a generator tag."""

    costs: np.ndarray
    data: np.ndarray
    cap: float
    correlation_tag: str = ""

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        data = np.asarray(self.data, dtype=float)
        if costs.ndim != 1 or costs.size == 0 or costs.shape != data.shape:
            raise ConfigError("costs and data must be non-empty 1-D arrays of equal length")
        cap = float(self.cap)
        if np.any(costs < 0) or np.any(costs > cap):
            raise ConfigError("costs must lie in [0, cap]")
        if np.any(data < 0) or np.any(data > 1):
            raise ConfigError("data must lie in [0, 1]")
        costs = costs.copy()
        data = data.copy()
        costs.setflags(write=False)
        data.setflags(write=False)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "cap", cap)

    @property
    def n(self) -> int:
        return int(self.costs.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.data))


def _draw_law(law, n: int, rng: np.random.Generator, upper: float) -> np.ndarray:
    """Sample n values from a small law descriptor, bounded by ``upper``."""
    if not isinstance(law, dict) or "dist" not in law:
        raise ConfigError(f"malformed law descriptor: {law!r}")
    dist = law["dist"]
    if dist == "uniform":
        low = float(law.get("low", 0.0))
        high = float(law.get("high", upper))
        if not 0 <= low <= high <= upper:
            raise ConfigError("uniform law bounds must satisfy 0 <= low <= high <= upper")
        return rng.uniform(low, high, size=n)
    if dist == "constant":
        value = float(law["value"])
        if not 0 <= value <= upper:
            raise ConfigError("constant law value out of range")
        return np.full(n, value)
    if dist == "choice":
        values = np.asarray(law["values"], dtype=float)
        if values.size == 0 or np.any(values < 0) or np.any(values > upper):
            raise ConfigError("choice law values out of range")
        probs = law.get("probs")
        if probs is not None:
            probs = np.asarray(probs, dtype=float)
            if probs.size != values.size or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-9:
                raise ConfigError("choice law probs must be a distribution over values")
        return rng.choice(values, size=n, p=probs)
    raise ConfigError(f"unknown law distribution {dist!r}")


def gen_population(spec, n: int, cap: float, seed) -> Population:
    """Deterministically generate a population from a descriptor.

    Supported kinds:
      worst_case   costs from ``cost_law`` (default uniform on [0, cap]), data = 1
      independent  costs from ``cost_law``, data from ``data_law`` independently
      correlated   costs from ``cost_law``, data = cost / cap
      two_point    exact fractions of two (cost, datum) types

    Raises:
        ConfigError: on malformed descriptors.
    """
    if n < 1:
        raise ConfigError("population size must be at least 1")
    cap = float(cap)
    if not np.isfinite(cap) or cap < 0:
        raise ConfigError("cap must be a non-negative finite real")
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"malformed population spec: {spec!r}")
    rng = np.random.default_rng(seed)
    kind = spec["kind"]
    default_cost_law = {"dist": "uniform", "low": 0.0, "high": cap}

    if kind == "worst_case":
        costs = _draw_law(spec.get("cost_law", default_cost_law), n, rng, cap)
        data = np.ones(n)
    elif kind == "independent":
        costs = _draw_law(spec.get("cost_law", default_cost_law), n, rng, cap)
        data = _draw_law(spec.get("data_law", {"dist": "uniform", "low": 0.0, "high": 1.0}), n, rng, 1.0)
    elif kind == "correlated":
        costs = _draw_law(spec.get("cost_law", default_cost_law), n, rng, cap)
        data = costs / cap if cap > 0 else np.zeros(n)
    elif kind == "two_point":
        try:
            fractions = [float(f) for f in spec["fractions"]]
            cost_values = [float(c) for c in spec["costs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"two_point spec needs fractions and costs: {exc}") from exc
        data_values = [float(z) for z in spec.get("data", [1.0, 1.0])]
        if len(fractions) != 2 or len(cost_values) != 2 or len(data_values) != 2:
            raise ConfigError("two_point spec needs exactly two types")
        if abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
            raise ConfigError("two_point fractions must be non-negative and sum to 1")
        n_first = int(round(fractions[0] * n))
        counts = [n_first, n - n_first]
        costs = np.repeat(cost_values, counts)
        data = np.repeat(data_values, counts)
    else:
        raise ConfigError(f"unknown population kind {kind!r}")

    return Population(costs=costs, data=data, cap=cap, correlation_tag=kind)
