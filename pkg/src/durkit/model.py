"""Closed-form scaling model for replicated and partitioned deferred update.

All functions are pure. Limits that diverge (for instance the replication
ceiling when termination is free) are reported as math.inf rather than
errors, since callers compare finite configurations against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence


@dataclass(frozen=True, slots=True)
class CostProfile:
    """Abstract per-transaction costs: execution (gamma_e) and termination (gamma_t)."""

    gamma_e: float
    gamma_t: float

    def __post_init__(self) -> None:
        if self.gamma_e < 0 or self.gamma_t < 0:
            raise ValueError("costs must be non-negative")
        if self.gamma_e == 0 and self.gamma_t == 0:
            raise ValueError("costs must not both be zero")


@dataclass(frozen=True, slots=True)
class Config:
    """A deployment point: n replicas, p partitions, cross-partition fraction g."""

    n: int
    p: int
    g: float

    def __post_init__(self) -> None:
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be >= 1")
        if not 0.0 <= self.g <= 1.0:
            raise ValueError("g must lie in [0, 1]")


def s_dur(n: int, costs: CostProfile) -> float:
    """Throughput of n replicas relative to one: n(ge+gt) / (ge + n gt)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ge, gt = costs.gamma_e, costs.gamma_t
    return n * (ge + gt) / (ge + n * gt)


def s_dur_limit(costs: CostProfile) -> float:
    """Ceiling of s_dur as replicas grow without bound: (ge+gt)/gt."""
    ge, gt = costs.gamma_e, costs.gamma_t
    if gt == 0:
        return math.inf
    return (ge + gt) / gt


def s_pdur(cfg: Config, costs: CostProfile) -> float:
    """Partitioned scaling: np(ge+gt) / ((ge + n gt)(1 - g + pg))."""
    ge, gt = costs.gamma_e, costs.gamma_t
    n, p, g = cfg.n, cfg.p, cfg.g
    return n * p * (ge + gt) / ((ge + n * gt) * (1 - g + p * g))


def s_pdur_scaleup_limit(g: float) -> float:
    """Ceiling of single-replica partitioned scaling as p grows: 1/g."""
    if not 0.0 <= g <= 1.0:
        raise ValueError("g must lie in [0, 1]")
    if g == 0:
        return math.inf
    return 1.0 / g


def breakeven_g(costs: CostProfile) -> float:
    """Cross-partition fraction below which scale-up beats scale-out: gt/(ge+gt)."""
    ge, gt = costs.gamma_e, costs.gamma_t
    return gt / (ge + gt)


@dataclass(frozen=True, slots=True)
class Efficiency:
    """Throughput retention when doubling from `lower` to `upper` (= 2*lower).

    `value` is tau(2n) / (2 tau(n)); None marks a gap where one of the two
    sizes was not measured.
    """

    lower: int
    upper: int
    value: Optional[float]


def scalability_efficiency(
    throughputs: Sequence[tuple[int, float]],
) -> list[Efficiency]:
    """Per-doubling efficiencies over sizes 1, 2, 4, ... 2^k.

    Input pairs are (size, throughput); sizes must be powers of two. A value
    of 1 means the system lost nothing when doubling in size.
    """
    by_size: dict[int, float] = {}
    for size, tau in throughputs:
        if size < 1 or size & (size - 1):
            raise ValueError(f"size {size} is not a power of two")
        if size in by_size:
            raise ValueError(f"duplicate size {size}")
        by_size[size] = tau
    if not by_size:
        return []
    top = max(by_size)
    out: list[Efficiency] = []
    size = 1
    while size < top:
        lo, hi = by_size.get(size), by_size.get(2 * size)
        if lo is None or hi is None or lo == 0:
            out.append(Efficiency(size, 2 * size, None))
        else:
            out.append(Efficiency(size, 2 * size, hi / (2 * lo)))
        size *= 2
    return out


def model_table(
    n_values: Sequence[int],
    p_values: Sequence[int],
    g_values: Sequence[float],
    costs: CostProfile,
) -> str:
    """CSV table of scaling factors: columns n,p,g,gamma_e,gamma_t,scaling."""
    lines = ["n,p,g,gamma_e,gamma_t,scaling"]
    for n in n_values:
        for p in p_values:
            for g in g_values:
                s = s_pdur(Config(n, p, g), costs)
                lines.append(
                    f"{n},{p},{g:g},{costs.gamma_e:g},{costs.gamma_t:g},{s:.6g}"
                )
    return "\n".join(lines) + "\n"
