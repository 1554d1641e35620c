"""Stable and tempered stable subordinators, their weighted sums, and the
inverse (first-passage) clock.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "HorizonTooShort",
    "SubordinatorSpec",
    "CompositeSubordinator",
    "Path",
    "stable",
    "tempered",
    "stable_pair",
    "tempered_pair",
    "general_stable",
    "sample_stable_increment",
    "sample_tempered_increment",
    "sample_composite_path",
    "inverse_at",
    "first_passage",
    "write_paths_csv",
]

REJECTION_BUDGET = 10**6
MIN_ACCEPTANCE = 0.5


class HorizonTooShort(RuntimeError):
    """The simulated path never reached the requested level."""


@dataclass(frozen=True)
class SubordinatorSpec:
    """One component ``weight * H(t)``.

    ``rho == 0`` is the stable subordinator with Laplace exponent
    ``s**order``; ``rho > 0`` is the tempered one with exponent
    ``(s + rho)**order - rho**order``.  ``order == 1`` is the pure drift.
    """

    order: float
    weight: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if not 0 < self.order <= 1:
            raise ValueError("order must lie in (0, 1]")
        if not self.weight > 0:
            raise ValueError("weight must be positive")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")

    @property
    def kind(self) -> str:
        return "tempered" if self.rho > 0 else "stable"

    def laplace_exponent(self, s):
        """Exponent ``f`` with ``E exp(-s weight H(t)) = exp(-t f(s))``; complex ``s`` allowed."""
        ws = self.weight * np.asarray(s)
        if self.rho > 0:
            return (ws + self.rho) ** self.order - self.rho**self.order
        return ws**self.order

    def increments(self, dt: float, size, rng: np.random.Generator) -> np.ndarray:
        if self.rho > 0:
            x = sample_tempered_increment(self.order, self.rho, dt, rng, size=size)
        else:
            x = sample_stable_increment(self.order, dt, rng, size=size)
        return self.weight * x


def stable(order: float, weight: float = 1.0) -> SubordinatorSpec:
    return SubordinatorSpec(order=order, weight=weight)


def tempered(order: float, rho: float, weight: float = 1.0) -> SubordinatorSpec:
    if not rho > 0:
        raise ValueError("tempering rho must be positive")
    return SubordinatorSpec(order=order, weight=weight, rho=rho)


@dataclass(frozen=True)
class CompositeSubordinator:
    """Sum of independent weighted components."""

    components: tuple[SubordinatorSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("a composite subordinator needs at least one component")

    def laplace_exponent(self, s):
        return sum(c.laplace_exponent(s) for c in self.components)

    def increments(self, dt: float, size, rng: np.random.Generator) -> np.ndarray:
        return sum(c.increments(dt, size, rng) for c in self.components)


def stable_pair(nu: float, lam: float) -> CompositeSubordinator:
    """``H^{2nu} + (2 lam)^{1/nu} H^{nu}``; Laplace exponent ``s^{2nu} + 2 lam s^nu``.

    ``lam = 0`` leaves the single stable subordinator of order ``2 nu``.
    """
    if not 0 < nu <= 0.5:
        raise ValueError("the stable pair needs 0 < nu <= 1/2")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam == 0:
        return CompositeSubordinator((stable(2 * nu),))
    return CompositeSubordinator((stable(2 * nu), stable(nu, (2 * lam) ** (1 / nu))))


def tempered_pair(alpha: float, rho: float) -> CompositeSubordinator:
    """``H^{2alpha,rho} + H^{alpha,rho}``, both with unit weight."""
    if not 0 < alpha <= 0.5:
        raise ValueError("the tempered pair needs 0 < alpha <= 1/2")
    return CompositeSubordinator((tempered(2 * alpha, rho), tempered(alpha, rho)))


def general_stable(mus: Sequence[float], nus: Sequence[float]) -> CompositeSubordinator:
    """``sum_j mu_j^{1/nu_j} H^{nu_j}``; Laplace exponent ``sum_j mu_j s^{nu_j}``."""
    if len(mus) != len(nus):
        raise ValueError("mus and nus must have the same length")
    return CompositeSubordinator(tuple(stable(n, m ** (1 / n)) for m, n in zip(mus, nus)))


# ---------------------------------------------------------------------------
# increments


def _kanter(nu: float, size, rng: np.random.Generator) -> np.ndarray:
    """Positive stable variates with ``E exp(-s X) = exp(-s^nu)`` (Kanter 1975)."""
    u = rng.random(size)
    e = rng.standard_exponential(size)
    pu = np.pi * u
    # Zolotarev's function; the positive part keeps u = 0 draws harmless
    a = np.sin(nu * pu) / np.sin(pu) ** (1 / nu) * np.sin((1 - nu) * pu) ** ((1 - nu) / nu)
    return a / e ** ((1 - nu) / nu)


def sample_stable_increment(nu: float, dt: float, rng: np.random.Generator, size=None):
    """Increment of a stable subordinator over ``dt``: ``E e^{-sX} = e^{-dt s^nu}``."""
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if nu == 1:
        out = np.full(() if size is None else size, float(dt))
    else:
        out = dt ** (1 / nu) * _kanter(nu, size, rng)
    return float(out) if size is None else out


def sample_tempered_increment(
    alpha: float, rho: float, dt: float, rng: np.random.Generator, size=None
):
    """Increment with ``E e^{-sX} = exp(-dt((s+rho)^alpha - rho^alpha))``.

    Exponential tilting: a stable draw ``X`` is accepted with probability
    ``exp(-rho X)``.  The acceptance rate is ``exp(-dt rho^alpha)``; when it
    falls below one half the increment is split into sub-increments.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not rho > 0 or not dt > 0:
        raise ValueError("rho and dt must be positive")
    if alpha == 1:
        return sample_stable_increment(1.0, dt, rng, size)
    pieces = max(1, math.ceil(dt * rho**alpha / math.log(1 / MIN_ACCEPTANCE)))
    sub_dt = dt / pieces
    shape = () if size is None else tuple(np.atleast_1d(size))
    n = int(np.prod(shape)) * pieces
    out = np.empty(n)
    todo = np.arange(n)
    iters = 0
    while todo.size:
        iters += 1
        if iters > REJECTION_BUDGET:
            raise RuntimeError("tempered sampler exceeded its rejection budget")
        x = sample_stable_increment(alpha, sub_dt, rng, size=todo.size)
        keep = rng.random(todo.size) < np.exp(-rho * x)
        out[todo[keep]] = x[keep]
        todo = todo[~keep]
    out = out.reshape(shape + (pieces,)).sum(axis=-1)
    return float(out) if size is None else out


# ---------------------------------------------------------------------------
# paths and inverse


@dataclass(frozen=True)
class Path:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.size and self.values[0] != 0:
            raise ValueError("a path starts at 0")
        if np.any(np.diff(self.values) < 0):
            raise ValueError("subordinator paths are nondecreasing")


def sample_composite_path(
    spec: CompositeSubordinator, horizon: float, dt: float, rng: np.random.Generator
) -> Path:
    """Path on the grid ``0, dt, ..., horizon`` (last step shortened to land on the horizon)."""
    if horizon < 0 or not dt > 0:
        raise ValueError("need horizon >= 0 and dt > 0")
    if horizon == 0:
        return Path(np.zeros(1), np.zeros(1))
    n = math.ceil(horizon / dt - 1e-9)
    times = np.minimum(dt * np.arange(n + 1), horizon)
    steps = np.diff(times)
    inc = np.empty(n)
    # grid differences carry rounding, so only a genuinely short last step is special
    full = np.isclose(steps, dt, rtol=1e-9, atol=0.0)
    if np.any(full):
        inc[full] = spec.increments(dt, int(full.sum()), rng)
    for i in np.flatnonzero(~full):
        inc[i] = spec.increments(float(steps[i]), 1, rng)[0]
    return Path(times, np.concatenate([[0.0], np.cumsum(inc)]))


def _cell_fraction(level, lo, hi, refine: str):
    if refine == "midpoint":
        return 0.5
    if refine == "linear":
        return (level - lo) / (hi - lo)
    raise ValueError(f"unknown refinement {refine!r}")


def inverse_at(path: Path, t: float, refine: str = "midpoint") -> float:
    """First passage ``inf{s : H(s) >= t}`` located inside the bracketing cell.

    ``refine="midpoint"`` returns the centre of the crossing cell.  For pure
    jump paths the crossing is almost always a single jump at a nearly
    uniform position in the cell, so the midpoint is unbiased to first order;
    ``"linear"`` interpolates the path and is biased early by O(dt).
    """
    v = path.values
    if v[-1] < t:
        raise HorizonTooShort(f"path reaches {v[-1]:.4g} < level {t:.4g}")
    i = int(np.searchsorted(v, t, side="left"))
    if i == 0:
        return float(path.times[0])
    frac = _cell_fraction(t, v[i - 1], v[i], refine)
    return float(path.times[i - 1] + frac * (path.times[i] - path.times[i - 1]))


def first_passage(
    spec: CompositeSubordinator,
    level: float,
    n_paths: int,
    dt: float,
    horizon: float,
    rng: np.random.Generator,
    chunk: int = 128,
    refine: str = "midpoint",
) -> np.ndarray:
    """First-passage times of ``n_paths`` independent paths over ``level``.

    Paths are advanced in blocks of ``chunk`` steps and retired as soon as
    they cross, which is equivalent to :func:`inverse_at` on full paths on
    the same grid.  Raises :class:`HorizonTooShort` if a path stays below
    the level up to ``horizon``.
    """
    out = np.full(n_paths, np.nan)
    active = np.arange(n_paths)
    pos = np.zeros(n_paths)
    s0 = 0.0
    max_steps = math.ceil(horizon / dt - 1e-9)
    done_steps = 0
    while active.size and done_steps < max_steps:
        k = min(chunk, max_steps - done_steps)
        inc = spec.increments(dt, (active.size, k), rng)
        path = pos[active, None] + np.cumsum(inc, axis=1)
        crossed = path[:, -1] >= level
        if np.any(crossed):
            rows = np.flatnonzero(crossed)
            sub = path[rows]
            idx = np.argmax(sub >= level, axis=1)
            hi = sub[np.arange(rows.size), idx]
            lo = np.where(idx > 0, sub[np.arange(rows.size), idx - 1], pos[active[rows]])
            frac = _cell_fraction(level, lo, hi, refine)
            out[active[rows]] = s0 + dt * (idx + frac)
        pos[active] = path[:, -1]
        active = active[~crossed]
        s0 += k * dt
        done_steps += k
    if active.size:
        raise HorizonTooShort(f"{active.size} paths below level {level:g} at horizon {horizon:g}")
    return out


def write_paths_csv(paths: Iterable[Path], fh) -> None:
    """Dump paths as CSV rows ``path_id, s, H_value``."""
    w = csv.writer(fh)
    w.writerow(["path_id", "s", "H_value"])
    for pid, p in enumerate(paths):
        for s, h in zip(p.times, p.values):
            w.writerow([pid, repr(float(s)), repr(float(h))])
