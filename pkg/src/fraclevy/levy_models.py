"""Mean-zero, square-integrable pure-jump Levy models and their increments.

Seeding contract
----------------
Every random draw comes from ``numpy.random.Generator(Philox(key))`` where the
key is derived from ``SeedSequence([seed, stream, block])``: ``stream`` names
the consumer (increments, probes, ...) and ``block`` is the index of a block of
``BLOCK_SIZE`` paths. Path ``i`` of a run therefore depends only on
``(seed, i)``, not on how many paths were requested or how they were chunked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

BLOCK_SIZE = 1024

STREAM_INCREMENTS = 0
STREAM_PROBES = 1
STREAM_MISC = 2


def make_rng(seed: int, stream: int = STREAM_MISC, block: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), int(stream), int(block)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class LevyModel:
    """Levy measure of a pure-jump, mean-zero, square-integrable process.

    Exactly one of ``atoms`` (jump sizes and masses) or ``density`` is given.
    Densities must be symmetric; ``density`` is called on ``x > 0`` only and
    the public :meth:`nu` rejects ``x = 0``.
    """

    name: str
    sizes: Optional[np.ndarray] = None
    masses: Optional[np.ndarray] = None
    density: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    params: dict = field(default_factory=dict, compare=False)
    m2_closed_form: Optional[float] = None
    total_mass: float = np.inf

    def __post_init__(self):
        if (self.sizes is None) == (self.density is None):
            raise ValueError("give either atoms (sizes, masses) or a density")
        if self.sizes is not None:
            x = np.asarray(self.sizes, dtype=np.float64).ravel()
            w = np.asarray(self.masses, dtype=np.float64).ravel()
            if x.shape != w.shape:
                raise ValueError("sizes and masses differ in length")
            if np.any(x == 0):
                raise ValueError("Levy measure may not charge 0")
            if np.any(w <= 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(x)):
                raise ValueError("atom masses must be positive and finite")
            mean = float(np.dot(x, w))
            if abs(mean) > 1e-12 * max(1.0, float(np.dot(np.abs(x), w))):
                raise ValueError(f"Levy measure is not mean-zero (int x nu(dx) = {mean:.3e})")
            x.setflags(write=False)
            w.setflags(write=False)
            object.__setattr__(self, "sizes", x)
            object.__setattr__(self, "masses", w)
            object.__setattr__(self, "total_mass", float(w.sum()))

    # constructors -----------------------------------------------------------

    @classmethod
    def from_atoms(cls, sizes, masses, name="atoms") -> "LevyModel":
        return cls(name=name, sizes=np.asarray(sizes, float), masses=np.asarray(masses, float))

    @classmethod
    def two_point(cls, rate: float = 2.0, a: float = 1.0) -> "LevyModel":
        """Symmetric compound Poisson: jumps of size +/- a, each at rate ``rate/2``."""
        if rate <= 0 or a <= 0:
            raise ValueError("rate and a must be positive")
        return cls(
            name="two_point",
            sizes=np.array([-a, a]),
            masses=np.array([rate / 2, rate / 2]),
            params={"rate": rate, "a": a},
        )

    @classmethod
    def gaussian_jumps(cls, rate: float = 1.0, scale: float = 1.0) -> "LevyModel":
        """Compound Poisson with N(0, scale^2) jump sizes."""
        if rate <= 0 or scale <= 0:
            raise ValueError("rate and scale must be positive")
        c = rate / (scale * np.sqrt(2 * np.pi))
        return cls(
            name="gaussian_jumps",
            density=lambda x: c * np.exp(-0.5 * (x / scale) ** 2),
            params={"rate": rate, "scale": scale},
            m2_closed_form=rate * scale**2,
            total_mass=rate,
        )

    @classmethod
    def tempered_stable(cls, c: float = 1.0, g: float = 1.0, y: float = 0.0) -> "LevyModel":
        """Symmetric density ``c exp(-g|x|) / |x|^(1+y)``; ``y = 0`` is variance-gamma-like.

        Infinite activity; ``y < 2`` keeps the second moment finite.
        """
        if c <= 0 or g <= 0 or not 0.0 <= y < 2.0:
            raise ValueError("need c > 0, g > 0 and 0 <= y < 2")
        return cls(
            name="tempered_stable",
            density=lambda x: c * np.exp(-g * x) / x ** (1.0 + y),
            params={"c": c, "g": g, "y": y},
            m2_closed_form=2.0 * c * special.gamma(2.0 - y) / g ** (2.0 - y),
        )

    # queries ----------------------------------------------------------------

    @property
    def is_atomic(self) -> bool:
        return self.sizes is not None

    @property
    def finite_activity(self) -> bool:
        return np.isfinite(self.total_mass)

    def nu(self, x) -> np.ndarray:
        """Density of the Levy measure (density models only)."""
        if self.density is None:
            raise TypeError("atomic model has no density")
        x = np.asarray(x, dtype=np.float64)
        if np.any(x == 0):
            raise ValueError("Levy density is not defined at x = 0")
        return self.density(np.abs(x))

    @property
    def is_degenerate(self) -> bool:
        return self.is_atomic and self.sizes.size == 0

    def check(self):
        """Raise if the model cannot drive a process (e.g. the empty measure)."""
        if self.is_degenerate or second_moment(self) == 0.0:
            raise ValueError(f"model {self.name!r} is degenerate: X is identically 0")


def second_moment(model: LevyModel, rtol: float = 1e-10) -> float:
    """``int x^2 nu(dx)``: exact for atoms, adaptive quadrature for densities."""
    if model.is_atomic:
        return float(np.dot(model.sizes**2, model.masses))
    return 2.0 * _half_moment(model, 0.0, np.inf, rtol)


def _half_moment(model, lo, hi, rtol, power=2):
    f = lambda x: x**power * model.density(x)
    pieces = [(lo, max(lo, 1.0)), (max(lo, 1.0), hi)] if lo < 1.0 else [(lo, hi)]
    total = 0.0
    for a, b in pieces:
        if b <= a:
            continue
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=500)
        if not np.isfinite(val) or err > max(1e-8 * abs(val), 1e-300) * 10:
            raise ValueError(f"second moment of {model.name!r} does not converge (quad err {err:.2e})")
        total += val
    return total


@dataclass(frozen=True)
class DiscretizedMeasure:
    """Finite atomic stand-in for a Levy measure."""

    sizes: np.ndarray
    masses: np.ndarray
    epsilon: float = 0.0
    m2_lost: float = 0.0
    compensation: float = 1.0

    def __post_init__(self):
        x = np.asarray(self.sizes, float)
        w = np.asarray(self.masses, float)
        if x.size == 0:
            raise ValueError("discretized measure has no atoms")
        if np.any(w <= 0) or np.any(x == 0):
            raise ValueError("atoms need positive mass and nonzero size")
        object.__setattr__(self, "sizes", x)
        object.__setattr__(self, "masses", w)

    @property
    def n_atoms(self) -> int:
        return self.sizes.size

    @property
    def m2(self) -> float:
        return float(np.dot(self.sizes**2, self.masses))

    def as_model(self, name="discretized") -> LevyModel:
        return LevyModel.from_atoms(self.sizes, self.masses, name=name)


def discretize_measure(
    model: LevyModel, epsilon: float = 1e-3, n_atoms_per_side: int = 32, compensate: bool = False
) -> DiscretizedMeasure:
    """Replace ``nu`` by finitely many atoms.

    Atomic models pass through. A density is cut to ``epsilon <= |x| <= x_max``
    and split into ``n_atoms_per_side`` log-spaced cells per side; each cell
    becomes one atom carrying the cell's mass at the location that preserves
    the cell's second moment. ``compensate`` rescales masses so the total
    second moment equals ``second_moment(model)``.
    """
    if n_atoms_per_side < 1:
        raise ValueError("n_atoms_per_side must be >= 1")
    if model.is_atomic:
        model.check()
        return DiscretizedMeasure(model.sizes, model.masses, 0.0, 0.0, 1.0)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive for density models")
    m2 = second_moment(model)
    x_max = _upper_cutoff(model, m2)
    if epsilon >= x_max:
        raise ValueError(f"epsilon={epsilon} leaves no mass (cutoff {x_max:.3g})")
    edges = np.geomspace(epsilon, x_max, n_atoms_per_side + 1)
    mass = np.empty(n_atoms_per_side)
    mom = np.empty(n_atoms_per_side)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        mass[i] = integrate.quad(model.density, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
        mom[i] = integrate.quad(lambda x: x * x * model.density(x), a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    keep = mass > 0
    if not np.any(keep):
        raise ValueError("discretization retained no mass")
    mass, mom = mass[keep], mom[keep]
    y = np.sqrt(mom / mass)
    retained = 2.0 * mom.sum()
    lost = max(m2 - retained, 0.0)
    factor = m2 / retained if compensate else 1.0
    sizes = np.concatenate([-y[::-1], y])
    masses = np.concatenate([mass[::-1], mass]) * factor
    return DiscretizedMeasure(sizes, masses, float(epsilon), float(lost), float(factor))


def _upper_cutoff(model, m2, rel=1e-14):
    x = 1.0
    while 2.0 * _tail_moment(model, x) > rel * m2:
        x *= 2.0
        if x > 1e8:
            raise ValueError("Levy density tail too heavy to discretize")
    return x


def _tail_moment(model, x):
    return integrate.quad(lambda u: u * u * model.density(u), x, np.inf, epsabs=0, epsrel=1e-10, limit=200)[0]


@dataclass(frozen=True)
class IncrementSample:
    """Per-cell increments of the compensated jump process, ``(n_paths, n_cells)``."""

    widths: np.ndarray
    increments: np.ndarray
    seed: int

    @property
    def n_paths(self) -> int:
        return self.increments.shape[0]


def sample_increments(
    model: LevyModel,
    widths,
    seed: int,
    n_paths: int = 1,
    measure: Optional[DiscretizedMeasure] = None,
    first_path: int = 0,
) -> IncrementSample:
    """Independent increments over cells of the given ``widths``.

    ``widths`` may be a :class:`~fraclevy.grid.TimeGrid` (uniform cells) or
    any array of non-negative cell lengths. Atomic (or discretized) measures
    are sampled as ``sum_j y_j (N_j - w_j dt)`` with ``N_j ~ Poisson(w_j dt)``;
    the Gaussian-jump model is sampled exactly. Infinite-activity densities
    require ``measure``.
    """
    from .grid import TimeGrid

    if isinstance(widths, TimeGrid):
        widths = np.full(widths.n_cells, widths.h)
    widths = np.asarray(widths, dtype=np.float64)
    if np.any(widths < 0):
        raise ValueError("cell widths must be non-negative")
    if measure is None:
        if model.is_atomic:
            model.check()
            sizes, masses = model.sizes, model.masses
        elif model.name == "gaussian_jumps":
            sizes = masses = None
        else:
            raise ValueError(
                f"model {model.name!r} has infinite activity; pass a DiscretizedMeasure "
                "from discretize_measure() to sample it"
            )
    else:
        sizes, masses = measure.sizes, measure.masses
    out = np.empty((n_paths, widths.size))
    first_block = first_path // BLOCK_SIZE
    last_block = (first_path + n_paths - 1) // BLOCK_SIZE if n_paths else first_block - 1
    row = 0
    for block in range(first_block, last_block + 1):
        lo = max(first_path, block * BLOCK_SIZE)
        hi = min(first_path + n_paths, (block + 1) * BLOCK_SIZE)
        rng = make_rng(seed, STREAM_INCREMENTS, block)
        full = _draw_block(rng, BLOCK_SIZE, widths, sizes, masses, model)
        out[row : row + hi - lo] = full[lo - block * BLOCK_SIZE : hi - block * BLOCK_SIZE]
        row += hi - lo
    return IncrementSample(widths, out, int(seed))


# above this mean a Poisson count is drawn as its normal approximation
POISSON_NORMAL_LIMIT = 1e10


def _centered_poisson(rng, lam):
    """``N - lam`` with ``N ~ Poisson(lam)``; normal approximation for huge ``lam``."""
    big = lam > POISSON_NORMAL_LIMIT
    out = rng.poisson(np.where(big, 0.0, lam)) - lam
    if np.any(big):
        z = rng.standard_normal(lam.shape)
        out = np.where(big, np.sqrt(lam) * z, out)
    return out


def _draw_block(rng, n, widths, sizes, masses, model):
    if sizes is None:
        lam = model.params["rate"] * widths
        counts = rng.poisson(lam, size=(n, widths.size))
        return model.params["scale"] * np.sqrt(counts) * rng.standard_normal((n, widths.size))
    acc = np.zeros((n, widths.size))
    for y, w in zip(sizes, masses):
        acc += y * _centered_poisson(rng, np.broadcast_to(w * widths, (n, widths.size)))
    return acc
