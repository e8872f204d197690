"""Two-step skew products on the torus and their correlation averages.

The map S(x, y) = (x + alpha, y + x) on T^d x T^d has the polynomial
orbit formula

    S^n(x, y) = (x + n alpha, y + n x + C(n, 2) alpha),

so every orbit quantity here is computed in exact rational arithmetic.
Observables come in two backends that must agree wherever both apply:
trigonometric polynomials (CoefficientTable over character pairs, with
integrals collapsed by orthogonality) and finite models on Z_q^d x Z_q^d
(full summation, exact over integer or Fraction grids).  Quadrature is
never used; that keeps inequality checks honest.

On top of the map sit the triple correlation averages: the unweighted
limit average of x -> avg f . f o S^n . f o S^2n, its arithmetically
weighted variant with a cylinder window evaluated along n^2 l^2 beta,
and the closed form both are compared against, namely the progression
form of the first-coordinate marginal (the rotation factor carries all
of the limit for generic rotation parts).  Rational rotation parts make
every run a periodic model; traces record that label rather than
pretending to ergodicity.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .harmonic import Character, CoefficientTable, GridFunction
from .roth import roth_form, roth_form_exact
from .torus import Cylinder, TorusPoint, wrap_unit

__all__ = [
    "AveragesTrace",
    "GridWeylModel",
    "ObservablePair",
    "RotationModel",
    "WeylSystem",
    "kronecker_projection",
    "l3_average",
    "max_triple_intersection",
    "trig_progression_form",
    "triple_integrals",
    "weighted_average",
]

Observable = Union[CoefficientTable, GridFunction, np.ndarray]

# Largest modulus m with (m - 1)^2 < 2^63, the safe range for the
# vectorized int64 phase reduction.
_INT64_PHASE_LIMIT = 3_037_000_499


def _unit(phase: Fraction) -> complex:
    """e(phase) for an exact rational phase."""
    return cmath.exp(2j * cmath.pi * float(wrap_unit(phase)))


def _quadratic_phase_powers(a: Fraction, b: Fraction, ns: np.ndarray) -> np.ndarray:
    """The vector e(a n + b n^2) over the integer vector ns.

    Phases are reduced mod 1 in integer arithmetic before the single
    float conversion, so the result is accurate to one ulp of exp even
    when n^2 b is astronomically larger than 1.
    """
    den = math.lcm(a.denominator, b.denominator)
    if den == 1:
        return np.ones(len(ns), dtype=complex)
    pa = a.numerator * (den // a.denominator) % den
    pb = b.numerator * (den // b.denominator) % den
    if den <= _INT64_PHASE_LIMIT:
        r = (ns % den).astype(np.int64)
        ph = ((r * pa) % den + ((r * r) % den) * pb) % den
        return np.exp(2j * np.pi * (ph.astype(np.float64) / den))
    reduced = [((n % den) * pa + ((n % den) ** 2 % den) * pb) % den for n in ns.tolist()]
    return np.exp(2j * np.pi * (np.array(reduced, dtype=np.float64) / den))


def _as_values(f: Observable) -> np.ndarray:
    if isinstance(f, GridFunction):
        return f.values
    if isinstance(f, CoefficientTable):
        raise TypeError("grid model needs grid values, not a coefficient table")
    return np.asarray(f)


def _is_exact_dtype(arr: np.ndarray) -> bool:
    return arr.dtype == object or arr.dtype == bool or np.issubdtype(arr.dtype, np.integer)


def _mean_of_product(arrays: Sequence[np.ndarray]):
    """Mean of the elementwise product, exact for integer/bool/object arrays.

    Integer inputs ride int64 only when the worst-case product of entry
    bounds provably fits; otherwise they are lifted to Python integers.
    Float inputs return a float (or complex) mean.
    """
    if all(_is_exact_dtype(a) for a in arrays):
        size = arrays[0].size
        lifted = []
        bound = size
        for a in arrays:
            if a.dtype == object:
                lifted = None
                break
            m = int(np.abs(a).max()) if a.size else 0
            bound *= max(m, 1)
            lifted.append(a.astype(np.int64))
        if lifted is not None and bound < 2**62:
            prod = lifted[0]
            for a in lifted[1:]:
                prod = prod * a
            return Fraction(int(prod.sum()), size)
        prod = arrays[0].astype(object)
        for a in arrays[1:]:
            prod = prod * a.astype(object)
        return Fraction(prod.sum(), size)
    prod = arrays[0]
    for a in arrays[1:]:
        prod = prod * a
    out = prod.mean()
    if np.iscomplexobj(prod):
        return complex(out)
    return float(out)


def _exact_block_mean(arr: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    block = 1
    for ax in axes:
        block *= arr.shape[ax]
    summed = arr.astype(object).sum(axis=axes)
    scale = np.frompyfunc(lambda v: Fraction(v, block), 1, 1)
    out = scale(summed)
    if out.ndim == 0:
        out = out.reshape(())
    return out


# ---- the continuous system, trig polynomial backend ----


@dataclass(frozen=True)
class WeylSystem:
    """The skew product S(x, y) = (x + alpha, y + x) on T^d x T^d."""

    alpha: TorusPoint

    @property
    def dim(self) -> int:
        return self.alpha.dim

    def orbit(self, x: TorusPoint, y: TorusPoint, n: int) -> tuple[TorusPoint, TorusPoint]:
        """S^n(x, y) by the closed form, valid for every integer n.

        The quadratic term C(n, 2) = n(n-1)/2 is an integer for all n,
        so the formula also runs the inverse map.
        """
        if x.dim != self.dim or y.dim != self.dim:
            raise ValueError("point dimensions must match the system")
        n = int(n)
        binom = n * (n - 1) // 2
        return x + self.alpha.scale(n), y + x.scale(n) + self.alpha.scale(binom)

    def step(self, x: TorusPoint, y: TorusPoint) -> tuple[TorusPoint, TorusPoint]:
        return self.orbit(x, y, 1)

    def pullback(self, table: CoefficientTable, n: int) -> CoefficientTable:
        """Coefficients of f o S^n for a trig polynomial f on T^d x T^d.

        A character e(nu . x + mu . y) pulls back to the character with
        x-frequency nu + n mu and unchanged y-frequency, times the exact
        root of unity e(n nu . alpha + C(n, 2) mu . alpha).
        """
        d = self.dim
        if table.dim != 2 * d:
            raise ValueError(f"table dimension {table.dim} is not twice the system dim {d}")
        n = int(n)
        binom = n * (n - 1) // 2
        out = CoefficientTable(table.dim)
        for chi, coef in table:
            nu, mu = chi.freq[:d], chi.freq[d:]
            phase = sum(
                ((n * a + binom * b) * c for a, b, c in zip(nu, mu, self.alpha.coords)),
                Fraction(0),
            )
            shifted = Character(tuple(a + n * b for a, b in zip(nu, mu)) + mu)
            out[shifted] = out[shifted] + coef * _unit(phase)
        return out

    def triple_integral(self, table: CoefficientTable, n: int) -> complex:
        """avg f . (f o S^n) . (f o S^2n) by orthogonality of characters.

        The integral of a product of three characters is 1 when the
        frequencies cancel and 0 otherwise, so the triple integral is a
        finite coefficient sum with no quadrature anywhere.
        """
        t1 = self.pullback(table, n)
        t2 = self.pullback(table, 2 * n)
        total = 0j
        for chi0, c0 in table:
            for chi1, c1 in t1:
                c2 = t2[(chi0 * chi1).inverse()]
                if c2 != 0:
                    total += c0 * c1 * c2
        return total

    def correlation_series(self, table: CoefficientTable, n_max: int) -> np.ndarray:
        """The vector of triple integrals for n = 1..n_max in one pass.

        Matching frequency triples split by the drift mu_1 + 2 mu_2 of
        the x-cancellation condition: zero drift gives a family active
        at every n with phase a n + b n^2, anything else is satisfied by
        at most one n.  The cost is O(support^3 + n_max * families),
        which is what makes million-step traces affordable.
        """
        d = self.dim
        if table.dim != 2 * d:
            raise ValueError(f"table dimension {table.dim} is not twice the system dim {d}")
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        entries = [(chi.freq[:d], chi.freq[d:], coef) for chi, coef in table]
        ns = np.arange(1, n_max + 1, dtype=np.int64)
        out = np.zeros(n_max, dtype=complex)
        alpha = self.alpha.coords
        for nu0, mu0, c0 in entries:
            for nu1, mu1, c1 in entries:
                for nu2, mu2, c2 in entries:
                    if any(a + b + c for a, b, c in zip(mu0, mu1, mu2)):
                        continue
                    base = tuple(a + b + c for a, b, c in zip(nu0, nu1, nu2))
                    drift = tuple(b + 2 * c for b, c in zip(mu1, mu2))
                    coef = c0 * c1 * c2
                    lin = sum(
                        ((b + 2 * c) * a for b, c, a in zip(nu1, nu2, alpha)),
                        Fraction(0),
                    ) - sum(
                        ((Fraction(b, 2) + c) * a for b, c, a in zip(mu1, mu2, alpha)),
                        Fraction(0),
                    )
                    quad = sum(
                        ((Fraction(b, 2) + 2 * c) * a for b, c, a in zip(mu1, mu2, alpha)),
                        Fraction(0),
                    )
                    if not any(drift):
                        if any(base):
                            continue
                        out += coef * _quadratic_phase_powers(lin, quad, ns)
                        continue
                    hit = None
                    for bs, dr in zip(base, drift):
                        if dr == 0:
                            if bs != 0:
                                hit = 0
                                break
                            continue
                        if bs % dr:
                            hit = 0
                            break
                        cand = -(bs // dr)
                        if hit is None:
                            hit = cand
                        elif hit != cand:
                            hit = 0
                            break
                    if hit and 1 <= hit <= n_max:
                        out[hit - 1] += coef * _unit(hit * lin + hit * hit * quad)
        return out


# ---- finite grid models ----


@dataclass(frozen=True)
class RotationModel:
    """Rotation T(x) = x + step on the grid Z_q^d."""

    q: int
    step: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ValueError("q must be >= 1")
        step = tuple(int(s) % self.q for s in self.step)
        if not step:
            raise ValueError("step must have dimension >= 1")
        object.__setattr__(self, "step", step)

    @property
    def d(self) -> int:
        return len(self.step)

    @property
    def phase_space_shape(self) -> tuple[int, ...]:
        return (self.q,) * self.d

    @property
    def period(self) -> int:
        """Least P >= 1 with T^P the identity."""
        return math.lcm(*(self.q // math.gcd(s, self.q) for s in self.step))

    @property
    def is_generating(self) -> bool:
        """Whether the orbit of 0 sweeps the whole grid group."""
        return self.period == self.q**self.d

    def pullback_values(self, values: np.ndarray, n: int) -> np.ndarray:
        """Array g with g[x] = values[x + n step]."""
        values = _as_values(values)
        if values.shape != self.phase_space_shape:
            raise ValueError(f"values must have shape {self.phase_space_shape}")
        shift = tuple(-(int(n) * s) % self.q for s in self.step)
        return np.roll(values, shift=shift, axis=tuple(range(self.d)))

    def triple_integral(self, f: Observable, n: int):
        """avg f . (f o T^n) . (f o T^2n), exact on integer/object grids."""
        values = _as_values(f)
        return _mean_of_product(
            [values, self.pullback_values(values, n), self.pullback_values(values, 2 * n)]
        )


@dataclass(frozen=True)
class GridWeylModel:
    """The skew product S(x, y) = (x + alpha, y + x) on Z_q^d x Z_q^d.

    alpha holds the integer residues a with rotation part a/q; the
    binomial term of the orbit formula is reduced mod q in arbitrary
    precision before it ever scales anything, so there is no overflow
    path.
    """

    q: int
    alpha: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ValueError("q must be >= 1")
        alpha = tuple(int(a) % self.q for a in self.alpha)
        if not alpha:
            raise ValueError("alpha must have dimension >= 1")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def from_system(cls, system: WeylSystem, q: int | None = None) -> "GridWeylModel":
        """The grid model of a system whose rotation part lives on Z_q^d."""
        dens = [c.denominator for c in system.alpha.coords]
        q = math.lcm(*dens) if q is None else int(q)
        res = []
        for c in system.alpha.coords:
            if (c * q).denominator != 1:
                raise ValueError(f"rotation coordinate {c} does not live on a Z_{q} grid")
            res.append(int(c * q) % q)
        return cls(q, tuple(res))

    @property
    def d(self) -> int:
        return len(self.alpha)

    @property
    def phase_space_shape(self) -> tuple[int, ...]:
        return (self.q,) * (2 * self.d)

    @property
    def period(self) -> int:
        """Least P >= 1 with S^P the identity on all of Z_q^d x Z_q^d.

        The y-update forces q | P, and then only the binomial phase can
        obstruct: C(q, 2) is divisible by q for odd q, while for even q
        it is q/2, which dies exactly when every alpha entry is even.
        """
        if self.q % 2 == 1 or all(a % 2 == 0 for a in self.alpha):
            return self.q
        return 2 * self.q

    @property
    def is_generating(self) -> bool:
        """Whether the rotation part alone sweeps the first factor."""
        orbit = math.lcm(*(self.q // math.gcd(a, self.q) for a in self.alpha))
        return orbit == self.q**self.d

    def pullback_values(self, values: np.ndarray, n: int) -> np.ndarray:
        """Array g with g[x, y] = values[x + n alpha, y + n x + C(n, 2) alpha]."""
        values = _as_values(values)
        if values.shape != self.phase_space_shape:
            raise ValueError(f"values must have shape {self.phase_space_shape}")
        d, q = self.d, self.q
        n = int(n)
        binom = (n * (n - 1) // 2) % q
        xshift = tuple(-(n * a) % q for a in self.alpha)
        shifted = np.roll(values, shift=xshift, axis=tuple(range(d)))
        out = np.empty_like(values)
        yaxes = tuple(range(d))
        for x in np.ndindex(*(q,) * d):
            yshift = tuple(-((n * xi + binom * a) % q) for xi, a in zip(x, self.alpha))
            out[x] = np.roll(shifted[x], shift=yshift, axis=yaxes)
        return out

    def triple_integral(self, f: Observable, n: int):
        """avg f . (f o S^n) . (f o S^2n), exact on integer/object grids."""
        values = _as_values(f)
        return _mean_of_product(
            [values, self.pullback_values(values, n), self.pullback_values(values, 2 * n)]
        )


Model = Union[WeylSystem, RotationModel, GridWeylModel]


# ---- observables ----


@dataclass(frozen=True)
class ObservablePair:
    """An observable f with an optional cylinder weight window g.

    The weight is evaluated along the arithmetic sequence n^2 l^2 beta
    by the averaging drivers; this type only bundles and sanity-checks
    the pair.
    """

    f: Observable
    weight: Cylinder | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.f, (CoefficientTable, GridFunction, np.ndarray)):
            raise TypeError("f must be a CoefficientTable, GridFunction, or ndarray")

    def assert_unit_range(self) -> None:
        """Check 0 <= f <= 1 pointwise; only grid-backed observables qualify.

        Trig polynomials would need global optimization to verify a
        range, so they are rejected rather than half-checked.
        """
        if isinstance(self.f, CoefficientTable):
            raise TypeError("range check needs a grid-backed observable")
        values = _as_values(self.f)
        if values.dtype == object:
            flat = values.ravel()
            if any(v < 0 or v > 1 for v in flat):
                raise ValueError("observable leaves [0, 1]")
            return
        arr = np.asarray(values)
        if np.iscomplexobj(arr):
            if np.abs(arr.imag).max() > 1e-12:
                raise ValueError("observable is not real")
            arr = arr.real
        if arr.min() < -1e-12 or arr.max() > 1 + 1e-12:
            raise ValueError("observable leaves [0, 1]")


def kronecker_projection(f: Observable, d: int | None = None) -> Observable:
    """Average out the second coordinate block: f'(x) = integral of f(x, .).

    Trig polynomials drop every term whose y-frequency is nonzero; grid
    observables average over the trailing block of axes.  Exact object
    grids stay exact.
    """
    if isinstance(f, CoefficientTable):
        total = f.dim
        if d is None:
            if total % 2:
                raise ValueError("odd table dimension needs an explicit split point d")
            d = total // 2
        if not 1 <= d < total:
            raise ValueError(f"split point {d} outside 1..{total - 1}")
        out = CoefficientTable(d)
        for chi, coef in f:
            if any(chi.freq[d:]):
                continue
            kept = Character(chi.freq[:d])
            out[kept] = out[kept] + coef
        return out
    if isinstance(f, GridFunction):
        if d is None:
            if f.dim % 2:
                raise ValueError("odd grid dimension needs an explicit split point d")
            d = f.dim // 2
        if not 1 <= d < f.dim:
            raise ValueError(f"split point {d} outside 1..{f.dim - 1}")
        vals = f.values.mean(axis=tuple(range(d, f.dim)))
        return GridFunction(d, f.q, vals)
    arr = np.asarray(f)
    if d is None:
        if arr.ndim % 2:
            raise ValueError("odd array dimension needs an explicit split point d")
        d = arr.ndim // 2
    if not 1 <= d < arr.ndim:
        raise ValueError(f"split point {d} outside 1..{arr.ndim - 1}")
    axes = tuple(range(d, arr.ndim))
    if arr.dtype == object:
        return _exact_block_mean(arr, axes)
    return arr.mean(axis=axes)


def trig_progression_form(table: CoefficientTable) -> complex:
    """The progression form avg_{x,s} h(x) h(x+s) h(x+2s) of a trig polynomial.

    Orthogonality leaves the frequency matches nu, -2 nu, nu, so the
    form is sum over nu of h_hat(nu)^2 h_hat(-2 nu).
    """
    total = 0j
    for chi, coef in table:
        partner = table[Character(tuple(-2 * a for a in chi.freq))]
        if partner != 0:
            total += coef * coef * partner
    return total


# ---- averaging drivers ----


@dataclass(frozen=True)
class AveragesTrace:
    """Running averages (N, value) at strictly increasing checkpoints.

    Values are Fractions on the exact backends and floats otherwise;
    closed_form, when present, is the projected progression form the
    trace is converging toward (or being compared against).
    """

    checkpoints: tuple[tuple[int, object], ...]
    closed_form: object = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        pts = tuple((int(n), v) for n, v in self.checkpoints)
        if not pts:
            raise ValueError("a trace needs at least one checkpoint")
        for (a, _), (b, _) in zip(pts, pts[1:]):
            if b <= a:
                raise ValueError("checkpoint positions must be strictly increasing")
        if pts[0][0] < 1:
            raise ValueError("checkpoint positions start at 1")
        object.__setattr__(self, "checkpoints", pts)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def final_n(self) -> int:
        return self.checkpoints[-1][0]

    @property
    def value(self):
        return self.checkpoints[-1][1]

    @property
    def gap(self):
        if self.closed_form is None:
            return None
        return self.value - self.closed_form

    def rows(self) -> list[tuple]:
        out = []
        for n, v in self.checkpoints:
            if self.closed_form is None:
                out.append((n, v, None, None))
            else:
                out.append((n, v, self.closed_form, v - self.closed_form))
        return out

    def to_csv(self) -> str:
        lines = ["N,value,closed_form,gap"]
        for n, v, cf, gap in self.rows():
            cells = [str(n)] + [
                "" if w is None else repr(float(w)) for w in (v, cf, gap)
            ]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _default_checkpoints(n_max: int) -> list[int]:
    pts = []
    p = 1
    while p < n_max:
        pts.append(p)
        p *= 2
    pts.append(n_max)
    return pts


def _resolve_n_max(model: Model, n_max: int | None) -> int:
    if n_max is not None:
        n_max = int(n_max)
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        return n_max
    if isinstance(model, WeylSystem):
        raise ValueError("the continuous system has no period; pass an explicit n_max")
    return model.period


def triple_integrals(model: Model, f: Observable, n_values: Iterable[int], workers: int | None = None) -> list:
    """The per-step integrals avg f . f o S^n . f o S^2n for each requested n.

    A contiguous range 1..N on the trig backend runs through the
    closed-form series; everything else evaluates pointwise, optionally
    on a thread pool.  Results are returned in request order, so the
    reduction downstream is independent of the partitioning.
    """
    ns = [int(n) for n in n_values]
    if isinstance(model, WeylSystem) and ns == list(range(1, len(ns) + 1)) and ns:
        return list(model.correlation_series(f, len(ns)))
    if workers and workers > 1 and len(ns) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda n: model.triple_integral(f, n), ns))
    return [model.triple_integral(f, n) for n in ns]


def _weight_values(g: Cylinder | None, beta: TorusPoint | None, ell: int, ns: Sequence[int]):
    if g is None:
        return None
    if beta is None:
        raise ValueError("a cylinder weight needs its frequency beta")
    if beta.dim != g.dim:
        raise ValueError(f"beta dimension {beta.dim} does not match the weight dimension {g.dim}")
    ell = int(ell)
    return [g.normalized_value(beta.scale(n * n * ell * ell)) for n in ns]


def _checkpoint_averages(terms: Sequence, marks: Sequence[int]) -> list[tuple[int, object]]:
    exact = all(isinstance(t, Fraction) for t in terms)
    out = []
    if exact:
        acc = Fraction(0)
        prev = 0
        for mark in marks:
            acc += sum(terms[prev:mark], Fraction(0))
            prev = mark
            out.append((mark, acc / mark))
        return out
    acc_re, acc_im = 0.0, 0.0
    prev = 0
    for mark in marks:
        chunk = [complex(t) for t in terms[prev:mark]]
        acc_re = math.fsum([acc_re] + [t.real for t in chunk])
        acc_im = math.fsum([acc_im] + [t.imag for t in chunk])
        prev = mark
        if abs(acc_im) <= 1e-9 * max(1.0, abs(acc_re)):
            out.append((mark, acc_re / mark))
        else:
            out.append((mark, complex(acc_re, acc_im) / mark))
    return out


def _closed_form(model: Model, f: Observable):
    """The progression form of the rotation-factor marginal, when meaningful.

    For the continuous system this is always the limit candidate.  Grid
    models report it only when the rotation part generates the first
    factor; a non-generating model averages over a proper subgroup and
    the comparison would be apples to oranges.
    """
    if isinstance(model, WeylSystem):
        value = trig_progression_form(kronecker_projection(f, model.dim))
        if abs(value.imag) <= 1e-9 * max(1.0, abs(value.real)):
            return value.real
        return value
    if not model.is_generating:
        return None
    values = _as_values(f)
    if isinstance(model, RotationModel):
        proj = values
    else:
        proj = kronecker_projection(values, model.d)
    if _is_exact_dtype(np.asarray(proj)):
        proj = np.asarray(proj)
        if proj.dtype != object:
            proj = proj.astype(object)
        return roth_form_exact(proj, proj, proj)
    grid = GridFunction(proj.ndim, proj.shape[0], np.asarray(proj, dtype=complex))
    value = roth_form(grid, grid, grid, method="direct")
    return value.real if abs(value.imag) <= 1e-9 else value


def _model_metadata(model: Model) -> dict:
    if isinstance(model, WeylSystem):
        return {
            "model": "weyl system (rational rotation part, periodic model)",
            "d": model.dim,
            "alpha": model.alpha.to_json(),
        }
    if isinstance(model, RotationModel):
        return {
            "model": "rotation grid (periodic model)",
            "q": model.q,
            "step": list(model.step),
            "generating": model.is_generating,
        }
    return {
        "model": "weyl grid (periodic model)",
        "q": model.q,
        "alpha": list(model.alpha),
        "generating": model.is_generating,
    }


def weighted_average(
    model: Model,
    f: Observable,
    g: Cylinder | None = None,
    beta: TorusPoint | None = None,
    ell: int = 1,
    n_max: int | None = None,
    checkpoints: Sequence[int] | None = None,
    workers: int | None = None,
    integrals: Sequence | None = None,
) -> AveragesTrace:
    """The running averages (1/N) sum_{n<=N} g(n^2 l^2 beta) avg f . f o S^n . f o S^2n.

    g is a normalized cylinder window (density 1/measure on the window,
    0 off it) evaluated by exact membership; g = None means the constant
    weight 1, which turns this into the plain correlation average.  On
    grid models n_max may be omitted to mean one full period.  The
    integrals argument lets a caller reuse a precomputed series when
    sweeping many windows over the same observable.
    """
    n_max = _resolve_n_max(model, n_max)
    marks = sorted({int(m) for m in checkpoints}) if checkpoints else _default_checkpoints(n_max)
    if not marks or marks[0] < 1 or marks[-1] != n_max:
        raise ValueError("checkpoints must be inside 1..n_max and end at n_max")
    ns = list(range(1, n_max + 1))
    if integrals is None:
        integrals = triple_integrals(model, f, ns, workers=workers)
    elif len(integrals) != n_max:
        raise ValueError(f"expected {n_max} precomputed integrals, got {len(integrals)}")
    weights = _weight_values(g, beta, ell, ns)
    if weights is None:
        terms = list(integrals)
    else:
        terms = []
        for w, v in zip(weights, integrals):
            if isinstance(v, Fraction):
                terms.append(w * v)
            else:
                terms.append(complex(v) * float(w))
    meta = _model_metadata(model)
    meta["n_max"] = n_max
    if g is not None:
        meta["weight_measure"] = str(g.measure())
        meta["ell"] = int(ell)
        meta["beta"] = beta.to_json()
    return AveragesTrace(
        checkpoints=tuple(_checkpoint_averages(terms, marks)),
        closed_form=_closed_form(model, f),
        metadata=meta,
    )


def l3_average(
    model: Model,
    f: Observable,
    n_max: int | None = None,
    checkpoints: Sequence[int] | None = None,
    workers: int | None = None,
) -> AveragesTrace:
    """The unweighted correlation average, with its closed form attached.

    Equivalent to weighted_average with the constant weight; on a grid
    model with generating rotation part and n_max one full period, the
    rotation-model value matches the closed form exactly.
    """
    return weighted_average(
        model, f, g=None, beta=None, ell=1, n_max=n_max, checkpoints=checkpoints, workers=workers
    )


def max_triple_intersection(
    model: Union[RotationModel, GridWeylModel],
    mask: Observable,
    steps: Iterable[int],
    n_max: int,
):
    """Best return strength of a set along the allowed powers.

    Scans n in steps with 0 <= n <= n_max (n = 0 is the identity power)
    and returns (n*, measure of A intersect T^-n A intersect T^-2n A)
    at the maximizing n*, smallest first on ties.  The measure is the
    mean of the product of the three pulled-back indicators, so integer
    masks give exact rational values.
    """
    values = _as_values(mask)
    if values.shape != model.phase_space_shape:
        raise ValueError(f"mask must have shape {model.phase_space_shape}")
    candidates = sorted({int(n) for n in steps if 0 <= int(n) <= int(n_max)})
    if not candidates:
        raise ValueError("no admissible powers: steps has nothing in [0, n_max]")
    best_n, best_value = None, None
    for n in candidates:
        value = model.triple_integral(values, n)
        if best_value is None or value > best_value:
            best_n, best_value = n, value
    return best_n, best_value
