"""Characters and Fourier coefficients on tori and on cyclic grids.

Two function models appear side by side.  Trigonometric polynomials on T^r
are finitely supported coefficient tables indexed by integer frequency
vectors; their L2 theory is exact through the coefficients.  Grid
functions live on Z_q^d with normalized counting measure and are handled
by a DFT whose convention matches the continuous one:

    fhat(n) = q^(-d) * sum_x f(x) e(-n.x / q),      f(x) = sum_n fhat(n) e(n.x / q)

so Plancherel reads sum |fhat|^2 = q^(-d) sum |f|^2 and the hat of the
normalized convolution (1/q^d) sum_t f(t) g(x - t) is the pointwise
product.

The Fourier coefficient of the normalized indicator of a cylinder box has
a closed form: coordinates outside the pinned set integrate a full
character (zero unless that frequency vanishes), pinned ones contribute
e(-n_i y_i) sin(2 pi n_i eta) / (2 pi n_i eta).  This makes certain
coefficients vanish *structurally*, i.e. by the integer support pattern
alone, and those zeros are asserted without floating point.
"""

from __future__ import annotations

import cmath
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .torus import ApproxHammingBall, Cylinder, TorusPoint, as_fraction, wrap_unit

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Character:
    """Character x -> e(sum n_i x_i) of T^r, given by its frequency vector."""

    freq: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "freq", tuple(int(n) for n in self.freq))
        if len(self.freq) == 0:
            raise ValueError("characters need dimension >= 1")

    @property
    def dim(self) -> int:
        return len(self.freq)

    @property
    def trivial(self) -> bool:
        return all(n == 0 for n in self.freq)

    def phase_at(self, x: TorusPoint) -> Fraction:
        """Exact phase sum n_i x_i reduced mod 1."""
        if x.dim != self.dim:
            raise ValueError("dimension mismatch")
        return wrap_unit(sum((n * c for n, c in zip(self.freq, x.coords)), Fraction(0)))

    def value_at(self, x: TorusPoint) -> complex:
        return cmath.exp(2j * cmath.pi * float(self.phase_at(x)))

    def __mul__(self, other: "Character") -> "Character":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return Character(tuple(a + b for a, b in zip(self.freq, other.freq)))

    def inverse(self) -> "Character":
        return Character(tuple(-a for a in self.freq))


class CoefficientTable:
    """Finitely supported map Character -> complex coefficient on T^r."""

    def __init__(self, dim: int, entries: Mapping[Character, complex] | None = None):
        if dim < 1:
            raise ValueError("dimension >= 1 required")
        self.dim = dim
        self._data: dict[Character, complex] = {}
        if entries:
            for chi, v in entries.items():
                self[chi] = v

    def __getitem__(self, chi: Character) -> complex:
        return self._data.get(chi, 0j)

    def __setitem__(self, chi: Character, value: complex) -> None:
        if chi.dim != self.dim:
            raise ValueError("dimension mismatch")
        v = complex(value)
        if v == 0:
            self._data.pop(chi, None)
        else:
            self._data[chi] = v

    def __iter__(self):
        return iter(self._data.items())

    def __len__(self) -> int:
        return len(self._data)

    def support(self) -> list[Character]:
        return list(self._data.keys())

    def norm_sq(self) -> float:
        """Squared L2 norm through the coefficients."""
        return sum(abs(v) ** 2 for v in self._data.values())

    def translate(self, s: TorusPoint) -> "CoefficientTable":
        """Coefficients of x -> f(x - s): each entry picks up chi(s)."""
        out = CoefficientTable(self.dim)
        for chi, v in self._data.items():
            out[chi] = chi.value_at(s) * v
        return out

    def evaluate(self, x: TorusPoint) -> complex:
        return sum(v * chi.value_at(x) for chi, v in self._data.items())

    def pointwise_product_coefficients(self, other: "CoefficientTable") -> "CoefficientTable":
        """Coefficients of the product function (convolution of tables)."""
        out = CoefficientTable(self.dim)
        for chi, a in self._data.items():
            for psi, b in other._data.items():
                out[chi * psi] = out[chi * psi] + a * b
        return out

    def to_json(self) -> list[dict]:
        rows = sorted(self._data.items(), key=lambda kv: kv[0].freq)
        return [
            {"n": list(chi.freq), "re": v.real, "im": v.imag} for chi, v in rows
        ]

    @classmethod
    def from_json(cls, dim: int, rows: Iterable[dict]) -> "CoefficientTable":
        out = cls(dim)
        for row in rows:
            chi = Character(tuple(row["n"]))
            out[chi] = out[chi] + complex(row["re"], row["im"])
        return out


# ---- cylinder coefficients ----


def cylinder_coefficient_is_structural_zero(cyl: Cylinder, chi: Character) -> bool:
    """True when the coefficient vanishes by support pattern alone.

    Any nonzero frequency on a coordinate outside the pinned set
    integrates a full nontrivial character, so the product is exactly 0.
    """
    if chi.dim != cyl.dim:
        raise ValueError("dimension mismatch")
    pinned = set(cyl.index_set)
    return any(n != 0 and (i + 1) not in pinned for i, n in enumerate(chi.freq))


def cylinder_fourier(cyl: Cylinder, chi: Character) -> complex:
    """Fourier coefficient of the normalized cylinder indicator.

    Exactness note: structural zeros are exact; everything else is a
    product of sinc factors evaluated in double precision.
    """
    if cylinder_coefficient_is_structural_zero(cyl, chi):
        return 0j
    value = 1 + 0j
    eta = float(cyl.eta)
    pinned = set(cyl.index_set)
    for i, n in enumerate(chi.freq):
        if n == 0 or (i + 1) not in pinned:
            continue
        y_i = float(cyl.center.coords[i])
        phase = cmath.exp(-2j * cmath.pi * n * y_i)
        value *= phase * math.sin(TWO_PI * n * eta) / (TWO_PI * n * eta)
    return value


def cylinder_coefficient_table(cyl: Cylinder, freqs: Iterable[tuple[int, ...]]) -> CoefficientTable:
    out = CoefficientTable(cyl.dim)
    for f in freqs:
        chi = Character(f)
        out[chi] = cylinder_fourier(cyl, chi)
    return out


# ---- top-k selection ----


def top_k_characters(
    table: CoefficientTable,
    k: int,
    norm_bound: float,
    restrict: Callable[[Character], bool] | None = None,
) -> tuple[list[Character], float]:
    """The k largest |coefficient| characters and the residual sup.

    Ties break lexicographically on the frequency tuple, smallest first.
    Every excluded character has |coeff| < norm_bound / sqrt(k); the
    sharper bound norm_bound / sqrt(1 + k) is asserted as well.  Both
    follow from Plancherel when norm_bound really dominates the L2 norm.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    entries = [
        (chi, v) for chi, v in table if restrict is None or restrict(chi)
    ]
    entries.sort(key=lambda kv: (-abs(kv[1]), kv[0].freq))
    chosen = [chi for chi, _ in entries[:k]]
    residual = abs(entries[k][1]) if len(entries) > k else 0.0
    fuzz = 1e-12
    if residual >= norm_bound / math.sqrt(k) + fuzz:
        raise ValueError(
            f"residual {residual} violates norm_bound/sqrt(k); is the norm bound valid?"
        )
    if residual >= norm_bound / math.sqrt(1 + k) + fuzz:
        raise ValueError(
            f"residual {residual} violates the sharper norm_bound/sqrt(1+k) bound"
        )
    return chosen, residual


# ---- annihilating cylinders ----


def annihilating_cylinder(
    ball: ApproxHammingBall, chars: Sequence[Character]
) -> Cylinder:
    """A box on r - k coordinates killing every listed character's coefficient.

    For each character, drop its smallest-index nonzero coordinate; if the
    drops collide, remove the largest still-pinned indices until exactly k
    coordinates are free.  Every translate of the result keeps the zeros,
    since translation only multiplies coefficients by a phase.
    """
    r, k = ball.dim, ball.k
    if len(chars) > k:
        raise ValueError(f"at most k={k} characters can be annihilated, got {len(chars)}")
    removed: set[int] = set()
    for chi in chars:
        if chi.dim != r:
            raise ValueError("character dimension mismatch")
        if chi.trivial:
            raise ValueError("cannot annihilate the trivial character")
        idx = next(i + 1 for i, n in enumerate(chi.freq) if n != 0)
        removed.add(idx)
    # pad with the largest surviving indices so |I| = r - k exactly
    for i in range(r, 0, -1):
        if len(removed) == k:
            break
        removed.add(i)
    index_set = tuple(i for i in range(1, r + 1) if i not in removed)
    cyl = Cylinder(dim=r, index_set=index_set, center=ball.center, eta=ball.eps)
    for chi in chars:
        assert cylinder_coefficient_is_structural_zero(cyl, chi)
    return cyl


def uniformizing_cylinder(
    ball: ApproxHammingBall,
    table: CoefficientTable,
    norm_bound: float = 1.0,
    restrict: Callable[[Character], bool] | None = None,
) -> tuple[Cylinder, dict]:
    """Box whose density convolution flattens the k largest coefficients.

    Selection runs over nontrivial characters only (the trivial one is
    preserved: the box density has mean coefficient 1).  Off the selected
    set, |fhat . ghat| <= |fhat| < norm_bound / sqrt(k).
    """

    def keep(chi: Character) -> bool:
        if chi.trivial:
            return False
        return restrict is None or restrict(chi)

    chosen, residual = top_k_characters(table, ball.k, norm_bound, restrict=keep)
    cyl = annihilating_cylinder(ball, chosen)
    report = {
        "selected": [list(c.freq) for c in chosen],
        "residual": residual,
        "bound": norm_bound / math.sqrt(ball.k),
        "sharper_bound": norm_bound / math.sqrt(1 + ball.k),
    }
    return cyl, report


# ---- grid functions ----

GRID_MAGIC = b"GRIDFN01"
_DIRECT_DFT_LIMIT = 4096


@dataclass
class GridFunction:
    """Complex function on Z_q^d, stored as a (q, ..., q) array."""

    dim: int
    q: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.q < 1 or self.dim < 1:
            raise ValueError("need q >= 1 and dim >= 1")
        arr = np.asarray(self.values, dtype=np.complex128)
        if arr.shape != (self.q,) * self.dim:
            raise ValueError(f"values must have shape {(self.q,) * self.dim}")
        self.values = arr

    @classmethod
    def from_callable(cls, dim: int, q: int, fn: Callable[..., complex]) -> "GridFunction":
        grid = np.empty((q,) * dim, dtype=np.complex128)
        for idx in np.ndindex(*grid.shape):
            grid[idx] = fn(*idx)
        return cls(dim, q, grid)

    @classmethod
    def random(cls, dim: int, q: int, seed: int) -> "GridFunction":
        rng = np.random.default_rng(seed)
        vals = rng.standard_normal((q,) * dim) + 1j * rng.standard_normal((q,) * dim)
        return cls(dim, q, vals)

    def size(self) -> int:
        return self.q**self.dim

    def mean(self) -> complex:
        return complex(self.values.mean())

    def norm_sq(self) -> float:
        """Squared L2 norm under normalized counting measure."""
        return float(np.mean(np.abs(self.values) ** 2))

    def dft(self, force_direct: bool | None = None) -> "GridFunction":
        """Coefficient array fhat(n) = q^(-d) sum f(x) e(-n.x/q)."""
        use_direct = (
            force_direct
            if force_direct is not None
            else self.size() <= _DIRECT_DFT_LIMIT
        )
        if use_direct:
            out = self.values
            kernel = _dft_kernel(self.q)
            for axis in range(self.dim):
                out = np.tensordot(out, kernel, axes=([0], [1]))
            # tensordot cycles axes; after dim applications order is restored
            return GridFunction(self.dim, self.q, out / self.size())
        return GridFunction(self.dim, self.q, np.fft.fftn(self.values) / self.size())

    def idft(self, force_direct: bool | None = None) -> "GridFunction":
        """Inverse of dft: f(x) = sum fhat(n) e(n.x/q)."""
        use_direct = (
            force_direct
            if force_direct is not None
            else self.size() <= _DIRECT_DFT_LIMIT
        )
        if use_direct:
            out = self.values
            kernel = np.conj(_dft_kernel(self.q))
            for axis in range(self.dim):
                out = np.tensordot(out, kernel, axes=([0], [1]))
            return GridFunction(self.dim, self.q, out)
        return GridFunction(self.dim, self.q, np.fft.ifftn(self.values) * self.size())

    def convolve(self, other: "GridFunction") -> "GridFunction":
        """Normalized convolution (f * g)(x) = q^(-d) sum_t f(t) g(x - t)."""
        if (other.dim, other.q) != (self.dim, self.q):
            raise ValueError("grid mismatch")
        fh = np.fft.fftn(self.values)
        gh = np.fft.fftn(other.values)
        return GridFunction(
            self.dim, self.q, np.fft.ifftn(fh * gh) / self.size()
        )

    def translate(self, shift: Sequence[int]) -> "GridFunction":
        if len(shift) != self.dim:
            raise ValueError("shift dimension mismatch")
        out = self.values
        for axis, s in enumerate(shift):
            out = np.roll(out, s, axis=axis)
        return GridFunction(self.dim, self.q, out)

    # binary format: 8-byte magic, uint32 d, uint32 q, then q^d little-endian
    # (re, im) float64 pairs in C order.
    def to_bytes(self) -> bytes:
        header = GRID_MAGIC + struct.pack("<II", self.dim, self.q)
        flat = np.ascontiguousarray(self.values.ravel())
        pairs = np.empty(2 * flat.size, dtype="<f8")
        pairs[0::2] = flat.real
        pairs[1::2] = flat.imag
        return header + pairs.tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> "GridFunction":
        if payload[:8] != GRID_MAGIC:
            raise ValueError("bad magic; not a grid function blob")
        dim, q = struct.unpack("<II", payload[8:16])
        expected = 16 + 16 * q**dim
        if len(payload) != expected:
            raise ValueError(f"expected {expected} bytes, got {len(payload)}")
        pairs = np.frombuffer(payload, dtype="<f8", offset=16)
        vals = pairs[0::2] + 1j * pairs[1::2]
        return cls(dim, q, vals.reshape((q,) * dim))

    def spectrum_table(self, tol: float = 0.0) -> CoefficientTable:
        """Spectrum as a coefficient table with centered frequencies."""
        hat = self.dft()
        out = CoefficientTable(self.dim)
        for idx in np.ndindex(*hat.values.shape):
            v = complex(hat.values[idx])
            if abs(v) > tol:
                out[Character(tuple(centered_residue(i, self.q) for i in idx))] = v
        return out


def _dft_kernel(q: int) -> np.ndarray:
    j = np.arange(q)
    return np.exp(-2j * np.pi * np.outer(j, j) / q)


def centered_residue(n: int, q: int) -> int:
    """Representative of n mod q in (-q/2, q/2]."""
    m = n % q
    return m - q if 2 * m > q else m


def grid_plancherel_gap(f: GridFunction) -> float:
    """|sum |fhat|^2 - q^(-d) sum |f|^2|, should be ~machine epsilon."""
    hat = f.dft()
    lhs = float(np.sum(np.abs(hat.values) ** 2))
    return abs(lhs - f.norm_sq())
