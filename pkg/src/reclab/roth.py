"""Triple correlation forms on grid groups and quotient projections.

The central object is the progression form

    I(f0, f1, f2) = avg_{x, s} f0(x) f1(x + s) f2(x + 2s)

over Z_q^d.  It is computed two independent ways: directly from the
definition, and through the spectral identity

    I = sum_n fhat0(n) fhat1(-2n) fhat2(n),

whose derivation needs nothing but orthogonality of characters.  The
spectral route is only offered on odd grids, where n -> -2n permutes the
frequencies; the direct route works everywhere and the two must agree to
near machine precision whenever both run.

Projecting one slot of the form onto the functions invariant under a
subgroup K is a Fourier truncation to the annihilator of K, so the cost
of projecting is controlled by the largest coefficient outside the
annihilator.  Both the coset-averaging and mask forms of the projection
are implemented and cross-checked.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .harmonic import GridFunction
from .lattice import SubgroupModel

__all__ = [
    "annihilator_contains",
    "quotient_gap_bound",
    "quotient_project",
    "quotient_project_exact",
    "quotient_project_spectral",
    "roth_form",
    "roth_form_exact",
]


def _check_triple(f0: GridFunction, f1: GridFunction, f2: GridFunction) -> None:
    if not (f0.dim == f1.dim == f2.dim and f0.q == f1.q == f2.q):
        raise ValueError("all three functions must live on the same grid")


def _roll_to(values: np.ndarray, shift: Sequence[int]) -> np.ndarray:
    """Array a with a[x] = values[x + shift]."""
    return np.roll(values, shift=tuple(-int(s) for s in shift), axis=tuple(range(values.ndim)))


def roth_form(
    f0: GridFunction, f1: GridFunction, f2: GridFunction, method: str = "direct"
) -> complex:
    """The progression form avg_{x,s} f0(x) f1(x+s) f2(x+2s).

    method "direct" runs the definition; "spectral" runs the coefficient
    sum and raises on even q, where doubling frequencies is not a
    permutation and the spectral route is not offered.
    """
    _check_triple(f0, f1, f2)
    q, dim = f0.q, f0.dim
    if method == "direct":
        total = 0j
        for s in np.ndindex(*(q,) * dim):
            term = f0.values * _roll_to(f1.values, s) * _roll_to(f2.values, [2 * a for a in s])
            total += term.mean()
        return complex(total / q**dim)
    if method == "spectral":
        if q % 2 == 0:
            raise ValueError(
                f"spectral route needs an odd grid, got q={q}; use the direct route"
            )
        h0 = f0.dft().values
        h1 = f1.dft().values
        h2 = f2.dft().values
        idx = np.indices(h1.shape)
        h1_at_minus_2n = h1[tuple((-2 * comp) % q for comp in idx)]
        return complex(np.sum(h0 * h1_at_minus_2n * h2))
    raise ValueError(f"unknown method {method!r}")


def roth_form_exact(a0: np.ndarray, a1: np.ndarray, a2: np.ndarray) -> Fraction:
    """The progression form for exact rational arrays, no floats anywhere."""
    if not (a0.shape == a1.shape == a2.shape):
        raise ValueError("shape mismatch")
    q = a0.shape[0]
    dim = a0.ndim
    total = Fraction(0)
    for x in np.ndindex(*a0.shape):
        for s in np.ndindex(*a0.shape):
            y = tuple((a + b) % q for a, b in zip(x, s))
            z = tuple((a + 2 * b) % q for a, b in zip(x, s))
            total += a0[x] * a1[y] * a2[z]
    return total / Fraction(q ** (2 * dim))


# ---- quotient projections ----


def annihilator_contains(subgroup: SubgroupModel, freq: Sequence[int]) -> bool:
    """Whether the character with this frequency is trivial on the subgroup."""
    if len(freq) != subgroup.dim:
        raise ValueError("frequency width must match the subgroup ambient")
    q = subgroup.q
    return all(
        sum(n * k for n, k in zip(freq, row)) % q == 0 for row in subgroup.basis
    )


def quotient_project(f: GridFunction, subgroup: SubgroupModel) -> GridFunction:
    """Average f over cosets of the subgroup: the invariant part of f."""
    if (subgroup.dim, subgroup.q) != (f.dim, f.q):
        raise ValueError("subgroup must live on the same grid as f")
    acc = np.zeros_like(f.values)
    elems = subgroup.elements()
    for k in elems:
        acc += _roll_to(f.values, k)
    return GridFunction(f.dim, f.q, acc / len(elems))


def quotient_project_exact(values: np.ndarray, subgroup: SubgroupModel) -> np.ndarray:
    """Coset averaging for exact rational arrays."""
    if values.shape != (subgroup.q,) * subgroup.dim:
        raise ValueError("array shape must match the subgroup ambient")
    elems = subgroup.elements()
    acc = np.zeros(values.shape, dtype=object)
    for k in elems:
        acc = acc + _roll_to(values, k)
    return acc / len(elems)


def quotient_project_spectral(f: GridFunction, subgroup: SubgroupModel) -> GridFunction:
    """The same projection as a Fourier mask onto the annihilator."""
    if (subgroup.dim, subgroup.q) != (f.dim, f.q):
        raise ValueError("subgroup must live on the same grid as f")
    hat = f.dft()
    masked = np.zeros_like(hat.values)
    for idx in np.ndindex(*hat.values.shape):
        if annihilator_contains(subgroup, idx):
            masked[idx] = hat.values[idx]
    return GridFunction(f.dim, f.q, masked).idft()


def quotient_gap_bound(
    f0: GridFunction,
    f1: GridFunction,
    f2: GridFunction,
    subgroup: SubgroupModel,
) -> dict:
    """How much projecting the last slot moves the form, with its bound.

    kappa is the largest |fhat2| outside the annihilator of the subgroup;
    by Cauchy-Schwarz on the spectral identity the move is at most
    kappa * ||f0||_2 * ||f1||_2.  Odd grids only, since the identity's
    frequency pairing must be a permutation for the norms to match.
    """
    _check_triple(f0, f1, f2)
    if f0.q % 2 == 0:
        raise ValueError(f"gap bound needs an odd grid, got q={f0.q}")
    if (subgroup.dim, subgroup.q) != (f0.dim, f0.q):
        raise ValueError("subgroup must live on the same grid")
    h2 = f2.dft().values
    kappa = 0.0
    for idx in np.ndindex(*h2.shape):
        if not annihilator_contains(subgroup, idx):
            kappa = max(kappa, abs(complex(h2[idx])))
    bound = kappa * math.sqrt(f0.norm_sq() * f1.norm_sq())
    form = roth_form(f0, f1, f2)
    projected_form = roth_form(f0, f1, quotient_project(f2, subgroup))
    return {
        "kappa": kappa,
        "bound": bound,
        "form": form,
        "projected_form": projected_form,
        "gap": abs(form - projected_form),
    }
