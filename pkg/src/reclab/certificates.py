"""Finite certificates of shifted-progression avoidance, and their algebra.

A certificate packages a horizon N, a subset B of {0, ..., N-1} stored
as a bitset, a finite shift set S, a progression length k, and a
rational density claim.  It asserts two finite facts: B holds at least
deltaPrime * N elements, and for every s in S the sets B, B - s, ...,
B - k*s have empty common intersection.  Both are checked exactly;
the intersection test is word-parallel, since bit i of the AND of the
right-shifted bitsets B >> (j*s) records whether the progression
i, i+s, ..., i+k*s lies entirely inside B.

Certificates are manufactured three ways.  The rotation route takes a
band set E on the torus (at most t coordinates further than a from 0)
together with an approximate Hamming ball U around the all-halves
point; when 2a + eps <= 1/2 and r > 2t + k, a point of E plus a point
of U always has more than t coordinates pushed out of the band, so E
and E + U are disjoint and B = {n : n*beta in E} avoids every return
time of beta to U.  The combination route merges two certificates into
one for S1 union m*S2, preferring the product of their band rotations
when that ancestry is recorded.  The square route rewrites S through
s -> s*s.  None of the constructions is trusted: every certificate
emitted by this module has passed verify_certificate, and a failed
candidate surfaces as a typed rejection rather than a bad object.
"""

from __future__ import annotations

import base64
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .bohr import BohrHammingBall, Frequency, _resolve_workers, set_enumerate
from .torus import ApproxHammingBall, TorusPoint, as_fraction, fraction_str

__all__ = [
    "BandWitness",
    "Certificate",
    "CertificateRejected",
    "SearchExhausted",
    "Verification",
    "band_ball_disjoint",
    "band_return_bitset",
    "build_band_witness",
    "certificate_from_json",
    "certificate_to_json",
    "combine_certificates",
    "load_certificate",
    "rotation_certificate",
    "sample_band_disjointness",
    "sample_band_measure",
    "save_certificate",
    "search_min_m",
    "square_certificate",
    "verify_certificate",
]

FILE_FORMAT_VERSION = 1

_WORD_BITS = 64


class CertificateRejected(Exception):
    """A constructed candidate failed re-verification.

    Raised by the combination and square operations when no candidate
    base set passes the checks at the requested parameters.  Carries
    the dilation factor (when one is in play) and the per-candidate
    diagnostics, so a search loop can report why each attempt died.
    """

    def __init__(self, message: str, diagnostics=None, m: int | None = None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
        self.m = m


class SearchExhausted(Exception):
    """A bounded search ran out of budget without a hit."""

    def __init__(self, message: str, details=None):
        super().__init__(message)
        self.details = details


# ---------------------------------------------------------------------------
# the certificate object and its verifier


@dataclass(frozen=True)
class Certificate:
    """Exact finite witness that B avoids k-step progressions of gap s.

    bits is an arbitrary-precision integer whose bit n records whether
    n lies in B; only bits below horizon may be set.  density_claim is
    the promised lower bound |B| >= density_claim * horizon, kept as a
    Fraction so the comparison is exact.  provenance is free-form JSON
    recording how the certificate was built; verification ignores it.
    """

    horizon: int
    bits: int
    shifts: tuple[int, ...]
    k: int
    density_claim: Fraction
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.bits < 0:
            raise ValueError("bitset must be nonnegative")
        if self.bits >> self.horizon:
            raise ValueError("bitset has members at or beyond the horizon")
        object.__setattr__(
            self, "shifts", tuple(sorted({int(s) for s in self.shifts}))
        )
        if self.k < 1:
            raise ValueError("progression length k must be at least 1")
        claim = as_fraction(self.density_claim)
        if not 0 <= claim <= 1:
            raise ValueError("density claim must lie in [0, 1]")
        object.__setattr__(self, "density_claim", claim)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def size(self) -> int:
        return self.bits.bit_count()

    @property
    def density(self) -> Fraction:
        return Fraction(self.size, self.horizon)

    def members(self) -> list[int]:
        """The elements of B in increasing order (costly for huge B)."""
        out = []
        x = self.bits
        while x:
            low = x & -x
            out.append(low.bit_length() - 1)
            x ^= low
        return out

    @classmethod
    def from_members(
        cls,
        horizon: int,
        members: Iterable[int],
        shifts: Sequence[int],
        k: int,
        density_claim,
        provenance: dict | None = None,
    ) -> "Certificate":
        bits = 0
        for n in members:
            if not 0 <= n < horizon:
                raise ValueError(f"member {n} outside [0, {horizon})")
            bits |= 1 << n
        return cls(horizon, bits, tuple(shifts), k, density_claim, provenance or {})


@dataclass(frozen=True)
class Verification:
    """Outcome of checking a certificate, with enough detail to debug.

    violating_shift is the smallest s in S whose progression test
    failed, and witness_start the smallest i with i, i+s, ..., i+k*s
    all in B.  Both are None when the emptiness condition holds.
    """

    ok: bool
    size: int
    density: Fraction
    required: Fraction
    density_ok: bool
    violating_shift: int | None = None
    witness_start: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def _progression_hits(bits: int, s: int, k: int) -> int:
    """Bitset of starts i with i, i+s, ..., i+k*s all in the given set."""
    acc = bits
    for j in range(1, k + 1):
        step = j * s
        acc &= bits >> step if step >= 0 else bits << -step
        if not acc:
            return 0
    return acc


def _scan_shifts(bits: int, shifts: Sequence[int], k: int):
    """First (s, start) violating the emptiness condition, else None."""
    for s in shifts:
        hit = _progression_hits(bits, s, k)
        if hit:
            return s, (hit & -hit).bit_length() - 1
    return None


def verify_certificate(cert: Certificate, workers: int | None = None) -> Verification:
    """Check the density and progression-emptiness conditions exactly.

    Shifts are scanned in increasing order and the first violation is
    reported.  With several workers the shift list is cut into
    contiguous chunks; the earliest violating chunk wins, so the
    outcome is independent of the worker count.
    """
    size = cert.bits.bit_count()
    density = Fraction(size, cert.horizon)
    density_ok = size >= cert.density_claim * cert.horizon
    shifts = cert.shifts
    w = min(_resolve_workers(workers), len(shifts)) if shifts else 1
    if w <= 1:
        found = _scan_shifts(cert.bits, shifts, cert.k)
    else:
        bounds = [(len(shifts) * i) // w for i in range(w + 1)]
        with ThreadPoolExecutor(max_workers=w) as pool:
            parts = pool.map(
                lambda span: _scan_shifts(cert.bits, shifts[span[0] : span[1]], cert.k),
                zip(bounds, bounds[1:]),
            )
            found = next((p for p in parts if p is not None), None)
    violating, start = found if found is not None else (None, None)
    ok = density_ok and violating is None
    return Verification(
        ok=ok,
        size=size,
        density=density,
        required=cert.density_claim,
        density_ok=density_ok,
        violating_shift=violating,
        witness_start=start,
    )


# ---------------------------------------------------------------------------
# band witnesses on the torus


@dataclass(frozen=True)
class BandWitness:
    """The set E of points with at most t coordinates off the zero band.

    A coordinate is off the band when its circular distance to 0 is a
    or more, so E = {x in T^r : w_a(x) <= t}.  Under the product
    measure the off-band count is Binomial(r, 1 - 2a), which makes
    m(E) an exact rational tail sum.  t = r is allowed and makes E the
    whole torus; that degenerate witness is useful in tests precisely
    because it can never be disjoint from its own translates.
    """

    r: int
    a: Fraction
    t: int

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ValueError("dimension r must be positive")
        a = as_fraction(self.a)
        if not 0 < a <= Fraction(1, 2):
            raise ValueError("band radius a must lie in (0, 1/2]")
        object.__setattr__(self, "a", a)
        if not 0 <= self.t <= self.r:
            raise ValueError("threshold t must lie in [0, r]")

    def contains(self, x: TorusPoint) -> bool:
        if x.dim != self.r:
            raise ValueError("dimension mismatch")
        return x.deviation_count(self.a) <= self.t

    def measure(self) -> Fraction:
        p_off = 1 - 2 * self.a
        p_in = 2 * self.a
        return sum(
            math.comb(self.r, j) * p_off**j * p_in ** (self.r - j)
            for j in range(self.t + 1)
        )

    def to_json(self) -> dict:
        return {"r": self.r, "a": fraction_str(self.a), "t": self.t}

    @classmethod
    def from_json(cls, data: dict) -> "BandWitness":
        return cls(r=int(data["r"]), a=as_fraction(data["a"]), t=int(data["t"]))


def band_ball_disjoint(witness: BandWitness, ball: ApproxHammingBall) -> bool:
    """Exact sufficient condition for E and E + U to be disjoint.

    Requires the ball centered at the all-halves point.  For x in E
    and u in U, every coordinate where neither deviates satisfies
    ||x_i + u_i|| > 1/2 - eps - a >= a as soon as 2a + eps <= 1/2
    (strict memberships absorb the boundary case), and there are at
    least r - t - k such coordinates.  With r > 2t + k that exceeds t,
    so x + u cannot lie in E.
    """
    if ball.dim != witness.r:
        raise ValueError("witness and ball dimensions differ")
    half = Fraction(1, 2)
    if any(c != half for c in ball.center.coords):
        return False
    if 2 * witness.a + ball.eps > half:
        return False
    return witness.r > 2 * witness.t + ball.k


def _halves(r: int) -> TorusPoint:
    return TorusPoint.of([Fraction(1, 2)] * r)


_EPS_MENU = (
    Fraction(1, 8),
    Fraction(1, 16),
    Fraction(1, 64),
    Fraction(1, 256),
    Fraction(1, 1024),
)


def build_band_witness(
    k: int,
    eta,
    r_max: int = 200,
    samples: int = 100_000,
    seed: int = 7,
) -> tuple[BandWitness, ApproxHammingBall, dict]:
    """Search for a band set of measure above eta disjoint from E + U.

    Scans r upward, pairing the largest threshold allowed by the
    counting argument (t = (r - k - 1) // 2) with a menu of shrinking
    ball radii; a candidate is accepted on an exact binomial-tail
    comparison m(E) > eta.  The returned proof dict records the
    counting parameters and a Monte Carlo disjointness probe of the
    accepted pair.  Large eta forces large r: the tail tends to 1/2
    from below as r grows, which is why eta < 1/2 is required.
    """
    eta = as_fraction(eta)
    if not 0 < eta < Fraction(1, 2):
        raise ValueError("need 0 < eta < 1/2")
    if k < 0:
        raise ValueError("ball parameter k must be nonnegative")
    for r in range(k + 1, r_max + 1):
        t = (r - k - 1) // 2
        for eps in _EPS_MENU:
            a = Fraction(1, 4) - eps
            witness = BandWitness(r=r, a=a, t=t)
            if witness.measure() <= eta:
                continue
            ball = ApproxHammingBall(center=_halves(r), k=k, eps=eps)
            if not band_ball_disjoint(witness, ball):
                raise RuntimeError("internal: counting argument violated")
            hits = sample_band_disjointness(witness, ball, samples=samples, seed=seed)
            if hits:
                raise RuntimeError(
                    f"internal: Monte Carlo found {hits} points of E in E + U"
                )
            proof = {
                "r": r,
                "t": t,
                "k": k,
                "a": fraction_str(a),
                "eps": fraction_str(eps),
                "slack": r - 2 * t - k,
                "measure": fraction_str(witness.measure()),
                "eta": fraction_str(eta),
                "mc_samples": samples,
                "mc_violations": hits,
            }
            return witness, ball, proof
    raise SearchExhausted(
        f"no band witness of measure above {eta} found with r up to {r_max}",
        details={"r_max": r_max, "eta": fraction_str(eta), "k": k},
    )


# ---------------------------------------------------------------------------
# Monte Carlo probes (float prefilter, exact confirmation)


def _exact_point(row: np.ndarray) -> TorusPoint:
    # floats are dyadic rationals, so this conversion is lossless
    return TorusPoint.of([Fraction(float(v)) for v in row])


def sample_band_measure(
    witness: BandWitness, samples: int = 1_000_000, seed: int = 2026
) -> Fraction:
    """Empirical frequency of E under uniform sampling.

    Rows are classified with float comparisons; any row with a
    coordinate within 1e-9 of the band edge is reclassified exactly,
    so the returned count is free of float boundary artifacts.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    a_f = float(witness.a)
    hits = 0
    remaining = samples
    chunk_rows = max(1, 4_000_000 // witness.r)
    while remaining:
        n = min(remaining, chunk_rows)
        remaining -= n
        x = rng.random((n, witness.r))
        dist = np.minimum(x, 1.0 - x)
        w = (dist >= a_f).sum(axis=1)
        near_edge = (np.abs(dist - a_f) < 1e-9).any(axis=1)
        hits += int(((w <= witness.t) & ~near_edge).sum())
        for i in np.flatnonzero(near_edge):
            if witness.contains(_exact_point(x[i])):
                hits += 1
    return Fraction(hits, samples)


def sample_band_disjointness(
    witness: BandWitness,
    ball: ApproxHammingBall,
    samples: int = 100_000,
    seed: int = 2026,
) -> int:
    """Count sampled pairs (x, u) in E x U whose sum lands back in E.

    A correct disjointness argument makes the answer 0.  E is sampled
    by rejection; u is drawn with k coordinates placed anywhere and
    the rest squeezed strictly inside the eps window, which lands in U
    by construction (not uniformly, but a falsification probe only
    needs coverage).  Suspect sums are flagged with a slack of 1e-9
    and every flagged pair is re-verified in exact arithmetic before
    it may count as a violation.
    """
    if ball.dim != witness.r:
        raise ValueError("witness and ball dimensions differ")
    rng = np.random.default_rng(seed)
    r = witness.r
    a_f = float(witness.a)
    eps_f = float(ball.eps)
    accept = float(witness.measure())
    chunk_rows = max(1, 4_000_000 // r)
    violations = 0
    produced = 0
    rounds = 0
    while produced < samples:
        rounds += 1
        if rounds > 500:
            raise RuntimeError("band acceptance rate too low for sampling")
        want = samples - produced
        draw = min(chunk_rows, int(want / max(accept, 1e-6) * 1.25) + 64)
        x = rng.random((draw, r))
        wx = (np.minimum(x, 1.0 - x) >= a_f).sum(axis=1)
        x = x[wx <= witness.t][:want]
        n = len(x)
        if n == 0:
            continue
        produced += n
        u = 0.5 + (rng.random((n, r)) * 2.0 - 1.0) * eps_f * (1.0 - 1e-12)
        if ball.k:
            order = rng.random((n, r)).argsort(axis=1)[:, : ball.k]
            u[np.arange(n)[:, None], order] = rng.random((n, ball.k))
        total = x + u
        total -= total >= 1.0
        dist = np.minimum(total, 1.0 - total)
        w_sum = (dist >= a_f + 1e-9).sum(axis=1)
        for i in np.flatnonzero(w_sum <= witness.t):
            xp = _exact_point(x[i])
            up = _exact_point(u[i])
            if (
                witness.contains(xp)
                and ball.contains(up)
                and witness.contains(xp + up)
            ):
                violations += 1
    return violations


# ---------------------------------------------------------------------------
# the rotation construction


def _as_frequency(beta) -> Frequency:
    if isinstance(beta, Frequency):
        return beta
    if isinstance(beta, TorusPoint):
        return Frequency(beta)
    raise TypeError(f"expected a Frequency or TorusPoint, got {type(beta).__name__}")


def band_return_bitset(witness: BandWitness, beta, n_max: int) -> int:
    """Bitset of {n in [0, n_max) : n*beta lies in E}, decided exactly.

    Each coordinate reduces to integer arithmetic modulo the common
    denominator of the coordinate and the band radius, exactly as the
    torus membership predicate does, then the off-band counts are
    accumulated with vectorized int64 arithmetic when that cannot
    overflow and with plain integers otherwise.
    """
    freq = _as_frequency(beta)
    if freq.dim != witness.r:
        raise ValueError("witness and frequency dimensions differ")
    if n_max < 1:
        raise ValueError("horizon must be positive")
    tables = []
    for coord in freq.beta.coords:
        big_q = math.lcm(coord.denominator, witness.a.denominator)
        step = coord.numerator * (big_q // coord.denominator) % big_q
        radius = witness.a.numerator * (big_q // witness.a.denominator)
        tables.append((step, radius, big_q))
    fits = all(step * (n_max - 1) < 2**63 for step, _, _ in tables)
    if fits:
        ns = np.arange(n_max, dtype=np.int64)
        off = np.zeros(n_max, dtype=np.int64)
        for step, radius, big_q in tables:
            t_val = (ns * step) % big_q
            off += np.minimum(t_val, big_q - t_val) >= radius
        inside = off <= witness.t
        packed = np.packbits(inside, bitorder="little").tobytes()
        return int.from_bytes(packed, "little")
    bits = 0
    for n in range(n_max):
        off_count = 0
        for step, radius, big_q in tables:
            t_val = (n * step) % big_q
            if min(t_val, big_q - t_val) >= radius:
                off_count += 1
                if off_count > witness.t:
                    break
        if off_count <= witness.t:
            bits |= 1 << n
    return bits


def rotation_certificate(
    witness: BandWitness,
    ball: ApproxHammingBall,
    beta,
    n_max: int,
    workers: int | None = None,
) -> Certificate:
    """Certificate from the orbit of beta through a band set.

    B collects the n in [0, n_max) with n*beta in E; S collects the
    return times of beta to the ball over [1, n_max]; k = 1.  The
    density claim is the achieved |B| / n_max, and the target measure
    m(E) is kept in the provenance for comparison.  When the band and
    ball satisfy the disjointness counting argument the verification
    cannot fail, so a failure here means the construction itself is
    broken and is raised as an internal error with the diagnostics.
    """
    freq = _as_frequency(beta)
    if freq.dim != witness.r or ball.dim != witness.r:
        raise ValueError("witness, ball, and frequency dimensions must agree")
    bits = band_return_bitset(witness, freq, n_max)
    returns = set_enumerate(BohrHammingBall(freq, ball), n_max, workers=workers)
    cert = Certificate(
        horizon=n_max,
        bits=bits,
        shifts=tuple(returns.elems),
        k=1,
        density_claim=Fraction(bits.bit_count(), n_max),
        provenance={
            "kind": "rotation",
            "beta": freq.beta.to_json(),
            "witness": witness.to_json(),
            "ball": ball.to_json(),
            "target_density": fraction_str(witness.measure()),
            "disjoint": band_ball_disjoint(witness, ball),
        },
    )
    check = verify_certificate(cert, workers=workers)
    if not check:
        raise RuntimeError(f"internal: rotation certificate failed its check: {check!r}")
    return cert


# ---------------------------------------------------------------------------
# combination, search over the dilation factor, and the square map


def _rotation_factors(provenance: dict) -> list[tuple[BandWitness, TorusPoint]] | None:
    """Band-rotation ancestry of a certificate, when recorded."""
    kind = provenance.get("kind")
    if kind == "rotation":
        witness = BandWitness.from_json(provenance["witness"])
        beta = TorusPoint.from_json(provenance["beta"])
        return [(witness, beta)]
    if kind == "rotation-product":
        out = []
        for entry in provenance["factors"]:
            out.append(
                (BandWitness.from_json(entry["witness"]), TorusPoint.from_json(entry["beta"]))
            )
        return out
    return None


def _factors_provenance(factors) -> dict:
    return {
        "kind": "rotation-product",
        "factors": [
            {"witness": w.to_json(), "beta": beta.to_json()} for w, beta in factors
        ],
    }


def combine_certificates(
    c1: Certificate,
    c2: Certificate,
    m: int,
    workers: int | None = None,
) -> Certificate:
    """Merge two k=1 certificates into one for S1 union m*S2.

    The merged density claim is 2 * d1 * d2.  When both inputs carry
    band-rotation ancestry the principled candidate is the product
    witness: the second factor's frequencies are divided by m, so a
    shift m*s moves them by s*beta2 exactly and the band argument
    applies coordinate-block by coordinate-block.  Plain intersections
    and the parent sets are tried as fallbacks.  Every candidate is
    re-verified; if none passes, the typed rejection carries the
    diagnostics rather than returning a broken certificate.

    A dilation whose surviving shifts are all already in S1 is
    rejected as vacuous: the merge would certify nothing beyond c1.
    An empty dilation (every m*s beyond the horizon) is allowed and
    reduces to c1 on the shared horizon.
    """
    if m < 1:
        raise ValueError("dilation factor m must be positive")
    for name, cert in (("first", c1), ("second", c2)):
        if cert.k != 1:
            raise ValueError(f"{name} certificate has k={cert.k}, need k=1")
        if not verify_certificate(cert, workers=workers):
            raise ValueError(f"{name} certificate does not verify; refuse to combine")
    n_max = min(c1.horizon, c2.horizon)
    kept = sorted(s for s in c1.shifts if s <= n_max)
    dilated = sorted(m * s for s in c2.shifts if m * s <= n_max)
    if dilated and set(dilated) <= set(kept):
        raise CertificateRejected(
            f"dilation by {m} adds no shifts beyond the first certificate",
            m=m,
        )
    shifts = tuple(sorted(set(kept) | set(dilated)))
    claim = 2 * c1.density_claim * c2.density_claim
    mask = (1 << n_max) - 1
    candidates: list[tuple[str, int, dict]] = []
    f1 = _rotation_factors(c1.provenance)
    f2 = _rotation_factors(c2.provenance)
    if f1 is not None and f2 is not None:
        divided = [
            (w, TorusPoint.of([c / m for c in beta.coords])) for w, beta in f2
        ]
        factors = f1 + divided
        bits = mask
        for w, beta in factors:
            bits &= band_return_bitset(w, Frequency(beta), n_max)
        candidates.append(("product-rotation", bits, _factors_provenance(factors)))
    base_prov = {
        "kind": "combined",
        "m": m,
        "parents": [
            c1.provenance.get("kind", "bare"),
            c2.provenance.get("kind", "bare"),
        ],
    }
    candidates.append(("intersection", c1.bits & c2.bits & mask, base_prov))
    candidates.append(("first", c1.bits & mask, base_prov))
    candidates.append(("second", c2.bits & mask, base_prov))
    failures = []
    for label, bits, prov in candidates:
        cert = Certificate(
            horizon=n_max,
            bits=bits,
            shifts=shifts,
            k=1,
            density_claim=claim,
            provenance={**prov, "candidate": label, "m": m},
        )
        check = verify_certificate(cert, workers=workers)
        if check:
            return cert
        failures.append((label, check))
    raise CertificateRejected(
        f"no candidate base set verifies for S1 union {m}*S2",
        diagnostics=failures,
        m=m,
    )


def search_min_m(
    c1: Certificate,
    c2: Certificate,
    m_max: int,
    workers: int | None = None,
) -> tuple[int, Certificate]:
    """Smallest dilation factor in [1, m_max] that combines, with proof.

    Linear scan; on exhaustion the raised error lists every attempted
    m with the reason it was rejected.
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    attempts = []
    for m in range(1, m_max + 1):
        try:
            return m, combine_certificates(c1, c2, m, workers=workers)
        except CertificateRejected as exc:
            attempts.append((m, str(exc)))
    raise SearchExhausted(
        f"no dilation factor up to {m_max} yields a verified combination",
        details=attempts,
    )


def square_certificate(
    cert: Certificate,
    bits: int | None = None,
    workers: int | None = None,
) -> Certificate:
    """Rewrite the shift set through s -> s*s and re-verify.

    The base set defaults to the input certificate's; a caller may
    supply a different bitset over the same horizon.  Shifts whose
    square exceeds the horizon stay in the set (their condition is
    vacuously true over a finite window).
    """
    squared = tuple(sorted({s * s for s in cert.shifts}))
    out = Certificate(
        horizon=cert.horizon,
        bits=cert.bits if bits is None else bits,
        shifts=squared,
        k=cert.k,
        density_claim=cert.density_claim,
        provenance={"kind": "square", "parent": dict(cert.provenance)},
    )
    check = verify_certificate(out, workers=workers)
    if not check:
        raise CertificateRejected(
            "base set does not certify the squared shifts",
            diagnostics=[("square", check)],
        )
    return out


# ---------------------------------------------------------------------------
# bit-exact persistence


def _payload_length(horizon: int) -> int:
    words = (horizon + _WORD_BITS - 1) // _WORD_BITS
    return words * (_WORD_BITS // 8)


def certificate_to_json(cert: Certificate) -> dict:
    """Single-document form: JSON header plus base64 bitset payload.

    The payload is the bitset in little-endian order, padded to whole
    64-bit words; padding bits are zero by the horizon invariant.
    """
    payload = cert.bits.to_bytes(_payload_length(cert.horizon), "little")
    return {
        "version": FILE_FORMAT_VERSION,
        "N": cert.horizon,
        "k": cert.k,
        "deltaPrime": fraction_str(cert.density_claim),
        "S": list(cert.shifts),
        "provenance": cert.provenance,
        "payload": base64.b64encode(payload).decode("ascii"),
    }


def certificate_from_json(data: dict) -> Certificate:
    version = data.get("version")
    if version != FILE_FORMAT_VERSION:
        raise ValueError(f"unsupported certificate format version: {version!r}")
    horizon = int(data["N"])
    raw = base64.b64decode(data["payload"])
    if len(raw) != _payload_length(horizon):
        raise ValueError(
            f"payload holds {len(raw)} bytes, expected {_payload_length(horizon)}"
        )
    return Certificate(
        horizon=horizon,
        bits=int.from_bytes(raw, "little"),
        shifts=tuple(int(s) for s in data["S"]),
        k=int(data["k"]),
        density_claim=as_fraction(data["deltaPrime"]),
        provenance=dict(data.get("provenance") or {}),
    )


def save_certificate(cert: Certificate, path) -> None:
    """Write atomically: compose to a sibling temp file, then rename."""
    target = os.fspath(path)
    tmp = target + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(certificate_to_json(cert), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, target)


def load_certificate(path) -> Certificate:
    with open(os.fspath(path), "r", encoding="utf-8") as fh:
        return certificate_from_json(json.load(fh))
