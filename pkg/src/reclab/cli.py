"""Command-line front ends: lab, bohr, weyl, roth, and cert.

Each console script wraps one slice of the library with argparse and
stable text output: experiment orchestration (lab), return-set
enumeration (bohr), weighted-average traces (weyl), quotient-gap spot
checks (roth), and certificate plumbing (cert).  Exit codes make the
verbs scriptable: 0 is success, 1 is a negative verdict (REFUTED, a
failed verification), 2 is a usage or pipeline error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bohr import (
    BohrHammingBall,
    Frequency,
    named_convergent,
    set_enumerate,
    set_to_json,
    sqrt_set_enumerate,
)
from .certificates import (
    CertificateRejected,
    SearchExhausted,
    build_band_witness,
    combine_certificates,
    load_certificate,
    rotation_certificate,
    save_certificate,
    search_min_m,
    square_certificate,
    verify_certificate,
)
from .experiments import (
    ExperimentConfig,
    ExperimentError,
    REFUTED,
    list_experiments,
    resolve_workers,
    run_experiment,
    write_atomic,
)
from .harmonic import Character, CoefficientTable, GridFunction, annihilating_cylinder
from .lattice import SubgroupModel
from .roth import quotient_gap_bound
from .torus import ApproxHammingBall, TorusPoint, as_fraction, fraction_str
from .weyl import WeylSystem, weighted_average

_NAMED = ("sqrt2", "sqrt3", "golden")


def _rational(text: str) -> Fraction:
    """A fraction string, or a named convergent such as sqrt2."""
    if text in _NAMED:
        return named_convergent(text)
    try:
        return as_fraction(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _workers_arg(value: int | None) -> int | None:
    cfg = ExperimentConfig(experiment="-", workers=value)
    return resolve_workers(cfg)


# ---- lab ----


def main_lab(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lab", description="Run configured experiments and write reports."
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("config", help="path to the JSON config document")
    sub.add_parser("list-experiments", help="list registered experiment ids")
    args = parser.parse_args(argv)

    if args.verb == "list-experiments":
        for name, summary in list_experiments():
            print(f"{name}: {summary}")
        return 0

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = ExperimentConfig.from_json(doc)
        report = run_experiment(config)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.lines:
        print(line)
    print(f"status: {report.status}")
    print(f"report: {config.out_dir}/report.json")
    return 1 if report.status == REFUTED else 0


# ---- bohr ----


def main_bohr(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bohr", description="Enumerate Bohr-Hamming return sets."
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("enum", help="list members up to a horizon as run-length JSON")
    p.add_argument("--r", type=int, required=True, help="torus dimension")
    p.add_argument("--k", type=int, required=True, help="coordinates allowed to deviate")
    p.add_argument("--eps", type=_rational, required=True, help="deviation radius")
    p.add_argument(
        "--freq", type=_rational, nargs="+", required=True,
        help="r frequency coordinates (fractions or sqrt2/sqrt3/golden)",
    )
    p.add_argument("--N", type=int, required=True, help="enumeration horizon")
    p.add_argument("--sqrt", action="store_true", help="enumerate square-root returns")
    p.add_argument("--center", type=_rational, nargs="+", help="ball center, default 0")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="write JSON here instead of stdout")
    args = parser.parse_args(argv)

    if len(args.freq) != args.r:
        parser.error(f"expected {args.r} frequency coordinates, got {len(args.freq)}")
    center = args.center if args.center is not None else [Fraction(0)] * args.r
    if len(center) != args.r:
        parser.error(f"expected {args.r} center coordinates, got {len(center)}")
    ball = ApproxHammingBall(TorusPoint.of(center), args.k, args.eps)
    bh = BohrHammingBall(Frequency(TorusPoint.of(args.freq), generating=True), ball)
    scan = sqrt_set_enumerate if args.sqrt else set_enumerate
    result = scan(bh, args.N, workers=_workers_arg(args.workers))
    doc = set_to_json(result.elems, args.N)
    doc["density"] = fraction_str(result.density)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


# ---- weyl ----


def _load_table(path: str, dim: int) -> CoefficientTable:
    """Trig polynomial file: {"entries": [{"freq": [...], "coef": [re, im]}]}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    entries = doc.get("entries")
    if not isinstance(entries, list):
        raise ValueError("polynomial file needs an 'entries' list")
    table = CoefficientTable(dim)
    for i, entry in enumerate(entries):
        freq = entry.get("freq")
        coef = entry.get("coef", [1.0, 0.0])
        if not isinstance(freq, list) or len(freq) != dim:
            raise ValueError(f"entries[{i}]: freq must have {dim} integers")
        table[Character(tuple(int(n) for n in freq))] += complex(coef[0], coef[1])
    return table


def main_weyl(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="weyl", description="Weighted correlation traces on skew products."
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("avg", help="trace of weighted triple-correlation averages")
    p.add_argument("--d", type=int, required=True, help="rotation dimension")
    p.add_argument(
        "--alpha", type=_rational, nargs="+", required=True,
        help="d rotation coordinates (fractions or sqrt2/sqrt3/golden)",
    )
    p.add_argument(
        "--freq-beta", type=_rational, nargs="+", required=True,
        help="r weight frequency coordinates",
    )
    p.add_argument("--r", type=int, required=True, help="weight torus dimension")
    p.add_argument("--k", type=int, required=True, help="free coordinates of the window")
    p.add_argument("--eta", type=_rational, required=True, help="window half-width")
    p.add_argument("--ell", type=int, default=1, help="scale factor inside the weight")
    p.add_argument("--N", type=int, required=True, help="average horizon")
    p.add_argument("--f", required=True, help="trig polynomial file (JSON)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="write the CSV here instead of stdout")
    args = parser.parse_args(argv)

    if len(args.alpha) != args.d:
        parser.error(f"expected {args.d} alpha coordinates, got {len(args.alpha)}")
    if len(args.freq_beta) != args.r:
        parser.error(f"expected {args.r} beta coordinates, got {len(args.freq_beta)}")
    if not 0 <= args.k < args.r:
        parser.error(f"need 0 <= k < r, got k={args.k}, r={args.r}")
    try:
        table = _load_table(args.f, 2 * args.d)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ball = ApproxHammingBall(TorusPoint.of([Fraction(0)] * args.r), args.k, args.eta)
    g = annihilating_cylinder(ball, [])
    model = WeylSystem(TorusPoint.of(args.alpha))
    trace = weighted_average(
        model,
        table,
        g=g,
        beta=TorusPoint.of(args.freq_beta),
        ell=args.ell,
        n_max=args.N,
        workers=_workers_arg(args.workers),
    )
    _emit(trace.to_csv(), args.out)
    return 0


# ---- roth ----


def main_roth(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="roth", description="Progression-form quotient gap spot checks."
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("check", help="random trials of the projection gap bound")
    p.add_argument("--q", type=int, required=True, help="odd grid size")
    p.add_argument("--d", type=int, required=True, help="grid dimension")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the CSV here instead of stdout")
    args = parser.parse_args(argv)

    if args.q % 2 == 0 or args.q < 3:
        parser.error(f"q must be odd and at least 3, got {args.q}")
    if args.d < 1:
        parser.error("d must be at least 1")
    # project onto the quotient by the last coordinate axis; for d = 1
    # that is the full grid and the projection is the plain mean
    axis = [0] * args.d
    axis[-1] = 1
    subgroup = SubgroupModel.from_generators(args.q, args.d, [axis])
    rng = np.random.default_rng(args.seed)
    shape = (args.q,) * args.d

    lines = ["trial,I,I_W,gap,kappa,bound,ok"]
    failures = 0
    for trial in range(args.trials):
        f0, f1, f2 = (
            GridFunction(args.d, args.q, rng.standard_normal(shape).astype(np.complex128))
            for _ in range(3)
        )
        out = quotient_gap_bound(f0, f1, f2, subgroup)
        ok = out["gap"] <= out["bound"] + 1e-9
        failures += not ok
        lines.append(
            ",".join(
                [
                    str(trial),
                    repr(out["form"].real),
                    repr(out["projected_form"].real),
                    repr(out["gap"]),
                    repr(out["kappa"]),
                    repr(out["bound"]),
                    str(ok),
                ]
            )
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 1 if failures else 0


# ---- cert ----


def _print_verification(v) -> None:
    print(f"ok: {v.ok}")
    print(f"size: {v.size}")
    print(f"density: {fraction_str(v.density)} (required {fraction_str(v.required)})")
    if v.violating_shift is not None:
        print(f"violating shift: {v.violating_shift} at start {v.witness_start}")


def main_cert(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cert", description="Build, merge, and verify nonreturn certificates."
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_verify = sub.add_parser("verify", help="re-check a certificate file exactly")
    p_verify.add_argument("cert", help="certificate JSON path")
    p_verify.add_argument("--workers", type=int, default=None)

    p_build = sub.add_parser("build", help="rotation certificate from a band witness")
    p_build.add_argument("--k", type=int, required=True, help="ball deviation budget")
    p_build.add_argument("--eta", type=_rational, required=True, help="band measure target")
    p_build.add_argument(
        "--freq", type=_rational, nargs="+", required=True,
        help="frequency coordinates, one per witness dimension",
    )
    p_build.add_argument("--N", type=int, required=True, help="certificate horizon")
    p_build.add_argument("--out", required=True, help="where to save the certificate")
    p_build.add_argument("--workers", type=int, default=None)

    p_comb = sub.add_parser("combine", help="merge two certificates at a fixed dilation")
    p_comb.add_argument("first")
    p_comb.add_argument("second")
    p_comb.add_argument("--m", type=int, required=True)
    p_comb.add_argument("--out", required=True)
    p_comb.add_argument("--workers", type=int, default=None)

    p_search = sub.add_parser("search-m", help="smallest dilation that merges")
    p_search.add_argument("first")
    p_search.add_argument("second")
    p_search.add_argument("--m-max", type=int, required=True)
    p_search.add_argument("--out", required=True)
    p_search.add_argument("--workers", type=int, default=None)

    p_square = sub.add_parser("square", help="rewrite shifts through s -> s^2")
    p_square.add_argument("cert")
    p_square.add_argument("--out", required=True)
    p_square.add_argument("--workers", type=int, default=None)

    args = parser.parse_args(argv)
    workers = _workers_arg(getattr(args, "workers", None))

    try:
        if args.verb == "verify":
            v = verify_certificate(load_certificate(args.cert), workers=workers)
            _print_verification(v)
            return 0 if v.ok else 1

        if args.verb == "build":
            witness, ball, proof = build_band_witness(args.k, args.eta)
            if len(args.freq) != witness.r:
                print(
                    f"error: witness needs {witness.r} frequency coordinates, "
                    f"got {len(args.freq)}",
                    file=sys.stderr,
                )
                return 2
            freq = Frequency(TorusPoint.of(args.freq), generating=True)
            cert = rotation_certificate(witness, ball, freq, args.N, workers=workers)
            save_certificate(cert, args.out)
            print(f"witness: r={proof['r']} t={proof['t']} a={proof['a']}")
            print(f"claim: {fraction_str(cert.density_claim)} over horizon {args.N}")
            print(f"shifts: {len(cert.shifts)}")
            return 0

        if args.verb == "combine":
            cert = combine_certificates(
                load_certificate(args.first), load_certificate(args.second),
                args.m, workers=workers,
            )
            save_certificate(cert, args.out)
            print(f"m: {args.m}")
            print(f"claim: {fraction_str(cert.density_claim)}")
            return 0

        if args.verb == "search-m":
            m, cert = search_min_m(
                load_certificate(args.first), load_certificate(args.second),
                args.m_max, workers=workers,
            )
            save_certificate(cert, args.out)
            print(f"m: {m}")
            print(f"claim: {fraction_str(cert.density_claim)}")
            return 0

        v2 = square_certificate(load_certificate(args.cert), workers=workers)
        save_certificate(v2, args.out)
        print(f"shifts: {len(v2.shifts)}")
        return 0
    except (CertificateRejected, SearchExhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main_lab())
