"""Command-line front end: optimization runs, sweeps, evaluation, recovery
construction, diagnostics, and figure artifacts.

Every command writes its outputs plus a manifest.json (command, args, seed,
version, timestamps, sha256 digests) into --out.  Exit codes: 0 ok, 2 usage,
3 validation/schema, 4 solver failure, 5 dimension budget refused.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from .codes import (
    StaticCode,
    StrategicCode,
    load_code,
    protocol_2qubit,
    protocol_3qubit,
    save_code,
    serialize_code,
    trivial_code,
)
from .fidelity import fidelity_direct, fidelity_factorized, mixed_state
from .infobounds import (
    BOUND_CSV_HEADER,
    random_check_instance,
    verify_entropy_bound,
)
from .noise import (
    collapse_rounds,
    local_k_noise,
    precompute_tensors,
    weight_k_noise,
)
from .recovery import (
    CodespaceProjector,
    Interrogator,
    kl_check,
    recovery_fidelity,
    static_petz,
    temporal_petz,
    weighted_kraus,
)
from .sdp import BudgetError, SolverError
from .seesaw import SeesawConfig, seesaw_single_check, sweep

VERSION = "0.1.0"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_BUDGET = 5


# -- small helpers -------------------------------------------------------------


def parse_gammas(text):
    """A single value, a comma list, or an inclusive start:stop:step range."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad gamma range {text!r}, want start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("gamma range step must be positive")
        count = int(round((stop - start) / step)) + 1
        if count < 1 or abs(start + (count - 1) * step - stop) > 1e-9:
            raise ValueError(f"gamma range {text!r} does not hit its endpoint")
        return [round(start + i * step, 12) for i in range(count)]
    return [float(p) for p in text.split(",")]


def noise_for(model, n, k, gamma):
    if model == "local":
        return local_k_noise(n, k, gamma)
    if model == "weight":
        return weight_k_noise(n, k, gamma)
    raise ValueError(f"unknown noise model {model!r}")


def named_code(name):
    if name == "fixture:protocol2":
        return protocol_2qubit()
    if name == "fixture:protocol3-natural":
        return protocol_3qubit("natural")
    if name == "fixture:protocol3-literal":
        return protocol_3qubit("literal")
    if name == "fixture:trivial":
        return trivial_code(1)
    raise ValueError(f"unknown fixture code {name!r}")


def get_code(spec):
    if spec.startswith("fixture:"):
        return named_code(spec)
    return load_code(spec)


def matrix_json(m):
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(m, complex)]


def sha256_of(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def write_manifest(out_dir, command, args, seed, started, seconds, outputs):
    manifest = {
        "command": command,
        "args": {k: v for k, v in vars(args).items() if k != "func"},
        "seed": seed,
        "version": VERSION,
        "started": started,
        "seconds": round(seconds, 3),
        "outputs": [
            {"path": name, "sha256": sha256_of(os.path.join(out_dir, name))}
            for name in outputs
        ],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


# -- native SVG line chart ------------------------------------------------------

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def svg_chart(series, xlabel, ylabel):
    """800x500 polyline chart; series is a list of (name, xs, ys)."""
    width, height = 800, 500
    left, right, top, bottom = 70, 630, 20, 450
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if np.isfinite(y)]
    if not pts:
        raise ValueError("nothing to plot")
    x0 = min(p[0] for p in pts)
    x1 = max(p[0] for p in pts)
    y0 = min(p[1] for p in pts)
    y1 = max(p[1] for p in pts)
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = max((y1 - y0) * 0.05, 1e-6)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (x - x0) / (x1 - x0) * (right - left)

    def py(y):
        return bottom - (y - y0) / (y1 - y0) * (bottom - top)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for i in range(6):
        xt = x0 + (x1 - x0) * i / 5
        yt = y0 + (y1 - y0) * i / 5
        out.append(
            f'<line x1="{px(xt):.1f}" y1="{bottom}" x2="{px(xt):.1f}" '
            f'y2="{bottom + 5}" stroke="black"/>'
        )
        out.append(
            f'<text x="{px(xt):.1f}" y="{bottom + 20}" font-size="12" '
            f'text-anchor="middle">{xt:.2f}</text>'
        )
        out.append(
            f'<line x1="{left - 5}" y1="{py(yt):.1f}" x2="{left}" '
            f'y2="{py(yt):.1f}" stroke="black"/>'
        )
        out.append(
            f'<text x="{left - 8}" y="{py(yt) + 4:.1f}" font-size="12" '
            f'text-anchor="end">{yt:.3f}</text>'
        )
    out.append(
        f'<text x="{(left + right) / 2:.0f}" y="{height - 10}" font-size="14" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    out.append(
        f'<text x="18" y="{(top + bottom) / 2:.0f}" font-size="14" '
        f'text-anchor="middle" transform="rotate(-90 18 {(top + bottom) / 2:.0f})">'
        f"{ylabel}</text>"
    )
    for idx, (name, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        coords = " ".join(
            f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys) if np.isfinite(y)
        )
        if coords:
            out.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                f'stroke-width="2"/>'
            )
        ly = top + 20 + 22 * idx
        out.append(
            f'<line x1="{right + 15}" y1="{ly}" x2="{right + 45}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{right + 52}" y="{ly + 4}" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- commands -------------------------------------------------------------------


def make_config(args):
    kw = dict(
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        restarts=args.restarts,
        seed=args.seed,
    )
    init = getattr(args, "init", "random_isometry")
    if init.startswith("fixture:"):
        kw["init_strategy"] = "fixture"
        kw["fixture_code"] = named_code(init)
    else:
        kw["init_strategy"] = init
    return SeesawConfig(**kw)


def cmd_sweep(args):
    gammas = parse_gammas(args.gammas)
    cfg = make_config(args)
    table = sweep(gammas, args.model, args.n, args.k, args.m, cfg, jobs=args.jobs)
    write_text(os.path.join(args.out, "sweep.csv"), table.to_csv())
    rows = table.rows
    xs = [r.gamma for r in rows]
    series = [
        ("optimized", xs, [r.best_fidelity for r in rows]),
        ("unencoded", xs, [r.baseline_unencoded for r in rows]),
        ("fixed protocol", xs, [r.baseline_protocol for r in rows]),
        ("protocol + petz", xs, [r.baseline_petz for r in rows]),
    ]
    write_text(
        os.path.join(args.out, "sweep.svg"),
        svg_chart(series, "damping rate", "entanglement fidelity"),
    )
    failures = [r for r in rows if r.error]
    for r in failures:
        print(f"gamma={r.gamma}: {r.error}", file=sys.stderr)
    print(table.to_csv(), end="")
    if failures:
        message = f"{len(failures)} sweep point(s) failed"
        if all(r.error.startswith("BudgetError") for r in failures):
            raise BudgetError(message)
        raise SolverError(message)
    return ["sweep.csv", "sweep.svg"]


def cmd_optimize(args):
    noise = noise_for(args.model, args.n, args.k, args.gamma)
    cfg = make_config(args)
    code, trace = seesaw_single_check(noise, args.n, args.m, cfg)
    save_code(code, os.path.join(args.out, "code.json"))
    lines = ["step, objective, certified, seconds"]
    for i, (obj, ok, dt) in enumerate(
        zip(trace.objectives[1:], trace.certified, trace.seconds)
    ):
        lines.append(f"{i}, {obj:.9f}, {int(ok)}, {dt:.3f}")
    write_text(os.path.join(args.out, "trace.csv"), "\n".join(lines) + "\n")
    print(f"best fidelity {trace.final:.9f} over {trace.iterations} sweeps "
          f"({cfg.restarts} restarts, spread {trace.spread:.2e})")
    return ["code.json", "trace.csv"]


def cmd_evaluate(args):
    code = get_code(args.code)
    report = code.validate(1e-6)
    if not report.ok and not args.force:
        raise ValueError("code failed validation: " + "; ".join(report.messages))
    noise = noise_for(args.model, code.n_qubits, args.k, args.gamma)
    if isinstance(code, StaticCode):
        noise = collapse_rounds(noise)
    rho = mixed_state(code.logical_dim)
    direct = fidelity_direct(code, noise, rho).fidelity
    factorized = fidelity_factorized(code, precompute_tensors(noise, rho)).fidelity
    doc = {
        "code": args.code,
        "model": args.model,
        "gamma": args.gamma,
        "k": args.k,
        "valid": report.ok,
        "fidelity_direct": direct,
        "fidelity_factorized": factorized,
        "difference": abs(direct - factorized),
    }
    with open(os.path.join(args.out, "evaluate.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"direct      {direct:.12f}")
    print(f"factorized  {factorized:.12f}")
    print(f"difference  {abs(direct - factorized):.3e}")
    return ["evaluate.json"]


def instrument_of(code, static):
    if static or isinstance(code, StaticCode):
        return Interrogator.identity(code.encoder.d_out)
    return Interrogator.from_code(code)


def cmd_petz(args):
    code = get_code(args.code)
    proj = CodespaceProjector.from_encoder(code.encoder)
    noise = noise_for(args.model, code.n_qubits, args.k, args.gamma)
    if args.static:
        family = static_petz(proj, weighted_kraus(collapse_rounds(noise)))
        t = Interrogator.identity(proj.dim)
        fid = recovery_fidelity(family, t, collapse_rounds(noise))
    else:
        t = instrument_of(code, static=False)
        family = temporal_petz(proj, t, noise, gauge=args.gauge)
        fid = recovery_fidelity(family, t, noise)
    doc = {
        "family": family.kind,
        "paths": [list(p) for p in family.paths],
        "kraus_counts": [len(ks) for ks in family.kraus],
        "completed": family.completed,
        "fidelity": fid,
        "kraus": [[matrix_json(k) for k in ks] for ks in family.kraus],
    }
    with open(os.path.join(args.out, "petz.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"{family.kind} recovery fidelity {fid:.9f}")
    return ["petz.json"]


def cmd_checkkl(args):
    code = get_code(args.code)
    proj = CodespaceProjector.from_encoder(code.encoder)
    noise = noise_for(args.model, code.n_qubits, args.k, args.gamma)
    t = instrument_of(code, args.static)
    if args.static:
        noise = collapse_rounds(noise)
    rep = kl_check(proj, t, noise, tol=args.tol)
    doc = {
        "correctable": rep.correctable,
        "offdiag_residual": rep.offdiag_residual,
        "diag_variance_residual": rep.diag_variance_residual,
        "threshold": rep.threshold,
    }
    with open(os.path.join(args.out, "checkkl.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"correctable: {rep.correctable} "
          f"(offdiag {rep.offdiag_residual:.2e}, "
          f"diag var {rep.diag_variance_residual:.2e})")
    return ["checkkl.json"]


def cmd_bound(args):
    reports = []
    for i in range(args.batch):
        rng = np.random.default_rng(args.seed + i)
        proj, t, noise = random_check_instance(rng, args.n)
        rep = verify_entropy_bound(t, noise, proj, decoder_source=args.source)
        reports.append((args.seed + i, rep))
    lines = [BOUND_CSV_HEADER] + [rep.csv_line() for _, rep in reports]
    write_text(os.path.join(args.out, "bound.csv"), "\n".join(lines) + "\n")
    doc = [
        {
            "seed": seed,
            "epsilon": rep.epsilon,
            "bound": rep.bound,
            "achieved": rep.achieved,
            "satisfied": rep.satisfied,
            "vacuous": rep.vacuous,
            "decoder_source": rep.decoder_source,
        }
        for seed, rep in reports
    ]
    with open(os.path.join(args.out, "bound.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    bad = [seed for seed, rep in reports if not rep.satisfied]
    vac = sum(1 for _, rep in reports if rep.vacuous)
    print(f"{len(reports)} instances: {len(reports) - len(bad)} satisfied, "
          f"{vac} vacuous, {len(bad)} violated")
    if bad:
        raise ValueError(f"fidelity floor violated at seeds {bad}")
    return ["bound.csv", "bound.json"]


# -- wiring ---------------------------------------------------------------------


def add_noise_flags(p, gamma_required=True):
    p.add_argument("--model", choices=("local", "weight"), default="local")
    p.add_argument("--k", type=int, default=1, help="damped-subset size")
    if gamma_required:
        p.add_argument("--gamma", type=float, required=True)


def add_seesaw_flags(p):
    p.add_argument("--n", type=int, required=True, help="physical qubits")
    p.add_argument("--m", type=int, default=1, help="check outcomes")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--rel-tol", type=float, default=1e-7)
    p.add_argument("--init", default="random_isometry",
                   help="random_isometry | maximally_mixed_marginal | fixture:<name>")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="dynaqec",
        description="optimize, evaluate, and diagnose dynamical codes "
                    "under multi-round noise",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="fidelity-vs-gamma sweep with baselines")
    add_noise_flags(p, gamma_required=False)
    p.add_argument("--gammas", required=True,
                   help="value, comma list, or inclusive start:stop:step")
    add_seesaw_flags(p)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="single optimization run, code to JSON")
    add_noise_flags(p)
    add_seesaw_flags(p)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="fidelity of a stored or fixture code")
    p.add_argument("--code", required=True, help="JSON file or fixture:<name>")
    add_noise_flags(p)
    p.add_argument("--force", action="store_true",
                   help="evaluate even if validation fails")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("petz", help="build the Petz recovery family")
    p.add_argument("--code", required=True)
    add_noise_flags(p)
    p.add_argument("--static", action="store_true",
                   help="ignore checks; single-round collapsed noise")
    p.add_argument("--gauge", default="raw", help="raw | diagonal")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_petz)

    p = sub.add_parser("checkkl", help="algebraic correctability check")
    p.add_argument("--code", required=True)
    add_noise_flags(p)
    p.add_argument("--static", action="store_true")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_checkkl)

    p = sub.add_parser("bound", help="entropy-gap fidelity floor on random instances")
    p.add_argument("--n", type=int, default=1, choices=(1, 2))
    p.add_argument("--batch", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--source", choices=("sdp_optimal", "temporal_petz"),
                   default="sdp_optimal")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_bound)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        os.makedirs(args.out, exist_ok=True)
        outputs = args.func(args)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    write_manifest(
        args.out, args.command, args, getattr(args, "seed", None),
        started, time.perf_counter() - t0, outputs,
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
