"""Command-line front end.

Every subcommand prints one JSON document on stdout; diagnostics go to
stderr.  Exit codes: 0 certified or verified, 2 critical or not verified,
1 on errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    alpha_star_estimate,
    critical_k_talpha,
    quad_lemma_report,
    relative_sigma,
    sigma_min_sweep,
)
from .fem import assemble, dump_matrix_market, system_matrix
from .mesh import (
    MeshError,
    jitter_mesh,
    load_mesh,
    make_interval_mesh,
    make_ring_mesh,
    make_structured_tri_mesh,
    make_talpha,
    make_tensor_quad_mesh,
    mesh_to_dict,
    save_mesh,
)
from .motz import motz, read_trace, write_trace
from .repair import RepairError, correct_angle_condition, motz_flip

EXIT_OK, EXIT_ERROR, EXIT_CRITICAL = 0, 1, 2

log = logging.getLogger("helmcert")


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _code(ok: bool) -> int:
    return EXIT_OK if ok else EXIT_CRITICAL


def _k_grid(args) -> list[float]:
    if args.k_min <= 0 or args.k_max < args.k_min:
        raise ValueError("need 0 < k-min <= k-max")
    return np.geomspace(args.k_min, args.k_max, args.k_samples).tolist()


# -- subcommands ------------------------------------------------------------------


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "talpha":
        mesh = make_talpha(args.alpha)
    elif args.kind in ("diagonal", "crisscross"):
        mesh = make_structured_tri_mesh(args.nx, args.ny, args.kind)
    elif args.kind == "ring":
        mesh = make_ring_mesh()
    elif args.kind == "quad":
        mesh = make_tensor_quad_mesh(np.linspace(0, 1, args.nx + 1), np.linspace(0, 1, args.ny + 1))
    else:
        mesh = make_interval_mesh(np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, args.nx - 1)])))
    if args.jitter:
        if mesh.kind != "tri3":
            raise ValueError("--jitter applies to triangular meshes")
        mesh = jitter_mesh(mesh, args.jitter, rng)
    if args.out:
        save_mesh(mesh, args.out)
        _emit({"kind": mesh.kind, "n_nodes": mesh.n_nodes, "n_elements": mesh.n_elements, "path": str(args.out)})
    else:
        _emit(mesh_to_dict(mesh))
    return EXIT_OK


def cmd_check(args) -> int:
    mesh = load_mesh(args.mesh)
    state = motz(mesh, strict=args.strict_angles)
    if args.trace:
        write_trace(state, args.trace)
    if args.dump_matrices:
        dump_matrix_market(assemble(mesh), args.dump_matrices)
    _emit(state.summary())
    return _code(state.certified)


def cmd_repair(args) -> int:
    mesh = load_mesh(args.mesh)
    before = motz(mesh)
    records: list[dict] = []
    fixed = correct_angle_condition(mesh, before.trans_edges, records)
    after = motz(fixed)
    if args.out:
        save_mesh(fixed, args.out)
    _emit({
        "before": before.summary(),
        "after": after.summary(),
        "bisections": records,
        "n_nodes": fixed.n_nodes,
    })
    return _code(after.certified)


def cmd_flip(args) -> int:
    mesh = load_mesh(args.mesh)
    state = motz(mesh)
    records: list[dict] = []
    if not state.certified:
        mesh, state = motz_flip(mesh, state, args.paper_faithful, args.global_score, records)
    else:
        log.info("mesh is already certified; no flips needed")
    if args.out:
        save_mesh(mesh, args.out)
    _emit({"flips": records, **state.summary()})
    return _code(state.certified)


def cmd_sweep(args) -> int:
    from .plotting import plot_sweep

    mesh = load_mesh(args.mesh)
    sysm = assemble(mesh, args.p)
    rep = sigma_min_sweep(sysm, _k_grid(args))
    doc = {"n_dof": sysm.n, "p": args.p, "min_ratio": min(rep.ratios), "argmin_k": rep.k_values[int(np.argmin(rep.ratios))]}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(rep.to_csv(), encoding="utf-8")
        plot_sweep(rep, out / "sweep.png", title=f"{Path(args.mesh).name}, p={args.p}")
        doc["files"] = ["sweep.csv", "sweep.png"]
        if args.dump_matrices:
            dump_matrix_market(sysm, out / "matrices")
    else:
        doc["sweep"] = rep.to_json()
    _emit(doc)
    return EXIT_OK


def cmd_singular_demo(args) -> int:
    alpha = args.alpha
    mesh = make_talpha(alpha)
    state = motz(mesh)
    crit = critical_k_talpha(alpha)
    ks = (crit.k * np.linspace(0.8, 1.2, args.k_samples)).tolist()
    if crit.k not in ks:
        ks = sorted(ks + [crit.k])
    rep = sigma_min_sweep(crit.system, ks)
    sigma_at = relative_sigma(system_matrix(crit.system, crit.k).K)
    doc = {
        "claim": "the symmetric nine-node mesh has a singular system matrix at a real wave number",
        "parameters": {"alpha": alpha},
        "values": {
            "motz": state.summary(),
            "k_crit": crit.k,
            "ratio_spread": crit.consistency,
            "null_residual": crit.residual,
            "sigma_ratio_at_k_crit": sigma_at,
            "sweep": rep.to_json(),
        },
    }
    ok = not state.certified and crit.residual < 1e-12 and sigma_at < 1e-10
    doc["verdict"] = "verified" if ok else "failed"
    if args.out:
        from .plotting import plot_sweep

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(rep.to_csv(), encoding="utf-8")
        plot_sweep(rep, out / "sweep.png", title=f"alpha={alpha}", mark_k=crit.k)
    _emit(doc)
    return _code(ok)


def cmd_quad_lemma(args) -> int:
    doc = quad_lemma_report(args.p)
    _emit(doc)
    return _code(doc["verdict"] == "verified")


def cmd_render(args) -> int:
    from .render import render_trace

    mesh = load_mesh(args.mesh)
    if args.trace:
        steps = read_trace(args.trace)
    else:
        steps = motz(mesh, strict=args.strict_angles).trace
    paths = render_trace(mesh, steps, args.out, args.every)
    _emit({"frames": [p.name for p in paths], "steps": len(steps)})
    return EXIT_OK


def cmd_alpha_star(args) -> int:
    a = alpha_star_estimate(args.tolerance)
    _emit({"alpha_star": a, "sign_change_found": a < 1.0})
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="helmcert", description="Regularity certificates for discrete Helmholtz problems.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_mesh(p):
        p.add_argument("--mesh", required=True, type=Path, help="mesh JSON file")

    def with_k(p, n=60):
        p.add_argument("--k-min", type=float, default=0.1)
        p.add_argument("--k-max", type=float, default=20.0)
        p.add_argument("--k-samples", type=int, default=n)

    p = sub.add_parser("gen", help="write a generated mesh")
    p.add_argument("kind", choices=["talpha", "diagonal", "crisscross", "ring", "quad", "interval"])
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--nx", type=int, default=4)
    p.add_argument("--ny", type=int, default=4)
    p.add_argument("--jitter", type=float, default=0.0, help="random interior displacement")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check", help="run the marching certificate")
    with_mesh(p)
    p.add_argument("--trace", type=Path, help="write the step trace as JSON lines")
    p.add_argument("--strict-angles", action="store_true", help="never propagate across a non-acute edge")
    p.add_argument("--dump-matrices", type=Path, metavar="DIR")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("repair", help="bisect non-acute transmission edges")
    with_mesh(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("flip", help="flip edges until the marching certifies")
    with_mesh(p)
    p.add_argument("--out", type=Path)
    p.add_argument("--paper-faithful", action="store_true", help="resume from the grown known set after a flip")
    p.add_argument("--global-score", action="store_true", help="score flips by the whole-mesh minimum angle")
    p.set_defaults(func=cmd_flip)

    p = sub.add_parser("sweep", help="smallest singular value over a k grid")
    with_mesh(p)
    p.add_argument("--p", type=int, default=1)
    with_k(p)
    p.add_argument("--out", type=Path, metavar="DIR", help="write sweep.csv and sweep.png")
    p.add_argument("--dump-matrices", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("singular-demo", help="critical wave number of the nine-node mesh")
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--k-samples", type=int, default=21)
    p.add_argument("--out", type=Path, metavar="DIR")
    p.set_defaults(func=cmd_singular_demo)

    p = sub.add_parser("quad-lemma", help="exact determinant of the reduced quad system")
    p.add_argument("--p", type=int, default=2, choices=[1, 2, 3, 4])
    p.set_defaults(func=cmd_quad_lemma)

    p = sub.add_parser("render", help="SVG frames of a marching trace")
    with_mesh(p)
    p.add_argument("--trace", type=Path)
    p.add_argument("--out", type=Path, required=True, metavar="DIR")
    p.add_argument("--every", type=int, default=1)
    p.add_argument("--strict-angles", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("alpha-star", help="sign-change threshold of the ring mass coupling")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_alpha_star)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, MeshError, RepairError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
