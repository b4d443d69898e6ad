"""Command line entry point: ``hyperrank <subcommand> [options]``.

Exit codes: 0 every check passed, 2 checks ran with failures, 1 execution
error, 3 only the dynamics trend checks failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("hyperrank")

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="TOML file overriding the embedded defaults")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--threads", type=int, default=d, help="BLAS threads (0 keeps the library default)")
    p.add_argument("--seed", type=int, default=d, help="base seed for the tree and the orbit starts")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser():
    parser = argparse.ArgumentParser(prog="hyperrank", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    sub = parser.add_subparsers(dest="command")

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    p = add("belov-check", "exact check of the lacunary series hypotheses")
    p.add_argument("--m-max", type=int)

    p = add("build-cantor", "cover the level set and build the Cantor tree")
    p.add_argument("--depth", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--truncation", type=int)
    p.add_argument("--resolution", type=int)

    p = add("verify-identities", "pairing identities, pointwise eigen identity and continuity")
    p.add_argument("--tree", required=True)
    p.add_argument("--lambdas", type=int)
    p.add_argument("--path", choices=("analytic", "direct", "both"))

    p = add("build-model", "Galerkin models on span{h_lam}")
    p.add_argument("--tree", required=True)
    p.add_argument("--m", type=int, nargs="+")

    p = add("eigen-residuals", "per-lambda residual table of a model")
    p.add_argument("--tree", required=True)
    p.add_argument("--model", required=True)

    p = add("decompose", "split a model into unitary plus low rank")
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=("te", "contraction"), default="te")

    p = add("orbit", "iterate T or V on a seeded start")
    p.add_argument("--model", required=True)
    p.add_argument("--matrix", choices=("T", "V"), default="T")
    p.add_argument("--steps", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--stream", action="store_true", help="write one CSV row per step to stdout")

    add("report", "render summary and figures from an existing run")
    add("run", "full pipeline followed by the report")
    return parser


def _config(args):
    from .config import PipelineConfig

    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    run = {}
    for key in ("out", "seed", "threads"):
        if getattr(args, key) is not None:
            run[key] = str(getattr(args, key)) if key == "out" else getattr(args, key)
    return cfg.replace(run=run) if run else cfg


def _out(args, cfg):
    out = Path(cfg["run"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(obj, out=None, name=None):
    from .pipeline import write_json

    if out is not None and name:
        write_json(out / name, obj)
    else:
        json.dump(obj, sys.stdout, indent=1, default=str)
        sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# Subcommands; each returns an exit code
# ---------------------------------------------------------------------------


def cmd_belov(args, cfg):
    from .pipeline import StageContext, stage_belov

    if args.m_max is not None:
        cfg = cfg.replace(lacunary={"belov_m_max": args.m_max})
    ctx = StageContext(cfg, ".", "belov-check", None)
    ctx.dir = _out(args, cfg)
    _, checks, _ = stage_belov(cfg, ctx)
    return 0 if all(checks.values()) else 2


def cmd_cantor(args, cfg):
    from .cantor import build_cantor, cover_level_set

    over = {k: v for k, v in (("depth", args.depth), ("delta", args.delta), ("resolution", args.resolution)) if v is not None}
    cfg = cfg.replace(cantor=over, **({"lacunary": {"truncation": args.truncation}} if args.truncation else {}))
    cover = cover_level_set(N=cfg["lacunary"]["truncation"], delta=cfg["cantor"]["delta"], resolution=cfg["cantor"]["resolution"])
    tree = build_cantor(cover, depth=cfg["cantor"]["depth"], seed=cfg["run"]["seed"])
    out = _out(args, cfg)
    tree.save(out / "tree.json")
    chk = tree.check()
    log.info("tree of depth %d written to %s", tree.depth, out / "tree.json")
    return 0 if chk["com1"] and chk["com2"] and chk["com3"] else 2


def _tree(path):
    from .cantor import CantorTree

    return CantorTree.load(path)


def cmd_identities(args, cfg):
    from .pipeline import identity_rows, write_csv

    n = args.lambdas or cfg["identities"]["lambdas"]
    path = args.path or cfg["identities"]["path"]
    _, _, _, rows, eig = identity_rows(cfg, _tree(args.tree), n, path)
    out = _out(args, cfg)
    write_csv(out / "identities.csv", rows)
    write_csv(out / "eigen_identity.csv", eig)
    ok = all(r["residual"] <= r["error_bar"] for r in rows)
    return 0 if ok else 2


def cmd_model(args, cfg):
    from .eigenfield import sample_lambdas
    from .galerkin import model_from_tree
    from .pipeline import functions_and_mesh

    tree = _tree(args.tree)
    funcs, mesh = functions_and_mesh(cfg, tree)
    out = _out(args, cfg)
    for m in args.m or cfg["model"]["sizes"]:
        model = model_from_tree(funcs, mesh, sample_lambdas(tree, m))
        model.save(out / f"model_m{m}.json")
        log.info("m = %d: condition number %.3g", m, model.condition_number)
    return 0


def _load_model(path):
    from .galerkin import GalerkinModel

    return GalerkinModel.load(path)


def cmd_eigen_residuals(args, cfg):
    from .galerkin import eigen_residuals
    from .pipeline import functions_and_mesh, write_csv

    model = _load_model(args.model)
    funcs, mesh = functions_and_mesh(cfg, _tree(args.tree))
    write_csv(_out(args, cfg) / "eigen_residuals.csv", eigen_residuals(model, funcs, mesh))
    return 0


def cmd_decompose(args, cfg):
    from .decomp import contraction_split, lemma_te_split
    from .pipeline import _plain, decompose_rows

    model = _load_model(args.model)
    rows, checks = decompose_rows(model, [args.method])
    s = lemma_te_split(model) if args.method == "te" else contraction_split(model)
    rep = _plain(s.report())
    rep.update({"m": model.m, "audit": rows[0]["audit"], "spectrum_T": rows[0]["spectrum_T"]})
    _emit(rep, Path(args.out) if getattr(args, "out", None) else None, f"decompose_{args.method}_m{model.m}.json")
    return 0 if all(checks.values()) else 2


def cmd_orbit(args, cfg):
    import numpy as np

    from .decomp import lemma_te_split
    from .orbitlab import run_orbit

    model = _load_model(args.model)
    mat = model.T_mat if args.matrix == "T" else lemma_te_split(model).V_mat
    steps = args.steps or cfg["orbit"]["steps"]
    eps = args.eps or cfg["orbit"]["eps"]
    seed = cfg["run"]["seed"]
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=model.rank) + 1j * rng.normal(size=model.rank)
    stream = None
    if args.stream:
        sys.stdout.write("step,lognorm," + ",".join(f"c{j}_re,c{j}_im" for j in range(3)) + "\n")

        def stream(n, ln, c):
            sys.stdout.write(f"{n},{ln!r}," + ",".join(f"{v.real!r},{v.imag!r}" for v in c) + "\n")

    run = run_orbit(mat, x0, steps, eps=eps, seed=seed, store=False, stream=stream)
    summary = {"matrix": args.matrix, "m": model.m, "steps": steps, "eps": eps, "seed": seed,
               "coverage": run.coverage, "lognorm_variance": run.lognorm_variance(), "norm_drift": run.norm_drift()}
    if args.stream:
        print(json.dumps(summary), file=sys.stderr)
    else:
        _emit(summary)
    return 0


def cmd_report(args, cfg):
    from .pipeline import RunManifest, exit_code
    from .report import emit_report

    out = Path(cfg["run"]["out"])
    mpath = out / "manifest.json"
    man = RunManifest.load(mpath) if mpath.exists() else RunManifest.empty(cfg)
    emit_report(man, out)
    return exit_code(man)


def cmd_run(args, cfg):
    from .pipeline import RunManifest, exit_code, run_pipeline
    from .report import emit_report

    out = Path(cfg["run"]["out"])
    try:
        man = run_pipeline(cfg, out)
    except Exception:
        if (out / "manifest.json").exists():
            emit_report(RunManifest.load(out / "manifest.json"), out)
        raise
    emit_report(man, out)
    code = exit_code(man)
    log.info("run finished with exit code %d; summary in %s", code, out / "summary.md")
    return code


COMMANDS = {
    "belov-check": cmd_belov,
    "build-cantor": cmd_cantor,
    "verify-identities": cmd_identities,
    "build-model": cmd_model,
    "eigen-residuals": cmd_eigen_residuals,
    "decompose": cmd_decompose,
    "orbit": cmd_orbit,
    "report": cmd_report,
    "run": cmd_run,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads:
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .errors import HyperrankError

    try:
        cfg = _config(args)
        if args.print_config:
            sys.stdout.write(cfg.to_toml())
            return 0
        if not args.command:
            parser.print_help()
            return 1
        return COMMANDS[args.command](args, cfg)
    except (HyperrankError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
