"""The staged pipeline, its manifest and artifact cache.

Stages run in dependency order and write CSV/JSON artifacts into one
directory each under the output root.  A stage's cache key hashes the config
values it reads together with the content hashes of the upstream artifacts it
consumes, so changing orbit parameters leaves the Cantor tree cached while a
rebuilt upstream artifact with new content invalidates everything below it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cantor import CantorTree, build_cantor, cover_level_set, integrability_report
from .config import PipelineConfig
from .decomp import audit_splitting, contraction_split, lemma_te_split
from .eigenfield import (
    ConstructedFunctions,
    DirectPath,
    continuity_modulus,
    eigen_mesh,
    eigen_residual,
    octave_pairs,
    octave_table,
    sample_lambdas,
    verify_identity_m02,
    verify_uhl,
)
from .errors import AuditFailure, HyperrankError
from .galerkin import GalerkinModel, discrete_space, eigen_residuals, hyperplanes, model_from_tree, residual_trend
from .lacunary import belov_check
from .orbitlab import eigen_crowding_report, run_orbit, weyl_coverage

log = logging.getLogger(__name__)

STAGES = ("belov-check", "build-cantor", "verify-identities", "build-model", "decompose", "orbit")
DEPENDS = {
    "belov-check": (),
    "build-cantor": (),
    "verify-identities": ("build-cantor",),
    "build-model": ("build-cantor",),
    "decompose": ("build-model",),
    "orbit": ("decompose", "build-model"),
}
DYNAMICS_STAGES = ("orbit",)  # trend checks, reported apart from the hard checks

# tolerances of the hard checks
TOL_UHL = 1e-14
TOL_AGREE = 1e-10
TOL_DIRECT = 5e-2
TOL_RANK = 1e-8
TOL_UNITARY = 1e-8
TOL_NORM_A = 1e-10
TOL_SPECTRUM = 1e-8
CONTINUITY_SPREAD = 3.0
INTEGRABILITY_DRIFT = 0.01


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _plain(v):
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def write_json(path, data):
    Path(path).write_text(json.dumps(_plain(data), indent=1, sort_keys=True) + "\n")


def write_csv(path, rows, columns=None):
    rows = [_plain(r) for r in rows]
    columns = columns or list(rows[0]) if rows else (columns or [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass
class StageRecord:
    status: str = "not run"  # not run | completed | cached | failed
    key: str | None = None
    wall_time: float = 0.0
    artifacts: dict = field(default_factory=dict)  # name -> {path, sha256}
    checks: dict = field(default_factory=dict)  # name -> bool
    summary: dict = field(default_factory=dict)
    error: dict | None = None


@dataclass
class RunManifest:
    config_hash: str
    config: dict
    tool_version: str = __version__
    stages: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, config):
        return cls(config.hash(), config.data, stages={s: StageRecord() for s in STAGES})

    def to_json(self):
        return {
            "config_hash": self.config_hash,
            "config": self.config,
            "tool_version": self.tool_version,
            "stages": {k: asdict(v) for k, v in self.stages.items()},
        }

    @classmethod
    def from_json(cls, data):
        stages = {s: StageRecord(**data["stages"][s]) if s in data["stages"] else StageRecord() for s in STAGES}
        return cls(data["config_hash"], data["config"], data.get("tool_version", "?"), stages)

    def save(self, path):
        write_json(path, self.to_json())

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def exit_code(manifest):
    """0 all checks pass, 1 a stage failed, 2 a hard check failed, 3 only dynamics trends failed."""
    recs = manifest.stages
    if any(r.status == "failed" for r in recs.values()):
        return 1
    if any(not ok for s in STAGES if s not in DYNAMICS_STAGES for ok in recs[s].checks.values()):
        return 2
    if any(not ok for s in DYNAMICS_STAGES for ok in recs[s].checks.values()):
        return 3
    return 0


# ---------------------------------------------------------------------------
# Shared loaders
# ---------------------------------------------------------------------------


class StageContext:
    def __init__(self, cfg, root, name, manifest):
        self.cfg = cfg
        self.root = Path(root)
        self.name = name
        self.dir = self.root / name
        self.manifest = manifest

    def artifact(self, stage, key):
        return self.root / self.manifest.stages[stage].artifacts[key]["path"]

    def artifacts(self, stage, prefix):
        arts = self.manifest.stages[stage].artifacts
        return [(k, self.root / a["path"]) for k, a in sorted(arts.items()) if k.startswith(prefix)]


def functions_and_mesh(cfg, tree):
    q = cfg["quadrature"]
    funcs = ConstructedFunctions(tree, cfg["lacunary"]["truncation"], delta=cfg["cantor"]["delta"])
    mesh = eigen_mesh(tree, panels=q["panels"], order=q["order"], levels=q["levels"], sub_order=q["sub_order"])
    return funcs, mesh


def _models(ctx):
    out = []
    for _, path in ctx.artifacts("build-model", "model_m"):
        out.append(GalerkinModel.load(path))
    return sorted(out, key=lambda m: m.m)


def _split(model, method):
    return lemma_te_split(model) if method == "te" else contraction_split(model)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_belov(cfg, ctx):
    rep = belov_check(m_max=cfg["lacunary"]["belov_m_max"])
    recs = rep.records()
    write_json(ctx.dir / "belov.json", {"passed": rep.passed, "records": recs})
    write_csv(ctx.dir / "belov.csv", recs)
    boundary = {r["name"]: r["pass"] for r in recs if "== 1" in r["name"]}
    checks = {"hypotheses": rep.passed, "boundary_constants": all(boundary.values()) and len(boundary) == 2}
    return {"belov_json": "belov.json", "belov_csv": "belov.csv"}, checks, {"inequalities": len(recs)}


def stage_cantor(cfg, ctx):
    lac, can = cfg["lacunary"], cfg["cantor"]
    cover = cover_level_set(N=lac["truncation"], delta=can["delta"], resolution=can["resolution"])
    tree = build_cantor(cover, depth=can["depth"], seed=cfg["run"]["seed"])
    tree.save(ctx.dir / "tree.json")
    chk = tree.check()
    rows = []
    for depth in sorted({max(1, can["depth"] - 2), can["depth"]}):
        for alpha in (1 / 3, 2 / 3):
            r = integrability_report(tree.truncate(depth), alpha)
            rows.append({"depth": depth, "alpha": alpha, "total": r.total, "gap_measure": r.gap_measure,
                         "series_partial_sum": r.series_partial_sums[-1]})
    write_csv(ctx.dir / "integrability.csv", rows)
    levels = [{"level": n, "intervals": len(tree.level(n)[0]), "max_length": tree.max_length(n),
               "bound": 1 / math.factorial(n), "measure": tree.level_measure(n)} for n in range(1, tree.depth + 1)]
    write_csv(ctx.dir / "levels.csv", levels)
    write_json(ctx.dir / "cover.json", cover.summary())
    tot = {(r["depth"], r["alpha"]): r["total"] for r in rows}
    d0, d1 = sorted({r["depth"] for r in rows})[0], can["depth"]
    drift = abs(tot[(d1, 2 / 3)] - tot[(d0, 2 / 3)]) / tot[(d1, 2 / 3)]
    checks = {"com1": chk["com1"], "com2": chk["com2"], "com3": chk["com3"], "integrability_refinement": drift < INTEGRABILITY_DRIFT}
    arts = {"tree": "tree.json", "cover": "cover.json", "integrability_csv": "integrability.csv", "levels_csv": "levels.csv"}
    return arts, checks, {"candidates": cover.n_candidates, "integrability_drift": drift}


def identity_rows(cfg, tree, n_lambdas, path):
    """Identity records, uhl residuals and eigen-residual agreement for ``n_lambdas`` points of K."""
    funcs, mesh = functions_and_mesh(cfg, tree)
    q = cfg["quadrature"]
    lams = sample_lambdas(tree, n_lambdas)
    direct = DirectPath(funcs, N_d=q["direct_terms"], order=q["direct_order"]) if path != "analytic" else None
    rows, eig = [], []
    h = funcs.h(mesh.nodes)
    for lam in lams:
        rows += [r.row() for r in verify_identity_m02(funcs, lam, path=path, direct=direct)]
        res, gap = eigen_residual(funcs, mesh, lam)
        eig.append({"lambda_hex": lam.hex(), "uhl_residual": verify_uhl(lam, mesh.nodes, h),
                    "eigen_residual": res, "pairing_residual": gap,
                    "agreement": abs(res - gap) / max(gap, 1e-300)})
    return funcs, mesh, lams, rows, eig


def stage_identities(cfg, ctx):
    ids = cfg["identities"]
    tree = CantorTree.load(ctx.artifact("build-cantor", "tree"))
    funcs, mesh, lams, rows, eig = identity_rows(cfg, tree, ids["lambdas"], ids["path"])
    write_csv(ctx.dir / "identities.csv", rows)
    write_csv(ctx.dir / "eigen_identity.csv", eig)
    cont = continuity_modulus(funcs, octave_pairs(sample_lambdas(tree), ids["continuity_per_octave"]), mesh)
    write_csv(ctx.dir / "continuity.csv", cont)
    octs = octave_table(cont)
    write_csv(ctx.dir / "continuity_octaves.csv", [{"octave": k, "median_ratio": v} for k, v in octs.items()])
    med = float(np.median(list(octs.values()))) if octs else float("nan")
    checks = {
        "analytic_within_bound": all(r["residual"] <= r["error_bar"] for r in rows if r["path"] == "analytic"),
        "direct_within_error_bar": all(r["residual"] <= r["error_bar"] for r in rows if r["path"] == "direct"),
        "direct_below_5e-2": all(r["residual"] <= TOL_DIRECT for r in rows if r["path"] == "direct"),
        "uhl_pointwise": all(e["uhl_residual"] <= TOL_UHL for e in eig),
        "eigen_residual_agreement": all(e["agreement"] <= TOL_AGREE for e in eig),
        "continuity_single_constant": len(octs) >= 5 and max(octs.values()) <= CONTINUITY_SPREAD * med,
    }
    arts = {"identities_csv": "identities.csv", "eigen_identity_csv": "eigen_identity.csv",
            "continuity_csv": "continuity.csv", "continuity_octaves_csv": "continuity_octaves.csv"}
    return arts, checks, {"lambdas": len(lams), "octaves": len(octs)}


def stage_model(cfg, ctx):
    tree = CantorTree.load(ctx.artifact("build-cantor", "tree"))
    funcs, mesh = functions_and_mesh(cfg, tree)
    space = discrete_space(funcs, mesh)
    available = sample_lambdas(tree)
    arts, rows, eig, checks = {}, [], [], {}
    for m in sorted(cfg["model"]["sizes"]):
        if m > len(available):
            raise HyperrankError(f"model size {m} exceeds the {len(available)} separated points of K")
        model = model_from_tree(funcs, mesh, sample_lambdas(tree, m))
        name = f"model_m{m}.json"
        model.save(ctx.dir / name)
        arts[f"model_m{m:04d}"] = name
        ev = np.linalg.eigvals(model.T_mat)
        spec = float(np.max(np.min(np.abs(ev[:, None] - model.lam[None, :]), axis=0)))
        try:
            dims = hyperplanes(model).dims
        except HyperrankError:
            dims = None
        rows.append({"m": m, "rank": model.rank, "condition_number": model.condition_number,
                     "invariance_defect": model.invariance_defect, "spectrum_error": spec,
                     "h_residual": model.h_residual, "uinv_h_residual": model.uinv_h_residual,
                     "hyperplane_dim": dims[0] if dims else -1})
        eig += [dict(r, m=m) for r in eigen_residuals(model, funcs, mesh)]
        checks[f"spectrum_m{m}"] = spec <= TOL_SPECTRUM
        checks[f"hyperplane_codim1_m{m}"] = dims == (m - 1, m - 1)
    trend = residual_trend(available, space, [0] + sorted(cfg["model"]["sizes"]))
    write_csv(ctx.dir / "models.csv", rows)
    write_csv(ctx.dir / "membership.csv", trend)
    write_csv(ctx.dir / "eigen_residuals.csv", eig)
    arts.update({"models_csv": "models.csv", "membership_csv": "membership.csv", "eigen_residuals_csv": "eigen_residuals.csv"})
    return arts, checks, {"sizes": sorted(cfg["model"]["sizes"])}


def decompose_rows(model, methods):
    rows, checks = [], {}
    for method in methods:
        s = _split(model, method)
        tag = f"{method}_m{model.m}"
        try:
            rep = audit_splitting(s, model)
            audit_ok, failed = True, ""
        except AuditFailure as exc:
            rep, audit_ok, failed = {}, False, exc.quantity or str(exc)
        d = s.diagnostics
        sv = list(d.get("singvals_R", []))
        rows.append({
            "m": model.m, "method": method, "branch": s.branch,
            "unitarity_defect": d.get("unitarity_defect", float("nan")),
            "sigma1_R": sv[0] if sv else 0.0, "sigma2_R": sv[1] if len(sv) > 1 else 0.0,
            "sigma3_R": sv[2] if len(sv) > 2 else 0.0, "rank_ratio_R": d.get("rank_ratio_R", float("nan")),
            "rank1_ratio_R": d.get("rank1_ratio_R", float("nan")),
            "norm_A": d.get("norm_A") if d.get("norm_A") is not None else float("nan"),
            "rank1_ratio": d.get("rank1_ratio_S", d.get("rank1_ratio_A", float("nan"))),
            "spectrum_T": rep.get("spectrum_T", float("nan")), "spectrum_V": rep.get("spectrum_V", float("nan")),
            "audit": "pass" if audit_ok else f"fail:{failed}",
        })
        checks[f"audit_{tag}"] = audit_ok
        if method == "te":
            checks[f"unitary_{tag}"] = d["unitarity_defect"] <= TOL_UNITARY
            checks[f"rank_le_2_{tag}"] = d["rank_ratio_R"] <= TOL_RANK
        else:
            checks[f"contraction_{tag}"] = d["norm_A"] <= 1 + TOL_NORM_A
            checks[f"rank_1_{tag}"] = d["rank1_ratio_S"] <= TOL_RANK
    return rows, checks


def stage_decompose(cfg, ctx):
    rows, checks, sv = [], {}, []
    for model in _models(ctx):
        r, c = decompose_rows(model, cfg["decompose"]["methods"])
        rows += r
        checks.update(c)
        if "te" in cfg["decompose"]["methods"]:
            s = lemma_te_split(model)
            sv += [{"m": model.m, "index": i, "sigma": x} for i, x in enumerate(s.diagnostics["singvals_R"])]
    write_csv(ctx.dir / "decompose.csv", rows)
    write_json(ctx.dir / "decompose.json", rows)
    arts = {"decompose_csv": "decompose.csv", "decompose_json": "decompose.json"}
    if sv:
        write_csv(ctx.dir / "singvals_R.csv", sv)
        arts["singvals_csv"] = "singvals_R.csv"
    return arts, checks, {"splittings": len(rows)}


def stage_orbit(cfg, ctx):
    orb, seed = cfg["orbit"], cfg["run"]["seed"]
    models = _models(ctx)
    splits = [lemma_te_split(m) for m in models]
    seeds = range(seed, seed + orb["seeds"])
    rows = eigen_crowding_report(models, splits, steps=orb["steps"], eps=orb["eps"], seeds=seeds)
    flat = [{k: v for k, v in r.items() if k != "coverage_T"} | {f"coverage_T_{j}": c for j, c in enumerate(r["coverage_T"])}
            for r in rows]
    write_csv(ctx.dir / "crowding.csv", flat)

    big = splits[-1].V_mat
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=big.shape[0]) + 1j * rng.normal(size=big.shape[0])
    drift = run_orbit(big, x0, orb["unitary_steps"], eps=orb["eps"], seed=seed, store=False).norm_drift()
    weyl = weyl_coverage(orb["weyl_theta"], orb["weyl_steps"], orb["eps"])

    # one trajectory of each for the figure
    traj = []
    m0 = models[-1]
    x0 = rng.normal(size=m0.rank) + 1j * rng.normal(size=m0.rank)
    for name, mat in (("T", m0.T_mat), ("V", splits[-1].V_mat)):
        run = run_orbit(mat, x0, orb["steps"], eps=orb["eps"], seed=seed, store=False)
        traj += [{"matrix": name, "step": n, "lognorm": float(v)} for n, v in enumerate(run.lognorms)]
    write_csv(ctx.dir / "trajectory.csv", traj)

    trend = [r for r in rows if r["m"] in orb["trend_sizes"]]
    cov = np.array([r["coverage_T"] for r in trend])
    nondecreasing = [bool(np.all(np.diff(cov[:, j]) >= 0)) for j in range(cov.shape[1])] if len(trend) > 1 else []
    dyn = {"unitary_drift": drift, "unitary_steps": orb["unitary_steps"], "weyl_coverage": weyl,
           "weyl_steps": orb["weyl_steps"], "coverage_nondecreasing": nondecreasing,
           "lognorm_var_T_exceeds_V": [r["lognorm_var_T"] > r["lognorm_var_V"] for r in rows if r["m"] >= 8]}
    write_json(ctx.dir / "dynamics.json", dyn)
    checks = {
        "unitary_drift": drift <= 1e-5,
        "weyl_coverage": weyl >= 0.95,
        "lognorm_variance_T_gt_V": all(dyn["lognorm_var_T_exceeds_V"]),
        "coverage_trend": sum(nondecreasing) >= 2 if nondecreasing else False,
    }
    arts = {"crowding_csv": "crowding.csv", "dynamics_json": "dynamics.json", "trajectory_csv": "trajectory.csv"}
    return arts, checks, {"drift": drift, "weyl": weyl}


STAGE_FUNCS = {
    "belov-check": stage_belov,
    "build-cantor": stage_cantor,
    "verify-identities": stage_identities,
    "build-model": stage_model,
    "decompose": stage_decompose,
    "orbit": stage_orbit,
}


def stage_params(cfg, stage):
    """The config values a stage reads; part of its cache key."""
    lac, can, q = cfg["lacunary"], cfg["cantor"], cfg["quadrature"]
    mesh = {k: q[k] for k in ("panels", "order", "levels", "sub_order")}
    return {
        "belov-check": {"m_max": lac["belov_m_max"]},
        "build-cantor": {"N": lac["truncation"], "B": lac["precision"], "cantor": can, "seed": cfg["run"]["seed"]},
        "verify-identities": {"quadrature": q, "identities": cfg["identities"], "N": lac["truncation"], "delta": can["delta"]},
        "build-model": {"mesh": mesh, "model": cfg["model"], "N": lac["truncation"], "delta": can["delta"]},
        "decompose": {"decompose": cfg["decompose"]},
        "orbit": {"orbit": cfg["orbit"], "seed": cfg["run"]["seed"]},
    }[stage]


def _stage_key(cfg, stage, manifest):
    upstream = {d: {k: a["sha256"] for k, a in sorted(manifest.stages[d].artifacts.items())} for d in DEPENDS[stage]}
    blob = json.dumps({"stage": stage, "params": stage_params(cfg, stage), "upstream": upstream,
                       "version": __version__}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _cache_valid(rec, key, root):
    if rec is None or rec.key != key or rec.status not in ("completed", "cached") or not rec.artifacts:
        return False
    for art in rec.artifacts.values():
        p = root / art["path"]
        if not p.is_file() or file_hash(p) != art["sha256"]:
            return False
    return True


def run_pipeline(config=None, out=None, stages=STAGES):
    """Run ``stages`` in order under ``out``; the manifest is written after every stage.

    A stage whose key matches the previous manifest and whose artifacts are
    intact is marked ``cached`` and skipped.  A failing stage is recorded with
    its error, later stages stay ``not run`` and the error is re-raised.
    """
    cfg = config or PipelineConfig()
    root = Path(out or cfg["run"]["out"])
    root.mkdir(parents=True, exist_ok=True)
    mpath = root / "manifest.json"
    previous = None
    if mpath.exists():
        try:
            previous = RunManifest.load(mpath)
        except (ValueError, KeyError, TypeError):
            log.warning("ignoring unreadable manifest %s", mpath)
    manifest = RunManifest.empty(cfg)
    for name in stages:
        t0 = time.perf_counter()
        key = _stage_key(cfg, name, manifest)
        old = previous.stages.get(name) if previous else None
        if _cache_valid(old, key, root):
            rec = StageRecord(**{**asdict(old), "status": "cached"})
            rec.wall_time = time.perf_counter() - t0
            manifest.stages[name] = rec
            log.info("%s: cached", name)
            continue
        ctx = StageContext(cfg, root, name, manifest)
        ctx.dir.mkdir(parents=True, exist_ok=True)
        try:
            arts, checks, summary = STAGE_FUNCS[name](cfg, ctx)
        except Exception as exc:
            manifest.stages[name] = StageRecord(
                status="failed", key=key, wall_time=time.perf_counter() - t0,
                error={"type": type(exc).__name__, "message": str(exc), "stage": getattr(exc, "stage", name)},
            )
            manifest.save(mpath)
            raise
        manifest.stages[name] = StageRecord(
            status="completed", key=key, wall_time=time.perf_counter() - t0,
            artifacts={k: {"path": f"{name}/{p}", "sha256": file_hash(ctx.dir / p)} for k, p in arts.items()},
            checks={k: bool(v) for k, v in checks.items()}, summary=_plain(summary),
        )
        manifest.save(mpath)
        log.info("%s: %s in %.1fs", name, "ok" if all(checks.values()) else "checks failed", manifest.stages[name].wall_time)
    manifest.save(mpath)
    return manifest
