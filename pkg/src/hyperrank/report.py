"""Markdown summary and figures rendered from the artifacts of a run.

Every number in the summary is read back from a CSV/JSON artifact, and each
table names the file and columns it came from.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .pipeline import DYNAMICS_STAGES, STAGES, read_csv  # noqa: E402


def _fmt(x, digits=3):
    try:
        v = float(x)
    except (TypeError, ValueError):
        return str(x)
    if v == 0 or not np.isfinite(v):
        return f"{v:g}"
    return f"{v:.{digits}e}" if abs(v) < 1e-2 or abs(v) >= 1e4 else f"{v:.{digits + 1}g}"


def _table(header, rows):
    def cell(c):
        return str(c).replace("|", "\\|")

    out = ["| " + " | ".join(cell(h) for h in header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(cell(c) for c in r) + " |" for r in rows]
    return out


class _Artifacts:
    """Resolves artifact paths of a manifest and remembers the ones that are missing."""

    def __init__(self, manifest, root):
        self.manifest = manifest
        self.root = Path(root)
        self.missing = []

    def path(self, stage, key):
        rec = self.manifest.stages[stage]
        if rec.status not in ("completed", "cached"):
            return None
        art = rec.artifacts.get(key)
        if art is None:
            self.missing.append(f"{stage}:{key}")
            return None
        p = self.root / art["path"]
        if not p.is_file():
            self.missing.append(art["path"])
            return None
        return p

    def csv(self, stage, key):
        p = self.path(stage, key)
        return (read_csv(p), p) if p else (None, None)

    def json(self, stage, key):
        p = self.path(stage, key)
        return (json.loads(p.read_text()), p) if p else (None, None)


def _rel(p, root):
    return str(Path(p).relative_to(root))


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def fig_levels(rows, path):
    n = [int(r["level"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(n, [float(r["max_length"]) for r in rows], "o-", label="longest interval")
    ax.semilogy(n, [float(r["bound"]) for r in rows], "k--", label="1/n!")
    ax.semilogy(n, [float(r["measure"]) for r in rows], "s:", label="total length")
    ax.set_xlabel("level n")
    ax.set_ylabel("turns")
    ax.legend()
    return _save(fig, path)


def fig_identities(rows, path):
    fig, ax = plt.subplots(figsize=(6, 3.8))
    lams = list(dict.fromkeys(r["lambda_hex"] for r in rows))
    idx = {l: i for i, l in enumerate(lams)}
    for (ident, p), mk in zip(sorted({(r["identity"], r["path"]) for r in rows}), "os^vD<"):
        sel = [r for r in rows if r["identity"] == ident and r["path"] == p]
        x = [idx[r["lambda_hex"]] for r in sel]
        ax.semilogy(x, [max(float(r["residual"]), 1e-18) for r in sel], mk, ms=4, label=f"{ident} ({p})")
    bars = sorted({float(r["error_bar"]) for r in rows if r["path"] == "analytic"})
    for b in bars[-1:]:
        ax.axhline(b, color="k", ls="--", lw=0.8)
    ax.set_xlabel("lambda index")
    ax.set_ylabel("|measured - target|")
    ax.legend(fontsize=6)
    return _save(fig, path)


def fig_continuity(rows, octaves, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ch = np.array([float(r["chord"]) for r in rows])
    ra = np.array([float(r["ratio"]) for r in rows])
    ok = ch > 0
    ax.loglog(ch[ok], ra[ok], ".", alpha=0.6, label="pairs")
    ax.loglog([2.0 ** (int(o["octave"]) + 0.5) for o in octaves], [float(o["median_ratio"]) for o in octaves],
              "ro-", label="octave median")
    ax.set_xlabel("|z - s|")
    ax.set_ylabel("||h_z - h_s||^2 / |z - s|^(1/3)")
    ax.legend()
    return _save(fig, path)


def fig_models(rows, membership, path):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.4))
    m = [int(r["m"]) for r in rows]
    a1.semilogy(m, [float(r["condition_number"]) for r in rows], "o-")
    a1.set_xlabel("m")
    a1.set_ylabel("Gram condition number")
    mm = [int(r["m"]) for r in membership]
    a2.plot(mm, [float(r["res_h"]) for r in membership], "o-", label="h")
    a2.plot(mm, [float(r["res_uinv_h"]) for r in membership], "s--", label="U^-1 h")
    a2.set_xlabel("m")
    a2.set_ylabel("residual off K_m")
    a2.legend()
    return _save(fig, path)


def fig_singvals(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for m in sorted({int(r["m"]) for r in rows}):
        sv = [float(r["sigma"]) for r in rows if int(r["m"]) == m]
        ax.semilogy(range(1, len(sv) + 1), np.maximum(sv, 1e-20), "o-", ms=3, label=f"m = {m}")
    ax.axvline(2.5, color="k", ls=":", lw=0.8)
    ax.set_xlabel("index j")
    ax.set_ylabel("sigma_j(R)")
    ax.legend(fontsize=7)
    return _save(fig, path)


def fig_orbit(traj, crowd, path):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.4))
    for name in ("T", "V"):
        sel = [r for r in traj if r["matrix"] == name]
        a1.plot([int(r["step"]) for r in sel], [float(r["lognorm"]) for r in sel], label=name)
    a1.set_xlabel("n")
    a1.set_ylabel("log ||x_n||")
    a1.legend()
    m = [int(r["m"]) for r in crowd]
    cols = sorted(k for k in crowd[0] if k.startswith("coverage_T_"))
    for c in cols:
        a2.plot(m, [float(r[c]) for r in crowd], "o-", label=f"projection {c.rsplit('_', 1)[1]}")
    a2.set_xscale("log", base=2)
    a2.set_xlabel("m")
    a2.set_ylabel("phase coverage (T)")
    a2.legend(fontsize=7)
    return _save(fig, path)


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------


def _status_section(manifest):
    rows = []
    for s in STAGES:
        r = manifest.stages[s]
        n_ok = sum(r.checks.values())
        kind = "trend" if s in DYNAMICS_STAGES else "hard"
        rows.append([s, r.status, f"{r.wall_time:.2f}", f"{n_ok}/{len(r.checks)}" if r.checks else "-", kind])
    lines = ["## Stages", ""] + _table(["stage", "status", "wall time (s)", "checks passed", "kind"], rows)
    failed = [(s, r.error) for s, r in manifest.stages.items() if r.status == "failed"]
    for s, err in failed:
        lines += ["", f"Stage `{s}` failed: {err['type']}: {err['message']}"]
    bad = [(s, k) for s in STAGES for k, v in manifest.stages[s].checks.items() if not v]
    if bad:
        lines += ["", "Failed checks: " + ", ".join(f"`{s}:{k}`" for s, k in bad)]
    return lines


def _not_run(stage):
    return [f"## {stage}", "", f"Stage `{stage}` not run.", ""]


def emit_report(manifest, out, summary_name="summary.md"):
    """Write the markdown summary and the figures; return the written paths.

    Stages that did not complete are listed as not run; artifacts listed in
    the manifest but absent on disk are flagged and their sections skipped.
    """
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    A = _Artifacts(manifest, root)
    written = []
    L = ["# hyperrank run summary", "", f"config hash `{manifest.config_hash[:16]}`, tool version {manifest.tool_version}", ""]
    L += _status_section(manifest) + [""]
    done = {s: manifest.stages[s].status in ("completed", "cached") for s in STAGES}

    # belov-check
    if done["belov-check"]:
        data, p = A.json("belov-check", "belov_json")
        L += ["## belov-check", ""]
        if data:
            recs = data["records"]
            bnd = [r for r in recs if "== 1" in r["name"]]
            L += [f"{sum(r['pass'] for r in recs)}/{len(recs)} inequalities hold exactly "
                  f"(m up to {max(r['m'] for r in recs)}; source `{_rel(p, root)}` column `pass`).", ""]
            L += _table(["constant", "value", "target", "pass"], [[r["name"], r["lhs"], r["rhs"], r["pass"]] for r in bnd])
        L.append("")
    else:
        L += _not_run("belov-check")

    # build-cantor
    if done["build-cantor"]:
        lv, p = A.csv("build-cantor", "levels_csv")
        it, pi = A.csv("build-cantor", "integrability_csv")
        chk = manifest.stages["build-cantor"].checks
        L += ["## build-cantor", ""]
        L += [f"Exact tree checks: nesting {chk.get('com1')}, ordering {chk.get('com2')}, shrinkage {chk.get('com3')}.", ""]
        if lv:
            L += [f"Source `{_rel(p, root)}`.", ""]
            L += _table(["level", "intervals", "longest", "1/n!", "pass"],
                        [[r["level"], r["intervals"], _fmt(r["max_length"]), _fmt(r["bound"]),
                          float(r["max_length"]) < float(r["bound"])] for r in lv])
            written.append(fig_levels(lv, p.parent / "levels.png"))
            L += ["", f"![levels]({_rel(written[-1], root)})", ""]
        if it:
            L += [f"Integrability of dist^-alpha (source `{_rel(pi, root)}`, column `total`):", ""]
            L += _table(["depth", "alpha", "total", "gap measure"],
                        [[r["depth"], _fmt(r["alpha"]), _fmt(r["total"], 6), _fmt(r["gap_measure"])] for r in it])
        L.append("")
    else:
        L += _not_run("build-cantor")

    # verify-identities
    if done["verify-identities"]:
        ids, p = A.csv("verify-identities", "identities_csv")
        eig, pe = A.csv("verify-identities", "eigen_identity_csv")
        cont, pc = A.csv("verify-identities", "continuity_csv")
        octs, po = A.csv("verify-identities", "continuity_octaves_csv")
        L += ["## verify-identities", ""]
        if ids:
            L += [f"Source `{_rel(p, root)}`; measured = `measured_re` + i `measured_im`, tolerance = `error_bar`.", ""]
            rows = [[r["lambda_hex"].rstrip("0"), r["identity"], r["path"], r["target"],
                     f"{_fmt(r['measured_re'], 6)}{float(r['measured_im']):+.6g}j", _fmt(r["residual"]),
                     _fmt(r["error_bar"]), "pass" if float(r["residual"]) <= float(r["error_bar"]) else "FAIL"]
                    for r in ids]
            L += _table(["lambda", "identity", "path", "target", "measured", "residual", "tolerance", "result"], rows)
            written.append(fig_identities(ids, p.parent / "identities.png"))
            L += ["", f"![identities]({_rel(written[-1], root)})", ""]
        if eig:
            L += [f"Eigen identity (source `{_rel(pe, root)}`): max pointwise uhl residual "
                  f"{_fmt(max(float(r['uhl_residual']) for r in eig))}, max relative disagreement between "
                  f"`eigen_residual` and `pairing_residual` {_fmt(max(float(r['agreement']) for r in eig))}.", ""]
        if cont and octs:
            med = float(np.median([float(o["median_ratio"]) for o in octs]))
            L += [f"Continuity ratio per octave (source `{_rel(po, root)}`), median of octaves {_fmt(med)}:", ""]
            L += _table(["octave", "median ratio", "ratio / median"],
                        [[o["octave"], _fmt(o["median_ratio"]), _fmt(float(o["median_ratio"]) / med)] for o in octs])
            written.append(fig_continuity(cont, octs, pc.parent / "continuity.png"))
            L += ["", f"![continuity]({_rel(written[-1], root)})", ""]
    else:
        L += _not_run("verify-identities")

    # build-model
    if done["build-model"]:
        mods, p = A.csv("build-model", "models_csv")
        mem, pm = A.csv("build-model", "membership_csv")
        L += ["## build-model", ""]
        if mods:
            L += [f"Source `{_rel(p, root)}`.", ""]
            L += _table(["m", "rank", "condition", "invariance defect", "spectrum error", "dim X_m", "res h"],
                        [[r["m"], r["rank"], _fmt(r["condition_number"]), _fmt(r["invariance_defect"]),
                          _fmt(r["spectrum_error"]), r["hyperplane_dim"], _fmt(r["h_residual"])] for r in mods])
            if mem:
                written.append(fig_models(mods, mem, p.parent / "models.png"))
                L += ["", f"Membership residual trend in `{_rel(pm, root)}`.", "",
                      f"![models]({_rel(written[-1], root)})"]
        L.append("")
    else:
        L += _not_run("build-model")

    # decompose
    if done["decompose"]:
        dec, p = A.csv("decompose", "decompose_csv")
        sv, ps = A.csv("decompose", "singvals_csv")
        L += ["## decompose", ""]
        if dec:
            L += [f"Source `{_rel(p, root)}`; sigma(R) lists the three leading singular values of R.", ""]
            L += _table(["m", "method", "branch", "unitarity defect", "sigma(R)", "sigma3/sigma1", "||A||",
                         "rank-1 ratio", "audit"],
                        [[r["m"], r["method"], r["branch"], _fmt(r["unitarity_defect"]),
                          ", ".join(_fmt(r[k]) for k in ("sigma1_R", "sigma2_R", "sigma3_R")),
                          _fmt(r["rank_ratio_R"]), _fmt(r["norm_A"]), _fmt(r["rank1_ratio"]), r["audit"]] for r in dec])
        if sv:
            written.append(fig_singvals(sv, ps.parent / "singvals_R.png"))
            L += ["", f"![singular values]({_rel(written[-1], root)})"]
        L.append("")
    else:
        L += _not_run("decompose")

    # orbit
    if done["orbit"]:
        crowd, p = A.csv("orbit", "crowding_csv")
        dyn, pd = A.json("orbit", "dynamics_json")
        traj, _ = A.csv("orbit", "trajectory_csv")
        L += ["## orbit", "", "Finite-dimensional orbits cannot be dense; these are trend surrogates.", ""]
        if dyn:
            L += [f"Unitary part: norm drift {_fmt(dyn['unitary_drift'])} over {dyn['unitary_steps']} steps. "
                  f"Irrational rotation: coverage {_fmt(dyn['weyl_coverage'])} after {dyn['weyl_steps']} steps. "
                  f"Coverage non-decreasing in m per projection: {dyn['coverage_nondecreasing']} "
                  f"(source `{_rel(pd, root)}`).", ""]
        if crowd:
            cols = sorted(k for k in crowd[0] if k.startswith("coverage_T_"))
            L += _table(["m", "condition", "min separation", "var log||T^n x||", "var log||V^n x||", "drift V",
                         "coverage T"],
                        [[r["m"], _fmt(r["cond"]), _fmt(r["min_sep"]), _fmt(r["lognorm_var_T"]),
                          _fmt(r["lognorm_var_V"]), _fmt(r["drift_V"]), ", ".join(_fmt(r[c]) for c in cols)]
                         for r in crowd])
            L += ["", f"Source `{_rel(p, root)}`."]
            if traj:
                written.append(fig_orbit(traj, crowd, p.parent / "orbit.png"))
                L += ["", f"![orbits]({_rel(written[-1], root)})"]
        L.append("")
    else:
        L += _not_run("orbit")

    if A.missing:
        L += ["## Gaps", ""] + [f"- missing artifact `{m}`" for m in A.missing] + [""]
    summary = root / summary_name
    summary.write_text("\n".join(L) + "\n")
    return [summary] + written
