"""Command line front end: ``roughwave <subcommand> [--config FILE] [--out DIR] [--seed N] [--strict]``.

Each run validates the whole configuration first, then computes, then
writes ``report.json`` (deterministic), ``timings.json`` and any CSV or
columnar artifacts into ``<out>/<subcommand>/``.  The default output root
is ``$ROUGHWAVE_OUT`` or ``./roughwave_out``.

Exit status: 0 success, 1 failed checks under ``--strict``, 2 invalid
configuration or input, 3 a computation error.
"""

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod, eikonal, io, metric as metric_mod, parametrix, suites
from ._backend import NAME as BACKEND
from .errors import ConfigError, RoughwaveError, SchemaMismatchError

SUBCOMMANDS = (
    "run-flat", "run-perturbed", "verify-eikonal", "verify-lemma", "kernel-decay", "strichartz-scaling",
    "emit-plot-data",
)

KERNEL_COLUMNS = ["j", "dt", "region", "absK", "majorant", "ratio"]
LEMMA_COLUMNS = ["pair", "region", "omega_x", "omega_y", "omega_z", "case", "abs_phi", "bound", "margin"]
STRICHARTZ_COLUMNS = ["quantity", "j", "norm", "data_norm", "normalized"]
KINDS = {"kernel_decay.csv": KERNEL_COLUMNS, "lemma.csv": LEMMA_COLUMNS, "strichartz.csv": STRICHARTZ_COLUMNS}


class Stage:
    """Times named stages and tags errors with the stage they came from."""

    def __init__(self):
        self.timings = {}
        self.current = None

    def __call__(self, name):
        self.current = name
        return self

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.timings[self.current] = time.perf_counter() - self._t0
        return False


class Run:
    def __init__(self, name, cfg, out_dir, stage):
        self.name = name
        self.cfg = cfg
        self.dir = out_dir
        self.stage = stage
        self.checks = {}
        self.results = {}
        self.artifacts = []
        self.warnings = []

    def add_suite(self, key, report):
        report = {k: v for k, v in report.items() if not k.startswith("_")}
        for name, c in report.get("checks", {}).items():
            self.checks[f"{key}.{name}"] = c
        self.results[key] = report

    def artifact(self, path):
        self.artifacts.append(Path(path).name)

    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    def report(self):
        return {
            "subcommand": self.name, "version": __version__, "backend": BACKEND,
            "config_hash": self.cfg.digest(), "config": self.cfg.to_dict(), "seed": self.cfg.seed,
            "checks": self.checks, "passed": self.passed(), "results": self.results,
            "artifacts": sorted(set(self.artifacts)), "warnings": self.warnings,
        }


# helpers -------------------------------------------------------------------------------------


def _metric(cfg):
    return metric_mod.make_metric(cfg.metric)


def _probes(rng, n):
    t = rng.uniform(0.1, 0.9, n)
    x = rng.uniform(-0.8, 0.8, (n, 3))
    return t, x


def _write_probes(run, j, t, x, vals, meta):
    cols = {"t": t, "x": x, "values_re": np.real(vals), "values_im": np.imag(vals)}
    path = io.write_columns(run.dir / f"parametrix_j{j}.rwcol", cols, {"j": j, **meta})
    run.artifact(path)
    run.artifact(str(path) + ".json")


# subcommands ---------------------------------------------------------------------------------


def cmd_run_flat(run):
    cfg = run.cfg
    with run.stage("flat_exactness"):
        run.add_suite("flat_exactness", suites.flat_exactness())
    optics = eikonal.optics_for(metric_mod.minkowski(cfg.metric.box_radius))
    prof = parametrix.FrequencyProfile.from_name(cfg["parametrix"]["profile"])
    rng = np.random.default_rng(cfg.seed)
    t, x = _probes(rng, cfg["parametrix"]["n_probes"])
    rows = {}
    worst = 0.0
    with run.stage("parametrix_flat"):
        for j in cfg["parametrix"]["levels"]:
            win = parametrix.DyadicWindow(j)
            vals, info = parametrix.parametrix_at(optics, win, prof, t, x)
            if prof.is_isotropic:
                ref = parametrix.RadialFlat(win, prof).value(t, np.linalg.norm(x, axis=1))
                worst = max(worst, float(np.max(np.abs(vals - ref)) / max(np.max(np.abs(ref)), 1e-300)))
            zero, _ = parametrix.parametrix_at(optics, win, parametrix.FrequencyProfile.zero(), t, x, check=False)
            rows[str(j)] = {"sphere_degree": info["sphere_degree"], "n_lambda": info["n_lambda"],
                            "rel_change": info["rel_change"], "zero_profile_max": float(np.max(np.abs(zero)))}
            _write_probes(run, j, t, x, vals, {"profile": prof.name, "epsilon": 0.0})
    checks = {"oracle_rel_error": suites._check(worst, 1e-6)} if prof.is_isotropic else {}
    checks["zero_profile"] = suites._check(max(r["zero_profile_max"] for r in rows.values()), 0.0)
    run.add_suite("parametrix", {"profile": prof.name, "levels": rows, "checks": checks})


def cmd_run_perturbed(run):
    cfg = run.cfg
    m = _metric(cfg)
    with run.stage("volume_comparison"):
        vol = metric_mod.check_volume_comparison(m)
        run.add_suite("volume", {**vol, "checks": {"lapse_within_bounds": suites._check(int(not vol["within_bounds"]), 0)}})
    optics = eikonal.optics_for(m, exact_flat=False)
    rng = np.random.default_rng(cfg.seed)
    with run.stage("optical_snapshot"):
        g1 = np.linspace(-1.0, 1.0, 5)
        X, Y, Z = np.meshgrid(g1, g1, g1, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        omega = np.array([0.36, 0.48, 0.8])
        f = eikonal.solve_optical_function(m, omega, (np.full(len(pts), 0.5), pts), solver=optics, derivs=True)
        path = io.write_columns(run.dir / "optical_field.rwcol", io.optical_field_columns(f),
                                {"grid": [5, 5, 5], "t": 0.5, "omega": omega, "epsilon": m.epsilon})
        run.artifact(path)
        run.artifact(str(path) + ".json")
    prof = parametrix.FrequencyProfile.from_name(cfg["parametrix"]["profile"])
    t, x = _probes(rng, cfg["parametrix"]["n_probes"])
    rows = {}
    fd_worst = 0.0
    with run.stage("parametrix"):
        for j in cfg["parametrix"]["levels"]:
            win = parametrix.DyadicWindow(j)
            vals, info = parametrix.parametrix_at(optics, win, prof, t, x)
            grad, _ = parametrix.parametrix_at(optics, win, prof, t, x, order=1)
            h = 2.0**-j / 100.0
            fd = np.empty_like(grad)
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                fp, _ = parametrix.parametrix_at(optics, win, prof, t, x + e, check=False,
                                                 degree=info["sphere_degree"], n_lam=info["n_lambda"])
                fm, _ = parametrix.parametrix_at(optics, win, prof, t, x - e, check=False,
                                                 degree=info["sphere_degree"], n_lam=info["n_lambda"])
                fd[:, k] = (fp - fm) / (2.0 * h)
            rel = float(np.max(np.linalg.norm(grad - fd, axis=1)) / np.max(np.linalg.norm(grad, axis=1)))
            fd_worst = max(fd_worst, rel)
            rows[str(j)] = {"sphere_degree": info["sphere_degree"], "n_lambda": info["n_lambda"],
                            "rel_change": info["rel_change"], "gradient_fd_rel": rel}
            _write_probes(run, j, t, x, vals, {"profile": prof.name, "epsilon": m.epsilon})
    run.add_suite("parametrix", {"profile": prof.name, "epsilon": m.epsilon, "levels": rows,
                                 "checks": {"gradient_vs_fd": suites._check(fd_worst, 1e-3)}})


def cmd_verify_eikonal(run):
    cfg = run.cfg
    ek = cfg["eikonal"]
    eps = cfg.metric.epsilon
    with run.stage("eikonal_identities"):
        rep = suites.eikonal_identities(eps, tuple(ek["eps_ladder"]), ek["n_geodesics"], cfg.seed,
                                        ek["tolerance"], base=cfg.metric)
    run.add_suite("eikonal", rep)


def cmd_verify_lemma(run):
    cfg = run.cfg
    le = cfg["lemma"]
    if le["pairs_file"] is not None:
        pairs = config_mod.load_pairs(le["pairs_file"])
        rows = []
        if not pairs:
            msg = "pairs file is empty; nothing to check"
            run.warnings.append(msg)
            print(f"warning: {msg}", file=sys.stderr)
        else:
            with run.stage("lemma_pairs"):
                optics = eikonal.optics_for(_metric(cfg))
                rows = suites.lemma_rows(optics, pairs, le["n_omega"], cfg.seed)
        path = io.write_csv(run.dir / "lemma.csv", rows, LEMMA_COLUMNS)
        run.artifact(path)
        viol = sum(1 for r in rows if r["case"] != "ExtNear" and r["margin"] < -1e-8)
        checks = {"violations_cases_1_3": suites._check(viol, 0)} if rows else {}
        run.add_suite("lemma", {"n_pairs": len(pairs), "n_samples": len(rows), "checks": checks})
        return
    eps = cfg.metric.epsilon if cfg.metric.epsilon > 0.0 else 0.05
    with run.stage("key_lemma"):
        rep = suites.key_lemma(tuple(le["n_pairs"]), le["n_omega"], eps, cfg.seed, base=cfg.metric)
    path = io.write_csv(run.dir / "lemma.csv", rep["_rows"], ["metric"] + LEMMA_COLUMNS)
    run.artifact(path)
    run.add_suite("key_lemma", rep)


def cmd_kernel_decay(run):
    cfg = run.cfg
    ke = cfg["kernel"]
    with run.stage("dispersive"):
        rep = suites.dispersive(cfg.metric.epsilon, ke["j"], ke["tau_min"], ke["n_tau"], ke["offset"],
                                base=cfg.metric)
    if ke["ratio_ceiling"] is not None:
        rep["checks"]["ratio_ceiling"] = suites._check(rep["max_ratio"], ke["ratio_ceiling"])
    rows = [{**r, "dt": r["tau"]} for r in rep["rows"]]
    path = io.write_csv(run.dir / "kernel_decay.csv", rows, KERNEL_COLUMNS)
    run.artifact(path)
    rep = dict(rep)
    rep.pop("rows")
    run.add_suite("kernel", rep)


def cmd_strichartz(run):
    cfg = run.cfg
    st = cfg["strichartz"]
    with run.stage("strichartz"):
        rep = suites.strichartz_scaling(st["p"], st["q"], tuple(st["levels"]), st["margin"], st["profile"])
    rows = []
    for qty, r in rep["reports"].items():
        for k, row in enumerate(r["per_j"]):
            rows.append({"quantity": qty, "j": row["j"], "norm": row["norm"], "data_norm": row["data_norm"],
                         "normalized": r["meta"]["normalized"][k]})
    path = io.write_csv(run.dir / "strichartz.csv", rows, STRICHARTZ_COLUMNS)
    run.artifact(path)
    run.add_suite("strichartz", rep)


def _pre_strichartz(cfg):
    if not _metric(cfg).is_flat:
        raise ConfigError("metric.epsilon", "strichartz-scaling uses the flat radial reduction; set epsilon = 0")
    prof = parametrix.FrequencyProfile.from_name(cfg["strichartz"]["profile"])
    if not prof.is_isotropic:
        raise ConfigError("strichartz.profile", "strichartz-scaling needs an isotropic profile")


COMMANDS = {
    "run-flat": cmd_run_flat,
    "run-perturbed": cmd_run_perturbed,
    "verify-eikonal": cmd_verify_eikonal,
    "verify-lemma": cmd_verify_lemma,
    "kernel-decay": cmd_kernel_decay,
    "strichartz-scaling": cmd_strichartz,
}


# plot data ---------------------------------------------------------------------------------


def emit_plot_data(paths, out_dir):
    """Merge per-run CSVs into tidy tables, one per artifact kind, with run metadata columns."""
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            found += sorted(q for q in p.iterdir() if q.name in KINDS)
        elif p.exists():
            found.append(p)
        else:
            raise ConfigError(str(p), "no such report")
    tables = {}
    for csv_path in found:
        kind = csv_path.name
        if kind not in KINDS:
            raise SchemaMismatchError("<file>", f"{csv_path}: unknown artifact kind")
        header, rows = io.read_csv(csv_path, KINDS[kind])
        meta = {"run": csv_path.parent.name, "epsilon": "", "config_hash": ""}
        rep_path = csv_path.parent / "report.json"
        if rep_path.exists():
            import json

            rep = json.loads(rep_path.read_text(encoding="utf-8"))
            meta["epsilon"] = repr(float(rep["config"]["metric"]["epsilon"]))
            meta["config_hash"] = rep["config_hash"]
            meta["run"] = f"{csv_path.parent.parent.name}/{csv_path.parent.name}"
        for r in rows:
            tables.setdefault(kind, []).append({**meta, **{c: r[c] for c in KINDS[kind] if c in r}})
    written = []
    for kind, rows in sorted(tables.items()):
        cols = ["run", "epsilon", "config_hash"] + KINDS[kind]
        written.append(io.write_csv(Path(out_dir) / f"plot_{kind}", rows, cols))
    return written


# entry point -------------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="roughwave", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--out", help="output root (default $ROUGHWAVE_OUT or ./roughwave_out)")
        if name == "emit-plot-data":
            p.add_argument("reports", nargs="+", help="run directories or CSV files")
            continue
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--strict", action="store_true", help="exit 1 when any check fails")
    return ap


def _out_root(args, cfg=None):
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg["run"]["output_dir"]:
        return Path(cfg["run"]["output_dir"])
    return Path(os.environ.get("ROUGHWAVE_OUT", "roughwave_out"))


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "emit-plot-data":
        try:
            out = _out_root(args) / "plot_data"
            written = emit_plot_data(args.reports, out)
        except (ConfigError, SchemaMismatchError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for w in written:
            print(w)
        return 0
    try:
        cfg = config_mod.load(args.config)
        if args.seed is not None:
            cfg.sections["run"]["seed"] = args.seed
        if args.command == "strichartz-scaling":
            _pre_strichartz(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    strict = args.strict or cfg["run"]["strict"]
    out_dir = _out_root(args, cfg) / args.command
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Stage()
    run = Run(args.command, cfg, out_dir, stage)
    try:
        COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RoughwaveError as exc:
        print(f"error in stage {stage.current}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    io.write_json(out_dir / "timings.json", {k: round(v, 6) for k, v in stage.timings.items()})
    run.artifact("timings.json")
    io.write_json(out_dir / "report.json", run.report())
    status = "PASS" if run.passed() else "FAIL"
    failed = [k for k, c in run.checks.items() if not c["passed"]]
    print(f"{args.command}: {status} ({len(run.checks) - len(failed)}/{len(run.checks)} checks) -> {out_dir}")
    for k in failed:
        c = run.checks[k]
        print(f"  failed {k}: value {c['value']!r} vs {c['op']} {c['threshold']!r}")
    if strict and failed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
