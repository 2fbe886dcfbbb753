"""Command-line entry point: ``generate``, ``analyze``, ``benchmark``, ``export``.

Every command writes a JSON manifest. Apart from the ``timing`` entries
(and per-record ``*_seconds`` fields) manifests are deterministic for a
given input and flag set.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from .analysis import FORMS, analyze, analyze_frequency, compare_forms
from .generate import GenerationExhausted, GeneratorConfig, generate_instance, verify_conditions
from .lmi import lumped_lmi, sparse_lmi
from .lti import FrequencyGrid, IllPosedInterconnection
from .model import well_posed
from .sdpa import export_sdpa
from .serialization import SCHEMA_VERSION, load_json, load_system, save_json, system_to_dict
from .solver import SolverOptions, SolverPath

log = logging.getLogger("sparseiqc")

BENCH_COLUMNS = ["N", "trial", "form", "build_ms", "solve_ms", "order", "nnz", "fill_ratio", "margin"]
DEFAULT_PATHS = {"lumped": SolverPath.DENSE, "sparse": SolverPath.SPARSE}


class ConfigError(ValueError):
    pass


def _hash(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p if isinstance(p, bytes) else json.dumps(p, sort_keys=True).encode())
    return h.hexdigest()[:16]


def _manifest(command, config_hash, seed, grid, outcomes, timing, verdict, **extra) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "manifest",
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "grid": grid,
        "outcomes": outcomes,
        "timing": timing,
        "verdict": verdict,
        **extra,
    }


def _read_config(path) -> dict:
    try:
        doc = load_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    return doc


def _generator_config(doc) -> GeneratorConfig:
    try:
        return GeneratorConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_generate(config_path, out_dir) -> dict:
    """Write ``config.instances`` verified instances plus ``manifest.json`` into ``out_dir``."""
    cfg = _generator_config(_read_config(config_path))
    os.makedirs(out_dir, exist_ok=True)
    grid = FrequencyGrid.parse(cfg.grid)
    seeds = np.random.SeedSequence(int(cfg.seed)).spawn(cfg.instances)
    outcomes = []
    t0 = time.perf_counter()
    for k, seq in enumerate(seeds):
        sys_ = generate_instance(cfg, np.random.default_rng(seq))
        report = verify_conditions(sys_, grid)
        posed = well_posed(sys_, grid)
        name = f"instance_{k:03d}.json"
        save_json(system_to_dict(sys_, config=cfg.to_dict(), instance=k,
                                 conditions=report.to_dict(), well_posed=posed),
                  os.path.join(out_dir, name))
        outcomes.append({"instance": k, "file": name, "conditions": report.to_dict(),
                         "well_posed": posed})
    manifest = _manifest(
        "generate", cfg.digest(), int(cfg.seed), grid.to_list(), outcomes,
        {"generate_seconds": time.perf_counter() - t0},
        "ok" if all(o["conditions"]["all_pass"] and o["well_posed"] for o in outcomes) else "failed",
        config=cfg.to_dict(),
    )
    save_json(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest


def _options(path: str) -> SolverOptions:
    return SolverOptions(path=SolverPath(path))


def cmd_analyze(instance_path, form="sparse", grid="log:1e-2:1e2:20", solver_path="auto",
                jobs=1, out=None) -> dict:
    """Analyze one instance file; returns the manifest (also written next to ``out``)."""
    with open(instance_path, "rb") as fh:
        raw = fh.read()
    sys_ = load_system(instance_path)
    fg = FrequencyGrid.parse(grid)
    forms = FORMS if form == "both" else (form,)
    opts = _options(solver_path)
    certs = {f: analyze(sys_, fg, f, opts, jobs=jobs) for f in forms}
    outcomes = {f: [r.to_dict(timing=False) for r in c.records] for f, c in certs.items()}
    timing = {f: {"build_seconds": c.build_seconds, "solve_seconds": c.solve_seconds,
                  "per_frequency": [{"omega": r["omega"], "build_seconds": rec.build_seconds,
                                     "solve_seconds": rec.solve_seconds}
                                    for r, rec in zip(outcomes[f], c.records)]}
              for f, c in certs.items()}
    extra = {"forms": {f: {"verdict": c.verdict, "aborted": c.aborted} for f, c in certs.items()}}
    verdicts = {c.verdict for c in certs.values()}
    if len(certs) == 2:
        disagree = compare_forms(certs["lumped"], certs["sparse"])
        extra["disagreements"] = disagree
        aborted = any(c.aborted for c in certs.values())
        extra["agreement"] = not disagree and (aborted or len(verdicts) == 1)
    verdict = verdicts.pop() if len(verdicts) == 1 else "disagreement"
    seed = None
    doc = load_json(instance_path)
    if isinstance(doc.get("config"), dict):
        seed = doc["config"].get("seed")
    manifest = _manifest(
        "analyze", _hash(raw, {"form": form, "grid": grid, "solver_path": solver_path}),
        seed, fg.to_list(), outcomes, timing, verdict, **extra,
    )
    if out:
        save_json({f: c.to_dict() for f, c in certs.items()}, out)
        save_json(manifest, _manifest_path(out))
    return manifest


def _manifest_path(out) -> str:
    root, _ = os.path.splitext(out)
    return root + ".manifest.json"


def _bench_config(doc) -> dict:
    Ns = doc.get("N", [10, 50, 100, 200])
    Ns = [Ns] if isinstance(Ns, int) else list(Ns)
    cfg = {
        "N": [int(n) for n in Ns],
        "trials": int(doc.get("trials", 10)),
        "topology": doc.get("topology", "chain"),
        "alpha": float(doc.get("alpha", 2.5)),
        "seed": int(doc.get("seed", 0)),
        "frequency": float(doc.get("frequency", 1.0)),
        "forms": list(doc.get("forms", list(FORMS))),
        "solver_path": {f: doc.get("solver_path", {}).get(f, DEFAULT_PATHS[f].value) for f in FORMS},
    }
    if cfg["trials"] < 1 or any(n < 2 for n in cfg["N"]):
        raise ConfigError("need trials >= 1 and N >= 2")
    if set(cfg["forms"]) - set(FORMS):
        raise ConfigError(f"forms must be among {FORMS}")
    return cfg


def cmd_benchmark(config_path, out_csv, manifest_path=None) -> dict:
    """Time both forms on a sweep of instances at one frequency and write a CSV."""
    cfg = _bench_config(_read_config(config_path))
    rows, outcomes = [], []
    t0 = time.perf_counter()
    for N in cfg["N"]:
        seeds = np.random.SeedSequence([cfg["seed"], N]).spawn(cfg["trials"])
        for trial, seq in enumerate(seeds):
            gcfg = GeneratorConfig(N=N, topology=cfg["topology"], alpha=cfg["alpha"], seed=cfg["seed"])
            sys_ = generate_instance(gcfg, np.random.default_rng(seq))
            for form in cfg["forms"]:
                rec = analyze_frequency(sys_, cfg["frequency"], form,
                                        _options(cfg["solver_path"][form]))
                rows.append({
                    "N": N, "trial": trial, "form": form,
                    "build_ms": 1e3 * rec.build_seconds, "solve_ms": 1e3 * rec.solve_seconds,
                    "order": rec.order, "nnz": rec.nnz, "fill_ratio": rec.fill_ratio,
                    "margin": rec.margin,
                })
                outcomes.append({"N": N, "trial": trial, "form": form, "status": rec.status,
                                 "margin": rec.margin, "certified": rec.certified})
                log.info("N=%d trial=%d %s %.1f ms", N, trial, form, rows[-1]["solve_ms"])
    with open(out_csv, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    manifest = _manifest(
        "benchmark", _hash(cfg), cfg["seed"], [cfg["frequency"]], outcomes,
        {"total_seconds": time.perf_counter() - t0,
         "mean_solve_ms": _mean_solve(rows)},
        "ok" if all(o["status"] != "NumericalFailure" for o in outcomes) else "failures",
        config=cfg,
    )
    save_json(manifest, manifest_path or _manifest_path(out_csv))
    return manifest


def _mean_solve(rows) -> dict:
    out = {}
    for r in rows:
        out.setdefault(f"{r['form']}/{r['N']}", []).append(r["solve_ms"])
    return {k: float(np.mean(v)) for k, v in out.items()}


def cmd_export(instance_path, freq, form, out) -> dict:
    """Write the per-frequency problem of one form as an SDPA ``.dat-s`` file."""
    sys_ = load_system(instance_path)
    omega = float(freq)
    problem = (lumped_lmi if form == "lumped" else sparse_lmi)(sys_, omega)
    export_sdpa(problem, out)
    return {"file": out, "order": problem.order, "m": problem.m, "nnz": problem.nnz}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparseiqc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate verified instances from a JSON config")
    g.add_argument("config")
    g.add_argument("--out", required=True, help="output directory")

    a = sub.add_parser("analyze", help="frequency-gridded robustness analysis of one instance")
    a.add_argument("instance")
    a.add_argument("--form", choices=["lumped", "sparse", "both"], default="sparse")
    a.add_argument("--grid", default="log:1e-2:1e2:20")
    a.add_argument("--solver-path", choices=[p.value for p in SolverPath], default="auto")
    a.add_argument("--jobs", type=int, default=1)
    a.add_argument("--out", help="certificate JSON (manifest goes to <out>.manifest.json)")

    b = sub.add_parser("benchmark", help="time lumped vs sparse solves over a sweep")
    b.add_argument("config")
    b.add_argument("--out", required=True, help="CSV output")
    b.add_argument("--manifest")

    e = sub.add_parser("export", help="write one per-frequency LMI in SDPA sparse format")
    e.add_argument("instance")
    e.add_argument("--freq", required=True)
    e.add_argument("--form", choices=["lumped", "sparse"], default="sparse")
    e.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "generate":
            m = cmd_generate(args.config, args.out)
            print(f"wrote {len(m['outcomes'])} instance(s) to {args.out}")
        elif args.command == "analyze":
            m = cmd_analyze(args.instance, args.form, args.grid, args.solver_path, args.jobs, args.out)
            if not args.out:
                json.dump(m, sys.stdout, indent=1, sort_keys=True)
                print()
            print(f"verdict: {m['verdict']}", file=sys.stderr)
            if m.get("agreement") is False:
                return 3
        elif args.command == "benchmark":
            cmd_benchmark(args.config, args.out, args.manifest)
            print(f"wrote {args.out}")
        elif args.command == "export":
            info = cmd_export(args.instance, args.freq, args.form, args.out)
            print(f"wrote {info['file']} (order {info['order']}, {info['m']} variables)")
    except (ConfigError, GenerationExhausted, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IllPosedInterconnection as exc:
        print(f"error: ill-posed interconnection: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
