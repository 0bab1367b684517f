"""Command-line front end.

    qgyro thermal-curve --ell 20 40 80 --out runs/thermal
    qgyro run --config exp.ini
    qgyro sweep a.ini b.ini c.ini --parallel 4 --out runs/sweep
    qgyro self-check runs/thermal

Exit status: 0 on success, 2 when a config or path is rejected, 3 when a
numerical tolerance is breached, 1 when a self-check finds a bad checksum.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, NAMED_STATES, ExperimentConfig, load_config
from .errors import MemoryBudgetError, ToleranceError, ValidationError
from .experiments import UNITS, Result, run_experiment

OUT_ENV = "QGYRO_OUT"
MANIFEST = "manifest.json"
SWEEP_MANIFEST = "sweep_manifest.json"
EXIT_OK, EXIT_CHECKSUM, EXIT_INVALID, EXIT_TOLERANCE = 0, 1, 2, 3


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def format_number(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def render_csv(table) -> bytes:
    lines = [",".join(table.columns)]
    lines += [",".join(format_number(v) for v in row) for row in table.rows]
    return ("\n".join(lines) + "\n").encode()


def prepare_out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"output directory {out} is not writable: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise ValidationError(f"output directory {out} is not writable")
    return out


def write_outputs(cfg: ExperimentConfig, result: Result, out: Path, started: str) -> dict:
    outputs = {}
    for name, table in result.tables.items():
        p = out / name
        atomic_write(p, render_csv(table))
        outputs[name] = {
            "sha256": sha256_file(p),
            "rows": len(table.rows),
            "columns": {c: UNITS.get(c, "") for c in table.columns},
        }
    if result.report is not None:
        p = out / "povm_report.json"
        atomic_write(p, (json.dumps(result.report, indent=1) + "\n").encode())
        outputs[p.name] = {"sha256": sha256_file(p)}
    manifest = {
        "artifact": "qgyro",
        "version": __version__,
        "experiment": cfg.experiment,
        "config": {k: v for k, v in cfg.to_dict().items() if k != "output"},
        "config_sha256": cfg.digest(),
        "tolerances": dict(cfg.tolerances),
        "started": started,
        "finished": _now(),
        "outputs": outputs,
    }
    atomic_write(out / MANIFEST, (json.dumps(manifest, indent=1, sort_keys=True) + "\n").encode())
    return manifest


def execute(cfg: ExperimentConfig, out_dir) -> dict:
    """Run one validated config and write its CSVs plus manifest into ``out_dir``."""
    out = prepare_out_dir(out_dir)
    started = _now()
    result = run_experiment(cfg)
    return write_outputs(cfg, result, out, started)


def self_check(directory) -> list:
    """Recompute every checksum listed under ``directory``; return the mismatches."""
    root = Path(directory)
    bad = []
    manifests = sorted(root.rglob(MANIFEST))
    if not manifests:
        raise ValidationError(f"no {MANIFEST} found under {root}")
    for m in manifests:
        entries = json.loads(m.read_text())["outputs"]
        for name, info in sorted(entries.items()):
            p = m.parent / name
            if not p.exists():
                bad.append(f"{p}: missing")
            elif sha256_file(p) != info["sha256"]:
                bad.append(f"{p}: checksum mismatch")
    return bad


def load_povm_report(path) -> dict:
    """Read a povm_report.json back, restoring the POVM elements as complex arrays."""
    rep = json.loads(Path(path).read_text())
    for key in ("lambda_plus", "lambda_minus"):
        a = np.asarray(rep[key], dtype=float)
        rep[key] = a[..., 0] + 1j * a[..., 1]
    rep["n_rho"] = np.asarray(rep["n_rho"])
    if rep["theta"] is None:
        rep["theta"] = float("nan")
    return rep


def _default_out(cfg: ExperimentConfig, given) -> Path:
    if given:
        return Path(given)
    if cfg.output:
        return Path(cfg.output)
    return Path(os.environ.get(OUT_ENV, "qgyro-out"))


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if getattr(args, "ell", None):
        bad = [v for v in args.ell if abs(2 * v - round(2 * v)) > 1e-9]
        if bad:
            raise ValidationError(f"geometry: ell = {bad[0]} is not an integer or half-integer")
        changes["twice_ell"] = [int(round(2 * v)) for v in args.ell]
    if getattr(args, "s_z", None):
        changes["s_z"] = list(args.s_z)
    for key in ("steps", "state", "theta", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            changes[{"state": "initial_state", "theta": "theta0"}.get(key, key)] = val
    return replace(cfg, **changes).validate()


def _report(msg: str) -> None:
    print(msg, file=sys.stderr)


def _run_one(cfg: ExperimentConfig, out: Path, check: bool) -> int:
    manifest = execute(cfg, out)
    for name in manifest["outputs"]:
        print(out / name)
    if cfg.experiment == "povm-report":
        rep = json.loads((out / "povm_report.json").read_text())
        print(f"n_rho = {rep['n_rho']}  r = {rep['r']!r}  theta = {rep['theta']!r}  Q_ave = {rep['q_ave']!r}")
    if check:
        bad = self_check(out)
        for b in bad:
            _report(b)
        return EXIT_CHECKSUM if bad else EXIT_OK
    return EXIT_OK


def _sweep_worker(job):
    index, cfg_dict, out = job
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        manifest = execute(cfg, out)
    except (ValidationError, MemoryBudgetError) as exc:
        return index, EXIT_INVALID, str(exc), None
    except ToleranceError as exc:
        return index, EXIT_TOLERANCE, str(exc), None
    return index, EXIT_OK, None, {k: v["sha256"] for k, v in manifest["outputs"].items()}


def sweep(config_paths, out_dir, parallel: int = 1, seed=None) -> tuple[int, dict]:
    """Run independent configs up to ``parallel`` at a time.

    Each valid config writes to ``NNN-<hash12>`` where NNN is its rank when
    the configs are sorted by (config hash, position on the command line).
    The aggregated manifest lists runs in that order whatever the completion
    order, and the exit status is the largest per-config status.
    """
    if parallel < 1:
        raise ValidationError(f"--parallel must be >= 1, got {parallel}")
    out = prepare_out_dir(out_dir)
    started = _now()
    entries = []
    for i, path in enumerate(config_paths):
        entry = {"index": i, "config_path": str(path)}
        try:
            cfg = load_config(path)
            if seed is not None:
                cfg = replace(cfg, seed=seed).validate()
            entry["config_sha256"] = cfg.digest()
            entry["cfg"] = cfg
        except ValidationError as exc:
            entry["config_sha256"] = hashlib.sha256(Path(path).read_bytes() if Path(path).is_file() else b"").hexdigest()
            entry["status"] = EXIT_INVALID
            entry["error"] = str(exc)
        entries.append(entry)
    entries.sort(key=lambda e: (e["config_sha256"], e["index"]))

    jobs = []
    for rank, e in enumerate(entries):
        e["dir"] = f"{rank:03d}-{e['config_sha256'][:12]}"
        if "cfg" in e:
            jobs.append((e["index"], e["cfg"].to_dict(), str(out / e["dir"])))
    by_index = {e["index"]: e for e in entries}
    if parallel == 1 or len(jobs) <= 1:
        results = map(_sweep_worker, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=min(parallel, len(jobs)))
        results = pool.map(_sweep_worker, jobs)
    try:
        for index, status, err, sums in results:
            e = by_index[index]
            e["status"] = status
            if err is not None:
                e["error"] = err
            if sums is not None:
                e["outputs"] = sums
    finally:
        if parallel > 1 and len(jobs) > 1:
            pool.shutdown()

    runs = []
    for e in entries:
        e.pop("cfg", None)
        e["ok"] = e["status"] == EXIT_OK
        runs.append(e)
    manifest = {
        "artifact": "qgyro",
        "version": __version__,
        "started": started,
        "finished": _now(),
        "runs": runs,
        "succeeded": sum(r["ok"] for r in runs),
        "failed": sum(not r["ok"] for r in runs),
    }
    atomic_write(out / SWEEP_MANIFEST, (json.dumps(manifest, indent=1, sort_keys=True) + "\n").encode())
    return max((r["status"] for r in runs), default=EXIT_OK), manifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qgyro", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--out", help=f"output directory (default: config, then ${OUT_ENV}, then ./qgyro-out)")
    common.add_argument("--seed", type=int, help="seed for randomized inputs")
    common.add_argument("--self-check", action="store_true", help="verify checksums after writing")

    for name in EXPERIMENTS:
        sp = sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
        sp.add_argument("--ell", type=float, nargs="+", help="reference spin(s), integer or half-integer")
        sp.add_argument("--s-z", dest="s_z", type=float, nargs="+", help="source polarization(s) <S_z>")
        sp.add_argument("--steps", type=int)
        sp.add_argument("--state", choices=NAMED_STATES, help="initial reference state")
        sp.add_argument("--theta", type=float, help="polar angle of a coherent initial state")

    sub.add_parser("run", parents=[common], help="run the experiment named in --config")

    sw = sub.add_parser("sweep", help="run several configs concurrently")
    sw.add_argument("configs", nargs="+")
    sw.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, then ./qgyro-out)")
    sw.add_argument("--parallel", type=int, default=1)
    sw.add_argument("--seed", type=int)

    sc = sub.add_parser("self-check", help="verify manifest checksums under a directory")
    sc.add_argument("directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "self-check":
            bad = self_check(args.directory)
            for b in bad:
                _report(b)
            if not bad:
                print(f"{args.directory}: all checksums match")
            return EXIT_CHECKSUM if bad else EXIT_OK
        if args.command == "sweep":
            out = Path(args.out or os.environ.get(OUT_ENV, "qgyro-out"))
            status, manifest = sweep(args.configs, out, args.parallel, args.seed)
            for r in manifest["runs"]:
                line = f"{r['dir']}  {'ok' if r['ok'] else 'FAILED'}  {r['config_path']}"
                print(line if r["ok"] else f"{line}: {r['error']}")
            return status
        if args.command == "run":
            if not args.config:
                raise ValidationError("run needs --config")
            cfg = load_config(args.config)
        elif args.config:
            cfg = load_config(args.config, args.command)
        else:
            cfg = ExperimentConfig(experiment=args.command)
        cfg = _apply_overrides(cfg, args)
        return _run_one(cfg, _default_out(cfg, args.out), args.self_check)
    except (ValidationError, MemoryBudgetError) as exc:
        _report(f"qgyro: invalid input: {exc}")
        return EXIT_INVALID
    except ToleranceError as exc:
        _report(f"qgyro: tolerance breach: {exc}")
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
