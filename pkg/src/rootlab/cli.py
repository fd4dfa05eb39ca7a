"""Batch front end: config files, pipeline orchestration, result export.

One run = one output directory holding a ground-state checkpoint, JSON
and CSV result files, and a manifest with timings and a verification
summary.  Config values come from a flat JSON file; `--set key=value`
flags override file entries, file entries override built-in defaults.
Exit codes: 0 success, 2 verification failure, 3 solver non-convergence,
64 usage error.
"""

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .betheroots import (
    classify_bethe_roots,
    energy_from_bethe,
    solve_inhomogeneous_bethe,
    verify_bae_ratio,
    verify_tq_at_roots,
)
from .errors import (
    AmbiguousPattern,
    NoConvergence,
    PoleInRatio,
    RootlabError,
    SingularSystem,
)
from .groundstate import (
    DmrgOptions,
    dmrg_ground_state,
    ground_state_mps,
    hamiltonian_mpo,
    load_mps,
    save_mps,
)
from .model import ModelParams
from .spectral import make_bethe_nodes, make_zero_nodes, reconstruct_lambda, sample_lambda
from .zeroroots import (
    accuracy_ladder,
    check_constraints,
    classify_zero_pattern,
    energy_from_zero_roots,
    solve_zero_roots,
    tag_zero_roots,
    verify_argument_principle,
    verify_max_modulus,
)

EXIT_OK = 0
EXIT_VERIFICATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_USAGE = 64

_PIPELINES = ("zero_roots", "bethe_roots", "both")
_BACKENDS = ("exact", "dmrg", "auto")
_NODE_VARIANTS = ("inhomogeneous", "inhomogeneous-vertical")


class UsageError(Exception):
    """Bad command line or config file; maps to exit code 64."""


@dataclass
class RunConfig:
    """Flat run description, read from JSON with --set overrides.

    Tolerance fields bound what counts as PASS in the verification
    summary; node fields feed the sampling-grid builders; dmrg fields
    feed DmrgOptions unchanged.
    """

    N: int
    p: float
    q: float
    outdir: str
    xi: float = 0.0
    eta: float = 1.0
    pipeline: str = "zero_roots"
    backend: str = "auto"
    seed: int = 1
    # dmrg
    max_bond: int = 200
    truncation: float = 1e-12
    max_sweeps: int = 80
    energy_tol: float = 1e-14
    # sampling nodes
    node_k: float = 1.05
    node_t: float = None
    node_variant: str = "inhomogeneous"
    # solver and verification tolerances
    movement_tol: float = 1e-10
    root_tol: float = 1e-6
    epsilon_tol: float = 1e-4
    ratio_tol: float = 1e-3
    constraint_tol: float = 1e-7
    energy_match_tol: float = 1e-7
    classify_tol: float = None
    ladder: bool = False
    ladder_start: float = 1e-6
    valley_radius: float = 1e-6
    # sweep
    sweep_parameter: str = None
    sweep_values: tuple = ()
    workers: int = 1

    def __post_init__(self):
        if self.pipeline not in _PIPELINES:
            raise UsageError("pipeline must be one of %s" % (_PIPELINES,))
        if self.backend not in _BACKENDS:
            raise UsageError("backend must be one of %s" % (_BACKENDS,))
        if self.node_variant not in _NODE_VARIANTS:
            raise UsageError("node_variant must be one of %s" % (_NODE_VARIANTS,))
        if int(self.N) != self.N or self.N < 2 or self.N % 2:
            raise UsageError("N must be an even integer >= 2")
        self.N = int(self.N)
        for name in (
            "truncation",
            "energy_tol",
            "movement_tol",
            "root_tol",
            "epsilon_tol",
            "ratio_tol",
            "constraint_tol",
            "energy_match_tol",
            "ladder_start",
            "valley_radius",
        ):
            if not getattr(self, name) > 0:
                raise UsageError("%s must be positive" % name)
        if self.classify_tol is not None and not self.classify_tol > 0:
            raise UsageError("classify_tol must be positive")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        if self.sweep_parameter is not None and self.sweep_parameter not in ("p", "q", "xi"):
            raise UsageError("sweep_parameter must be p, q, or xi")
        self.sweep_values = tuple(float(v) for v in self.sweep_values)

    @property
    def params(self):
        return ModelParams(N=self.N, p=self.p, q=self.q, xi=self.xi, eta=self.eta)

    @property
    def resolved_backend(self):
        if self.backend != "auto":
            return self.backend
        return "exact" if self.N <= 12 else "dmrg"

    @property
    def dmrg_options(self):
        return DmrgOptions(
            max_bond=self.max_bond,
            truncation=self.truncation,
            max_sweeps=self.max_sweeps,
            energy_tol=self.energy_tol,
            seed=self.seed,
        )

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["sweep_values"] = list(self.sweep_values)
        return out


def _parse_override(text):
    if "=" not in text:
        raise UsageError("--set expects key=value, got %r" % text)
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings may come unquoted
    return key.strip(), value


def load_config(path, overrides=()):
    """RunConfig from a flat JSON file plus key=value overrides."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise UsageError("cannot read config %s: %s" % (path, e))
    except json.JSONDecodeError as e:
        raise UsageError("config %s is not valid JSON: %s" % (path, e))
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    for item in overrides:
        key, value = _parse_override(item)
        data[key] = value
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError("unknown config keys: %s" % ", ".join(unknown))
    try:
        return RunConfig(**data)
    except TypeError as e:
        raise UsageError(str(e))


# ----------------------------------------------------------- persistence


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError("cannot serialize %r" % type(obj))


def write_json_atomic(path, payload):
    """Serialize to a sibling temp file, then rename over the target."""
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    os.replace(tmp, path)


def write_roots_csv(path, rows):
    """Plot-ready scatter data: one root per row, columns re, im, tag."""
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "tag"])
        for row in rows:
            writer.writerow(["%.16e" % row["re"], "%.16e" % row["im"], row["tag"]])
    os.replace(tmp, path)


class Manifest:
    """Run record: config echo, timings, counts, verification, files."""

    def __init__(self, command, config):
        self.payload = {
            "tool": "rootlab",
            "version": __version__,
            "command": command,
            "config": config.to_dict(),
            "started": datetime.now(timezone.utc).isoformat(),
            "timings": {},
            "iterations": {},
            "verification": {},
            "files": [],
            "failures": [],
        }
        self._t0 = {}

    def start(self, stage):
        self._t0[stage] = time.perf_counter()

    def stop(self, stage):
        self.payload["timings"][stage] = time.perf_counter() - self._t0.pop(stage)

    def write(self, outdir):
        self.payload["finished"] = datetime.now(timezone.utc).isoformat()
        write_json_atomic(os.path.join(outdir, "manifest.json"), self.payload)


def _params_dict(params):
    return {
        "N": params.N,
        "p": params.p,
        "q": params.q,
        "xi": params.xi,
        "eta": params.eta,
    }


# ------------------------------------------------------------- pipeline


def _obtain_ground_state(config, manifest):
    """Load the checkpoint if present, otherwise compute and save it."""
    outdir = config.outdir
    params = config.params
    ckpt = os.path.join(outdir, "ground.npz")
    manifest.start("ground")
    if os.path.exists(ckpt):
        psi, meta = load_mps(ckpt)
        stored = meta.get("params", {})
        if stored != _params_dict(params):
            raise UsageError(
                "checkpoint %s was computed for different parameters %s" % (ckpt, stored)
            )
        manifest.stop("ground")
        manifest.payload["iterations"]["ground_reused"] = True
        return psi, meta["energy"], meta
    backend = config.resolved_backend
    extra = {}
    if backend == "dmrg":
        res = dmrg_ground_state(hamiltonian_mpo(params), config.dmrg_options)
        psi, energy = res.psi, res.energy
        extra = {
            "sweep_energies": [float(e) for e in res.sweep_energies],
            "converged": bool(res.converged),
            "max_truncation": float(res.max_truncation),
        }
        manifest.payload["iterations"]["dmrg_sweeps"] = len(res.sweep_energies)
    else:
        res = ground_state_mps(params, backend="exact")
        psi, energy = res.psi, res.energy
    meta = {
        "params": _params_dict(params),
        "energy": float(energy),
        "backend": backend,
        "seed": config.seed,
    }
    meta.update(extra)
    save_mps(psi, ckpt, metadata=meta)
    manifest.stop("ground")
    manifest.payload["files"].append("ground.npz")
    return psi, float(energy), meta


def cmd_ground(config):
    """Compute and checkpoint the ground state; write energy record."""
    os.makedirs(config.outdir, exist_ok=True)
    manifest = Manifest("ground", config)
    try:
        psi, energy, meta = _obtain_ground_state(config, manifest)
    except (NoConvergence, SingularSystem) as e:
        manifest.payload["failures"].append(str(e))
        manifest.write(config.outdir)
        print("ground state failed: %s" % e, file=sys.stderr)
        return EXIT_NONCONVERGENCE
    record = dict(meta)
    record["bond_dimensions"] = [int(b) for b in psi.bond_dims]
    write_json_atomic(os.path.join(config.outdir, "ground.json"), record)
    manifest.payload["files"].append("ground.json")
    manifest.payload["verification"] = {"energy": energy, "backend": meta["backend"]}
    manifest.write(config.outdir)
    print("ground energy %.12f (%s backend)" % (energy, meta["backend"]))
    return EXIT_OK


def _zero_nodes(config):
    if config.node_k == 1.05:
        return None
    return make_zero_nodes(config.N, config.eta, k=config.node_k)


def _bethe_nodes(config):
    defaults = (config.node_k == 1.05, config.node_t is None,
                config.node_variant == "inhomogeneous")
    if all(defaults):
        return None
    variant = "homogeneous" if config.xi == 0 else config.node_variant
    return make_bethe_nodes(
        config.N, config.eta, k=config.node_k, t=config.node_t, variant=variant
    )


def _run_zero_stage(config, manifest, psi, ground_energy):
    params = config.params
    manifest.start("zero_solve")
    root_set = solve_zero_roots(
        psi,
        params,
        nodes=_zero_nodes(config),
        movement_tol=config.movement_tol,
        root_tol=config.root_tol,
    )
    manifest.stop("zero_solve")
    manifest.payload["iterations"]["zero_rounds"] = root_set.rounds

    manifest.start("zero_verify")
    lam = root_set.lambda_polynomial()
    tags = tag_zero_roots(root_set, tol=config.classify_tol)
    region, candidates = None, None
    try:
        region = classify_zero_pattern(root_set, tol=config.classify_tol).region
    except AmbiguousPattern as e:
        candidates = list(e.candidates)

    rows = []
    for z, tag, res in zip(
        root_set.representatives, tags, root_set.info["root_residuals"]
    ):
        valley = verify_max_modulus(lam, z, config.valley_radius)
        try:
            winding = verify_argument_principle(lam, z, config.ladder_start)
        except RootlabError:
            winding = None
        accuracy = None
        if config.ladder:
            try:
                accuracy = accuracy_ladder(lam, z, delta_start=config.ladder_start)
            except RootlabError:
                accuracy = None
        ok = bool(valley.passed and winding == 1)
        rows.append(
            {
                "re": float(z.real),
                "im": float(z.imag),
                "tag": tag,
                "residual": float(res),
                "valley_pass": valley.passed,
                "winding": winding,
                "accuracy": accuracy,
                "pass": ok,
            }
        )

    constraints = check_constraints(root_set)
    energy = energy_from_zero_roots(params, root_set)
    energy_err = abs(energy - ground_energy)
    verification = {
        "roots_pass": all(r["pass"] for r in rows),
        "constraint_product": constraints.product_residual,
        "constraint_derivatives": list(constraints.derivative_residuals),
        "constraint_worst": constraints.worst,
        "constraint_pass": bool(constraints.worst <= config.constraint_tol),
        "energy_difference": energy_err,
        "energy_pass": bool(energy_err <= config.energy_match_tol),
    }
    manifest.stop("zero_verify")

    payload = {
        "mode": "zero_roots",
        "params": _params_dict(params),
        "region": region,
        "region_candidates": candidates,
        "rounds": root_set.rounds,
        "residual": root_set.residual,
        "energy": energy,
        "energy_ground": ground_energy,
        "roots": rows,
        "verification": verification,
    }
    write_json_atomic(os.path.join(config.outdir, "zeroroots.json"), payload)
    write_roots_csv(os.path.join(config.outdir, "zeroroots.csv"), rows)
    manifest.payload["files"] += ["zeroroots.json", "zeroroots.csv"]
    manifest.payload["verification"]["zero_roots"] = verification

    for i, r in enumerate(rows):
        print(
            "zero root %2d  %+.12f%+.12fj  %-18s %s"
            % (i, r["re"], r["im"], r["tag"], "PASS" if r["pass"] else "FAIL")
        )
    all_pass = (
        verification["roots_pass"]
        and verification["constraint_pass"]
        and verification["energy_pass"]
    )
    print(
        "zero roots: region=%s energy=%.12f constraints=%.3e [%s]"
        % (
            region or "/".join(candidates or ()) or "none",
            energy,
            constraints.worst,
            "PASS" if all_pass else "FAIL",
        )
    )
    return {"region": region, "pair_count": None, "energy": energy}, all_pass


def _run_bethe_stage(config, manifest, psi, ground_energy):
    params = config.params
    manifest.start("bethe_solve")
    root_set = solve_inhomogeneous_bethe(
        psi,
        params,
        nodes=_bethe_nodes(config),
        movement_tol=config.movement_tol,
        root_tol=config.root_tol,
    )
    manifest.stop("bethe_solve")
    manifest.payload["iterations"]["bethe_rounds"] = root_set.rounds

    manifest.start("bethe_verify")
    lam_ref = reconstruct_lambda(
        sample_lambda(psi, params, make_zero_nodes(params.N, params.eta))
    )
    epsilons = verify_tq_at_roots(lam_ref, root_set)
    try:
        # undefined when a root is pinned exactly on a ratio pole (it
        # happens for boundary-string roots); epsilons still apply then
        ratios = verify_bae_ratio(root_set)
        ratio_note = None
    except PoleInRatio as e:
        ratios = None
        ratio_note = str(e)
    census = classify_bethe_roots(params, root_set)
    energy = energy_from_bethe(params, root_set)
    energy_err = abs(energy - ground_energy)

    rows = []
    for j, (z, tag, eps) in enumerate(
        zip(root_set.representatives, census.tags, epsilons)
    ):
        ok = bool(eps <= config.epsilon_tol)
        g_re = g_im = None
        if ratios is not None:
            g = ratios[j]
            ok = ok and bool(abs(g - 1.0) <= config.ratio_tol)
            g_re, g_im = float(g.real), float(g.imag)
        rows.append(
            {
                "re": float(z.real),
                "im": float(z.imag),
                "tag": tag,
                "epsilon": float(eps),
                "g_re": g_re,
                "g_im": g_im,
                "pass": ok,
            }
        )
    verification = {
        "roots_pass": all(r["pass"] for r in rows),
        "max_epsilon": float(np.max(epsilons)),
        "max_ratio_error": None
        if ratios is None
        else float(np.max(np.abs(ratios - 1.0))),
        "ratio_note": ratio_note,
        "energy_difference": energy_err,
        "energy_pass": bool(energy_err <= config.energy_match_tol),
    }
    manifest.stop("bethe_verify")

    payload = {
        "mode": "bethe_roots",
        "params": _params_dict(params),
        "method": root_set.method,
        "rounds": root_set.rounds,
        "residual": root_set.residual,
        "energy": energy,
        "energy_ground": ground_energy,
        "pair_count": census.paired_line_pairs,
        "expected_pair_count": census.expected_paired_lines,
        "counts": census.counts,
        "roots": rows,
        "verification": verification,
    }
    write_json_atomic(os.path.join(config.outdir, "betheroots.json"), payload)
    write_roots_csv(os.path.join(config.outdir, "betheroots.csv"), rows)
    manifest.payload["files"] += ["betheroots.json", "betheroots.csv"]
    manifest.payload["verification"]["bethe_roots"] = verification

    for i, r in enumerate(rows):
        print(
            "bethe root %2d  %+.12f%+.12fj  %-22s %s"
            % (i, r["re"], r["im"], r["tag"], "PASS" if r["pass"] else "FAIL")
        )
    all_pass = verification["roots_pass"] and verification["energy_pass"]
    print(
        "bethe roots: method=%s pairs=%d energy=%.12f [%s]"
        % (root_set.method, census.paired_line_pairs, energy, "PASS" if all_pass else "FAIL")
    )
    return {
        "region": None,
        "pair_count": census.paired_line_pairs,
        "energy": energy,
    }, all_pass


def _run_pipeline(command, config):
    """Shared driver for the root pipelines; returns (exit, summary)."""
    os.makedirs(config.outdir, exist_ok=True)
    manifest = Manifest(command, config)
    summary = {"region": None, "pair_count": None, "energy": None}
    try:
        psi, ground_energy, _ = _obtain_ground_state(config, manifest)
        stages = []
        if command in ("zeroroots", "both"):
            stages.append(_run_zero_stage)
        if command in ("betheroots", "both"):
            stages.append(_run_bethe_stage)
        ok = True
        for stage in stages:
            part, stage_ok = stage(config, manifest, psi, ground_energy)
            ok = ok and stage_ok
            for key, val in part.items():
                if val is not None:
                    summary[key] = val
        code = EXIT_OK if ok else EXIT_VERIFICATION
    except (NoConvergence, SingularSystem) as e:
        manifest.payload["failures"].append(str(e))
        print("solver did not converge: %s" % e, file=sys.stderr)
        code = EXIT_NONCONVERGENCE
    manifest.write(config.outdir)
    return code, summary


def cmd_zeroroots(config):
    return _run_pipeline("zeroroots", config)[0]


def cmd_betheroots(config):
    return _run_pipeline("betheroots", config)[0]


# --------------------------------------------------------------- sweep


def _pool_width(config):
    cap = os.environ.get("ROOTLAB_THREADS")
    width = config.workers
    if cap is not None:
        width = min(width, max(1, int(cap)))
    return width


def _sweep_point(args):
    config_dict, parameter, value, point_dir = args
    data = dict(config_dict)
    data[parameter] = value
    data["outdir"] = point_dir
    data["sweep_parameter"] = None
    data["sweep_values"] = ()
    config = RunConfig(**data)
    command = {"zero_roots": "zeroroots", "bethe_roots": "betheroots", "both": "both"}[
        config.pipeline
    ]
    code, summary = _run_pipeline(command, config)
    return value, point_dir, code, summary


def cmd_sweep(config):
    """One pipeline run per grid value plus an aggregate CSV."""
    if config.sweep_parameter is None or not config.sweep_values:
        raise UsageError("sweep needs sweep_parameter and nonempty sweep_values")
    os.makedirs(config.outdir, exist_ok=True)
    manifest = Manifest("sweep", config)
    jobs = []
    for i, value in enumerate(config.sweep_values):
        point_dir = os.path.join(
            config.outdir, "point_%03d_%s_%g" % (i, config.sweep_parameter, value)
        )
        jobs.append((config.to_dict(), config.sweep_parameter, value, point_dir))

    manifest.start("sweep")
    width = _pool_width(config)
    results = []
    if width == 1:
        for job in jobs:
            results.append(_sweep_point(job))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=width) as pool:
            results = list(pool.map(_sweep_point, jobs))
    manifest.stop("sweep")

    agg_path = os.path.join(config.outdir, "sweep.csv")
    tmp = agg_path + ".tmp"
    worst = EXIT_OK
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "region", "pair_count", "energy"])
        for value, point_dir, code, summary in results:
            worst = max(worst, code)
            if code != EXIT_OK:
                manifest.payload["failures"].append(
                    {"value": value, "outdir": point_dir, "exit": code}
                )
            writer.writerow(
                [
                    "%g" % value,
                    summary["region"] or "",
                    "" if summary["pair_count"] is None else summary["pair_count"],
                    "" if summary["energy"] is None else "%.12f" % summary["energy"],
                ]
            )
    os.replace(tmp, agg_path)
    manifest.payload["files"].append("sweep.csv")
    manifest.payload["iterations"]["points"] = len(results)
    manifest.payload["verification"] = {
        "points": len(results),
        "failed": len(manifest.payload["failures"]),
    }
    manifest.write(config.outdir)
    print(
        "sweep over %s: %d points, %d failed"
        % (config.sweep_parameter, len(results), len(manifest.payload["failures"]))
    )
    return worst


# ----------------------------------------------------------------- main


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rootlab",
        description="Transfer-matrix root pipelines for the open spin-1/2 chain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("ground", cmd_ground),
        ("zeroroots", cmd_zeroroots),
        ("betheroots", cmd_betheroots),
        ("sweep", cmd_sweep),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat JSON config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry (repeatable; overrides the file)",
        )
        p.set_defaults(fn=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.set)
        return args.fn(config)
    except UsageError as e:
        print("usage error: %s" % e, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
