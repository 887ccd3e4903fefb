"""Run configuration, seeded ensembles and run directories.

A run is described by a JSON config with one command block::

    {
      "format_version": 1,
      "params": {"N": 3, "nu": 2, "r": 0.1},
      "master_seed": 42,
      "output_dir": "runs/demo",
      "workers": 1,
      "stats": {"sequence": "(1,2);(1,3);(2,3)", "samples": 1000}
    }

Every run writes ``report.json``, zero or more CSV tables and
``manifest.json``, which lists each file with its SHA-256 digest. Work items
get their own seed ``SeedSequence([master_seed, index])`` and results are
merged by item index, so outputs do not depend on the number of workers.
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import PhasePoint, SystemParams, Tolerances, sample_phase_point
from .dynamics import advance_flow, phantom_flow
from .errors import BilliardError, ConfigError, CorruptRun, InvalidParams, NotEnoughSamples
from .geometry import LineFamily, concentric_family, envelope_check, random_family, span_test
from .neutral import (
    advance_vectors,
    build_neutrality_system,
    cpf_eliminate,
    displacement_coefficients,
    fd_jacobian_kernel,
    is_sufficient,
    neutral_space,
)
from .probe import (
    CSV_HEADER,
    WORKED_EXAMPLE,
    curve_seeds,
    determinant_root,
    dimension_sample,
    k_points_on_curve,
    located_j_dimensions,
    merge_dimension_samples,
    merge_k_points,
    plant_j_curve,
    random_curve,
    realize_sequence,
    scan_J,
    scan_K,
)
from .symbolic import SymbolicSequence, component_profile

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_FAIL = 0, 1, 2, 3

# Allowed keys and defaults per command block.
COMMANDS: dict[str, dict] = {
    "simulate": {"point": None, "T": None, "n": None, "mode": "regular", "prescribed": None},
    "neutral": {"point": None, "n": 3, "fd_check": False},
    "stats": {"sequence": "(1,2);(1,3);(2,3)", "samples": 100, "j_curves": 0, "max_attempts": 10000},
    "probe-k": {"curves": 10, "half_width": 0.2, "samples": 129},
    "probe-j": {"curves": 5, "half_width": 1e-3, "samples": 21},
    "noncoincidence": {"curves": 100, "n": 6, "required": 50, "half_width": 0.2, "samples": 129},
    "geom-check": {"planar": 50, "spatial": 20, "samples": 64, "families": []},
    "cpf-example": {"realizations": 200},
}
TOP_LEVEL = {"format_version", "params", "master_seed", "output_dir", "workers"}
PARAM_KEYS = {"N", "nu", "r", "tolerances"}


# ------------------------------------------------------------------ config

def _line_of(text: str | None, path: tuple[str, ...]) -> int | None:
    """1-based line of the last key of ``path`` in JSON ``text`` (best effort)."""
    if not text:
        return None
    lines = text.splitlines()
    start = 0
    found = None
    for key in path:
        pattern = re.compile(r'"%s"\s*:' % re.escape(key))
        for k in range(start, len(lines)):
            if pattern.search(lines[k]):
                found = start = k
                break
        else:
            return found + 1 if found is not None else None
    return None if found is None else found + 1


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: SystemParams
    block: dict
    master_seed: int = 0
    output_dir: str = "run"
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return self.raw

    @classmethod
    def from_dict(cls, data: dict, text: str | None = None, source: str | None = None,
                  command: str | None = None) -> "RunConfig":
        def fail(msg, *path):
            raise ConfigError(msg, _line_of(text, path) if path else None, source)

        if not isinstance(data, dict):
            fail("config must be a JSON object")
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            fail(f"format_version must be {FORMAT_VERSION}, got {version!r}", "format_version")
        blocks = [k for k in data if k in COMMANDS]
        for key in data:
            if key not in TOP_LEVEL and key not in COMMANDS:
                fail(f"unknown key {key!r}", key)
        if len(blocks) != 1:
            fail(f"exactly one command block required, found {blocks or 'none'}")
        name = blocks[0]
        if command is not None and command != name:
            fail(f"command {command!r} does not match config block {name!r}", name)
        params = _parse_params(data.get("params"), fail)
        seed = data.get("master_seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            fail(f"master_seed must be an integer in [0, 2**64), got {seed!r}", "master_seed")
        workers = data.get("workers", 1)
        if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
            fail(f"workers must be a positive integer, got {workers!r}", "workers")
        out = data.get("output_dir", "run")
        if not isinstance(out, str) or not out:
            fail("output_dir must be a non-empty string", "output_dir")
        raw_block = data[name] if data[name] is not None else {}
        if not isinstance(raw_block, dict):
            fail(f"block {name!r} must be an object", name)
        block = dict(COMMANDS[name])
        for key, value in raw_block.items():
            if key not in block:
                fail(f"unknown key {key!r} in block {name!r}", name, key)
            block[key] = value
        _validate_block(name, block, params, lambda msg, key: fail(msg, name, key))
        return cls(name, params, block, seed, out, workers, data)

    @classmethod
    def load(cls, path, command: str | None = None) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", None, str(path)) from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, str(path)) from exc
        return cls.from_dict(data, text, str(path), command)

    def with_overrides(self, seed=None, workers=None, output_dir=None) -> "RunConfig":
        raw = dict(self.raw)
        changes = {}
        if seed is not None:
            raw["master_seed"] = changes["master_seed"] = int(seed)
        if workers is not None:
            if workers < 1:
                raise ConfigError(f"workers must be positive, got {workers}")
            raw["workers"] = changes["workers"] = int(workers)
        if output_dir is not None:
            raw["output_dir"] = changes["output_dir"] = str(output_dir)
        return dataclasses.replace(self, raw=raw, **changes)


def _parse_params(data, fail) -> SystemParams:
    if not isinstance(data, dict):
        fail("params block missing or not an object", "params")
    for key in data:
        if key not in PARAM_KEYS:
            fail(f"unknown parameter {key!r}", "params", key)
    for key in ("N", "nu", "r"):
        if key not in data:
            fail(f"params.{key} is required", "params")
    tol_data = data.get("tolerances") or {}
    names = {f.name for f in dataclasses.fields(Tolerances)}
    for key, value in tol_data.items():
        if key not in names:
            fail(f"unknown tolerance {key!r}", "params", "tolerances", key)
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
            fail(f"tolerance {key} must be positive, got {value!r}", "params", "tolerances", key)
    try:
        tol = Tolerances(**tol_data)
    except InvalidParams as exc:
        fail(str(exc), "params", "tolerances")
    for key, kind in (("N", int), ("nu", int)):
        if not isinstance(data[key], kind) or isinstance(data[key], bool):
            fail(f"params.{key} must be an integer, got {data[key]!r}", "params", key)
    if not isinstance(data["r"], (int, float)) or isinstance(data["r"], bool):
        fail(f"params.r must be a number, got {data['r']!r}", "params", "r")
    try:
        return SystemParams(data["N"], data["nu"], float(data["r"]), tol)
    except InvalidParams as exc:
        key = str(exc).split()[0]
        fail(str(exc), "params", key if key in PARAM_KEYS else "params")


def _validate_block(name, block, params, fail):
    def positive_int(key, allow_zero=False):
        v = block[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < (0 if allow_zero else 1):
            fail(f"{key} must be a {'non-negative' if allow_zero else 'positive'} integer, got {v!r}", key)

    def positive(key):
        v = block[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            fail(f"{key} must be positive, got {v!r}", key)

    if name == "simulate":
        if (block["T"] is None) == (block["n"] is None) and block["mode"] == "regular":
            fail("give exactly one of T or n", "T")
        if block["T"] is not None:
            positive("T")
        if block["n"] is not None:
            positive_int("n", allow_zero=True)
        if block["mode"] not in ("regular", "phantom"):
            fail(f"mode must be 'regular' or 'phantom', got {block['mode']!r}", "mode")
        if block["mode"] == "phantom":
            _sequence(block.get("prescribed") or "", params, fail, "prescribed")
    elif name == "neutral":
        positive_int("n", allow_zero=True)
    elif name == "stats":
        _sequence(block["sequence"], params, fail, "sequence")
        positive_int("samples", allow_zero=True)
        positive_int("j_curves", allow_zero=True)
        positive_int("max_attempts")
    elif name in ("probe-k", "probe-j"):
        positive_int("curves", allow_zero=True)
        positive("half_width")
        positive_int("samples")
    elif name == "noncoincidence":
        for key in ("curves", "required"):
            positive_int(key, allow_zero=True)
        positive_int("n")
        positive("half_width")
        positive_int("samples")
    elif name == "geom-check":
        positive_int("planar", allow_zero=True)
        positive_int("spatial", allow_zero=True)
        positive_int("samples")
        if not isinstance(block["families"], list):
            fail("families must be a list", "families")
    elif name == "cpf-example":
        positive_int("realizations")
        if (params.N, params.nu) != (3, 2):
            fail("cpf-example needs N=3, nu=2", "cpf-example")
    if name in ("simulate", "neutral") and block["point"] is not None:
        try:
            x = PhasePoint.from_dict(block["point"])
        except (KeyError, TypeError, ValueError) as exc:
            fail(f"invalid point: {exc}", "point")
        problems = x.invariant_violations(params)
        if problems:
            fail("point violates invariants: " + "; ".join(problems), "point")


def _sequence(literal, params, fail, key) -> SymbolicSequence:
    try:
        seq = SymbolicSequence.parse(literal)
        seq.validate(params.N)
    except (BilliardError, AttributeError) as exc:
        fail(f"invalid sequence {literal!r}: {exc}", key)
    return seq


# ----------------------------------------------------------------- outputs

def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunResult:
    command: str
    report: dict
    tables: dict[str, tuple[list, list]]  # name -> (header, rows)
    passed: bool = True


@dataclass(frozen=True)
class RunManifest:
    config: dict
    artifact_version: str
    started: str
    finished: str
    files: dict[str, str]
    exit_code: int
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def load(cls, run_dir) -> "RunManifest":
        path = Path(run_dir) / "manifest.json"
        if not path.exists():
            raise CorruptRun(f"no manifest in {run_dir}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise CorruptRun(f"unreadable manifest: {exc}") from exc
        if data.get("format_version") != FORMAT_VERSION:
            raise CorruptRun(f"unsupported manifest format_version {data.get('format_version')!r}")
        return cls(**data)

    def verify(self, run_dir) -> None:
        for name, digest in self.files.items():
            path = Path(run_dir) / name
            if not path.exists():
                raise CorruptRun(f"missing file {name}")
            if sha256_file(path) != digest:
                raise CorruptRun(f"digest mismatch for {name}")


def write_run(out_dir, config: RunConfig, result: RunResult, started: str, exit_code: int) -> RunManifest:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    report = {"format_version": FORMAT_VERSION, "command": result.command, "passed": result.passed,
              **result.report}
    (out / "report.json").write_text(_dumps(report))
    files["report.json"] = sha256_file(out / "report.json")
    for name, (header, rows) in sorted(result.tables.items()):
        path = out / f"{name}.csv"
        path.write_text(_csv_text(header, rows))
        files[path.name] = sha256_file(path)
    finished = _now()
    manifest = RunManifest(config.to_dict(), __version__, started, finished, files, exit_code)
    (out / "manifest.json").write_text(_dumps(manifest.to_dict()))
    return manifest


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


# ------------------------------------------------------------- ensembles

def item_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Seed of work item ``index``: numpy's SeedSequence hash of (master_seed, index)."""
    return np.random.SeedSequence([int(master_seed), int(index)])


def _call(task):
    fn, args = task
    return fn(*args)


def sweep(fn, args_list, workers: int = 1) -> list:
    """Evaluate ``fn(*args)`` for every item; results come back in item order.

    With several workers the items run in separate processes. The first
    failing item (in item order) aborts the sweep with its exception.
    """
    tasks = [(fn, tuple(a)) for a in args_list]
    if workers <= 1 or len(tasks) <= 1:
        return [_call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# ---------------------------------------------------------------- commands

def _point(config: RunConfig) -> PhasePoint:
    if config.block.get("point") is not None:
        return PhasePoint.from_dict(config.block["point"])
    return sample_phase_point(config.params, item_seed(config.master_seed, 0))


def _event_rows(segment):
    rows = []
    for k, e in enumerate(segment.events):
        rows.append([k, repr(e.time), e.pair[0] + 1, e.pair[1] + 1,
                     *(repr(float(c)) for c in e.normal), repr(e.normal_speed), e.classification])
    return rows


def _event_header(nu):
    return ["index", "time", "pair_i", "pair_j", *(f"normal_{a}" for a in range(nu)),
            "normal_speed", "classification"]


def cmd_simulate(config: RunConfig) -> RunResult:
    p, b = config.params, config.block
    x = _point(config)
    if b["mode"] == "phantom":
        seq = SymbolicSequence.parse(b["prescribed"] or "")
        seg = phantom_flow(p, x, seq.entries)
    else:
        seg = advance_flow(p, x, T=b["T"], n=b["n"])
    report = {
        "segment": seg.to_dict(),
        "sequence": SymbolicSequence(seg.pairs).to_literal(),
        "momentum_drift": float(np.linalg.norm(seg.final.momentum())),
        "energy_drift": abs(seg.final.energy() - 1.0),
    }
    return RunResult("simulate", report, {"events": (_event_header(p.nu), _event_rows(seg))})


def cmd_neutral(config: RunConfig) -> RunResult:
    p, b = config.params, config.block
    x = _point(config)
    seg = advance_flow(p, x, n=b["n"])
    res = neutral_space(seg, p.tol)
    report = {"sequence": SymbolicSequence(seg.pairs).to_literal(), "neutral": res.to_dict(),
              "d": p.d, "initial": x.to_dict()}
    if seg.events and component_profile(p.N, seg.pairs)[-1] == 1:
        report["sufficient"] = is_sufficient(seg, p.tol)
        _, cert = advance_vectors(res, p.tol)
        report["embedding_rank"] = cert.rank
    if b["fd_check"]:
        fd = fd_jacobian_kernel(p, x, b["n"], p.tol)
        report["fd_dimension"] = fd.dimension
    rows = [[m + 1, neutral_space(build_neutrality_system(seg).prefix(m + 1), p.tol).dimension]
            for m in range(len(seg.events))]
    return RunResult("neutral", report, {"prefix_dimensions": (["prefix", "dimension"], rows)})


def cmd_stats(config: RunConfig) -> RunResult:
    p, b = config.params, config.block
    seq = SymbolicSequence.parse(b["sequence"])
    if b["samples"] == 0:
        raise NotEnoughSamples("zero samples requested")
    items = [(p, seq, item_seed(config.master_seed, k), b["max_attempts"]) for k in range(b["samples"])]
    rows = sweep(dimension_sample, items, config.workers)
    j_items = [(p, seq, item_seed(config.master_seed, b["samples"] + k)) for k in range(b["j_curves"])]
    j_dims = [d for dims in sweep(located_j_dimensions, j_items, config.workers) for d in dims]
    stats = merge_dimension_samples(p, seq, rows, j_dims)
    table = [[m, dim, count] for m, h in enumerate(stats.histograms) for dim, count in sorted(h.items())]
    return RunResult("stats", {"statistics": stats.to_dict()},
                     {"histogram": (["prefix", "dimension", "count"], table)})


def _probe_k_item(params, index, seed, half_width, samples):
    try:
        curve = random_curve(params, seed, half_width, samples)
    except ValueError:
        return index, []
    return index, scan_K(params, curve)


def cmd_probe_k(config: RunConfig) -> RunResult:
    p, b = config.params, config.block
    items = [(p, k, s, b["half_width"], b["samples"]) for k, s in
             enumerate(curve_seeds(config.master_seed, b["curves"]))]
    results = sweep(_probe_k_item, items, config.workers)
    crossings = [dict(r.to_dict(), curve=k) for k, reps in results for r in reps]
    rows = [r.csv_row() for _, reps in results for r in reps]
    accepted = sum(c["accepted"] for c in crossings)
    return RunResult("probe-k", {"curves": b["curves"], "accepted": accepted, "crossings": crossings},
                     {"crossings": (CSV_HEADER, rows)})


def _probe_j_item(params, index, seed, half_width, samples):
    curve = plant_j_curve(params, seed, half_width, samples)
    reports = scan_J(params, curve, len(WORKED_EXAMPLE))
    return index, reports, determinant_root(params, curve)


def cmd_probe_j(config: RunConfig) -> RunResult:
    p, b = config.params, config.block
    if (p.N, p.nu) != (3, 2):
        raise InvalidParams("probe-j plants curves on the N=3, nu=2 parallelity locus")
    items = [(p, k, s, b["half_width"], b["samples"]) for k, s in
             enumerate(curve_seeds(config.master_seed, b["curves"]))]
    results = sweep(_probe_j_item, items, config.workers)
    crossings, rows, gaps = [], [], []
    for k, reps, root in results:
        for r in reps:
            crossings.append(dict(r.to_dict(), curve=k, determinant_root=root))
            rows.append(r.csv_row())
            if r.accepted:
                gaps.append(abs(r.u_star - root))
    report = {"curves": b["curves"], "crossings": crossings,
              "max_detector_gap": max(gaps) if gaps else None}
    return RunResult("probe-j", report, {"crossings": (CSV_HEADER, rows)})


def cmd_noncoincidence(config: RunConfig) -> RunResult:
    p, b = config.params, config.block
    items = [(p, k, s, b["n"], b["half_width"], b["samples"]) for k, s in
             enumerate(curve_seeds(config.master_seed, b["curves"]))]
    results = sweep(k_points_on_curve, items, config.workers)
    report = merge_k_points(b["curves"], results, b["required"])
    rows = [r.csv_row() for _, reps in results for r in reps]
    return RunResult("noncoincidence", {"experiment": report.to_dict()},
                     {"crossings": (CSV_HEADER, rows)}, passed=report.passed)


def _geom_item(kind, spatial, seed, samples):
    fam = random_family(np.random.default_rng(seed), kind, spatial)
    dim, smin = span_test(fam, samples)
    env = envelope_check(fam, samples)
    return fam.to_dict(), dim, smin, env.case, env.max_residual


def cmd_geom_check(config: RunConfig) -> RunResult:
    b = config.block
    items = []
    for k in range(b["planar"]):
        items.append(("point" if k % 2 == 0 else "ellipse", False, item_seed(config.master_seed, k),
                      b["samples"]))
    for k in range(b["spatial"]):
        items.append(("point" if k % 2 == 0 else "ellipse", True,
                      item_seed(config.master_seed, b["planar"] + k), b["samples"]))
    results = sweep(_geom_item, items, config.workers)
    for data in b["families"]:
        fam = LineFamily.from_dict(data)
        dim, smin = span_test(fam, b["samples"])
        env = envelope_check(fam, b["samples"])
        results.append((fam.to_dict(), dim, smin, env.case, env.max_residual))
    rows, ok = [], True
    for idx, (fam, dim, smin, case, res) in enumerate(results):
        expected = 4 if fam["carrier"] is None else 5
        ok &= dim == expected
        rows.append([idx, "planar" if fam["carrier"] is None else "spatial", fam["conic"]["kind"],
                     dim, expected, repr(smin), case, repr(res)])
    conc_dim, _ = span_test(concentric_family(), b["samples"])
    report = {"families": len(results), "all_full_span": bool(ok), "concentric_dimension": conc_dim}
    header = ["index", "variant", "conic", "dimension", "expected", "sigma_min", "envelope_case",
              "envelope_residual"]
    return RunResult("geom-check", report, {"spans": (header, rows)}, passed=bool(ok))


def cpf_item(params, seed):
    """Coefficients of the worked example on one realization."""
    _, seg, _ = realize_sequence(params, WORKED_EXAMPLE, np.random.default_rng(seed))
    system = build_neutrality_system(seg)
    rel = cpf_eliminate(system, 2)
    kern = neutral_space(system, params.tol)
    residual = max(rel.residual(b[system.n_q:]) for b in kern.basis)
    disp = displacement_coefficients(system, 2, 1)
    dims = [params.d] + [neutral_space(system.prefix(m), params.tol).dimension for m in (1, 2, 3)]
    return {
        "gamma": rel.coefficients.tolist(),
        "displacement": disp.tolist(),
        "relation_residual": residual,
        "elimination_residual": rel.elimination_residual,
        "dimensions": dims,
    }


CPF_EXPECTED_GAMMA = np.array([[0.0, -1.0], [0.5, 0.5]])
CPF_EXPECTED_DISPLACEMENT = np.array([
    [[0.0, 1 / 3], [1 / 3, 0.0]],
    [[0.0, -2 / 3], [1 / 3, 0.0]],
    [[0.0, 1 / 3], [-2 / 3, 0.0]],
])


def cmd_cpf_example(config: RunConfig) -> RunResult:
    p, b = config.params, config.block
    items = [(p, item_seed(config.master_seed, k)) for k in range(b["realizations"])]
    results = sweep(cpf_item, items, config.workers)
    g_err = max(np.abs(np.array(r["gamma"]) - CPF_EXPECTED_GAMMA).max() for r in results)
    d_err = max(np.abs(np.array(r["displacement"]) - CPF_EXPECTED_DISPLACEMENT).max() for r in results)
    rel_res = max(r["relation_residual"] for r in results)
    profiles = sorted({tuple(r["dimensions"]) for r in results})
    mean_gamma = np.mean([r["gamma"] for r in results], axis=0)
    report = {
        "realizations": len(results),
        "coefficients": {
            "first_collision_post": float(mean_gamma[0, 1]),
            "second_collision_pre": float(mean_gamma[1, 0]),
            "second_collision_post": float(mean_gamma[1, 1]),
        },
        "max_coefficient_error": g_err,
        "max_displacement_coefficient_error": d_err,
        "max_relation_residual": rel_res,
        "dimension_profiles": [list(x) for x in profiles],
    }
    rows = [[k, *np.ravel(r["gamma"]).tolist(), r["relation_residual"]] for k, r in enumerate(results)]
    header = ["realization", "g0_pre", "g0_post", "g1_pre", "g1_post", "relation_residual"]
    passed = g_err < 1e-10 and d_err < 1e-10 and rel_res < 1e-10
    return RunResult("cpf-example", report, {"coefficients": (header, rows)}, passed=passed)


HANDLERS = {
    "simulate": cmd_simulate,
    "neutral": cmd_neutral,
    "stats": cmd_stats,
    "probe-k": cmd_probe_k,
    "probe-j": cmd_probe_j,
    "noncoincidence": cmd_noncoincidence,
    "geom-check": cmd_geom_check,
    "cpf-example": cmd_cpf_example,
}


def run(config: RunConfig) -> int:
    """Execute ``config`` and write its run directory; returns the exit code."""
    started = _now()
    try:
        result = HANDLERS[config.command](config)
    except BilliardError as exc:
        log.error("%s failed: %s: %s", config.command, type(exc).__name__, exc)
        return EXIT_RUNTIME
    code = EXIT_OK if result.passed else EXIT_FAIL
    write_run(config.output_dir, config, result, started, code)
    if code == EXIT_FAIL:
        log.error("%s: experiment FAILED", config.command)
    return code


def export(run_dir, fmt: str) -> list[Path]:
    """Re-emit a run's tables as ``csv`` or ``json`` under ``<run_dir>/export``."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    run_dir = Path(run_dir)
    manifest = RunManifest.load(run_dir)
    manifest.verify(run_dir)
    dest = run_dir / "export"
    dest.mkdir(exist_ok=True)
    written = []
    for name in sorted(manifest.files):
        src = run_dir / name
        if name.endswith(".csv"):
            with src.open(newline="") as fh:
                rows = list(csv.reader(fh))
            if fmt == "csv":
                target = dest / name
                target.write_text(_csv_text(rows[0], rows[1:]))
            else:
                target = dest / (name[:-4] + ".json")
                records = [dict(zip(rows[0], r)) for r in rows[1:]]
                target.write_text(_dumps({"format_version": FORMAT_VERSION, "columns": rows[0],
                                          "rows": records}))
        elif fmt == "json":
            target = dest / name
            target.write_bytes(src.read_bytes())
        else:
            continue
        written.append(target)
    return written


__all__ = [
    "FORMAT_VERSION",
    "COMMANDS",
    "RunConfig",
    "RunManifest",
    "RunResult",
    "run",
    "sweep",
    "export",
    "item_seed",
    "write_run",
]
