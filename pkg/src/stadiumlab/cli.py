"""Command-line front end: flat key=value configs, sweep orchestration, and
deterministic CSV / JSON-lines artifacts.

Subcommands::

    stadiumlab spectrum  -c run.cfg [--key value ...]
    stadiumlab flow      -c run.cfg ...
    stadiumlab scan      -c run.cfg ...
    stadiumlab quasimode -c run.cfg ...
    stadiumlab report    -c run.cfg ...

Every config key can be overridden on the command line one-for-one.  Exit
codes: 0 success, 1 numerical-certification failure, 2 configuration error.
Identical configs produce byte-identical outputs: all files carry a
metadata block with the config hash, grid spacing and the normal-velocity
convention, and merge orders are fixed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from ._backend import active_backend
from .discretize import assemble_laplacian, build_grid
from .errors import ConfigError, StadiumlabError
from .geometry import (
    Arc,
    BoundaryCondition,
    DomainSpec,
    Segment,
    make_partially_rectangular,
    make_rectangle,
    make_stadium,
    robin,
)
from .quasimode import discrete_residual, make_envelope, make_quasimode
from .scan import scar_report
from .spectral import eigs_lowest, eigs_window
from .variation import finite_difference_check, track_branches

RHO_CONVENTION = "velocity-per-unit-t(wings at pi/2)"

_DEFAULTS = {
    "kind": "stadium",
    "t": "",
    "t_start": "",
    "t_stop": "",
    "t_step": "",
    "dx": "pi/64",
    "bc": "dirichlet",
    "chi": "cos2",
    "n_min": "",
    "n_max": "",
    "halfwidth": "auto",
    "count": "20",
    "window_center": "",
    "window_halfwidth": "",
    "branches": "30",
    "n_samples": "2048",
    "out_dir": "out",
    "workers": "1",
    "excess_factor": "2.0",
    "wing_right": "",
    "wing_left": "",
}


def parse_number(text: str) -> float:
    """Parse a float, allowing exact 'pi/NN' and 'NN*pi' spellings."""
    s = text.strip().lower().replace(" ", "")
    if s.startswith("pi/"):
        return math.pi / float(s[3:])
    if s.endswith("*pi"):
        return float(s[:-3]) * math.pi
    if s == "pi":
        return math.pi
    return float(s)


def read_config_file(path: str) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"{path}:{lineno}: expected 'key = value'"])
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def config_hash(cfg: dict) -> str:
    canon = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# domain spec <-> config serialization
# ---------------------------------------------------------------------------

def _pieces_to_text(pieces) -> str:
    parts = []
    for p in pieces:
        if isinstance(p, Segment):
            parts.append(f"seg:{p.x0!r},{p.y0!r},{p.x1!r},{p.y1!r}")
        else:
            parts.append(f"arc:{p.cx!r},{p.cy!r},{p.radius!r},{p.angle0!r},{p.angle1!r}")
    return ";".join(parts)


def _pieces_from_text(text: str):
    pieces = []
    for part in text.split(";"):
        kind, _, body = part.partition(":")
        vals = [float(v) for v in body.split(",")]
        if kind == "seg":
            pieces.append(Segment(*vals))
        elif kind == "arc":
            pieces.append(Arc(*vals))
        else:
            raise ConfigError([f"unknown wing piece kind {kind!r}"])
    return tuple(pieces)


def spec_to_config(spec: DomainSpec) -> dict:
    cfg = {"kind": spec.kind, "t": repr(spec.t), "bc": spec.bc.kind}
    if spec.bc.kind == "robin":
        cfg["bc"] = f"robin:{spec.bc.b!r}"
    if spec.kind == "generic":
        right, left = spec.wing_template
        cfg["wing_right"] = _pieces_to_text(right)
        cfg["wing_left"] = _pieces_to_text(left)
    return cfg


def spec_from_config(cfg: dict, t: float | None = None) -> DomainSpec:
    bc = _parse_bc(cfg.get("bc", "dirichlet"))
    tt = float(t) if t is not None else parse_number(cfg["t"])
    kind = cfg.get("kind", "stadium")
    if kind == "stadium":
        return make_stadium(tt, bc=bc)
    if kind == "rectangle":
        return make_rectangle(tt, bc=bc)
    if kind == "generic":
        right = _pieces_from_text(cfg["wing_right"])
        left = _pieces_from_text(cfg["wing_left"]) if cfg.get("wing_left") else None
        return make_partially_rectangular(tt, right, left, bc=bc)
    raise ConfigError([f"unknown domain kind {kind!r}"])


def _parse_bc(text: str) -> BoundaryCondition:
    s = text.strip().lower()
    if s == "dirichlet":
        return BoundaryCondition("dirichlet")
    if s == "neumann":
        return BoundaryCondition("neumann")
    if s.startswith("robin:"):
        return robin(float(s.split(":", 1)[1]))
    raise ConfigError([f"unknown boundary condition {text!r}"])


# ---------------------------------------------------------------------------
# validated run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    raw: dict
    kind: str
    t_values: list
    dx: float
    bc: BoundaryCondition
    chi: str
    n_values: list
    halfwidth: float | None
    count: int
    window: tuple | None
    branches: int
    n_samples: int
    out_dir: Path
    workers: int
    excess_factor: float
    hash: str = ""

    def spec_at(self, t: float) -> DomainSpec:
        return spec_from_config(self.raw, t)


def validate_config(cfg: dict, command: str) -> RunConfig:
    """Validate everything up front; report every violation at once."""
    problems = []
    merged = dict(_DEFAULTS)
    merged.update(cfg)

    def number(key, required=False, lo=None, hi=None):
        txt = merged.get(key, "")
        if txt == "":
            if required:
                problems.append(f"missing required key {key!r}")
            return None
        try:
            v = parse_number(txt)
        except ValueError:
            problems.append(f"key {key!r}: cannot parse number from {txt!r}")
            return None
        if lo is not None and v < lo:
            problems.append(f"key {key!r}: {v} below minimum {lo}")
        if hi is not None and v > hi:
            problems.append(f"key {key!r}: {v} above maximum {hi}")
        return v

    kind = merged["kind"]
    if kind not in ("stadium", "rectangle", "generic"):
        problems.append(f"kind must be stadium|rectangle|generic, got {kind!r}")
    if kind == "generic" and not merged["wing_right"]:
        problems.append("generic kind requires wing_right pieces")

    t_values: list = []
    if merged["t"] != "":
        tv = number("t", lo=1.0, hi=2.0)
        if tv is not None:
            t_values = [tv]
    elif merged["t_start"] != "" or merged["t_stop"] != "":
        t0 = number("t_start", required=True, lo=1.0, hi=2.0)
        t1 = number("t_stop", required=True, lo=1.0, hi=2.0)
        dt = number("t_step", required=True, lo=1e-6)
        if None not in (t0, t1, dt) and t1 >= t0:
            m = int(round((t1 - t0) / dt))
            t_values = [t0 + k * dt for k in range(m + 1)]
        elif None not in (t0, t1, dt):
            problems.append("t_stop must be >= t_start")
    else:
        problems.append("missing required key 't' (or t_start/t_stop/t_step)")

    dx = number("dx", required=True, lo=1e-4, hi=math.pi / 8)
    bc = None
    try:
        bc = _parse_bc(merged["bc"])
    except ConfigError as exc:
        problems.extend(exc.problems)

    chi = merged["chi"]
    if chi not in ("cos2", "smooth"):
        problems.append(f"chi must be cos2|smooth, got {chi!r}")

    n_values: list = []
    if command in ("scan", "quasimode"):
        n_lo = number("n_min", required=True, lo=2)
        n_hi = number("n_max", required=True, lo=2)
        if None not in (n_lo, n_hi):
            if n_hi < n_lo:
                problems.append("n_max must be >= n_min")
            else:
                n_values = list(range(int(n_lo), int(n_hi) + 1))

    halfwidth = None
    if merged["halfwidth"] not in ("auto", ""):
        halfwidth = number("halfwidth", lo=0.0)

    window = None
    if merged["window_center"] != "":
        wc = number("window_center", lo=0.0)
        wh = number("window_halfwidth", required=True, lo=0.0)
        if None not in (wc, wh):
            window = (wc, wh)

    count = number("count", lo=1)
    branches = number("branches", lo=1)
    n_samples = number("n_samples", lo=64)
    workers = number("workers", lo=1)
    excess = number("excess_factor", lo=0.0)

    if problems:
        raise ConfigError(problems)
    rc = RunConfig(raw=merged, kind=kind, t_values=t_values, dx=dx, bc=bc,
                   chi=chi, n_values=n_values, halfwidth=halfwidth,
                   count=int(count), window=window, branches=int(branches),
                   n_samples=int(n_samples), out_dir=Path(merged["out_dir"]),
                   workers=int(workers), excess_factor=float(excess))
    rc.hash = config_hash(merged)
    return rc


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _meta_lines(rc: RunConfig) -> list:
    return [
        f"# config_hash = {rc.hash}",
        f"# dx = {rc.dx!r}",
        f"# rho_convention = {RHO_CONVENTION}",
        f"# backend = {active_backend()}",
    ]


def write_csv(path: Path, rc: RunConfig, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _meta_lines(rc):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_jsonl(path: Path, rc: RunConfig, records: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        meta = {"config_hash": rc.hash, "dx": rc.dx,
                "rho_convention": RHO_CONVENTION, "backend": active_backend()}
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# per-t workers (top level so they pickle for the pool)
# ---------------------------------------------------------------------------

def _spectrum_rows(args):
    rc, t = args
    spec = rc.spec_at(t)
    op = assemble_laplacian(build_grid(spec, rc.dx))
    rows = []
    if rc.window is not None:
        win = eigs_window(op, rc.window[0], rc.window[1])
        for p in win.pairs:
            rows.append((t, p.j, p.E, p.residual, win.center, win.halfwidth))
    else:
        low = eigs_lowest(op, rc.count)
        half = low.certified_up_to / 2.0
        for p in low.pairs[:rc.count]:
            rows.append((t, p.j, p.E, p.residual, half, half))
    return rows


def _scan_records(args):
    rc, t = args
    spec = rc.spec_at(t)
    op = assemble_laplacian(build_grid(spec, rc.dx))
    env = make_envelope(rc.chi)
    recs = []
    for n in rc.n_values:
        rep = scar_report(op, n, env=env, halfwidth=rc.halfwidth,
                          excess_factor=rc.excess_factor)
        recs.append(rep.to_record())
    return recs


def _quasimode_rows(args):
    rc, t = args
    spec = rc.spec_at(t)
    op = assemble_laplacian(build_grid(spec, rc.dx))
    env = make_envelope(rc.chi)
    rows = []
    for n in rc.n_values:
        q = make_quasimode(op, env, n)
        kd = discrete_residual(op, q)
        rep = scar_report(op, n, env=env, halfwidth=rc.halfwidth)
        rows.append((t, n, env.k_bound, kd, rep.count, rep.mass,
                     rep.best_overlap, rep.pigeonhole_bound))
    return rows


def _pmap(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(fn, tasks)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_spectrum(rc: RunConfig) -> int:
    tasks = [(rc, t) for t in rc.t_values]
    per_t = _pmap(_spectrum_rows, tasks, rc.workers)
    rows = [row for chunk in per_t for row in chunk]
    write_csv(rc.out_dir / "spectrum.csv", rc,
              ["t", "j", "E", "residual", "window_center", "window_halfwidth"],
              rows)
    return 0


def cmd_flow(rc: RunConfig) -> int:
    spec = rc.spec_at(rc.t_values[0])
    branches = track_branches(spec, rc.t_values, rc.branches, rc.dx,
                              n_samples=rc.n_samples)
    rows = []
    for br in branches:
        fd = {}
        if len(br.t) >= 3:
            chk = finite_difference_check(br)
            fd = dict(zip(np.round(chk["t"], 12), chk["fd"]))
        for k, t in enumerate(br.t):
            rows.append((br.label, t, br.E[k], br.f[k], br.dot_boundary[k],
                         br.dot_interior[k], fd.get(round(t, 12)),
                         int(br.degenerate[k])))
    rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(rc.out_dir / "branches.csv", rc,
              ["branch_id", "t", "E", "f", "dotE_boundary", "dotE_interior",
               "fd_estimate", "degenerate_flag"],
              rows)
    return 0


def cmd_scan(rc: RunConfig) -> int:
    tasks = [(rc, t) for t in rc.t_values]
    per_t = _pmap(_scan_records, tasks, rc.workers)
    records = [rec for chunk in per_t for rec in chunk]
    write_jsonl(rc.out_dir / "scan.jsonl", rc, records)
    header = ["t", "n", "halfwidth", "count", "mass", "best_overlap",
              "pigeonhole_bound", "bb_mass_position", "bb_mass_momentum",
              "scar_candidate"]
    rows = [tuple(rec[k] if k != "scar_candidate" else int(rec[k])
                  for k in header) for rec in records]
    write_csv(rc.out_dir / "scan_summary.csv", rc, header, rows)
    return 0


def cmd_quasimode(rc: RunConfig) -> int:
    tasks = [(rc, t) for t in rc.t_values]
    per_t = _pmap(_quasimode_rows, tasks, rc.workers)
    rows = [row for chunk in per_t for row in chunk]
    write_csv(rc.out_dir / "quasimodes.csv", rc,
              ["t", "n", "K_continuum", "K_discrete", "window_count",
               "mass", "best_overlap", "pigeonhole_bound"],
              rows)
    return 0


def cmd_report(rc: RunConfig) -> int:
    path = rc.out_dir / "scan.jsonl"
    if not path.exists():
        print(f"no scan output at {path}; run 'stadiumlab scan' first",
              file=sys.stderr)
        return 2
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if "meta" not in rec:
                records.append(rec)
    records.sort(key=lambda r: (r["t"], r["n"]))
    candidates = [r for r in records if r["scar_candidate"]]
    header = ["t", "n", "count", "mass", "best_overlap", "pigeonhole_bound",
              "overlap_margin", "bb_excess"]
    rows = []
    for r in records:
        margin = (r["best_overlap"] / r["pigeonhole_bound"]
                  if r["pigeonhole_bound"] else float("nan"))
        excess = (r["bb_mass_position"] / r["bb_baseline"]
                  if r["bb_baseline"] else float("nan"))
        rows.append((r["t"], r["n"], r["count"], r["mass"], r["best_overlap"],
                     r["pigeonhole_bound"], margin, excess))
    write_csv(rc.out_dir / "report_summary.csv", rc, header, rows)
    print(f"{len(records)} reports, {len(candidates)} scar candidates")
    for r in candidates:
        print(f"  t={r['t']} n={r['n']}: count={r['count']} "
              f"mass={r['mass']:.3f} best_overlap={r['best_overlap']:.3f} "
              f">= bound {r['pigeonhole_bound']:.3f}, "
              f"bb mass {r['bb_mass_position']:.3f} "
              f"(baseline {r['bb_baseline']:.3f})")
    return 0


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "flow": cmd_flow,
    "scan": cmd_scan,
    "quasimode": cmd_quasimode,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stadiumlab",
                                 description=__doc__.split("\n", 1)[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="flat key=value config file")
        p.add_argument("--set", nargs="*", default=[], metavar="KEY=VALUE",
                       help="override config keys one-for-one")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = read_config_file(args.config) if args.config else {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError([f"override {item!r} is not KEY=VALUE"])
            key, val = item.split("=", 1)
            cfg[key.strip()] = val.strip()
        rc = validate_config(cfg, args.command)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    if args.command != "report":
        rc.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](rc)
    except StadiumlabError as exc:
        print(f"certification/numerics failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
