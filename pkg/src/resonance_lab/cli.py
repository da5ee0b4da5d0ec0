"""Command-line front end: ``resonance-lab <nfrc|prnm|seed|verify|modes>``.

Every workflow writes plain CSV files whose first line is a comment with
the run metadata (config hash, units) plus a JSON sidecar holding the full
configuration. Branch files carry the complete harmonic coefficient vector
of each point so that rows can be re-validated against the forced harmonic
balance residual after reloading.

Exit codes: 0 success, 1 bad input, 2 partial result (stalled
continuation or failed verification), 3 nothing found (no seed).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .continuation import (Branch, ContinuationError, ContinuationSettings,
                           EventSpec, ForcedResponseSystem, default_nfrc_events,
                           trace_nfrc)
from .hbm import (HarmonicGrid, HarmonicVector, harmonic_amplitude_phase,
                  hbm_residual_forced)
from .kernels import worker_count
from .model import InvalidModelError, SystemModel, linear_modes, load_model
from .oracle import (find_attractors, rectangular_ic_grid, subharmonic_fraction,
                     verify_point)
from .prnm import (DegenerateSeedError, ResonanceSpec, align_copy,
                   continue_prnm, forcing_frame, init_from_nfrc_point,
                   retrieve_phase_lag)

log = logging.getLogger("resonance_lab")

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL, EXIT_EMPTY = 0, 1, 2, 3
WORKFLOWS = ("nfrc", "prnm", "seed", "verify", "modes")
SEED_STEPS_PER_PERIOD = 200


class InputError(ValueError):
    """Invalid configuration or unreadable input file."""


@dataclass
class RunConfig:
    workflow: str
    model: str = "duffing"
    overrides: dict = field(default_factory=dict)
    k: int = 1
    nu: int = 1
    forcing: list = field(default_factory=list)
    omega: list = field(default_factory=list)
    n_harmonics: int | None = None
    settings: dict = field(default_factory=dict)
    seed: str | None = None
    branch: str | None = None
    out: str = "."
    degrees: bool = False
    basins: bool = False
    grid_points: int = 21
    ic_range: float = 3.0
    feq_max: float | None = None

    def validate(self):
        if self.workflow not in WORKFLOWS:
            raise InputError(f"unknown workflow {self.workflow!r}")
        if len(self.omega) == 2 and not self.omega[0] < self.omega[1]:
            raise InputError("frequency window must satisfy LO < HI")
        if any(w <= 0 for w in self.omega):
            raise InputError("frequencies must be positive")
        if any(f < 0 for f in self.forcing):
            raise InputError("forcing amplitudes must be non-negative")
        if self.workflow == "nfrc":
            if not self.forcing and self.seed is None:
                raise InputError("nfrc needs --f")
            if len(self.omega) != 2:
                raise InputError("nfrc needs --omega LO:HI")
        if self.workflow == "prnm" and len(self.omega) != 2:
            raise InputError("prnm needs --omega LO:HI")
        if self.workflow == "seed":
            if len(self.omega) != 1 or len(self.forcing) != 1:
                raise InputError("seed needs a single --f and a single --omega")
        if self.workflow == "verify" and self.branch is None:
            raise InputError("verify needs --branch PATH")

    def continuation_settings(self) -> ContinuationSettings:
        return ContinuationSettings().replace(**self.settings) if self.settings \
            else ContinuationSettings()

    def digest(self) -> str:
        data = asdict(self)
        data.pop("out")  # where results go does not change them
        text = json.dumps(data, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# file helpers

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_table(path: Path, meta: dict, columns: list, rows: list):
    """CSV with a ``# key=value ...`` comment line before the header."""
    path.parent.mkdir(parents=True, exist_ok=True)
    comment = "# " + " ".join(f"{k}={v}" for k, v in meta.items())
    with open(path, "w", newline="") as fh:
        fh.write(comment + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_table(path) -> tuple[dict, list, list]:
    """Inverse of :func:`write_table`: ``(meta, columns, rows)``."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise InputError(f"{path}: missing metadata comment line")
            meta = dict(tok.split("=", 1) for tok in first[1:].split() if "=" in tok)
            reader = csv.reader(fh)
            columns = next(reader, None)
            if columns is None:
                raise InputError(f"{path}: missing header")
            rows = [r for r in reader if r]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return meta, columns, rows


def write_sidecar(path: Path, cfg: RunConfig, extra: dict | None = None):
    data = {"version": __version__, "config_hash": cfg.digest(), "config": asdict(cfg)}
    if extra:
        data.update(extra)
    path.with_name(path.name + ".json").write_text(json.dumps(data, indent=2, sort_keys=True,
                                                    default=str) + "\n")


def _coefficient_columns(n_basis: int, n: int) -> list:
    return [f"X{b}_{d}" for b in range(n_basis) for d in range(n)]


def _coefficients_from_row(columns, row, n_basis, n) -> np.ndarray:
    idx = {c: i for i, c in enumerate(columns)}
    try:
        return np.array([float(row[idx[c]]) for c in _coefficient_columns(n_basis, n)])
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed coefficient columns: {exc}") from exc


def _angle(value: float, degrees: bool) -> float:
    return math.degrees(value) if degrees else value


def _meta(cfg: RunConfig, model: SystemModel, **extra) -> dict:
    meta = {"resonance-lab": __version__, "workflow": cfg.workflow,
            "config": cfg.digest(), "model": model.name, "n": model.n}
    meta.update(extra)
    meta["units"] = ("omega:rad/s,A:m,phi:deg" if cfg.degrees else "omega:rad/s,A:m,phi:rad") \
        + ",f:N,mu:kg/s,peak:m,s:arclength"
    return meta


# ---------------------------------------------------------------------------
# branch export

def branch_rows(branch: Branch, model: SystemModel, f: float, degrees: bool):
    nh = branch.points[0].X.grid.n_harmonics
    n = model.n
    columns = (["omega", "f", "arclength"] + [f"A{j}" for j in range(1, nh + 1)]
               + [f"phi{j}" for j in range(1, nh + 1)]
               + [f"peak{d}" for d in range(n)] + _coefficient_columns(2 * nh + 1, n))
    rows = []
    for p in branch.points:
        rows.append([p.omega, f, p.arclength, *p.amplitudes,
                     *(_angle(v, degrees) for v in p.phases), *p.peak,
                     *p.X.coefficients])
    return columns, rows


def event_rows(branch: Branch, f: float, k: int, degrees: bool):
    harmonics = sorted({1, k})
    rows = []
    for e in branch.events:
        p = e.point
        rows.append([e.kind, e.label or "-", f, p.omega, int(e.refined), e.monitor,
                     *(p.amplitudes[j - 1] for j in harmonics),
                     *(_angle(p.phases[j - 1], degrees) for j in harmonics),
                     float(np.max(p.peak))])
    columns = (["kind", "label", "f", "omega", "refined", "monitor"]
               + [f"A{j}" for j in harmonics] + [f"phi{j}" for j in harmonics] + ["peak"])
    return columns, rows


def prnm_rows(branch: Branch, model: SystemModel, spec: ResonanceSpec, degrees: bool):
    """PRNM table; coefficients are stored in the equivalent forcing frame."""
    nh = branch.points[0].X.grid.n_harmonics
    n = model.n
    turns = {e.segment for e in branch.events if e.kind == "forcing_turn"}
    columns = (["omega", "mu", "f_eq", "f", "arclength", "turn"]
               + [f"A{j}" for j in range(1, nh + 1)] + [f"phi{spec.k}"]
               + [f"peak{d}" for d in range(n)] + _coefficient_columns(2 * nh + 1, n))
    rows = []
    for i, p in enumerate(branch.points):
        Xf, F = forcing_frame(p.X, p.mu, spec)
        rows.append([p.omega, p.mu, p.f_eq, F, p.arclength, int(i in turns), *p.amplitudes,
                     _angle(p.phase_lag, degrees), *p.peak, *Xf.coefficients])
    return columns, rows


def load_branch_vectors(path, model: SystemModel):
    """``(meta, [(omega, f, HarmonicVector), ...])`` from a branch file."""
    meta, columns, rows = read_table(path)
    try:
        nu = int(meta["nu"])
        nh = int(meta["nh"])
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: metadata lacks nu/nh") from exc
    if int(meta.get("n", model.n)) != model.n:
        raise InputError(f"{path}: file has {meta['n']} DOFs, model has {model.n}")
    idx = {c: i for i, c in enumerate(columns)}
    if "omega" not in idx or "f" not in idx:
        raise InputError(f"{path}: missing omega/f columns")
    out = []
    for row in rows:
        omega, f = float(row[idx["omega"]]), float(row[idx["f"]])
        x = _coefficients_from_row(columns, row, 2 * nh + 1, model.n)
        out.append((omega, f, HarmonicVector(x, HarmonicGrid(nh, nu, omega), model.n)))
    return meta, out


def branch_file_residual(path, model: SystemModel) -> float:
    """Largest forced-HBM residual over all rows of a branch file."""
    _, points = load_branch_vectors(path, model)
    worst = 0.0
    for _, f, X in points:
        r = hbm_residual_forced(model, X, f).residual
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def load_seed(path, model: SystemModel, index: int | None = None):
    """Attractors of a seed file as ``(omega, f, HarmonicVector)`` tuples."""
    meta, out = load_branch_vectors(path, model)
    if not out:
        raise InputError(f"{path}: seed file holds no attractor")
    if index is not None:
        return meta, [out[index]]
    return meta, out


# ---------------------------------------------------------------------------
# workflows

def _nfrc_job(args):
    model, f, cfg = args
    nu = cfg.nu
    settings = cfg.continuation_settings()
    events = default_nfrc_events(cfg.k, nu) + ([EventSpec("amplitude_max", 1)]
                                              if cfg.k != 1 else [])
    kwargs = {}
    if cfg.seed is not None:
        _, seeds = load_seed(cfg.seed, model)
        omega0, f_seed, X0 = max(
            seeds, key=lambda s: harmonic_amplitude_phase(s[2], model.forcing_dof, cfg.k).amplitude)
        nu = X0.grid.nu
        kwargs = dict(start_guess=X0, omega_start=omega0, n_harmonics=X0.grid.n_harmonics)
        events = default_nfrc_events(cfg.k, nu)
    else:
        kwargs = dict(n_harmonics=cfg.n_harmonics)
    branch = trace_nfrc(model, tuple(cfg.omega), f=f, nu=nu, settings=settings,
                        events=events, **kwargs)
    return f, branch


def cmd_nfrc(cfg: RunConfig, model: SystemModel) -> int:
    out = Path(cfg.out)
    forcing = cfg.forcing
    if not forcing:
        meta, _ = load_seed(cfg.seed, model)
        forcing = [float(meta["f"])]
    jobs = [(model, f, cfg) for f in forcing]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_nfrc_job, jobs))
    else:
        results = [_nfrc_job(j) for j in jobs]
    status = EXIT_OK
    all_events, ev_columns = [], None
    for f, branch in results:
        grid = branch.points[0].X.grid
        columns, rows = branch_rows(branch, model, f, cfg.degrees)
        path = out / f"nfrc_f{f:g}.csv"
        write_table(path, _meta(cfg, model, nu=grid.nu, nh=grid.n_harmonics, f=f,
                                status=branch.status), columns, rows)
        ev_columns, ev = event_rows(branch, f, cfg.k, cfg.degrees)
        all_events.extend(ev)
        log.info("f=%g: %d points, status %s, %d events", f, len(branch), branch.status, len(ev))
        print(f"f={f:g}: {len(branch)} points ({branch.status}), {len(ev)} events -> {path}")
        if branch.status == "stall":
            status = EXIT_PARTIAL
    ev_path = out / "nfrc_events.csv"
    write_table(ev_path, _meta(cfg, model), ev_columns, all_events)
    write_sidecar(out / "nfrc", cfg)
    return status


def _prnm_seed(cfg: RunConfig, model: SystemModel, spec: ResonanceSpec):
    """``(init, f)``: a phase-target NFRC point converted into a PRNM seed."""
    settings = cfg.continuation_settings()
    target = EventSpec("phase_target", spec.k, spec.target_phase)
    if cfg.seed is not None:
        meta, seeds = load_seed(cfg.seed, model)
        omega0, f_seed, X0 = max(
            seeds, key=lambda s: harmonic_amplitude_phase(s[2], spec.forcing_dof, spec.k).amplitude)
        if X0.grid.nu != spec.nu:
            raise InputError(f"seed file has nu={X0.grid.nu}, resonance needs nu={spec.nu}")
        f = cfg.forcing[0] if cfg.forcing else f_seed
        X0 = align_copy(X0, spec, companions=model.is_odd)
        branches = []
        for direction in (1, -1):
            branches.append(trace_nfrc(model, tuple(cfg.omega), f=f, nu=spec.nu,
                                       n_harmonics=X0.grid.n_harmonics,
                                       settings=settings.replace(direction=direction),
                                       events=[target], start_guess=X0, omega_start=omega0))
            if branches[0].status == "closed":
                break  # an isola is covered by one pass
    else:
        if not cfg.forcing:
            raise InputError("prnm without --seed needs --f")
        if spec.nu != 1:
            return None, None
        f = cfg.forcing[0]
        branches = [trace_nfrc(model, tuple(cfg.omega), f=f, nu=1,
                               n_harmonics=cfg.n_harmonics, settings=settings, events=[target])]
    # a phase event on a vanishing harmonic is numerical noise
    floor = 1e-6 * max(float(np.max(p.peak)) for b in branches for p in b.points)
    events = [e for b in branches for e in b.events_of("phase_target")
              if e.point.amplitudes[spec.k - 1] > floor]
    if not events:
        return None, f
    best = max(events, key=lambda e: e.point.amplitudes[spec.k - 1])
    return init_from_nfrc_point(best.point, f, spec), f


def cmd_prnm(cfg: RunConfig, model: SystemModel) -> int:
    spec = ResonanceSpec(cfg.k, cfg.nu, model.forcing_dof)
    try:
        init, f = _prnm_seed(cfg, model, spec)
    except (DegenerateSeedError, ContinuationError) as exc:
        init, f = None, None
        log.warning("seeding failed: %s", exc)
    if init is None:
        print(f"no phase-resonance seed for {spec.label()} in the window; "
              f"run `resonance-lab seed` and pass the result with --seed", file=sys.stderr)
        return EXIT_EMPTY
    stop = None
    if cfg.feq_max is not None:
        stop = lambda p: p.f_eq > cfg.feq_max  # noqa: E731
    branch = continue_prnm(model, spec, init, cfg.continuation_settings(),
                           omega_bounds=tuple(cfg.omega), n_harmonics=cfg.n_harmonics,
                           both_directions=True, stop=stop)
    out = Path(cfg.out)
    tag = f"prnm_{spec.k}_{spec.nu}"
    grid = branch.points[0].X.grid
    columns, rows = prnm_rows(branch, model, spec, cfg.degrees)
    write_table(out / f"{tag}.csv", _meta(cfg, model, nu=grid.nu, nh=grid.n_harmonics,
                                           spec=spec.label(), seed_f=f, status=branch.status),
                columns, rows)
    ev = [[e.kind, e.point.omega, e.point.mu, e.point.f_eq, int(e.refined), e.monitor]
          for e in branch.events]
    write_table(out / f"{tag}_events.csv", _meta(cfg, model, spec=spec.label()),
                ["kind", "omega", "mu", "f_eq", "refined", "monitor"], ev)
    write_sidecar(out / tag, cfg)
    print(f"{spec.label()}: {len(branch)} points ({branch.status}), "
          f"{len(branch.events_of('forcing_turn'))} forcing turns -> {out / tag}.csv")
    return EXIT_PARTIAL if "stall" in branch.status else EXIT_OK


def select_seeds(model: SystemModel, attractors, k: int, rel_tol: float = 1e-3):
    """Attractors whose harmonic ``k`` at the forcing DOF is not negligible."""
    keep = []
    for a in attractors:
        X = a.X_est
        amps = [harmonic_amplitude_phase(X, model.forcing_dof, j).amplitude
                for j in range(1, X.grid.n_harmonics + 1)]
        if amps[k - 1] > rel_tol * max(amps):
            keep.append(a)
    return keep


def cmd_seed(cfg: RunConfig, model: SystemModel) -> int:
    f, omega, nu, k = cfg.forcing[0], cfg.omega[0], cfg.nu, cfg.k
    nh = 8 * nu if cfg.n_harmonics is None else cfg.n_harmonics
    r = cfg.ic_range
    ics = rectangular_ic_grid((-r, r), (-r, r), cfg.grid_points, model.n, model.forcing_dof)
    found, raw_labels, _ = find_attractors(model, f, omega, nu, ics, n_harmonics=nh,
                                           steps_per_period=SEED_STEPS_PER_PERIOD)
    seeds = select_seeds(model, found, k)
    for a in found:
        a.classification = (f"period-{nu}T" if nu > 1 and subharmonic_fraction(a.X_est) >= 1e-2
                            else "period-T")
    out = Path(cfg.out)
    tag = f"seed_f{f:g}_w{omega:g}_nu{nu}_k{k}"
    n = model.n
    columns = (["index", "classification", "omega", "f", "periods", "residual"]
               + [f"A{j}" for j in range(1, nh + 1)] + _coefficient_columns(2 * nh + 1, n))
    rows = []
    for i, a in enumerate(seeds):
        amps = [harmonic_amplitude_phase(a.X_est, model.forcing_dof, j).amplitude
                for j in range(1, nh + 1)]
        rows.append([i, a.classification, omega, f, int(a.periods), a.periodicity_residual,
                     *amps, *a.X_est.coefficients])
    write_table(out / f"{tag}.csv", _meta(cfg, model, nu=nu, nh=nh, f=f, k=k), columns, rows)
    if cfg.basins:
        # 0: steady without harmonic k, i + 1: seed i, -1: not steady
        ids = {id(a): i + 1 for i, a in enumerate(seeds)}
        remap = {j: ids.get(id(a), 0) for j, a in enumerate(found)}
        labels = [remap.get(lab, 0) if lab >= 0 else -1 for lab in raw_labels]
        x0, v0 = ics
        d = model.forcing_dof
        write_table(out / f"{tag}_basins.csv", _meta(cfg, model, nu=nu, f=f, k=k),
                    ["x0", "v0", "label"],
                    [[x0[i, d], v0[i, d], lab] for i, lab in enumerate(labels)])
    write_sidecar(out / tag, cfg, {"attractors_total": len(found)})
    print(f"{len(seeds)} of {len(found)} steady period-{nu}T state(s) carry harmonic {k} "
          f"at f={f:g}, omega={omega:g} -> {out / tag}.csv")
    if not seeds:
        print("warning: no seed found; try another omega, forcing or a wider grid",
              file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_verify(cfg: RunConfig, model: SystemModel) -> int:
    meta, points = load_branch_vectors(cfg.branch, model)
    rows, counts = [], {"verified": 0, "unstable": 0, "failed": 0}
    for i, (omega, f, X) in enumerate(points):
        rep = verify_point(model, X, f)
        counts[rep.status] += 1
        rows.append([i, omega, f, rep.status, rep.rms_error, rep.growth])
    out = Path(cfg.out)
    path = out / (Path(cfg.branch).stem + "_verify.csv")
    write_table(path, _meta(cfg, model, source=Path(cfg.branch).name),
                ["index", "omega", "f", "status", "rms_error", "growth"], rows)
    total = max(len(points), 1)
    checked = counts["verified"] + counts["failed"]
    rate = counts["verified"] / checked if checked else 1.0
    print(f"{len(points)} points: {counts['verified']} verified, {counts['unstable']} "
          f"unstable (unverifiable), {counts['failed']} failed; pass rate {100 * rate:.1f}% "
          f"of checkable points ({100 * counts['verified'] / total:.1f}% overall) -> {path}")
    return EXIT_PARTIAL if counts["failed"] else EXIT_OK


def cmd_modes(cfg: RunConfig, model: SystemModel) -> int:
    freqs, shapes = linear_modes(model)
    n = model.n
    print(f"{'mode':>4} {'omega [rad/s]':>16}  shape")
    for i, w in enumerate(freqs):
        print(f"{i + 1:>4} {w:>16.10f}  " + " ".join(f"{v: .6f}" for v in shapes[:, i]))
    write_table(Path(cfg.out) / "modes.csv", _meta(cfg, model),
                ["mode", "omega"] + [f"phi{d}" for d in range(n)],
                [[i + 1, w, *shapes[:, i]] for i, w in enumerate(freqs)])
    return EXIT_OK


COMMANDS = {"nfrc": cmd_nfrc, "prnm": cmd_prnm, "seed": cmd_seed,
            "verify": cmd_verify, "modes": cmd_modes}


# ---------------------------------------------------------------------------
# argument parsing

def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _window(text: str) -> list:
    parts = text.split(":")
    try:
        values = [float(v) for v in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad frequency {text!r}") from exc
    if len(values) not in (1, 2):
        raise argparse.ArgumentTypeError("expected OMEGA or LO:HI")
    return values


def _override(text: str):
    key, _, value = text.partition("=")
    if not value:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key, float(value)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resonance-lab",
                                description="Nonlinear frequency responses and phase "
                                            "resonance nonlinear modes")
    p.add_argument("workflow", choices=WORKFLOWS)
    p.add_argument("--model", default="duffing",
                   help="built-in name (duffing, two_dof) or JSON model file")
    p.add_argument("--set", dest="overrides", action="append", type=_override, default=[],
                   metavar="KEY=VALUE", help="built-in model parameter, e.g. k=4")
    p.add_argument("--k", type=int, default=1, help="resonant harmonic")
    p.add_argument("--nu", type=int, default=1, help="subharmonic order")
    p.add_argument("--f", type=_float_list, default=[], help="forcing amplitudes, comma list")
    p.add_argument("--omega", type=_window, default=[], help="LO:HI window or single value")
    p.add_argument("--nh", type=int, default=None, help="harmonics (default 8 nu)")
    p.add_argument("--seed", default=None, help="seed file written by `seed`")
    p.add_argument("--branch", default=None, help="branch file for `verify`")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--degrees", action="store_true", help="write angles in degrees")
    p.add_argument("--basins", action="store_true", help="also write basin labels")
    p.add_argument("--grid", type=int, default=21, help="seed grid points per axis")
    p.add_argument("--ic-range", type=float, default=3.0, help="seed grid half width")
    p.add_argument("--max-points", type=int, default=None)
    p.add_argument("--ds-max", type=float, default=None)
    p.add_argument("--feq-max", type=float, default=None,
                   help="stop PRNM tracing above this equivalent forcing")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    settings = {}
    if args.max_points is not None:
        settings["max_points"] = args.max_points
    if args.ds_max is not None:
        settings["ds_max"] = args.ds_max
        settings["ds_init"] = min(ContinuationSettings().ds_init, args.ds_max)
    return RunConfig(workflow=args.workflow, model=args.model, overrides=dict(args.overrides),
                     k=args.k, nu=args.nu, forcing=args.f, omega=args.omega,
                     n_harmonics=args.nh, settings=settings, seed=args.seed,
                     branch=args.branch, out=args.out, degrees=args.degrees,
                     basins=args.basins, grid_points=args.grid, ic_range=args.ic_range,
                     feq_max=args.feq_max)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        cfg.validate()
        model = load_model(cfg.model, **cfg.overrides)
        return COMMANDS[cfg.workflow](cfg, model)
    except (InputError, InvalidModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContinuationError as exc:
        print(f"error: continuation failed: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
