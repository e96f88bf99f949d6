"""Command-line front end: ``torcanard --config run.ini [--out DIR]``.

A run is described by an INI file::

    [run]
    command = hunt            ; simulate | sweep | hunt | singular | fastbif
    model = leidenator
    name = fig5               ; output file stem (default: the command)

    [params]
    eps = 0.001
    alpha = 0.2

    [integrator]              ; optional
    rel_tol = 1e-10

    [thresholds]              ; optional, classifier thresholds

    [hunt]                    ; settings of the chosen command
    k_lo = 0.799
    k_hi = 0.801
    predicate = tonic|bursting
    tol_k = 1e-9

Values are kept as written and echoed verbatim into every output header and
into ``<name>.ini`` next to the outputs, which re-runs to identical files.
Exit status: 0 success, 2 invalid configuration or run-stage error,
3 inconclusive classification.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import __version__, fastbif, hunt, singular
from .models import MODEL_NAMES, MODEL_PARAMETERS, make_model
from .ode import IntegrationError, IntegratorConfig

log = logging.getLogger("torcanard")

OUT_ENV = "TORCANARD_OUT"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INCONCLUSIVE = 3

COMMANDS = ("simulate", "sweep", "hunt", "singular", "fastbif")

COMMAND_KEYS = {
    "simulate": ("y0", "horizon", "transient", "stride"),
    "sweep": ("k_values", "k_start", "k_stop", "k_num", "y0", "horizon", "transient"),
    "hunt": ("k_lo", "k_hi", "predicate", "tol_k", "y0", "horizon", "transient"),
    "singular": ("family", "p0", "p1", "p3", "x1", "n", "mu_max"),
    "fastbif": ("mu_lo", "mu_hi", "step", "n"),
}
RUN_KEYS = ("command", "model", "name")
INTEGRATOR_KEYS = tuple(f.name for f in fields(IntegratorConfig))
THRESHOLD_KEYS = tuple(f.name for f in fields(hunt.Thresholds))
INT_KEYS = {"max_steps", "k_num", "n", "stride"}

TRAJECTORY_COLUMNS = {
    "polar": ("t", "r", "theta", "mu"),
    "wilson-cowan": ("t", "x", "y", "mu"),
    "vanderpol": ("t", "x", "mu"),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or stage."""


# ------------------------------------------------------------ config

class RunConfig:
    """A validated run configuration with the raw strings kept for provenance."""

    def __init__(self, parser: configparser.ConfigParser):
        self.raw = {s: dict(parser[s]) for s in parser.sections()}
        run = self.raw.get("run")
        if run is None:
            raise ConfigError("missing [run] section")
        _reject_unknown("run", run, RUN_KEYS)
        for key in ("command", "model"):
            if key not in run:
                raise ConfigError(f"[run] {key} is required")
        self.command = run["command"].strip()
        self.model_name = run["model"].strip()
        if self.command not in COMMANDS:
            raise ConfigError(f"[run] command: {self.command!r} is not one of {COMMANDS}")
        if self.model_name not in MODEL_NAMES:
            raise ConfigError(f"[run] model: {self.model_name!r} is not one of {MODEL_NAMES}")
        self.name = run.get("name", self.command).strip()
        allowed = {"run", "params", "integrator", "thresholds", self.command}
        for section in self.raw:
            if section not in allowed:
                raise ConfigError(f"section [{section}] is not valid for command {self.command!r}")

        params = self.raw.get("params", {})
        _reject_unknown("params", params, MODEL_PARAMETERS[self.model_name])
        self.params = {k: _number("params", k, v) for k, v in params.items()}
        try:
            self.model = make_model(self.model_name, **self.params)
        except ValueError as err:
            raise ConfigError(f"[params] {err}") from None

        integ = self.raw.get("integrator", {})
        _reject_unknown("integrator", integ, INTEGRATOR_KEYS)
        base = asdict(hunt.HUNT_CFG)
        base.update({k: _number("integrator", k, v) for k, v in integ.items()})
        try:
            self.integrator = IntegratorConfig(**base)
        except ValueError as err:
            raise ConfigError(f"[integrator] {err}") from None

        thr = self.raw.get("thresholds", {})
        _reject_unknown("thresholds", thr, THRESHOLD_KEYS)
        values = {}
        for k, v in thr.items():
            values[k] = tuple(_number_list("thresholds", k, v, 2)) if k == "mu_window" else _number("thresholds", k, v)
        self.thresholds = hunt.Thresholds.for_model(self.model)
        if values:
            self.thresholds = hunt.Thresholds(**{**asdict(self.thresholds), **values})

        section = self.raw.get(self.command, {})
        _reject_unknown(self.command, section, COMMAND_KEYS[self.command])
        self.section = section

    # typed accessors on the command section
    def get(self, key, default=None):
        if key not in self.section:
            return default
        return _number(self.command, key, self.section[key])

    def get_str(self, key, default=None):
        return self.section.get(key, default)

    def get_list(self, key, n=None):
        if key not in self.section:
            return None
        return _number_list(self.command, key, self.section[key], n)

    def provenance(self) -> dict:
        return {
            "artifact": "torcanard",
            "version": __version__,
            "command": self.command,
            "model": self.model_name,
            "config": self.raw,
            "integrator": asdict(self.integrator),
        }

    def header_lines(self) -> list:
        lines = [f"torcanard {__version__}", f"command {self.command}", f"model {self.model_name}"]
        for section, values in self.raw.items():
            if section != "run" and values:
                lines.append(f"[{section}] " + " ".join(f"{k}={v}" for k, v in values.items()))
        lines.append("integrator " + " ".join(f"{k}={v!r}" for k, v in asdict(self.integrator).items()))
        return lines

    def echo(self) -> str:
        p = configparser.ConfigParser(interpolation=None)
        p.optionxform = str
        for section, values in self.raw.items():
            p[section] = values
        buf = io.StringIO()
        p.write(buf)
        return buf.getvalue()


def _reject_unknown(section, values, allowed):
    for key in values:
        if key not in allowed:
            raise ConfigError(f"[{section}] {key}: unknown key (allowed: {', '.join(allowed)})")


def _number(section, key, text):
    try:
        return int(text) if key in INT_KEYS else float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: {text!r} is not a number") from None


def _number_list(section, key, text, n=None):
    items = [t for t in text.replace(",", " ").split()]
    try:
        out = [float(t) for t in items]
    except ValueError:
        raise ConfigError(f"[{section}] {key}: {text!r} is not a list of numbers") from None
    if n is not None and len(out) != n:
        raise ConfigError(f"[{section}] {key}: expected {n} values, got {len(out)}")
    return out


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as err:
        raise ConfigError(f"--config: cannot read {path}: {err.strerror}") from None
    except configparser.Error as err:
        raise ConfigError(f"--config: {err}") from None
    return RunConfig(parser)


# ------------------------------------------------------------ output

def atomic_write(path: Path, write):
    """Call ``write(tmp_path)`` and move the result onto ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(tmp)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_text(path: Path, text: str):
    def w(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)
    atomic_write(path, w)


def _write_csv(path: Path, header_lines, columns, rows):
    def w(tmp):
        with open(tmp, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(columns)
            writer.writerows(rows)
    atomic_write(path, w)


def _fmt(v):
    return repr(float(v))


# ------------------------------------------------------------ commands

def _windows(cfg: RunConfig):
    eps = cfg.model.params.eps
    th = cfg.thresholds
    horizon = cfg.get("horizon", th.horizon / eps)
    transient = cfg.get("transient", th.transient / eps)
    return horizon, transient


def _y0(cfg: RunConfig):
    y0 = cfg.get_list("y0", cfg.model.dim)
    return tuple(y0) if y0 is not None else hunt.default_y0(cfg.model)


def cmd_simulate(cfg: RunConfig, out: Path, workers: int, tol_k):
    horizon, transient = _windows(cfg)
    stride = cfg.get("stride", 1)
    if stride < 1:
        raise ConfigError("[simulate] stride: must be a positive integer")
    y0 = _y0(cfg)
    traj = hunt.simulate(cfg.model, y0, horizon, cfg.integrator)
    header = cfg.header_lines() + [f"y0 {' '.join(_fmt(v) for v in y0)}"]
    status = EXIT_OK
    if cfg.model_name != "vanderpol":
        c = hunt.classify_trajectory(cfg.model, traj, transient, cfg.thresholds)
        header.append(f"classification: {c.label}")
        if c.reason:
            header.append(f"classification reason: {c.reason}")
        if c.inconclusive:
            status = EXIT_INCONCLUSIVE
    key = "polar" if cfg.model.is_polar else cfg.model_name
    idx = np.arange(0, len(traj.times), stride)
    if idx[-1] != len(traj.times) - 1:
        idx = np.append(idx, len(traj.times) - 1)
    rows = ([_fmt(traj.times[i])] + [_fmt(v) for v in traj.states[i]] for i in idx)
    _write_csv(out / f"{cfg.name}.csv", header, TRAJECTORY_COLUMNS[key], rows)
    return status


def cmd_sweep(cfg: RunConfig, out: Path, workers: int, tol_k):
    ks = cfg.get_list("k_values")
    if ks is None:
        try:
            k0, k1, n = (cfg.section[key] for key in ("k_start", "k_stop", "k_num"))
        except KeyError as err:
            raise ConfigError(f"[sweep] {err.args[0]}: required unless k_values is given") from None
        ks = np.linspace(_number("sweep", "k_start", k0), _number("sweep", "k_stop", k1),
                         _number("sweep", "k_num", n)).tolist()
    horizon, transient = _windows(cfg)
    reports = hunt.sweep(cfg.model, ks, workers=workers, y0=_y0(cfg), horizon=horizon,
                         transient=transient, thresholds=cfg.thresholds, cfg=cfg.integrator)
    path = out / f"{cfg.name}.csv"
    atomic_write(path, lambda tmp: hunt.write_regime_csv(reports, tmp, cfg.header_lines()))
    return EXIT_INCONCLUSIVE if any(r.classification.inconclusive for r in reports) else EXIT_OK


def cmd_hunt(cfg: RunConfig, out: Path, workers: int, tol_k):
    for key in ("k_lo", "k_hi", "predicate"):
        if key not in cfg.section:
            raise ConfigError(f"[hunt] {key} is required")
    tol = tol_k if tol_k is not None else cfg.get("tol_k", 1e-9)
    horizon, transient = _windows(cfg)
    try:
        res = hunt.bisect_transition(cfg.model, None, cfg.get("k_lo"), cfg.get("k_hi"),
                                     cfg.get_str("predicate").strip(), tol, y0=_y0(cfg), horizon=horizon,
                                     transient=transient, thresholds=cfg.thresholds, cfg=cfg.integrator)
    except ValueError as err:
        raise ConfigError(f"hunt: {err}") from None
    prov = cfg.provenance()
    prov["tol_k"] = tol
    _write_text(out / f"{cfg.name}.json", res.to_json(prov))
    return EXIT_INCONCLUSIVE if res.inconclusive else EXIT_OK


def cmd_singular(cfg: RunConfig, out: Path, workers: int, tol_k):
    family = cfg.get_str("family")
    if family is None:
        raise ConfigError("[singular] family is required")
    kw = {k: cfg.get(k) for k in ("p0", "p1", "p3", "x1", "mu_max") if k in cfg.section}
    if "n" in cfg.section:
        kw["n"] = cfg.get("n")
    try:
        orbit = singular.build_singular_family(cfg.model, family.strip(), **kw)
    except ValueError as err:
        raise ConfigError(f"singular: {err}") from None
    prov = cfg.provenance()
    prov["validation"] = "valid"
    _write_text(out / f"{cfg.name}.json", singular.orbit_to_json(orbit, prov))
    return EXIT_OK


def cmd_fastbif(cfg: RunConfig, out: Path, workers: int, tol_k):
    lo, hi = cfg.get("mu_lo"), cfg.get("mu_hi")
    mu_range = None if lo is None or hi is None else (lo, hi)
    branches = [fastbif.critical_manifold(cfg.model, mu_range or (-2.0, 2.0), step=cfg.get("step", 0.01))]
    if cfg.model_name != "vanderpol":
        branches.append(fastbif.cycle_branch(cfg.model, mu_range, n=cfg.get("n", 1000)))
    rows = []
    for b in branches:
        for row in fastbif.branch_rows(b):
            rows.append([row[0]] + [repr(v) if isinstance(v, float) else v for v in row[1:]])
    _write_csv(out / f"{cfg.name}.csv", cfg.header_lines(), fastbif.BRANCH_COLUMNS, rows)
    special = [dict(type=sp.type, mu=sp.mu, state=np.asarray(sp.state).tolist())
               for b in branches for sp in b.special_points]
    doc = dict(provenance=cfg.provenance(), special_points=special)
    _write_text(out / f"{cfg.name}.special.json", json.dumps(doc, indent=1))
    return EXIT_OK


COMMAND_FUNCS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "hunt": cmd_hunt,
    "singular": cmd_singular,
    "fastbif": cmd_fastbif,
}


def run(config_path, out_dir=None, *, workers: int = 1, tol_k=None) -> int:
    """Execute one configuration; returns the exit status."""
    try:
        cfg = load_config(config_path)
        out = Path(out_dir or os.environ.get(OUT_ENV) or ".")
        status = COMMAND_FUNCS[cfg.command](cfg, out, workers, tol_k)
        _write_text(out / f"{cfg.name}.ini", cfg.echo())
    except ConfigError as err:
        log.error("%s", err)
        return EXIT_INVALID
    except IntegrationError as err:
        log.error("integration: %s", err)
        return EXIT_INCONCLUSIVE
    if status == EXIT_INCONCLUSIVE:
        log.warning("%s: inconclusive classification", cfg.command)
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="torcanard", description=__doc__.split("\n")[0])
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    ap.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--tol-k", type=float, default=None, help="bisection tolerance, overrides [hunt] tol_k")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.workers < 1:
        log.error("--workers: must be at least 1")
        return EXIT_INVALID
    if args.tol_k is not None and not args.tol_k >= hunt.K_TOL_FLOOR:
        log.error("--tol-k: must be at least %g", hunt.K_TOL_FLOOR)
        return EXIT_INVALID
    return run(args.config, args.out, workers=args.workers, tol_k=args.tol_k)


if __name__ == "__main__":
    sys.exit(main())
