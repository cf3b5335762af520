"""Command-line entry point: ``twofluid <command> [options]``.

Configuration precedence is flags > config file > defaults.  Config files are
JSON (nested sections or dotted keys) or INI, with sections ``domain``,
``integrator``, ``ic``, ``protocol`` and ``output``, e.g.::

    [domain]
    L1 = 2
    nu = 9e-4
    [integrator]
    dt = 0.02

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import __version__
from . import continuation as cont
from . import diagnostics_energy as de
from . import hopf_normal_form as hnf
from . import linear_stability as ls
from .spectral_core import PAPER_PARAMS, DomainConfig, SpectralState
from .time_integrator import BlowUpError, InitialCondition, IntegratorConfig, default_dt, simulate

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "domain.L1": PAPER_PARAMS["L1"],
    "domain.L2": PAPER_PARAMS["L2"],
    "domain.nu": PAPER_PARAMS["nu"],
    "domain.Tminus": PAPER_PARAMS["T_minus"],
    "domain.dT": 0.1,
    "integrator.t_end": 100.0,
    "integrator.scheme": "cnab2",
    "integrator.N": 32,
    "integrator.record_every": 10,
    "integrator.frame": "lab",
    "ic.kind": "eigenmode",
    "ic.amplitude": 1e-3,
    "ic.seed": 0,
    "protocol.transient": 400.0,
    "protocol.window": 200.0,
    "output.dir": "out",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config_file(path) -> dict:
    """Flatten a JSON or INI config into ``section.key`` entries."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    text = path.read_text()
    flat = {}
    if path.suffix.lower() == ".json":
        def walk(prefix, obj):
            for k, v in obj.items():
                key = f"{prefix}.{k}" if prefix else k
                if isinstance(v, dict):
                    walk(key, v)
                else:
                    flat[key] = v
        walk("", json.loads(text))
    else:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read_string(text)
        for sec in cp.sections():
            for k, v in cp.items(sec):
                flat[f"{sec}.{k}"] = _coerce(v)
    unknown = [k for k in flat if k.split(".")[0] not in ("domain", "integrator", "ic", "protocol", "output")]
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return flat


def _coerce(v: str):
    for typ in (int, float):
        try:
            return typ(v)
        except ValueError:
            pass
    return v


FLAG_KEYS = {
    "L1": "domain.L1", "L2": "domain.L2", "nu": "domain.nu", "Tplus": "domain.Tplus",
    "Tminus": "domain.Tminus", "dT": "domain.dT",
    "dt": "integrator.dt", "t_end": "integrator.t_end", "scheme": "integrator.scheme",
    "N": "integrator.N", "record_every": "integrator.record_every", "frame": "integrator.frame",
    "ic": "ic.kind", "amplitude": "ic.amplitude", "seed": "ic.seed",
    "transient": "protocol.transient", "window": "protocol.window",
    "out": "output.dir",
}


def resolve(args) -> dict:
    conf = dict(DEFAULTS)
    if getattr(args, "config", None):
        conf.update(load_config_file(args.config))
    for attr, key in FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            conf[key] = v
    return conf


def domain_from(conf: dict) -> DomainConfig:
    try:
        L1, L2, nu = float(conf["domain.L1"]), float(conf["domain.L2"]), float(conf["domain.nu"])
        Tm = float(conf["domain.Tminus"])
        Tp = float(conf["domain.Tplus"]) if "domain.Tplus" in conf else Tm + float(conf["domain.dT"])
        return DomainConfig(L1=L1, L2=L2, nu=nu, T_plus=Tp, T_minus=Tm)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# manifest


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """One ``manifest.json`` per output directory, listing outputs and their hashes."""

    def __init__(self, outdir: Path, command: str, conf: dict):
        self.outdir, self.command, self.conf = outdir, command, conf
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.outputs: list[Path] = []

    def add(self, path) -> Path:
        p = Path(path)
        self.outputs.append(p)
        return p

    def write(self) -> Path:
        files = sorted(set(self.outputs))
        payload = {
            "tool": "twofluid", "version": __version__, "command": self.command,
            "argv": sys.argv[1:], "config": self.conf,
            "started": self.started, "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "outputs": {str(p.relative_to(self.outdir)): _sha256(p) for p in files},
        }
        path = self.outdir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, default=str))
        return path


def _outdir(conf: dict) -> Path:
    d = Path(conf["output.dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o)}")


def _range(spec: str, name: str) -> np.ndarray:
    try:
        a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise UsageError(f"--{name} expects start:stop:count, got {spec!r}") from exc
    if n < 1:
        raise UsageError(f"--{name}: count must be >= 1")
    return np.linspace(a, b, n)


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(args) -> int:
    conf = resolve(args)
    cfg = domain_from(conf)
    if args.k1_max < 1 or args.k2_max < 0:
        raise UsageError("--k1-max must be >= 1 and --k2-max >= 0")
    out = _outdir(conf)
    man = RunManifest(out, "spectrum", conf)
    if args.continuous_k2:
        q = _range(args.continuous_k2, "continuous-k2")
        table = ls.strip_dispersion(cfg, cfg.dT, q)
        path = man.add(out / "dispersion.csv")
        np.savetxt(path, table, delimiter=",", header="q,re_lambda_plus,im_lambda_plus", comments="")
    else:
        dT = _range(args.dT_range, "dT-range") if args.dT_range else np.linspace(0.0, cfg.dT_star, 201)
        table = ls.spectrum_sweep(cfg, dT, args.k1_max, args.k2_max)
        path = man.add(out / "spectrum.csv")
        np.savetxt(path, table, delimiter=",", header=",".join(ls.SWEEP_COLUMNS), comments="",
                   fmt=["%.17g", "%d", "%d", "%.17g", "%.17g", "%.17g", "%.17g"])
    man.write()
    return EXIT_OK


def cmd_stability(args) -> int:
    conf = resolve(args)
    cfg = domain_from(conf)
    out = _outdir(conf)
    man = RunManifest(out, "stability", conf)
    regions = [ls.instability_interval(cfg, k).to_dict() for k in range(1, args.k2_max + 1)]
    rep = {"domain": cfg.to_dict(), "ell": cfg.ell, "dT_star": cfg.dT_star, "regions": regions}
    try:
        rep["primary"] = ls.classify_primary(cfg).to_dict()
    except ValueError as exc:
        rep["primary"] = {"error": str(exc)}
    _write_json(man.add(out / "stability.json"), rep)
    man.write()
    return EXIT_OK


def cmd_hopf(args) -> int:
    conf = resolve(args)
    cfg = domain_from(conf)
    if cfg.nu <= 0:
        raise UsageError("the cubic coefficient needs nu > 0")
    out = _outdir(conf)
    man = RunManifest(out, "hopf", conf)
    rep = {"domain": cfg.to_dict()}
    if args.degenerate:
        region = ls.instability_interval(cfg, 1, point_rtol=1e-8)
        if region.status != "point":
            raise UsageError(f"--degenerate requires nu = nu_crit(1) = {region.nu_crit:.12g}")
        rep["degenerate"] = hnf.degenerate_coeffs(cfg).__dict__
    whiches = ["left", "right"] if args.which == "both" else [args.which]
    for w in whiches:
        mu1 = args.mu1
        if mu1 is not None and w == "right":
            mu1 = -abs(mu1)
        elif mu1 is not None:
            mu1 = abs(mu1)
        rep[w] = hnf.report(cfg, w, args.k2, mu1=mu1)
    _write_json(man.add(out / "hopf.json"), rep)
    man.write()
    return EXIT_OK


def _integrator_from(conf: dict, cfg: DomainConfig, snapshot_times=()) -> IntegratorConfig:
    dt = float(conf["integrator.dt"]) if "integrator.dt" in conf else default_dt(cfg)
    N = int(conf["integrator.N"])
    ic = InitialCondition(kind=str(conf["ic.kind"]), amplitude=float(conf["ic.amplitude"]),
                          seed=int(conf["ic.seed"]))
    return IntegratorConfig(dt=dt, t_end=float(conf["integrator.t_end"]), scheme=str(conf["integrator.scheme"]),
                            ic=ic, record_every=int(conf["integrator.record_every"]), N1=N, N2=N,
                            frame=str(conf["integrator.frame"]), snapshot_times=tuple(snapshot_times))


def cmd_simulate(args) -> int:
    conf = resolve(args)
    cfg = domain_from(conf)
    if cfg.nu <= 0:
        raise UsageError("simulation requires nu > 0")
    try:
        icfg = _integrator_from(conf, cfg, args.snapshot or ())
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _outdir(conf)
    man = RunManifest(out, "simulate", conf)
    state = SpectralState.load_json(args.state) if args.state else None
    traj = simulate(cfg, icfg, state=state)
    traj.write_traces(man.add(out / "traces.csv"))
    for p in traj.write_snapshots(out / "snapshots"):
        man.add(p)
    path = man.add(out / "final_state.json")
    traj.final_state.save_json(path, cfg)
    man.write()
    return EXIT_OK


def cmd_continue(args) -> int:
    conf = resolve(args)
    cfg = domain_from(conf)
    if cfg.nu <= 0:
        raise UsageError("continuation requires nu > 0")
    if args.dT_step <= 0:
        raise UsageError("--dT-step must be positive")
    N = int(conf["integrator.N"])
    dt = float(conf["integrator.dt"]) if "integrator.dt" in conf else None
    try:
        proto = cont.Protocol(transient_time=float(conf["protocol.transient"]),
                              window_time=float(conf["protocol.window"]), dt=dt, N1=N, N2=N,
                              seed_amplitude=float(conf["ic.amplitude"]),
                              frame=str(conf["integrator.frame"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _outdir(conf)
    man = RunManifest(out, "continue", conf)
    points = cont.sweep(cfg, args.dT_start, args.dT_end, args.dT_step, proto,
                        checkpoint_dir=out / "checkpoints")
    cont.write_bifurcation_csv(points, man.add(out / "bifurcation.csv"))
    for p in sorted((out / "checkpoints").glob("point_*.json")):
        man.add(p)
    man.write()
    return EXIT_OK


def cmd_energy(args) -> int:
    conf = resolve(args)
    cfg = domain_from(conf)
    if cfg.dT == 0:
        raise UsageError("the energy functional is undefined at dT = 0")
    out = _outdir(conf)
    man = RunManifest(out, "energy", conf)
    if args.decay:
        if 0 <= cfg.dT <= cfg.dT_star:
            raise UsageError(f"decay check needs dT < 0 or dT > {cfg.dT_star:.6g}")
        try:
            icfg = _integrator_from(conf, cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        traj = simulate(cfg, icfg)
        res = de.decay_check(traj.times, traj.l2_sq(), cfg)
        traj.write_traces(man.add(out / "traces.csv"))
        rep = {"decay": res.to_dict(), "final": de.energy_report(traj.final_state, cfg,
                                                                  traj.energy[-1].dissipation_accum)}
    else:
        if args.state:
            state = SpectralState.load_json(args.state)
        else:
            from .time_integrator import initial_state
            N = int(conf["integrator.N"])
            ic = InitialCondition(kind=str(conf["ic.kind"]), amplitude=float(conf["ic.amplitude"]),
                                  seed=int(conf["ic.seed"]))
            state = initial_state(cfg, N, N, ic)
        rep = de.energy_report(state, cfg)
    _write_json(man.add(out / "energy.json"), rep)
    man.write()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _positive(name):
    def conv(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive, got {s}")
        return v
    return conv


def _nonneg(name):
    def conv(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}")
        if not v >= 0:
            raise argparse.ArgumentTypeError(f"{name} must be non-negative, got {s}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("domain")
    g.add_argument("--config", help="JSON or INI config file")
    g.add_argument("--L1", type=_positive("L1"))
    g.add_argument("--L2", type=_positive("L2"))
    g.add_argument("--nu", type=_nonneg("nu"))
    g.add_argument("--Tplus", type=float)
    g.add_argument("--Tminus", type=float)
    g.add_argument("--dT", type=float, help="T+ - T- (ignored when --Tplus is given)")
    g.add_argument("--out", help="output directory")
    g.add_argument("--threads", type=int, default=1, help="FFT worker threads (default 1: serial)")

    integ = argparse.ArgumentParser(add_help=False)
    h = integ.add_argument_group("integration")
    h.add_argument("--dt", type=_positive("dt"))
    h.add_argument("--t-end", dest="t_end", type=_positive("t-end"))
    h.add_argument("--scheme", choices=["cnab2", "cn_euler"])
    h.add_argument("--N", type=int)
    h.add_argument("--record-every", dest="record_every", type=int)
    h.add_argument("--frame", choices=["lab", "comoving"])
    h.add_argument("--ic", choices=["eigenmode", "random", "zero"])
    h.add_argument("--amplitude", type=_nonneg("amplitude"))
    h.add_argument("--seed", type=int)

    p = argparse.ArgumentParser(prog="twofluid", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"twofluid {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", parents=[common], help="eigenvalue tables")
    s.add_argument("--dT-range", dest="dT_range", help="start:stop:count (default 0:4L1/pi^2:201)")
    s.add_argument("--k1-max", dest="k1_max", type=int, default=10)
    s.add_argument("--k2-max", dest="k2_max", type=int, default=10)
    s.add_argument("--continuous-k2", dest="continuous_k2",
                   help="start:stop:count of continuous wavenumbers q (k2 = L2 q), evaluated at --dT")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("stability", parents=[common], help="instability regions and classification")
    s.add_argument("--k2-max", dest="k2_max", type=int, default=6)
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("hopf", parents=[common], help="normal-form coefficients")
    s.add_argument("--which", choices=["left", "right", "both"], default="both")
    s.add_argument("--k2", type=int, default=1)
    s.add_argument("--mu1", type=float, help="distance into the unstable side for cycle predictions")
    s.add_argument("--degenerate", action="store_true", help="unfolding at nu = nu_crit(1)")
    s.set_defaults(func=cmd_hopf)

    s = sub.add_parser("simulate", parents=[common, integ], help="time integration")
    s.add_argument("--state", help="initial spectral state (JSON)")
    s.add_argument("--snapshot", type=float, action="append", help="snapshot time (repeatable)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("continue", parents=[common, integ], help="warm-started sweep in dT")
    s.add_argument("--dT-start", dest="dT_start", type=float, required=True)
    s.add_argument("--dT-end", dest="dT_end", type=float, required=True)
    s.add_argument("--dT-step", dest="dT_step", type=float, required=True)
    s.add_argument("--transient", type=_nonneg("transient"))
    s.add_argument("--window", type=_positive("window"))
    s.set_defaults(func=cmd_continue)

    s = sub.add_parser("energy", parents=[common, integ], help="energy functional and decay check")
    s.add_argument("--state", help="spectral state (JSON) to evaluate")
    s.add_argument("--decay", action="store_true", help="simulate and check global decay")
    s.set_defaults(func=cmd_energy)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.threads < 1:
        print("twofluid: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        with sfft.set_workers(args.threads):
            return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"twofluid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BlowUpError, ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"twofluid: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
