"""``efnet <config-path> [section.key=value ...]``: temporal, portrait and continuation runs.

The configuration is an INI file.  Every output CSV starts with ``#`` lines echoing the
fully resolved configuration, so passing an output file back as the config path
reproduces it byte for byte.  Exit codes: 0 success, 1 configuration or I/O error,
2 solver non-convergence (partial output is still written, with a status footer).
"""

from __future__ import annotations

import argparse
import configparser
import io
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .coarse import CoarseConfig, EpidemicCoarseMap
from .epidemic import EpidemicParams, evolve, simulate_counts
from .graph import Network, generate_rrn
from .lifting import HealParams, SAParams, random_lift, sa_lift
from .moments import CoarseState, pair_densities, pair_target
from .numerics import ContinuationConfig, ConvergenceError, newton_fixed_point, trace_branch

MODES = ("temporal", "portrait", "continuation")

DEFAULTS: dict[str, dict[str, str]] = {
    "experiment": {"mode": "temporal", "output": "efnet_out.csv"},
    "network": {"n_nodes": "20000", "degree": "4", "graph_seed": "1"},
    "epidemic": {
        "p_si": "0.17", "c1": "0.1", "c2": "0.5", "p_rs": "0.2",
        "p_si_sweep": "0.5, 0.25, 0.17, 0.14, 0.13, 0.10",
    },
    "temporal": {"t_max": "2000", "initial_infected": "high:0.9, low:0.05", "run_seed": "0"},
    "portrait": {
        "s": "0.45", "i": "0.29", "n_trajectories": "10", "si_min": "0.05",
        "si_max": "0.25", "t_max": "30", "run_seed": "0",
    },
    "coarse": {"horizon_t": "4", "ensemble": "64", "run_seed": "0",
               "common_random_numbers": "true"},
    "heal": {"dt": "1", "max_rounds": "10", "moment_tol": "5e-4", "temp_init": "1e-9"},
    "sa": {"temp_init": "auto", "cooling": "0.95", "sweeps_max": "200",
           "moves_per_sweep": "auto", "tol": "1e-4", "patience": "2"},
    "continuation": {
        "p_start": "0.25", "p_step": "-0.005", "s_guess": "0.3", "i_guess": "0.35",
        "ds": "0.02", "newton_tol": "2e-3", "newton_max_iter": "20", "fd_step": "0.02",
        "n_points": "200", "damping": "1.0", "max_halvings": "5",
        "p_min": "0.10", "p_max": "0.25", "max_seconds": "none",
    },
}

TEMPORAL_COLUMNS = ("p_si", "ic_label", "t", "S", "I", "R")
PORTRAIT_COLUMNS = ("trajectory_id", "t", "S", "I", "SI")
CONTINUATION_COLUMNS = ("arc_index", "p_si", "S", "I", "residual", "eig1_re", "eig1_im",
                        "eig2_re", "eig2_im", "stable", "is_fold")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    output: Path
    n_nodes: int
    degree: int
    graph_seed: int
    epidemic: EpidemicParams
    raw: configparser.ConfigParser  # resolved text form, echoed into outputs

    def section(self, name: str) -> configparser.SectionProxy:
        return self.raw[name]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _read_text(path: Path) -> str:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".csv":
        # an earlier output: its comment header is the configuration
        lines = [ln[2:] if ln.startswith("# ") else ln[1:]
                 for ln in text.splitlines() if ln.startswith("#")]
        text = "\n".join(ln for ln in lines if not ln.startswith(("efnet ", "status:", "fold:")))
    return text


def load_config(path, overrides=()) -> ExperimentConfig:
    """Parse ``path`` on top of the defaults and apply ``section.key=value`` overrides."""
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(DEFAULTS)
    try:
        user = configparser.ConfigParser(interpolation=None)
        user.read_string(_read_text(path), source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    entries = [(s, k, v) for s in user.sections() for k, v in user[s].items()]
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        entries.append((section, name, value.strip()))
    for section, key, value in entries:
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"unknown configuration key {section}.{key}")
        cp[section][key] = value
    return _resolve(cp)


def _resolve(cp: configparser.ConfigParser) -> ExperimentConfig:
    try:
        mode = cp["experiment"]["mode"]
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        net = cp["network"]
        ep = cp["epidemic"]
        cfg = ExperimentConfig(
            mode=mode,
            output=Path(cp["experiment"]["output"]),
            n_nodes=net.getint("n_nodes"),
            degree=net.getint("degree"),
            graph_seed=net.getint("graph_seed"),
            epidemic=EpidemicParams(ep.getfloat("p_si"), ep.getfloat("c1"),
                                    ep.getfloat("c2"), ep.getfloat("p_rs")),
            raw=cp,
        )
        # surface type errors in the mode-specific sections before any work starts
        {"temporal": _temporal_settings, "portrait": _portrait_settings,
         "continuation": _continuation_settings}[mode](cfg)
        return cfg
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _auto(text: str, kind):
    return None if text.strip() in ("auto", "none") else kind(text)


def _sa_params(cfg: ExperimentConfig, temp_init=None) -> SAParams:
    sa = cfg.section("sa")
    return SAParams(
        temp_init=_auto(sa["temp_init"], float) if temp_init is None else temp_init,
        cooling=sa.getfloat("cooling"),
        sweeps_max=sa.getint("sweeps_max"),
        moves_per_sweep=_auto(sa["moves_per_sweep"], int),
        tol=sa.getfloat("tol"),
        patience=sa.getint("patience"),
    )


def coarse_config(cfg: ExperimentConfig) -> CoarseConfig:
    co, he = cfg.section("coarse"), cfg.section("heal")
    return CoarseConfig(
        horizon_t=co.getint("horizon_t"),
        ensemble=co.getint("ensemble"),
        heal=HealParams(he.getint("dt"), he.getint("max_rounds"), he.getfloat("moment_tol")),
        sa=_sa_params(cfg, temp_init=he.getfloat("temp_init")),
        base_seed=co.getint("run_seed"),
    )


def _temporal_settings(cfg):
    sec = cfg.section("temporal")
    ics = []
    for item in sec["initial_infected"].split(","):
        label, sep, frac = item.strip().partition(":")
        if not sep or not label:
            raise ConfigError(f"initial condition {item!r} is not of the form label:fraction")
        f = float(frac)
        if not 0 <= f <= 1:
            raise ConfigError(f"initial infected fraction {f} outside [0, 1]")
        ics.append((label, f))
    sweep = _floats(cfg.section("epidemic")["p_si_sweep"])
    for p in sweep:
        cfg.epidemic.with_p_si(p)
    t_max = sec.getint("t_max")
    if t_max < 0:
        raise ConfigError("t_max must be non-negative")
    return sweep, ics, t_max, sec.getint("run_seed")


def _portrait_settings(cfg):
    sec = cfg.section("portrait")
    x = CoarseState(sec.getfloat("s"), sec.getfloat("i"))
    n = sec.getint("n_trajectories")
    if n < 1 or sec.getint("t_max") < 0:
        raise ConfigError("n_trajectories must be positive and t_max non-negative")
    si = np.linspace(sec.getfloat("si_min"), sec.getfloat("si_max"), n)
    return x, si, sec.getint("t_max"), sec.getint("run_seed"), _sa_params(cfg)


def _continuation_settings(cfg):
    sec = cfg.section("continuation")
    cc = ContinuationConfig(
        ds=sec.getfloat("ds"), newton_tol=sec.getfloat("newton_tol"),
        newton_max_iter=sec.getint("newton_max_iter"), fd_step=sec.getfloat("fd_step"),
        n_points=sec.getint("n_points"), damping=sec.getfloat("damping"),
        max_halvings=sec.getint("max_halvings"),
        p_min=sec.getfloat("p_min"), p_max=sec.getfloat("p_max"),
        max_seconds=_auto(sec.get("max_seconds"), float),
    )
    guess = CoarseState(sec.getfloat("s_guess"), sec.getfloat("i_guess"))
    p0, dp = sec.getfloat("p_start"), sec.getfloat("p_step")
    if dp == 0:
        raise ConfigError("p_step must be non-zero")
    return cc, guess, p0, dp, coarse_config(cfg), cfg.section("coarse").getboolean(
        "common_random_numbers")


def _network(cfg: ExperimentConfig) -> Network:
    return generate_rrn(cfg.n_nodes, cfg.degree, cfg.graph_seed)


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def run_temporal(cfg: ExperimentConfig):
    """Rows ``(p_si, ic_label, t, S, I, R)`` for every sweep value and initial condition."""
    sweep, ics, t_max, seed = _temporal_settings(cfg)
    net = _network(cfg)
    rows = []
    for a, p in enumerate(sweep):
        params = cfg.epidemic.with_p_si(p)
        for b, (label, i0) in enumerate(ics):
            rng = _rng(seed, a, b)
            cfg0 = random_lift(net, CoarseState(1.0 - i0, i0), rng)
            counts = simulate_counts(net, cfg0, params, t_max, rng) / net.n_nodes
            rows += [(p, label, t, *counts[t]) for t in range(t_max + 1)]
    return rows, [], "complete", 0


def run_portrait(cfg: ExperimentConfig):
    """Rows ``(trajectory_id, t, S, I, SI)`` from SA-prepared states with a range of ``[SI]``."""
    x, si_values, t_max, seed, sa = _portrait_settings(cfg)
    net = _network(cfg)
    rows = []
    for k, si in enumerate(si_values):
        rng = _rng(seed, k)
        states, _ = sa_lift(net, x, pair_target(x, float(si)), sa, rng)
        for t in range(t_max + 1):
            if t:
                states = evolve(net, states, cfg.epidemic, 1, rng)
            c = np.bincount(states, minlength=4) / net.n_nodes
            rows.append((k, t, c[1], c[2], pair_densities(net, states).si))
    return rows, [], "complete", 0


def run_continuation(cfg: ExperimentConfig):
    """Branch rows from two Newton-converged seed points; folds are flagged and listed."""
    cc, guess, p0, dp, coarse, crn = _continuation_settings(cfg)
    net = _network(cfg)
    phi = EpidemicCoarseMap(net, cfg.epidemic, coarse, common_random_numbers=crn)
    try:
        first = newton_fixed_point(phi, guess, p0, cc)
        logging.getLogger(__name__).info("seed point at p=%s: x=%s", p0, first.x)
        second = newton_fixed_point(phi, first.x, p0 + dp, cc)
    except ConvergenceError as exc:
        return [], [], f"aborted: seed point: {exc}", 2
    branch = trace_branch(phi, (first, second), cc)
    fold_at = {f.index for f in branch.folds}
    rows = []
    for k, pt in enumerate(branch.points):
        e1, e2 = (complex(e) for e in pt.eigenvalues[:2])
        rows.append((k, pt.p, pt.x[0], pt.x[1], pt.residual, e1.real, e1.imag,
                     e2.real, e2.imag, int(pt.stable), int(k in fold_at)))
    notes = [f"fold: p_si={_fmt(f.p)} S={_fmt(f.x[0])} I={_fmt(f.x[1])} "
             f"leading_eigenvalue={_fmt(f.leading_eigenvalue)}" for f in branch.folds]
    code = 2 if branch.status.startswith("aborted") else 0
    return rows, notes, branch.status, code


RUNNERS = {
    "temporal": (run_temporal, TEMPORAL_COLUMNS),
    "portrait": (run_portrait, PORTRAIT_COLUMNS),
    "continuation": (run_continuation, CONTINUATION_COLUMNS),
}


def render(cfg: ExperimentConfig, columns, rows, notes, status: str) -> str:
    buf = io.StringIO()
    cfg.raw.write(buf)
    out = [f"# efnet {__version__}"]
    out += ["# " + ln if ln else "#" for ln in buf.getvalue().rstrip("\n").splitlines()]
    out.append(",".join(columns))
    out += [",".join(_fmt(v) for v in row) for row in rows]
    out += [f"# {ln}" for ln in notes]
    out.append(f"# status: {status}")
    return "\n".join(out) + "\n"


def run(cfg: ExperimentConfig) -> int:
    runner, columns = RUNNERS[cfg.mode]
    rows, notes, status, code = runner(cfg)
    try:
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
        cfg.output.write_text(render(cfg, columns, rows, notes, status), encoding="utf-8")
    except OSError as exc:
        print(f"efnet: cannot write {cfg.output}: {exc}", file=sys.stderr)
        return 1
    if code:
        print(f"efnet: {status}; partial output in {cfg.output}",
              file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="efnet", description=__doc__.splitlines()[0])
    parser.add_argument("config", help="INI configuration, or an earlier efnet CSV output")
    parser.add_argument("overrides", nargs="*", metavar="section.key=value")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"efnet: configuration error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
