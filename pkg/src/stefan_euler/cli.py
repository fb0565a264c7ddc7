"""Command-line surface: simulations, convergence and particle-scaling
studies, bound tables, and jump-size queries.

All output is plot data (CSV/JSON); every JSON header echoes the fully
resolved configuration under a versioned "stefan-euler/1" schema, and every
command is deterministic given its full flag set.  Exit codes: 0 success,
2 validation failure (one "error: ..." line on stderr), 3 engine failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import bounds
from .analysis import GridEngine, ParticleEngine, convergence_study, fit_rate
from .curves import step_count
from .errors import BoundVacuous, EngineError, StefanError, ValidationError
from .grid import run_grid_scheme
from .laws import (
    ConstantMargin,
    GammaLaw,
    MonomialDeficitLaw,
    MonomialMargin,
    TabulatedMargin,
    tabulated_from_csv,
    uniform_law,
)
from .particle import particle_scaling_study, run_particle_scheme

SCHEMA = "stefan-euler/1"


# ---------------------------------------------------------------------------
# spec parsing


def parse_law(spec: str, alpha: float):
    """Law specs: gamma:SHAPE:RATE | monomial:EXPONENT[:COEFF] |
    uniform:WIDTH | tabulated:PATH.  The monomial deficit coefficient
    defaults to its critical value for the given alpha."""
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "gamma":
            shape, rate = float(parts[1]), float(parts[2])
            return GammaLaw(shape=shape, rate=rate)
        if kind == "monomial":
            a = float(parts[1])
            c = float(parts[2]) if len(parts) > 2 else None
            return MonomialDeficitLaw(alpha=alpha, a=a, c=c)
        if kind == "uniform":
            return uniform_law(float(parts[1]))
        if kind == "tabulated":
            return tabulated_from_csv(parts[1])
    except (IndexError, ValueError) as exc:
        raise ValidationError("malformed law spec %r: %s" % (spec, exc)) from exc
    raise ValidationError("unknown law kind %r" % kind)


def parse_profile(spec: str):
    """Margin profile specs: constant:PSI0:DELTA | monomial:COEFF:EXP:DELTA |
    tabulated:PATH (two-column CSV of x, psi)."""
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "constant":
            return ConstantMargin(psi0_value=float(parts[1]), delta=float(parts[2]))
        if kind == "monomial":
            return MonomialMargin(
                coeff=float(parts[1]), exponent=float(parts[2]), delta=float(parts[3])
            )
        if kind == "tabulated":
            grid, values = _read_two_column_csv(parts[1])
            return TabulatedMargin(grid, values)
    except (IndexError, ValueError) as exc:
        raise ValidationError("malformed profile spec %r: %s" % (spec, exc)) from exc
    raise ValidationError("unknown profile kind %r" % kind)


def _read_two_column_csv(path):
    xs, ys = [], []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    x, y = float(row[0]), float(row[1])
                except (IndexError, ValueError):
                    if not xs:  # tolerate a single header line
                        continue
                    raise ValidationError("malformed CSV row %r in %s" % (row, path))
                xs.append(x)
                ys.append(y)
    except OSError as exc:
        raise ValidationError("cannot read %s: %s" % (path, exc)) from exc
    if len(xs) < 2:
        raise ValidationError("%s needs at least two numeric rows" % path)
    return np.asarray(xs), np.asarray(ys)


def _parse_list(text: str, cast):
    try:
        return [cast(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise ValidationError("malformed list %r: %s" % (text, exc)) from exc


@dataclass
class RunConfig:
    """Resolved run configuration, echoed into every JSON header."""

    law_spec: str
    alpha: float
    n_steps: int
    dt: float
    horizon: float
    engine: str
    n_particles: int | None = None
    seed: int | None = None
    workers: int = 1
    h: float | None = None
    normalized: bool = False

    def to_json_dict(self) -> dict:
        return {
            "law": self.law_spec,
            "alpha": self.alpha,
            "n": self.n_steps,
            "dt": self.dt,
            "horizon": self.horizon,
            "engine": self.engine,
            "particles": self.n_particles,
            "seed": self.seed,
            "workers": self.workers,
            "h": self.h,
            "normalized": self.normalized,
        }


def _resolve_mesh(args) -> tuple[int, float]:
    if (args.n is None) == (args.dt is None):
        raise ValidationError("exactly one of --n and --dt is required")
    if args.n is not None:
        if args.n <= 0:
            raise ValidationError("--n must be positive")
        return args.n, args.horizon / args.n
    if args.dt <= 0:
        raise ValidationError("--dt must be positive")
    return step_count(args.dt, args.horizon), args.dt


def _resolve_config(args) -> RunConfig:
    if args.horizon is None or args.horizon <= 0:
        raise ValidationError("--horizon must be positive")
    if args.alpha is None or args.alpha <= 0:
        raise ValidationError("--alpha must be positive")
    n_steps, dt = _resolve_mesh(args)
    cfg = RunConfig(
        law_spec=args.law,
        alpha=args.alpha,
        n_steps=n_steps,
        dt=dt,
        horizon=args.horizon,
        engine=args.engine,
        normalized=getattr(args, "normalized", False),
    )
    if args.engine == "particle":
        if args.particles is None or args.particles <= 0:
            raise ValidationError("--particles must be a positive integer")
        if args.seed is None:
            raise ValidationError("--seed is required for particle runs")
        if args.workers <= 0:
            raise ValidationError("--workers must be positive")
        cfg.n_particles = args.particles
        cfg.seed = args.seed
        cfg.workers = args.workers
    elif args.engine == "grid":
        cfg.h = args.h if args.h is not None else math.sqrt(dt) / 20.0
        if cfg.h <= 0:
            raise ValidationError("--h must be positive")
    else:
        raise ValidationError("engine must be 'particle' or 'grid'")
    return cfg


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    law = parse_law(cfg.law_spec, cfg.alpha)
    if cfg.engine == "particle":
        curve = run_particle_scheme(
            law, cfg.alpha, cfg.dt, cfg.horizon, cfg.n_particles,
            seed=cfg.seed, workers=cfg.workers,
        )
    else:
        curve = run_grid_scheme(law, cfg.alpha, cfg.dt, cfg.horizon, h=cfg.h)
    curve.meta = {"schema": SCHEMA, "config": cfg.to_json_dict(), "law": law.to_config()}
    curve.write_csv(args.out + ".csv")
    curve.write_json(args.out + ".json")
    print(
        "wrote %s.csv and %s.json: %d steps, final loss %.6g (fraction %.6g)"
        % (args.out, args.out, cfg.n_steps, curve.values[-1], curve.values[-1] / cfg.alpha)
    )
    return 0


def cmd_convergence(args) -> int:
    cfg = _resolve_config_study(args)
    law = parse_law(args.law, args.alpha)
    n_list = _parse_list(args.n_list, int)
    if len(n_list) < 3:
        raise ValidationError("--n-list needs at least 3 meshes for a rate fit")
    engine = _study_engine(args)
    report = convergence_study(
        law, args.alpha, args.horizon, n_list, args.n_reference, engine,
        normalized=args.normalized,
    )
    report.inputs["config"] = cfg
    report.write_json(args.out + ".json")
    report.write_csv(args.out + ".csv")
    print(report.to_markdown())
    if args.table:
        print(
            "| %s | %g | %.3f | %.4f |"
            % (args.law, args.alpha, report.fitted_rate, report.r_squared)
        )
    return 0


def _resolve_config_study(args) -> dict:
    if args.horizon is None or args.horizon <= 0:
        raise ValidationError("--horizon must be positive")
    if args.alpha is None or args.alpha <= 0:
        raise ValidationError("--alpha must be positive")
    if args.engine == "particle":
        if args.particles is None or args.particles <= 0:
            raise ValidationError("--particles must be a positive integer")
        if args.seed is None:
            raise ValidationError("--seed is required for particle studies")
    return {
        "law": args.law,
        "alpha": args.alpha,
        "horizon": args.horizon,
        "engine": args.engine,
        "particles": getattr(args, "particles", None),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", 1),
        "h": getattr(args, "h", None),
        "normalized": getattr(args, "normalized", False),
    }


def _study_engine(args):
    if args.engine == "particle":
        return ParticleEngine(
            n_particles=args.particles, seed=args.seed, workers=args.workers
        )
    if args.engine == "grid":
        return GridEngine(h=args.h)
    raise ValidationError("engine must be 'particle' or 'grid'")


def cmd_particles(args) -> int:
    if args.horizon is None or args.horizon <= 0:
        raise ValidationError("--horizon must be positive")
    if args.alpha is None or args.alpha <= 0:
        raise ValidationError("--alpha must be positive")
    if args.seed is None:
        raise ValidationError("--seed is required for particle studies")
    if args.n_seeds <= 0:
        raise ValidationError("--n-seeds must be positive")
    n_steps, dt = _resolve_mesh(args)
    law = parse_law(args.law, args.alpha)
    n_list = _parse_list(args.N_list, int)
    if not n_list:
        raise ValidationError("--N-list must not be empty")
    reference = run_grid_scheme(law, args.alpha, dt, args.horizon, h=args.h)
    pairs = particle_scaling_study(
        law, args.alpha, dt, args.horizon, n_list, args.n_seeds, reference,
        seed=args.seed, workers=args.workers,
    )
    slope = None
    if len(pairs) >= 3:
        fit = fit_rate(pairs)
        slope = -fit.rate  # scaling in N is a decay: report the signed slope
    payload = {
        "schema": SCHEMA,
        "kind": "particle_scaling",
        "inputs": {
            "law": args.law,
            "alpha": args.alpha,
            "n": n_steps,
            "dt": dt,
            "horizon": args.horizon,
            "N_list": n_list,
            "n_seeds": args.n_seeds,
            "seed": args.seed,
            "h": args.h,
        },
        "pairs": [[int(n), float(e)] for n, e in pairs],
        "slope": slope,
    }
    with open(args.out + ".json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(args.out + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "mean_error"])
        for n, e in pairs:
            writer.writerow([int(n), repr(float(e))])
    for n, e in pairs:
        print("N=%-9d mean sup error %.6g" % (n, e))
    if slope is not None:
        print("fitted slope % .4f" % slope)
    return 0


def cmd_bound(args) -> int:
    if args.alpha is None or args.alpha <= 0:
        raise ValidationError("--alpha must be positive")
    if args.f_sup is None or args.f_sup <= 0:
        raise ValidationError("--f-sup must be positive")
    profile = parse_profile(args.profile)
    window = bounds.bound_window(args.alpha, args.f_sup, profile)
    eps = args.eps if args.eps is not None else 0.99 * window
    consts = bounds.rate_bound_constants(args.alpha, args.f_sup, profile, eps)
    dt_list = _parse_list(args.dt_list, float)
    if not dt_list:
        raise ValidationError("--dt-list must not be empty")
    rows = []
    n_vacuous = 0
    print("regime %s, eps %.6g (window %.6g)" % (consts.regime, eps, window))
    print("| dt | G term | comparison term | total bound |")
    print("| ---: | ---: | ---: | ---: |")
    for dt in dt_list:
        try:
            terms = bounds.rate_bound_terms(
                args.alpha, args.f_sup, profile, eps, dt, consts=consts
            )
            rows.append(
                {
                    "dt": dt,
                    "g_total": terms.g_total,
                    "comparison_term": terms.comparison_term,
                    "total": terms.total,
                    "vacuous": False,
                }
            )
            print(
                "| %g | %.6g | %.6g | %.6g |"
                % (dt, terms.g_total, terms.comparison_term, terms.total)
            )
        except BoundVacuous as exc:
            n_vacuous += 1
            rows.append({"dt": dt, "vacuous": True, "reason": str(exc)})
            print("| %g | vacuous | vacuous | vacuous |" % dt)
    if n_vacuous:
        print(
            "warning: bound vacuous at %d of %d step sizes" % (n_vacuous, len(dt_list)),
            file=sys.stderr,
        )
    if args.out:
        payload = consts.to_json_dict()
        payload["rows"] = rows
        with open(args.out + ".json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_jump(args) -> int:
    if args.alpha is None or args.alpha <= 0:
        raise ValidationError("--alpha must be positive")
    grid, values = _read_two_column_csv(args.density)
    if np.any(values < 0):
        raise ValidationError("density values must be nonnegative")
    density = bounds.TabulatedSubDensity(grid, values)
    jump, witness = bounds.jump_witness(density, args.alpha)
    print("jump %.12g" % jump)
    print("witness %.12g" % witness)
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_engine_flags(sp, study=False):
    sp.add_argument("--engine", choices=["particle", "grid"], required=True)
    sp.add_argument("--particles", type=int, help="particle count (particle engine)")
    sp.add_argument("--seed", type=int, help="base seed (required for particle runs)")
    sp.add_argument("--workers", type=int, default=1, help="engine worker threads")
    sp.add_argument("--h", type=float, help="grid cell width (default sqrt(dt)/20)")


def _add_mesh_flags(sp):
    sp.add_argument("--n", type=int, help="number of time steps")
    sp.add_argument("--dt", type=float, help="time step (alternative to --n)")
    sp.add_argument("--horizon", type=float, required=True, help="time horizon T")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="stefan-euler",
        description="Euler scheme toolkit for the probabilistic supercooled "
        "Stefan problem: loss-curve simulation, convergence studies, "
        "explicit rate bounds, and jump-size queries.",
    )
    parser.add_argument(
        "--config",
        help="optional KEY=VALUE file supplying flag defaults (flags override)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}

    sp = sub.add_parser(
        "simulate",
        help="run one scheme and write the loss curve",
        description="Writes OUT.csv with columns t, lambda, loss_fraction "
        "(one row per grid time) and OUT.json with the curve plus the "
        "resolved config.",
    )
    sp.add_argument("--law", required=True, help=parse_law.__doc__)
    sp.add_argument("--alpha", type=float, required=True)
    _add_mesh_flags(sp)
    _add_engine_flags(sp)
    sp.add_argument("--out", required=True, help="output path prefix")
    sp.set_defaults(fn=cmd_simulate)
    commands["simulate"] = sp

    sp = sub.add_parser(
        "convergence",
        help="mesh-refinement study with a fitted rate",
        description="Writes OUT.json and OUT.csv (columns n, error); "
        "--table adds a one-line Markdown row (law, alpha, rate, r^2).",
    )
    sp.add_argument("--law", required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--horizon", type=float, required=True)
    sp.add_argument("--n-list", required=True, help="comma-separated mesh counts")
    sp.add_argument("--n-reference", type=int, required=True)
    _add_engine_flags(sp, study=True)
    sp.add_argument("--normalized", action="store_true", help="divide errors by alpha")
    sp.add_argument("--table", action="store_true", help="emit a Markdown table row")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_convergence)
    commands["convergence"] = sp

    sp = sub.add_parser(
        "particles",
        help="particle-count scaling study against the grid reference",
        description="Writes OUT.csv (columns N, mean_error) and OUT.json "
        "(pairs plus fitted slope when 3+ counts are given).",
    )
    sp.add_argument("--law", required=True)
    sp.add_argument("--alpha", type=float, required=True)
    _add_mesh_flags(sp)
    sp.add_argument("--N-list", required=True, help="comma-separated particle counts")
    sp.add_argument("--n-seeds", type=int, default=20)
    sp.add_argument("--seed", type=int, help="base seed (required)")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--h", type=float, help="grid cell width for the reference")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_particles)
    commands["particles"] = sp

    sp = sub.add_parser(
        "bound",
        help="explicit rate-bound table over step sizes",
        description="Prints a Markdown table (dt, G term, comparison term, "
        "total); step sizes where the bound degenerates print 'vacuous'. "
        "--out writes the constants plus rows as JSON.",
    )
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--f-sup", type=float, required=True, help="sup of the initial density")
    sp.add_argument("--profile", required=True, help=parse_profile.__doc__)
    sp.add_argument("--eps", type=float, help="window length (default 0.99 * max)")
    sp.add_argument("--dt-list", required=True, help="comma-separated step sizes")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_bound)
    commands["bound"] = sp

    sp = sub.add_parser(
        "jump",
        help="physical jump size of a tabulated sub-density",
        description="Reads a two-column CSV (x, density) and prints the jump "
        "size and the first witness point where mass drops below x/alpha.",
    )
    sp.add_argument("--density", required=True, help="two-column CSV path")
    sp.add_argument("--alpha", type=float, required=True)
    sp.set_defaults(fn=cmd_jump)
    commands["jump"] = sp
    return parser, commands


def _read_config_file(path) -> dict:
    defaults = {}
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValidationError("malformed config line %r" % line)
                key, value = line.split("=", 1)
                defaults[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ValidationError("cannot read config %s: %s" % (path, exc)) from exc
    return defaults


def _apply_config_file(subparser, argv):
    """KEY=VALUE entries from --config become subcommand defaults; explicit
    flags override them."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValidationError("--config needs a path")
    defaults = _read_config_file(argv[idx + 1])
    typed = {}
    for action in subparser._actions:
        if action.dest in defaults:
            value = defaults[action.dest]
            if action.type is not None:
                value = action.type(value)
            elif isinstance(action, argparse._StoreTrueAction):
                value = value.lower() in ("1", "true", "yes")
            typed[action.dest] = value
            action.required = False
    subparser.set_defaults(**typed)
    return [tok for k, tok in enumerate(argv) if k not in (idx, idx + 1)]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        command = next((tok for tok in argv if tok in commands), None)
        if command is not None:
            argv = _apply_config_file(commands[command], argv)
        args = parser.parse_args(argv)
        return args.fn(args)
    except ValidationError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except EngineError as exc:
        print("engine error: %s" % exc, file=sys.stderr)
        return 3
    except StefanError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
