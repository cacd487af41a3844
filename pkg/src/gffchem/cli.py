"""Command-line entry point: ``gffchem <subcommand> [flags]``.

Flags override values read from ``--config`` (a RunConfig JSON file, or a
result JSON carrying one under ``meta.config``).  Data goes to stdout or
files, logs to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, rng
from .config import ConfigError, RunConfig
from .io import emit_results, write_field

log = logging.getLogger("gffchem")


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _add(p: argparse.ArgumentParser, *names: str) -> None:
    types = {"d": int, "seed": int, "n": int, "workers": int, "kappa": float, "law": str, "output": str,
             "N": _int_list, "L": int, "K": int, "h": float, "h1": float, "h2": float, "eps": float,
             "delta": float, "h_star": float, "alpha": int, "C": float, "C1": float, "F_reading": str,
             "tol": float, "event": str, "R": int, "window_factor": float, "field_output": str}
    for name in names:
        flag = "--" + name.replace("_", "-")
        alias = ["--" + name] if "_" in name else []
        p.add_argument(flag, *alias, dest=name, type=types[name], default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gffchem", description="Level-set chemical distance toolkit.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="RunConfig JSON (flags override it)")
        return p

    p = cmd("green", "free Green's function g(0, x) with convergence trace")
    _add(p, "d", "tol")
    p.add_argument("--x", type=_int_list, default=None, help="target site, default the origin")

    p = cmd("capacity", "capacities of boxes, tubes or a single site")
    _add(p, "d", "N", "eps", "output")
    p.add_argument("--shape", choices=["site", "box", "tube1", "tube2"], default="box")

    p = cmd("sample", "sample a field on B_R and write it as GFF1")
    _add(p, "d", "seed", "kappa", "law", "field_output")
    p.add_argument("--box", type=int, required=False, default=None, help="half-width R of the window")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", dest="field_output", default=None)

    p = cmd("classify", "classify coarse boxes around B_N for one field sample")
    _add(p, "d", "seed", "kappa", "N", "L", "K", "eps", "h1", "h2", "C1", "output")

    p = cmd("estimate", "Monte Carlo estimate of an event probability per N")
    _add(p, "d", "seed", "n", "workers", "kappa", "law", "N", "h", "C", "R", "alpha", "eps", "h_star",
         "delta", "F_reading", "event", "window_factor", "output")

    p = cmd("tube", "tube geometry and capacities")
    _add(p, "d", "N", "alpha", "eps", "output")

    p = cmd("fit", "fit decay models to an estimate CSV")
    p.add_argument("input")
    _add(p, "d", "output")
    return ap


def _config_from(args: argparse.Namespace) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        data = RunConfig.load(args.config).to_dict()
    for k in RunConfig.__dataclass_fields__:
        v = getattr(args, k, None)
        if v is not None:
            data[k] = v
    return RunConfig.from_dict(data)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=1, default=_default) + "\n")


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def _meta(cfg: RunConfig, command: str) -> dict:
    return {"command": command, "version": __version__, "config": cfg.to_dict()}


def _write_tables(rows: list[dict], cfg: RunConfig, command: str, columns=None) -> None:
    if cfg.output:
        out = Path(cfg.output)
        emit_results(rows, "csv", out, columns=columns)
        emit_results(rows, "json", out.with_suffix(".json"), meta=_meta(cfg, command))
        log.info("wrote %s and %s", out, out.with_suffix(".json"))
    else:
        _emit({"meta": _meta(cfg, command), "records": rows})


def cmd_green(args, cfg: RunConfig) -> None:
    from .walk import free_green

    x = tuple(args.x) if args.x else (0,) * cfg.d
    if len(x) != cfg.d:
        raise ConfigError("x", f"needs {cfg.d} coordinates")
    est = free_green((0,) * cfg.d, x, tol=cfg.tol)
    _emit({"x": list(x), "value": est.value, "lower": est.lower, "trace": {
        "radii": list(est.radii), "raw": list(est.raw), "extrapolated": list(est.extrapolated)}})


def cmd_capacity(args, cfg: RunConfig) -> None:
    from .experiments import capacity_growth_study
    from .lattice import SiteSet
    from .walk import capacity

    if args.shape == "site":
        rows = [{"shape": "site", "N": 0, "sites": 1,
                 "capacity": capacity(SiteSet.from_sites([(0,) * cfg.d], cfg.d))}]
    else:
        rows = capacity_growth_study(args.shape, cfg.N, cfg.eps, cfg.d)
    _write_tables(rows, cfg, "capacity")


def cmd_sample(args, cfg: RunConfig) -> None:
    from .lattice import BoxRegion
    from .sampler import sample_dirichlet_spectral, sample_gff

    if args.box is None:
        raise ConfigError("box", "required")
    window = BoxRegion.ball(args.box, cfg.d)
    if cfg.law == "gff":
        f = sample_gff(window, cfg.seed, args.index, cfg.kappa)
    else:
        f = sample_dirichlet_spectral(window, cfg.seed, args.index)
    if not cfg.field_output:
        raise ConfigError("field_output", "an output path is required (--out)")
    write_field(f, cfg.field_output)
    log.info("wrote %s", cfg.field_output)
    _emit({"path": cfg.field_output, "shape": list(window.shape), "meta": f.meta})


def cmd_classify(args, cfg: RunConfig) -> None:
    from .lattice import BoxRegion
    from .renormalization import census, classify_window, required_field_box, write_classifications
    from .sampler import sample_gff

    N = cfg.N[0]
    window = BoxRegion.ball(N, cfg.d)
    need = required_field_box(window, cfg.L, cfg.K)
    f = sample_gff(need, cfg.seed, 0, cfg.kappa)
    cls = classify_window(f, window, cfg.L, cfg.K, cfg.eps, cfg.h1, cfg.h2, cfg.C1)
    count, bmap = census(window, cls, cfg.L, cfg.K)
    if cfg.output:
        write_classifications(cls.values(), cfg.output)
    _emit({"meta": _meta(cfg, "classify"), "boxes": len(cls), "bad": count,
           "clusters": [{"size": len(c.sites), "diameter": c.diameter} for c in bmap.clusters]})


def _calibrate_C(cfg: RunConfig) -> float:
    from .experiments import stretch_samples

    vals = stretch_samples(cfg.h, cfg.N[0], cfg.n, rng.derive_seed(cfg.seed, 0xC0), _mc_config(cfg), cfg.workers)
    return 2.0 * float(np.median(vals))


def _mc_config(cfg: RunConfig) -> dict:
    return {"d": cfg.d, "law": cfg.law, "kappa": cfg.kappa, "window_factor": cfg.window_factor}


def cmd_estimate(args, cfg: RunConfig) -> None:
    from .experiments import estimate_h_star, mc_estimate, stretch_tail_curve

    if cfg.event == "hstar":
        br = estimate_h_star(cfg.d, cfg.N, cfg.n, cfg.seed, kappa=cfg.kappa, workers=cfg.workers)
        rows = [{"N": N, "h": h, "p_hat": p} for N in br.sizes for h, p in zip(br.grid, br.table[N])]
        _write_tables(rows, cfg, "estimate")
        log.info("h_* bracket [%g, %g] (%s)", br.h_lo, br.h_hi, br.method)
        return
    if cfg.event == "stretch":
        C = cfg.C if cfg.C is not None else _calibrate_C(cfg)
        curve = stretch_tail_curve(cfg.h, C, cfg.N, cfg.n, cfg.seed, _mc_config(cfg), cfg.workers)
        rows = [dict(r, C=C) for r in curve.rows]
        _write_tables(rows, cfg, "estimate")
        return
    rows = []
    for N in cfg.N:
        ev = {"event": cfg.event, "h": cfg.h}
        if cfg.event == "arm":
            ev["R"] = N
        elif cfg.event == "crossing":
            ev["N"] = N
        elif cfg.event == "lower_bound":
            if cfg.h_star is None:
                raise ConfigError("h_star", "required for lower_bound events")
            ev.update({"N": N, "alpha": cfg.alpha, "eps": cfg.eps, "h_star": cfg.h_star,
                       "delta": cfg.delta, "F_reading": cfg.F_reading, "report": "violation"})
        elif cfg.event != "site":
            raise ConfigError("event", f"unknown event {cfg.event!r}")
        res = mc_estimate(ev, _mc_config(cfg), cfg.n, rng.derive_seed(cfg.seed, N), cfg.workers)
        rows.append(dict(res.record(), N=N))
    _write_tables(rows, cfg, "estimate")


def cmd_tube(args, cfg: RunConfig) -> None:
    from .experiments import build_tube
    from .walk import capacity

    rows = []
    for N in cfg.N:
        t = build_tube(N, cfg.alpha, cfg.eps, cfg.d)
        r1 = t.radii[0]
        P1 = t.pieces(r1)[1].translate(tuple(-c for c in t.pieces(r1)[1].lower)).to_siteset()
        cap = capacity(P1)
        rows.append({"N": N, "alpha": cfg.alpha, "eps": cfg.eps, "r_ball": t.r_ball, "r_U": t.radii[0],
                     "r_V": t.radii[1], "r_W": t.radii[2], "P0": len(t.P0), "U": len(t.U), "V": len(t.V),
                     "W": len(t.W), "cap_P1_rU": cap, "ratio": cap * math.log(N) / N})
    _write_tables(rows, cfg, "tube")


def cmd_fit(args, cfg: RunConfig) -> None:
    from .experiments import fit_decay_models

    with open(args.input, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "N" not in rows[0] or "p_hat" not in rows[0]:
        raise ConfigError("input", "CSV needs columns N and p_hat")
    fits = fit_decay_models([int(r["N"]) for r in rows], [float(r["p_hat"]) for r in rows], cfg.d)
    out = [{"model": k, **v} for k, v in fits.items()]
    _write_tables(out, cfg, "fit")


COMMANDS = {"green": cmd_green, "capacity": cmd_capacity, "sample": cmd_sample, "classify": cmd_classify,
            "estimate": cmd_estimate, "tube": cmd_tube, "fit": cmd_fit}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": "config", "key": exc.key, "message": str(exc)}) + "\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - every failure becomes a machine-readable record
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
