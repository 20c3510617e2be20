"""``maxgap`` command line: run tests on CSV data, run campaigns, generate data.

Exit status: 0 accept (or success), 1 reject, 2 usage or data error,
3 internal failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from maxgap import __version__
from maxgap.experiments import (
    CampaignConfig,
    as_path,
    mc_contiguous,
    mc_coupling,
    mc_level,
    mc_limit_law,
    mc_power,
    mc_random_size,
    power_curve,
    spec_to_dict,
    to_jsonable,
)
from maxgap.geometry import CUBE, ReferenceShape
from maxgap.io import DataError, read_points, write_points
from maxgap.sampling import (
    CappedBall,
    Contiguous,
    CosineField,
    HoleBall,
    Uniform,
    ZeroField,
    sample_alternative,
)
from maxgap.stats import TestConfig, nn_test, run_test

logger = logging.getLogger("maxgap")

EXIT_ACCEPT, EXIT_REJECT, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)


def _shape(kind: str, beta: float | None) -> ReferenceShape:
    if kind == "cube":
        if beta not in (None, 0, 0.0):
            raise ConfigError("beta must be 0 for the cube")
        return CUBE
    if kind == "ball":
        return ReferenceShape.ball(0.0 if beta is None else beta)
    raise ConfigError(f"unknown shape {kind!r}")


# ---------------------------------------------------------------- specs


def _field(h: dict | None):
    h = dict(h or {"kind": "cosine"})
    kind = h.pop("kind", "cosine")
    if kind == "cosine":
        return CosineField(**h)
    if kind == "zero":
        return ZeroField()
    raise ConfigError(f"unknown field kind {kind!r}")


def build_spec(spec: dict | None, d: int, n: int | None = None):
    """Alternative spec from its config dictionary (see README for keys)."""
    spec = dict(spec or {"kind": "uniform"})
    kind = spec.pop("kind", "uniform")
    try:
        if kind == "uniform":
            return Uniform(d)
        if kind in ("hole", "capped"):
            center = spec.pop("center", None)
            level = spec.pop("level", 0.0)
            if "volume" in spec:
                vol = spec.pop("volume")
                out = (
                    HoleBall.with_volume(vol, d, center)
                    if kind == "hole"
                    else CappedBall.with_volume(vol, d, level, center)
                )
            else:
                radius = spec.pop("radius")
                center = (0.5,) * d if center is None else center
                out = HoleBall(center, radius) if kind == "hole" else CappedBall(center, radius, level)
            if out.dim != d:
                raise ConfigError(f"spec center has dimension {out.dim}, expected {d}")
        elif kind == "contiguous":
            out = Contiguous(_field(spec.pop("h", None)), spec.pop("n", n), d)
        else:
            raise ConfigError(f"unknown spec kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"spec {kind!r} is missing {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"bad spec parameters: {exc}") from None
    if spec:
        raise ConfigError(f"unknown spec keys: {sorted(spec)}")
    return out


# ---------------------------------------------------------------- test


def cmd_test(args) -> int:
    cloud = read_points(args.points)
    n = cloud.n
    if args.nn:
        if n < 2:
            raise DataError(f"nearest-neighbour test needs at least 2 points, got {n}")
        res = nn_test(cloud, args.alpha)
        shape = None
    else:
        if n < 3:
            raise DataError(f"spacing test needs at least 3 points, got {n}")
        shape = _shape(args.shape, args.beta)
        res = run_test(cloud, TestConfig(args.alpha, shape, args.tol))
    verdict = "REJECT uniformity" if res.reject else "accept uniformity"
    name = "nearest-neighbour ball volume" if args.nn else "maximal spacing volume"
    print(f"{verdict}: {name} {res.statistic:.6g} vs critical value {res.critical_value:.6g}")
    print(f"  n={res.n} d={res.d} T={res.standardized:.4f} p={res.p_value:.4g}"
          + (" (borderline)" if res.borderline else ""))

    manifest = {
        "command": "test",
        "config": {
            "input": str(args.points),
            "alpha": args.alpha,
            "shape": None if shape is None else {"kind": shape.kind, "beta": shape.beta},
            "tol": args.tol,
            "nn": args.nn,
        },
        "version": __version__,
        "seed": None,
        "timestamps": {"finished": _now()},
    }
    out = Path(args.report) if args.report else Path(str(args.points) + ".report.json")
    out.write_text(_dumps({"manifest": manifest, "body": res}) + "\n", encoding="utf-8")
    return EXIT_REJECT if res.reject else EXIT_ACCEPT


# ---------------------------------------------------------------- simulate

_COMMON = {"seed", "workers"}
_KEYS = {
    "level": {"n", "d", "reps", "alpha", "shape", "beta", "tol", "method"},
    "power": {"n", "d", "reps", "alpha", "shape", "beta", "tol", "method", "spec", "n_grid"},
    "limit-law": {"n", "d", "reps", "alpha", "shape", "beta", "tol", "method", "t_grid", "nn"},
    "coupling": {"n", "d", "reps", "epsilon", "spec", "shape", "beta", "tol", "spacings"},
    "random-size": {"n", "d", "reps", "k_fraction", "perturbation_scale", "shape", "beta", "tol", "method"},
    "contiguous": {"n", "d", "reps", "h", "spacing", "shape", "beta", "tol"},
    "as-path": {"n_grid", "d", "shape", "beta", "tol", "method"},
}


def _resolve_seed(flag, cfg) -> int:
    if flag is not None:
        return flag
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get("MAXGAP_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"MAXGAP_SEED={env!r} is not an integer") from None
    return 0


def _campaign_config(cfg, seed, spec_default="uniform"):
    d = int(cfg["d"])
    spec = build_spec(cfg.get("spec", {"kind": spec_default}), d, cfg.get("n"))
    return CampaignConfig(
        n=int(cfg["n"]),
        d=d,
        reps=int(cfg["reps"]),
        alpha=float(cfg.get("alpha", 0.05)),
        shape=_shape(cfg.get("shape", "cube"), cfg.get("beta")),
        spec=spec,
        base_seed=seed,
        tol=cfg.get("tol"),
        method=cfg.get("method", "auto"),
    )


def _tsv(path: Path, header, rows):
    lines = ["\t".join(header)]
    lines += ["\t".join(repr(float(v)) if isinstance(v, float) else str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_campaign(kind: str, cfg: dict, seed: int, workers: int | None):
    """Run one campaign; returns ``(body, {filename: (header, rows)})``."""
    unknown = set(cfg) - _KEYS[kind] - _COMMON
    if unknown:
        raise ConfigError(f"unknown keys for {kind}: {sorted(unknown)}")
    tables = {}
    if kind == "level":
        body = mc_level(_campaign_config(cfg, seed), workers).to_dict()
    elif kind == "power":
        cc = _campaign_config(cfg, seed, spec_default="hole")
        body = mc_power(cc, workers).to_dict()
        if "n_grid" in cfg:
            curve = power_curve(cc, cfg["n_grid"], workers)
            body["power_curve"] = curve
            tables["power_curve.tsv"] = (["n", "rate", "se"], [[r["n"], r["rate"], r["se"]] for r in curve])
    elif kind == "limit-law":
        kw = {"nn": bool(cfg.get("nn", False))}
        if "t_grid" in cfg:
            kw["t_grid"] = cfg["t_grid"]
        body = mc_limit_law(_campaign_config(cfg, seed), workers=workers, **kw).to_dict()
        tables["cdf.tsv"] = (["t", "empirical_cdf", "gumbel_cdf"], body["extra"]["cdf_table"])
        if kw["nn"]:
            tables["nn_cdf.tsv"] = (["t", "empirical_cdf", "gumbel_cdf"], body["extra"]["nn"]["cdf_table"])
    elif kind == "coupling":
        d = int(cfg.get("d", 2))
        spec = build_spec(cfg.get("spec", {"kind": "capped", "volume": 0.1, "level": 0.4}), d)
        if not isinstance(spec, CappedBall) or isinstance(spec, HoleBall):
            raise ConfigError("coupling needs a capped spec")
        body = mc_coupling(
            int(cfg["n"]), float(cfg["epsilon"]), spec, int(cfg["reps"]), seed,
            shape=_shape(cfg.get("shape", "cube"), cfg.get("beta")), tol=cfg.get("tol"),
            spacings=bool(cfg.get("spacings", True)), workers=workers,
        ).to_dict()
        body["spec"] = spec_to_dict(spec)
    elif kind == "random-size":
        body = mc_random_size(
            int(cfg["n"]), float(cfg.get("k_fraction", 0.5)), float(cfg.get("perturbation_scale", 1.0)),
            int(cfg["reps"]), int(cfg.get("d", 1)), seed,
            shape=_shape(cfg.get("shape", "cube"), cfg.get("beta")), tol=cfg.get("tol"),
            method=cfg.get("method", "auto"), workers=workers,
        ).to_dict()
    elif kind == "contiguous":
        body = mc_contiguous(
            _field(cfg.get("h")), int(cfg["n"]), int(cfg.get("d", 1)), int(cfg["reps"]), seed,
            spacing=cfg.get("spacing"), shape=_shape(cfg.get("shape", "cube"), cfg.get("beta")),
            tol=cfg.get("tol"), workers=workers,
        ).to_dict()
    elif kind == "as-path":
        path = as_path(
            cfg["n_grid"], int(cfg["d"]), _shape(cfg.get("shape", "cube"), cfg.get("beta")), seed,
            tol=cfg.get("tol"), method=cfg.get("method", "auto"),
        )
        body = {"path": to_jsonable(path)}
        tables["path.tsv"] = (
            ["n", "volume", "ratio", "loglog_ratio"],
            [[p.n, p.volume, p.ratio, p.loglog_ratio] for p in path],
        )
    else:
        raise ConfigError(f"unknown campaign {kind!r}")
    return body, tables


def cmd_simulate(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    seed = _resolve_seed(args.seed, cfg)
    workers = args.workers if args.workers is not None else cfg.get("workers", os.cpu_count())
    started = _now()
    try:
        body, tables = run_campaign(args.campaign, cfg, seed, workers)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, KeyError):
            exc = ConfigError(f"missing config key {exc}")
        raise ConfigError(str(exc)) from None

    resolved = {k: v for k, v in cfg.items() if k not in _COMMON}
    manifest = {
        "command": f"simulate {args.campaign}",
        "config": resolved,
        "version": __version__,
        "seed": seed,
        "workers": workers,
        "timestamps": {"started": started, "finished": _now()},
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(_dumps({"manifest": manifest, "body": body}) + "\n", encoding="utf-8")
    for name, (header, rows) in tables.items():
        _tsv(out / name, header, rows)
    summary = {k: body[k] for k in ("rejection_rate", "rejection_se", "ks_distance") if k in body}
    print(f"simulate {args.campaign}: wrote {out / 'report.json'} {json.dumps(summary)}")
    return EXIT_ACCEPT


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    spec = {"kind": args.spec}
    for key in ("center", "radius", "volume", "level"):
        val = getattr(args, key)
        if val is not None:
            spec[key] = val
    if args.spec == "contiguous":
        spec["h"] = {"kind": "cosine", "axis": args.h_axis, "freq": args.h_freq, "amplitude": args.h_amplitude}
    elif args.spec == "hole" and "radius" not in spec and "volume" not in spec:
        raise ConfigError("hole spec needs --radius or --volume")
    spec_obj = build_spec(spec, args.d, args.n)
    cloud = sample_alternative(spec_obj, args.n, args.seed)
    try:
        write_points(args.out, cloud)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from None
    print(f"wrote {cloud.n} points in {cloud.dim}-D to {args.out}")
    return EXIT_ACCEPT


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxgap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test a CSV point cloud for uniformity")
    t.add_argument("points")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--shape", choices=["cube", "ball"], default="cube")
    t.add_argument("--beta", type=float, default=None)
    t.add_argument("--tol", type=float, default=None)
    t.add_argument("--nn", action="store_true", help="nearest-neighbour ball test")
    t.add_argument("--report", default=None, help="JSON report path (default: <points>.report.json)")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run a Monte Carlo campaign")
    s.add_argument("campaign", choices=sorted(_KEYS))
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", default="maxgap_out")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("gen", help="generate a point cloud")
    g.add_argument("--spec", choices=["uniform", "hole", "capped", "contiguous"], default="uniform")
    g.add_argument("--center", type=float, nargs="+", default=None)
    g.add_argument("--radius", type=float, default=None)
    g.add_argument("--volume", type=float, default=None)
    g.add_argument("--level", type=float, default=None)
    g.add_argument("--h-axis", type=int, default=0)
    g.add_argument("--h-freq", type=int, default=1)
    g.add_argument("--h-amplitude", type=float, default=1.0)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", 0) is None and args.command == "gen":
        try:
            args.seed = _resolve_seed(None, {})
        except ConfigError as exc:
            print(f"maxgap: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except (DataError, ConfigError, FileNotFoundError) as exc:
        print(f"maxgap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # validation failures raised below the CLI layer
        print(f"maxgap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal failure")
        print(f"maxgap: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
