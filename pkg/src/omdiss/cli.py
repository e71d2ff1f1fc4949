"""Batch experiment runner: ``omdiss <kind> [--config FILE] [overrides]``.

Each run writes one directory holding ``manifest.json`` (the fully resolved
configuration), CSV tables and gnuplot scripts that render them.  Numbers
in the tables are written with 10 significant digits.

Exit codes: 0 success, 2 configuration error, 3 runtime failure of the run
as a whole (individual cell failures are recorded in the tables instead).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .classical import IntegrationControls, initial_state, integrate, write_trajectory_csv
from .errors import ConfigError, OmdissError, ParameterError
from .experiments import (detuning_landmarks, evaluate, optimize_detuning, sideband_scan,
                          steady_scan)
from .params import Bath, SystemParams, normal_modes
from .sync import SyncConfig, sync_map, sync_threshold, write_heatmap_script, write_sync_csv

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["Axis", "ExperimentSpec", "KINDS", "default_spec", "load_config", "run", "main"]

log = logging.getLogger("omdiss")

KINDS = ("trajectory", "syncmap", "syncthreshold", "steady", "detuning-scan", "power-scan",
         "optimize-detuning", "sideband-scan")
DIGITS = 10
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

# Parameter sets of the two regimes studied: self-sustained oscillation (sync)
# and linearized quantum fluctuations (entanglement and cooling).
OSCILLATION_PARAMS = dict(omega_m=1.0, gamma=0.01, kc=0.0, delta0=1.0, power=0.36)
QUANTUM_PARAMS = dict(omega_m=3.0, gamma=3e-5, kc=9.0, delta0=-3.0, power=12.0, n_th=9.508)

SYNC_OPTIONS = {f.name for f in fields(SyncConfig)} - {"controls", "seed"} | {"rtol", "atol"}
OPTIONS = {
    "trajectory": {"t_end", "dt_sample", "displacement", "rtol", "atol"},
    "syncmap": SYNC_OPTIONS,
    "syncthreshold": SYNC_OPTIONS | {"kc_lo", "kc_hi", "rel_tol"},
    "steady": set(),
    "detuning-scan": set(),
    "power-scan": set(),
    "optimize-detuning": {"delta_lo", "delta_hi", "n_grid", "tol"},
    "sideband-scan": {"kc_ratio", "q_m", "power_lo", "power_hi", "n_grid"},
}
AXES = {
    "trajectory": (),
    "syncmap": ("delta_omega", "kc"),
    "syncthreshold": ("delta_omega",),
    "steady": (),
    "detuning-scan": ("delta0",),
    "power-scan": ("power",),
    "optimize-detuning": ("kc_ratio",),
    "sideband-scan": ("omega_m",),
}


@dataclass(frozen=True)
class Axis:
    """Ordered sample points of one swept quantity."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ConfigError("axis has no points")
        if not all(math.isfinite(v) for v in self.values):
            raise ConfigError("axis values must be finite")

    @classmethod
    def linspace(cls, start: float, stop: float, num: int, log: bool = False) -> "Axis":
        if num < 1:
            raise ConfigError("axis needs num >= 1")
        if log:
            if not (start > 0 and stop > 0):
                raise ConfigError("log axis needs positive bounds")
            pts = np.geomspace(start, stop, num)
        else:
            pts = np.linspace(start, stop, num)
        return cls(tuple(float(v) for v in pts))

    @classmethod
    def parse(cls, spec: Any) -> "Axis":
        """From a list of values or a mapping ``{start, stop, num[, log]}`` / ``{values}``."""
        if isinstance(spec, Axis):
            return spec
        if isinstance(spec, Mapping):
            if "values" in spec:
                return cls(tuple(float(v) for v in spec["values"]))
            try:
                return cls.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]),
                                    bool(spec.get("log", False)))
            except KeyError as exc:
                raise ConfigError(f"axis mapping lacks {exc.args[0]!r}") from None
        if isinstance(spec, (list, tuple)):
            return cls(tuple(float(v) for v in spec))
        raise ConfigError(f"cannot interpret axis {spec!r}")

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    params: SystemParams
    out: Path
    axes: dict = field(default_factory=dict)
    baths: tuple = (Bath.SEPARATE, Bath.COMMON)
    workers: int = 1
    seed: int | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        axes = {k: Axis.parse(v) for k, v in self.axes.items()}
        missing = set(AXES[self.kind]) - set(axes)
        extra = set(axes) - set(AXES[self.kind])
        if missing or extra:
            raise ConfigError(f"{self.kind} needs axes {list(AXES[self.kind])}, got {sorted(axes)}")
        unknown = set(self.options) - OPTIONS[self.kind]
        if unknown:
            raise ConfigError(f"unknown options for {self.kind}: {sorted(unknown)}")
        if not self.baths:
            raise ConfigError("at least one bath kind is required")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "baths", tuple(Bath.parse(b) for b in self.baths))
        object.__setattr__(self, "out", Path(self.out))

    def resolved(self) -> dict:
        return {
            "kind": self.kind,
            "version": __version__,
            "params": {k: v for k, v in self.params.as_dict().items() if k != "bath"},
            "axes": {k: list(a.values) for k, a in self.axes.items()},
            "baths": [b.value for b in self.baths],
            "seed": self.seed,
            "options": dict(self.options),
        }


def _default_axes(kind: str) -> dict:
    return {
        "syncmap": {"delta_omega": Axis.linspace(0.005, 0.05, 10), "kc": Axis.linspace(0.0, 0.1, 10)},
        "syncthreshold": {"delta_omega": Axis.linspace(0.005, 0.05, 10)},
        "detuning-scan": {"delta0": Axis.linspace(-6.0, -0.5, 64)},
        "power-scan": {"power": Axis.linspace(0.1, 300.0, 64, log=True)},
        "optimize-detuning": {"kc_ratio": Axis((0.2, 0.6, 1.0))},
        "sideband-scan": {"omega_m": Axis.linspace(1.0, 10.0, 10)},
    }.get(kind, {})


def default_spec(kind: str, out: str | Path = "omdiss-run") -> ExperimentSpec:
    """Spec reproducing the corresponding study at its reference parameters."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    base = OSCILLATION_PARAMS if kind in ("trajectory", "syncmap", "syncthreshold") else QUANTUM_PARAMS
    return ExperimentSpec(kind=kind, params=SystemParams.from_mapping(base), out=Path(out),
                          axes=_default_axes(kind))


def load_config(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None


def build_spec(kind: str, config: Mapping | None = None, overrides: Mapping | None = None,
               out: str | Path | None = None, workers: int | None = None,
               seed: int | None = None) -> ExperimentSpec:
    """Merge defaults, a parsed config mapping and command-line overrides (in that order)."""
    spec = default_spec(kind)
    config = dict(config or {})
    if config.pop("kind", kind) != kind:
        raise ConfigError(f"config is for a different experiment kind than {kind!r}")
    unknown = set(config) - {"params", "axes", "options", "baths", "out", "workers", "seed"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    params = {k: v for k, v in spec.params.as_dict().items() if k != "bath"}
    for layer in (config.get("params", {}),
                  {k: v for k, v in (overrides or {}).items() if v is not None and k != "bath"}):
        if "omega_m" in layer:
            # a shared frequency replaces both per-unit values from earlier layers
            params.pop("omega_m1", None)
            params.pop("omega_m2", None)
        params.update(layer)
    baths = config.get("baths", spec.baths)
    if overrides and overrides.get("bath"):
        baths = (overrides["bath"],)
    axes = dict(spec.axes)
    axes.update(config.get("axes", {}))
    try:
        system = SystemParams.from_mapping(params)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentSpec(
        kind=kind,
        params=system,
        out=Path(out if out is not None else config.get("out", spec.out)),
        axes=axes,
        baths=tuple(baths),
        workers=int(workers if workers is not None else config.get("workers", 1)),
        seed=seed if seed is not None else config.get("seed"),
        options=dict(config.get("options", {})),
    )


# ---------------------------------------------------------------------------
# output helpers

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{DIGITS}g}"
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _line_script(path: Path, csv_name: str, x: str, ys: Sequence[str], header: Sequence[str],
                 logx: bool = False) -> Path:
    cols = {name: i + 1 for i, name in enumerate(header)}
    plots = ", ".join(f"'{csv_name}' using {cols[x]}:{cols[y]} with linespoints title '{y}'"
                      for y in ys)
    path.write_text(
        f"set datafile separator ','\n"
        f"set xlabel '{x}'\n"
        + ("set logscale x\n" if logx else "")
        + f"set terminal pngcairo size 800,600\n"
        f"set output '{path.stem}.png'\n"
        f"plot {plots}\n"
    )
    return path


QUANTUM_COLUMNS = ("bath", "omega_m", "gamma", "kc", "delta0", "power", "n_th", "e_n_mech",
                   "e_n_optmech", "n_eff", "residual", "stable", "status")


def _quantum_row(p: SystemParams, res, status: str) -> list:
    head = [p.bath.value, p.omega_m1, p.gamma, p.kc, p.delta0, p.power, p.n_th]
    if res is None:
        return head + [None, None, None, None, 0, status]
    return head + [res.e_n_mech, res.e_n_optmech, res.n_eff, res.residual, 1, status]


# ---------------------------------------------------------------------------
# experiment kinds

def _sync_config(spec: ExperimentSpec) -> SyncConfig:
    opts = {k: v for k, v in spec.options.items() if k in SYNC_OPTIONS - {"rtol", "atol"}}
    controls = IntegrationControls(rtol=spec.options.get("rtol", 1e-9),
                                   atol=spec.options.get("atol", 1e-12))
    return SyncConfig(seed=spec.seed, controls=controls, **opts)


def _run_trajectory(spec: ExperimentSpec, p: SystemParams, tag: str) -> list[Path]:
    o = spec.options
    controls = IntegrationControls(rtol=o.get("rtol", 1e-9), atol=o.get("atol", 1e-12))
    s0 = initial_state(o.get("displacement", 0.01), seed=spec.seed)
    traj = integrate(s0, p, float(o.get("t_end", 500.0)), float(o.get("dt_sample", 0.05)), controls)
    csv_path = write_trajectory_csv(traj, spec.out / f"trajectory_{tag}.csv", digits=DIGITS)
    script = _line_script(spec.out / f"trajectory_{tag}.gp", csv_path.name, "t", ["x1", "x2"],
                          ("t", "re_a1", "im_a1", "re_a2", "im_a2", "x1", "p1", "x2", "p2"))
    return [csv_path, script]


def _run_syncmap(spec: ExperimentSpec, p: SystemParams, tag: str) -> list[Path]:
    recs = sync_map(p, spec.axes["delta_omega"].values, spec.axes["kc"].values,
                    _sync_config(spec), workers=spec.workers)
    csv_path = write_sync_csv(recs, spec.out / f"syncmap_{tag}.csv", digits=DIGITS)
    return [csv_path, write_heatmap_script(csv_path.name, spec.out / f"syncmap_{tag}.gp")]


def _threshold_cell(args):
    p, dw, kc_range, config, rel_tol = args
    try:
        return dw, sync_threshold(p, dw, kc_range, config, rel_tol=rel_tol), "ok"
    except OmdissError as exc:
        return dw, None, type(exc).__name__


def _run_syncthreshold(spec: ExperimentSpec, p: SystemParams, tag: str) -> list[Path]:
    from .experiments import parallel_map

    o = spec.options
    kc_range = (float(o.get("kc_lo", 0.0)), float(o.get("kc_hi", 0.5)))
    config = _sync_config(spec)
    cells = [(p, dw, kc_range, config, float(o.get("rel_tol", 1e-2)))
             for dw in spec.axes["delta_omega"]]
    rows = parallel_map(_threshold_cell, cells, spec.workers)
    csv_path = _write_csv(spec.out / f"syncthreshold_{tag}.csv",
                          ("delta_omega", "kc_threshold", "status"), rows)
    script = _line_script(spec.out / f"syncthreshold_{tag}.gp", csv_path.name, "delta_omega",
                          ["kc_threshold"], ("delta_omega", "kc_threshold", "status"))
    return [csv_path, script]


def _run_scan(spec: ExperimentSpec, p: SystemParams, tag: str) -> list[Path]:
    axis = AXES[spec.kind][0]
    recs = steady_scan(p, axis, spec.axes[axis].values, workers=spec.workers)
    rows = [_quantum_row(p.replace(**r.coords), r.result, r.status) for r in recs]
    stem = spec.kind.replace("-", "_")
    csv_path = _write_csv(spec.out / f"{stem}_{tag}.csv", QUANTUM_COLUMNS, rows)
    script = _line_script(spec.out / f"{stem}_{tag}.gp", csv_path.name, axis,
                          ["e_n_mech", "n_eff"], QUANTUM_COLUMNS, logx=axis == "power")
    return [csv_path, script]


OPT_COLUMNS = ("bath", "kc_ratio", "delta0_entanglement", "e_n_max", "entanglement_boundary",
               "delta0_cooling", "n_eff_min", "cooling_boundary", "minus_omega_bar",
               "minus_omega_plus", "n_unstable", "status")


def _run_optimize_detuning(spec: ExperimentSpec, p: SystemParams, tag: str) -> list[Path]:
    o = spec.options
    w = p.omega_m
    rows = []
    for ratio in spec.axes["kc_ratio"]:
        q = p.replace(kc=ratio * w * w)
        marks = detuning_landmarks(q)
        lo = float(o.get("delta_lo", -2.0 * normal_modes(q).omega_minus))
        hi = float(o.get("delta_hi", -0.5 * w))
        try:
            r = optimize_detuning(q, (lo, hi), n_grid=int(o.get("n_grid", 128)),
                                  tol=float(o.get("tol", 1e-5)), workers=spec.workers)
        except OmdissError as exc:
            rows.append([q.bath.value, ratio] + [None] * 6
                        + [marks["minus_omega_bar"], marks["minus_omega_plus"], None,
                           type(exc).__name__])
            continue
        e, c = r.entanglement, r.cooling
        rows.append([q.bath.value, ratio, e.arg, e.value, e.boundary, c.arg, c.value, c.boundary,
                     marks["minus_omega_bar"], marks["minus_omega_plus"], r.n_unstable, "ok"])
    csv_path = _write_csv(spec.out / f"optimize_detuning_{tag}.csv", OPT_COLUMNS, rows)
    script = _line_script(spec.out / f"optimize_detuning_{tag}.gp", csv_path.name, "kc_ratio",
                          ["delta0_entanglement", "delta0_cooling", "minus_omega_bar",
                           "minus_omega_plus"], OPT_COLUMNS)
    return [csv_path, script]


SIDEBAND_COLUMNS = ("omega_m", "curve", "power_entanglement", "e_n_max", "g_entanglement",
                    "entanglement_boundary", "power_cooling", "n_eff_min", "g_cooling",
                    "cooling_boundary", "status")


def _run_sideband(spec: ExperimentSpec) -> list[Path]:
    o = spec.options
    recs = sideband_scan(spec.axes["omega_m"].values, kc_ratio=float(o.get("kc_ratio", 0.5)),
                         q_m=float(o.get("q_m", 1e5)), n_th=spec.params.n_th,
                         power_range=(float(o.get("power_lo", 1e-2)), float(o.get("power_hi", 1e7))),
                         n_grid=int(o.get("n_grid", 256)), workers=spec.workers)
    rows = []
    for rec in recs:
        if rec.result is None:
            rows.append([rec.omega_m, rec.curve] + [None] * 8 + [rec.status])
            continue
        e, c = rec.result.entanglement, rec.result.cooling
        rows.append([rec.omega_m, rec.curve, e.arg, e.value, e.g_over_omega, e.boundary,
                     c.arg, c.value, c.g_over_omega, c.boundary, rec.status])
    csv_path = _write_csv(spec.out / "sideband.csv", SIDEBAND_COLUMNS, rows)
    cols = {name: i + 1 for i, name in enumerate(SIDEBAND_COLUMNS)}
    script = spec.out / "sideband.gp"
    plots = ", ".join(
        f"'{csv_path.name}' using {cols['omega_m']}:(strcol({cols['curve']}) eq '{c}' ? "
        f"${cols['n_eff_min']} : 1/0) with linespoints title '{c}'" for c in ("sb", "cb", "single"))
    script.write_text(
        "set datafile separator ','\nset xlabel 'omega_m'\nset ylabel 'min n_eff'\n"
        "set terminal pngcairo size 800,600\nset output 'sideband.png'\n"
        f"plot {plots}\n")
    return [csv_path, script]


def run(spec: ExperimentSpec) -> Path:
    """Execute ``spec`` and return the path of the manifest it wrote."""
    spec.out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    if spec.kind == "steady":
        rows = []
        for bath in spec.baths:
            p = spec.params.replace(bath=bath)
            res, status = evaluate(p)
            rows.append(_quantum_row(p, res, status))
        files.append(_write_csv(spec.out / "steady.csv", QUANTUM_COLUMNS, rows))
    elif spec.kind == "sideband-scan":
        files.extend(_run_sideband(spec))
    else:
        runner = {
            "trajectory": _run_trajectory,
            "syncmap": _run_syncmap,
            "syncthreshold": _run_syncthreshold,
            "detuning-scan": _run_scan,
            "power-scan": _run_scan,
            "optimize-detuning": _run_optimize_detuning,
        }[spec.kind]
        for bath in spec.baths:
            files.extend(runner(spec, spec.params.replace(bath=bath), bath.value))
    manifest = spec.resolved()
    manifest["files"] = [f.name for f in files]
    path = spec.out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# command line

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omdiss", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"{kind} experiment")
        sp.add_argument("--config", type=Path, help="TOML file with params/axes/options tables")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--workers", type=int, help="process pool size (default 1)")
        sp.add_argument("--seed", type=int, help="seed for randomized initial conditions")
        sp.add_argument("--omega-m", type=float, dest="omega_m")
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--kc", type=float)
        sp.add_argument("--delta0", type=float)
        sp.add_argument("--power", type=float)
        sp.add_argument("--nth", type=float, dest="n_th")
        sp.add_argument("--bath", choices=("sb", "cb"), help="restrict to one bath kind")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in ("omega_m", "gamma", "kc", "delta0", "power",
                                               "n_th", "bath")}
    try:
        config = load_config(args.config) if args.config else {}
        spec = build_spec(args.kind, config, overrides, out=args.out, workers=args.workers,
                          seed=args.seed)
    except (ConfigError, ParameterError, ValueError, TypeError) as exc:
        print(f"omdiss: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(spec)
    except (OmdissError, OSError) as exc:
        print(f"omdiss: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
