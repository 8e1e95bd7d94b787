"""``gravcat`` command line.

Exit codes: 0 success, 2 usage, 3 unreadable/malformed input, 4 computation
error. Failures print one JSON object on stderr prefixed with ``error: ``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as gio
from ._backend import default_threads, set_threads
from .access import (
    DEFAULT_THRESHOLDS,
    aggregate,
    contour_overestimation,
    threshold_sweep,
    zonal_accessibility,
)
from .efficiency import DEFAULT_VMAX_MPH, ModalSpeedLimit, efficiency, ideal_accessibility
from .equity import improvement_potential, rank_shift, sedi, sedi_weighted_population
from .errors import GravcatError, InsufficientData, ParseError
from .impedance import ImpedanceParams, ParamsRegistry, duration_cdf, fit
from .model import DEFAULT_MAX_THRESHOLD, Mode, Region, population_weights
from .netgen import DEFAULT_OPPORTUNITIES, Profile, SyntheticCity, generate, travel_time_matrix

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_COMPUTE = 0, 2, 3, 4

# impedance written by `synth` so a fresh synthetic city runs end to end
SYNTH_ALPHA, SYNTH_BETA = 0.008, 1.467

# flags that steer execution but never change results
_NON_PARAMETERS = {"threads", "config", "out", "table_out", "cdf_out", "out_dir", "func", "command"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _floats(text):
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if any(not math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("values must be finite")
    return vals


def _names(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _shape(text):
    try:
        a, b = str(text).lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AxB, got {text!r}") from None


def _vmax(text):
    """``60`` or ``drive=60,walk=4``."""
    text = str(text)
    if "=" not in text:
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad --vmax {text!r}") from None
    out = {}
    for part in _names(text):
        k, _, v = part.partition("=")
        try:
            out[Mode.parse(k).value] = float(v)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad --vmax entry {part!r}") from None
    return out


def _data_args(p, *, matrix=True, params=False, demographics=False):
    p.add_argument("--data-dir", default=".", help="directory holding default-named inputs (default: .)")
    p.add_argument("--zones", help="zones.csv (default: DATA_DIR/zones.csv)")
    p.add_argument("--opportunities", help="opportunities.csv (default: DATA_DIR/opportunities.csv)")
    if matrix:
        p.add_argument("--matrix", help="matrix CSV or .gcat cache (default: DATA_DIR/matrix_MODE.csv)")
        p.add_argument("--max-threshold", type=float, default=DEFAULT_MAX_THRESHOLD,
                       help="prune bound applied when reading a CSV matrix (minutes, default 90)")
    if params:
        p.add_argument("--params", help="params.json (default: DATA_DIR/params.json)")
        p.add_argument("--contour", action="store_true", help="use the contour measure f(t)=1 instead of params")
        p.add_argument("--purpose", help="impedance purpose key (default: the opportunity kind)")
    if demographics:
        p.add_argument("--demographics", help="demographics.csv (default: DATA_DIR/demographics.csv)")
    p.add_argument("--region", help="zone ids: comma list or a file with one id per line (default: all zones)")
    p.add_argument("--basis", choices=("population", "workers"), default="population")


def _common(p):
    p.add_argument("--out", default="-", help="output path; .geojson selects GeoJSON (default: stdout)")
    p.add_argument("--threads", type=int, default=None, help="parallel threads (default: $GRAVCAT_THREADS or all cores)")
    p.add_argument("--config", help="JSON file whose keys mirror this command's flags")


def build_parser():
    parser = argparse.ArgumentParser(prog="gravcat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gravcat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic city and its travel-time matrices")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid", type=_shape, default=(10, 10), help="ROWSxCOLS lattice (default 10x10)")
    g.add_argument("--radial", type=_shape, help="RINGSxSPOKES ring-and-spoke layout")
    p.add_argument("--spacing", type=float, default=1.0, help="zone spacing in km")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pop-gamma", type=float, default=0.05, help="population decay rate per km from the core")
    p.add_argument("--opp-gamma", type=float, help="override every opportunity kind's decay rate")
    p.add_argument("--noise", type=float, default=0.0, help="lognormal sigma applied to counts")
    p.add_argument("--speed-factor", type=float, default=0.8, help="edge speed as a share of the modal maximum")
    p.add_argument("--sprawl", type=float, default=0.0, help="share of road edges removed")
    p.add_argument("--sprawl-slowdown", type=float, default=0.0, help="speed loss at the city edge")
    p.add_argument("--origin", type=_floats, default=[41.8781, -87.6298], help="LAT,LON of the core")
    p.add_argument("--modes", type=_names, default=["drive", "walk", "bike"])
    p.add_argument("--max-threshold", type=float, default=DEFAULT_MAX_THRESHOLD)
    p.add_argument("--binary", action="store_true", help="also write .gcat matrix caches")
    p.add_argument("--out-dir", default=".", help="where to write the city files (default: .)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit impedance parameters from trips.csv")
    p.add_argument("--trips", default="trips.csv")
    p.add_argument("--bin-width", type=float, default=5.0)
    p.add_argument("--purpose", help="restrict to one purpose")
    p.add_argument("--mode", help="restrict to one mode")
    p.add_argument("--cdf-out", help="write smoothed duration CDFs (purpose,mode,t,cdf)")
    p.add_argument("--smoothing", type=float, default=5.0, help="CDF moving-average window in minutes")
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("access", help="zonal accessibility at one threshold")
    _data_args(p, params=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--mode", required=True, type=Mode.parse)
    p.add_argument("--tau", required=True, type=float)
    _common(p)
    p.set_defaults(func=cmd_access)

    p = sub.add_parser("sweep", help="zonal accessibility at several thresholds")
    _data_args(p, params=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--mode", required=True, type=Mode.parse)
    p.add_argument("--taus", type=_floats, default=list(DEFAULT_THRESHOLDS))
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("aggregate", help="population-weighted regional accessibility from a results file")
    p.add_argument("--results", required=True)
    p.add_argument("--zones")
    p.add_argument("--data-dir", default=".")
    p.add_argument("--region")
    p.add_argument("--region-name", default="all")
    p.add_argument("--basis", choices=("population", "workers"), default="population")
    _common(p)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("contour-compare", help="percent overestimation of the contour measure")
    _data_args(p, params=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--mode", required=True, type=Mode.parse)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--tau", type=float)
    g.add_argument("--taus", type=_floats)
    p.add_argument("--table-out", help="per-threshold summary (tau,mean,median,max,undefined)")
    _common(p)
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("efficiency", help="observed vs frictionless accessibility")
    _data_args(p, params=True)
    p.add_argument("--kind", required=True, type=_names, help="one or more kinds, comma separated")
    p.add_argument("--mode", required=True, type=_names, help="one or more modes, comma separated")
    p.add_argument("--tau", required=True, type=float)
    p.add_argument("--vmax", type=_vmax, help="mi/h: a number, or MODE=V list (default drive 60, walk 4, bike 16)")
    p.add_argument("--table-out", help="aggregate efficiency table: rows kind, columns mode")
    _common(p)
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("sedi", help="socio-economic disadvantage index")
    p.add_argument("--data-dir", default=".")
    p.add_argument("--demographics")
    p.add_argument("--region")
    _common(p)
    p.set_defaults(func=cmd_sedi)

    p = sub.add_parser("improve", help="opportunity improvement potential")
    _data_args(p, params=True)
    p.add_argument("--kind", required=True, help="opportunity kind whose impedance applies")
    p.add_argument("--mode", required=True, type=Mode.parse)
    p.add_argument("--tau", required=True, type=float)
    p.add_argument("--sedi", help="sedi CSV; enables SEDI-weighted population")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="SEDI weight strength (default 1)")
    _common(p)
    p.set_defaults(func=cmd_improve)

    p = sub.add_parser("rank-shift", help="rank difference between unweighted and SEDI-weighted potentials")
    p.add_argument("--unweighted", required=True)
    p.add_argument("--weighted", required=True)
    _common(p)
    p.set_defaults(func=cmd_rank_shift)
    return parser, sub


# ---------------------------------------------------------------------------
# run context
# ---------------------------------------------------------------------------


class Run:
    """Resolved inputs plus the audit trail written into every output."""

    def __init__(self, args):
        self.args = args
        self.inputs = {}
        self.resolved = {}

    def path(self, attr, default_name):
        value = getattr(self.args, attr, None)
        p = Path(value) if value else Path(getattr(self.args, "data_dir", ".")) / default_name
        if not p.exists():
            raise UsageError(f"input file not found: {p}")
        self.inputs[str(p)] = gio.file_digest(p)
        return p

    def metadata(self):
        params = {k: _jsonable(v) for k, v in sorted(vars(self.args).items()) if k not in _NON_PARAMETERS}
        meta = {"tool": f"gravcat {__version__}", "command": self.args.command, "parameters": params,
                "inputs": dict(sorted(self.inputs.items()))}
        if self.resolved:
            meta["impedance"] = dict(sorted(self.resolved.items()))
        return meta

    def zones(self):
        return gio.parse_zones(self.path("zones", "zones.csv"))

    def opportunities(self):
        return gio.parse_opportunities(self.path("opportunities", "opportunities.csv"))

    def matrix(self, mode, zone_ids):
        mode = Mode.parse(mode)
        given = getattr(self.args, "matrix", None)
        if given:
            p = self.path("matrix", "")
        else:
            base = Path(self.args.data_dir)
            p = base / f"matrix_{mode.value}.csv"
            if not p.exists() and (base / f"matrix_{mode.value}.gcat").exists():
                p = base / f"matrix_{mode.value}.gcat"
            if not p.exists():
                raise UsageError(f"input file not found: {p}")
            self.inputs[str(p)] = gio.file_digest(p)
        return gio.load_matrix(p, mode, self.args.max_threshold, zone_ids)

    def impedance(self, kind, mode):
        mode = Mode.parse(mode)
        purpose = getattr(self.args, "purpose", None) or kind
        if getattr(self.args, "contour", False):
            params = ImpedanceParams.contour_measure(purpose, mode)
        else:
            params = gio.parse_params(self.path("params", "params.json")).get(purpose, mode)
        self.resolved[f"{purpose}/{mode.value}"] = {"alpha": params.alpha, "beta": params.beta,
                                                    "contour": params.contour}
        return params

    def region(self, zones):
        spec = getattr(self.args, "region", None)
        if not spec:
            return Region.of(zones)
        p = Path(spec)
        if p.exists():
            self.inputs[str(p)] = gio.file_digest(p)
            ids = [ln.split(",")[0].strip() for ln in p.read_text(encoding="utf-8").splitlines()]
            ids = [z for z in ids if z and z != "zone_id" and not z.startswith("#")]
        else:
            ids = _names(spec)
        region = Region(ids)
        region.validate(zones)
        return region


def _jsonable(v):
    if isinstance(v, Mode):
        return v.value
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _is_geojson(out):
    return str(out).lower().endswith((".geojson", ".json"))


def _emit_results(run, results, zones):
    meta = run.metadata()
    out = run.args.out
    if _is_geojson(out):
        gio.write_geojson(zones, gio.result_records(results), out, meta)
    else:
        gio.write_results(results, _dst(out), meta)


def _emit_table(run, header, rows, zones=None, out=None):
    out = out or run.args.out
    meta = run.metadata()
    if zones is not None and _is_geojson(out):
        gio.write_geojson(zones, (dict(zip(header, r)) for r in rows), out, meta)
    else:
        gio.write_table(header, rows, _dst(out), meta)


def _dst(out):
    return sys.stdout if out in (None, "-") else out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(run):
    a = run.args
    opps = dict(DEFAULT_OPPORTUNITIES)
    if a.opp_gamma is not None:
        opps = {k: Profile.core_peaked(a.opp_gamma, v.scale) for k, v in opps.items()}
    if len(a.origin) != 2:
        raise UsageError("--origin expects LAT,LON")
    common = dict(spacing_km=a.spacing, origin_lat=a.origin[0], origin_lon=a.origin[1],
                  population=Profile.core_peaked(a.pop_gamma, 1500.0), opportunities=opps, noise=a.noise,
                  speed_factor=a.speed_factor, sprawl=a.sprawl, sprawl_slowdown=a.sprawl_slowdown, seed=a.seed)
    if a.radial:
        cfg = SyntheticCity(layout="radial", rings=a.radial[0], spokes=a.radial[1], **common)
    else:
        cfg = SyntheticCity(layout="grid", rows=a.grid[0], cols=a.grid[1], **common)
    modes = [Mode.parse(m) for m in a.modes]
    city = generate(cfg)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gio.write_zones(city.zones, out / "zones.csv")
    gio.write_opportunities(city.opportunities, out / "opportunities.csv")
    gio.write_demographics(city.factors, out / "demographics.csv")
    for m in modes:
        matrix = travel_time_matrix(city.graph, m, a.max_threshold)
        gio.write_matrix(matrix, out / f"matrix_{m.value}.csv")
        if a.binary:
            gio.write_matrix_binary(matrix, out / f"matrix_{m.value}.gcat")
    reg = ParamsRegistry(ImpedanceParams(SYNTH_ALPHA, SYNTH_BETA, k, m)
                         for k in city.opportunities.kinds for m in Mode)
    gio.write_params(reg, out / "params.json")
    meta = run.metadata()
    meta["city"] = cfg.to_json()
    meta["connected_components"] = city.graph.n_components
    (out / "city.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if not city.graph.connected:
        print(f"warning: road graph has {city.graph.n_components} connected components", file=sys.stderr)


def cmd_fit(run):
    a = run.args
    trips = gio.parse_trips(run.path("trips", "trips.csv"))
    keys = trips.keys()
    if a.purpose:
        keys = [k for k in keys if k[0] == a.purpose]
    if a.mode:
        m = Mode.parse(a.mode).value
        keys = [k for k in keys if k[1] == m]
    fitted, cdf_rows = [], []
    for purpose, mode in keys:
        try:
            fitted.append(fit(trips, purpose, mode, a.bin_width))
        except GravcatError as exc:
            print(f"warning: skipping ({purpose}, {mode}): {exc}", file=sys.stderr)
        if a.cdf_out:
            t, c = duration_cdf(trips, purpose, mode, a.smoothing)
            cdf_rows.extend((purpose, mode, float(x), float(y)) for x, y in zip(t, c))
    if not fitted:
        raise InsufficientData("no (purpose, mode) group had enough trips to fit")
    gio.write_params(fitted, _dst(a.out))
    if a.cdf_out:
        gio.write_table(("purpose", "mode", "t", "cdf"), cdf_rows, a.cdf_out, run.metadata())


def _load_access_inputs(run, mode):
    zones = run.zones()
    opps = run.opportunities()
    matrix = run.matrix(mode, [z.id for z in zones])
    region = run.region(zones)
    return zones, opps, matrix, region


def cmd_access(run):
    a = run.args
    zones, opps, matrix, region = _load_access_inputs(run, a.mode)
    params = run.impedance(a.kind, a.mode)
    result = zonal_accessibility(region, matrix, opps, a.kind, params, a.tau)
    _emit_results(run, [result], zones)


def cmd_sweep(run):
    a = run.args
    zones, opps, matrix, region = _load_access_inputs(run, a.mode)
    params = run.impedance(a.kind, a.mode)
    results = threshold_sweep(region, matrix, opps, a.kind, params, a.taus)
    _emit_results(run, list(results.values()), zones)


def cmd_aggregate(run):
    a = run.args
    zones = run.zones()
    results = gio.parse_results(run.path("results", ""))
    region = run.region(zones)
    p = population_weights(region, zones, a.basis)
    rows = [(a.region_name, r.kind, Mode.parse(r.mode).value, r.tau, a.basis, aggregate(region, r, p))
            for r in results]
    _emit_table(run, ("region", "kind", "mode", "tau", "basis", "value"), rows)


def cmd_contour(run):
    a = run.args
    zones, opps, matrix, region = _load_access_inputs(run, a.mode)
    if a.contour:
        raise UsageError("contour-compare needs gravity parameters; drop --contour")
    params = run.impedance(a.kind, a.mode)
    taus = a.taus or ([a.tau] if a.tau is not None else list(DEFAULT_THRESHOLDS))
    rows, summary = [], []
    for tau in taus:
        ov = contour_overestimation(region, matrix, opps, a.kind, params, tau)
        for z, g, c in zip(region.zone_ids, ov.gravity.values.tolist(), ov.contour.values.tolist()):
            rows.append((z, a.kind, a.mode.value, float(tau), g, c, ov.percent.get(z)))
        pct = np.array(list(ov.percent.values()))
        summary.append((float(tau), float(pct.mean()) if pct.size else None,
                        float(np.median(pct)) if pct.size else None,
                        float(pct.max()) if pct.size else None, len(ov.undefined)))
    _emit_table(run, ("zone_id", "kind", "mode", "tau", "gravity", "contour", "overestimation_pct"), rows, zones)
    if a.table_out:
        _emit_table(run, ("tau", "mean_pct", "median_pct", "max_pct", "undefined"), summary, out=a.table_out)


def cmd_efficiency(run):
    a = run.args
    zones = run.zones()
    opps = run.opportunities()
    region = run.region(zones)
    p = population_weights(region, zones, a.basis)
    modes = [Mode.parse(m) for m in a.mode]
    if isinstance(a.vmax, float) and len(modes) > 1:
        raise UsageError("a single --vmax applies to one mode; use MODE=V,... for several")
    rows, table = [], {}
    for mode in modes:
        matrix = run.matrix(mode, [z.id for z in zones])
        if isinstance(a.vmax, float):
            v = a.vmax
        elif isinstance(a.vmax, dict) and mode.value in a.vmax:
            v = a.vmax[mode.value]
        else:
            v = DEFAULT_VMAX_MPH[mode]
        speed = ModalSpeedLimit(mode, v)
        for kind in a.kind:
            params = run.impedance(kind, mode)
            obs = zonal_accessibility(region, matrix, opps, kind, params, a.tau)
            ideal = ideal_accessibility(region, zones, opps, kind, params, speed, a.tau)
            eff = efficiency(region, obs, ideal, p)
            flagged = set(eff.flagged)
            for z, o, i in zip(region.zone_ids, obs.values.tolist(), ideal.values.tolist()):
                rows.append((z, kind, mode.value, float(a.tau), o, i, eff.zonal[z], int(z in flagged)))
            table[(kind, mode.value)] = eff.aggregate
    _emit_table(run, ("zone_id", "kind", "mode", "tau", "observed", "ideal", "efficiency", "flagged"), rows, zones)
    if a.table_out:
        cols = [m.value for m in modes]
        trows = [(kind,) + tuple(table[(kind, m)] for m in cols) for kind in a.kind]
        _emit_table(run, ("kind",) + tuple(cols), trows, out=a.table_out)


def cmd_sedi(run):
    factors = gio.parse_demographics(run.path("demographics", "demographics.csv"))
    spec = run.args.region
    if spec:
        region = Region(_names(spec) if not Path(spec).exists() else
                        [ln.split(",")[0].strip() for ln in Path(spec).read_text(encoding="utf-8").splitlines()
                         if ln.strip() and ln.split(",")[0].strip() != "zone_id"])
    else:
        region = Region(sorted(factors.values))
    table = sedi(factors, region)
    if _is_geojson(run.args.out):
        zones = gio.parse_zones(run.path("zones", "zones.csv"))
        gio.write_geojson(zones, ({"zone_id": z, "sedi": table.values[z]} for z in table.region),
                          run.args.out, run.metadata())
    else:
        gio.write_sedi(table, _dst(run.args.out), run.metadata())


def cmd_improve(run):
    a = run.args
    zones = run.zones()
    matrix = run.matrix(a.mode, [z.id for z in zones])
    region = run.region(zones)
    params = run.impedance(a.kind, a.mode)
    if a.sedi:
        table = gio.parse_sedi(run.path("sedi", ""))
        p = sedi_weighted_population(zones, table, region, a.lam, a.basis)
        weighting = "sedi"
    else:
        p = population_weights(region, zones, a.basis)
        weighting = "unweighted"
    ip = improvement_potential(region, matrix, params, a.tau, p, weighting)
    if _is_geojson(a.out):
        recs = ({"zone_id": z, "gradient": g, "rank": int(r), "weighting": weighting}
                for z, g, r in zip(ip.zone_ids, ip.gradient.tolist(), ip.rank.tolist()))
        gio.write_geojson(zones, recs, a.out, run.metadata())
    else:
        gio.write_improvement(ip, _dst(a.out), run.metadata())


def cmd_rank_shift(run):
    a = run.args
    u = gio.parse_improvement(run.path("unweighted", ""))
    w = gio.parse_improvement(run.path("weighted", ""))
    gio.write_rank_shift(rank_shift(u, w), _dst(a.out), run.metadata())


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _error(kind, exc, code):
    info = {"error": kind, "exit": code, "message": getattr(exc, "message", str(exc))}
    if isinstance(exc, ParseError):
        info.update({"file": exc.source, "line": exc.line, "column": exc.column})
    print("error: " + json.dumps(info, sort_keys=True), file=sys.stderr)
    return code


def _apply_config(parser, subparsers, argv, args):
    try:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read --config {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("--config must hold a JSON object")
    sp = subparsers.choices[args.command]
    known = {act.dest: act for act in sp._actions}
    defaults = {}
    for key, value in data.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("help", "config"):
            raise UsageError(f"unknown key {key!r} in --config for {args.command}")
        act = known[dest]
        if act.type is not None and isinstance(value, (str, int, float)) and not isinstance(value, bool):
            try:
                value = act.type(str(value)) if act.type in (_floats, _names, _shape, _vmax) else act.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key!r} in --config: {exc}") from None
        if dest in ("kind", "mode", "tau", "results", "unweighted", "weighted"):
            act.required = False
        defaults[dest] = value
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        if "--config" in argv:
            # required flags may come from the config file
            for sp in subparsers.choices.values():
                for act in sp._actions:
                    if act.required and act.dest != "command":
                        act.required = False
            args = parser.parse_args(argv)
            args = _apply_config(parser, subparsers, argv, args)
            missing = [d for d in ("kind", "mode", "tau", "results", "unweighted", "weighted")
                       if hasattr(args, d) and getattr(args, d) is None and _was_required(args.command, d)]
            if missing:
                raise UsageError(f"missing required option --{missing[0].replace('_', '-')}")
        else:
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        return _error("UsageError", exc, EXIT_USAGE)

    set_threads(args.threads if args.threads else default_threads())
    try:
        args.func(Run(args))
    except UsageError as exc:
        return _error("UsageError", exc, EXIT_USAGE)
    except ParseError as exc:
        return _error(type(exc).__name__, exc, EXIT_PARSE)
    except GravcatError as exc:
        return _error(type(exc).__name__, exc, EXIT_COMPUTE)
    except (ValueError, KeyError) as exc:
        return _error(type(exc).__name__, exc, EXIT_COMPUTE)
    except OSError as exc:
        return _error(type(exc).__name__, exc, EXIT_PARSE)
    return EXIT_OK


_REQUIRED = {
    "access": {"kind", "mode", "tau"},
    "sweep": {"kind", "mode"},
    "contour-compare": {"kind", "mode"},
    "efficiency": {"kind", "mode", "tau"},
    "improve": {"kind", "mode", "tau"},
    "aggregate": {"results"},
    "rank-shift": {"unweighted", "weighted"},
}


def _was_required(command, dest):
    return dest in _REQUIRED.get(command, ())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


def main_exit():  # console-script entry
    sys.exit(main())
