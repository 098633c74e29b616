"""Monte-Carlo experiment driver, result files and plot-data emission.

Configuration is an INI file (see ``README.md`` for the full schema)::

    [experiment]
    seed = 7
    runs = 10
    variants = dVBEOT, centralized
    out = results/s1

    [scenario]
    id = S1
    rate = 20

    [network]
    nodes = 20
    radius = 0.8

    [filter]
    L = 30

Output directory layout::

    records.csv        one row per (run, scan, node, variant)
    rgwe_by_scan.csv   RGWE per (variant, scan)
    iterations.csv     squared GWD per VB iteration (if [plots] trace_scans)
    sweep_L.csv        squared GWD per consensus-round setting (if [plots] L_values)
    network.txt        the edge list that was used
    summary.json       config echo, provenance string, mean RGWE per variant
"""
import configparser
import csv
import json
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .consensus import generate_network, read_edge_list, write_edge_list
from .dfilter import VARIANTS, AlgorithmVariant, FilterOptions, track
from .errors import ConfigError, EOTrackError
from .metrics import confidence_ellipse, gwd_squared_arrays, rgwe
from .model import ModelConfig, MotionParams
from .simkit import ScenarioConfig, gen_trajectory, scenario_defaults, simulate_measurements

__all__ = [
    "PLOT_KINDS",
    "NetworkSpec",
    "ExperimentConfig",
    "ExperimentResults",
    "load_config",
    "config_to_ini",
    "build_network",
    "run_single",
    "run_experiment",
    "write_results",
    "read_results",
    "emit_plot_data",
]

PLOT_KINDS = ("rgwe-vs-scan", "rgwe-vs-vb-iteration", "rgwe-vs-L", "ellipse")

# Network seed of the reference 20-node graph (see README).
REFERENCE_NETWORK_SEED = 0


@dataclass(frozen=True)
class NetworkSpec:
    nodes: int = 20
    side: float = 2.5
    radius: float = 0.8
    seed: int = REFERENCE_NETWORK_SEED
    edge_list: str = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    variants: tuple = ("dVBEOT", "centralized")
    filter: FilterOptions = field(default_factory=FilterOptions)
    motion: MotionParams = field(default_factory=MotionParams)
    runs: int = 1
    seed: int = 0
    out: str = "results"
    jobs: int = 1
    trace_scans: tuple = ()
    L_values: tuple = ()
    ellipse_every: int = 10

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("experiment.runs", "must be >= 1")
        if self.jobs < 1:
            raise ConfigError("experiment.jobs", "must be >= 1")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError("experiment.variants", f"unknown variant {v!r}")
        if not self.variants:
            raise ConfigError("experiment.variants", "at least one variant required")
        if self.network.edge_list is not None and not Path(self.network.edge_list).is_file():
            raise ConfigError("network.edge_list", f"file not found: {self.network.edge_list}")
        if self.filter.L < 0:
            raise ConfigError("filter.L", "must be >= 0")
        if self.filter.vb_iters < 1:
            raise ConfigError("filter.vb_iters", "must be >= 1")
        if any(t < 0 or t >= self.scenario.scans for t in self.trace_scans):
            raise ConfigError("plots.trace_scans", f"scans must lie in [0, {self.scenario.scans})")

    @property
    def model(self):
        return ModelConfig(d=self.scenario.d, s=self.scenario.s, motion=replace(self.motion, scan_time=self.scenario.scan_time))

    def variant(self, name):
        return AlgorithmVariant(name, self.scenario.R_true if name == "dVBEOT_known_R" else None)


# --- configuration file -------------------------------------------------------

_SCHEMA = {
    "experiment": {"seed": int, "runs": int, "variants": "list", "out": str, "jobs": int},
    "scenario": {
        "id": str, "rate": float, "n_scans": int, "scan_time": float, "sigma": "floats",
        "P_d": float, "scatter": str, "s": float, "speed": float,
    },
    "network": {"nodes": int, "side": float, "radius": float, "seed": int, "edge_list": str},
    "filter": {
        "vb_iters": int, "L": int, "rho": float, "tol": float, "center_stats": bool, "warm_start": bool,
        "init_extension_scale": float, "init_extension_dof": float,
        "prior_noise_scale": float, "prior_noise_dof": float,
    },
    "motion": {"maneuver_correlation": float, "accel_rms": float, "extension_decay": float, "extension_dof": float},
    "plots": {"trace_scans": "ints", "L_values": "ints", "ellipse_every": int},
}


def _convert(section, key, kind, raw):
    path = f"{section}.{key}"
    try:
        if kind == "list":
            return tuple(t.strip() for t in raw.split(",") if t.strip())
        if kind == "floats":
            return tuple(float(t) for t in raw.split(",") if t.strip())
        if kind == "ints":
            return tuple(int(t) for t in raw.split(",") if t.strip())
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(path, f"cannot parse {raw!r}") from None


def _read_ini(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError("<file>", f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError("<file>", str(exc)) from None
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in parser[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            values[(section, key)] = _convert(section, key, _SCHEMA[section][key], raw)
    return values


def load_config(path=None, overrides=None):
    """Build an :class:`ExperimentConfig` from an INI file plus overrides.

    ``overrides`` maps ``"section.key"`` to raw strings (CLI flags) and
    takes precedence over the file.
    """
    values = _read_ini(path)
    for dotted, raw in (overrides or {}).items():
        if raw is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(dotted, "unknown key")
        values[(section, key)] = _convert(section, key, _SCHEMA[section][key], str(raw))

    def pick(section, names):
        return {n: values[(section, n)] for n in names if (section, n) in values}

    sc = pick("scenario", _SCHEMA["scenario"])
    scen_id = sc.pop("id", "S1")
    try:
        base = scenario_defaults(scen_id)
    except EOTrackError as exc:
        raise ConfigError("scenario.id", str(exc)) from None
    if "sigma" in sc:
        sigma = np.asarray(sc.pop("sigma"))
        if sigma.shape != (base.d,) or np.any(sigma <= 0):
            raise ConfigError("scenario.sigma", f"need {base.d} positive standard deviations")
        sc["R_true"] = np.diag(sigma**2)
    try:
        scenario = replace(base, **sc)
    except EOTrackError as exc:
        raise ConfigError("scenario", str(exc)) from None

    try:
        network = NetworkSpec(**pick("network", _SCHEMA["network"]))
        fdefaults = {"vb_iters": 80, "L": 50} if scenario.group else {}
        fdefaults.update(pick("filter", _SCHEMA["filter"]))
        filt = FilterOptions(**fdefaults)
        motion = MotionParams(**pick("motion", _SCHEMA["motion"]))
    except EOTrackError as exc:
        raise ConfigError(getattr(exc, "path", "config"), str(exc)) from None
    exp = pick("experiment", _SCHEMA["experiment"])
    plots = pick("plots", _SCHEMA["plots"])
    try:
        return ExperimentConfig(
            scenario=scenario, network=network, filter=filt, motion=motion,
            **exp, **plots,
        )
    except TypeError as exc:
        raise ConfigError("experiment", str(exc)) from None


def config_to_ini(cfg, include_out=True):
    """Serialise the settings that ``load_config`` understands."""
    sc = cfg.scenario
    lines = [
        "[experiment]",
        *([f"out = {cfg.out}"] if include_out else []),
        f"seed = {cfg.seed}",
        f"runs = {cfg.runs}",
        f"variants = {', '.join(cfg.variants)}",
        f"jobs = {cfg.jobs}",
        "",
        "[scenario]",
        f"id = {sc.scenario}",
        f"rate = {sc.rate!r}",
        f"n_scans = {sc.scans}",
        f"scan_time = {sc.scan_time!r}",
        f"sigma = {', '.join(repr(float(v)) for v in np.sqrt(np.diag(sc.R_true)))}",
        f"P_d = {sc.P_d!r}",
        f"scatter = {sc.scatter}",
        f"s = {sc.s!r}",
        f"speed = {sc.speed!r}",
        "",
        "[network]",
    ]
    for k, v in asdict(cfg.network).items():
        if v is not None:
            lines.append(f"{k} = {v}")
    lines += ["", "[filter]"]
    lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in asdict(cfg.filter).items() if k != "keep_trace"]
    lines += ["", "[motion]"]
    lines += [f"{k} = {getattr(cfg.motion, k)!r}" for k in _SCHEMA["motion"]]
    lines += ["", "[plots]", f"ellipse_every = {cfg.ellipse_every}"]
    if cfg.trace_scans:
        lines.append(f"trace_scans = {', '.join(map(str, cfg.trace_scans))}")
    if cfg.L_values:
        lines.append(f"L_values = {', '.join(map(str, cfg.L_values))}")
    return "\n".join(lines) + "\n"


# --- running --------------------------------------------------------------------

def build_network(spec):
    if spec.edge_list is not None:
        return read_edge_list(spec.edge_list)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x6E6574]))
    return generate_network(spec.nodes, spec.side, spec.radius, rng)


def _truth_shapes(gt, s):
    return gt.center, s * gt.extension


def _squared_errors(res, gt, s):
    mu_t, S_t = _truth_shapes(gt, s)
    return gwd_squared_arrays(res.position, s * res.extension, mu_t[:, None, :], S_t[:, None, :, :])


@dataclass
class ExperimentResults:
    """Flat result tables; every row list is sorted by its leading keys."""

    records: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    sweep: list = field(default_factory=list)
    ellipses: list = field(default_factory=list)
    config: ExperimentConfig = None

    RECORD_FIELDS = ("run", "scan", "node", "variant", "cx", "cy", "X11", "X12", "X22", "R11", "R12", "R22", "gwd2")


def run_single(cfg, run, net=None):
    """All variants on one Monte-Carlo run; returns partial :class:`ExperimentResults`."""
    net = net if net is not None else build_network(cfg.network)
    model = cfg.model
    sc = cfg.scenario
    gt = gen_trajectory(sc)
    stream = simulate_measurements(gt, net.n_nodes, sc, cfg.seed, run)
    out = ExperimentResults()
    for name in cfg.variants:
        variant = cfg.variant(name)
        trace = bool(cfg.trace_scans) and name == cfg.variants[0]
        opts = replace(cfg.filter, keep_trace=trace)
        res = track(stream, net, model, opts, variant)
        err = _squared_errors(res, gt, sc.s)
        for t in range(len(gt)):
            for k in range(net.n_nodes):
                X, R = res.extension[t, k], res.noise[t, k]
                out.records.append((
                    run, t, k, name, res.position[t, k, 0], res.position[t, k, 1],
                    X[0, 0], X[0, 1], X[1, 1], R[0, 0], R[0, 1], R[1, 1], err[t, k],
                ))
        if trace:
            mu_t, S_t = _truth_shapes(gt, sc.s)
            for t in cfg.trace_scans:
                for it, (pos, ext) in enumerate(res.traces[t], 1):
                    e2 = gwd_squared_arrays(pos, sc.s * ext, mu_t[t], S_t[t])
                    out.iterations.append((run, t, it, name, float(np.mean(e2))))
        if run == 0 and cfg.ellipse_every > 0:
            for t in range(0, len(gt), cfg.ellipse_every):
                pts = confidence_ellipse(res.position[t, 0], sc.s * res.extension[t, 0])
                out.ellipses.extend((name, t, "estimate", i, x, y) for i, (x, y) in enumerate(pts))
    if run == 0 and cfg.ellipse_every > 0:
        for t in range(0, len(gt), cfg.ellipse_every):
            pts = confidence_ellipse(gt.center[t], sc.s * gt.extension[t])
            out.ellipses.extend(("truth", t, "truth", i, x, y) for i, (x, y) in enumerate(pts))
    for L in cfg.L_values:
        res = track(stream, net, model, replace(cfg.filter, L=int(L)), cfg.variant("dVBEOT"))
        err = _squared_errors(res, gt, sc.s)
        for t in range(len(gt)):
            out.sweep.append((run, int(L), t, float(np.mean(err[t]))))
    return out


def _run_task(args):
    cfg, run = args
    return run, run_single(cfg, run)


def git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, timeout=10, cwd=Path(__file__).resolve().parent,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def run_experiment(cfg, write=True):
    """Run all Monte-Carlo runs and (optionally) write the result files.

    Completed runs are flushed to ``out/runs/`` as they finish, so a crash
    keeps the work done so far.
    """
    net = build_network(cfg.network)
    if net.n_nodes != cfg.network.nodes and cfg.network.edge_list is None:
        raise ConfigError("network.nodes", "generated network has the wrong size")
    out_dir = Path(cfg.out)
    if write:
        (out_dir / "runs").mkdir(parents=True, exist_ok=True)
    parts = {}
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for run, part in pool.map(_run_task, [(cfg, r) for r in range(cfg.runs)]):
                parts[run] = part
                if write:
                    _write_csv(out_dir / "runs" / f"run_{run:04d}.csv", ExperimentResults.RECORD_FIELDS, part.records)
    else:
        for run in range(cfg.runs):
            parts[run] = run_single(cfg, run, net)
            if write:
                _write_csv(out_dir / "runs" / f"run_{run:04d}.csv", ExperimentResults.RECORD_FIELDS, parts[run].records)
    results = ExperimentResults(config=cfg)
    for run in sorted(parts):
        results.records += parts[run].records
        results.iterations += parts[run].iterations
        results.sweep += parts[run].sweep
        results.ellipses += parts[run].ellipses
    if write:
        write_results(results, out_dir, net)
    return results


# --- aggregation and files --------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def rgwe_by_scan(records):
    """``{variant: [(scan, rgwe), ...]}`` averaging squared errors over nodes, then runs."""
    acc = {}
    for run, t, _, name, *_, e2 in records:
        acc.setdefault(name, {}).setdefault(t, {}).setdefault(run, []).append(e2)
    out = {}
    for name, by_scan in acc.items():
        out[name] = [
            (t, rgwe([float(np.mean(by_scan[t][r])) for r in sorted(by_scan[t])]))
            for t in sorted(by_scan)
        ]
    return out


def mean_rgwe(records):
    """Per-variant average over scans of the per-scan RGWE."""
    return {name: float(np.mean([v for _, v in rows])) for name, rows in rgwe_by_scan(records).items()}


def summarise(results):
    cfg = results.config
    by_scan = rgwe_by_scan(results.records)
    return {
        "provenance": git_describe(),
        "config": config_to_ini(cfg, include_out=False) if cfg is not None else None,
        "mean_rgwe": {k: float(np.mean([v for _, v in rows])) for k, rows in by_scan.items()},
        "scans": {k: len(rows) for k, rows in by_scan.items()},
    }


def write_results(results, out_dir, net=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "records.csv", ExperimentResults.RECORD_FIELDS, results.records)
    rows = [(name, t, v) for name, items in rgwe_by_scan(results.records).items() for t, v in items]
    _write_csv(out_dir / "rgwe_by_scan.csv", ("variant", "scan", "rgwe"), rows)
    if results.iterations:
        _write_csv(out_dir / "iterations.csv", ("run", "scan", "iteration", "variant", "gwd2"), results.iterations)
    if results.sweep:
        _write_csv(out_dir / "sweep_L.csv", ("run", "L", "scan", "gwd2"), results.sweep)
    if results.ellipses:
        _write_csv(out_dir / "ellipses.csv", ("variant", "scan", "kind", "point", "x", "y"), results.ellipses)
    if net is not None:
        write_edge_list(net, out_dir / "network.txt")
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summarise(results), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_results(out_dir):
    """Load the tables written by :func:`write_results`."""
    out_dir = Path(out_dir)
    path = out_dir / "records.csv"
    if not path.is_file():
        raise EOTrackError(f"no results in {out_dir}")
    res = ExperimentResults()
    _, rows = _read_csv(path)
    res.records = [
        (int(r[0]), int(r[1]), int(r[2]), r[3], *map(float, r[4:])) for r in rows
    ]
    if (out_dir / "iterations.csv").is_file():
        _, rows = _read_csv(out_dir / "iterations.csv")
        res.iterations = [(int(r[0]), int(r[1]), int(r[2]), r[3], float(r[4])) for r in rows]
    if (out_dir / "sweep_L.csv").is_file():
        _, rows = _read_csv(out_dir / "sweep_L.csv")
        res.sweep = [(int(r[0]), int(r[1]), int(r[2]), float(r[3])) for r in rows]
    if (out_dir / "ellipses.csv").is_file():
        _, rows = _read_csv(out_dir / "ellipses.csv")
        res.ellipses = [(r[0], int(r[1]), r[2], int(r[3]), float(r[4]), float(r[5])) for r in rows]
    return res


def emit_plot_data(results, kind, out_dir):
    """Write the delimited table behind one figure type; returns the file path."""
    if kind not in PLOT_KINDS:
        raise EOTrackError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{kind}.csv"
    if kind == "rgwe-vs-scan":
        rows = [(name, t, v) for name, items in rgwe_by_scan(results.records).items() for t, v in items]
        _write_csv(path, ("variant", "scan", "rgwe"), rows)
    elif kind == "rgwe-vs-vb-iteration":
        if not results.iterations:
            raise EOTrackError("no VB-iteration traces; set [plots] trace_scans")
        acc = {}
        for run, t, it, name, e2 in results.iterations:
            acc.setdefault((name, t, it), []).append(e2)
        rows = [(name, t, it, rgwe(v)) for (name, t, it), v in sorted(acc.items())]
        _write_csv(path, ("variant", "scan", "iteration", "rgwe"), rows)
    elif kind == "rgwe-vs-L":
        if not results.sweep:
            raise EOTrackError("no consensus-round sweep; set [plots] L_values")
        acc = {}
        for run, L, t, e2 in results.sweep:
            acc.setdefault(L, {}).setdefault(t, []).append(e2)
        rows = [(L, float(np.mean([rgwe(v) for v in acc[L].values()]))) for L in sorted(acc)]
        _write_csv(path, ("L", "rgwe"), rows)
    else:
        if not results.ellipses:
            raise EOTrackError("no ellipse data; set [plots] ellipse_every > 0")
        _write_csv(path, ("variant", "scan", "kind", "point", "x", "y"), results.ellipses)
    return path
