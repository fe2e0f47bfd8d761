"""Command-line driver: INI-style experiment config in, CSV files out.

Config grammar (``configparser`` syntax, ``#`` comments)::

    [amc]         modes = rate fit_a fit_slope; ...   (optional, default table otherwise)
    [gain]        mean_s11, mean_s22, mean_s12, mean_s21, noise_power
    [pathloss]    s0, exponent, separation, noise_power   (instead of [gain])
    [problem]     e1 (value, list "a, b" or range "start:stop:step"), p1,
                  p2max (value or list), b1, b2, margin, schemes
    [grid]        radial_count, band_count, tol, max_regions
    [simulation]  seed, blocks, scheme, power_cap_factor, workers
    [oracle]      instances, n_modes, regions, seed, cap
    [output]      path, workers

Exit status: 0 success, 2 infeasible problem, 1 any other error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amc import AmcTable, default_table
from .baselines import interweave
from .fading import GainModel, PathLossGeometry, gain_model_from_geometry
from .optimizer import (
    ProblemSpec,
    constant_d1_condition,
    constant_power_optimize,
    exhaustive_optimize,
    greedy_optimize,
    random_instance,
)
from .regions import DEFAULT_MAX_REGIONS, RegionGrid, build_grid, product_boundaries
from .simulate import SCHEMES, SimConfig, simulate_scheme

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
COMMANDS = ("optimize", "sweep", "simulate", "compare-oracle", "regions-export")


class ConfigError(ValueError):
    pass


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


# -- config -------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    table: AmcTable
    model: GainModel
    geometry: PathLossGeometry | None
    e1_grid: tuple[float, ...]
    p2max_grid: tuple[float, ...]
    p1: float = 1.0
    b1: float = 1e-5
    b2: float = 1e-5
    margin: float = 2.0
    schemes: tuple[str, ...] = SCHEMES
    radial_count: int = 10
    band_count: int = 30
    tol: float = 1e-10
    max_regions: int = DEFAULT_MAX_REGIONS
    seed: int = 1
    blocks: int = 1_000_000
    scheme: str = "variable"
    power_cap_factor: float = 1e6
    sim_workers: int = 1
    oracle_instances: int = 100
    oracle_modes: int = 3
    oracle_regions: tuple[int, ...] = (4, 6, 8)
    oracle_seed: int = 0
    oracle_cap: int = 10_000_000
    output: Path = field(default_factory=lambda: Path("out"))
    workers: int = 1

    def spec(self, e1: float, p2max: float) -> ProblemSpec:
        return ProblemSpec(e1, self.p1, p2max, self.b1, self.b2, self.margin)


_SCHEMA: dict[str, dict[str, str]] = {
    "amc": {"modes": "str"},
    "gain": {k: "float" for k in ("mean_s11", "mean_s22", "mean_s12", "mean_s21", "noise_power")},
    "pathloss": {"s0": "float", "exponent": "float", "separation": "float", "noise_power": "float"},
    "problem": {
        "e1": "grid",
        "p1": "float",
        "p2max": "grid",
        "b1": "float",
        "b2": "float",
        "margin": "float",
        "schemes": "str",
    },
    "grid": {"radial_count": "int", "band_count": "int", "tol": "float", "max_regions": "int"},
    "simulation": {"seed": "int", "blocks": "int", "scheme": "str", "power_cap_factor": "float", "workers": "int"},
    "oracle": {"instances": "int", "n_modes": "int", "regions": "str", "seed": "int", "cap": "int"},
    "output": {"path": "str", "workers": "int"},
}
_REQUIRED = {"gain": tuple(_SCHEMA["gain"]), "pathloss": ("noise_power",), "problem": ("e1",)}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_.\-]+)\s*[=:]")


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Line number of every section header and key."""
    lines: dict[tuple[str, str | None], int] = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        if line.lstrip().startswith(("#", ";")):
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip().lower()
            lines.setdefault((section, None), no)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[:1].isspace():
            lines.setdefault((section, m.group(1).lower()), no)
    return lines


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, lines):
        self.parser = parser
        self.lines = lines

    def where(self, section: str, key: str | None = None) -> str:
        no = self.lines.get((section, key)) or self.lines.get((section, None))
        return f"line {no}" if no else "line ?"

    def fail(self, section: str, key: str | None, message: str):
        name = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{self.where(section, key)}: {name}: {message}")

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, default=None):
        if not self.has(section, key):
            if default is None:
                self.fail(section, key, "missing required key")
            return default
        return self.parser.get(section, key).strip()

    def number(self, section, key, kind, default=None, low=None, high=None, low_open=False):
        raw = self.raw(section, key, None if default is None else str(default))
        try:
            value = kind(float(raw)) if kind is int and "e" in raw.lower() else kind(raw)
        except ValueError:
            self.fail(section, key, f"expected {kind.__name__}, got {raw!r}")
        self.check_range(section, key, value, low, high, low_open)
        return value

    def check_range(self, section, key, value, low, high, low_open=False):
        if low is not None and (value < low or (low_open and value == low)):
            bound = f"> {low}" if low_open else f">= {low}"
            self.fail(section, key, f"value {value} out of range (need {bound})")
        if high is not None and value >= high:
            self.fail(section, key, f"value {value} out of range (need < {high})")

    def grid(self, section, key, default=None, low=0.0, low_open=False) -> tuple[float, ...]:
        raw = self.raw(section, key, default)
        try:
            if ":" in raw:
                start, stop, step = (float(x) for x in raw.split(":"))
                if step <= 0:
                    raise ValueError
                count = int(np.floor((stop - start) / step + 1e-9)) + 1
                values = tuple(float(round(start + k * step, 12)) for k in range(count))
            else:
                values = tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
        except ValueError:
            self.fail(section, key, f"cannot parse grid {raw!r}")
        if not values:
            self.fail(section, key, "grid is empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            self.fail(section, key, "grid must be strictly increasing")
        for v in values:
            self.check_range(section, key, v, low, None, low_open)
        return values


def _parse_modes(reader: _Reader) -> AmcTable:
    if not reader.has("amc", "modes"):
        return default_table()
    raw = reader.raw("amc", "modes")
    try:
        triples = [tuple(float(x) for x in chunk.split()) for chunk in raw.split(";") if chunk.strip()]
        if any(len(t) != 3 for t in triples):
            raise ValueError("each mode needs 'rate fit_a fit_slope'")
        return AmcTable.from_triples(triples)
    except ValueError as exc:
        reader.fail("amc", "modes", str(exc))


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Validate a config document; ``overrides`` maps ``section.key`` to raw values."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"line {getattr(exc, 'lineno', '?')}: {exc.message.splitlines()[0]}") from None
    lines = _line_index(text)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    reader = _Reader(parser, lines)

    for section in parser.sections():
        if section not in _SCHEMA:
            reader.fail(section, None, "unknown section")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                reader.fail(section, key, "unknown key")
    has_gain, has_path = parser.has_section("gain"), parser.has_section("pathloss")
    if has_gain and has_path:
        reader.fail("pathloss", None, "conflicts with [gain]; give exactly one")
    if not (has_gain or has_path):
        raise ConfigError("line ?: need a [gain] or [pathloss] section")
    if not parser.has_section("problem"):
        raise ConfigError("line ?: [problem] section is required")
    for section, keys in _REQUIRED.items():
        if parser.has_section(section):
            for key in keys:
                reader.raw(section, key)

    geometry = None
    if has_gain:
        means = {k: reader.number("gain", k, float, low=0.0, low_open=True) for k in _SCHEMA["gain"]}
        model = GainModel(**means)
    else:
        geometry = PathLossGeometry(
            s0=reader.number("pathloss", "s0", float, 1.0, low=0.0, low_open=True),
            exponent=reader.number("pathloss", "exponent", float, 3.0, low=0.0, low_open=True),
            tx_separation=reader.number("pathloss", "separation", float, 1.0, low=0.0),
        )
        noise = reader.number("pathloss", "noise_power", float, low=0.0, low_open=True)
        model = gain_model_from_geometry(geometry, noise)

    schemes = tuple(s.strip() for s in reader.raw("problem", "schemes", ",".join(SCHEMES)).split(",") if s.strip())
    for s in schemes:
        if s not in SCHEMES:
            reader.fail("problem", "schemes", f"unknown scheme {s!r}")
    scheme = reader.raw("simulation", "scheme", "variable")
    if scheme not in SCHEMES:
        reader.fail("simulation", "scheme", f"unknown scheme {scheme!r}")
    try:
        regions = tuple(int(x) for x in reader.raw("oracle", "regions", "4,6,8").split(","))
    except ValueError:
        reader.fail("oracle", "regions", "expected comma-separated integers")

    return ExperimentConfig(
        table=_parse_modes(reader),
        model=model,
        geometry=geometry,
        e1_grid=reader.grid("problem", "e1"),
        p2max_grid=reader.grid("problem", "p2max", "2", low_open=True),
        p1=reader.number("problem", "p1", float, 1.0, low=0.0, low_open=True),
        b1=reader.number("problem", "b1", float, 1e-5, low=0.0, high=1.0, low_open=True),
        b2=reader.number("problem", "b2", float, 1e-5, low=0.0, high=1.0, low_open=True),
        margin=reader.number("problem", "margin", float, 2.0, low=1.0),
        schemes=schemes,
        radial_count=reader.number("grid", "radial_count", int, 10, low=1),
        band_count=reader.number("grid", "band_count", int, 30, low=1),
        tol=reader.number("grid", "tol", float, 1e-10, low=0.0, low_open=True),
        max_regions=reader.number("grid", "max_regions", int, DEFAULT_MAX_REGIONS, low=1),
        seed=reader.number("simulation", "seed", int, 1, low=0),
        blocks=reader.number("simulation", "blocks", int, 1_000_000, low=1),
        scheme=scheme,
        power_cap_factor=reader.number("simulation", "power_cap_factor", float, 1e6, low=0.0, low_open=True),
        sim_workers=reader.number("simulation", "workers", int, 1, low=1),
        oracle_instances=reader.number("oracle", "instances", int, 100, low=1),
        oracle_modes=reader.number("oracle", "n_modes", int, 3, low=1),
        oracle_regions=regions,
        oracle_seed=reader.number("oracle", "seed", int, 0, low=0),
        oracle_cap=reader.number("oracle", "cap", int, 10_000_000, low=1),
        output=Path(reader.raw("output", "path", "out")),
        workers=reader.number("output", "workers", int, 1, low=1),
    )


# -- commands -----------------------------------------------------------------------


def design_grid(cfg: ExperimentConfig) -> RegionGrid:
    """Grid with ``band_count`` bands in total (product bands plus auxiliary curves)."""
    g1 = cfg.table.thresholds(cfg.b1 / cfg.margin)
    g2 = cfg.table.thresholds(cfg.b2 / cfg.margin)
    product_bands = product_boundaries(g1, g2).size - 1
    if cfg.band_count < product_bands:
        raise ConfigError(f"line ?: [grid] band_count: need at least {product_bands} bands for this table")
    return build_grid(
        cfg.table,
        cfg.b1,
        cfg.b2,
        cfg.model,
        cfg.radial_count,
        cfg.band_count - product_bands,
        primary_power=cfg.p1,
        margin=cfg.margin,
        tol=cfg.tol,
        max_regions=cfg.max_regions,
    )


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _single(cfg: ExperimentConfig) -> tuple[float, float]:
    if len(cfg.e1_grid) != 1 or len(cfg.p2max_grid) != 1:
        raise ConfigError("line ?: [problem] e1/p2max: this command needs single values, not grids")
    return cfg.e1_grid[0], cfg.p2max_grid[0]


def run_optimize(cfg: ExperimentConfig) -> int:
    e1, p2max = _single(cfg)
    grid = design_grid(cfg)
    spec = cfg.spec(e1, p2max)
    pol = greedy_optimize(grid, spec, record_trace=False)
    g2 = grid.cognitive_thresholds
    rows = []
    for i in range(grid.total):
        k2 = int(pol.k2_mode[i])
        power = 0.0 if k2 == 0 else cfg.p1 * g2[k2] * grid.norm_power[i] * grid.mass[i]
        rows.append(
            (i, k2, int(pol.k1_mode[i]), grid.mass[i], grid.norm_power[i],
             pol.k1_rate[i] * grid.mass[i], grid.rates[k2] * grid.mass[i], power)
        )
    _write_csv(
        cfg.output / "policy.csv",
        ("region", "k2_mode", "k1_mode", "pr", "p", "k1_term", "k2_term", "p2_term"),
        rows,
    )
    _write_csv(
        cfg.output / "summary.csv",
        ("e1", "p2max", "regions", "k1avg", "k2avg", "p2avg", "feasible", "iterations"),
        [(e1, p2max, grid.total, pol.k1avg, pol.k2avg, pol.p2avg, pol.feasible, pol.iterations)],
    )
    return EXIT_OK if pol.feasible else EXIT_INFEASIBLE


def _sweep_point(args):
    cfg, grid, scheme, e1, p2max = args
    spec = cfg.spec(e1, p2max)
    lam = float("nan")
    if scheme == "variable":
        pol = greedy_optimize(grid, spec, check_consistency=False, record_trace=False)
        k2, k1, p2, ok = pol.k2avg, pol.k1avg, pol.p2avg, pol.feasible
    elif scheme == "constant":
        res = constant_power_optimize(cfg.model, cfg.table, spec)
        k2, k1, p2, ok = res.k2avg, res.k1avg, res.power, res.feasible
    else:
        res = interweave(cfg.model, cfg.table, cfg.b1, cfg.b2, cfg.p1, e1, p2max, scheme == "interweave-adaptive")
        if res is None:
            k2 = k1 = p2 = float("nan")
            ok = False
        else:
            k2, k1, p2, ok, lam = res.cognitive_rate, res.primary_rate, p2max, True, res.activity_fraction
    return (e1, p2max, scheme, k2, k1, p2, lam, ok)


def run_sweep(cfg: ExperimentConfig) -> int:
    grid = design_grid(cfg) if "variable" in cfg.schemes else None
    order = {s: j for j, s in enumerate(SCHEMES)}
    jobs = [
        (cfg, grid, s, e1, p2)
        for p2 in cfg.p2max_grid
        for s in sorted(cfg.schemes, key=order.get)
        for e1 in cfg.e1_grid
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    rows.sort(key=lambda r: (r[1], order[r[2]], r[0]))
    _write_csv(
        cfg.output / "sweep.csv",
        ("e1", "p2max", "scheme", "k2avg", "k1avg", "p2avg", "lambda", "feasible"),
        rows,
    )
    return EXIT_OK if any(r[-1] for r in rows) else EXIT_INFEASIBLE


def run_simulate(cfg: ExperimentConfig) -> int:
    e1, p2max = _single(cfg)
    spec = cfg.spec(e1, p2max)
    grid = None
    if cfg.scheme == "variable":
        grid = design_grid(cfg)
        plan = greedy_optimize(grid, spec, check_consistency=False, record_trace=False)
        feasible = plan.feasible
    elif cfg.scheme == "constant":
        plan = constant_power_optimize(cfg.model, cfg.table, spec)
        feasible = plan.feasible
    else:
        plan = interweave(cfg.model, cfg.table, cfg.b1, cfg.b2, cfg.p1, e1, p2max, cfg.scheme == "interweave-adaptive")
        feasible = plan is not None
    if not feasible:
        return EXIT_INFEASIBLE
    sim = SimConfig(
        seed=cfg.seed,
        blocks=cfg.blocks,
        scheme=cfg.scheme,
        margin=cfg.margin,
        power_cap_factor=cfg.power_cap_factor,
        workers=cfg.sim_workers,
    )
    report = simulate_scheme(sim, plan, grid, cfg.model, cfg.table, spec)
    row = report.row()
    _write_csv(cfg.output / "simulate.csv", tuple(row), [tuple(row.values())])
    if grid is not None:
        _write_csv(
            cfg.output / "region_frequencies.csv",
            ("region", "pr", "frequency"),
            [(i, grid.mass[i], report.frequencies[i]) for i in range(grid.total)],
        )
    return EXIT_OK


def run_compare_oracle(cfg: ExperimentConfig) -> int:
    rng = np.random.default_rng(cfg.oracle_seed)
    rows = []
    for k in range(cfg.oracle_instances):
        v0 = cfg.oracle_regions[k % len(cfg.oracle_regions)]
        grid, spec = random_instance(rng, cfg.oracle_modes, v0, structured=k % 3 == 0)
        greedy = greedy_optimize(grid, spec, record_trace=False)
        best = exhaustive_optimize(grid, spec, cap=cfg.oracle_cap)
        g_obj = greedy.k2avg if greedy.feasible else 0.0
        e_obj = best.k2avg if best.feasible else 0.0
        rows.append((k, v0, g_obj, e_obj, e_obj - g_obj, constant_d1_condition(grid), greedy.feasible, best.feasible))
    _write_csv(
        cfg.output / "oracle.csv",
        ("instance", "regions", "greedy_objective", "exhaustive_objective", "gap", "condition_holds",
         "greedy_feasible", "exhaustive_feasible"),
        rows,
    )
    return EXIT_OK


def run_regions_export(cfg: ExperimentConfig) -> int:
    grid = design_grid(cfg)
    rows = []
    for region in grid:
        pairs = sorted(region.rate_set)
        rows.append(
            (region.index, *region.product_range, *region.radial_range, region.mass, region.norm_power,
             region.divergent, region.idle_primary_rate, ";".join(f"{a}:{b}" for a, b in pairs))
        )
    _write_csv(
        cfg.output / "regions.csv",
        ("region", "t_low", "t_high", "w_low", "w_high", "pr", "p", "divergent", "idle_primary_rate", "rate_set"),
        rows,
    )
    return EXIT_OK


_RUNNERS = {
    "optimize": run_optimize,
    "sweep": run_sweep,
    "simulate": run_simulate,
    "compare-oracle": run_compare_oracle,
    "regions-export": run_regions_export,
}


def execute_command(command: str, cfg: ExperimentConfig) -> int:
    if command not in _RUNNERS:
        raise ConfigError(f"unknown command {command!r}")
    return _RUNNERS[command](cfg)


def _parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        out[key.strip().lower()] = value.strip()
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cogamc", description="Cognitive radio AMC rate/power optimization.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", type=Path)
    ap.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config key")
    args = ap.parse_args(argv)
    try:
        cfg = parse_config(args.config.read_text(), _parse_overrides(args.set))
        return execute_command(args.command, cfg)
    except Exception as exc:  # single-line diagnostic, nonzero exit
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
