"""Command-line experiment driver.

    monitor-lab <experiment> --config run.yaml [--seed N] [--workers N] [--out DIR]

Each run writes ``<experiment>.csv``, the fully resolved ``config.yaml`` and
``metadata.json`` (version, seed, wall time) into the output directory.
Exit codes: 0 ok, 1 invariant violation, 2 usage or config error,
3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__, circuit, learn, mincut, statmech
from .errors import ConfigError, InvariantViolation, ResourceCapError
from .haar import RandomStream

TOL = 1e-9

# experiment -> {key: default}; the default's type is the key's type
SCHEMAS: dict[str, dict] = {
    "purity-growth": dict(L=20, d=2, t_max=4, samples=2000, cut=None),
    "entanglement-growth": dict(
        L=10, d=2, depth=10, p=0.0, n="2", region="half", samples=200
    ),
    "statmech-check": dict(Q=2, d=[2, 3, 5], t_max=6, p=0.0, width=None),
    "mincut-percolation": dict(
        sizes=[8, 16, 32, 64],
        p_grid=[0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65],
        samples=2000,
        bootstrap=500,
    ),
    "learnability": dict(
        L=[6, 8], p=[0.0, 0.25, 0.5, 0.75, 1.0], depth="2L", d=2, games=1000,
        initial="haar",
    ),
    "ancilla-probe": dict(
        L=[8], p=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5], depth="2L", d=2, samples=100,
        initial="haar",
    ),
}
COMMON = dict(seed=0, workers=1, out="results")


# --- configuration -----------------------------------------------------------


def _check_type(key, value, default):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, list):
        if not isinstance(value, list):
            value = [value]
        ok = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    else:
        # string keys also take numbers ("2L" or 3 for a depth, 2 or "vN" for n)
        ok = isinstance(value, (str, int, float)) and not isinstance(value, bool)
    if not ok:
        raise ConfigError(key, f"expected {type(default).__name__}, got {value!r}")
    return value


def resolve_config(experiment: str, file_values: dict, overrides: dict) -> dict:
    """Defaults, then file keys, then command-line flags; unknown keys are errors."""
    schema = {**SCHEMAS[experiment], **COMMON}
    config = {"experiment": experiment, **schema}
    for source in (file_values, overrides):
        for key, value in source.items():
            if key == "experiment":
                if value != experiment:
                    raise ConfigError(key, f"config is for {value!r}, not {experiment!r}")
                continue
            if key not in schema:
                raise ConfigError(key, "unknown key")
            config[key] = _check_type(key, value, schema[key])
    for key in ("seed", "workers"):
        if not isinstance(config[key], int) or config[key] < 0:
            raise ConfigError(key, "must be a non-negative integer")
    return config


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping of keys to values")
    return data


def _positive(config, *keys):
    for key in keys:
        if not isinstance(config[key], int) or config[key] < 1:
            raise ConfigError(key, "must be a positive integer")


def _rate(config, key):
    vals = config[key] if isinstance(config[key], list) else [config[key]]
    if any(not 0.0 <= v <= 1.0 for v in vals):
        raise ConfigError(key, "measurement rates must lie in [0, 1]")


# --- experiments -------------------------------------------------------------


def run_purity_growth(cfg, stream):
    _positive(cfg, "L", "d", "t_max", "samples")
    cut = cfg["cut"] if cfg["cut"] is not None else cfg["L"] // 2
    if not 0 < cut < cfg["L"]:
        raise ConfigError("cut", "must split the chain into two non-empty parts")
    est = circuit.purity_growth_estimator(
        cfg["L"], cfg["d"], cfg["t_max"], cfg["samples"], cut, stream, cfg["workers"]
    )
    if np.any(est.mean <= 0) or np.any(est.mean > 1 + TOL):
        raise InvariantViolation("mean purity left (0, 1]")
    header = ["t", "mean_purity", "stderr", "samples", "closed_form"]
    rows = [
        [int(t), m, e, est.count, statmech.purity_closed_form(cfg["d"], int(t))]
        for t, m, e in zip(est.t, est.mean, est.stderr)
    ]
    return header, rows


def _region(cfg):
    L, reg = cfg["L"], cfg["region"]
    if reg == "half":
        return tuple(range(L // 2))
    if isinstance(reg, str):
        try:
            a, b = (int(x) for x in reg.split(":"))
        except ValueError:
            raise ConfigError("region", "use 'half' or 'a:b'") from None
        if not 0 <= a < b <= L:
            raise ConfigError("region", f"range {a}:{b} outside the chain")
        return tuple(range(a, b))
    raise ConfigError("region", "use 'half' or 'a:b'")


def _entropy_index(cfg):
    n = cfg["n"]
    if isinstance(n, str):
        if n.lower() in ("vonneumann", "vn"):
            return "vonNeumann"
        try:
            n = float(n)
        except ValueError:
            raise ConfigError("n", "Renyi index must be a number or 'vonNeumann'") from None
    if n < 0:
        raise ConfigError("n", "Renyi index must be >= 0")
    return n


def run_entanglement_growth(cfg, stream):
    _positive(cfg, "L", "d", "samples")
    _rate(cfg, "p")
    region, n = _region(cfg), _entropy_index(cfg)
    spec = circuit.CircuitSpec(cfg["L"], cfg["d"], cfg["depth"], cfg["p"])
    est = circuit.entanglement_growth_curve(spec, region, n, cfg["samples"], stream, cfg["workers"])
    if np.any(est.mean < -TOL):
        raise InvariantViolation("negative mean entropy")
    header = ["t", "mean_entropy", "stderr", "samples", "mincut_bound"]
    rows = []
    for t, m, e in zip(est.t, est.mean, est.stderr):
        # measurements only lower the cut, so the unmeasured one bounds every trajectory
        g = mincut.CutGraph(cfg["L"], int(t), np.zeros((2 * int(t), cfg["L"]), dtype=bool))
        bound = mincut.percolation_entropy(mincut.minimal_cut(g, region), cfg["d"])
        if m > bound + TOL:
            raise InvariantViolation(f"entropy {m} above the minimal-cut bound {bound} at t={t}")
        rows.append([int(t), m, e, est.count, bound])
    return header, rows


def run_statmech_check(cfg, stream):
    _positive(cfg, "Q", "t_max")
    _rate(cfg, "p")
    header = ["d", "t", "ratio", "closed_form", "abs_diff"]
    rows = []
    for d in cfg["d"]:
        d = int(d)
        for t in range(1, cfg["t_max"] + 1):
            width = cfg["width"] or 4 * t + 4
            model = statmech.LatticeModel(cfg["Q"], d, width, t, cfg["p"])
            bc = statmech.BoundaryConfig(tuple(range(width // 2)), n=cfg["Q"])
            ratio = math.exp(statmech.log_ratio(model, bc))
            closed = float(statmech.purity_closed_form(d, t))
            diff = abs(ratio - closed)
            exact_case = cfg["Q"] == 2 and cfg["p"] == 0.0 and cfg["width"] is None
            if exact_case and diff > 1e-10 * closed:
                raise InvariantViolation(f"contraction misses the closed form at d={d}, t={t}")
            rows.append([d, t, ratio, closed, diff])
    return header, rows


def run_mincut_percolation(cfg, stream):
    _positive(cfg, "samples", "bootstrap")
    _rate(cfg, "p_grid")
    est = mincut.estimate_pc(
        [int(x) for x in cfg["sizes"]], cfg["p_grid"], cfg["samples"], stream,
        cfg["bootstrap"], cfg["workers"],
    )
    header = [
        "L", "p", "samples", "mean_cut", "mean_cut_stderr", "prob_zero",
        "p_c", "p_c_low", "p_c_high",
    ]
    rows = [
        [int(L), float(p), est.num_samples, est.mean_cut[i, j], est.mean_cut_stderr[i, j],
         est.prob_zero[i, j], est.p_c, est.ci_low, est.ci_high]
        for i, L in enumerate(est.sizes)
        for j, p in enumerate(est.p_grid)
    ]
    return header, rows


def run_learnability(cfg, stream):
    _positive(cfg, "d", "games")
    _rate(cfg, "p")
    if cfg["initial"] not in ("haar", "product"):
        raise ConfigError("initial", "must be 'haar' or 'product'")
    table = learn.accuracy_curve(
        [int(x) for x in cfg["L"]], cfg["p"], cfg["depth"], cfg["games"], stream,
        cfg["d"], cfg["initial"], cfg["workers"],
    )
    header = list(table[0].keys())
    for row in table:
        if row["accuracy"] < 0.5 - 5 * row["accuracy_stderr"] - 1.0 / row["games"]:
            raise InvariantViolation(f"accuracy below the guessing floor: {row}")
    return header, [[row[k] for k in header] for row in table]


def run_ancilla_probe(cfg, stream):
    _positive(cfg, "d", "samples")
    _rate(cfg, "p")
    if cfg["initial"] not in ("haar", "product"):
        raise ConfigError("initial", "must be 'haar' or 'product'")
    depth_of = learn.parse_depth_rule(cfg["depth"])
    header = ["L", "p", "t", "mean_S_R", "stderr", "samples"]
    rows = []
    for i, L in enumerate(cfg["L"]):
        for j, p in enumerate(cfg["p"]):
            spec = circuit.CircuitSpec(int(L), cfg["d"], depth_of(int(L)), float(p))
            est = circuit.ancilla_probe_curve(
                spec, cfg["samples"], stream.child(i, j), cfg["initial"], cfg["workers"]
            )
            if np.any(est.mean < -TOL) or np.any(est.mean > math.log(2) + TOL):
                raise InvariantViolation("reference entropy left [0, ln 2]")
            rows.extend(
                [int(L), float(p), int(t), m, e, est.count]
                for t, m, e in zip(est.t, est.mean, est.stderr)
            )
    return header, rows


RUNNERS = {
    "purity-growth": run_purity_growth,
    "entanglement-growth": run_entanglement_growth,
    "statmech-check": run_statmech_check,
    "mincut-percolation": run_mincut_percolation,
    "learnability": run_learnability,
    "ancilla-probe": run_ancilla_probe,
}


# --- output ------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def run(config: dict) -> int:
    """Execute a resolved config and write its artifacts; returns the exit code."""
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    stream = RandomStream(config["seed"])
    start = time.perf_counter()
    header, rows = RUNNERS[config["experiment"]](config, stream)
    wall = time.perf_counter() - start
    write_csv(out / f"{config['experiment']}.csv", header, rows)
    (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=True))
    meta = dict(
        experiment=config["experiment"],
        version=version_string(),
        seed=config["seed"],
        workers=config["workers"],
        wall_time_seconds=wall,
        measurement_rate="per-site probability after every gate layer",
        config=config,
    )
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="monitor-lab", description="Monitored random-circuit experiments."
    )
    ap.add_argument("experiment", choices=sorted(RUNNERS))
    ap.add_argument("--config", help="YAML file of flat key: value pairs")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: getattr(args, k) for k in ("seed", "workers", "out") if getattr(args, k) is not None
    }
    try:
        config = resolve_config(args.experiment, load_config_file(args.config), overrides)
        return run(config)
    except ConfigError as exc:
        print(f"monitor-lab: config error: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"monitor-lab: resource cap exceeded: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"monitor-lab: invariant violated: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
