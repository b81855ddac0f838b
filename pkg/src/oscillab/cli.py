"""Batch command-line front end.

Each command reads a JSON config (``--config``), writes its CSV/JSON
artifacts and a ``manifest.json`` into ``--out``, and exits with

    0  success
    2  configuration error
    3  numerical failure
    4  a verification suite reported a failure
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import acceptance, io
from .asymptotics import ENGINES, f32_expansion_check, prefactor_expansion_check, theorem1_sweep
from .errors import NumericalFailure, OscillabError
from .laguerre import PROVENANCE, RadialMode, build_overlap_table
from .nodal import SphericalCombo, limit_nodal_measure, nodal_measure, quasimode_window, random_combo
from .perturbation import energy_series, mu_series, _as_truncated, default_orders
from .potentials import PotentialSpec
from .spectra.hamiltonian import track_eigenvalue
from .spectra.radial import estimate_growth, growth_radius, solve_radial

COMMANDS = ("overlap", "series", "spectrum", "theorem1", "lemmas", "nodal", "growth", "window", "verify-all")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_SUITE = 0, 2, 3, 4
DEFAULT_SEED = 0


class ConfigError(OscillabError, ValueError):
    """The run configuration is missing or malformed."""


@dataclass
class RunConfig:
    command: str
    potential: PotentialSpec | None = None
    parameters: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    seed: int = DEFAULT_SEED
    threads: int = 1
    source: dict = field(default_factory=dict)

    def param(self, name, default=None, required=False):
        if name in self.parameters:
            return self.parameters[name]
        if required:
            raise ConfigError(f"command {self.command!r} needs parameter {name!r}")
        return default

    def integer(self, name, default=None, required=False) -> int:
        return self._convert(name, default, required, int)

    def real(self, name, default=None, required=False) -> float:
        return self._convert(name, default, required, float)

    def _convert(self, name, default, required, kind):
        value = self.param(name, default, required)
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f"parameter {name!r} must be a single number, got {value!r}")
        try:
            return kind(value)
        except ValueError:
            raise ConfigError(f"parameter {name!r} must be a number, got {value!r}") from None

    def need_potential(self) -> PotentialSpec:
        if self.potential is None:
            raise ConfigError(f"command {self.command!r} needs a potential")
        return self.potential


def _load_potential(ref, base: Path) -> PotentialSpec | None:
    if ref is None:
        return None
    if isinstance(ref, str):
        path = Path(ref)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"potential file {path} not found")
        return PotentialSpec.from_json(path)
    return PotentialSpec.from_json(ref)


def load_config(args: argparse.Namespace) -> RunConfig:
    doc: dict = {}
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        base = path.parent
    unknown = set(doc) - {"command", "potential", "parameters", "output_dir", "seed", "threads"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    command = args.command or doc.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")
    params = dict(doc.get("parameters") or {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be a JSON object")
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    threads = args.threads or doc.get("threads") or int(os.environ.get("OSCILLAB_THREADS", "1"))
    seed = args.seed if args.seed is not None else int(doc.get("seed", DEFAULT_SEED))
    out = Path(args.out or doc.get("output_dir") or "out")
    source = {"command": command, "potential": doc.get("potential"), "parameters": params, "seed": seed}
    return RunConfig(command, _load_potential(doc.get("potential"), base), params, out, seed, int(threads), source)


# --------------------------------------------------------------------------
# commands; each returns (artifact paths, suite_passed or None)


def _mode(cfg: RunConfig, ell=None) -> RadialMode:
    n = cfg.integer("n", required=True)
    ell = cfg.integer("ell", n % 2) if ell is None else int(ell)
    return RadialMode(cfg.integer("d", 2), n, ell, cfg.real("E", 1.0))


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def cmd_overlap(cfg: RunConfig):
    ell, d = cfg.integer("ell", 0), cfg.integer("d", 2)
    window = tuple(cfg.param("window", [ell, ell + 8]))
    source = cfg.param("source", "closed_form")
    if source not in PROVENANCE:
        raise ConfigError(f"source must be one of {PROVENANCE}")
    with ThreadPoolExecutor(cfg.threads) as pool:
        table = build_overlap_table(ell, d, window, cfg.integer("k_max", 4), source=source, executor=pool)
    path = io.write_csv(cfg.output_dir / "overlap.csv", ["s", "t", "k", "value", "provenance"], table.rows())
    return [path], None


def cmd_series(cfg: RunConfig):
    V = cfg.need_potential()
    mode = _mode(cfg)
    K_default, J_default = default_orders(mode.n, V.K_max)
    J = cfg.integer("J", J_default)
    K = cfg.integer("K", K_default)
    series = mu_series(mode, _as_truncated(V, K, mode.n), J, cfg.param("M"))
    doc = series.to_json()
    doc["K"] = K
    paths = [io.write_json(cfg.output_dir / "series.json", doc)]
    rows = []
    for eps in _as_list(cfg.param("eps", [0.05])):
        e_series = energy_series(mode, V, eps, J=J, K=K).value
        e_oracle = track_eigenvalue(mode, V, eps).value
        rows.append((mode.ell, mode.n, eps, e_series, e_oracle, e_series - e_oracle))
    header = ["ell", "n", "eps", "E_series", "E_oracle", "gap"]
    paths.append(io.write_csv(cfg.output_dir / "energies.csv", header, rows))
    return paths, None


def cmd_spectrum(cfg: RunConfig):
    V = cfg.need_potential()
    n = cfg.integer("n", required=True)
    ells = _as_list(cfg.param("ell", list(range(n % 2, n + 1, 2))))
    rows = []
    for ell in ells:
        mode = _mode(cfg, ell)
        for eps in _as_list(cfg.param("eps", [0.05])):
            est = track_eigenvalue(mode, V, eps)
            rows.append((ell, n, eps, est.value, est.error_bar))
    return [io.write_csv(cfg.output_dir / "spectrum.csv", ["ell", "n", "eps", "energy", "residual"], rows)], None


def cmd_theorem1(cfg: RunConfig):
    V = cfg.need_potential()
    engine = cfg.param("engine", "series")
    if engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}")
    rows = []
    for eps in _as_list(cfg.param("eps", [0.05])):
        sweep = theorem1_sweep(cfg.integer("n", required=True), eps, V, cfg.param("ells"), engine,
                               cfg.integer("d", 2), cfg.real("E", 1.0))
        rows += [(r.mode.n, r.mode.ell, r.eps, r.delta, r.lead, r.S_hat, r.T_hat) for r in sweep]
    header = ["n", "ell", "eps", "delta", "lead", "S_hat", "T_hat"]
    return [io.write_csv(cfg.output_dir / "residuals.csv", header, rows)], None


def cmd_lemmas(cfg: RunConfig):
    d = cfg.integer("d", 2)
    Ns = [int(N) for N in _as_list(cfg.param("N", [100, 200, 400]))]
    top = cfg.integer("k_max", 8)
    header = ["k", "beta", "N", "ell", "lhs", "model", "scaled_residual"]
    pref, f32 = [], []
    for N in Ns:
        for ell in range(N % 2, N + 1, 2):
            for beta in range(top + 1):
                r = prefactor_expansion_check(beta, N, ell, d)
                pref.append((r.k, r.beta, r.N, r.ell, r.lhs, r.model, r.scaled_residual))
                for k in range(beta, top + 1):
                    r = f32_expansion_check(k, beta, N, ell, d)
                    f32.append((r.k, r.beta, r.N, r.ell, r.lhs, r.model, r.scaled_residual))
    return [io.write_csv(cfg.output_dir / "lemma_prefactor.csv", header, pref),
            io.write_csv(cfg.output_dir / "lemma_f32.csv", header, f32)], None


def cmd_window(cfg: RunConfig):
    V = cfg.need_potential()
    eps = cfg.real("eps", 0.2)
    rows = []
    for n in _as_list(cfg.param("n", [50, 100, 200])):
        for gamma in _as_list(cfg.param("gamma", [0.0, 0.5, 1.0])):
            w = quasimode_window(int(n), eps, float(gamma), V, cfg.param("engine", "series"),
                                 cfg.integer("d", 2), cfg.real("E", 1.0))
            rows.append((w.n, w.eps, w.gamma, w.hbar, w.ell_max, len(w.members)))
    header = ["n", "eps", "gamma", "hbar", "ell_max", "members"]
    return [io.write_csv(cfg.output_dir / "window.csv", header, rows)], None


def cmd_nodal(cfg: RunConfig):
    combo_doc = cfg.param("combo")
    if combo_doc is not None:
        combo = SphericalCombo.from_json(combo_doc)
        sample = nodal_measure(combo, cfg.integer("refinement", 2 if combo.d == 2 else 5))
        doc = {"combo": combo.to_json(), "refinement": sample.refinement, "measure_raw": sample.measure_raw,
               "measure_normalized": sample.measure_normalized, "convergence": [list(c) for c in sample.convergence]}
        return [io.write_json(cfg.output_dir / "nodal_combo.json", doc)], None
    V = cfg.need_potential()
    rng = np.random.default_rng(cfg.seed)
    eps = cfg.real("eps", 0.2)
    d = cfg.integer("d", 2)
    rows = []
    for n in _as_list(cfg.param("n", [50, 100, 200])):
        for gamma in _as_list(cfg.param("gamma", [0.0, 0.5])):
            w = quasimode_window(int(n), eps, float(gamma), V, cfg.param("engine", "series"), d)
            combo = random_combo(d, w.ells, rng)
            limit = limit_nodal_measure(w, {(ell, m): a for ell, m, a in combo.terms}, V,
                                        cfg.param("refinement"))
            s = limit.sample
            rows.append((w.n, w.eps, w.gamma, limit.ell_star, s.measure_raw, s.measure_normalized, s.refinement))
    header = ["n", "eps", "gamma", "ell_star", "measure_raw", "measure_normalized", "refinement"]
    return [io.write_csv(cfg.output_dir / "nodal.csv", header, rows)], None


def cmd_growth(cfg: RunConfig):
    mode = _mode(cfg)
    eps = cfg.real("eps", 0.0)
    V = cfg.need_potential() if eps else cfg.potential
    est = estimate_growth(mode, eps, V)
    doc = {"n": mode.n, "ell": mode.ell, "d": mode.d, "eps": eps, "energy": est.energy,
           "exponent": est.exponent, "target": est.target, "error": est.error, "r_span": list(est.r_span)}
    sol = solve_radial(mode, eps, V, est.energy, (0.05, growth_radius(mode)), points=cfg.integer("points", 801))
    profile = io.write_csv(cfg.output_dir / "profile.csv", ["r", "log_abs_psi", "sign"],
                           zip(sol.grid, sol.log_abs, sol.sign))
    return [io.write_json(cfg.output_dir / "growth.json", doc), profile], None


def cmd_verify_all(cfg: RunConfig):
    numbers = cfg.param("criteria")
    results = acceptance.run_all(cfg.threads, numbers)
    for r in results:
        print(r.line())
    header = ["number", "title", "passed", "elapsed", "budget"]
    rows = [(r.number, r.title, r.passed, r.elapsed, r.budget) for r in results]
    paths = [io.write_csv(cfg.output_dir / "acceptance.csv", header, rows),
             io.write_json(cfg.output_dir / "acceptance.json", [r.to_json() for r in results])]
    return paths, all(r.passed for r in results)


DISPATCH = {
    "overlap": cmd_overlap,
    "series": cmd_series,
    "spectrum": cmd_spectrum,
    "theorem1": cmd_theorem1,
    "lemmas": cmd_lemmas,
    "nodal": cmd_nodal,
    "growth": cmd_growth,
    "window": cmd_window,
    "verify-all": cmd_verify_all,
}


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"oscillab": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    artifacts, suite = DISPATCH[cfg.command](cfg)
    manifest = {
        "command": cfg.command,
        "inputs": cfg.source,
        "config_hash": io.config_hash(cfg.source),
        "seed": cfg.seed,
        "threads": cfg.threads,
        "versions": _versions(),
        "artifacts": [Path(p).name for p in artifacts],
        "elapsed_seconds": time.perf_counter() - start,
    }
    if suite is not None:
        manifest["suite_passed"] = suite
        manifest["suites"] = json.loads((cfg.output_dir / "acceptance.json").read_text())
    io.write_json(cfg.output_dir / "manifest.json", manifest)
    return EXIT_OK if suite in (None, True) else EXIT_SUITE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscillab", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--command", choices=COMMANDS, help="overrides the config's command")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="seed for randomized sweeps")
    parser.add_argument("--threads", type=int, help="worker budget (default: $OSCILLAB_THREADS or 1)")
    parser.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="set a command parameter (value parsed as JSON when possible)")
    return parser


def _origin(exc: BaseException) -> str:
    """Module of the innermost traceback frame."""
    tb, name = exc.__traceback__, __name__
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", name)
        tb = tb.tb_next
    return name


def _report(out: Path | None, code: int, exc: BaseException) -> int:
    doc = {"exit_code": code, "error": type(exc).__name__, "message": str(exc), "module": _origin(exc)}
    if isinstance(exc, NumericalFailure):
        doc["diagnostics"] = exc.diagnostics
    print(json.dumps(io._jsonable(doc)), file=sys.stderr)
    if out is not None:
        try:
            io.write_json(out / "error.json", doc)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        cfg = load_config(args)
        return run(cfg)
    except NumericalFailure as exc:
        return _report(cfg.output_dir if cfg else None, EXIT_NUMERICAL, exc)
    except (OscillabError, ValueError) as exc:
        return _report(cfg.output_dir if cfg else None, EXIT_CONFIG, exc)


if __name__ == "__main__":
    sys.exit(main())
