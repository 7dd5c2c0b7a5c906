"""
Scenario runner: one subcommand per solver, configured by flat key=value files.

Every run writes its fields (BFLD), reports (CSV) and a manifest.json that
echoes the resolved configuration, the fixed library versions and the gate
results. Exit codes: 0 success, 1 solver failure or failed gate, 2 bad
configuration.
"""

import argparse
import json
import logging
import os
from types import SimpleNamespace

import numpy as np
import pandas as pd

from . import settings
from .beltrami import (
    compose_and_verify,
    disk_normalized_map,
    equation_residual,
    factorization_source,
    principal_map,
    solve_nonhomogeneous_detailed,
)
from .bvp import (
    ProbeFamily,
    make_reducer,
    probe_limits,
    solve_dirichlet_beltrami,
    solve_exterior_poincare,
    solve_hilbert_beltrami,
)
from .divform import (
    MatrixFieldA,
    a_from_mu,
    composition_identity,
    mu_from_a,
    solve_neumann_divform,
    solve_poincare_divform,
    weak_residual,
)
from .errors import ConfigError, FieldFormatError, SolverError
from .field_core import (
    TWO_PI,
    BoundaryFunction,
    ComplexField,
    SolverConfig,
    disk_indicator,
    make_grid,
    norm_lp,
    radial_stretch,
    smooth_bump,
    wirtinger_dz,
    wirtinger_dzbar,
)
from .fieldio import (
    export_field,
    export_plot_csv,
    export_plot_html,
    import_field,
    load_matrix_field,
    read_boundary_csv,
    save_matrix_field,
    save_qcmap,
    write_report,
)
from .riemann import (
    CircleShift,
    RiemannProblem,
    solve_nonlinear_riemann,
    solve_riemann,
    solve_riemann_shift,
    transport_chain_rule,
)
from .transforms import beurling_transform, cauchy_transform, make_plan

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

CONFIG_KEYS = (
    "grid_n", "half_width", "k", "eps_fix", "max_iter", "p", "cp_estimate", "boundary_samples", "tol",
    "mu", "sigma", "lambda", "phi", "psi", "nu", "nu_star", "Phi", "G", "A", "B", "shift", "nonlinearity",
    "field", "target", "reducer", "approach", "stolz_angle", "normalization", "plot_html", "input",
)

DEFAULT_TOL = {
    "solve-beltrami": 1e-4, "map": 1e-4, "disk-map": 1e-4, "factorize": 1e-4,
    "hilbert": 1e-3, "dirichlet": 1e-3, "neumann": 1e-3, "poincare": 1e-3,
    "riemann": 1e-4, "riemann-shift": 1e-4, "riemann-nonlinear": 1e-4, "riemann-poincare": 1e-3,
    "convert-a-mu": 1e-10, "probe": 1e-3, "selftest": 0.0,
}
SUBCOMMANDS = tuple(DEFAULT_TOL)


# ---------------------------------------------------------------------------
# Configuration files
# ---------------------------------------------------------------------------

def parse_config_text(text, source="<config>"):
    """key=value lines with '#' comments; unknown keys are rejected."""
    config = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{number}: unknown key {key!r}")
        config[key] = value
    return config


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return parse_config_text(text, source=path)


def _number(config, key, cast, default):
    if key not in config:
        return default
    try:
        return cast(config[key])
    except ValueError:
        raise ConfigError(f"key {key!r} expects a {cast.__name__}, got {config[key]!r}") from None


def _flag(config, key):
    value = config.get(key, "false").lower()
    if value not in ("true", "false", "1", "0", "yes", "no"):
        raise ConfigError(f"key {key!r} expects true/false, got {config[key]!r}")
    return value in ("true", "1", "yes")


def _file_path(value):
    return value[len("file:"):] if value.startswith("file:") else None


# ---------------------------------------------------------------------------
# Library cases
# ---------------------------------------------------------------------------

FIELD_CASES = {
    "zero": lambda grid: ComplexField.zeros(grid),
    "radial_stretch": radial_stretch,
    "bump": lambda grid: smooth_bump(grid, 0j, 0.8, 0.3),
    "disk": lambda grid: disk_indicator(grid, 1.0),
    "four": lambda grid: ComplexField(grid, np.full((grid.n, grid.n), 4.0)),
}


def _two_jumps(M):
    return BoundaryFunction.from_function(
        lambda t: np.where(np.mod(t, TWO_PI) < np.pi, np.exp(0.25j * np.pi), np.exp(-0.25j * np.pi)),
        n_samples=M, breaks=(0.0, np.pi), singular_points=(0.0, np.pi), unimodular=True,
    )


def _step(M):
    return BoundaryFunction.from_function(lambda t: np.where(np.mod(t, TWO_PI) < np.pi, 1.0, 0.0),
                                          n_samples=M, breaks=(0.0, np.pi), singular_points=(0.0, np.pi))


BOUNDARY_CASES = {
    "one": lambda M: BoundaryFunction.constant(1.0, M, unimodular=True),
    "zero": lambda M: BoundaryFunction.constant(0.0, M),
    "cos": lambda M: BoundaryFunction.from_function(np.cos, M),
    "sin": lambda M: BoundaryFunction.from_function(np.sin, M),
    "radial": lambda M: BoundaryFunction.from_function(lambda t: np.exp(1j * t), M, unimodular=True),
    "inner_normal": lambda M: BoundaryFunction.from_function(lambda t: -np.exp(1j * t), M, unimodular=True),
    "tilted": lambda M: BoundaryFunction.from_function(lambda t: np.exp(1j * (t + np.pi / 6)), M, unimodular=True),
    "two_jumps": _two_jumps,
    "step": _step,
}

NONLINEARITIES = {
    "linear": lambda t, w: w,
    "square": lambda t, w: w * w,
    "conj": lambda t, w: np.conj(w),
    "modulated": lambda t, w: w + 0.5 * np.cos(t),
}

UNIMODULAR_KEYS = ("lambda", "nu", "nu_star")


class ScenarioData:
    """Resolves configuration values into grids, fields and boundary functions."""

    def __init__(self, config):
        self.config = config
        self.grid = make_grid(_number(config, "half_width", float, settings.HALF_WIDTH),
                              _number(config, "grid_n", int, settings.GRID_N))
        self.M = _number(config, "boundary_samples", int, settings.BOUNDARY_SAMPLES)

    def has(self, key):
        return key in self.config

    def require(self, key):
        if key not in self.config:
            raise ConfigError(f"missing required key {key!r}")
        return self.config[key]

    def field(self, key, default="zero", required=False):
        value = self.require(key) if required else self.config.get(key, default)
        path = _file_path(value)
        if path is not None:
            loaded = import_field(path)
            if loaded.grid != self.grid:
                raise ConfigError(f"{key}: field grid {loaded.grid.describe()} differs from the scenario grid")
            return loaded
        if value in FIELD_CASES:
            return FIELD_CASES[value](self.grid)
        try:
            c = complex(value)
        except ValueError:
            raise ConfigError(f"{key}: unknown field case {value!r}") from None
        if key == "mu":
            return ComplexField(self.grid, np.where(self.grid.radius <= 1.0, c, 0.0), support_radius=1.0)
        return ComplexField(self.grid, np.full((self.grid.n, self.grid.n), c))

    def boundary(self, key, default=None, required=True):
        if key not in self.config and not required and default is None:
            return None
        value = self.require(key) if default is None else self.config.get(key, default)
        unimodular = key in UNIMODULAR_KEYS
        path = _file_path(value)
        if path is not None:
            return read_boundary_csv(path, unimodular=unimodular, n_samples=self.M)
        if value in BOUNDARY_CASES:
            return BOUNDARY_CASES[value](self.M)
        try:
            c = complex(value)
        except ValueError:
            raise ConfigError(f"{key}: unknown boundary case {value!r}") from None
        return BoundaryFunction.constant(c, self.M, unimodular=unimodular and abs(abs(c) - 1.0) < 1e-12)

    def matrix(self):
        value = self.config.get("A")
        if value is None or value == "from_mu":
            mu = self.field("mu")
            return a_from_mu(mu) if mu.max_abs() > 0 else MatrixFieldA.identity(self.grid)
        if value == "identity":
            return MatrixFieldA.identity(self.grid)
        path = _file_path(value)
        if path is None:
            raise ConfigError(f"A: expected identity, from_mu or file:<dir>, got {value!r}")
        return load_matrix_field(path)

    def shift(self):
        value = self.config.get("shift", "identity")
        kind, _, arg = value.partition(":")
        try:
            if kind == "identity":
                return None
            if kind == "rotation":
                return CircleShift.rotation(float(arg), self.M)
            if kind == "mobius":
                return CircleShift.mobius(complex(arg), self.M)
        except ValueError:
            raise ConfigError(f"shift: bad parameter in {value!r}") from None
        raise ConfigError(f"shift: unknown case {value!r}")

    def nonlinearity(self):
        value = self.require("nonlinearity")
        if value not in NONLINEARITIES:
            raise ConfigError(f"nonlinearity: unknown case {value!r}; known: {sorted(NONLINEARITIES)}")
        return NONLINEARITIES[value]

    def solver_config(self, mu=None):
        overrides = {}
        for key, cast in (("eps_fix", float), ("max_iter", int), ("p", float), ("cp_estimate", float), ("k", float)):
            if key in self.config:
                overrides[key] = _number(self.config, key, cast, None)
        if mu is not None and "k" not in overrides:
            return SolverConfig.for_mu(mu, **overrides)
        return SolverConfig.from_env(**overrides)

    def probes(self, singular_points=(), side="inside"):
        approach = self.config.get("approach", "radial")
        stolz = _number(self.config, "stolz_angle", float, np.pi / 4)
        return ProbeFamily.around_circle(128, singular_points, 0.1, approach=approach, stolz_angle=stolz, side=side)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def _jsonable(value):
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


class ScenarioRunner:
    def __init__(self, subcommand, config, out_dir=None, grid_n=None, tol=None):
        if subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        self.subcommand = subcommand
        self.config = dict(config)
        if grid_n is not None:
            self.config["grid_n"] = str(grid_n)
        if tol is not None:
            self.config["tol"] = repr(float(tol))
        self.out_dir = out_dir or settings.OUT_DIR
        self.artifacts = []
        self.gates = {}
        self.summary = {}
        self.data = None

    @property
    def tol(self):
        return _number(self.config, "tol", float, DEFAULT_TOL[self.subcommand])

    # artifacts ------------------------------------------------------------

    def _path(self, name):
        return os.path.join(self.out_dir, name)

    def write_field(self, name, field, trace=True):
        export_field(field, self._path(f"{name}.bfld"))
        self.artifacts.append(f"{name}.bfld")
        if trace:
            frame = export_plot_csv(field, self._path(f"{name}_trace.csv"), "boundary_trace")
            self.artifacts.append(f"{name}_trace.csv")
            if _flag(self.config, "plot_html"):
                export_plot_html(frame, self._path(f"{name}.html"), title=f"{self.subcommand}: {name}")
                self.artifacts.append(f"{name}.html")

    def write_table(self, name, frame, summary=None):
        write_report(frame, self._path(f"{name}.csv"), summary)
        self.artifacts.append(f"{name}.csv")

    def write_probe_report(self, name, report):
        self.write_table(name, report.frame, report.summary())
        self.gates[name] = bool(report.passed)
        self.summary[name] = report.summary()

    def write_map(self, stem, f):
        paths = save_qcmap(f, self.out_dir, stem)
        self.artifacts.extend(sorted(os.path.basename(p) for p in paths.values()))
        self.artifacts.append(f"{stem}.txt")

    def manifest(self, status, error=None):
        resolved = dict(self.config)
        resolved.setdefault("tol", repr(self.tol))
        if self.data is not None:
            resolved.setdefault("grid_n", str(self.data.grid.n))
            resolved.setdefault("half_width", repr(self.data.grid.L))
            resolved.setdefault("boundary_samples", str(self.data.M))
        out = {
            "subcommand": self.subcommand,
            "status": status,
            "config": resolved,
            "libraries": {"probe_schedule_version": settings.PROBE_SCHEDULE_VERSION,
                          "test_bump_library_version": settings.TEST_BUMP_LIBRARY_VERSION},
            "gates": self.gates,
            "summary": self.summary,
            "artifacts": sorted(self.artifacts),
        }
        if error is not None:
            out["error"] = error
        return out

    def _write_manifest(self, status, error=None):
        try:
            os.makedirs(self.out_dir, exist_ok=True)
            with open(self._path("manifest.json"), "w", encoding="utf-8") as fh:
                json.dump(self.manifest(status, error), fh, indent=2, sort_keys=True, default=_jsonable)
                fh.write("\n")
        except OSError as exc:
            logger.error("could not write manifest: %s", exc)

    def run(self):
        try:
            os.makedirs(self.out_dir, exist_ok=True)
            self.data = ScenarioData(self.config)
            handler = getattr(self, "_run_" + self.subcommand.replace("-", "_"))
            handler()
        except (ConfigError, FieldFormatError) as exc:
            print(f"Configuration error: {exc}")
            self._write_manifest("config_error", str(exc))
            return EXIT_CONFIG
        except SolverError as exc:
            print(f"Solver failure ({type(exc).__name__}): {exc}")
            self._write_manifest("solver_error", f"{type(exc).__name__}: {exc}")
            return EXIT_FAILED
        passed = all(self.gates.values())
        self._write_manifest("ok" if passed else "gate_failed")
        print(f"{self.subcommand}: {'all gates passed' if passed else 'gate failed'} "
              f"({len(self.artifacts)} artifacts in {self.out_dir})")
        for name, ok in sorted(self.gates.items()):
            print(f"  {name:<28} {'pass' if ok else 'FAIL'}")
        return EXIT_OK if passed else EXIT_FAILED

    # subcommands ------------------------------------------------------------

    def _run_solve_beltrami(self):
        d = self.data
        mu, sigma = d.field("mu"), d.field("sigma", required=True)
        solution = solve_nonhomogeneous_detailed(mu, sigma, d.solver_config(mu))
        self.write_field("omega", solution.omega)
        self.write_table("iterations", pd.DataFrame({"iteration": np.arange(1, solution.iterations + 1),
                                                     "increment": solution.increments}))
        self.summary["beltrami"] = solution.summary()
        self.gates["relative_residual"] = solution.relative_residual <= self.tol

    def _map_gate(self, f, mu):
        scale = norm_lp(mu, 2)
        self.summary["map"] = f.describe()
        self.gates["map_residual"] = f.residual <= self.tol * max(scale, 1e-300)

    def _run_map(self):
        d = self.data
        mu = d.field("mu", required=True)
        f = principal_map(mu, d.solver_config(mu))
        self.write_map("map", f)
        self._map_gate(f, mu)

    def _run_disk_map(self):
        d = self.data
        mu = d.field("mu", required=True)
        f = disk_normalized_map(mu.restricted(1.0), d.solver_config(mu))
        self.write_map("disk_map", f)
        self._map_gate(f, f.mu)

    def _run_factorize(self):
        d = self.data
        mu, sigma = d.field("mu", required=True), d.field("sigma", required=True)
        cfg = d.solver_config(mu)
        f = principal_map(mu, cfg)
        result = factorization_source(mu, sigma, f, cfg)
        self.write_map("map", f)
        self.write_field("g", result.g, trace=False)
        self.summary["factorization"] = result.describe()
        self._map_gate(f, mu)

    def _hilbert_like(self, lam):
        d = self.data
        mu, sigma = d.field("mu"), d.field("sigma")
        phi = d.boundary("phi")
        psi = d.boundary("psi", required=False)
        singular = set(phi.singular_points) | set(lam.singular_points)
        if psi is not None:
            singular |= set(psi.singular_points)
        probes = d.probes(tuple(sorted(singular)))
        cfg = d.solver_config(mu)
        if self.subcommand == "dirichlet":
            solution = solve_dirichlet_beltrami(mu, sigma, phi, psi, cfg, d.M, probes, self.tol)
        else:
            solution = solve_hilbert_beltrami(mu, sigma, lam, phi, psi, cfg, d.M, probes, self.tol)
        self.write_field("omega", solution.omega)
        self.write_probe_report("probe_re", solution.report)
        if solution.imag_report is not None:
            self.write_probe_report("probe_im", solution.imag_report)
        self.summary["equation_residual"] = solution.residual

    def _run_hilbert(self):
        self._hilbert_like(self.data.boundary("lambda"))

    def _run_dirichlet(self):
        self._hilbert_like(BoundaryFunction.constant(1.0, unimodular=True))

    def _divform_outputs(self, solution):
        self.write_field("u", solution.u)
        self.write_table("weak_residual", solution.weak.frame, solution.weak.summary())
        self.summary["divform"] = solution.summary()
        if solution.report is not None:
            self.write_probe_report("probe_directional", solution.report)

    def _run_neumann(self):
        d = self.data
        A, g, Phi = d.matrix(), d.field("G"), d.boundary("Phi")
        probes = d.probes(Phi.singular_points)
        solution = solve_neumann_divform(A, g, Phi, None, d.M, probes, self.tol)
        self._divform_outputs(solution)

    def _run_poincare(self):
        d = self.data
        A, g, nu, Phi = d.matrix(), d.field("G"), d.boundary("nu"), d.boundary("Phi")
        probes = d.probes(tuple(sorted(set(Phi.singular_points) | set(nu.singular_points))))
        solution = solve_poincare_divform(A, g, nu, Phi, None, d.M, probes, self.tol)
        self._divform_outputs(solution)

    def _riemann_outputs(self, solution):
        self.write_field("omega_plus", solution.omega_plus)
        self.write_field("omega_minus", solution.omega_minus)
        if solution.report is not None:
            self.write_probe_report("probe_coupling", solution.report)
        self.summary["riemann"] = {"residual_plus": solution.residual_plus,
                                   "residual_minus": solution.residual_minus}

    def _riemann_problem(self, shift=None):
        d = self.data
        return RiemannProblem(d.boundary("A"), d.boundary("B"), shift, None,
                              complex(self.config.get("normalization", "0")))

    def _run_riemann(self):
        d = self.data
        solution = solve_riemann(self._riemann_problem(), d.field("mu"), d.field("sigma"),
                                 grid=d.grid, M=d.M, tol=self.tol)
        self._riemann_outputs(solution)

    def _run_riemann_shift(self):
        d = self.data
        solution = solve_riemann_shift(self._riemann_problem(d.shift()), d.field("mu"), d.field("sigma"),
                                       grid=d.grid, M=d.M, tol=self.tol)
        self._riemann_outputs(solution)

    def _run_riemann_nonlinear(self):
        d = self.data
        zero = BoundaryFunction.constant(0.0, d.M)
        prob = RiemannProblem(zero, zero, None, d.nonlinearity())
        solution = solve_nonlinear_riemann(prob, d.boundary("psi"), d.field("mu"), d.field("sigma"),
                                           grid=d.grid, M=d.M, tol=self.tol)
        self._riemann_outputs(solution)

    def _run_riemann_poincare(self):
        """
        u- solves the exterior Poincare problem with user data psi; u+ solves
        the interior divergence-form problem with data phi(zeta, psi(zeta)).
        """
        d = self.data
        nu, psi, phi = d.boundary("nu"), d.boundary("psi"), d.nonlinearity()
        A, g = d.matrix(), d.field("G")
        Phi = BoundaryFunction.from_function(lambda t: np.real(phi(np.asarray(t), psi.evaluate(t))),
                                             n_samples=d.M, singular_points=psi.singular_points)
        singular = tuple(sorted(set(psi.singular_points) | set(nu.singular_points)))
        inner = solve_poincare_divform(A, g, nu, Phi, None, d.M, d.probes(singular), self.tol)
        outer = solve_exterior_poincare(nu, psi, d.M, float(self.config.get("normalization", "0")))
        self._divform_outputs(inner)
        outside = outer.evaluator
        mask = (d.grid.radius >= 1.0) & (d.grid.radius <= 0.5 * d.grid.L)
        values = np.zeros((d.grid.n, d.grid.n), dtype=complex)
        values[mask] = outside.evaluate(d.grid.Z[mask])
        self.write_field("u_minus", ComplexField(d.grid, values.real))
        report = probe_limits(outside, d.probes(singular, side="outside"), psi,
                              make_reducer("directional", nu), self.tol)
        self.write_probe_report("probe_exterior", report)

    def _run_convert_a_mu(self):
        d = self.data
        if d.has("A"):
            A = d.matrix()
            mu = mu_from_a(A)
            self.write_field("mu", mu, trace=False)
            back = a_from_mu(mu)
            err = max(float(np.max(np.abs(back.a11 - A.a11))), float(np.max(np.abs(back.a12 - A.a12))),
                      float(np.max(np.abs(back.a22 - A.a22))))
        else:
            mu = d.field("mu", required=True)
            A = a_from_mu(mu)
            paths = save_matrix_field(A, self.out_dir, "A")
            self.artifacts.extend(sorted(os.path.basename(p) for p in paths.values()))
            self.artifacts.append("A.txt")
            err = float(np.max(np.abs(mu_from_a(A).values - mu.values)))
        self.summary["conversion"] = {"round_trip_error": err, "det_deviation": A.det_deviation}
        limit = max(self.tol, 1e-8) if d.has("A") else self.tol
        self.gates["round_trip"] = err <= limit

    def _run_probe(self):
        d = self.data
        field = d.field("field" if d.has("field") or not d.has("input") else "input", required=True)
        target = d.boundary("target")
        kind = self.config.get("reducer", "identity")
        coefficient = None
        if kind in ("re_conj", "im_conj"):
            coefficient = d.boundary("lambda")
        elif kind == "directional":
            coefficient = d.boundary("nu_star" if d.has("nu_star") else "nu")
        report = probe_limits(field, d.probes(target.singular_points), target,
                              make_reducer(kind, coefficient), self.tol)
        self.write_probe_report("probe", report)

    def _run_selftest(self):
        frame = run_selftest(self.data.grid, self.data.M)
        self.write_table("selftest", frame)
        for row in frame.itertuples():
            self.gates[row.check] = bool(row.passed)
        self.summary["selftest"] = {"checks": int(len(frame)), "passed": int(frame["passed"].sum())}


# ---------------------------------------------------------------------------
# Self-test
# ---------------------------------------------------------------------------

def _rel_l2(a, b):
    return norm_lp(a - b, 2) / max(norm_lp(b, 2), 1e-300)


def _disk_l2(a, b, grid, radius=1.0):
    inside = grid.radius <= radius
    return float(np.sqrt(np.sum(np.abs(a.values[inside] - b.values[inside]) ** 2) * grid.cell_area))


def _check_operators(grid):
    g = smooth_bump(grid, 0.3 + 0.1j, 0.8, 1.0 + 0.5j)
    P = cauchy_transform(g)
    dzbar = _rel_l2(wirtinger_dzbar(P), g)
    dz = _rel_l2(wirtinger_dz(P), beurling_transform(g))
    balanced = wirtinger_dzbar(smooth_bump(grid, 0j, 1.2)).with_support(1.2)
    ratio = norm_lp(beurling_transform(balanced), 2) / norm_lp(balanced, 2)
    # nonzero mass: only the periodized plan is exactly unitary
    unit = make_plan(grid, "unit")
    rng = np.random.default_rng(11)
    noise = rng.standard_normal((grid.n, grid.n)) + 1j * rng.standard_normal((grid.n, grid.n))
    noisy = ComplexField(grid, np.where(grid.radius <= 1.5, noise, 0.0), support_radius=1.5)
    worst = 0.0
    for source in (noisy, disk_indicator(grid, 1.0)):
        gain = norm_lp(beurling_transform(source, unit), 2) / norm_lp(source, 2)
        worst = max(worst, abs(gain - 1.0))
    return [("dzbar_P_equals_g", dzbar, 1e-6), ("dz_P_equals_T", dz, 1e-6),
            ("beurling_isometry", abs(ratio - 1.0), 1e-9),
            ("beurling_isometry_with_mass", worst, 1e-9)]


def _check_disk_cauchy(grid):
    P = cauchy_transform(disk_indicator(grid, 1.0))
    Z, R = grid.Z, grid.radius
    inner = (R >= 0.1) & (R <= 0.9)
    outer = (R >= 1.1) & (R <= 1.5)
    err_in = np.max(np.abs(P.values[inner] - np.conj(Z[inner])))
    err_out = np.max(np.abs(P.values[outer] - 1.0 / Z[outer]))
    return [("disk_cauchy_transform", float(max(err_in, err_out)) / grid.h, 5.0)]


def _check_contraction(grid):
    mu = smooth_bump(grid, 0j, 1.0, 1.0 / 3.0)
    sigma = smooth_bump(grid, 0.2j, 0.7, 1.0)
    solution = solve_nonhomogeneous_detailed(mu, sigma, SolverConfig.from_env(k=1.0 / 3.0))
    ratios = np.asarray(solution.ratios[3:]) if len(solution.ratios) > 3 else np.zeros(1)
    check = norm_lp(equation_residual(solution.omega, mu, sigma), 2) / norm_lp(sigma, 2)
    return [("contraction_ratio", float(np.max(ratios)), 0.38),
            ("beltrami_residual", check, 1e-4),
            ("beltrami_iterations", float(solution.iterations), 24.0)]


def _stretch_error(L, n):
    """max |f - z|z|| on |z| <= L/2 for the principal map of the K = 2 radial stretch."""
    grid = make_grid(L, n)
    f = principal_map(radial_stretch(grid))
    Z, R = grid.Z, grid.radius
    exact = np.where(R <= 1.0, Z * R, Z)
    trusted = R <= 0.5 * L
    return float(np.max(np.abs(f.f.values[trusted] - exact[trusted])))


def _check_radial_stretch(grid):
    errors = [_stretch_error(grid.L, n) for n in (128, 256, 512)]
    order = min(np.log2(errors[0] / errors[1]), np.log2(errors[1] / errors[2]))
    logger.info("radial stretch errors %s, order %.3f", ", ".join(f"{e:.3e}" for e in errors), order)
    return [("radial_stretch_order", float(order), 1.0, "min"),
            ("radial_stretch_error_512", errors[2], 2e-2)]


def _check_factorization(grid):
    mu = smooth_bump(grid, 0j, 0.8, 0.3)
    sigma = smooth_bump(grid, 0.1j, 0.6, 1.0)
    direct = solve_nonhomogeneous_detailed(mu, sigma)
    f = principal_map(mu)
    h = cauchy_transform(factorization_source(mu, sigma, f).g)
    _, residual = compose_and_verify(h, f, mu, sigma)
    return [("factorization_round_trip", residual / max(direct.residual, 1e-300), 10.0)]


def _check_conversions(grid):
    third = ComplexField(grid, np.full((grid.n, grid.n), 1.0 / 3.0))
    A = a_from_mu(third)
    diag = max(float(np.max(np.abs(A.a11 - 0.5))), float(np.max(np.abs(A.a22 - 2.0))),
               float(np.max(np.abs(A.a12))))
    rng = np.random.default_rng(7)
    mu = ComplexField(grid, 0.6 * np.sqrt(rng.random((grid.n, grid.n)))
                      * np.exp(1j * TWO_PI * rng.random((grid.n, grid.n))))
    A_random = a_from_mu(mu)
    round_trip = float(np.max(np.abs(mu_from_a(A_random).values - mu.values)))
    return [("diag_half_two", diag, 1e-12), ("mu_round_trip", round_trip, 1e-10),
            ("det_one", A_random.det_deviation, 1e-10)]


def _check_weak_residual(grid):
    u = ComplexField(grid, grid.radius ** 2)
    report = weak_residual(MatrixFieldA.identity(grid), u, 4.0)
    return [("weak_residual_quadratic", report.max_abs, 1e-4)]


def _check_composition(grid):
    mu = radial_stretch(grid)
    f = principal_map(mu)
    frame = composition_identity(a_from_mu(mu), smooth_bump(grid, 0.1, 1.5), f)
    return [("composition_identity", float(frame["rel_dev"].max()), 1e-4)]


def _check_hilbert(grid, M):
    one = BoundaryFunction.constant(1.0, M, unimodular=True)
    cos = BoundaryFunction.from_function(np.cos, M)
    stretch = solve_hilbert_beltrami(radial_stretch(grid), None, one, cos, M=M)
    half = grid.radius <= 0.5
    exact = grid.Z * grid.radius
    sup = float(np.max(np.abs(stretch.omega.values[half] - exact[half])))

    lam = _two_jumps(M)
    paths = ProbeFamily.around_circle(128, lam.singular_points, 0.2)
    jumps = solve_hilbert_beltrami(FIELD_CASES["bump"](grid), None, lam, cos, M=M, probes=paths, tol=1e-3)
    return [("hilbert_radial_stretch", sup, 1e-2),
            ("hilbert_two_jumps_pass_fraction", jumps.report.pass_fraction, 0.95, "min")]


def _check_kernel_family(grid, M):
    mu = FIELD_CASES["bump"](grid)
    one = BoundaryFunction.constant(1.0, M, unimodular=True)
    cos = BoundaryFunction.from_function(np.cos, M)
    psis = (BoundaryFunction.constant(0.0, M), BoundaryFunction.from_function(np.sin, M),
            BoundaryFunction.constant(1.0, M))
    paths = ProbeFamily.around_circle(128)
    members, f, failed = [], None, 0
    for psi in psis:
        solution = solve_hilbert_beltrami(mu, None, one, cos, psi, M=M, probes=paths, tol=1e-3, f=f)
        f = solution.f
        failed += int(not (solution.report.passed and solution.imag_report.passed))
        members.append(solution.omega)
    gaps = [_disk_l2(a, b, grid) for i, a in enumerate(members) for b in members[i + 1:]]
    return [("kernel_family_failed_gates", float(failed), 0.0),
            ("kernel_family_separation", min(gaps), 1e-3, "min")]


def _check_riemann(grid, M):
    two = BoundaryFunction.constant(2.0, M)
    zero = BoundaryFunction.constant(0.0, M)
    homogeneous = solve_riemann(RiemannProblem(two, zero, normalization=1.0), grid=grid, M=M)
    plus = homogeneous.plus_eval.evaluate(np.array([0.5 + 0.0j]))[0]
    minus = homogeneous.minus_eval.evaluate(np.array([1.5 + 0.0j]))[0]
    cos = BoundaryFunction.from_function(np.cos, M)
    jump = solve_riemann(RiemannProblem(BoundaryFunction.constant(1.0, M), cos), grid=grid, M=M, tol=1e-6)

    # omega+ = 2 omega- + cos t with omega-(inf) = 1 has omega- = 1 - 1/(4z) on the circle
    direct = solve_riemann(RiemannProblem(two, cos, normalization=1.0), grid=grid, M=M)
    psi = BoundaryFunction.from_function(lambda t: 1.0 - 0.25 * np.exp(-1j * np.asarray(t)), M)
    linear = RiemannProblem(zero, zero, nonlinearity=lambda t, w: 2.0 * w + np.cos(t))
    recipe = solve_nonlinear_riemann(linear, psi, grid=grid, M=M)
    inner, outer = np.array([0.5, 0.3j, -0.2 - 0.4j]), np.array([1.5, -2j, 1.2 + 1.2j])
    consistency = max(float(np.max(np.abs(recipe.plus_eval.evaluate(inner) - direct.plus_eval.evaluate(inner)))),
                      float(np.max(np.abs(recipe.minus_eval.evaluate(outer) - direct.minus_eval.evaluate(outer)))))
    return [("riemann_homogeneous", float(max(abs(plus - 2.0), abs(minus - 1.0))), 1e-8),
            ("plemelj_jump", jump.report.max_deviation, 1e-6),
            ("nonlinear_matches_linear", consistency, 1e-8)]


def _check_divform(grid, M):
    # U = Re w^2 is harmonic, so u = U o f = r^4 cos 2t solves div(A grad u) = 0
    A = a_from_mu(radial_stretch(grid))
    Phi = BoundaryFunction.from_function(lambda t: -4.0 * np.cos(2.0 * np.asarray(t)), M)
    solution = solve_neumann_divform(A, ComplexField.zeros(grid), Phi, M=M)
    half = grid.radius <= 0.5
    exact = grid.radius ** 2 * (grid.Z ** 2).real
    gap = solution.u.values.real[half] - exact[half]
    return [("divform_manufactured", float(np.max(np.abs(gap - gap.mean()))), 1e-3)]


def _check_transport(grid, M):
    mu = smooth_bump(grid, 0.2j, 0.5, 0.3)
    f = disk_normalized_map(mu.restricted(1.0))
    h = SimpleNamespace(evaluate=lambda w: w ** 2 + 0.5 * np.abs(w) ** 2,
                        dw=lambda w: 2.0 * w + 0.5 * np.conj(w), dwbar=lambda w: 0.5 * w)
    nu = BoundaryFunction.from_function(lambda t: np.exp(1j * (np.asarray(t) + 0.3)), M)
    _, relative = transport_chain_rule(h, f, nu)
    return [("transport_chain_rule", relative, 1e-3)]


GRID_CHECKS = (_check_operators, _check_disk_cauchy, _check_contraction, _check_radial_stretch,
               _check_factorization, _check_conversions, _check_weak_residual, _check_composition)
BOUNDARY_CHECKS = (_check_hilbert, _check_kernel_family, _check_riemann, _check_divform, _check_transport)


def _selftest_row(name, value, threshold, bound="max"):
    value = float(value)
    passed = value >= threshold if bound == "min" else value <= threshold
    return {"check": name, "value": value, "threshold": threshold, "bound": bound, "passed": bool(passed)}


def run_selftest(grid, M):
    """
    Acceptance checks as rows (check, value, threshold, bound, passed); bound
    "max" passes when value <= threshold, "min" when value >= threshold.
    """
    rows = []
    for check in GRID_CHECKS:
        rows.extend(_selftest_row(*row) for row in check(grid))
    for check in BOUNDARY_CHECKS:
        rows.extend(_selftest_row(*row) for row in check(grid, M))
    frame = pd.DataFrame(rows)
    logger.info("selftest: %d/%d checks passed", int(frame["passed"].sum()), len(frame))
    return frame


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(description="Run a Beltrami boundary-value scenario.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="Solver to run")
    parser.add_argument("--config", default=None, help="Scenario file with key=value lines")
    parser.add_argument("--out-dir", default=None, help="Directory for fields, reports and manifest.json")
    parser.add_argument("--grid-n", type=int, default=None, help="Override grid_n")
    parser.add_argument("--tol", type=float, default=None, help="Override the gate tolerance")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        runner = ScenarioRunner(args.subcommand, config, args.out_dir, args.grid_n, args.tol)
    except ConfigError as exc:
        print(f"Configuration error: {exc}")
        return EXIT_CONFIG
    return runner.run()
