"""Experiment harness: iteration tables, theory checks and time evolution runs."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .femcore import MaterialParams, apply_dirichlet, assemble_blocks, build_space
from .fsisystem import (VARIANTS, StepConfig, build_system, compute_r, gce_time_step, initial_state,
                        vertex_p2)
from .krylov import EXPECTED_VARIANT, KINDS, MODES
from .meshkit import GEOMETRIES, build_two_region_mesh, geometry_report, solve_ale_extension, write_mesh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchConfig:
    geometry: str = "cavity_halves"
    levels: tuple = (0, 1, 2)
    dts: tuple = (1e-2, 1e-3, 1e-4)
    density_ratios: tuple = (1.0, 10.0, 100.0)
    preconditioners: tuple = KINDS
    tol: float = 1e-10
    max_iter: int = 500
    out: str = "bench_out"
    seed: int = 0
    serial: bool = True
    workers: int = 0
    mode: str = "triangular"
    variant: str = ""                 # empty: the system each preconditioner is designed for
    # material data of the flag benchmark; the structure density is ratio * rho_f
    rho_f: float = 1e3
    mu_f: float = 1.0
    mu_s: float = 1e6
    lambda_s: float = 2e6
    inflow_peak: float = 1.5
    steps: int = 10
    solve_step: int = 1
    ale_operator: str = "laplacian"
    samples: int = 100

    def __post_init__(self):
        for name in ("levels", "dts", "density_ratios", "preconditioners"):
            val = getattr(self, name)
            if isinstance(val, (str, int, float)):
                val = (val,)
            object.__setattr__(self, name, tuple(val))
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be nonempty")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if any(not k > 0 for k in self.dts):
            raise ValueError("all time steps must be positive")
        if any(not q > 0 for q in self.density_ratios):
            raise ValueError("density ratios must be positive")
        if any(lvl < 0 for lvl in self.levels):
            raise ValueError("refinement levels must be >= 0")
        bad = [p for p in self.preconditioners if p not in KINDS]
        if bad:
            raise ValueError(f"unknown preconditioners {bad}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.variant and self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.max_iter < 1 or self.steps < 0 or self.solve_step < 1:
            raise ValueError("max_iter and solve_step must be >= 1, steps >= 0")

    def variant_for(self, kind: str) -> str:
        return self.variant or EXPECTED_VARIANT[kind]

    def material(self, k: float, ratio: float) -> MaterialParams:
        return MaterialParams(rho_f=self.rho_f, rho_s=ratio * self.rho_f, mu_f=self.mu_f, mu_s=self.mu_s,
                              lambda_s=self.lambda_s, k=k)


# ---------------------------------------------------------------------------
# config files


def _parse_value(text: str, kind):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return kind(text)


_LIST_TYPES = {"levels": int, "dts": float, "density_ratios": float, "preconditioners": str}
_ALIASES = {"dt": "dts", "k": "dts", "density-ratios": "density_ratios", "precond": "preconditioners",
            "max-iter": "max_iter", "level": "levels"}


def parse_config_text(text: str, base: Optional[BenchConfig] = None) -> BenchConfig:
    """Plain ``key = value`` lines; ``#`` starts a comment; lists are comma-separated."""
    base = BenchConfig() if base is None else base
    types = {f.name: type(getattr(base, f.name)) for f in fields(BenchConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key).replace("-", "_")
        if key not in types:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in _LIST_TYPES:
            updates[key] = tuple(_parse_value(v, _LIST_TYPES[key]) for v in val.split(",") if v.strip())
        else:
            updates[key] = _parse_value(val, types[key])
    return replace(base, **updates)


def load_config(path, base: Optional[BenchConfig] = None) -> BenchConfig:
    return parse_config_text(Path(path).read_text(), base)


def format_config(config: BenchConfig) -> str:
    lines = []
    for f in fields(BenchConfig):
        val = getattr(config, f.name)
        if isinstance(val, tuple):
            val = ",".join(str(v) for v in val)
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# iteration tables


@dataclass(frozen=True)
class CellResult:
    level: int
    k: float
    ratio: float
    kind: str
    iterations: int
    converged: bool
    final_residual: float
    n_dofs: int

    def label(self, max_iter: int) -> str:
        return str(self.iterations) if self.converged else f"×({max_iter})"


@dataclass
class IterationTable:
    config: BenchConfig
    cells: dict = field(default_factory=dict)      # (level, k, ratio, kind) -> CellResult

    def columns(self):
        c = self.config
        return list(itertools.product(c.dts, c.density_ratios, c.preconditioners))

    def column_label(self, k, ratio, kind) -> str:
        parts = []
        if len(self.config.dts) > 1 or len(self.config.density_ratios) == 1:
            parts.append(f"k={k:g}")
        if len(self.config.density_ratios) > 1:
            parts.append(f"ratio={ratio:g}")
        return " ".join(parts + [kind])

    def count(self, level, k, ratio, kind) -> Optional[int]:
        cell = self.cells[(level, k, ratio, kind)]
        return cell.iterations if cell.converged else None

    def rows(self):
        header = ["level", "dofs"] + [self.column_label(*col) for col in self.columns()]
        body = []
        for level in self.config.levels:
            first = self.cells[(level, *self.columns()[0])]
            row = [str(level), str(first.n_dofs)]
            row += [self.cells[(level, *col)].label(self.config.max_iter) for col in self.columns()]
            body.append(row)
        return header, body

    def to_csv(self) -> str:
        header, body = self.rows()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()

    def to_text(self) -> str:
        header, body = self.rows()
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        line = lambda row: "  ".join(cell.rjust(w) for cell, w in zip(row, widths))
        out = [line(header), "  ".join("-" * w for w in widths)] + [line(r) for r in body]
        return "\n".join(out) + "\n"

    def write(self, out_dir, stem: str = "iterations"):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.csv").write_text(self.to_csv())
        (out / f"{stem}.txt").write_text(self.to_text())
        return out / f"{stem}.csv", out / f"{stem}.txt"


def first_step_counts(config: BenchConfig, level: int, k: float, ratio: float):
    """Iteration counts of every configured preconditioner on one (mesh, k, ratio) system.

    The system is that of step ``config.solve_step`` of the GCE loop started
    from rest; earlier steps are advanced with M1.
    """
    params = config.material(k, ratio)
    space = build_space(build_two_region_mesh(config.geometry, level))
    base = StepConfig(inflow_peak=config.inflow_peak, total_steps=max(config.steps, config.solve_step),
                      tol=config.tol, max_iter=config.max_iter, mode=config.mode,
                      ale_operator=config.ale_operator, raise_on_failure=False)
    state = initial_state(space)
    for _ in range(config.solve_step - 1):
        state = gce_time_step(state, params, base)
    n_dofs = space.n_velocity + space.n_pressure
    out = []
    for kind in config.preconditioners:
        step_cfg = replace(base, variant=config.variant_for(kind), preconditioner=kind)
        rep = gce_time_step(state, params, step_cfg).report
        out.append(CellResult(level, k, ratio, kind, rep.iterations, rep.converged, rep.final_residual, n_dofs))
    return out


def _group_task(args):
    config, level, k, ratio = args
    return first_step_counts(config, level, k, ratio)


def run_iteration_table(config: BenchConfig) -> IterationTable:
    """Solve the first-step system for every (level, k, ratio, preconditioner).

    Non-converged solves are kept and rendered as ``×(max_iter)``.
    """
    groups = [(config, lvl, k, q) for lvl in config.levels for k in config.dts for q in config.density_ratios]
    if config.serial or len(groups) == 1:
        results = [_group_task(g) for g in groups]
    else:
        workers = config.workers or min(len(groups), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_group_task, groups))
    table = IterationTable(config)
    for cells in results:
        for cell in cells:
            table.cells[(cell.level, cell.k, cell.ratio, cell.kind)] = cell
    return table


# ---------------------------------------------------------------------------
# theory suite


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        return f"{state} {self.name}: {self.value:.6g} (threshold {self.threshold:g}) {self.detail}".rstrip()


@dataclass
class TheoryBundle:
    checks: list = field(default_factory=list)
    infsup: list = field(default_factory=list)
    spectra: list = field(default_factory=list)
    geometry: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        return "\n".join(c.line() for c in self.checks) + "\n"

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "theory_checks.txt").write_text(self.summary())
        if self.infsup:
            analysis.reports_to_csv(self.infsup, out / "infsup.csv")
        if self.spectra:
            analysis.reports_to_csv(self.spectra, out / "spectra.csv")
        if self.geometry:
            buf = ["amplitude,d0,d1,min_det,beta_V"]
            buf += [",".join(repr(float(v)) for v in row) for row in self.geometry]
            (out / "infsup_geometry.csv").write_text("\n".join(buf) + "\n")


def _reduced(space, params):
    blocks = assemble_blocks(space, params)
    return apply_dirichlet(blocks, np.zeros(space.n_velocity), space.dirichlet_dofs)


def run_theory_suite(config: BenchConfig, limit: int = analysis.DENSE_LIMIT,
                     geometry_amplitudes=(0.0, 0.02, 0.05)) -> TheoryBundle:
    """Norm identities, inf-sup and spectrum sweeps on dense-feasible meshes.

    Thresholds: identities <= 1e-12; V-norm beta and M1 condition vary < 2x
    over the (k, ratio) sweep on the coarsest level; beta (unit data) drops
    < 10% per refinement; Brezzi intervals hold; an exact-inverse
    preconditioner gives eigenvalue 1.
    """
    bundle = TheoryBundle()
    spaces = {}
    for level in config.levels:
        space = build_space(build_two_region_mesh(config.geometry, level))
        n = space.n_velocity + space.n_pressure
        if n > limit:
            raise analysis.DenseSizeError(f"level {level} has {n} unknowns, above the dense limit {limit}")
        spaces[level] = space
    coarse = spaces[min(config.levels)]
    unit = MaterialParams()

    # norm identities
    worst = max(analysis.norm_identity_check(coarse, p, compute_r(p), config.samples, config.seed)
                for p in [unit] + [config.material(k, q) for k in config.dts for q in config.density_ratios])
    bundle.checks.append(CheckResult("norm identities", worst, 1e-12, worst <= 1e-12))

    # parameter sweep on the coarsest mesh
    betas = {kind: [] for kind in ("V", "V_Q", "H1")}
    conds, brezzi_ok = [], True
    for k in config.dts:
        for q in config.density_ratios:
            params = config.material(k, q)
            prob = _reduced(coarse, params)
            r = compute_r(params)
            gram = analysis.h1_gram(coarse, prob)
            for kind in betas:
                rep = analysis.infsup_constant(prob, r, kind, gram=gram, level=min(config.levels), params=params)
                bundle.infsup.append(rep)
                betas[kind].append(rep.beta)
            spec = analysis.preconditioned_spectrum(build_system(prob, params, "stabilized"), "M1", "diagonal",
                                                    params=params)
            bundle.spectra.append(spec)
            conds.append(spec.condition)
            brezzi_ok &= bool(spec.within_brezzi) and spec.max_imag <= 1e-10
    for kind in ("V", "V_Q"):
        var = max(betas[kind]) / min(betas[kind])
        bundle.checks.append(CheckResult(f"beta_{kind} variation over parameters", var, 2.0, var < 2.0))
    var_h1 = max(betas["H1"]) / min(betas["H1"])
    bundle.checks.append(CheckResult("beta_H1 variation (reported only)", var_h1, math.inf, True))
    cvar = max(conds) / min(conds)
    bundle.checks.append(CheckResult("M1 diagonal condition variation", cvar, 2.0, cvar < 2.0))
    bundle.checks.append(CheckResult("Brezzi intervals", float(brezzi_ok), 1.0, brezzi_ok))

    # refinement with unit data
    level_betas = []
    for level in sorted(spaces):
        rep = analysis.infsup_constant(_reduced(spaces[level], unit), compute_r(unit), "V", level=level, params=unit)
        bundle.infsup.append(rep)
        level_betas.append(rep.beta)
    drops = [1.0 - b1 / b0 for b0, b1 in zip(level_betas, level_betas[1:])]
    worst_drop = max(drops, default=0.0)
    bundle.checks.append(CheckResult("beta_V decrease per level", worst_drop, 0.1, worst_drop < 0.1))

    # exact-inverse self test
    params = config.material(config.dts[0], config.density_ratios[0])
    system = build_system(_reduced(coarse, params), params, "stabilized")
    from .krylov import make_preconditioner
    own = make_preconditioner(system, "M1", "triangular").dense_inverse()
    selftest = analysis.preconditioned_spectrum(system, "M1", "triangular", operator=own)
    dev = float(np.abs(selftest.eigenvalues - 1.0).max())
    bundle.checks.append(CheckResult("exact-inverse self test", dev, 1e-10, dev <= 1e-10))

    # beta against interface geometry, recorded for inspection only
    if config.geometry == "cavity_halves":
        bundle.geometry = infsup_geometry_probe(coarse, unit, geometry_amplitudes)
    return bundle


def infsup_geometry_probe(space, params: MaterialParams, amplitudes):
    """beta_V on the fluid mesh moved by a sine bump of the interface, with (d0, d1)."""
    from .femcore import with_mesh
    from .meshkit import move_mesh
    mesh = space.mesh
    pairs = mesh.interface_node_pairs()
    x = mesh.nodes[pairs[:, 1], 0]
    rows = []
    for amp in amplitudes:
        datum = np.column_stack([np.zeros_like(x), amp * np.sin(np.pi * x)])
        sdisp = np.zeros((mesh.n_nodes, 2))
        sdisp[pairs[:, 1]] = datum
        motion = solve_ale_extension(mesh, datum, structure_displacement=sdisp)
        rep = geometry_report(mesh, motion)
        cur = with_mesh(space, move_mesh(mesh, motion))
        beta = analysis.infsup_constant(_reduced(cur, params), compute_r(params), "V").beta
        rows.append((amp, rep.d0, rep.d1, rep.min_det, beta))
    return rows


# ---------------------------------------------------------------------------
# time evolution


@dataclass
class EvolutionResult:
    out_dir: Path
    checkpoints: list
    reports: list
    tip: np.ndarray
    diagnostics: list


def tip_node(mesh) -> int:
    """Structure-side interface node used for the displacement history."""
    target = {"channel_flag": (0.6, 0.2), "cavity_halves": (0.5, 0.5)}.get(mesh.geometry)
    cand = np.unique(mesh.interface_edges[:, 1].ravel())
    if target is None:
        return int(cand[0])
    d = np.linalg.norm(mesh.nodes[cand] - np.asarray(target), axis=1)
    return int(cand[np.argmin(d)])


def write_checkpoint(path, state) -> None:
    with open(path, "w") as fh:
        fh.write(f"# step {state.step}\n")
        arrays = {"nodes": np.asarray(state.mesh.nodes).ravel(), "v": state.v, "p": state.p, "u_s": state.u_s}
        for name, vals in arrays.items():
            fh.write(f"{name} {len(vals)}\n")
            fh.write("\n".join(f"{x:.17g}" for x in vals))
            fh.write("\n")


def read_checkpoint(path) -> dict:
    out, lines = {}, Path(path).read_text().splitlines()
    i = 1
    while i < len(lines):
        name, n = lines[i].split()
        n = int(n)
        out[name] = np.array([float(x) for x in lines[i + 1: i + 1 + n]])
        i += 1 + n
    return out


def run_time_evolution(config: BenchConfig, g_f=(0.0, 0.0), g_s=(0.0, 0.0)) -> EvolutionResult:
    """Advance ``config.steps`` GCE steps on the first configured level, k and ratio.

    Writes ``checkpoint_XXXX.txt`` per step, ``reports.csv`` and ``tip.txt``
    (time, tip displacement y) into ``config.out``.  Mesh tangling raises
    :class:`MeshTanglingError` carrying the step index.
    """
    level, k, ratio, kind = config.levels[0], config.dts[0], config.density_ratios[0], config.preconditioners[0]
    params = config.material(k, ratio)
    space = build_space(build_two_region_mesh(config.geometry, level))
    step_cfg = StepConfig(variant=config.variant_for(kind), preconditioner=kind, mode=config.mode, tol=config.tol,
                          max_iter=config.max_iter, inflow_peak=config.inflow_peak, total_steps=config.steps,
                          g_f=tuple(g_f), g_s=tuple(g_s), ale_operator=config.ale_operator)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    tip = tip_node(space.mesh)
    tip_dof = 2 * vertex_p2(space)[tip] + 1
    state = initial_state(space)
    checkpoints, reports, diags, history = [], [], [], [(0.0, 0.0)]
    for _ in range(config.steps):
        state = gce_time_step(state, params, step_cfg)
        path = out / f"checkpoint_{state.step:04d}.txt"
        write_checkpoint(path, state)
        checkpoints.append(path)
        reports.append(state.report)
        diags.append(state.diagnostics)
        history.append((state.step * k, state.u_s[tip_dof]))
    lines = ["step,iterations,converged,final_residual,relative_divergence_residual,min_det"]
    for i, (rep, dg) in enumerate(zip(reports, diags), 1):
        lines.append(f"{i},{rep.iterations},{int(rep.converged)},{rep.final_residual:.6e},"
                     f"{float(dg['relative_divergence_residual']):.6e},{dg['min_det']:.6e}")
    (out / "reports.csv").write_text("\n".join(lines) + "\n")
    tip_arr = np.array(history)
    np.savetxt(out / "tip.txt", tip_arr, fmt="%.17g", header="time tip_displacement_y")
    return EvolutionResult(out, checkpoints, reports, tip_arr, diags)


def export_meshes(config: BenchConfig):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for level in config.levels:
        path = out / f"{config.geometry}_level{level}.mesh"
        write_mesh(build_two_region_mesh(config.geometry, level), path)
        paths.append(path)
    return paths
