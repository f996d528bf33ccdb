"""Experiment drivers producing the convergence, locking and single-solve tables."""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .assembly import MaterialParams, assemble
from .config import RunConfig
from .mapping import RotationVariant
from .mesh import QuadMesh
from .solver import Solution, solve_spd
from .spaces import build_dof_map

CONVERGENCE_COLUMNS = (
    "t", "variant", "level", "n_elements", "h", "dofs",
    "triple_norm_err", "l2_err", "shear_err",
    "triple_norm_rel", "l2_rel", "shear_rel",
    "locking_ratio", "residual",
    "rate_triple_norm", "rate_l2", "rate_shear",
)
LOCKING_COLUMNS = ("t", "variant", "ratio", "residual")
SINGLE_COLUMNS = (
    "t", "variant", "n_elements", "h", "dofs", "residual",
    "triple_norm_err", "l2_err", "shear_err", "locking_ratio",
)


def fmt(value) -> str:
    """CSV cell: floats with 12 significant digits, everything else verbatim."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, RotationVariant):
        return value.value
    return str(value)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(row.get(c)) for c in columns) + "\n")
    return buf.getvalue()


@dataclass
class LevelResult:
    level: int
    n_elements: int
    h: float
    dofs: int
    triple_norm: float
    l2: float
    shear: float
    locking_ratio: float
    residual: float


@dataclass
class ErrorReport:
    """Per-level errors of one (t, variant) convergence run plus pairwise rates."""

    t: float
    variant: RotationVariant
    levels: list[LevelResult] = field(default_factory=list)
    exact_norms: tuple[float, float, float] = (1.0, 1.0, 1.0)  # triple, L2, shear

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.levels])

    def rates(self, name: str) -> np.ndarray:
        if len(self.levels) < 2:
            return np.array([])
        return analysis.convergence_rates(self.column("h"), self.column(name))

    def rows(self) -> list[dict]:
        rates = {k: self.rates(k) for k in ("triple_norm", "l2", "shear")}
        out = []
        for i, r in enumerate(self.levels):
            row = {
                "t": self.t, "variant": self.variant, "level": r.level,
                "n_elements": r.n_elements, "h": r.h, "dofs": r.dofs,
                "triple_norm_err": r.triple_norm, "l2_err": r.l2, "shear_err": r.shear,
                "triple_norm_rel": r.triple_norm / self.exact_norms[0],
                "l2_rel": r.l2 / self.exact_norms[1],
                "shear_rel": r.shear / self.exact_norms[2],
                "locking_ratio": r.locking_ratio, "residual": r.residual,
            }
            if i > 0:
                row["rate_triple_norm"] = rates["triple_norm"][i - 1]
                row["rate_l2"] = rates["l2"][i - 1]
                row["rate_shear"] = rates["shear"][i - 1]
            out.append(row)
        return out


def material(config: RunConfig, t: float) -> MaterialParams:
    return MaterialParams(E=config.E, nu=config.nu, t=t, k_shear=config.k_shear, gamma=config.gamma)


@dataclass
class SolveResult:
    mesh: QuadMesh
    params: MaterialParams
    variant: RotationVariant
    exact: analysis.ExactSolution
    solution: Solution
    dofs: int
    seconds: float

    def errors(self) -> dict:
        m, p, v, ex, sol = self.mesh, self.params, self.variant, self.exact, self.solution
        dofmap = build_dof_map(m)
        return {
            "triple_norm": analysis.triple_norm_error(m, p, v, sol, ex),
            "l2": analysis.l2_error_displacement(m, dofmap, sol.displacement, ex),
            "shear": analysis.scaled_shear_error(
                m, p, v, dofmap, sol.displacement, sol.rotation, ex, shear=sol.shear
            ),
            "locking_ratio": analysis.locking_ratio(dofmap, sol.displacement, ex),
        }


def solve_problem(mesh: QuadMesh, params: MaterialParams, variant, zero_load: bool = False) -> SolveResult:
    """Assemble and solve the clamped manufactured problem on one mesh."""
    variant = RotationVariant(variant)
    exact = analysis.ExactSolution(params.E, params.nu, params.t)
    start = time.perf_counter()
    system = assemble(mesh, params, variant, None if zero_load else exact.g)
    solution = solve_spd(system)
    return SolveResult(mesh, params, variant, exact, solution, system.size,
                       time.perf_counter() - start)


def exact_norms(mesh: QuadMesh, params: MaterialParams, variant) -> tuple[float, float, float]:
    """Norms of the exact fields measured like the errors (discrete fields set to zero)."""
    dofmap = build_dof_map(mesh)
    exact = analysis.ExactSolution(params.E, params.nu, params.t)
    zu, zt = np.zeros(dofmap.n_u), np.zeros(dofmap.n_theta)
    return (
        analysis.triple_norm(mesh, params, variant, zt, exact),
        analysis.l2_error_displacement(mesh, dofmap, zu, exact),
        analysis.scaled_shear_error(mesh, params, variant, dofmap, zu, zt, exact),
    )


def convergence_report(meshes, params: MaterialParams, variant) -> ErrorReport:
    variant = RotationVariant(variant)
    report = ErrorReport(params.t, variant)
    for level, mesh in enumerate(meshes, 1):
        res = solve_problem(mesh, params, variant)
        err = res.errors()
        report.levels.append(LevelResult(
            level=level, n_elements=mesh.n_elements, h=mesh.mesh_parameter_h, dofs=res.dofs,
            triple_norm=err["triple_norm"], l2=err["l2"], shear=err["shear"],
            locking_ratio=err["locking_ratio"], residual=res.solution.residual,
        ))
    report.exact_norms = exact_norms(meshes[-1], params, variant)
    return report


def run_convergence(config: RunConfig) -> tuple[list[ErrorReport], str]:
    meshes = config.mesh.sequence()
    reports = [convergence_report(meshes, material(config, t), config.variant) for t in config.thickness]
    rows = [row for rep in reports for row in rep.rows()]
    return reports, to_csv(CONVERGENCE_COLUMNS, rows)


def run_locking(config: RunConfig) -> tuple[list[dict], str]:
    """Locking ratio for both variants over the thickness sweep on one mesh."""
    mesh = config.mesh.finest()
    rows = []
    for variant in RotationVariant:
        for t in config.thickness:
            res = solve_problem(mesh, material(config, t), variant)
            ratio = analysis.locking_ratio(build_dof_map(mesh), res.solution.displacement, res.exact)
            rows.append({"t": t, "variant": variant, "ratio": ratio,
                         "residual": res.solution.residual})
    return rows, to_csv(LOCKING_COLUMNS, rows)


def run_single(config: RunConfig) -> tuple[list[dict], str]:
    """One solve per thickness on the finest mesh of the configured mesh.

    With ``config.dump`` set, writes ``x y u`` per displacement node of the
    first thickness for external plotting.
    """
    mesh = config.mesh.finest()
    rows = []
    for i, t in enumerate(config.thickness):
        res = solve_problem(mesh, material(config, t), config.variant, config.zero_load)
        row = {"t": t, "variant": config.variant, "n_elements": mesh.n_elements,
               "h": mesh.mesh_parameter_h, "dofs": res.dofs,
               "residual": res.solution.residual}
        row.update({k + ("_err" if k != "locking_ratio" else ""): v for k, v in res.errors().items()})
        rows.append(row)
        if config.dump and i == 0:
            write_displacement_dump(mesh, res.solution, config.dump)
    return rows, to_csv(SINGLE_COLUMNS, rows)


def write_displacement_dump(mesh: QuadMesh, solution: Solution, path) -> None:
    coords = build_dof_map(mesh).node_coords
    lines = ["x y u"] + [
        f"{fmt(x)} {fmt(y)} {fmt(u)}" for (x, y), u in zip(coords.tolist(), solution.displacement.tolist())
    ]
    Path(path).write_text("\n".join(lines) + "\n")


RUNNERS = {"convergence": run_convergence, "locking": run_locking, "single-solve": run_single}
