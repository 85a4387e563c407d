"""Error norms, experimental orders of convergence, and run reports.

The exact pressure and velocity behave like powers of |x| near the origin,
so error integrals use an elevated quadrature degree on the elements that
touch the origin and the standard degree elsewhere.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constitutive import f_map, frobenius_norm
from .dgops import DGOperators
from .femspace import ContinuousLagrangeSpace, triangle_rule
from .manufactured import ManufacturedCase
from .mesh import Mesh

BULK_QUAD_DEGREE = 8
ORIGIN_QUAD_DEGREE = 12


def origin_elements(mesh: Mesh) -> np.ndarray:
    """Indices of elements with a vertex at the origin."""
    at_origin = np.where(np.all(mesh.vertices == 0.0, axis=1))[0]
    if len(at_origin) == 0:
        return np.empty(0, dtype=np.int64)
    return np.where(np.isin(mesh.triangles, at_origin).any(axis=1))[0]


def quadrature_groups(mesh: Mesh,
                      bulk_degree: int = BULK_QUAD_DEGREE,
                      origin_degree: int = ORIGIN_QUAD_DEGREE):
    """Element groups with their quadrature rules for error integrals."""
    near = origin_elements(mesh)
    mask = np.zeros(mesh.n_triangles, dtype=bool)
    mask[near] = True
    far = np.where(~mask)[0]
    return [(far, triangle_rule(bulk_degree)),
            (near, triangle_rule(origin_degree))]


def pressure_error(space: ContinuousLagrangeSpace, q_h: np.ndarray,
                   case: ManufacturedCase) -> float:
    """|| q_h - q ||_{p'} against the closed-form exact pressure."""
    p_conj = case.params.p_conj
    total = 0.0
    for elems, rule in quadrature_groups(space.mesh):
        if len(elems) == 0:
            continue
        vals = space.evaluate(q_h, rule.points, elems)
        pts = space.geometry.to_physical(rule.points, elems)
        exact = case.pressure(pts.reshape(-1, 2)).reshape(vals.shape)
        det = space.geometry.det[elems]
        total += float(np.einsum("e,q,eq->", det, rule.weights,
                                 np.abs(vals - exact) ** p_conj))
    return total ** (1.0 / p_conj)


def f_error(ops: DGOperators, v: np.ndarray, case: ManufacturedCase,
            datum=None) -> float:
    """|| F(D_h v) - F(D v) ||_2 with the lifted symmetric gradient."""
    xsym = ops.sym_grad_coefs(v, datum)
    total = 0.0
    for elems, rule in quadrature_groups(ops.mesh):
        if len(elems) == 0:
            continue
        vals = ops.X.evaluate(xsym, rule.points, elems)
        fh = f_map(vals, case.params)
        pts = ops.X.geometry.to_physical(rule.points, elems)
        fx = case.f_field(pts.reshape(-1, 2)).reshape(fh.shape)
        det = ops.X.geometry.det[elems]
        total += float(np.einsum("e,q,eq->", det, rule.weights,
                                 frobenius_norm(fh - fx) ** 2))
    return math.sqrt(total)


def eoc(errors, hs) -> list:
    """Componentwise experimental order of convergence."""
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need matching lists of length >= 2")
    if any(e <= 0 for e in errors) or any(h <= 0 for h in hs):
        raise ValueError("errors and mesh sizes must be positive")
    return [math.log(errors[i] / errors[i - 1]) / math.log(hs[i] / hs[i - 1])
            for i in range(1, len(errors))]


def least_squares_slope(hs, errors) -> float:
    """Slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(np.asarray(hs, dtype=float)),
                            np.log(np.asarray(errors, dtype=float)), 1)[0])


@dataclass
class EOCReport:
    """Per-level records of one refinement series for a single p."""

    p: float
    case: int
    mode: str
    levels: list = field(default_factory=list)
    h: list = field(default_factory=list)
    e_q: list = field(default_factory=list)
    e_f: list = field(default_factory=list)
    newton_iters: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    converged: bool = True
    config: dict = field(default_factory=dict)

    @property
    def eoc_q(self) -> list:
        return [None] + (eoc(self.e_q, self.h) if len(self.e_q) > 1 else [])

    @property
    def eoc_f(self) -> list:
        return [None] + (eoc(self.e_f, self.h) if len(self.e_f) > 1 else [])

    def rows(self):
        eq, ef = self.eoc_q, self.eoc_f
        for i, level in enumerate(self.levels):
            yield {"level": level, "h": self.h[i], "e_q": self.e_q[i],
                   "eoc_q": eq[i], "e_F": self.e_f[i], "eoc_F": ef[i],
                   "newton_iters": self.newton_iters[i],
                   "seconds": self.seconds[i]}


CSV_FIELDS = ["level", "h", "e_q", "eoc_q", "e_F", "eoc_F",
              "newton_iters", "seconds"]


def _format_cell(key, value):
    if value is None:
        return ""
    if key == "level" or key == "newton_iters":
        return str(int(value))
    if key in ("eoc_q", "eoc_F"):
        return f"{value:.6f}"
    if key == "seconds":
        return f"{value:.3f}"
    return f"{value:.12g}"


def write_csv(report: EOCReport, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_FIELDS)
        for row in report.rows():
            writer.writerow([_format_cell(k, row[k]) for k in CSV_FIELDS])


def write_json(report: EOCReport, path) -> None:
    payload = {
        "p": report.p,
        "case": report.case,
        "mode": report.mode,
        "converged": report.converged,
        "config": report.config,
        "rows": list(report.rows()),
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def format_table(report: EOCReport) -> str:
    lines = [f"p = {report.p:g}, case {report.case}, {report.mode}"
             f" ({'converged' if report.converged else 'NOT CONVERGED'})",
             f"{'level':>5} {'h':>12} {'e_q':>14} {'eoc_q':>8} "
             f"{'e_F':>14} {'eoc_F':>8} {'its':>4} {'sec':>8}"]
    for row in report.rows():
        eoc_q = "" if row["eoc_q"] is None else f"{row['eoc_q']:.3f}"
        eoc_f = "" if row["eoc_F"] is None else f"{row['eoc_F']:.3f}"
        lines.append(
            f"{row['level']:>5} {row['h']:>12.6g} {row['e_q']:>14.6e} "
            f"{eoc_q:>8} {row['e_F']:>14.6e} {eoc_f:>8} "
            f"{row['newton_iters']:>4} {row['seconds']:>8.2f}")
    return "\n".join(lines)
