"""Manufactured solution fields on the square (-1, 1)^2.

The velocity is a slightly regularised rigid-like rotation
v(x) = |x|^beta (x2, -x1)^T with beta = 1e-2 (divergence free, with
|D v| = beta |x|^beta / sqrt(2)), and the pressure is q = eta (|x|^gamma - c)
with the constant c removing the mean.  Two choices of gamma probe different
pressure regularity regimes:

* case 1: gamma = 1 - 2/p' + 1e-4, eta = 25   (q barely in W^{1,p'};
  gamma is negative for p < 3, making q unbounded at the origin);
* case 2: gamma = coef (p-2)/2 + 1e-4, eta = 1e3, where ``coef`` defaults
  to 2.5 and may be switched to beta via ``exponent_base``.

The body force g = -div S(Dv) + [grad v] v + grad q (convective term
dropped in Stokes mode) is available both in closed form and through a
finite-difference fallback of the stress divergence, so the two routes can
cross-validate each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .constitutive import ConstitutiveParams, f_map, stress

BETA = 1e-2
CASE1_ETA = 25.0
CASE2_ETA = 1e3
CASE2_COEF = 2.5
EXPONENT_MARGIN = 1e-4


@lru_cache(maxsize=None)
def mean_offset(gamma: float, n_nodes: int = 80) -> float:
    """Mean of |x|^gamma over (-1, 1)^2.

    By the eightfold symmetry of the square the integral reduces to a
    one-dimensional smooth integral over a half-diagonal sector:

        <|.|^gamma> = 2/(gamma+2) * int_0^{pi/4} sec(t)^{gamma+2} dt,

    evaluated with Gauss-Legendre quadrature.
    """
    if gamma <= -2.0:
        raise ValueError("gamma must exceed -2 for |x|^gamma to be integrable")
    x, w = roots_legendre(n_nodes)
    theta = (x + 1.0) * (math.pi / 8.0)
    vals = np.cos(theta) ** (-(gamma + 2.0))
    integral = (math.pi / 8.0) * np.sum(w * vals)
    return 2.0 / (gamma + 2.0) * integral


def case_parameters(case: int, params: ConstitutiveParams,
                    coef: float = CASE2_COEF,
                    exponent_base: str = "alpha") -> tuple[float, float]:
    """(gamma, eta) for the two pressure-regularity cases."""
    if case == 1:
        return 1.0 - 2.0 / params.p_conj + EXPONENT_MARGIN, CASE1_ETA
    if case == 2:
        base = coef if exponent_base == "alpha" else BETA
        return base * (params.p - 2.0) / 2.0 + EXPONENT_MARGIN, CASE2_ETA
    raise ValueError("case must be 1 or 2")


@dataclass(frozen=True)
class ManufacturedCase:
    """One manufactured benchmark problem (fields and body force)."""

    case: int
    params: ConstitutiveParams
    gamma: float
    eta: float
    beta: float = BETA
    convective: bool = True

    @property
    def pressure_mean(self) -> float:
        return mean_offset(self.gamma)

    # -- velocity ------------------------------------------------------
    def velocity(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        rb = r ** self.beta
        return np.stack((rb * pts[..., 1], -rb * pts[..., 0]), axis=-1)

    def velocity_gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        r = np.hypot(x1, x2)
        rb = r ** self.beta
        rb2 = self.beta * r ** (self.beta - 2.0)
        grad = np.empty(pts.shape[:-1] + (2, 2))
        grad[..., 0, 0] = rb2 * x1 * x2
        grad[..., 0, 1] = rb2 * x2 * x2 + rb
        grad[..., 1, 0] = -rb2 * x1 * x1 - rb
        grad[..., 1, 1] = -rb2 * x1 * x2
        return grad

    def sym_velocity_gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        rb2 = self.beta * np.hypot(x1, x2) ** (self.beta - 2.0)
        sym = np.empty(pts.shape[:-1] + (2, 2))
        sym[..., 0, 0] = rb2 * x1 * x2
        sym[..., 1, 1] = -rb2 * x1 * x2
        sym[..., 0, 1] = 0.5 * rb2 * (x2 * x2 - x1 * x1)
        sym[..., 1, 0] = sym[..., 0, 1]
        return sym

    def sym_gradient_norm(self, pts: np.ndarray) -> np.ndarray:
        """|Dv| = beta |x|^beta / sqrt(2)."""
        r = np.linalg.norm(np.asarray(pts, dtype=float), axis=-1)
        return self.beta * r ** self.beta / math.sqrt(2.0)

    def convective_term(self, pts: np.ndarray) -> np.ndarray:
        """[grad v] v = -|x|^{2 beta} x."""
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        return -(r ** (2.0 * self.beta))[..., None] * pts

    # -- pressure ------------------------------------------------------
    def pressure(self, pts: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(pts, dtype=float), axis=-1)
        return self.eta * (r ** self.gamma - self.pressure_mean)

    def pressure_gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        return (self.eta * self.gamma
                * r ** (self.gamma - 2.0))[..., None] * pts

    # -- stress --------------------------------------------------------
    def stress_field(self, pts: np.ndarray) -> np.ndarray:
        return stress(self.sym_velocity_gradient(pts), self.params)

    def f_field(self, pts: np.ndarray) -> np.ndarray:
        return f_map(self.sym_velocity_gradient(pts), self.params)

    def stress_divergence(self, pts: np.ndarray) -> np.ndarray:
        """div S(Dv) in closed form.

        With s = |Dv| = b r^beta (b = beta/sqrt(2)) and rot = (x2, -x1):

            div S = [ (p-2)(delta+s)^{p-3} b beta^2 r^{2 beta - 2} / 2
                      + (delta+s)^{p-2} beta (beta+2) r^{beta-2} / 2 ] rot
        """
        pts = np.asarray(pts, dtype=float)
        p, delta = self.params.p, self.params.delta
        beta = self.beta
        b = beta / math.sqrt(2.0)
        r = np.linalg.norm(pts, axis=-1)
        s = b * r ** beta
        coef = ((p - 2.0) * (delta + s) ** (p - 3.0)
                * 0.5 * b * beta ** 2 * r ** (2.0 * beta - 2.0)
                + (delta + s) ** (p - 2.0)
                * 0.5 * beta * (beta + 2.0) * r ** (beta - 2.0))
        rot = np.stack((pts[..., 1], -pts[..., 0]), axis=-1)
        return coef[..., None] * rot

    def stress_divergence_fd(self, pts: np.ndarray,
                             rel_step: float = 1e-6) -> np.ndarray:
        """Central finite differences of x -> S(Dv(x)), row-wise divergence."""
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        step = rel_step * np.maximum(r, 1e-3)
        out = np.zeros(pts.shape)
        for j in range(2):
            shift = np.zeros_like(pts)
            shift[..., j] = step[..., 0]
            splus = self.stress_field(pts + shift)
            sminus = self.stress_field(pts - shift)
            out += (splus[..., :, j] - sminus[..., :, j]) / (2.0 * step)
        return out

    # -- body force ----------------------------------------------------
    def body_force(self, pts: np.ndarray, fd: bool = False) -> np.ndarray:
        """g = -div S(Dv) + [grad v] v + grad q (convective part optional)."""
        div_s = (self.stress_divergence_fd(pts) if fd
                 else self.stress_divergence(pts))
        g = -div_s + self.pressure_gradient(pts)
        if self.convective:
            g = g + self.convective_term(pts)
        return g

    def boundary_velocity(self, pts: np.ndarray) -> np.ndarray:
        """Dirichlet datum v* = trace of the exact velocity."""
        return self.velocity(pts)


def make_case(case: int, p: float, delta: float = 1e-4,
              convective: bool = True, coef: float = CASE2_COEF,
              exponent_base: str = "alpha") -> ManufacturedCase:
    """Build a benchmark case from the headline parameters."""
    params = ConstitutiveParams(p=p, delta=delta)
    gamma, eta = case_parameters(case, params, coef=coef,
                                 exponent_base=exponent_base)
    return ManufacturedCase(case=case, params=params, gamma=gamma, eta=eta,
                            convective=convective)
