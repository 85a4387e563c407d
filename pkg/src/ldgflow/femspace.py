"""Reference quadrature, orthonormal modal bases, and finite element spaces.

Broken (element-wise polynomial) spaces carry an L2-orthonormal modal basis
on the reference triangle T = {xi, eta >= 0, xi + eta <= 1}, so every element
mass matrix is det(J) times the identity and local projections are plain
weighted sums.  Scalar, vector and 2x2-tensor valued variants share the same
machinery through a component count.

Continuous Lagrange spaces (degree 1 and 2) provide the pressure space; they
are nodal (vertices, plus edge midpoints at degree 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.special import roots_jacobi, roots_legendre

from .mesh import Mesh

_SHAPES = {1: (), 2: (2,), 4: (2, 2)}


@dataclass(frozen=True)
class TriangleRule:
    """Quadrature on the reference triangle, exact to ``degree``."""

    points: np.ndarray   # (nq, 2)
    weights: np.ndarray  # (nq,)
    degree: int


@dataclass(frozen=True)
class EdgeRule:
    """Gauss quadrature on [0, 1], exact to ``degree``."""

    points: np.ndarray   # (nq,)
    weights: np.ndarray  # (nq,)
    degree: int


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Collapsed Gauss-Legendre x Gauss-Jacobi(1,0) product rule.

    All weights are positive and the rule integrates total degree
    ``degree`` exactly with ceil((degree+1)/2)^2 points.
    """
    n = max(1, math.ceil((degree + 1) / 2))
    xa, wa = roots_legendre(n)
    xb, wb = roots_jacobi(n, 1.0, 0.0)  # weight (1 - b) on [-1, 1]
    a, b = np.meshgrid(xa, xb, indexing="ij")
    xi = (1.0 + a) * (1.0 - b) / 4.0
    eta = (1.0 + b) / 2.0
    w = np.outer(wa, wb) / 8.0
    pts = np.column_stack((xi.ravel(), eta.ravel()))
    rule = TriangleRule(pts, w.ravel(), degree)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> EdgeRule:
    n = max(1, math.ceil((degree + 1) / 2))
    x, w = roots_legendre(n)
    rule = EdgeRule((x + 1.0) / 2.0, w / 2.0, degree)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


def monomial_integral(a: int, b: int) -> float:
    """Exact value of the integral of xi^a eta^b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class ReferenceBasis:
    """L2(T)-orthonormal modal basis of total degree <= k.

    Built by a Cholesky orthonormalisation of the graded monomial basis;
    mode 0 is the constant sqrt(2).
    """

    def __init__(self, degree: int):
        self.degree = degree
        self.exponents = [(d - j, j) for d in range(degree + 1)
                          for j in range(d + 1)]
        self.n_modes = len(self.exponents)
        gram = np.array([[monomial_integral(ax + bx, ay + by)
                          for (bx, by) in self.exponents]
                         for (ax, ay) in self.exponents])
        chol = np.linalg.cholesky(gram)
        self._coef = scipy.linalg.solve_triangular(
            chol, np.eye(self.n_modes), lower=True)

    def _monomials(self, pts: np.ndarray) -> np.ndarray:
        xi, eta = pts[:, 0], pts[:, 1]
        return np.array([xi ** ax * eta ** ay for ax, ay in self.exponents])

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Basis values, shape (n_modes, npts)."""
        return self._coef @ self._monomials(np.asarray(pts, dtype=float))

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """Reference gradients, shape (n_modes, npts, 2)."""
        pts = np.asarray(pts, dtype=float)
        xi, eta = pts[:, 0], pts[:, 1]
        gx = np.array([ax * xi ** max(ax - 1, 0) * eta ** ay
                       if ax else np.zeros_like(xi)
                       for ax, ay in self.exponents])
        gy = np.array([ay * xi ** ax * eta ** max(ay - 1, 0)
                       if ay else np.zeros_like(xi)
                       for ax, ay in self.exponents])
        return np.stack((self._coef @ gx, self._coef @ gy), axis=-1)


@lru_cache(maxsize=None)
def reference_basis(degree: int) -> ReferenceBasis:
    return ReferenceBasis(degree)


class ElementGeometry:
    """Affine maps x = origin + J * ref for every triangle of a mesh."""

    def __init__(self, mesh: Mesh):
        p = mesh.vertices[mesh.triangles]
        self.origin = p[:, 0]                              # (E, 2)
        self.jac = np.stack((p[:, 1] - p[:, 0],
                             p[:, 2] - p[:, 0]), axis=-1)  # (E, 2, 2)
        self.det = (self.jac[:, 0, 0] * self.jac[:, 1, 1]
                    - self.jac[:, 0, 1] * self.jac[:, 1, 0])
        inv = np.empty_like(self.jac)
        inv[:, 0, 0] = self.jac[:, 1, 1]
        inv[:, 0, 1] = -self.jac[:, 0, 1]
        inv[:, 1, 0] = -self.jac[:, 1, 0]
        inv[:, 1, 1] = self.jac[:, 0, 0]
        self.inv_jac = inv / self.det[:, None, None]

    def to_physical(self, refpts: np.ndarray, elems=None) -> np.ndarray:
        """Map reference points into elements; shape (E, npts, 2)."""
        origin = self.origin if elems is None else self.origin[elems]
        jac = self.jac if elems is None else self.jac[elems]
        return origin[:, None, :] + np.einsum("eij,qj->eqi", jac, refpts)

    def to_reference(self, elems: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Pull physical points (..., 2) back into the given elements."""
        inv = self.inv_jac[elems]
        rel = pts - self.origin[elems]
        return np.einsum("...ij,...j->...i", inv, rel)


class BrokenSpace:
    """Discontinuous element-wise polynomial space of degree <= k.

    ``ncomp`` is 1 (scalar), 2 (vector) or 4 (2x2 tensor, row-major
    components).  Coefficient vectors are flat with dof layout
    (element, component, mode).
    """

    def __init__(self, mesh: Mesh, degree: int, ncomp: int = 1):
        if ncomp not in _SHAPES:
            raise ValueError("ncomp must be 1, 2 or 4")
        self.mesh = mesh
        self.degree = degree
        self.ncomp = ncomp
        self.value_shape = _SHAPES[ncomp]
        self.basis = reference_basis(degree)
        self.geometry = ElementGeometry(mesh)
        self.n_modes = self.basis.n_modes
        self.ndof = mesh.n_triangles * ncomp * self.n_modes

    def reshape(self, u: np.ndarray) -> np.ndarray:
        """View a flat coefficient vector as (E, ncomp, n_modes)."""
        return u.reshape(self.mesh.n_triangles, self.ncomp, self.n_modes)

    def evaluate(self, u: np.ndarray, refpts: np.ndarray,
                 elems=None) -> np.ndarray:
        """Field values at reference points; shape (E, npts, *value_shape)."""
        coefs = self.reshape(u)
        if elems is not None:
            coefs = coefs[elems]
        table = self.basis.eval(refpts)
        vals = np.einsum("eci,iq->eqc", coefs, table)
        return vals.reshape(vals.shape[:2] + self.value_shape)

    def l2_project(self, f, quad_degree: int | None = None) -> np.ndarray:
        """Element-wise L2 projection of a callable f((N, 2) pts) -> values."""
        rule = triangle_rule(quad_degree if quad_degree is not None
                             else max(2 * self.degree, 8))
        pts = self.geometry.to_physical(rule.points)
        vals = np.asarray(f(pts.reshape(-1, 2)), dtype=float)
        vals = vals.reshape(pts.shape[0], len(rule.weights), self.ncomp)
        table = self.basis.eval(rule.points)
        coefs = np.einsum("q,eqc,iq->eci", rule.weights, vals, table)
        return coefs.ravel()

    def element_means(self, u: np.ndarray) -> np.ndarray:
        """Mean value per element and component, shape (E, ncomp)."""
        # Mode 0 is the constant sqrt(2) and the reference area is 1/2.
        return self.reshape(u)[:, :, 0] * math.sqrt(2.0)

    def mass_diagonal(self) -> np.ndarray:
        """Diagonal of the mass matrix in the modal basis (det J per dof)."""
        return np.repeat(self.geometry.det, self.ncomp * self.n_modes)


class ContinuousLagrangeSpace:
    """H1-conforming Lagrange space of degree 1 or 2 on a triangle mesh."""

    def __init__(self, mesh: Mesh, degree: int = 1):
        if degree not in (1, 2):
            raise NotImplementedError(
                "continuous Lagrange space implemented for degree 1 and 2")
        self.mesh = mesh
        self.degree = degree
        self.geometry = ElementGeometry(mesh)
        if degree == 1:
            self.ndof = mesh.n_vertices
            self.element_dofs = mesh.triangles.copy()
            self.nodes = mesh.vertices.copy()
        else:
            elem_face = _element_face_table(mesh)
            self.ndof = mesh.n_vertices + mesh.n_faces
            self.element_dofs = np.hstack(
                (mesh.triangles, mesh.n_vertices + elem_face))
            midpts = 0.5 * (mesh.vertices[mesh.face_vertices[:, 0]]
                            + mesh.vertices[mesh.face_vertices[:, 1]])
            self.nodes = np.vstack((mesh.vertices, midpts))
        self.n_en = self.element_dofs.shape[1]

    def shape_values(self, refpts: np.ndarray) -> np.ndarray:
        """Nodal shape functions at reference points, shape (n_en, npts)."""
        refpts = np.asarray(refpts, dtype=float)
        lam = np.stack((1.0 - refpts[:, 0] - refpts[:, 1],
                        refpts[:, 0], refpts[:, 1]))
        if self.degree == 1:
            return lam
        vertex = lam * (2.0 * lam - 1.0)
        edge = np.stack([4.0 * lam[(i + 1) % 3] * lam[(i + 2) % 3]
                         for i in range(3)])
        return np.vstack((vertex, edge))

    def shape_gradients(self, refpts: np.ndarray) -> np.ndarray:
        """Reference gradients of the shape functions, (n_en, npts, 2)."""
        refpts = np.asarray(refpts, dtype=float)
        npts = refpts.shape[0]
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        if self.degree == 1:
            return np.broadcast_to(dlam[:, None, :], (3, npts, 2)).copy()
        lam = np.stack((1.0 - refpts[:, 0] - refpts[:, 1],
                        refpts[:, 0], refpts[:, 1]))
        grads = np.empty((6, npts, 2))
        for i in range(3):
            grads[i] = (4.0 * lam[i] - 1.0)[:, None] * dlam[i]
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[3 + i] = 4.0 * (lam[j][:, None] * dlam[k]
                                  + lam[k][:, None] * dlam[j])
        return grads

    def evaluate(self, q: np.ndarray, refpts: np.ndarray,
                 elems=None) -> np.ndarray:
        """Values per element at reference points, shape (E, npts)."""
        dofs = self.element_dofs if elems is None else self.element_dofs[elems]
        return q[dofs] @ self.shape_values(refpts)

    def evaluate_gradient(self, q: np.ndarray, refpts: np.ndarray) -> np.ndarray:
        """Physical gradients per element, shape (E, npts, 2)."""
        ref_grads = self.shape_gradients(refpts)
        phys = np.einsum("eji,nqj->enqi", self.geometry.inv_jac, ref_grads)
        return np.einsum("en,enqi->eqi", q[self.element_dofs], phys)

    def integral_vector(self, quad_degree: int | None = None) -> np.ndarray:
        """Vector m with m_i the integral of shape function i."""
        rule = triangle_rule(quad_degree if quad_degree is not None
                             else 2 * self.degree)
        table = self.shape_values(rule.points)
        local = table @ rule.weights                     # (n_en,)
        m = np.zeros(self.ndof)
        np.add.at(m, self.element_dofs,
                  self.geometry.det[:, None] * local[None, :])
        return m

    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolation of a callable f((N, 2) pts) -> (N,)."""
        return np.asarray(f(self.nodes), dtype=float)

    def mass_matrix(self, quad_degree: int | None = None):
        rule = triangle_rule(quad_degree if quad_degree is not None
                             else 2 * self.degree)
        table = self.shape_values(rule.points)           # (n_en, nq)
        local = np.einsum("q,iq,jq->ij", rule.weights, table, table)
        blocks = self.geometry.det[:, None, None] * local[None]
        rows = np.repeat(self.element_dofs, self.n_en, axis=1).ravel()
        cols = np.tile(self.element_dofs, (1, self.n_en)).ravel()
        mat = scipy.sparse.coo_matrix(
            (blocks.ravel(), (rows, cols)), shape=(self.ndof, self.ndof))
        return mat.tocsr()

    def load_vector(self, f, groups) -> np.ndarray:
        """Right-hand side (f, psi_i), quadrature chosen per element group.

        ``groups`` is an iterable of (element_index_array, TriangleRule).
        """
        rhs = np.zeros(self.ndof)
        for elems, rule in groups:
            if len(elems) == 0:
                continue
            table = self.shape_values(rule.points)
            pts = self.geometry.to_physical(rule.points, elems)
            vals = np.asarray(f(pts.reshape(-1, 2)), dtype=float)
            vals = vals.reshape(len(elems), -1)
            local = np.einsum("q,eq,iq->ei", rule.weights, vals, table)
            np.add.at(rhs, self.element_dofs[elems],
                      self.geometry.det[elems, None] * local)
        return rhs

    def l2_project(self, f, groups=None, quad_degree: int = 8) -> np.ndarray:
        """Global L2 projection onto the space."""
        if groups is None:
            groups = [(np.arange(self.mesh.n_triangles),
                       triangle_rule(quad_degree))]
        mass = self.mass_matrix(quad_degree=2 * self.degree)
        rhs = self.load_vector(f, groups)
        return scipy.sparse.linalg.spsolve(mass.tocsc(), rhs)

    def zero_mean(self, q: np.ndarray) -> np.ndarray:
        """Shift by a constant so the integral over the domain vanishes."""
        m = self.integral_vector()
        area = m.sum()
        return q - (m @ q) / area


def prolong_broken(coarse: BrokenSpace, fine: BrokenSpace,
                   u: np.ndarray) -> np.ndarray:
    """Transfer broken coefficients to the once-refined mesh.

    Relies on the refinement convention that element e has children
    4e .. 4e+3; the parent polynomial is projected onto each child (an
    exact representation, since children carry the same degree).
    """
    n_coarse = coarse.mesh.n_triangles
    if fine.mesh.n_triangles != 4 * n_coarse or fine.degree != coarse.degree:
        raise ValueError("fine space is not a refinement of the coarse one")
    rule = triangle_rule(2 * fine.degree)
    nq = len(rule.weights)
    pts = fine.geometry.to_physical(rule.points).reshape(-1, 2)
    parents = np.repeat(np.arange(n_coarse), 4)
    ref = coarse.geometry.to_reference(np.repeat(parents, nq), pts)
    table = coarse.basis.eval(ref).reshape(
        coarse.n_modes, fine.mesh.n_triangles, nq)
    vals = np.einsum("ecm,meq->eqc", coarse.reshape(u)[parents], table)
    out = np.einsum("q,eqc,iq->eci", rule.weights, vals,
                    fine.basis.eval(rule.points))
    return out.ravel()


def prolong_continuous(coarse: ContinuousLagrangeSpace,
                       fine: ContinuousLagrangeSpace,
                       q: np.ndarray) -> np.ndarray:
    """Evaluate a continuous field at the nodes of the refined mesh."""
    n_coarse = coarse.mesh.n_triangles
    if fine.mesh.n_triangles != 4 * n_coarse or fine.degree != coarse.degree:
        raise ValueError("fine space is not a refinement of the coarse one")
    parents = np.repeat(np.arange(n_coarse), 4)
    pos = fine.nodes[fine.element_dofs]
    ref = coarse.geometry.to_reference(np.repeat(parents, fine.n_en),
                                       pos.reshape(-1, 2))
    table = coarse.shape_values(ref).reshape(
        coarse.n_en, fine.mesh.n_triangles, fine.n_en)
    vals = np.einsum("ek,kea->ea", q[coarse.element_dofs[parents]], table)
    out = np.zeros(fine.ndof)
    out[fine.element_dofs.ravel()] = vals.ravel()
    return out


def _element_face_table(mesh: Mesh) -> np.ndarray:
    """Face index of each element's three local edges, shape (E, 3)."""
    table = np.full((mesh.n_triangles, 3), -1, dtype=np.int64)
    for face, (ep, lp, em, lm) in enumerate(mesh.interior_faces):
        table[ep, lp] = face
        table[em, lm] = face
    offset = mesh.n_interior_faces
    for i, (elem, ledge) in enumerate(mesh.boundary_faces):
        table[elem, ledge] = offset + i
    return table
