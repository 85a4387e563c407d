"""Discrete operators for the local discontinuous Galerkin discretisation.

Everything is factored through coefficient vectors of broken polynomial
spaces.  For a velocity field v with coefficients in the vector space V and
any tensor field W, the volume pairing (W, D z) with the discrete symmetric
gradient of a test function z reduces to

    (W, D z) = (Pi_X W)^T  M_X  (DCoef z),

because D z lies in the broken tensor space X: DCoef is the sparse
coefficient map of the lifted symmetric gradient, M_X the (diagonal) modal
mass matrix, and Pi_X the element-wise L2 projection evaluated by cell
quadrature.  Face couplings enter through a jump evaluation operator J
(coefficients -> jump values at face quadrature points) and its adjoint
lifting R (face values -> tensor coefficients), with

    (R(j), X)_Omega = <j, {X}>_Gamma          for all X in X_h.

The discrete gradient of the solution carries the boundary datum v* through
the affine offset vectors returned by :meth:`DGOperators.datum_vectors`;
test functions always use the homogeneous operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .constitutive import ConstitutiveParams, frobenius_norm, phi_shifted
from .femspace import (BrokenSpace, ContinuousLagrangeSpace, edge_rule,
                       triangle_rule)
from .mesh import Mesh

_SYM4 = np.array([[1.0, 0.0, 0.0, 0.0],
                  [0.0, 0.5, 0.5, 0.0],
                  [0.0, 0.5, 0.5, 0.0],
                  [0.0, 0.0, 0.0, 1.0]])
_TRACE4 = np.array([[1.0, 0.0, 0.0, 1.0]])


def block_diagonal(blocks: np.ndarray) -> scipy.sparse.bsr_matrix:
    """Block-diagonal sparse matrix from an (n, r, c) stack of blocks."""
    n, r, c = blocks.shape
    return scipy.sparse.bsr_matrix(
        (blocks, np.arange(n), np.arange(n + 1)), shape=(n * r, n * c))


@dataclass(frozen=True)
class DatumVectors:
    """Affine offsets induced by a boundary datum v*.

    jump:      v* tensor values at face quadrature points, flattened;
               subtracting it from J v gives the jump of v - v*.
    grad:      X coefficients of the lifting R(jump), the offset turning
               the homogeneous lifted gradient into the datum-aware one.
    sym_grad:  symmetric part of ``grad``.
    div:       offset of the divergence-constraint residual.
    """

    jump: np.ndarray
    grad: np.ndarray
    sym_grad: np.ndarray
    div: np.ndarray


class DGOperators:
    """Sparse operators and quadrature tables for one mesh and degree.

    Velocity lives in the broken vector space V of degree k, lifted
    gradients in the broken tensor space X of degree k, pressure in the
    continuous Lagrange space of degree ``pressure_degree`` (default k).
    """

    def __init__(self, mesh: Mesh, degree: int = 1, quad_degree: int = 8,
                 pressure_degree: int | None = None):
        self.mesh = mesh
        self.degree = degree
        self.quad_degree = quad_degree
        self.V = BrokenSpace(mesh, degree, ncomp=2)
        self.X = BrokenSpace(mesh, degree, ncomp=4)
        self.Q = ContinuousLagrangeSpace(
            mesh, pressure_degree if pressure_degree is not None else degree)
        self.h = mesh.h_max

        self.cell_rule = triangle_rule(quad_degree)
        self.face_rule = edge_rule(quad_degree)
        basis = self.V.basis
        self.n_modes = basis.n_modes
        self.basis_values = basis.eval(self.cell_rule.points)    # (nb, Q)
        self.basis_grads = basis.grad(self.cell_rule.points)     # (nb, Q, 2)
        self.cell_points = self.V.geometry.to_physical(self.cell_rule.points)
        self.det = self.V.geometry.det
        self.cell_weights = self.cell_rule.weights
        self.pressure_values = self.Q.shape_values(self.cell_rule.points)

        self._build_face_geometry()
        self._build_operators()

        self.mass_x = self.X.mass_diagonal()
        self.mean_vector = self.Q.integral_vector()

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------
    def _build_face_geometry(self):
        mesh = self.mesh
        a = mesh.vertices[mesh.face_vertices[:, 0]]
        b = mesh.vertices[mesh.face_vertices[:, 1]]
        s = self.face_rule.points
        self.face_points = (a[:, None, :]
                            + s[None, :, None] * (b - a)[:, None, :])
        self.face_weights = (mesh.face_lengths[:, None]
                             * self.face_rule.weights[None, :])
        self.n_face_quad = len(s)
        ni = mesh.n_interior_faces
        self.n_interior = ni
        self.face_elem0 = np.concatenate(
            (mesh.interior_faces[:, 0], mesh.boundary_faces[:, 0]))
        self.face_elem1 = np.concatenate(
            (mesh.interior_faces[:, 2],
             np.full(mesh.n_boundary_faces, -1, dtype=np.int64)))

        geo = self.V.geometry
        nf, qf = mesh.n_faces, self.n_face_quad
        pts = self.face_points.reshape(-1, 2)
        ref0 = geo.to_reference(np.repeat(self.face_elem0, qf), pts)
        self.trace0 = self.V.basis.eval(ref0).reshape(self.n_modes, nf, qf)
        ref1 = geo.to_reference(
            np.repeat(self.face_elem1[:ni], qf), pts.reshape(nf, qf, 2)[:ni]
            .reshape(-1, 2))
        self.trace1 = self.V.basis.eval(ref1).reshape(self.n_modes, ni, qf)

    def _build_operators(self):
        mesh, nb = self.mesh, self.n_modes
        nf, qf, ni = mesh.n_faces, self.n_face_quad, self.n_interior
        nv, nx = self.V.ndof, self.X.ndof
        normals = mesh.face_normals
        n_rows_face = nf * qf * 4

        # --- jump operator J: v coefficients -> [[v x n]] values ---------
        f = np.arange(nf)[:, None, None, None, None]
        q = np.arange(qf)[None, :, None, None, None]
        c = np.arange(2)[None, None, :, None, None]
        j = np.arange(2)[None, None, None, :, None]
        m = np.arange(nb)[None, None, None, None, :]
        shape = (nf, qf, 2, 2, nb)
        rows = np.broadcast_to((f * qf + q) * 4 + c * 2 + j, shape)
        cols0 = np.broadcast_to(
            (self.face_elem0[f.ravel()][:, None, None, None, None] * 2 + c)
            * nb + m, shape)
        t0 = np.moveaxis(self.trace0, 0, -1)           # (nf, qf, nb)
        vals0 = np.broadcast_to(
            (t0[:, :, None, None, :] * normals[:, None, None, :, None]),
            shape)
        rows_i = rows[:ni]
        cols1 = np.broadcast_to(
            (self.face_elem1[:ni][:, None, None, None, None] * 2 + c)
            * nb + m, (ni, qf, 2, 2, nb))
        t1 = np.moveaxis(self.trace1, 0, -1)
        vals1 = np.broadcast_to(
            -(t1[:, :, None, None, :] * normals[:ni, None, None, :, None]),
            (ni, qf, 2, 2, nb))
        self.jump_op = scipy.sparse.coo_matrix(
            (np.concatenate((vals0.ravel(), vals1.ravel())),
             (np.concatenate((rows.ravel(), rows_i.ravel())),
              np.concatenate((cols0.ravel(), cols1.ravel())))),
            shape=(n_rows_face, nv)).tocsr()

        # --- lifting R: face tensor values -> X coefficients -------------
        omega = np.where(np.arange(nf) < ni, 0.5, 1.0)
        cj = np.arange(4)[None, None, :, None]
        i = np.arange(nb)[None, None, None, :]
        lshape = (nf, qf, 4, nb)
        f4 = np.arange(nf)[:, None, None, None]
        q4 = np.arange(qf)[None, :, None, None]
        lcols = np.broadcast_to((f4 * qf + q4) * 4 + cj, lshape)
        lrows0 = np.broadcast_to(
            (self.face_elem0[:, None, None, None] * 4 + cj) * nb + i, lshape)
        lvals0 = np.broadcast_to(
            (omega[:, None] * self.face_weights)[:, :, None, None]
            * t0[:, :, None, :]
            / self.det[self.face_elem0][:, None, None, None], lshape)
        lrows1 = np.broadcast_to(
            (self.face_elem1[:ni][:, None, None, None] * 4 + cj) * nb + i,
            (ni, qf, 4, nb))
        lvals1 = np.broadcast_to(
            (0.5 * self.face_weights[:ni])[:, :, None, None]
            * t1[:, :, None, :]
            / self.det[self.face_elem1[:ni]][:, None, None, None],
            (ni, qf, 4, nb))
        self.lift_op = scipy.sparse.coo_matrix(
            (np.concatenate((lvals0.ravel(), lvals1.ravel())),
             (np.concatenate((lrows0.ravel(), lrows1.ravel())),
              np.concatenate((lcols.ravel(), lcols[:ni].ravel())))),
            shape=(nx, n_rows_face)).tocsr()

        # --- element-wise gradient: v coefficients -> X coefficients -----
        gref = np.einsum("q,mqj,iq->jmi", self.cell_weights,
                         self.basis_grads, self.basis_values)
        gblk = np.einsum("ejk,jmi->ekim", self.V.geometry.inv_jac, gref)
        e = np.arange(mesh.n_triangles)[:, None, None, None, None]
        cg = np.arange(2)[None, :, None, None, None]
        k = np.arange(2)[None, None, :, None, None]
        ig = np.arange(nb)[None, None, None, :, None]
        mg = np.arange(nb)[None, None, None, None, :]
        gshape = (mesh.n_triangles, 2, 2, nb, nb)
        grows = np.broadcast_to((e * 4 + cg * 2 + k) * nb + ig, gshape)
        gcols = np.broadcast_to((e * 2 + cg) * nb + mg, gshape)
        gvals = np.broadcast_to(gblk[:, None], gshape)
        self.broken_grad = scipy.sparse.coo_matrix(
            (gvals.ravel(), (grows.ravel(), gcols.ravel())),
            shape=(nx, nv)).tocsr()

        # --- composite operators ------------------------------------------
        self.sym_x = scipy.sparse.kron(
            scipy.sparse.identity(mesh.n_triangles, format="csr"),
            scipy.sparse.kron(scipy.sparse.csr_matrix(_SYM4),
                              scipy.sparse.identity(nb, format="csr")),
            format="csr")
        self.trace_x = scipy.sparse.kron(
            scipy.sparse.identity(mesh.n_triangles, format="csr"),
            scipy.sparse.kron(scipy.sparse.csr_matrix(_TRACE4),
                              scipy.sparse.identity(nb, format="csr")),
            format="csr")
        self.gcoef = (self.broken_grad
                      - (self.lift_op @ self.jump_op)).tocsr()
        self.dcoef = (self.sym_x @ self.gcoef).tocsr()

        # --- mixed mass between broken scalars and the pressure space ----
        local = np.einsum("q,iq,nq->in", self.cell_weights,
                          self.basis_values, self.pressure_values)
        n_en = self.Q.n_en
        erow = np.arange(mesh.n_triangles)[:, None, None]
        mrows = np.broadcast_to(
            erow * nb + np.arange(nb)[None, :, None],
            (mesh.n_triangles, nb, n_en))
        mcols = np.broadcast_to(self.Q.element_dofs[:, None, :],
                                (mesh.n_triangles, nb, n_en))
        mvals = self.det[:, None, None] * local[None]
        self.mix = scipy.sparse.coo_matrix(
            (np.broadcast_to(mvals, (mesh.n_triangles, nb, n_en)).ravel(),
             (mrows.ravel(), mcols.ravel())),
            shape=(mesh.n_triangles * nb, self.Q.ndof)).tocsr()

        self.pressure_grad_block = (-self.dcoef.T
                                    @ (self.trace_x.T @ self.mix)).tocsr()
        self.divergence_block = (self.mix.T
                                 @ (self.trace_x @ self.gcoef)).tocsr()

    # ------------------------------------------------------------------
    # datum handling
    # ------------------------------------------------------------------
    def datum_vectors(self, vstar=None) -> DatumVectors:
        """Affine offsets for an inhomogeneous boundary datum.

        ``vstar`` is a callable (N, 2) points -> (N, 2) values, or None for
        the homogeneous problem.
        """
        nf, qf = self.mesh.n_faces, self.n_face_quad
        jump = np.zeros(nf * qf * 4)
        if vstar is not None:
            bpts = self.face_points[self.n_interior:]
            vals = np.asarray(vstar(bpts.reshape(-1, 2)), dtype=float)
            vals = vals.reshape(bpts.shape[0], qf, 2)
            tensor = (vals[:, :, :, None]
                      * self.mesh.face_normals[self.n_interior:,
                                               None, None, :])
            jump = jump.reshape(nf, qf, 4)
            jump[self.n_interior:] = tensor.reshape(-1, qf, 4)
            jump = jump.ravel()
        grad = self.lift_op @ jump
        sym_grad = self.sym_x @ grad
        div = self.mix.T @ (self.trace_x @ grad)
        return DatumVectors(jump=jump, grad=grad, sym_grad=sym_grad, div=div)

    # ------------------------------------------------------------------
    # field evaluation
    # ------------------------------------------------------------------
    def eval_x(self, xcoefs: np.ndarray) -> np.ndarray:
        """Tensor values at cell quadrature points, (E, Q, 2, 2)."""
        vals = np.einsum("eci,iq->eqc", self.X.reshape(xcoefs),
                         self.basis_values)
        return vals.reshape(vals.shape[0], vals.shape[1], 2, 2)

    def eval_v(self, v: np.ndarray) -> np.ndarray:
        """Velocity values at cell quadrature points, (E, Q, 2)."""
        return np.einsum("eci,iq->eqc", self.V.reshape(v), self.basis_values)

    def eval_q(self, qvec: np.ndarray) -> np.ndarray:
        """Pressure values at cell quadrature points, (E, Q)."""
        return qvec[self.Q.element_dofs] @ self.pressure_values

    def x_load(self, values: np.ndarray) -> np.ndarray:
        """Load vector L with L_(e,cj,i) = (values, basis) over element e."""
        vals = values.reshape(values.shape[0], values.shape[1], 4)
        return np.einsum("e,q,eqc,iq->eci", self.det, self.cell_weights,
                         vals, self.basis_values).ravel()

    def v_load(self, values: np.ndarray) -> np.ndarray:
        """Load vector against velocity basis functions."""
        return np.einsum("e,q,eqc,iq->eci", self.det, self.cell_weights,
                         values, self.basis_values).ravel()

    # ------------------------------------------------------------------
    # jumps, traces, lifting
    # ------------------------------------------------------------------
    def jump_values(self, v: np.ndarray, datum: DatumVectors | None = None
                    ) -> np.ndarray:
        """Values of [[(v - v*) x n]] at face points, (nf, qf, 2, 2)."""
        vals = self.jump_op @ v
        if datum is not None:
            vals = vals - datum.jump
        return vals.reshape(self.mesh.n_faces, self.n_face_quad, 2, 2)

    def lift(self, face_values: np.ndarray) -> np.ndarray:
        """X coefficients of the lifting of face tensor values."""
        return self.lift_op @ face_values.ravel()

    def grad_coefs(self, v: np.ndarray, datum: DatumVectors | None = None
                   ) -> np.ndarray:
        """Coefficients of the lifted gradient (datum-aware if given)."""
        out = self.gcoef @ v
        if datum is not None:
            out = out + datum.grad
        return out

    def sym_grad_coefs(self, v: np.ndarray, datum: DatumVectors | None = None
                       ) -> np.ndarray:
        """Coefficients of the lifted symmetric gradient."""
        out = self.dcoef @ v
        if datum is not None:
            out = out + datum.sym_grad
        return out

    def face_average_x(self, xcoefs: np.ndarray) -> np.ndarray:
        """Face averages {X} at face quadrature points, (nf, qf, 2, 2)."""
        coefs = self.X.reshape(xcoefs)
        ni = self.n_interior
        vals0 = np.einsum("fcm,mfq->fqc", coefs[self.face_elem0], self.trace0)
        out = vals0.copy()
        vals1 = np.einsum("fcm,mfq->fqc", coefs[self.face_elem1[:ni]],
                          self.trace1)
        out[:ni] = 0.5 * (vals0[:ni] + vals1)
        return out.reshape(self.mesh.n_faces, self.n_face_quad, 2, 2)

    def face_shift(self, xcoefs: np.ndarray) -> np.ndarray:
        """Per-face shift {|elementwise mean of X|}, shape (nf,)."""
        means = self.X.element_means(xcoefs).reshape(-1, 2, 2)
        mags = frobenius_norm(means)
        shift = mags[self.face_elem0]
        ni = self.n_interior
        shift[:ni] = 0.5 * (shift[:ni] + mags[self.face_elem1[:ni]])
        return shift

    # ------------------------------------------------------------------
    # integrals and modulars
    # ------------------------------------------------------------------
    def volume_integral(self, scalars: np.ndarray) -> float:
        """Integrate values given at cell quadrature points, (E, Q)."""
        return float(np.einsum("e,q,eq->", self.det, self.cell_weights,
                               scalars))

    def face_integral(self, scalars: np.ndarray) -> float:
        """Integrate values given at face quadrature points, (nf, qf)."""
        return float(np.sum(self.face_weights * scalars))

    def volume_lp_norm(self, values: np.ndarray, p: float) -> float:
        """L^p norm of point values (magnitude over trailing axes)."""
        mag = values if values.ndim == 2 else np.sqrt(
            np.sum(values.reshape(values.shape[0], values.shape[1], -1) ** 2,
                   axis=-1))
        return self.volume_integral(mag ** p) ** (1.0 / p)

    def jump_lp_norm(self, v: np.ndarray, p: float,
                     datum: DatumVectors | None = None) -> float:
        """(sum_F h int_F |h^-1 [[(v-v*) x n]]|^p ds)^(1/p)."""
        jumps = self.jump_values(v, datum)
        mag = frobenius_norm(jumps) / self.h
        return (self.h * self.face_integral(mag ** p)) ** (1.0 / p)

    def jump_pseudo_modular(self, v: np.ndarray,
                            params: ConstitutiveParams,
                            shift=0.0,
                            datum: DatumVectors | None = None) -> float:
        """sum_F h int_F phi_a(h^-1 |[[(v - v*) x n]]|) ds."""
        jumps = self.jump_values(v, datum)
        mag = frobenius_norm(jumps) / self.h
        shift = np.asarray(shift, dtype=float)
        if shift.ndim == 1:
            shift = shift[:, None]
        return self.h * self.face_integral(phi_shifted(mag, shift, params))
