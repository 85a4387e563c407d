"""Residual and tangent assembly for the stabilized primal LDG system.

Unknowns are packed as (velocity coefficients, pressure nodal values, one
scalar multiplier) with the multiplier enforcing the zero-mean pressure
condition.  For a test function z the momentum residual reads

    (S(D_h v) - 1/2 v x v - q I, D_h z)
        - (g - 1/2 [G_h v] v, z)
        + alpha < S_a(h^-1 [[(v - v*) x n]]), [[z x n]] >,

with the solution-side lifted gradients carrying the boundary datum v* and
the test side homogeneous; the shift is a = {|elementwise mean of D_h v|}
per face.  The divergence row tests tr(G_h v) against continuous pressure
functions, and Stokes mode drops both convective contributions.

Tangents are exact except that the state dependence of the stabilization
shift a is deliberately not differentiated (the shift is frozen at the
linearisation point); the finite-difference verification therefore runs
with an explicitly frozen shift.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

from .constitutive import (ConstitutiveParams, stress, stress_shifted,
                           stress_shifted_tangent, stress_tangent)
from .dgops import DGOperators, block_diagonal


class DiscreteSystem:
    """Nonlinear algebraic system for one mesh, rheology and data set."""

    def __init__(self, ops: DGOperators, params: ConstitutiveParams,
                 alpha: float = 2.5, mode: str = "navier-stokes",
                 body_force=None, boundary_velocity=None):
        if mode not in ("navier-stokes", "stokes"):
            raise ValueError("mode must be 'navier-stokes' or 'stokes'")
        self.ops = ops
        self.params = params
        self.alpha = alpha
        self.mode = mode
        self.n_v = ops.V.ndof
        self.n_q = ops.Q.ndof
        self.n_dof = self.n_v + self.n_q + 1
        self.datum = ops.datum_vectors(boundary_velocity)
        if body_force is None:
            self.g_values = np.zeros(ops.cell_points.shape[:2] + (2,))
        else:
            flat = ops.cell_points.reshape(-1, 2)
            self.g_values = np.asarray(body_force(flat), dtype=float).reshape(
                ops.cell_points.shape[:2] + (2,))

    # ------------------------------------------------------------------
    # state layout
    # ------------------------------------------------------------------
    def split(self, state: np.ndarray):
        if state.shape != (self.n_dof,):
            raise ValueError("state has wrong dimension")
        return (state[:self.n_v], state[self.n_v:self.n_v + self.n_q],
                state[-1])

    def pack(self, v: np.ndarray, q: np.ndarray, lam: float) -> np.ndarray:
        return np.concatenate((v, q, [lam]))

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.n_dof)

    def face_shift_of(self, state: np.ndarray) -> np.ndarray:
        """Stabilization shift a = {|mean of D_h v|} at the given state."""
        v, _, _ = self.split(state)
        return self.ops.face_shift(self.ops.sym_grad_coefs(v, self.datum))

    # ------------------------------------------------------------------
    # residual
    # ------------------------------------------------------------------
    def residual(self, state: np.ndarray,
                 frozen_shift: np.ndarray | None = None) -> np.ndarray:
        ops = self.ops
        v, q, lam = self.split(state)
        xsym = ops.sym_grad_coefs(v, self.datum)
        dvals = ops.eval_x(xsym)
        volume = stress(dvals, self.params)

        rhs = self.g_values
        if self.mode == "navier-stokes":
            vvals = ops.eval_v(v)
            volume = volume - 0.5 * (vvals[..., :, None]
                                     * vvals[..., None, :])
            gvals = ops.eval_x(ops.grad_coefs(v, self.datum))
            rhs = rhs - 0.5 * np.einsum("eqcj,eqj->eqc", gvals, vvals)

        r_v = ops.dcoef.T @ ops.x_load(volume) - ops.v_load(rhs)
        r_v += ops.pressure_grad_block @ q

        shift = (frozen_shift if frozen_shift is not None
                 else ops.face_shift(xsym))
        jumps = ops.jump_values(v, self.datum) / ops.h
        penal = stress_shifted(jumps, shift[:, None], self.params)
        r_v += self.alpha * (ops.jump_op.T
                             @ (ops.face_weights[..., None, None]
                                * penal).ravel())

        r_q = (ops.divergence_block @ v + self.datum.div
               + lam * ops.mean_vector)
        r_lam = ops.mean_vector @ q
        return np.concatenate((r_v, r_q, [r_lam]))

    # ------------------------------------------------------------------
    # tangent
    # ------------------------------------------------------------------
    def tangent(self, state: np.ndarray,
                frozen_shift: np.ndarray | None = None):
        ops = self.ops
        nb = ops.n_modes
        n_el = ops.mesh.n_triangles
        v, _, _ = self.split(state)
        xsym = ops.sym_grad_coefs(v, self.datum)
        dvals = ops.eval_x(xsym)

        ds = stress_tangent(dvals, self.params).reshape(
            dvals.shape[0], dvals.shape[1], 4, 4)
        stress_blocks = np.einsum("e,q,eqcd,iq,jq->ecidj", ops.det,
                                  ops.cell_weights, ds, ops.basis_values,
                                  ops.basis_values).reshape(n_el, 4 * nb,
                                                            4 * nb)
        a_vv = (ops.dcoef.T @ block_diagonal(stress_blocks)
                @ ops.dcoef).tocsr()

        shift = (frozen_shift if frozen_shift is not None
                 else ops.face_shift(xsym))
        jumps = ops.jump_values(v, self.datum) / ops.h
        dsa = stress_shifted_tangent(jumps, shift[:, None],
                                     self.params).reshape(-1, 4, 4)
        scale = (self.alpha / ops.h) * ops.face_weights.ravel()
        a_vv = a_vv + (ops.jump_op.T
                       @ block_diagonal(scale[:, None, None] * dsa)
                       @ ops.jump_op).tocsr()

        if self.mode == "navier-stokes":
            vvals = ops.eval_v(v)
            gvals = ops.eval_x(ops.grad_coefs(v, self.datum))
            nq_pts = vvals.shape[1]
            # volume term -1/2 (dv x v + v x dv, D z)
            kern = np.zeros((n_el, nq_pts, 2, 2, 2))
            for c in range(2):
                for j in range(2):
                    kern[:, :, c, j, c] += vvals[:, :, j]
                    kern[:, :, c, j, j] += vvals[:, :, c]
            conv1 = np.einsum("e,q,eqcjk,iq,mq->ecjikm", ops.det,
                              ops.cell_weights, kern, ops.basis_values,
                              ops.basis_values).reshape(n_el, 4 * nb, 2 * nb)
            a_vv = a_vv - 0.5 * (ops.dcoef.T
                                 @ block_diagonal(conv1)).tocsr()
            # rhs term +1/2 ([G dv] v + [G v] dv, z)
            blk2a = np.zeros((n_el, 2, nb, 4, nb))
            half = np.einsum("e,q,mq,eqj,iq->emji", ops.det,
                             ops.cell_weights, ops.basis_values, vvals,
                             ops.basis_values)
            for c in range(2):
                for j in range(2):
                    blk2a[:, c, :, 2 * c + j, :] = half[:, :, j, :]
            a_vv = a_vv + 0.5 * (block_diagonal(
                blk2a.reshape(n_el, 2 * nb, 4 * nb)) @ ops.gcoef).tocsr()
            blk2b = np.einsum("e,q,mq,eqck,iq->ecmki", ops.det,
                              ops.cell_weights, ops.basis_values, gvals,
                              ops.basis_values).reshape(n_el, 2 * nb, 2 * nb)
            a_vv = a_vv + 0.5 * block_diagonal(blk2b).tocsr()

        mean_col = scipy.sparse.csr_matrix(
            ops.mean_vector.reshape(-1, 1))
        return scipy.sparse.bmat(
            [[a_vv, ops.pressure_grad_block, None],
             [ops.divergence_block, None, mean_col],
             [None, mean_col.T, None]], format="csc")

    # ------------------------------------------------------------------
    # diagnostics
    # ------------------------------------------------------------------
    def trilinear(self, x: np.ndarray, y: np.ndarray,
                  z: np.ndarray) -> float:
        """Convective trilinear form
        b(x, y, z) = 1/2 (z x x, G_h y) - 1/2 (y x x, G_h z)."""
        ops = self.ops
        xv, yv, zv = ops.eval_v(x), ops.eval_v(y), ops.eval_v(z)
        gy, gz = ops.eval_x(ops.gcoef @ y), ops.eval_x(ops.gcoef @ z)
        first = np.einsum("e,q,eqc,eqj,eqcj->", ops.det, ops.cell_weights,
                          zv, xv, gy)
        second = np.einsum("e,q,eqc,eqj,eqcj->", ops.det, ops.cell_weights,
                           yv, xv, gz)
        return 0.5 * float(first - second)

    def divergence_residual(self, state: np.ndarray) -> float:
        """Norm of the divergence-constraint rows at the given state."""
        v, _, _ = self.split(state)
        return float(np.linalg.norm(self.ops.divergence_block @ v
                                    + self.datum.div))
