"""Power-law constitutive relations with (p, delta)-structure.

The scalar potential is phi(t) = int_0^t (delta + s)^(p-2) s ds and its
shifted versions phi_a use delta + a in place of delta.  The extra-stress
tensor derived from it is S(A) = (delta + |sym A|)^(p-2) sym A, with the
natural nonlinear transform F(A) = (delta + |sym A|)^((p-2)/2) sym A whose
increments are comparable to the shifted potentials.

Everything is vectorised: tensor arguments have shape (..., 2, 2), scalar
arguments broadcast.  Conjugates and Luxembourg norms are evaluated by
bisection on monotone one-dimensional maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConstitutiveParams:
    """Exponent p in (1, inf) and regularisation delta >= 0."""

    p: float
    delta: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError("p must exceed 1")
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")

    @property
    def p_conj(self) -> float:
        """Conjugate exponent p' = p / (p - 1)."""
        return self.p / (self.p - 1.0)


def sym(a: np.ndarray) -> np.ndarray:
    """Symmetric part of (..., 2, 2) tensors."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def frobenius_norm(a: np.ndarray) -> np.ndarray:
    """Frobenius norm over the trailing (2, 2) axes."""
    return np.sqrt(np.sum(a * a, axis=(-2, -1)))


def _power(base: np.ndarray, expo: float) -> np.ndarray:
    """base**expo with 0**negative mapped to 0 (used where a zero base
    always multiplies a zero tensor)."""
    base = np.asarray(base, dtype=float)
    if expo >= 0.0:
        return base ** expo
    out = np.zeros_like(base)
    mask = base > 0.0
    out[mask] = base[mask] ** expo
    return out


def _require_nonnegative(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError(f"{name} must be nonnegative")
    return x


def phi_prime_shifted(t, shift, params: ConstitutiveParams) -> np.ndarray:
    """Derivative of the shifted potential: (delta + a + t)^(p-2) t."""
    t = _require_nonnegative(t, "t")
    base = params.delta + _require_nonnegative(shift, "shift") + t
    return _power(base, params.p - 2.0) * t


def phi_prime(t, params: ConstitutiveParams) -> np.ndarray:
    return phi_prime_shifted(t, 0.0, params)


def phi_second(t, params: ConstitutiveParams) -> np.ndarray:
    """phi''(t) = (delta + t)^(p-3) ((p-1) t + delta), positive for t > 0."""
    t = np.asarray(t, dtype=float)
    base = params.delta + t
    return _power(base, params.p - 3.0) * ((params.p - 1.0) * t + params.delta)


def phi_shifted(t, shift, params: ConstitutiveParams) -> np.ndarray:
    """Shifted potential phi_a(t) = int_0^t (delta + a + s)^(p-2) s ds.

    With d = delta + a and x = t/d the closed form is

        phi_a(t) = d^p [ expm1(p u) / p - expm1((p-1) u) / (p-1) ],
        u = log1p(x),

    but the two expm1 terms agree to O(u^2) and cancel catastrophically
    for x << 1, so in that regime the binomial series of the defining
    integral, d^p x^2 sum_j C(p-2, j) x^j / (j+2), is used instead.
    """
    p = params.p
    t, d = np.broadcast_arrays(
        _require_nonnegative(t, "t"),
        params.delta + _require_nonnegative(shift, "shift"))
    out = np.empty(t.shape, dtype=float)
    pos = d > 0.0
    out[~pos] = t[~pos] ** p / p
    x = t[pos] / d[pos]
    dp = d[pos] ** p
    small = x <= 0.5
    xs = x[small]
    total = np.full_like(xs, 0.5)
    coef, powx = 1.0, np.ones_like(xs)
    for j in range(1, 80):
        coef *= (p - 1.0 - j) / j
        powx = powx * xs
        total += coef / (j + 2.0) * powx
    vals = np.empty(x.shape, dtype=float)
    vals[small] = dp[small] * xs * xs * total
    u = np.log1p(x[~small])
    vals[~small] = dp[~small] * (np.expm1(p * u) / p
                                 - np.expm1((p - 1.0) * u) / (p - 1.0))
    out[pos] = vals
    return out


def phi(t, params: ConstitutiveParams) -> np.ndarray:
    return phi_shifted(t, 0.0, params)


def phi_conjugate_shifted(s, shift, params: ConstitutiveParams) -> np.ndarray:
    """Convex conjugate (phi_a)*(s) = sup_t (s t - phi_a(t)).

    phi_a' is continuous, strictly increasing and onto [0, inf), so the
    maximiser solves phi_a'(t) = s; it is found by bracketing and bisection.
    """
    s, shift = np.broadcast_arrays(_require_nonnegative(s, "s"),
                                   _require_nonnegative(shift, "shift"))
    hi = np.ones_like(s)
    for _ in range(200):
        low = phi_prime_shifted(hi, shift, params) < s
        if not low.any():
            break
        hi[low] *= 2.0
    lo = np.zeros_like(s)
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        below = phi_prime_shifted(mid, shift, params) < s
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t_star = 0.5 * (lo + hi)
    # The supremum is nonnegative (t = 0 is admissible); clamp the tiny
    # negative values produced when s = 0 drives t_star to roundoff level.
    return np.maximum(s * t_star - phi_shifted(t_star, shift, params), 0.0)


def phi_conjugate(s, params: ConstitutiveParams) -> np.ndarray:
    return phi_conjugate_shifted(s, 0.0, params)


def stress_shifted(a: np.ndarray, shift, params: ConstitutiveParams) -> np.ndarray:
    """Shifted stress S_a(A) = (delta + a + |sym A|)^(p-2) sym A."""
    asym = sym(np.asarray(a, dtype=float))
    norm = frobenius_norm(asym)
    base = params.delta + np.asarray(shift, dtype=float) + norm
    return _power(base, params.p - 2.0)[..., None, None] * asym


def stress(a: np.ndarray, params: ConstitutiveParams) -> np.ndarray:
    return stress_shifted(a, 0.0, params)


def f_map(a: np.ndarray, params: ConstitutiveParams) -> np.ndarray:
    """Natural transform F(A) = (delta + |sym A|)^((p-2)/2) sym A."""
    asym = sym(np.asarray(a, dtype=float))
    norm = frobenius_norm(asym)
    factor = _power(params.delta + norm, 0.5 * (params.p - 2.0))
    return factor[..., None, None] * asym


def stress_shifted_tangent(a: np.ndarray, shift,
                           params: ConstitutiveParams) -> np.ndarray:
    """Derivative of A -> S_a(A) as a (..., 2, 2, 2, 2) tensor.

    With g(t) = (delta + a + t)^(p-2) and n = |sym A|:

        DS_a(A)[B] = g'(n) (sym A : B) / n * sym A + g(n) sym B,

    the first term vanishing continuously as n -> 0.
    """
    asym = sym(np.asarray(a, dtype=float))
    norm = frobenius_norm(asym)
    base = params.delta + np.asarray(shift, dtype=float) + norm
    g = _power(base, params.p - 2.0)
    gp = (params.p - 2.0) * _power(base, params.p - 3.0)
    safe = np.where(norm > 0.0, norm, 1.0)
    coef = np.where(norm > 0.0, gp / safe, 0.0)
    rank1 = coef[..., None, None, None, None] * (
        asym[..., :, :, None, None] * asym[..., None, None, :, :])
    eye = np.eye(2)
    symmetriser = 0.5 * (np.einsum("ik,jl->ijkl", eye, eye)
                         + np.einsum("il,jk->ijkl", eye, eye))
    return rank1 + g[..., None, None, None, None] * symmetriser


def stress_tangent(a: np.ndarray, params: ConstitutiveParams) -> np.ndarray:
    return stress_shifted_tangent(a, 0.0, params)


def modular(values, weights, shift, params: ConstitutiveParams) -> float:
    """Weighted modular rho_{phi_a}(f) = sum_i w_i phi_a(|f_i|)."""
    vals = np.abs(np.asarray(values, dtype=float))
    return float(np.sum(np.asarray(weights, dtype=float)
                        * phi_shifted(vals, shift, params)))


def luxembourg_norm(values, weights, shift, params: ConstitutiveParams,
                    bracket=(1e-8, 1e8), iterations: int = 100) -> float:
    """Luxembourg norm inf{lam > 0 : rho_{phi_a}(f / lam) <= 1}.

    The modular is strictly decreasing in lam wherever positive, so the
    norm is the unique root of rho(f / lam) = 1, found by bisection on the
    given bracket.
    """
    vals = np.abs(np.asarray(values, dtype=float))
    if not np.any(vals > 0.0):
        return 0.0
    lo, hi = bracket
    if modular(vals / hi, weights, shift, params) > 1.0:
        raise ValueError("Luxembourg norm exceeds bracket upper bound")
    if modular(vals / lo, weights, shift, params) <= 1.0:
        return lo
    for _ in range(iterations):
        mid = np.sqrt(lo * hi)
        if modular(vals / mid, weights, shift, params) > 1.0:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def delta2_constant(params: ConstitutiveParams) -> float:
    """Doubling constant sup_t phi(2t)/phi(t) = 2^max(2, p)."""
    return 2.0 ** max(2.0, params.p)
