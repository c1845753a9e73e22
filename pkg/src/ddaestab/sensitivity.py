"""Derivatives of eigenvalue objectives with respect to controller parameters.

All three objectives (spectral abscissa, gamma_0, robust difference
abscissa) are driven by a single active eigenvalue at points of
differentiability, so their gradients follow from first-order perturbation
of a simple eigenvalue: for Delta(lam; p) v = 0 with left/right nullvectors
u, v,

    d lam / d p_j = - (u^H dDelta/dp_j v) / (u^H dDelta/dlam v),

and analogously for the dominant eigenvalue of the difference-part matrix
on the torus, holding the maximizing phases fixed (envelope argument).
C_D is differentiated implicitly through f(C_D; p) = 1.  Every sample
carries a ``differentiable`` flag; the optimizer treats flagged points by
perturbation and gradient sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .asymptotic import ThetaGrid, maximize_torus_radius, robust_difference_abscissa, _dominant_triple
from .model import AffineFamily, AssumptionViolation, Decomposition
from .spectrum import RootOptions, char_matrix, char_matrix_derivative, compute_roots

__all__ = [
    "GradientSample",
    "DerivativeBreakdown",
    "root_derivative",
    "abscissa_gradient",
    "gamma0_gradient",
    "CD_gradient",
]

#: smallest/second-smallest singular value ratio above which a root counts as simple
SIMPLE_SIGMA_RATIO = 1e3


class DerivativeBreakdown(RuntimeError):
    """The simple-eigenvalue perturbation formula does not apply here."""


@dataclass(frozen=True)
class GradientSample:
    """Objective value with its parameter gradient at one point.

    ``active`` describes the eigenvalue or torus point driving the value;
    ``differentiable`` is a heuristic flag (dominant eigenvalue simple and
    the maximizer unique) — when False the gradient is a best-effort branch
    gradient and the caller should not trust first-order models.
    """

    value: float
    gradient: np.ndarray
    active: dict
    differentiable: bool


def _d_char_d_p(family: AffineFamily, lam: complex) -> np.ndarray:
    """Stack of dDelta/dp_j = -sum_i coeff_ij exp(-lam tau_i), shape (n_p, n, n)."""
    out = np.zeros((family.n_p, family.n, family.n), dtype=complex)
    for coeff, tau in zip(family.coeffs, family.taus):
        out -= coeff * np.exp(-lam * tau)
    return out


def root_derivative(family: AffineFamily, p, lam: complex) -> np.ndarray:
    """d lam / d p for a simple characteristic root of the system at p.

    Raises :class:`DerivativeBreakdown` when the root fails the simplicity
    proxy (singular value ratio) or the lam-derivative denominator
    vanishes.
    """
    system = family.assemble(p)
    Delta = char_matrix(system, lam)
    U, s, Vh = la.svd(Delta)
    if len(s) > 1 and s[-2] <= SIMPLE_SIGMA_RATIO * s[-1]:
        raise DerivativeBreakdown(
            f"root not simple enough: sigma ratio {s[-2]:.2e}/{s[-1]:.2e}"
        )
    u = U[:, -1]
    v = Vh[-1].conj()
    denom = u.conj() @ char_matrix_derivative(system, lam) @ v
    scale = max(1.0, float(np.max(np.abs(Delta))) if Delta.size else 1.0)
    if abs(denom) <= 1e-12 * scale:
        raise DerivativeBreakdown(f"derivative denominator {abs(denom):.2e} too small")
    dD = _d_char_d_p(family, lam)
    numer = np.einsum("a,jab,b->j", u.conj(), dD, v)
    return -numer / denom


def abscissa_gradient(family: AffineFamily, p, opts: RootOptions | None = None) -> GradientSample:
    """Gradient of the spectral abscissa at p via its rightmost simple root."""
    opts = opts or RootOptions()
    system = family.assemble(p)
    from dataclasses import replace

    rs = compute_roots(system, replace(opts, difference_warning=False), _correct_margin=0.25)
    n_p = family.n_p
    if rs.corrected.size == 0:
        return GradientSample(-math.inf, np.zeros(n_p), {"root": None}, False)
    lam = complex(rs.corrected[0])
    if lam.imag < 0:
        lam = lam.conjugate()
    tie = False
    for other in rs.corrected[1:]:
        other = complex(other)
        if abs(other - lam) <= opts.dedup_tol or abs(other - lam.conjugate()) <= opts.dedup_tol:
            continue
        if abs(other.real - lam.real) <= opts.dedup_tol:
            tie = True
            break
    try:
        grad = root_derivative(family, p, lam).real
        ok = not tie
    except DerivativeBreakdown:
        grad = np.zeros(n_p)
        ok = False
    return GradientSample(lam.real, grad, {"root": lam}, ok)


def _difference_data(family: AffineFamily, p, rank_tol: float = 1e-10):
    """(U, V, W, X_k, M_k) of the difference part at p; AssumptionViolation if singular."""
    nu, U, V, _, _ = family.nullspace_bases(rank_tol)
    if nu == 0:
        return nu, U, V, None, None, None
    mats = family.matrices(p)
    W = U.T @ mats[0] @ V
    sv = np.linalg.svd(W, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise AssumptionViolation(float(sv[-1]))
    Winv = np.linalg.inv(W)
    X = [U.T @ A @ V for A in mats[1:]]
    M = [Winv @ Xk for Xk in X]
    return nu, U, V, W, X, M


def _delayed_coeff_blocks(family: AffineFamily, U, V) -> bool:
    """True when some delayed coefficient matrix touches the difference block."""
    for coeff in family.coeffs[1:]:
        for j in range(family.n_p):
            if np.any(np.abs(U.T @ coeff[j] @ V) > 0.0):
                return True
    return False


def _torus_gradient(family: AffineFamily, p, weights, tmax, U, V, W, M):
    """Gradient of rho(sum_k w_k M_k(p) e^{j theta*_k}) at the fixed maximizer.

    Also returns df/dzeta data needed by the implicit C_D formula.
    """
    mu, uu, vv, uv, defective, simple = _dominant_triple(tmax.S)
    Winv = np.linalg.inv(W)
    phases = np.exp(1j * tmax.theta)
    taus = np.asarray(family.taus[1:])

    n_p = family.n_p
    grad = np.zeros(n_p)
    absmu = abs(mu)
    if defective or absmu == 0.0:
        return grad, None, False
    for j in range(n_p):
        Wdot = U.T @ family.coeffs[0][j] @ V
        Tdot = sum(
            (U.T @ family.coeffs[i + 1][j] @ V) * weights[i] * phases[i]
            for i in range(len(taus))
        )
        dS = Winv @ (Tdot - Wdot @ tmax.S)
        dmu = (uu.conj() @ dS @ vv) / uv
        grad[j] = (np.conj(mu) * dmu).real / absmu
    dS_dzeta = sum(
        -taus[i] * weights[i] * phases[i] * M[i] for i in range(len(taus))
    )
    dmu_dzeta = (uu.conj() @ dS_dzeta @ vv) / uv
    df_dzeta = (np.conj(mu) * dmu_dzeta).real / absmu
    return grad, df_dzeta, (simple and not tmax.tie)


def gamma0_gradient(family: AffineFamily, p, grid: ThetaGrid | None = None) -> GradientSample:
    """Gradient of gamma_0 at p, holding the maximizing phases fixed."""
    n_p = family.n_p
    nu, U, V, W, X, M = _difference_data(family, p)
    if nu == 0:
        return GradientSample(0.0, np.zeros(n_p), {"nu": 0}, True)
    weights = np.ones(len(M))
    tmax = maximize_torus_radius(M, weights, grid)
    if tmax.value == 0.0:
        constant = not _delayed_coeff_blocks(family, U, V)
        return GradientSample(0.0, np.zeros(n_p), {"theta": tmax.theta}, constant)
    grad, _, ok = _torus_gradient(family, p, weights, tmax, U, V, W, M)
    return GradientSample(tmax.value, grad, {"theta": tmax.theta}, ok)


def CD_gradient(family: AffineFamily, p, grid: ThetaGrid | None = None) -> GradientSample:
    """Gradient of the robust difference abscissa via implicit differentiation.

    From f(C_D(p); p) = 1:  dC_D/dp = -(df/dp) / (df/dzeta), with
    df/dzeta < 0 guaranteed by strict decrease for a nonzero difference
    part with positive delays.
    """
    n_p = family.n_p
    nu, U, V, W, X, M = _difference_data(family, p)
    if nu == 0:
        return GradientSample(-math.inf, np.zeros(n_p), {"nu": 0}, True)
    dec = Decomposition.from_bases(
        family.assemble(p), U, V, *family.nullspace_bases()[3:],
    )
    zeta = robust_difference_abscissa(dec, grid)
    if not math.isfinite(zeta):
        constant = not _delayed_coeff_blocks(family, U, V)
        return GradientSample(-math.inf, np.zeros(n_p), {}, constant)
    taus = np.asarray(family.taus[1:])
    weights = np.exp(-zeta * taus)
    tmax = maximize_torus_radius(M, weights, grid)
    grad_f, df_dzeta, ok = _torus_gradient(family, p, weights, tmax, U, V, W, M)
    if df_dzeta is None or df_dzeta >= -1e-14:
        return GradientSample(zeta, np.zeros(n_p), {"theta": tmax.theta}, False)
    return GradientSample(zeta, -grad_f / df_dzeta, {"theta": tmax.theta, "zeta": zeta}, ok)
