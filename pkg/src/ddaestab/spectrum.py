"""Characteristic roots of DDAEs.

The characteristic matrix of E x'(t) = A_0 x(t) + sum_i A_i x(t - tau_i) is

    Delta(lam) = lam E - A_0 - sum_i A_i exp(-lam tau_i)

and the roots of det Delta = 0 govern stability: the system is
exponentially stable iff the spectral abscissa (sup of root real parts) is
negative.  Roots are approximated by a spectral collocation of the solution
segment on Chebyshev extreme points over [-tau_m, 0], turned into a dense
generalized eigenvalue problem, and then sharpened individually by Newton
iteration on a bordered system, which certifies each returned root through
the smallest singular value of Delta.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la

from .model import DdaeSystem

__all__ = [
    "RootOptions",
    "RootSet",
    "Pencil",
    "NewtonResult",
    "DiscretizationSizeWarning",
    "char_matrix",
    "char_matrix_derivative",
    "cheb_nodes_diff",
    "discretize",
    "newton_correct",
    "compute_roots",
    "spectral_abscissa",
]


class DiscretizationSizeWarning(UserWarning):
    """The requested collocation order would exceed the pencil size budget."""


@dataclass(frozen=True)
class RootOptions:
    """Options for root computation.

    minimal_real_part bounds the reported region from the left (None keeps
    every root the discretization resolves).  N overrides the automatic
    collocation order; N_max caps it.  newton_tol is the residual tolerance
    relative to the problem scale; dedup_tol the distance below which two
    corrected roots count as one.
    """

    minimal_real_part: float | None = None
    N: int | None = None
    N_max: int = 160
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    dedup_tol: float = 1e-6
    size_budget: int = 3000
    difference_warning: bool = True

    def __post_init__(self):
        if self.N_max < 5:
            raise ValueError("N_max must be >= 5")
        if self.newton_tol <= 0 or self.dedup_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.N is not None and self.N < 2:
            raise ValueError("N must be >= 2")


@dataclass(frozen=True)
class RootSet:
    """Characteristic roots found for one system.

    ``corrected`` holds the Newton-certified roots (sorted by decreasing real
    part, conjugate-closed for real data) with ``residuals`` the smallest
    singular value of Delta at each; ``raw`` the uncorrected discretization
    approximations, and ``failed`` the raw starts whose correction did not
    converge.
    """

    corrected: np.ndarray
    raw: np.ndarray
    residuals: np.ndarray
    failed: np.ndarray
    N_used: int
    cd_ge_c: bool = False

    @property
    def abscissa(self) -> float:
        if self.corrected.size == 0:
            return -math.inf
        return float(np.max(self.corrected.real))

    def to_csv(self, path) -> None:
        """Write rows (re, im, residual, corrected) for corrected and failed roots."""
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im", "residual", "corrected"])
            for lam, res in zip(self.corrected, self.residuals):
                w.writerow([f"{lam.real:.16e}", f"{lam.imag:.16e}", f"{res:.3e}", 1])
            for lam in self.failed:
                w.writerow([f"{lam.real:.16e}", f"{lam.imag:.16e}", "", 0])


@dataclass(frozen=True)
class Pencil:
    """Generalized eigenvalue problem Abar x = lam Bbar x approximating the spectrum."""

    A: np.ndarray
    B: np.ndarray
    N: int


@dataclass(frozen=True)
class NewtonResult:
    root: complex
    residual: float
    converged: bool
    iterations: int


def char_matrix(system: DdaeSystem, lam: complex) -> np.ndarray:
    """Delta(lam) = lam E - A_0 - sum_i A_i exp(-lam tau_i)."""
    out = lam * system.E.astype(complex) - system.As[0]
    for A, tau in zip(system.As[1:], system.taus[1:]):
        out -= A * cmath.exp(-lam * tau)
    return out


def char_matrix_derivative(system: DdaeSystem, lam: complex) -> np.ndarray:
    """d Delta / d lam = E + sum_i tau_i A_i exp(-lam tau_i)."""
    out = system.E.astype(complex).copy()
    for A, tau in zip(system.As[1:], system.taus[1:]):
        out += tau * A * cmath.exp(-lam * tau)
    return out


def _system_scale(system: DdaeSystem) -> tuple[float, float]:
    """(||E||_2, sum_i ||A_i||_2) for the residual contract."""
    normE = la.norm(system.E, 2) if system.n else 0.0
    sumA = sum(la.norm(A, 2) for A in system.As)
    return float(normE), float(sumA)


def _equilibrated_sigma_min(Delta: np.ndarray) -> float:
    """sigma_min after scaling rows and columns to unit maximum entries.

    Far left of the spectrum the delayed terms dominate Delta by many
    orders of magnitude, which drives the plain sigma_min to zero without
    det Delta being zero; equilibration removes that artifact while true
    roots keep a (near) zero smallest singular value.
    """
    a = np.abs(Delta)
    dr = 1.0 / np.clip(a.max(axis=1), 1e-300, None)
    B = Delta * dr[:, None]
    dc = 1.0 / np.clip(np.abs(B).max(axis=0), 1e-300, None)
    return float(np.linalg.svd(B * dc[None, :], compute_uv=False)[-1])


def cheb_nodes_diff(N: int, span: float) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev extreme points mapped to [-span, 0] and the differentiation matrix.

    Node 0 is t = 0 and node N is t = -span.  Standard barycentric-style
    construction with the negative-sum trick for the diagonal.
    """
    j = np.arange(N + 1)
    x = np.cos(np.pi * j / N)
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** j
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    t = span * (x - 1.0) / 2.0
    return t, (2.0 / span) * D


def _barycentric_row(t: np.ndarray, s: float) -> np.ndarray:
    """Interpolation weights at s for values on Chebyshev extreme nodes t."""
    N = len(t) - 1
    w = (-1.0) ** np.arange(N + 1)
    w[0] *= 0.5
    w[N] *= 0.5
    diff = s - t
    hit = np.isclose(diff, 0.0, atol=1e-14 * max(1.0, abs(s)))
    row = np.zeros(N + 1)
    if np.any(hit):
        row[np.argmax(hit)] = 1.0
        return row
    q = w / diff
    return q / q.sum()


def _auto_N(system: DdaeSystem, opts: RootOptions) -> int:
    # resolution tied to the delay horizon: capture frequencies up to ~20/tau_1
    omega_cap = 20.0 / system.taus[1]
    N = max(15, math.ceil(4.0 + 2.0 * system.max_delay * omega_cap / math.pi))
    return min(N, opts.N_max)


def _apply_size_budget(n: int, N: int, budget: int) -> int:
    if n * (N + 1) > budget:
        N_low = max(5, budget // n - 1)
        warnings.warn(
            f"collocation order {N} exceeds the pencil size budget "
            f"({n * (N + 1)} > {budget}); lowered to N={N_low}",
            DiscretizationSizeWarning,
            stacklevel=3,
        )
        return N_low
    return N


def discretize(system: DdaeSystem, N: int, size_budget: int = 3000) -> Pencil:
    """Collocation pencil whose finite eigenvalues approximate the roots.

    Rows at the interior and history nodes impose that the segment
    polynomial is an eigenfunction, (D x)_j = lam x_j; the node at t = 0
    carries the system relation E (D x)_0 = A_0 x(0) + sum_i A_i x(-tau_i),
    with x(-tau_i) obtained by barycentric interpolation.  Delay-free
    systems reduce to the pencil (A_0, E).
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    n = system.n
    if system.m == 0:
        return Pencil(system.As[0].copy(), system.E.copy(), 0)
    N = _apply_size_budget(n, N, size_budget)
    t, D = cheb_nodes_diff(N, system.max_delay)
    eye = np.eye(n)
    Abar = np.kron(D, eye)
    Bbar = np.kron(np.diag(np.r_[0.0, np.ones(N)]), eye)
    top = np.kron(D[0], system.E)
    top[:, :n] -= system.As[0]
    for A, tau in zip(system.As[1:], system.taus[1:]):
        row = _barycentric_row(t, -tau)
        top -= np.kron(row, A)
    Abar[:n] = top
    return Pencil(Abar, Bbar, N)


def newton_correct(system: DdaeSystem, lam0: complex, opts: RootOptions | None = None,
                   _scale: tuple[float, float] | None = None) -> NewtonResult:
    """Sharpen a root estimate by Newton iteration on the bordered system.

    Unknowns are (v, lam) in [Delta(lam) v = 0; c^H v = 1], with the
    normalization vector c fixed to the left singular vector of Delta(lam0)
    for its smallest singular value.  Success requires the residual
    sigma_min(Delta(lam)) to fall below newton_tol times the problem scale
    and the last step to be negligible.
    """
    opts = opts or RootOptions()
    if not (math.isfinite(lam0.real) and math.isfinite(lam0.imag)):
        return NewtonResult(lam0, math.inf, False, 0)
    if -lam0.real * system.max_delay > 700.0:  # exp(-lam tau) not representable
        return NewtonResult(lam0, math.inf, False, 0)
    normE, sumA = _scale if _scale is not None else _system_scale(system)
    n = system.n
    lam = complex(lam0)
    Delta = char_matrix(system, lam)
    U, s, Vh = np.linalg.svd(Delta)
    c = U[:, -1]
    v = Vh[-1].conj()
    res = s[-1]
    artifact_strikes = 0
    for it in range(1, opts.newton_max_iter + 1):
        J = np.zeros((n + 1, n + 1), dtype=complex)
        J[:n, :n] = Delta
        J[:n, n] = char_matrix_derivative(system, lam) @ v
        J[n, :n] = c.conj()
        rhs = -np.concatenate([Delta @ v, [c.conj() @ v - 1.0]])
        try:
            sol = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            return NewtonResult(lam, res, False, it)
        if not np.all(np.isfinite(sol)):
            return NewtonResult(lam, res, False, it)
        v = v + sol[:n]
        dlam = complex(sol[n])
        lam = lam + dlam
        if not (math.isfinite(lam.real) and math.isfinite(lam.imag)):
            return NewtonResult(lam0, math.inf, False, it)
        if -lam.real * system.max_delay > 700.0:
            return NewtonResult(lam0, math.inf, False, it)
        Delta = char_matrix(system, lam)
        res = np.linalg.svd(Delta, compute_uv=False)[-1]
        scale = max(1.0, abs(lam) * normE + sumA)
        if res <= opts.newton_tol * scale:
            if (_equilibrated_sigma_min(Delta) <= opts.newton_tol * n
                    and abs(dlam) <= 1e-9 * (1.0 + abs(lam))):
                return NewtonResult(lam, float(res), True, it)
            # tiny plain residual but no convergence: the scaling-artifact
            # signature of a non-root; give up after repeated strikes
            artifact_strikes += 1
            if artifact_strikes >= 4 and abs(dlam) > 1e-6 * (1.0 + abs(lam)):
                return NewtonResult(lam, float(res), False, it)
    return NewtonResult(lam, float(res), False, opts.newton_max_iter)


def _dedup(roots: list[tuple[complex, float]], tol: float) -> list[tuple[complex, float]]:
    """Keep one representative (smallest residual) per cluster of radius tol."""
    kept: list[tuple[complex, float]] = []
    for lam, res in sorted(roots, key=lambda t: t[1]):
        if all(abs(lam - other) > tol for other, _ in kept):
            kept.append((lam, res))
    return kept


def _roots_once(system: DdaeSystem, opts: RootOptions, N: int,
                margin: float | None):
    """One discretize/correct/dedup pass at a fixed collocation order."""
    pencil = discretize(system, N, opts.size_budget)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        w = la.eigvals(pencil.A, pencil.B)
    w = w[np.isfinite(w)]
    w = w[np.abs(w) <= 1e8]
    if system.max_delay > 0:
        w = w[-w.real * system.max_delay <= 700.0]

    if opts.minimal_real_part is not None and math.isfinite(opts.minimal_real_part):
        w = w[w.real >= opts.minimal_real_part - 0.1]
    # real system data: correct the closed upper half only, mirror afterwards
    w = w[w.imag >= -opts.dedup_tol / 2]
    w = w[np.argsort(-w.real)]

    normE, sumA = _system_scale(system)
    corrected: list[tuple[complex, float]] = []
    failed: list[complex] = []
    best_re = -math.inf
    for lam0 in w:
        if margin is not None and lam0.real < best_re - margin:
            break
        r = newton_correct(system, complex(lam0), opts, _scale=(normE, sumA))
        if r.converged:
            root = r.root.conjugate() if r.root.imag < 0 else r.root
            corrected.append((root, r.residual))
            best_re = max(best_re, root.real)
        else:
            failed.append(complex(lam0))

    kept = _dedup(corrected, opts.dedup_tol)
    closed: list[tuple[complex, float]] = []
    for lam, res in kept:
        closed.append((lam, res))
        if lam.imag > opts.dedup_tol:
            closed.append((lam.conjugate(), res))
    if opts.minimal_real_part is not None and math.isfinite(opts.minimal_real_part):
        closed = [(lam, res) for lam, res in closed if lam.real >= opts.minimal_real_part]
    closed.sort(key=lambda t: (-t[0].real, -t[0].imag))
    return closed, w, failed, pencil.N


def _same_roots(a, b, tol: float) -> bool:
    if len(a) != len(b):
        return False
    key = lambda t: (t[0].real, t[0].imag)
    return all(
        abs(x[0] - y[0]) <= tol for x, y in zip(sorted(a, key=key), sorted(b, key=key))
    )


def compute_roots(system: DdaeSystem, opts: RootOptions | None = None,
                  _correct_margin: float | None = None) -> RootSet:
    """Characteristic roots by discretization, Newton correction and dedup.

    Corrected roots are filtered by minimal_real_part (when set), sorted by
    decreasing real part and closed under conjugation for real data.  When a
    left bound is requested and no explicit N is given, the collocation
    order is doubled until the corrected set in the region stops changing,
    so chains reaching into the region are not silently truncated.  The
    cd_ge_c flag mirrors the regime where the delay-difference part bounds
    the spectrum from the right (robust difference abscissa >= abscissa).
    """
    opts = opts or RootOptions()
    bounded = opts.minimal_real_part is not None and math.isfinite(opts.minimal_real_part)
    if system.m == 0:
        closed, raw, failed, N_used = _roots_once(system, opts, 2, _correct_margin)
    elif opts.N is not None:
        closed, raw, failed, N_used = _roots_once(system, opts, opts.N, _correct_margin)
    else:
        N = _auto_N(system, opts)
        if bounded:
            N = max(N, 24)
        closed, raw, failed, N_used = _roots_once(system, opts, N, _correct_margin)
        while bounded and 2 * N <= opts.N_max:
            closed2, raw2, failed2, N_used2 = _roots_once(
                system, opts, 2 * N, _correct_margin)
            stable = _same_roots(closed, closed2, opts.dedup_tol)
            closed, raw, failed, N_used = closed2, raw2, failed2, N_used2
            N *= 2
            if stable:
                break

    cd_ge_c = False
    if opts.difference_warning and system.m > 0:
        from .asymptotic import robust_difference_abscissa
        from .model import decompose

        dec = decompose(system)
        cd = robust_difference_abscissa(dec)
        c_here = max((lam.real for lam, _ in closed), default=-math.inf)
        # equality tolerance: a defective rightmost root splits by ~eps^(1/3)
        # under representation rounding, so exact comparison would flicker
        cd_ge_c = math.isfinite(cd) and cd >= c_here - 1e-4 * (1.0 + abs(cd))
        if cd_ge_c:
            warnings.warn("case C_D>=c", UserWarning, stacklevel=2)

    return RootSet(
        corrected=np.array([lam for lam, _ in closed], dtype=complex),
        raw=np.array(raw, dtype=complex),
        residuals=np.array([res for _, res in closed], dtype=float),
        failed=np.array(failed, dtype=complex),
        N_used=N_used,
        cd_ge_c=cd_ge_c,
    )


def spectral_abscissa(system: DdaeSystem, opts: RootOptions | None = None) -> float:
    """Largest real part over the corrected roots; -inf for an empty spectrum."""
    opts = opts or RootOptions()
    opts = replace(opts, difference_warning=False)
    rs = compute_roots(system, opts, _correct_margin=0.25)
    return rs.abscissa
