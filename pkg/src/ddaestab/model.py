"""System classes for delay differential algebraic equations (DDAEs).

A DDAE is written as

    E x'(t) = A_0 x(t) + sum_i A_i x(t - tau_i),    0 < tau_1 < ... < tau_m,

with a possibly singular descriptor matrix E.  This module provides the
system containers, the plant/controller interconnection that produces the
closed loop in this form without eliminating inputs or outputs, the
slack-variable rewrite of neutral equations, the nullspace decomposition of
E that splits the dynamics into coupled differential and difference parts,
and the affine parameterization of closed loops by controller entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AssumptionViolation",
    "DdaeSystem",
    "PlantIo",
    "ControllerIo",
    "Decomposition",
    "AffineFamily",
    "ControllerEmbedding",
    "create_plant",
    "create_controller",
    "static_controller",
    "controller_from_gains",
    "interconnect",
    "neutral_to_ddae",
    "decompose",
    "make_controller_family",
    "plant_dynamics",
]

#: Delays closer than this are treated as the same delay (file round-trip noise).
DELAY_MERGE_TOL = 1e-12


class AssumptionViolation(RuntimeError):
    """The reduced matrix pairing the algebraic equations is numerically singular.

    Carries ``sigma_min``, the offending smallest singular value.
    """

    def __init__(self, sigma_min: float):
        super().__init__(
            "algebraic part is singular: smallest singular value of the reduced "
            f"delay-free coupling matrix is {sigma_min:.3e}"
        )
        self.sigma_min = sigma_min


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _as_term_lists(mats, delays, name: str):
    """Normalize (matrix-or-list, delay-or-list) into parallel tuples."""
    if mats is None:
        mats = []
    if delays is None:
        delays = []
    if isinstance(mats, np.ndarray) or np.isscalar(mats):
        mats = [mats]
    mats = [
        _as_matrix(mm, f"{name}[{i}]") for i, mm in enumerate(mats)
    ]
    if np.isscalar(delays):
        delays = [delays]
    delays = [float(d) for d in delays]
    if len(mats) != len(delays):
        raise ValueError(
            f"{name}: {len(mats)} matrices but {len(delays)} delays (h{name})"
        )
    for d in delays:
        if not math.isfinite(d) or d < 0:
            raise ValueError(f"{name}: delays must be finite and >= 0, got {d}")
    return tuple(_freeze(mm) for mm in mats), tuple(delays)


@dataclass(frozen=True)
class DdaeSystem:
    """Descriptor delay system E x'(t) = sum_i A_i x(t - tau_i) with tau_0 = 0."""

    E: np.ndarray
    As: tuple[np.ndarray, ...]
    taus: tuple[float, ...]

    def __post_init__(self):
        E = _as_matrix(self.E, "E")
        n = E.shape[0]
        if E.shape != (n, n):
            raise ValueError(f"E must be square, got {E.shape}")
        As = tuple(_as_matrix(A, f"A[{i}]") for i, A in enumerate(self.As))
        taus = tuple(float(t) for t in self.taus)
        if len(As) != len(taus):
            raise ValueError("number of matrices and delays differ")
        if not As:
            raise ValueError("need at least the delay-free term A_0")
        if taus[0] != 0.0:
            raise ValueError(f"first delay must be 0, got {taus[0]}")
        for i, A in enumerate(As):
            if A.shape != (n, n):
                raise ValueError(f"A[{i}] has shape {A.shape}, expected {(n, n)}")
        for a, b in zip(taus, taus[1:]):
            if not b > a:
                raise ValueError(f"delays must be strictly increasing, got {taus}")
        object.__setattr__(self, "E", _freeze(E))
        object.__setattr__(self, "As", tuple(_freeze(A) for A in As))
        object.__setattr__(self, "taus", taus)

    @property
    def n(self) -> int:
        return self.E.shape[0]

    @property
    def m(self) -> int:
        """Number of nonzero delays."""
        return len(self.taus) - 1

    @property
    def max_delay(self) -> float:
        return self.taus[-1]

    def with_delays(self, new_taus) -> "DdaeSystem":
        """Same matrices with perturbed delays (tau_0 stays 0)."""
        new_taus = tuple(float(t) for t in new_taus)
        if len(new_taus) != self.m:
            raise ValueError("expected one value per nonzero delay")
        return DdaeSystem(self.E, self.As, (0.0,) + new_taus)


def _merge_terms(terms, n: int, tol: float = DELAY_MERGE_TOL):
    """Sum matrices at (near-)equal delays; return sorted terms with tau_0 = 0."""
    merged: list[tuple[float, np.ndarray]] = [(0.0, np.zeros((n, n)))]
    for mat, delay in terms:
        for idx, (d, acc) in enumerate(merged):
            if abs(delay - d) <= tol:
                merged[idx] = (d, acc + mat)
                break
        else:
            merged.append((float(delay), mat.astype(float).copy()))
    merged.sort(key=lambda t: t[0])
    # drop delayed terms that merged to exactly zero
    kept = [merged[0]] + [(d, A) for d, A in merged[1:] if np.any(A != 0.0)]
    taus = tuple(d for d, _ in kept)
    As = tuple(A for _, A in kept)
    return As, taus


def _validate_io(n_state, n_in, n_out, E, hE, A, hA, B1, hB1, C1, hC1, D11, hD11, who):
    def check(mats, delays, rows, cols, name):
        for i, mm in enumerate(mats):
            if mm.shape != (rows, cols):
                raise ValueError(
                    f"{who}.{name}[{i}] has shape {mm.shape}, expected {(rows, cols)}"
                )
        if len(mats) != len(delays):
            raise ValueError(f"{who}.{name} and its delay list differ in length")

    check(E, hE, n_state, n_state, "E")
    check(A, hA, n_state, n_state, "A")
    check(B1, hB1, n_state, n_in, "B1")
    check(C1, hC1, n_out, n_state, "C1")
    check(D11, hD11, n_out, n_in, "D11")
    for name, delays in (("hE", hE), ("hA", hA), ("hB1", hB1), ("hC1", hC1), ("hD11", hD11)):
        for d in delays:
            if d < 0:
                raise ValueError(f"{who}.{name}: negative delay {d}")


@dataclass(frozen=True)
class PlantIo:
    """Input-output delay system (plant side of the feedback loop).

    Field layout mirrors the delay-term lists E/hE, A/hA, B1/hB1, C1/hC1,
    D11/hD11: each matrix list is paired with a list of delays.
    """

    n_z: int
    n_u: int
    n_y: int
    E: tuple[np.ndarray, ...]
    hE: tuple[float, ...]
    A: tuple[np.ndarray, ...]
    hA: tuple[float, ...]
    B1: tuple[np.ndarray, ...]
    hB1: tuple[float, ...]
    C1: tuple[np.ndarray, ...]
    hC1: tuple[float, ...]
    D11: tuple[np.ndarray, ...]
    hD11: tuple[float, ...]

    def __post_init__(self):
        _validate_io(
            self.n_z, self.n_u, self.n_y,
            self.E, self.hE, self.A, self.hA, self.B1, self.hB1,
            self.C1, self.hC1, self.D11, self.hD11, "plant",
        )


@dataclass(frozen=True)
class ControllerIo:
    """Controller with the same delay-term layout as :class:`PlantIo`.

    Inputs are the plant outputs (n_y) and outputs the plant inputs (n_u);
    ``n_c = 0`` gives a static controller holding only D11.
    """

    n_c: int
    n_u: int
    n_y: int
    E: tuple[np.ndarray, ...]
    hE: tuple[float, ...]
    A: tuple[np.ndarray, ...]
    hA: tuple[float, ...]
    B1: tuple[np.ndarray, ...]
    hB1: tuple[float, ...]
    C1: tuple[np.ndarray, ...]
    hC1: tuple[float, ...]
    D11: tuple[np.ndarray, ...]
    hD11: tuple[float, ...]

    def __post_init__(self):
        _validate_io(
            self.n_c, self.n_y, self.n_u,
            self.E, self.hE, self.A, self.hA, self.B1, self.hB1,
            self.C1, self.hC1, self.D11, self.hD11, "controller",
        )


def _build_io(cls, dims, A, hA, B1, hB1, C1, hC1, D11, hD11, E, hE):
    A, hA = _as_term_lists(A, hA, "A")
    B1, hB1 = _as_term_lists(B1, hB1, "B1")
    C1, hC1 = _as_term_lists(C1, hC1, "C1")
    D11, hD11 = _as_term_lists(D11, hD11, "D11")

    n_state = dims[0]
    if n_state is None:
        if A:
            n_state = A[0].shape[0]
        elif B1:
            n_state = B1[0].shape[0]
        elif C1:
            n_state = C1[0].shape[1]
        else:
            n_state = 0

    if E is None and n_state > 0:
        E, hE = (np.eye(n_state),), (0.0,)
    else:
        E, hE = _as_term_lists(E, hE, "E")

    n_in = dims[1]
    if n_in is None:
        n_in = B1[0].shape[1] if B1 else (D11[0].shape[1] if D11 else 0)
    n_out = dims[2]
    if n_out is None:
        n_out = C1[0].shape[0] if C1 else (D11[0].shape[0] if D11 else 0)

    if cls is PlantIo:
        return PlantIo(n_state, n_in, n_out, E, hE, A, hA, B1, hB1, C1, hC1, D11, hD11)
    return ControllerIo(n_state, n_out, n_in, E, hE, A, hA, B1, hB1, C1, hC1, D11, hD11)


def create_plant(A, hA, B1, hB1, C1, hC1, D11=None, hD11=None, E=None, hE=None) -> PlantIo:
    """Build a plant from delay-term lists, mirroring the (A, hA, B1, hB1, C1, hC1) order.

    Single matrices and scalar delays are accepted in place of one-element
    lists; E defaults to the identity at delay 0.
    """
    return _build_io(PlantIo, (None, None, None), A, hA, B1, hB1, C1, hC1, D11, hD11, E, hE)


def create_controller(A, hA, B1, hB1, C1, hC1, D11=None, hD11=None, E=None, hE=None,
                      n_c: int | None = None) -> ControllerIo:
    """Build a controller; its inputs are plant outputs and vice versa."""
    return _build_io(ControllerIo, (n_c, None, None), A, hA, B1, hB1, C1, hC1, D11, hD11, E, hE)


def static_controller(D_c) -> ControllerIo:
    """Static output feedback u(t) = D_c y(t)."""
    D_c = _as_matrix(D_c, "D_c")
    n_u, n_y = D_c.shape
    return ControllerIo(0, n_u, n_y, (), (), (), (), (), (), (), (),
                        (_freeze(D_c),), (0.0,))


def controller_from_gains(A_c, B_c, C_c, D_c) -> ControllerIo:
    """Delay-free dynamic controller x_c' = A_c x_c + B_c y, u = C_c x_c + D_c y."""
    if A_c is None or np.size(A_c) == 0:
        return static_controller(D_c)
    return create_controller(A_c, 0.0, B_c, 0.0, C_c, 0.0, D_c, 0.0)


def _sum_descriptor(E_terms, hE, n, who):
    if any(abs(d) > DELAY_MERGE_TOL for d in hE):
        raise ValueError(
            f"{who}: delayed descriptor terms are not supported here; rewrite the "
            "neutral part with neutral_to_ddae"
        )
    if not E_terms:
        return np.eye(n) if n else np.zeros((0, 0))
    out = np.zeros((n, n))
    for mm in E_terms:
        out = out + mm
    return out


def interconnect(plant: PlantIo, controller: ControllerIo) -> DdaeSystem:
    """Close the loop between plant and controller as one DDAE.

    The state is stacked as x = [z; z_c; u; y].  The input and output
    variables are kept and defined through algebraic rows

        0 = -u(t) + sum_i C1c_i z_c(t-s_i) + sum_i D11c_i y(t-s_i)
        0 = -y(t) + sum_i C1p_i z(t-r_i)  + sum_i D11p_i u(t-r_i)

    so E = blockdiag(E_plant, E_controller, 0, 0).  Delay lists are merged;
    coefficient matrices at coinciding delays are summed.
    """
    if plant.n_u != controller.n_u or plant.n_y != controller.n_y:
        raise ValueError(
            f"port mismatch: plant has (n_u={plant.n_u}, n_y={plant.n_y}), "
            f"controller expects (n_u={controller.n_u}, n_y={controller.n_y})"
        )
    nz, nc, nu, ny = plant.n_z, controller.n_c, plant.n_u, plant.n_y
    n = nz + nc + nu + ny
    oz, oc, ou, oy = 0, nz, nz + nc, nz + nc + nu  # block offsets

    E = np.zeros((n, n))
    E[oz:oz + nz, oz:oz + nz] = _sum_descriptor(plant.E, plant.hE, nz, "plant")
    E[oc:oc + nc, oc:oc + nc] = _sum_descriptor(controller.E, controller.hE, nc, "controller")

    terms: list[tuple[np.ndarray, float]] = []

    def block(rows, cols, mat, delay):
        full = np.zeros((n, n))
        full[rows[0]:rows[0] + mat.shape[0], cols[0]:cols[0] + mat.shape[1]] = mat
        terms.append((full, delay))

    for mat, d in zip(plant.A, plant.hA):
        block((oz,), (oz,), mat, d)
    for mat, d in zip(plant.B1, plant.hB1):
        block((oz,), (ou,), mat, d)
    for mat, d in zip(controller.A, controller.hA):
        block((oc,), (oc,), mat, d)
    for mat, d in zip(controller.B1, controller.hB1):
        block((oc,), (oy,), mat, d)
    # u rows: 0 = -u + C1c z_c(.-s) + D11c y(.-s)
    block((ou,), (ou,), -np.eye(nu), 0.0)
    for mat, d in zip(controller.C1, controller.hC1):
        block((ou,), (oc,), mat, d)
    for mat, d in zip(controller.D11, controller.hD11):
        block((ou,), (oy,), mat, d)
    # y rows: 0 = -y + C1p z(.-r) + D11p u(.-r)
    block((oy,), (oy,), -np.eye(ny), 0.0)
    for mat, d in zip(plant.C1, plant.hC1):
        block((oy,), (oz,), mat, d)
    for mat, d in zip(plant.D11, plant.hD11):
        block((oy,), (ou,), mat, d)

    As, taus = _merge_terms(terms, n)
    return DdaeSystem(E, As, taus)


def plant_dynamics(plant: PlantIo) -> DdaeSystem:
    """Open-loop state dynamics E z'(t) = sum_i A_i z(t - hA_i) (inputs zero)."""
    E = _sum_descriptor(plant.E, plant.hE, plant.n_z, "plant")
    As, taus = _merge_terms(list(zip(plant.A, plant.hA)), plant.n_z)
    return DdaeSystem(E, As, taus)


def neutral_to_ddae(G, hG, H, hH) -> DdaeSystem:
    """Rewrite d/dt[z + sum_i G_i z(t-g_i)] = sum_i H_i z(t-h_i) as a DDAE.

    A slack variable v for the differentiated combination gives, with
    x = [v; z],

        v'(t) = sum_i H_i z(t - h_i)
        0     = -v(t) + z(t) + sum_i G_i z(t - g_i)

    G delays must be strictly positive (a delay-free G term belongs in the
    identity of the constraint).
    """
    G, hG = _as_term_lists(G, hG, "G")
    H, hH = _as_term_lists(H, hH, "H")
    if not G and not H:
        raise ValueError("need at least one G or H term")
    nz = (G[0] if G else H[0]).shape[0]
    for i, d in enumerate(hG):
        if d <= 0:
            raise ValueError(
                f"G[{i}] has delay {d}; delay-free difference terms must be folded "
                "into the identity of the constraint"
            )
    for name, mats in (("G", G), ("H", H)):
        for i, mm in enumerate(mats):
            if mm.shape != (nz, nz):
                raise ValueError(f"{name}[{i}] has shape {mm.shape}, expected {(nz, nz)}")

    n = 2 * nz
    E = np.zeros((n, n))
    E[:nz, :nz] = np.eye(nz)
    terms: list[tuple[np.ndarray, float]] = []

    con0 = np.zeros((n, n))
    con0[nz:, :nz] = -np.eye(nz)   # -v
    con0[nz:, nz:] = np.eye(nz)    # +z
    terms.append((con0, 0.0))
    for mat, d in zip(H, hH):
        full = np.zeros((n, n))
        full[:nz, nz:] = mat
        terms.append((full, d))
    for mat, d in zip(G, hG):
        full = np.zeros((n, n))
        full[nz:, nz:] = mat
        terms.append((full, d))

    As, taus = _merge_terms(terms, n)
    return DdaeSystem(E, As, taus)


@dataclass(frozen=True)
class Decomposition:
    """Nullspace split of a DDAE into differential and difference parts.

    U and V are orthonormal bases with U^T E = 0 and E V = 0; Uperp, Vperp
    complete them to orthogonal matrices.  The blocks are
    E11 = Uperp^T E Vperp, A_i^(jk) the corresponding two-sided projections,
    and M_i = (U^T A_0 V)^{-1} (U^T A_i V) drives the delay-difference part.
    """

    nu: int
    U: np.ndarray
    V: np.ndarray
    Uperp: np.ndarray
    Vperp: np.ndarray
    E11: np.ndarray
    A11: tuple[np.ndarray, ...]
    A12: tuple[np.ndarray, ...]
    A21: tuple[np.ndarray, ...]
    A22: tuple[np.ndarray, ...]
    M: tuple[np.ndarray, ...]
    taus: tuple[float, ...]

    @property
    def nonsingular_E(self) -> bool:
        return self.nu == 0

    @property
    def delays(self) -> tuple[float, ...]:
        """Delays paired with M (tau_1..tau_m)."""
        return self.taus[1:]

    @classmethod
    def from_bases(cls, system: DdaeSystem, U, V, Uperp, Vperp,
                   singular_tol: float = 1e-12) -> "Decomposition":
        """Assemble the block decomposition from given orthonormal bases."""
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        Uperp = np.asarray(Uperp, dtype=float)
        Vperp = np.asarray(Vperp, dtype=float)
        nu = U.shape[1]
        E11 = Uperp.T @ system.E @ Vperp
        A11 = tuple(Uperp.T @ A @ Vperp for A in system.As)
        A12 = tuple(Uperp.T @ A @ V for A in system.As)
        A21 = tuple(U.T @ A @ Vperp for A in system.As)
        A22 = tuple(U.T @ A @ V for A in system.As)
        if nu > 0:
            sv = np.linalg.svd(A22[0], compute_uv=False)
            smin = float(sv[-1]) if sv.size else 0.0
            smax = float(sv[0]) if sv.size else 0.0
            if smin <= singular_tol * max(1.0, smax):
                raise AssumptionViolation(smin)
            W = np.linalg.inv(A22[0])
            M = tuple(W @ X for X in A22[1:])
        else:
            M = tuple(np.zeros((0, 0)) for _ in system.As[1:])
        return cls(nu, U, V, Uperp, Vperp, E11, A11, A12, A21, A22, M, system.taus)


def decompose(system: DdaeSystem, rank_tol: float = 1e-10) -> Decomposition:
    """Nullspace decomposition of E via its singular value decomposition.

    The nullity is the count of singular values below ``rank_tol`` times the
    largest one.  Raises :class:`AssumptionViolation` when the delay-free
    coupling of the algebraic rows, U^T A_0 V, is singular to working
    precision.
    """
    n = system.n
    Uf, sv, Vft = np.linalg.svd(system.E)
    smax = sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > rank_tol * smax)) if smax > 0 else 0
    nu = n - rank
    U = Uf[:, rank:]
    Uperp = Uf[:, :rank]
    Vf = Vft.T
    V = Vf[:, rank:]
    Vperp = Vf[:, :rank]
    return Decomposition.from_bases(system, U, V, Uperp, Vperp)


@dataclass(frozen=True)
class AffineFamily:
    """Parameterized DDAE with matrices affine in p: A_i(p) = base_i + sum_j p_j coeff_ij."""

    E: np.ndarray
    taus: tuple[float, ...]
    base: tuple[np.ndarray, ...]
    coeffs: tuple[np.ndarray, ...]  # coeffs[i] has shape (n_p, n, n)
    n_p: int

    def __post_init__(self):
        for i, c in enumerate(self.coeffs):
            if c.shape[0] != self.n_p:
                raise ValueError(f"coeffs[{i}] first axis must be n_p={self.n_p}")

    @property
    def n(self) -> int:
        return self.E.shape[0]

    def matrices(self, p) -> list[np.ndarray]:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_p,):
            raise ValueError(f"expected parameter vector of length {self.n_p}")
        return [
            b + np.tensordot(p, c, axes=(0, 0)) if self.n_p else b.copy()
            for b, c in zip(self.base, self.coeffs)
        ]

    def assemble(self, p) -> DdaeSystem:
        return DdaeSystem(self.E, tuple(self.matrices(p)), self.taus)

    def nullspace_bases(self, rank_tol: float = 1e-10):
        """(nu, U, V, Uperp, Vperp) of E; independent of p."""
        n = self.n
        Uf, sv, Vft = np.linalg.svd(self.E)
        smax = sv[0] if sv.size else 0.0
        rank = int(np.sum(sv > rank_tol * smax)) if smax > 0 else 0
        nu = n - rank
        Vf = Vft.T
        return nu, Uf[:, rank:], Vf[:, rank:], Uf[:, :rank], Vf[:, :rank]


@dataclass(frozen=True)
class ControllerEmbedding:
    """Maps the free entries of vec[A_c B_c; C_c D_c] (column-major) to a controller."""

    n_c: int
    n_u: int
    n_y: int
    free: tuple[tuple[int, int], ...]    # (row, col) into the stacked block matrix
    fixed_values: np.ndarray             # (n_c+n_u) x (n_c+n_y), used where masked

    @property
    def n_p(self) -> int:
        return len(self.free)

    def block_matrix(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_p,):
            raise ValueError(f"expected parameter vector of length {self.n_p}")
        K = np.array(self.fixed_values, dtype=float, copy=True)
        for val, (r, c) in zip(p, self.free):
            K[r, c] = val
        return K

    def params_from_block(self, K) -> np.ndarray:
        K = np.asarray(K, dtype=float)
        return np.array([K[r, c] for r, c in self.free])

    def controller_at(self, p) -> ControllerIo:
        K = self.block_matrix(p)
        nc = self.n_c
        A_c = K[:nc, :nc]
        B_c = K[:nc, nc:]
        C_c = K[nc:, :nc]
        D_c = K[nc:, nc:]
        if nc == 0:
            return static_controller(D_c)
        return controller_from_gains(A_c, B_c, C_c, D_c)


def make_controller_family(plant: PlantIo, n_c: int, fixed_mask=None,
                           fixed_values=None) -> tuple[AffineFamily, ControllerEmbedding]:
    """Affine closed-loop family over the free controller entries.

    Parameters are the column-major vectorization of [A_c B_c; C_c D_c]
    minus the entries pinned by ``fixed_mask`` (held at ``fixed_values``,
    default 0).  Assembling at p equals interconnecting the plant with the
    controller read off p, and every closed-loop matrix is affine in p.
    """
    if n_c < 0:
        raise ValueError("controller order must be >= 0")
    n_u, n_y = plant.n_u, plant.n_y
    rows, cols = n_c + n_u, n_c + n_y
    if fixed_mask is None:
        mask = np.zeros((rows, cols), dtype=bool)
    else:
        mask = np.asarray(fixed_mask, dtype=bool)
        if mask.shape != (rows, cols):
            raise ValueError(f"fixed_mask must have shape {(rows, cols)}, got {mask.shape}")
    if fixed_values is None:
        fixed = np.zeros((rows, cols))
    else:
        fixed = np.asarray(fixed_values, dtype=float)
        if fixed.shape != (rows, cols):
            raise ValueError(f"fixed_values must have shape {(rows, cols)}")

    free = tuple(
        (r, c) for c in range(cols) for r in range(rows) if not mask[r, c]
    )
    emb = ControllerEmbedding(n_c, n_u, n_y, free, _freeze(fixed))

    n_p = emb.n_p
    base_sys = interconnect(plant, emb.controller_at(np.zeros(n_p)))
    n = base_sys.n
    coeff_stacks = [np.zeros((n_p, n, n)) for _ in base_sys.taus]
    for j in range(n_p):
        e = np.zeros(n_p)
        e[j] = 1.0
        sys_j = interconnect(plant, emb.controller_at(e))
        if sys_j.taus != base_sys.taus:
            # a unit entry can only add matrices at existing delays (controller
            # is delay-free), so delay sets must agree
            raise RuntimeError("parameterization changed the delay set")
        for i, (A_j, A_b) in enumerate(zip(sys_j.As, base_sys.As)):
            coeff_stacks[i][j] = A_j - A_b
    family = AffineFamily(
        base_sys.E, base_sys.taus, base_sys.As,
        tuple(_freeze_stack(c) for c in coeff_stacks), n_p,
    )
    return family, emb


def _freeze_stack(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out
