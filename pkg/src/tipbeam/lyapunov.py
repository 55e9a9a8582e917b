"""The quadratic Lyapunov functional, its discrete dissipation identity and the
norm-equivalence / Friedrichs / Cauchy-Schwarz checks behind the stability bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .beam import ModelError
from .control import Gains, StabilityCertificate
from .fem import DiscreteOperators, Mesh, element_quadrature, hermite
from .profiles import Profile, integrate_product


@dataclass(frozen=True)
class LyapunovForm:
    """V(x) = x^T P x on the extended state (a, b, phi, omega, p, q).

    ``P_sim`` is the same form on the simulation state (a, b, phi, omega)
    where p, q are read off the tip dofs of b.
    """

    P: np.ndarray
    P_sim: np.ndarray
    embed: np.ndarray  # simulation state -> extended state

    def V(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        P = self.P_sim if x.shape[0] == self.P_sim.shape[0] else self.P
        if x.shape[0] != P.shape[0]:
            raise ModelError(f"state length {x.shape[0]} matches neither form")
        return np.einsum("i...,ij,j...->...", x, P, x)


def sim_embedding(n: int) -> np.ndarray:
    E = np.zeros((2 * n + 4, 2 * n + 2))
    E[: 2 * n + 2, : 2 * n + 2] = np.eye(2 * n + 2)
    E[2 * n + 2, n + n - 2] = 1.0
    E[2 * n + 3, n + n - 1] = 1.0
    return E


def build_V(ops: DiscreteOperators, g: Gains) -> LyapunovForm:
    ch = ops.channel
    n = ops.n
    ia, ib = slice(0, n), slice(n, 2 * n)
    iphi, iom, ip, iq = 2 * n, 2 * n + 1, 2 * n + 2, 2 * n + 3
    psi_l, dpsi_l = ch.psi_tip()
    Md_psi = ops.M_dist @ ops.psi_free

    Q = np.zeros((2 * n + 4, 2 * n + 4))  # matrix of 2V
    Q[ia, ia] = ops.K
    Q[ib, ib] = ops.M_dist
    Q[ib, iom] = -Md_psi
    Q[iom, ib] = -Md_psi
    Q[iphi, iphi] = g.alpha
    Q[iom, iom] = g.beta + ops.psi_free @ Md_psi + ch.m * psi_l**2 + ch.J * dpsi_l**2
    Q[ip, ip] = ch.m
    Q[ip, iom] = Q[iom, ip] = -ch.m * psi_l
    Q[iq, iq] = ch.J
    Q[iq, iom] = Q[iom, iq] = -ch.J * dpsi_l
    Q[iphi, ia] = -ch.gamma * ops.L_rho
    Q[ia, iphi] = -ch.gamma * ops.L_rho
    P = 0.5 * Q
    E = sim_embedding(n)
    P_sim = E.T @ P @ E
    return LyapunovForm(P, 0.5 * (P_sim + P_sim.T), E)


def dissipation_residual(states: np.ndarray, form: LyapunovForm, g: Gains, dt: float) -> np.ndarray:
    """V(x_{n+1}) - V(x_n) + k dt omega_mid^2 for a midpoint trajectory (rows = steps).

    The energy difference is evaluated as (x1 - x0)^T P (x1 + x0), which is the
    same quantity without the cancellation of subtracting two large values.
    """
    X = np.asarray(states, dtype=float)
    if len(X) < 2:
        return np.zeros(0)
    d = X[1:] - X[:-1]
    s = X[1:] + X[:-1]
    dV = np.einsum("ti,ij,tj->t", d, form.P_sim, s)
    om = 0.5 * s[:, -1]
    return dV + g.k * dt * om**2


@dataclass(frozen=True)
class NormEquivalence:
    lambda_min: float
    lambda_max: float
    passed: bool
    eigenvalues: np.ndarray


def norm_equivalence(form: LyapunovForm, G: np.ndarray, cert: StabilityCertificate,
                     rel_tol: float = 1e-8) -> NormEquivalence:
    """Generalized eigenvalues of (2P, G) against [M1, M2]."""
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise ModelError("Gram matrix is not positive definite") from exc
    lam = eigh(2.0 * form.P, G, eigvals_only=True)
    tol = rel_tol * cert.M2
    ok = bool(cert.feasible and lam[0] >= cert.M1 - tol and lam[-1] <= cert.M2 + tol)
    return NormEquivalence(float(lam[0]), float(lam[-1]), ok, lam)


# unweighted moment matrices on full dofs

def _unit_matrices(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    nf = mesh.layout.n_full
    mats = [np.zeros((nf, nf)) for _ in range(3)]
    for e in range(mesh.n_elements):
        x0, x1 = mesh.nodes[e], mesh.nodes[e + 1]
        h = x1 - x0
        pts, wts = element_quadrature(x0, x1, np.zeros(0))
        xi = (pts - x0) / h
        dofs = np.arange(2 * e, 2 * e + 4)
        for d, M in enumerate(mats):
            B = hermite(xi, h, d)
            M[np.ix_(dofs, dofs)] += B.T @ (wts[:, None] * B)
    return mats[0], mats[1], mats[2]


def _check_clamped(a: np.ndarray, mesh: Mesh) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape[0] != mesh.layout.n_full:
        raise ModelError(f"expected full-layout dofs of length {mesh.layout.n_full}")
    if np.any(a[:2] != 0.0):
        raise ModelError("clamped dofs must be zero")
    return a


def friedrichs_check(a: np.ndarray, mesh: Mesh) -> tuple[float, float, float]:
    """(int eta^2, l^2/2 int eta'^2, l^4/4 int eta''^2); a clamped eta orders them ascending."""
    a = _check_clamped(a, mesh)
    M0, M1, M2 = _unit_matrices(mesh)
    l = mesh.length
    return float(a @ M0 @ a), float(0.5 * l**2 * (a @ M1 @ a)), float(0.25 * l**4 * (a @ M2 @ a))


@dataclass(frozen=True)
class InequalityReport:
    friedrichs: tuple[float, float, float]
    cs_integral: tuple[float, float]  # ((int eta rho)^2, int eta^2 int rho^2)
    cs_tip: tuple[float, float]  # (eta(l)^2, l int eta'^2)
    composite: tuple[float, float]  # ((int eta rho)^2 + m^2 eta(l)^2, l^3/2 (m^2 + l/2 int rho^2) int eta''^2)

    def violations(self, rtol: float = 1e-12) -> list[str]:
        out = []
        f0, f1, f2 = self.friedrichs
        slack = rtol * max(f2, 1e-300)
        if f0 > f1 + slack or f1 > f2 + slack:
            out.append("friedrichs")
        for name, (lhs, rhs) in (("cs_integral", self.cs_integral), ("cs_tip", self.cs_tip),
                                 ("composite", self.composite)):
            if lhs > rhs * (1 + rtol) + 1e-300:
                out.append(name)
        return out

    def margins(self) -> dict[str, float]:
        """Relative slack rhs/lhs - 1 of each inequality (inf when lhs = 0)."""
        def m(lhs, rhs):
            return float("inf") if lhs == 0.0 else rhs / lhs - 1.0
        f0, f1, f2 = self.friedrichs
        return {
            "friedrichs_first": m(f0, f1),
            "friedrichs_second": m(f1, f2),
            "cs_integral": m(*self.cs_integral),
            "cs_tip": m(*self.cs_tip),
            "composite": m(*self.composite),
        }


def inequality_report(a: np.ndarray, mesh: Mesh, rho: Profile, m: float) -> InequalityReport:
    """Evaluate every inequality in the Friedrichs/Cauchy-Schwarz chain for one clamped eta."""
    from .fem import assemble_structure

    a = _check_clamped(a, mesh)
    M0, M1, M2 = _unit_matrices(mesh)
    l = mesh.length
    one = Profile.constant(1.0, l)
    L_rho = assemble_structure(mesh, rho, one).L_rho_full
    i0, i1, i2 = a @ M0 @ a, a @ M1 @ a, a @ M2 @ a
    rho_sq = integrate_product(rho, rho)
    eta_rho = L_rho @ a
    tip = a[-2]
    return InequalityReport(
        friedrichs=(float(i0), float(0.5 * l**2 * i1), float(0.25 * l**4 * i2)),
        cs_integral=(float(eta_rho**2), float(i0 * rho_sq)),
        cs_tip=(float(tip**2), float(l * i1)),
        composite=(float(eta_rho**2 + m**2 * tip**2), float(0.5 * l**3 * (m**2 + 0.5 * l * rho_sq) * i2)),
    )
