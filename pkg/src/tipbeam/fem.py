"""Hermite-cubic finite elements for the clamped-free beam with a tip body.

Dof ordering is ``(v_0, theta_0, v_1, theta_1, ..., v_n, theta_n)``.  The
clamped end removes ``v_0, theta_0``; "constrained" vectors below drop
those two entries, "full" vectors keep them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .beam import ChannelSpec, ModelError
from .profiles import Profile, gauss_legendre

QUAD_POINTS = 6  # exact up to degree 11; rho * psi * v is degree 9


class LoadMode(str, Enum):
    CONSISTENT = "consistent"
    EXACT = "exact"


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or len(x) < 2:
            raise ModelError("mesh needs at least one element")
        if x[0] != 0.0:
            raise ModelError("mesh must start at x = 0")
        if np.any(np.diff(x) <= 0.0):
            raise ModelError("mesh nodes must be strictly increasing (zero-length element)")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, n: int, length: float) -> "Mesh":
        if n < 1:
            raise ModelError(f"need n >= 1 elements, got {n}")
        return cls(np.linspace(0.0, length, n + 1))

    @property
    def n_elements(self) -> int:
        return len(self.nodes) - 1

    @property
    def length(self) -> float:
        return float(self.nodes[-1])

    @property
    def layout(self) -> "DofLayout":
        return DofLayout(len(self.nodes))


@dataclass(frozen=True)
class DofLayout:
    n_nodes: int

    @property
    def n_full(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_free(self) -> int:
        return self.n_full - 2

    @property
    def free(self) -> slice:
        return slice(2, self.n_full)

    @property
    def tip_value(self) -> int:
        """Tip displacement index in the constrained layout."""
        return self.n_free - 2

    @property
    def tip_slope(self) -> int:
        return self.n_free - 1

    def expand(self, a: np.ndarray) -> np.ndarray:
        """Constrained -> full layout (clamped dofs set to zero)."""
        a = np.asarray(a, dtype=float)
        out = np.zeros((self.n_full,) + a.shape[1:])
        out[2:] = a
        return out


def hermite(xi, h: float, deriv: int = 0) -> np.ndarray:
    """Hermite shape functions (or x-derivatives) at local coordinates xi in [0, 1].

    Returns an array of shape ``xi.shape + (4,)``.
    """
    xi = np.asarray(xi, dtype=float)
    one = np.ones_like(xi)
    if deriv == 0:
        cols = [1 - 3 * xi**2 + 2 * xi**3, h * (xi - 2 * xi**2 + xi**3),
                3 * xi**2 - 2 * xi**3, h * (-(xi**2) + xi**3)]
    elif deriv == 1:
        cols = [(-6 * xi + 6 * xi**2) / h, 1 - 4 * xi + 3 * xi**2,
                (6 * xi - 6 * xi**2) / h, -2 * xi + 3 * xi**2]
    elif deriv == 2:
        cols = [(-6 + 12 * xi) / h**2, (-4 + 6 * xi) / h,
                (6 - 12 * xi) / h**2, (-2 + 6 * xi) / h]
    elif deriv == 3:
        cols = [12 * one / h**3, 6 * one / h**2, -12 * one / h**3, 6 * one / h**2]
    else:
        cols = [0 * one] * 4
    return np.stack(cols, axis=-1)


def element_quadrature(x0: float, x1: float, cuts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss points/weights on [x0, x1], split at any profile breakpoints inside."""
    inner = cuts[(cuts > x0) & (cuts < x1)]
    edges = np.concatenate([[x0], inner, [x1]])
    gx, gw = gauss_legendre(QUAD_POINTS)
    h = np.diff(edges)
    pts = (edges[:-1, None] + h[:, None] * gx[None, :]).ravel()
    wts = (h[:, None] * gw[None, :]).ravel()
    return pts, wts


def _cuts(*profiles: Profile | None) -> np.ndarray:
    out = np.zeros(0)
    for p in profiles:
        if p is not None:
            out = np.union1d(out, p.breakpoints)
    return out


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _element_dofs(e: int) -> np.ndarray:
    return np.arange(2 * e, 2 * e + 4)


@dataclass(frozen=True)
class Structure:
    """Channel-independent full-layout matrices: bending stiffness, distributed mass, rho load."""

    mesh: Mesh
    K_full: np.ndarray
    M_full: np.ndarray
    L_rho_full: np.ndarray


def assemble_structure(mesh: Mesh, rho: Profile, c: Profile, *, allow_zero_rho: bool = True) -> Structure:
    """Assemble ``int c v'' w''``, ``int rho v w`` and ``int rho v`` over all dofs.

    ``rho`` may vanish (useful for element checks); ``c`` must stay positive.
    """
    if abs(mesh.length - rho.length) > 1e-12 * mesh.length or abs(mesh.length - c.length) > 1e-12 * mesh.length:
        raise ModelError("mesh domain does not match the profiles")
    nf = mesh.layout.n_full
    K = np.zeros((nf, nf))
    M = np.zeros((nf, nf))
    L = np.zeros(nf)
    cuts = _cuts(rho, c)
    for e in range(mesh.n_elements):
        x0, x1 = mesh.nodes[e], mesh.nodes[e + 1]
        h = x1 - x0
        pts, wts = element_quadrature(x0, x1, cuts)
        cv, rv = c(pts), rho(pts)
        if np.any(cv <= 0.0):
            raise ModelError(f"non-positive bending stiffness in element {e}")
        if np.any(rv < 0.0) or (not allow_zero_rho and np.any(rv <= 0.0)):
            raise ModelError(f"non-positive density in element {e}")
        xi = (pts - x0) / h
        N = hermite(xi, h)
        B = hermite(xi, h, 2)
        ke = _sym(B.T @ ((wts * cv)[:, None] * B))
        me = _sym(N.T @ ((wts * rv)[:, None] * N))
        dofs = _element_dofs(e)
        K[np.ix_(dofs, dofs)] += ke
        M[np.ix_(dofs, dofs)] += me
        L[dofs] += N.T @ (wts * rv)
    return Structure(mesh, K, M, L)


def tip_mass_matrix(layout: DofLayout, m: float, J: float) -> np.ndarray:
    """Full-layout point inertia: m on the tip value, J on the tip slope."""
    T = np.zeros((layout.n_full, layout.n_full))
    T[-2, -2] = m
    T[-1, -1] = J
    return T


def interpolate(f: Profile, mesh: Mesh) -> np.ndarray:
    """Hermite interpolant dofs (value, slope at each node), full layout."""
    x = mesh.nodes
    out = np.empty(2 * len(x))
    out[0::2] = f(x)
    out[1::2] = f(x, 1)
    return out


def evaluate(dofs: np.ndarray, mesh: Mesh, x, deriv: int = 0) -> np.ndarray:
    """Evaluate the FEM function with full-layout ``dofs`` at points ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e = np.clip(np.searchsorted(mesh.nodes, x, side="right") - 1, 0, mesh.n_elements - 1)
    x0 = mesh.nodes[e]
    h = mesh.nodes[e + 1] - x0
    out = np.empty_like(x)
    for i, (xe, he, ee) in enumerate(zip(x0, h, e)):
        out[i] = hermite((x[i] - xe) / he, he, deriv) @ dofs[2 * ee: 2 * ee + 4]
    return out


def boundary_rows(mesh: Mesh, c: Profile) -> np.ndarray:
    """Linear functionals on full dofs giving (eta''(0), (c eta'')'(0), eta''(l), (c eta'')'(l)).

    Each value comes from the end element's cubic; ``(c eta'')' = c' eta'' + c eta'''``.
    """
    nf = mesh.layout.n_full
    rows = np.zeros((4, nf))
    L = mesh.length
    for k, (e, xi, x) in enumerate([(0, 0.0, 0.0), (mesh.n_elements - 1, 1.0, L)]):
        h = mesh.nodes[e + 1] - mesh.nodes[e]
        d2 = hermite(xi, h, 2)
        d3 = hermite(xi, h, 3)
        dofs = _element_dofs(e)
        cv, dc = c(x), c(x, 1)
        rows[2 * k, dofs] = d2
        rows[2 * k + 1, dofs] = dc * d2 + cv * d3
    return rows


def recover_boundary(a: np.ndarray, mesh: Mesh, ch: ChannelSpec) -> tuple[float, float, float, float]:
    """(eta''(0), (c eta'')'(0), eta''(l), (c eta'')'(l)) for full-layout clamped dofs ``a``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (mesh.layout.n_full,):
        raise ModelError(f"expected full-layout dofs of length {mesh.layout.n_full}")
    return tuple(float(v) for v in boundary_rows(mesh, ch.c) @ a)


@dataclass(frozen=True)
class DiscreteOperators:
    """Everything the control and Lyapunov modules consume for one channel on one mesh.

    ``psi_free`` is the interpolant of psi with the clamped dofs dropped: the
    vector the consistent load and the exact discrete dissipation are built on.
    """

    mesh: Mesh
    channel: ChannelSpec
    load_mode: LoadMode
    K_full: np.ndarray
    K: np.ndarray
    M_dist: np.ndarray
    M_aug: np.ndarray
    L_rho: np.ndarray
    L_psi: np.ndarray
    psi_h: np.ndarray
    psi_free: np.ndarray
    G: np.ndarray
    K_psi: np.ndarray  # K @ psi_free, evaluated element-wise in difference form
    c_psi_dd: np.ndarray  # full layout, int c psi'' v''
    boundary: np.ndarray  # rows from boundary_rows
    psi_moment: float  # int rho psi + m psi(l)

    @property
    def layout(self) -> DofLayout:
        return self.mesh.layout

    @property
    def n(self) -> int:
        return self.layout.n_free


def assemble(mesh: Mesh, ch: ChannelSpec, load_mode: LoadMode | str = LoadMode.CONSISTENT) -> DiscreteOperators:
    load_mode = LoadMode(load_mode)
    if abs(mesh.length - ch.length) > 1e-12 * ch.length:
        raise ModelError(f"mesh spans [0, {mesh.length}] but the beam has l = {ch.length}")
    lay = mesh.layout
    st = assemble_structure(mesh, ch.rho, ch.c, allow_zero_rho=False)
    fr = lay.free
    T = tip_mass_matrix(lay, ch.m, ch.J)
    M_aug_full = st.M_full + T
    K = st.K_full[fr, fr].copy()
    M_dist = st.M_full[fr, fr].copy()
    M_aug = M_aug_full[fr, fr].copy()
    L_rho = st.L_rho_full[fr].copy()
    L_rho[lay.tip_value] += ch.m

    psi_h = interpolate(ch.psi, mesh)
    psi_free = psi_h[fr].copy()
    if load_mode is LoadMode.CONSISTENT:
        L_psi = M_aug @ psi_free
    else:
        L_psi = _exact_psi_load(mesh, ch)[fr]

    psi_clamped = psi_h.copy()
    psi_clamped[:2] = 0.0
    K_psi = stiffness_apply(mesh, ch.c, psi_clamped)[fr]

    c_psi_dd = np.zeros(lay.n_full)
    cuts = _cuts(ch.c, ch.psi)
    for e in range(mesh.n_elements):
        x0, x1 = mesh.nodes[e], mesh.nodes[e + 1]
        h = x1 - x0
        pts, wts = element_quadrature(x0, x1, cuts)
        B = hermite((pts - x0) / h, h, 2)
        c_psi_dd[_element_dofs(e)] += B.T @ (wts * ch.c(pts) * ch.psi(pts, 2))

    return DiscreteOperators(
        mesh=mesh,
        channel=ch,
        load_mode=load_mode,
        K_full=st.K_full,
        K=K,
        M_dist=M_dist,
        M_aug=M_aug,
        L_rho=L_rho,
        L_psi=L_psi,
        psi_h=psi_h,
        psi_free=psi_free,
        G=gram_matrix(mesh),
        K_psi=K_psi,
        c_psi_dd=c_psi_dd,
        boundary=boundary_rows(mesh, ch.c),
        psi_moment=ch.psi_moment(),
    )


def stiffness_apply(mesh: Mesh, c: Profile, dofs: np.ndarray) -> np.ndarray:
    """``K_full @ dofs`` without forming K.

    Curvature is built from nodal value differences, so a smooth field with
    large nodal values (e.g. psi = x - R) does not lose digits to the 1/h^3
    scale of the stiffness entries.
    """
    out = np.zeros(mesh.layout.n_full)
    cuts = _cuts(c)
    for e in range(mesh.n_elements):
        x0, x1 = mesh.nodes[e], mesh.nodes[e + 1]
        h = x1 - x0
        pts, wts = element_quadrature(x0, x1, cuts)
        xi = (pts - x0) / h
        v0, t0, v1, t1 = dofs[2 * e: 2 * e + 4]
        curv = ((12 * xi - 6) * ((v0 - v1) / h) + (6 * xi - 4) * t0 + (6 * xi - 2) * t1) / h
        out[_element_dofs(e)] += hermite(xi, h, 2).T @ (wts * c(pts) * curv)
    return out


def _exact_psi_load(mesh: Mesh, ch: ChannelSpec) -> np.ndarray:
    """int rho psi v + m psi(l) v(l) + J psi'(l) v'(l), full layout."""
    out = np.zeros(mesh.layout.n_full)
    cuts = _cuts(ch.rho, ch.psi)
    for e in range(mesh.n_elements):
        x0, x1 = mesh.nodes[e], mesh.nodes[e + 1]
        h = x1 - x0
        pts, wts = element_quadrature(x0, x1, cuts)
        N = hermite((pts - x0) / h, h)
        out[_element_dofs(e)] += N.T @ (wts * ch.rho(pts) * ch.psi(pts))
    p, dp = ch.psi_tip()
    out[-2] += ch.m * p
    out[-1] += ch.J * dp
    return out


def gram_matrix(mesh: Mesh) -> np.ndarray:
    """X-norm Gram on the extended state (a, b, phi, omega, p, q)."""
    one = Profile.constant(1.0, mesh.length)
    st = assemble_structure(mesh, one, one)
    fr = mesh.layout.free
    n = mesh.layout.n_free
    G = np.zeros((2 * n + 4, 2 * n + 4))
    G[:n, :n] = st.K_full[fr, fr]
    G[n: 2 * n, n: 2 * n] = st.M_full[fr, fr]
    G[2 * n:, 2 * n:] = np.eye(4)
    return G


def frequencies(K: np.ndarray, M: np.ndarray, count: int | None = None) -> np.ndarray:
    """Natural frequencies (rad/s) from the pencil (K, M), ascending.

    When only the lowest ``count`` are wanted the inverted pencil (M, K) is
    solved instead: its largest eigenvalues 1/w^2 are resolved to relative
    round-off, whereas the smallest eigenvalues of (K, M) carry an absolute
    error of order eps * |K| that swamps them on fine meshes.
    """
    from scipy.linalg import eigh

    if count is None:
        lam = eigh(K, M, eigvals_only=True)
        return np.sqrt(np.clip(lam, 0.0, None))
    dim = K.shape[0]
    count = min(count, dim)
    mu = eigh(M, K, eigvals_only=True, subset_by_index=[dim - count, dim - 1])
    return np.sort(1.0 / np.sqrt(mu))


def mesh_from_nodes(nodes: Sequence[float]) -> Mesh:
    return Mesh(np.asarray(nodes, dtype=float))
