"""Radial block operators of the linearized theory around an n-vortex.

The gauge-fixed Hessian decomposes over angular Fourier modes m into
4-component radial operators

    L_m = -Delta_r Id + V_m,

assembled here in two unitarily equivalent forms: the "hat" basis with
diagonal centrifugal weights [m + n(1-a)]^2, [m - n(1-a)]^2, (m-1)^2,
(m+1)^2 and the rotated basis with m^2/r^2 on the diagonal.  The m = 0
block splits into two 2-component operators: the Hessian of the radial
energy (M0) and a positive complement (N0 = G0* G0).

At critical coupling the blocks factor as L_m = F_m* F_m through a
first-order operator F_m annihilating the 2n modes W_m built from the
bound states chi_m of  -Delta_r + m^2/r^2 + f^2.  Away from lam = 1 the
same structure survives as the splitting

    L_m = tilde_F_m* tilde_F_m + J M_m,      J = diag{1,0,0,0},

with q = n(1-a) f / (r f') measuring the distance from critical coupling;
tilde_F_m annihilates tilde_W_m for every lam, and the scalar M_m carries
the stability sign: its quadratic form is definite with sign(1 - lam),
which is what makes |n| >= 2 vortices unstable for lam > 1.

Sign conventions: the off-diagonal entries of F_m / tilde_F_m in rows 3-4
are fixed by requiring both the factorization identity and the null-mode
identities to hold; these conditions determine them uniquely and the
package verifies both numerically in its test suite.

Special vectors are sampled on the active nodes in block layout.  The
mode chi_m is computed through the substitution chi = g / r^m, whose g
satisfies a regular ODE, and psi = chi' + m chi / r is reconstructed from
the flux identity (r^{1-2m} g')' = r^{1-2m} f^2 g, which avoids numerical
differentiation of a singular function near the axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from .grid import RadialGrid, WeightedMatrix, d_dr, multiplication, neg_laplacian
from .profiles import VortexProfile, bogomolnyi_residual, deriv4

_SYMMETRIC_KINDS = {"L_m", "hatL_m", "M0", "N0", "M_m", "l_m"}


@dataclass
class BlockOperator:
    kind: str
    m: int
    profile: VortexProfile
    components: int
    matrix: WeightedMatrix

    @property
    def is_symmetric(self) -> bool:
        return self.kind in _SYMMETRIC_KINDS

    def apply(self, v, right_boundary=None):
        return self.matrix.apply(v, right_boundary=right_boundary)

    def weighted_adjoint(self) -> WeightedMatrix:
        return self.matrix.weighted_adjoint()


@dataclass
class SpecialVector:
    kind: str
    m: int
    values: np.ndarray          # flat block layout on active nodes
    grid: RadialGrid

    @property
    def components(self) -> int:
        return self.values.size // self.grid.n_active

    def component(self, c: int) -> np.ndarray:
        m = self.grid.n_active
        return self.values[c * m:(c + 1) * m]


# ---------------------------------------------------------------------------
# assembly helpers


def _fields(p: VortexProfile):
    m = p.grid.n_active
    rf = p.grid.active_nodes
    f = p.f[:m]
    a = p.a[:m]
    fp = p.f_prime[:m]
    b = p.n * (1.0 - a) / rf
    return rf, f, a, fp, b


def _block4(blocks) -> sp.csr_matrix:
    rows = [[blocks.get((i, j)) for j in range(4)] for i in range(4)]
    return sp.bmat(rows, format="csr")


def assemble_Lm(p: VortexProfile, m: int) -> BlockOperator:
    """Rotated-basis block L_m = -Delta_r Id + V_m (m >= 0 only).

    Negative m is rejected: L_m and L_{-m} coincide, a consequence of the
    complexified perturbation space.
    """
    if m < 0:
        raise ValueError("m must be >= 0; L_m = L_{-m} covers negative m")
    rf, f, a, fp, b = _fields(p)
    lam = p.lam
    L = neg_laplacian(p.grid)
    inv_r2 = 1.0 / rf**2
    V11 = m * m * inv_r2 + b * b + 0.5 * lam * (3.0 * f * f - 1.0)
    V22 = m * m * inv_r2 + b * b + 0.5 * lam * (f * f - 1.0) + f * f
    V33 = (m * m + 1.0) * inv_r2 + f * f
    V12 = -2.0 * m * b / rf
    V13 = -2.0 * b * f
    V24 = -2.0 * fp
    V34 = -2.0 * m * inv_r2
    blocks = {
        (0, 0): L + multiplication(V11), (1, 1): L + multiplication(V22),
        (2, 2): L + multiplication(V33), (3, 3): L + multiplication(V33),
        (0, 1): multiplication(V12), (1, 0): multiplication(V12),
        (0, 2): multiplication(V13), (2, 0): multiplication(V13),
        (1, 3): multiplication(V24), (3, 1): multiplication(V24),
        (2, 3): multiplication(V34), (3, 2): multiplication(V34),
    }
    wm = WeightedMatrix(p.grid, 4, _block4(blocks), weighted_symmetric=True)
    return BlockOperator("L_m", m, p, 4, wm)


def assemble_hatLm(p: VortexProfile, m: int) -> BlockOperator:
    """Unrotated block hatL_m with diagonal centrifugal weights (any integer m)."""
    rf, f, a, fp, b = _fields(p)
    lam = p.lam
    L = neg_laplacian(p.grid)
    inv_r2 = 1.0 / rf**2
    nma = p.n * (1.0 - a)
    w1 = (m + nma) ** 2 * inv_r2
    w2 = (m - nma) ** 2 * inv_r2
    w3 = (m - 1.0) ** 2 * inv_r2
    w4 = (m + 1.0) ** 2 * inv_r2
    A = 0.5 * lam * (2.0 * f * f - 1.0) + 0.5 * f * f
    B = 0.5 * (lam - 1.0) * f * f
    C = fp - b * f
    Dv = -(fp + b * f)
    blocks = {
        (0, 0): L + multiplication(w1 + A), (1, 1): L + multiplication(w2 + A),
        (2, 2): L + multiplication(w3 + f * f), (3, 3): L + multiplication(w4 + f * f),
        (0, 1): multiplication(B), (1, 0): multiplication(B),
        (0, 2): multiplication(C), (2, 0): multiplication(C),
        (0, 3): multiplication(Dv), (3, 0): multiplication(Dv),
        (1, 2): multiplication(Dv), (2, 1): multiplication(Dv),
        (1, 3): multiplication(C), (3, 1): multiplication(C),
    }
    wm = WeightedMatrix(p.grid, 4, _block4(blocks), weighted_symmetric=True)
    return BlockOperator("hatL_m", m, p, 4, wm)


def rotation_matrix(m: int) -> np.ndarray:
    """Orthogonal 4x4 relating the hat and rotated bases: R hatL R^T = L_|m|.

    For m < 0 the bottom-right block differs by a sign flip from the m >= 0
    rotation; the sign is fixed by requiring the conjugation to land exactly
    on L_|m| (entry (2,4) = -2 f' and (3,4) = -2|m|/r^2).
    """
    s = 1.0 / np.sqrt(2.0)
    if m >= 0:
        return np.array([[s, s, 0, 0],
                         [-s, s, 0, 0],
                         [0, 0, s, s],
                         [0, 0, s, -s]])
    return np.array([[s, s, 0, 0],
                     [s, -s, 0, 0],
                     [0, 0, s, s],
                     [0, 0, -s, s]])


def rotate_block(hatL: BlockOperator) -> BlockOperator:
    """Conjugate a hat-basis block by the appropriate rotation."""
    R = rotation_matrix(hatL.m)
    m_active = hatL.profile.grid.n_active
    Rbig = sp.kron(sp.csr_matrix(R), sp.identity(m_active, format="csr"))
    mat = (Rbig @ hatL.matrix.mat @ Rbig.T).tocsr()
    wm = WeightedMatrix(hatL.profile.grid, 4, mat, weighted_symmetric=True)
    return BlockOperator("L_m", abs(hatL.m), hatL.profile, 4, wm)


def assemble_M0_N0(p: VortexProfile) -> tuple[BlockOperator, BlockOperator]:
    """The two 2-component pieces of the m = 0 block.

    M0 (components 1 and 3 of L_0) is the Hessian of the radial energy in
    the variables (df, n da / r); N0 (components 2 and 4) is strictly
    positive and factors as G0* G0.
    """
    rf, f, a, fp, b = _fields(p)
    lam = p.lam
    L = neg_laplacian(p.grid)
    inv_r2 = 1.0 / rf**2
    m0 = sp.bmat([
        [L + multiplication(b * b + 0.5 * lam * (3.0 * f * f - 1.0)),
         multiplication(-2.0 * b * f)],
        [multiplication(-2.0 * b * f), L + multiplication(inv_r2 + f * f)],
    ], format="csr")
    n0 = sp.bmat([
        [L + multiplication(b * b + 0.5 * lam * (f * f - 1.0) + f * f),
         multiplication(-2.0 * fp)],
        [multiplication(-2.0 * fp), L + multiplication(inv_r2 + f * f)],
    ], format="csr")
    M0 = BlockOperator("M0", 0, p, 2, WeightedMatrix(p.grid, 2, m0, True))
    N0 = BlockOperator("N0", 0, p, 2, WeightedMatrix(p.grid, 2, n0, True))
    return M0, N0


def assemble_G0(p: VortexProfile) -> BlockOperator:
    """First-order factor of N0:  G0 = [[d/dr - f'/f, f], [f, d/dr + 1/r]].

    The discrete adjoint is the exact matrix adjoint in the weighted
    metric, so G0* G0 is weighted-symmetric positive semidefinite by
    construction and agrees with N0 up to discretization error.
    """
    rf, f, a, fp, b = _fields(p)
    D = d_dr(p.grid)
    g0 = sp.bmat([
        [D - multiplication(fp / f), multiplication(f)],
        [multiplication(f), D + multiplication(1.0 / rf)],
    ], format="csr")
    return BlockOperator("G0", 0, p, 2, WeightedMatrix(p.grid, 2, g0, False))


def translation_mode(p: VortexProfile) -> SpecialVector:
    """T = (f', b f, n a'/r, n a'/r), the zero mode of L_1."""
    m = p.grid.n_active
    rf = p.grid.active_nodes
    fp = p.f_prime[:m]
    b = p.n * (1.0 - p.a[:m]) / rf
    t3 = p.n * p.a_prime[:m] / rf
    vals = np.concatenate([fp, b * p.f[:m], t3, t3])
    return SpecialVector("T", 1, vals, p.grid)


def translation_tail(p: VortexProfile) -> list[float]:
    """Values of T at r_max, for boundary-aware residual evaluation."""
    rmax = p.grid.r_max
    t3 = p.n * p.a_prime[-1] / rmax
    return [p.f_prime[-1], p.n * (1.0 - p.a[-1]) / rmax * p.f[-1], t3, t3]


# ---------------------------------------------------------------------------
# chi modes and the W / tilde-W vectors


def _chi_psi(p: VortexProfile, m: int) -> tuple[np.ndarray, np.ndarray]:
    """chi_m and psi_m = chi' + m chi / r on the active nodes.

    Solves the regular problem for g = r^m chi:
        -g'' + (2m-1) g'/r + f^2 g = 0,   g(axis node) = 1,  g(r_max) = 0,
    on the profile's solve mesh when available, then reads off
    psi = g'/r^m from the cumulative flux integral of r^{1-2m} f^2 g,
    anchored at mid-domain where plain differencing of g is safe.
    """
    if p.fine is not None:
        nodes, h, f = p.fine.nodes, p.fine.h, p.fine.f
        nmain = p.grid.n_points
        k = int(round((2 * len(nodes) - 1) / (2 * nmain - 1)))
        sel = k * np.arange(nmain) + (k - 1) // 2
    else:
        nodes, h, f = p.grid.nodes, p.grid.h, p.f
        sel = np.arange(p.grid.n_points)
    M = len(nodes) - 1
    rf = nodes[:M]
    nun = M - 1
    # conservative form in the natural metric:
    #   -(r^{1-2m} g')' + r^{1-2m} f^2 g = 0
    # exact on both homogeneous branches (g = const and g = r^{2m}), and an
    # M-matrix at every m, unlike the advective form whose (2m-1)/r term
    # overwhelms the second difference on the first nodes
    expo = 1 - 2 * m
    face_lo = (rf[1:] - 0.5 * h) ** expo        # face below node i, i = 1..M-1
    face_hi = (rf[1:] + 0.5 * h) ** expo
    scale = rf[1:] ** (-expo) / h**2            # row scaling for conditioning
    ab = np.zeros((3, nun))
    ab[1] = (face_lo + face_hi) * scale + f[1:M] ** 2
    upper = -face_hi * scale
    lower = -face_lo * scale
    ab[0, 1:] = upper[:-1]
    ab[2, :-1] = lower[1:]
    rhs = np.zeros(nun)
    rhs[0] = -lower[0]          # g(first node) = 1 moved to the right side
    g_in = solve_banded((1, 1), ab, rhs)
    g = np.concatenate(([1.0], g_in))
    chi = g / rf**m
    # flux quadrature for psi = g'/r^m
    integrand = rf ** (1 - 2 * m) * f[:M] ** 2 * g
    I = np.concatenate(([0.0], np.cumsum(0.5 * h * (integrand[1:] + integrand[:-1]))))
    iA = int(np.argmin(np.abs(rf - min(2.0, 0.3 * nodes[-1]))))
    gp = deriv4(np.concatenate([g, [0.0]]), h, parity=1.0)[:M]
    base = rf[iA] ** (1 - 2 * m) * gp[iA]
    psi = rf ** (m - 1) * (base + I - I[iA])
    keep = sel[sel < M]
    return chi[keep], psi[keep]


def _near_axis_even_fit(values: np.ndarray, rf: np.ndarray, power: float,
                        i0: int = 4, win: int = 24) -> np.ndarray:
    """Replace the first i0 samples by the indicial model r^power (g0 + g1 r^2).

    Fields behaving like r^power near the axis carry the profile solver's
    near-axis relative error in their first nodes; fitting the model on
    trusted nodes and extrapolating inward removes the kink, which matters
    whenever a 1/r coupling amplifies it (the m = n kernel modes).
    """
    rw = rf[i0:i0 + win]
    A = np.vstack([rw**power, rw**(power + 2)]).T
    coef, *_ = np.linalg.lstsq(A, values[i0:i0 + win], rcond=None)
    out = values.copy()
    out[:i0] = coef[0] * rf[:i0]**power + coef[1] * rf[:i0]**(power + 2)
    return out


def chi_mode(p: VortexProfile, m: int) -> SpecialVector:
    """Decaying solution of (-Delta_r + m^2/r^2 + f^2) chi = 0, chi ~ r^-m.

    Defined for 1 <= m <= n.  Normalization: r^m chi -> 1 at the axis
    (equivalently chi(r_min) = r_min^-m up to O(r_min^2)).
    """
    if not (1 <= m <= p.n):
        raise ValueError(f"chi_m defined for 1 <= m <= n = {p.n}, got m = {m}")
    chi, _ = _chi_psi(p, m)
    return SpecialVector("chi_m", m, chi, p.grid)


def w_mode(p: VortexProfile, m: int) -> SpecialVector:
    """W_m = (f chi, f chi, -psi, -psi): kernel modes of F_m at lam = 1."""
    chi, psi = _chi_psi(p, m)
    mact = p.grid.n_active
    rf = p.grid.active_nodes
    fchi = _near_axis_even_fit(p.f[:mact] * chi, rf, p.n - m)
    vals = np.concatenate([fchi, fchi, -psi, -psi])
    return SpecialVector("W_m", m, vals, p.grid)


def tildeW_mode(p: VortexProfile, m: int) -> SpecialVector:
    """tilde_W_m = (q^{-1} f chi, f chi, -psi, -psi); equals W_m at lam = 1.

    For m = 1 this is proportional to the translational mode T at every
    coupling (component ratio exactly 1/n).
    """
    if not (1 <= m <= p.n):
        raise ValueError(f"tilde_W_m defined for 1 <= m <= n = {p.n}, got m = {m}")
    chi, psi = _chi_psi(p, m)
    mact = p.grid.n_active
    rf = p.grid.active_nodes
    f = p.f[:mact]
    fchi = _near_axis_even_fit(f * chi, rf, p.n - m)
    fchi_q = _near_axis_even_fit(f * chi / p.q(), rf, p.n - m)
    vals = np.concatenate([fchi_q, fchi, -psi, -psi])
    return SpecialVector("tildeW_m", m, vals, p.grid)


# ---------------------------------------------------------------------------
# first-order factors


def _factor_blocks(p: VortexProfile, m: int, tilde: bool):
    rf, f, a, fp, b = _fields(p)
    D = d_dr(p.grid)
    mr = multiplication(m / rf)
    fmul = multiplication(f)
    dp = D + multiplication(1.0 / rf)
    if not tilde:
        d0 = D - multiplication(b)
        row1_col1 = d0
        row2_col1 = mr
        row3_col1 = fmul
    else:
        q = multiplication(p.q())
        d0 = D - multiplication(fp / f)
        row1_col1 = (d0 @ q).tocsr()
        row2_col1 = (mr @ q).tocsr()
        row3_col1 = (fmul @ q).tocsr()
    return {
        (0, 0): row1_col1, (0, 1): mr, (0, 2): fmul,
        (1, 0): row2_col1, (1, 1): d0, (1, 3): fmul,
        (2, 0): row3_col1, (2, 2): dp, (2, 3): -mr,
        (3, 1): -fmul, (3, 2): mr, (3, 3): -dp,
    }


def assemble_Fm(p: VortexProfile, m: int) -> BlockOperator:
    """Critical-coupling factor with F_m* F_m = L_m; requires lam = 1.

    Rejects profiles whose first-order (Bogomolnyi) residual exceeds 1e-3.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    res = bogomolnyi_residual(p)
    if res > 1e-3:
        raise ValueError(
            f"profile is not a critical-coupling solution "
            f"(first-order residual {res:.2e} > 1e-3); solve at lam = 1")
    blocks = _factor_blocks(p, m, tilde=False)
    wm = WeightedMatrix(p.grid, 4, _block4(blocks), weighted_symmetric=False)
    return BlockOperator("F_m", m, p, 4, wm)


def assemble_tildeFm_and_Mm(p: VortexProfile, m: int) -> tuple[BlockOperator, BlockOperator]:
    """The all-coupling factor tilde_F_m and the scalar remainder M_m.

    M_m = l_m - q l_m q + (lam - q^2) f^2 with
    l_m = -Delta_r + m^2/r^2 + b^2 + (lam/2)(f^2 - 1); q is applied
    pointwise on both sides of the conservative l_m, keeping M_m exactly
    weighted-symmetric.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    blocks = _factor_blocks(p, m, tilde=True)
    ft = WeightedMatrix(p.grid, 4, _block4(blocks), weighted_symmetric=False)
    lm = _small_l(p, m)
    q = p.q()
    Q = multiplication(q)
    rf, f, a, fp, b = _fields(p)
    mm = (lm - Q @ lm @ Q + multiplication((p.lam - q * q) * f * f)).tocsr()
    Mm = WeightedMatrix(p.grid, 1, mm, weighted_symmetric=True)
    return (BlockOperator("tildeF_m", m, p, 4, ft),
            BlockOperator("M_m", m, p, 1, Mm))


def _small_l(p: VortexProfile, m: int) -> sp.csr_matrix:
    rf, f, a, fp, b = _fields(p)
    return (neg_laplacian(p.grid)
            + multiplication(m * m / rf**2 + b * b
                             + 0.5 * p.lam * (f * f - 1.0))).tocsr()


def smooth_test_vectors(grid: RadialGrid, count: int, n_comp: int,
                        seed: int = 0) -> list[np.ndarray]:
    """Deterministic smooth test functions vanishing near both ends.

    Random low-frequency sine mixtures under a quartic-Gaussian envelope
    supported well inside (0, r_max); suitable for operator-identity
    checks that hold up to interior discretization error.
    """
    rng = np.random.default_rng(seed)
    rf = grid.active_nodes
    rmax = grid.r_max
    env = np.exp(-(((rf - 0.45 * rmax) / (0.18 * rmax)) ** 4))
    out = []
    for _ in range(count):
        v = np.zeros(n_comp * len(rf))
        for c in range(n_comp):
            acc = np.zeros(len(rf))
            for j in range(1, 5):
                acc += rng.standard_normal() * np.sin(j * np.pi * rf / rmax)
            v[c * len(rf):(c + 1) * len(rf)] = acc * env
        out.append(v)
    return out


def keysplit_residual(p: VortexProfile, m: int, trials: int = 10,
                      seed: int = 0) -> float:
    """max_v ||(L_m - tilde_F_m* tilde_F_m - J M_m) v||_w / ||v||_w.

    v runs over `trials` deterministic smooth test vectors; J M_m acts on
    the first component only.
    """
    Lm = assemble_Lm(p, m)
    Ft, Mm = assemble_tildeFm_and_Mm(p, m)
    Fts = Ft.matrix.weighted_adjoint()
    mact = p.grid.n_active
    worst = 0.0
    for v in smooth_test_vectors(p.grid, trials, 4, seed=seed):
        jv = np.zeros_like(v)
        jv[:mact] = Mm.matrix.apply(v[:mact])
        d = Lm.matrix.apply(v) - Fts.apply(Ft.matrix.apply(v)) - jv
        worst = max(worst, Lm.matrix.weighted_norm(d) / Lm.matrix.weighted_norm(v))
    return worst


# ---------------------------------------------------------------------------
# appendix positivity check


def appendix_Z0_check(p: VortexProfile) -> dict:
    """Pointwise positivity data for the radial-minimizer criterion.

    Evaluates tr(Z0) and det(Z0) = 2 lam f^4 + (2 f^2/r^2)(lam - 2 n^2 (1-a)^2)
    at every active node, the weighted residual of l f (one of the field
    equations, evaluated with the r_max boundary value included), and the
    lowest eigenvalue of the truncated scalar operator l.
    """
    from .spectra import smallest_eigenpairs

    rf, f, a, fp, b = _fields(p)
    lam, n = p.lam, p.n
    det = 2.0 * lam * f**4 + (2.0 * f**2 / rf**2) * (lam - 2.0 * n**2 * (1.0 - a) ** 2)
    trace = 2.0 * lam * f**2 + 1.0 / rf**2 + f**2
    l_op = BlockOperator("l_m", 0, p,
                         1, WeightedMatrix(p.grid, 1, _small_l(p, 0), True))
    lf = l_op.matrix.apply(f, right_boundary=[p.f[-1]])
    lf_res = l_op.matrix.weighted_norm(lf) / l_op.matrix.weighted_norm(f)
    eig = smallest_eigenpairs(l_op, k=1)
    return {
        "det_min": float(det.min()),
        "det_argmin_r": float(rf[int(np.argmin(det))]),
        "det_positive": bool(np.all(det > 0.0)),
        "trace_min": float(trace.min()),
        "lf_residual": float(lf_res),
        "l_min_eig": float(eig.eigenvalues[0]),
    }
