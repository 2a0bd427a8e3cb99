"""Radial grid, r dr quadrature, and self-adjoint radial operators.

Everything in this package lives on a truncated half-line [r_min, r_max]
discretized by uniformly spaced nodes.  The working Hilbert space is
L2(R+, r dr), so inner products carry the weight r, and the radial
Laplacian

    Delta_r u = (1/r) d/dr (r du/dr)

is discretized in conservative (flux) form: the coupling between nodes i
and i+1 is carried by the face radius r_{i+1/2}, which makes every
assembled operator exactly symmetric with respect to the discrete r dr
inner product on the cell weights w_i = r_i h.

Boundary handling:
  * right end: Dirichlet, the node at r_max is eliminated (all modes of
    interest decay exponentially);
  * left end: ghost-node Dirichlet through the face radius
    max(r_min - h/2, 0).  On the default staggered grid r_min = h/2 the
    left face sits exactly at r = 0, so its flux vanishes identically and
    no artificial pinning of finite-at-axis functions occurs.  This is
    essential: the translational mode of a vortex does not vanish at the
    axis, and pinning it at a small positive radius shifts its eigenvalue
    by O(1/log(1/r_min)), which no grid refinement repairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid with r dr quadrature weights.

    nodes has length n_points and covers [r_min, r_max]; weights are the
    trapezoid weights w_i = r_i h (halved at the two endpoints) so that
    sum(w * u) approximates the integral of u against r dr.

    Operators act on the "active" nodes nodes[:-1] (the r_max node is a
    Dirichlet boundary); cell_weights are the full cell masses r_i h used
    as the operator-side metric.
    """

    r_min: float
    r_max: float
    n_points: int
    nodes: np.ndarray = field(repr=False)
    h: float = 0.0

    def __post_init__(self):
        w = self.nodes * self.h
        w = w.copy()
        w[0] *= 0.5
        w[-1] *= 0.5
        object.__setattr__(self, "_weights", w)
        object.__setattr__(self, "_cell_weights", (self.nodes * self.h)[:-1])

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights for the measure r dr (full grid)."""
        return self._weights

    @property
    def active_nodes(self) -> np.ndarray:
        """Nodes carrying operator unknowns (r_max eliminated)."""
        return self.nodes[:-1]

    @property
    def cell_weights(self) -> np.ndarray:
        """Operator-metric weights r_i h on the active nodes."""
        return self._cell_weights

    @property
    def n_active(self) -> int:
        return self.n_points - 1

    @property
    def left_face(self) -> float:
        """Radius of the flux face left of the first node (clipped at 0)."""
        return max(self.r_min - 0.5 * self.h, 0.0)

    @property
    def staggered(self) -> bool:
        """True when the left face sits at r = 0 (r_min = h/2)."""
        return self.left_face <= 1e-12 * self.h

    def refined(self, k: int) -> tuple["RadialGrid", np.ndarray]:
        """Aligned fine grid with spacing h/k (k odd) and the index map.

        The fine grid shares all flux faces with this grid; fine node
        k*i + (k-1)//2 coincides with node i exactly.  Used by the profile
        solver to oversample fields before restriction.
        """
        if k < 1 or k % 2 == 0:
            raise ValueError("refinement factor must be odd and >= 1")
        if k == 1:
            return self, np.arange(self.n_points)
        hf = self.h / k
        # staggered family sharing all flux faces: nodes at
        # left_face + (j + 1/2) hf, with the last node landing on r_max
        nf = k * self.n_points - (k - 1) // 2
        nodes = self.left_face + (np.arange(nf) + 0.5) * hf
        nodes[-1] = self.r_max  # exact by construction, pin against roundoff
        fine = RadialGrid(nodes[0], self.r_max, nf, nodes, hf)
        idx = k * np.arange(self.n_points) + (k - 1) // 2
        return fine, idx


def build_grid(r_min: float, r_max: float, n_points: int) -> RadialGrid:
    """Uniform grid on [r_min, r_max] with trapezoid r dr weights.

    The operators assembled on a grid contain 1/r^2 terms, so r_min must
    be strictly positive; n_points >= 16 keeps the stencils meaningful.
    """
    if r_min <= 0:
        raise ValueError(f"r_min must be positive, got {r_min}")
    if r_max <= r_min:
        raise ValueError(f"r_max ({r_max}) must exceed r_min ({r_min})")
    if n_points < 16:
        raise ValueError(f"n_points must be at least 16, got {n_points}")
    h = (r_max - r_min) / (n_points - 1)
    nodes = r_min + h * np.arange(n_points)
    nodes[-1] = r_max
    return RadialGrid(r_min, r_max, n_points, nodes, h)


def default_grid(r_max: float = 20.0, n_points: int = 2000) -> RadialGrid:
    """Standard staggered grid: r_min = h/2, so the left face is at r = 0.

    r_min = r_max / (2 n - 1) ~ 5e-3 at the defaults; h ~ 1e-2.
    """
    r_min = r_max / (2 * n_points - 1)
    return build_grid(r_min, r_max, n_points)


def weighted_inner_product(grid: RadialGrid, u: np.ndarray, v: np.ndarray) -> float:
    """<u, v> = sum w_i u_i v_i, the discrete integral of u v against r dr."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (grid.n_points,) or v.shape != (grid.n_points,):
        raise ValueError(
            f"expected arrays of length {grid.n_points}, got {u.shape} and {v.shape}"
        )
    return float(np.sum(grid.weights * u * v))


# ---------------------------------------------------------------------------
# operator building blocks on the active nodes


def neg_laplacian(grid: RadialGrid) -> sp.csr_matrix:
    """Conservative 3-point discretization of -Delta_r, right Dirichlet.

    Row i:  [r_{i-1/2}(u_i - u_{i-1}) + r_{i+1/2}(u_i - u_{i+1})] / (r_i h^2)
    with the ghost values beyond both ends taken as zero.  On a staggered
    grid the first left face has radius 0 and the ghost drops out.
    """
    rf = grid.active_nodes
    h = grid.h
    rm = rf - 0.5 * h
    rm[0] = grid.left_face
    rp = rf + 0.5 * h
    diag = (rm + rp) / (rf * h * h)
    upper = -rp[:-1] / (rf[:-1] * h * h)
    lower = -rm[1:] / (rf[1:] * h * h)
    return sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")


def d_dr(grid: RadialGrid) -> sp.csr_matrix:
    """First derivative on active nodes: centered, one-sided at the axis.

    Used inside first-order factor operators; their adjoints are taken as
    exact matrix adjoints in the weighted metric, so no symmetry is
    required of this building block.
    """
    m = grid.n_active
    h = grid.h
    A = sp.lil_matrix((m, m))
    A.setdiag(np.full(m - 1, 0.5 / h), 1)
    A.setdiag(np.full(m - 1, -0.5 / h), -1)
    A[0, 0] = -1.5 / h
    A[0, 1] = 2.0 / h
    A[0, 2] = -0.5 / h
    return A.tocsr()


def multiplication(values: np.ndarray) -> sp.csr_matrix:
    """Pointwise multiplication operator on active nodes."""
    return sp.diags(np.asarray(values, dtype=float), format="csr")


class WeightedMatrix:
    """Banded operator on c-component grid functions, metric r dr.

    The matrix acts on flat block-layout vectors: component c occupies the
    slice [c*m, (c+1)*m) where m = grid.n_active.  Symmetry is always meant
    with respect to the weighted inner product  <u, v>_w = sum w u v  with
    w the tiled cell weights.
    """

    def __init__(self, grid: RadialGrid, n_comp: int, mat: sp.csr_matrix,
                 weighted_symmetric: bool):
        self.grid = grid
        self.n_comp = n_comp
        self.mat = mat.tocsr()
        self.weighted_symmetric = weighted_symmetric
        m = grid.n_active
        if mat.shape != (n_comp * m, n_comp * m):
            raise ValueError(f"matrix shape {mat.shape} does not match "
                             f"{n_comp} components on {m} active nodes")

    # -- basic structure ----------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.mat.shape[0]

    @property
    def tiled_weights(self) -> np.ndarray:
        return np.tile(self.grid.cell_weights, self.n_comp)

    @property
    def bandwidth(self) -> int:
        """Half bandwidth in the node-interleaved ordering."""
        coo = self._interleaved().tocoo()
        if coo.nnz == 0:
            return 0
        return int(np.max(np.abs(coo.row - coo.col)))

    def _perm(self) -> np.ndarray:
        """Block layout -> interleaved layout permutation."""
        m = self.grid.n_active
        c = self.n_comp
        p = np.empty(c * m, dtype=int)
        for comp in range(c):
            p[comp * m:(comp + 1) * m] = c * np.arange(m) + comp
        # p maps block index -> interleaved index; we need column selection
        inv = np.empty_like(p)
        inv[p] = np.arange(c * m)
        return inv

    def _interleaved(self) -> sp.csr_matrix:
        inv = self._perm()
        return self.mat[inv][:, inv].tocsr()

    # -- algebra ------------------------------------------------------------

    def apply(self, v: np.ndarray, right_boundary=None) -> np.ndarray:
        """Matrix-vector product, optionally with right boundary data.

        right_boundary supplies the function values at r_max per component
        (the matrix itself imposes Dirichlet zero there); passing the true
        tail values removes the O(tail/h^2) residual in the last row when
        checking identities on functions that do not vanish at r_max.
        """
        v = np.asarray(v, dtype=float)
        y = self.mat @ v
        if right_boundary is not None:
            m = self.grid.n_active
            rf = self.grid.active_nodes
            h = self.grid.h
            coupling = -(rf[-1] + 0.5 * h) / (rf[-1] * h * h)
            for c, val in enumerate(right_boundary):
                y[(c + 1) * m - 1] += coupling * val
        return y

    def weighted_adjoint(self) -> "WeightedMatrix":
        """Exact adjoint in the discrete weighted metric: W^-1 A^T W."""
        w = self.tiled_weights
        adj = sp.diags(1.0 / w) @ self.mat.T @ sp.diags(w)
        return WeightedMatrix(self.grid, self.n_comp, adj.tocsr(),
                              self.weighted_symmetric)

    def weighted_symmetry_defect(self) -> float:
        """max |w_i A_ij - w_j A_ji|, scaled by the largest such entry."""
        w = self.tiled_weights
        Q = sp.diags(w) @ self.mat
        d = abs(Q - Q.T)
        scale = max(1.0, abs(Q).max())
        return float(d.max() / scale)

    def weighted_norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.tiled_weights * v * v)))

    def weighted_ip(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.tiled_weights * u * v))

    # -- standard-metric forms ---------------------------------------------

    def standard_form(self) -> sp.csr_matrix:
        """Similarity transform D^{1/2} A D^{-1/2}, D = diag(weights).

        For a weighted-symmetric operator the result is symmetric in the
        ordinary sense; it is symmetrized exactly (entries averaged with
        their transpose, removing roundoff at the 1e-16 relative level) so
        downstream symmetric eigensolvers see a bitwise-symmetric matrix.
        """
        s = np.sqrt(self.tiled_weights)
        S = sp.diags(s) @ self.mat @ sp.diags(1.0 / s)
        if self.weighted_symmetric:
            S = (S + S.T) * 0.5
        return S.tocsr()

    def standard_banded_upper(self):
        """Interleaved upper band storage (LAPACK 'ab') of standard_form.

        Returns (ab, hbw): ab[hbw + i - j, j] = S[i, j] for i <= j.
        """
        inv = self._perm()
        S = self.standard_form()[inv][:, inv].tocoo()
        dim = S.shape[0]
        hbw = int(np.max(np.abs(S.row - S.col))) if S.nnz else 0
        ab = np.zeros((hbw + 1, dim))
        mask = S.row <= S.col
        ab[hbw + S.row[mask] - S.col[mask], S.col[mask]] = S.data[mask]
        return ab, hbw

    def export_banded_text(self, path) -> None:
        """Plain-text band dump: 'dimension bandwidth' then row-major bands."""
        inter = self._interleaved().toarray()
        bw = self.bandwidth
        dim = inter.shape[0]
        with open(path, "w") as fh:
            fh.write(f"{dim} {bw}\n")
            for i in range(dim):
                lo = i - bw
                entries = [
                    inter[i, j] if 0 <= j < dim else 0.0
                    for j in range(lo, i + bw + 1)
                ]
                fh.write(" ".join(repr(float(x)) for x in entries) + "\n")


def radial_schrodinger_matrix(grid: RadialGrid, angular: float,
                              potential: np.ndarray) -> WeightedMatrix:
    """Scalar operator  -Delta_r + angular / r^2 + potential(r).

    `angular` is the m^2 coefficient of the centrifugal term.  The
    potential is sampled on the grid nodes (full grid or active nodes both
    accepted).  Dirichlet at r_max; at the axis the conservative stencil
    carries the left-face flux (zero on staggered grids).
    """
    potential = np.asarray(potential, dtype=float)
    if potential.shape == (grid.n_points,):
        potential = potential[:-1]
    if potential.shape != (grid.n_active,):
        raise ValueError(f"potential must be sampled on the grid "
                         f"({grid.n_points} or {grid.n_active} values)")
    if angular < 0:
        raise ValueError("angular (m^2) coefficient must be nonnegative")
    rf = grid.active_nodes
    mat = neg_laplacian(grid) + multiplication(angular / rf**2 + potential)
    return WeightedMatrix(grid, 1, mat, weighted_symmetric=True)


def symmetrize_to_standard(A: WeightedMatrix, grid: RadialGrid) -> sp.csr_matrix:
    """D^{1/2} A D^{-1/2} with D = diag(weights); same spectrum as A."""
    if grid is not A.grid:
        # allow equal grids passed as separate objects
        if not np.allclose(grid.nodes, A.grid.nodes):
            raise ValueError("grid does not match the operator's grid")
    return A.standard_form()
