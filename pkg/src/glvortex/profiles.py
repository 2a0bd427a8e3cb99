"""Vortex profile solver: the radial fields (f, a) at winding n, coupling lam.

The fields minimize the radial energy

    E = pi * int { f'^2 + n^2 (1-a)^2 f^2 / r^2 + n^2 a'^2 / r^2
                   + (lam/4) (f^2 - 1)^2 } r dr

(the full energy of the equivariant configuration; the angular integral
contributes the factor 2 pi to the half-line integral) and satisfy the
Euler-Lagrange system

    -Delta_r f + n^2 (1-a)^2 f / r^2 + (lam/2)(f^2 - 1) f = 0
    -a'' + a'/r - f^2 (1-a) = 0

with f, a -> 0 at the axis (like r^n and r^2) and f, a -> 1 at infinity.

The solver is a damped Newton iteration on the coupled finite-difference
system.  For accuracy near the axis the solve runs on an internally
refined staggered mesh (odd factor, faces aligned with the target grid)
and the converged fields plus 4th-order derivatives are restricted to the
requested grid.  Without this oversampling, the O(h^2) discretization
error of the profile, amplified by the 1/r^2 potentials of the linearized
operators, dominates every zero-mode residual.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .grid import RadialGrid, build_grid, weighted_inner_product


class ProfileConvergenceError(RuntimeError):
    """Newton iteration failed; carries the last residual for diagnostics."""

    def __init__(self, msg, residual=None, lam=None):
        super().__init__(msg)
        self.residual = residual
        self.lam = lam


@dataclass
class ProfileSolveConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping: float = 0.5            # backtracking factor for the line search
    continuation_steps: int = 8     # lambda path length for the fallback
    refine: int = 9                 # odd oversampling factor of the solve mesh

    def __post_init__(self):
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if not (0 < self.damping < 1):
            raise ValueError("damping factor must lie in (0, 1)")
        if self.refine < 1 or self.refine % 2 == 0:
            raise ValueError("refine must be an odd integer >= 1")


@dataclass
class FineFields:
    """Converged fields on the internal solve mesh (kept for mode solves)."""
    nodes: np.ndarray
    h: float
    f: np.ndarray
    a: np.ndarray


@dataclass
class VortexProfile:
    n: int
    lam: float
    grid: RadialGrid
    f: np.ndarray
    a: np.ndarray
    f_prime: np.ndarray
    a_prime: np.ndarray
    newton_residual: float = 0.0
    newton_iters: int = 0
    newton_energies: list = field(default_factory=list, repr=False)
    fine: FineFields | None = field(default=None, repr=False)

    def b(self) -> np.ndarray:
        """Gauge field profile b(r) = n (1 - a) / r on the full grid."""
        return self.n * (1.0 - self.a) / self.grid.nodes

    def q(self) -> np.ndarray:
        """q(r) = n (1-a) f / (r f') on the active nodes.

        In the far tail 1 - f can underflow to zero in double precision
        (f' with it), leaving the ratio numerically undefined; those nodes
        inherit the last resolvable value.  They carry no weight in any
        quantity built from q: every consumer decays exponentially there.
        """
        m = self.grid.n_active
        fp = self.f_prime[:m]
        good = fp > 1e-12 * np.max(fp)
        last = int(np.nonzero(good)[0][-1])
        q = np.empty(m)
        q[:last + 1] = (self.n * (1.0 - self.a[:last + 1]) * self.f[:last + 1]
                        / (self.grid.active_nodes[:last + 1] * fp[:last + 1]))
        q[last + 1:] = q[last]
        return q


def deriv4(u: np.ndarray, h: float, parity: float | None = None) -> np.ndarray:
    """4th-order first derivative on a uniform grid.

    With `parity` given, the grid is assumed staggered about r = 0 and the
    two left ghost values are filled by reflection u(-r_i) = parity*u(r_i),
    which avoids one-sided formulas at the axis.  The right end always uses
    one-sided stencils.
    """
    n = len(u)
    d = np.empty_like(u, dtype=float)
    if parity is None:
        d[2:-2] = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
        d[0] = np.dot([-25.0, 48.0, -36.0, 16.0, -3.0], u[:5]) / (12 * h)
        d[1] = np.dot([-3.0, -10.0, 18.0, -6.0, 1.0], u[:5]) / (12 * h)
    else:
        ext = np.empty(n + 2)
        ext[2:] = u
        ext[1] = parity * u[0]
        ext[0] = parity * u[1]
        d[:n - 2] = (ext[:-4] - 8 * ext[1:-3] + 8 * ext[3:-1] - ext[4:]) / (12 * h)
    d[-1] = -np.dot([-25.0, 48.0, -36.0, 16.0, -3.0], u[-5:][::-1]) / (12 * h)
    d[-2] = -np.dot([-3.0, -10.0, 18.0, -6.0, 1.0], u[-5:][::-1]) / (12 * h)
    return d


def initial_guess(n: int, grid: RadialGrid) -> VortexProfile:
    """Closed-form seed respecting the r -> 0 powers and r -> inf limits.

        f0 = (r / sqrt(r^2 + n^2))^n        a0 = r^2 / (r^2 + 2 n^2)
    """
    if n < 1:
        raise ValueError("winding degree must satisfy n >= 1")
    r = grid.nodes
    f = (r / np.sqrt(r * r + n * n)) ** n
    a = r * r / (r * r + 2.0 * n * n)
    fp = deriv4(f, grid.h)
    ap = deriv4(a, grid.h)
    return VortexProfile(n=n, lam=float("nan"), grid=grid, f=f, a=a,
                         f_prime=fp, a_prime=ap)


# ---------------------------------------------------------------------------
# Newton iteration on a (possibly fine) mesh


def _residual(nodes, h, staggered, n, lam, f, a):
    """Stacked interleaved residual of the two discrete ODEs."""
    M = len(nodes) - 1
    rf = nodes[:M]
    rm = rf - 0.5 * h
    if staggered:
        rm[0] = 0.0
    rm = np.maximum(rm, 0.0)
    rp = rf + 0.5 * h
    fm = np.concatenate(([0.0], f[:M - 1]))
    fp_ = f[1:M + 1]
    b = n * (1.0 - a[:M]) / rf
    F = ((rm * (f[:M] - fm) + rp * (f[:M] - fp_)) / (rf * h * h)
         + b * b * f[:M] + 0.5 * lam * (f[:M] ** 2 - 1.0) * f[:M])
    am = np.concatenate(([0.0], a[:M - 1]))
    ap_ = a[1:M + 1]
    A = (-(ap_ - 2.0 * a[:M] + am) / (h * h) + (ap_ - am) / (2.0 * h * rf)
         - f[:M] ** 2 * (1.0 - a[:M]))
    if staggered:
        # axis closure: a ~ d r^2, enforced through the first two nodes
        A[0] = a[0] - (rf[0] / rf[1]) ** 2 * a[1]
    res = np.empty(2 * M)
    res[0::2] = F
    res[1::2] = A
    return res


def _jacobian_banded(nodes, h, staggered, n, lam, f, a):
    M = len(nodes) - 1
    rf = nodes[:M]
    rm = rf - 0.5 * h
    if staggered:
        rm[0] = 0.0
    rm = np.maximum(rm, 0.0)
    rp = rf + 0.5 * h
    b = n * (1.0 - a[:M]) / rf
    ab = np.zeros((5, 2 * M))
    jf = 2 * np.arange(M)
    ja = jf + 1
    ab[2, jf] = (rm + rp) / (rf * h * h) + b * b + 0.5 * lam * (3.0 * f[:M] ** 2 - 1.0)
    ab[2, ja] = 2.0 / (h * h) + f[:M] ** 2
    ab[1, ja] = -2.0 * b * (n / rf) * f[:M]
    ab[3, jf] = -2.0 * f[:M] * (1.0 - a[:M])
    ab[0, jf[1:]] = (-rp / (rf * h * h))[:-1]
    ab[0, ja[1:]] = (-1.0 / (h * h) + 1.0 / (2.0 * h * rf))[:-1]
    ab[4, jf[:-1]] = (-rm / (rf * h * h))[1:]
    ab[4, ja[:-1]] = (-1.0 / (h * h) - 1.0 / (2.0 * h * rf))[1:]
    if staggered:
        ab[2, 1] = 1.0
        ab[3, 0] = 0.0
        ab[0, 3] = -(rf[0] / rf[1]) ** 2
        ab[1, 2] = 0.0
    return ab


def _energy_on_mesh(nodes, h, n, lam, f, a):
    fp = deriv4(f, h)
    ap = deriv4(a, h)
    w = nodes * h
    w = w.copy()
    w[0] *= 0.5
    w[-1] *= 0.5
    dens = (fp ** 2 + n ** 2 * (1.0 - a) ** 2 * f ** 2 / nodes ** 2
            + n ** 2 * ap ** 2 / nodes ** 2 + 0.25 * lam * (f ** 2 - 1.0) ** 2)
    return float(np.pi * np.sum(w * dens))


def _newton(nodes, h, staggered, n, lam, f, a, cfg):
    """Damped Newton; returns (f, a, weighted_residual, iters, energies)."""
    M = len(nodes) - 1
    w2 = np.empty(2 * M)
    w2[0::2] = nodes[:M] * h
    w2[1::2] = nodes[:M] * h
    scale = max(1.0, lam)
    # residual rows are evaluated through 1/h^2-scale stencil terms, so the
    # achievable weighted residual is bounded below by roundoff at that scale
    eps = np.finfo(float).eps
    floor = 16.0 * eps * (2.0 / (h * h) + scale) * np.sqrt(np.sum(w2))
    target = max(cfg.newton_tol * scale, floor)
    energies = [_energy_on_mesh(nodes, h, n, lam, f, a)]
    res = _residual(nodes, h, staggered, n, lam, f, a)

    def wnorm(v):
        return float(np.sqrt(np.sum(w2 * v * v)))

    rnorm = wnorm(res)
    it = 0
    for it in range(1, cfg.max_newton_iters + 1):
        if rnorm <= target:
            break
        ab = _jacobian_banded(nodes, h, staggered, n, lam, f, a)
        delta = solve_banded((2, 2), ab, res)
        step = 1.0
        accepted = False
        for _ in range(40):
            fn = f.copy()
            an = a.copy()
            fn[:M] -= step * delta[0::2]
            an[:M] -= step * delta[1::2]
            res_n = _residual(nodes, h, staggered, n, lam, fn, an)
            if wnorm(res_n) < rnorm:
                accepted = True
                break
            step *= cfg.damping
        if not accepted:
            if rnorm <= 8.0 * floor:
                break  # roundoff-limited, fully converged
            raise ProfileConvergenceError(
                f"line search stalled at lambda={lam} (residual {rnorm:.3e})",
                residual=rnorm, lam=lam)
        f, a = fn, an
        res = res_n
        rnorm = wnorm(res)
        energies.append(_energy_on_mesh(nodes, h, n, lam, f, a))
    if rnorm > max(target, 8.0 * floor):
        raise ProfileConvergenceError(
            f"no convergence after {cfg.max_newton_iters} iterations at "
            f"lambda={lam} (residual {rnorm:.3e})", residual=rnorm, lam=lam)
    return f, a, rnorm, it, energies


def _solve_on_fine(n, lam, fine, cfg, seed=None):
    """Newton on the fine mesh with automatic lambda continuation fallback."""
    nodes, h = fine.nodes, fine.h
    staggered = nodes[0] <= 0.75 * h
    if seed is None:
        r = nodes
        f0 = (r / np.sqrt(r * r + n * n)) ** n
        a0 = r * r / (r * r + 2.0 * n * n)
    else:
        f0, a0 = seed
    f0 = f0.copy()
    a0 = a0.copy()
    f0[-1] = 1.0
    a0[-1] = 1.0
    try:
        return _newton(nodes, h, staggered, n, lam, f0, a0, cfg)
    except ProfileConvergenceError:
        if seed is not None:
            raise
    # fallback: find a solvable anchor coupling, then walk lambda
    # geometrically from there (wide-core seeds favor small couplings)
    r = nodes
    last_err = None
    for lam0 in (1.0, 0.5, 0.3, 2.0):
        f0 = (r / np.sqrt(r * r + n * n)) ** n
        a0 = r * r / (r * r + 2.0 * n * n)
        f0[-1] = 1.0
        a0[-1] = 1.0
        try:
            f0, a0, *_ = _newton(nodes, h, staggered, n, lam0, f0, a0, cfg)
        except ProfileConvergenceError as err:
            last_err = err
            continue
        steps = max(cfg.continuation_steps,
                    int(np.ceil(abs(np.log(lam / lam0)) / np.log(1.3))) + 1)
        path = np.exp(np.linspace(np.log(lam0), np.log(lam), steps + 1))[1:]
        out = (f0, a0, 0.0, 0, [])
        for lam_k in path:
            out = _newton(nodes, h, staggered, n, lam_k, f0, a0, cfg)
            f0, a0 = out[0], out[1]
        return out
    raise last_err


def solve_profile(n: int, lam: float, grid: RadialGrid,
                  cfg: ProfileSolveConfig | None = None) -> VortexProfile:
    """Solve the vortex ODE system; fields and derivatives on `grid`.

    Negative winding is mapped to |n| (conjugation symmetry).  The Newton
    system is solved on the cfg.refine-times finer aligned mesh; the
    reported newton_residual is the weighted residual on that solve mesh.
    """
    if n == 0:
        raise ValueError("winding degree must be nonzero")
    n = abs(int(n))
    if lam <= 0:
        raise ValueError(f"coupling lambda must be positive, got {lam}")
    cfg = cfg or ProfileSolveConfig()
    fine_grid, idx = grid.refined(cfg.refine)
    fine = FineFields(nodes=fine_grid.nodes, h=fine_grid.h,
                      f=np.empty(0), a=np.empty(0))
    f, a, rnorm, iters, energies = _solve_on_fine(n, lam, fine, cfg)
    fine.f, fine.a = f, a
    fpar = -1.0 if n % 2 else 1.0
    staggered = fine.nodes[0] <= 0.75 * fine.h
    fp = deriv4(f, fine.h, parity=fpar if staggered else None)
    ap = deriv4(a, fine.h, parity=1.0 if staggered else None)
    return VortexProfile(n=n, lam=float(lam), grid=grid,
                         f=f[idx], a=a[idx], f_prime=fp[idx], a_prime=ap[idx],
                         newton_residual=rnorm, newton_iters=iters,
                         newton_energies=energies, fine=fine)


def continue_in_lambda(p: VortexProfile, lambda_target: float,
                       steps: int, cfg: ProfileSolveConfig | None = None) -> VortexProfile:
    """Re-solve along a geometric lambda path seeded by the previous fields."""
    if lambda_target <= 0:
        raise ValueError("target lambda must be positive")
    cfg = cfg or ProfileSolveConfig()
    if steps < 1 or np.isclose(lambda_target, p.lam):
        if np.isclose(lambda_target, p.lam):
            return p
        raise ValueError("steps must be >= 1")
    if p.fine is None:
        raise ValueError("profile lacks its solve-mesh fields; re-solve first")
    path = np.exp(np.linspace(np.log(p.lam), np.log(lambda_target), steps + 1))[1:]
    fine_grid, idx = p.grid.refined(cfg.refine)
    f0 = p.fine.f
    a0 = p.fine.a
    if len(f0) != fine_grid.n_points:
        raise ValueError("profile solve mesh does not match cfg.refine")
    out = None
    for lam_k in path:
        fine = FineFields(nodes=fine_grid.nodes, h=fine_grid.h,
                          f=np.empty(0), a=np.empty(0))
        out = _solve_on_fine(p.n, lam_k, fine, cfg, seed=(f0, a0))
        f0, a0 = out[0], out[1]
    f, a, rnorm, iters, energies = out
    fpar = -1.0 if p.n % 2 else 1.0
    staggered = fine_grid.nodes[0] <= 0.75 * fine_grid.h
    fp = deriv4(f, fine_grid.h, parity=fpar if staggered else None)
    ap = deriv4(a, fine_grid.h, parity=1.0 if staggered else None)
    return VortexProfile(n=p.n, lam=float(lambda_target), grid=p.grid,
                         f=f[idx], a=a[idx], f_prime=fp[idx], a_prime=ap[idx],
                         newton_residual=rnorm, newton_iters=iters,
                         newton_energies=energies,
                         fine=FineFields(fine_grid.nodes, fine_grid.h, f, a))


# ---------------------------------------------------------------------------
# derived quantities and checks


def radial_energy(p: VortexProfile) -> float:
    """Energy of the equivariant configuration (angular factor included).

    At critical coupling lam = 1 the value is pi * n for the solved vortex.
    """
    r = p.grid.nodes
    dens = (p.f_prime ** 2
            + p.n ** 2 * (1.0 - p.a) ** 2 * p.f ** 2 / r ** 2
            + p.n ** 2 * p.a_prime ** 2 / r ** 2
            + 0.25 * p.lam * (p.f ** 2 - 1.0) ** 2)
    ones = np.ones_like(r)
    return float(np.pi * weighted_inner_product(p.grid, dens, ones))


def profile_inequality_margin(p: VortexProfile) -> np.ndarray:
    """e(r) = f'(r) - b(r) f(r) on the interior nodes (ends dropped).

    Positive for lam < 1, negative for lam > 1, and identically zero at
    critical coupling where f' = n(1-a)f/r exactly.
    """
    e = p.f_prime - p.b() * p.f
    return e[1:-1]


def bogomolnyi_residual(p: VortexProfile) -> float:
    """Max-norm violation of the two first-order relations on [0.1, 0.75 rmax]."""
    r = p.grid.nodes
    lo, hi = 0.1, 0.75 * p.grid.r_max
    mask = (r >= lo) & (r <= hi)
    e1 = p.f_prime - p.b() * p.f
    e2 = p.n * p.a_prime / r - 0.5 * (1.0 - p.f ** 2)
    return float(max(np.max(np.abs(e1[mask])), np.max(np.abs(e2[mask]))))


def lambda_derivative_check(n: int, lam: float, grid: RadialGrid,
                            dlam: float = 1e-3,
                            cfg: ProfileSolveConfig | None = None) -> float:
    """Relative residual of the coupling-derivative identity M0 xi = eta.

    xi = (d_lam f, n d_lam a / r) by centered differences of two solves,
    eta = ((1 - f^2) f / 2, 0); the returned value is ||M0 xi - eta|| / ||eta||
    in the weighted norm.
    """
    from .operators import assemble_M0_N0

    cfg = cfg or ProfileSolveConfig()
    p0 = solve_profile(n, lam, grid, cfg)
    pm = solve_profile(n, lam - dlam, grid, cfg)
    pp = solve_profile(n, lam + dlam, grid, cfg)
    m = grid.n_active
    rf = grid.active_nodes
    dfl = (pp.f - pm.f) / (2.0 * dlam)
    dal = (pp.a - pm.a) / (2.0 * dlam)
    xi = np.concatenate([dfl[:m], n * dal[:m] / rf])
    eta = np.concatenate([0.5 * (1.0 - p0.f[:m] ** 2) * p0.f[:m], np.zeros(m)])
    M0, _ = assemble_M0_N0(p0)
    resid = M0.matrix.apply(xi) - eta
    return M0.matrix.weighted_norm(resid) / M0.matrix.weighted_norm(eta)


def verify_properties(p: VortexProfile) -> dict:
    """Quantified existence-theorem property suite for a converged profile.

    Returns named results; every entry must be truthy for a good profile:
      bounds        0 < f < 1 and 0 < a < 1 (strict on the resolvable
                    window r <= 0.75 r_max; in the far tail 1 - f can
                    underflow to exactly zero in double precision)
      monotone      f' > 0 and a' > 0 on the same window
      f_slope       log-log slope of f near the axis within n +- 0.1
      a_slope       log-log slope of a near the axis within 2 +- 0.1
      far_field     |1-f| + |1-a| <= 1e-6 at the two nodes next to r_max
    """
    r = p.grid.nodes
    inner = slice(1, -1)
    strict = (r > r[0]) & (r <= 0.75 * p.grid.r_max)
    out = {}
    out["bounds"] = bool(
        np.all((p.f[strict] > 0) & (p.f[strict] < 1))
        and np.all((p.a[strict] > 0) & (p.a[strict] < 1))
        and np.all((p.f[inner] > 0) & (p.f[inner] <= 1.0 + 1e-12))
        and np.all((p.a[inner] > 0) & (p.a[inner] <= 1.0 + 1e-12)))
    out["monotone"] = bool(np.all(p.f_prime[strict] > 0)
                           and np.all(p.a_prime[strict] > 0))
    fit = (r > 2.0 * p.grid.r_min) & (r <= 10.0 * p.grid.r_min)
    fslope = np.polyfit(np.log(r[fit]), np.log(p.f[fit]), 1)[0]
    aslope = np.polyfit(np.log(r[fit]), np.log(p.a[fit]), 1)[0]
    out["f_slope"] = bool(abs(fslope - p.n) <= 0.1)
    out["a_slope"] = bool(abs(aslope - 2.0) <= 0.1)
    out["f_slope_value"] = float(fslope)
    out["a_slope_value"] = float(aslope)
    tail = slice(-3, -1)
    out["far_field"] = bool(np.all(np.abs(1 - p.f[tail]) + np.abs(1 - p.a[tail]) <= 1e-6))
    return out


# ---------------------------------------------------------------------------
# serialization


def profile_to_csv(p: VortexProfile, path=None) -> str | None:
    """Write r,f,a,f_prime,a_prime with '#' metadata header lines."""
    buf = io.StringIO()
    buf.write("# glvortex profile\n")
    buf.write(f"# n = {p.n}\n")
    buf.write(f"# lambda = {p.lam!r}\n")
    buf.write(f"# r_min = {p.grid.r_min!r}\n")
    buf.write(f"# r_max = {p.grid.r_max!r}\n")
    buf.write(f"# n_points = {p.grid.n_points}\n")
    buf.write(f"# newton_residual = {p.newton_residual!r}\n")
    buf.write("r,f,a,f_prime,a_prime\n")
    for i in range(p.grid.n_points):
        buf.write(f"{float(p.grid.nodes[i])!r},{float(p.f[i])!r},"
                  f"{float(p.a[i])!r},{float(p.f_prime[i])!r},"
                  f"{float(p.a_prime[i])!r}\n")
    text = buf.getvalue()
    if path is None:
        return text
    with open(path, "w") as fh:
        fh.write(text)
    return None


def profile_from_csv(path) -> VortexProfile:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    key, val = line[1:].split("=", 1)
                    meta[key.strip()] = val.strip()
                continue
            if line.startswith("r,"):
                continue
            rows.append([float(x) for x in line.split(",")])
    data = np.array(rows)
    grid = build_grid(float(meta["r_min"]), float(meta["r_max"]),
                      int(meta["n_points"]))
    return VortexProfile(n=int(meta["n"]), lam=float(meta["lambda"]), grid=grid,
                         f=data[:, 1], a=data[:, 2],
                         f_prime=data[:, 3], a_prime=data[:, 4],
                         newton_residual=float(meta.get("newton_residual", "nan")))
