"""Solvers for the reduced invariant Monge-Ampere equation on a chamber ball.

Two routes are provided: a quadrature solver for rank-one spaces (the
reduced equation there is an ODE that integrates in closed form up to two
nested quadratures) and a damped Newton iteration on a chamber-adapted
lattice for general rank.  The lattice is spanned by the chamber edge
directions, so wall reflections act on it by integer matrices and Weyl
invariance of the discrete solution holds exactly through ghost-node
mapping rather than through penalty terms.

The Dirichlet problem on a ball of radius R is a desk-scale stand-in for
the global solvability theory; reports state the normalization explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from numpy.polynomial.chebyshev import Chebyshev

from .radialops import FLAT, HYPERBOLIC, RadialFunction, _per_root, factor_F

__all__ = [
    "ChamberGrid",
    "SolutionReport",
    "SolverConfig",
    "SolverError",
    "prescribe_ricci",
    "solve_newton",
    "solve_rank1_ode",
]


class SolverError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# -- rank-one quadrature solver -------------------------------------------------


def solve_rank1_ode(space, f, radius, boundary_value=0.0, degree=200, pad=0.15):
    """Reduced equation in rank one, solved by double quadrature.

    With the single positive root alpha (slope a, multiplicity d) the
    hyperbolic-profile operator is u'' (a u' coth(a r))^d, so
    (u')^(d+1) is the antiderivative of (d+1) f(r) (tanh(a r)/a)^d and u
    follows by one more quadrature, normalized by u'(0) = 0 and
    u(radius) = boundary_value.  The quadratures are carried by Chebyshev
    interpolants of the smooth integrands, accurate well past the 1e-10
    target of the report fields; derivatives come from the interpolants.
    """
    if space.rank != 1:
        raise ValueError("solve_rank1_ode requires a rank-one space")
    root = space.positive_roots[0]
    a = float(root.alpha[0])
    d = root.d_alpha
    top = radius * (1.0 + pad)

    def fval(r):
        return np.array([f.value(np.array([s])) for s in np.atleast_1d(r)])

    probe = fval(np.linspace(0.0, top, 73))
    if probe.min() <= 0.0:
        raise ValueError("density must be strictly positive on the solve interval")

    def integrand(r):
        r = np.atleast_1d(r)
        return (d + 1) * fval(r) * (np.tanh(a * r) / a) ** d

    q = Chebyshev.interpolate(integrand, degree, domain=[0.0, top]).integ(lbnd=0.0)

    def uprime_raw(r):
        return np.maximum(q(np.atleast_1d(r)), 0.0) ** (1.0 / (d + 1))

    up = Chebyshev.interpolate(uprime_raw, degree, domain=[0.0, top])
    up_int = up.integ(lbnd=0.0)
    upp = up.deriv()
    offset = boundary_value - up_int(radius)

    def value(r):
        return float(up_int(abs(float(r[0]))) + offset)

    def grad(r):
        s = float(r[0])
        return np.array([np.sign(s) * up(abs(s))]) if s != 0.0 else np.array([0.0])

    def hess(r):
        return np.array([[float(upp(abs(float(r[0]))))]])

    return RadialFunction(space, lambda r: value(np.atleast_1d(r)),
                          lambda r: grad(np.atleast_1d(r)),
                          lambda r: hess(np.atleast_1d(r)))


# -- chamber lattice -------------------------------------------------------------


class ChamberGrid:
    """Tensor lattice over ball(radius) intersected with the closed chamber.

    The lattice is spanned by the unit chamber edge directions, which makes
    every wall reflection an integer matrix on indices: stencil legs that
    leave the chamber are folded back onto stored nodes, realizing
    Weyl-invariant ghost values exactly.
    """

    _OFFSETS = {
        1: [(-1,), (0,), (1,)],
        2: [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1),
            (1, -1), (1, 0), (1, 1)],
    }

    def __init__(self, space, radius, nodes_per_axis):
        if space.rank not in (1, 2):
            raise ValueError("chamber grids are implemented for rank 1 and 2")
        self.space = space
        self.radius = float(radius)
        self.nodes_per_axis = int(nodes_per_axis)
        self.spacing = self.radius / self.nodes_per_axis
        rays = space.chamber.edge_rays()
        self.basis = np.column_stack(rays)
        self.basis_inv = np.linalg.inv(self.basis)
        self._init_reflections()
        self._init_nodes()
        self.offsets = self._OFFSETS[space.rank]
        self._init_stencils()

    def _init_reflections(self):
        rank = self.space.rank
        self.wall_reflections = []
        for j in range(rank):
            if rank == 1:
                refl = np.array([[-1.0]])
            else:
                other = self.basis[:, 1 - j]
                root = next(
                    r for r in self.space.positive_roots
                    if abs(r.value(other)) < 1e-9
                )
                refl = self.space.chamber.reflection(root)
            latt = self.basis_inv @ refl @ self.basis
            if np.abs(latt - np.round(latt)).max() > 1e-9:
                raise ValueError("wall reflection is not integral on the lattice")
            self.wall_reflections.append(np.round(latt).astype(int))

    def lattice_project(self, n):
        """Fold an integer index into the chamber cone by wall reflections."""
        n = np.asarray(n, dtype=int).copy()
        for _ in range(200):
            neg = np.where(n < 0)[0]
            if len(neg) == 0:
                return tuple(n)
            n = self.wall_reflections[neg[0]] @ n
        raise RuntimeError("lattice projection did not terminate")

    def _init_nodes(self):
        rank = self.space.rank
        h = self.spacing
        bound = int(np.ceil(self.radius / h / np.sqrt(0.75))) + 1
        index = {}
        coords = []
        lattice = []
        rng = [range(bound + 1)] * rank
        grids = np.meshgrid(*rng, indexing="ij")
        for n in zip(*[g.ravel() for g in grids]):
            x = self.basis @ (h * np.asarray(n, dtype=float))
            if np.linalg.norm(x) <= self.radius + 1e-12:
                index[tuple(int(v) for v in n)] = len(coords)
                coords.append(x)
                lattice.append(tuple(int(v) for v in n))
        self.index = index
        self.coords = np.array(coords)
        self.lattice = lattice
        self.n_nodes = len(coords)

    def _init_stencils(self):
        offsets = self._OFFSETS[self.space.rank]
        stencil = np.full((self.n_nodes, len(offsets)), -1, dtype=int)
        for i, n in enumerate(self.lattice):
            for o_idx, off in enumerate(offsets):
                m = self.lattice_project(np.asarray(n) + np.asarray(off))
                if m in self.index:
                    stencil[i, o_idx] = self.index[m]
        self.is_unknown = (stencil >= 0).all(axis=1)
        self.stencil = stencil
        self.unknown_indices = np.where(self.is_unknown)[0]
        self.dirichlet_indices = np.where(~self.is_unknown)[0]
        # wall flags: per node, which positive roots vanish there
        vals = np.array(
            [[root.value(x) for root in self.space.positive_roots]
             for x in self.coords]
        )
        self.wall_mask = np.abs(vals) < 1e-12
        self.root_values = vals

    def boundary_flags(self):
        return ~self.is_unknown


# -- Newton solver ---------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_iter: int = 40
    damping: float = 0.5
    convexity_floor: float = 1e-8

    def __post_init__(self):
        if min(self.newton_tol, self.max_iter, self.convexity_floor) <= 0:
            raise ValueError("solver tolerances and limits must be positive")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")


@dataclass
class SolutionReport:
    """Discrete solution plus convergence and convexity diagnostics.

    The solve is a Dirichlet problem on ball(radius) in the chamber; the
    normalization is this boundary data, not any growth condition at
    infinity.  ``certificate`` is True only when the minimal Hessian
    eigenvalue over the grid clears the configured convexity floor.
    """

    grid: ChamberGrid
    values: np.ndarray
    residual_sup: float
    iterations: int
    min_hessian_eigenvalue: float
    certificate: bool
    residuals: np.ndarray = field(repr=False, default=None)
    ricci_samples: list = field(default_factory=list)

    def value_at_lattice(self, n):
        return float(self.values[self.grid.index[self.grid.lattice_project(n)]])

    def as_radial_function(self):
        """Interpolating view of the discrete solution (rank one only)."""
        grid = self.grid
        if grid.space.rank != 1:
            raise NotImplementedError("interpolated view implemented for rank 1")
        from scipy.interpolate import CubicSpline

        r = grid.coords[:, 0]
        order = np.argsort(r)
        spline = CubicSpline(r[order], self.values[order], bc_type="natural")
        return RadialFunction(
            grid.space,
            lambda p: float(spline(abs(float(np.atleast_1d(p)[0])))),
        )

    def table_rows(self):
        rows = []
        res_full = np.zeros(self.grid.n_nodes)
        if self.residuals is not None:
            res_full[self.grid.unknown_indices] = self.residuals
        for i in range(self.grid.n_nodes):
            rows.append(
                list(self.grid.coords[i])
                + [self.values[i], res_full[i], float(self.min_hessian_eigenvalue)]
            )
        return rows


class _Discretization:
    """Vectorized residual/Jacobian assembly for the reduced operator."""

    def __init__(self, grid, profile, f_log):
        self.grid = grid
        space = grid.space
        self.rank = space.rank
        h = grid.spacing
        self.f_log = f_log
        self.profiles = _per_root(space, profile)
        self.alphas = np.array([r.vector for r in space.positive_roots])
        self.mults = np.array([r.d_alpha for r in space.positive_roots])
        self.unit_alphas = self.alphas / np.linalg.norm(self.alphas, axis=1)[:, None]
        a_inv_t = grid.basis_inv.T
        offsets = grid.offsets
        n_off = len(offsets)
        # stencil templates for the lattice Hessian and gradient per offset
        self.h_templates = np.zeros((n_off, self.rank, self.rank))
        self.g_templates = np.zeros((n_off, self.rank))
        for o_idx, off in enumerate(offsets):
            hs = np.zeros((self.rank, self.rank))
            gs = np.zeros(self.rank)
            for i in range(self.rank):
                ei = np.zeros(self.rank, dtype=int)
                ei[i] = 1
                if all(off == tuple(ei)) or all(off == tuple(-ei)):
                    hs[i, i] += 1.0 / h**2
                    gs[i] += (1.0 if off[i] > 0 else -1.0) / (2.0 * h)
                if all(o == 0 for o in off):
                    hs[i, i] += -2.0 / h**2
            if self.rank == 2 and off[0] != 0 and off[1] != 0:
                sign = off[0] * off[1]
                hs[0, 1] = hs[1, 0] = sign / (4.0 * h**2)
            self.h_templates[o_idx] = a_inv_t @ hs @ a_inv_t.T
            self.g_templates[o_idx] = a_inv_t @ gs
        self.unknown = grid.unknown_indices
        self.stencil = grid.stencil[self.unknown]
        self.x = grid.coords[self.unknown]
        self.alpha_x = self.x @ self.alphas.T
        self.wall = grid.wall_mask[self.unknown]
        self.log_factor = np.array(
            [np.log(factor_F(space, profile, x)) for x in self.x]
        )
        self.log_f = np.array([f_log(x) for x in self.x])

    def _geometry(self, u_full):
        vals = u_full[self.stencil]  # (n, n_off)
        hess = np.einsum("no,oij->nij", vals, self.h_templates)
        grad = np.einsum("no,oi->ni", vals, self.g_templates)
        alpha_g = grad @ self.alphas.T
        # ratio alpha(grad)/alpha(x); on a wall both vanish linearly and the
        # limit is the second derivative along the unit coroot
        ratios = np.empty_like(alpha_g)
        reg = ~self.wall
        ratios[reg] = alpha_g[reg] / self.alpha_x[reg]
        if self.wall.any():
            quad = np.einsum("ri,nij,rj->nr", self.unit_alphas, hess, self.unit_alphas)
            ratios[self.wall] = quad[self.wall]
        return hess, grad, ratios

    @staticmethod
    def _eig2(hess):
        if hess.shape[1] == 1:
            return hess[:, 0, 0][:, None]
        tr = hess[:, 0, 0] + hess[:, 1, 1]
        det = hess[:, 0, 0] * hess[:, 1, 1] - hess[:, 0, 1] * hess[:, 1, 0]
        disc = np.sqrt(np.maximum(0.25 * tr**2 - det, 0.0))
        return np.stack([0.5 * tr - disc, 0.5 * tr + disc], axis=1)

    def residual(self, u_full):
        hess, grad, ratios = self._geometry(u_full)
        eigs = self._eig2(hess)
        min_eig = min(float(eigs.min()), float(ratios.min()))
        if min_eig <= 0.0:
            return None, min_eig
        det = (eigs[:, 0] * eigs[:, 1]) if self.rank == 2 else eigs[:, 0]
        g = (np.log(det) + (np.log(ratios) * self.mults).sum(axis=1)
             + self.log_factor - self.log_f)
        return g, min_eig

    def jacobian(self, u_full):
        hess, grad, ratios = self._geometry(u_full)
        n = len(self.unknown)
        if self.rank == 1:
            hinv = 1.0 / hess
        else:
            det = (hess[:, 0, 0] * hess[:, 1, 1] - hess[:, 0, 1] * hess[:, 1, 0])
            hinv = np.empty_like(hess)
            hinv[:, 0, 0] = hess[:, 1, 1]
            hinv[:, 1, 1] = hess[:, 0, 0]
            hinv[:, 0, 1] = -hess[:, 0, 1]
            hinv[:, 1, 0] = -hess[:, 1, 0]
            hinv /= det[:, None, None]
        col_of_node = np.full(self.grid.n_nodes, -1, dtype=int)
        col_of_node[self.unknown] = np.arange(n)
        alpha_g = grad @ self.alphas.T
        alpha_gt = self.g_templates @ self.alphas.T  # (n_off, n_roots)
        quad_t = np.einsum("ri,oij,rj->or", self.unit_alphas, self.h_templates,
                           self.unit_alphas)
        rows, cols, data = [], [], []
        for o_idx in range(len(self.grid.offsets)):
            d_logdet = np.einsum("nij,ij->n", hinv, self.h_templates[o_idx])
            # d log ratio: alpha(d grad)/alpha(grad) away from walls, the
            # quotient of coroot quadratic forms on them
            with np.errstate(divide="ignore", invalid="ignore"):
                d_reg = alpha_gt[o_idx][None, :] / alpha_g
            d_ratio = np.where(self.wall, quad_t[o_idx][None, :] / ratios, d_reg)
            vals = d_logdet + (d_ratio * self.mults).sum(axis=1)
            target = self.stencil[:, o_idx]
            keep = col_of_node[target] >= 0
            rows.extend(np.where(keep)[0])
            cols.extend(col_of_node[target[keep]])
            data.extend(vals[keep])
        return scipy.sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def _quadratic_seed_scale(space, profile, disc):
    # choose s with residual log(s^dim_p F) - log f centered at zero
    dim_p = space.dim_p
    mean = float(np.mean(disc.log_f - disc.log_factor))
    return float(np.exp(mean / dim_p))


def solve_newton(space, f, grid, config, profile=HYPERBOLIC, boundary=None):
    """Damped Newton iteration for M_g(u) = f with Dirichlet data on the rim.

    The residual is the log form of the reduced operator; line search takes
    the first step length in {1, damping, damping^2, ...} that both reduces
    the residual sup norm and keeps every Hessian eigenvalue and angular
    ratio above the convexity floor.  Raises SolverError (with the partial
    report attached) on max_iter exhaustion or cone starvation.
    """
    disc = _Discretization(grid, profile, lambda x: np.log(f.value(x)))
    s = _quadratic_seed_scale(space, profile, disc)
    if boundary is None:
        def boundary(x):
            return 0.5 * s * float(x @ x)

    u = np.array([0.5 * s * float(x @ x) for x in grid.coords])
    for i in grid.dirichlet_indices:
        u[i] = boundary(grid.coords[i])
    g, min_eig = disc.residual(u)
    if g is None or min_eig < config.convexity_floor:
        raise SolverError("seed iterate is not admissible")
    res = float(np.abs(g).max())
    iterations = 0
    while res > config.newton_tol:
        if iterations >= config.max_iter:
            raise SolverError(
                f"Newton did not converge in {config.max_iter} iterations "
                f"(last residual {res:.3e})",
                report=_make_report(grid, u, res, iterations, min_eig, config, g),
            )
        jac = disc.jacobian(u)
        delta = scipy.sparse.linalg.spsolve(jac, -g)
        step = 1.0
        accepted = False
        while step > 1e-14:
            u_try = u.copy()
            u_try[grid.unknown_indices] += step * delta
            g_try, eig_try = disc.residual(u_try)
            if (g_try is not None and eig_try >= config.convexity_floor
                    and float(np.abs(g_try).max()) < res):
                u, g, min_eig = u_try, g_try, eig_try
                res = float(np.abs(g).max())
                accepted = True
                break
            step *= config.damping
        if not accepted:
            raise SolverError(
                f"admissible-cone starvation at residual {res:.3e}",
                report=_make_report(grid, u, res, iterations, min_eig, config, g),
            )
        iterations += 1
    return _make_report(grid, u, res, iterations, min_eig, config, g)


def _make_report(grid, u, res, iterations, min_eig, config, residuals):
    return SolutionReport(
        grid=grid,
        values=u,
        residual_sup=res,
        iterations=iterations,
        min_hessian_eigenvalue=float(min_eig),
        certificate=bool(min_eig >= config.convexity_floor),
        residuals=np.abs(residuals) if residuals is not None else None,
    )


def prescribe_ricci(space, h, grid, config, sample_fractions=(0.35, 0.55, 0.75)):
    """Solve M_g(u) = exp(h) and sample the curvature defect of the result.

    The report carries the Newton solution; for rank-one spaces three
    interior curvature residual samples are attached, computed on the
    quadrature-grade representation of the same Dirichlet solution (finite
    differencing a grid interpolant would be dominated by interpolation
    noise).  Higher-rank solves return the report without samples.
    """
    from . import complexcheck

    f = RadialFunction(space, lambda r: np.exp(h.value(r)))
    disc = _Discretization(grid, HYPERBOLIC, lambda x: np.log(f.value(x)))
    scale = _quadratic_seed_scale(space, HYPERBOLIC, disc)

    def boundary(x):
        return 0.5 * scale * float(x @ x)

    report = solve_newton(space, f, grid, config, boundary=boundary)
    if space.rank != 1:
        return report
    smooth_u = solve_rank1_ode(space, f, grid.radius,
                               boundary_value=0.5 * scale * grid.radius**2)
    u_spec = complexcheck.InvariantFunctionSpec(space, smooth_u)
    h_spec = complexcheck.InvariantFunctionSpec(space, h)
    samples = []
    for frac in sample_fractions:
        r = frac * grid.radius
        p = np.zeros(space.dim_p)
        p[0] = r
        resid = complexcheck.ricci_residual(space, u_spec, h_spec, p)
        samples.append((r, resid))
    report.ricci_samples = samples
    return report
