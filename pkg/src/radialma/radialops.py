"""Radial metrics and Monge-Ampere operators on the Weyl chamber.

A metric of the reduced family is determined by one profile function per
positive root: the flat profile z^2 reproduces the Euclidean (Killing)
metric on p, the hyperbolic profile sinh^2 z the negatively curved
symmetric metric of the dual space.  For K-invariant functions the curved
Monge-Ampere operator factors through the flat one with an explicit
positive density; both sides of that factorization are implemented here,
together with a geodesic finite-difference oracle that computes the curved
operator without ever touching the factor formula.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "FLAT",
    "HYPERBOLIC",
    "InvariantPolynomial",
    "MetricProfile",
    "RadialFunction",
    "RadialHessian",
    "RootProfile",
    "custom_profile",
    "euclidean_ma_reduced",
    "factor_F",
    "geodesic_ma_oracle",
    "is_strictly_convex",
    "metric_determinant",
    "radial_hessian",
    "random_invariant_polynomial",
    "symmetric_ma",
]

WALL_BAND = 1e-6


class ConvexityMismatchError(RuntimeError):
    """Flat and curved convexity verdicts disagreed away from the sign boundary."""


# -- profiles -----------------------------------------------------------------


@dataclass(frozen=True)
class RootProfile:
    """Single-root profile F with derivative and the wall-safe ratio
    z F'(z) / (2 F(z)), whose z -> 0 limit is 1 for any admissible profile."""

    name: str
    value: callable
    deriv: callable
    half_slope: callable
    is_builtin: bool = False

    def validate(self):
        """Admissibility checks: F vanishes at 0 and z^{-1} F' stays positive.

        Sampled at 50 points of [-1e-3, 1], plus the origin for F itself.
        """
        if abs(self.value(0.0)) > 1e-14:
            raise ValueError(f"profile {self.name}: F(0) != 0")
        zs = np.concatenate([np.linspace(-1e-3, -1e-8, 10), np.linspace(1e-8, 1.0, 40)])
        ratios = np.array([self.deriv(z) / z for z in zs])
        if not np.all(np.isfinite(ratios)) or ratios.min() <= 0.0:
            raise ValueError(f"profile {self.name}: z^-1 F'(z) not positive near 0")
        left, right = ratios[9], ratios[10]
        if abs(left - right) > 0.2 * max(abs(left), abs(right)):
            raise ValueError(f"profile {self.name}: z^-1 F'(z) jumps across 0")
        return self


def _hyperbolic_half_slope(z):
    # z coth z, with the removable singularity expanded analytically
    if abs(z) < 1e-4:
        z2 = z * z
        return 1.0 + z2 / 3.0 - z2 * z2 / 45.0
    return z / np.tanh(z)


FLAT = RootProfile("flat", lambda z: z * z, lambda z: 2.0 * z, lambda z: 1.0,
                   is_builtin=True)
HYPERBOLIC = RootProfile("hyperbolic", lambda z: np.sinh(z) ** 2,
                         lambda z: np.sinh(2.0 * z), _hyperbolic_half_slope,
                         is_builtin=True)


def custom_profile(value, deriv, name="custom"):
    """Wrap a user profile; the wall ratio is formed directly from F and F',
    with a precision warning inside the wall band."""

    def half_slope(z):
        if abs(z) < WALL_BAND:
            warnings.warn(
                f"profile {name}: wall ratio evaluated within {WALL_BAND} of a wall; "
                "no series limit is available for custom profiles",
                stacklevel=2,
            )
            if z == 0.0:
                raise ValueError(f"profile {name}: wall ratio undefined at z = 0")
        f = value(z)
        if f == 0.0:
            raise ValueError(f"profile {name}: non-removable wall singularity")
        return z * deriv(z) / (2.0 * f)

    return RootProfile(name, value, deriv, half_slope).validate()


@dataclass(frozen=True)
class MetricProfile:
    """Assignment of one RootProfile per positive root of a space."""

    per_root: tuple

    @classmethod
    def uniform(cls, space, root_profile):
        return cls(tuple([root_profile] * len(space.positive_roots)))


def _per_root(space, profile):
    if isinstance(profile, RootProfile):
        return tuple([profile] * len(space.positive_roots))
    if isinstance(profile, MetricProfile):
        if len(profile.per_root) != len(space.positive_roots):
            raise ValueError("metric profile does not match the space's root count")
        return profile.per_root
    raise TypeError(f"unsupported profile {profile!r}")


# -- radial functions ----------------------------------------------------------


class RadialFunction:
    """Weyl-invariant function on the chamber with value/gradient/Hessian.

    Invariance is built in: every evaluation first maps its argument to the
    chamber representative and pulls derivatives back through the reflection.
    Missing derivative evaluators fall back to centered differences of the
    value evaluator.
    """

    def __init__(self, space, value, grad=None, hess=None, fd_step=1e-5):
        self.space = space
        self._value = value
        self._grad = grad
        self._hess = hess
        self._fd_step = fd_step

    def value(self, r):
        rc = self.space.chamber.project(r)
        return float(self._value(rc))

    def gradient(self, r):
        rc, w = self.space.chamber.project_with_reflection(r)
        if self._grad is not None:
            g = np.asarray(self._grad(rc), dtype=float)
        else:
            g = self._fd_gradient(rc)
        return w.T @ g

    def hessian(self, r):
        rc, w = self.space.chamber.project_with_reflection(r)
        if self._hess is not None:
            h = np.asarray(self._hess(rc), dtype=float)
        else:
            h = self._fd_hessian(rc)
        return w.T @ h @ w

    def _fd_gradient(self, r):
        h = self._fd_step
        g = np.empty(self.space.rank)
        for i in range(self.space.rank):
            e = np.zeros(self.space.rank)
            e[i] = h
            g[i] = (self.value(r + e) - self.value(r - e)) / (2.0 * h)
        return g

    def _fd_hessian(self, r):
        h = self._fd_step
        n = self.space.rank
        out = np.empty((n, n))
        f0 = self.value(r)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h
            out[i, i] = (self.value(r + ei) + self.value(r - ei) - 2.0 * f0) / h**2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = h
                mixed = (self.value(r + ei + ej) + self.value(r - ei - ej)
                         - self.value(r + ei - ej) - self.value(r - ei + ej))
                out[i, j] = out[j, i] = mixed / (4.0 * h**2)
        return out

    def shifted(self, constant):
        return RadialFunction(
            self.space,
            lambda r: self._value(r) + constant,
            self._grad,
            self._hess,
            self._fd_step,
        )


class InvariantPolynomial(RadialFunction):
    """Polynomial in the symmetric-function generators of the weight spectrum.

    Generators: e2 and e3, the elementary symmetric functions of the linear
    weight values of the point (exactly Weyl invariant since reflections
    permute the weights), plus an optional multiple of the invariant
    quadratic 0.5 |r|^2.
    """

    def __init__(self, space, coeffs, quad=0.0):
        self.coeffs = dict(coeffs)
        self.quad = float(quad)
        self._w = space.weights
        self._gram = self._w.T @ self._w
        super().__init__(space, self._val, self._grd, self._hss)

    def _gens(self, r):
        lam = self._w @ r
        e2 = -0.5 * float(r @ self._gram @ r)
        e3 = float(np.sum(lam**3)) / 3.0
        g2 = -self._gram @ r
        g3 = self._w.T @ lam**2
        h2 = -self._gram
        h3 = 2.0 * self._w.T @ (lam[:, None] * self._w)
        return e2, e3, g2, g3, h2, h3

    def _val(self, r):
        r = np.asarray(r, dtype=float)
        e2, e3, *_ = self._gens(r)
        total = 0.5 * self.quad * float(r @ r)
        for (i, j), c in self.coeffs.items():
            total += c * e2**i * e3**j
        return total

    def _grd(self, r):
        r = np.asarray(r, dtype=float)
        e2, e3, g2, g3, *_ = self._gens(r)
        g = self.quad * r.copy()
        for (i, j), c in self.coeffs.items():
            if i:
                g = g + c * i * e2 ** (i - 1) * e3**j * g2
            if j:
                g = g + c * j * e2**i * e3 ** (j - 1) * g3
        return g

    def _hss(self, r):
        r = np.asarray(r, dtype=float)
        e2, e3, g2, g3, h2, h3 = self._gens(r)
        n = len(r)
        h = self.quad * np.eye(n)
        for (i, j), c in self.coeffs.items():
            if i:
                h = h + c * i * e2 ** (i - 1) * e3**j * h2
                if i > 1:
                    h = h + c * i * (i - 1) * e2 ** (i - 2) * e3**j * np.outer(g2, g2)
                if j:
                    cross = c * i * j * e2 ** (i - 1) * e3 ** (j - 1)
                    h = h + cross * (np.outer(g2, g3) + np.outer(g3, g2))
            if j:
                h = h + c * j * e2**i * e3 ** (j - 1) * h3
                if j > 1:
                    h = h + c * j * (j - 1) * e2**i * e3 ** (j - 2) * np.outer(g3, g3)
        return h

    def with_quad(self, quad):
        return InvariantPolynomial(self.space, self.coeffs, quad)


_DEGREE6_MONOMIALS = ((1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (0, 2))


def random_invariant_polynomial(space, rng, convexify=None, radius=1.5, margin=0.3):
    """Random invariant polynomial of total degree <= 6.

    With ``convexify=True`` the quadratic coefficient is raised until the
    Hessian and the angular ratios clear the margin on a sample of the ball
    of the given radius; ``convexify=False`` instead pushes them below
    ``-margin`` (for negative test cases).
    """
    coeffs = {m: rng.uniform(-1.0, 1.0) for m in _DEGREE6_MONOMIALS}
    poly = InvariantPolynomial(space, coeffs)
    if convexify is None:
        return poly
    samples = [space.sample_chamber_point(rng, radius=radius, margin=0.02)
               for _ in range(40)]
    lows, highs = [], []
    for r in samples:
        eig = np.linalg.eigvalsh(poly.hessian(r))
        g = poly.gradient(r)
        ratios = [root.value(g) / root.value(r) for root in space.positive_roots]
        lows.append(min(eig.min(), min(ratios)))
        highs.append(max(eig.max(), max(ratios)))
    if convexify:
        return poly.with_quad(max(0.0, margin - min(lows)))
    return poly.with_quad(min(0.0, -margin - max(highs)))


# -- radial Hessian and operators ----------------------------------------------


@dataclass(frozen=True)
class RadialHessian:
    """Block-diagonal Riemannian Hessian of an invariant function.

    ``radial_block`` is the Euclidean Hessian on the abelian subspace;
    ``angular_entries`` holds one diagonal entry per index (root, m) in the
    invariant coframe, in root order with each root repeated d_alpha times.
    The mixed blocks vanish identically for the reduced metric family.
    """

    radial_block: np.ndarray
    angular_entries: np.ndarray

    def min_radial_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.radial_block).min())

    def min_entry(self):
        return min(self.min_radial_eigenvalue(),
                   float(self.angular_entries.min(initial=np.inf)))

    def is_positive_definite(self, floor=0.0):
        return self.min_entry() > floor

    def determinant(self):
        return float(np.linalg.det(self.radial_block) * np.prod(self.angular_entries))


def _root_values(space, r):
    return np.array([root.value(r) for root in space.positive_roots])


def metric_determinant(space, profile, r):
    """Determinant of the profile metric in the invariant coframe at r:
    the product of F_j(alpha_j(r)) over all (root, m) indices."""
    profiles = _per_root(space, profile)
    vals = _root_values(space, r)
    if np.any(vals <= 0.0):
        raise ValueError("metric determinant requested on or outside a chamber wall")
    det = 1.0
    for root, prof, z in zip(space.positive_roots, profiles, vals):
        fz = prof.value(z)
        if fz == 0.0:
            raise ValueError(f"profile {prof.name} vanishes at alpha(r) = {z}")
        det *= fz ** root.d_alpha
    return float(det)


def radial_hessian(space, profile, u, r):
    """Riemannian Hessian of the invariant function at a chamber point.

    The radial block is the plain Euclidean Hessian of the chamber
    restriction; each angular entry is half the profile slope at alpha(r)
    times alpha of the Euclidean gradient.
    """
    profiles = _per_root(space, profile)
    grad = u.gradient(r)
    entries = []
    for root, prof in zip(space.positive_roots, profiles):
        entry = 0.5 * prof.deriv(root.value(r)) * root.value(grad)
        entries.extend([entry] * root.d_alpha)
    return RadialHessian(u.hessian(r), np.array(entries))


def factor_F(space, profile, r):
    """Reduction density relating the curved and flat operators.

    Product over all (root, m) of alpha_j(r) (dF_j/dz)/2 / F_j(alpha_j(r)),
    evaluated in the wall-safe ratio form so that walls are removable.
    """
    profiles = _per_root(space, profile)
    out = 1.0
    for root, prof in zip(space.positive_roots, profiles):
        out *= prof.half_slope(root.value(r)) ** root.d_alpha
    return float(out)


def euclidean_ma_reduced(space, u, r):
    """Flat Monge-Ampere operator of the invariant extension, reduced to the
    chamber: det of the Euclidean Hessian times the product of
    alpha(grad) / alpha(r) with multiplicities."""
    vals = _root_values(space, r)
    if np.any(vals <= 0.0):
        raise ValueError("reduced operator requested on or outside a chamber wall")
    grad = u.gradient(r)
    out = float(np.linalg.det(u.hessian(r)))
    for root, z in zip(space.positive_roots, vals):
        out *= (root.value(grad) / z) ** root.d_alpha
    return out


def symmetric_ma(space, profile, u, r):
    """Curved Monge-Ampere operator at a chamber point: the reduction factor
    times the flat reduced operator (equivalently det of the radial Hessian
    over the metric determinant)."""
    return factor_F(space, profile, r) * euclidean_ma_reduced(space, u, r)


def is_strictly_convex(space, profile, u, sample, floor=0.0, guard=1e-10):
    """Positive definiteness of the radial Hessian over the sample points.

    The verdict is computed both for the requested profile and for the flat
    one; the two must agree whenever no deciding entry sits within ``guard``
    of zero, and a disagreement is raised as an invariant violation.
    """
    verdict_profile = True
    verdict_flat = True
    for r in sample:
        hp = radial_hessian(space, profile, u, r)
        hf = radial_hessian(space, FLAT, u, r)
        vp = hp.is_positive_definite(floor)
        vf = hf.is_positive_definite(floor)
        if vp != vf and min(abs(hp.min_entry()), abs(hf.min_entry())) > guard:
            raise ConvexityMismatchError(
                f"profile and flat convexity verdicts disagree at {r}"
            )
        verdict_profile &= vp
        verdict_flat &= vf
    return bool(verdict_profile)


# -- geodesic finite-difference oracle ------------------------------------------


def _second_difference(fun, f0, step, richardson=True):
    def raw(h):
        return (fun(h) + fun(-h) - 2.0 * f0) / h**2

    if not richardson:
        return raw(step)
    return (4.0 * raw(0.5 * step) - raw(step)) / 3.0


def geodesic_ma_oracle(space, profile, u, r, step=1e-3, richardson=True):
    """Curved Monge-Ampere value computed from geodesic second differences.

    Builds the full Riemannian Hessian matrix in an orthonormal frame by
    differentiating u along metric geodesics through the point (matrix-group
    geodesics for the hyperbolic profile, straight lines for the flat one)
    and polarizing; returns its determinant.  Independent of the reduction
    factor and of the radial Hessian construction.
    """
    if not (isinstance(profile, RootProfile) and profile.is_builtin):
        raise ValueError("the geodesic oracle supports the built-in profiles only")
    model = space.model
    pidx = model.p_indices()
    n = space.dim_p
    p_mat = space.a_matrix(r)
    if profile.name == "flat":
        def point_on_geodesic(q_mat, t):
            return p_mat + t * q_mat
    else:
        exp_ip = scipy.linalg.expm(1j * p_mat)

        def point_on_geodesic(q_mat, t):
            x = exp_ip @ scipy.linalg.expm(1j * t * q_mat)
            h = x.conj().T @ x
            w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
            return -0.5j * ((v * np.log(w)) @ v.conj().T)

    def u_along(q_mat):
        return lambda t: u.value(space.to_chamber(point_on_geodesic(q_mat, t)))

    f0 = u.value(r)
    frame = [model.basis[i] for i in pidx]
    hess = np.empty((n, n))
    for s in range(n):
        hess[s, s] = _second_difference(u_along(frame[s]), f0, step, richardson)
    for s in range(n):
        for t in range(s + 1, n):
            plus = _second_difference(u_along(frame[s] + frame[t]), f0, step, richardson)
            minus = _second_difference(u_along(frame[s] - frame[t]), f0, step, richardson)
            hess[s, t] = hess[t, s] = 0.25 * (plus - minus)
    return float(np.linalg.det(hess))
