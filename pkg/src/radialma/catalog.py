"""Shipped symmetric-space descriptors and their restricted root data.

The catalog is a fixed list of matrix models: the rank-one spheres, the
rank-two space SU(3)/SO(3), and the group cases SU(2) and SU(3) viewed as
(K x K)/K.  Root covectors are extracted numerically by diagonalizing the
squared adjoint action of a generic abelian element, with multiplicities
validated against the dimension bookkeeping of the model.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .liealg import MatrixModel, ModelError

__all__ = [
    "RestrictedRoot",
    "SymmetricSpaceDescriptor",
    "WeylChamber",
    "build_space",
    "catalog_names",
    "chamber_project",
    "restricted_roots",
]

CLUSTER_RTOL = 1e-7
MAX_ROOT_RETRIES = 5


@dataclass(frozen=True)
class RestrictedRoot:
    """A positive restricted root: covector on the abelian subspace plus the
    common dimension of its root spaces in k and p."""

    alpha: tuple
    d_alpha: int

    def value(self, r):
        return float(np.dot(self.alpha, r))

    @property
    def vector(self):
        """Coroot direction: the covector as a vector in the orthonormal frame."""
        return np.asarray(self.alpha)

    @property
    def norm(self):
        return float(np.linalg.norm(self.alpha))


@dataclass(frozen=True)
class WeylChamber:
    positive_roots: tuple
    rank: int

    def contains(self, r, tol=0.0):
        return all(root.value(r) >= -tol for root in self.positive_roots)

    def reflection(self, root):
        a = root.vector
        return np.eye(self.rank) - 2.0 * np.outer(a, a) / (a @ a)

    def project(self, r, max_iter=1000):
        """Unique closed-chamber representative of the Weyl orbit of r."""
        return self.project_with_reflection(r, max_iter)[0]

    def project_with_reflection(self, r, max_iter=1000):
        """Chamber representative plus the orthogonal matrix mapping r to it."""
        r = np.array(r, dtype=float).reshape(self.rank)
        w = np.eye(self.rank)
        for _ in range(max_iter):
            vals = [root.value(r) for root in self.positive_roots]
            worst = int(np.argmin(vals))
            if vals[worst] >= -1e-15 * max(1.0, float(np.linalg.norm(r))):
                return r, w
            refl = self.reflection(self.positive_roots[worst])
            r = refl @ r
            w = refl @ w
        raise RuntimeError("chamber projection did not terminate")

    def orbit(self, r, tol=1e-9):
        """Full Weyl orbit of r, enumerated by reflection closure."""
        start = np.array(r, dtype=float).reshape(self.rank)
        orbit = [start]
        frontier = [start]
        while frontier:
            nxt = []
            for point in frontier:
                for root in self.positive_roots:
                    image = self.reflection(root) @ point
                    if all(np.linalg.norm(image - q) > tol for q in orbit):
                        orbit.append(image)
                        nxt.append(image)
            frontier = nxt
        return orbit

    def edge_rays(self):
        """Unit extreme rays of the closed chamber (rank <= 2 only)."""
        if self.rank == 1:
            return [np.array([1.0])]
        if self.rank != 2:
            raise NotImplementedError("edge rays implemented for rank <= 2")
        rays = []
        for root in self.positive_roots:
            a = root.vector
            d = np.array([-a[1], a[0]]) / np.linalg.norm(a)
            for cand in (d, -d):
                if self.contains(cand, tol=1e-12) and not any(
                    np.linalg.norm(cand - q) < 1e-9 for q in rays
                ):
                    rays.append(cand)
        if len(rays) != 2:
            raise ModelError(f"expected 2 chamber edges, found {len(rays)}")
        return rays


class SymmetricSpaceDescriptor:
    """Matrix model of (G, K) together with its computed root data.

    Attributes of interest: ``model`` (the liealg MatrixModel), ``rank``,
    ``dim_p``, ``positive_roots``, ``chamber``, ``weights`` (joint spectrum
    of the abelian basis on the reduced matrix block, used to map p-elements
    to chamber coordinates), and ``is_group_case``.
    """

    def __init__(self, name, model, is_group_case=False):
        self.name = name
        self.model = model
        self.rank = model.rank
        self.dim_p = model.dim_p
        self.is_group_case = is_group_case
        self._validate_abelian()
        self.positive_roots = tuple(_extract_roots(model))
        self.chamber = WeylChamber(self.positive_roots, self.rank)
        self._init_weights()

    # -- validation -------------------------------------------------------

    def _validate_abelian(self):
        model = self.model
        aidx = model.a_indices()
        for i in aidx:
            for j in aidx:
                br = model.basis[i] @ model.basis[j] - model.basis[j] @ model.basis[i]
                if np.abs(br).max() > 1e-12:
                    raise ModelError(f"{model.name}: flagged subspace not abelian")
        # maximality: only a itself commutes with every a-basis element
        rows = []
        for i in aidx:
            ad = model._ad[i]
            rows.append(ad[np.ix_(model.k_indices(), model.p_indices())])
        stack = np.concatenate(rows, axis=0)
        kernel = model.dim_p - np.linalg.matrix_rank(stack, tol=1e-9)
        if kernel != self.rank:
            raise ModelError(
                f"{model.name}: abelian subspace not maximal (kernel {kernel})"
            )

    # -- weights ----------------------------------------------------------

    def _reduce(self, matrix):
        """Matrix block whose spectrum is used for chamber coordinates."""
        if self.is_group_case:
            n = self.model.block
            return matrix[:n, :n]
        return matrix

    def _init_weights(self):
        model = self.model
        mats = [
            -1j * self._reduce(model.basis[i]) for i in model.a_indices()
        ]
        for m in mats:
            if np.abs(m - m.conj().T).max() > 1e-12:
                raise ModelError(f"{model.name}: abelian block not anti-Hermitian")
        weights = np.array(_joint_spectrum(mats)).T  # (n_eigs, rank)
        # order weights by their value at a fixed interior point; the order
        # is constant on the open chamber (checked below), so sorted spectra
        # can be matched row by row
        rho = self._interior_direction()
        order = np.argsort(-(weights @ rho), kind="stable")
        self.weights = weights[order]
        rng = np.random.default_rng(12345)
        for _ in range(50):
            r = self.sample_chamber_point(rng, radius=2.0, margin=0.05)
            vals = self.weights @ r
            if np.any(np.diff(vals) > 1e-10):
                raise ModelError(f"{model.name}: weight order varies over chamber")
        self._weights_pinv = np.linalg.pinv(self.weights)

    def _interior_direction(self):
        # fixed generic direction with irrational-ish slope; flipped into the
        # chamber so every shipped space uses the same seed point
        raw = np.array([1.0 / (1.0 + k * 0.6180339887498949) for k in range(self.rank)])
        return self.chamber.project(raw / np.linalg.norm(raw))

    def interior_point(self, scale=1.0):
        return scale * self._interior_direction()

    # -- maps between p and the chamber ------------------------------------

    def a_matrix(self, r):
        """Matrix of the abelian element with chamber coordinates r."""
        return self.model.a_point_matrix(r)

    def to_chamber(self, p_matrix, tol=1e-8):
        """Chamber coordinates of the K-orbit of a p-element (given as a matrix).

        Works through the spectrum: the reduced block of an abelian element
        with coordinates r has eigenvalues <w_m, r>, and the sorted spectrum
        determines r uniquely on the closed chamber.
        """
        herm = -1j * self._reduce(np.asarray(p_matrix, dtype=complex))
        if np.abs(herm - herm.conj().T).max() > 1e-9:
            raise ModelError(f"{self.model.name}: p-element block not anti-Hermitian")
        mu = np.sort(np.linalg.eigvalsh(0.5 * (herm + herm.conj().T)))[::-1]
        r = self._weights_pinv @ mu
        resid = np.abs(self.weights @ r - mu).max()
        if resid > tol * max(1.0, np.abs(mu).max()):
            raise ModelError(
                f"{self.model.name}: spectrum not on an orbit of a (residual {resid:.2e})"
            )
        return self.chamber.project(r)

    def to_chamber_of_element(self, p_element):
        return self.to_chamber(p_element.matrix)

    # -- sampling -----------------------------------------------------------

    def sample_chamber_point(self, rng, radius=1.2, margin=0.1):
        """Random point of the open chamber with all roots above the margin."""
        for _ in range(10000):
            r = self.chamber.project(rng.standard_normal(self.rank))
            nrm = np.linalg.norm(r)
            if nrm < 1e-12:
                continue
            r = r / nrm * radius * (0.3 + 0.7 * rng.random())
            if all(root.value(r) >= margin for root in self.positive_roots):
                return r
        raise RuntimeError("chamber sampling failed")

    def random_k_group_element(self, rng, scale=0.7):
        from . import liealg

        return liealg.exp_matrix(self.model.random_element(rng, part="k", scale=scale))

    def __repr__(self):
        return (f"SymmetricSpaceDescriptor({self.name!r}, rank={self.rank}, "
                f"dim_p={self.dim_p})")


# -- root extraction --------------------------------------------------------


def _cluster(values, rtol=CLUSTER_RTOL):
    """Group sorted nonnegative values into clusters by relative gaps."""
    scale = max(1.0, float(values.max(initial=0.0)))
    clusters = []
    for idx in np.argsort(values):
        if clusters and values[idx] - values[clusters[-1][-1]] < rtol * scale:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    return clusters


def _extract_roots(model):
    aidx = model.a_indices()
    pidx = model.p_indices()
    kidx = model.k_indices()
    rank, dim_p = model.rank, model.dim_p
    last_error = None
    for attempt in range(MAX_ROOT_RETRIES):
        rng = np.random.default_rng(1000 + attempt)
        h = rng.standard_normal(rank)
        h /= np.linalg.norm(h)
        coeffs = np.zeros(model.dim)
        coeffs[aidx] = h
        ad_h = np.real(model.ad_matrix(coeffs))
        sq = -(ad_h @ ad_h)
        try:
            roots = _roots_from_generic(model, ad_h, sq, h, pidx, kidx, aidx)
        except ModelError as exc:
            last_error = exc
            continue
        total = sum(root.d_alpha for root in roots)
        if total != dim_p - rank:
            last_error = ModelError(
                f"{model.name}: multiplicity sum {total} != dim p - rank"
            )
            continue
        order = np.lexsort(np.array([root.alpha for root in roots]).T[::-1])
        return [roots[i] for i in order]
    raise ModelError(
        f"{model.name}: root extraction failed after {MAX_ROOT_RETRIES} retries"
    ) from last_error


def _roots_from_generic(model, ad_h, sq, h, pidx, kidx, aidx):
    sq_p = sq[np.ix_(pidx, pidx)]
    sq_k = sq[np.ix_(kidx, kidx)]
    w_p, v_p = np.linalg.eigh(0.5 * (sq_p + sq_p.T))
    w_k = np.linalg.eigvalsh(0.5 * (sq_k + sq_k.T))
    clusters = _cluster(w_p)
    zero = clusters[0]
    if w_p[zero].max(initial=0.0) > CLUSTER_RTOL * max(1.0, w_p.max()):
        raise ModelError("no zero cluster on p")
    if len(zero) != model.rank:
        raise ModelError("zero cluster on p has wrong dimension")
    k_clusters = _cluster(w_k) if len(w_k) else []
    roots = []
    rho = np.array([1.0 / (1.0 + k * 0.6180339887498949) for k in range(model.rank)])
    for cl in clusters[1:]:
        mu = float(np.mean(w_p[cl]))
        alpha_h = np.sqrt(mu)
        x = np.zeros(model.dim)
        x[pidx] = v_p[:, cl[0]]
        y = (ad_h @ x) / alpha_h  # lands in k; the pair (x, y) spans a root plane
        ynorm2 = float(y @ y)
        alpha = np.empty(model.rank)
        for i, ai in enumerate(aidx):
            img = np.real(model._ad[ai] @ x)
            alpha[i] = float(img @ y) / ynorm2
        if abs(alpha @ h - alpha_h) > 1e-7 * max(1.0, alpha_h):
            raise ModelError("covector reconstruction inconsistent")
        if alpha @ rho < 0:
            alpha = -alpha
        if abs(alpha @ rho) < 1e-8 * np.linalg.norm(alpha):
            raise ModelError("reference direction lies on a wall")
        d_k = next(
            (len(kcl) for kcl in k_clusters
             if abs(float(np.mean(w_k[kcl])) - mu) < CLUSTER_RTOL * max(1.0, mu)),
            0,
        )
        if d_k != len(cl):
            raise ModelError(
                f"dim k_alpha = {d_k} differs from dim p_alpha = {len(cl)}"
            )
        roots.append(RestrictedRoot(tuple(alpha), len(cl)))
    return roots


def _joint_spectrum(mats, tol=1e-9):
    """Joint eigenvalues of commuting Hermitian matrices, one list per matrix."""
    n = mats[0].shape[0]
    vals = [np.empty(n) for _ in mats]

    def recurse(v, cols, level):
        sub = v[:, cols]
        m = sub.conj().T @ mats[level] @ sub
        w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
        v[:, cols] = sub @ u
        vals[level][cols] = w
        if level + 1 < len(mats):
            for cl in _cluster_signed(w, tol):
                recurse(v, cols[cl], level + 1)

    basis = np.eye(n, dtype=complex)
    recurse(basis, np.arange(n), 0)
    return vals


def _cluster_signed(values, tol):
    order = np.argsort(values)
    clusters = [[order[0]]]
    for idx in order[1:]:
        if values[idx] - values[clusters[-1][-1]] < tol:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    return [np.array(c) for c in clusters]


# -- shipped models -----------------------------------------------------------


def _sl_model(n, name):
    """SU(n)/SO(n): k = so(n), p = i (traceless real symmetric)."""
    k_basis, p_basis = [], []
    for l in range(n - 1):
        d = np.zeros((n, n), dtype=complex)
        d[l, l], d[l + 1, l + 1] = 1.0, -1.0
        p_basis.append(1j * d)  # abelian subspace first
    for a in range(n):
        for b in range(a + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[a, b], m[b, a] = 1.0, -1.0
            k_basis.append(m)
            s = np.zeros((n, n), dtype=complex)
            s[a, b] = s[b, a] = 1.0
            p_basis.append(1j * s)
    return MatrixModel(name, k_basis, p_basis, rank=n - 1, family="sl")


def _sphere_model(n, name):
    """S^n = SO(n+1)/SO(n): k = so(n) in the trailing block, p = e_0 wedge e_a."""
    size = n + 1
    k_basis, p_basis = [], []
    for a in range(1, size):
        m = np.zeros((size, size), dtype=complex)
        m[0, a], m[a, 0] = 1.0, -1.0
        p_basis.append(m)  # first entry spans the abelian line
    for a in range(1, size):
        for b in range(a + 1, size):
            m = np.zeros((size, size), dtype=complex)
            m[a, b], m[b, a] = 1.0, -1.0
            k_basis.append(m)
    return MatrixModel(name, k_basis, p_basis, rank=1, family="so")


def _su_basis(n):
    out = []
    for l in range(n - 1):
        d = np.zeros((n, n), dtype=complex)
        d[l, l], d[l + 1, l + 1] = 1.0, -1.0
        out.append(1j * d)
    for a in range(n):
        for b in range(a + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[a, b], m[b, a] = 1.0, -1.0
            out.append(m)
            s = np.zeros((n, n), dtype=complex)
            s[a, b] = s[b, a] = 1.0
            out.append(1j * s)
    return out


def _group_model(n, name):
    """(K x K)/K for K = SU(n), realized block diagonally in GL(2n)."""
    su = _su_basis(n)
    size = 2 * n

    def pair(x, sign):
        m = np.zeros((size, size), dtype=complex)
        m[:n, :n] = x
        m[n:, n:] = sign * x
        return m

    k_basis = [pair(x, +1.0) for x in su]
    p_basis = [pair(x, -1.0) for x in su]  # torus matrices come first in _su_basis
    return MatrixModel(name, k_basis, p_basis, rank=n - 1, family="group", block=n)


_CATALOG = {
    "S2": lambda: SymmetricSpaceDescriptor("S2", _sl_model(2, "S2")),
    "S3": lambda: SymmetricSpaceDescriptor("S3", _sphere_model(3, "S3")),
    "S4": lambda: SymmetricSpaceDescriptor("S4", _sphere_model(4, "S4")),
    "S5": lambda: SymmetricSpaceDescriptor("S5", _sphere_model(5, "S5")),
    "SU(3)/SO(3)": lambda: SymmetricSpaceDescriptor(
        "SU(3)/SO(3)", _sl_model(3, "SU(3)/SO(3)")
    ),
    "group:SU(2)": lambda: SymmetricSpaceDescriptor(
        "group:SU(2)", _group_model(2, "group:SU(2)"), is_group_case=True
    ),
    "group:SU(3)": lambda: SymmetricSpaceDescriptor(
        "group:SU(3)", _group_model(3, "group:SU(3)"), is_group_case=True
    ),
}

_ALIASES = {"SU(2)/SO(2)": "S2"}


def catalog_names():
    return sorted(_CATALOG)


def _canonical(name):
    base = name[: -len("-dual")] if name.endswith("-dual") else name
    return _ALIASES.get(base, base)


@functools.lru_cache(maxsize=None)
def _build(canonical):
    return _CATALOG[canonical]()


def build_space(name: str) -> SymmetricSpaceDescriptor:
    """Descriptor for a catalog name.

    A trailing ``-dual`` is accepted and ignored: the dual space shares the
    Lie data, and duality is expressed downstream by the metric profile.
    """
    canonical = _canonical(name)
    if canonical not in _CATALOG:
        raise ValueError(
            f"unknown symmetric space {name!r}; catalog: {catalog_names()}"
        )
    return _build(canonical)


def restricted_roots(space: SymmetricSpaceDescriptor):
    """Positive restricted roots with multiplicities (computed at build)."""
    return list(space.positive_roots)


def chamber_project(space: SymmetricSpaceDescriptor, r):
    """Weyl-orbit representative of r in the closed chamber."""
    return space.chamber.project(r)
