"""Dense matrix Lie algebra engine.

Everything downstream works with a fixed matrix model of a compact symmetric
pair: explicit complex matrices spanning the isotropy part k and the
transverse part p of the compact algebra g = k (+) p.  The complexified
algebra g^C is the complex span of the same basis, and the three groups in
play (compact G, its complexification G^C, and the noncompact dual G*) are
all realized as matrix groups inside GL(N, C).

The module provides exponentials, brackets, Killing forms, analytic
functions of ad, and the two decompositions (polar in G^C, Cartan in G*)
used by the chart and reduction machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "AlgebraElement",
    "GroupElement",
    "MatrixModel",
    "ad_cosh_sinh",
    "bracket",
    "cartan_decompose_star",
    "exp_matrix",
    "killing_form",
    "polar_decompose",
    "solve_cosh_ad",
]

# Residual bounds used by the membership/validation checks.
SPAN_TOL = 1e-10
GROUP_TOL = 1e-10


class ModelError(RuntimeError):
    """A matrix, element, or decomposition violated a model invariant."""


def _vec(matrices):
    m = np.asarray(matrices)
    return m.reshape(m.shape[0], -1) if m.ndim == 3 else m.reshape(-1)


class MatrixModel:
    """A fixed matrix realization of a compact symmetric pair (g, k).

    Parameters
    ----------
    name : str
        Catalog identifier, echoed in error messages.
    k_basis, p_basis : array_like
        Complex (d, N, N) stacks spanning k and p over the reals.  The
        leading ``rank`` matrices of ``p_basis`` must span the chosen
        maximal abelian subspace; the constructor orthonormalizes both
        stacks for the Killing inner product -B while preserving that flag.
    rank : int
        Dimension of the flagged abelian subspace.
    family : str
        One of ``"sl"``, ``"so"``, ``"group"``; selects the holomorphic
        involution and the reality checks of the three matrix groups.
    block : int, optional
        Block size n for the ``"group"`` family (matrices are 2n x 2n).
    """

    def __init__(self, name, k_basis, p_basis, rank, family, block=None):
        if family not in ("sl", "so", "group"):
            raise ValueError(f"unknown model family {family!r}")
        self.name = name
        self.family = family
        self.block = block
        self.rank = rank
        k_basis = np.asarray(k_basis, dtype=complex)
        p_basis = np.asarray(p_basis, dtype=complex)
        self.dim_k = len(k_basis)
        self.dim_p = len(p_basis)
        self.dim = self.dim_k + self.dim_p
        self.matrix_size = k_basis.shape[-1]
        raw = np.concatenate([k_basis, p_basis])
        self.basis = self._orthonormalize(raw)
        self._init_structure()
        if family == "so":
            s = np.ones(self.matrix_size)
            s[0] = -1.0
            self._s = np.diag(s).astype(complex)

    # -- construction ---------------------------------------------------

    def _orthonormalize(self, raw):
        # Killing Gram of the raw basis, via brute-force ad matrices.
        d = len(raw)
        pinv = np.linalg.pinv(_vec(raw).T)
        ads = np.empty((d, d, d), dtype=complex)
        for i in range(d):
            br = raw[i] @ raw - raw @ raw[i]
            ads[i] = (pinv @ _vec(br).T).T  # rows: image coeffs of raw[j]
            resid = np.abs(_vec(br) - ads[i] @ _vec(raw)).max()
            if resid > 1e-9:
                raise ModelError(f"{self.name}: basis does not close under brackets")
        gram = -np.einsum("ijk,ljm->il", ads, ads.transpose(0, 2, 1)).real
        # gram_il = -tr(ad_i ad_l); recompute plainly to avoid index slips
        gram = np.empty((d, d))
        for i in range(d):
            for l in range(d):
                gram[i, l] = -np.trace(ads[i].T @ ads[l].T).real
        lo = np.linalg.cholesky(gram)
        coeff = np.linalg.inv(lo)  # lower triangular: preserves k/p and a flags
        return np.einsum("ij,jkl->ikl", coeff, raw)

    def _init_structure(self):
        d = self.dim
        self._pinv = np.linalg.pinv(_vec(self.basis).T)
        struct = np.empty((d, d, d))
        for i in range(d):
            br = self.basis[i] @ self.basis - self.basis @ self.basis[i]
            coeff = (self._pinv @ _vec(br).T).T
            if np.abs(coeff.imag).max() > 1e-10:
                raise ModelError(f"{self.name}: complex structure constants")
            struct[i] = coeff.real
            resid = np.abs(_vec(br) - coeff @ _vec(self.basis)).max()
            if resid > 1e-9:
                raise ModelError(f"{self.name}: bracket left the basis span")
        # ad matrix of basis[i]: maps coeff e_j to column of struct[i, j, :]
        self._ad = struct.transpose(0, 2, 1)  # (i, k, j) -> ad_i[k, j]
        self._killing_gram = np.einsum("ikj,ljk->il", self._ad, self._ad)

    # -- elements -------------------------------------------------------

    def element(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        matrix = np.einsum("i,ijk->jk", coeffs, self.basis)
        return AlgebraElement(self, coeffs, matrix)

    def element_from_matrix(self, matrix, tol=SPAN_TOL):
        matrix = np.asarray(matrix, dtype=complex)
        coeffs = self._pinv @ matrix.reshape(-1)
        resid = np.abs(np.einsum("i,ijk->jk", coeffs, self.basis) - matrix).max()
        if resid > tol:
            raise ModelError(
                f"{self.name}: matrix outside the g^C span (residual {resid:.2e})"
            )
        return AlgebraElement(self, coeffs, matrix)

    def zero(self):
        return self.element(np.zeros(self.dim))

    def k_indices(self):
        return np.arange(self.dim_k)

    def p_indices(self):
        return np.arange(self.dim_k, self.dim)

    def a_indices(self):
        return np.arange(self.dim_k, self.dim_k + self.rank)

    def random_element(self, rng, part="g", scale=1.0, imag=False):
        """Random element supported on k, p, a, or all of g."""
        coeffs = np.zeros(self.dim, dtype=complex)
        idx = {"g": np.arange(self.dim), "k": self.k_indices(),
               "p": self.p_indices(), "a": self.a_indices()}[part]
        vals = rng.standard_normal(len(idx)) * scale
        if imag:
            vals = vals + 1j * rng.standard_normal(len(idx)) * scale
        coeffs[idx] = vals
        return self.element(coeffs)

    def p_vector_element(self, v):
        """Element of p with the given coordinates in the orthonormal p basis."""
        coeffs = np.zeros(self.dim, dtype=complex)
        coeffs[self.p_indices()] = np.asarray(v, dtype=complex)
        return self.element(coeffs)

    def a_point_matrix(self, r):
        """Matrix of the abelian element with chamber coordinates r."""
        coeffs = np.zeros(self.dim)
        coeffs[self.a_indices()] = np.asarray(r, dtype=float)
        return np.einsum("i,ijk->jk", coeffs, self.basis)

    # -- ad machinery ---------------------------------------------------

    def ad_matrix(self, coeffs):
        """d x d matrix of ad(X) on coefficient vectors."""
        return np.einsum("i,ikj->kj", np.asarray(coeffs, dtype=complex), self._ad)

    def herm_ad_eig(self, p_coeffs):
        """Eigendecomposition of ad(-ip) for p in p.

        In the orthonormal basis ad(p) is real antisymmetric, so
        A = -i ad(p) is Hermitian; returns (eigenvalues, eigenvectors).
        """
        m = self.ad_matrix(p_coeffs)
        if np.abs(m.imag).max() > 1e-12 or np.abs(m + m.T).max() > 1e-9:
            raise ModelError(f"{self.name}: ad(p) is not real antisymmetric")
        return np.linalg.eigh(-1j * m.real)

    # -- group-side structure --------------------------------------------

    def theta_group(self, matrix):
        """Holomorphic involution of G^C whose fixed group is K^C."""
        if self.family == "sl":
            return np.linalg.inv(matrix).T
        if self.family == "so":
            return self._s @ matrix @ self._s
        n = self.block
        out = np.zeros_like(matrix)
        out[:n, :n] = matrix[n:, n:]
        out[n:, n:] = matrix[:n, :n]
        return out

    def group_residual(self, matrix, group_tag):
        """Residual of the defining relations for the claimed group."""
        eye = np.eye(self.matrix_size)
        res = 0.0
        if self.family in ("sl", "so"):
            res = max(res, abs(np.linalg.det(matrix) - 1.0))
        else:
            n = self.block
            res = max(res, abs(np.linalg.det(matrix[:n, :n]) - 1.0))
            res = max(res, abs(np.linalg.det(matrix[n:, n:]) - 1.0))
            res = max(res, np.abs(matrix[:n, n:]).max(), np.abs(matrix[n:, :n]).max())
        if self.family == "so":
            res = max(res, np.abs(matrix.T @ matrix - eye).max())
        if group_tag == "G":
            res = max(res, np.abs(matrix.conj().T @ matrix - eye).max())
            if self.family == "so":
                res = max(res, np.abs(matrix.imag).max())
        elif group_tag == "K":
            res = max(res, np.abs(matrix.conj().T @ matrix - eye).max())
            res = max(res, np.abs(self.theta_group(matrix) - matrix).max())
        elif group_tag == "Gstar":
            star = self.theta_group(np.linalg.inv(matrix.conj().T))
            res = max(res, np.abs(star - matrix).max())
        elif group_tag != "GC":
            raise ValueError(f"unknown group tag {group_tag!r}")
        return res

    def group_element(self, matrix, group_tag, tol=GROUP_TOL):
        matrix = np.asarray(matrix, dtype=complex)
        res = self.group_residual(matrix, group_tag)
        if res > tol:
            raise ModelError(
                f"{self.name}: matrix fails {group_tag} relations (residual {res:.2e})"
            )
        return GroupElement(self, matrix, group_tag)

    def __repr__(self):
        return (f"MatrixModel({self.name!r}, dim_k={self.dim_k}, "
                f"dim_p={self.dim_p}, rank={self.rank})")


@dataclass(frozen=True)
class AlgebraElement:
    """Element of g^C: complex coefficients over the orthonormal basis of g.

    The real and imaginary parts of ``coeffs`` are the coordinates over the
    doubled real basis (B_j, i B_j); ``matrix`` is the realization sum(c_j B_j).
    """

    model: MatrixModel
    coeffs: np.ndarray
    matrix: np.ndarray = field(repr=False)

    def k_part(self):
        c = self.coeffs.copy()
        c[self.model.p_indices()] = 0.0
        return self.model.element(c)

    def p_part(self):
        c = self.coeffs.copy()
        c[self.model.k_indices()] = 0.0
        return self.model.element(c)

    def norm(self):
        """Hermitian Killing norm (coefficient 2-norm in the orthonormal basis)."""
        return float(np.linalg.norm(self.coeffs))

    def is_real(self, tol=SPAN_TOL):
        return np.abs(self.coeffs.imag).max(initial=0.0) <= tol

    def scaled(self, c):
        return self.model.element(c * self.coeffs)

    def __add__(self, other):
        return self.model.element(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.model.element(self.coeffs - other.coeffs)

    def validate(self, tol=1e-12):
        rebuilt = np.einsum("i,ijk->jk", self.coeffs, self.model.basis)
        resid = np.abs(rebuilt - self.matrix).max()
        if resid > tol:
            raise ModelError(f"coeffs/matrix mismatch (residual {resid:.2e})")
        parts = self.k_part().coeffs + self.p_part().coeffs
        if np.abs(parts - self.coeffs).max() != 0.0:
            raise ModelError("k/p projections do not sum back exactly")


@dataclass(frozen=True)
class GroupElement:
    """Matrix group element with a membership claim (G, K, G*, or G^C)."""

    model: MatrixModel
    matrix: np.ndarray = field(repr=False)
    group_tag: str

    def validate(self, tol=GROUP_TOL):
        res = self.model.group_residual(self.matrix, self.group_tag)
        if res > tol:
            raise ModelError(
                f"{self.group_tag} relations violated (residual {res:.2e})"
            )
        return res


# -- operations ----------------------------------------------------------


def exp_matrix(x: AlgebraElement, scale: float = 1.0) -> GroupElement:
    """Matrix exponential exp(scale * x), tagged by where the argument lives.

    Arguments in g map into the compact group G, arguments in k (+) ip into
    the noncompact dual G*, anything else into G^C.  Uses scaling-and-
    squaring (scipy's Pade implementation).
    """
    model = x.model
    c = scale * x.coeffs
    mat = scipy.linalg.expm(scale * x.matrix)
    if np.abs(c.imag).max(initial=0.0) <= 1e-13:
        tag = "G"
    elif (np.abs(c.imag[model.k_indices()]).max(initial=0.0) <= 1e-13
          and np.abs(c.real[model.p_indices()]).max(initial=0.0) <= 1e-13):
        tag = "Gstar"
    else:
        tag = "GC"
    return model.group_element(mat, tag)


def bracket(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """Commutator xy - yx, recovered as a basis coefficient vector."""
    if x.model is not y.model:
        raise ValueError("bracket arguments live in different models")
    return x.model.element_from_matrix(x.matrix @ y.matrix - y.matrix @ x.matrix)


def killing_form(x: AlgebraElement, y: AlgebraElement) -> float:
    """Killing form trace(ad x . ad y), complex bilinear over g^C."""
    if x.model is not y.model:
        raise ValueError("killing_form arguments live in different models")
    val = x.coeffs @ x.model._killing_gram @ y.coeffs
    return val.real if abs(val.imag) < 1e-12 * (1 + abs(val)) else val


def ad_cosh_sinh(p: AlgebraElement, u: AlgebraElement, tol=SPAN_TOL):
    """cosh(ad(-ip)) u and sinh(ad(-ip)) u by eigendecomposition of ad(-ip).

    For p in p and u in p^C the first component stays in p^C, the second
    lands in k^C, and their sum is Ad(exp(-ip)) u.
    """
    model = p.model
    if not p.is_real() or np.abs(p.coeffs[model.k_indices()]).max(initial=0.0) > tol:
        raise ModelError("ad_cosh_sinh expects p in the real part p of g")
    w, v = model.herm_ad_eig(p.coeffs.real)
    y = v.conj().T @ u.coeffs
    cosh_c = v @ (np.cosh(w) * y)
    sinh_c = v @ (np.sinh(w) * y)
    resid = max(np.abs(cosh_c[model.k_indices()]).max(initial=0.0),
                np.abs(sinh_c[model.p_indices()]).max(initial=0.0))
    if resid > tol:
        raise ModelError(f"subspace membership violated (residual {resid:.2e})")
    cosh_c[model.k_indices()] = 0.0
    sinh_c[model.p_indices()] = 0.0
    return model.element(cosh_c), model.element(sinh_c)


def solve_cosh_ad(p: AlgebraElement, c: AlgebraElement) -> AlgebraElement:
    """The unique q in k with cosh(ad(ip)) q = c.

    cosh(ad(ip)) restricted to k is symmetric positive definite (its
    eigenvalues are cosh of real numbers), so the linear solve is safe.
    """
    model = p.model
    w, v = model.herm_ad_eig(p.coeffs.real)
    # cosh(ad(ip)) = cosh(-A) = cosh(A) with A = -i ad(p)
    full = (v * np.cosh(w)) @ v.conj().T
    kidx = model.k_indices()
    block = full[np.ix_(kidx, kidx)]
    if np.abs(block.imag).max() > 1e-9:
        raise ModelError("cosh(ad(ip)) did not restrict to a real operator on k")
    block = 0.5 * (block.real + block.real.T)
    try:
        lo = scipy.linalg.cholesky(block, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise ModelError("cosh(ad(ip)) lost positive definiteness on k") from exc
    rhs = c.coeffs[kidx]
    sol = scipy.linalg.cho_solve((lo, True), rhs)
    coeffs = np.zeros(model.dim, dtype=complex)
    coeffs[kidx] = sol
    return model.element(coeffs)


def _hermitian_log(h):
    w, v = np.linalg.eigh(h)
    if w.min() <= 0.0:
        raise ModelError("matrix log of a non positive definite factor")
    return (v * np.log(w)) @ v.conj().T


def polar_decompose(x: GroupElement, tol=1e-12, max_iter=100):
    """Unique factorization x = g exp(iy) with g in G and y in g.

    Newton iteration on the unitary factor; the positive factor's Hermitian
    logarithm is projected back onto the basis.  Raises on non-convergence,
    reporting the last residual.
    """
    model = x.model
    u = np.asarray(x.matrix, dtype=complex)
    eye = np.eye(model.matrix_size)
    resid = np.inf
    for _ in range(max_iter):
        resid = np.abs(u.conj().T @ u - eye).max()
        if resid < tol:
            break
        u = 0.5 * (u + np.linalg.inv(u).conj().T)
    else:
        raise ModelError(f"polar iteration did not converge (residual {resid:.2e})")
    pos = u.conj().T @ x.matrix
    pos = 0.5 * (pos + pos.conj().T)
    y_mat = -1j * _hermitian_log(pos)
    y = model.element_from_matrix(y_mat)
    if not y.is_real(1e-9):
        raise ModelError("polar logarithm left the real form g")
    y = model.element(y.coeffs.real + 0.0j)
    g = model.group_element(u, "G")
    recon = np.abs(g.matrix @ scipy.linalg.expm(1j * y.matrix) - x.matrix).max()
    if recon > 1e-10 * max(1.0, np.abs(x.matrix).max()):
        raise ModelError(f"polar reconstruction residual {recon:.2e}")
    return g, y


def cartan_decompose_star(x: GroupElement):
    """Global Cartan factorization x = k exp(iz) in G*, with z in p.

    z is the unique p-logarithm of the positive factor (x* x)^(1/2).
    """
    model = x.model
    h = x.matrix.conj().T @ x.matrix
    h = 0.5 * (h + h.conj().T)
    z_mat = -0.5j * _hermitian_log(h)
    z = model.element_from_matrix(z_mat)
    bad = max(np.abs(z.coeffs.imag).max(initial=0.0),
              np.abs(z.coeffs[model.k_indices()]).max(initial=0.0))
    if bad > 1e-9:
        raise ModelError(f"Cartan logarithm left p (residual {bad:.2e})")
    z = model.element(np.where(np.arange(model.dim) >= model.dim_k,
                               z.coeffs.real, 0.0) + 0.0j)
    k_mat = x.matrix @ scipy.linalg.expm(-1j * z.matrix)
    k = model.group_element(k_mat, "K")
    recon = np.abs(k_mat @ scipy.linalg.expm(1j * z.matrix) - x.matrix).max()
    if recon > 1e-10 * max(1.0, np.abs(x.matrix).max()):
        raise ModelError(f"Cartan reconstruction residual {recon:.2e}")
    return k, z
