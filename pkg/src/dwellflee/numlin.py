"""Dense linear-algebra kernels.

Eigendecomposition with Jordan chains, matrix exponentials, spectral and
ellipsoidal operator norms, spectral radius and positive-definiteness tests.
Everything here works on small dense matrices (n up to a few dozen).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import IllConditionedBasis, NonConvergence

CLUSTER_TOL = 1e-8
COND_LIMIT = 1e12
EXPM_EIGEN_COND = 1e8


@dataclass(frozen=True)
class NormSpec:
    """Vector norm used to induce operator norms.

    Attributes
    ----------
    kind : {"spectral", "ellipsoidal"}
        Euclidean norm or the weighted norm ``sqrt(x^T W x)``.
    weight : ndarray, optional
        Symmetric positive definite weight ``W``; present iff ``kind`` is
        ``"ellipsoidal"``.
    """

    kind: str = "spectral"
    weight: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("spectral", "ellipsoidal"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "spectral":
            if self.weight is not None:
                raise ValueError("spectral norm takes no weight")
            return
        if self.weight is None:
            raise ValueError("ellipsoidal norm needs a weight matrix")
        W = np.array(self.weight, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight must be square")
        if not np.allclose(W, W.T, rtol=0, atol=1e-10 * max(1.0, np.abs(W).max())):
            raise ValueError("weight must be symmetric")
        W = 0.5 * (W + W.T)
        if not is_positive_definite(W, 0.0):
            raise ValueError("weight must be positive definite")
        object.__setattr__(self, "weight", W)

    def __eq__(self, other):
        if not isinstance(other, NormSpec) or other.kind != self.kind:
            return False
        if self.weight is None:
            return other.weight is None
        return other.weight is not None and np.array_equal(self.weight, other.weight)

    def __hash__(self):
        return hash(self.kind)

    @property
    def is_diagonal(self) -> bool:
        if self.weight is None:
            return True
        return np.count_nonzero(self.weight - np.diag(np.diag(self.weight))) == 0


SPECTRAL = NormSpec()


@dataclass(frozen=True)
class EigenStructure:
    """Jordan data of a square matrix ``A = P J P^{-1}``.

    Attributes
    ----------
    eigenvalues : ndarray
        One entry per column of ``basis`` (so repeated with multiplicity).
    basis : ndarray
        Complex Jordan basis ``P`` whose columns are (generalized)
        eigenvectors, grouped into chains.
    block_sizes : tuple of int
        Jordan block sizes in column order.
    defective : bool
        True when some block has size greater than one.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    block_sizes: tuple
    defective: bool

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def jordan(self) -> np.ndarray:
        """The Jordan form ``J`` assembled from eigenvalues and block sizes."""
        J = np.diag(self.eigenvalues.astype(complex))
        start = 0
        for size in self.block_sizes:
            for k in range(start, start + size - 1):
                J[k, k + 1] = 1.0
            start += size
        return J

    @property
    def basis_inv(self) -> np.ndarray:
        return np.linalg.inv(self.basis)

    def blocks(self):
        """Yield ``(eigenvalue, start, size)`` for each Jordan block."""
        start = 0
        for size in self.block_sizes:
            yield self.eigenvalues[start], start, size
            start += size

    def scaled(self, factor: float) -> "EigenStructure":
        """Same structure with the basis multiplied by a positive scalar."""
        return EigenStructure(self.eigenvalues, self.basis * factor,
                              self.block_sizes, self.defective)

    def reconstruct(self) -> np.ndarray:
        return self.basis @ self.jordan @ self.basis_inv


def _as_square(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {A.shape}")
    return A


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its largest-magnitude entry is real positive.

    Near-ties are resolved toward the lowest index so the choice is stable
    under rounding.
    """
    mags = np.abs(v)
    top = mags.max()
    if top == 0:
        return v
    k = int(np.flatnonzero(mags >= top * (1 - 1e-9))[0])
    return v * (abs(v[k]) / v[k])


def _cluster(values: np.ndarray, tol: float):
    """Group eigenvalues closer than ``tol`` (single linkage), sorted."""
    order = sorted(range(len(values)), key=lambda i: (values[i].real, values[i].imag))
    groups: list[list[int]] = []
    for i in order:
        for g in groups:
            if any(abs(values[i] - values[j]) <= tol for j in g):
                g.append(i)
                break
        else:
            groups.append([i])
    # merge chains of overlapping groups created by the greedy pass
    merged = True
    while merged:
        merged = False
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                if any(abs(values[i] - values[j]) <= tol
                       for i in groups[a] for j in groups[b]):
                    groups[a].extend(groups.pop(b))
                    merged = True
                    break
            if merged:
                break
    centers = [np.mean(values[g]) for g in groups]
    idx = sorted(range(len(groups)), key=lambda k: (centers[k].real, centers[k].imag))
    return [(centers[k], len(groups[k])) for k in idx]


def _null_space(M: np.ndarray, tol: float) -> np.ndarray:
    _, s, vh = np.linalg.svd(M)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


def _cluster_chains(A: np.ndarray, lam: complex, mult: int, scale: float):
    """Jordan chains for one eigenvalue cluster.

    Returns a list of chains, each a list of column vectors
    ``[N^{s-1} v, ..., N v, v]`` with ``N = A - lam I``.
    """
    n = A.shape[0]
    N = A - lam * np.eye(n)
    tol = math.sqrt(CLUSTER_TOL) * scale * n
    null_dims = [0]
    power = np.eye(n, dtype=complex)
    kernels = [np.zeros((n, 0), dtype=complex)]
    while null_dims[-1] < mult and len(null_dims) <= mult:
        power = power @ N
        K = _null_space(power, tol)
        null_dims.append(min(K.shape[1], mult))
        kernels.append(K[:, :mult] if K.shape[1] > mult else K)
        if null_dims[-1] == null_dims[-2]:
            break
    if null_dims[-1] != mult:
        raise NonConvergence(
            f"could not resolve Jordan structure of eigenvalue {lam:.6g}"
        )
    # blocks of size >= k: null_dims[k] - null_dims[k-1]
    at_least = [null_dims[k] - null_dims[k - 1] for k in range(1, len(null_dims))]
    if len(kernels) == 2:
        # nondefective cluster: an orthonormal eigenbasis
        return [[kernels[1][:, j]] for j in range(mult)]
    chains: list[list[np.ndarray]] = []
    chosen = np.zeros((n, 0), dtype=complex)
    depth = len(at_least)
    for size in range(depth, 0, -1):
        exact = at_least[size - 1] - (at_least[size] if size < depth else 0)
        if exact <= 0:
            continue
        span = np.hstack([kernels[size - 1], chosen])
        candidates = kernels[size]
        if span.shape[1]:
            q, _ = np.linalg.qr(span)
            q = q[:, : np.linalg.matrix_rank(span, tol=1e-9)]
            residual = candidates - q @ (q.conj().T @ candidates)
        else:
            residual = candidates
        u, s, _ = np.linalg.svd(residual, full_matrices=False)
        for j in range(exact):
            v = u[:, j]
            chain = [v]
            for _ in range(size - 1):
                chain.insert(0, N @ chain[0])
            chains.append(chain)
            chosen = np.hstack([chosen, np.column_stack(chain)])
    return chains


def eigendecompose(A) -> EigenStructure:
    """Complex Jordan decomposition with unit-norm columns.

    Parameters
    ----------
    A : array_like
        Square real (or complex) matrix.

    Returns
    -------
    EigenStructure
        Eigenvalues sorted by real part, then imaginary part.  For
        diagonalizable input every block has size one and each column has
        unit Euclidean norm, with its largest-magnitude entry real positive.
        Eigenvalues closer than ``1e-8 * ||A||`` are treated as one cluster;
        a deficient eigenspace yields Jordan chains and ``defective=True``.

    Raises
    ------
    NonConvergence
        If LAPACK fails or the Jordan structure cannot be resolved.
    IllConditionedBasis
        If the basis condition number exceeds ``1e12``.
    """
    A = _as_square(A)
    n = A.shape[0]
    scale = max(np.linalg.norm(A, 2), 1e-300)
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise NonConvergence("eigenvalues are not finite")

    clusters = _cluster(w, CLUSTER_TOL * scale)
    if all(m == 1 for _, m in clusters):
        order = sorted(range(n), key=lambda i: (w[i].real, w[i].imag))
        cols = [_fix_phase(V[:, i] / np.linalg.norm(V[:, i])) for i in order]
        eigs = w[order]
        sizes = (1,) * n
    else:
        cols, eigs_list, sizes_list = [], [], []
        for lam, mult in clusters:
            if mult == 1:
                i = int(np.argmin(np.abs(w - lam)))
                v = V[:, i] / np.linalg.norm(V[:, i])
                cols.append(_fix_phase(v))
                eigs_list.append(w[i])
                sizes_list.append(1)
                continue
            if abs(lam.imag) <= CLUSTER_TOL * scale:
                lam = complex(lam.real, 0.0)
            for chain in _cluster_chains(A.astype(complex), lam, mult, scale):
                # scaling v scales the whole chain, so J keeps unit superdiagonal
                lead = chain[0] / np.linalg.norm(chain[0])
                k = int(np.argmax(np.abs(_fix_phase(lead))))
                alpha = _fix_phase(lead)[k] / lead[k] / np.linalg.norm(chain[0])
                cols.extend(c * alpha for c in chain)
                eigs_list.extend([lam] * len(chain))
                sizes_list.append(len(chain))
        eigs = np.array(eigs_list, dtype=complex)
        sizes = tuple(sizes_list)
    P = np.column_stack(cols).astype(complex)
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedBasis(f"basis condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    result = EigenStructure(np.asarray(eigs, dtype=complex), P, tuple(sizes),
                            any(s > 1 for s in sizes))
    residual = np.linalg.norm(A - result.reconstruct(), 2)
    if residual > 1e-9 * scale:
        raise IllConditionedBasis(
            f"Jordan data reconstructs with residual {residual:.3g}; "
            "eigenvalues are too close to separate reliably"
        )
    return result


def structure_from_basis(A, P, tol: float = 1e-8) -> EigenStructure:
    """Validate a user-supplied Jordan basis and read off ``J``.

    ``P^{-1} A P`` must be upper bidiagonal with unit (or zero) superdiagonal
    entries joining equal eigenvalues.

    Raises
    ------
    ValueError
        If ``P`` does not bring ``A`` to Jordan form.
    IllConditionedBasis
        If ``P`` is numerically singular.
    """
    A = _as_square(A)
    P = np.asarray(P, dtype=complex)
    if P.shape != A.shape:
        raise ValueError("basis shape differs from matrix shape")
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedBasis(f"basis condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    J = np.linalg.solve(P, A @ P)
    n = A.shape[0]
    scale = max(np.linalg.norm(A, 2), 1.0)
    off = J.copy()
    np.fill_diagonal(off, 0)
    for k in range(n - 1):
        off[k, k + 1] = 0
    if np.abs(off).max(initial=0.0) > tol * scale:
        raise ValueError("basis does not bring the matrix to Jordan form")
    sizes, size = [], 1
    for k in range(n - 1):
        sup = J[k, k + 1]
        if abs(sup) <= tol * scale:
            sizes.append(size)
            size = 1
        elif abs(sup - 1) <= tol * scale and abs(J[k, k] - J[k + 1, k + 1]) <= tol * scale:
            size += 1
        else:
            raise ValueError("superdiagonal entry is neither 0 nor 1")
    sizes.append(size)
    eigs = np.diag(J).copy()
    return EigenStructure(eigs, P, tuple(sizes), any(s > 1 for s in sizes))


def jordan_exp(structure: EigenStructure, t: float) -> np.ndarray:
    """``exp(J t)`` for the Jordan form of ``structure``."""
    n = structure.n
    E = np.zeros((n, n), dtype=complex)
    for lam, start, size in structure.blocks():
        base = np.exp(lam * t)
        for j in range(size):
            coeff = base * t ** j / math.factorial(j)
            for k in range(size - j):
                E[start + k, start + k + j] = coeff
    return E


def matrix_exp(A, t: float = 1.0, structure: Optional[EigenStructure] = None) -> np.ndarray:
    """Matrix exponential ``exp(A t)``.

    The eigen path ``P exp(J t) P^{-1}`` is used when the Jordan basis has
    condition number at most ``1e8``; otherwise, or if the decomposition
    fails on conditioning, scipy's scaling-and-squaring Pade routine.

    Parameters
    ----------
    A : array_like
        Square matrix.
    t : float
        Time; negative values are allowed.
    structure : EigenStructure, optional
        Precomputed Jordan data for ``A`` to skip the decomposition.
    """
    A = _as_square(A)
    if structure is None:
        try:
            structure = eigendecompose(A)
        except IllConditionedBasis:
            structure = None
    if structure is None or np.linalg.cond(structure.basis) > EXPM_EIGEN_COND:
        return sla.expm(A * t)
    P = structure.basis
    E = P @ jordan_exp(structure, t) @ np.linalg.inv(P)
    if np.isrealobj(A):
        return E.real
    return E


def _weight_factor(norm: NormSpec) -> Optional[np.ndarray]:
    if norm.kind == "spectral":
        return None
    return np.linalg.cholesky(norm.weight)


def operator_norm(K, norm: NormSpec = SPECTRAL) -> float:
    """Operator norm induced by ``norm``.

    For the ellipsoidal norm with weight ``W = L L^T`` the induced norm is
    ``sqrt(lambda_max(W^{-1} K^H W K)) = ||L^T K L^{-T}||_2``; the second
    form is used since it avoids the nonsymmetric eigenproblem.
    """
    K = np.asarray(K)
    L = _weight_factor(norm)
    if L is not None:
        K = L.T @ K @ np.linalg.inv(L.T)
    return float(np.linalg.norm(K, 2))


def norm_gradient(left: np.ndarray, M: np.ndarray, right: np.ndarray,
                  norm: NormSpec = SPECTRAL):
    """Value and real gradient of ``M -> ||left M right||`` in ``norm``.

    Returns
    -------
    value : float
    grad : ndarray
        Gradient with respect to the real matrix ``M`` (a subgradient where
        the top singular value is repeated).
    """
    L = _weight_factor(norm)
    if L is not None:
        left = L.T @ left
        right = right @ np.linalg.inv(L.T)
    K = left @ M @ right
    u, s, vh = np.linalg.svd(K)
    grad = np.real(left.conj().T @ np.outer(u[:, 0], vh[0]) @ right.conj().T)
    return float(s[0]), grad


def spectral_radius(K) -> float:
    """Largest eigenvalue modulus."""
    K = _as_square(K)
    try:
        return float(np.max(np.abs(np.linalg.eigvals(K))))
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc


def sym(X) -> np.ndarray:
    X = np.asarray(X)
    return 0.5 * (X + X.T)


def is_positive_definite(Q, margin: float = 0.0) -> bool:
    """True iff the smallest eigenvalue of ``sym(Q)`` exceeds ``margin``."""
    Q = sym(_as_square(np.asarray(Q, dtype=float)))
    return bool(np.linalg.eigvalsh(Q)[0] > margin)


def condition_number(P) -> float:
    return float(np.linalg.cond(np.asarray(P)))

