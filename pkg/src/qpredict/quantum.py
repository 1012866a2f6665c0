"""Kraus-operator models of stochastic processes.

Two representations are used throughout:

* ``ParamSet`` -- unconstrained complex matrices ``B_x``. Any such set defines
  a valid model; the likelihood of a word is computable straight from ``B``.
* ``KrausModel`` -- the recovered complete set ``A_x = W B_x W^-1 / sqrt(lam)``
  with its stationary memory state and anchor vector for encoding pasts.

Superoperators act on row-major vectorized matrices, so the map
``X -> B X B^dag`` is the matrix ``kron(B, conj(B))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError, ValidationError, ZeroProbabilityError

DEGENERACY_TOL = 1e-8
POWER_TOL = 1e-13
POWER_MAX_ITER = 100_000
DENSE_DIM_LIMIT = 8
BLOCK_LENGTH = 8


@dataclass(frozen=True)
class ParamSet:
    matrices: np.ndarray  # (alphabet, dim, dim) complex

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=complex)
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            raise ValidationError(f"expected (alphabet, d, d) matrices, got shape {m.shape}")
        if not np.any(m):
            raise ValidationError("all parameter matrices are zero")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def alphabet_size(self) -> int:
        return self.matrices.shape[0]

    def to_real_vector(self) -> np.ndarray:
        return np.concatenate([self.matrices.real.ravel(), self.matrices.imag.ravel()])

    @classmethod
    def from_real_vector(cls, theta: np.ndarray, alphabet_size: int, dim: int) -> "ParamSet":
        return cls(real_vector_to_matrices(theta, alphabet_size, dim))


def real_vector_to_matrices(theta: np.ndarray, alphabet_size: int, dim: int) -> np.ndarray:
    """Inverse of :meth:`ParamSet.to_real_vector`; also works on stacked rows."""
    theta = np.asarray(theta, dtype=float)
    half = alphabet_size * dim * dim
    shape = theta.shape[:-1] + (alphabet_size, dim, dim)
    return (theta[..., :half] + 1j * theta[..., half:]).reshape(shape)


@dataclass(frozen=True)
class SpectralData:
    lam: float
    V: np.ndarray
    W: np.ndarray
    rho_tilde: np.ndarray


@dataclass(frozen=True)
class KrausModel:
    kraus: np.ndarray  # (alphabet, dim, dim)
    rho0: np.ndarray
    sigma0: np.ndarray
    anchor: int = 0

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def alphabet_size(self) -> int:
        return self.kraus.shape[0]

    def completeness_error(self) -> float:
        return completeness_error(self.kraus)

    @classmethod
    def from_kraus(cls, kraus, anchor: int = 0, tol: float = 1e-10) -> "KrausModel":
        """Wrap a Kraus set, checking completeness to ``tol``.

        Rounded published matrices need a loose ``tol`` (e.g. 5e-3); the
        stationary state is then the leading fixed point of the slightly
        non-trace-preserving channel, normalized to unit trace.
        """
        kraus = np.array(kraus, dtype=complex)
        if kraus.ndim != 3 or kraus.shape[1] != kraus.shape[2]:
            raise ValidationError(f"expected (alphabet, d, d) Kraus matrices, got {kraus.shape}")
        err = completeness_error(kraus)
        if err > tol:
            raise ValidationError(f"completeness violated: max deviation {err:.3g} > {tol:g}")
        _, rho0 = _leading_pair(kraus, "forward")
        return cls(kraus, rho0, anchor_vector(kraus, rho0, anchor), anchor)


def completeness_error(kraus: np.ndarray) -> float:
    total = np.einsum("xki,xkj->ij", kraus.conj(), kraus)
    return float(np.abs(total - np.eye(kraus.shape[1])).max())


# -- superoperators and leading eigenpairs -----------------------------------


def superoperator(matrices: np.ndarray, side: str = "forward") -> np.ndarray:
    """Matrix of ``X -> sum_x B X B^dag`` (forward) or ``sum_x B^dag X B`` (adjoint)."""
    m = np.asarray(matrices, dtype=complex)
    d = m.shape[-1]
    S = np.einsum("...xij,...xkl->...ikjl", m, m.conj()).reshape(m.shape[:-3] + (d * d, d * d))
    if side == "forward":
        return S
    if side == "adjoint":
        return np.swapaxes(S, -1, -2).conj()
    raise ValueError(f"side must be 'forward' or 'adjoint', not {side!r}")


def _apply_map(matrices: np.ndarray, X: np.ndarray, side: str) -> np.ndarray:
    if side == "forward":
        return np.einsum("xij,jk,xlk->il", matrices, X, matrices.conj())
    return np.einsum("xji,jk,xkl->il", matrices.conj(), X, matrices)


def _hermitian_unit_trace(M: np.ndarray) -> np.ndarray:
    """Strip the arbitrary eigenvector phase, symmetrize, scale to trace 1."""
    t = np.trace(M, axis1=-2, axis2=-1)
    M = M * (np.abs(t) / t)[..., None, None]
    M = 0.5 * (M + np.swapaxes(M, -1, -2).conj())
    return M / np.trace(M, axis1=-2, axis2=-1).real[..., None, None]


def _power_iteration(matrices: np.ndarray, side: str, max_iter: int = POWER_MAX_ITER):
    d = matrices.shape[-1]
    X = np.eye(d, dtype=complex) / d
    lam = 0.0
    for _ in range(max_iter):
        Y = _apply_map(matrices, X, side)
        lam = np.trace(Y).real
        if lam <= 0.0:
            raise NumericalError("map annihilates the iterate; spectral radius is zero")
        Y = 0.5 * (Y + Y.conj().T) / lam
        if np.linalg.norm(Y - X) <= POWER_TOL * np.linalg.norm(Y):
            return float(lam), Y
        X = Y
    raise NumericalError(f"power iteration did not converge in {max_iter} iterations")


def _leading_pair(matrices: np.ndarray, side: str, method: str = "auto"):
    d = matrices.shape[-1]
    if method == "power" or (method == "auto" and d > DENSE_DIM_LIMIT):
        return _power_iteration(matrices, side)
    if method not in ("auto", "dense"):
        raise ValueError(f"unknown method {method!r}")
    w, vecs = np.linalg.eig(superoperator(matrices, side))
    i = int(np.argmax(w.real))
    lam = w[i].real
    if lam <= 0.0:
        raise NumericalError("spectral radius of the map is zero")
    if np.count_nonzero(np.abs(w - w[i]) < DEGENERACY_TOL * lam) > 1:
        # degenerate top eigenvalue: take the component of the identity in the
        # leading eigenspace, which power iteration from I/d converges to
        return _power_iteration(matrices, side)
    return float(lam), _hermitian_unit_trace(vecs[:, i].reshape(d, d))


def leading_eigenpair(params: ParamSet, side: str = "forward", method: str = "auto"):
    """Leading eigenvalue and unit-trace Hermitian PSD eigenmatrix of the map.

    ``method`` is ``"dense"`` (eigendecomposition of the d^2 x d^2
    superoperator), ``"power"`` (power iteration with Hermitian projection),
    or ``"auto"`` (dense up to d = 8).
    """
    if side not in ("forward", "adjoint"):
        raise ValueError(f"side must be 'forward' or 'adjoint', not {side!r}")
    return _leading_pair(params.matrices, side, method)


def _spectral_batch(mats: np.ndarray, warm_start: bool = False):
    """Vectorized leading data for a stack of parameter sets.

    Returns ``lam`` (n,), ``rho`` and ``V`` (n, d, d), each eigenmatrix at unit
    trace. Degenerate members fall back to the single-set path.

    With ``warm_start`` the stack is taken to be small perturbations of
    ``mats[0]`` (a finite-difference stencil): only member 0 gets a full
    eigendecomposition, the rest are refined from its eigenvectors by shifted
    inverse iteration. Members whose residual check fails are redone densely.
    """
    n, _, d, _ = mats.shape
    S = superoperator(mats, "forward")
    S_adj = np.swapaxes(S, -1, -2).conj()
    if warm_start and n > 1:
        lam0, r0, l0 = _dense_top(S[:1], S_adj[:1])
        lam, r, l, ok = _inverse_iteration(S[1:], S_adj[1:], lam0[0], r0[0], l0[0])
        lam = np.concatenate([lam0, lam])
        r = np.concatenate([r0, r])
        l = np.concatenate([l0, l])
        redo = np.flatnonzero(~ok) + 1
        if redo.size:
            lam[redo], r[redo], l[redo] = _dense_top(S[redo], S_adj[redo])
        check = np.array([0])
    else:
        lam, r, l = _dense_top(S, S_adj)
        check = np.arange(n)
    rho = _hermitian_unit_trace(r.reshape(n, d, d))
    V = _hermitian_unit_trace(l.reshape(n, d, d))
    w_all = np.linalg.eigvals(S[check])
    close = np.abs(w_all - lam[check, None]) < DEGENERACY_TOL * np.abs(lam[check, None])
    for k in check[(close.sum(axis=1) > 1) | (lam[check] <= 0)]:
        lam[k], rho[k] = _leading_pair(mats[k], "forward")
        _, V[k] = _leading_pair(mats[k], "adjoint")
    return lam, rho, V


def _dense_top(S: np.ndarray, S_adj: np.ndarray):
    """Largest-real-part eigenvalue with right eigenvectors of S and of S^dag."""
    n = S.shape[0]
    rows = np.arange(n)
    w, vecs = np.linalg.eig(S)
    i = np.argmax(w.real, axis=-1)
    w_adj, vecs_adj = np.linalg.eig(S_adj)
    j = np.argmax(w_adj.real, axis=-1)
    return w[rows, i].real.copy(), vecs[rows, :, i], vecs_adj[rows, :, j]


def _inverse_iteration(S, S_adj, shift, r0, l0, steps: int = 3):
    n, D, _ = S.shape
    eye = np.eye(D)
    r = np.broadcast_to(r0, (n, D))[..., None]
    l = np.broadcast_to(l0, (n, D))[..., None]
    with np.errstate(all="ignore"):
        for _ in range(steps):
            r = np.linalg.solve(S - shift * eye, r)
            r = r / np.linalg.norm(r, axis=1, keepdims=True)
            l = np.linalg.solve(S_adj - shift * eye, l)
            l = l / np.linalg.norm(l, axis=1, keepdims=True)
        Sr = S @ r
        lam = (np.swapaxes(l.conj(), 1, 2) @ Sr)[:, 0, 0] / (np.swapaxes(l.conj(), 1, 2) @ r)[:, 0, 0]
        res_r = np.linalg.norm(Sr - lam[:, None, None] * r, axis=(1, 2))
        res_l = np.linalg.norm(S_adj @ l - lam.conj()[:, None, None] * l, axis=(1, 2))
    scale = np.abs(lam)
    ok = (res_r < 1e-12 * scale) & (res_l < 1e-12 * scale) & (np.abs(lam.imag) < 1e-12 * scale)
    ok &= np.isfinite(scale)
    return lam.real.copy(), r[..., 0], l[..., 0], ok


def _factor_psd(V: np.ndarray) -> np.ndarray:
    """W with W^dag W = V, from Cholesky (V = L L^dag, W = L^dag)."""
    evals = np.linalg.eigvalsh(V)
    if evals[0] <= 1e-12 * evals[-1]:
        raise NumericalError(
            f"fixed point of the adjoint map is singular (eigenvalues {evals}); "
            "no invertible W exists"
        )
    return np.linalg.cholesky(V).conj().T


def recover_kraus(params: ParamSet, anchor: int = 0) -> tuple[KrausModel, SpectralData]:
    lam, V = _leading_pair(params.matrices, "adjoint")
    lam_f, rho = _leading_pair(params.matrices, "forward")
    if abs(lam - lam_f) > 1e-8 * lam:
        raise NumericalError(f"forward/adjoint leading eigenvalues disagree: {lam_f} vs {lam}")
    W = _factor_psd(V)
    W_inv = np.linalg.inv(W)
    rho = rho / np.trace(rho @ V).real
    kraus = np.einsum("ij,xjk,kl->xil", W, params.matrices, W_inv) / np.sqrt(lam)
    rho0 = W @ rho @ W.conj().T
    rho0 = 0.5 * (rho0 + rho0.conj().T)
    rho0 /= np.trace(rho0).real
    model = KrausModel(kraus, rho0, anchor_vector(kraus, rho0, anchor), anchor)
    return model, SpectralData(lam, V, W, rho)


# -- likelihoods -------------------------------------------------------------


def _block_products(mats: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """``out[n, b] = B[n, blocks[b, -1]] @ ... @ B[n, blocks[b, 0]]``."""
    n, _, d, _ = mats.shape
    out = np.broadcast_to(np.eye(d, dtype=complex), (n, len(blocks), d, d))
    for j in range(blocks.shape[1]):
        out = mats[:, blocks[:, j]] @ out
    return out


def log2_likelihood_batch(
    mats: np.ndarray, data: Sequence[int], warm_start: bool = False
) -> np.ndarray:
    """``log2 P_B(data)`` for each parameter set in the stack ``mats`` (n, A, d, d).

    Evaluates ``Tr(B_seq rho B_seq^dag V) / (lam^L Tr(rho V))`` left to right.
    The sequence is cut into blocks of ``BLOCK_LENGTH`` symbols whose products
    are formed once per distinct block; the running matrix is renormalized by
    its trace after every block and the scale kept in log form, so long
    sequences neither underflow nor overflow. Returns ``-inf`` where the
    likelihood is zero. ``warm_start`` is passed to the eigen-solve; use it
    only when every member is a small perturbation of ``mats[0]``.
    """
    mats = np.asarray(mats, dtype=complex)
    data = np.asarray(data, dtype=np.int64)
    n, A, d, _ = mats.shape
    if data.size and (data.min() < 0 or data.max() >= A):
        raise ValidationError(f"symbols must lie in [0, {A})")
    L = data.size
    if L == 0:
        return np.zeros(n)
    lam, rho, V = _spectral_batch(mats, warm_start)
    k = min(BLOCK_LENGTH, L)
    nb = L // k
    blocks = data[: nb * k].reshape(nb, k)
    codes = blocks @ (A ** np.arange(k - 1, -1, -1))
    uniq, first, inverse = np.unique(codes, return_index=True, return_inverse=True)
    steps = [(_block_products(mats, blocks[first]), inverse)]
    if L % k:
        steps.append((_block_products(mats, data[nb * k :][None, :]), np.zeros(1, dtype=np.int64)))
    X = rho.copy()
    logp = np.zeros(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        for prods, order in steps:
            prods_h = np.swapaxes(prods, -1, -2).conj()
            for b in order:
                X = prods[:, b] @ X @ prods_h[:, b]
                tr = np.trace(X, axis1=1, axis2=2).real
                dead = ~(tr > 0.0)
                if dead.any():
                    logp[dead] = -np.inf
                    tr = np.where(dead, 1.0, tr)
                    X[dead] = np.eye(d) / d
                logp += np.log(tr)
                X /= tr[:, None, None]
        final = np.einsum("nij,nji->n", X, V).real
        norm = np.einsum("nij,nji->n", rho, V).real
        logp += np.log(np.clip(final, 0.0, None)) - np.log(norm) - L * np.log(lam)
    return logp / np.log(2.0)


def log2_sequence_likelihood(params: ParamSet, word: Sequence[int]) -> float:
    return float(log2_likelihood_batch(params.matrices[None], word)[0])


def sequence_likelihood(params: ParamSet, word: Sequence[int]) -> float:
    return float(2.0 ** log2_sequence_likelihood(params, word))


def kraus_sequence_probability(model: KrausModel, word: Sequence[int], rho=None) -> float:
    """``Tr(A_word rho A_word^dag)`` with the stationary state by default."""
    X = model.rho0 if rho is None else np.asarray(rho, dtype=complex)
    for x in word:
        X = model.kraus[x] @ X @ model.kraus[x].conj().T
    return float(np.trace(X).real)


# -- encoding and prediction -------------------------------------------------


def fix_phase(psi: np.ndarray) -> np.ndarray:
    """Make the first non-negligible amplitude real and non-negative."""
    psi = np.asarray(psi, dtype=complex)
    mags = np.abs(psi)
    i = int(np.argmax(mags > 1e-12 * mags.max()))
    out = psi * (mags[i] / psi[i])
    out[i] = mags[i]
    return out


def anchor_vector(kraus: np.ndarray, rho0: np.ndarray, anchor: int = 0) -> np.ndarray:
    """Leading right eigenvector of the anchor Kraus operator, unit norm.

    When that eigenvalue is zero or tied in modulus with another, the anchor
    operator is instead applied repeatedly (100 times) to the dominant
    eigenvector of ``rho0``; the iterate must settle on a fixed ray.
    """
    if not 0 <= anchor < kraus.shape[0]:
        raise ValidationError(f"anchor symbol {anchor} out of range")
    A0 = kraus[anchor]
    if A0.shape[0] == 1:
        return np.ones(1, dtype=complex)
    w, vecs = np.linalg.eig(A0)
    order = np.argsort(-np.abs(w))
    top, second = np.abs(w[order[0]]), np.abs(w[order[1]])
    if top > 1e-12 and top - second > DEGENERACY_TOL * top:
        v = vecs[:, order[0]]
        return fix_phase(v / np.linalg.norm(v))
    psi = np.linalg.eigh(rho0)[1][:, -1].astype(complex)
    prev = psi
    for _ in range(100):
        nxt = A0 @ psi
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            raise NumericalError("anchor Kraus operator is nilpotent on the stationary support")
        prev, psi = psi, nxt / norm
    if 1.0 - abs(np.vdot(prev, psi)) > DEGENERACY_TOL:
        raise NumericalError("repeated anchor application did not converge to a fixed ray")
    return fix_phase(psi)


def encode_past(model: KrausModel, past: Sequence[int]) -> np.ndarray:
    """Memory state after applying the past's Kraus operators (oldest first) to sigma0."""
    psi = model.sigma0
    for x in past:
        if not 0 <= x < model.alphabet_size:
            raise ValidationError(f"symbol {x} out of range")
        psi = model.kraus[x] @ psi
        norm = np.linalg.norm(psi)
        if norm == 0.0:
            raise ZeroProbabilityError(f"model assigns past {tuple(past)} probability 0")
        psi = psi / norm
    return fix_phase(psi)


def conditional_next(model: KrausModel, state: np.ndarray) -> np.ndarray:
    amps = model.kraus @ np.asarray(state, dtype=complex)
    return np.sum(np.abs(amps) ** 2, axis=1)


def future_distribution(model: KrausModel, state: np.ndarray, length: int) -> np.ndarray:
    """Probabilities of all length-``length`` words (lexicographic) from a pure state."""
    amps = np.asarray(state, dtype=complex)[None, :]
    for _ in range(length):
        amps = np.einsum("xij,wj->wxi", model.kraus, amps).reshape(-1, model.dim)
    return np.sum(np.abs(amps) ** 2, axis=1)


# -- circuit-level outputs ---------------------------------------------------


def complete_unitary(model: KrausModel, tol: float = 1e-9) -> np.ndarray:
    """Unitary U on memory (x) output with ``<j|<x| U |k>|0> = A_x[j, k]``.

    Basis index of ``|j>|x>`` is ``j * alphabet + x``. Columns ``k * alphabet``
    hold the Kraus entries verbatim; the rest come from Gram-Schmidt over the
    canonical basis in order, skipping vectors already in the span.
    """
    A, d = model.alphabet_size, model.dim
    err = model.completeness_error()
    if err > tol:
        raise ValidationError(f"cannot extend to a unitary: completeness error {err:.3g}")
    size = A * d
    U = np.zeros((size, size), dtype=complex)
    fixed_cols = np.arange(d) * A
    for k in range(d):
        U[:, k * A] = model.kraus[:, :, k].T.ravel()
    basis = [U[:, c] for c in fixed_cols]
    extra = []
    for i in range(size):
        if len(basis) == size:
            break
        r = np.zeros(size, dtype=complex)
        r[i] = 1.0
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            for q in basis:
                r = r - np.vdot(q, r) * q
        norm = np.linalg.norm(r)
        if norm < 1e-9:
            continue
        r = r / norm
        basis.append(r)
        extra.append(r)
    free_cols = [c for c in range(size) if c % A != 0]
    for c, v in zip(free_cols, extra):
        U[:, c] = v
    return U


def bloch_coordinates(state: np.ndarray) -> tuple[float, float, float]:
    state = np.asarray(state, dtype=complex)
    if state.shape != (2,):
        raise ValidationError("Bloch coordinates need a two-dimensional state")
    a, b = state
    ab = np.conj(a) * b
    return float(2 * ab.real), float(2 * ab.imag), float(abs(a) ** 2 - abs(b) ** 2)
