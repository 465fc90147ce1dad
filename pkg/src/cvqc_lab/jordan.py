"""Two-projector Jordan block decomposition.

Given projectors P0 and P1 on the same space, the product of reflections
Q = (2 P1 - I)(2 P0 - I) is unitary and the space splits into

  - 2-D blocks where Q rotates by an angle theta in (0, pi).  Each block
    carries an orthonormal pair (alpha, alpha_perp) with P0 acting as
    |alpha><alpha| inside the block, a pair (beta, beta_perp) doing the
    same for P1, an overlap <alpha|beta> = sqrt(p) chosen positive real,
    and Q-eigenvectors phi_pm = (alpha +- i alpha_perp)/sqrt(2) with
    eigenvalues exp(+-i theta).
  - 1-D blocks spanned by a common eigenvector v of both projectors:
    P0 v = b v and P1 v = c v for bits b, c, and Q v = (2b-1)(2c-1) v.

The construction runs one dense Schur decomposition of Q and then reads
every block off the eigenvectors.  For an eigenvector u of Q with
eigenvalue exp(i theta), theta in (0, pi):

    alpha      = normalize(P0 u)                (norm is 1/sqrt(2))
    alpha_perp = -i (sqrt(2) u - alpha)         (already unit)
    beta       = normalize(exp(i theta/2) P1 u)
    beta_perp  = -i (sqrt(2) exp(i theta/2) u - beta)

These phases make <alpha|beta> = cos(theta/2) > 0 automatically.  Inside
a degenerate exp(i theta) eigenspace any orthonormal choice of u's works:
P0 maps it isometrically (up to 1/sqrt(2)) onto the span of the alphas,
so orthogonality of the u's carries over to the blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import config
from .qsim import DimensionMismatch, NotAProjector, Operator


class DegenerateNumerics(Exception):
    """Block extraction left residuals too large to trust."""


@dataclass(frozen=True)
class JordanBlock2D:
    theta: float  # in (0, pi)
    p: float  # cos^2(theta/2) = |<alpha|beta>|^2
    alpha: np.ndarray
    alpha_perp: np.ndarray
    beta: np.ndarray
    beta_perp: np.ndarray

    @property
    def phi_plus(self) -> np.ndarray:
        return (self.alpha + 1j * self.alpha_perp) / np.sqrt(2)

    @property
    def phi_minus(self) -> np.ndarray:
        return (self.alpha - 1j * self.alpha_perp) / np.sqrt(2)


@dataclass(frozen=True)
class JordanBlock1D:
    vector: np.ndarray
    b: int
    c: int


@dataclass(frozen=True)
class JordanDecomposition:
    blocks2d: tuple[JordanBlock2D, ...]
    blocks1d: tuple[JordanBlock1D, ...]
    dim: int

    def basis(self) -> np.ndarray:
        """Columns: (alpha, alpha_perp) per 2-D block, then 1-D vectors."""
        cols = []
        for blk in self.blocks2d:
            cols.append(blk.alpha)
            cols.append(blk.alpha_perp)
        for blk in self.blocks1d:
            cols.append(blk.vector)
        return np.column_stack(cols) if cols else np.zeros((self.dim, 0), dtype=np.complex128)

    def to_json_dict(self) -> dict:
        def vec(v):
            return [[float(x.real), float(x.imag)] for x in v]

        return {
            "dim": self.dim,
            "blocks2d": [
                {
                    "theta": blk.theta,
                    "p": blk.p,
                    "alpha": vec(blk.alpha),
                    "alpha_perp": vec(blk.alpha_perp),
                    "beta": vec(blk.beta),
                    "beta_perp": vec(blk.beta_perp),
                }
                for blk in self.blocks2d
            ],
            "blocks1d": [
                {"b": blk.b, "c": blk.c, "vector": vec(blk.vector)}
                for blk in self.blocks1d
            ],
        }


@dataclass(frozen=True)
class Residuals:
    max_p0: float
    max_p1: float
    max_q: float
    gram: float


def _projector_matrix(p) -> np.ndarray:
    if isinstance(p, Operator):
        if p.kind != "projector":
            raise NotAProjector(f"kind {p.kind!r}")
        return p.mat
    mat = np.asarray(p, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"shape {mat.shape}")
    if np.max(np.abs(mat @ mat - mat)) > config.ATOL or np.max(np.abs(mat - mat.conj().T)) > config.ATOL:
        raise NotAProjector("matrix is not an orthogonal projector")
    return mat


def reflect(p) -> Operator:
    """Reflection 2P - I about the range of a projector."""
    mat = _projector_matrix(p)
    return Operator.unitary(2.0 * mat - np.eye(mat.shape[0]))


def jordan_decompose(p0, p1) -> JordanDecomposition:
    """Split the space into Jordan blocks of the projector pair (p0, p1)."""
    m0 = _projector_matrix(p0)
    m1 = _projector_matrix(p1)
    if m0.shape != m1.shape:
        raise DimensionMismatch(f"{m0.shape} vs {m1.shape}")
    dim = m0.shape[0]
    q = (2.0 * m1 - np.eye(dim)) @ (2.0 * m0 - np.eye(dim))

    # Q is unitary hence normal, so its complex Schur form is diagonal and
    # the Schur basis is a full orthonormal eigenbasis.
    tmat, zmat = scipy.linalg.schur(q, output="complex")
    offdiag = np.max(np.abs(tmat - np.diag(np.diag(tmat)))) if dim > 1 else 0.0
    if offdiag > config.DEGENERATE_LIMIT:
        raise DegenerateNumerics(f"Schur form off-diagonal {offdiag:.3e}")
    phases = np.angle(np.diag(tmat))

    tol = config.EIGPHASE_TOL
    blocks2d: list[JordanBlock2D] = []
    plus_cols: list[int] = []  # Q-eigenvalue +1, i.e. phase ~ 0
    minus_cols: list[int] = []  # Q-eigenvalue -1, i.e. phase ~ +-pi
    n_conj = 0
    for k in range(dim):
        th = phases[k]
        if abs(th) <= tol:
            plus_cols.append(k)
        elif abs(abs(th) - np.pi) <= tol:
            minus_cols.append(k)
        elif th > 0:
            u = zmat[:, k]
            alpha = m0 @ u
            na = np.linalg.norm(alpha)
            if na < config.DEGENERATE_LIMIT:
                raise DegenerateNumerics(f"P0 image collapsed at theta={th:.3e}")
            alpha = alpha / na
            alpha_perp = -1j * (np.sqrt(2.0) * u - alpha)
            alpha_perp = alpha_perp / np.linalg.norm(alpha_perp)
            w = np.exp(0.5j * th) * (m1 @ u)
            nb = np.linalg.norm(w)
            if nb < config.DEGENERATE_LIMIT:
                raise DegenerateNumerics(f"P1 image collapsed at theta={th:.3e}")
            beta = w / nb
            beta_perp = -1j * (np.sqrt(2.0) * np.exp(0.5j * th) * u - beta)
            beta_perp = beta_perp / np.linalg.norm(beta_perp)
            blocks2d.append(JordanBlock2D(
                theta=float(th), p=float(np.cos(th / 2.0) ** 2),
                alpha=alpha, alpha_perp=alpha_perp, beta=beta, beta_perp=beta_perp))
        else:
            n_conj += 1

    if len(blocks2d) != n_conj:
        raise DegenerateNumerics(
            f"{len(blocks2d)} rotation blocks vs {n_conj} conjugate partners")

    blocks1d: list[JordanBlock1D] = []
    # Each +-1 eigenspace of Q is invariant under both projectors, and on
    # it P1 equals P0 (for +1) or I - P0 (for -1).  Diagonalizing the
    # restriction of P0 therefore separates the four (b, c) types.
    for cols, same in ((plus_cols, True), (minus_cols, False)):
        if not cols:
            continue
        vsub = zmat[:, cols]
        restricted = vsub.conj().T @ m0 @ vsub
        evals, evecs = np.linalg.eigh(restricted)
        vecs = vsub @ evecs
        for j, ev in enumerate(evals):
            b = int(round(float(ev)))
            if abs(ev - b) > config.DEGENERATE_LIMIT or b not in (0, 1):
                raise DegenerateNumerics(f"1-D block eigenvalue {ev:.6e} not a bit")
            c = b if same else 1 - b
            blocks1d.append(JordanBlock1D(vector=vecs[:, j], b=b, c=c))

    blocks2d.sort(key=lambda blk: blk.theta)
    blocks1d.sort(key=lambda blk: (blk.b, blk.c))
    dec = JordanDecomposition(tuple(blocks2d), tuple(blocks1d), dim)

    if 2 * len(dec.blocks2d) + len(dec.blocks1d) != dim:
        raise DegenerateNumerics(
            f"block count 2*{len(dec.blocks2d)}+{len(dec.blocks1d)} != {dim}")
    basis = dec.basis()
    gram = np.max(np.abs(basis.conj().T @ basis - np.eye(dim)))
    if gram > config.DEGENERATE_LIMIT:
        raise DegenerateNumerics(f"basis Gram residual {gram:.3e}")
    return dec


def reconstruct_check(dec: JordanDecomposition, p0, p1) -> Residuals:
    """Rebuild P0, P1, Q from block data and report max-norm residuals."""
    m0 = _projector_matrix(p0)
    m1 = _projector_matrix(p1)
    dim = dec.dim
    r0 = np.zeros((dim, dim), dtype=np.complex128)
    r1 = np.zeros((dim, dim), dtype=np.complex128)
    rq = np.zeros((dim, dim), dtype=np.complex128)
    for blk in dec.blocks2d:
        r0 += np.outer(blk.alpha, blk.alpha.conj())
        r1 += np.outer(blk.beta, blk.beta.conj())
        fp, fm = blk.phi_plus, blk.phi_minus
        rq += np.exp(1j * blk.theta) * np.outer(fp, fp.conj())
        rq += np.exp(-1j * blk.theta) * np.outer(fm, fm.conj())
    for blk in dec.blocks1d:
        proj = np.outer(blk.vector, blk.vector.conj())
        r0 += blk.b * proj
        r1 += blk.c * proj
        rq += (2 * blk.b - 1) * (2 * blk.c - 1) * proj
    q = (2.0 * m1 - np.eye(dim)) @ (2.0 * m0 - np.eye(dim))
    basis = dec.basis()
    gram = float(np.max(np.abs(basis.conj().T @ basis - np.eye(dim)))) if dim else 0.0
    return Residuals(
        max_p0=float(np.max(np.abs(r0 - m0))),
        max_p1=float(np.max(np.abs(r1 - m1))),
        max_q=float(np.max(np.abs(rq - q))),
        gram=gram,
    )


def eigenphases(dec: JordanDecomposition) -> np.ndarray:
    """Sorted multiset of Q eigenphases implied by the block structure."""
    phases = []
    for blk in dec.blocks2d:
        phases.extend([blk.theta, -blk.theta])
    for blk in dec.blocks1d:
        phases.append(0.0 if blk.b == blk.c else np.pi)
    return np.sort(np.asarray(phases))


def random_projector(rng: np.random.Generator, dim: int, rank: int) -> np.ndarray:
    """Haar-random rank-r projector; test and demo helper."""
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    qmat, _ = np.linalg.qr(m)
    cols = qmat[:, :rank]
    return cols @ cols.conj().T
