"""Per-note input features: pitch one-hots, measure-relative duration, and
Laplacian positional encodings.

The feature matrix has 41 columns: [0..12) pitch class, [12..20) octave,
[20] duration scalar, [21..41) positional encoding.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConsistencyError, NumericalError
from .graph import RelationType, ScoreGraph
from .score import Score

__all__ = [
    "N_INTRINSIC",
    "PE_DIM",
    "N_FEATURES",
    "intrinsic_features",
    "laplacian_pe",
    "assemble_features",
]

N_INTRINSIC = 21
PE_DIM = 20
N_FEATURES = N_INTRINSIC + PE_DIM

_EIG_RESIDUAL_TOL = 1e-6
_NULLSPACE_TOL = 1e-8
_DENSE_CUTOFF = 2000


def intrinsic_features(score: Score) -> np.ndarray:
    """|V| x 21 matrix: pitch-class one-hot, octave one-hot, duration scalar.

    The duration scalar is ``1 - tanh(dur(v) / dur(m))`` with ``dur(m)`` the
    containing measure's length, so it is independent of the time signature
    and resolves short values more finely than long ones.
    """
    n = len(score.notes)
    out = np.zeros((n, N_INTRINSIC), dtype=np.float64)
    measure_onsets = np.array([m.onset for m in score.measures], dtype=np.int64)
    measure_durs = np.array([m.duration for m in score.measures], dtype=np.int64)
    for i, note in enumerate(score.notes):
        out[i, note.pitch % 12] = 1.0
        octave = min(max(note.pitch // 12 - 1, 0), 7)
        out[i, 12 + octave] = 1.0
        m = np.searchsorted(measure_onsets, note.onset, side="right") - 1
        out[i, 20] = 1.0 - np.tanh(note.duration / measure_durs[m])
    return out


def _collapsed_adjacency(graph: ScoreGraph) -> scipy.sparse.csr_matrix:
    """Binary symmetric adjacency: union of all typed edges, types collapsed."""
    n = graph.n_nodes
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    for rel in RelationType:
        arr = graph.edges[rel]
        rows.append(arr[0])
        cols.append(arr[1])
    r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    a = scipy.sparse.coo_matrix((np.ones(len(r)), (r, c)), shape=(n, n)).tocsr()
    a = ((a + a.T) > 0).astype(np.float64)
    a.setdiag(0)
    a.eliminate_zeros()
    return a


def _normalized_laplacian(a: scipy.sparse.csr_matrix) -> scipy.sparse.csr_matrix:
    """Symmetric normalized Laplacian with zero rows for isolated nodes."""
    deg = np.asarray(a.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        dinv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1e-300)), 0.0)
    d = scipy.sparse.diags(dinv_sqrt)
    lap = scipy.sparse.diags((deg > 0).astype(np.float64)) - d @ a @ d
    return lap.tocsr()


def laplacian_pe(
    graph: ScoreGraph,
    k: int = PE_DIM,
    rng: np.random.Generator | None = None,
    dense_cutoff: int = _DENSE_CUTOFF,
) -> np.ndarray:
    """|V| x k positional encoding from the smallest non-trivial Laplacian
    eigenvectors of the type-collapsed adjacency.

    Eigenvalues below 1e-8 (the nullspace) are discarded; the k smallest
    remaining eigenvectors are kept, unit-normalized, zero-padded when the
    graph is too small.  Signs are fixed so each column's first nonzero
    entry is positive; passing ``rng`` instead applies an independent
    random sign per column (training-time augmentation).

    Raises :class:`NumericalError` if any retained eigenpair has residual
    above 1e-6.
    """
    n = graph.n_nodes
    if n < 1:
        raise ConsistencyError("laplacian_pe requires at least one node")
    pe = np.zeros((n, k), dtype=np.float64)
    a = _collapsed_adjacency(graph)
    if a.nnz == 0:
        return pe
    lap = _normalized_laplacian(a)

    if n <= dense_cutoff:
        eigvals, eigvecs = np.linalg.eigh(lap.toarray())
    else:
        n_comp = scipy.sparse.csgraph.connected_components(a, directed=False, return_labels=False)
        want = min(n - 1, k + n_comp)
        # Shift-invert around a negative sigma: the Laplacian itself is
        # singular, L + 0.01 I is definite and shares eigenvectors.
        v0 = np.random.default_rng(0).standard_normal(n)
        eigvals, eigvecs = scipy.sparse.linalg.eigsh(lap, k=want, sigma=-0.01, which="LM", v0=v0)
        order = np.argsort(eigvals)
        eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    keep = eigvals >= _NULLSPACE_TOL
    eigvals, eigvecs = eigvals[keep], eigvecs[:, keep]
    eigvals, eigvecs = eigvals[:k], eigvecs[:, :k]

    residual = lap @ eigvecs - eigvecs * eigvals[None, :]
    worst = np.sqrt((residual**2).sum(axis=0)).max() if eigvals.size else 0.0
    if worst > _EIG_RESIDUAL_TOL:
        raise NumericalError(f"eigensolver residual {worst:.3e} exceeds {_EIG_RESIDUAL_TOL}")

    norms = np.sqrt((eigvecs**2).sum(axis=0))
    eigvecs = eigvecs / norms[None, :]

    if rng is not None:
        signs = rng.choice([-1.0, 1.0], size=eigvecs.shape[1])
    else:
        signs = np.ones(eigvecs.shape[1])
        for j in range(eigvecs.shape[1]):
            col = eigvecs[:, j]
            nz = np.nonzero(np.abs(col) > 1e-8)[0]
            if nz.size and col[nz[0]] < 0:
                signs[j] = -1.0
    pe[:, : eigvecs.shape[1]] = eigvecs * signs[None, :]
    return pe


def assemble_features(
    score: Score,
    graph: ScoreGraph,
    pe_rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Concatenate intrinsic features and positional encoding into |V| x 41."""
    if tuple(score.note_ids()) != graph.node_ids:
        raise ConsistencyError("score and graph disagree on note ids/order")
    if len(score.notes) == 0:
        return np.zeros((0, N_FEATURES), dtype=np.float64)
    return np.hstack([intrinsic_features(score), laplacian_pe(graph, PE_DIM, rng=pe_rng)])
