"""
Von Neumann graph entropy and monotonicity audits of weight trajectories.

H = −Σ μ ln μ over the eigenvalues μ of L/n, where L = I − D^{-1/2} A D^{-1/2}
is the normalized Laplacian. Eigenvalues come from a cyclic Jacobi solver
that works on a whole stack of same-sized matrices at once.
"""

import logging
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EigenSolverError, ManifoldDomainError
from .models import MonotonicityReport, WeightedGraph

logger = logging.getLogger(__name__)

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def normalized_laplacian(graph: WeightedGraph) -> np.ndarray:
    adjacency = graph.adjacency()
    degrees = adjacency.sum(axis=1)
    if np.any(degrees <= 0.0):
        isolated = np.flatnonzero(degrees <= 0.0).tolist()
        raise ManifoldDomainError(f"isolated nodes have no normalized Laplacian: {isolated}")
    inv_sqrt = 1.0 / np.sqrt(degrees)
    laplacian = np.eye(graph.n) - inv_sqrt[:, None] * adjacency * inv_sqrt[None, :]
    return 0.5 * (laplacian + laplacian.T)


@lru_cache(maxsize=64)
def _round_robin(n: int) -> Tuple[Tuple[np.ndarray, np.ndarray], ...]:
    """Partition all index pairs of an n×n matrix into rounds of disjoint pairs."""
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            p, q = zip(*pairs)
            rounds.append((np.array(p), np.array(q)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_diagonal_norms(stack: np.ndarray) -> np.ndarray:
    n = stack.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.sqrt(np.sum(stack[:, mask] ** 2, axis=1))


def _validate_square(matrix: np.ndarray) -> np.ndarray:
    a = np.array(matrix, dtype=np.float64, copy=True)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ManifoldDomainError("jacobi_eigh needs a square matrix")
    if not np.all(np.isfinite(a)):
        raise ManifoldDomainError("matrix entries must be finite")
    scale = max(1.0, np.max(np.abs(a), initial=0.0))
    if np.max(np.abs(a - np.swapaxes(a, -1, -2)), initial=0.0) > 1e-12 * scale:
        raise ManifoldDomainError("matrix must be symmetric")
    return a


def _rotate(stack: np.ndarray, p: np.ndarray, q: np.ndarray, c: np.ndarray, s: np.ndarray,
            columns_only: bool = False) -> None:
    """In place: stack ← Jᵀ·stack·J (or stack·J) for the disjoint rotations of one round."""
    cc, sc = c[:, None, :], s[:, None, :]
    col_p, col_q = stack[:, :, p], stack[:, :, q]
    stack[:, :, p] = cc * col_p - sc * col_q
    stack[:, :, q] = sc * col_p + cc * col_q
    if columns_only:
        return
    cr, sr = c[:, :, None], s[:, :, None]
    row_p, row_q = stack[:, p, :], stack[:, q, :]
    stack[:, p, :] = cr * row_p - sr * row_q
    stack[:, q, :] = sr * row_p + cr * row_q


def _jacobi_batch(stack: np.ndarray, vectors: Optional[np.ndarray], tol: float,
                  max_sweeps: int) -> int:
    """Diagonalize a (B, n, n) stack in place; returns the sweeps used."""
    n = stack.shape[-1]
    sweeps = 0
    while np.max(_off_diagonal_norms(stack), initial=0.0) >= tol:
        if sweeps >= max_sweeps:
            raise EigenSolverError("Jacobi eigensolver did not converge", sweeps)
        for p, q in _round_robin(n):
            apq = stack[:, p, q]
            active = apq != 0.0
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                theta = (stack[:, q, q] - stack[:, p, p]) / (2.0 * np.where(active, apq, 1.0))
                t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            _rotate(stack, p, q, c, s)
            if vectors is not None:
                _rotate(vectors, p, q, c, s, columns_only=True)
        stack[...] = 0.5 * (stack + np.swapaxes(stack, -1, -2))
        sweeps += 1
    return sweeps


def jacobi_eigh(matrix: np.ndarray, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, in round-robin order, so
    the rotations of one round touch disjoint rows and columns and are applied
    together, updating only those rows and columns.

    Args:
        matrix: symmetric n×n array
        tol: stop once the Frobenius norm of the off-diagonal part drops below it
        max_sweeps: sweeps allowed before giving up

    Returns:
        (eigenvalues ascending, eigenvectors as columns, sweeps used)
    """
    a = _validate_square(matrix)
    if a.ndim != 2:
        raise ManifoldDomainError("jacobi_eigh needs a square matrix")
    n = a.shape[0]
    stack = a[None]
    vectors = np.eye(n)[None].copy()
    sweeps = _jacobi_batch(stack, vectors, tol, max_sweeps)

    logger.debug("Jacobi converged on n=%d after %d sweeps", n, sweeps)
    eigenvalues = np.diagonal(stack[0]).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], vectors[0][:, order], sweeps


def jacobi_eigvals_batch(matrices: np.ndarray, tol: float = JACOBI_TOL,
                         max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Ascending eigenvalues of every matrix in a (B, n, n) symmetric stack."""
    stack = _validate_square(matrices)
    if stack.ndim != 3:
        raise ManifoldDomainError("jacobi_eigvals_batch needs a (B, n, n) stack")
    if stack.shape[0] == 0:
        return np.zeros((0, stack.shape[-1]))
    sweeps = _jacobi_batch(stack, None, tol, max_sweeps)
    logger.debug("batched Jacobi converged on %d×%d matrices after %d sweeps", stack.shape[0], stack.shape[-1], sweeps)
    return np.sort(np.diagonal(stack, axis1=1, axis2=2), axis=1)


def spectral_entropy(eigenvalues: np.ndarray) -> float:
    """−Σ μ ln μ with 0·ln 0 := 0; round-off negatives count as zero."""
    mu = np.asarray(eigenvalues, dtype=np.float64)
    mu = mu[mu > 0.0]
    return float(max(0.0, -np.sum(mu * np.log(mu))))


def von_neumann_entropy(graph: WeightedGraph) -> float:
    if graph.n < 2:
        raise ManifoldDomainError("entropy needs at least two nodes")
    eigenvalues, _, _ = jacobi_eigh(normalized_laplacian(graph))
    return spectral_entropy(eigenvalues / graph.n)


def entropy_series(trajectory: Sequence[Tuple[float, WeightedGraph]],
                   warm_start: bool = True) -> List[Tuple[float, float]]:
    """
    Entropy of every snapshot, with the spectra of same-sized snapshots solved as one batch.

    With ``warm_start`` each batch is first expressed in the eigenbasis of its
    first Laplacian, so slowly varying trajectories start nearly diagonal.
    """
    groups: Dict[int, List[int]] = {}
    for k, (_, graph) in enumerate(trajectory):
        if graph.n < 2:
            raise ManifoldDomainError("entropy needs at least two nodes")
        groups.setdefault(graph.n, []).append(k)

    entropies = np.zeros(len(trajectory))
    for n, indices in groups.items():
        stack = np.stack([normalized_laplacian(trajectory[k][1]) for k in indices])
        if warm_start and len(indices) > 1:
            _, basis, _ = jacobi_eigh(stack[0])
            stack = basis.T @ stack @ basis
            stack = 0.5 * (stack + np.swapaxes(stack, -1, -2))
        eigenvalues = jacobi_eigvals_batch(stack)
        for k, values in zip(indices, eigenvalues):
            entropies[k] = spectral_entropy(values / n)
    return [(float(t), float(h)) for (t, _), h in zip(trajectory, entropies)]


def audit(trajectory: Sequence[Tuple[float, WeightedGraph]], tol: float = 1e-6) -> MonotonicityReport:
    """Flag every consecutive pair whose entropy drops by more than ``tol``."""
    if tol < 0:
        raise ManifoldDomainError("tol must be non-negative")
    if not trajectory:
        raise ManifoldDomainError("cannot audit an empty trajectory")
    first = trajectory[0][1]
    for k, (t, graph) in enumerate(trajectory):
        if not graph.same_topology(first):
            raise ManifoldDomainError(f"snapshot {k} changes the node set or edge topology")
        if k and t <= trajectory[k - 1][0]:
            raise ManifoldDomainError(f"timestamps must be strictly increasing (index {k})")

    series = entropy_series(trajectory)
    violations = []
    for (_, previous), (t, current) in zip(series, series[1:]):
        delta = current - previous
        if delta < -tol:
            violations.append((t, delta))
    report = MonotonicityReport(series=series, violations=violations, tol=tol)
    logger.info("entropy audit over %d snapshots: %d violations", len(series), len(violations))
    return report


def max_drawdown(series: Sequence[Tuple[float, float]]) -> float:
    """Largest H(t_k) − H(t_l) with k < l; zero for a non-decreasing series."""
    peak = -np.inf
    worst = 0.0
    for _, h in series:
        peak = max(peak, h)
        worst = max(worst, peak - h)
    return float(worst)
