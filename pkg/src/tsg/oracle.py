"""Slow reference implementations used to check the fast paths.

Nothing here imports the fast-path modules; inputs are read through the
plain data they carry (edge pairs, request maps).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import GraphState

BRUTE_FORCE_LIMIT = 20
DENSE_LIMIT = 256
JACOBI_OFF_TOL = 1e-10


@dataclass(frozen=True)
class OracleVerdict:
    check: str
    inputs_digest: str
    fast: object
    oracle: object
    agree: bool
    tolerance: float

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "inputs_digest": self.inputs_digest,
            "fast": _plain(self.fast),
            "oracle": _plain(self.oracle),
            "agree": self.agree,
            "tolerance": self.tolerance,
        }


def _plain(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (list, tuple)):
        return [_plain(y) for y in x]
    return x


def digest(obj) -> str:
    blob = json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def verdict(check: str, inputs, fast, oracle, tolerance: float = 0.0) -> OracleVerdict:
    if tolerance == 0:
        agree = fast == oracle
    else:
        agree = fast is not None and oracle is not None and abs(fast - oracle) <= tolerance
    return OracleVerdict(check, digest(inputs), fast, oracle, bool(agree), tolerance)


def _vertices_and_edges(view):
    return [int(x) for x in view.vertices], [(int(a), int(b)) for a, b in view.edge_pairs]


def subset_conductance(view, S) -> Fraction | None:
    """phi(S) by direct edge counting; None when the smaller volume is zero."""
    vertices, edges = _vertices_and_edges(view)
    inside = set(S)
    cut = vol_in = vol_out = 0
    for a, b in edges:
        ia, ib = a in inside, b in inside
        vol_in += ia + ib
        vol_out += (not ia) + (not ib)
        cut += ia != ib
    denom = min(vol_in, vol_out)
    return Fraction(cut, denom) if denom else None


def brute_force_min_conductance(view) -> tuple[Fraction | None, frozenset | None]:
    """Minimum conductance over every nonempty proper subset.

    Subsets are bitmasks over the sorted vertex list, visited in increasing
    order; a subset and its complement give the same value, so only masks
    without the top bit are visited.
    """
    vertices, edges = _vertices_and_edges(view)
    n = len(vertices)
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force refused for {n} > {BRUTE_FORCE_LIMIT} vertices")
    if n < 2:
        raise ValueError("need at least two vertices")
    pos = {v: i for i, v in enumerate(vertices)}
    bits = [(1 << pos[a], 1 << pos[b]) for a, b in edges]
    best = None
    best_mask = None
    for mask in range(1, 1 << (n - 1)):
        cut = vol_in = vol_out = 0
        for ba, bb in bits:
            ia, ib = bool(mask & ba), bool(mask & bb)
            vol_in += ia + ib
            vol_out += 2 - ia - ib
            cut += ia != ib
        denom = min(vol_in, vol_out)
        if denom == 0:
            continue
        phi = Fraction(cut, denom)
        if best is None or phi < best:
            best, best_mask = phi, mask
    if best is None:
        return None, None
    return best, frozenset(v for v in vertices if best_mask & (1 << pos[v]))


def normalized_laplacian(view) -> np.ndarray:
    vertices, edges = _vertices_and_edges(view)
    n = len(vertices)
    pos = {v: i for i, v in enumerate(vertices)}
    A = np.zeros((n, n))
    for a, b in edges:
        A[pos[a], pos[b]] += 1
        A[pos[b], pos[a]] += 1
    deg = A.sum(axis=1)
    L = np.zeros((n, n))
    for i in range(n):
        if deg[i] == 0:
            continue
        L[i, i] = 1.0
        for j in range(n):
            if A[i, j] and deg[j]:
                L[i, j] -= A[i, j] / math.sqrt(deg[i] * deg[j])
    return L


def jacobi_eigenvalues(M: np.ndarray, off_tol: float = JACOBI_OFF_TOL, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    A = np.array(M, dtype=np.float64)
    n = len(A)

    def off(A):
        return math.sqrt(float((np.triu(A, 1) ** 2).sum()) * 2)

    for _ in range(max_sweeps):
        if off(A) < off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-15:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                if abs(theta) > 1e100:
                    t = 1 / (2 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi sweeps did not converge")
    return np.sort(np.diag(A))


def dense_lambda2(view) -> float:
    if view.size > DENSE_LIMIT:
        raise ValueError(f"dense eigensolver refused for {view.size} > {DENSE_LIMIT} vertices")
    if view.size < 2:
        return 0.0
    return float(jacobi_eigenvalues(normalized_laplacian(view))[1])


def reference_round_step(state: GraphState, draws) -> tuple[list, list]:
    """Partition a draw batch into (accepted, rejected) from first principles.

    In-degrees are recounted from the request map; draws are grouped per
    target walking the batch back to front.  Output lists keep batch order.
    """
    items = [tuple(int(x) for x in d) for d in draws]
    if not items:
        return [], []
    cap = state.c * state.d
    indeg = {}
    for req in state.requests().values():
        if req.target is not None:
            indeg[req.target] = indeg.get(req.target, 0) + 1
    by_target = {}
    for k in range(len(items) - 1, -1, -1):
        by_target.setdefault(items[k][2], []).append(k)
    verdicts = {}
    for tgt, ks in by_target.items():
        ell = len(ks)
        accept = indeg.get(tgt, 0) + ell <= cap
        for k in ks:
            verdicts[k] = accept
    accepted = [items[k] for k in range(len(items)) if verdicts[k]]
    rejected = [items[k] for k in range(len(items)) if not verdicts[k]]
    return accepted, rejected
