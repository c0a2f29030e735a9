"""Expansion measurements on frozen snapshots.

Snapshots are read as undirected multigraphs: a request edge is usable in
both directions and parallel edges count with multiplicity in boundaries,
volumes and degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .model import SnapshotExport

ENUMERATION_LIMIT = 20
SPECTRAL_TOL = 1e-6
SPECTRAL_MAX_MATVECS = 100_000


class SpectralConvergenceError(RuntimeError):
    def __init__(self, estimate: float, residual: float):
        self.estimate = estimate
        self.residual = residual
        super().__init__(f"lambda_2 did not converge: estimate {estimate}, residual {residual}")


@dataclass(frozen=True, eq=False)
class UndirectedView:
    """Undirected multigraph over ``vertices`` (sorted ids).

    ``u`` and ``v`` are endpoint positions into ``vertices``, one entry per
    edge, parallel edges repeated.
    """

    vertices: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @classmethod
    def from_snapshot(cls, snap: SnapshotExport) -> UndirectedView:
        births = np.asarray(snap.births)
        pos_u = np.searchsorted(births, snap.edges[:, 0])
        pos_v = np.searchsorted(births, snap.edges[:, 2])
        return cls(births.copy(), pos_u, pos_v)

    @classmethod
    def from_edges(cls, vertices, edges) -> UndirectedView:
        vertices = np.array(sorted(vertices), dtype=np.int64)
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        u, v = np.searchsorted(vertices, e[:, 0]), np.searchsorted(vertices, e[:, 1])
        if len(e) and (np.any(vertices[np.minimum(u, len(vertices) - 1)] != e[:, 0])
                       or np.any(vertices[np.minimum(v, len(vertices) - 1)] != e[:, 1])):
            raise ValueError("edge endpoint outside the vertex set")
        return cls(vertices, u, v)

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def edge_count(self) -> int:
        return len(self.u)

    @property
    def degree(self) -> np.ndarray:
        n = self.size
        return np.bincount(self.u, minlength=n) + np.bincount(self.v, minlength=n)

    @property
    def edge_pairs(self) -> list[tuple[int, int]]:
        """Edges as (vertex id, vertex id) pairs, parallel edges repeated."""
        return list(zip(self.vertices[self.u].tolist(), self.vertices[self.v].tolist()))

    def adjacency(self) -> sp.csr_matrix:
        n = self.size
        data = np.ones(2 * len(self.u))
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    def positions(self, S) -> np.ndarray:
        ids = np.asarray(sorted(set(S)), dtype=np.int64)
        pos = np.searchsorted(self.vertices, ids)
        if len(ids) and (np.any(pos >= self.size) or np.any(self.vertices[np.minimum(pos, self.size - 1)] != ids)):
            raise KeyError("subset contains vertices outside the view")
        return pos

    def mask(self, S) -> np.ndarray:
        m = np.zeros(self.size, dtype=bool)
        m[self.positions(S)] = True
        return m

    def induced(self, S) -> UndirectedView:
        keep = self.mask(S)
        e = keep[self.u] & keep[self.v]
        remap = np.cumsum(keep) - 1
        return UndirectedView(self.vertices[keep], remap[self.u[e]], remap[self.v[e]])


class ConductanceReport(NamedTuple):
    size: int
    boundary: int
    volume: int
    complement_volume: int
    phi: Fraction | None  # None when min volume is zero

    @property
    def value(self) -> float:
        return float("nan") if self.phi is None else float(self.phi)


def conductance(view: UndirectedView, S) -> ConductanceReport:
    m = view.mask(S)
    k = int(m.sum())
    if k == 0 or k == view.size:
        raise ValueError("conductance needs a nonempty proper subset")
    boundary = int(np.count_nonzero(m[view.u] != m[view.v]))
    deg = view.degree
    vol = int(deg[m].sum())
    rest = int(deg[~m].sum())
    denom = min(vol, rest)
    return ConductanceReport(k, boundary, vol, rest, Fraction(boundary, denom) if denom else None)


def outer_boundary(view: UndirectedView, S) -> frozenset:
    m = view.mask(S)
    hit = np.zeros(view.size, dtype=bool)
    hit[view.v[m[view.u]]] = True
    hit[view.u[m[view.v]]] = True
    hit &= ~m
    return frozenset(view.vertices[hit].tolist())


def min_conductance_exact(view: UndirectedView) -> tuple[Fraction | None, frozenset | None]:
    """Exact graph conductance by exhaustive enumeration (at most 20 vertices).

    Subsets are enumerated with the last vertex fixed outside S, which covers
    every cut once.  Subsets whose smaller side has zero volume are skipped.
    Returns ``(None, None)`` when no subset has a defined conductance.
    The returned set is the side with the smaller volume.
    """
    n = view.size
    if n > ENUMERATION_LIMIT:
        raise ValueError(
            f"exact enumeration refused for {n} > {ENUMERATION_LIMIT} vertices; "
            "use spectral_gap or vertex_expansion_sampled"
        )
    if n < 2:
        raise ValueError("need at least two vertices")
    masks = np.arange(1, 1 << (n - 1), dtype=np.int64)
    deg = view.degree
    vol = np.zeros(len(masks), dtype=np.int64)
    for i in range(n - 1):
        if deg[i]:
            vol += deg[i] * ((masks >> i) & 1)
    cut = np.zeros(len(masks), dtype=np.int64)
    pairs, mult = np.unique(np.sort(np.column_stack([view.u, view.v]), axis=1), axis=0, return_counts=True)
    for (a, b), w in zip(pairs.tolist(), mult.tolist()):
        cut += w * (((masks >> a) ^ (masks >> b)) & 1)
    total = int(deg.sum())
    denom = np.minimum(vol, total - vol)
    valid = np.nonzero(denom > 0)[0]
    if len(valid) == 0:
        return None, None
    ratio = cut[valid] / denom[valid]
    best = ratio.min()
    # float screening, exact tie-break among near-minimal candidates
    cand = valid[ratio <= best * (1 + 1e-9) + 1e-15]
    exact = [(Fraction(int(cut[i]), int(denom[i])), int(masks[i])) for i in cand]
    phi, mask = min(exact)
    members = [j for j in range(n) if (mask >> j) & 1]
    side = np.zeros(n, dtype=bool)
    side[members] = True
    if int(deg[side].sum()) > total - int(deg[side].sum()):
        side = ~side
    return phi, frozenset(view.vertices[side].tolist())


class ExpansionEstimate(NamedTuple):
    min_ratio: float
    argmin_size: int
    buckets: list  # (size_lo, size_hi, samples, min_ratio)


def _size_buckets(lo: int, hi: int) -> list[tuple[int, int]]:
    buckets = []
    a = lo
    while a <= hi:
        b = min(hi, 2 * a - 1) if a > 1 else 1
        buckets.append((a, b))
        a = b + 1
    return buckets


def vertex_expansion_sampled(
    view: UndirectedView, size_lo: int, size_hi: int, samples: int, rng: np.random.Generator, chunk: int = 512
) -> ExpansionEstimate:
    """Minimum |Gamma(S)|/|S| over random subsets in doubling size buckets.

    An upper bound on the true vertex expansion restricted to the size range.
    """
    n = view.size
    if size_lo < 1 or size_hi > n // 2 or size_lo > size_hi:
        raise ValueError(f"size range [{size_lo}, {size_hi}] invalid for {n} vertices")
    A = view.adjacency()
    A.data[:] = 1.0
    buckets = _size_buckets(size_lo, size_hi)
    per = [samples // len(buckets) + (1 if i < samples % len(buckets) else 0) for i in range(len(buckets))]
    best, best_size, rows = math.inf, 0, []
    for (a, b), count in zip(buckets, per):
        bucket_min = math.inf
        done = 0
        while done < count:
            k = min(chunk, count - done)
            sizes = rng.integers(a, b + 1, size=k)
            keys = rng.random((k, n))
            # the `size` smallest keys of each row form a uniform subset
            ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
            X = ranks < sizes[:, None]
            reach = (A @ X.T.astype(np.float64)) > 0
            gamma = (reach & ~X.T).sum(axis=0)
            ratio = gamma / sizes
            i = int(np.argmin(ratio))
            if ratio[i] < bucket_min:
                bucket_min = float(ratio[i])
            if ratio[i] < best:
                best, best_size = float(ratio[i]), int(sizes[i])
            done += k
        rows.append((a, b, count, bucket_min))
    return ExpansionEstimate(best, best_size, rows)


class SpectralGap(NamedTuple):
    lambda2: float
    cheeger_lo: float
    cheeger_hi: float
    connected: bool
    matvecs: int
    residual: float


def is_connected(view: UndirectedView) -> bool:
    if view.size <= 1:
        return view.size == 1
    k, _ = connected_components(view.adjacency(), directed=False)
    return k == 1


def _lanczos_top(apply, x0, basis_cap, tol_fn, max_matvecs):
    """Largest eigenpair of a symmetric operator by restarted Lanczos with full reorthogonalisation."""
    x = x0 / np.linalg.norm(x0)
    matvecs = 0
    theta, resid = 0.0, math.inf
    while matvecs < max_matvecs:
        V = [x]
        alphas, betas = [], []
        for j in range(basis_cap):
            w = apply(V[j])
            matvecs += 1
            a = float(V[j] @ w)
            alphas.append(a)
            w = w - a * V[j]
            if j:
                w -= betas[-1] * V[j - 1]
            Q = np.array(V)
            w -= Q.T @ (Q @ w)
            w -= Q.T @ (Q @ w)
            b = float(np.linalg.norm(w))
            T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
            evals, evecs = np.linalg.eigh(T)
            theta = float(evals[-1])
            resid = abs(b * evecs[-1, -1])
            if resid <= tol_fn(theta) or b < 1e-14 or matvecs >= max_matvecs:
                y = np.array(V).T @ evecs[:, -1]
                return theta, resid, matvecs, y
            betas.append(b)
            V.append(w / b)
        y = np.array(V[: len(alphas)]).T @ evecs[:, -1]
        x = y / np.linalg.norm(y)
    return theta, resid, matvecs, x


def spectral_gap(view: UndirectedView, tol: float = SPECTRAL_TOL, max_matvecs: int = SPECTRAL_MAX_MATVECS) -> SpectralGap:
    """Second-smallest eigenvalue of the normalized Laplacian plus Cheeger bounds.

    Works on M = I + D^{-1/2} A D^{-1/2} = 2I - L with the trivial eigenvector
    D^{1/2} 1 projected out; the top eigenvalue of the deflated M is 2 - lambda_2.
    Disconnected views report lambda_2 = 0.
    """
    n = view.size
    if n < 2 or not is_connected(view):
        return SpectralGap(0.0, 0.0, 0.0, False, 0, 0.0)
    deg = view.degree.astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    A = view.adjacency()
    N = sp.diags(inv_sqrt) @ A @ sp.diags(inv_sqrt)
    trivial = np.sqrt(deg)
    trivial /= np.linalg.norm(trivial)

    def apply(x):
        x = x - trivial * (trivial @ x)
        y = x + N @ x
        return y - trivial * (trivial @ y)

    x0 = np.random.default_rng(0x5EED).standard_normal(n)
    x0 -= trivial * (trivial @ x0)
    # |2 - lambda_2 - theta| <= resid, so bound resid by tol * lambda_2
    theta, resid, used, _ = _lanczos_top(
        apply, x0, min(n - 1, 150), lambda th: tol * max(2.0 - th, 1e-12), max_matvecs
    )
    lam = 2.0 - theta
    if resid > tol * max(lam, 1e-12):
        raise SpectralConvergenceError(lam, resid)
    lam = max(lam, 0.0)
    return SpectralGap(lam, lam / 2, math.sqrt(2 * lam), True, used, resid)


def pending_free_subgraph(snap: SnapshotExport) -> tuple[frozenset, UndirectedView]:
    """H_t: live vertices owning no pending request, with their induced view."""
    busy = set(snap.pending[:, 0].tolist())
    H = frozenset(b for b in snap.births.tolist() if b not in busy)
    return H, UndirectedView.from_snapshot(snap).induced(H)


def component_sizes(view: UndirectedView) -> list[int]:
    if view.size == 0:
        return []
    _, labels = connected_components(view.adjacency(), directed=False)
    return sorted(np.bincount(labels).tolist(), reverse=True)


def largest_component(view: UndirectedView) -> UndirectedView:
    if view.size == 0:
        return view
    _, labels = connected_components(view.adjacency(), directed=False)
    big = np.argmax(np.bincount(labels))
    return view.induced(view.vertices[labels == big].tolist())


def components_excluding_old(snap: SnapshotExport, age_floor: int) -> list[int]:
    """Component sizes of H_t after dropping vertices older than ``age_floor``."""
    if not 0 <= age_floor < snap.n:
        raise ValueError(f"age_floor must lie in [0, {snap.n})")
    H, view = pending_free_subgraph(snap)
    young = [v for v in sorted(H) if snap.round - v <= age_floor]
    return component_sizes(view.induced(young))
