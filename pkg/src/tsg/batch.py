"""Many independent TSG trials advanced in lockstep.

Churn is deterministic, so every trial shares the same live set; only the
edge arrays carry a trial axis.  Each trial keeps its own generator and
consumes it exactly as :func:`tsg.raes.step` would, so trial ``b`` of a batch
reproduces a single-engine run with the same seed bit for bit.  Lifetime
counters are not tracked here.
"""

from __future__ import annotations

import numpy as np

from .model import NO_REQUEST, PENDING, InvariantError, SnapshotExport


class BatchState:
    def __init__(self, n: int, d: int, c: int, rngs):
        self.n, self.d, self.c = n, d, c
        self.rngs = list(rngs)
        self.size = len(self.rngs)
        self.round = 0
        n1 = n + 1
        self.birth = np.full(n1, -1, dtype=np.int64)
        self.alive = np.zeros(n1, dtype=bool)
        self.target = np.full((self.size, n1, d), NO_REQUEST, dtype=np.int32)
        self.in_degree = np.zeros((self.size, n1), dtype=np.int32)
        self.out_degree = np.zeros((self.size, n1), dtype=np.int32)

    @property
    def cap(self):
        return self.c * self.d

    @property
    def oldest(self):
        return max(1, self.round - self.n + 1)

    @property
    def live_count(self):
        return min(self.round, self.n)

    def step(self) -> np.ndarray:
        """Advance every trial by one round; return per-trial queue sizes."""
        n1, d, B = self.n + 1, self.d, self.size
        t = self.round = self.round + 1
        if t >= self.n + 1:
            gone = t - self.n
            s = gone % n1
            self.alive[s] = False
            row = self.target[:, s, :]
            b_idx, i_idx = np.nonzero(row >= 0)
            if len(b_idx):
                flat = b_idx * n1 + row[b_idx, i_idx] % n1
                self.in_degree.reshape(-1)[:] -= np.bincount(flat, minlength=B * n1).astype(np.int32)
            self.target[:, s, :] = NO_REQUEST
            self.out_degree[:, s] = 0
            fb, fs, fi = np.nonzero(self.target == gone)
            self.target[fb, fs, fi] = PENDING
            if len(fb):
                self.out_degree.reshape(-1)[:] -= np.bincount(fb * n1 + fs, minlength=B * n1).astype(np.int32)
            self.in_degree[:, s] = 0
        s = t % n1
        self.birth[s] = t
        self.alive[s] = True
        self.target[:, s, :] = PENDING
        self.in_degree[:, s] = 0
        self.out_degree[:, s] = 0

        qb, qs, qi = np.nonzero(self.target == PENDING)
        owners = self.birth[qs]
        order = np.lexsort((qi, owners, qb))
        qb, qs, qi, owners = qb[order], qs[order], qi[order], owners[order]
        counts = np.bincount(qb, minlength=B)
        m = self.live_count
        if m < 2 or len(qb) == 0:
            return counts
        draws = [self.rngs[b].integers(0, m - 1, size=q) for b, q in enumerate(counts.tolist()) if q]
        tgt = self.oldest + np.concatenate(draws)
        tgt += tgt >= owners
        ft = qb * n1 + tgt % n1
        ell = np.bincount(ft, minlength=B * n1)
        indeg = self.in_degree.reshape(-1)
        ok = (indeg <= self.cap - ell) & (ell > 0)
        acc = ok[ft]
        if acc.any():
            self.target[qb[acc], qs[acc], qi[acc]] = tgt[acc]
            indeg += np.where(ok, ell, 0).astype(np.int32)
            self.out_degree.reshape(-1)[:] += np.bincount(qb[acc] * n1 + qs[acc], minlength=B * n1).astype(np.int32)
        if self.out_degree.max() > d or self.in_degree.max() > self.cap:
            raise InvariantError("degree caps", f"batch round {t}")
        return counts

    def run(self, rounds: int):
        for _ in range(rounds):
            self.step()

    def live(self) -> np.ndarray:
        if self.round == 0:
            return np.zeros(0, dtype=np.int64)
        return np.arange(self.oldest, self.round + 1, dtype=np.int64)

    def destination(self, owner: int, index: int) -> np.ndarray:
        """X_t(r) for every trial; -1 where the request is pending."""
        return self.target[:, owner % (self.n + 1), index].astype(np.int64)

    def freeze(self, b: int) -> SnapshotExport:
        live = self.live()
        rows = self.target[b, live % (self.n + 1)].astype(np.int64)
        owners = np.repeat(live, self.d)
        index = np.tile(np.arange(self.d, dtype=np.int64), len(live))
        flat = rows.reshape(-1)
        conn = flat >= 0
        return SnapshotExport(
            self.n,
            self.d,
            self.c,
            self.round,
            live,
            np.column_stack([owners[conn], index[conn], flat[conn]]),
            np.column_stack([owners[~conn], index[~conn]]),
        )
