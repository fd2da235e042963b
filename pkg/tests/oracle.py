"""Independent brute-force oracle for the transition relations.

Every type-correct state inside small bounds is laid out as rows of a
numpy array.  For each pre-state, each action definition is evaluated as a
relation against *all* candidate post-states at once, so the oracle never
constructs a successor; it only tests pairs.
"""
import itertools

import numpy as np

WHITE, BLACK = 0, 1


def _unchanged(s, t_cols, skip=()):
    ok = np.ones(len(t_cols[0]), dtype=bool)
    for k, (col, v) in enumerate(zip(t_cols, s)):
        if k not in skip:
            ok &= col == v
    return ok


class AbstractOracle:
    """Columns: active[0..n-1], pending[0..n-1], td."""

    def __init__(self, n, K, send_guard=True):
        self.n, self.send_guard = n, send_guard
        rows = [tuple(a) + tuple(p) + (td,)
                for a in itertools.product((0, 1), repeat=n)
                for p in itertools.product(range(K + 1), repeat=n)
                for td in (0, 1)]
        self.rows = rows
        self.U = np.array(rows, dtype=np.int64)

    def to_state(self, row):
        n = self.n
        return (tuple(bool(x) for x in row[:n]), tuple(int(x) for x in row[n:2 * n]), bool(row[2 * n]))

    def relation(self, s):
        """Map label -> set of post-state row indices related to row ``s``."""
        n, U = self.n, self.U
        A = lambda i: i
        P = lambda i: n + i
        TD = 2 * n
        cols = [U[:, k] for k in range(U.shape[1])]
        out = {}
        t_terminated = np.all(U[:, :n] == 0, axis=1) & np.all(U[:, n:2 * n] == 0, axis=1)
        s_terminated = not any(s[:2 * n])
        for i in range(n):
            if s[P(i)] > 0:
                m = _unchanged(s, cols, {A(i), P(i)}) & (cols[A(i)] == 1) & (cols[P(i)] == s[P(i)] - 1)
                out[("RcvMsg", (i,))] = m
        for i in range(n):
            if s[A(i)]:
                m = _unchanged(s, cols, {A(i), TD}) & (cols[A(i)] == 0)
                m &= (cols[TD] == s[TD]) | (cols[TD] == t_terminated)
                out[("Terminate", (i,))] = m
        for i in range(n):
            if s[A(i)] or not self.send_guard:
                for j in range(n):
                    m = _unchanged(s, cols, {P(j)}) & (cols[P(j)] == s[P(j)] + 1)
                    out[("SendMsg", (i, j))] = m
        if s_terminated and not s[TD]:
            out[("DetectTermination", ())] = _unchanged(s, cols, {TD}) & (cols[TD] == 1)
        me = np.all(U == np.array(s), axis=1)
        return {k: set(np.flatnonzero(v & ~me)) for k, v in out.items() if (v & ~me).any()}


class SafraOracle:
    """Columns: active[n], pending[n], color[n], counter[n], tp, tc, tq."""

    def __init__(self, n, K, C, Q):
        self.n = n
        rows = [tuple(a) + tuple(p) + tuple(c) + tuple(k) + (tp, tc, tq)
                for a in itertools.product((0, 1), repeat=n)
                for p in itertools.product(range(K + 1), repeat=n)
                for c in itertools.product((WHITE, BLACK), repeat=n)
                for k in itertools.product(range(-C, C + 1), repeat=n)
                for tp in range(n) for tc in (WHITE, BLACK) for tq in range(-Q, Q + 1)]
        self.rows = rows
        self.U = np.array(rows, dtype=np.int64)

    def to_state(self, row):
        n = self.n
        r = [int(x) for x in row]
        return (tuple(bool(x) for x in r[:n]), tuple(r[n:2 * n]), tuple(r[2 * n:3 * n]),
                tuple(r[3 * n:4 * n]), (r[4 * n], r[4 * n + 1], r[4 * n + 2]))

    def relation(self, s):
        n, U = self.n, self.U
        A = lambda i: i
        P = lambda i: n + i
        COL = lambda i: 2 * n + i
        CNT = lambda i: 3 * n + i
        TP, TC, TQ = 4 * n, 4 * n + 1, 4 * n + 2
        cols = [U[:, k] for k in range(U.shape[1])]
        out = {}
        # InitiateProbe
        if s[TP] == 0 and (s[TC] == BLACK or s[COL(0)] == BLACK or s[CNT(0)] + s[TQ] > 0):
            m = _unchanged(s, cols, {TP, TC, TQ, COL(0)})
            m &= (cols[TP] == n - 1) & (cols[TC] == WHITE) & (cols[TQ] == 0) & (cols[COL(0)] == WHITE)
            out[("InitiateProbe", ())] = m
        # PassToken(i)
        for i in range(1, n):
            if s[TP] == i and not s[A(i)]:
                tc = BLACK if (s[COL(i)] == BLACK or s[TC] == BLACK) else WHITE
                m = _unchanged(s, cols, {TP, TC, TQ, COL(i)})
                m &= (cols[TP] == i - 1) & (cols[TQ] == s[TQ] + s[CNT(i)]) & (cols[TC] == tc) & (cols[COL(i)] == WHITE)
                out[("PassToken", (i,))] = m
        # SendMsg(i, j)
        for i in range(n):
            if s[A(i)]:
                for j in range(n):
                    m = _unchanged(s, cols, {P(j), CNT(i)})
                    m &= (cols[P(j)] == s[P(j)] + 1) & (cols[CNT(i)] == s[CNT(i)] + 1)
                    out[("SendMsg", (i, j))] = m
        # RcvMsg(i)
        for i in range(n):
            if s[P(i)] > 0:
                m = _unchanged(s, cols, {P(i), CNT(i), A(i), COL(i)})
                m &= (cols[P(i)] == s[P(i)] - 1) & (cols[CNT(i)] == s[CNT(i)] - 1)
                m &= (cols[A(i)] == 1) & (cols[COL(i)] == BLACK)
                out[("RcvMsg", (i,))] = m
        # Terminate(i)
        for i in range(n):
            if s[A(i)]:
                out[("Terminate", (i,))] = _unchanged(s, cols, {A(i)}) & (cols[A(i)] == 0)
        me = np.all(U == np.array(s), axis=1)
        return {k: set(np.flatnonzero(v & ~me)) for k, v in out.items() if (v & ~me).any()}
