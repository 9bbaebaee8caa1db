"""Exact Haar-average oracle built on Weingarten calculus at small moment order.

Averages of products of Haar-unitary matrix entries reduce to sums over pairs
of permutations weighted by Weingarten functions.  This module computes the
Weingarten table exactly (rational arithmetic, Gram inversion on the class
algebra of S_M), evaluates arbitrary entry-moment patterns, and enumerates two
closed families used as ground truth by the Monte Carlo suites:

* the exact ensemble-averaged spectral form factor at small integer times,
* the exact purity moments of the evolution with a fresh unitary per step.

Permutations are index tuples ``p`` with ``p[i]`` the image of ``i``; cycle
types are descending tuples of cycle lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations

import numpy as np

from .ensemble import DiagonalField

__all__ = [
    "CycleType",
    "WeingartenTable",
    "weingarten_table",
    "haar_moment_oracle",
    "exact_sff_small_t",
    "exact_purity_moment_fresh",
]

CycleType = tuple  # descending tuple of positive ints summing to the order M


def compose(p, q):
    """(p o q)(i) = p[q[i]]."""
    return tuple(p[qi] for qi in q)


def inverse(p):
    inv = [0] * len(p)
    for i, pi in enumerate(p):
        inv[pi] = i
    return tuple(inv)


def cycle_type(p) -> CycleType:
    seen = [False] * len(p)
    lens = []
    for i in range(len(p)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        lens.append(length)
    return tuple(sorted(lens, reverse=True))


def n_cycles(p) -> int:
    return len(cycle_type(p))


def transpositions(ct: CycleType) -> int:
    """|sigma| = minimal number of pairwise transpositions: M - #cycles."""
    return sum(ct) - len(ct)


def _solve_exact(a, b):
    """Gaussian elimination over Fractions for a small square system."""
    n = len(b)
    m = [[Fraction(x) for x in row] + [Fraction(bi)] for row, bi in zip(a, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        inv_p = 1 / m[col][col]
        m[col] = [x * inv_p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


@dataclass(frozen=True)
class WeingartenTable:
    """Weingarten values for U(dim) at moment order M, keyed by cycle type."""

    dim: int
    order: int
    values: dict

    def wg(self, perm_or_type) -> Fraction:
        key = perm_or_type
        if not isinstance(key, tuple) or (key and not isinstance(key[0], int)):
            raise TypeError("expected a permutation tuple or cycle type")
        if len(key) == self.order and sorted(key) == list(range(self.order)):
            key = cycle_type(key)
        return self.values[tuple(sorted(key, reverse=True))]

    def wg_float(self, perm_or_type) -> float:
        return float(self.wg(perm_or_type))


def weingarten_table(dim: int, order: int) -> WeingartenTable:
    """Exact Weingarten table via Gram inversion on the class algebra of S_M.

    The defining property is the orthogonality relation
    ``sum_tau Wg(sigma tau^-1; D) * D^{#cycles(tau pi^-1)} = delta_{sigma,pi}``.
    Since both the Gram weights and Wg are class functions, the full |S_M|^2
    system collapses to one exact rational solve on cycle-type classes.
    """
    if order < 1 or order > 6:
        raise ValueError("moment order must be in 1..6")
    if dim < order:
        raise ValueError(
            f"dim {dim} < order {order}: Gram matrix is singular in this regime"
        )
    perms = list(permutations(range(order)))
    classes: dict[CycleType, tuple] = {}
    for p in perms:
        classes.setdefault(cycle_type(p), p)
    types = sorted(classes, reverse=True)
    # row a: sum_tau Wg(type(rep_a tau^-1)) * D^{#cycles(tau)} = delta_{rep_a, id}
    a_mat = [[0] * len(types) for _ in types]
    rhs = []
    index = {ct: i for i, ct in enumerate(types)}
    for ai, ct in enumerate(types):
        rep = classes[ct]
        for tau in perms:
            b = cycle_type(compose(rep, inverse(tau)))
            a_mat[ai][index[b]] += dim ** n_cycles(tau)
        rhs.append(1 if ct == (1,) * order else 0)
    sol = _solve_exact(a_mat, rhs)
    return WeingartenTable(dim=dim, order=order, values=dict(zip(types, sol)))


def haar_moment_oracle(dim, pattern, table: WeingartenTable | None = None):
    """Exact Haar average of prod_m U[i_m, j_m] * conj(U[i*_m, j*_m]).

    ``pattern`` is ``(i, j, i_star, j_star)``, four index sequences.  Averages
    with different numbers of U and U* factors vanish identically, so unequal
    sequence lengths return exactly 0.
    """
    i, j, i_star, j_star = (list(s) for s in pattern)
    if not (len(i) == len(j) and len(i_star) == len(j_star)):
        raise ValueError("row/column index sequences must pair up")
    if len(i) != len(i_star):
        return 0.0
    order = len(i)
    if order == 0:
        return 1.0
    if table is None:
        table = weingarten_table(dim, order)
    if table.dim != dim or table.order != order:
        raise ValueError("table does not match (dim, order)")
    perms = list(permutations(range(order)))
    sigmas = [s for s in perms if all(i[m] == i_star[s[m]] for m in range(order))]
    taus = [t for t in perms if all(j[m] == j_star[t[m]] for m in range(order))]
    total = Fraction(0)
    for s in sigmas:
        for t in taus:
            total += table.wg(compose(s, inverse(t)))
    return float(total)


def _log_trace_powers(zeta: DiagonalField, max_power: int) -> list[float]:
    """log Tr[zeta^(2n)] for n = 1..max_power (index 0 unused)."""
    out = [0.0] * (max_power + 1)
    for n in range(1, max_power + 1):
        out[n] = zeta.log_trace_power(2 * n)
    return out


def _loop_weight(p, log_tr) -> float:
    """log prod_k Tr[zeta^(2 n_k)] over the cycles n_k of p."""
    return sum(log_tr[length] for length in cycle_type(p))


def exact_sff_small_t(zeta: DiagonalField, t: int) -> float:
    """Exact ensemble-averaged spectral form factor at integer time t <= 5.

    Enumerates permutation pairs (sigma, tau) in S_t x S_t; the basis-state
    pairing pattern is governed by the cycles of sigma T^-1 tau^-1 T with T the
    one-step translation, and a cycle of length n contributes Tr[zeta^(2n)].
    At h = 0 the sum collapses to the number of cyclic permutations, i.e. t.
    """
    if t < 1 or t > 5:
        raise ValueError("exact SFF enumeration supports 1 <= t <= 5")
    if zeta.dim < t:
        raise ValueError("need D >= t for the Weingarten table")
    table = weingarten_table(zeta.dim, t)
    log_tr = _log_trace_powers(zeta, t)
    shift = tuple((i + 1) % t for i in range(t))
    shift_inv = inverse(shift)
    perms = list(permutations(range(t)))
    total = 0.0
    for s in perms:
        for tau in perms:
            pairing = compose(s, compose(shift_inv, compose(inverse(tau), shift)))
            total += table.wg_float(compose(s, inverse(tau))) * math.exp(
                _loop_weight(pairing, log_tr)
            )
    return total


def _replica_shift(m: int, n: int):
    """Boundary permutation at the last step: (i, j) -> (i - 1 mod m, j)."""
    out = [0] * (m * n)
    for j in range(n):
        for i in range(m):
            out[j * m + i] = j * m + ((i - 1) % m)
    return tuple(out)


def exact_purity_moment_fresh(zeta: DiagonalField, t: int, m: int = 2, n: int = 1) -> float:
    """Exact <Tr[(X(t) X(t)^dag)^m]^n> for the fresh-unitary evolution X(t).

    With an independent Haar unitary at every step the average factorizes over
    steps: each of the t-1 interior unitaries carries a permutation pair
    (sigma_l, tau_l) in S_mn (the innermost unitary cancels), basis-state loops
    at step boundaries contribute Tr[zeta^(2n_k)] factors, and the whole sum is
    a (t-1)-fold product of one fixed transfer kernel over S_mn, anchored by
    the identity pairing at the first layer and the replica shift at the last.
    """
    if m < 1 or n < 1 or m > 2 or n > 2 or m * n > 4:
        raise ValueError("supported replica sizes: m, n in {1, 2} with m*n <= 4")
    if t < 1 or t > 6:
        raise ValueError("supported times: 1 <= t <= 6")
    mn = m * n
    if zeta.dim < mn:
        raise ValueError("need D >= m*n for the Weingarten table")
    log_tr = _log_trace_powers(zeta, mn)
    perms = list(permutations(range(mn)))
    ident = tuple(range(mn))
    end = _replica_shift(m, n)
    if t == 1:
        return math.exp(_loop_weight(compose(end, inverse(ident)), log_tr))
    table = weingarten_table(zeta.dim, mn)
    npe = len(perms)
    w = np.array([math.exp(_loop_weight(p, log_tr)) for p in perms])
    # kernel[prev, cur] = sum_sigma w(sigma prev^-1) Wg(sigma cur^-1)
    kernel = np.zeros((npe, npe))
    wg_vals = {}
    for ci, cur in enumerate(perms):
        cur_inv = inverse(cur)
        for si, s in enumerate(perms):
            wg_vals[(si, ci)] = table.wg_float(compose(s, cur_inv))
    w_of = np.zeros((npe, npe))
    for pi, prev in enumerate(perms):
        prev_inv = inverse(prev)
        for si, s in enumerate(perms):
            w_of[si, pi] = math.exp(_loop_weight(compose(s, prev_inv), log_tr))
    for pi in range(npe):
        for ci in range(npe):
            kernel[pi, ci] = sum(w_of[si, pi] * wg_vals[(si, ci)] for si in range(npe))
    vec = np.zeros(npe)
    vec[perms.index(ident)] = 1.0
    for _ in range(t - 1):
        vec = vec @ kernel
    closing = np.array(
        [math.exp(_loop_weight(compose(end, inverse(p)), log_tr)) for p in perms]
    )
    return float(vec @ closing)
