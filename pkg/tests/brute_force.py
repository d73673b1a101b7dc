"""Naive nested-loop reference implementation used as an oracle.

Nothing here calls numpy's FFT or einsum: derivatives come from explicit
discrete Fourier sums, and every contraction is a Python loop over indices and
grid points.  It is slow and only meant for tiny grids.
"""

import cmath
import itertools
import math


def derivative_matrix(N):
    """1D spectral d/dx on the unit circle, Nyquist mode dropped, as an N×N list."""
    ks = [k if k < N // 2 else k - N for k in range(N)]
    D = [[0j] * N for _ in range(N)]
    for x in range(N):
        for xp in range(N):
            s = 0j
            for k in ks:
                if N % 2 == 0 and k == -(N // 2):
                    continue
                s += 2j * math.pi * k * cmath.exp(2j * math.pi * k * (x - xp) / N)
            D[x][xp] = s / N
    return D


def points(n, N):
    return list(itertools.product(range(N), repeat=2 * n))


def apply_axis(f, D, axis, N):
    """(D along ``axis``) f for a dict point -> value."""
    out = {}
    for p in f:
        s = 0j
        for j in range(N):
            q = list(p)
            q[axis] = j
            s += D[p[axis]][j] * f[tuple(q)]
        out[p] = s
    return out


def dz(f, j, D, N, bar=False):
    fx = apply_axis(f, D, 2 * j, N)
    fy = apply_axis(f, D, 2 * j + 1, N)
    sgn = 1j if bar else -1j
    return {p: 0.5 * (fx[p] + sgn * fy[p]) for p in f}


def to_dict(arr, n, N):
    """grid array -> {point: value}"""
    return {p: complex(arr[p]) for p in points(n, N)}


def inverse(m):
    """Gauss-Jordan inverse of a small complex matrix given as nested lists."""
    n = len(m)
    a = [list(row) + [1.0 + 0j if i == j else 0j for j in range(n)] for i, row in enumerate(m)]
    for c in range(n):
        piv = max(range(c, n), key=lambda r: abs(a[r][c]))
        a[c], a[piv] = a[piv], a[c]
        lead = a[c][c]
        a[c] = [v / lead for v in a[c]]
        for r in range(n):
            if r != c:
                f = a[r][c]
                a[r] = [vr - f * vc for vr, vc in zip(a[r], a[c])]
    return [row[n:] for row in a]


def chern_quantities(g, n, N):
    """Γ, T, Ω, S, Ric, Q from a metric array ``g[a, b, *grid]`` by brute force.

    Returns dicts keyed by index tuples, each mapping grid point -> value, with
    the same index order as the package arrays.
    """
    D = derivative_matrix(N)
    pts = points(n, N)
    G = {(a, b): to_dict(g[a, b], n, N) for a in range(n) for b in range(n)}
    dg = {(i, a, b): dz(G[a, b], i, D, N) for i in range(n) for a in range(n) for b in range(n)}
    dbg = {(j, a, b): dz(G[a, b], j, D, N, bar=True)
           for j in range(n) for a in range(n) for b in range(n)}
    ddg = {(i, j, a, b): dz(dbg[j, a, b], i, D, N)
           for i in range(n) for j in range(n) for a in range(n) for b in range(n)}
    R = range(n)
    ginv = {}
    for p in pts:
        inv = inverse([[G[a, b][p] for b in R] for a in R])  # inv[b][a] = g^{b̄a}
        for b in R:
            for a in R:
                ginv.setdefault((b, a), {})[p] = inv[b][a]
    gamma = {(i, j, a): {p: sum(dg[i, j, b][p] * ginv[b, a][p] for b in R) for p in pts}
             for i in R for j in R for a in R}
    tor = {(i, j, k): {p: dg[i, j, k][p] - dg[j, i, k][p] for p in pts}
           for i in R for j in R for k in R}
    omega = {(i, j, pp, q): {p: -ddg[i, j, pp, q][p]
                             + sum(gamma[i, pp, a][p] * dbg[j, a, q][p] for a in R)
                             for p in pts}
             for i in R for j in R for pp in R for q in R}
    s = {(i, j): {p: sum(ginv[b, a][p] * omega[a, b, i, j][p] for a in R for b in R)
                  for p in pts} for i in R for j in R}
    ric = {(i, j): {p: sum(ginv[b, a][p] * omega[i, j, a, b][p] for a in R for b in R)
                    for p in pts} for i in R for j in R}
    # Q_{ij̄} = g^{b̄a} g^{t̄s} T_{iat̄} conj(T_{jbs̄})
    q = {(i, j): {p: sum(ginv[b, a][p] * ginv[t, s_][p] * tor[i, a, t][p]
                         * tor[j, b, s_][p].conjugate()
                         for a in R for b in R for s_ in R for t in R)
                  for p in pts} for i in R for j in R}
    return {"ginv": ginv, "gamma": gamma, "torsion": tor, "omega": omega, "s": s,
            "ric": ric, "q": q}


def max_diff(ref, arr, n, N):
    """max |ref - arr| over all index tuples and grid points."""
    worst = 0.0
    for idx, field in ref.items():
        for p, v in field.items():
            worst = max(worst, abs(v - complex(arr[idx + p])))
    return worst


def inner_product(a, b, slots, ginv, n, N):
    """Pointwise (a, b) with every slot traced by g⁻¹: loops over all index tuples."""
    R = range(n)
    r = len(slots)
    out = {}
    for p in points(n, N):
        tot = 0j
        for I in itertools.product(R, repeat=r):
            for J in itertools.product(R, repeat=r):
                w = 1.0 + 0j
                for s, i, j in zip(slots, I, J):
                    # unbarred slot i of a pairs with barred conj slot j: g^{j̄ i}
                    w *= ginv[j, i][p] if s == "u" else ginv[i, j][p]
                tot += w * a[I + p] * b[J + p].conjugate()
        out[p] = tot
    return out


def contract(a, a_slots, b, b_slots, pairing, ginv, n, N):
    """Trace slot pairs of ``a`` and ``b``; result keyed by (free indices of a, then b)."""
    R = range(n)
    ra, rb = len(a_slots), len(b_slots)
    used_a = {i for i, _ in pairing}
    used_b = {j for _, j in pairing}
    out = {}
    for I in itertools.product(R, repeat=ra):
        for J in itertools.product(R, repeat=rb):
            free = tuple(I[k] for k in range(ra) if k not in used_a) + \
                tuple(J[k] for k in range(rb) if k not in used_b)
            acc = out.setdefault(free, {})
            for p in points(n, N):
                w = 1.0 + 0j
                for ia, ib in pairing:
                    x, y = I[ia], J[ib]
                    w *= ginv[y, x][p] if a_slots[ia] == "u" else ginv[x, y][p]
                acc[p] = acc.get(p, 0j) + w * a[I + p] * b[J + p]
    return out


def h_bracket(h, a, slots, ginv, n, N):
    """h[A]: -h_{p b̄} g^{b̄c} A_{..c..} on unbarred slots, -g^{b̄c} h_{c q̄} A_{..b̄..} on barred."""
    R = range(n)
    r = len(slots)
    out = {}
    for I in itertools.product(R, repeat=r):
        field = {}
        for p in points(n, N):
            tot = 0j
            for k, s in enumerate(slots):
                for c in R:
                    J = I[:k] + (c,) + I[k + 1:]
                    for b in R:
                        if s == "u":
                            tot -= h[(I[k], b) + p] * ginv[b, c][p] * a[J + p]
                        else:
                            tot -= ginv[c, b][p] * h[(b, I[k]) + p] * a[J + p]
            field[p] = tot
        out[I] = field
    return out
