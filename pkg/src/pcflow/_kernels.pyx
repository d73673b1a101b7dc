# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels with the same interface as ``_kernels_py``.

Small Hermitian matrices (n <= 3) are inverted by cofactors and their
eigenvalue extremes come from the closed-form characteristic cubic, so the
per-point work never leaves C.  The Chern assembly fuses Γ, Ω, S, Ric and Q
into one pass over the grid.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, acos, cos, fabs, M_PI

cnp.import_array()

ctypedef double complex cplx

cdef int MAXN = 3


cdef inline double _re(cplx z) nogil:
    return z.real


cdef inline double _abs2(cplx z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef void _eig_extremes(cplx[:, ::1] a, int n, double *lo, double *hi) noexcept nogil:
    cdef double q, p1, p2, p, r, phi, d0, d1, d2, t
    cdef double b00, b11, b22, detb
    cdef cplx b01, b02, b12
    if n == 1:
        lo[0] = _re(a[0, 0])
        hi[0] = lo[0]
        return
    if n == 2:
        q = 0.5 * (_re(a[0, 0]) + _re(a[1, 1]))
        t = 0.5 * (_re(a[0, 0]) - _re(a[1, 1]))
        p = sqrt(t * t + _abs2(a[0, 1]))
        lo[0] = q - p
        hi[0] = q + p
        return
    d0 = _re(a[0, 0])
    d1 = _re(a[1, 1])
    d2 = _re(a[2, 2])
    p1 = _abs2(a[0, 1]) + _abs2(a[0, 2]) + _abs2(a[1, 2])
    q = (d0 + d1 + d2) / 3.0
    p2 = (d0 - q) * (d0 - q) + (d1 - q) * (d1 - q) + (d2 - q) * (d2 - q) + 2.0 * p1
    if p2 == 0.0:
        lo[0] = q
        hi[0] = q
        return
    p = sqrt(p2 / 6.0)
    b00 = (d0 - q) / p
    b11 = (d1 - q) / p
    b22 = (d2 - q) / p
    b01 = a[0, 1] / p
    b02 = a[0, 2] / p
    b12 = a[1, 2] / p
    # det of the Hermitian matrix B; real up to rounding
    detb = (b00 * b11 * b22
            + 2.0 * _re(b01 * b12 * b02.conjugate())
            - b00 * _abs2(b12) - b11 * _abs2(b02) - b22 * _abs2(b01))
    r = 0.5 * detb
    if r <= -1.0:
        phi = M_PI / 3.0
    elif r >= 1.0:
        phi = 0.0
    else:
        phi = acos(r) / 3.0
    hi[0] = q + 2.0 * p * cos(phi)
    lo[0] = q + 2.0 * p * cos(phi + 2.0 * M_PI / 3.0)


cdef int _inverse(cplx[:, ::1] a, cplx[:, ::1] out, int n) noexcept nogil:
    """out = a^{-1} by cofactors; returns 0 when the determinant vanishes."""
    cdef cplx det
    if n == 1:
        if a[0, 0] == 0:
            return 0
        out[0, 0] = 1.0 / a[0, 0]
        return 1
    if n == 2:
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if det == 0:
            return 0
        out[0, 0] = a[1, 1] / det
        out[0, 1] = -a[0, 1] / det
        out[1, 0] = -a[1, 0] / det
        out[1, 1] = a[0, 0] / det
        return 1
    out[0, 0] = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    out[0, 1] = a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]
    out[0, 2] = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    out[1, 0] = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    out[1, 1] = a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
    out[1, 2] = a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]
    out[2, 0] = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    out[2, 1] = a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]
    out[2, 2] = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    det = a[0, 0] * out[0, 0] + a[0, 1] * out[1, 0] + a[0, 2] * out[2, 0]
    if det == 0:
        return 0
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[i, j] = out[i, j] / det
    return 1


def herm_inverse_eig(g):
    """Pointwise inverse and global eigenvalue extremes of a Hermitian field."""
    cdef int n = g.shape[0]
    if n > MAXN:
        from . import _kernels_py
        return _kernels_py.herm_inverse_eig(g)
    grid = g.shape[2:]
    cdef cplx[:, :, ::1] gv = np.ascontiguousarray(g, dtype=np.complex128).reshape(n, n, -1)
    cdef Py_ssize_t P = gv.shape[2]
    out = np.empty((n, n, P), dtype=np.complex128)
    cdef cplx[:, :, ::1] ov = out
    cdef cplx[:, ::1] a = np.empty((n, n), dtype=np.complex128)
    cdef cplx[:, ::1] inv = np.empty((n, n), dtype=np.complex128)
    cdef double lo = np.inf, hi = -np.inf, l, h
    cdef Py_ssize_t x
    cdef int i, j, ok = 1
    with nogil:
        for x in range(P):
            for i in range(n):
                for j in range(n):
                    a[i, j] = gv[i, j, x]
            _eig_extremes(a, n, &l, &h)
            if l < lo:
                lo = l
            if h > hi:
                hi = h
            if _inverse(a, inv, n) == 0:
                ok = 0
                break
            for i in range(n):
                for j in range(n):
                    ov[i, j, x] = inv[i, j]
    if not ok:
        raise np.linalg.LinAlgError("Singular matrix")
    return out.reshape((n, n) + grid), float(lo), float(hi)


def _flat(arr, int rank, int n):
    return np.ascontiguousarray(arr, dtype=np.complex128).reshape((n,) * rank + (-1,))


cdef inline void _load(const double *src, Py_ssize_t m, Py_ssize_t P, Py_ssize_t x,
                       double *re, double *im) noexcept nogil:
    cdef Py_ssize_t c
    for c in range(m):
        re[c] = src[2 * (c * P + x)]
        im[c] = src[2 * (c * P + x) + 1]


cdef inline void _store(double *dst, Py_ssize_t m, Py_ssize_t P, Py_ssize_t x,
                        const double *re, const double *im) noexcept nogil:
    cdef Py_ssize_t c
    for c in range(m):
        dst[2 * (c * P + x)] = re[c]
        dst[2 * (c * P + x) + 1] = im[c]


def chern_bundle(ginv, dg, dbg, ddg):
    """Γ, Ω (expanded form), S, Ric and Q at every grid point.

    Each point is handled independently: its components are gathered into
    small local arrays, combined there and scattered back.
    """
    cdef int n = ginv.shape[0]
    if n > MAXN:
        from . import _kernels_py
        return _kernels_py.chern_bundle(ginv, dg, dbg, ddg)
    grid = ginv.shape[2:]
    G_a, D_a, DB_a, DD_a = _flat(ginv, 2, n), _flat(dg, 3, n), _flat(dbg, 3, n), _flat(ddg, 4, n)
    cdef Py_ssize_t P = G_a.shape[2]  # wraparound is off: no negative indices
    gamma_a = np.empty((n, n, n, P), dtype=np.complex128)
    omega_a = np.empty((n, n, n, n, P), dtype=np.complex128)
    s_a = np.empty((n, n, P), dtype=np.complex128)
    ric_a = np.empty((n, n, P), dtype=np.complex128)
    q_a = np.empty((n, n, P), dtype=np.complex128)
    cdef const double *G = <double *> cnp.PyArray_DATA(G_a)
    cdef const double *D = <double *> cnp.PyArray_DATA(D_a)
    cdef const double *DB = <double *> cnp.PyArray_DATA(DB_a)
    cdef const double *DD = <double *> cnp.PyArray_DATA(DD_a)
    cdef double *gam_o = <double *> cnp.PyArray_DATA(gamma_a)
    cdef double *om_o = <double *> cnp.PyArray_DATA(omega_a)
    cdef double *s_o = <double *> cnp.PyArray_DATA(s_a)
    cdef double *ric_o = <double *> cnp.PyArray_DATA(ric_a)
    cdef double *q_o = <double *> cnp.PyArray_DATA(q_a)
    cdef double gr[9], gi[9], dr[27], di[27], br[27], bi[27]
    cdef double ddr[81], ddi[81], omr[81], omi[81]
    cdef double cr[27], ci[27], tr[27], ti[27], ur[27], ui[27], wr[27], wi[27]
    cdef double sr[9], si[9], rr[9], ri[9], qr[9], qi[9]
    cdef double xr, xi, yr, yi, accr, acci
    cdef int i, j, p, k, a, b
    cdef int n2 = n * n, n3 = n * n * n, n4 = n * n * n * n
    cdef Py_ssize_t x
    with nogil:
        for x in range(P):
            _load(G, n2, P, x, gr, gi)
            _load(D, n3, P, x, dr, di)
            _load(DB, n3, P, x, br, bi)
            _load(DD, n4, P, x, ddr, ddi)
            # Γ_{ij}^a = ∂_i g_{jb̄} g^{b̄a}
            for i in range(n):
                for j in range(n):
                    for a in range(n):
                        accr = 0.0
                        acci = 0.0
                        for b in range(n):
                            xr = dr[i * n2 + j * n + b]
                            xi = di[i * n2 + j * n + b]
                            yr = gr[b * n + a]
                            yi = gi[b * n + a]
                            accr += xr * yr - xi * yi
                            acci += xr * yi + xi * yr
                        cr[i * n2 + j * n + a] = accr
                        ci[i * n2 + j * n + a] = acci
            # Ω_{ij̄pk̄} = -∂_i∂_{j̄} g_{pk̄} + Γ_{ip}^a ∂_{j̄} g_{ak̄}
            for i in range(n):
                for j in range(n):
                    for p in range(n):
                        for k in range(n):
                            accr = -ddr[i * n3 + j * n2 + p * n + k]
                            acci = -ddi[i * n3 + j * n2 + p * n + k]
                            for a in range(n):
                                xr = cr[i * n2 + p * n + a]
                                xi = ci[i * n2 + p * n + a]
                                yr = br[j * n2 + a * n + k]
                                yi = bi[j * n2 + a * n + k]
                                accr += xr * yr - xi * yi
                                acci += xr * yi + xi * yr
                            omr[i * n3 + j * n2 + p * n + k] = accr
                            omi[i * n3 + j * n2 + p * n + k] = acci
            # S_{ij̄} = g^{b̄a} Ω_{ab̄ij̄}, Ric_{ij̄} = g^{b̄a} Ω_{ij̄ab̄}
            for i in range(n):
                for j in range(n):
                    sr[i * n + j] = 0.0
                    si[i * n + j] = 0.0
                    rr[i * n + j] = 0.0
                    ri[i * n + j] = 0.0
                    for a in range(n):
                        for b in range(n):
                            xr = gr[b * n + a]
                            xi = gi[b * n + a]
                            yr = omr[a * n3 + b * n2 + i * n + j]
                            yi = omi[a * n3 + b * n2 + i * n + j]
                            sr[i * n + j] += xr * yr - xi * yi
                            si[i * n + j] += xr * yi + xi * yr
                            yr = omr[i * n3 + j * n2 + a * n + b]
                            yi = omi[i * n3 + j * n2 + a * n + b]
                            rr[i * n + j] += xr * yr - xi * yi
                            ri[i * n + j] += xr * yi + xi * yr
            # T_{iab̄} = ∂_i g_{ab̄} - ∂_a g_{ib̄}, raised: T_{ia}^k = T_{iab̄} g^{b̄k}
            for i in range(n):
                for a in range(n):
                    for b in range(n):
                        tr[i * n2 + a * n + b] = dr[i * n2 + a * n + b] - dr[a * n2 + i * n + b]
                        ti[i * n2 + a * n + b] = di[i * n2 + a * n + b] - di[a * n2 + i * n + b]
            for i in range(n):
                for a in range(n):
                    for k in range(n):
                        accr = 0.0
                        acci = 0.0
                        for b in range(n):
                            xr = tr[i * n2 + a * n + b]
                            xi = ti[i * n2 + a * n + b]
                            yr = gr[b * n + k]
                            yi = gi[b * n + k]
                            accr += xr * yr - xi * yi
                            acci += xr * yi + xi * yr
                        ur[i * n2 + a * n + k] = accr
                        ui[i * n2 + a * n + k] = acci
            # w_{ib̄}^k = g^{b̄a} T_{ia}^k, then Q_{ij̄} = w_{ib̄}^k conj(T_{jbk̄})
            for i in range(n):
                for b in range(n):
                    for k in range(n):
                        accr = 0.0
                        acci = 0.0
                        for a in range(n):
                            xr = gr[b * n + a]
                            xi = gi[b * n + a]
                            yr = ur[i * n2 + a * n + k]
                            yi = ui[i * n2 + a * n + k]
                            accr += xr * yr - xi * yi
                            acci += xr * yi + xi * yr
                        wr[i * n2 + b * n + k] = accr
                        wi[i * n2 + b * n + k] = acci
            for i in range(n):
                for j in range(n):
                    accr = 0.0
                    acci = 0.0
                    for b in range(n):
                        for k in range(n):
                            xr = wr[i * n2 + b * n + k]
                            xi = wi[i * n2 + b * n + k]
                            yr = tr[j * n2 + b * n + k]
                            yi = -ti[j * n2 + b * n + k]
                            accr += xr * yr - xi * yi
                            acci += xr * yi + xi * yr
                    qr[i * n + j] = accr
                    qi[i * n + j] = acci
            _store(gam_o, n3, P, x, cr, ci)
            _store(om_o, n4, P, x, omr, omi)
            _store(s_o, n2, P, x, sr, si)
            _store(ric_o, n2, P, x, rr, ri)
            _store(q_o, n2, P, x, qr, qi)
    shape = lambda arr, r: arr.reshape((n,) * r + grid)
    return (shape(gamma_a, 3), shape(omega_a, 4), shape(s_a, 2), shape(ric_a, 2),
            shape(q_a, 2))
