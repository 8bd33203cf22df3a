# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the price-function solver, the predictive moments
and the continuous resampler.

Every function here has a numpy twin in ``_pykernels`` with the same
signature; ``kernels`` picks one at import time.  Tables are C-ordered
``(n_x, n_z)`` float64 arrays; the x grid is two uniform pieces joined at
index ``mx1 - 1`` and the z grid is uniform.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()

DEF MAX_QUAD = 64


cdef struct Grid:
    const double* x
    Py_ssize_t nx
    Py_ssize_t mx1
    double h1
    double h2
    double ih1
    double ih2
    const double* z
    Py_ssize_t nz
    double hz
    double ihz
    const double* f


cdef inline Grid _make_grid(const double[:, ::1] f, const double[::1] x,
                            Py_ssize_t mx1, const double[::1] z):
    cdef Grid g
    g.x = &x[0]
    g.nx = x.shape[0]
    g.mx1 = mx1
    g.h1 = (x[mx1 - 1] - x[0]) / (mx1 - 1)
    g.h2 = (x[g.nx - 1] - x[mx1 - 1]) / (g.nx - mx1) if g.nx > mx1 else 1.0
    g.z = &z[0]
    g.nz = z.shape[0]
    g.hz = (z[g.nz - 1] - z[0]) / (g.nz - 1)
    g.ih1 = 1.0 / g.h1
    g.ih2 = 1.0 / g.h2
    g.ihz = 1.0 / g.hz
    g.f = &f[0, 0]
    return g


cdef inline Py_ssize_t _locate_x(const Grid* g, double x) noexcept nogil:
    cdef Py_ssize_t i
    if x < g.x[g.mx1 - 1]:
        i = <Py_ssize_t>((x - g.x[0]) * g.ih1)
    else:
        i = g.mx1 - 1 + <Py_ssize_t>((x - g.x[g.mx1 - 1]) * g.ih2)
    if i < 0:
        i = 0
    elif i > g.nx - 2:
        i = g.nx - 2
    while i > 0 and x < g.x[i]:
        i -= 1
    while i < g.nx - 2 and x >= g.x[i + 1]:
        i += 1
    return i


cdef inline Py_ssize_t _locate_z(const Grid* g, double z) noexcept nogil:
    cdef Py_ssize_t j = <Py_ssize_t>((z - g.z[0]) * g.ihz)
    if j < 0:
        j = 0
    elif j > g.nz - 2:
        j = g.nz - 2
    while j > 0 and z < g.z[j]:
        j -= 1
    while j < g.nz - 2 and z >= g.z[j + 1]:
        j += 1
    return j


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline double _bilinear(const Grid* g, double x, double z) noexcept nogil:
    cdef Py_ssize_t i, j, nz = g.nz
    cdef double tx, tz, f0, f1
    x = _clamp(x, g.x[0], g.x[g.nx - 1])
    z = _clamp(z, g.z[0], g.z[nz - 1])
    i = _locate_x(g, x)
    j = _locate_z(g, z)
    tx = _clamp((x - g.x[i]) * (g.ih1 if i < g.mx1 - 1 else g.ih2), 0.0, 1.0)
    tz = _clamp((z - g.z[j]) * g.ihz, 0.0, 1.0)
    f0 = (1.0 - tz) * g.f[i * nz + j] + tz * g.f[i * nz + j + 1]
    f1 = (1.0 - tz) * g.f[(i + 1) * nz + j] + tz * g.f[(i + 1) * nz + j + 1]
    return (1.0 - tx) * f0 + tx * f1


cdef inline double _column(const Grid* g, Py_ssize_t j, double tz, Py_ssize_t i) noexcept nogil:
    # table interpolated in z only, at x node i
    return (1.0 - tz) * g.f[i * g.nz + j] + tz * g.f[i * g.nz + j + 1]


cdef inline double _invert(const Grid* g, double p, double z) noexcept nogil:
    cdef Py_ssize_t j, lo, hi, mid, n = g.nx
    cdef double tz, clo, chi
    z = _clamp(z, g.z[0], g.z[g.nz - 1])
    j = _locate_z(g, z)
    tz = _clamp((z - g.z[j]) / (g.z[j + 1] - g.z[j]), 0.0, 1.0)
    if p >= _column(g, j, tz, 0):
        return g.x[0]
    if p <= _column(g, j, tz, n - 1):
        return g.x[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if _column(g, j, tz, mid) >= p:
            lo = mid
        else:
            hi = mid
    clo = _column(g, j, tz, lo)
    chi = _column(g, j, tz, hi)
    return g.x[lo] + (clo - p) / (clo - chi) * (g.x[hi] - g.x[lo])


cdef inline void _moments(const Grid* g, double a, double b, double delta, double rho,
                          double p, double z, const double* gn, const double* gw,
                          Py_ssize_t nq, double* out) noexcept nogil:
    cdef double vals[MAX_QUAD]
    cdef double x, stor, base, zz, m = 0.0, var = 0.0, d, fl
    cdef Py_ssize_t q
    x = _invert(g, p, z)
    stor = x - (p - a) / b
    if stor < 0.0:
        stor = 0.0
    base = (1.0 - delta) * stor
    for q in range(nq):
        zz = rho * z + gn[q]
        vals[q] = _bilinear(g, base + zz, zz)
        m += gw[q] * vals[q]
    for q in range(nq):
        d = vals[q] - m
        var += gw[q] * d * d
    fl = 1e-12 * (1.0 + m * m)
    if var < fl:
        var = fl
    out[0] = m
    out[1] = var
    out[2] = x
    out[3] = stor


def solve_table(double[:, ::1] f, const double[::1] x, Py_ssize_t mx1,
                const double[::1] z, const double[:, ::1] W,
                double a, double b, double delta, double beta, int iterations):
    """Run ``iterations`` Jacobi sweeps of the price-function update in place.

    Returns the largest absolute change made by the final sweep.
    """
    cdef Py_ssize_t nx = x.shape[0], nz = z.shape[0]
    cdef Py_ssize_t i, j, k, it, ii
    cdef double[:, ::1] buf = np.empty((nx, nz))
    cdef double[::1] pdem = np.empty(nx)
    cdef Py_ssize_t[::1] klo = np.empty(nz, dtype=np.intp)
    cdef Py_ssize_t[::1] khi = np.empty(nz, dtype=np.intp)
    cdef double s, acc, q, G, v, chg, maxchg = 0.0, wmax, tx
    cdef double one_m_delta = 1.0 - delta
    cdef double xlast = x[nx - 1]
    cdef double* cur
    cdef double* nxt
    cdef double* tmp
    cdef Grid g

    for i in range(nx):
        pdem[i] = a + b * x[i]
    # terms below 1e-18 of the row maximum cannot move a double-precision sum
    for j in range(nz):
        wmax = 0.0
        for k in range(nz):
            if W[j, k] > wmax:
                wmax = W[j, k]
        klo[j] = 0
        while klo[j] < nz - 1 and W[j, klo[j]] < 1e-18 * wmax:
            klo[j] += 1
        khi[j] = nz - 1
        while khi[j] > klo[j] and W[j, khi[j]] < 1e-18 * wmax:
            khi[j] -= 1

    g = _make_grid(f, x, mx1, z)
    cur = &f[0, 0]
    nxt = &buf[0, 0]
    with nogil:
        for it in range(iterations):
            g.f = cur
            maxchg = 0.0
            for i in range(nx):
                for j in range(nz):
                    s = one_m_delta * (x[i] - (cur[i * nz + j] - a) / b)
                    acc = 0.0
                    for k in range(klo[j], khi[j] + 1):
                        q = z[k] + s
                        if q >= xlast:
                            acc += W[j, k] * cur[(nx - 1) * nz + k]
                            continue
                        if q < x[0]:
                            q = x[0]
                        ii = _locate_x(&g, q)
                        tx = (q - x[ii]) * (g.ih1 if ii < mx1 - 1 else g.ih2)
                        acc += W[j, k] * ((1.0 - tx) * cur[ii * nz + k] + tx * cur[(ii + 1) * nz + k])
                    G = beta * acc
                    v = pdem[i] if pdem[i] > G else G
                    chg = fabs(v - cur[i * nz + j])
                    if chg > maxchg:
                        maxchg = chg
                    nxt[i * nz + j] = v
            tmp = cur
            cur = nxt
            nxt = tmp
    if cur != &f[0, 0]:
        f[:, :] = buf
    return maxchg


def bilinear(const double[:, ::1] f, const double[::1] x, Py_ssize_t mx1,
             const double[::1] z, const double[::1] xq, const double[::1] zq):
    cdef Py_ssize_t n = xq.shape[0], m
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef Grid g = _make_grid(f, x, mx1, z)
    with nogil:
        for m in range(n):
            o[m] = _bilinear(&g, xq[m], zq[m])
    return out


def invert_state(const double[:, ::1] f, const double[::1] x, Py_ssize_t mx1,
                 const double[::1] z, const double[::1] p, const double[::1] zq):
    cdef Py_ssize_t n = zq.shape[0], m
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef Grid g = _make_grid(f, x, mx1, z)
    with nogil:
        for m in range(n):
            o[m] = _invert(&g, p[m], zq[m])
    return out


def predictive_moments(const double[:, ::1] f, const double[::1] x, Py_ssize_t mx1,
                       const double[::1] z, double a, double b, double delta, double rho,
                       const double[::1] p, const double[::1] zq,
                       const double[::1] gn, const double[::1] gw):
    """Predictive mean, variance, implied stock and storage for each (p, z) pair."""
    cdef Py_ssize_t n = zq.shape[0], m, nq = gn.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((4, n))
    cdef double[:, ::1] o = out
    cdef double buf[4]
    cdef Grid g = _make_grid(f, x, mx1, z)
    if nq > MAX_QUAD:
        raise ValueError("quadrature order above 64")
    with nogil:
        for m in range(n):
            _moments(&g, a, b, delta, rho, p[m], zq[m], &gn[0], &gw[0], nq, buf)
            o[0, m] = buf[0]
            o[1, m] = buf[1]
            o[2, m] = buf[2]
            o[3, m] = buf[3]
    return out


def threshold_stock(const double[:, ::1] f, const double[::1] x, Py_ssize_t mx1,
                    const double[::1] z, double a, double b, const double[::1] zq):
    """Largest x with f(x, z) <= P(x) + 1e-8 (1 + |P(x)|); -inf when there is none."""
    cdef Py_ssize_t n = zq.shape[0], m, i, j, nx = x.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef double zz, tz, P0, P1, h0, h1
    cdef Grid g = _make_grid(f, x, mx1, z)
    with nogil:
        for m in range(n):
            zz = _clamp(zq[m], g.z[0], g.z[g.nz - 1])
            j = _locate_z(&g, zz)
            tz = _clamp((zz - g.z[j]) / (g.z[j + 1] - g.z[j]), 0.0, 1.0)
            i = nx - 1
            while i >= 0:
                P0 = a + b * x[i]
                h0 = _column(&g, j, tz, i) - P0 - 1e-8 * (1.0 + fabs(P0))
                if h0 <= 0.0:
                    break
                i -= 1
            if i < 0:
                o[m] = -INFINITY
            elif i == nx - 1:
                o[m] = x[nx - 1]
            else:
                P1 = a + b * x[i + 1]
                h1 = _column(&g, j, tz, i + 1) - P1 - 1e-8 * (1.0 + fabs(P1))
                o[m] = x[i] + (-h0) / (h1 - h0) * (x[i + 1] - x[i])
    return out


def simulate_prices(const double[:, ::1] f, const double[::1] x, Py_ssize_t mx1,
                    const double[::1] z, double a, double b, double delta, double rho,
                    double p1, const double[::1] zpath, const double[::1] eta,
                    const double[::1] gn, const double[::1] gw):
    """Gaussian transition model: p[t+1] = mu(p[t], z[t]) + sigma(p[t], z[t]) * eta[t+1]."""
    cdef Py_ssize_t T = zpath.shape[0], t, nq = gn.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(T)
    cdef double[::1] p = out
    cdef double buf[4]
    cdef Grid g = _make_grid(f, x, mx1, z)
    if nq > MAX_QUAD:
        raise ValueError("quadrature order above 64")
    p[0] = p1
    with nogil:
        for t in range(T - 1):
            _moments(&g, a, b, delta, rho, p[t], zpath[t], &gn[0], &gw[0], nq, buf)
            p[t + 1] = buf[0] + sqrt(buf[1]) * eta[t + 1]
    return out


def simulate_structural(const double[:, ::1] f, const double[::1] x, Py_ssize_t mx1,
                        const double[::1] z, double a, double b, double delta,
                        double storage0, const double[::1] zpath):
    """Stock/price recursion x[t] = (1-delta) I[t-1] + z[t], p[t] = f(x[t], z[t])."""
    cdef Py_ssize_t T = zpath.shape[0], t
    cdef cnp.ndarray[double, ndim=2] out = np.empty((3, T))
    cdef double[:, ::1] o = out
    cdef double stor = storage0, xt, pt
    cdef Grid g = _make_grid(f, x, mx1, z)
    with nogil:
        for t in range(T):
            xt = (1.0 - delta) * stor + zpath[t]
            pt = _bilinear(&g, xt, zpath[t])
            stor = xt - (pt - a) / b
            if stor < 0.0:
                stor = 0.0
            o[0, t] = pt
            o[1, t] = xt
            o[2, t] = stor
    return out


def linear_bin(const double[::1] pts, const double[::1] w, double lo, double step, Py_ssize_t n):
    """Two-cell linear binning of weighted point masses onto lo + step * arange(n)."""
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n)
    cdef double[::1] c = out
    cdef Py_ssize_t m, k, npts = pts.shape[0]
    cdef double pos, fr
    with nogil:
        for m in range(npts):
            pos = (pts[m] - lo) / step
            if pos <= 0.0:
                c[0] += w[m]
            elif pos >= n - 1:
                c[n - 1] += w[m]
            else:
                k = <Py_ssize_t>pos
                fr = pos - k
                c[k] += w[m] * (1.0 - fr)
                c[k + 1] += w[m] * fr
    return out


def inverse_cdf(const double[::1] edges, const double[::1] cdf, const double[::1] u):
    """Single-pass inversion of a piecewise-linear CDF at ascending uniforms."""
    cdef Py_ssize_t n = u.shape[0], ne = edges.shape[0], m, k = 0
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef double c0, c1
    with nogil:
        for m in range(n):
            while k < ne - 2 and cdf[k + 1] <= u[m]:
                k += 1
            c0 = cdf[k]
            c1 = cdf[k + 1]
            if c1 > c0:
                o[m] = edges[k] + (u[m] - c0) / (c1 - c0) * (edges[k + 1] - edges[k])
            else:
                o[m] = edges[k]
    return out
