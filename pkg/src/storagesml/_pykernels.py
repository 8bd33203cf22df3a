"""Pure numpy implementations of the compiled kernels.

Same signatures and semantics as ``_ckernels``; used when the extension is not
built or when ``STORAGESML_PURE=1`` is set.  Results agree with the compiled
path to rounding error.
"""
import numpy as np


def _locate_x(x, mx1, q):
    nx = x.shape[0]
    h1 = (x[mx1 - 1] - x[0]) / (mx1 - 1)
    h2 = (x[-1] - x[mx1 - 1]) / (nx - mx1) if nx > mx1 else 1.0
    fine = q < x[mx1 - 1]
    i = np.where(fine, np.floor((q - x[0]) / h1), mx1 - 1 + np.floor((q - x[mx1 - 1]) / h2))
    i = np.clip(i, 0, nx - 2).astype(np.intp)
    # rounding repair, mirrors the compiled while-loops
    i = np.where((i > 0) & (q < x[i]), i - 1, i)
    i = np.where((i < nx - 2) & (q >= x[np.minimum(i + 1, nx - 1)]), i + 1, i)
    return i


def _locate_z(z, q):
    nz = z.shape[0]
    hz = (z[-1] - z[0]) / (nz - 1)
    j = np.clip(np.floor((q - z[0]) / hz), 0, nz - 2).astype(np.intp)
    j = np.where((j > 0) & (q < z[j]), j - 1, j)
    j = np.where((j < nz - 2) & (q >= z[np.minimum(j + 1, nz - 1)]), j + 1, j)
    return j


def _zweights(z, zq):
    zq = np.clip(zq, z[0], z[-1])
    j = _locate_z(z, zq)
    tz = np.clip((zq - z[j]) / (z[j + 1] - z[j]), 0.0, 1.0)
    return j, tz


def _bilinear(f, x, mx1, z, xq, zq):
    xq = np.clip(xq, x[0], x[-1])
    i = _locate_x(x, mx1, xq)
    j, tz = _zweights(z, zq)
    tx = np.clip((xq - x[i]) / (x[i + 1] - x[i]), 0.0, 1.0)
    f0 = (1.0 - tz) * f[i, j] + tz * f[i, j + 1]
    f1 = (1.0 - tz) * f[i + 1, j] + tz * f[i + 1, j + 1]
    return (1.0 - tx) * f0 + tx * f1


def solve_table(f, x, mx1, z, W, a, b, delta, beta, iterations):
    nx, nz = f.shape
    pdem = a + b * x
    cur = np.array(f, dtype=float)
    kidx = np.arange(nz)
    maxchg = 0.0
    for _ in range(iterations):
        s = (1.0 - delta) * (x[:, None] - (cur - a) / b)
        q = z[None, None, :] + s[:, :, None]
        q = np.clip(q, x[0], x[-1])
        i = _locate_x(x, mx1, q)
        tx = (q - x[i]) / (x[i + 1] - x[i])
        vals = (1.0 - tx) * cur[i, kidx] + tx * cur[i + 1, kidx]
        G = beta * np.einsum("ijk,jk->ij", vals, W)
        new = np.maximum(pdem[:, None], G)
        maxchg = float(np.max(np.abs(new - cur)))
        cur = new
    f[:, :] = cur
    return maxchg


def bilinear(f, x, mx1, z, xq, zq):
    return _bilinear(np.asarray(f), x, mx1, z, np.asarray(xq, float), np.asarray(zq, float))


def invert_state(f, x, mx1, z, p, zq):
    f = np.asarray(f)
    p = np.asarray(p, float)
    j, tz = _zweights(z, np.asarray(zq, float))
    # columns interpolated in z: shape (n_query, n_x)
    cols = (1.0 - tz)[:, None] * f[:, j].T + tz[:, None] * f[:, j + 1].T
    nx = x.shape[0]
    # last index with cols >= p (cols non-increasing along x)
    ge = cols >= p[:, None]
    lo = np.where(ge.any(axis=1), nx - 1 - np.argmax(ge[:, ::-1], axis=1), 0)
    lo = np.clip(lo, 0, nx - 2)
    rows = np.arange(p.shape[0])
    clo = cols[rows, lo]
    chi = cols[rows, lo + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x[lo] + (clo - p) / (clo - chi) * (x[lo + 1] - x[lo])
    out = np.where(p >= cols[:, 0], x[0], out)
    out = np.where(p <= cols[:, -1], x[-1], out)
    return out


def predictive_moments(f, x, mx1, z, a, b, delta, rho, p, zq, gn, gw):
    if gn.shape[0] > 64:
        raise ValueError("quadrature order above 64")
    f = np.asarray(f)
    p = np.asarray(p, float)
    zq = np.asarray(zq, float)
    xs = invert_state(f, x, mx1, z, p, zq)
    stor = np.maximum(xs - (p - a) / b, 0.0)
    zz = rho * zq[:, None] + gn[None, :]
    vals = _bilinear(f, x, mx1, z, (1.0 - delta) * stor[:, None] + zz, zz)
    m = vals @ gw
    var = ((vals - m[:, None]) ** 2) @ gw
    var = np.maximum(var, 1e-12 * (1.0 + m * m))
    return np.vstack([m, var, xs, stor])


def threshold_stock(f, x, mx1, z, a, b, zq):
    f = np.asarray(f)
    j, tz = _zweights(z, np.asarray(zq, float))
    cols = (1.0 - tz)[:, None] * f[:, j].T + tz[:, None] * f[:, j + 1].T
    P = a + b * x
    h = cols - P[None, :] - 1e-8 * (1.0 + np.abs(P))[None, :]
    ok = h <= 0.0
    nx = x.shape[0]
    i = nx - 1 - np.argmax(ok[:, ::-1], axis=1)
    rows = np.arange(h.shape[0])
    i1 = np.minimum(i + 1, nx - 1)
    h0 = h[rows, i]
    h1 = h[rows, i1]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x[i] + (-h0) / (h1 - h0) * (x[i1] - x[i])
    out = np.where(i == nx - 1, x[-1], out)
    return np.where(ok.any(axis=1), out, -np.inf)


def simulate_prices(f, x, mx1, z, a, b, delta, rho, p1, zpath, eta, gn, gw):
    T = zpath.shape[0]
    p = np.empty(T)
    p[0] = p1
    for t in range(T - 1):
        mo = predictive_moments(f, x, mx1, z, a, b, delta, rho, p[t:t + 1], zpath[t:t + 1], gn, gw)
        p[t + 1] = mo[0, 0] + np.sqrt(mo[1, 0]) * eta[t + 1]
    return p


def simulate_structural(f, x, mx1, z, a, b, delta, storage0, zpath):
    T = zpath.shape[0]
    out = np.empty((3, T))
    stor = storage0
    for t in range(T):
        xt = (1.0 - delta) * stor + zpath[t]
        pt = _bilinear(f, x, mx1, z, np.array([xt]), np.array([zpath[t]]))[0]
        stor = max(xt - (pt - a) / b, 0.0)
        out[:, t] = pt, xt, stor
    return out


def linear_bin(pts, w, lo, step, n):
    pos = (np.asarray(pts) - lo) / step
    w = np.asarray(w)
    out = np.zeros(n)
    low = pos <= 0.0
    high = pos >= n - 1
    mid = ~(low | high)
    out[0] += w[low].sum()
    out[n - 1] += w[high].sum()
    k = np.floor(pos[mid]).astype(np.intp)
    fr = pos[mid] - k
    out += np.bincount(k, weights=w[mid] * (1.0 - fr), minlength=n)
    out += np.bincount(k + 1, weights=w[mid] * fr, minlength=n)
    return out


def inverse_cdf(edges, cdf, u):
    ne = edges.shape[0]
    k = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, ne - 2)
    c0 = cdf[k]
    c1 = cdf[k + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = edges[k] + (u - c0) / (c1 - c0) * (edges[k + 1] - edges[k])
    return np.where(c1 > c0, out, edges[k])
