"""Hot numerical loops, compiled with numba when available."""
import numpy as np

from ._accel import HAVE_NUMBA, njit

__all__ = [
    "HAVE_NUMBA",
    "resultant_array",
    "fan_extend",
    "b_squared_grid",
    "sharkfin_grid",
    "move_xz",
    "move_yz",
    "move_xt",
    "move_yt",
    "ball_vertices",
    "ball_size",
]


def _resultant_numpy(t):
    a2 = t.real * t.real + t.imag * t.imag
    with np.errstate(over="ignore", invalid="ignore"):
        out = a2 * a2 - 8.0 * (t * t * t).real + 18.0 * a2 - 27.0
    return np.where(np.abs(t) > 1e60, np.inf, out)


def _b_squared_numpy(P, r, s):
    lam = r[:, None] * np.exp(1j * s[None, :])
    lb = np.conj(lam)
    x = lam + lb / lam + 1.0 / lb
    ax = np.abs(x) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return (P + 3.0 - ax) / (ax - 4.0 * (x * lam / lb).real + 3.0)


def _sharkfin_numpy(r, s):
    r2 = (r * r)[:, None]
    den = (r2 + 1.0) * (r2 - 2.0 * r[:, None] * np.cos(3.0 * s[None, :]) + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 - 2.0 * (r2 - 1.0) ** 2 / den


@njit(cache=True)
def _resultant_jit(t):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        if abs(t[i]) > 1e60:
            out[i] = np.inf
            continue
        a2 = t[i].real * t[i].real + t[i].imag * t[i].imag
        out[i] = a2 * a2 - 8.0 * (t[i] * t[i] * t[i]).real + 18.0 * a2 - 27.0
    return out


@njit(cache=True)
def fan_extend(x, u_prev, u_cur, u_next, n_back, n_fwd):
    """Run u[n+1] = x u[n] - conj(x) u[n-1] + u[n-2] both ways.

    The returned array holds u_{-n_back-1} ... u_{n_fwd+1}; the seed
    ``u_cur`` sits at index ``n_back + 1``.
    """
    xb = np.conj(x)
    n = n_back + n_fwd + 3
    u = np.empty(n, dtype=np.complex128)
    k = n_back + 1
    u[k - 1] = u_prev
    u[k] = u_cur
    u[k + 1] = u_next
    for i in range(k + 2, n):
        u[i] = x * u[i - 1] - xb * u[i - 2] + u[i - 3]
    for i in range(k - 2, -1, -1):
        u[i] = u[i + 3] - x * u[i + 2] + xb * u[i + 1]
    return u


@njit(cache=True, error_model="numpy")
def _b_squared_jit(P, r, s):
    """|B|^2 = (P + 3 - |x|^2) / (|x|^2 - 4 Re(x lam / conj(lam)) + 3) on an r x s grid."""
    out = np.empty((r.shape[0], s.shape[0]))
    for i in range(r.shape[0]):
        for j in range(s.shape[0]):
            lam = r[i] * np.exp(1j * s[j])
            lb = np.conj(lam)
            x = lam + lb / lam + 1.0 / lb
            ax = x.real * x.real + x.imag * x.imag
            den = ax - 4.0 * (x * lam / lb).real + 3.0
            out[i, j] = (P + 3.0 - ax) / den
    return out


@njit(cache=True, error_model="numpy")
def _sharkfin_jit(r, s):
    out = np.empty((r.shape[0], s.shape[0]))
    for i in range(r.shape[0]):
        r2 = r[i] * r[i]
        for j in range(s.shape[0]):
            den = (r2 + 1.0) * (r2 - 2.0 * r[i] * np.cos(3.0 * s[j]) + 1.0)
            out[i, j] = 1.0 - 2.0 * (r2 - 1.0) ** 2 / den
    return out


resultant_array = _resultant_jit if HAVE_NUMBA else _resultant_numpy
b_squared_grid = _b_squared_jit if HAVE_NUMBA else _b_squared_numpy
sharkfin_grid = _sharkfin_jit if HAVE_NUMBA else _sharkfin_numpy


# Moves between adjacent vertices of the edge graph.  A vertex carries the
# traces (x, y, z, t) of (a, b, ab, ab^-1) for an ordered basis (a, b).  Every
# move returns the quadruple of the new basis with the newly reached region in
# the third slot and the region shared with the old vertex in the fourth.


@njit(cache=True)
def move_xz(x, y, z, t):
    # (a, ab): new region a^2 b, shared region b^-1
    return x, z, np.conj(t - x * np.conj(y) + np.conj(x * z)), np.conj(y)


@njit(cache=True)
def move_yz(x, y, z, t):
    # (ab, b): new region a b^2, shared region a
    return z, y, t - x * np.conj(y) + y * z, x


@njit(cache=True)
def move_xt(x, y, z, t):
    # (a, ab^-1): new region a^2 b^-1, shared region b
    return x, t, x * t - np.conj(x) * np.conj(y) + np.conj(z), y


@njit(cache=True)
def move_yt(x, y, z, t):
    # (ab^-1, b^-1): new region a b^-2, shared region a
    return t, np.conj(y), z - x * y + t * np.conj(y), x


def ball_size(max_dist):
    """Number of edge-graph vertices within ``max_dist`` moves of the base."""
    if max_dist <= 0:
        return 1
    return 1 + 4 * (2**max_dist - 1)


@njit(cache=True)
def _fill_ball(x, y, z, t, max_dist, slopes, quads, dist):
    slopes[0, 0] = 1
    slopes[0, 1] = 0
    slopes[0, 2] = 0
    slopes[0, 3] = 1
    quads[0, 0] = x
    quads[0, 1] = y
    quads[0, 2] = z
    quads[0, 3] = t
    dist[0] = 0
    n = 1
    head = 0
    while head < n:
        d = dist[head]
        if d >= max_dist:
            head += 1
            continue
        ap, aq, bp, bq = slopes[head, 0], slopes[head, 1], slopes[head, 2], slopes[head, 3]
        qx, qy, qz, qt = quads[head, 0], quads[head, 1], quads[head, 2], quads[head, 3]
        nmoves = 4 if head == 0 else 2
        for m in range(nmoves):
            if m == 0:
                r = move_xz(qx, qy, qz, qt)
                s = (ap, aq, ap + bp, aq + bq)
            elif m == 1:
                r = move_yz(qx, qy, qz, qt)
                s = (ap + bp, aq + bq, bp, bq)
            elif m == 2:
                r = move_xt(qx, qy, qz, qt)
                s = (ap, aq, ap - bp, aq - bq)
            else:
                r = move_yt(qx, qy, qz, qt)
                s = (ap - bp, aq - bq, -bp, -bq)
            for k in range(4):
                slopes[n, k] = s[k]
                quads[n, k] = r[k]
            dist[n] = d + 1
            n += 1
        head += 1
    return n


def _fill_ball_numpy(x, y, z, t, max_dist, slopes, quads, dist):
    """Level-synchronous version of ``_fill_ball`` with the same BFS order."""
    slopes[0] = (1, 0, 0, 1)
    quads[0] = (x, y, z, t)
    if max_dist <= 0:
        return 1
    ap, aq, bp, bq = 1, 0, 0, 1
    base = quads[0]
    kids = [move_xz(*base), move_yz(*base), move_xt(*base), move_yt(*base)]
    quads[1:5] = np.array(kids)
    slopes[1:5] = [(ap, aq, ap + bp, aq + bq), (ap + bp, aq + bq, bp, bq),
                   (ap, aq, ap - bp, aq - bq), (ap - bp, aq - bq, -bp, -bq)]
    dist[1:5] = 1
    lo, hi = 1, 5
    for d in range(2, max_dist + 1):
        q = quads[lo:hi].T
        sl = slopes[lo:hi]
        n = hi - lo
        out = slice(hi, hi + 2 * n)
        new_q = np.empty((n, 2, 4), dtype=np.complex128)
        new_q[:, 0] = np.stack(move_xz(*q), axis=1)
        new_q[:, 1] = np.stack(move_yz(*q), axis=1)
        new_s = np.empty((n, 2, 4), dtype=np.int64)
        new_s[:, 0] = np.stack([sl[:, 0], sl[:, 1], sl[:, 0] + sl[:, 2], sl[:, 1] + sl[:, 3]], axis=1)
        new_s[:, 1] = np.stack([sl[:, 0] + sl[:, 2], sl[:, 1] + sl[:, 3], sl[:, 2], sl[:, 3]], axis=1)
        quads[out] = new_q.reshape(-1, 4)
        slopes[out] = new_s.reshape(-1, 4)
        dist[out] = d
        lo, hi = hi, hi + 2 * n
    return hi


def ball_vertices(x, y, z, t, max_dist):
    """All vertices within ``max_dist`` moves of the base vertex, in BFS order.

    Returns ``(slopes, quads, dist)`` where ``slopes[i]`` is the oriented
    abelianisation ``(a_p, a_q, b_p, b_q)`` of the basis at vertex ``i``.
    """
    size = ball_size(max_dist)
    slopes = np.zeros((size, 4), dtype=np.int64)
    quads = np.zeros((size, 4), dtype=np.complex128)
    dist = np.zeros(size, dtype=np.int64)
    fill = _fill_ball if HAVE_NUMBA else _fill_ball_numpy
    fill(complex(x), complex(y), complex(z), complex(t), max_dist, slopes, quads, dist)
    return slopes, quads, dist
