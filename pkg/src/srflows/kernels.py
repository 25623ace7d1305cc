"""Hot numeric kernels.

Everything in this module is written in the numba ``nopython`` subset and is
compiled when numba is available (see :mod:`srflows._jit`).  With
``SRFLOWS_NO_NUMBA=1`` the identical source runs as plain numpy.

Catalog frames are returned as three arrays ``X, DX, D2X`` with

    X[i, j]         = j-th coefficient of field i
    DX[i, j, a]     = d X[i, j] / d q_a
    D2X[i, j, a, b] = d^2 X[i, j] / d q_a d q_b

Rows are the horizontal frame followed by the Reeb field when the model has
one.
"""
import math
import types
from typing import Callable

import numpy as np

from ._jit import njit, pyfunc

# model ids understood by frame_kernel
TORUS3 = 0
HEISENBERG = 1
MARTINET = 2
ENGEL = 3
SUSP_HYPERBOLIC = 4
SUSP_ROTATION = 5
SUSP_PARABOLIC = 6
HEISENBERG_PERTURBED = 7

# system kinds understood by system_rhs / system_jac
SYS_QUADRATIC = 0
SYS_LIE_POISSON = 1
SYS_VECTOR_FIELD = 2
SYS_LINEAR = 3
SYS_SUSPENSION_ACTION = 4

# suspension integral families
INT_HYPERBOLIC = 0
INT_ROTATION = 1
INT_PARABOLIC = 2
INT_IDENTITY = 3

_TAYLOR_ORDER = 4

# Gauss-Legendre 2-stage tableau
_SQ3 = math.sqrt(3.0) / 6.0
A11 = 0.25
A12 = 0.25 - _SQ3
A21 = 0.25 + _SQ3
A22 = 0.25


# ---------------------------------------------------------------------------
# univariate Taylor arithmetic: a[k] = k-th derivative at the base point


@njit
def _binom(n, k):
    r = 1.0
    for i in range(1, k + 1):
        r = r * (n - k + i) / i
    return r


@njit
def t_mul(a, b):
    n = a.size
    out = np.zeros(n)
    for k in range(n):
        s = 0.0
        for j in range(k + 1):
            s += _binom(k, j) * a[j] * b[k - j]
        out[k] = s
    return out


@njit
def t_div(a, b):
    n = a.size
    out = np.zeros(n)
    for k in range(n):
        s = a[k]
        for j in range(k):
            s -= _binom(k, j) * out[j] * b[k - j]
        out[k] = s / b[0]
    return out


@njit
def t_deriv(a):
    n = a.size
    out = np.zeros(n)
    for k in range(n - 1):
        out[k] = a[k + 1]
    return out


@njit
def t_sin(t, w):
    """Derivatives of sin(w t)."""
    out = np.zeros(_TAYLOR_ORDER + 1)
    for k in range(_TAYLOR_ORDER + 1):
        out[k] = w**k * math.sin(w * t + 0.5 * k * math.pi)
    return out


@njit
def t_cos(t, w):
    out = np.zeros(_TAYLOR_ORDER + 1)
    for k in range(_TAYLOR_ORDER + 1):
        out[k] = w**k * math.cos(w * t + 0.5 * k * math.pi)
    return out


@njit
def t_exp(t, w):
    out = np.zeros(_TAYLOR_ORDER + 1)
    e = math.exp(w * t)
    for k in range(_TAYLOR_ORDER + 1):
        out[k] = w**k * e
    return out


@njit
def t_var(t):
    out = np.zeros(_TAYLOR_ORDER + 1)
    out[0] = t
    out[1] = 1.0
    return out


@njit
def t_const(c):
    out = np.zeros(_TAYLOR_ORDER + 1)
    out[0] = c
    return out


@njit
def _put_fiber_field(X, DX, D2X, row, comp, tay):
    # coefficient depending on q[2] only
    X[row, comp] = tay[0]
    DX[row, comp, 2] = tay[1]
    D2X[row, comp, 2, 2] = tay[2]


# ---------------------------------------------------------------------------
# catalog frames


@njit
def frame_kernel(mid, q, prm):
    if mid == TORUS3:
        X = np.zeros((3, 3))
        DX = np.zeros((3, 3, 3))
        D2X = np.zeros((3, 3, 3, 3))
        s = math.sin(q[0])
        c = math.cos(q[0])
        X[0, 0] = 1.0
        X[1, 1] = c
        X[1, 2] = -s
        DX[1, 1, 0] = -s
        DX[1, 2, 0] = -c
        D2X[1, 1, 0, 0] = -c
        D2X[1, 2, 0, 0] = s
        # Reeb field -(sin, cos) in the (phi2, phi3) plane
        X[2, 1] = -s
        X[2, 2] = -c
        DX[2, 1, 0] = -c
        DX[2, 2, 0] = s
        D2X[2, 1, 0, 0] = s
        D2X[2, 2, 0, 0] = c
        return X, DX, D2X
    if mid == HEISENBERG:
        X = np.zeros((3, 3))
        DX = np.zeros((3, 3, 3))
        D2X = np.zeros((3, 3, 3, 3))
        X[0, 0] = 1.0
        X[0, 1] = q[2]
        DX[0, 1, 2] = 1.0
        X[1, 2] = 1.0
        X[2, 1] = -1.0
        return X, DX, D2X
    if mid == HEISENBERG_PERTURBED:
        # xi_1 rescaled by (1 + eps x2^2): breaks invariance along the Reeb field
        eps = prm[0]
        X = np.zeros((3, 3))
        DX = np.zeros((3, 3, 3))
        D2X = np.zeros((3, 3, 3, 3))
        f = 1.0 + eps * q[1] * q[1]
        df = 2.0 * eps * q[1]
        d2f = 2.0 * eps
        X[0, 0] = f
        X[0, 1] = f * q[2]
        DX[0, 0, 1] = df
        DX[0, 1, 1] = df * q[2]
        DX[0, 1, 2] = f
        D2X[0, 0, 1, 1] = d2f
        D2X[0, 1, 1, 1] = d2f * q[2]
        D2X[0, 1, 1, 2] = df
        D2X[0, 1, 2, 1] = df
        X[1, 2] = 1.0
        X[2, 1] = -1.0
        return X, DX, D2X
    if mid == MARTINET:
        X = np.zeros((2, 3))
        DX = np.zeros((2, 3, 3))
        D2X = np.zeros((2, 3, 3, 3))
        z = q[2]
        X[0, 0] = 1.0
        X[0, 1] = z * z
        DX[0, 1, 2] = 2.0 * z
        D2X[0, 1, 2, 2] = 2.0
        X[1, 2] = 1.0
        return X, DX, D2X
    if mid == ENGEL:
        X = np.zeros((2, 4))
        DX = np.zeros((2, 4, 4))
        D2X = np.zeros((2, 4, 4, 4))
        X[0, 0] = 1.0
        X[0, 1] = q[2]
        X[0, 2] = q[3]
        DX[0, 1, 2] = 1.0
        DX[0, 2, 3] = 1.0
        X[1, 3] = 1.0
        return X, DX, D2X

    # suspensions on the covering cylinder: q = (u1, u2, phi3)
    X = np.zeros((3, 3))
    DX = np.zeros((3, 3, 3))
    D2X = np.zeros((3, 3, 3, 3))
    t = q[2]
    X[1, 2] = 1.0
    if mid == SUSP_HYPERBOLIC:
        c = prm[0]
        em = t_exp(t, -c)
        ep = t_exp(t, c)
        _put_fiber_field(X, DX, D2X, 0, 0, em)
        _put_fiber_field(X, DX, D2X, 0, 1, ep)
        _put_fiber_field(X, DX, D2X, 2, 0, c * em)
        _put_fiber_field(X, DX, D2X, 2, 1, -c * ep)
    elif mid == SUSP_ROTATION:
        th = prm[0]
        cs = t_cos(t, th)
        sn = t_sin(t, th)
        _put_fiber_field(X, DX, D2X, 0, 0, cs)
        _put_fiber_field(X, DX, D2X, 0, 1, -sn)
        _put_fiber_field(X, DX, D2X, 2, 0, th * sn)
        _put_fiber_field(X, DX, D2X, 2, 1, th * cs)
    else:
        w = 2.0 * math.pi
        S = t_sin(t, w)
        C = t_cos(t, w)
        T = t_var(t)
        x1 = C - t_mul(T, S)
        x2 = S
        # v = [xi_1, xi_2] = -d/dphi3 xi_1
        v1 = -t_deriv(x1)
        v2 = -t_deriv(x2)
        den = t_const(w) + t_mul(S, S)
        a1 = t_div(S, den)
        a2 = t_div(t_mul(T, S) - C, den)
        da1 = t_deriv(a1)
        da2 = t_deriv(a2)
        # Reeb = v + b xi_1 with b fixed by i_nu d(alpha) = 0; (d alpha/dphi3)(xi_1) = 1
        b = -(t_mul(da1, v1) + t_mul(da2, v2))
        n1 = v1 + t_mul(b, x1)
        n2 = v2 + t_mul(b, x2)
        _put_fiber_field(X, DX, D2X, 0, 0, x1)
        _put_fiber_field(X, DX, D2X, 0, 1, x2)
        _put_fiber_field(X, DX, D2X, 2, 0, n1)
        _put_fiber_field(X, DX, D2X, 2, 1, n2)
    return X, DX, D2X


@njit
def parabolic_contact_coeffs(t):
    """Printed-formula contact form of the Jordan-box suspension, with derivatives.

    Returns (a, da, d2a), each of length 2: coefficients on the duals of the
    two fiber directions.
    """
    w = 2.0 * math.pi
    S = t_sin(t, w)
    C = t_cos(t, w)
    T = t_var(t)
    den = t_const(w) + t_mul(S, S)
    a1 = t_div(S, den)
    a2 = t_div(t_mul(T, S) - C, den)
    return (np.array([a1[0], a2[0]]), np.array([a1[1], a2[1]]), np.array([a1[2], a2[2]]))


# ---------------------------------------------------------------------------
# Hamiltonians quadratic in momenta


@njit
def quadratic_momentum(X, DX, D2X, w, p):
    """H = 1/2 sum_i w_i <p, X_i>^2 with phase gradient and Hessian.

    Phase vector ordering is (q, p).
    """
    nf = X.shape[0]
    m = X.shape[1]
    H = 0.0
    g = np.zeros(2 * m)
    Hs = np.zeros((2 * m, 2 * m))
    for i in range(nf):
        wi = w[i]
        if wi == 0.0:
            continue
        u = 0.0
        for j in range(m):
            u += X[i, j] * p[j]
        gq = np.zeros(m)
        for a in range(m):
            s = 0.0
            for j in range(m):
                s += DX[i, j, a] * p[j]
            gq[a] = s
        H += 0.5 * wi * u * u
        for a in range(m):
            g[a] += wi * u * gq[a]
            g[m + a] += wi * u * X[i, a]
        for a in range(m):
            for b in range(m):
                s = 0.0
                for j in range(m):
                    s += D2X[i, j, a, b] * p[j]
                Hs[a, b] += wi * (gq[a] * gq[b] + u * s)
                Hs[a, m + b] += wi * (gq[a] * X[i, b] + u * DX[i, b, a])
                Hs[m + a, m + b] += wi * X[i, a] * X[i, b]
    for a in range(m):
        for b in range(m):
            Hs[m + b, a] = Hs[a, m + b]
    return H, g, Hs


# ---------------------------------------------------------------------------
# suspension integrals as functions of the fiber momenta (p', p'')


@njit
def _flat(x):
    """exp(-x^-2) and its first two derivatives; identically zero near x = 0."""
    if x == 0.0 or x * x < 1.0 / 740.0:
        return 0.0, 0.0, 0.0
    g = math.exp(-1.0 / (x * x))
    x3 = x * x * x
    d1 = 2.0 * g / x3
    d2 = g * (4.0 / (x3 * x3) - 6.0 / (x3 * x))
    return g, d1, d2


@njit
def suspension_integrals_kernel(fam, prm, p1, p2):
    """Values, gradients and Hessians of (I2, I3) in the variables (p', p'')."""
    val = np.zeros(2)
    grad = np.zeros((2, 2))
    hess = np.zeros((2, 2, 2))
    if fam == INT_HYPERBOLIC:
        c = prm[0]
        x = p1 * p2
        val[0] = x
        grad[0, 0] = p2
        grad[0, 1] = p1
        hess[0, 0, 1] = 1.0
        hess[0, 1, 0] = 1.0
        g, g1, g2 = _flat(x)
        if g == 0.0 and g1 == 0.0:
            return val, grad, hess
        k = 2.0 * math.pi / c
        th = k * math.log(abs(p1))
        th1 = k / p1
        th2 = -k / (p1 * p1)
        s = math.sin(th)
        s1 = math.cos(th) * th1
        s2 = -math.sin(th) * th1 * th1 + math.cos(th) * th2
        G1 = g1 * p2
        G2 = g1 * p1
        G11 = g2 * p2 * p2
        G22 = g2 * p1 * p1
        G12 = g2 * p1 * p2 + g1
        val[1] = s * g
        grad[1, 0] = s1 * g + s * G1
        grad[1, 1] = s * G2
        hess[1, 0, 0] = s2 * g + 2.0 * s1 * G1 + s * G11
        hess[1, 0, 1] = s1 * G2 + s * G12
        hess[1, 1, 0] = hess[1, 0, 1]
        hess[1, 1, 1] = s * G22
    elif fam == INT_ROTATION:
        k = int(prm[0])
        val[0] = p1 * p1 + p2 * p2
        grad[0, 0] = 2.0 * p1
        grad[0, 1] = 2.0 * p2
        hess[0, 0, 0] = 2.0
        hess[0, 1, 1] = 2.0
        # Re z^k, with d/dp' = k z^(k-1), d/dp'' = i k z^(k-1)
        z = complex(p1, p2)
        zk = z**k
        dk = k * z ** (k - 1) if k >= 1 else 0.0 * z
        d2 = k * (k - 1) * z ** (k - 2) if k >= 2 else 0.0 * z
        val[1] = zk.real
        grad[1, 0] = dk.real
        grad[1, 1] = (1j * dk).real
        hess[1, 0, 0] = d2.real
        hess[1, 0, 1] = (1j * d2).real
        hess[1, 1, 0] = (1j * d2).real
        hess[1, 1, 1] = (-d2).real
    elif fam == INT_PARABOLIC:
        # invariant fiber momentum is p' (dual to the eigendirection); for a
        # monodromy with trace -2 only its square survives the sign flip
        if prm.size > 0 and prm[0] < 0.0:
            val[0] = 0.5 * p1 * p1
            grad[0, 0] = p1
            hess[0, 0, 0] = 1.0
        else:
            val[0] = p1
            grad[0, 0] = 1.0
        g, g1, g2 = _flat(p1)
        if g == 0.0 and g1 == 0.0:
            return val, grad, hess
        w = 2.0 * math.pi
        r = p2 / p1
        th = w * r
        # partials of th
        t1 = -w * p2 / (p1 * p1)
        t2 = w / p1
        t11 = 2.0 * w * p2 / (p1 * p1 * p1)
        t12 = -w / (p1 * p1)
        s = math.sin(th)
        c = math.cos(th)
        val[1] = s * g
        grad[1, 0] = c * t1 * g + s * g1
        grad[1, 1] = c * t2 * g
        hess[1, 0, 0] = (-s * t1 * t1 + c * t11) * g + 2.0 * c * t1 * g1 + s * g2
        hess[1, 0, 1] = (-s * t1 * t2 + c * t12) * g + c * t2 * g1
        hess[1, 1, 0] = hess[1, 0, 1]
        hess[1, 1, 1] = -s * t2 * t2 * g
    else:
        val[0] = p1
        val[1] = p2
        grad[0, 0] = 1.0
        grad[1, 1] = 1.0
    return val, grad, hess


@njit
def suspension_integral_directions(fam, prm, p1, p2):
    """Gradients of (I2, I3) in (p', p''), I3's divided by its flat factor.

    Dividing by exp(-x^-2) > 0 keeps the direction, which stays representable
    where the gradient itself underflows.  Rows are zero where the flat
    factor's argument vanishes.
    """
    grad = suspension_integrals_kernel(fam, prm, p1, p2)[1].copy()
    if fam == INT_HYPERBOLIC:
        x = p1 * p2
        if x == 0.0:
            grad[1, 0] = 0.0
            grad[1, 1] = 0.0
            return grad
        k = 2.0 * math.pi / prm[0]
        th = k * math.log(abs(p1))
        s = math.sin(th)
        r = 2.0 / (x * x * x)
        grad[1, 0] = math.cos(th) * k / p1 + s * r * p2
        grad[1, 1] = s * r * p1
    elif fam == INT_PARABOLIC:
        if p1 == 0.0:
            grad[1, 0] = 0.0
            grad[1, 1] = 0.0
            return grad
        w = 2.0 * math.pi
        th = w * p2 / p1
        s = math.sin(th)
        c = math.cos(th)
        grad[1, 0] = -c * w * p2 / (p1 * p1) + s * 2.0 / (p1 * p1 * p1)
        grad[1, 1] = c * w / p1
    return grad


# ---------------------------------------------------------------------------
# ODE systems: x' = f(x).  ip[0] selects the kind.
#
#   SYS_QUADRATIC          ip = [kind, model, nw]          fp = [w(nw), prm...]
#   SYS_LIE_POISSON        ip = [kind]                     fp = [c(27), xi(2x3)]
#   SYS_VECTOR_FIELD       ip = [kind, model, nw]          fp = [coef(nw), prm...]
#   SYS_LINEAR             ip = [kind, n]                  fp = M (n*n)
#   SYS_SUSPENSION_ACTION  ip = [kind, model, nw, fam, np]  fp = [w(nw), t2, t3, prm(np), fam_prm...]


@njit
def _phase_grad_hess(x, ip, fp):
    kind = ip[0]
    m = x.size // 2
    q = x[:m]
    p = x[m:]
    if kind == SYS_QUADRATIC:
        nw = ip[2]
        X, DX, D2X = frame_kernel(ip[1], q, fp[nw:])
        H, g, Hs = quadratic_momentum(X, DX, D2X, fp[:nw], p)
        return g, Hs
    # SYS_SUSPENSION_ACTION
    nw = ip[2]
    fam = ip[3]
    npr = ip[4]
    prm = fp[nw + 2 : nw + 2 + npr]
    X, DX, D2X = frame_kernel(ip[1], q, prm)
    H, g, Hs = quadratic_momentum(X, DX, D2X, fp[:nw], p)
    t2 = fp[nw]
    t3 = fp[nw + 1]
    val, gr, he = suspension_integrals_kernel(fam, fp[nw + 2 + npr :], p[0], p[1])
    for a in range(2):
        g[m + a] += t2 * gr[0, a] + t3 * gr[1, a]
        for b in range(2):
            Hs[m + a, m + b] += t2 * he[0, a, b] + t3 * he[1, a, b]
    return g, Hs


@njit
def _lie_poisson_parts(x, fp):
    c = fp[:27].reshape((3, 3, 3))
    xi = fp[27:33].reshape((2, 3))
    G = np.zeros((3, 3))
    for a in range(2):
        for i in range(3):
            for j in range(3):
                G[i, j] += xi[a, i] * xi[a, j]
    dH = G @ x
    return c, G, dH


@njit
def system_rhs(x, ip, fp):
    kind = ip[0]
    if kind == SYS_QUADRATIC or kind == SYS_SUSPENSION_ACTION:
        m = x.size // 2
        g, Hs = _phase_grad_hess(x, ip, fp)
        out = np.empty(2 * m)
        out[:m] = g[m:]
        out[m:] = -g[:m]
        return out
    if kind == SYS_LIE_POISSON:
        c, G, dH = _lie_poisson_parts(x, fp)
        out = np.zeros(3)
        for k in range(3):
            s = 0.0
            for i in range(3):
                for j in range(3):
                    s += c[k, i, j] * x[j] * dH[i]
            out[k] = s
        return out
    if kind == SYS_VECTOR_FIELD:
        nw = ip[2]
        X, DX, D2X = frame_kernel(ip[1], x, fp[nw:])
        out = np.zeros(x.size)
        for r in range(nw):
            if fp[r] != 0.0:
                out += fp[r] * X[r]
        return out
    n = ip[1]
    return fp[: n * n].reshape((n, n)) @ x


@njit
def system_jac(x, ip, fp):
    kind = ip[0]
    if kind == SYS_QUADRATIC or kind == SYS_SUSPENSION_ACTION:
        m = x.size // 2
        g, Hs = _phase_grad_hess(x, ip, fp)
        J = np.empty((2 * m, 2 * m))
        J[:m, :] = Hs[m:, :]
        J[m:, :] = -Hs[:m, :]
        return J
    if kind == SYS_LIE_POISSON:
        c, G, dH = _lie_poisson_parts(x, fp)
        J = np.zeros((3, 3))
        for k in range(3):
            for l in range(3):
                s = 0.0
                for i in range(3):
                    s += c[k, i, l] * dH[i]
                    for j in range(3):
                        s += c[k, i, j] * x[j] * G[i, l]
                J[k, l] = s
        return J
    if kind == SYS_VECTOR_FIELD:
        nw = ip[2]
        X, DX, D2X = frame_kernel(ip[1], x, fp[nw:])
        J = np.zeros((x.size, x.size))
        for r in range(nw):
            if fp[r] != 0.0:
                J += fp[r] * DX[r]
        return J
    n = ip[1]
    return fp[: n * n].reshape((n, n)).copy()


# ---------------------------------------------------------------------------
# 2-stage Gauss-Legendre collocation


@njit
def _maxabs(a):
    m = 0.0
    for v in a.ravel():
        if abs(v) > m:
            m = abs(v)
    return m


@njit
def gauss4_stages(x, dt, ip, fp, tol, maxit):
    """Solve the implicit stage equations.

    Fixed-point iteration first; Newton on the full stage system if that stalls.
    Returns (k1, k2, ok).
    """
    n = x.size
    k1 = system_rhs(x, ip, fp)
    k2 = k1.copy()
    scale = 1.0 + _maxabs(x)
    ok = False
    prev = np.inf
    for it in range(maxit):
        y1 = x + dt * (A11 * k1 + A12 * k2)
        y2 = x + dt * (A21 * k1 + A22 * k2)
        n1 = system_rhs(y1, ip, fp)
        n2 = system_rhs(y2, ip, fp)
        incr = abs(dt) * max(_maxabs(n1 - k1), _maxabs(n2 - k2))
        k1 = n1
        k2 = n2
        if incr <= tol * scale:
            ok = True
            # keep going while the increment still shrinks: reach round-off
            if incr == 0.0 or incr >= prev:
                break
        elif ok:
            break
        prev = incr
    if ok:
        return k1, k2, True
    eye = np.eye(n)
    for it in range(maxit):
        y1 = x + dt * (A11 * k1 + A12 * k2)
        y2 = x + dt * (A21 * k1 + A22 * k2)
        F = np.empty(2 * n)
        F[:n] = k1 - system_rhs(y1, ip, fp)
        F[n:] = k2 - system_rhs(y2, ip, fp)
        J1 = system_jac(y1, ip, fp)
        J2 = system_jac(y2, ip, fp)
        M = np.empty((2 * n, 2 * n))
        M[:n, :n] = eye - dt * A11 * J1
        M[:n, n:] = -dt * A12 * J1
        M[n:, :n] = -dt * A21 * J2
        M[n:, n:] = eye - dt * A22 * J2
        d = np.linalg.solve(M, -F)
        k1 = k1 + d[:n]
        k2 = k2 + d[n:]
        if abs(dt) * _maxabs(d) <= tol * scale:
            return k1, k2, True
    return k1, k2, False


@njit
def gauss4_run(x0, ip, fp, dt, nsteps, stride, tol, maxit):
    """Integrate nsteps steps; record every `stride` steps (and the last).

    Returns (states, nrecorded, failed_step) with failed_step = -1 on success.
    """
    n = x0.size
    nrec = nsteps // stride + 2
    out = np.empty((nrec, n))
    x = x0.copy()
    comp = np.zeros(n)
    out[0] = x
    r = 1
    for s in range(nsteps):
        k1, k2, ok = gauss4_stages(x, dt, ip, fp, tol, maxit)
        if not ok:
            return out[:r], r, s
        # compensated update
        y = dt * 0.5 * (k1 + k2) - comp
        t = x + y
        comp = (t - x) - y
        x = t
        for v in x:
            if not np.isfinite(v):
                return out[:r], r, s
        if (s + 1) % stride == 0 or s + 1 == nsteps:
            out[r] = x
            r += 1
    return out[:r], r, -1


@njit
def gauss4_tangent_run(x0, Y0, ip, fp, dt, nsteps, tol, maxit):
    """Advance state and tangent basis with the exact linearization of the step map."""
    n = x0.size
    ncol = Y0.shape[1]
    x = x0.copy()
    Y = Y0.copy()
    eye = np.eye(n)
    for s in range(nsteps):
        k1, k2, ok = gauss4_stages(x, dt, ip, fp, tol, maxit)
        if not ok:
            return x, Y, s
        y1 = x + dt * (A11 * k1 + A12 * k2)
        y2 = x + dt * (A21 * k1 + A22 * k2)
        J1 = system_jac(y1, ip, fp)
        J2 = system_jac(y2, ip, fp)
        M = np.empty((2 * n, 2 * n))
        M[:n, :n] = eye - dt * A11 * J1
        M[:n, n:] = -dt * A12 * J1
        M[n:, :n] = -dt * A21 * J2
        M[n:, n:] = eye - dt * A22 * J2
        R = np.empty((2 * n, ncol))
        R[:n] = J1 @ Y
        R[n:] = J2 @ Y
        dK = np.linalg.solve(M, R)
        Y = Y + dt * 0.5 * (dK[:n] + dK[n:])
        x = x + dt * 0.5 * (k1 + k2)
        for v in x:
            if not np.isfinite(v):
                return x, Y, s
    return x, Y, -1


def stages_for(rhs: Callable, jac: Callable) -> Callable:
    """Interpreted gauss4_stages with Python callables in place of the catalog systems.

    rhs(x, ip, fp) and jac(x, ip, fp) take the same arguments as system_rhs and
    system_jac.  The compiled kernels bind those by global name so numba can
    cache them; this rebinds the names for the interpreted copy only.
    """
    fn = pyfunc(gauss4_stages)
    g = dict(fn.__globals__, system_rhs=rhs, system_jac=jac)
    return types.FunctionType(fn.__code__, g, fn.__name__, fn.__defaults__, fn.__closure__)


# ---------------------------------------------------------------------------
# greedy first-fit covers in a Bowen metric d_n(x, y) = max_i |f^i x - f^i y|


@njit
def greedy_cover_count(orbits, order, eps, cell, ncell, periodic):
    """Count centers of a first-fit greedy eps-cover.

    orbits  : (N, n, 2) orbit points; orbits[:, 0] are the base points
    order   : visiting order (a permutation of range(N))
    cell    : bucket edge length (>= eps) on the base points
    ncell   : number of buckets per axis
    periodic: measure distances on R^2/Z^2 when True
    """
    N = orbits.shape[0]
    nit = orbits.shape[1]
    # bucket the base points
    key = np.empty(N, np.int64)
    for a in range(N):
        cx = int(math.floor(orbits[a, 0, 0] / cell)) % ncell
        cy = int(math.floor(orbits[a, 0, 1] / cell)) % ncell
        key[a] = cx * ncell + cy
    idx = np.argsort(key)
    start = np.full(ncell * ncell + 1, -1, np.int64)
    counts = np.zeros(ncell * ncell, np.int64)
    for a in range(N):
        counts[key[a]] += 1
    start[0] = 0
    for b in range(ncell * ncell):
        start[b + 1] = start[b] + counts[b]
    covered = np.zeros(N, np.bool_)
    centers = 0
    for oi in range(N):
        c = order[oi]
        if covered[c]:
            continue
        centers += 1
        covered[c] = True
        cx = key[c] // ncell
        cy = key[c] % ncell
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                bx = cx + dx
                by = cy + dy
                if periodic:
                    bx = bx % ncell
                    by = by % ncell
                elif bx < 0 or by < 0 or bx >= ncell or by >= ncell:
                    continue
                b = bx * ncell + by
                for t in range(start[b], start[b + 1]):
                    j = idx[t]
                    if covered[j]:
                        continue
                    inside = True
                    for i in range(nit):
                        for k in range(2):
                            d = abs(orbits[j, i, k] - orbits[c, i, k])
                            if periodic:
                                d = d - math.floor(d)
                                d = min(d, 1.0 - d)
                            if d >= eps:
                                inside = False
                                break
                        if not inside:
                            break
                    if inside:
                        covered[j] = True
    return centers
