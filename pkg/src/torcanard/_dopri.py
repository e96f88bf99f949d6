# Dormand-Prince 5(4) stepping kernel with the Hairer/Wanner continuous extension.
#
# Vector fields passed to ``run`` have the signature ``f(t, y, p, out)`` and
# write dy/dt into ``out``.  When ``f`` is a numba dispatcher the whole loop is
# compiled; otherwise ``run.py_func`` executes the same code in the interpreter.

import math

import numpy as np
from numba import njit

OK = 0
MAX_STEPS = 1
NONFINITE = 2
STEP_UNDERFLOW = 3

C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
D1, D3, D4, D5, D6, D7 = (-12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0,
                          -10690763975.0 / 1880347072.0, 701980252875.0 / 199316789632.0,
                          -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0)

SAFE = 0.9
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
# hnew / h stays within [FAC_MIN, FAC_MAX]
FAC_MIN = 0.2
FAC_MAX = 10.0


@njit(cache=True)
def _grow(a, n):
    b = np.empty((n,) + a.shape[1:], dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow1(a, n):
    b = np.empty(n, dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def run(f, t0, y0, t1, p, rtol, atol, hmax, max_steps, sign, dense):
    """Integrate ``sign * f`` from ``t0`` to ``t1 > t0``.

    Returns ``(ts, ys, cont, status, naccept, nreject)`` with ``cont`` holding
    the five continuous-extension coefficient rows per accepted step (empty
    when ``dense`` is false).
    """
    n = y0.shape[0]
    cap = 1024
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    if dense:
        cont = np.empty((cap, 5, n))
    else:
        cont = np.empty((0, 5, n))
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    y1 = np.empty(n)
    y = y0.copy()
    t = t0
    ts[0] = t
    ys[0] = y
    m = 1

    f(t, y, p, k1)
    for i in range(n):
        k1[i] *= sign
    for i in range(n):
        if not math.isfinite(k1[i]):
            return ts[:m], ys[:m], cont[:0], NONFINITE, 0, 0

    # starting step as in Hairer, Norsett & Wanner (HINIT); kept inline so the
    # uncompiled path never calls a compiled helper with a Python callable
    hcap = min(hmax, t1 - t0)
    dnf = 0.0
    dny = 0.0
    for i in range(n):
        sk = atol + rtol * abs(y[i])
        dnf += (k1[i] / sk) ** 2
        dny += (y[i] / sk) ** 2
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1e-6
    else:
        h = 0.01 * math.sqrt(dny / dnf)
    h = min(h, hcap)
    for i in range(n):
        ytmp[i] = y[i] + h * k1[i]
    f(t + h, ytmp, p, k2)
    der2 = 0.0
    for i in range(n):
        sk = atol + rtol * abs(y[i])
        der2 += ((sign * k2[i] - k1[i]) / sk) ** 2
    der12 = max(math.sqrt(der2) / h, math.sqrt(dnf))
    if not math.isfinite(der12):
        h = min(1e-6, hcap)
    elif der12 <= 1e-15:
        h = min(100.0 * h, max(1e-6, h * 1e-3), hcap)
    else:
        h = min(100.0 * h, (0.01 / der12) ** 0.2, hcap)
    facold = 1e-4
    last_rejected = False
    naccept = 0
    nreject = 0
    hmin_rel = 1e-14
    while True:
        if naccept + nreject >= max_steps:
            return ts[:m], ys[:m], cont[: (m - 1) if dense else 0], MAX_STEPS, naccept, nreject
        if h > hmax:
            h = hmax
        last = False
        if t + 1.01 * h >= t1:
            h = t1 - t
            last = True
        if h <= hmin_rel * max(abs(t), 1.0):
            return ts[:m], ys[:m], cont[: (m - 1) if dense else 0], STEP_UNDERFLOW, naccept, nreject

        for i in range(n):
            ytmp[i] = y[i] + h * A21 * k1[i]
        f(t + C2 * h, ytmp, p, k2)
        for i in range(n):
            k2[i] *= sign
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        f(t + C3 * h, ytmp, p, k3)
        for i in range(n):
            k3[i] *= sign
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        f(t + C4 * h, ytmp, p, k4)
        for i in range(n):
            k4[i] *= sign
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        f(t + C5 * h, ytmp, p, k5)
        for i in range(n):
            k5[i] *= sign
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                  + A64 * k4[i] + A65 * k5[i])
        f(t + h, ytmp, p, k6)
        for i in range(n):
            k6[i] *= sign
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                + A75 * k5[i] + A76 * k6[i])
        tnew = t1 if last else t + h
        f(tnew, y1, p, k7)
        finite = True
        for i in range(n):
            k7[i] *= sign
            if not (math.isfinite(y1[i]) and math.isfinite(k7[i])):
                finite = False

        if not finite:
            # a trial step may overshoot into overflow; only a vanishing step is fatal
            nreject += 1
            last_rejected = True
            h *= 0.1
            if h <= hmin_rel * max(abs(t), 1.0):
                return ts[:m], ys[:m], cont[: (m - 1) if dense else 0], NONFINITE, naccept, nreject
            continue

        err = 0.0
        for i in range(n):
            sk = atol + rtol * max(abs(y[i]), abs(y1[i]))
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                     + E6 * k6[i] + E7 * k7[i])
            err += (e / sk) ** 2
        err = math.sqrt(err / n)

        fac11 = err ** EXPO1
        fac = fac11 / facold ** BETA
        fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFE))
        hnew = h / fac

        if err <= 1.0:
            facold = max(err, 1e-4)
            naccept += 1
            if m >= ts.shape[0]:
                cap = 2 * ts.shape[0]
                ts = _grow1(ts, cap)
                ys = _grow(ys, cap)
                if dense:
                    cont = _grow(cont, cap)
            if dense:
                j = m - 1
                for i in range(n):
                    ydiff = y1[i] - y[i]
                    bspl = h * k1[i] - ydiff
                    cont[j, 0, i] = y[i]
                    cont[j, 1, i] = ydiff
                    cont[j, 2, i] = bspl
                    cont[j, 3, i] = ydiff - h * k7[i] - bspl
                    cont[j, 4, i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i]
                                         + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            ts[m] = tnew
            for i in range(n):
                ys[m, i] = y1[i]
                y[i] = y1[i]
                k1[i] = k7[i]
            m += 1
            t = tnew
            if last:
                return ts[:m], ys[:m], cont[: (m - 1) if dense else 0], OK, naccept, nreject
            if last_rejected:
                hnew = min(hnew, h)
            last_rejected = False
            h = hnew
        else:
            nreject += 1
            last_rejected = True
            h = h / min(1.0 / FAC_MIN, fac11 / SAFE)


@njit(cache=True)
def eval_cont(cont_row, theta):
    n = cont_row.shape[1]
    out = np.empty(n)
    th1 = 1.0 - theta
    for i in range(n):
        out[i] = cont_row[0, i] + theta * (
            cont_row[1, i] + th1 * (cont_row[2, i] + theta * (cont_row[3, i] + th1 * cont_row[4, i]))
        )
    return out
