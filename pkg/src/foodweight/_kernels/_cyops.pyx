# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel implementations.

Same operations, same accumulation order as ``pyops.py`` so the two backends
produce bit-identical IEEE-754 doubles.  Do not enable -ffast-math or change
loop/accumulation structure independently of the Python twin.
"""

from libc.math cimport sqrt

BACKEND_NAME = "cython"


def dot(double[::1] a, double[::1] b, Py_ssize_t n):
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc += a[i] * b[i]
    return acc


def dense_forward(double[::1] w, double[::1] b, double[::1] x,
                  double[::1] out, Py_ssize_t rows, Py_ssize_t cols):
    cdef double acc
    cdef Py_ssize_t r, c, base
    for r in range(rows):
        acc = b[r]
        base = r * cols
        for c in range(cols):
            acc += w[base + c] * x[c]
        out[r] = acc


def matvec_transpose(double[::1] w, double[::1] d, double[::1] out,
                     Py_ssize_t rows, Py_ssize_t cols):
    cdef double acc
    cdef Py_ssize_t r, c
    for c in range(cols):
        acc = 0.0
        for r in range(rows):
            acc += w[r * cols + c] * d[r]
        out[c] = acc


def accumulate_outer(double[::1] gw, double[::1] d, double[::1] x,
                     Py_ssize_t rows, Py_ssize_t cols):
    cdef double dr
    cdef Py_ssize_t r, c, base
    for r in range(rows):
        dr = d[r]
        base = r * cols
        for c in range(cols):
            gw[base + c] += dr * x[c]


def add_scaled(double[::1] y, double[::1] x, double a, Py_ssize_t n):
    cdef Py_ssize_t i
    for i in range(n):
        y[i] += a * x[i]


def relu(double[::1] z, double[::1] out, Py_ssize_t n):
    cdef Py_ssize_t i
    cdef double v
    for i in range(n):
        v = z[i]
        out[i] = v if v > 0.0 else 0.0


def relu_backward(double[::1] z, double[::1] dout, double[::1] din,
                  Py_ssize_t n):
    cdef Py_ssize_t i
    for i in range(n):
        din[i] = dout[i] if z[i] > 0.0 else 0.0


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                Py_ssize_t n, double lr, double beta1, double beta2,
                double eps, double bc1, double bc2):
    cdef double one_m_b1 = 1.0 - beta1
    cdef double one_m_b2 = 1.0 - beta2
    cdef double gi, mi, vi, mhat, vhat
    cdef Py_ssize_t i
    for i in range(n):
        gi = g[i]
        mi = beta1 * m[i] + one_m_b1 * gi
        vi = beta2 * v[i] + one_m_b2 * (gi * gi)
        m[i] = mi
        v[i] = vi
        mhat = mi / bc1
        vhat = vi / bc2
        p[i] -= lr * mhat / (sqrt(vhat) + eps)


def resize_bilinear(double[::1] src, Py_ssize_t sw, Py_ssize_t sh,
                    Py_ssize_t ch, double[::1] dst, Py_ssize_t dw,
                    Py_ssize_t dh):
    cdef double x_step, y_step, x, y, fx, fy
    cdef double v00, v10, v01, v11, top, bot
    cdef Py_ssize_t ox, oy, ix, iy, ix1, iy1, c
    cdef Py_ssize_t row0, row1, orow, p00, p10, p01, p11, obase
    if dw > 1 and sw > 1:
        x_step = (sw - 1) / <double>(dw - 1)
    else:
        x_step = 0.0
    if dh > 1 and sh > 1:
        y_step = (sh - 1) / <double>(dh - 1)
    else:
        y_step = 0.0
    for oy in range(dh):
        y = oy * y_step
        iy = <Py_ssize_t>y
        if iy > sh - 2:
            iy = sh - 2
        if iy < 0:
            iy = 0
        fy = y - iy
        iy1 = iy + 1 if iy + 1 < sh else sh - 1
        row0 = iy * sw * ch
        row1 = iy1 * sw * ch
        orow = oy * dw * ch
        for ox in range(dw):
            x = ox * x_step
            ix = <Py_ssize_t>x
            if ix > sw - 2:
                ix = sw - 2
            if ix < 0:
                ix = 0
            fx = x - ix
            ix1 = ix + 1 if ix + 1 < sw else sw - 1
            p00 = row0 + ix * ch
            p10 = row0 + ix1 * ch
            p01 = row1 + ix * ch
            p11 = row1 + ix1 * ch
            obase = orow + ox * ch
            for c in range(ch):
                v00 = src[p00 + c]
                v10 = src[p10 + c]
                v01 = src[p01 + c]
                v11 = src[p11 + c]
                top = v00 + fx * (v10 - v00)
                bot = v01 + fx * (v11 - v01)
                dst[obase + c] = top + fy * (bot - top)


def avg_pool(double[::1] src, Py_ssize_t w, Py_ssize_t h, Py_ssize_t ch,
             Py_ssize_t p, double[::1] out):
    cdef Py_ssize_t i, j, c, x, y, x0, x1, y0, y1, base
    cdef double acc, count
    for i in range(p):
        y0 = (i * h) // p
        y1 = ((i + 1) * h) // p
        for j in range(p):
            x0 = (j * w) // p
            x1 = ((j + 1) * w) // p
            count = <double>((y1 - y0) * (x1 - x0))
            for c in range(ch):
                acc = 0.0
                for y in range(y0, y1):
                    base = (y * w) * ch + c
                    for x in range(x0, x1):
                        acc += src[base + x * ch]
                out[(i * p + j) * ch + c] = acc / count


def flip_horizontal(double[::1] src, Py_ssize_t w, Py_ssize_t h,
                    Py_ssize_t ch, double[::1] dst):
    cdef Py_ssize_t x, y, c, row, sbase, dbase
    for y in range(h):
        row = y * w * ch
        for x in range(w):
            sbase = row + x * ch
            dbase = row + (w - 1 - x) * ch
            for c in range(ch):
                dst[dbase + c] = src[sbase + c]


def normalize_affine(double[::1] src, double[::1] dst, Py_ssize_t n,
                     double mean, double std):
    cdef Py_ssize_t i
    for i in range(n):
        dst[i] = (src[i] - mean) / std


def sum_and_sumsq(double[::1] v, Py_ssize_t n):
    cdef double s = 0.0
    cdef double ss = 0.0
    cdef double x
    cdef Py_ssize_t i
    for i in range(n):
        x = v[i]
        s += x
        ss += x * x
    return s, ss
