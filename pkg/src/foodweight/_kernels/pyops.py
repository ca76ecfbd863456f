"""Pure-Python kernel implementations.

These are the fallback for environments without the compiled extension and
the reference the Cython kernels are checked against.  Both backends perform
the same IEEE-754 double operations in the same order, so results are
bit-identical, not merely close.  Keep loop structure and accumulation order
in sync with ``_cyops.pyx`` when editing.

Vectors and matrices are flat ``array('d')`` buffers; matrices are row-major.
"""

from math import sqrt

BACKEND_NAME = "python"


def dot(a, b, n):
    acc = 0.0
    for i in range(n):
        acc += a[i] * b[i]
    return acc


def dense_forward(w, b, x, out, rows, cols):
    """out = W @ x + b for a row-major (rows x cols) W."""
    for r in range(rows):
        acc = b[r]
        base = r * cols
        for c in range(cols):
            acc += w[base + c] * x[c]
        out[r] = acc


def matvec_transpose(w, d, out, rows, cols):
    """out = W.T @ d; the input-gradient half of a dense layer's backward."""
    for c in range(cols):
        acc = 0.0
        for r in range(rows):
            acc += w[r * cols + c] * d[r]
        out[c] = acc


def accumulate_outer(gw, d, x, rows, cols):
    """gw += outer(d, x); the weight-gradient half of a dense backward."""
    for r in range(rows):
        dr = d[r]
        base = r * cols
        for c in range(cols):
            gw[base + c] += dr * x[c]


def add_scaled(y, x, a, n):
    """y += a * x."""
    for i in range(n):
        y[i] += a * x[i]


def relu(z, out, n):
    for i in range(n):
        v = z[i]
        out[i] = v if v > 0.0 else 0.0


def relu_backward(z, dout, din, n):
    """din = dout where z > 0 else 0 (subgradient at 0 taken as 0)."""
    for i in range(n):
        din[i] = dout[i] if z[i] > 0.0 else 0.0


def adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2):
    """In-place bias-corrected Adam step on one parameter block.

    bc1 and bc2 are the accumulated correction terms (1 - beta1**t) and
    (1 - beta2**t); the caller maintains them incrementally so both backends
    round them identically.
    """
    one_m_b1 = 1.0 - beta1
    one_m_b2 = 1.0 - beta2
    for i in range(n):
        gi = g[i]
        mi = beta1 * m[i] + one_m_b1 * gi
        vi = beta2 * v[i] + one_m_b2 * (gi * gi)
        m[i] = mi
        v[i] = vi
        mhat = mi / bc1
        vhat = vi / bc2
        p[i] -= lr * mhat / (sqrt(vhat) + eps)


def resize_bilinear(src, sw, sh, ch, dst, dw, dh):
    """Corner-aligned bilinear resize of an interleaved row-major raster.

    Nested-lerp form (v0 + f*(v1-v0)) so constant inputs reproduce exactly.
    """
    if dw > 1 and sw > 1:
        x_step = (sw - 1) / (dw - 1)
    else:
        x_step = 0.0
    if dh > 1 and sh > 1:
        y_step = (sh - 1) / (dh - 1)
    else:
        y_step = 0.0
    for oy in range(dh):
        y = oy * y_step
        iy = int(y)
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
            ix = int(x)
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


def avg_pool(src, w, h, ch, p, out):
    """Average-pool an interleaved raster onto a (p x p x ch) grid.

    Cell boundaries are integer splits of the image extent; requires
    w >= p and h >= p.
    """
    for i in range(p):
        y0 = (i * h) // p
        y1 = ((i + 1) * h) // p
        for j in range(p):
            x0 = (j * w) // p
            x1 = ((j + 1) * w) // p
            count = float((y1 - y0) * (x1 - x0))
            for c in range(ch):
                acc = 0.0
                for y in range(y0, y1):
                    base = (y * w) * ch + c
                    for x in range(x0, x1):
                        acc += src[base + x * ch]
                out[(i * p + j) * ch + c] = acc / count


def flip_horizontal(src, w, h, ch, dst):
    for y in range(h):
        row = y * w * ch
        for x in range(w):
            sbase = row + x * ch
            dbase = row + (w - 1 - x) * ch
            for c in range(ch):
                dst[dbase + c] = src[sbase + c]


def normalize_affine(src, dst, n, mean, std):
    """dst = (src - mean) / std."""
    for i in range(n):
        dst[i] = (src[i] - mean) / std


def sum_and_sumsq(v, n):
    s = 0.0
    ss = 0.0
    for i in range(n):
        x = v[i]
        s += x
        ss += x * x
    return s, ss
