"""Kernel unit tests and bit-parity checks between the two backends."""

import math
from array import array

import pytest

from foodweight._kernels import available_backends, get_backend

pyops = get_backend("python")

HAVE_CYTHON = "cython" in available_backends()
needs_cython = pytest.mark.skipif(not HAVE_CYTHON, reason="compiled kernels not built")


def rand_arr(rng, n, scale=1.0):
    return array("d", (rng.uniform(-scale, scale) for _ in range(n)))


class TestPurePythonKernels:
    def test_dot(self):
        a = array("d", [1.0, 2.0, 3.0])
        b = array("d", [4.0, 5.0, 6.0])
        assert pyops.dot(a, b, 3) == 32.0

    def test_dense_forward_hand_case(self):
        w = array("d", [1.0, 2.0, 3.0, 4.0])
        b = array("d", [1.0, 1.0])
        x = array("d", [1.0, 1.0])
        out = array("d", [0.0, 0.0])
        pyops.dense_forward(w, b, x, out, 2, 2)
        assert list(out) == [4.0, 8.0]

    def test_matvec_transpose(self):
        w = array("d", [1.0, 2.0, 3.0, 4.0])  # [[1,2],[3,4]]
        d = array("d", [1.0, 10.0])
        out = array("d", [0.0, 0.0])
        pyops.matvec_transpose(w, d, out, 2, 2)
        assert list(out) == [31.0, 42.0]

    def test_accumulate_outer(self):
        gw = array("d", [0.0] * 4)
        pyops.accumulate_outer(gw, array("d", [2.0, 3.0]), array("d", [1.0, 10.0]), 2, 2)
        assert list(gw) == [2.0, 20.0, 3.0, 30.0]

    def test_relu_and_backward(self):
        z = array("d", [-1.0, 0.0, 2.0])
        out = array("d", [0.0] * 3)
        pyops.relu(z, out, 3)
        assert list(out) == [0.0, 0.0, 2.0]
        din = array("d", [0.0] * 3)
        pyops.relu_backward(z, array("d", [5.0, 5.0, 5.0]), din, 3)
        # subgradient at exactly 0 is 0
        assert list(din) == [0.0, 0.0, 5.0]

    def test_adam_update_first_step_formula(self):
        p = array("d", [1.0])
        g = array("d", [0.5])
        m = array("d", [0.0])
        v = array("d", [0.0])
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        bc1 = 1 - b1
        bc2 = 1 - b2
        pyops.adam_update(p, g, m, v, 1, lr, b1, b2, eps, bc1, bc2)
        m_ref = (1 - b1) * 0.5
        v_ref = (1 - b2) * 0.25
        expected = 1.0 - lr * (m_ref / bc1) / (math.sqrt(v_ref / bc2) + eps)
        assert p[0] == pytest.approx(expected, rel=1e-15)
        assert m[0] == m_ref and v[0] == v_ref

    def test_avg_pool_quadrants(self):
        src = array("d", [float(v) for v in range(16)])
        out = array("d", [0.0] * 4)
        pyops.avg_pool(src, 4, 4, 1, 2, out)
        assert list(out) == [2.5, 4.5, 10.5, 12.5]

    def test_sum_and_sumsq(self):
        s, ss = pyops.sum_and_sumsq(array("d", [1.0, 2.0, 3.0]), 3)
        assert (s, ss) == (6.0, 14.0)

    def test_normalize_affine(self):
        src = array("d", [1.0, 3.0])
        dst = array("d", [0.0, 0.0])
        pyops.normalize_affine(src, dst, 2, 1.0, 2.0)
        assert list(dst) == [0.0, 1.0]


@needs_cython
class TestBackendParity:
    """The two backends must agree bit-for-bit, not just approximately."""

    def _pair(self):
        return pyops, get_backend("cython")

    def test_dot(self, rng):
        py, cy = self._pair()
        a = rand_arr(rng, 257)
        b = rand_arr(rng, 257)
        assert py.dot(a, b, 257) == cy.dot(a, b, 257)

    def test_dense_forward(self, rng):
        py, cy = self._pair()
        w = rand_arr(rng, 64 * 5)
        b = rand_arr(rng, 64)
        x = rand_arr(rng, 5)
        out_py = array("d", [0.0] * 64)
        out_cy = array("d", [0.0] * 64)
        py.dense_forward(w, b, x, out_py, 64, 5)
        cy.dense_forward(w, b, x, out_cy, 64, 5)
        assert out_py == out_cy

    def test_matvec_transpose(self, rng):
        py, cy = self._pair()
        w = rand_arr(rng, 32 * 64)
        d = rand_arr(rng, 32)
        a = array("d", [0.0] * 64)
        b = array("d", [0.0] * 64)
        py.matvec_transpose(w, d, a, 32, 64)
        cy.matvec_transpose(w, d, b, 32, 64)
        assert a == b

    def test_accumulate_outer(self, rng):
        py, cy = self._pair()
        d = rand_arr(rng, 32)
        x = rand_arr(rng, 64)
        a = rand_arr(rng, 32 * 64)
        b = array("d", a)
        py.accumulate_outer(a, d, x, 32, 64)
        cy.accumulate_outer(b, d, x, 32, 64)
        assert a == b

    def test_adam_update_sequence(self, rng):
        py, cy = self._pair()
        n = 100
        p1 = rand_arr(rng, n)
        p2 = array("d", p1)
        m1 = array("d", [0.0] * n)
        m2 = array("d", m1)
        v1 = array("d", [0.0] * n)
        v2 = array("d", v1)
        b1p = b2p = 1.0
        for step in range(1, 6):
            g = rand_arr(rng, n, 0.1)
            b1p *= 0.9
            b2p *= 0.999
            py.adam_update(p1, g, m1, v1, n, 1e-3, 0.9, 0.999, 1e-8, 1 - b1p, 1 - b2p)
            cy.adam_update(p2, g, m2, v2, n, 1e-3, 0.9, 0.999, 1e-8, 1 - b1p, 1 - b2p)
        assert p1 == p2 and m1 == m2 and v1 == v2

    def test_resize_bilinear(self, rng):
        py, cy = self._pair()
        src = array("d", (rng.random() for _ in range(31 * 17)))
        a = array("d", [0.0] * (64 * 48))
        b = array("d", [0.0] * (64 * 48))
        py.resize_bilinear(src, 31, 17, 1, a, 64, 48)
        cy.resize_bilinear(src, 31, 17, 1, b, 64, 48)
        assert a == b

    def test_avg_pool(self, rng):
        py, cy = self._pair()
        src = array("d", (rng.random() for _ in range(50 * 50 * 3)))
        a = array("d", [0.0] * (4 * 4 * 3))
        b = array("d", [0.0] * (4 * 4 * 3))
        py.avg_pool(src, 50, 50, 3, 4, a)
        cy.avg_pool(src, 50, 50, 3, 4, b)
        assert a == b

    def test_flip_and_normalize(self, rng):
        py, cy = self._pair()
        src = array("d", (rng.random() for _ in range(9 * 5 * 3)))
        a = array("d", [0.0] * len(src))
        b = array("d", [0.0] * len(src))
        py.flip_horizontal(src, 9, 5, 3, a)
        cy.flip_horizontal(src, 9, 5, 3, b)
        assert a == b
        py.normalize_affine(src, a, len(src), 0.4891, 0.2302)
        cy.normalize_affine(src, b, len(src), 0.4891, 0.2302)
        assert a == b

    def test_sum_and_sumsq(self, rng):
        py, cy = self._pair()
        v = rand_arr(rng, 1000)
        assert py.sum_and_sumsq(v, 1000) == cy.sum_and_sumsq(v, 1000)


@needs_cython
def test_forced_backend_env(tmp_path):
    import subprocess
    import sys

    code = "import foodweight; print(foodweight.kernel_backend)"
    for forced, expected in (("python", "python"), ("cython", "cython")):
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"FOODWEIGHT_KERNELS": forced, "PATH": "/usr/bin:/bin"},
        )
        assert out.stdout.strip() == expected, out.stderr
