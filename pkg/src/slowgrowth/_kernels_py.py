"""Pure numpy versions of the assembly and convolution kernels.

Used when the compiled extension is unavailable or when the environment
variable ``SLOWGROWTH_PURE_PYTHON`` is set to a non-empty value.
"""
import numpy as np

_G0 = (1.0 - 1.0 / np.sqrt(3.0)) / 2.0
_G1 = (1.0 + 1.0 / np.sqrt(3.0)) / 2.0
# Gauss points in local (s, t) coordinates, s along x
GAUSS_ST = np.array([[_G0, _G0], [_G1, _G0], [_G0, _G1], [_G1, _G1]])


def _all_bmats(h):
    """Gradient operators B_q of shape (4, 2, 4): quadrature point, component, local node.

    Local nodes are ordered (i, j), (i+1, j), (i, j+1), (i+1, j+1).
    """
    b = np.empty((4, 2, 4))
    for q, (s, t) in enumerate(GAUSS_ST):
        b[q, 0] = [-(1 - t), 1 - t, -t, t]
        b[q, 1] = [-(1 - s), -s, 1 - s, s]
    return b / h


def _local(u):
    return np.stack([u[:-1, :-1], u[1:, :-1], u[:-1, 1:], u[1:, 1:]], axis=-1)


def cell_gradients(u, h):
    """Gradients at the 2x2 Gauss points of each cell, shape (N, N, 4, 2)."""
    b = _all_bmats(h)
    return np.einsum("qdk,ijk->ijqd", b, _local(np.asarray(u, dtype=float)))


def scatter_flux(flux, h):
    """Nodal gradient of sum_q w * flux_q . Du_q with respect to nodal values."""
    b = _all_bmats(h)
    n = flux.shape[0]
    loc = np.einsum("qdk,ijqd->ijk", b, flux) * (h * h / 4.0)
    out = np.zeros((n + 1, n + 1))
    out[:-1, :-1] += loc[..., 0]
    out[1:, :-1] += loc[..., 1]
    out[:-1, 1:] += loc[..., 2]
    out[1:, 1:] += loc[..., 3]
    return out


def cell_stiffness(hq, h):
    """Element matrices sum_q w B_q^T H_q B_q, shape (N, N, 4, 4)."""
    b = _all_bmats(h)
    return np.einsum("qdk,ijqde,qel->ijkl", b, hq, b) * (h * h / 4.0)


def correlate_valid(a, k):
    """2-D correlation with 'valid' output size, one kernel tap at a time."""
    a = np.asarray(a, dtype=float)
    k = np.asarray(k, dtype=float)
    m1, m2 = a.shape
    k1, k2 = k.shape
    if k1 > m1 or k2 > m2:
        raise ValueError("kernel larger than array")
    o1, o2 = m1 - k1 + 1, m2 - k2 + 1
    out = np.zeros((o1, o2))
    for p in range(k1):
        for q in range(k2):
            kv = k[p, q]
            if kv != 0.0:
                out += kv * a[p:p + o1, q:q + o2]
    return out
