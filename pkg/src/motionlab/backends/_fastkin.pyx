# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kinematics kernels: batched so(3) exponentials and forward
kinematics with hand-derived reverse-mode gradients.

Mirrors the contracts of ``_refkin`` exactly; see that module for the
conventions and the derivation notes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()

DEF SMALL_ANGLE = 1e-6


cdef inline void _exp3(const double* w, double* e) noexcept nogil:
    cdef double t2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    cdef double theta = sqrt(t2)
    cdef double a, b
    if theta < SMALL_ANGLE:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
    else:
        a = sin(theta) / theta
        b = (1.0 - cos(theta)) / t2
    # I + a*W + b*W^2 with W = hat(w)
    e[0] = 1.0 + b * (-w[1] * w[1] - w[2] * w[2])
    e[1] = -a * w[2] + b * w[0] * w[1]
    e[2] = a * w[1] + b * w[0] * w[2]
    e[3] = a * w[2] + b * w[0] * w[1]
    e[4] = 1.0 + b * (-w[0] * w[0] - w[2] * w[2])
    e[5] = -a * w[0] + b * w[1] * w[2]
    e[6] = -a * w[1] + b * w[0] * w[2]
    e[7] = a * w[0] + b * w[1] * w[2]
    e[8] = 1.0 + b * (-w[0] * w[0] - w[1] * w[1])


cdef inline void _dexp3(const double* w, const double* g, double* out) noexcept nogil:
    """Gradient on exp(hat(w)) (g, row-major 3x3) -> gradient on w."""
    cdef double t2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    cdef double theta = sqrt(t2)
    cdef double a, b, a2, b2, st, ct
    if theta < SMALL_ANGLE:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
        a2 = -1.0 / 3.0 + t2 / 30.0
        b2 = -1.0 / 12.0 + t2 / 180.0
    else:
        st = sin(theta)
        ct = cos(theta)
        a = st / theta
        b = (1.0 - ct) / t2
        a2 = (theta * ct - st) / (t2 * theta)
        b2 = (theta * st - 2.0 * (1.0 - ct)) / (t2 * t2)
    # W and W^2 entries (W^2 is symmetric)
    cdef double s1 = (
        (g[7] - g[5]) * w[0] + (g[2] - g[6]) * w[1] + (g[3] - g[1]) * w[2]
    )
    cdef double q00 = -w[1] * w[1] - w[2] * w[2]
    cdef double q11 = -w[0] * w[0] - w[2] * w[2]
    cdef double q22 = -w[0] * w[0] - w[1] * w[1]
    cdef double s2 = (
        g[0] * q00 + g[4] * q11 + g[8] * q22
        + (g[1] + g[3]) * w[0] * w[1]
        + (g[2] + g[6]) * w[0] * w[2]
        + (g[5] + g[7]) * w[1] * w[2]
    )
    # <g, G_a> antisymmetric contraction
    cdef double ga0 = g[7] - g[5]
    cdef double ga1 = g[2] - g[6]
    cdef double ga2 = g[3] - g[1]
    # <g, G_a W + W G_a> closed form
    cdef double tr = g[0] + g[4] + g[8]
    cdef double s30 = (
        w[1] * (g[1] + g[3]) + w[2] * (g[2] + g[6]) - 2.0 * w[0] * (tr - g[0])
    )
    cdef double s31 = (
        w[0] * (g[1] + g[3]) + w[2] * (g[5] + g[7]) - 2.0 * w[1] * (tr - g[4])
    )
    cdef double s32 = (
        w[0] * (g[2] + g[6]) + w[1] * (g[5] + g[7]) - 2.0 * w[2] * (tr - g[8])
    )
    cdef double c = a2 * s1 + b2 * s2
    out[0] = c * w[0] + a * ga0 + b * s30
    out[1] = c * w[1] + a * ga1 + b * s31
    out[2] = c * w[2] + a * ga2 + b * s32


def exp_batch(w):
    """Rodrigues map for a batch of axis-angle vectors: (M, 3) -> (M, 3, 3)."""
    wv = np.ascontiguousarray(np.asarray(w, dtype=np.float64).reshape(-1, 3))
    cdef Py_ssize_t m = wv.shape[0], i
    out = np.empty((m, 3, 3))
    cdef double[:, :, ::1] ov = out
    cdef const double[:, ::1] wm = wv
    with nogil:
        for i in range(m):
            _exp3(&wm[i, 0], &ov[i, 0, 0])
    return out.reshape(np.asarray(w).shape[:-1] + (3, 3))


def dexp_contract(w, grad_rot):
    """Pull a gradient on exp(hat(w)) back to a gradient on w."""
    w = np.asarray(w, dtype=np.float64)
    lead = w.shape[:-1]
    wv = np.ascontiguousarray(w.reshape(-1, 3))
    gv = np.ascontiguousarray(np.asarray(grad_rot, dtype=np.float64).reshape(-1, 3, 3))
    cdef Py_ssize_t m = wv.shape[0], i
    out = np.empty((m, 3))
    cdef double[:, ::1] ov = out
    cdef const double[:, ::1] wm = wv
    cdef const double[:, :, ::1] gm = gv
    with nogil:
        for i in range(m):
            _dexp3(&wm[i, 0], &gm[i, 0, 0], &ov[i, 0])
    return out.reshape(lead + (3,))


def fk_forward(w, root_pos, bone_lengths, parents, order):
    """Forward kinematics over a batch of poses; see _refkin.fk_forward."""
    wv = np.ascontiguousarray(np.asarray(w, dtype=np.float64))
    rp = np.ascontiguousarray(np.asarray(root_pos, dtype=np.float64))
    bl = np.ascontiguousarray(np.asarray(bone_lengths, dtype=np.float64))
    par = np.ascontiguousarray(np.asarray(parents, dtype=np.int64))
    ord_ = np.ascontiguousarray(np.asarray(order, dtype=np.int64))
    cdef Py_ssize_t batch = wv.shape[0], nj = wv.shape[1]
    joints = np.empty((batch, nj, 3))
    rot = np.empty((batch, nj, 3, 3))
    local = np.empty((batch, nj, 3, 3))
    cdef double[:, :, ::1] jv = joints
    cdef double[:, :, :, ::1] rv = rot
    cdef double[:, :, :, ::1] lv = local
    cdef const double[:, :, ::1] wm = wv
    cdef const double[:, ::1] rpm = rp
    cdef const double[::1] blm = bl
    cdef const cnp.int64_t[::1] pm = par
    cdef const cnp.int64_t[::1] om = ord_
    cdef Py_ssize_t b, k, j, p, r, c, t
    cdef double acc
    cdef Py_ssize_t root = om[0]
    with nogil:
        for b in range(batch):
            for j in range(nj):
                _exp3(&wm[b, j, 0], &lv[b, j, 0, 0])
            for r in range(3):
                jv[b, root, r] = rpm[b, r]
                for c in range(3):
                    rv[b, root, r, c] = lv[b, root, r, c]
            for k in range(1, nj):
                j = om[k]
                p = pm[j]
                for r in range(3):
                    for c in range(3):
                        acc = 0.0
                        for t in range(3):
                            acc += rv[b, p, r, t] * lv[b, j, t, c]
                        rv[b, j, r, c] = acc
                for r in range(3):
                    jv[b, j, r] = jv[b, p, r] + blm[j] * rv[b, j, r, 0]
    return joints, rot, local


def fk_backward(w, bone_lengths, parents, order, rot, local, grad_joints):
    """Reverse-mode gradients of fk_forward; see _refkin.fk_backward."""
    wv = np.ascontiguousarray(np.asarray(w, dtype=np.float64))
    bl = np.ascontiguousarray(np.asarray(bone_lengths, dtype=np.float64))
    par = np.ascontiguousarray(np.asarray(parents, dtype=np.int64))
    ord_ = np.ascontiguousarray(np.asarray(order, dtype=np.int64))
    rv_ = np.ascontiguousarray(np.asarray(rot, dtype=np.float64))
    lv_ = np.ascontiguousarray(np.asarray(local, dtype=np.float64))
    gj = np.ascontiguousarray(np.asarray(grad_joints, dtype=np.float64))
    cdef Py_ssize_t batch = wv.shape[0], nj = wv.shape[1]
    grad_w = np.zeros((batch, nj, 3))
    grad_root = np.empty((batch, 3))
    d_joint = gj.copy()
    d_rot = np.zeros((batch, nj, 3, 3))
    cdef double[:, :, ::1] gw = grad_w
    cdef double[:, ::1] gr = grad_root
    cdef double[:, :, ::1] dj = d_joint
    cdef double[:, :, :, ::1] dr = d_rot
    cdef const double[:, :, ::1] wm = wv
    cdef const double[::1] blm = bl
    cdef const cnp.int64_t[::1] pm = par
    cdef const cnp.int64_t[::1] om = ord_
    cdef const double[:, :, :, ::1] rm = rv_
    cdef const double[:, :, :, ::1] lm = lv_
    cdef Py_ssize_t b, k, j, p, r, c, t
    cdef double dlocal[9]
    cdef double acc
    cdef Py_ssize_t root = om[0]
    with nogil:
        for b in range(batch):
            for k in range(nj - 1, 0, -1):
                j = om[k]
                p = pm[j]
                for r in range(3):
                    dj[b, p, r] += dj[b, j, r]
                    dr[b, j, r, 0] += blm[j] * dj[b, j, r]
                # rot[j] = rot[p] @ local[j]
                for r in range(3):
                    for c in range(3):
                        acc = 0.0
                        for t in range(3):
                            acc += rm[b, p, t, r] * dr[b, j, t, c]
                        dlocal[3 * r + c] = acc
                for r in range(3):
                    for c in range(3):
                        acc = 0.0
                        for t in range(3):
                            acc += dr[b, j, r, t] * lm[b, j, c, t]
                        dr[b, p, r, c] += acc
                _dexp3(&wm[b, j, 0], dlocal, &gw[b, j, 0])
            _dexp3(&wm[b, root, 0], &dr[b, root, 0, 0], &gw[b, root, 0])
            for r in range(3):
                gr[b, r] = dj[b, root, r]
    return grad_w, grad_root
