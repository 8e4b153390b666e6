# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled closed-loop vector field; mirrors ``_pykernels`` line for line."""
from libc.math cimport sin, cos

import numpy as np

N_AUX = 9
AUX_FIELDS = ("u_d", "u_r", "sigma_N", "h_r", "h_r_dot", "b", "c", "p2", "sigma_ctrl")


cdef struct Lumped:
    double L, J, g, a, bb, e, mlc, sw


cdef struct Model:
    double d00, d01, d02, d11, d12, d22
    double h0, h1, h2
    double G0, G1, G2


cdef Lumped _lumped(double[:] P):
    cdef Lumped K
    cdef double L = P[0], m_l = P[1], l_c = P[2], I_l = P[3], m_h = P[4]
    K.L = L
    K.J = P[5]
    K.g = P[6]
    K.a = m_l * (L - l_c) * (L - l_c) + I_l + (m_h + m_l) * L * L
    K.bb = m_l * l_c * l_c + I_l
    K.e = m_l * (L - l_c) + (m_h + m_l) * L
    K.mlc = m_l * L * l_c
    K.sw = m_l * l_c
    return K


cdef inline Model _model(Lumped* K, double q_r, double q_N, double dq_r, double dq_N) nogil:
    cdef Model M
    cdef double c = K.mlc * cos(q_r)
    cdef double s = K.mlc * sin(q_r)
    cdef double Gr = K.g * K.sw * sin(q_N + q_r)
    M.d00 = K.J
    M.d01 = 0.5 * K.J
    M.d02 = K.J
    M.d11 = K.bb + 0.25 * K.J
    M.d12 = K.bb - c + 0.5 * K.J
    M.d22 = K.a + K.bb - 2.0 * c + K.J
    M.h0 = 0.0
    M.h1 = -s * dq_N * dq_N
    M.h2 = s * dq_r * dq_r + 2.0 * s * dq_N * dq_r
    M.G0 = 0.0
    M.G1 = Gr
    M.G2 = -K.g * K.e * sin(q_N) + Gr
    return M


cdef inline void _solve_sym3(Model* M, double f0, double f1, double f2, double* out) nogil:
    cdef double c00 = M.d11 * M.d22 - M.d12 * M.d12
    cdef double c01 = M.d02 * M.d12 - M.d01 * M.d22
    cdef double c02 = M.d01 * M.d12 - M.d02 * M.d11
    cdef double det = M.d00 * c00 + M.d01 * c01 + M.d02 * c02
    cdef double c11 = M.d00 * M.d22 - M.d02 * M.d02
    cdef double c12 = M.d01 * M.d02 - M.d00 * M.d12
    cdef double c22 = M.d00 * M.d11 - M.d01 * M.d01
    out[0] = (c00 * f0 + c01 * f1 + c02 * f2) / det
    out[1] = (c01 * f0 + c11 * f1 + c12 * f2) / det
    out[2] = (c02 * f0 + c12 * f1 + c22 * f2) / det


cdef class ClosedLoopKernel:
    cdef Lumped Kp, Kc
    cdef double q0, q1, theta, a1, a2
    cdef double bez[5]
    cdef double[:] Sx
    cdef double[:, :] Sc
    cdef int nS
    cdef double KP, KV, beta0, gamma
    cdef bint actuated
    cdef public str backend

    def __init__(self, plant, ctrl, gait, S_x, S_c, gains, actuated=True):
        cdef double[:] gv = np.ascontiguousarray(gait, dtype=float)
        cdef int i
        self.Kp = _lumped(np.ascontiguousarray(plant, dtype=float))
        self.Kc = _lumped(np.ascontiguousarray(ctrl, dtype=float))
        self.q0 = gv[0]
        self.q1 = gv[1]
        for i in range(5):
            self.bez[i] = gv[2 + i]
        self.theta = gv[7]
        self.a1 = gv[8]
        self.a2 = gv[9]
        self.Sx = np.ascontiguousarray(S_x, dtype=float)
        # transpose so each interval's six coefficients are contiguous
        self.Sc = np.ascontiguousarray(np.asarray(S_c, dtype=float).T)
        self.nS = self.Sx.shape[0]
        g = np.asarray(gains, dtype=float)
        self.KP, self.KV, self.beta0, self.gamma = g[0], g[1], g[2], g[3]
        self.actuated = actuated
        self.backend = "cython"

    cdef inline void _href(self, double q_N, double* out) nogil:
        cdef double delta = self.q1 - self.q0
        cdef double s = (q_N - self.q0) / delta
        cdef double t = 1.0 - s
        cdef double c0 = self.bez[0], c1 = self.bez[1], c2 = self.bez[2], c3 = self.bez[3], c4 = self.bez[4]
        out[0] = t*t*t*t * c0 + 4*s*t*t*t * c1 + 6*s*s*t*t * c2 + 4*s*s*s*t * c3 + s*s*s*s * c4
        out[1] = 4 * (t*t*t * (c1 - c0) + 3*s*t*t * (c2 - c1) + 3*s*s*t * (c3 - c2) + s*s*s * (c4 - c3)) / delta
        out[2] = 12 * (t*t * (c2 - 2*c1 + c0) + 2*s*t * (c3 - 2*c2 + c1) + s*s * (c4 - 2*c3 + c2)) / (delta * delta)

    cdef inline void _speed(self, double q_N, double* out) nogil:
        cdef double delta = self.q1 - self.q0
        cdef double s = 2.0 * (q_N - self.q0) / delta - 1.0
        out[0] = self.theta * (1.0 + self.a1 * s + self.a2 * s * s)
        out[1] = self.theta * (self.a1 + 2.0 * self.a2 * s) * 2.0 / delta

    cdef inline void _momentum_ref(self, double q_N, double* out) nogil:
        cdef int lo = 0, hi = self.nS - 1, mid
        # last breakpoint <= q_N, clamped to a valid interval
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if self.Sx[mid] <= q_N:
                lo = mid
            else:
                hi = mid
        cdef double d = q_N - self.Sx[lo]
        cdef double c0 = self.Sc[lo, 0], c1 = self.Sc[lo, 1], c2 = self.Sc[lo, 2]
        cdef double c3 = self.Sc[lo, 3], c4 = self.Sc[lo, 4], c5 = self.Sc[lo, 5]
        out[0] = ((((c0 * d + c1) * d + c2) * d + c3) * d + c4) * d + c5
        out[1] = (((5 * c0 * d + 4 * c1) * d + 3 * c2) * d + 2 * c3) * d + c4
        out[2] = ((20 * c0 * d + 12 * c1) * d + 6 * c2) * d + 2 * c3

    cdef void _torque(self, double* x, double* u, double* yv) nogil:
        cdef double q_r = x[1], q_N = x[2], dq_d = x[3], dq_r = x[4], dq_N = x[5]
        cdef double hr[3]
        cdef double Vv[2]
        cdef double Sv[3]
        cdef Model M
        cdef double sigma, k, h_r, h_r_dot, b, c, b_dot, vr, vN, ddq_r, ddq_N, ddq_d
        if not self.actuated:
            u[0] = 0.0
            u[1] = 0.0
            yv[0] = yv[1] = yv[2] = yv[3] = yv[4] = 0.0
            return
        M = _model(&self.Kc, q_r, q_N, dq_r, dq_N)
        sigma = M.d02 * dq_d + M.d12 * dq_r + M.d22 * dq_N
        self._href(q_N, hr)
        self._speed(q_N, Vv)
        self._momentum_ref(q_N, Sv)
        k = self.gamma / self.beta0
        h_r = q_r - hr[0]
        h_r_dot = dq_r - hr[1] * dq_N
        b = sigma - Sv[0]
        c = dq_N - Vv[0] - k * Sv[1] * b
        b_dot = -M.G2 - Sv[1] * dq_N
        vr = -self.KP * h_r - self.KV * h_r_dot
        vN = (Vv[1] * dq_N + self.gamma * Sv[1] * b - self.beta0 * (dq_N - Vv[0])
              + k * (Sv[2] * dq_N * b + Sv[1] * b_dot))
        ddq_r = vr + hr[1] * vN + hr[2] * dq_N * dq_N
        ddq_N = vN
        ddq_d = (-M.h2 - M.G2 - M.d12 * ddq_r - M.d22 * ddq_N) / M.d02
        u[0] = M.d00 * ddq_d + M.d01 * ddq_r + M.d02 * ddq_N + M.h0 + M.G0
        u[1] = M.d01 * ddq_d + M.d11 * ddq_r + M.d12 * ddq_N + M.h1 + M.G1
        yv[0] = h_r
        yv[1] = h_r_dot
        yv[2] = b
        yv[3] = c
        yv[4] = sigma

    def rhs(self, double t, x):
        cdef double[:] xv = np.ascontiguousarray(x, dtype=float)
        cdef double xs[6]
        cdef double u[2]
        cdef double yv[5]
        cdef double dd[3]
        cdef Model M
        cdef int i
        for i in range(6):
            xs[i] = xv[i]
        self._torque(xs, u, yv)
        M = _model(&self.Kp, xs[1], xs[2], xs[4], xs[5])
        _solve_sym3(&M, u[0] - M.h0 - M.G0, u[1] - M.h1 - M.G1, -M.h2 - M.G2, dd)
        out = np.empty(6)
        cdef double[:] ov = out
        ov[0] = xs[3]
        ov[1] = xs[4]
        ov[2] = xs[5]
        ov[3] = dd[0]
        ov[4] = dd[1]
        ov[5] = dd[2]
        return out

    def __call__(self, double t, x):
        return self.rhs(t, x)

    def aux(self, x):
        cdef double[:] xv = np.ascontiguousarray(x, dtype=float)
        cdef double xs[6]
        cdef double u[2]
        cdef double yv[5]
        cdef Model M
        cdef int i
        for i in range(6):
            xs[i] = xv[i]
        self._torque(xs, u, yv)
        M = _model(&self.Kp, xs[1], xs[2], xs[4], xs[5])
        sigma = M.d02 * xs[3] + M.d12 * xs[4] + M.d22 * xs[5]
        p2 = self.Kp.L * (cos(xs[2]) - cos(xs[2] + xs[1]))
        return np.array([u[0], u[1], sigma, yv[0], yv[1], yv[2], yv[3], p2, yv[4]])
