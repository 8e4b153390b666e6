"""Symbolic derivation of the biped-with-disc Lagrangian dynamics.

Builds the kinetic and potential energy from body positions, then forms the
mass matrix, Christoffel Coriolis matrix and gravity vector with sympy. The
closed forms in ``discwalker.dynamics`` were transcribed from this output; the
test suite lambdifies the same expressions and compares numerically.

Run ``python tools/derive_dynamics.py`` to print the simplified entries.
"""
from __future__ import annotations

import sympy as sp

L, m_l, l_c, I_l, m_h, J_d, g = sp.symbols("L m_l l_c I_l m_h J_d g", positive=True)
PARAMS = (L, m_l, l_c, I_l, m_h, J_d, g)
q = sp.symbols("q_d q_r q_N")
dq = sp.symbols("dq_d dq_r dq_N")


def _positions():
    qd, qr, qN = q
    hip = sp.Matrix([-L * sp.sin(qN), L * sp.cos(qN)])
    stance_com = (L - l_c) * sp.Matrix([-sp.sin(qN), sp.cos(qN)])
    th2 = qN + qr
    swing_com = hip + l_c * sp.Matrix([sp.sin(th2), -sp.cos(th2)])
    return hip, stance_com, swing_com


def _velocity(expr):
    return sum((sp.diff(expr, qi) * dqi for qi, dqi in zip(q, dq)), sp.zeros(*expr.shape))


def lagrangian_terms():
    qd, qr, qN = q
    dqd, dqr, dqN = dq
    hip, stance_com, swing_com = _positions()
    v_h, v_1, v_2 = (_velocity(x) for x in (hip, stance_com, swing_com))
    T = (
        sp.Rational(1, 2) * m_h * (v_h.T * v_h)[0]
        + sp.Rational(1, 2) * m_l * (v_1.T * v_1)[0]
        + sp.Rational(1, 2) * m_l * (v_2.T * v_2)[0]
        + sp.Rational(1, 2) * I_l * dqN**2
        + sp.Rational(1, 2) * I_l * (dqN + dqr) ** 2
        # disc angle measured from the inter-leg bisector
        + sp.Rational(1, 2) * J_d * (dqd + dqN + dqr / 2) ** 2
    )
    U = g * (m_h * hip[1] + m_l * stance_com[1] + m_l * swing_com[1])
    D = sp.Matrix(3, 3, lambda i, j: sp.simplify(sp.diff(T, dq[i], dq[j])))
    C = sp.zeros(3, 3)
    for k in range(3):
        for j in range(3):
            C[k, j] = sp.simplify(
                sum(
                    sp.Rational(1, 2)
                    * (sp.diff(D[k, j], q[i]) + sp.diff(D[k, i], q[j]) - sp.diff(D[i, j], q[k]))
                    * dq[i]
                    for i in range(3)
                )
            )
    G = sp.Matrix([sp.simplify(sp.diff(U, qi)) for qi in q])
    return T, U, D, C, G


def lambdified():
    """Numeric callables ``f(params_tuple, q, dq)`` for D, C, G, T and U."""
    T, U, D, C, G = lagrangian_terms()
    args = (PARAMS, q, dq)
    return {
        name: sp.lambdify(args, expr, "numpy")
        for name, expr in (("D", D), ("C", C), ("G", G), ("T", T), ("U", U))
    }


if __name__ == "__main__":
    T, U, D, C, G = lagrangian_terms()
    for name, M in (("D", D), ("C", C), ("G", G)):
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                print(f"{name}[{i},{j}] = {sp.simplify(M[i, j])}")
