"""Exact solution of the 1-D Euler Riemann problem (ideal gas).

The star-region pressure solves ``f_L(p) + f_R(p) + (u_R - u_L) = 0`` by
Newton iteration; the self-similar solution is then sampled at ``x/t``.
"""

from __future__ import annotations

import numpy as np

from .errors import AromError
from .mesh import PrimitiveState


def _pressure_function(p, rho_k, p_k, a_k, gamma):
    """Value and derivative of ``f_K(p)`` for one side."""
    if p > p_k:
        A = 2.0 / ((gamma + 1.0) * rho_k)
        B = (gamma - 1.0) / (gamma + 1.0) * p_k
        root = np.sqrt(A / (p + B))
        return (p - p_k) * root, root * (1.0 - 0.5 * (p - p_k) / (B + p))
    ratio = p / p_k
    f = 2.0 * a_k / (gamma - 1.0) * (ratio ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
    df = ratio ** (-(gamma + 1.0) / (2.0 * gamma)) / (rho_k * a_k)
    return f, df


def pressure_function(p, left, right, gamma) -> float:
    """``f_L(p) + f_R(p) + u_R - u_L``; its root is the star pressure."""
    rL, uL, pL = left
    rR, uR, pR = right
    aL = np.sqrt(gamma * pL / rL)
    aR = np.sqrt(gamma * pR / rR)
    return _pressure_function(p, rL, pL, aL, gamma)[0] + _pressure_function(p, rR, pR, aR, gamma)[0] + uR - uL


def star_state(left, right, gamma: float = 1.4, tol: float = 1e-14, max_iter: int = 100) -> tuple[float, float]:
    """Star pressure and velocity ``(p*, u*)``."""
    rL, uL, pL = map(float, left)
    rR, uR, pR = map(float, right)
    if min(rL, pL, rR, pR) <= 0:
        raise AromError("Riemann states must have positive density and pressure")
    aL = np.sqrt(gamma * pL / rL)
    aR = np.sqrt(gamma * pR / rR)
    if 2.0 * (aL + aR) / (gamma - 1.0) <= uR - uL:
        raise AromError("initial data generate vacuum")
    p = max(tol, 0.5 * (pL + pR) - 0.125 * (uR - uL) * (rL + rR) * (aL + aR))
    for _ in range(max_iter):
        fL, dL = _pressure_function(p, rL, pL, aL, gamma)
        fR, dR = _pressure_function(p, rR, pR, aR, gamma)
        p_new = p - (fL + fR + uR - uL) / (dL + dR)
        if p_new <= 0:
            p_new = tol
        change = 2.0 * abs(p_new - p) / (p_new + p)
        p = p_new
        if change < tol:
            break
    fL = _pressure_function(p, rL, pL, aL, gamma)[0]
    fR = _pressure_function(p, rR, pR, aR, gamma)[0]
    return p, 0.5 * (uL + uR) + 0.5 * (fR - fL)


def exact_sod_solution(x, t: float, left=(1.0, 0.0, 1.0), right=(0.125, 0.0, 0.1), gamma: float = 1.4, x0: float = 0.5):
    """Exact Riemann solution at positions ``x`` and time ``t > 0``.

    ``left``/``right`` are primitive ``(rho, u, P)`` triples; defaults are Sod's data.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    rL, uL, pL = map(float, left)
    rR, uR, pR = map(float, right)
    p_star, u_star = star_state(left, right, gamma)
    aL = np.sqrt(gamma * pL / rL)
    aR = np.sqrt(gamma * pR / rR)
    g1 = (gamma - 1.0) / (gamma + 1.0)
    g2 = (gamma - 1.0) / (2.0 * gamma)

    S = (np.atleast_1d(np.asarray(x, dtype=float)) - x0) / t
    rho = np.empty_like(S)
    u = np.empty_like(S)
    p = np.empty_like(S)

    left_side = S <= u_star
    # left wave
    if p_star > pL:
        s_shock = uL - aL * np.sqrt((gamma + 1) / (2 * gamma) * p_star / pL + g2)
        r_star = rL * (p_star / pL + g1) / (g1 * p_star / pL + 1.0)
        m = left_side & (S < s_shock)
        rho[m], u[m], p[m] = rL, uL, pL
        m = left_side & (S >= s_shock)
        rho[m], u[m], p[m] = r_star, u_star, p_star
    else:
        a_star = aL * (p_star / pL) ** g2
        head, tail = uL - aL, u_star - a_star
        r_star = rL * (p_star / pL) ** (1.0 / gamma)
        m = left_side & (S < head)
        rho[m], u[m], p[m] = rL, uL, pL
        m = left_side & (S >= head) & (S <= tail)
        c = 2.0 / (gamma + 1) + (gamma - 1) / ((gamma + 1) * aL) * (uL - S[m])
        rho[m] = rL * c ** (2.0 / (gamma - 1))
        u[m] = 2.0 / (gamma + 1) * (aL + (gamma - 1) / 2 * uL + S[m])
        p[m] = pL * c ** (2.0 * gamma / (gamma - 1))
        m = left_side & (S > tail)
        rho[m], u[m], p[m] = r_star, u_star, p_star
    # right wave
    right_side = ~left_side
    if p_star > pR:
        s_shock = uR + aR * np.sqrt((gamma + 1) / (2 * gamma) * p_star / pR + g2)
        r_star = rR * (p_star / pR + g1) / (g1 * p_star / pR + 1.0)
        m = right_side & (S > s_shock)
        rho[m], u[m], p[m] = rR, uR, pR
        m = right_side & (S <= s_shock)
        rho[m], u[m], p[m] = r_star, u_star, p_star
    else:
        a_star = aR * (p_star / pR) ** g2
        head, tail = uR + aR, u_star + a_star
        r_star = rR * (p_star / pR) ** (1.0 / gamma)
        m = right_side & (S > head)
        rho[m], u[m], p[m] = rR, uR, pR
        m = right_side & (S <= head) & (S >= tail)
        c = 2.0 / (gamma + 1) - (gamma - 1) / ((gamma + 1) * aR) * (uR - S[m])
        rho[m] = rR * c ** (2.0 / (gamma - 1))
        u[m] = 2.0 / (gamma + 1) * (-aR + (gamma - 1) / 2 * uR + S[m])
        p[m] = pR * c ** (2.0 * gamma / (gamma - 1))
        m = right_side & (S < tail)
        rho[m], u[m], p[m] = r_star, u_star, p_star
    return PrimitiveState(rho, u[:, None], p)
