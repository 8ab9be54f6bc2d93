"""Independent reference solutions used only by the tests."""
import numpy as np
from scipy.integrate import solve_ivp


def ode_scattering(g, delta, n, m, L, k, rtol=1e-11, atol=1e-13):
    """Two-channel mesa scattering by direct ODE integration in the bare basis.

    Integrates psi'' = 2m (W - E) psi backwards from z = L for the two
    outgoing solutions, then matches incident + reflected waves at z = 0.
    Returns (r_a, r_b, t_a, t_b) with transmitted waves as coefficients of
    exp(ikz); closed channels are referenced at z = L.
    """
    E = k * k / (2 * m)
    c = g * np.sqrt(n + 1)
    W = np.array([[0.0, c], [c, delta]])
    q = np.sqrt(2 * m * (E - np.array([0.0, delta])) + 0j)
    q = np.where(q.imag < 0, -q, q)

    def rhs(z, y):
        psi, dpsi = y[:2], y[2:]
        return np.concatenate([dpsi, 2 * m * (W @ psi - E * psi)])

    sols = []
    for ch in range(2):
        y0 = np.zeros(4, dtype=complex)
        y0[ch] = 1.0
        y0[2 + ch] = 1j * q[ch]
        res = solve_ivp(rhs, (L, 0.0), y0, method="DOP853", rtol=rtol, atol=atol)
        sols.append(res.y[:, -1])
    # At z = 0: incident (1, 0) e^{ik_a z} + sum_ch r_ch e^{-i q_ch z} = sum_j t_j sol_j
    A = np.zeros((4, 4), dtype=complex)
    rhs_vec = np.array([1.0, 0.0, 1j * q[0], 0.0], dtype=complex)
    for j in range(2):
        A[:, j] = sols[j]
    for ch in range(2):
        col = np.zeros(4, dtype=complex)
        col[ch] = -1.0
        col[2 + ch] = 1j * q[ch]
        A[:, 2 + ch] = col
    t_ref_a, t_ref_b, r_a, r_b = np.linalg.solve(A, rhs_vec)
    t_a = t_ref_a * np.exp(-1j * q[0] * L)
    t_b = t_ref_b * np.exp(-1j * q[1] * L) if q[1].real > 0 else t_ref_b
    return r_a, r_b, t_a, t_b


def ode_square_potential(V0, L, k, m=0.5):
    """Single-channel square potential by ODE integration; returns (r, t)."""
    E = k * k / (2 * m)

    def rhs(z, y):
        return np.array([y[1], 2 * m * (V0 - E) * y[0]])

    res = solve_ivp(rhs, (L, 0.0), np.array([1.0, 1j * k], dtype=complex),
                    method="DOP853", rtol=1e-12, atol=1e-14)
    psi0, dpsi0 = res.y[:, -1]
    # psi = e^{ikz} + r e^{-ikz} = t_ref * psi_sol
    t_ref = 2j * k / (1j * k * psi0 + dpsi0)
    r = t_ref * psi0 - 1.0
    return r, t_ref * np.exp(-1j * k * L)
