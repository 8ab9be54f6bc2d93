"""Fock-block matrix elements, checked against explicit operator action.

The closed forms below are the matrix elements of sigma^dag sigma, a^dag a
and the coupling a^dag sigma + a sigma^dag between the rotated block vectors
Gamma_n^+- (theta). The truncated Fock oracle builds the same operators as
sparse matrices on atom (x) field and never touches the closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import SystemConfig, ValidationError, channel_energies

OPERATORS = ("sigma_dag_sigma", "a_dag_a", "coupling")
DEFAULT_NMAX = 12


@dataclass(frozen=True)
class FockBlockBasis:
    """Rotated basis of the (|a,n>, |b,n+1>) block plus the ground vector |b,0>."""

    n: int
    theta: float

    @property
    def plus(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)], dtype=complex)

    @property
    def minus(self) -> np.ndarray:
        return np.array([-math.sin(self.theta), math.cos(self.theta)], dtype=complex)

    def vector(self, sign: str, nmax: int = DEFAULT_NMAX) -> np.ndarray:
        """Embed Gamma_n^sign into the truncated product space."""
        coords = self.plus if sign == "+" else self.minus
        v = np.zeros(2 * nmax, dtype=complex)
        v[fock_index("a", self.n, nmax)] = coords[0]
        v[fock_index("b", self.n + 1, nmax)] = coords[1]
        return v


def fock_index(atom: str, photons: int, nmax: int) -> int:
    """Position of |atom, photons> in the product basis atom (x) field."""
    if not 0 <= photons < nmax:
        raise ValidationError(f"photon number {photons} outside truncation {nmax}")
    return {"a": 0, "b": 1}[atom] * nmax + photons


def ground_vector(nmax: int = DEFAULT_NMAX) -> np.ndarray:
    v = np.zeros(2 * nmax, dtype=complex)
    v[fock_index("b", 0, nmax)] = 1.0
    return v


def fock_operators(nmax: int = DEFAULT_NMAX) -> dict:
    """Sparse sigma, a and their products on the truncated space."""
    # Atom basis ordered (|a>, |b>); sigma lowers |a> -> |b>.
    sigma_atom = sparse.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))
    a_field = sparse.diags(np.sqrt(np.arange(1, nmax)), 1, format="csr")
    eye_atom = sparse.identity(2, format="csr")
    eye_field = sparse.identity(nmax, format="csr")
    sigma = sparse.kron(sigma_atom, eye_field, format="csr")
    a = sparse.kron(eye_atom, a_field, format="csr")
    return {
        "sigma": sigma,
        "a": a,
        "sigma_dag_sigma": (sigma.conj().T @ sigma).tocsr(),
        "a_dag_a": (a.conj().T @ a).tocsr(),
        "coupling": (a.conj().T @ sigma + a @ sigma.conj().T).tocsr(),
    }


def internal_hamiltonian(omega0: float, omega: float, g: float, u: float,
                         nmax: int = DEFAULT_NMAX):
    """omega0 s^dag s + omega a^dag a + g u (a^dag s + a s^dag) on the truncated space."""
    ops = fock_operators(nmax)
    return (omega0 * ops["sigma_dag_sigma"] + omega * ops["a_dag_a"]
            + g * u * ops["coupling"]).tocsr()


def closed_form_element(op_tag: str, bra: str, ket: str, n: int, n_prime: int,
                        theta: float) -> float:
    """Closed-form <Gamma_n^bra| op |Gamma_n'^ket>."""
    if op_tag not in OPERATORS:
        raise ValidationError(f"unknown operator tag {op_tag!r}")
    if bra not in "+-" or ket not in "+-" or len(bra) != 1 or len(ket) != 1:
        raise ValidationError("bra and ket must be '+' or '-'")
    if n < 0 or n_prime < 0:
        raise ValidationError("block indices must be >= 0")
    if n != n_prime:
        return 0.0
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    sin2, cos2 = math.sin(2 * theta), math.cos(2 * theta)
    root = math.sqrt(n + 1)
    table = {
        "sigma_dag_sigma": {"++": c2, "+-": -0.5 * sin2, "-+": -0.5 * sin2, "--": s2},
        "a_dag_a": {"++": n + s2, "+-": 0.5 * sin2, "-+": 0.5 * sin2, "--": n + c2},
        "coupling": {"++": root * sin2, "+-": root * cos2, "-+": root * cos2,
                     "--": -root * sin2},
    }
    return table[op_tag][bra + ket]


def operator_element(op_tag: str, bra: str, ket: str, n: int, n_prime: int,
                     theta: float, nmax: int = DEFAULT_NMAX) -> complex:
    """Same matrix element by explicit operator action in the truncated space."""
    if op_tag not in OPERATORS:
        raise ValidationError(f"unknown operator tag {op_tag!r}")
    if max(n, n_prime) > nmax - 2:
        raise ValidationError(f"blocks above n = {nmax - 2} are contaminated by truncation")
    op = fock_operators(nmax)[op_tag]
    v_bra = FockBlockBasis(n, theta).vector(bra, nmax)
    v_ket = FockBlockBasis(n_prime, theta).vector(ket, nmax)
    return complex(np.vdot(v_bra, op @ v_ket))


def matrix_element(op_tag: str, bra: str, ket: str, n: int, n_prime: int, theta: float,
                   nmax: int = DEFAULT_NMAX, atol: float = 1e-12) -> float:
    """Matrix element computed both ways; raises if the two disagree."""
    closed = closed_form_element(op_tag, bra, ket, n, n_prime, theta)
    explicit = operator_element(op_tag, bra, ket, n, n_prime, theta, nmax)
    if abs(closed - explicit) > atol:
        raise AssertionError(
            f"<{bra}|{op_tag}|{ket}> n={n} n'={n_prime} theta={theta}: "
            f"closed form {closed!r} != operator action {explicit!r}"
        )
    return closed


def ground_block_decoupling(n: int, theta: float, omega0: float = 7.0,
                            omega: float = 7.5, g: float = 1.0, u: float = 1.0,
                            nmax: int = DEFAULT_NMAX) -> float:
    """Largest |<Gamma_n^+-|H|Gamma_-1>| under the internal Hamiltonian (always 0)."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    H = internal_hamiltonian(omega0, omega, g, u, nmax)
    ground = H @ ground_vector(nmax)
    basis = FockBlockBasis(n, theta)
    return max(abs(np.vdot(basis.vector(s, nmax), ground)) for s in "+-")


def completeness_defect(theta: float, nmax: int = DEFAULT_NMAX) -> np.ndarray:
    """Identity minus the sum of all block projectors on the truncated space.

    The only surviving entry is the projector onto |a, nmax-1>, whose partner
    |b, nmax> lies beyond the truncation.
    """
    dim = 2 * nmax
    total = np.outer(ground_vector(nmax), ground_vector(nmax).conj())
    for n in range(nmax - 1):
        basis = FockBlockBasis(n, theta)
        for s in "+-":
            v = basis.vector(s, nmax)
            total += np.outer(v, v.conj())
    return np.eye(dim) - total


@dataclass(frozen=True)
class CoupledEquationCoefficients:
    """Potential and cross-coupling of the psi^+- equations in a rotated frame.

    ``diag_plus`` and ``diag_minus`` include the constant (n+1) omega; the
    coupling is the same in both lines (the block is Hermitian and real).
    """

    diag_plus: float
    diag_minus: float
    coupling_plus: float
    coupling_minus: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.diag_plus, self.coupling_plus],
                         [self.coupling_minus, self.diag_minus]])


def reconstruct_coupled_equation_coefficients(config: SystemConfig, u: float, theta: float,
                                              omega: float = 0.0,
                                              nmax: int = DEFAULT_NMAX
                                              ) -> CoupledEquationCoefficients:
    """Assemble the psi^+ and psi^- equation coefficients from matrix elements.

    omega0 = omega - delta. The psi^- line is obtained from the psi^+ line by
    theta -> theta + pi/2 (Gamma^+ -> Gamma^-, Gamma^- -> -Gamma^+). Both
    lines are checked against the explicit operator action before returning.
    """
    n, delta = config.n, config.delta
    omega0 = omega - delta
    gu = config.g * u

    def line(th):
        me = lambda tag, ket: matrix_element(tag, "+", ket, n, n, th, nmax)
        diag = omega0 * me("sigma_dag_sigma", "+") + omega * me("a_dag_a", "+") + gu * me("coupling", "+")
        cross = omega0 * me("sigma_dag_sigma", "-") + omega * me("a_dag_a", "-") + gu * me("coupling", "-")
        return diag, cross

    diag_p, cross_p = line(theta)
    diag_m, cross_shift = line(theta + 0.5 * math.pi)
    # psi^-(theta+pi/2) = -psi^+(theta), so the shifted cross term flips sign.
    coeffs = CoupledEquationCoefficients(diag_p, diag_m, cross_p, -cross_shift)

    H = internal_hamiltonian(omega0, omega, config.g, u, nmax)
    basis = FockBlockBasis(n, theta)
    vp, vm = basis.vector("+", nmax), basis.vector("-", nmax)
    explicit = np.array([[np.vdot(vp, H @ vp), np.vdot(vp, H @ vm)],
                         [np.vdot(vm, H @ vp), np.vdot(vm, H @ vm)]])
    scale = max(1.0, abs(omega), abs(omega0))
    if not np.allclose(coeffs.matrix(), explicit, rtol=0.0, atol=1e-12 * scale):
        raise AssertionError(f"coupled-equation coefficients disagree with operator action:\n"
                             f"{coeffs.matrix()}\n{explicit}")
    return coeffs


def closed_form_coefficients(config: SystemConfig, u: float, theta: float,
                             omega: float = 0.0) -> CoupledEquationCoefficients:
    """The psi^+- coefficients written out directly in terms of theta."""
    n, delta = config.n, config.delta
    c = config.g * u * math.sqrt(n + 1)
    base = (n + 1) * omega
    cross = c * math.cos(2 * theta) + 0.5 * delta * math.sin(2 * theta)
    return CoupledEquationCoefficients(
        diag_plus=base - delta * math.cos(theta) ** 2 + c * math.sin(2 * theta),
        diag_minus=base - delta * math.sin(theta) ** 2 - c * math.sin(2 * theta),
        coupling_plus=cross,
        coupling_minus=cross,
    )


def interaction_block(config: SystemConfig, u: float, omega: float = 0.0) -> np.ndarray:
    """2x2 block of the internal Hamiltonian over (|a,n>, |b,n+1>)."""
    n = config.n
    c = config.g * u * math.sqrt(n + 1)
    return np.array([[(n + 1) * omega - config.delta, c], [c, (n + 1) * omega]])


def block_reference_energy(config: SystemConfig, omega: float = 0.0) -> float:
    """Constant removed when measuring energies from the |a,n> asymptote."""
    return (config.n + 1) * omega - config.delta


def block_eigenvalues_match(config: SystemConfig, u: float, omega: float = 0.0) -> bool:
    """True if the block spectrum equals channel_energies plus the reference."""
    ev = np.linalg.eigvalsh(interaction_block(config, u, omega))
    vp, vm = channel_energies(config, u)
    ref = block_reference_energy(config, omega)
    return np.allclose(sorted(ev), sorted([vp + ref, vm + ref]), rtol=0, atol=1e-12 * max(1, abs(omega)))
