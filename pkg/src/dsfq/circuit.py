"""Charge-basis Hamiltonians and operators for double-shunted flux qubits.

All energies are stored as E/h in GHz; phases are in radians. The two
periodic modes of a qubit are represented in a truncated Cooper-pair
number basis, n in [-cutoff, cutoff] per mode, so each mode has
dimension 2*cutoff + 1.

Three circuit variants are supported:

* ``SINGLE_LOOP``  -- the (phi, theta) description of the three-junction
  loop: H = 2*EC*(n_phi - ng_phi)^2 + 2*EC*(n_theta - ng_theta)^2
  - 2*EJ*cos(phi)*cos(theta) - alpha*EJ*cos(2*phi + phi_ext).
* ``GRADIOMETRIC`` -- the double-loop qubit in node variables
  (phi1, phi2), with the tunable-junction term split over the two loops:
  H_J = -EJ*cos(phi1) - EJ*cos(phi2)
  - (EJ/2)*[alpha1*cos(phi1 - phi2 + phi_ext1)
            + alpha2*cos(phi1 - phi2 + phi_ext2)].
* ``NODE_BASIS``   -- a single qubit in node variables with the charging
  energy of the coupled-circuit analysis: the coupled node carries
  4*EC*(C + Cg)/(C + 2*Cg), the other node 4*EC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

__all__ = [
    "Variant",
    "ChargeBasis",
    "CircuitSpec",
    "CoupledSpec",
    "HermitianOperator",
    "build_hamiltonian",
    "build_operator",
    "coupling_operator",
    "to_phase_grid",
    "phase_grid_points",
]

HERMITICITY_RTOL = 1e-12


class Variant(Enum):
    SINGLE_LOOP = "single_loop"
    GRADIOMETRIC = "gradiometric"
    NODE_BASIS = "node_basis"


class CircuitError(ValueError):
    """Invalid circuit specification or operator request."""


@dataclass(frozen=True)
class ChargeBasis:
    """Truncated charge basis descriptor: mode names and per-mode cutoff."""

    modes: tuple[str, ...]
    cutoff: int

    @property
    def dim_per_mode(self) -> int:
        return 2 * self.cutoff + 1

    @property
    def dim(self) -> int:
        return self.dim_per_mode ** len(self.modes)

    def charges(self) -> np.ndarray:
        """Integer charge values of one mode, ascending."""
        return np.arange(-self.cutoff, self.cutoff + 1)


@dataclass(frozen=True)
class CircuitSpec:
    """Full parameterization of one qubit circuit.

    Fields irrelevant to the chosen variant are ignored but still
    validated for range. ``alpha1``/``alpha2`` and ``phi_ext1``/
    ``phi_ext2`` apply to the gradiometric variant only.
    """

    variant: Variant = Variant.SINGLE_LOOP
    ej: float = 10.0
    ec: float = 0.1
    alpha: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    phi_ext: float = 0.997 * math.pi
    phi_ext1: float = math.pi
    phi_ext2: float = -math.pi
    ng_phi: float = 0.0
    ng_theta: float = 0.0
    cutoff: int = 12

    def __post_init__(self) -> None:
        if not (self.ej > 0 and self.ec > 0):
            raise CircuitError(f"ej and ec must be positive, got {self.ej}, {self.ec}")
        for name in ("alpha", "alpha1", "alpha2"):
            val = getattr(self, name)
            if not (0.0 <= val <= 1.5):
                raise CircuitError(f"{name} = {val} outside [0, 1.5]")
        if self.cutoff < 1:
            raise CircuitError(f"cutoff must be >= 1, got {self.cutoff}")
        if not isinstance(self.variant, Variant):
            raise CircuitError(f"unknown variant {self.variant!r}")

    @property
    def basis(self) -> ChargeBasis:
        if self.variant is Variant.SINGLE_LOOP:
            return ChargeBasis(("phi", "theta"), self.cutoff)
        return ChargeBasis(("phi1", "phi2"), self.cutoff)

    def with_alpha(self, alpha: float) -> "CircuitSpec":
        """Copy of the spec with the tunable junction(s) set to ``alpha``."""
        if self.variant is Variant.GRADIOMETRIC:
            return replace(self, alpha1=alpha, alpha2=alpha)
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class CoupledSpec:
    """Two capacitively coupled qubits in their node-variable description.

    ``cg_ratio`` is Cg/C. The charging prefactors follow from the
    Legendre transform of the coupled circuit: the coupled node of each
    qubit carries 4*EC*(C + Cg)/(C + 2*Cg), the other node 4*EC, and the
    coupling term 4*EC*Cg/(C + Cg) * n1*n3.
    """

    qubit1: CircuitSpec
    qubit2: CircuitSpec
    cg_ratio: float = 0.3

    def __post_init__(self) -> None:
        for q in (self.qubit1, self.qubit2):
            if q.variant is not Variant.NODE_BASIS:
                raise CircuitError("coupled qubits must use the NODE_BASIS variant")
        if self.cg_ratio < 0:
            raise CircuitError(f"cg_ratio must be >= 0, got {self.cg_ratio}")

    @property
    def charging_scale(self) -> float:
        """(C + Cg)/(C + 2*Cg) renormalization of the coupled node."""
        return (1.0 + self.cg_ratio) / (1.0 + 2.0 * self.cg_ratio)

    @property
    def coupling_energy(self) -> float:
        """Prefactor of the n1*n3 coupling term, in h GHz.

        The Legendre transform of the four-node circuit with shunt C per
        node and Cg between the coupled nodes gives
        8*EC*Cg/(C + 2*Cg) (the same inverse capacitance matrix that
        renormalizes the node charging term).
        """
        return 8.0 * self.qubit1.ec * self.cg_ratio / (1.0 + 2.0 * self.cg_ratio)


@dataclass
class HermitianOperator:
    """A labeled Hermitian matrix in a declared charge basis."""

    label: str
    basis: ChargeBasis
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise CircuitError(
                f"matrix shape {m.shape} does not match basis dimension {self.basis.dim}"
            )
        scale = np.abs(m).max()
        if scale > 0 and np.abs(m - m.conj().T).max() > HERMITICITY_RTOL * scale:
            raise CircuitError(f"operator {self.label!r} is not Hermitian")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.basis.dim


def _shift(dim: int, k: int) -> np.ndarray:
    """Matrix of exp(i*k*phi) in the charge basis: |n> -> |n + k>."""
    return np.eye(dim, k=-k)


def _mode_ops(cutoff: int) -> dict[str, np.ndarray]:
    d = 2 * cutoff + 1
    n = np.arange(-cutoff, cutoff + 1).astype(float)
    return {
        "n": np.diag(n),
        "s1": _shift(d, 1),
        "s2": _shift(d, 2),
        "eye": np.eye(d),
    }


def _kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def _single_loop_josephson(spec: CircuitSpec) -> np.ndarray:
    """H_J = -2*EJ*cos(phi)*cos(theta) - alpha*EJ*cos(2*phi + phi_ext)."""
    ops = _mode_ops(spec.cutoff)
    cos1 = 0.5 * (ops["s1"] + ops["s1"].T)
    hj = -2.0 * spec.ej * _kron2(cos1, cos1)
    phase = np.exp(1j * spec.phi_ext)
    barrier = -0.5 * spec.alpha * spec.ej * (phase * ops["s2"] + np.conj(phase) * ops["s2"].T)
    return hj + _kron2(barrier, ops["eye"])


def _single_loop_dflux(spec: CircuitSpec) -> np.ndarray:
    """dH/dphi_ext = alpha*EJ*sin(2*phi + phi_ext) for the single loop."""
    ops = _mode_ops(spec.cutoff)
    phase = np.exp(1j * spec.phi_ext)
    # sin(x) = (e^{ix} - e^{-ix}) / (2i)
    term = spec.alpha * spec.ej * (phase * ops["s2"] - np.conj(phase) * ops["s2"].T) / 2j
    return _kron2(term, ops["eye"])


def _node_josephson(
    spec: CircuitSpec, alphas: tuple[float, ...], phases: tuple[float, ...]
) -> np.ndarray:
    """Two-cosine node potential plus tunable-junction terms.

    Each (alpha_k, phase_k) pair contributes
    -w_k*EJ*cos(phi1 - phi2 + phase_k), where w_k = alpha_k for the
    node-basis single qubit and alpha_k/2 for the gradiometric loops.
    """
    ops = _mode_ops(spec.cutoff)
    cos1 = 0.5 * (ops["s1"] + ops["s1"].T)
    hj = -spec.ej * (_kron2(cos1, ops["eye"]) + _kron2(ops["eye"], cos1))
    hj = hj.astype(complex)
    s_rel = _kron2(ops["s1"], ops["s1"].T)  # exp(i*(phi1 - phi2))
    for weight, phase in zip(alphas, phases):
        ph = np.exp(1j * phase)
        hj -= 0.5 * weight * spec.ej * (ph * s_rel + np.conj(ph) * s_rel.conj().T)
    return hj


def _node_dflux(spec: CircuitSpec, weight: float, phase: float) -> np.ndarray:
    """d/dphase of -weight*EJ*cos(phi1 - phi2 + phase)."""
    ops = _mode_ops(spec.cutoff)
    s_rel = _kron2(ops["s1"], ops["s1"].T)
    ph = np.exp(1j * phase)
    return weight * spec.ej * (ph * s_rel - np.conj(ph) * s_rel.conj().T) / 2j


def _charging_diagonal(spec: CircuitSpec, charging_scale: float = 1.0) -> np.ndarray:
    """Diagonal of H_C for the requested variant, as a 1-D array."""
    n = np.arange(-spec.cutoff, spec.cutoff + 1).astype(float)
    n_a, n_b = np.meshgrid(n, n, indexing="ij")
    n_a, n_b = n_a.ravel(), n_b.ravel()
    if spec.variant is Variant.SINGLE_LOOP:
        return 2.0 * spec.ec * ((n_a - spec.ng_phi) ** 2 + (n_b - spec.ng_theta) ** 2)
    # Node variables: n_phi = n1 - n2, n_theta = n1 + n2. Offsets are
    # carried over from the (phi, theta) description.
    ng1 = 0.5 * (spec.ng_theta + spec.ng_phi)
    ng2 = 0.5 * (spec.ng_theta - spec.ng_phi)
    if spec.variant is Variant.GRADIOMETRIC:
        return 2.0 * spec.ec * (
            (n_a - n_b - spec.ng_phi) ** 2 + (n_a + n_b - spec.ng_theta) ** 2
        )
    return 4.0 * spec.ec * (
        charging_scale * (n_a - ng1) ** 2 + (n_b - ng2) ** 2
    )


def build_hamiltonian(spec: CircuitSpec, charging_scale: float = 1.0) -> HermitianOperator:
    """Construct H = H_C + H_J in the truncated charge basis.

    ``charging_scale`` renormalizes the coupled-node charging prefactor
    of the NODE_BASIS variant ((C + Cg)/(C + 2*Cg) when part of a
    coupled pair); it is ignored for the other variants.
    """
    hc = np.diag(_charging_diagonal(spec, charging_scale))
    if spec.variant is Variant.SINGLE_LOOP:
        hj = _single_loop_josephson(spec)
    elif spec.variant is Variant.GRADIOMETRIC:
        hj = _node_josephson(
            spec,
            (0.5 * spec.alpha1, 0.5 * spec.alpha2),
            (spec.phi_ext1, spec.phi_ext2),
        )
    elif spec.variant is Variant.NODE_BASIS:
        hj = _node_josephson(spec, (spec.alpha,), (spec.phi_ext,))
    else:  # pragma: no cover - guarded in __post_init__
        raise CircuitError(f"unknown variant {spec.variant!r}")
    return HermitianOperator(f"H[{spec.variant.value}]", spec.basis, hc + hj)


_OPERATOR_KINDS = (
    "n_phi",
    "n_theta",
    "n1",
    "phi_grid",
    "dH_dphi_ext",
    "dH_dng_phi",
    "dH_dng_theta",
)


def build_operator(
    kind: str, spec: CircuitSpec, grid_points: int = 256
) -> HermitianOperator:
    """Build a named operator in the charge basis of ``spec``.

    Kinds: ``n_phi``/``n_theta`` -- diagonal charge operators of the
    (phi, theta) pair; ``n1`` = (n_theta + n_phi)/2 (node charge driven
    by a capacitive line); ``dH_dphi_ext`` -- flux derivative of the
    Hamiltonian; ``dH_dng_phi``/``dH_dng_theta`` -- offset-charge
    derivatives; ``phi_grid`` -- the double-well coordinate phi as a
    multiplication operator on the [-pi, pi) branch, represented through
    the phase-grid transform with ``grid_points`` points per mode.
    """
    if kind not in _OPERATOR_KINDS:
        raise CircuitError(f"unknown operator kind {kind!r}")
    basis = spec.basis
    node = spec.variant is not Variant.SINGLE_LOOP
    ops = _mode_ops(spec.cutoff)
    eye = ops["eye"]
    n_a = _kron2(ops["n"], eye)
    n_b = _kron2(eye, ops["n"])
    # In node variables, n_phi = n1 - n2 and n_theta = n1 + n2.
    n_phi = (n_a - n_b) if node else n_a
    n_theta = (n_a + n_b) if node else n_b

    if kind == "n_phi":
        return HermitianOperator("n_phi", basis, n_phi)
    if kind == "n_theta":
        return HermitianOperator("n_theta", basis, n_theta)
    if kind == "n1":
        return HermitianOperator("n1", basis, 0.5 * (n_theta + n_phi))
    if kind == "dH_dng_phi":
        m = -4.0 * spec.ec * (n_phi - spec.ng_phi * np.eye(basis.dim))
        return HermitianOperator("dH_dng_phi", basis, m)
    if kind == "dH_dng_theta":
        m = -4.0 * spec.ec * (n_theta - spec.ng_theta * np.eye(basis.dim))
        return HermitianOperator("dH_dng_theta", basis, m)
    if kind == "dH_dphi_ext":
        if spec.variant is Variant.SINGLE_LOOP:
            m = _single_loop_dflux(spec)
        elif spec.variant is Variant.NODE_BASIS:
            m = _node_dflux(spec, spec.alpha, spec.phi_ext)
        else:
            raise CircuitError(
                "dH_dphi_ext is single-flux only; use per-loop derivatives "
                "for the gradiometric variant"
            )
        return HermitianOperator("dH_dphi_ext", basis, m)
    # phi_grid
    if grid_points < 2 or grid_points & (grid_points - 1) != 0:
        raise CircuitError(f"grid size {grid_points} is not a power of two")
    m = _phi_operator(spec, grid_points)
    return HermitianOperator("phi", basis, m)


def hamiltonian_decomposition(
    spec: CircuitSpec, charging_scale: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Split H(alpha) = H_const + alpha * H_barrier.

    The tunable-junction term is linear in alpha (for the gradiometric
    variant both alphas are scaled together), so time-varying barrier
    schedules only rescale ``H_barrier``.
    """
    unit = spec.with_alpha(1.0)
    h1 = build_hamiltonian(unit, charging_scale).matrix
    h0 = build_hamiltonian(unit.with_alpha(0.0), charging_scale).matrix
    return h0, h1 - h0


def gradiometric_loop_dflux(spec: CircuitSpec, loop: int) -> HermitianOperator:
    """dH/dphi_ext_loop for one loop of the gradiometric variant."""
    if spec.variant is not Variant.GRADIOMETRIC:
        raise CircuitError("per-loop flux derivatives require the gradiometric variant")
    if loop == 1:
        m = _node_dflux(spec, 0.5 * spec.alpha1, spec.phi_ext1)
    elif loop == 2:
        m = _node_dflux(spec, 0.5 * spec.alpha2, spec.phi_ext2)
    else:
        raise CircuitError(f"loop must be 1 or 2, got {loop}")
    return HermitianOperator(f"dH_dphi_ext{loop}", spec.basis, m)


def coupling_operator(coupled: CoupledSpec) -> np.ndarray:
    """n1 (x) n3 coupling matrix in the product charge basis.

    Returned as the pair of per-qubit node-charge matrices' Kronecker
    product; the energy prefactor is ``coupled.coupling_energy``.
    """
    ops1 = _mode_ops(coupled.qubit1.cutoff)
    ops2 = _mode_ops(coupled.qubit2.cutoff)
    n1 = _kron2(ops1["n"], ops1["eye"])
    n3 = _kron2(ops2["n"], ops2["eye"])
    return np.kron(n1, n3)


def physical_sector_indices(basis: ChargeBasis, parity: int = 0) -> np.ndarray:
    """Indices of the (n_phi + n_theta) parity sector of a (phi, theta) basis.

    The integer-charge (phi, theta) torus double-covers the physical
    node-variable torus: H never couples states of different
    (n_phi + n_theta) parity, and every physical level appears once per
    sector. States with even n_phi + n_theta map onto integer node
    charges n1 = (n_theta + n_phi)/2 and are the physical sector.
    """
    if basis.modes != ("phi", "theta"):
        raise CircuitError("sector restriction applies to (phi, theta) bases only")
    n = basis.charges()
    n_a, n_b = np.meshgrid(n, n, indexing="ij")
    return np.where(((n_a + n_b) % 2).ravel() == parity % 2)[0]


def parity_permutation(basis: ChargeBasis) -> np.ndarray:
    """Matrix of the reflection phi -> -phi (first mode, n -> -n)."""
    d = basis.dim_per_mode
    p = np.eye(d)[::-1]
    return np.kron(p, np.eye(d))


def phase_grid_points(grid_points: int) -> np.ndarray:
    """Uniform grid over [-pi, pi), matching the synthesis convention."""
    return -math.pi + 2.0 * math.pi * np.arange(grid_points) / grid_points


def _synthesis_matrix(cutoff: int, grid_points: int) -> np.ndarray:
    """(grid, 2*cutoff+1) matrix of exp(i*n*x)/sqrt(2*pi) per mode."""
    x = phase_grid_points(grid_points)
    n = np.arange(-cutoff, cutoff + 1)
    return np.exp(1j * np.outer(x, n)) / math.sqrt(2.0 * math.pi)


def to_phase_grid(
    state: np.ndarray, basis: ChargeBasis, grid_points: int = 256
) -> np.ndarray:
    """Fourier-synthesize a charge-basis state on the 2-D phase grid.

    Returns psi(x1, x2) = sum_{n1,n2} c_{n1,n2} e^{i n1 x1} e^{i n2 x2} / (2*pi)
    with x over [-pi, pi) per mode. The grid cell weight is
    (2*pi/grid_points)^2, so sum |psi|^2 * cell equals the state norm.
    """
    state = np.asarray(state)
    if state.shape != (basis.dim,):
        raise CircuitError(
            f"state dimension {state.shape} does not match basis ({basis.dim},)"
        )
    d = basis.dim_per_mode
    coeff = state.reshape(d, d)
    f = _synthesis_matrix(basis.cutoff, grid_points)
    return f @ coeff @ f.T


def _phi_operator(spec: CircuitSpec, grid_points: int) -> np.ndarray:
    """Multiplication by the double-well coordinate phi, via the grid.

    For the single loop this is the first mode's phase on the [-pi, pi)
    branch; for node variables it is (phi1 - phi2)/2 with the difference
    wrapped onto [-pi, pi). The branch cut sits where double-well states
    carry negligible weight.
    """
    d = spec.basis.dim_per_mode
    f = _synthesis_matrix(spec.cutoff, grid_points)
    w = 2.0 * math.pi / grid_points  # quadrature weight per grid point
    x = phase_grid_points(grid_points)
    if spec.variant is Variant.SINGLE_LOOP:
        phi_1d = w * (f.conj().T * x) @ f
        m = np.kron(phi_1d, np.eye(d))
    else:
        # phi(x1, x2) = wrap(x1 - x2)/2 is a function of the difference
        # only, so its matrix elements are diagonal in n1 - m1 = -(n2 - m2)
        # and reduce to one 1-D quadrature over the wrapped difference.
        # <n1 n2|phi|m1 m2> = delta_{n1-m1, m2-n2} * c_{n1-m1}, with
        # c_k = (1/2pi) int wrap(u)/2 e^{-i k u} du evaluated on the grid.
        k = np.arange(-2 * spec.cutoff, 2 * spec.cutoff + 1)
        wrapped = 0.5 * (np.mod(x + math.pi, 2.0 * math.pi) - math.pi)
        c = (wrapped[None, :] * np.exp(-1j * np.outer(k, x))).sum(axis=1) / grid_points
        n = np.arange(-spec.cutoff, spec.cutoff + 1)
        diff = n[:, None] - n[None, :]  # n - m per mode
        d1 = diff[:, :, None, None]
        d2 = diff[None, None, :, :]
        m = np.where(d1 == -d2, c[d1 + 2 * spec.cutoff], 0.0)  # [n1, m1, n2, m2]
        m = m.transpose(0, 2, 1, 3).reshape(d * d, d * d)
    return 0.5 * (m + m.conj().T)
