"""Hermitian eigensolutions with gauge continuity, plus derived qubit numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace, fields as dc_fields

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .circuit import (
    ChargeBasis,
    CircuitSpec,
    HermitianOperator,
    Variant,
    build_hamiltonian,
    parity_permutation,
    physical_sector_indices,
)

__all__ = [
    "EigenSolution",
    "QubitParams",
    "SpectrumError",
    "GaugeAlignmentError",
    "diagonalize",
    "qubit_eigensolution",
    "qubit_params",
    "align_gauge",
    "sweep",
]

DENSE_DIM_LIMIT = 2000
RESIDUAL_RTOL = 1e-9
DEGENERACY_TOL = 1e-9


class SpectrumError(RuntimeError):
    """Eigensolver failure or invalid request."""


class GaugeAlignmentError(SpectrumError):
    """Eigenvector overlap with the reference dropped below threshold."""


@dataclass
class EigenSolution:
    """Lowest-k eigenpairs: ascending energies, orthonormal eigenvectors."""

    energies: np.ndarray
    states: np.ndarray  # column i is the eigenvector of energies[i]
    basis: ChargeBasis | None
    k: int

    def state(self, i: int) -> np.ndarray:
        return self.states[:, i]


@dataclass(frozen=True)
class QubitParams:
    """Qubit frequency and anharmonicity, both in h GHz."""

    omega_q: float
    anharmonicity: float


def _lowest_k(matrix: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    dim = matrix.shape[0]
    if dim <= DENSE_DIM_LIMIT:
        return scipy.linalg.eigh(matrix, subset_by_index=(0, k - 1))
    energies, states = scipy.sparse.linalg.eigsh(matrix, k=k, which="SA")
    order = np.argsort(energies)
    return energies[order], states[:, order]


def diagonalize(op: HermitianOperator | np.ndarray, k: int,
                basis: ChargeBasis | None = None,
                sector: str | None = None) -> EigenSolution:
    """Lowest-k eigensolution of a Hermitian operator.

    Dense solver below dimension 2000, Lanczos above. Residuals are
    checked against ``RESIDUAL_RTOL * ||H||``. With ``sector`` set to
    ``"even"`` or ``"odd"``, a (phi, theta)-basis operator is restricted
    to the corresponding (n_phi + n_theta) parity block before solving;
    eigenvectors are embedded back into the full basis. Degenerate
    clusters are rotated to eigenstates of the phi -> -phi parity when a
    basis is known, even-parity state first, for deterministic labeling.
    """
    if isinstance(op, HermitianOperator):
        matrix = op.matrix
        basis = op.basis
    else:
        matrix = np.asarray(op)
        scale = np.abs(matrix).max()
        if scale > 0 and np.abs(matrix - matrix.conj().T).max() > 1e-10 * scale:
            raise SpectrumError("input operator is not Hermitian")
    dim = matrix.shape[0]
    if not (1 <= k <= dim):
        raise SpectrumError(f"k = {k} out of range for dimension {dim}")
    if sector is not None:
        if basis is None:
            raise SpectrumError("sector restriction requires a basis descriptor")
        idx = physical_sector_indices(basis, 0 if sector == "even" else 1)
        sub = matrix[np.ix_(idx, idx)]
        energies, sub_states = _lowest_k(sub, min(k, idx.size))
        states = np.zeros((dim, energies.size), dtype=sub_states.dtype)
        states[idx] = sub_states
    else:
        energies, states = _lowest_k(matrix, k)
    norm = np.linalg.norm(matrix, ord=np.inf)
    residual = np.linalg.norm(matrix @ states - states * energies, axis=0)
    if norm > 0 and residual.max() > RESIDUAL_RTOL * norm:
        raise SpectrumError(
            f"eigensolver residuals too large: max {residual.max():.3e} "
            f"vs bound {RESIDUAL_RTOL * norm:.3e}"
        )
    sol = EigenSolution(energies=energies, states=states, basis=basis, k=energies.size)
    if basis is not None and basis.modes[0] in ("phi", "phi1") and len(basis.modes) == 2:
        _order_degenerate_by_parity(sol)
    return sol


def _order_degenerate_by_parity(sol: EigenSolution) -> None:
    """Rotate exactly degenerate clusters to phi-parity eigenstates.

    Keeps labeling deterministic at the flux frustration point, where
    the well doublet is degenerate; even parity is listed first.
    """
    clusters = _degenerate_clusters(sol.energies, 1e-12)
    if all(c.stop - c.start == 1 for c in clusters):
        return
    p = parity_permutation(sol.basis)
    for cluster in clusters:
        if cluster.stop - cluster.start == 1:
            continue
        block = sol.states[:, cluster]
        pvals, rot = np.linalg.eigh(block.conj().T @ (p @ block))
        order = np.argsort(-pvals)  # even (+1) first
        sol.states[:, cluster] = block @ rot[:, order]


def qubit_eigensolution(spec: CircuitSpec, k: int = 5,
                        charging_scale: float = 1.0) -> EigenSolution:
    """Physical lowest-k eigensolution of a circuit.

    For the single-loop variant this restricts to the even
    (n_phi + n_theta) sector; the node-variable variants have no
    redundant sector and are solved in full.
    """
    h = build_hamiltonian(spec, charging_scale=charging_scale)
    sector = "even" if spec.variant is Variant.SINGLE_LOOP else None
    return diagonalize(h, k, sector=sector)


def qubit_params(sol: EigenSolution) -> QubitParams:
    """omega_q = E1 - E0 and anharmonicity = (E2 - E0) - 2*(E1 - E0)."""
    if sol.k < 3:
        raise SpectrumError("qubit_params requires at least 3 eigenvalues")
    e = sol.energies
    omega_q = float(e[1] - e[0])
    return QubitParams(omega_q=omega_q, anharmonicity=float((e[2] - e[0]) - 2 * omega_q))


def _degenerate_clusters(energies: np.ndarray, tol: float) -> list[slice]:
    clusters = []
    start = 0
    scale = max(1.0, float(np.abs(energies).max()))
    for i in range(1, len(energies) + 1):
        if i == len(energies) or energies[i] - energies[i - 1] > tol * scale:
            clusters.append(slice(start, i))
            start = i
    return clusters


def align_gauge(reference: EigenSolution, current: EigenSolution,
                min_overlap: float = 0.5) -> EigenSolution:
    """Fix eigenvector phases (and degenerate rotations) against a reference.

    Each current eigenvector is multiplied by a unit phase so that
    <ref_i|cur_i> is real and positive; within (near-)degenerate
    clusters the subspace is rotated to maximize overlap with the
    reference basis (polar decomposition of the overlap block).
    Energies are returned untouched. ``min_overlap <= 0`` disables the
    level-crossing check and aligns best-effort.
    """
    if reference.k != current.k:
        raise SpectrumError("reference and current keep different state counts")
    if reference.states.shape != current.states.shape:
        raise SpectrumError("reference and current bases differ")
    states = current.states.copy()
    for cluster in _degenerate_clusters(current.energies, DEGENERACY_TOL):
        block = reference.states[:, cluster].conj().T @ states[:, cluster]
        if cluster.stop - cluster.start == 1:
            ov = block[0, 0]
            if abs(ov) < min_overlap:
                raise GaugeAlignmentError(
                    f"overlap |<ref|cur>| = {abs(ov):.3f} < {min_overlap} for "
                    f"state {cluster.start}; refine the parameter step"
                )
            if abs(ov) > 0:
                states[:, cluster] *= ov.conj() / abs(ov)
        else:
            u, s, vh = np.linalg.svd(block)
            if s.min() < min_overlap:
                raise GaugeAlignmentError(
                    f"degenerate cluster {cluster} overlap {s.min():.3f} < {min_overlap}"
                )
            states[:, cluster] = states[:, cluster] @ (u @ vh).conj().T
    return EigenSolution(energies=current.energies.copy(), states=states,
                         basis=current.basis, k=current.k)


def _spec_with(spec: CircuitSpec, parameter: str, value) -> CircuitSpec:
    if parameter not in {f.name for f in dc_fields(CircuitSpec)}:
        raise SpectrumError(f"unknown CircuitSpec parameter {parameter!r}")
    return dc_replace(spec, **{parameter: value})


def sweep(spec: CircuitSpec, parameter: str, values, quantity: str = "energies",
          k: int = 5) -> dict[str, np.ndarray]:
    """Diagonalize along a 1-D parameter sweep with sequential gauge alignment.

    ``quantity`` is one of ``energies``, ``omega_q``, ``anharmonicity``.
    Returns a dict with the parameter values and the requested columns;
    eigensolutions are gauge-stitched in sweep order.
    """
    if quantity not in ("energies", "omega_q", "anharmonicity"):
        raise SpectrumError(f"unknown sweep quantity {quantity!r}")
    values = np.asarray(list(values), dtype=float)
    if not np.all(np.isfinite(values)):
        raise SpectrumError("sweep values must be finite")
    k_eff = max(k, 3)
    rows = []
    solutions: list[EigenSolution] = []
    previous: EigenSolution | None = None
    for value in values:
        sol = qubit_eigensolution(_spec_with(spec, parameter, value), k_eff)
        if previous is not None:
            sol = align_gauge(previous, sol)
        previous = sol
        solutions.append(sol)
        qp = qubit_params(sol)
        rows.append((sol.energies.copy(), qp.omega_q, qp.anharmonicity))
    out: dict[str, np.ndarray] = {parameter: values}
    if quantity == "energies":
        out["energies"] = np.array([r[0] for r in rows])
    elif quantity == "omega_q":
        out["omega_q"] = np.array([r[1] for r in rows])
    else:
        out["anharmonicity"] = np.array([r[2] for r in rows])
    out["_solutions"] = solutions  # kept for callers that stitch further
    return out
