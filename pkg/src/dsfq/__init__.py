"""dsfq: numerical toolkit for double-shunted flux qubits.

Charge-basis Hamiltonians, spectra with gauge continuity, coherence
estimates, gradiometric sweet-spot analysis, time-dependent gate
simulation with variable protection, and dispersive readout modeling.
Energies are E/h in GHz, times in ns unless noted.
"""

from .circuit import (
    ChargeBasis,
    CircuitSpec,
    CoupledSpec,
    HermitianOperator,
    Variant,
    build_hamiltonian,
    build_operator,
    to_phase_grid,
)
from .coherence import (
    CoherenceReport,
    Environment,
    NoiseChannel,
    RateConventions,
    coherence_report,
    decay_integrated_fidelity,
    default_channels,
    dephasing_rates,
    relaxation_rates,
)
from .evolve import (
    AlphaProfile,
    DrivePulse,
    PropagationSettings,
    Trajectory,
    propagate_state,
    propagate_subspace_unitary,
)
from .gates import (
    GateReport,
    calibrate_drive,
    entangling_power,
    fsim_decompose,
    fsim_unitary,
    gate_fidelity,
    run_single_qubit_gate,
    run_two_qubit_gate,
    zz_strength,
)
from .gradiometric import LoopGeometry, compensation_delta, flux_phases, vc_vs
from .readout import ResonatorSpec, dispersive_shift, frozen_well_model, t1_limited_readout_fidelity
from .spectrum import (
    EigenSolution,
    QubitParams,
    align_gauge,
    diagonalize,
    qubit_eigensolution,
    qubit_params,
    sweep,
)

__version__ = "0.1.0"
