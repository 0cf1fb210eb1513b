"""Numerical realization of the twisted-TMD continuum Hamiltonian.

Band structure by plane-wave diagonalization of the Bloch fibers, the
single-well reference operator, harmonic level predictions, Chern numbers
of the low bands, Agmon tunneling actions, and band-narrowing scans.
"""

__version__ = "0.1.0"

from .agmon import AgmonField, SquareGrid, agmon_distance, tunneling_action, weight_field
from .blochpw import (
    BandStructure,
    BlochMatrix,
    PlaneWaveBasis,
    assemble_bloch,
    bands_on,
    build_basis,
    convergence_study,
    hermitian_eigs,
    suggested_gcut,
)
from .harmonic import (
    HarmonicData,
    compare,
    levels_up_to,
    numeric_coeffs,
    paper_coeffs,
    predicted_E,
)
from .lattice import (
    KGrid,
    KPath,
    Lattice,
    build_lattice,
    kgrid,
    kpath,
    reduce_to_cell,
)
from .potential import (
    FourierTable,
    ModelParams,
    QuadraticWellData,
    WellAudit,
    assemble_V,
    eigs_exact,
    eigs_papermode,
    eval_T,
    eval_intralayer,
    fourier_table,
    numeric_harmonic_data,
    to_numeric_coords,
    wells_audit,
)
from .scan import ExpFit, ScanResult, band_widths, exp_fit, flatband_audit, narrowing_scan
from .singlewell import WellProblem, assemble_well, chi_profile, well_eigs, well_ground_energy
from .topology import CurvatureField, GapClosureError, berry_links, curvature_oddness_check
