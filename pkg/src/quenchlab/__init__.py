"""Quench dynamics of 1D optomechanical arrays: Bloch bands, Landau-Zener and
Kibble-Zurek comparisons, dissipation, and SSH edge-state quenches."""

from .analytics import (KZParams, PowerLawFit, PowerLawRegressor, fit_power_law, kc_landau_zener, kz_beta_squared,
                        kz_excitation, kz_freeze_out, lz_probability)
from .bloch import ArrayParams, BandTable, ModeBasis, band_gap, band_sweep, bloch_matrix, decompose, dispersion
from .numerics import (EigenSystem, StepPolicy, StepUnderflowError, SymmetricMatrix, eig_hermitian_2x2,
                       eig_symmetric, integrate_matrix_ode)
from .quench import (STANDARD_TAUS, DissipativeParams, KcCurve, PopulationTrace, QuenchResult, QuenchSchedule,
                     ThermalPopulations, dissipative_spectrum, evolve_dissipative, evolve_quench, g_of_t,
                     integrated_excitation, kc_curve, kc_extract, net_excitation_spectrum, thermal_populations)
from .ssh import (EdgeQuenchResult, SSHParams, SSHSpectrum, arrival_time, build_ssh, edge_states,
                  effective_coupling, quench_edge_state, spectrum_scan, ssh_spectrum)

__version__ = "0.1.0"
