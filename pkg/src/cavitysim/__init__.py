"""Simulation toolkit for a single atom strongly coupled to a driven, lossy cavity
with an intracavity dipole trap: steady-state normal-mode spectra, analytic light
forces (mean force, friction, momentum diffusion), and stochastic trajectory
simulation of the full trapping/probing experiment.
"""

from .qed import (
    DressedPair,
    DriveSettings,
    SteadyState,
    SystemParams,
    coupling_at,
    coupling_gradient,
    dressed_states,
    effective_atom_detuning,
    excitation_map,
    kappa_from_finesse,
    rb85_cavity_params,
    steady_state,
    transmission_map,
    trap_intensity_at,
    trap_intensity_gradient,
)
from .forces import (
    DiffusionParts,
    ForceBreakdown,
    ForceOptions,
    diffusion,
    friction_tensor,
    mean_dipole_force,
    total_force_and_noise,
    trap_force,
    trap_potential,
)
from .rng import RngStream, split_seed
from .dynamics import (
    AtomState,
    KickOptions,
    NoiseProcess,
    StepControl,
    default_noise_dt,
    noise_advance,
    simulate,
    spontaneous_recoil_direction,
    step,
)
from .protocol import (
    EnsembleStats,
    ProtocolConfig,
    RunRecord,
    calibrate_noise,
    excess_loss_rate,
    run_trajectory,
    storage_statistics,
)
from .ensemble import SpectrumPoint, loss_spectrum, run_ensemble
from .config import RunConfig, load_config, save_config

__version__ = "0.1.0"
