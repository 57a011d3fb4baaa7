//! Single-photon emission and absorption by emitters coupled to a waveguide
//! near its cut-off frequency.
//!
//! * [`model`]: dispersion, density of states and coupling calibration.
//! * [`design`]: control pulses that emit or absorb a prescribed photon.
//! * [`dynamics`]: forward propagation of the emitter-field system.
//! * [`emission`]: spontaneous emission, Lamb shift and the bound state.
//!
//! Units are meV, ps and µm throughout (see [`units`]).

pub mod design;
pub mod dynamics;
pub mod emission;
pub mod error;
pub mod grid;
pub mod model;
mod modes;
pub mod quad;
pub mod units;
pub mod wavepacket;

pub use design::{
    c1_reconstruct, c2_history, c3_from_target, design_receiving_pulse, design_sending_pulse,
    design_sending_pulse_markovian, ControlPulse, DesignGrids, DesignRecord, ExcitedProfile, FieldHistory,
    NodeRole, ThreeLevelNode,
};
pub use dynamics::{
    population_traces, propagate_receiving, propagate_sending, sending_fidelity, PopulationTraces, Recording,
    Trajectory,
};
pub use emission::{
    bound_state, delta_closed_form, delta_numeric, excited_amplitude, field_snapshot, gamma_of_omega,
    propagate_two_level, spectral_function, weisskopf_wigner, BoundState, EmissionResult, FieldSnapshot,
    TwoLevelParams,
};
pub use error::{Error, Result};
pub use grid::{KGrid, TimeGrid};
pub use model::WaveguideModel;
pub use num_complex::Complex64;
pub use units::HBAR;
pub use wavepacket::SpectralWavepacket;
