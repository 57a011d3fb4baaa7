//! Unit system: energies in meV, times in ps, lengths in µm.
//!
//! All modules take ħ from here. Group velocities are returned in µm/ps;
//! the dispersion itself works with the energy speed `ħ v` in meV·µm.

/// Reduced Planck constant in meV·ps.
pub const HBAR: f64 = 0.658_211_956_9;

/// Speed of light in vacuum, µm/ps.
pub const SPEED_OF_LIGHT: f64 = 299.792_458;

/// Dipole moment (Debye) of the reference emitter used to anchor [`rate_for_dipole`].
pub const REFERENCE_DIPOLE_DEBYE: f64 = 75.0;

/// Markovian decay rate (meV) of the reference emitter at one meV above the cut-off.
pub const REFERENCE_RATE_MEV: f64 = 0.27;

/// Decay rate for a dipole moment `p` (Debye), scaled from the reference emitter.
///
/// The rate goes as `p²`, so 300 D gives 16 × 0.27 = 4.32 meV.
pub fn rate_for_dipole(p_debye: f64) -> f64 {
    REFERENCE_RATE_MEV * (p_debye / REFERENCE_DIPOLE_DEBYE).powi(2)
}
