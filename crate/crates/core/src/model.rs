//! Waveguide continuum above the cut-off frequency.
//!
//! Dispersion `ω_k = sqrt(ω0² + (ħ v k)²)`. Near the cut-off the density of
//! states is approximated by its square-root form
//! `D(ω) = sqrt(ω0/2) / (ħ v sqrt(ω - ω0))`, which is what every rate and
//! self-energy in this crate is built on.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::{HBAR, SPEED_OF_LIGHT};

/// Default cut-off frequency, meV (1.5 eV).
pub const DEFAULT_OMEGA0: f64 = 1.5e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideModel {
    /// Cut-off frequency ω0, meV.
    pub omega0: f64,
    /// Phase velocity parameter v, µm/ps.
    pub v: f64,
    /// Emitter-waveguide coupling g, meV·µm^½.
    pub g: f64,
    /// Leakage rate γ' of the excited level into non-guided modes, meV.
    pub leak_rate: f64,
}

impl Default for WaveguideModel {
    fn default() -> Self {
        WaveguideModel {
            omega0: DEFAULT_OMEGA0,
            v: SPEED_OF_LIGHT,
            g: 0.0,
            leak_rate: 0.0,
        }
    }
}

impl WaveguideModel {
    pub fn new(omega0: f64, v: f64, g: f64, leak_rate: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::Domain(format!("cut-off frequency must be positive, got {omega0}")));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("velocity must be positive, got {v}")));
        }
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::Domain(format!("coupling must be non-negative, got {g}")));
        }
        if !(leak_rate.is_finite() && leak_rate >= 0.0) {
            return Err(Error::Domain(format!("leak rate must be non-negative, got {leak_rate}")));
        }
        Ok(WaveguideModel { omega0, v, g, leak_rate })
    }

    pub fn with_coupling(self, g: f64) -> Result<Self> {
        WaveguideModel::new(self.omega0, self.v, g, self.leak_rate)
    }

    pub fn with_leak_rate(self, leak_rate: f64) -> Result<Self> {
        WaveguideModel::new(self.omega0, self.v, self.g, leak_rate)
    }

    /// Model whose Markovian rate at `omega_center` equals `gamma`.
    pub fn calibrated(self, gamma: f64, omega_center: f64) -> Result<Self> {
        let g = self.calibrate_coupling(gamma, omega_center)?;
        self.with_coupling(g)
    }

    /// `ħ v` in meV·µm.
    pub fn energy_speed(&self) -> f64 {
        HBAR * self.v
    }

    pub(crate) fn dispersion(&self, k: f64) -> f64 {
        self.omega0.hypot(self.energy_speed() * k)
    }

    /// `dω/dk` in meV·µm.
    pub(crate) fn slope(&self, k: f64) -> f64 {
        let c = self.energy_speed();
        c * c * k / self.dispersion(k)
    }

    pub fn omega_of_k(&self, k: f64) -> Result<f64> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::Domain(format!("wavenumber must be non-negative, got {k}")));
        }
        Ok(self.dispersion(k))
    }

    pub fn k_of_omega(&self, omega: f64) -> Result<f64> {
        if !(omega.is_finite() && omega >= self.omega0) {
            return Err(Error::Domain(format!(
                "frequency {omega} meV lies below the cut-off {} meV",
                self.omega0
            )));
        }
        // (ω - ω0)(ω + ω0) keeps precision for ω close to ω0
        Ok(((omega - self.omega0) * (omega + self.omega0)).sqrt() / self.energy_speed())
    }

    /// Density of states per unit length, 1/(meV·µm), square-root edge form.
    pub fn dos(&self, omega: f64) -> Result<f64> {
        let x = self.above_edge(omega)?;
        Ok((self.omega0 / 2.0).sqrt() / (self.energy_speed() * x.sqrt()))
    }

    /// Group velocity in µm/ps.
    pub fn group_velocity(&self, omega: f64) -> Result<f64> {
        self.above_edge(omega)?;
        let k = self.k_of_omega(omega)?;
        Ok(self.slope(k) / HBAR)
    }

    /// γ(ω) = 2π g² D(ω), meV.
    pub fn markovian_rate(&self, omega_center: f64) -> Result<f64> {
        Ok(2.0 * PI * self.g * self.g * self.dos(omega_center)?)
    }

    /// Coupling g giving the Markovian rate `gamma` at `omega_center`.
    pub fn calibrate_coupling(&self, gamma: f64, omega_center: f64) -> Result<f64> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Domain(format!("target rate must be positive, got {gamma}")));
        }
        Ok((gamma / (2.0 * PI * self.dos(omega_center)?)).sqrt())
    }

    /// Edge strength A with γ(ω) = 2π A / sqrt(ω - ω0), meV^{3/2}.
    pub fn edge_strength(&self) -> f64 {
        self.g * self.g * (self.omega0 / 2.0).sqrt() / self.energy_speed()
    }

    /// Lamb shift at `omega` contributed by the continuum above `omega_top`.
    ///
    /// A discretised continuum that stops at `omega_top` misses this piece
    /// of the self-energy; adding it back as a static level shift makes the
    /// truncated model reproduce the full edge self-energy near `omega`.
    pub fn continuum_tail_shift(&self, omega: f64, omega_top: f64) -> Result<f64> {
        let a_edge = self.edge_strength();
        let top = omega_top - self.omega0;
        if !(top > 0.0) {
            return Err(Error::Domain("continuum top must lie above the cut-off".into()));
        }
        let x = omega - self.omega0;
        if x >= top {
            return Err(Error::Domain(format!(
                "reference frequency {omega} meV is not below the continuum top {omega_top} meV"
            )));
        }
        Ok(a_edge * tail_integral(x, top.sqrt()))
    }

    fn above_edge(&self, omega: f64) -> Result<f64> {
        let x = omega - self.omega0;
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!(
                "frequency {omega} meV is not above the cut-off {} meV",
                self.omega0
            )));
        }
        Ok(x)
    }
}

/// ∫_u_top^∞ 2 du / (x - u²), valid for x < u_top².
pub(crate) fn tail_integral(x: f64, u_top: f64) -> f64 {
    if x < 0.0 {
        let b = (-x).sqrt();
        -2.0 / b * (b / u_top).atan()
    } else if x == 0.0 {
        -2.0 / u_top
    } else {
        let a = x.sqrt();
        -((u_top + a) / (u_top - a)).ln() / a
    }
}
