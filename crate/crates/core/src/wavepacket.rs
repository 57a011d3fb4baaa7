//! Single-photon wavepackets sampled on a k-grid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::KGrid;
use crate::model::WaveguideModel;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWavepacket {
    pub kgrid: KGrid,
    pub amplitudes: Vec<Complex64>,
    /// Carrier frequency ω1 (meV) when the packet was built from a closed form.
    pub center: Option<f64>,
    /// Spectral width σ0 (meV) for sech packets.
    pub width: Option<f64>,
}

impl SpectralWavepacket {
    pub fn from_amplitudes(kgrid: KGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != kgrid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                kgrid.len()
            )));
        }
        Ok(SpectralWavepacket { kgrid, amplitudes, center: None, width: None })
    }

    pub fn zeros(kgrid: KGrid) -> Self {
        SpectralWavepacket {
            kgrid,
            amplitudes: vec![Complex64::new(0.0, 0.0); kgrid.len()],
            center: None,
            width: None,
        }
    }

    /// `F(k) ∝ sech((ω_k - ω1)/σ0)`, normalised so that `Σ|F|² dk = 1`.
    pub fn sech(model: &WaveguideModel, kgrid: KGrid, omega1: f64, sigma0: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::Domain(format!("sigma0 must be positive, got {sigma0}")));
        }
        if !(omega1 > model.omega0) {
            return Err(Error::Domain(format!(
                "carrier {omega1} meV must lie above the cut-off {} meV",
                model.omega0
            )));
        }
        let top = model.dispersion(kgrid.upper_edge());
        let bottom = model.dispersion(0.0);
        let lower_needed = (omega1 - 10.0 * sigma0).max(model.omega0);
        if top < omega1 + 10.0 * sigma0 || model.dispersion(kgrid.k(0)) > lower_needed.max(bottom) + 0.5 * sigma0 {
            return Err(Error::InvalidGrid(format!(
                "k-grid spans {bottom:.6}..{top:.6} meV, narrower than ±10 sigma0 around {omega1} meV"
            )));
        }
        if top < omega1 + 20.0 * sigma0 {
            log::warn!("k-grid covers less than +20 sigma0 above the carrier");
        }
        if omega1 - 5.0 * sigma0 <= model.omega0 {
            log::warn!("packet within 5 sigma0 of the cut-off; its spectrum is clipped by the edge");
        }
        let mut amps: Vec<Complex64> = (0..kgrid.len())
            .map(|j| {
                let x = (model.dispersion(kgrid.k(j)) - omega1) / sigma0;
                Complex64::new(1.0 / x.cosh(), 0.0)
            })
            .collect();
        let norm = norm_squared(&amps, kgrid.dk()).sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(SpectralWavepacket { kgrid, amplitudes: amps, center: Some(omega1), width: Some(sigma0) })
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(&self.amplitudes, self.kgrid.dk())
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|a| a.norm_sqr() == 0.0)
    }

    /// `Σ conj(self)·other·dk`.
    pub fn overlap(&self, other: &SpectralWavepacket) -> Result<Complex64> {
        self.kgrid.check_same(&other.kgrid)?;
        let s: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.kgrid.dk())
    }

    pub fn with_phase(&self, theta: f64) -> SpectralWavepacket {
        let p = Complex64::from_polar(1.0, theta);
        SpectralWavepacket {
            amplitudes: self.amplitudes.iter().map(|a| a * p).collect(),
            ..self.clone()
        }
    }

    pub fn conj(&self) -> SpectralWavepacket {
        SpectralWavepacket {
            amplitudes: self.amplitudes.iter().map(|a| a.conj()).collect(),
            ..self.clone()
        }
    }

    /// Spectral mean `Σ ω_k |F_k|² / Σ |F_k|²`, or the stored carrier.
    pub fn carrier(&self, model: &WaveguideModel) -> Result<f64> {
        if let Some(c) = self.center {
            return Ok(c);
        }
        let norm = self.norm_squared();
        if norm == 0.0 {
            return Err(Error::Domain("empty wavepacket has no carrier frequency".into()));
        }
        let s: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| model.dispersion(self.kgrid.k(j)) * a.norm_sqr())
            .sum();
        Ok(s * self.kgrid.dk() / norm)
    }
}

pub(crate) fn norm_squared(amps: &[Complex64], dk: f64) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * dk
}
