//! Inverse design of the Raman control pulse.
//!
//! Given the photon wavepacket F(k) a Λ-type emitter (levels 1, 2, 3; the
//! 3→2 transition couples to the guide) should emit, the excited amplitude
//! C3(t) follows from the inverse Fourier relation, the emitted field C2(k,t)
//! by integrating the field equation, and C1(t) from norm conservation plus a
//! phase equation. The pulse is then `Ω = conj(iħ Ċ1 / C3)`.
//!
//! Phases are never unwrapped. With `C = ρ e^{iφ}` one has `ρ² φ̇ = Im(C* Ċ)`,
//! and the equations of motion give
//!
//!   ρ1² φ̇1 = Im(C3* Ċ3) - Σ_k Im(C2* Ċ2) dk + S |C3|²/ħ,
//!
//! where S is the static shift contributed by modes above the k-grid.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{KGrid, TimeGrid};
use crate::model::WaveguideModel;
use crate::modes::{accumulate, strided_indices, synthesize, ModeSet};
use crate::units::HBAR;
use crate::wavepacket::SpectralWavepacket;

/// |C3| below this fraction of its peak: Ω is set to zero.
pub const MASK_THRESHOLD: f64 = 1e-6;
/// Ground-state population below which its phase is held fixed.
pub const PHASE_HOLD: f64 = 1e-8;
/// Tolerated negative ground-state population before the target is rejected.
pub const DEFICIT_TOLERANCE: f64 = 1e-6;
/// Edge ratio tolerated on a receiving window. Modes right at the cut-off
/// barely move, so their share of D3 never arrives and sits as a flat
/// background of order 1e-6..1e-5 that no window length removes.
pub const RECEIVER_EDGE_TOLERANCE: f64 = 1e-4;
/// Deficit tolerated on a receiver. A packet chirped by the edge dispersion
/// is not exactly absorbable at every instant; ρ² is clipped at zero there
/// and the small loss shows up in forward propagation instead.
pub const RECEIVER_DEFICIT_TOLERANCE: f64 = 1e-2;
/// Field snapshots kept in a history.
pub const MAX_SNAPSHOTS: usize = 512;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Λ emitter whose 3→2 transition ε32 couples to the guide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelNode {
    pub eps32: f64,
    pub model: WaveguideModel,
}

impl ThreeLevelNode {
    pub fn new(eps32: f64, model: WaveguideModel) -> Result<Self> {
        if !(eps32.is_finite() && eps32 > model.omega0) {
            return Err(Error::Domain(format!(
                "transition {eps32} meV must lie above the cut-off {} meV",
                model.omega0
            )));
        }
        Ok(ThreeLevelNode { eps32, model })
    }

    pub fn leak_rate(&self) -> f64 {
        self.model.leak_rate
    }

    pub fn with_leak_rate(self, leak_rate: f64) -> Result<Self> {
        ThreeLevelNode::new(self.eps32, self.model.with_leak_rate(leak_rate)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPulse {
    pub tgrid: TimeGrid,
    pub samples: Vec<Complex64>,
}

impl ControlPulse {
    pub fn new(tgrid: TimeGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != tgrid.len() {
            return Err(Error::GridMismatch(format!(
                "{} pulse samples for {} grid points",
                samples.len(),
                tgrid.len()
            )));
        }
        Ok(ControlPulse { tgrid, samples })
    }

    pub fn zeros(tgrid: TimeGrid) -> Self {
        ControlPulse { tgrid, samples: vec![ZERO; tgrid.len()] }
    }

    /// Cubic Lagrange interpolation; zero outside the sampled window.
    pub fn at(&self, t: f64) -> Complex64 {
        let n = self.samples.len();
        let s = (t - self.tgrid.t_start()) / self.tgrid.dt();
        if !(s >= -1e-9 && s <= (n - 1) as f64 + 1e-9) {
            return ZERO;
        }
        let i = s.round();
        if (s - i).abs() < 1e-9 {
            return self.samples[i as usize];
        }
        if n < 4 {
            let i0 = (s.floor() as usize).min(n - 2);
            let f = s - i0 as f64;
            return self.samples[i0] * (1.0 - f) + self.samples[i0 + 1] * f;
        }
        let i0 = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let x = s - i0 as f64;
        let mut out = ZERO;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - b as f64) / (a as f64 - b as f64);
                }
            }
            out += self.samples[i0 + a] * w;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.norm()))
    }

    /// `‖other - self‖ / ‖self‖` over the samples with t in `window`.
    pub fn relative_l2_distance(&self, other: &ControlPulse, window: Option<(f64, f64)>) -> Result<f64> {
        if self.tgrid != other.tgrid {
            return Err(Error::GridMismatch("pulses sampled on different time grids".into()));
        }
        let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let (mut num, mut den) = (0.0, 0.0);
        for (i, (a, b)) in self.samples.iter().zip(&other.samples).enumerate() {
            let t = self.tgrid.time(i);
            if t >= lo && t <= hi {
                num += (a - b).norm_sqr();
                den += a.norm_sqr();
            }
        }
        if den == 0.0 {
            return Err(Error::Domain("reference pulse vanishes on the comparison window".into()));
        }
        Ok((num / den).sqrt())
    }

    /// As [`relative_l2_distance`](Self::relative_l2_distance) after removing
    /// the best-fitting constant phase between the two pulses.
    pub fn relative_l2_distance_modulo_phase(&self, other: &ControlPulse, window: Option<(f64, f64)>) -> Result<f64> {
        if self.tgrid != other.tgrid {
            return Err(Error::GridMismatch("pulses sampled on different time grids".into()));
        }
        let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let ov: Complex64 = (0..self.samples.len())
            .filter(|&i| (lo..=hi).contains(&self.tgrid.time(i)))
            .map(|i| self.samples[i].conj() * other.samples[i])
            .sum();
        let rot = Complex64::from_polar(1.0, ov.arg());
        let turned = ControlPulse {
            tgrid: self.tgrid,
            samples: self.samples.iter().map(|s| s * rot).collect(),
        };
        turned.relative_l2_distance(other, window)
    }

    /// `Ω'(t) = conj(Ω(-t))` on the mirrored grid.
    pub fn time_reversed(&self) -> ControlPulse {
        ControlPulse {
            tgrid: self.tgrid.mirrored(),
            samples: self.samples.iter().rev().map(|s| s.conj()).collect(),
        }
    }
}

/// Excited amplitude at the grid nodes, its time derivative, and its
/// values at the step midpoints.
#[derive(Debug, Clone)]
pub struct ExcitedProfile {
    pub tgrid: TimeGrid,
    pub values: Vec<Complex64>,
    pub rates: Vec<Complex64>,
    pub mids: Vec<Complex64>,
}

impl ExcitedProfile {
    /// Profile from node samples alone: derivatives by central differences,
    /// midpoints by cubic interpolation.
    pub fn from_samples(tgrid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        let pulse = ControlPulse::new(tgrid, values)?;
        let mids = (0..tgrid.steps())
            .map(|i| pulse.at(tgrid.time(i) + tgrid.dt() / 2.0))
            .collect();
        let rates = gradient(&pulse.samples, tgrid.dt());
        Ok(ExcitedProfile { tgrid, values: pulse.samples, rates, mids })
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    fn check_window(&self, tolerance: f64) -> Result<()> {
        let peak = self.peak();
        if peak == 0.0 {
            return Ok(());
        }
        let edge = self.values[0].norm().max(self.values.last().unwrap().norm()) / peak;
        if edge >= tolerance {
            return Err(Error::TruncatedWindow { edge_ratio: edge });
        }
        Ok(())
    }
}

/// Field history `C2(k,t)`: full-resolution moments plus strided snapshots.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    pub kgrid: KGrid,
    /// `Σ|C2|² dk` at every grid node.
    pub population: Vec<f64>,
    /// `Σ Im(C2* Ċ2) dk` at every grid node; empty when not computed.
    pub phase_flux: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Vec<Complex64>>,
    pub final_field: Vec<Complex64>,
}

impl FieldHistory {
    pub fn final_packet(&self) -> SpectralWavepacket {
        SpectralWavepacket {
            kgrid: self.kgrid,
            amplitudes: self.final_field.clone(),
            center: None,
            width: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeRole {
    Sending,
    /// Receiver a distance `length` (µm) down the guide; its clock is
    /// shifted by the packet's arrival time `arrival` (ps).
    Receiving { length: f64, arrival: f64 },
}

#[derive(Debug, Clone)]
pub struct DesignRecord {
    pub role: NodeRole,
    pub tgrid: TimeGrid,
    /// C1 (sending) or D1 (receiving).
    pub ground: Vec<Complex64>,
    /// C3 (sending) or D3 (receiving).
    pub excited: Vec<Complex64>,
    pub field: FieldHistory,
    pub pulse: ControlPulse,
    /// Static shift from modes above the k-grid, meV.
    pub tail_shift: f64,
    /// Span where |C3| exceeds the mask threshold.
    pub active_window: (f64, f64),
}

impl DesignRecord {
    /// Largest `|1 - |C1|² - |C3|² - Σ|C2|² dk|` over the grid, relative to the
    /// initial norm.
    pub fn norm_residual(&self) -> f64 {
        let total = self.ground[0].norm_sqr() + self.excited[0].norm_sqr() + self.field.population[0];
        (0..self.tgrid.len())
            .map(|i| {
                (total - self.ground[i].norm_sqr() - self.excited[i].norm_sqr() - self.field.population[i])
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Emission window: where |C3|² is at least `fraction` of its peak.
    pub fn emission_window(&self, fraction: f64) -> (f64, f64) {
        window_above(&self.excited, &self.tgrid, fraction.sqrt())
    }
}

/// Default grids for a sech target: symmetric window of
/// `±max(10ħ/σ0, 20ħ/γ)`, continuum up to `ω1 + max(40σ0, 5(ω1-ω0))`,
/// box long enough that nothing re-enters the window, and
/// `dt = ħ/(20 max(span, γ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignGrids {
    pub kgrid: KGrid,
    pub tgrid: TimeGrid,
}

impl DesignGrids {
    pub fn for_sech(model: &WaveguideModel, omega1: f64, sigma0: f64) -> Result<Self> {
        let gamma = model.markovian_rate(omega1)?;
        Self::with_half_window(model, omega1, sigma0, design_half_window(sigma0, gamma))
    }

    /// Grids for a receiver at distance `length`: the window is widened by
    /// the spread in arrival times across the packet, which near the
    /// cut-off is dominated by its slow low-frequency side.
    pub fn for_sech_at_distance(model: &WaveguideModel, omega1: f64, sigma0: f64, length: f64) -> Result<Self> {
        let gamma = model.markovian_rate(omega1)?;
        let spread = delay_spread(model, omega1, sigma0, length)?;
        Self::with_half_window(model, omega1, sigma0, design_half_window(sigma0, gamma) + spread)
    }

    fn with_half_window(model: &WaveguideModel, omega1: f64, sigma0: f64, half: f64) -> Result<Self> {
        let gamma = model.markovian_rate(omega1)?;
        let top = omega1 + (40.0 * sigma0).max(5.0 * (omega1 - model.omega0));
        let fast = model.group_velocity(omega1 + 5.0 * sigma0)?;
        let length = 1.25 * fast * 2.0 * half;
        let kgrid = KGrid::covering(model, top, 2.0 * PI / length)?;
        let span = (omega1 - model.omega0).max(model.dispersion(kgrid.upper_edge()) - omega1);
        let tgrid = TimeGrid::centered(half, default_time_step(span, gamma, 0.0))?;
        Ok(DesignGrids { kgrid, tgrid })
    }

    /// Both grids at half resolution.
    pub fn coarsened(&self) -> Result<Self> {
        let kgrid = KGrid::new(self.kgrid.dk() * 2.0, self.kgrid.len().div_ceil(2))?;
        let tgrid = TimeGrid::spanning(self.tgrid.t_start(), self.tgrid.t_end(), self.tgrid.dt() * 2.0)?;
        Ok(DesignGrids { kgrid, tgrid })
    }
}

pub fn design_half_window(sigma0: f64, gamma: f64) -> f64 {
    (10.0 * HBAR / sigma0).max(20.0 * HBAR / gamma)
}

/// Largest difference in travel time over `length` between the carrier and
/// the packet components within ±10σ0 of it (never closer to the cut-off
/// than a quarter of the carrier detuning).
pub fn delay_spread(model: &WaveguideModel, omega1: f64, sigma0: f64, length: f64) -> Result<f64> {
    if !(length.is_finite() && length >= 0.0) {
        return Err(Error::Domain(format!("distance must be non-negative, got {length}")));
    }
    let lo = (omega1 - 10.0 * sigma0).max(model.omega0 + 0.25 * (omega1 - model.omega0));
    let hi = omega1 + 10.0 * sigma0;
    let t1 = length / model.group_velocity(omega1)?;
    let late = length / model.group_velocity(lo)? - t1;
    let early = t1 - length / model.group_velocity(hi)?;
    Ok(late.max(early))
}

/// `ħ / (20 max(span, γ, |Ω|max))`.
pub fn default_time_step(span: f64, gamma: f64, omega_max: f64) -> f64 {
    HBAR / (20.0 * span.max(gamma).max(omega_max))
}

/// Travel time of the packet carrier over `length`.
pub fn arrival_time(model: &WaveguideModel, carrier: f64, length: f64) -> Result<f64> {
    Ok(length / model.group_velocity(carrier)?)
}

/// Modes seen by a receiver at distance L, with propagation phases
/// `θ_k = k L - δ_k t0/ħ`, and the arrival time t0 (0 for an empty packet).
pub(crate) fn receiver_modes(incoming: &SpectralWavepacket, node: &ThreeLevelNode, length: f64) -> Result<(ModeSet, f64)> {
    if !(length.is_finite() && length >= 0.0) {
        return Err(Error::Domain(format!("distance must be non-negative, got {length}")));
    }
    let arrival = if incoming.is_zero() {
        0.0
    } else {
        arrival_time(&node.model, incoming.carrier(&node.model)?, length)?
    };
    let base = ModeSet::new(&node.model, incoming.kgrid, node.eps32);
    let offsets = (0..base.len())
        .map(|j| base.kgrid.k(j) * length - base.detunings[j] * arrival / HBAR)
        .collect();
    Ok((base.with_offsets(offsets), arrival))
}

fn source_weights(target: &SpectralWavepacket, modes: &ModeSet) -> Vec<Complex64> {
    target
        .amplitudes
        .iter()
        .zip(&modes.slopes)
        .map(|(f, s)| f * s * modes.kgrid.dk())
        .collect()
}

fn profile_for(
    target: &SpectralWavepacket,
    modes: &ModeSet,
    tgrid: &TimeGrid,
    sign: f64,
    tolerance: f64,
) -> Result<ExcitedProfile> {
    if target.is_zero() {
        return Ok(ExcitedProfile {
            tgrid: *tgrid,
            values: vec![ZERO; tgrid.len()],
            rates: vec![ZERO; tgrid.len()],
            mids: vec![ZERO; tgrid.steps()],
        });
    }
    if modes.g == 0.0 {
        return Err(Error::Domain("cannot design a pulse for an uncoupled emitter".into()));
    }
    let pref = Complex64::new(0.0, sign / (2.0 * PI * modes.g));
    let s = synthesize(modes, &source_weights(target, modes), pref, tgrid);
    let profile = ExcitedProfile { tgrid: *tgrid, values: s.nodes, rates: s.node_rates, mids: s.mids };
    profile.check_window(tolerance)?;
    Ok(profile)
}

/// Excited amplitude that emits `target`:
/// `C3(t) = (i/2πg) Σ_k F_k (dω/dk) e^{-iδ_k t/ħ} dk`.
pub fn c3_from_target(target: &SpectralWavepacket, node: &ThreeLevelNode, tgrid: &TimeGrid) -> Result<ExcitedProfile> {
    let modes = ModeSet::new(&node.model, target.kgrid, node.eps32);
    profile_for(target, &modes, tgrid, 1.0, MASK_THRESHOLD)
}

fn history_from(
    modes: &ModeSet,
    profile: &ExcitedProfile,
    initial: Option<&[Complex64]>,
) -> FieldHistory {
    let tgrid = profile.tgrid;
    let snaps = strided_indices(tgrid.len(), MAX_SNAPSHOTS);
    let acc = accumulate(modes, &profile.values, &profile.mids, initial, &tgrid, &snaps);
    let coef = Complex64::new(0.0, -modes.g / HBAR);
    let phase_flux = profile
        .values
        .iter()
        .zip(&acc.projection)
        .map(|(a, s)| (coef * a * s).im)
        .collect();
    FieldHistory {
        kgrid: modes.kgrid,
        population: acc.population,
        phase_flux,
        snapshot_times: acc.snapshot_indices.iter().map(|&i| tgrid.time(i)).collect(),
        snapshots: acc.snapshots,
        final_field: acc.final_field,
    }
}

/// Emitted field `C2(k,t) = -(ig/ħ) ∫ C3(t') e^{iδ_k t'/ħ} dt'`.
pub fn c2_history(target: &SpectralWavepacket, profile: &ExcitedProfile, node: &ThreeLevelNode) -> Result<FieldHistory> {
    let modes = ModeSet::new(&node.model, target.kgrid, node.eps32);
    let history = history_from(&modes, profile, None);
    if !target.is_zero() {
        let overlap = target.overlap(&history.final_packet())?.norm() / target.norm_squared();
        if overlap < 0.99 {
            return Err(Error::InconsistentGrids { overlap });
        }
    }
    Ok(history)
}

/// Ground amplitude from norm conservation and the phase identity.
/// `total` is the conserved norm (1 for a sender, ‖F‖² for a receiver).
fn ground_amplitude(
    profile: &ExcitedProfile,
    population: &[f64],
    flux: &[f64],
    shift: f64,
    total: f64,
    tolerance: f64,
) -> Result<Vec<Complex64>> {
    let n = profile.values.len();
    let dt = profile.tgrid.dt();
    let mut out = Vec::with_capacity(n);
    let mut phase = 0.0;
    let mut prev_rate: Option<f64> = None;
    for i in 0..n {
        let a = profile.values[i];
        let rho2 = total - a.norm_sqr() - population[i];
        if rho2 < -tolerance {
            return Err(Error::NonphysicalTarget { deficit: rho2, time: profile.tgrid.time(i) });
        }
        let rate = if rho2 >= PHASE_HOLD {
            let num = (a.conj() * profile.rates[i]).im - flux[i] + shift * a.norm_sqr() / HBAR;
            Some(num / rho2)
        } else {
            None
        };
        if let (Some(r0), Some(r1)) = (prev_rate, rate) {
            phase += 0.5 * dt * (r0 + r1);
        }
        prev_rate = rate;
        out.push(Complex64::from_polar(rho2.max(0.0).sqrt(), phase));
    }
    Ok(out)
}

/// C1(t) for a sender that starts in level 1.
pub fn c1_reconstruct(profile: &ExcitedProfile, history: &FieldHistory, tail_shift: f64) -> Result<Vec<Complex64>> {
    if history.phase_flux.len() != profile.values.len() {
        return Err(Error::GridMismatch("field history lacks phase flux on the profile grid".into()));
    }
    ground_amplitude(profile, &history.population, &history.phase_flux, tail_shift, 1.0, DEFICIT_TOLERANCE)
}

/// `Ω = conj(iħ Ċ1 / C3)`, zero where |C3| is below the mask threshold.
/// Returns the pulse and the active window.
pub fn pulse_from_amplitudes(tgrid: &TimeGrid, ground: &[Complex64], excited: &[Complex64]) -> Result<(ControlPulse, (f64, f64))> {
    let peak = excited.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if peak == 0.0 {
        return Ok((ControlPulse::zeros(*tgrid), (tgrid.t_start(), tgrid.t_start())));
    }
    let cut = MASK_THRESHOLD * peak;
    let d1 = gradient(ground, tgrid.dt());
    let i_hbar = Complex64::new(0.0, HBAR);
    let samples: Vec<Complex64> = d1
        .iter()
        .zip(excited)
        .map(|(d, c)| if c.norm() < cut { ZERO } else { (i_hbar * d / c).conj() })
        .collect();
    let (first, last) = active_range(excited, cut).unwrap();
    let masked = excited[first..=last].iter().filter(|c| c.norm() < cut).count();
    let fraction = masked as f64 / (last - first + 1) as f64;
    if fraction > 0.5 {
        return Err(Error::DegenerateDesign { masked_fraction: 100.0 * fraction });
    }
    Ok((ControlPulse::new(*tgrid, samples)?, (tgrid.time(first), tgrid.time(last))))
}

/// Exact (non-Markovian) sending design.
pub fn design_sending_pulse(target: &SpectralWavepacket, node: &ThreeLevelNode, tgrid: &TimeGrid) -> Result<DesignRecord> {
    let modes = ModeSet::new(&node.model, target.kgrid, node.eps32);
    let tail_shift = modes.tail_shift(&node.model)?;
    let profile = profile_for(target, &modes, tgrid, 1.0, MASK_THRESHOLD)?;
    let history = history_from(&modes, &profile, None);
    if !target.is_zero() {
        let overlap = target.overlap(&history.final_packet())?.norm() / target.norm_squared();
        if overlap < 0.99 {
            return Err(Error::InconsistentGrids { overlap });
        }
    }
    let ground = c1_reconstruct(&profile, &history, tail_shift)?;
    let (pulse, active_window) = pulse_from_amplitudes(tgrid, &ground, &profile.values)?;
    Ok(DesignRecord {
        role: NodeRole::Sending,
        tgrid: *tgrid,
        ground,
        excited: profile.values,
        field: history,
        pulse,
        tail_shift,
        active_window,
    })
}

/// Sending design in the Markov approximation: the emitted population is
/// taken as `(γ/ħ) ∫ |C3|² dt` with γ the Markovian rate at the carrier, and
/// the field phase flux and the continuum shift are dropped.
pub fn design_sending_pulse_markovian(target: &SpectralWavepacket, node: &ThreeLevelNode, tgrid: &TimeGrid) -> Result<ControlPulse> {
    let modes = ModeSet::new(&node.model, target.kgrid, node.eps32);
    let profile = profile_for(target, &modes, tgrid, 1.0, MASK_THRESHOLD)?;
    if target.is_zero() {
        return Ok(ControlPulse::zeros(*tgrid));
    }
    let gamma = node.model.markovian_rate(target.carrier(&node.model)?)?;
    let h = tgrid.dt();
    let mut emitted = Vec::with_capacity(tgrid.len());
    let mut acc = 0.0;
    emitted.push(0.0);
    for i in 0..tgrid.steps() {
        let s = profile.values[i].norm_sqr() + 4.0 * profile.mids[i].norm_sqr() + profile.values[i + 1].norm_sqr();
        acc += gamma / HBAR * h / 6.0 * s;
        emitted.push(acc);
    }
    let no_flux = vec![0.0; tgrid.len()];
    let ground = ground_amplitude(&profile, &emitted, &no_flux, 0.0, 1.0, DEFICIT_TOLERANCE)?;
    Ok(pulse_from_amplitudes(tgrid, &ground, &profile.values)?.0)
}

/// Receiving design: the pulse that absorbs `incoming` emitted at the origin
/// into a node at distance `length`. Times on `tgrid` are measured from the
/// packet's arrival.
pub fn design_receiving_pulse(
    incoming: &SpectralWavepacket,
    node: &ThreeLevelNode,
    length: f64,
    tgrid: &TimeGrid,
) -> Result<DesignRecord> {
    let (modes, arrival) = receiver_modes(incoming, node, length)?;
    let tail_shift = modes.tail_shift(&node.model)?;
    let profile = profile_for(incoming, &modes, tgrid, -1.0, RECEIVER_EDGE_TOLERANCE)?;
    let history = history_from(&modes, &profile, Some(&incoming.amplitudes));
    let total = incoming.norm_squared();
    let ground = ground_amplitude(&profile, &history.population, &history.phase_flux, tail_shift, total, RECEIVER_DEFICIT_TOLERANCE)?;
    let absorption = ground.last().unwrap().norm_sqr();
    if total > 0.0 && absorption < 0.9 * total {
        return Err(Error::ImpedanceMismatch { absorption });
    }
    let (pulse, active_window) = pulse_from_amplitudes(tgrid, &ground, &profile.values)?;
    Ok(DesignRecord {
        role: NodeRole::Receiving { length, arrival },
        tgrid: *tgrid,
        ground,
        excited: profile.values,
        field: history,
        pulse,
        tail_shift,
        active_window,
    })
}

/// Central differences, one-sided at the ends.
pub(crate) fn gradient(y: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = y.len();
    if n < 2 {
        return vec![ZERO; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (y[1] - y[0]) / h
            } else if i == n - 1 {
                (y[n - 1] - y[n - 2]) / h
            } else {
                (y[i + 1] - y[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn active_range(values: &[Complex64], cut: f64) -> Option<(usize, usize)> {
    let first = values.iter().position(|v| v.norm() >= cut)?;
    let last = values.iter().rposition(|v| v.norm() >= cut)?;
    Some((first, last))
}

fn window_above(values: &[Complex64], tgrid: &TimeGrid, fraction: f64) -> (f64, f64) {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    match active_range(values, fraction * peak) {
        Some((a, b)) if peak > 0.0 => (tgrid.time(a), tgrid.time(b)),
        _ => (tgrid.t_start(), tgrid.t_start()),
    }
}
