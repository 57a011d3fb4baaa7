//! Forward propagation of a Λ emitter coupled to the guide.
//!
//! Interaction-picture equations (ħ = HBAR, δ_k = ω_k - ε):
//!
//!   iħ ȧ1 = conj(Ω) a3
//!   iħ ȧ3 = Ω a1 + g Σ_k c_k conj(ph_k) dk + S a3 - i(γ'/2) a3
//!   iħ ċ_k = g a3 ph_k
//!
//! integrated with the classical fixed-step RK4 scheme. Because ċ_k depends
//! only on a3, the stage values of the field never need to be stored: the
//! stage sums `g Σ c_k^(s) conj(ph_k) dk` reduce to sums over the step-start
//! field plus the kernels `g² dk Σ e^{-iδ_k τ/ħ}` at τ = 0 and τ = h/2.

use num_complex::Complex64;

use crate::design::{
    default_time_step, receiver_modes, ControlPulse, FieldHistory, ThreeLevelNode, MAX_SNAPSHOTS,
};
use crate::error::{Error, Result};
use crate::grid::{KGrid, TimeGrid};
use crate::modes::{strided_indices, ModeSet};
use crate::units::HBAR;
use crate::wavepacket::SpectralWavepacket;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const RESYNC: usize = 256;
/// Norm growth beyond this is treated as a numerical blow-up.
const BLOWUP: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tgrid: TimeGrid,
    /// a1(t): C1 for a sender, D1 for a receiver, unused for a two-level emitter.
    pub ground: Vec<Complex64>,
    /// a3(t): the level coupled to the guide.
    pub excited: Vec<Complex64>,
    pub field: FieldHistory,
    /// `N(t0) - N(t)` with N the total norm.
    pub norm_loss: Vec<f64>,
}

impl Trajectory {
    pub fn final_packet(&self) -> SpectralWavepacket {
        self.field.final_packet()
    }

    /// Largest |N(t) - N(t0)|.
    pub fn max_norm_error(&self) -> f64 {
        self.norm_loss.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }

    /// Largest increase of the norm between consecutive samples.
    pub fn max_norm_increase(&self) -> f64 {
        self.norm_loss.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTraces {
    pub times: Vec<f64>,
    pub ground: Vec<f64>,
    pub excited: Vec<f64>,
    pub field: Vec<f64>,
}

/// Which field snapshots a propagation keeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Recording {
    /// Up to this many evenly spaced snapshots.
    Strided(usize),
    /// Snapshots at the grid nodes nearest to these times.
    At(Vec<f64>),
}

impl Default for Recording {
    fn default() -> Self {
        Recording::Strided(MAX_SNAPSHOTS)
    }
}

pub(crate) struct Engine<'a> {
    pub modes: &'a ModeSet,
    pub shift: f64,
    pub leak: f64,
}

pub(crate) struct Initial {
    pub ground: Complex64,
    pub excited: Complex64,
    pub field: Vec<Complex64>,
}

impl Engine<'_> {
    pub fn run(&self, pulse: Option<&ControlPulse>, init: Initial, tgrid: &TimeGrid, recording: &Recording) -> Result<Trajectory> {
        let modes = self.modes;
        let nk = modes.len();
        let h = tgrid.dt();
        let dk = modes.kgrid.dk();
        let g = modes.g;
        let mi = Complex64::new(0.0, -1.0 / HBAR);
        let k_half = modes.kernel(h / 2.0);
        let k_zero = Complex64::new(g * g * dk * nk as f64, 0.0);
        let half: Vec<Complex64> = modes.detunings.iter().map(|d| Complex64::from_polar(1.0, d * h / (2.0 * HBAR))).collect();

        let snap_idx = match recording {
            Recording::Strided(n) => strided_indices(tgrid.len(), *n),
            Recording::At(times) => {
                let mut v: Vec<usize> = times.iter().map(|&t| tgrid.nearest(t)).collect();
                v.sort_unstable();
                v
            }
        };

        let omega = |t: f64| pulse.map_or(ZERO, |p| p.at(t));
        let rhs = |om: Complex64, a1: Complex64, a3: Complex64, m: Complex64| {
            let d1 = mi * om.conj() * a3;
            let d3 = mi * (om * a1 + m + self.shift * a3) - self.leak / (2.0 * HBAR) * a3;
            (d1, d3)
        };

        let mut a1 = init.ground;
        let mut a3 = init.excited;
        let mut c = init.field;
        if c.len() != nk {
            return Err(Error::GridMismatch("initial field does not match the mode set".into()));
        }
        let mut ph: Vec<Complex64> = (0..nk).map(|j| modes.phasor(j, tgrid.time(0))).collect();

        let n_t = tgrid.len();
        let mut ground = Vec::with_capacity(n_t);
        let mut excited = Vec::with_capacity(n_t);
        let mut population = Vec::with_capacity(n_t);
        let mut norm_loss = Vec::with_capacity(n_t);
        let mut snapshots = Vec::with_capacity(snap_idx.len());
        let mut next_snap = 0;

        let mut pop = c.iter().map(|x| x.norm_sqr()).sum::<f64>() * dk;
        let norm0 = a1.norm_sqr() + a3.norm_sqr() + pop;
        let mut record = |n: usize, a1: Complex64, a3: Complex64, pop: f64, c: &Vec<Complex64>| {
            ground.push(a1);
            excited.push(a3);
            population.push(pop);
            norm_loss.push(norm0 - a1.norm_sqr() - a3.norm_sqr() - pop);
            while next_snap < snap_idx.len() && snap_idx[next_snap] == n {
                snapshots.push(c.clone());
                next_snap += 1;
            }
        };
        record(0, a1, a3, pop, &c);

        for n in 0..tgrid.steps() {
            let t = tgrid.time(n);
            let (om0, omm, om1) = (omega(t), omega(t + h / 2.0), omega(t + h));

            let (mut r0, mut rm, mut r1) = (ZERO, ZERO, ZERO);
            for j in 0..nk {
                let p0 = ph[j].conj();
                let pm = p0 * half[j].conj();
                let p1 = pm * half[j].conj();
                let cj = c[j];
                r0 += cj * p0;
                rm += cj * pm;
                r1 += cj * p1;
            }
            let gd = g * dk;
            let (r0, rm, r1) = (r0 * gd, rm * gd, r1 * gd);

            let s1 = (a1, a3);
            let (d1a, d3a) = rhs(om0, s1.0, s1.1, r0);
            let s2 = (a1 + d1a * (h / 2.0), a3 + d3a * (h / 2.0));
            let (d1b, d3b) = rhs(omm, s2.0, s2.1, rm + mi * s1.1 * k_half * (h / 2.0));
            let s3 = (a1 + d1b * (h / 2.0), a3 + d3b * (h / 2.0));
            let (d1c, d3c) = rhs(omm, s3.0, s3.1, rm + mi * s2.1 * k_zero * (h / 2.0));
            let s4 = (a1 + d1c * h, a3 + d3c * h);
            let (d1d, d3d) = rhs(om1, s4.0, s4.1, r1 + mi * s3.1 * k_half * h);

            a1 += (d1a + 2.0 * d1b + 2.0 * d1c + d1d) * (h / 6.0);
            a3 += (d3a + 2.0 * d3b + 2.0 * d3c + d3d) * (h / 6.0);

            let coef = mi * g * (h / 6.0);
            let (w0, wm, w1) = (coef * s1.1, coef * 2.0 * (s2.1 + s3.1), coef * s4.1);
            let t1 = tgrid.time(n + 1);
            pop = 0.0;
            for j in 0..nk {
                let p0 = ph[j];
                let pm = p0 * half[j];
                let p1 = pm * half[j];
                c[j] += w0 * p0 + wm * pm + w1 * p1;
                ph[j] = p1;
                pop += c[j].norm_sqr();
            }
            pop *= dk;
            if (n + 1) % RESYNC == 0 {
                for (j, p) in ph.iter_mut().enumerate() {
                    *p = modes.phasor(j, t1);
                }
            }

            let norm = a1.norm_sqr() + a3.norm_sqr() + pop;
            if !norm.is_finite() || norm > norm0 * (1.0 + BLOWUP) {
                return Err(Error::Unstable { time: t1, norm, suggested_dt: h / 2.0 });
            }
            record(n + 1, a1, a3, pop, &c);
        }

        let snapshot_times = snap_idx.iter().map(|&i| tgrid.time(i)).collect();
        Ok(Trajectory {
            tgrid: *tgrid,
            ground,
            excited,
            field: FieldHistory {
                kgrid: modes.kgrid,
                population,
                phase_flux: Vec::new(),
                snapshot_times,
                snapshots,
                final_field: c,
            },
            norm_loss,
        })
    }
}

/// Propagate a sender from level 1 under `pulse`. `leak_rate` overrides the
/// node's γ'.
pub fn propagate_sending(
    pulse: &ControlPulse,
    node: &ThreeLevelNode,
    kgrid: KGrid,
    tgrid: &TimeGrid,
    leak_rate: Option<f64>,
) -> Result<Trajectory> {
    propagate_sending_recorded(pulse, node, kgrid, tgrid, leak_rate, &Recording::default())
}

pub fn propagate_sending_recorded(
    pulse: &ControlPulse,
    node: &ThreeLevelNode,
    kgrid: KGrid,
    tgrid: &TimeGrid,
    leak_rate: Option<f64>,
    recording: &Recording,
) -> Result<Trajectory> {
    let modes = ModeSet::new(&node.model, kgrid, node.eps32);
    let engine = Engine {
        modes: &modes,
        shift: modes.tail_shift(&node.model)?,
        leak: checked_leak(leak_rate.unwrap_or(node.leak_rate()))?,
    };
    let init = Initial { ground: Complex64::new(1.0, 0.0), excited: ZERO, field: vec![ZERO; kgrid.len()] };
    engine.run(Some(pulse), init, tgrid, recording)
}

/// Propagate a receiver at distance `length` that starts in level 1 while
/// `incoming` (emitted at the origin) travels towards it. Times on `tgrid`
/// are measured from the packet's arrival.
pub fn propagate_receiving(
    pulse: &ControlPulse,
    incoming: &SpectralWavepacket,
    node: &ThreeLevelNode,
    length: f64,
    tgrid: &TimeGrid,
) -> Result<Trajectory> {
    let (modes, _) = receiver_modes(incoming, node, length)?;
    let engine = Engine { modes: &modes, shift: modes.tail_shift(&node.model)?, leak: checked_leak(node.leak_rate())? };
    let init = Initial { ground: ZERO, excited: ZERO, field: incoming.amplitudes.clone() };
    engine.run(Some(pulse), init, tgrid, &Recording::default())
}

/// `|⟨F_ideal|F_out⟩|` with F_out the final field of `traj`.
pub fn sending_fidelity(traj: &Trajectory, ideal: &SpectralWavepacket) -> Result<f64> {
    Ok(ideal.overlap(&traj.final_packet())?.norm())
}

pub fn population_traces(traj: &Trajectory) -> PopulationTraces {
    PopulationTraces {
        times: traj.tgrid.times(),
        ground: traj.ground.iter().map(|a| a.norm_sqr()).collect(),
        excited: traj.excited.iter().map(|a| a.norm_sqr()).collect(),
        field: traj.field.population.clone(),
    }
}

/// Default propagation step for a pulse on a given mode set.
pub fn propagation_time_step(node: &ThreeLevelNode, kgrid: KGrid, pulse: &ControlPulse) -> Result<f64> {
    let modes = ModeSet::new(&node.model, kgrid, node.eps32);
    let gamma = node.model.markovian_rate(node.eps32)?;
    Ok(default_time_step(modes.span(), gamma, pulse.max_abs()))
}

fn checked_leak(rate: f64) -> Result<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::Domain(format!("leak rate must be non-negative, got {rate}")));
    }
    Ok(rate)
}
