//! Discretised continuum seen by one emitter in the interaction picture.
//!
//! Mode `k` carries the phase factor `ph_k(t) = exp(i(δ_k t/ħ - θ_k))`,
//! where `δ_k = ω_k - ε` is the detuning from the emitter transition and
//! `θ_k` an optional propagation phase (non-zero for a receiver placed a
//! distance L down the guide). The coupling enters as
//!
//!   iħ ȧ3 = ... + g Σ_k c_k conj(ph_k) dk,   iħ ċ_k = g a3 ph_k.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{KGrid, TimeGrid};
use crate::model::WaveguideModel;
use crate::units::HBAR;

/// Modes processed together in the parallel kernels. Fixed so that sums
/// are reduced in the same order whatever the thread count.
const MODE_BLOCK: usize = 256;
/// Half-step samples per block in the time-parallel kernels.
const TIME_BLOCK: usize = 4096;
/// Phasors recomputed from scratch after this many recurrence steps.
const RESYNC: usize = 256;

#[derive(Debug, Clone)]
pub struct ModeSet {
    pub kgrid: KGrid,
    pub g: f64,
    /// Reference transition frequency ε, meV.
    pub reference: f64,
    pub detunings: Vec<f64>,
    pub offsets: Vec<f64>,
    /// dω/dk at each mode, meV·µm.
    pub slopes: Vec<f64>,
}

impl ModeSet {
    pub fn new(model: &WaveguideModel, kgrid: KGrid, reference: f64) -> Self {
        let ks = kgrid.values();
        ModeSet {
            kgrid,
            g: model.g,
            reference,
            detunings: ks.iter().map(|&k| model.dispersion(k) - reference).collect(),
            offsets: vec![0.0; ks.len()],
            slopes: ks.iter().map(|&k| model.slope(k)).collect(),
        }
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Self {
        assert_eq!(offsets.len(), self.kgrid.len());
        self.offsets = offsets;
        self
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    /// Largest |δ_k|, meV.
    pub fn span(&self) -> f64 {
        self.detunings.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }

    pub fn phasor(&self, j: usize, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.detunings[j] * t / HBAR - self.offsets[j])
    }

    /// `g² dk Σ_k exp(-i δ_k τ/ħ)`.
    pub fn kernel(&self, tau: f64) -> Complex64 {
        let s: Complex64 = self
            .detunings
            .iter()
            .map(|d| Complex64::from_polar(1.0, -d * tau / HBAR))
            .sum();
        s * self.g * self.g * self.kgrid.dk()
    }

    /// Static Lamb shift supplied by the continuum above this grid.
    pub fn tail_shift(&self, model: &WaveguideModel) -> Result<f64> {
        model.continuum_tail_shift(self.reference, model.dispersion(self.kgrid.upper_edge()))
    }
}

/// Values and time derivatives of `a(t) = pref Σ_k w_k conj(ph_k(t))`
/// at the nodes and midpoints of `tgrid`.
pub(crate) struct Synthesis {
    pub nodes: Vec<Complex64>,
    pub node_rates: Vec<Complex64>,
    pub mids: Vec<Complex64>,
}

pub(crate) fn synthesize(
    modes: &ModeSet,
    weights: &[Complex64],
    pref: Complex64,
    tgrid: &TimeGrid,
) -> Synthesis {
    // modes the target does not populate contribute nothing; skipping them
    // matters for narrow packets on wide grids
    let peak = weights.iter().fold(0.0f64, |m, w| m.max(w.norm()));
    let support: Vec<usize> = (0..weights.len()).filter(|&j| weights[j].norm() > 1e-18 * peak).collect();
    let w: Vec<Complex64> = support.iter().map(|&j| weights[j]).collect();
    let rates: Vec<Complex64> = support.iter().map(|&j| Complex64::new(0.0, -modes.detunings[j] / HBAR)).collect();
    let half = tgrid.dt() / 2.0;
    let steps: Vec<Complex64> = support
        .iter()
        .map(|&j| Complex64::from_polar(1.0, -modes.detunings[j] * half / HBAR))
        .collect();
    let samples = 2 * tgrid.steps() + 1;
    let blocks: Vec<(usize, usize)> = (0..samples)
        .step_by(TIME_BLOCK)
        .map(|s| (s, (s + TIME_BLOCK).min(samples)))
        .collect();
    let out: Vec<Vec<(Complex64, Complex64)>> = blocks
        .par_iter()
        .map(|&(s0, s1)| {
            let mut ph = vec![Complex64::new(0.0, 0.0); support.len()];
            let mut res = Vec::with_capacity(s1 - s0);
            for s in s0..s1 {
                let t = tgrid.t_start() + s as f64 * half;
                if (s - s0) % RESYNC == 0 {
                    for (p, &j) in ph.iter_mut().zip(&support) {
                        *p = modes.phasor(j, t).conj();
                    }
                } else {
                    ph.iter_mut().zip(&steps).for_each(|(p, st)| *p *= st);
                }
                let mut a = Complex64::new(0.0, 0.0);
                let mut da = Complex64::new(0.0, 0.0);
                for ((p, w), r) in ph.iter().zip(&w).zip(&rates) {
                    let term = w * p;
                    a += term;
                    da += term * r;
                }
                res.push((a * pref, da * pref));
            }
            res
        })
        .collect();
    let mut nodes = Vec::with_capacity(tgrid.len());
    let mut node_rates = Vec::with_capacity(tgrid.len());
    let mut mids = Vec::with_capacity(tgrid.steps());
    for (s, (a, da)) in out.into_iter().flatten().enumerate() {
        if s % 2 == 0 {
            nodes.push(a);
            node_rates.push(da);
        } else {
            mids.push(a);
        }
    }
    Synthesis { nodes, node_rates, mids }
}

/// Field accumulated from an excited amplitude known at nodes and midpoints,
/// `c_k(t) = c_k(t0) - (i g/ħ) ∫ a(t') ph_k(t') dt'` by Simpson's rule per step.
pub(crate) struct Accumulation {
    /// `Σ|c_k|² dk` at every node.
    pub population: Vec<f64>,
    /// `Σ conj(c_k) ph_k dk` at every node.
    pub projection: Vec<Complex64>,
    pub snapshot_indices: Vec<usize>,
    pub snapshots: Vec<Vec<Complex64>>,
    pub final_field: Vec<Complex64>,
}

pub(crate) fn accumulate(
    modes: &ModeSet,
    nodes: &[Complex64],
    mids: &[Complex64],
    initial: Option<&[Complex64]>,
    tgrid: &TimeGrid,
    snapshot_indices: &[usize],
) -> Accumulation {
    let n_t = tgrid.len();
    let dk = modes.kgrid.dk();
    let h = tgrid.dt();
    let coef = Complex64::new(0.0, -modes.g / HBAR) * (h / 6.0);
    let chunks: Vec<(usize, usize)> = (0..modes.len())
        .step_by(MODE_BLOCK)
        .map(|s| (s, (s + MODE_BLOCK).min(modes.len())))
        .collect();
    struct Part {
        pop: Vec<f64>,
        proj: Vec<Complex64>,
        snaps: Vec<Vec<Complex64>>,
        last: Vec<Complex64>,
    }
    let parts: Vec<Part> = chunks
        .par_iter()
        .map(|&(j0, j1)| {
            let m = j1 - j0;
            let mut c: Vec<Complex64> = match initial {
                Some(init) => init[j0..j1].to_vec(),
                None => vec![Complex64::new(0.0, 0.0); m],
            };
            let half: Vec<Complex64> = modes.detunings[j0..j1]
                .iter()
                .map(|d| Complex64::from_polar(1.0, d * h / (2.0 * HBAR)))
                .collect();
            let mut ph: Vec<Complex64> = (j0..j1).map(|j| modes.phasor(j, tgrid.time(0))).collect();
            let mut pop = Vec::with_capacity(n_t);
            let mut proj = Vec::with_capacity(n_t);
            let mut snaps = Vec::with_capacity(snapshot_indices.len());
            let mut next_snap = 0;
            for n in 0..n_t {
                if n > 0 {
                    let (a0, am, a1) = (nodes[n - 1], mids[n - 1], nodes[n]);
                    for i in 0..m {
                        let p0 = ph[i];
                        let pm = p0 * half[i];
                        let p1 = pm * half[i];
                        c[i] += coef * (a0 * p0 + 4.0 * am * pm + a1 * p1);
                        ph[i] = p1;
                    }
                    if n % RESYNC == 0 {
                        // c used the recurrence phasor; only the drift is reset here
                        for (i, p) in ph.iter_mut().enumerate() {
                            *p = modes.phasor(j0 + i, tgrid.time(n));
                        }
                    }
                }
                let mut p = 0.0;
                let mut s = Complex64::new(0.0, 0.0);
                for (ci, pi) in c.iter().zip(&ph) {
                    p += ci.norm_sqr();
                    s += ci.conj() * pi;
                }
                pop.push(p * dk);
                proj.push(s * dk);
                while next_snap < snapshot_indices.len() && snapshot_indices[next_snap] == n {
                    snaps.push(c.clone());
                    next_snap += 1;
                }
            }
            Part { pop, proj, snaps, last: c }
        })
        .collect();
    let mut population = vec![0.0; n_t];
    let mut projection = vec![Complex64::new(0.0, 0.0); n_t];
    let mut snapshots = vec![Vec::with_capacity(modes.len()); snapshot_indices.len()];
    let mut final_field = Vec::with_capacity(modes.len());
    for part in parts {
        population.iter_mut().zip(&part.pop).for_each(|(a, b)| *a += b);
        projection.iter_mut().zip(&part.proj).for_each(|(a, b)| *a += b);
        for (dst, src) in snapshots.iter_mut().zip(part.snaps) {
            dst.extend(src);
        }
        final_field.extend(part.last);
    }
    Accumulation {
        population,
        projection,
        snapshot_indices: snapshot_indices.to_vec(),
        snapshots,
        final_field,
    }
}

/// At most `max` evenly strided sample indices, always including both ends.
pub(crate) fn strided_indices(len: usize, max: usize) -> Vec<usize> {
    if len == 0 || max == 0 {
        return Vec::new();
    }
    if len <= max {
        return (0..len).collect();
    }
    let stride = (len - 1).div_ceil(max.saturating_sub(1).max(1));
    let mut v: Vec<usize> = (0..len).step_by(stride).collect();
    if *v.last().unwrap() != len - 1 {
        v.push(len - 1);
    }
    v
}
