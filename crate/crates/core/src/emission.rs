//! Spontaneous emission of a two-level emitter near the band edge.
//!
//! With the square-root density of states the continuum self-energy is
//! `Σ(z) = -iπA / sqrt(z - ω0)` (A = [`WaveguideModel::edge_strength`]), so
//! `Γ(ω) = 2πA/sqrt(ω - ω0)` above the edge and `Δ(ω) = -πA/sqrt(ω0 - ω)` below
//! it. The excited amplitude is the Fourier transform of the spectral density
//! along the branch cut plus the bound-state pole below the edge.
//!
//! Amplitudes are reported in the frame rotating at ω10 unless stated
//! otherwise; only phases are affected.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{Engine, Initial, Recording, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{KGrid, TimeGrid};
use crate::model::WaveguideModel;
use crate::modes::ModeSet;
use crate::quad::{adaptive, gl16, panel};
use crate::units::HBAR;

/// Frequencies closer than this to the cut-off are not resolved, meV.
pub const EDGE_RESOLUTION: f64 = 1e-9;
/// Accepted deviation of `∫U dω + Z` from one.
pub const SUM_RULE_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams {
    /// Bare transition frequency ω10, meV.
    pub omega10: f64,
    pub model: WaveguideModel,
}

impl TwoLevelParams {
    pub fn new(omega10: f64, model: WaveguideModel) -> Result<Self> {
        if !(omega10.is_finite() && omega10 > 0.0) {
            return Err(Error::Domain(format!("transition frequency must be positive, got {omega10}")));
        }
        Ok(TwoLevelParams { omega10, model })
    }

    /// ω10 - ω0.
    pub fn detuning(&self) -> f64 {
        self.omega10 - self.model.omega0
    }

    fn edge(&self) -> f64 {
        self.model.edge_strength()
    }

    /// Rate scale used to size windows and cut-offs: Γ(ω10) above the edge,
    /// `2πA/sqrt|δ|` below it.
    pub fn rate_scale(&self) -> f64 {
        let d = self.detuning().abs().max(EDGE_RESOLUTION);
        2.0 * PI * self.edge() / d.sqrt()
    }
}

/// Γ(ω), zero at and below the cut-off.
pub fn gamma_of_omega(omega: f64, params: &TwoLevelParams) -> f64 {
    gamma_above_edge(omega - params.model.omega0, params)
}

/// Γ at ω0 + x. Quadratures work in x directly: ω0 is large enough that
/// forming ω0 + x and subtracting again would round small x away.
fn gamma_above_edge(x: f64, params: &TwoLevelParams) -> f64 {
    if x > 0.0 {
        2.0 * PI * params.edge() / x.sqrt()
    } else {
        0.0
    }
}

/// Δ(ω): `-πA/sqrt(ω0 - ω)` below the edge, zero above.
pub fn delta_closed_form(omega: f64, params: &TwoLevelParams) -> Result<f64> {
    let x = omega - params.model.omega0;
    if x.abs() < EDGE_RESOLUTION {
        return Err(Error::Domain("Lamb shift diverges at the cut-off".into()));
    }
    Ok(if x < 0.0 { -PI * params.edge() / (-x).sqrt() } else { 0.0 })
}

/// Part of Δ(ω) coming from frequencies above `cutoff`.
pub fn delta_cutoff_remainder(omega: f64, params: &TwoLevelParams, cutoff: f64) -> Result<f64> {
    params.model.continuum_tail_shift(omega, cutoff)
}

/// `Δ(ω) = (1/2π) P∫_{ω0}^{cutoff} Γ(ω')/(ω - ω') dω'` by quadrature.
///
/// Substituting `ω' = ω0 + u²` removes the edge singularity. Above the edge
/// the pole at `u = a = sqrt(ω - ω0)` is handled by symmetric excision: on
/// `[a-h, a+h]` the integrand `ψ(u)/(a - u)` is replaced by
/// `(ψ(u) - ψ(a))/(a - u)`, the subtracted log term being zero by symmetry.
pub fn delta_numeric(omega: f64, params: &TwoLevelParams, cutoff: f64) -> Result<f64> {
    let omega0 = params.model.omega0;
    let x = omega - omega0;
    if x.abs() < EDGE_RESOLUTION {
        return Err(Error::Resolution(format!(
            "{omega} meV lies within {EDGE_RESOLUTION} meV of the cut-off"
        )));
    }
    if !(cutoff > omega0) {
        return Err(Error::Domain("cut-off of the integral must exceed ω0".into()));
    }
    let u_top = (cutoff - omega0).sqrt();
    // φ(u) = Γ(ω0 + u²) 2u / 2π, finite at u = 0
    let phi = |u: f64| gamma_above_edge(u * u, params) * 2.0 * u / (2.0 * PI);
    let tol = 1e-15;
    if x < 0.0 {
        let b = (-x).sqrt();
        let f = |u: f64| phi(u) / (x - u * u);
        return Ok(graded_toward(&f, 0.0, u_top, b, tol));
    }
    let a = x.sqrt();
    if a >= u_top {
        let f = |u: f64| phi(u) / (x - u * u);
        return Ok(graded_toward(&f, 0.0, u_top, u_top.min(a) / 4.0, tol));
    }
    let psi = |u: f64| phi(u) / (a + u);
    let hw = 0.5 * a.min(u_top - a);
    let pa = psi(a);
    let inner = adaptive(&|u: f64| (psi(u) - pa) / (a - u), a - hw, a + hw, tol);
    let f = |u: f64| psi(u) / (a - u);
    // graded from the excised interval outwards, so this one runs backwards
    let below = -graded_toward(&f, a - hw, 0.0, hw, tol);
    let above = graded_toward(&f, a + hw, u_top, hw, tol);
    Ok(inner + below + above)
}

/// ∫ from `from` to `to` (either order) with geometric panels of first width `scale`.
fn graded_toward<F: Fn(f64) -> f64>(f: &F, from: f64, to: f64, scale: f64, tol: f64) -> f64 {
    let dir = if to >= from { 1.0 } else { -1.0 };
    let total = (to - from).abs();
    let mut s = 0.0;
    let mut done = 0.0;
    let mut w = scale.max(total * 1e-12);
    while done < total {
        let step = w.min(total - done);
        let (a, b) = (from + dir * done, from + dir * (done + step));
        s += dir * adaptive(f, a.min(b), a.max(b), tol);
        done += step;
        w *= 2.0;
    }
    s
}

/// Continuum spectral density
/// `U(ω) = (1/π) (Γ/2) / ((ω - ω10 - Δ)² + (Γ/2)²)`; zero below the edge.
pub fn spectral_function(omega: f64, params: &TwoLevelParams) -> f64 {
    spectral_above_edge(omega - params.model.omega0, params)
}

fn spectral_above_edge(x: f64, params: &TwoLevelParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * gamma_above_edge(x, params);
    let d = x - params.detuning();
    half / PI / (d * d + half * half)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfEnergyCurve {
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Γ(ω) and Δ(ω) (closed form) on the given frequencies.
pub fn self_energy_curve(params: &TwoLevelParams, omegas: &[f64]) -> Result<SelfEnergyCurve> {
    let mut delta = Vec::with_capacity(omegas.len());
    for &w in omegas {
        delta.push(delta_closed_form(w, params)?);
    }
    Ok(SelfEnergyCurve {
        omega: omegas.to_vec(),
        gamma: omegas.iter().map(|&w| gamma_of_omega(w, params)).collect(),
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    /// Pole frequency ω_b below the cut-off, meV.
    pub omega: f64,
    /// ω0 - ω_b > 0, meV.
    pub binding: f64,
    /// Residue Z = 1/(1 - ∂Δ/∂ω) at the pole.
    pub residue: f64,
}

/// Root of `ω - ω10 - Δ(ω) = 0` below the edge, by bisection on
/// `[ω0 - 1e6, ω0 - 1e-9]` meV followed by Newton polishing.
pub fn bound_state(params: &TwoLevelParams) -> Result<Option<BoundState>> {
    let a_edge = params.edge();
    if a_edge == 0.0 {
        return Ok(None);
    }
    let delta = params.detuning();
    // in terms of b = sqrt(ω0 - ω): h(b) = -b² - δ + πA/b, decreasing in b
    let h = |b: f64| -b * b - delta + PI * a_edge / b;
    let (mut lo, mut hi) = (1e-9f64.sqrt(), 1e6f64.sqrt());
    if h(lo) <= 0.0 || h(hi) >= 0.0 {
        return Ok(None);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    let mut b = (lo * hi).sqrt();
    for _ in 0..8 {
        let dh = -2.0 * b - PI * a_edge / (b * b);
        let next = b - h(b) / dh;
        if !(next > 0.0) {
            break;
        }
        let done = (next - b).abs() < 1e-15 * b;
        b = next;
        if done {
            break;
        }
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::RootNotConverged { lo: params.model.omega0 - 1e6, hi: params.model.omega0 - 1e-9 });
    }
    let binding = b * b;
    let residue = 1.0 / (1.0 + PI * a_edge / (2.0 * binding * b));
    Ok(Some(BoundState { omega: params.model.omega0 - binding, binding, residue }))
}

#[derive(Debug, Clone)]
pub struct EmissionResult {
    pub tgrid: TimeGrid,
    /// U1(t) in the frame rotating at ω10.
    pub amplitudes: Vec<Complex64>,
    /// Mean of |U1|² over the last fifth of the window.
    pub plateau: f64,
    pub bound: Option<BoundState>,
    /// `∫U dω + Z`.
    pub sum_rule: f64,
    pub cutoff: f64,
}

impl EmissionResult {
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Default upper limit of the branch-cut integral: ω10 + 10⁴ × rate scale.
pub fn default_spectral_cutoff(params: &TwoLevelParams) -> f64 {
    params.omega10.max(params.model.omega0) + 1e4 * params.rate_scale()
}

/// `U1(t) = ∫ U(ω) e^{-iωt/ħ} dω + Z e^{-iω_b t/ħ}` on `tgrid`.
pub fn excited_amplitude(tgrid: &TimeGrid, params: &TwoLevelParams) -> Result<EmissionResult> {
    excited_amplitude_with_cutoff(tgrid, params, default_spectral_cutoff(params))
}

pub fn excited_amplitude_with_cutoff(tgrid: &TimeGrid, params: &TwoLevelParams, cutoff: f64) -> Result<EmissionResult> {
    let omega0 = params.model.omega0;
    let delta = params.detuning();
    if params.edge() == 0.0 {
        let one = Complex64::new(1.0, 0.0);
        return Ok(EmissionResult {
            tgrid: *tgrid,
            amplitudes: vec![one; tgrid.len()],
            plateau: 1.0,
            bound: None,
            sum_rule: 1.0,
            cutoff,
        });
    }
    if !(cutoff > omega0 && cutoff > params.omega10) {
        return Err(Error::Domain("spectral cut-off must lie above ω0 and ω10".into()));
    }
    let t_max = tgrid.time(0).abs().max(tgrid.t_end().abs());
    let (xs, ws) = branch_cut_nodes(params, (cutoff - omega0).sqrt(), t_max);
    let bound = bound_state(params)?;
    let sum_rule = ws.iter().sum::<f64>() + bound.map_or(0.0, |b| b.residue);
    if (sum_rule - 1.0).abs() > SUM_RULE_TOLERANCE {
        return Err(Error::Resolution(format!(
            "spectral sum rule gives {sum_rule:.6}; raise the cut-off or refine the quadrature"
        )));
    }
    let mut nodes: Vec<f64> = xs.iter().map(|x| x - delta).collect();
    let mut weights: Vec<Complex64> = ws.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    if let Some(b) = bound {
        nodes.push(-b.binding - delta);
        weights.push(Complex64::new(b.residue, 0.0));
    }
    let amplitudes = fourier_sum(&nodes, &weights, tgrid);
    let pops: Vec<f64> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let tail = (pops.len() / 5).max(1);
    let plateau = pops[pops.len() - tail..].iter().sum::<f64>() / tail as f64;
    Ok(EmissionResult { tgrid: *tgrid, amplitudes, plateau, bound, sum_rule, cutoff })
}

/// Quadrature of `∫ U dω` in `u = sqrt(ω - ω0)`: returns (ω - ω0, weight) pairs.
fn branch_cut_nodes(params: &TwoLevelParams, u_top: f64, t_max: f64) -> (Vec<f64>, Vec<f64>) {
    let f = |u: f64| spectral_above_edge(u * u, params) * 2.0 * u;
    let delta = params.detuning();
    let u_res = delta.max(0.0).sqrt();
    let res_width = 0.5 * params.rate_scale() / (2.0 * u_res.max(1e-3));
    let edge_width = PI * params.edge() / delta.abs().max(params.rate_scale());

    let mut seeds = vec![0.0];
    let mut u = 0.0;
    let base = 0.05f64.min(u_top / 10.0);
    while u < u_top {
        let w = if u < 10.0 { base } else { base * (u / 10.0) };
        u = (u + w).min(u_top);
        seeds.push(u);
    }
    for extra in [u_res - 4.0 * res_width, u_res, u_res + 4.0 * res_width, edge_width, 4.0 * edge_width] {
        if extra > 0.0 && extra < u_top {
            seeds.push(extra);
        }
    }
    seeds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    seeds.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let max_phase = 8.0;
    let mut panels = Vec::new();
    let mut stack: Vec<(f64, f64, u32)> = seeds.windows(2).rev().map(|w| (w[0], w[1], 0)).collect();
    while let Some((a, b, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let phase = (b - a) * 2.0 * b * t_max / HBAR;
        let split = depth < 60
            && (phase > max_phase || {
                let whole = panel(&f, a, b);
                (panel(&f, a, m) + panel(&f, m, b) - whole).abs() > 1e-13
            });
        if split {
            stack.push((m, b, depth + 1));
            stack.push((a, m, depth + 1));
        } else {
            panels.push((a, b));
        }
    }
    let (gx, gw) = gl16();
    let mut xs = Vec::with_capacity(panels.len() * 16);
    let mut ws = Vec::with_capacity(panels.len() * 16);
    for (a, b) in panels {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        for (xi, wi) in gx.iter().zip(gw) {
            let u = c + r * xi;
            xs.push(u * u);
            ws.push(wi * r * f(u));
        }
    }
    (xs, ws)
}

/// `Σ_j w_j e^{-i ν_j t/ħ}` for every t on the grid.
fn fourier_sum(nu: &[f64], weights: &[Complex64], tgrid: &TimeGrid) -> Vec<Complex64> {
    const BLOCK: usize = 64;
    let n = tgrid.len();
    let steps: Vec<Complex64> = nu.iter().map(|v| Complex64::from_polar(1.0, -v * tgrid.dt() / HBAR)).collect();
    let blocks: Vec<usize> = (0..n).step_by(BLOCK).collect();
    let parts: Vec<Vec<Complex64>> = blocks
        .par_iter()
        .map(|&i0| {
            let t0 = tgrid.time(i0);
            let mut ph: Vec<Complex64> = nu
                .iter()
                .zip(weights)
                .map(|(v, w)| w * Complex64::from_polar(1.0, -v * t0 / HBAR))
                .collect();
            let mut out = Vec::with_capacity(BLOCK);
            for i in i0..(i0 + BLOCK).min(n) {
                if i > i0 {
                    ph.iter_mut().zip(&steps).for_each(|(p, s)| *p *= s);
                }
                out.push(ph.iter().sum());
            }
            out
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Markovian amplitude `exp(-i(ω10 + Δ)t/ħ - Γt/2ħ)` in the lab frame,
/// with Γ and Δ evaluated at ω10.
pub fn weisskopf_wigner(t: f64, params: &TwoLevelParams) -> Result<Complex64> {
    let gamma = gamma_of_omega(params.omega10, params);
    let delta = delta_closed_form(params.omega10, params)?;
    Ok(Complex64::from_polar(
        (-gamma * t / (2.0 * HBAR)).exp(),
        -(params.omega10 + delta) * t / HBAR,
    ))
}

/// `|U_WW(t)|² = exp(-Γ(ω10) t/ħ)`.
pub fn weisskopf_wigner_population(t: f64, params: &TwoLevelParams) -> f64 {
    (-gamma_of_omega(params.omega10, params) * t / HBAR).exp()
}

/// Default continuum for direct two-level propagation up to `duration`:
/// modes up to ω0 + max(400, 100 × max(|δ|, rate scale)) meV in a box
/// at least four times the distance the emitted light travels.
pub fn two_level_kgrid(params: &TwoLevelParams, duration: f64) -> Result<KGrid> {
    let m = &params.model;
    let scale = params.detuning().abs().max(params.rate_scale());
    let top = m.omega0 + 400.0f64.max(100.0 * scale);
    let fast = m.group_velocity(m.omega0 + params.detuning().max(0.0) + 2.0 * params.rate_scale())?;
    let length = (4.0 * fast * duration).max(100.0);
    KGrid::covering(m, top, 2.0 * PI / length)
}

/// Direct propagation of the excited emitter coupled to `kgrid`. Returns
/// the emitter amplitude as `excited` (interaction picture, i.e. the frame
/// rotating at ω10) and the field history.
pub fn propagate_two_level(params: &TwoLevelParams, tgrid: &TimeGrid, kgrid: KGrid, recording: &Recording) -> Result<Trajectory> {
    let modes = ModeSet::new(&params.model, kgrid, params.omega10);
    let leak = params.model.leak_rate;
    let engine = Engine { modes: &modes, shift: modes.tail_shift(&params.model)?, leak };
    let init = Initial {
        ground: Complex64::new(0.0, 0.0),
        excited: Complex64::new(1.0, 0.0),
        field: vec![Complex64::new(0.0, 0.0); kgrid.len()],
    };
    engine.run(None, init, tgrid, recording)
}

/// `ħ / (20 max(span, rate scale))` for a two-level run on `kgrid`.
pub fn two_level_time_step(params: &TwoLevelParams, kgrid: KGrid) -> f64 {
    let modes = ModeSet::new(&params.model, kgrid, params.omega10);
    HBAR / (20.0 * modes.span().max(params.rate_scale()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    /// f(x, t) in µm^{-1/2}.
    pub f: Vec<Complex64>,
}

impl FieldSnapshot {
    pub fn intensity(&self) -> Vec<f64> {
        self.f.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Field at time t from interaction-picture amplitudes `c0` taken at t:
/// `f(x,t) = (2π)^{-1/2} Σ_k c0_k e^{-iδ_k t/ħ} e^{ikx} dk`, δ_k = ω_k - ω10.
pub fn field_at(c0: &[Complex64], kgrid: KGrid, t: f64, xs: &[f64], params: &TwoLevelParams) -> Result<FieldSnapshot> {
    Ok(field_snapshot(c0, kgrid, t, &[t], xs, params)?.remove(0))
}

/// Free evolution of the field released at `t0` (amplitudes `c0` in the
/// interaction picture at `t0`), evaluated at each of `times`.
pub fn field_snapshot(
    c0: &[Complex64],
    kgrid: KGrid,
    t0: f64,
    times: &[f64],
    xs: &[f64],
    params: &TwoLevelParams,
) -> Result<Vec<FieldSnapshot>> {
    if c0.len() != kgrid.len() {
        return Err(Error::GridMismatch("field amplitudes do not match the k-grid".into()));
    }
    if let Some(&bad) = times.iter().find(|&&t| t < t0) {
        return Err(Error::Domain(format!("snapshot time {bad} precedes the release time {t0}")));
    }
    if xs.len() > 1 {
        let dx = (xs[1] - xs[0]).abs();
        let limit = PI / kgrid.upper_edge();
        if dx > limit {
            return Err(Error::Aliasing { dx, limit });
        }
    }
    let modes = ModeSet::new(&params.model, kgrid, params.omega10);
    let norm = kgrid.dk() / (2.0 * PI).sqrt();
    Ok(times
        .par_iter()
        .map(|&t| {
            let amps: Vec<Complex64> = c0
                .iter()
                .zip(&modes.detunings)
                .map(|(c, d)| c * Complex64::from_polar(norm, -d * t / HBAR))
                .collect();
            let f = xs
                .iter()
                .map(|&x| {
                    let step = Complex64::from_polar(1.0, kgrid.dk() * x);
                    let mut ph = Complex64::from_polar(1.0, kgrid.k(0) * x);
                    let mut s = Complex64::new(0.0, 0.0);
                    for (j, a) in amps.iter().enumerate() {
                        if j % 256 == 0 {
                            ph = Complex64::from_polar(1.0, kgrid.k(j) * x);
                        }
                        s += a * ph;
                        ph *= step;
                    }
                    s
                })
                .collect();
            FieldSnapshot { t, x: xs.to_vec(), f }
        })
        .collect())
}
