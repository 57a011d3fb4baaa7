//! The canonical scenarios. Each one turns a [`ScenarioConfig`] into scalars
//! and plot-ready tables; [`run_scenario`] adds the half-resolution check.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use log::{debug, info};
use serde::Serialize;
use serde_json::{json, Value};
use wqed_core::design::{DesignGrids, DesignRecord, NodeRole};
use wqed_core::emission::{
    default_spectral_cutoff, delta_closed_form, excited_amplitude_with_cutoff, field_at, gamma_of_omega,
    spectral_function, two_level_kgrid, two_level_time_step, weisskopf_wigner_population, TwoLevelParams,
};
use wqed_core::units::SPEED_OF_LIGHT;
use wqed_core::{
    design_receiving_pulse, design_sending_pulse, design_sending_pulse_markovian, propagate_receiving,
    propagate_sending, propagate_two_level, sending_fidelity, Complex64, ControlPulse, KGrid, Recording,
    SpectralWavepacket, ThreeLevelNode, TimeGrid, Trajectory, WaveguideModel, HBAR,
};

use crate::config::{Scenario, ScenarioConfig, Source};

type CoreResult<T> = wqed_core::Result<T>;

/// Leakage cells of the fidelity table, as fractions of γ.
pub const TABLE_LEAK_FRACTIONS: [f64; 2] = [0.01, 0.06];
/// Packet widths of the fidelity table, meV.
pub const TABLE_SIGMAS: [f64; 2] = [0.08, 0.008];
/// |C3|² fraction of its peak that delimits the emission window.
pub const EMISSION_WINDOW_FRACTION: f64 = 1e-2;
/// Snapshot samples within this distance of the emitter make up the floor, µm.
pub const FLOOR_HALF_WIDTH: f64 = 0.05;
/// The travelling front is searched beyond this distance, µm.
pub const FRONT_MIN_X: f64 = 0.5;
/// Oscillations smaller than this are not counted as maxima.
pub const MAXIMUM_PROMINENCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Full,
    /// Twice the time step, and twice the k-spacing where the box allows it.
    Half,
}

impl Resolution {
    fn factor(self) -> f64 {
        match self {
            Resolution::Full => 1.0,
            Resolution::Half => 2.0,
        }
    }
}

/// A named table written as `<name>.csv`. Column names carry their units.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence {
    pub headline: Vec<String>,
    pub full: Vec<f64>,
    pub half: Vec<f64>,
    /// Largest `|full - half| / max(|full|, 1)` over the headline scalars.
    pub change: f64,
    pub tolerance: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub scenario: String,
    pub parameters: BTreeMap<String, Value>,
    pub provenance: BTreeMap<String, Value>,
    pub scalars: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    /// Scalars re-checked at half resolution.
    pub headline: Vec<String>,
    pub tolerance: f64,
    pub convergence: Option<Convergence>,
}

impl Outcome {
    fn new(cfg: &ScenarioConfig) -> Self {
        Outcome {
            scenario: cfg.scenario.name().into(),
            parameters: parameters(cfg),
            provenance: provenance(cfg),
            scalars: BTreeMap::new(),
            tables: Vec::new(),
            headline: Vec::new(),
            tolerance: 0.0,
            convergence: None,
        }
    }

    fn set(&mut self, key: &str, value: f64) {
        self.scalars.insert(key.into(), value);
    }

    fn grid(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.into(), value.into());
    }

    fn headline(&mut self, keys: &[&str], tolerance: f64) {
        self.headline = keys.iter().map(|k| k.to_string()).collect();
        self.tolerance = tolerance;
    }

    pub fn scalar_table(&self) -> Table {
        // names go in a header row of their own so every cell stays numeric
        let columns: Vec<String> = self.scalars.keys().cloned().collect();
        Table { name: "scalars".into(), columns, rows: vec![self.scalars.values().copied().collect()] }
    }

    fn headline_values(&self) -> Vec<f64> {
        self.headline.iter().map(|k| self.scalars.get(k).copied().unwrap_or(f64::NAN)).collect()
    }
}

fn parameters(cfg: &ScenarioConfig) -> BTreeMap<String, Value> {
    let p = &cfg.physics;
    let n = &cfg.numerics;
    let mut out = BTreeMap::new();
    let mut put = |k: &str, v: Value| {
        out.insert(k.to_string(), v);
    };
    put("omega0_meV", json!(p.omega0));
    put("detuning_meV", json!(p.detuning));
    put("sigma0_meV", json!(p.sigma0));
    put("gamma_meV", json!(p.gamma));
    put("leak_rate_meV", json!(p.leak_rate));
    put("length_um", json!(p.length));
    if let Some(d) = cfg.dipole {
        put("dipole_debye", json!(d));
    }
    put("sample_dt_ps", json!(n.sample_dt));
    if let Some(c) = n.spectral_cutoff {
        put("spectral_cutoff_meV", json!(c));
    }
    if cfg.scenario == Scenario::FieldMovie {
        put("release_time_ps", json!(n.release_time));
        put("frame_step_ps", json!(n.frame_step));
        put("frame_count", json!(n.frame_count));
        put("x_max_um", json!(n.x_max));
    }
    out
}

fn describe(key: &str) -> &'static str {
    match key {
        "omega0" => "waveguide cut-off frequency (1.5 eV)",
        "detuning" => "emitter transition minus cut-off; 1 meV puts the carrier just above the band edge",
        "sigma0" => "spectral width of the sech photon; 0.08 meV is comparable to the rate, 0.008 meV is the narrow case",
        "gamma" => {
            "Markovian rate one meV above the cut-off; 0.27 meV matches a 75 D dipole, 4.37 meV is the strong-coupling emitter"
        }
        "dipole" => "transition dipole in Debye, converted to a rate by quadratic scaling from 75 D at 0.27 meV",
        "leak_rate" => "decay of the excited level into non-guided modes",
        "length" => "sender to receiver distance",
        "t_end" => "end of the emission trace",
        "sample_dt" => "spacing of emission-trace samples",
        "release_time" => "time of the first field snapshot",
        "frame_step" => "spacing of field snapshots",
        "frame_count" => "snapshots after the first",
        "x_max" => "far edge of the snapshot window",
        _ => "numerical setting",
    }
}

fn provenance(cfg: &ScenarioConfig) -> BTreeMap<String, Value> {
    let keys = [
        "omega0", "detuning", "sigma0", "gamma", "dipole", "leak_rate", "length", "dt", "dk", "window", "t_end",
        "sample_dt", "spectral_cutoff", "release_time", "frame_step", "frame_count", "x_max", "dx",
    ];
    let mut out = BTreeMap::new();
    for key in keys {
        let source = match cfg.source(key) {
            Source::Default => "default".to_string(),
            Source::Config(line) => format!("config line {line}"),
            Source::Override => "sweep override".to_string(),
        };
        if key == "dipole" && cfg.dipole.is_none() {
            continue;
        }
        out.insert(key.to_string(), json!({ "source": source, "meaning": describe(key) }));
    }
    out
}

fn model(cfg: &ScenarioConfig) -> CoreResult<WaveguideModel> {
    let p = &cfg.physics;
    WaveguideModel::new(p.omega0, SPEED_OF_LIGHT, 0.0, 0.0)?.calibrated(p.gamma, p.omega0 + 1.0)
}

fn carrier(cfg: &ScenarioConfig) -> f64 {
    cfg.physics.omega0 + cfg.physics.detuning
}

/// Default grids for a sech target, with config overrides applied. Half
/// resolution doubles the time step only: doubling dk would shrink the
/// periodic box below the distance the packet travels in the window.
fn design_grids(
    cfg: &ScenarioConfig,
    m: &WaveguideModel,
    sigma0: f64,
    length: Option<f64>,
    res: Resolution,
) -> CoreResult<DesignGrids> {
    let w1 = carrier(cfg);
    let base = match length {
        Some(l) => DesignGrids::for_sech_at_distance(m, w1, sigma0, l)?,
        None => DesignGrids::for_sech(m, w1, sigma0)?,
    };
    let kgrid = match cfg.numerics.dk {
        Some(dk) => KGrid::new(dk, (base.kgrid.upper_edge() / dk).ceil() as usize)?,
        None => base.kgrid,
    };
    let half = cfg.numerics.window.unwrap_or(-base.tgrid.t_start());
    let dt = cfg.numerics.dt.unwrap_or(base.tgrid.dt()) * res.factor();
    Ok(DesignGrids { kgrid, tgrid: TimeGrid::centered(half, dt)? })
}

fn record_grids(out: &mut Outcome, g: &DesignGrids) {
    out.grid("k_modes", g.kgrid.len());
    out.grid("dk_per_um", g.kgrid.dk());
    out.grid("time_steps", g.tgrid.steps());
    out.grid("dt_ps", g.tgrid.dt());
    out.grid("window_start_ps", g.tgrid.t_start());
    out.grid("window_end_ps", g.tgrid.t_end());
}

/// Indices visited when a series of `len` rows is cut down to `max_rows`.
fn strided(len: usize, max_rows: usize) -> impl Iterator<Item = usize> {
    let stride = len.div_ceil(max_rows.max(1)).max(1);
    let last = len.saturating_sub(1);
    (0..len).step_by(stride).chain((!last.is_multiple_of(stride)).then_some(last))
}

fn max_abs_imag(packet: &SpectralWavepacket) -> f64 {
    packet.amplitudes.iter().fold(0.0f64, |m, c| m.max(c.im.abs()))
}

fn pulse_table(name: &str, pulses: &[(&str, &ControlPulse)], max_rows: usize) -> Table {
    let tgrid = pulses[0].1.tgrid;
    let mut columns = vec!["t_ps".to_string()];
    for (label, _) in pulses {
        columns.push(format!("re_{label}_meV"));
        columns.push(format!("im_{label}_meV"));
    }
    let rows = strided(tgrid.len(), max_rows)
        .map(|i| {
            let mut row = vec![tgrid.time(i)];
            for (_, p) in pulses {
                row.push(p.samples[i].re);
                row.push(p.samples[i].im);
            }
            row
        })
        .collect();
    Table { name: name.into(), columns, rows }
}

/// Designed amplitudes; `labels` names the ground and excited levels.
fn amplitude_table(d: &DesignRecord, labels: (&str, &str), max_rows: usize) -> Table {
    let (ground, excited) = labels;
    let (tgrid, a1, a3, field) = (&d.tgrid, &d.ground, &d.excited, &d.field.population);
    let columns = vec![
        "t_ps".to_string(),
        format!("pop_{ground}"),
        format!("pop_{excited}"),
        "pop_field".to_string(),
        format!("re_{ground}"),
        format!("im_{ground}"),
        format!("re_{excited}"),
        format!("im_{excited}"),
    ];
    let rows = strided(tgrid.len(), max_rows)
        .map(|i| {
            vec![
                tgrid.time(i),
                a1[i].norm_sqr(),
                a3[i].norm_sqr(),
                field[i],
                a1[i].re,
                a1[i].im,
                a3[i].re,
                a3[i].im,
            ]
        })
        .collect();
    Table { name: "amplitudes".into(), columns, rows }
}

fn packet_table(m: &WaveguideModel, packets: &[(&str, &SpectralWavepacket)]) -> CoreResult<Table> {
    let kgrid = packets[0].1.kgrid;
    let mut columns = vec!["k_per_um".to_string(), "omega_minus_omega0_meV".to_string()];
    for (label, _) in packets {
        columns.push(format!("re_{label}_per_sqrt_um"));
        columns.push(format!("im_{label}_per_sqrt_um"));
    }
    let mut rows = Vec::with_capacity(kgrid.len());
    for j in 0..kgrid.len() {
        let k = kgrid.k(j);
        let mut row = vec![k, m.omega_of_k(k)? - m.omega0];
        for (_, p) in packets {
            row.push(p.amplitudes[j].re);
            row.push(p.amplitudes[j].im);
        }
        rows.push(row);
    }
    Ok(Table { name: "packet".into(), columns, rows })
}

fn design_scalars(out: &mut Outcome, d: &DesignRecord, markov: &ControlPulse, target: &SpectralWavepacket) -> CoreResult<()> {
    let window = d.emission_window(EMISSION_WINDOW_FRACTION);
    out.set("peak_omega_meV", d.pulse.max_abs());
    out.set("peak_omega_markov_meV", markov.max_abs());
    out.set("design_norm_residual", d.norm_residual());
    out.set("design_overlap", target.overlap(&d.field.final_packet())?.norm());
    out.set("tail_shift_meV", d.tail_shift);
    out.set("max_excited_population", d.excited.iter().fold(0.0f64, |m, a| m.max(a.norm_sqr())));
    out.set("emission_window_start_ps", window.0);
    out.set("emission_window_end_ps", window.1);
    out.set("markov_distance", d.pulse.relative_l2_distance(markov, Some(window))?);
    out.set("markov_distance_full_window", d.pulse.relative_l2_distance(markov, None)?);
    Ok(())
}

struct Sender {
    model: WaveguideModel,
    node: ThreeLevelNode,
    grids: DesignGrids,
    target: SpectralWavepacket,
}

fn sender(cfg: &ScenarioConfig, sigma0: f64, res: Resolution) -> CoreResult<Sender> {
    let m = model(cfg)?;
    let node = ThreeLevelNode::new(carrier(cfg), m)?;
    let grids = design_grids(cfg, &m, sigma0, None, res)?;
    let target = SpectralWavepacket::sech(&m, grids.kgrid, carrier(cfg), sigma0)?;
    Ok(Sender { model: m, node, grids, target })
}

fn send_design(cfg: &ScenarioConfig, res: Resolution) -> CoreResult<Outcome> {
    let mut out = Outcome::new(cfg);
    let s = sender(cfg, cfg.physics.sigma0, res)?;
    record_grids(&mut out, &s.grids);
    let d = design_sending_pulse(&s.target, &s.node, &s.grids.tgrid)?;
    let markov = design_sending_pulse_markovian(&s.target, &s.node, &s.grids.tgrid)?;
    design_scalars(&mut out, &d, &markov, &s.target)?;
    let rows = cfg.output.max_rows;
    out.tables.push(pulse_table("pulse", &[("Omega", &d.pulse), ("Omega_markov", &markov)], rows));
    out.tables.push(amplitude_table(&d, ("C1", "C3"), rows));
    out.tables.push(packet_table(&s.model, &[("F_target", &s.target), ("F_design", &d.field.final_packet())])?);
    out.headline(&["peak_omega_meV", "markov_distance"], 1e-2);
    Ok(out)
}

fn send_roundtrip(cfg: &ScenarioConfig, res: Resolution) -> CoreResult<Outcome> {
    let mut out = Outcome::new(cfg);
    let s = sender(cfg, cfg.physics.sigma0, res)?;
    record_grids(&mut out, &s.grids);
    let d = design_sending_pulse(&s.target, &s.node, &s.grids.tgrid)?;
    let markov = design_sending_pulse_markovian(&s.target, &s.node, &s.grids.tgrid)?;
    design_scalars(&mut out, &d, &markov, &s.target)?;
    let leak = Some(cfg.physics.leak_rate);
    let exact = propagate_sending(&d.pulse, &s.node, s.grids.kgrid, &s.grids.tgrid, leak)?;
    let approx = propagate_sending(&markov, &s.node, s.grids.kgrid, &s.grids.tgrid, leak)?;
    let (f_exact, f_markov) = (exact.final_packet(), approx.final_packet());
    out.set("fidelity", sending_fidelity(&exact, &s.target)?);
    out.set("fidelity_markov", sending_fidelity(&approx, &s.target)?);
    out.set("max_abs_im_F_out", max_abs_imag(&f_exact));
    out.set("max_abs_im_F_out_markov", max_abs_imag(&f_markov));
    norm_scalars(&mut out, "", &exact);
    norm_scalars(&mut out, "_markov", &approx);
    let rows = cfg.output.max_rows;
    out.tables.push(pulse_table("pulse", &[("Omega", &d.pulse), ("Omega_markov", &markov)], rows));
    out.tables.push(trajectory_table("populations", &exact, rows));
    out.tables.push(packet_table(&s.model, &[("F_target", &s.target), ("F_out", &f_exact), ("F_out_markov", &f_markov)])?);
    out.headline(&["fidelity", "fidelity_markov"], 1e-3);
    Ok(out)
}

fn norm_scalars(out: &mut Outcome, suffix: &str, tr: &Trajectory) {
    out.set(&format!("max_norm_error{suffix}"), tr.max_norm_error());
    out.set(&format!("max_norm_increase{suffix}"), tr.max_norm_increase());
    out.set(&format!("final_norm_loss{suffix}"), *tr.norm_loss.last().unwrap_or(&0.0));
}

fn trajectory_table(name: &str, tr: &Trajectory, max_rows: usize) -> Table {
    let rows = strided(tr.tgrid.len(), max_rows)
        .map(|i| {
            vec![
                tr.tgrid.time(i),
                tr.ground[i].norm_sqr(),
                tr.excited[i].norm_sqr(),
                tr.field.population[i],
                tr.norm_loss[i],
            ]
        })
        .collect();
    Table::new(name, &["t_ps", "pop_ground", "pop_excited", "pop_field", "norm_loss"], rows)
}

fn receive_roundtrip(cfg: &ScenarioConfig, res: Resolution) -> CoreResult<Outcome> {
    let mut out = Outcome::new(cfg);
    let m = model(cfg)?;
    let length = cfg.physics.length;
    let grids = design_grids(cfg, &m, cfg.physics.sigma0, Some(length), res)?;
    record_grids(&mut out, &grids);
    let incoming = SpectralWavepacket::sech(&m, grids.kgrid, carrier(cfg), cfg.physics.sigma0)?;
    let node = ThreeLevelNode::new(carrier(cfg), m)?;
    let d = design_receiving_pulse(&incoming, &node, length, &grids.tgrid)?;
    let tr = propagate_receiving(&d.pulse, &incoming, &node.with_leak_rate(cfg.physics.leak_rate)?, length, &grids.tgrid)?;
    if let NodeRole::Receiving { arrival, .. } = d.role {
        out.set("arrival_time_ps", arrival);
    }
    out.set("peak_omega_meV", d.pulse.max_abs());
    out.set("absorption_design", d.ground.last().map_or(0.0, |a| a.norm_sqr()));
    out.set("absorption", tr.ground.last().map_or(0.0, |a| a.norm_sqr()));
    out.set("field_left", tr.final_packet().norm_squared());
    norm_scalars(&mut out, "", &tr);
    let rows = cfg.output.max_rows;
    out.tables.push(pulse_table("pulse", &[("Omega", &d.pulse)], rows));
    out.tables.push(amplitude_table(&d, ("D1", "D3"), rows));
    out.tables.push(trajectory_table("populations", &tr, rows));
    out.headline(&["absorption"], 1e-3);
    Ok(out)
}

pub fn table_key(sigma0: f64, fraction: f64) -> String {
    format!("fidelity_sigma0_{sigma0}_leak_{fraction}")
}

fn table1(cfg: &ScenarioConfig, res: Resolution) -> CoreResult<Outcome> {
    let mut out = Outcome::new(cfg);
    let mut rows = Vec::new();
    for sigma0 in TABLE_SIGMAS {
        let s = sender(cfg, sigma0, res)?;
        let d = design_sending_pulse(&s.target, &s.node, &s.grids.tgrid)?;
        out.grid(&format!("k_modes_sigma0_{sigma0}"), s.grids.kgrid.len());
        out.grid(&format!("time_steps_sigma0_{sigma0}"), s.grids.tgrid.steps());
        // the leakage cells share the design and run side by side
        let cells: Vec<CoreResult<(f64, Trajectory)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = TABLE_LEAK_FRACTIONS
                .iter()
                .map(|&fraction| {
                    let (s, d) = (&s, &d);
                    scope.spawn(move || {
                        let leak = fraction * cfg.physics.gamma;
                        propagate_sending(&d.pulse, &s.node, s.grids.kgrid, &s.grids.tgrid, Some(leak))
                            .map(|tr| (fraction, tr))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("propagation thread panicked")).collect()
        });
        for cell in cells {
            let (fraction, tr) = cell?;
            let fid = sending_fidelity(&tr, &s.target)?;
            debug!("sigma0 {sigma0} leak {fraction}: fidelity {fid}");
            out.set(&table_key(sigma0, fraction), fid);
            rows.push(vec![
                sigma0,
                fraction,
                fraction * cfg.physics.gamma,
                fid,
                tr.max_norm_increase(),
                *tr.norm_loss.last().unwrap_or(&0.0),
            ]);
        }
    }
    out.tables.push(Table::new(
        "fidelity",
        &["sigma0_meV", "leak_fraction", "leak_rate_meV", "fidelity", "max_norm_increase", "final_norm_loss"],
        rows,
    ));
    let keys: Vec<String> = out.scalars.keys().cloned().collect();
    let keys: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
    out.headline(&keys, 1e-3);
    Ok(out)
}

fn two_level_params(cfg: &ScenarioConfig) -> CoreResult<(TwoLevelParams, TwoLevelParams)> {
    let m = model(cfg)?;
    let w10 = carrier(cfg);
    let leaky = m.with_leak_rate(cfg.physics.leak_rate)?;
    Ok((TwoLevelParams::new(w10, m)?, TwoLevelParams::new(w10, leaky)?))
}

fn spectral_cutoff(cfg: &ScenarioConfig, p: &TwoLevelParams) -> f64 {
    cfg.numerics.spectral_cutoff.map_or_else(|| default_spectral_cutoff(p), |c| p.model.omega0 + c)
}

/// Direct propagation on a step that divides `samples.dt()`; returns the
/// trajectory and the number of steps per sample.
fn direct_two_level(cfg: &ScenarioConfig, p: &TwoLevelParams, samples: &TimeGrid, res: Resolution, recording: &Recording) -> CoreResult<(Trajectory, usize, KGrid)> {
    let base = two_level_kgrid(p, samples.t_end())?;
    let dk = cfg.numerics.dk.unwrap_or(base.dk()) * res.factor();
    let kgrid = KGrid::new(dk, (base.upper_edge() / dk).ceil() as usize)?;
    let dt = cfg.numerics.dt.unwrap_or_else(|| two_level_time_step(p, kgrid)) * res.factor();
    let sub = (samples.dt() / dt).ceil().max(1.0) as usize;
    let fine = TimeGrid::new(samples.t_start(), samples.t_end(), samples.dt() / sub as f64)?;
    info!("direct propagation: {} modes, {} steps", kgrid.len(), fine.steps());
    Ok((propagate_two_level(p, &fine, kgrid, recording)?, sub, kgrid))
}

fn emission_decay(cfg: &ScenarioConfig, res: Resolution) -> CoreResult<Outcome> {
    let mut out = Outcome::new(cfg);
    let (p, leaky) = two_level_params(cfg)?;
    let t_end = cfg.numerics.t_end.unwrap_or(10.0);
    let samples = TimeGrid::spanning(0.0, t_end, cfg.numerics.sample_dt)?;
    let gf = excited_amplitude_with_cutoff(&samples, &p, spectral_cutoff(cfg, &p))?;
    let (tr, sub, kgrid) = direct_two_level(cfg, &leaky, &samples, res, &Recording::Strided(2))?;
    out.grid("k_modes", kgrid.len());
    out.grid("dk_per_um", kgrid.dk());
    out.grid("dt_ps", tr.tgrid.dt());
    out.grid("spectral_cutoff_meV", gf.cutoff - p.model.omega0);

    let gamma = gamma_of_omega(p.omega10, &p);
    let lifetime = HBAR / gamma;
    let direct: Vec<Complex64> = tr.excited.iter().step_by(sub).copied().collect();
    let times = samples.times();
    let mut rows = Vec::with_capacity(times.len());
    let (mut dev_direct, mut dev_ww) = (0.0f64, 0.0f64);
    for (i, &t) in times.iter().enumerate() {
        let u = gf.amplitudes[i];
        let ww = weisskopf_wigner_population(t, &p);
        dev_direct = dev_direct.max((u.norm() - direct[i].norm()).abs());
        if t <= 3.0 * lifetime {
            dev_ww = dev_ww.max((u.norm_sqr() - ww).abs());
        }
        rows.push(vec![t, u.norm_sqr(), direct[i].norm_sqr(), ww, u.re, u.im]);
    }
    let at_lifetime = samples.nearest(lifetime);
    out.set("gamma_at_transition_meV", gamma);
    out.set("lamb_shift_meV", delta_closed_form(p.omega10, &p)?);
    out.set("lifetime_ps", lifetime);
    out.set("population_at_lifetime", gf.amplitudes[at_lifetime].norm_sqr());
    out.set("population_at_lifetime_direct", direct[at_lifetime].norm_sqr());
    out.set("population_end", gf.amplitudes.last().map_or(0.0, |a| a.norm_sqr()));
    out.set("max_deviation_direct", dev_direct);
    out.set("max_deviation_markovian_3_lifetimes", dev_ww);
    out.set("sum_rule", gf.sum_rule);
    out.set("plateau", gf.plateau);
    if let Some(b) = gf.bound {
        out.set("binding_meV", b.binding);
        out.set("residue", b.residue);
    }
    norm_scalars(&mut out, "_direct", &tr);
    out.tables.push(Table::new(
        "decay",
        &["t_ps", "pop_green", "pop_direct", "pop_markovian", "re_U1", "im_U1"],
        rows,
    ));
    out.headline(&["population_at_lifetime_direct", "max_deviation_direct"], 1e-3);
    Ok(out)
}

/// Local maxima of `p` that stand at least `prominence` above the lowest
/// point before the next maximum.
pub fn prominent_maxima(p: &[f64], prominence: f64) -> usize {
    let peaks: Vec<usize> = (1..p.len().saturating_sub(1)).filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1]).collect();
    peaks
        .iter()
        .enumerate()
        .filter(|(n, &i)| {
            let end = peaks.get(n + 1).copied().unwrap_or(p.len());
            let dip = p[i..end].iter().copied().fold(f64::INFINITY, f64::min);
            p[i] - dip >= prominence
        })
        .count()
}

fn bound_state(cfg: &ScenarioConfig, res: Resolution) -> CoreResult<Outcome> {
    let mut out = Outcome::new(cfg);
    let (p, leaky) = two_level_params(cfg)?;
    let cutoff = spectral_cutoff(cfg, &p);
    let t_end = cfg.numerics.t_end.unwrap_or(20.0);
    let sample_dt = cfg.numerics.sample_dt * res.factor();
    let samples = TimeGrid::spanning(0.0, t_end, sample_dt)?;
    let gf = excited_amplitude_with_cutoff(&samples, &p, cutoff)?;
    // plateau: last fifth of a window 50ħ/γ long
    let settle = TimeGrid::spanning(0.0, 50.0 * HBAR / cfg.physics.gamma, 0.5 * sample_dt)?;
    let settled = excited_amplitude_with_cutoff(&settle, &p, cutoff)?;
    let pops = gf.populations();
    out.set("plateau", settled.plateau);
    out.set("sum_rule", gf.sum_rule);
    out.set("rabi_maxima", prominent_maxima(&pops, MAXIMUM_PROMINENCE) as f64);
    out.set("population_end", *pops.last().unwrap_or(&0.0));
    match gf.bound {
        Some(b) => {
            out.set("omega_b_minus_omega0_meV", b.omega - p.model.omega0);
            out.set("binding_meV", b.binding);
            out.set("residue", b.residue);
            out.set("residue_squared", b.residue * b.residue);
            out.set("plateau_minus_residue_squared", settled.plateau - b.residue * b.residue);
        }
        None => out.set("residue_squared", 0.0),
    }

    let mut columns = vec!["t_ps", "pop_green", "re_U1", "im_U1"];
    let direct = if cfg.physics.leak_rate > 0.0 {
        columns.push("pop_direct_with_leak");
        let (tr, sub, _) = direct_two_level(cfg, &leaky, &samples, res, &Recording::Strided(2))?;
        norm_scalars(&mut out, "_direct", &tr);
        Some(tr.excited.iter().step_by(sub).map(|a| a.norm_sqr()).collect::<Vec<f64>>())
    } else {
        None
    };
    let rows = (0..samples.len())
        .map(|i| {
            let u = gf.amplitudes[i];
            let mut row = vec![samples.time(i), pops[i], u.re, u.im];
            if let Some(d) = &direct {
                row.push(d[i]);
            }
            row
        })
        .collect();
    out.tables.push(Table::new("decay", &columns, rows));

    // self-energy across the edge, on a grid that avoids ω0 itself
    let mut rows = Vec::new();
    for i in 0..800 {
        let x = -3.0 + (i as f64 + 0.5) * 0.01;
        let w = p.model.omega0 + x;
        rows.push(vec![x, gamma_of_omega(w, &p), delta_closed_form(w, &p)?, spectral_function(w, &p)]);
    }
    out.tables.push(Table::new(
        "self_energy",
        &["omega_minus_omega0_meV", "gamma_meV", "delta_meV", "spectral_density_per_meV"],
        rows,
    ));
    out.headline(&["plateau", "residue_squared"], 1e-2);
    Ok(out)
}

fn field_movie(cfg: &ScenarioConfig, res: Resolution) -> CoreResult<Outcome> {
    let mut out = Outcome::new(cfg);
    let (p, leaky) = two_level_params(cfg)?;
    let n = &cfg.numerics;
    let frames: Vec<f64> = (0..=n.frame_count).map(|i| n.release_time + i as f64 * n.frame_step).collect();
    let t_end = *frames.last().unwrap();
    let base = two_level_kgrid(&leaky, t_end)?;
    let dk = n.dk.unwrap_or(base.dk()) * res.factor();
    let kgrid = KGrid::new(dk, (base.upper_edge() / dk).ceil() as usize)?;
    let dt = n.dt.unwrap_or_else(|| two_level_time_step(&leaky, kgrid)) * res.factor();
    let tgrid = TimeGrid::spanning(0.0, t_end, dt)?;
    out.grid("k_modes", kgrid.len());
    out.grid("dk_per_um", kgrid.dk());
    out.grid("dt_ps", tgrid.dt());
    info!("field propagation: {} modes, {} steps", kgrid.len(), tgrid.steps());
    let tr = propagate_two_level(&leaky, &tgrid, kgrid, &Recording::At(frames.clone()))?;
    norm_scalars(&mut out, "", &tr);

    let dx = n.dx.unwrap_or(0.99 * PI / kgrid.upper_edge());
    let xs: Vec<f64> = (0..).map(|i| -1.0 + i as f64 * dx).take_while(|&x| x <= n.x_max).collect();
    out.grid("dx_um", dx);
    let near = FLOOR_HALF_WIDTH.max(dx);
    let vg = p.model.group_velocity(p.omega10)?;
    let mut field_rows = Vec::new();
    let mut frame_rows = Vec::new();
    let mut floor0 = None;
    for (t, c) in tr.field.snapshot_times.iter().zip(&tr.field.snapshots) {
        let snap = field_at(c, kgrid, *t, &xs, &p)?;
        let intensity = snap.intensity();
        let close: Vec<f64> = xs.iter().zip(&intensity).filter(|(x, _)| x.abs() <= near).map(|(_, i)| *i).collect();
        let floor = close.iter().sum::<f64>() / close.len().max(1) as f64;
        let floor0 = *floor0.get_or_insert(floor);
        let (front, peak) = xs
            .iter()
            .zip(&intensity)
            .filter(|(x, _)| **x > FRONT_MIN_X)
            .fold((f64::NAN, 0.0), |m, (x, i)| if *i > m.1 { (*x, *i) } else { m });
        let excited = tr.excited[tgrid.nearest(*t)].norm_sqr();
        frame_rows.push(vec![*t, floor, floor / floor0, front, peak, excited]);
        for ((x, i), f) in xs.iter().zip(&intensity).zip(&snap.f) {
            field_rows.push(vec![*t, *x, *i, f.re, f.im]);
        }
    }
    let first = &frame_rows[0];
    let last = &frame_rows[frame_rows.len() - 1];
    let speed = if frame_rows.len() > 1 { (last[3] - first[3]) / (last[0] - first[0]) } else { f64::NAN };
    out.set("floor_ratio_min", frame_rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min));
    out.set("floor_at_release_per_um", first[1]);
    out.set("front_speed_um_per_ps", speed);
    out.set("group_velocity_um_per_ps", vg);
    out.set("front_speed_ratio", speed / vg);
    out.set("excited_population_at_release", first[5]);
    if let Some(c) = tr.field.snapshots.last() {
        let (mut w, mut wsum) = (0.0, 0.0);
        for (j, a) in c.iter().enumerate() {
            w += a.norm_sqr() * p.model.omega_of_k(kgrid.k(j))?;
            wsum += a.norm_sqr();
        }
        if wsum > 0.0 {
            let mean = w / wsum;
            out.set("mean_emitted_detuning_meV", mean - p.model.omega0);
            out.set("group_velocity_at_mean_emitted_um_per_ps", p.model.group_velocity(mean)?);
        }
    }
    if let Some(b) = wqed_core::bound_state(&p)? {
        out.set("binding_meV", b.binding);
        out.set("residue", b.residue);
    }
    out.tables.push(Table::new(
        "frames",
        &["t_ps", "floor_per_um", "floor_ratio", "front_x_um", "front_intensity_per_um", "pop_excited"],
        frame_rows,
    ));
    out.tables.push(Table::new("field", &["t_ps", "x_um", "intensity_per_um", "re_f_per_sqrt_um", "im_f_per_sqrt_um"], field_rows));
    out.headline(&["floor_ratio_min", "front_speed_ratio"], 5e-2);
    Ok(out)
}

/// One scenario at the given resolution, without the convergence check.
pub fn evaluate(cfg: &ScenarioConfig, res: Resolution) -> CoreResult<Outcome> {
    match cfg.scenario {
        Scenario::SendDesign => send_design(cfg, res),
        Scenario::SendRoundtrip => send_roundtrip(cfg, res),
        Scenario::ReceiveRoundtrip => receive_roundtrip(cfg, res),
        Scenario::Table1 => table1(cfg, res),
        Scenario::EmissionDecay => emission_decay(cfg, res),
        Scenario::BoundState => bound_state(cfg, res),
        Scenario::FieldMovie => field_movie(cfg, res),
    }
}

pub fn compare(full: &Outcome, half: &Outcome) -> Convergence {
    let (a, b) = (full.headline_values(), half.headline_values());
    let change = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0f64, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) });
    Convergence {
        headline: full.headline.clone(),
        full: a,
        half: b,
        change,
        tolerance: full.tolerance,
        converged: change <= full.tolerance,
    }
}

/// Run a scenario; with `half_res_check` the headline scalars are recomputed
/// at half resolution and compared.
pub fn run_scenario(cfg: &ScenarioConfig) -> CoreResult<Outcome> {
    let mut out = evaluate(cfg, Resolution::Full)?;
    if cfg.output.half_res_check {
        let half = evaluate(cfg, Resolution::Half)?;
        out.convergence = Some(compare(&out, &half));
    }
    Ok(out)
}
