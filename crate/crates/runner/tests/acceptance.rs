//! Acceptance checks. Prints one PASS/FAIL line per criterion and a tally.
//! Set WQED_ACCEPTANCE_STRICT=1 to exit nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use wqed_core::emission::{delta_cutoff_remainder, weisskopf_wigner_population, TwoLevelParams};
use wqed_core::{delta_closed_form, delta_numeric, excited_amplitude, gamma_of_omega, TimeGrid, WaveguideModel, HBAR};
use wqed_runner::config::{Scenario, ScenarioConfig};
use wqed_runner::scenario::{evaluate, table_key, Outcome, Resolution, TABLE_LEAK_FRACTIONS, TABLE_SIGMAS};

/// Reference sending fidelities, (σ0, leak fraction) in table order.
const FIDELITY_REFERENCE: [(f64, f64, f64); 4] =
    [(0.08, 0.01, 0.9916), (0.08, 0.06, 0.9667), (0.008, 0.01, 0.9900), (0.008, 0.06, 0.9606)];
const FIDELITY_TOLERANCE: f64 = 0.01;
const ROUNDTRIP_WIDE: f64 = 0.995;
const ROUNDTRIP_NARROW: f64 = 0.999;
const ABSORPTION_MIN: f64 = 0.99;
const MARKOV_DISTANCE_SPLIT: f64 = 0.05;
const IMAGINARY_RATIO_MIN: f64 = 10.0;
const SHIFT_TOLERANCE: f64 = 1e-4;
const CROSS_CHECK_TOLERANCE: f64 = 1e-3;
const CROSS_CHECK_WINDOW: f64 = 10.0;
const MARKOVIAN_TOLERANCE: f64 = 0.02;
const PLATEAU_TOLERANCE: f64 = 1e-2;
const MIN_RABI_MAXIMA: f64 = 3.0;
const NORM_TOLERANCE: f64 = 1e-6;
/// Rounding allowance on "nonincreasing".
const NORM_ROUNDING: f64 = 1e-12;
const FLOOR_RATIO_MIN: f64 = 0.5;
const SPEED_TOLERANCE: f64 = 0.2;

struct Tally {
    passed: usize,
    failed: Vec<&'static str>,
}

impl Tally {
    fn line(&mut self, id: &'static str, name: &str, ok: bool, detail: String) {
        println!("{} {id} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(id);
        }
    }
}

fn scenario(s: Scenario, edit: impl FnOnce(&mut ScenarioConfig)) -> Outcome {
    let mut cfg = ScenarioConfig::defaults(s);
    edit(&mut cfg);
    let clock = Instant::now();
    let out = evaluate(&cfg, Resolution::Full).unwrap_or_else(|e| panic!("{s}: {e}"));
    eprintln!("  ran {s} in {:.1} s", clock.elapsed().as_secs_f64());
    out
}

fn two_level(gamma: f64, detuning: f64) -> TwoLevelParams {
    let m = WaveguideModel::default();
    let m = m.calibrated(gamma, m.omega0 + 1.0).unwrap();
    TwoLevelParams::new(m.omega0 + detuning, m).unwrap()
}

fn main() -> ExitCode {
    let mut t = Tally { passed: 0, failed: Vec::new() };
    let mut norm_errors: Vec<(String, f64)> = Vec::new();

    // 1: leakage fidelity table
    let table = scenario(Scenario::Table1, |_| {});
    let mut worst: f64 = 0.0;
    let mut cells = Vec::new();
    for (sigma0, fraction, reference) in FIDELITY_REFERENCE {
        let got = table.scalars[&table_key(sigma0, fraction)];
        worst = worst.max((got - reference).abs());
        cells.push(format!("σ0={sigma0} γ'={}%: {got:.4} (ref {reference:.4})", fraction * 100.0));
    }
    assert_eq!(table.scalars.len(), TABLE_SIGMAS.len() * TABLE_LEAK_FRACTIONS.len());
    t.line(
        "C1",
        "sending fidelity with leakage",
        worst <= FIDELITY_TOLERANCE,
        format!("{}; max |diff| {worst:.4} (tol {FIDELITY_TOLERANCE})", cells.join(", ")),
    );
    let table_rows = &table.tables.iter().find(|x| x.name == "fidelity").unwrap().rows;
    let leaky_increase = table_rows.iter().map(|r| r[4]).fold(0.0f64, f64::max);

    // 2, 4, 5: sending roundtrips with exact and Markovian pulses
    let wide = scenario(Scenario::SendRoundtrip, |c| c.physics.sigma0 = 0.08);
    let narrow = scenario(Scenario::SendRoundtrip, |c| c.physics.sigma0 = 0.008);
    let (fw, fn_) = (wide.scalars["fidelity"], narrow.scalars["fidelity"]);
    t.line(
        "C2",
        "design-propagate roundtrip",
        fw >= ROUNDTRIP_WIDE && fn_ >= ROUNDTRIP_NARROW,
        format!("σ0=0.08: {fw:.6} (≥ {ROUNDTRIP_WIDE}), σ0=0.008: {fn_:.6} (≥ {ROUNDTRIP_NARROW})"),
    );
    for (label, o) in [("send σ0=0.08", &wide), ("send σ0=0.008", &narrow)] {
        norm_errors.push((label.into(), o.scalars["max_norm_error"]));
        norm_errors.push((format!("{label} markovian"), o.scalars["max_norm_error_markov"]));
    }

    // 3: receiving node at the default distance
    let mut absorbed = Vec::new();
    for sigma0 in [0.08, 0.008] {
        let o = scenario(Scenario::ReceiveRoundtrip, |c| c.physics.sigma0 = sigma0);
        norm_errors.push((format!("receive σ0={sigma0}"), o.scalars["max_norm_error"]));
        absorbed.push((sigma0, o.scalars["absorption"]));
    }
    let length = ScenarioConfig::defaults(Scenario::ReceiveRoundtrip).physics.length;
    t.line(
        "C3",
        "receiving impedance match",
        absorbed.iter().all(|(_, a)| *a >= ABSORPTION_MIN),
        format!(
            "L={length} µm: {} (≥ {ABSORPTION_MIN})",
            absorbed.iter().map(|(s, a)| format!("σ0={s}: |D1|²={a:.6}")).collect::<Vec<_>>().join(", ")
        ),
    );

    let (dw, dn) = (wide.scalars["markov_distance"], narrow.scalars["markov_distance"]);
    t.line(
        "C4",
        "Markovian vs exact pulse",
        dn <= MARKOV_DISTANCE_SPLIT && dw > MARKOV_DISTANCE_SPLIT,
        format!(
            "relative L2 on the emission window: σ0=0.008: {dn:.4} (≤ {MARKOV_DISTANCE_SPLIT}), σ0=0.08: {dw:.4} (> {MARKOV_DISTANCE_SPLIT}); whole window {:.3} / {:.3}",
            narrow.scalars["markov_distance_full_window"],
            wide.scalars["markov_distance_full_window"]
        ),
    );

    let (iw, in_) = (wide.scalars["max_abs_im_F_out_markov"], narrow.scalars["max_abs_im_F_out_markov"]);
    t.line(
        "C5",
        "Markovian design leaves an imaginary part",
        iw >= IMAGINARY_RATIO_MIN * in_,
        format!(
            "max|Im F_out|: σ0=0.08: {iw:.3e}, σ0=0.008: {in_:.3e}, ratio {:.2} (≥ {IMAGINARY_RATIO_MIN}); exact-pulse values {:.1e} / {:.1e}",
            iw / in_,
            wide.scalars["max_abs_im_F_out"],
            narrow.scalars["max_abs_im_F_out"]
        ),
    );

    // 6: self-energy quadrature against the closed form
    let p = two_level(0.27, 1.0);
    let w0 = p.model.omega0;
    let cutoff = w0 + 1e4;
    let offsets = [0.01, 0.03, 0.1, 0.3, 1.0, 2.0, 3.0, 5.0, 10.0, 30.0];
    let mut worst: f64 = 0.0;
    for x in offsets.iter().flat_map(|&x| [-x, x]) {
        let w = w0 + x;
        let full = delta_numeric(w, &p, cutoff).unwrap() + delta_cutoff_remainder(w, &p, cutoff).unwrap();
        let closed = delta_closed_form(w, &p).unwrap();
        // above the edge Δ vanishes; scale by its size at the mirror frequency
        let scale = 0.5 * gamma_of_omega(w0 + x.abs(), &p);
        worst = worst.max((full - closed).abs() / scale);
    }
    t.line(
        "C6",
        "self-energy quadrature",
        worst <= SHIFT_TOLERANCE,
        format!("20 frequencies at ω0 ± [0.01, 30] meV: max relative error {worst:.2e} (≤ {SHIFT_TOLERANCE:e})"),
    );

    // 7: Green's function vs direct propagation
    let mut devs = Vec::new();
    for gamma in [0.27, 4.37] {
        let o = scenario(Scenario::EmissionDecay, |c| {
            c.physics.gamma = gamma;
            c.numerics.t_end = Some(CROSS_CHECK_WINDOW);
        });
        norm_errors.push((format!("two-level γ={gamma}"), o.scalars["max_norm_error_direct"]));
        devs.push((gamma, o.scalars["max_deviation_direct"]));
    }
    t.line(
        "C7",
        "Green's function vs direct propagation",
        devs.iter().all(|(_, d)| *d <= CROSS_CHECK_TOLERANCE),
        format!(
            "max ||U1| - |C1|| on [0, {CROSS_CHECK_WINDOW}] ps: {} (≤ {CROSS_CHECK_TOLERANCE:e})",
            devs.iter().map(|(g, d)| format!("γ={g}: {d:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    );

    // 8: far above the edge the decay is exponential
    let p = two_level(0.27, 10.0);
    let gamma = gamma_of_omega(p.omega10, &p);
    let tg = TimeGrid::spanning(0.0, 3.0 * HBAR / gamma, 0.01).unwrap();
    let r = excited_amplitude(&tg, &p).unwrap();
    let worst = r
        .populations()
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let w = weisskopf_wigner_population(tg.time(i), &p);
            (q - w).abs() / w
        })
        .fold(0.0f64, f64::max);
    t.line(
        "C8",
        "Weisskopf-Wigner limit",
        p.detuning() >= 100.0 * gamma && worst <= MARKOVIAN_TOLERANCE,
        format!(
            "δ={} meV = {:.0} Γ(ω10): max relative deviation over 3 lifetimes {worst:.2e} (≤ {MARKOVIAN_TOLERANCE})",
            p.detuning(),
            p.detuning() / gamma
        ),
    );

    // 9: bound polariton
    let b = scenario(Scenario::BoundState, |_| {});
    let (plateau, z2, maxima) = (b.scalars["plateau"], b.scalars["residue_squared"], b.scalars["rabi_maxima"]);
    t.line(
        "C9",
        "bound polariton",
        (plateau - z2).abs() <= PLATEAU_TOLERANCE && maxima >= MIN_RABI_MAXIMA,
        format!(
            "plateau {plateau:.4} vs Z² {z2:.4} (tol {PLATEAU_TOLERANCE}), {maxima} maxima (≥ {MIN_RABI_MAXIMA}); binding {:.4} meV, Z {:.4}",
            b.scalars["binding_meV"], b.scalars["residue"]
        ),
    );

    // 11 first, so its propagation joins the conservation check
    let movie = scenario(Scenario::FieldMovie, |_| {});
    norm_errors.push(("field movie".into(), movie.scalars["max_norm_error"]));
    let (floor, ratio) = (movie.scalars["floor_ratio_min"], movie.scalars["front_speed_ratio"]);

    // 10: conservation
    let (worst_label, worst) = norm_errors
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(l, v)| (l.clone(), *v))
        .unwrap();
    t.line(
        "C10",
        "norm conservation",
        worst <= NORM_TOLERANCE && leaky_increase <= NORM_ROUNDING,
        format!(
            "γ'=0: max |N-1| {worst:.2e} over {} runs (worst: {worst_label}; ≤ {NORM_TOLERANCE:e}); γ'>0: largest step increase {leaky_increase:.1e}",
            norm_errors.len()
        ),
    );

    t.line(
        "C11",
        "photon localization",
        floor >= FLOOR_RATIO_MIN && (ratio - 1.0).abs() <= SPEED_TOLERANCE,
        format!(
            "min floor ratio {floor:.3} (≥ {FLOOR_RATIO_MIN}); front {:.3} µm/ps = {ratio:.3} v_g(ω10) (within {SPEED_TOLERANCE}); v_g at the mean emitted frequency ({:.2} meV above ω0) is {:.3} µm/ps",
            movie.scalars["front_speed_um_per_ps"],
            movie.scalars["mean_emitted_detuning_meV"],
            movie.scalars["group_velocity_at_mean_emitted_um_per_ps"]
        ),
    );

    println!("{} of {} criteria passed", t.passed, t.passed + t.failed.len());
    if !t.failed.is_empty() {
        println!("failed: {}", t.failed.join(", "));
    }
    let strict = std::env::var("WQED_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !t.failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
