mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use wqed_core::emission::{
    delta_cutoff_remainder, propagate_two_level, self_energy_curve, two_level_kgrid, two_level_time_step,
    weisskopf_wigner_population,
};
use wqed_core::{
    bound_state, delta_closed_form, delta_numeric, excited_amplitude, field_snapshot, gamma_of_omega,
    spectral_function, weisskopf_wigner, Complex64, Error, KGrid, Recording, TimeGrid, TwoLevelParams, HBAR,
};

use common::{two_level, GAMMA, STRONG_GAMMA};

#[test]
fn rate_at_one_mev_and_scaling() {
    let p = two_level(GAMMA, 1.0);
    let w0 = p.model.omega0;
    assert_relative_eq!(gamma_of_omega(w0 + 1.0, &p), 0.27, max_relative = 1e-12);
    assert_relative_eq!(gamma_of_omega(w0 + 4.0, &p), 0.135, max_relative = 1e-9);
    assert_eq!(gamma_of_omega(w0 - 0.5, &p), 0.0);
    assert_eq!(gamma_of_omega(w0, &p), 0.0);
}

#[test]
fn closed_form_shift() {
    let p = two_level(GAMMA, 1.0);
    let w0 = p.model.omega0;
    // A = 0.27/2π, Δ(ω0 - 1) = -πA
    assert_relative_eq!(delta_closed_form(w0 - 1.0, &p).unwrap(), -0.135, max_relative = 1e-9);
    assert_eq!(delta_closed_form(w0 + 0.5, &p).unwrap(), 0.0);
    assert!(delta_closed_form(w0, &p).is_err());
    let off = TwoLevelParams::new(p.omega10, p.model.with_coupling(0.0).unwrap()).unwrap();
    assert_eq!(delta_closed_form(w0 - 1.0, &off).unwrap(), 0.0);
}

#[test]
fn numeric_shift_matches_closed_form_with_remainder() {
    let p = two_level(GAMMA, 1.0);
    let w0 = p.model.omega0;
    let w = w0 - 1.0;
    let cutoff = w0 + 1e6;
    let closed = delta_closed_form(w, &p).unwrap();
    let remainder = delta_cutoff_remainder(w, &p, cutoff).unwrap();
    let numeric = delta_numeric(w, &p, cutoff).unwrap();
    assert!((numeric + remainder - closed).abs() <= 1e-4 * closed.abs(), "{numeric} + {remainder} vs {closed}");
    // the untruncated tail is a few parts in 1e4 here, so it matters at this tolerance
    assert!(remainder.abs() > 1e-4 * closed.abs());
}

#[test]
fn numeric_shift_converges_monotonically_in_the_cutoff() {
    let p = two_level(GAMMA, 1.0);
    let w0 = p.model.omega0;
    for w in [w0 - 1.0, w0 + 0.5] {
        let closed = delta_closed_form(w, &p).unwrap();
        let errs: Vec<f64> = [1e2, 1e4, 1e6]
            .iter()
            .map(|c| (delta_numeric(w, &p, w0 + c).unwrap() - closed).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        let cutoff = w0 + 1e4;
        let full = delta_numeric(w, &p, cutoff).unwrap() + delta_cutoff_remainder(w, &p, cutoff).unwrap();
        assert!((full - closed).abs() <= 1e-6, "{full} vs {closed}");
    }
}

#[test]
fn numeric_shift_edge_cases() {
    let p = two_level(GAMMA, 1.0);
    let w0 = p.model.omega0;
    let off = TwoLevelParams::new(p.omega10, p.model.with_coupling(0.0).unwrap()).unwrap();
    assert_eq!(delta_numeric(w0 - 1.0, &off, w0 + 1e4).unwrap(), 0.0);
    assert!(matches!(delta_numeric(w0, &p, w0 + 1e4), Err(Error::Resolution(_))));
    assert!(delta_numeric(w0 - 1.0, &p, w0 - 2.0).is_err());
}

#[test]
fn self_energy_curve_is_consistent() {
    let p = two_level(GAMMA, 1.0);
    let w0 = p.model.omega0;
    let ws: Vec<f64> = (1..40).map(|i| w0 - 2.0 + 0.1 * i as f64 + 0.05).collect();
    let c = self_energy_curve(&p, &ws).unwrap();
    for i in 0..ws.len() {
        assert!(c.gamma[i] >= 0.0);
        if ws[i] <= w0 {
            assert_eq!(c.gamma[i], 0.0);
            assert!(c.delta[i] < 0.0);
        } else {
            assert_eq!(c.delta[i], 0.0);
        }
    }
}

/// Peak position and full width at half maximum of U(ω) on a fine scan.
fn scan_peak(p: &TwoLevelParams, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let ws: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let us: Vec<f64> = ws.iter().map(|&w| spectral_function(w, p)).collect();
    let (ip, peak) = us.iter().enumerate().fold((0, 0.0), |m, (i, &u)| if u > m.1 { (i, u) } else { m });
    let first = us.iter().position(|&u| u >= peak / 2.0).unwrap();
    let last = us.iter().rposition(|&u| u >= peak / 2.0).unwrap();
    (ws[ip], ws[last] - ws[first])
}

#[test]
fn weak_coupling_line_is_lorentzian() {
    let p = two_level(GAMMA, 10.0);
    let gamma = gamma_of_omega(p.omega10, &p);
    let (peak, fwhm) = scan_peak(&p, p.omega10 - 2.0, p.omega10 + 2.0, 40_000);
    assert!((peak - p.omega10).abs() <= 2e-3 * gamma, "peak at {}", peak - p.omega10);
    assert!((fwhm - gamma).abs() <= 0.02 * gamma, "fwhm {fwhm} vs Γ {gamma}");
}

#[test]
fn spectral_weight_vanishes_off_resonance_as_coupling_drops() {
    let p = two_level(GAMMA, 1.0);
    let w = p.omega10 + 0.5;
    let weak = TwoLevelParams::new(p.omega10, p.model.with_coupling(p.model.g * 1e-3).unwrap()).unwrap();
    assert!(spectral_function(w, &weak) < 1e-5 * spectral_function(w, &p));
    assert_eq!(spectral_function(p.model.omega0 - 0.1, &p), 0.0);
}

#[test]
fn sum_rule_holds_weak_and_strong() {
    let tg = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
    for gamma in [GAMMA, STRONG_GAMMA] {
        let r = excited_amplitude(&tg, &two_level(gamma, 1.0)).unwrap();
        assert!((r.sum_rule - 1.0).abs() <= 1e-3, "γ = {gamma}: {}", r.sum_rule);
        assert!((r.amplitudes[0].norm() - 1.0).abs() <= 1e-3);
    }
}

#[test]
fn weak_coupling_decays_almost_exponentially() {
    let p = two_level(GAMMA, 1.0);
    let lifetime = HBAR / 0.27;
    let tg = TimeGrid::spanning(0.0, 2.0 * lifetime, 0.01).unwrap();
    let r = excited_amplitude(&tg, &p).unwrap();
    let at = r.populations()[tg.nearest(lifetime)];
    // independent high-precision quadrature of the branch cut plus the pole
    assert!((at - 0.308587).abs() < 1e-5, "|U1|² at ħ/γ = {at}");
    // near 1/e, pulled down by the edge: the weak bound state holds Z ≈ 0.033
    assert!((at - (-1.0f64).exp()).abs() < 0.07);
}

#[test]
fn far_from_the_edge_decay_is_markovian() {
    // δ = 10 meV with the same coupling: δ ≈ 117 Γ(ω10)
    let p = two_level(GAMMA, 10.0);
    let gamma = gamma_of_omega(p.omega10, &p);
    assert!(p.detuning() >= 100.0 * gamma);
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
    assert!(worst <= 0.02, "max relative deviation {worst}");
}

#[test]
fn weisskopf_wigner_formula() {
    let p = two_level(GAMMA, 10.0);
    assert_eq!(weisskopf_wigner(0.0, &p).unwrap(), Complex64::new(1.0, 0.0));
    let gamma = gamma_of_omega(p.omega10, &p);
    let t = 1.7;
    let u = weisskopf_wigner(t, &p).unwrap();
    assert_relative_eq!(u.norm_sqr(), (-gamma * t / HBAR).exp(), max_relative = 1e-12);
    // phase advances at (ω10 + Δ)/ħ; Δ vanishes above the edge
    let du = weisskopf_wigner(t + 1e-6, &p).unwrap() / u;
    assert_relative_eq!(-du.arg() / 1e-6, p.omega10 / HBAR, max_relative = 1e-6);
}

#[test]
fn uncoupled_emitter_stays_excited() {
    let p = two_level(GAMMA, 1.0);
    let off = TwoLevelParams::new(p.omega10, p.model.with_coupling(0.0).unwrap()).unwrap();
    let tg = TimeGrid::new(0.0, 5.0, 0.05).unwrap();
    let r = excited_amplitude(&tg, &off).unwrap();
    assert!(r.populations().iter().all(|&q| q == 1.0));
    assert!(bound_state(&off).unwrap().is_none());
}

#[test]
fn strong_coupling_bound_polariton() {
    let p = two_level(STRONG_GAMMA, 1.0);
    let b = bound_state(&p).unwrap().unwrap();
    assert!((b.binding - 1.09).abs() < 0.01, "binding {}", b.binding);
    assert!((b.residue - 0.51).abs() < 0.01, "residue {}", b.residue);
    assert!((b.residue.powi(2) - 0.26).abs() < 0.01);
    // the pole satisfies ω - ω10 - Δ(ω) = 0
    let res = b.omega - p.omega10 - delta_closed_form(b.omega, &p).unwrap();
    assert!(res.abs() < 1e-9, "residual {res}");
}

#[test]
fn weak_coupling_bound_state_carries_little_weight() {
    let p = two_level(GAMMA, 1.0);
    let weak = TwoLevelParams::new(p.omega10, p.model.with_coupling(p.model.g * 0.05).unwrap()).unwrap();
    let b = bound_state(&weak).unwrap().unwrap();
    assert!(b.omega < weak.model.omega0);
    assert!(b.residue > 0.0 && b.residue < 1e-3, "Z = {}", b.residue);
    let strong = bound_state(&two_level(STRONG_GAMMA, 1.0)).unwrap().unwrap();
    let mid = bound_state(&p).unwrap().unwrap();
    assert!(b.residue < mid.residue && mid.residue < strong.residue);
}

#[test]
fn plateau_settles_at_residue_squared() {
    let p = two_level(STRONG_GAMMA, 1.0);
    let tg = TimeGrid::spanning(0.0, 50.0 * HBAR / STRONG_GAMMA, 0.005).unwrap();
    let r = excited_amplitude(&tg, &p).unwrap();
    let z2 = r.bound.unwrap().residue.powi(2);
    assert!((r.plateau - z2).abs() <= 1e-2, "plateau {} vs Z² {z2}", r.plateau);
}

#[test]
fn direct_propagation_agrees_with_the_green_function() {
    for gamma in [GAMMA, STRONG_GAMMA] {
        let p = two_level(gamma, 1.0);
        let duration = 3.0;
        let kgrid = two_level_kgrid(&p, duration).unwrap();
        let coarse = TimeGrid::new(0.0, duration, 0.01).unwrap();
        let sub = (0.01 / two_level_time_step(&p, kgrid)).ceil() as usize;
        let fine = TimeGrid::new(0.0, duration, 0.01 / sub as f64).unwrap();
        let tr = propagate_two_level(&p, &fine, kgrid, &Recording::Strided(2)).unwrap();
        assert!(tr.max_norm_error() <= 1e-6);
        let gf = excited_amplitude(&coarse, &p).unwrap();
        let worst = tr
            .excited
            .iter()
            .step_by(sub)
            .zip(&gf.amplitudes)
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-3, "γ = {gamma}: max deviation {worst}");
    }
}

#[test]
fn empty_field_stays_empty() {
    let p = two_level(STRONG_GAMMA, 1.0);
    let kgrid = KGrid::covering(&p.model, p.omega10 + 50.0, 0.01).unwrap();
    let zero = vec![Complex64::new(0.0, 0.0); kgrid.len()];
    let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
    let snaps = field_snapshot(&zero, kgrid, 1.0, &[1.0, 2.0], &xs, &p).unwrap();
    assert!(snaps.iter().all(|s| s.f.iter().all(|v| v.norm() == 0.0)));
}

#[test]
fn coarse_x_grid_is_rejected() {
    let p = two_level(STRONG_GAMMA, 1.0);
    let kgrid = KGrid::covering(&p.model, p.omega10 + 50.0, 0.01).unwrap();
    let zero = vec![Complex64::new(0.0, 0.0); kgrid.len()];
    let dx = 2.0 * PI / kgrid.upper_edge();
    let xs: Vec<f64> = (0..10).map(|i| i as f64 * dx).collect();
    assert!(matches!(
        field_snapshot(&zero, kgrid, 0.0, &[0.0], &xs, &p),
        Err(Error::Aliasing { .. })
    ));
}
