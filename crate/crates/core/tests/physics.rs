mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;
use wqed_core::units::{rate_for_dipole, HBAR};
use wqed_core::{Complex64, KGrid, SpectralWavepacket, WaveguideModel};

fn bare() -> WaveguideModel {
    WaveguideModel::default()
}

#[test]
fn dispersion_starts_at_cutoff() {
    let m = bare();
    assert_eq!(m.omega_of_k(0.0).unwrap(), m.omega0);
    assert!(m.omega_of_k(-1e-3).is_err());
}

#[test]
fn small_wavenumber_adds_one_mev() {
    let m = bare();
    let k = (2.0 * m.omega0).sqrt() / m.energy_speed();
    let shift = m.omega_of_k(k).unwrap() - m.omega0;
    // √(ω0² + 2ω0) - ω0 = 1 - 1/(2ω0) + ...
    assert_relative_eq!(shift, 1.0 - 0.5 / m.omega0, max_relative = 1e-9);
}

#[test]
fn dos_at_one_mev() {
    let m = bare();
    let d1 = m.dos(m.omega0 + 1.0).unwrap();
    assert_relative_eq!(d1 * m.energy_speed(), 7.5e5f64.sqrt(), max_relative = 1e-12);
    assert_relative_eq!(d1 * m.energy_speed(), 866.025, epsilon = 1e-3);
    assert_relative_eq!(m.dos(m.omega0 + 4.0).unwrap(), d1 / 2.0, max_relative = 1e-12);
    assert!(m.dos(m.omega0).is_err());
    assert!(m.dos(m.omega0 - 1.0).is_err());
}

#[test]
fn group_velocity_near_and_far_from_edge() {
    let m = bare();
    let w = m.omega0 + 1.0;
    let ratio = m.group_velocity(w).unwrap() / m.v;
    assert_relative_eq!(ratio, (1.0 - (m.omega0 / w).powi(2)).sqrt(), max_relative = 1e-9);
    assert_relative_eq!(ratio, 1.155e-3, epsilon = 1e-6);
    let far = m.group_velocity(m.omega0 * 1e4).unwrap() / m.v;
    assert!((far - 1.0).abs() < 1e-7);
    assert!(m.group_velocity(m.omega0).is_err());
}

#[test]
fn dos_times_group_velocity_stays_finite_at_the_edge() {
    let m = bare();
    // D(ω)·ħ v_g = sqrt(ω0(ω + ω0)/2)/ω → 1 as ω → ω0
    for x in [1e-8, 1e-4, 1.0] {
        let w = m.omega0 + x;
        let p = m.dos(w).unwrap() * m.group_velocity(w).unwrap() * HBAR;
        assert_relative_eq!(p, (m.omega0 * (w + m.omega0) / 2.0).sqrt() / w, max_relative = 1e-9);
        assert!((p - 1.0).abs() < 1e-6);
    }
}

#[test]
fn markovian_rate_scaling() {
    let m = common::model(0.27);
    assert_relative_eq!(m.markovian_rate(m.omega0 + 1.0).unwrap(), 0.27, max_relative = 1e-12);
    let off = m.with_coupling(0.0).unwrap();
    assert_eq!(off.markovian_rate(m.omega0 + 1.0).unwrap(), 0.0);
    let strong = m.with_coupling(4.0 * m.g).unwrap();
    assert_relative_eq!(strong.markovian_rate(m.omega0 + 1.0).unwrap(), 16.0 * 0.27, max_relative = 1e-12);
    assert_relative_eq!(rate_for_dipole(300.0), 16.0 * 0.27, max_relative = 1e-12);
}

#[test]
fn calibration_with_unit_energy_speed() {
    let m = WaveguideModel::new(1.5e6, 1.0 / HBAR, 0.0, 0.0).unwrap();
    let g = m.calibrate_coupling(0.27, m.omega0 + 1.0).unwrap();
    assert_relative_eq!(g, (0.27 / (2.0 * std::f64::consts::PI * 7.5e5f64.sqrt())).sqrt(), max_relative = 1e-12);
    assert!((g - 7.04e-3).abs() < 1e-5);
    assert!(m.calibrate_coupling(0.0, m.omega0 + 1.0).is_err());
    assert!(m.calibrate_coupling(-1.0, m.omega0 + 1.0).is_err());
}

#[test]
fn strong_coupling_ratio() {
    let weak = common::model(0.27).g;
    let strong = common::model(4.37).g;
    assert_relative_eq!(strong / weak, (4.37f64 / 0.27).sqrt(), max_relative = 1e-12);
    assert!((strong / weak - 4.02).abs() < 0.01);
}

fn sech(sigma0: f64, span: f64) -> SpectralWavepacket {
    let m = bare();
    let w1 = m.omega0 + 1.0;
    let dk = 2e-3;
    let grid = KGrid::covering(&m, w1 + span * sigma0, dk).unwrap();
    SpectralWavepacket::sech(&m, grid, w1, sigma0).unwrap()
}

#[test]
fn sech_is_normalised_and_peaks_at_the_carrier() {
    let m = bare();
    let f = sech(0.08, 40.0);
    assert!((f.norm_squared() - 1.0).abs() < 1e-9);
    let peak = (0..f.amplitudes.len())
        .max_by(|&a, &b| f.amplitudes[a].re.partial_cmp(&f.amplitudes[b].re).unwrap())
        .unwrap();
    let k1 = m.k_of_omega(m.omega0 + 1.0).unwrap();
    assert!((f.kgrid.k(peak) - k1).abs() <= f.kgrid.dk());
    assert!(f.amplitudes.iter().all(|a| a.re > 0.0 && a.im == 0.0));
}

#[test]
fn sech_normalisation_is_grid_independent() {
    let narrow = sech(0.08, 40.0);
    let wide = sech(0.08, 80.0);
    assert!(wide.kgrid.len() > narrow.kgrid.len());
    for j in 0..narrow.kgrid.len() {
        let (a, b) = (narrow.amplitudes[j].re, wide.amplitudes[j].re);
        assert!((a - b).abs() <= 1e-6 * a);
    }
}

#[test]
fn sech_rejects_short_grids() {
    let m = bare();
    let w1 = m.omega0 + 1.0;
    let grid = KGrid::covering(&m, w1 + 5.0 * 0.08, 2e-3).unwrap();
    assert!(SpectralWavepacket::sech(&m, grid, w1, 0.08).is_err());
}

#[test]
fn overlaps() {
    let f = sech(0.08, 40.0);
    assert_relative_eq!(f.overlap(&f).unwrap().re, 1.0, max_relative = 1e-12);
    let n = f.kgrid.len();
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    let mut b = a.clone();
    a[..n / 2].iter_mut().for_each(|x| *x = Complex64::new(1.0, 0.0));
    b[n / 2..].iter_mut().for_each(|x| *x = Complex64::new(0.0, 1.0));
    let pa = SpectralWavepacket::from_amplitudes(f.kgrid, a).unwrap();
    let pb = SpectralWavepacket::from_amplitudes(f.kgrid, b).unwrap();
    assert_eq!(pa.overlap(&pb).unwrap(), Complex64::new(0.0, 0.0));
    let other = sech(0.08, 80.0);
    assert!(f.overlap(&other).is_err());
}

#[test]
fn operations_are_bit_reproducible() {
    let a = sech(0.08, 40.0);
    let b = sech(0.08, 40.0);
    assert_eq!(a, b);
    let m = common::model(4.37);
    assert_eq!(m, common::model(4.37));
}

proptest! {
    #[test]
    fn dos_and_dispersion_agree(x in 1e-6f64..1e3) {
        let m = bare();
        let w = m.omega0 + x;
        let k = m.k_of_omega(w).unwrap();
        prop_assert!((m.omega_of_k(k).unwrap() - w).abs() <= 1e-12 * w);
        // exact inverse slope vs square-root edge form
        let exact_dos = w / (m.energy_speed().powi(2) * k);
        let edge = m.dos(w).unwrap();
        let expected = (2.0 * m.omega0 / (w + m.omega0)).sqrt() * w / m.omega0;
        prop_assert!((exact_dos / edge - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn dispersion_is_monotone(k in 0.0f64..1e3, dk in 1e-6f64..1.0) {
        let m = bare();
        prop_assert!(m.omega_of_k(k + dk).unwrap() > m.omega_of_k(k).unwrap());
    }

    #[test]
    fn calibration_inverts_the_rate(gamma in 1e-4f64..50.0, x in 1e-3f64..100.0) {
        let m = bare();
        let w = m.omega0 + x;
        let g = m.calibrate_coupling(gamma, w).unwrap();
        let back = m.with_coupling(g).unwrap().markovian_rate(w).unwrap();
        prop_assert!((back - gamma).abs() <= 1e-12 * gamma);
    }

    #[test]
    fn sech_normalised_for_any_width(sigma0 in 0.01f64..0.3, theta in 0.0f64..6.3) {
        let f = sech(sigma0, 25.0).with_phase(theta);
        prop_assert!((f.norm_squared() - 1.0).abs() < 1e-9);
        let o = f.overlap(&sech(sigma0, 25.0)).unwrap().norm();
        prop_assert!(o <= 1.0 + 1e-9);
    }
}
