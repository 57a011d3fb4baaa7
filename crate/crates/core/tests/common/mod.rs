#![allow(dead_code)]

use wqed_core::design::DesignGrids;
use wqed_core::emission::TwoLevelParams;
use wqed_core::{SpectralWavepacket, ThreeLevelNode, WaveguideModel};

pub const GAMMA: f64 = 0.27;
pub const STRONG_GAMMA: f64 = 4.37;

/// Guide with the emitter calibrated to `gamma` one meV above the cut-off.
pub fn model(gamma: f64) -> WaveguideModel {
    let m = WaveguideModel::default();
    m.calibrated(gamma, m.omega0 + 1.0).unwrap()
}

pub struct Sender {
    pub node: ThreeLevelNode,
    pub grids: DesignGrids,
    pub target: SpectralWavepacket,
}

pub fn sender(sigma0: f64) -> Sender {
    let m = model(GAMMA);
    let w1 = m.omega0 + 1.0;
    let node = ThreeLevelNode::new(w1, m).unwrap();
    let grids = DesignGrids::for_sech(&m, w1, sigma0).unwrap();
    let target = SpectralWavepacket::sech(&m, grids.kgrid, w1, sigma0).unwrap();
    Sender { node, grids, target }
}

pub fn two_level(gamma: f64, detuning: f64) -> TwoLevelParams {
    let m = model(gamma);
    TwoLevelParams::new(m.omega0 + detuning, m).unwrap()
}
