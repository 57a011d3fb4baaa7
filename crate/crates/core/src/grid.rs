//! Wavenumber and time grids.

use crate::error::{Error, Result};
use crate::model::WaveguideModel;

/// Uniform midpoint grid `k_j = (j + ½) dk`, `j = 0..len`.
///
/// Midpoints keep the quadrature of `∫ dk` second-order accurate at the
/// k = 0 end where the integrands of the edge problem are largest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGrid {
    dk: f64,
    len: usize,
}

impl KGrid {
    pub fn new(dk: f64, len: usize) -> Result<Self> {
        if !(dk.is_finite() && dk > 0.0) {
            return Err(Error::InvalidGrid(format!("dk must be positive, got {dk}")));
        }
        if len == 0 {
            return Err(Error::InvalidGrid("k-grid needs at least one point".into()));
        }
        Ok(KGrid { dk, len })
    }

    /// Grid with spacing `dk` whose upper edge reaches at least `omega_top`.
    pub fn covering(model: &WaveguideModel, omega_top: f64, dk: f64) -> Result<Self> {
        let k_top = model.k_of_omega(omega_top)?;
        KGrid::new(dk, ((k_top / dk).ceil() as usize).max(1))
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn k(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dk
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.k(j)).collect()
    }

    /// Upper boundary of the last cell.
    pub fn upper_edge(&self) -> f64 {
        self.len as f64 * self.dk
    }

    /// Periodic box length that this spacing represents, µm.
    pub fn box_length(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.dk
    }

    pub fn check_same(&self, other: &KGrid) -> Result<()> {
        if self.len != other.len || (self.dk - other.dk).abs() > 1e-12 * self.dk {
            return Err(Error::GridMismatch(format!(
                "k-grids differ: ({} points, dk {}) vs ({} points, dk {})",
                self.len, self.dk, other.len, other.dk
            )));
        }
        Ok(())
    }

    /// Same coverage with half the spacing.
    pub fn refined(&self) -> KGrid {
        KGrid { dk: self.dk / 2.0, len: self.len * 2 }
    }
}

/// Uniform time grid `t_i = t_start + i dt`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::InvalidGrid(format!("empty time window [{t_start}, {t_end}]")));
        }
        let n = (t_end - t_start) / dt;
        let steps = n.round();
        if (n - steps).abs() > 1e-9 * n.max(1.0) || steps < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "window [{t_start}, {t_end}] is not an integer number of steps of {dt}"
            )));
        }
        Ok(TimeGrid { t_start, dt, steps: steps as usize })
    }

    /// Grid on `[t_start, t_end]` with the largest step not exceeding `dt_max`.
    pub fn spanning(t_start: f64, t_end: f64, dt_max: f64) -> Result<Self> {
        if !(dt_max.is_finite() && dt_max > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt_max}")));
        }
        let steps = ((t_end - t_start) / dt_max).ceil().max(1.0);
        TimeGrid::new(t_start, t_end, (t_end - t_start) / steps)
    }

    /// Symmetric grid on `[-half_width, half_width]`.
    pub fn centered(half_width: f64, dt_max: f64) -> Result<Self> {
        TimeGrid::spanning(-half_width, half_width, dt_max)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of samples, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the sample closest to `t`, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        let i = ((t - self.t_start) / self.dt).round();
        i.clamp(0.0, self.steps as f64) as usize
    }

    pub fn refined(&self) -> TimeGrid {
        TimeGrid { t_start: self.t_start, dt: self.dt / 2.0, steps: self.steps * 2 }
    }

    /// Grid mirrored about t = 0.
    pub fn mirrored(&self) -> TimeGrid {
        TimeGrid { t_start: -self.t_end(), dt: self.dt, steps: self.steps }
    }
}
