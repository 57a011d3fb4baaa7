use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time window too narrow: |C3| at the window edge is {edge_ratio:.3e} of its peak")]
    TruncatedWindow { edge_ratio: f64 },

    #[error("target not reachable: ground-state population would be {deficit:.3e} at t = {time} ps")]
    NonphysicalTarget { deficit: f64, time: f64 },

    #[error("degenerate design: excited amplitude negligible over {masked_fraction:.0}% of the active window")]
    DegenerateDesign { masked_fraction: f64 },

    #[error("inconsistent grids: reconstructed field overlaps the target by only {overlap:.6}")]
    InconsistentGrids { overlap: f64 },

    #[error("impedance mismatch: absorbed population {absorption:.6}")]
    ImpedanceMismatch { absorption: f64 },

    #[error("integration unstable at t = {time} ps (norm {norm:.6e}); try dt <= {suggested_dt:.3e} ps")]
    Unstable { time: f64, norm: f64, suggested_dt: f64 },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("root search did not converge in [{lo}, {hi}]")]
    RootNotConverged { lo: f64, hi: f64 },

    #[error("aliasing: dx = {dx} µm exceeds pi/k_max = {limit} µm")]
    Aliasing { dx: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
