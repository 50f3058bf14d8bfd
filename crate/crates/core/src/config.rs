use serde::{Deserialize, Serialize};

use crate::error::{PlapError, Result};

/// Numerical knobs shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Number of uniform cells on the solution grid (nodes = grid_n + 1).
    pub grid_n: usize,
    /// Gauss-Legendre order used per panel.
    pub quad_order: usize,
    pub boundary_tol: f64,
    pub fp_tol: f64,
    pub residual_tol: f64,
    pub max_root_iters: usize,
    pub max_picard: usize,
    /// Width of the excluded boundary layer in the residual audit, relative to b - a.
    pub audit_margin: f64,
    pub damping_init: f64,
    pub damping_floor: f64,
    /// Relative slack for the strict boundary-slope inequalities of the positive cone.
    pub cone_tol: f64,
    /// Node-wise slack for comparison and sandwich checks.
    pub grid_tol: f64,
    /// Relative slack used when certifying strict inequalities between integrals.
    pub integral_slack: f64,
    /// Number of lattice cells per side in the window search.
    pub window_lattice: usize,
    /// Samples per piece used when bounding an infimum from above.
    pub inf_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_n: 2048,
            quad_order: 5,
            boundary_tol: 1e-10,
            fp_tol: 1e-10,
            residual_tol: 1e-6,
            max_root_iters: 200,
            max_picard: 500,
            audit_margin: 1e-3,
            damping_init: 0.5,
            damping_floor: 1.0 / 64.0,
            cone_tol: 1e-6,
            grid_tol: 1e-8,
            integral_slack: 1e-9,
            window_lattice: 32,
            inf_samples: 512,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("boundary_tol", self.boundary_tol),
            ("fp_tol", self.fp_tol),
            ("residual_tol", self.residual_tol),
            ("audit_margin", self.audit_margin),
            ("damping_init", self.damping_init),
            ("damping_floor", self.damping_floor),
            ("cone_tol", self.cone_tol),
            ("grid_tol", self.grid_tol),
            ("integral_slack", self.integral_slack),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PlapError::InvalidInput(format!(
                    "solver.{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.grid_n < 64 {
            return Err(PlapError::InvalidInput(format!(
                "solver.grid_n must be at least 64, got {}",
                self.grid_n
            )));
        }
        if !(1..=20).contains(&self.quad_order) {
            return Err(PlapError::InvalidInput(format!(
                "solver.quad_order must lie in 1..=20, got {}",
                self.quad_order
            )));
        }
        if self.damping_init > 1.0 || self.damping_floor > self.damping_init {
            return Err(PlapError::InvalidInput(
                "solver damping must satisfy 0 < damping_floor <= damping_init <= 1".into(),
            ));
        }
        if self.max_root_iters == 0 || self.max_picard == 0 {
            return Err(PlapError::InvalidInput(
                "iteration caps must be positive".into(),
            ));
        }
        if self.window_lattice < 4 {
            return Err(PlapError::InvalidInput(
                "solver.window_lattice must be at least 4".into(),
            ));
        }
        if self.inf_samples < 8 {
            return Err(PlapError::InvalidInput(
                "solver.inf_samples must be at least 8".into(),
            ));
        }
        Ok(())
    }

    pub fn with_grid(mut self, grid_n: usize) -> Self {
        self.grid_n = grid_n;
        self
    }
}
