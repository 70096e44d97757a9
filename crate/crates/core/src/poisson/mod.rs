//! One-dimensional electrostatics of the p-n-n+ diode.
//!
//! The p-layer occupies `-d_l < z < 0`, the lightly doped n-layer `0 < z < d`
//! and the n+ layer `d < z < d + d_r`. The nonlinear Poisson problem is solved
//! for the dimensionless potential on a uniform grid with a damped Newton
//! iteration.

mod boundary;
mod charge;
mod depletion;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use boundary::{boundary_levels, BoundaryLevels};
pub use charge::{charge_density, sigmoid_regulator, ChargeEval, ChargeModel};
pub use depletion::{critical_voltage, depletion_profile, eq9_depletion_width, DepletionProfile};
pub use solver::{solve_poisson, solve_poisson_from, PotentialSolution};

/// Design of the diode stack; the optimizable parameters live here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiodeDesign {
    /// Acceptor density of the p-layer (cm^-3).
    pub n_a: f64,
    /// Donor density of the lightly doped n-layer (cm^-3).
    pub n_n: f64,
    /// Donor density of the n+ layer (cm^-3).
    pub n_d: f64,
    /// p-layer length (um).
    pub d_l: f64,
    /// n-layer length (um).
    pub d: f64,
    /// n+ layer length (um).
    pub d_r: f64,
    /// Bias (V), negative in reverse.
    pub v: f64,
    /// Temperature (K).
    #[serde(default = "default_temperature")]
    pub t: f64,
}

fn default_temperature() -> f64 {
    300.0
}

impl DiodeDesign {
    /// The 4H-SiC reference stack at -5 V and room temperature.
    pub fn baseline() -> Self {
        Self {
            n_a: 7e18,
            n_n: 4e15,
            n_d: 1.01e19,
            d_l: 0.4,
            d: 10.0,
            d_r: 0.4,
            v: -5.0,
            t: 300.0,
        }
    }

    pub fn with_voltage(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    /// Total length `d_l + d + d_r` (um).
    pub fn total_length(&self) -> f64 {
        self.d_l + self.d + self.d_r
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("N_a must be positive", self.n_a),
            ("N_n must be positive", self.n_n),
            ("N_d must be positive", self.n_d),
            ("d_l must be positive", self.d_l),
            ("d must be positive", self.d),
            ("d_r must be positive", self.d_r),
            ("T must be positive", self.t),
        ];
        for (msg, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!("{msg} (got {value})")));
            }
        }
        if !self.v.is_finite() {
            return Err(Error::InvalidParameter(format!("bias must be finite (got {})", self.v)));
        }
        Ok(())
    }
}

/// Discretization and Newton controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    /// Newton stops once the max-norm update drops below
    /// `newton_tol * max(1, |Psi|_inf)`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// First trial step length of every Newton iteration, in (0, 1].
    pub damping: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 2001,
            newton_tol: 1e-10,
            newton_max_iter: 200,
            damping: 1.0,
        }
    }
}

impl GridConfig {
    pub fn with_points(n_points: usize) -> Self {
        Self {
            n_points,
            ..Self::default()
        }
    }

    /// Node spacing (um) for a diode of the given design.
    pub fn spacing(&self, design: &DiodeDesign) -> f64 {
        design.total_length() / (self.n_points as f64 - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 101 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 101 nodes (got {})",
                self.n_points
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter("newton_tol must be positive".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter("newton_max_iter must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1] (got {})",
                self.damping
            )));
        }
        Ok(())
    }
}
