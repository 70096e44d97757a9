//! Linewidth objective and physical constraints for p-n-n+ designs.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Constraint, ConstraintSet, Objective, ObjectiveValue, ParameterVector};
use crate::error::{Error, Result};
use crate::linewidth::optimal_position;
use crate::material::{MaterialParams, SpinCenterParams};
use crate::poisson::{
    depletion_profile, solve_poisson, solve_poisson_from, DiodeDesign, GridConfig, PotentialSolution,
};

/// Warm starts only pay off where the cold solve needs continuation.
const WARM_START_BIAS: f64 = 100.0;
const CACHE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignParam {
    #[serde(rename = "N_a")]
    NA,
    #[serde(rename = "N_n")]
    NN,
    #[serde(rename = "N_d")]
    ND,
    #[serde(rename = "d_l")]
    DL,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "d_r")]
    DR,
    #[serde(rename = "V")]
    V,
}

impl DesignParam {
    pub const ALL: [DesignParam; 7] = [
        DesignParam::NA,
        DesignParam::NN,
        DesignParam::ND,
        DesignParam::DL,
        DesignParam::D,
        DesignParam::DR,
        DesignParam::V,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignParam::NA => "N_a",
            DesignParam::NN => "N_n",
            DesignParam::ND => "N_d",
            DesignParam::DL => "d_l",
            DesignParam::D => "d",
            DesignParam::DR => "d_r",
            DesignParam::V => "V",
        }
    }

    pub fn get(self, design: &DiodeDesign) -> f64 {
        match self {
            DesignParam::NA => design.n_a,
            DesignParam::NN => design.n_n,
            DesignParam::ND => design.n_d,
            DesignParam::DL => design.d_l,
            DesignParam::D => design.d,
            DesignParam::DR => design.d_r,
            DesignParam::V => design.v,
        }
    }

    pub fn set(self, design: &mut DiodeDesign, value: f64) {
        match self {
            DesignParam::NA => design.n_a = value,
            DesignParam::NN => design.n_n = value,
            DesignParam::ND => design.n_d = value,
            DesignParam::DL => design.d_l = value,
            DesignParam::D => design.d = value,
            DesignParam::DR => design.d_r = value,
            DesignParam::V => design.v = value,
        }
    }
}

impl FromStr for DesignParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DesignParam::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown design parameter {s:?}")))
    }
}

/// All seven design parameters of `design`, with only `active` free.
pub fn design_vector(design: &DiodeDesign, active: &[DesignParam]) -> ParameterVector {
    ParameterVector {
        names: DesignParam::ALL.iter().map(|p| p.as_str().to_string()).collect(),
        values: DesignParam::ALL.iter().map(|p| p.get(design)).collect(),
        active: DesignParam::ALL.iter().map(|p| active.contains(p)).collect(),
    }
}

fn parse_names(names: &[String]) -> Result<Vec<DesignParam>> {
    names.iter().map(|n| n.parse()).collect()
}

/// Overwrite the named entries of `fixed` with `values`.
pub fn apply_values(fixed: &DiodeDesign, names: &[DesignParam], values: &[f64]) -> DiodeDesign {
    let mut d = *fixed;
    for (p, v) in names.iter().zip(values) {
        p.set(&mut d, *v);
    }
    d
}

/// Thresholds of the physical constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignBounds {
    /// Lowest unintentional doping of the n layer (cm^-3).
    pub n_n_min: f64,
    /// Lowest doping of the p and n+ layers (cm^-3).
    pub doped_min: f64,
    /// Upper density cap for every layer (cm^-3).
    pub density_max: f64,
    /// Lowest layer length (um).
    pub length_min: f64,
    /// Breakdown safety factor.
    pub omega: f64,
}

impl Default for DesignBounds {
    fn default() -> Self {
        Self {
            n_n_min: 1e14,
            doped_min: 1e17,
            density_max: 5e19,
            length_min: 0.1,
            omega: 0.95,
        }
    }
}

/// Linewidth objective over a design family. Evaluations are memoized and
/// biases above 100 V warm-start from the current iterate's solution.
pub struct DiodeProblem {
    pub fixed: DiodeDesign,
    pub names: Vec<DesignParam>,
    pub material: MaterialParams,
    pub spin: SpinCenterParams,
    pub grid: GridConfig,
    cache: Mutex<HashMap<Vec<u64>, ObjectiveValue>>,
    anchor: Mutex<Option<Arc<PotentialSolution>>>,
}

impl std::fmt::Debug for DiodeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiodeProblem")
            .field("fixed", &self.fixed)
            .field("names", &self.names)
            .finish()
    }
}

impl DiodeProblem {
    pub fn new(
        fixed: DiodeDesign,
        names: &[String],
        material: MaterialParams,
        spin: SpinCenterParams,
        grid: GridConfig,
    ) -> Result<Self> {
        material.validate()?;
        spin.validate()?;
        grid.validate()?;
        Ok(Self {
            fixed,
            names: parse_names(names)?,
            material,
            spin,
            grid,
            cache: Mutex::new(HashMap::new()),
            anchor: Mutex::new(None),
        })
    }

    pub fn design(&self, values: &[f64]) -> DiodeDesign {
        apply_values(&self.fixed, &self.names, values)
    }

    fn solve(&self, design: &DiodeDesign) -> Result<PotentialSolution> {
        let anchor = self.anchor.lock().expect("anchor lock").clone();
        match anchor {
            Some(a) if design.v.abs() > WARM_START_BIAS => {
                solve_poisson_from(design, &self.material, &self.grid, &a)
            }
            _ => solve_poisson(design, &self.material, &self.grid),
        }
    }

    fn compute(&self, values: &[f64]) -> Result<ObjectiveValue> {
        let design = self.design(values);
        let sol = self.solve(&design)?;
        let dep = depletion_profile(&sol, &design, &self.material);
        let (z_opt, gamma) = optimal_position(&design, &dep, &self.material, &self.spin)?;
        Ok(ObjectiveValue {
            value: gamma,
            z_opt: Some(z_opt),
            max_field: Some(sol.max_abs_field()),
        })
    }
}

impl Objective for DiodeProblem {
    fn evaluate(&self, p: &[f64]) -> Result<ObjectiveValue> {
        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = self.compute(p)?;
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, v);
        Ok(v)
    }

    fn commit(&self, p: &[f64]) {
        let design = self.design(p);
        if design.v.abs() <= WARM_START_BIAS {
            return;
        }
        if let Ok(sol) = self.solve(&design) {
            *self.anchor.lock().expect("anchor lock") = Some(Arc::new(sol));
        }
    }
}

/// Constraint set for the active parameters of `problem`: density floors
/// and caps, length floors, and the breakdown margin on max |E|. Bounds on
/// masked parameters are omitted since no step can repair them.
pub fn diode_constraints(
    problem: Arc<DiodeProblem>,
    active: &[bool],
    bounds: &DesignBounds,
) -> Result<ConstraintSet> {
    let n = problem.names.len();
    let mut set = ConstraintSet::new();
    let unit = |i: usize, sign: f64| {
        let mut c = vec![0.0; n];
        c[i] = sign;
        c
    };
    for (i, name) in problem.names.iter().enumerate() {
        if !active[i] {
            continue;
        }
        let label = name.as_str();
        match name {
            DesignParam::NA | DesignParam::NN | DesignParam::ND => {
                let lo = if *name == DesignParam::NN {
                    bounds.n_n_min
                } else {
                    bounds.doped_min
                };
                set.push(Constraint::linear(format!("{label} >= {lo:e}"), unit(i, 1.0), -lo, lo))?;
                set.push(Constraint::linear(
                    format!("{label} <= {:e}", bounds.density_max),
                    unit(i, -1.0),
                    bounds.density_max,
                    bounds.density_max,
                ))?;
            }
            DesignParam::DL | DesignParam::D | DesignParam::DR => {
                let lo = bounds.length_min;
                set.push(Constraint::linear(format!("{label} >= {lo}"), unit(i, 1.0), -lo, lo))?;
            }
            DesignParam::V => {}
        }
    }
    let limit = bounds.omega * problem.material.e_bd;
    let p = problem.clone();
    set.push(Constraint::new("max|E| <= omega E_BD", limit, move |x: &[f64]| {
        let field = p.evaluate(x)?.max_field.unwrap_or(0.0);
        Ok(limit - field)
    }))?;
    Ok(set)
}

/// Minimum over z_def of the majority-carrier linewidth (MHz) for the
/// design assembled from `p` and `fixed`, solved from scratch.
pub fn diode_objective(
    p: &ParameterVector,
    fixed: &DiodeDesign,
    material: &MaterialParams,
    spin: &SpinCenterParams,
    grid: &GridConfig,
) -> Result<(f64, f64)> {
    let names = parse_names(&p.names)?;
    let design = apply_values(fixed, &names, &p.values);
    let sol = solve_poisson(&design, material, grid)?;
    let dep = depletion_profile(&sol, &design, material);
    let (z, g) = optimal_position(&design, &dep, material, spin)?;
    Ok((g, z))
}
