//! Charge-neutral boundary levels at both contacts.

use crate::error::{Error, Result};
use crate::material::MaterialParams;

use super::charge::{ChargeModel, LayerWeights};
use super::DiodeDesign;

/// Boundary data of the Dirichlet problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLevels {
    /// Left quasi-Fermi level (eV).
    pub mu_l: f64,
    /// Electrostatic potential at the right contact relative to the left (V).
    pub phi_inf: f64,
    /// Dimensionless potential at the left contact.
    pub psi_left: f64,
    /// Dimensionless potential at the right contact.
    pub psi_right: f64,
}

/// Root of the strictly decreasing map `psi -> rho(psi)` by bracket expansion
/// and bisection down to adjacent floats.
pub(crate) fn neutral_psi(
    model: &ChargeModel,
    w: LayerWeights,
    guess: f64,
    boundary: &'static str,
) -> Result<f64> {
    let f = |psi: f64| model.eval_weighted(psi, w).rho;
    let mut lo = guess - 1.0;
    let mut hi = guess + 1.0;
    let mut step = 2.0;
    let mut expansions = 0;
    while f(lo) < 0.0 {
        lo -= step;
        step *= 2.0;
        expansions += 1;
        if expansions > 60 || !lo.is_finite() {
            return Err(bracket_error(boundary, lo, f(lo)));
        }
    }
    step = 2.0;
    while f(hi) > 0.0 {
        hi += step;
        step *= 2.0;
        expansions += 1;
        if expansions > 120 || !hi.is_finite() {
            return Err(bracket_error(boundary, hi, f(hi)));
        }
    }
    let (flo, fhi) = (f(lo), f(hi));
    if flo.is_nan() || fhi.is_nan() {
        return Err(bracket_error(boundary, lo, flo));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller residual
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

fn bracket_error(boundary: &'static str, at: f64, value: f64) -> Error {
    Error::Bracket {
        boundary,
        detail: format!("no sign change found (psi = {at:.6e}, rho/e = {value:.6e} m^-3)"),
    }
}

/// Neutral boundary values for the given design.
///
/// Both levels are solved against the regularized charge density that the
/// Poisson solver uses, so the end nodes are neutral to round-off.
pub fn boundary_levels(design: &DiodeDesign, material: &MaterialParams) -> Result<BoundaryLevels> {
    material.validate()?;
    let model = ChargeModel::new(design, material)?;
    boundary_levels_for(&model)
}

pub(crate) fn boundary_levels_for(model: &ChargeModel) -> Result<BoundaryLevels> {
    let (z_left, z_right) = model.domain();
    let w_left = model.weights(z_left)?;
    let w_right = model.weights(z_right)?;

    // bulk-like first guesses: holes = N_a on the left, electrons = N_d on the right
    let guess_left = -(model.background(w_left) / model.sqrt_ncpv).ln() - model.e_g / model.kt_ev;
    let guess_right = (model.background(w_right) / model.sqrt_ncpv).ln() - model.v / model.kt_ev;

    let psi_left = neutral_psi(model, w_left, guess_left, "left (p-contact)")?;
    let psi_right = neutral_psi(model, w_right, guess_right, "right (n+-contact)")?;

    // phi(-d_l) = 0 fixes mu_l
    let mu_l = model.kt_ev * psi_left + model.eps_i + 0.5 * model.e_g;
    let phi_inf = model.kt_ev * (psi_right - psi_left);
    Ok(BoundaryLevels {
        mu_l,
        phi_inf,
        psi_left,
        psi_right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_charge_vanishes() {
        let design = DiodeDesign::baseline().with_voltage(0.0);
        let material = MaterialParams::default();
        let levels = boundary_levels(&design, &material).unwrap();
        let model = ChargeModel::new(&design, &material).unwrap();
        let (zl, zr) = model.domain();
        let rho_l = model.eval(levels.psi_left, zl).unwrap().rho;
        let rho_r = model.eval(levels.psi_right, zr).unwrap().rho;
        assert!(rho_l.abs() < 1e-10 * design.n_a * 1e6, "{rho_l}");
        assert!(rho_r.abs() < 1e-10 * design.n_d * 1e6, "{rho_r}");
        // built-in potential slightly below the gap
        assert!(levels.phi_inf > 2.5 && levels.phi_inf < 3.26, "{}", levels.phi_inf);
    }

    #[test]
    fn bias_shifts_right_contact() {
        let material = MaterialParams::default();
        let eq = boundary_levels(&DiodeDesign::baseline().with_voltage(0.0), &material).unwrap();
        let rb = boundary_levels(&DiodeDesign::baseline().with_voltage(-100.0), &material).unwrap();
        assert!((rb.phi_inf - eq.phi_inf - 100.0).abs() < 1e-9);
        assert!((rb.mu_l - eq.mu_l).abs() < 1e-12);
    }
}
