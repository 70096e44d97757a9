//! Optical linewidth of a spin center from majority-carrier charge noise in
//! the non-depleted parts of the diode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaterialParams, SpinCenterParams};
use crate::poisson::{depletion_profile, solve_poisson, DepletionProfile, DiodeDesign, GridConfig};
use crate::constants::Q_E;

/// sqrt(2 ln 2 / pi): converts a field standard deviation into a Gaussian FWHM.
pub const GAUSSIAN_FWHM_FACTOR: f64 = 0.664_282_470_267_960_1;

/// Coarse scan resolution of the defect-position search.
const SCAN_POINTS: usize = 512;

/// Field-noise contributions at the defect (V/cm).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DeltaEComponents {
    /// Non-depleted n+ bulk.
    pub n_plus: f64,
    /// Non-depleted p bulk.
    pub p: f64,
    /// Non-depleted tail of the light n-layer seen from inside the depleted part.
    pub n_depleted: f64,
    /// Defect sitting inside non-depleted light n material.
    pub n_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinewidthReport {
    /// Gamma at `z_def` (MHz).
    pub gamma_majority: f64,
    pub components: DeltaEComponents,
    /// |dE| at `z_def` (V/cm).
    pub delta_e: f64,
    /// Evaluation position (um).
    pub z_def: f64,
    /// Minimizing position in (0, d) (um).
    pub z_opt: f64,
    /// Gamma at `z_opt` (MHz).
    pub gamma_opt: f64,
    pub depletion: DepletionProfile,
}

/// e/(4 pi eps) d_i sqrt(pi / (3 Omega)) for a dopant density `n` in m^-3.
fn shell_prefactor(n: f64, eps: f64) -> f64 {
    Q_E / (4.0 * std::f64::consts::PI * eps) * n.powf(-1.0 / 3.0) * (std::f64::consts::PI * n / 3.0).sqrt()
}

/// sqrt(a^-3 - b^-3) for a slab of dipoles between distances a and b (m).
fn shell_factor(a: f64, b: f64, term: &'static str) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::NegativeBracket { term, value: a });
    }
    let bracket = a.powi(-3) - b.powi(-3);
    if bracket < 0.0 {
        // round-off when a == b
        if bracket >= -1e-12 * a.powi(-3) {
            return Ok(0.0);
        }
        return Err(Error::NegativeBracket {
            term,
            value: bracket,
        });
    }
    Ok(bracket.sqrt())
}

/// Field noise from the light n-layer when the defect sits in its
/// non-depleted part (V/m).
fn n_prime_si(design: &DiodeDesign, eps: f64) -> f64 {
    let nn = design.n_n * 1e6;
    Q_E / (std::f64::consts::SQRT_2 * std::f64::consts::PI * eps) * nn.powf(2.0 / 3.0)
}

/// Total field noise |dE| (V/cm) at `z_def` (um) and its parts.
///
/// Inside the depleted part the light n-layer contributes through its
/// non-depleted tail; beyond the depletion edge the local value applies. At
/// the edge the smaller branch is taken.
pub fn delta_e_total(
    design: &DiodeDesign,
    depletion: &DepletionProfile,
    z_def: f64,
    material: &MaterialParams,
) -> Result<(f64, DeltaEComponents)> {
    if !(z_def > 0.0 && z_def < design.d) {
        return Err(Error::Domain {
            what: "defect position outside the light n-layer (um)",
            value: z_def,
        });
    }
    let eps = material.permittivity();
    let um = 1e-6;
    let z = z_def * um;
    let d = design.d * um;
    let dn = depletion.dn_tilde * um;

    let n_plus = shell_prefactor(design.n_d * 1e6, eps)
        * shell_factor(d + depletion.d_n_plus * um - z, d + design.d_r * um - z, "n+")?;
    let p = shell_prefactor(design.n_a * 1e6, eps)
        * shell_factor(depletion.d_p * um + z, design.d_l * um + z, "p")?;
    let n_prime = n_prime_si(design, eps);
    let n_depleted = if z < dn {
        shell_prefactor(design.n_n * 1e6, eps) * shell_factor(dn - z, d - z, "n")?
    } else {
        0.0
    };

    let outer = n_plus * n_plus + p * p;
    let inside = (outer + n_depleted * n_depleted).sqrt();
    let beyond = (outer + n_prime * n_prime).sqrt();
    let total = if z < dn {
        inside
    } else if z > dn {
        beyond
    } else {
        inside.min(beyond)
    };
    let to_cm = 1e-2;
    Ok((
        total * to_cm,
        DeltaEComponents {
            n_plus: n_plus * to_cm,
            p: p * to_cm,
            n_depleted: n_depleted * to_cm,
            n_prime: n_prime * to_cm,
        },
    ))
}

/// Gaussian FWHM (MHz) for a field standard deviation `delta_e` (V/cm),
/// assuming isotropic noise.
pub fn linewidth_majority(delta_e: f64, spin: &SpinCenterParams) -> f64 {
    GAUSSIAN_FWHM_FACTOR * spin.mu_z * delta_e / 3f64.sqrt() * 1e-6
}

/// Gamma (MHz) at `z_def` for a given depletion geometry.
pub fn gamma_at(
    design: &DiodeDesign,
    depletion: &DepletionProfile,
    material: &MaterialParams,
    spin: &SpinCenterParams,
    z_def: f64,
) -> Result<f64> {
    let (de, _) = delta_e_total(design, depletion, z_def, material)?;
    Ok(linewidth_majority(de, spin))
}

/// Minimum of Gamma over (0, d): a uniform scan followed by golden-section
/// refinement around the best sample. Returns `(z_opt, gamma_opt)`.
pub fn optimal_position(
    design: &DiodeDesign,
    depletion: &DepletionProfile,
    material: &MaterialParams,
    spin: &SpinCenterParams,
) -> Result<(f64, f64)> {
    let d = design.d;
    let f = |z: f64| gamma_at(design, depletion, material, spin, z);
    let step = d / SCAN_POINTS as f64;
    let mut best = (0usize, f64::INFINITY);
    for k in 0..SCAN_POINTS {
        let g = f(step * (k as f64 + 0.5))?;
        if g < best.1 {
            best = (k, g);
        }
    }
    let centre = step * (best.0 as f64 + 0.5);
    let mut a = (centre - step).max(1e-9 * d);
    let mut b = (centre + step).min(d * (1.0 - 1e-9));
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > 1e-9 * d {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    let (z_gs, g_gs) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if g_gs <= best.1 {
        Ok((z_gs, g_gs))
    } else {
        Ok((centre, best.1))
    }
}

/// Solve the diode and return `(z_opt, gamma_opt)`.
pub fn optimal_defect_position(
    design: &DiodeDesign,
    material: &MaterialParams,
    spin: &SpinCenterParams,
    grid: &GridConfig,
) -> Result<(f64, f64)> {
    let sol = solve_poisson(design, material, grid)?;
    let dep = depletion_profile(&sol, design, material);
    optimal_position(design, &dep, material, spin)
}

/// Full report at `spin.z_def` together with the optimum.
pub fn linewidth_report(
    design: &DiodeDesign,
    material: &MaterialParams,
    spin: &SpinCenterParams,
    grid: &GridConfig,
) -> Result<LinewidthReport> {
    spin.validate()?;
    let sol = solve_poisson(design, material, grid)?;
    let depletion = depletion_profile(&sol, design, material);
    let (delta_e, components) = delta_e_total(design, &depletion, spin.z_def, material)?;
    let (z_opt, gamma_opt) = optimal_position(design, &depletion, material, spin)?;
    Ok(LinewidthReport {
        gamma_majority: linewidth_majority(delta_e, spin),
        components,
        delta_e,
        z_def: spin.z_def,
        z_opt,
        gamma_opt,
        depletion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineshapeKind {
    /// Quasi-static noise.
    Gaussian,
    /// Motionally narrowed noise.
    Lorentzian,
}

/// Unit-area lineshape at angular frequency `omega` (result in s).
pub fn lineshape_eval(omega: f64, kind: LineshapeKind, width: f64) -> Result<f64> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Domain {
            what: "lineshape width",
            value: width,
        });
    }
    let pi = std::f64::consts::PI;
    Ok(match kind {
        LineshapeKind::Gaussian => (-omega * omega / (4.0 * width * width)).exp() / (2.0 * pi.sqrt() * width),
        LineshapeKind::Lorentzian => width / (pi * (width * width + omega * omega)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn depletion(d_p: f64, dn: f64, dnp: f64, full: bool) -> DepletionProfile {
        DepletionProfile {
            d_p,
            dn_tilde: dn,
            d_n_plus: dnp,
            fully_depleted_n: full,
            d_n_analytic: dn,
            v_c: -370.0,
        }
    }

    fn symmetric() -> DiodeDesign {
        DiodeDesign {
            n_a: 1e18,
            n_n: 1e15,
            n_d: 1e18,
            d_l: 0.5,
            d: 4.0,
            d_r: 0.5,
            v: -100.0,
            t: 300.0,
        }
    }

    #[test]
    fn mirror_symmetry() {
        let design = symmetric();
        let dep = depletion(0.02, 4.0, 0.02, true);
        let (_, c) = delta_e_total(&design, &dep, 2.0, &MaterialParams::default()).unwrap();
        assert!((c.p / c.n_plus - 1.0).abs() < 1e-12);
        assert_eq!(c.n_depleted, 0.0);
    }

    #[test]
    fn symmetric_optimum_is_centred() {
        let design = symmetric();
        let dep = depletion(0.02, 4.0, 0.02, true);
        let spin = SpinCenterParams::default();
        let (z, _) = optimal_position(&design, &dep, &MaterialParams::default(), &spin).unwrap();
        assert!((z - 2.0).abs() < 1e-3 * design.d, "{z}");
    }

    #[test]
    fn n_prime_scales_with_two_thirds_power() {
        let material = MaterialParams::default();
        let design = symmetric();
        let mut scaled = design;
        scaled.n_n *= 8.0;
        let dep = depletion(0.02, 1.0, 0.02, false);
        let (_, a) = delta_e_total(&design, &dep, 2.0, &material).unwrap();
        let (_, b) = delta_e_total(&scaled, &dep, 2.0, &material).unwrap();
        assert!((b.n_prime / a.n_prime - 4.0).abs() < 1e-12);
        let mut tiny = design;
        tiny.n_n = 1e-30;
        let (_, c) = delta_e_total(&tiny, &dep, 2.0, &material).unwrap();
        assert!(c.n_prime < 1e-15);
    }

    #[test]
    fn branch_choice_at_edge() {
        let design = symmetric();
        let material = MaterialParams::default();
        let dep = depletion(0.02, 1.5, 0.02, false);
        let (below, _) = delta_e_total(&design, &dep, 1.4, &material).unwrap();
        let (above, c) = delta_e_total(&design, &dep, 1.6, &material).unwrap();
        assert!(above > below);
        assert_eq!(c.n_depleted, 0.0);
        let (at, _) = delta_e_total(&design, &dep, 1.5, &material).unwrap();
        assert!(at.is_finite());
    }

    #[test]
    fn domain_and_bracket_errors() {
        let design = symmetric();
        let material = MaterialParams::default();
        let dep = depletion(0.02, 4.0, 0.02, true);
        assert!(delta_e_total(&design, &dep, 0.0, &material).is_err());
        assert!(delta_e_total(&design, &dep, 4.0, &material).is_err());
        // depletion wider than the layer is geometrically impossible
        let bad = depletion(0.9, 4.0, 0.02, true);
        assert!(matches!(
            delta_e_total(&design, &bad, 1.0, &material),
            Err(Error::NegativeBracket { term: "p", .. })
        ));
    }

    #[test]
    fn linewidth_is_linear() {
        let mut spin = SpinCenterParams::default();
        assert_eq!(linewidth_majority(0.0, &spin), 0.0);
        let g = linewidth_majority(10.0, &spin);
        spin.mu_z *= 2.0;
        assert!((linewidth_majority(10.0, &spin) / g - 2.0).abs() < 1e-15);
        assert!((GAUSSIAN_FWHM_FACTOR - (2.0 * 2f64.ln() / std::f64::consts::PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn lineshapes_have_expected_widths() {
        let g = 3.0;
        let peak = lineshape_eval(0.0, LineshapeKind::Gaussian, g).unwrap();
        let half = lineshape_eval(2.0 * g * 2f64.ln().sqrt(), LineshapeKind::Gaussian, g).unwrap();
        assert!((half / peak - 0.5).abs() < 1e-14);
        let peak = lineshape_eval(0.0, LineshapeKind::Lorentzian, g).unwrap();
        let half = lineshape_eval(g, LineshapeKind::Lorentzian, g).unwrap();
        assert!((half / peak - 0.5).abs() < 1e-14);
        assert!(lineshape_eval(0.0, LineshapeKind::Lorentzian, 0.0).is_err());
    }
}
