//! Depletion widths from a solved carrier profile, and their analytic
//! counterparts.

use serde::Serialize;

use crate::constants::{K_B, Q_E};
use crate::material::MaterialParams;

use super::{DiodeDesign, PotentialSolution};

/// A node counts as depleted when the majority carrier of its layer falls
/// below this fraction of the layer doping.
pub const DEPLETION_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepletionProfile {
    /// Depleted width of the p-layer measured from z = 0 (um).
    pub d_p: f64,
    /// Depleted width of the light n-layer measured from z = 0 (um).
    pub dn_tilde: f64,
    /// Depleted width of the n+ layer measured from z = d (um).
    pub d_n_plus: f64,
    pub fully_depleted_n: bool,
    /// Abrupt-junction estimate with phi_inf ~ E_g/e - V (um).
    pub d_n_analytic: f64,
    /// Bias at which the light n-layer becomes fully depleted (V).
    pub v_c: f64,
}

/// Abrupt-junction depletion width on the light n side (um).
pub fn eq9_depletion_width(design: &DiodeDesign, material: &MaterialParams) -> f64 {
    let eps = material.permittivity();
    let na = design.n_a * 1e6;
    let nn = design.n_n * 1e6;
    let drop = (material.e_g - design.v).max(0.0);
    (2.0 * eps * drop / Q_E * (na / nn) / (na + nn)).sqrt() * 1e6
}

/// Full-depletion bias of the light n-layer (V).
pub fn critical_voltage(design: &DiodeDesign, material: &MaterialParams) -> f64 {
    let eps = material.permittivity();
    let na = design.n_a * 1e6;
    let nn = design.n_n * 1e6;
    let d = design.d * 1e-6;
    -(Q_E * d * d / (2.0 * eps)) * nn * (na + nn) / na
}

/// Log-linear crossing of `thr` between a depleted node `a` and a
/// non-depleted node `b`.
fn crossing(z_a: f64, c_a: f64, z_b: f64, c_b: f64, thr: f64) -> f64 {
    let la = c_a.max(f64::MIN_POSITIVE).ln();
    let lb = c_b.max(f64::MIN_POSITIVE).ln();
    let lt = thr.ln();
    if lb <= la {
        return z_b;
    }
    let t = ((lt - la) / (lb - la)).clamp(0.0, 1.0);
    z_a + t * (z_b - z_a)
}

/// Walk along `order` until the carrier density reaches the threshold and
/// return the crossing position, or `None` when the whole range is depleted.
fn scan<I: Iterator<Item = usize>>(
    carriers: &[f64],
    z: &[f64],
    origin: f64,
    mut order: I,
    doping: f64,
) -> Option<f64> {
    let thr = DEPLETION_THRESHOLD * doping;
    let carriers = |i: usize| carriers[i];
    let first = order.next()?;
    if carriers(first) >= thr {
        // neutral right at the junction
        return Some(origin);
    }
    let mut prev = first;
    for i in order {
        if carriers(i) >= thr {
            return Some(crossing(z[prev], carriers(prev), z[i], carriers(i), thr));
        }
        prev = i;
    }
    None
}

/// Extract depletion widths from `solution`.
///
/// The light n-layer is taken as fully depleted when no neutral plateau
/// remains: either no node reaches the carrier threshold, or the field never
/// drops below kT/(e d) between the depletion edge and z = d.
pub fn depletion_profile(
    solution: &PotentialSolution,
    design: &DiodeDesign,
    material: &MaterialParams,
) -> DepletionProfile {
    let z = &solution.z;
    let n = z.len();
    let d = design.d;
    let p_nodes: Vec<usize> = (0..n).filter(|&i| z[i] < 0.0).collect();
    let n_nodes: Vec<usize> = (0..n).filter(|&i| z[i] >= 0.0 && z[i] < d).collect();
    let np_nodes: Vec<usize> = (0..n).filter(|&i| z[i] >= d).collect();

    let d_p = scan(&solution.p_h, z, 0.0, p_nodes.iter().rev().copied(), design.n_a)
        .map(|edge| -edge)
        .unwrap_or(design.d_l)
        .clamp(0.0, design.d_l);

    let edge_n = scan(&solution.n_e, z, 0.0, n_nodes.iter().copied(), design.n_n);
    let field_floor = K_B * design.t / Q_E / (d * 1e-4);
    let (dn_tilde, fully) = match edge_n {
        None => (d, true),
        Some(edge) => {
            let plateau = n_nodes
                .iter()
                .filter(|&&i| z[i] >= edge)
                .any(|&i| solution.e_field[i].abs() < field_floor);
            if plateau {
                (edge.clamp(0.0, d), false)
            } else {
                (d, true)
            }
        }
    };

    let d_n_plus = scan(&solution.n_e, z, d, np_nodes.iter().copied(), design.n_d)
        .map(|edge| edge - d)
        .unwrap_or(design.d_r)
        .clamp(0.0, design.d_r);

    DepletionProfile {
        d_p,
        dn_tilde,
        d_n_plus,
        fully_depleted_n: fully,
        d_n_analytic: eq9_depletion_width(design, material),
        v_c: critical_voltage(design, material),
    }
}
