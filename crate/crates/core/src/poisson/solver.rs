//! Damped Newton solution of the discretized Poisson problem.

use serde::Serialize;

use crate::constants::{K_B, Q_E};
use crate::error::{Error, Result};
use crate::material::MaterialParams;

use super::boundary::{boundary_levels_for, neutral_psi, BoundaryLevels};
use super::charge::{ChargeModel, LayerWeights};
use super::{DiodeDesign, GridConfig};

/// Largest bias step between continuation rungs (V).
const MAX_RUNG: f64 = 100.0;
const MIN_RUNG: f64 = 0.5;
const DAMPING_FLOOR: f64 = 1.0 / 1_048_576.0;

/// Converged potential and the profiles derived from it.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialSolution {
    pub design: DiodeDesign,
    /// Node positions (um).
    pub z: Vec<f64>,
    /// Dimensionless potential.
    pub psi: Vec<f64>,
    /// Electrostatic potential (V), zero at the left contact.
    pub phi: Vec<f64>,
    /// E = -dphi/dz (V/cm).
    pub e_field: Vec<f64>,
    /// Free-carrier charge e(p - n) (C/cm^3).
    pub rho_c: Vec<f64>,
    /// Total space charge including ionized dopants (C/cm^3).
    pub rho: Vec<f64>,
    /// Electron density (cm^-3).
    pub n_e: Vec<f64>,
    /// Hole density (cm^-3).
    pub p_h: Vec<f64>,
    /// Control-volume background doping |N| (cm^-3).
    pub doping: Vec<f64>,
    /// Left quasi-Fermi level (eV).
    pub mu_l: f64,
    /// Potential of the right contact (V).
    pub phi_inf: f64,
    pub converged: bool,
    /// Max-norm Newton residual scaled by max(1, |Psi|_inf).
    pub residual: f64,
    /// Newton iterations summed over all continuation rungs.
    pub iterations: usize,
}

impl PotentialSolution {
    /// Node spacing (um).
    pub fn spacing(&self) -> f64 {
        self.z[1] - self.z[0]
    }

    /// Largest field magnitude on the grid (V/cm).
    pub fn max_abs_field(&self) -> f64 {
        self.e_field.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }

    /// Linear interpolation of the field at `z` (um); clamped to the domain.
    pub fn field_at(&self, z: f64) -> f64 {
        interpolate(&self.z, &self.e_field, z)
    }
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let h = (xs[n - 1] - xs[0]) / (n as f64 - 1.0);
    let i = (((x - xs[0]) / h).floor() as usize).min(n - 2);
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Discrete problem for one bias point.
struct Discretization {
    model: ChargeModel,
    levels: BoundaryLevels,
    /// Node positions in metres.
    z: Vec<f64>,
    weights: Vec<LayerWeights>,
    /// h^2 e^2 / (k_B T eps), multiplying rho / e in the scaled residual.
    coupling: f64,
}

impl Discretization {
    fn new(design: &DiodeDesign, material: &MaterialParams, n: usize) -> Result<Self> {
        let model = ChargeModel::new(design, material)?;
        let (z0, z1) = model.domain();
        let h = (z1 - z0) / (n as f64 - 1.0);
        let mut z: Vec<f64> = (0..n).map(|i| z0 + h * i as f64).collect();
        z[n - 1] = z1;
        let weights: Vec<LayerWeights> = z.iter().map(|&zi| model.cell_weights(zi, h)).collect();
        let mut levels = boundary_levels_for(&model)?;
        // end nodes carry their control-volume doping; re-solve neutrality on it
        levels.psi_left = neutral_psi(&model, weights[0], levels.psi_left, "left (p-contact)")?;
        levels.psi_right =
            neutral_psi(&model, weights[n - 1], levels.psi_right, "right (n+-contact)")?;
        levels.mu_l = model.kt_ev * levels.psi_left + model.eps_i + 0.5 * model.e_g;
        levels.phi_inf = model.kt_ev * (levels.psi_right - levels.psi_left);
        let coupling = h * h * Q_E * Q_E / (K_B * design.t * material.permittivity());
        Ok(Self {
            model,
            levels,
            z,
            weights,
            coupling,
        })
    }

    fn len(&self) -> usize {
        self.z.len()
    }

    /// Scaled residual G_i = psi_{i+1} - 2 psi_i + psi_{i-1} + c rho_i at
    /// interior nodes, plus the Jacobian diagonal when requested.
    fn residual(&self, psi: &[f64], diag: Option<&mut [f64]>) -> Vec<f64> {
        let n = self.len();
        let mut g = vec![0.0; n];
        match diag {
            Some(d) => {
                for i in 1..n - 1 {
                    let ev = self.model.eval_weighted(psi[i], self.weights[i]);
                    g[i] = psi[i + 1] - 2.0 * psi[i] + psi[i - 1] + self.coupling * ev.rho;
                    d[i] = -2.0 + self.coupling * ev.drho;
                }
            }
            None => {
                for i in 1..n - 1 {
                    let ev = self.model.eval_weighted(psi[i], self.weights[i]);
                    g[i] = psi[i + 1] - 2.0 * psi[i] + psi[i - 1] + self.coupling * ev.rho;
                }
            }
        }
        g
    }

    /// Neutral-bulk values joined by linear ramps across the depletion
    /// estimate of the p-n junction.
    fn initial_guess(&self, design: &DiodeDesign, material: &MaterialParams) -> Result<Vec<f64>> {
        let psi_l = self.levels.psi_left;
        let psi_r = self.levels.psi_right;
        let w_n = LayerWeights {
            p: 0.0,
            n: 1.0,
            n_plus: 0.0,
        };
        let psi_n = neutral_psi(&self.model, w_n, psi_r, "light n-layer")?;
        let drop = (self.model.kt_ev * (psi_n - psi_l)).max(0.0);
        let eps = material.permittivity();
        let na = design.n_a * 1e6;
        let nn = design.n_n * 1e6;
        let d = design.d * 1e-6;
        let x_n = (2.0 * eps * drop / Q_E * na / (nn * (na + nn))).sqrt();
        let (x_n, top) = if x_n >= d { (d, psi_r) } else { (x_n, psi_n) };
        let x_p = (x_n * nn / na).min(design.d_l * 1e-6);
        let psi = self
            .z
            .iter()
            .map(|&z| {
                if z <= -x_p {
                    psi_l
                } else if z < x_n {
                    psi_l + (top - psi_l) * (z + x_p) / (x_n + x_p)
                } else if z < d {
                    top
                } else {
                    psi_r
                }
            })
            .collect();
        Ok(psi)
    }

    /// Newton iteration from `psi`, returning iterations and final scaled residual.
    fn newton(&self, psi: &mut [f64], grid: &GridConfig) -> Result<(usize, f64)> {
        let n = self.len();
        psi[0] = self.levels.psi_left;
        psi[n - 1] = self.levels.psi_right;
        let mut diag = vec![0.0; n];
        let mut g = self.residual(psi, Some(&mut diag));
        let mut norm = l2(&g);
        let mut trial = psi.to_vec();
        for iter in 1..=grid.newton_max_iter {
            let delta = solve_tridiagonal(&diag, &g);
            let scale = inf_norm(psi).max(1.0);
            let mut t = grid.damping;
            loop {
                for i in 1..n - 1 {
                    trial[i] = psi[i] + t * delta[i];
                }
                trial[0] = psi[0];
                trial[n - 1] = psi[n - 1];
                let g_trial = self.residual(&trial, None);
                let trial_norm = l2(&g_trial);
                if trial_norm.is_finite() && trial_norm <= norm {
                    break;
                }
                t *= 0.5;
                if t < DAMPING_FLOOR {
                    let step = inf_norm(&delta);
                    if step <= grid.newton_tol * scale {
                        return Ok((iter, inf_norm(&g) / scale));
                    }
                    return Err(Error::NonConvergence {
                        iterations: iter,
                        residual: inf_norm(&g) / scale,
                        voltage: self.model.v,
                        last_psi: psi.to_vec(),
                    });
                }
            }
            psi.copy_from_slice(&trial);
            g = self.residual(psi, Some(&mut diag));
            norm = l2(&g);
            let step = t * inf_norm(&delta);
            if step <= grid.newton_tol * inf_norm(psi).max(1.0) {
                return Ok((iter, inf_norm(&g) / inf_norm(psi).max(1.0)));
            }
        }
        Err(Error::NonConvergence {
            iterations: grid.newton_max_iter,
            residual: inf_norm(&g) / inf_norm(psi).max(1.0),
            voltage: self.model.v,
            last_psi: psi.to_vec(),
        })
    }

    fn into_solution(
        self,
        design: &DiodeDesign,
        psi: Vec<f64>,
        iterations: usize,
        residual: f64,
    ) -> PotentialSolution {
        let n = self.len();
        let kt = self.model.kt_ev;
        let psi_l = self.levels.psi_left;
        let phi: Vec<f64> = psi.iter().map(|&p| kt * (p - psi_l)).collect();
        let h = self.z[1] - self.z[0];
        let mut e_field = vec![0.0; n];
        e_field[0] = -(phi[1] - phi[0]) / h;
        e_field[n - 1] = -(phi[n - 1] - phi[n - 2]) / (self.z[n - 1] - self.z[n - 2]);
        for i in 1..n - 1 {
            e_field[i] = -(phi[i + 1] - phi[i - 1]) / (self.z[i + 1] - self.z[i - 1]);
        }
        let mut rho_c = Vec::with_capacity(n);
        let mut rho = Vec::with_capacity(n);
        let mut n_e = Vec::with_capacity(n);
        let mut p_h = Vec::with_capacity(n);
        let mut doping = Vec::with_capacity(n);
        for i in 0..n {
            let ev = self.model.eval_weighted(psi[i], self.weights[i]);
            n_e.push(ev.n * 1e-6);
            p_h.push(ev.p * 1e-6);
            rho_c.push(Q_E * (ev.p - ev.n) * 1e-6);
            rho.push(Q_E * ev.rho * 1e-6);
            doping.push(self.model.background(self.weights[i]) * 1e-6);
        }
        PotentialSolution {
            design: *design,
            z: self.z.iter().map(|z| z * 1e6).collect(),
            psi,
            phi,
            // V/m -> V/cm
            e_field: e_field.into_iter().map(|e| e * 1e-2).collect(),
            rho_c,
            rho,
            n_e,
            p_h,
            doping,
            mu_l: self.levels.mu_l,
            phi_inf: self.levels.phi_inf,
            converged: true,
            residual,
            iterations,
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton update for the tridiagonal Jacobian with unit off-diagonals.
/// Boundary entries of the result are zero.
fn solve_tridiagonal(diag: &[f64], g: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let m = n - 2;
    let mut c = vec![0.0; m];
    let mut r = vec![0.0; m];
    // J delta = -g; sub- and super-diagonals are 1
    let mut denom = diag[1];
    c[0] = 1.0 / denom;
    r[0] = -g[1] / denom;
    for k in 1..m {
        denom = diag[k + 1] - c[k - 1];
        c[k] = 1.0 / denom;
        r[k] = (-g[k + 1] - r[k - 1]) / denom;
    }
    let mut delta = vec![0.0; n];
    delta[m] = r[m - 1];
    for k in (0..m - 1).rev() {
        delta[k + 1] = r[k] - c[k] * delta[k + 2];
    }
    delta
}

/// Solve the Poisson problem for `design`.
///
/// Biases beyond 100 V in magnitude are reached by continuation from a
/// 100 V solution, rescaling the previous potential between rungs and
/// halving the rung on failure.
pub fn solve_poisson(
    design: &DiodeDesign,
    material: &MaterialParams,
    grid: &GridConfig,
) -> Result<PotentialSolution> {
    grid.validate()?;
    material.validate()?;
    design.validate()?;
    let n = grid.n_points;

    if design.v.abs() <= MAX_RUNG {
        let disc = Discretization::new(design, material, n)?;
        let mut psi = disc.initial_guess(design, material)?;
        let (iters, res) = disc.newton(&mut psi, grid)?;
        return Ok(disc.into_solution(design, psi, iters, res));
    }

    let sign = design.v.signum();
    let start = design.with_voltage(sign * MAX_RUNG);
    let disc = Discretization::new(&start, material, n)?;
    let mut psi = disc.initial_guess(&start, material)?;
    let (iters, _) = disc.newton(&mut psi, grid)?;
    continuation(design, material, grid, psi, start.v, iters)
}

/// Solve `design` starting from a converged solution of a nearby design on
/// the same grid size. The bias is walked from the old value with the same
/// adaptive rungs used by [`solve_poisson`]; a cold solve is the fallback.
pub fn solve_poisson_from(
    design: &DiodeDesign,
    material: &MaterialParams,
    grid: &GridConfig,
    guess: &PotentialSolution,
) -> Result<PotentialSolution> {
    if guess.psi.len() != grid.n_points || guess.design.t != design.t {
        return solve_poisson(design, material, grid);
    }
    grid.validate()?;
    material.validate()?;
    design.validate()?;
    continuation(design, material, grid, guess.psi.clone(), guess.design.v, 0)
        .or_else(|_| solve_poisson(design, material, grid))
}

/// Walk the bias from `v_done` (where `psi` is converged, possibly for
/// other doping or lengths) to `design.v`.
fn continuation(
    design: &DiodeDesign,
    material: &MaterialParams,
    grid: &GridConfig,
    mut psi: Vec<f64>,
    mut v_done: f64,
    mut total_iters: usize,
) -> Result<PotentialSolution> {
    let n = grid.n_points;
    let mut prev = (psi[0], psi[n - 1]);
    let mut rung = MAX_RUNG;
    loop {
        let remaining = (design.v - v_done).abs();
        let step = rung.min(remaining);
        let v_next = if step == remaining {
            design.v
        } else {
            v_done + (design.v - v_done).signum() * step
        };
        let rung_design = design.with_voltage(v_next);
        let disc = Discretization::new(&rung_design, material, n)?;
        let lv = disc.levels;
        let span = prev.1 - prev.0;
        let ratio = if span == 0.0 { 1.0 } else { (lv.psi_right - lv.psi_left) / span };
        let mut trial: Vec<f64> = psi
            .iter()
            .map(|&p| lv.psi_left + (p - prev.0) * ratio)
            .collect();
        match disc.newton(&mut trial, grid) {
            Ok((iters, res)) => {
                total_iters += iters;
                if v_next == design.v {
                    return Ok(disc.into_solution(design, trial, total_iters, res));
                }
                psi = trial;
                prev = (lv.psi_left, lv.psi_right);
                v_done = v_next;
                rung = (rung * 1.5).min(MAX_RUNG);
            }
            Err(err) => {
                rung *= 0.5;
                if rung < MIN_RUNG {
                    log::warn!("continuation stalled at {v_done} V on the way to {} V", design.v);
                    return Err(err);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(v: f64) -> PotentialSolution {
        solve_poisson(
            &DiodeDesign::baseline().with_voltage(v),
            &MaterialParams::default(),
            &GridConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn warm_start_matches_cold_solve() {
        let m = MaterialParams::default();
        let g = GridConfig::default();
        let base = solve(-400.0);
        let mut target = DiodeDesign::baseline().with_voltage(-420.0);
        target.n_n = 3.9e15;
        let warm = solve_poisson_from(&target, &m, &g, &base).unwrap();
        let cold = solve_poisson(&target, &m, &g).unwrap();
        assert!(warm.iterations < cold.iterations);
        for (a, b) in warm.phi.iter().zip(&cold.phi) {
            assert!((a - b).abs() < 1e-7, "{a} {b}");
        }
    }

    #[test]
    fn tridiagonal_matches_dense_product() {
        let diag = [0.0, -3.0, -2.5, -4.0, -2.2, 0.0];
        let g = [0.0, 1.0, -0.5, 0.25, 2.0, 0.0];
        let x = solve_tridiagonal(&diag, &g);
        for i in 1..5 {
            let left = if i > 1 { x[i - 1] } else { 0.0 };
            let right = if i < 4 { x[i + 1] } else { 0.0 };
            let jx = left + diag[i] * x[i] + right;
            assert!((jx + g[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn equilibrium_boundaries_and_neutrality() {
        let sol = solve(0.0);
        let n = sol.z.len();
        assert_eq!(sol.phi[0], 0.0);
        assert!((sol.phi[n - 1] - sol.phi_inf).abs() < 1e-12);
        let h = sol.spacing() * 1e-4;
        let total: f64 = sol.rho.iter().map(|r| r * h).sum();
        let scale = Q_E * 7e18 * 0.4e-4;
        assert!(total.abs() < 1e-6 * scale, "{total} vs {scale}");
    }

    #[test]
    fn reverse_bias_profile_is_monotone() {
        let sol = solve(-200.0);
        assert!(sol.converged);
        for w in sol.phi.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        let (imax, _) = sol
            .e_field
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, e)| if e.abs() > acc.1 { (i, e.abs()) } else { acc });
        assert!(sol.z[imax].abs() < 0.05, "field peak at {}", sol.z[imax]);
    }

    #[test]
    fn continuation_reaches_large_bias() {
        let sol = solve(-1100.0);
        let n = sol.z.len();
        assert!((sol.phi[n - 1] - sol.phi_inf).abs() < 1e-9);
        assert!(sol.phi_inf > 1100.0);
    }
}
