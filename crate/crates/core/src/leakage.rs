//! Trap-assisted generation current in the depletion region and the surface
//! noise it produces.

use serde::Serialize;

use crate::constants::{HBAR, H_PLANCK, K_B, MU0, MU_B, M_E, Q_E};
use crate::error::{Error, Result};
use crate::linewidth::GAUSSIAN_FWHM_FACTOR;
use crate::material::{effective_dos, MaterialParams, SpinCenterParams};
use crate::poisson::{
    depletion_profile, solve_poisson, DepletionProfile, DiodeDesign, GridConfig, PotentialSolution,
};
use crate::quad::{cumulative_trapezoid, gauss_legendre, simpson};

/// Simpson intervals used for depth integrals.
const DEPTH_INTERVALS: usize = 1024;
const HURKX_PANELS: usize = 64;
const HURKX_ORDER: usize = 12;

/// Tunneling parameter K of the Hurkx factor for a field in V/m.
fn hurkx_k(e_si: f64, material: &MaterialParams) -> f64 {
    let m = material.m_star * M_E;
    let gap = material.e_g * Q_E;
    4.0 / 3.0 * (2.0 * m).sqrt() * gap.powf(1.5) / (Q_E * HBAR * e_si.abs())
}

/// ln of the Hurkx field-enhancement factor; `-inf` at zero field.
pub fn ln_field_enhancement_factor(e: f64, t: f64, material: &MaterialParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain {
            what: "temperature",
            value: t,
        });
    }
    if e == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let a = material.e_g * Q_E / (K_B * t);
    let k = hurkx_k(e * 1e2, material);
    // u = s^2 removes the u^{1/2} kink at the origin:
    // a * int_0^1 2 s exp(a s^2 - k s^3) ds
    let g = |s: f64| a * s * s - k * s * s * s;
    // the exponent peaks at s* = 2a/(3k), clipped to [0, 1]
    let s_star = (2.0 * a / (3.0 * k)).clamp(0.0, 1.0);
    let peak = g(s_star).max(g(1.0)).max(0.0);
    let (nodes, weights) = gauss_legendre(HURKX_ORDER);
    // at low field the integrand lives in a layer of width k^{-1/3} at s = 0
    let h = 1.0 / HURKX_PANELS as f64;
    let mut breaks = vec![0.0];
    let mut b = (k.cbrt().recip() / 8.0).min(h);
    while b < h {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.extend((1..=HURKX_PANELS).map(|i| i as f64 * h));
    let mut sum = 0.0;
    for pair in breaks.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (x, w) in nodes.iter().zip(&weights) {
            let s = mid + half * x;
            sum += w * half * 2.0 * s * (g(s) - peak).exp();
        }
    }
    Ok(a.ln() + sum.ln() + peak)
}

/// Hurkx field-enhancement factor (dimensionless) for a field `e` in V/cm.
pub fn field_enhancement_factor(e: f64, t: f64, material: &MaterialParams) -> Result<f64> {
    Ok(ln_field_enhancement_factor(e, t, material)?.exp())
}

/// Thermal velocity sqrt(3 k_B T / m*) in cm/s.
pub fn thermal_velocity(t: f64, material: &MaterialParams) -> f64 {
    (3.0 * K_B * t / (material.m_star * M_E)).sqrt() * 1e2
}

/// Field-dependent trap emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionRates {
    /// Electron emission rate including tunneling enhancement (1/s).
    pub e_n: f64,
    /// Hole emission rate including tunneling enhancement (1/s).
    pub e_p: f64,
    /// Barrier-lowered trap level (eV).
    pub eps_t: f64,
    /// Hurkx factor applied to both rates.
    pub enhancement: f64,
    /// The Poole-Frenkel shift pushed the level outside the gap and it was
    /// clamped to the nearest band edge.
    pub clamped: bool,
}

/// Poole-Frenkel barrier lowering (eV) for a field in V/cm.
pub fn poole_frenkel_shift(e: f64, material: &MaterialParams) -> f64 {
    (Q_E * e.abs() * 1e2 / (std::f64::consts::PI * material.permittivity())).sqrt()
}

/// Emission rates from the trap level at field `e` (V/cm).
pub fn emission_rates(e: f64, t: f64, material: &MaterialParams) -> Result<EmissionRates> {
    let trap = &material.trap;
    let kt = K_B * t / Q_E;
    let mut eps_t = trap.eps_t0 - poole_frenkel_shift(e, material);
    let mut clamped = false;
    if eps_t < material.eps_v {
        eps_t = material.eps_v;
        clamped = true;
    } else if eps_t > material.eps_c {
        eps_t = material.eps_c;
        clamped = true;
    }
    if clamped {
        log::warn!("trap level clamped to the band edge at E = {e:.3e} V/cm");
    }
    let vth = thermal_velocity(t, material);
    let nc = effective_dos(t, material.m_c)?;
    let nv = effective_dos(t, material.m_v)?;
    let ln_gamma = ln_field_enhancement_factor(e, t, material)?;
    // ln(1 + Gamma) without overflow for huge Gamma
    let ln_boost = if ln_gamma > 30.0 {
        ln_gamma + (-ln_gamma).exp().ln_1p()
    } else {
        ln_gamma.exp().ln_1p()
    };
    let ln_en = (vth * trap.sigma_n * nc).ln() - (material.eps_c - eps_t) / kt + ln_boost;
    let ln_ep = (vth * trap.sigma_p * nv).ln() - (eps_t - material.eps_v) / kt + ln_boost;
    Ok(EmissionRates {
        e_n: ln_en.exp(),
        e_p: ln_ep.exp(),
        eps_t,
        enhancement: ln_gamma.exp(),
        clamped,
    })
}

/// Occupied trap density (cm^-3) after time `t` (s) from `n_t0`, or the
/// steady state when `t` is `None`.
pub fn trap_occupation(e_n: f64, e_p: f64, n_t: f64, n_t0: f64, t: Option<f64>) -> Result<f64> {
    if !(e_n >= 0.0 && e_p >= 0.0 && e_n + e_p > 0.0) {
        return Err(Error::Domain {
            what: "emission rates must be non-negative with a positive sum",
            value: e_n + e_p,
        });
    }
    if !(0.0..=n_t).contains(&n_t0) {
        return Err(Error::Domain {
            what: "initial occupation outside [0, N_t]",
            value: n_t0,
        });
    }
    let steady = n_t * e_p / (e_n + e_p);
    Ok(match t {
        None => steady,
        Some(t) => steady + (n_t0 - steady) * (-(e_n + e_p) * t).exp(),
    })
}

/// Net generation rate (cm^-3 s^-1) for a local field `e` (V/cm).
pub fn generation_rate_at_field(e: f64, t: f64, material: &MaterialParams) -> Result<f64> {
    let r = emission_rates(e, t, material)?;
    Ok(harmonic_generation(material.trap.n_t, r.e_n, r.e_p))
}

fn harmonic_generation(n_t: f64, e_n: f64, e_p: f64) -> f64 {
    if e_n == 0.0 || e_p == 0.0 {
        return 0.0;
    }
    // N_t / (1/e_n + 1/e_p) keeps the product from overflowing
    n_t / (1.0 / e_n + 1.0 / e_p)
}

/// Generation rate (cm^-3 s^-1) at position `z` (um) of a solved diode.
pub fn generation_rate(z: f64, solution: &PotentialSolution, material: &MaterialParams) -> Result<f64> {
    generation_rate_at_field(solution.field_at(z), solution.design.t, material)
}

/// Low-field mobility (cm^2/V s) for a total doping in cm^-3.
pub fn low_field_mobility(total_doping: f64, material: &MaterialParams) -> f64 {
    let m = &material.mobility;
    m.mu_min + (m.mu_max - m.mu_min) / (1.0 + (total_doping / m.n_ref).powf(m.alpha_fit))
}

/// Drift velocity (cm/s) at field `e` (V/cm) with velocity saturation.
pub fn drift_velocity(e: f64, total_doping: f64, material: &MaterialParams) -> f64 {
    let m = &material.mobility;
    let mu0 = low_field_mobility(total_doping, material);
    let e = e.abs();
    let mu = mu0 / (1.0 + (mu0 * e / m.v_sat).powf(m.beta_fit)).powf(1.0 / m.beta_fit);
    mu * e
}

fn total_doping(design: &DiodeDesign) -> f64 {
    design.n_a + design.n_n + design.n_d
}

/// Depletion span [-d_p, dn_tilde + d_n+] sampled at its edges and every
/// interior grid node, with positions in um.
fn depletion_samples(solution: &PotentialSolution, depletion: &DepletionProfile) -> (Vec<f64>, Vec<f64>) {
    let lo = -depletion.d_p;
    let hi = depletion.dn_tilde + depletion.d_n_plus;
    let mut z = vec![lo];
    let mut e = vec![solution.field_at(lo)];
    for (zi, ei) in solution.z.iter().zip(&solution.e_field) {
        if *zi > lo && *zi < hi {
            z.push(*zi);
            e.push(*ei);
        }
    }
    z.push(hi);
    e.push(solution.field_at(hi));
    (z, e)
}

fn generation_profile(
    solution: &PotentialSolution,
    depletion: &DepletionProfile,
    material: &MaterialParams,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (z, e) = depletion_samples(solution, depletion);
    let g = e
        .iter()
        .map(|&ei| generation_rate_at_field(ei, solution.design.t, material))
        .collect::<Result<Vec<f64>>>()?;
    Ok((z, e, g))
}

/// Leakage current density (A/cm^2) collected over the depletion span.
pub fn leakage_current(
    design: &DiodeDesign,
    solution: &PotentialSolution,
    material: &MaterialParams,
) -> Result<f64> {
    let depletion = depletion_profile(solution, design, material);
    let (z, _, g) = generation_profile(solution, &depletion, material)?;
    let z_cm: Vec<f64> = z.iter().map(|v| v * 1e-4).collect();
    let cum = cumulative_trapezoid(&z_cm, &g);
    Ok(Q_E * cum.last().copied().unwrap_or(0.0))
}

/// Half-Gaussian fluctuator density below the surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthProfile {
    /// Depth samples (nm), uniformly spaced over [0, D].
    pub x: Vec<f64>,
    /// Volume density n_V (cm^-3).
    pub n_v: Vec<f64>,
}

impl DepthProfile {
    /// Half-Gaussian with the given FWHM (nm), scaled so that its integral
    /// over [0, depth] equals `n_eff * depth`.
    pub fn half_gaussian(n_eff: f64, depth: f64, fwhm: f64) -> Self {
        let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let h = depth / DEPTH_INTERVALS as f64;
        let x: Vec<f64> = (0..=DEPTH_INTERVALS).map(|i| i as f64 * h).collect();
        let shape: Vec<f64> = x.iter().map(|x| (-x * x / (2.0 * sigma * sigma)).exp()).collect();
        let norm = simpson(&shape, h);
        let amp = if n_eff == 0.0 { 0.0 } else { n_eff * depth / norm };
        Self {
            n_v: shape.iter().map(|s| amp * s).collect(),
            x,
        }
    }

    pub fn depth(&self) -> f64 {
        *self.x.last().unwrap_or(&0.0)
    }

    /// int_0^D n_V(x') dx' in cm^-3 nm.
    pub fn integral(&self) -> f64 {
        simpson(&self.n_v, self.x[1] - self.x[0])
    }

    /// int_0^D n_V(x') / (x - x')^p dx' in SI units (m^{-2-p}).
    fn kernel_integral(&self, x_def: f64, power: i32) -> f64 {
        let h = (self.x[1] - self.x[0]) * 1e-9;
        let xd = x_def * 1e-9;
        let y: Vec<f64> = self
            .x
            .iter()
            .zip(&self.n_v)
            .map(|(x, n)| n * 1e6 / (xd - x * 1e-9).powi(power))
            .collect();
        simpson(&y, h)
    }
}

/// Averaged fluctuator density (cm^-3) and its depth profile.
pub fn effective_density(
    design: &DiodeDesign,
    solution: &PotentialSolution,
    material: &MaterialParams,
) -> Result<(f64, DepthProfile)> {
    let depletion = depletion_profile(solution, design, material);
    effective_density_with(design, solution, &depletion, material)
}

fn effective_density_with(
    design: &DiodeDesign,
    solution: &PotentialSolution,
    depletion: &DepletionProfile,
    material: &MaterialParams,
) -> Result<(f64, DepthProfile)> {
    let width = depletion.d_p + depletion.dn_tilde + depletion.d_n_plus;
    if !(width > 0.0) {
        return Err(Error::NoDepletion);
    }
    let (z, e, g) = generation_profile(solution, depletion, material)?;
    let z_cm: Vec<f64> = z.iter().map(|v| v * 1e-4).collect();
    let cum = cumulative_trapezoid(&z_cm, &g);
    let doping = total_doping(design);
    let mu0 = low_field_mobility(doping, material);
    // diffusion-limited floor D/W keeps 1/v_d finite where E vanishes
    let v_floor = mu0 * K_B * design.t / Q_E / (width * 1e-4);
    let integrand: Vec<f64> = e
        .iter()
        .zip(&cum)
        .map(|(&ei, &c)| c / drift_velocity(ei, doping, material).max(v_floor))
        .collect();
    let outer = cumulative_trapezoid(&z_cm, &integrand);
    let n_eff = outer.last().copied().unwrap_or(0.0) / (width * 1e-4);
    let trap = &material.trap;
    Ok((n_eff, DepthProfile::half_gaussian(n_eff, trap.d_depth, trap.fwhm)))
}

fn check_depth(profile: &DepthProfile, x_def: f64) -> Result<()> {
    if !(x_def > profile.depth()) {
        return Err(Error::Domain {
            what: "defect depth must exceed the trap layer depth (nm)",
            value: x_def,
        });
    }
    Ok(())
}

/// Electric linewidth (MHz) from fluctuating surface dipoles at depth
/// `x_def` (nm).
pub fn surface_electric_linewidth(
    profile: &DepthProfile,
    x_def: f64,
    spin: &SpinCenterParams,
    material: &MaterialParams,
) -> Result<f64> {
    check_depth(profile, x_def)?;
    let angular = match spin.theta {
        Some(theta) => 3.0 + (2.0 * theta).cos(),
        None => 8.0 / 3.0,
    };
    let coulomb = Q_E / (4.0 * std::f64::consts::PI * material.permittivity());
    let a = std::f64::consts::PI * angular / 8.0 * coulomb * coulomb * profile.kernel_integral(x_def, 4);
    let p_d2 = spin.dipole_var * 1e-18;
    // V/m -> V/cm
    let delta_e = (p_d2 * a).sqrt() * 1e-2;
    Ok(GAUSSIAN_FWHM_FACTOR * spin.mu_z * delta_e * 1e-6)
}

/// Default carrier scattering time mu_0 m* / e (s).
pub fn default_scattering_time(total_doping: f64, material: &MaterialParams) -> f64 {
    low_field_mobility(total_doping, material) * 1e-4 * material.m_star * M_E / Q_E
}

/// Magnetic (Johnson-Nyquist) linewidth (MHz) at depth `x_def` (nm).
pub fn surface_magnetic_linewidth(
    profile: &DepthProfile,
    x_def: f64,
    spin: &SpinCenterParams,
    material: &MaterialParams,
    t: f64,
    total_doping: f64,
) -> Result<f64> {
    check_depth(profile, x_def)?;
    let tau = spin
        .tau_e
        .unwrap_or_else(|| default_scattering_time(total_doping, material));
    let m_c = material.m_c * M_E;
    let s_bz = K_B * t * MU0 * MU0 * Q_E * Q_E * tau / (8.0 * std::f64::consts::PI * m_c)
        * profile.kernel_integral(x_def, 2);
    let eta = 8.0 * std::f64::consts::PI * MU_B * MU_B * spin.g_eff * spin.g_eff / (H_PLANCK * H_PLANCK);
    Ok(eta * s_bz * 1e-6)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageResult {
    /// Leakage current density (A/cm^2).
    pub j_tat: f64,
    /// Averaged fluctuator density (cm^-3).
    pub n_eff: f64,
    pub profile: DepthProfile,
    /// Electric surface-noise linewidth at `spin.x_def` (MHz).
    pub gamma_e_surface: f64,
    /// Magnetic surface-noise linewidth at `spin.x_def` (MHz).
    pub gamma_b_surface: f64,
    pub depletion: DepletionProfile,
}

/// Leakage analysis of an already solved diode.
pub fn leakage_analysis(
    design: &DiodeDesign,
    solution: &PotentialSolution,
    material: &MaterialParams,
    spin: &SpinCenterParams,
) -> Result<LeakageResult> {
    let depletion = depletion_profile(solution, design, material);
    let (z, _, g) = generation_profile(solution, &depletion, material)?;
    let z_cm: Vec<f64> = z.iter().map(|v| v * 1e-4).collect();
    let j_tat = Q_E * cumulative_trapezoid(&z_cm, &g).last().copied().unwrap_or(0.0);
    let (n_eff, profile) = effective_density_with(design, solution, &depletion, material)?;
    let gamma_e_surface = surface_electric_linewidth(&profile, spin.x_def, spin, material)?;
    let gamma_b_surface =
        surface_magnetic_linewidth(&profile, spin.x_def, spin, material, design.t, total_doping(design))?;
    Ok(LeakageResult {
        j_tat,
        n_eff,
        profile,
        gamma_e_surface,
        gamma_b_surface,
        depletion,
    })
}

/// Solve the diode and run the leakage analysis.
pub fn leakage_report(
    design: &DiodeDesign,
    material: &MaterialParams,
    spin: &SpinCenterParams,
    grid: &GridConfig,
) -> Result<LeakageResult> {
    let solution = solve_poisson(design, material, grid)?;
    leakage_analysis(design, &solution, material, spin)
}
