//! Independent reference computations shared by the oracle tests and the
//! acceptance run.
#![allow(dead_code)]

use diode_qopt::poisson::{DepletionProfile, DiodeDesign, GridConfig};
use diode_qopt::{solve_poisson, MaterialParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const Q: f64 = 1.602_176_634e-19;
pub const KB: f64 = 1.380_649e-23;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const ME: f64 = 9.109_383_701_5e-31;
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Adaptive Simpson with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Hurkx factor straight from its defining integral over u.
pub fn hurkx_oracle(e_vcm: f64, t: f64, m: &MaterialParams) -> f64 {
    let gap = m.e_g * Q;
    let a = gap / (KB * t);
    let k = 4.0 / 3.0 * (2.0 * m.m_star * ME).sqrt() * gap.powf(1.5) / (Q * HBAR * e_vcm * 1e2);
    let g = |u: f64| a * u - k * u.powf(1.5);
    // shift by the peak of the exponent to keep the integrand O(1)
    let u_star = ((2.0 * a / (3.0 * k)).powi(2)).min(1.0);
    let peak = g(u_star).max(0.0);
    let integrand = |u: f64| (g(u) - peak).exp();
    let mut total = 0.0;
    // split at the peak so the bisection sees smooth halves
    for (lo, hi) in [(0.0, u_star), (u_star, 1.0)] {
        if hi > lo {
            total += adaptive_simpson(&integrand, lo, hi, 1e-15);
        }
    }
    a * total * peak.exp()
}

/// Classical RK4 for dn/dt = e_p (N_t - n) - e_n n.
pub fn rk4_occupation(e_n: f64, e_p: f64, n_t: f64, n0: f64, t_end: f64, steps: usize) -> f64 {
    let f = |n: f64| e_p * (n_t - n) - e_n * n;
    let h = t_end / steps as f64;
    let mut n = n0;
    for _ in 0..steps {
        let k1 = f(n);
        let k2 = f(n + 0.5 * h * k1);
        let k3 = f(n + 0.5 * h * k2);
        let k4 = f(n + h * k3);
        n += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    n
}

/// Monte-Carlo estimate of the rms field (V/cm) at `z_def` from randomly
/// oriented dipoles e * N^{-1/3} filling the non-depleted slabs.
///
/// Position along the axis is drawn uniformly in each slab, the radial
/// offset from its conditional 1/r^6 law, and the dipole direction
/// uniformly on the sphere; the full vector dipole field is evaluated.
pub fn mc_delta_e(
    design: &DiodeDesign,
    dep: &DepletionProfile,
    z_def: f64,
    m: &MaterialParams,
    samples: usize,
    seed: u64,
) -> f64 {
    let um = 1e-6;
    let eps = EPS0 * m.kappa;
    let coulomb = Q / (4.0 * PI * eps);
    let mut slabs = vec![
        (design.n_a * 1e6, (dep.d_p + z_def) * um, (design.d_l + z_def) * um),
        (
            design.n_d * 1e6,
            (design.d + dep.d_n_plus - z_def) * um,
            (design.d + design.d_r - z_def) * um,
        ),
    ];
    if z_def < dep.dn_tilde {
        slabs.push((design.n_n * 1e6, (dep.dn_tilde - z_def) * um, (design.d - z_def) * um));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut var = 0.0;
    for (n, a, b) in slabs {
        if b <= a {
            continue;
        }
        let len = n.powf(-1.0 / 3.0);
        let mut acc = 0.0;
        for _ in 0..samples {
            let z: f64 = rng.gen_range(a..b);
            let u: f64 = rng.gen();
            let rho = z * ((1.0 - u).powf(-0.5) - 1.0).sqrt();
            let az: f64 = rng.gen_range(0.0..2.0 * PI);
            let r = [rho * az.cos(), rho * az.sin(), z];
            let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            let rhat = [r[0] / rn, r[1] / rn, r[2] / rn];
            let cz: f64 = rng.gen_range(-1.0..1.0);
            let ph: f64 = rng.gen_range(0.0..2.0 * PI);
            let s = (1.0 - cz * cz).sqrt();
            let nhat = [s * ph.cos(), s * ph.sin(), cz];
            let dot: f64 = (0..3).map(|i| nhat[i] * rhat[i]).sum();
            let e2: f64 = (0..3).map(|i| (3.0 * dot * rhat[i] - nhat[i]).powi(2)).sum();
            // |E|^2 2 pi rho / (q(z) q(rho|z)), q(z) = 1/(b-a), q(rho|z) = 4 z^4 rho / r^6;
            // the r^6 of the field cancels against the sampling density
            acc += e2 * PI * (b - a) / (2.0 * z.powi(4));
        }
        var += n * (coulomb * len).powi(2) * acc / samples as f64;
    }
    var.sqrt() * 1e-2
}

/// Max |dphi| between nested grids at the coarse nodes and the observed
/// convergence order from three levels.
pub fn grid_convergence(design: &DiodeDesign, m: &MaterialParams, base: usize) -> (f64, f64, f64) {
    let solve = |n: usize| solve_poisson(design, m, &GridConfig::with_points(n)).expect("solve");
    let s1 = solve(base);
    let s2 = solve(2 * base - 1);
    let s3 = solve(4 * base - 3);
    let e12 = (0..base).map(|i| (s1.phi[i] - s2.phi[2 * i]).abs()).fold(0.0, f64::max);
    let e23 = (0..base).map(|i| (s2.phi[2 * i] - s3.phi[4 * i]).abs()).fold(0.0, f64::max);
    (e12, e23, (e12 / e23).log2())
}

/// Brute-force minimizer of (x-3)^2 + (y+1)^2 over x <= 1 on a grid.
pub fn kkt_grid_oracle(step: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let nx = (6.0 / step) as i64;
    let ny = (10.0 / step) as i64;
    for i in 0..=nx {
        let x = 1.0 - i as f64 * step;
        for j in 0..=ny {
            let y = -5.0 + j as f64 * step;
            let f = (x - 3.0).powi(2) + (y + 1.0).powi(2);
            if f < best.0 {
                best = (f, x, y);
            }
        }
    }
    (best.1, best.2)
}

/// Exact alternating projections onto half-planes a.p + c >= 0.
pub fn alternating_projection(mut p: [f64; 2], planes: &[([f64; 2], f64)]) -> [f64; 2] {
    for _ in 0..10_000 {
        let mut moved = false;
        for (a, c) in planes {
            let h = a[0] * p[0] + a[1] * p[1] + c;
            if h < 0.0 {
                let n2 = a[0] * a[0] + a[1] * a[1];
                p[0] -= h / n2 * a[0];
                p[1] -= h / n2 * a[1];
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    p
}
