//! Cross-checks of the library against independently coded references.

// reference values keep every digit of the high-precision evaluation
#![allow(clippy::excessive_precision)]

mod common;

use common::*;
use diode_qopt::linewidth::{gamma_at, optimal_position};
use diode_qopt::material::{effective_dos, intrinsic_fermi_energy, ln_intrinsic_density_si};
use diode_qopt::*;
use std::sync::Arc;

// 50-digit evaluations at T = 300 K
const NC_077: f64 = 1.695_540_227_160_717_986_8e19;
const PV_100: f64 = 2.509_412_229_840_790_890_0e19;
const LN_NI_CM3: f64 = -18.578_073_378_959_596_532;
const EPS_I: f64 = 1.635_067_601_369_938_357_3;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn material_constants_match_high_precision_values() {
    let m = MaterialParams::default();
    assert!(rel(effective_dos(300.0, 0.77).unwrap(), NC_077) < 1e-12);
    assert!(rel(effective_dos(300.0, 1.0).unwrap(), PV_100) < 1e-12);
    let ln_ni = ln_intrinsic_density_si(300.0, 3.26, 0.77, 1.0).unwrap() - 6.0 * std::f64::consts::LN_10;
    assert!((ln_ni - LN_NI_CM3).abs() < 1e-12 * LN_NI_CM3.abs());
    assert!(rel(intrinsic_fermi_energy(300.0, &m).unwrap(), EPS_I) < 1e-12);
}

/// Regularized neutrality in a single layer, coded from scratch.
fn neutral_psi_oracle(kind: char, n_dop: f64, v: f64) -> f64 {
    let kt = KB * 300.0 / Q;
    let a = 308.0 * std::f64::consts::LN_10;
    let s = |x: f64| a * (x / a).tanh();
    let sq = (NC_077 * PV_100).sqrt() * 1e6;
    let e_g = 3.26;
    let rho = |psi: f64| {
        let xe = psi + v / kt;
        let xh = -psi - e_g / kt;
        let free = sq * (s(xh).exp() - s(xe).exp());
        match kind {
            'p' => {
                let xa = -psi + (0.20 - EPS_I - e_g / 2.0) / kt;
                free - n_dop / (2.0 * s(xa).exp() + 1.0)
            }
            _ => {
                let xd = psi + (e_g / 2.0 - 3.19 + EPS_I + v) / kt;
                free + n_dop / (2.0 * s(xd).exp() + 1.0)
            }
        }
    };
    let (mut lo, mut hi) = (-400.0, 400.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rho(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn built_in_potential_matches_independent_bisection() {
    let design = DiodeDesign::baseline().with_voltage(0.0);
    let levels = boundary_levels(&design, &MaterialParams::default()).unwrap();
    let kt = KB * 300.0 / Q;
    let psi_l = neutral_psi_oracle('p', design.n_a * 1e6, 0.0);
    let psi_r = neutral_psi_oracle('n', design.n_d * 1e6, 0.0);
    assert!((levels.psi_left - psi_l).abs() < 1e-8, "{} {}", levels.psi_left, psi_l);
    assert!((levels.psi_right - psi_r).abs() < 1e-8);
    assert!((levels.phi_inf - kt * (psi_r - psi_l)).abs() < 1e-8);
}

#[test]
fn mid_depletion_charge_matches_unregularized_formula() {
    let m = MaterialParams::default();
    let design = DiodeDesign::baseline().with_voltage(-100.0);
    let sol = solve_poisson(&design, &m, &GridConfig::default()).unwrap();
    let dep = depletion_profile(&sol, &design, &m);
    let target = 0.5 * dep.dn_tilde;
    let i = sol.z.iter().position(|&z| z >= target).unwrap();
    let (z, psi) = (sol.z[i], sol.psi[i]);
    let kt = KB * 300.0 / Q;
    let sq = (NC_077 * PV_100).sqrt();
    let xe = psi + design.v / kt;
    let xh = -psi - 3.26 / kt;
    let xd = psi + (1.63 - 3.19 + EPS_I + design.v) / kt;
    let expect = Q * (sq * (xh.exp() - xe.exp()) + design.n_n / (2.0 * xd.exp() + 1.0));
    let got = charge_density(psi, z, &design, &m).unwrap();
    assert!(rel(got, expect) < 1e-9, "{got} {expect}");
}

#[test]
fn potential_converges_at_second_order() {
    let m = MaterialParams::default();
    let design = DiodeDesign::baseline().with_voltage(-100.0);
    let (e12, e23, order) = grid_convergence(&design, &m, 4001);
    assert!(order >= 1.8, "e12 {e12} e23 {e23} order {order}");
}

#[test]
fn contacts_are_neutral_and_field_integrates_to_potential() {
    let m = MaterialParams::default();
    for v in [-5.0, -300.0] {
        let design = DiodeDesign::baseline().with_voltage(v);
        let sol = solve_poisson(&design, &m, &GridConfig::default()).unwrap();
        let n = sol.z.len();
        assert!(sol.rho[0].abs() / (Q * design.n_a) < 1e-6);
        assert!(sol.rho[n - 1].abs() / (Q * design.n_d) < 1e-6);
        let h = sol.spacing() * 1e-4;
        let integral: f64 = sol.e_field.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        let drop = sol.phi[0] - sol.phi[n - 1];
        assert!((integral - drop).abs() < 1e-6 * drop.abs(), "{integral} {drop}");
    }
}

#[test]
fn field_noise_matches_monte_carlo_dipole_sum() {
    let m = MaterialParams::default();
    let design = DiodeDesign::baseline().with_voltage(-50.0);
    let sol = solve_poisson(&design, &m, &GridConfig::default()).unwrap();
    let dep = depletion_profile(&sol, &design, &m);
    let (de, _) = delta_e_total(&design, &dep, 0.85, &m).unwrap();
    let mc = mc_delta_e(&design, &dep, 0.85, &m, 200_000, 7);
    assert!(rel(mc, de) < 0.15, "mc {mc} model {de}");
}

#[test]
fn optimal_position_matches_dense_scan() {
    let m = MaterialParams::default();
    let spin = SpinCenterParams::default();
    for v in [-5.0, -50.0] {
        let design = DiodeDesign::baseline().with_voltage(v);
        let sol = solve_poisson(&design, &m, &GridConfig::default()).unwrap();
        let dep = depletion_profile(&sol, &design, &m);
        let n = 10_000;
        let (mut zb, mut gb) = (0.0, f64::INFINITY);
        for k in 0..n {
            let z = design.d * (k as f64 + 0.5) / n as f64;
            let g = gamma_at(&design, &dep, &m, &spin, z).unwrap();
            if g < gb {
                zb = z;
                gb = g;
            }
        }
        let (z_opt, g_opt) = optimal_position(&design, &dep, &m, &spin).unwrap();
        assert!(g_opt <= gb * (1.0 + 1e-12));
        assert!((z_opt - zb).abs() <= design.d / n as f64, "{z_opt} {zb}");
    }
}

#[test]
fn hurkx_factor_matches_adaptive_quadrature() {
    let m = MaterialParams::default();
    for e in [3e5, 1e6, 3e6] {
        let lib = field_enhancement_factor(e, 300.0, &m).unwrap();
        let oracle = hurkx_oracle(e, 300.0, &m);
        assert!(rel(lib, oracle) < 1e-6, "E {e}: {lib} {oracle}");
    }
}

#[test]
fn emission_rates_match_direct_evaluation() {
    let m = MaterialParams::default();
    let e = 5e5;
    let r = emission_rates(e, 300.0, &m).unwrap();
    let kt = KB * 300.0 / Q;
    let vth = (3.0 * KB * 300.0 / (0.37 * ME)).sqrt() * 1e2;
    let pf = (Q * e * 1e2 / (std::f64::consts::PI * EPS0 * 9.66)).sqrt();
    let eps_t = 1.63 - pf;
    let boost = hurkx_oracle(e, 300.0, &m).ln_1p();
    let ln_en = (vth * 1e-15 * NC_077).ln() - (3.26 - eps_t) / kt + boost;
    let ln_ep = (vth * 1e-15 * PV_100).ln() - eps_t / kt + boost;
    assert!((r.e_n.ln() - ln_en).abs() < 1e-10 * ln_en.abs().max(1.0), "{} {}", r.e_n.ln(), ln_en);
    assert!((r.e_p.ln() - ln_ep).abs() < 1e-10 * ln_ep.abs().max(1.0));
    assert!((r.eps_t - eps_t).abs() < 1e-14);
}

#[test]
fn trap_transient_matches_rk4() {
    let (e_n, e_p, n_t) = (3.0e2, 1.1e3, 1e17);
    let t = 3.0 / (e_n + e_p);
    let exact = trap_occupation(e_n, e_p, n_t, 0.2 * n_t, Some(t)).unwrap();
    let rk = rk4_occupation(e_n, e_p, n_t, 0.2 * n_t, t, 20_000);
    assert!(rel(exact, rk) < 1e-8);
}

#[test]
fn generation_is_the_steady_state_flux() {
    let m = MaterialParams::default();
    let design = DiodeDesign::baseline().with_voltage(-300.0);
    let sol = solve_poisson(&design, &m, &GridConfig::default()).unwrap();
    for z in [0.5, 2.0, 4.0] {
        let r = emission_rates(sol.field_at(z), 300.0, &m).unwrap();
        let n_ss = trap_occupation(r.e_n, r.e_p, m.trap.n_t, 0.0, None).unwrap();
        let g = generation_rate(z, &sol, &m).unwrap();
        assert!(rel(r.e_n * n_ss, g) < 1e-12);
        assert!(rel(r.e_p * (m.trap.n_t - n_ss), g) < 1e-10);
    }
}

#[test]
fn leakage_current_is_linear_in_trap_density() {
    let mut m = MaterialParams::default();
    let design = DiodeDesign::baseline().with_voltage(-300.0);
    let sol = solve_poisson(&design, &m, &GridConfig::default()).unwrap();
    let j1 = leakage_current(&design, &sol, &m).unwrap();
    m.trap.n_t *= 2.0;
    let j2 = leakage_current(&design, &sol, &m).unwrap();
    assert!(j1 > 0.0);
    assert!(rel(j2, 2.0 * j1) < 1e-12);
    m.trap.n_t = 0.0;
    assert_eq!(leakage_current(&design, &sol, &m).unwrap(), 0.0);
}

#[test]
fn forward_gradient_agrees_with_central_difference() {
    let base = DiodeDesign::baseline();
    let p0 = design_vector(&base, &DesignParam::ALL);
    let problem = DiodeProblem::new(
        base,
        &p0.names,
        MaterialParams::default(),
        SpinCenterParams::default(),
        GridConfig::default(),
    )
    .unwrap();
    let config = OptimizerConfig::default();
    let scales = optimizer::default_scales(&p0);
    let f0 = problem.evaluate(&p0.values).unwrap().value;
    let history = GradientHistory::new();
    let (g, _) = finite_diff_gradient(&problem, &p0, f0, &scales, &config, &history).unwrap();
    let fine = OptimizerConfig {
        fd_rel: config.fd_rel / 10.0,
        ..config.clone()
    };
    let (g_fine, _) = finite_diff_gradient(&problem, &p0, f0, &scales, &fine, &history).unwrap();
    for i in 0..p0.len() {
        let at = |x: f64| {
            let mut q = p0.values.clone();
            q[i] += x;
            problem.evaluate(&q).unwrap().value
        };
        let h = config.fd_rel / 10.0 * scales[i];
        let central = (at(h) - at(-h)) / (2.0 * h);
        let err = g[i] - central;
        if err.abs() > 0.05 * central.abs() {
            // curvature dominated: the error must be the first-order
            // truncation term and shrink with the step
            let err_fine = g_fine[i] - central;
            assert!(
                err_fine.abs() <= 0.05 * central.abs() + 0.15 * err.abs(),
                "{}: fwd {} fine {} central {}",
                p0.names[i],
                g[i],
                g_fine[i],
                central
            );
        }
    }
}

#[test]
fn constrained_quadratic_reaches_the_kkt_point() {
    let f = |p: &[f64]| -> diode_qopt::Result<f64> { Ok((p[0] - 3.0).powi(2) + (p[1] + 1.0).powi(2) + 1.0) };
    let p0 = ParameterVector::new(["x", "y"], vec![0.0, 0.0]);
    let mut cs = ConstraintSet::new();
    cs.push(Constraint::linear("x <= 1", vec![-1.0, 0.0], 1.0, 1.0)).unwrap();
    let config = OptimizerConfig {
        d_scales: Some(vec![1.0, 1.0]),
        fd_rel: 1e-7,
        chi: 1e-10,
        ..Default::default()
    };
    let trace = optimize(&f, &p0, &cs, &config).unwrap();
    let last = trace.accepted().last().unwrap();
    let (xo, yo) = kkt_grid_oracle(2e-3);
    assert!((last.values[0] - xo).abs() < 1e-3, "{:?}", last.values);
    assert!((last.values[1] - yo).abs() < 1e-3, "{:?}", last.values);
}

#[test]
fn projection_matches_alternating_projections() {
    let planes = [([1.0, 1.0], -2.0), ([1.0, -2.0], 1.0)];
    let mut cs = ConstraintSet::new();
    for (i, (a, c)) in planes.iter().enumerate() {
        cs.push(Constraint::linear(format!("c{i}"), a.to_vec(), *c, 1.0)).unwrap();
    }
    let exact = OptimizerConfig {
        gamma_proj: 1.0,
        proj_margin: 0.0,
        ..Default::default()
    };
    for start in [[-1.0, 3.0], [0.0, 0.0], [-3.0, -1.0]] {
        let q = ParameterVector::new(["x", "y"], start.to_vec());
        let proj = project_feasible(&q, &cs, &[1.0, 1.0], &exact).unwrap();
        let oracle = alternating_projection(start, &planes);
        for k in 0..2 {
            assert!((proj.values[k] - oracle[k]).abs() < 1e-6, "{:?} {:?}", proj.values, oracle);
        }
        // the damped default still lands inside the wedge
        let damped = project_feasible(&q, &cs, &[1.0, 1.0], &OptimizerConfig::default()).unwrap();
        assert_eq!(cs.worst_violation(&damped.values).unwrap(), 0.0);
    }
}

#[test]
fn scaled_minimizer_is_invariant_to_units() {
    // the same quadratic in metres and in micrometres
    let f_m = |p: &[f64]| -> diode_qopt::Result<f64> { Ok(1.0 + (p[0] - 2e-6).powi(2) * 1e12) };
    let f_um = |p: &[f64]| -> diode_qopt::Result<f64> { Ok(1.0 + (p[0] - 2.0).powi(2)) };
    let cs = ConstraintSet::new();
    fn run<F: Fn(&[f64]) -> diode_qopt::Result<f64> + Sync>(
        f: F,
        x0: f64,
        scale: f64,
        cs: &ConstraintSet,
    ) -> OptimizationTrace {
        let p0 = ParameterVector::new(["x"], vec![x0]);
        let config = OptimizerConfig {
            d_scales: Some(vec![scale]),
            fd_rel: 1e-7,
            ..Default::default()
        };
        optimize(&f, &p0, cs, &config).unwrap()
    }
    let a = run(f_m, 5e-6, 1e-6, &cs);
    let b = run(f_um, 5.0, 1.0, &cs);
    let xa = a.accepted().last().unwrap().values[0] * 1e6;
    let xb = b.accepted().last().unwrap().values[0];
    assert!((xa - 2.0).abs() < 1e-3 && (xb - 2.0).abs() < 1e-3, "{xa} {xb}");
    assert_eq!(a.accepted().count(), b.accepted().count());
}

#[test]
fn masked_design_parameters_never_move() {
    let base = DiodeDesign::baseline();
    let p0 = design_vector(&base, &[DesignParam::V]);
    let problem = Arc::new(
        DiodeProblem::new(
            base,
            &p0.names,
            MaterialParams::default(),
            SpinCenterParams::default(),
            GridConfig::default(),
        )
        .unwrap(),
    );
    let cs = diode_constraints(problem.clone(), &p0.active, &DesignBounds::default()).unwrap();
    let config = OptimizerConfig {
        max_iter: 15,
        ..Default::default()
    };
    let trace = optimize(problem.as_ref(), &p0, &cs, &config).unwrap();
    for r in &trace.records {
        for (i, active) in p0.active.iter().enumerate() {
            if !active {
                assert_eq!(r.values[i].to_bits(), p0.values[i].to_bits());
            }
        }
    }
    let last = trace.accepted().last().unwrap();
    assert!(last.objective < trace.initial().unwrap().objective);
}
