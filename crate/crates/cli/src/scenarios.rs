use std::path::{Path, PathBuf};
use std::sync::Arc;

use diode_qopt::linewidth::linewidth_majority;
use diode_qopt::poisson::{critical_voltage, eq9_depletion_width};
use diode_qopt::{
    delta_e_total, depletion_profile, design_vector, diode_constraints, effective_density,
    leakage_analysis, leakage_current, optimal_defect_position, optimize, solve_poisson,
    surface_electric_linewidth, surface_magnetic_linewidth, DesignParam, DiodeDesign, DiodeProblem,
    OptimizationTrace,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{num, Table};
use crate::CliError;

/// Output directory plus the files written so far.
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    fn table(&self, name: &str, header: &[&str]) -> Result<Table, CliError> {
        Table::create(&self.dir, name, header)
    }

    fn keep(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    pub fn names(&self) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }
}

pub fn solve(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value, CliError> {
    let sol = solve_poisson(&cfg.design, &cfg.material, &cfg.grid)?;
    let dep = depletion_profile(&sol, &cfg.design, &cfg.material);
    let mut t = out.table(
        "solution.csv",
        &["z_um", "phi_V", "E_V_per_cm", "rho_c_C_per_cm3", "rho_C_per_cm3", "n_per_cm3", "p_per_cm3"],
    )?;
    for i in 0..sol.z.len() {
        t.row(&[
            num(sol.z[i]),
            num(sol.phi[i]),
            num(sol.e_field[i]),
            num(sol.rho_c[i]),
            num(sol.rho[i]),
            num(sol.n_e[i]),
            num(sol.p_h[i]),
        ])?;
    }
    out.keep(t.finish()?);
    Ok(json!({
        "phi_inf_V": sol.phi_inf,
        "mu_l_eV": sol.mu_l,
        "newton_iterations": sol.iterations,
        "residual": sol.residual,
        "max_abs_field_V_per_cm": sol.max_abs_field(),
        "depletion": dep,
        "critical_voltage_V": critical_voltage(&cfg.design, &cfg.material),
        "abrupt_junction_width_um": eq9_depletion_width(&cfg.design, &cfg.material),
    }))
}

pub fn linewidth(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value, CliError> {
    let design = &cfg.design;
    let sol = solve_poisson(design, &cfg.material, &cfg.grid)?;
    let dep = depletion_profile(&sol, design, &cfg.material);
    let n = cfg.linewidth.points;
    let mut t = out.table(
        "linewidth.csv",
        &[
            "z_def_um",
            "gamma_MHz",
            "delta_E_V_per_cm",
            "delta_E_p_V_per_cm",
            "delta_E_n_V_per_cm",
            "delta_E_nplus_V_per_cm",
        ],
    )?;
    for k in 0..n {
        let z = design.d * (k as f64 + 0.5) / n as f64;
        let (de, parts) = delta_e_total(design, &dep, z, &cfg.material)?;
        let inside = z < dep.dn_tilde;
        t.row(&[
            num(z),
            num(linewidth_majority(de, &cfg.spin)),
            num(de),
            num(parts.p),
            num(if inside { parts.n_depleted } else { parts.n_prime }),
            num(parts.n_plus),
        ])?;
    }
    out.keep(t.finish()?);
    let (z_opt, gamma_opt) = optimal_defect_position(design, &cfg.material, &cfg.spin, &cfg.grid)?;
    let (de, _) = delta_e_total(design, &dep, cfg.spin.z_def, &cfg.material)?;
    Ok(json!({
        "z_def_um": cfg.spin.z_def,
        "gamma_at_z_def_MHz": linewidth_majority(de, &cfg.spin),
        "z_opt_um": z_opt,
        "gamma_opt_MHz": gamma_opt,
        "depletion": dep,
    }))
}

pub fn leakage(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value, CliError> {
    let m = &cfg.material;
    let rows: Vec<(f64, f64, f64)> = cfg
        .leakage
        .voltages
        .par_iter()
        .map(|&v| {
            let design = cfg.design.with_voltage(v);
            let sol = solve_poisson(&design, m, &cfg.grid)?;
            let j = leakage_current(&design, &sol, m)?;
            let (n_eff, _) = effective_density(&design, &sol, m)?;
            Ok((v, j, n_eff))
        })
        .collect::<Result<_, diode_qopt::Error>>()?;
    let mut t = out.table("leakage_current.csv", &["V_V", "J_A_per_cm2", "n_eff_per_cm3"])?;
    for (v, j, n) in &rows {
        t.row(&[num(*v), num(*j), num(*n)])?;
    }
    out.keep(t.finish()?);

    let sol = solve_poisson(&cfg.design, m, &cfg.grid)?;
    let res = leakage_analysis(&cfg.design, &sol, m, &cfg.spin)?;
    let mut t = out.table("depth_profile.csv", &["x_nm", "n_V_per_cm3"])?;
    for (x, n) in res.profile.x.iter().zip(&res.profile.n_v) {
        t.row(&[num(*x), num(*n)])?;
    }
    out.keep(t.finish()?);

    let doping = cfg.design.n_a + cfg.design.n_n + cfg.design.n_d;
    let mut t = out.table("surface_linewidth.csv", &["x_def_nm", "gamma_E_MHz", "gamma_B_MHz"])?;
    for x in cfg.leakage.depths.samples() {
        let ge = surface_electric_linewidth(&res.profile, x, &cfg.spin, m)?;
        let gb = surface_magnetic_linewidth(&res.profile, x, &cfg.spin, m, cfg.design.t, doping)?;
        t.row(&[num(x), num(ge), num(gb)])?;
    }
    out.keep(t.finish()?);
    Ok(json!({
        "V": cfg.design.v,
        "J_A_per_cm2": res.j_tat,
        "n_eff_per_cm3": res.n_eff,
        "x_def_nm": cfg.spin.x_def,
        "gamma_E_MHz": res.gamma_e_surface,
        "gamma_B_MHz": res.gamma_b_surface,
        "depletion": res.depletion,
    }))
}

struct SweepPoint {
    coords: Vec<f64>,
    outcome: Result<[f64; 7], String>,
}

fn sweep_point(cfg: &RunConfig, design: &DiodeDesign) -> Result<[f64; 7], diode_qopt::Error> {
    let sol = solve_poisson(design, &cfg.material, &cfg.grid)?;
    let dep = depletion_profile(&sol, design, &cfg.material);
    let (z_opt, gamma) = diode_qopt::linewidth::optimal_position(design, &dep, &cfg.material, &cfg.spin)?;
    Ok([
        dep.dn_tilde,
        dep.d_p,
        dep.d_n_plus,
        if dep.fully_depleted_n { 1.0 } else { 0.0 },
        sol.max_abs_field(),
        z_opt,
        gamma,
    ])
}

pub fn sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value, CliError> {
    let spec = cfg.sweep.as_ref().expect("validated");
    let axes: Vec<(DesignParam, Vec<f64>)> = spec.axes.iter().map(|a| (a.parameter, a.range().samples())).collect();
    let mut grid: Vec<Vec<f64>> = vec![vec![]];
    for (_, values) in &axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(*v);
                    c
                })
            })
            .collect();
    }
    let points: Vec<SweepPoint> = grid
        .into_par_iter()
        .map(|coords| {
            let mut design = cfg.design;
            for ((p, _), v) in axes.iter().zip(&coords) {
                p.set(&mut design, *v);
            }
            let outcome = design
                .validate()
                .and_then(|_| sweep_point(cfg, &design))
                .map_err(|e| e.to_string());
            SweepPoint { coords, outcome }
        })
        .collect();

    let mut header: Vec<String> = axes.iter().map(|(p, _)| format!("{}_{}", p.as_str(), unit(*p))).collect();
    header.extend(
        [
            "dn_tilde_um",
            "d_p_um",
            "d_nplus_um",
            "fully_depleted",
            "max_abs_E_V_per_cm",
            "z_opt_um",
            "gamma_opt_MHz",
            "status",
        ]
        .map(String::from),
    );
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = out.table("sweep.csv", &header_refs)?;
    let mut failures = 0;
    for p in &points {
        let mut row: Vec<String> = p.coords.iter().map(|v| num(*v)).collect();
        match &p.outcome {
            Ok(vals) => {
                row.extend(vals.iter().map(|v| num(*v)));
                row.push("ok".into());
            }
            Err(e) => {
                failures += 1;
                row.extend((0..7).map(|_| num(f64::NAN)));
                row.push(e.clone());
            }
        }
        t.row(&row)?;
    }
    out.keep(t.finish()?);
    if failures == points.len() {
        return Err(CliError::Solver(format!("all {failures} sweep points failed")));
    }
    Ok(json!({ "points": points.len(), "failed_points": failures }))
}

fn unit(p: DesignParam) -> &'static str {
    match p {
        DesignParam::NA | DesignParam::NN | DesignParam::ND => "per_cm3",
        DesignParam::DL | DesignParam::D | DesignParam::DR => "um",
        DesignParam::V => "V",
    }
}

fn write_trace(trace: &OptimizationTrace, dir: &Path) -> Result<PathBuf, CliError> {
    let mut header: Vec<String> = [
        "iteration",
        "accepted",
        "gamma_MHz",
        "merit",
        "learning_rate",
        "worst_violation",
        "z_opt_um",
        "max_abs_E_V_per_cm",
    ]
    .map(String::from)
    .to_vec();
    for name in &trace.names {
        let p: DesignParam = name.parse().expect("design parameter name");
        header.push(format!("{}_{}", name, unit(p)));
    }
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::create(dir, "trace.csv", &refs)?;
    for r in &trace.records {
        let mut row = vec![
            r.iteration.to_string(),
            (r.accepted as u8).to_string(),
            num(r.objective),
            num(r.merit),
            num(r.learning_rate),
            num(r.worst_violation),
            num(r.z_opt.unwrap_or(f64::NAN)),
            num(r.max_field.unwrap_or(f64::NAN)),
        ];
        row.extend(r.values.iter().map(|v| num(*v)));
        t.row(&row)?;
    }
    t.finish()
}

fn named(trace: &OptimizationTrace, values: &[f64]) -> serde_json::Map<String, Value> {
    trace
        .names
        .iter()
        .zip(values)
        .map(|(n, v)| (n.clone(), json!(v)))
        .collect()
}

fn trace_summary(trace: &OptimizationTrace) -> Value {
    let first = trace.initial();
    let last = trace.final_record();
    json!({
        "active": trace.names.iter().zip(&trace.active).filter(|(_, a)| **a).map(|(n, _)| n).collect::<Vec<_>>(),
        "termination": trace.termination,
        "iterations": trace.records.len(),
        "accepted_iterations": trace.accepted().count(),
        "m_penalty_final": trace.m_penalty,
        "initial": first.map(|r| json!({
            "parameters": named(trace, &r.values),
            "gamma_MHz": r.objective,
            "z_opt_um": r.z_opt,
        })),
        "final": last.map(|r| json!({
            "parameters": named(trace, &r.values),
            "gamma_MHz": r.objective,
            "z_opt_um": r.z_opt,
            "max_abs_E_V_per_cm": r.max_field,
        })),
    })
}

/// Returns the summary results; on an optimizer failure the partial trace
/// is still written before the error propagates.
pub fn run_optimize(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value, (CliError, Option<Value>)> {
    let spec = cfg.optimizer.as_ref().expect("validated");
    let p0 = design_vector(&cfg.design, &spec.active);
    let problem = DiodeProblem::new(cfg.design, &p0.names, cfg.material, cfg.spin, cfg.grid)
        .map(Arc::new)
        .map_err(|e| (e.into(), None))?;
    let constraints =
        diode_constraints(problem.clone(), &p0.active, &spec.bounds).map_err(|e| (e.into(), None))?;
    match optimize(problem.as_ref(), &p0, &constraints, &spec.settings) {
        Ok(trace) => {
            out.keep(write_trace(&trace, &out.dir).map_err(|e| (e, None))?);
            Ok(trace_summary(&trace))
        }
        Err(failure) => {
            let summary = trace_summary(&failure.trace);
            if let Ok(path) = write_trace(&failure.trace, &out.dir) {
                out.keep(path);
            }
            Err((failure.source.into(), Some(summary)))
        }
    }
}
