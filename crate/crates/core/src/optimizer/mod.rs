//! Constrained scaled gradient descent with linearized projection onto the
//! feasible set and a non-monotone merit test.

pub mod diode;

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters in canonical units (cm^-3, um, V for diode designs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Entries the optimizer may change.
    pub active: Vec<bool>,
}

impl ParameterVector {
    /// All entries active.
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>, values: Vec<f64>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let active = vec![true; values.len()];
        Self {
            names,
            values,
            active,
        }
    }

    pub fn with_mask(mut self, active: Vec<bool>) -> Self {
        self.active = active;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != self.values.len() || self.active.len() != self.values.len() {
            return Err(Error::InvalidParameter(
                "names, values and mask must have equal length".into(),
            ));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "parameter value",
                value: *v,
            });
        }
        Ok(())
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            names: self.names.clone(),
            values,
            active: self.active.clone(),
        }
    }
}

/// Objective value plus diagnostics recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub value: f64,
    /// Optimal defect position (um) for diode objectives.
    pub z_opt: Option<f64>,
    /// Peak |E| (V/cm) for diode objectives.
    pub max_field: Option<f64>,
}

impl From<f64> for ObjectiveValue {
    fn from(value: f64) -> Self {
        Self {
            value,
            z_opt: None,
            max_field: None,
        }
    }
}

pub trait Objective: Sync {
    fn evaluate(&self, p: &[f64]) -> Result<ObjectiveValue>;

    /// Notification that `p` became the current iterate.
    fn commit(&self, _p: &[f64]) {}
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fn evaluate(&self, p: &[f64]) -> Result<ObjectiveValue> {
        self(p).map(ObjectiveValue::from)
    }
}

type ConstraintFn = Box<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;
type GradientFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Inequality h(p) >= 0 with violation scale `beta`.
pub struct Constraint {
    pub label: String,
    pub beta: f64,
    h: ConstraintFn,
    gradient: Option<GradientFn>,
}

impl std::fmt::Debug for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Constraint")
            .field("label", &self.label)
            .field("beta", &self.beta)
            .finish()
    }
}

impl Constraint {
    pub fn new(
        label: impl Into<String>,
        beta: f64,
        h: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            beta,
            h: Box::new(h),
            gradient: None,
        }
    }

    /// h(p) = coeffs . p + offset, with its exact gradient.
    pub fn linear(label: impl Into<String>, coeffs: Vec<f64>, offset: f64, beta: f64) -> Self {
        let c = coeffs.clone();
        Self {
            label: label.into(),
            beta,
            h: Box::new(move |p| Ok(c.iter().zip(p).map(|(a, x)| a * x).sum::<f64>() + offset)),
            gradient: Some(Box::new(move |_| coeffs.clone())),
        }
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        (self.h)(p)
    }

    /// Scaled violation max(0, -h) / beta.
    pub fn violation(&self, p: &[f64]) -> Result<f64> {
        Ok((-self.value(p)?).max(0.0) / self.beta)
    }

    /// Exact gradient when known, else forward differences with step
    /// `fd_rel * scales[i]` on the active entries.
    fn gradient(&self, p: &ParameterVector, h0: f64, scales: &[f64], fd_rel: f64) -> Result<Vec<f64>> {
        let mut g = match &self.gradient {
            Some(g) => g(&p.values),
            None => (0..p.len())
                .into_par_iter()
                .map(|i| {
                    if !p.active[i] {
                        return Ok(0.0);
                    }
                    let step = fd_rel * scales[i];
                    let mut probe = p.values.clone();
                    probe[i] += step;
                    Ok((self.value(&probe)? - h0) / step)
                })
                .collect::<Result<Vec<f64>>>()?,
        };
        for (gi, a) in g.iter_mut().zip(&p.active) {
            if !a {
                *gi = 0.0;
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Default)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: Constraint) -> Result<()> {
        if !(c.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "constraint {} needs a positive scale",
                c.label
            )));
        }
        self.constraints.push(c);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Worst scaled violation max_j max(0, -h_j) / beta_j.
    pub fn worst_violation(&self, p: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            worst = worst.max(c.violation(p)?);
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub s_min: f64,
    pub s_max: f64,
    /// Initial learning rate.
    pub s_init: f64,
    /// Penalty multiplier M of the merit function.
    pub m_penalty: f64,
    pub alpha_merit: f64,
    pub gamma_proj: f64,
    pub n_max_proj: usize,
    /// Projection targets h_j = margin * beta_j so that damped steps end
    /// strictly inside the feasible set.
    pub proj_margin: f64,
    pub chi: f64,
    pub n_conv: usize,
    pub k_window: usize,
    pub l_avg: usize,
    pub fd_rel: f64,
    pub rate_up: f64,
    pub rate_down: f64,
    /// Diagonal scales; derived from the start point when absent.
    pub d_scales: Option<Vec<f64>>,
    pub max_iter: usize,
    /// Consecutive iterations of falling objective and growing violation
    /// before M is doubled.
    pub m_escalation: usize,
    /// Consecutive objective failures tolerated before giving up.
    pub max_failures: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            s_min: 5e-5,
            s_max: 150.0,
            s_init: 1.0,
            m_penalty: 2.0,
            alpha_merit: 2.0,
            gamma_proj: 0.8,
            n_max_proj: 100,
            proj_margin: 1e-8,
            chi: 1e-5,
            n_conv: 30,
            k_window: 10,
            l_avg: 5,
            fd_rel: 1e-3,
            rate_up: 1.5,
            rate_down: 0.5,
            d_scales: None,
            max_iter: 1000,
            m_escalation: 10,
            max_failures: 20,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.s_min > 0.0 && self.s_min < self.s_max) {
            return bad("learning-rate bounds need 0 < s_min < s_max");
        }
        if !(self.gamma_proj > 0.0 && self.gamma_proj <= 1.0) {
            return bad("gamma_proj must lie in (0, 1]");
        }
        if !(self.chi > 0.0) {
            return bad("chi must be positive");
        }
        if !(self.fd_rel > 0.0) {
            return bad("fd_rel must be positive");
        }
        if !(self.rate_up >= 1.0 && self.rate_down > 0.0 && self.rate_down < 1.0) {
            return bad("need rate_up >= 1 and 0 < rate_down < 1");
        }
        if !(self.proj_margin >= 0.0) {
            return bad("proj_margin must be non-negative");
        }
        if self.k_window == 0 || self.n_conv == 0 || self.l_avg == 0 {
            return bad("window lengths must be positive");
        }
        if let Some(d) = &self.d_scales {
            if d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("d_scales must be positive");
            }
        }
        Ok(())
    }
}

/// Floor of the diagonal scale for a named parameter.
pub fn scale_floor(name: &str) -> f64 {
    match name {
        "N_a" | "N_n" | "N_d" => 1e14,
        "d_l" | "d" | "d_r" => 0.1,
        "V" => 1.0,
        _ => 1.0,
    }
}

/// D_ii = max(|p0_i|, floor_i).
pub fn default_scales(p0: &ParameterVector) -> Vec<f64> {
    p0.names
        .iter()
        .zip(&p0.values)
        .map(|(n, v)| v.abs().max(scale_floor(n)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradSource {
    Fresh,
    Averaged,
}

/// Recent gradients used to fill unresolvable components.
#[derive(Debug, Clone, Default)]
pub struct GradientHistory {
    entries: VecDeque<Vec<f64>>,
}

impl GradientHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, g: Vec<f64>, keep: usize) {
        self.entries.push_back(g);
        while self.entries.len() > keep {
            self.entries.pop_front();
        }
    }

    fn mean(&self, i: usize, last: usize) -> f64 {
        let n = self.entries.len().min(last);
        if n == 0 {
            return 0.0;
        }
        self.entries.iter().rev().take(n).map(|g| g[i]).sum::<f64>() / n as f64
    }
}

/// Forward-difference gradient with steps `fd_rel * scales[i]`; probes run
/// in parallel. Differences below 16 eps |f0| are replaced by the history
/// mean of that component.
pub fn finite_diff_gradient<O: Objective + ?Sized>(
    objective: &O,
    p: &ParameterVector,
    f0: f64,
    scales: &[f64],
    config: &OptimizerConfig,
    history: &GradientHistory,
) -> Result<(Vec<f64>, Vec<GradSource>)> {
    let floor = 16.0 * f64::EPSILON * f0.abs();
    let probe = |i: usize, step: f64| -> Result<f64> {
        let mut q = p.values.clone();
        q[i] += step;
        Ok(objective.evaluate(&q)?.value)
    };
    let parts: Vec<(f64, GradSource)> = (0..p.len())
        .into_par_iter()
        .map(|i| {
            if !p.active[i] {
                return Ok((0.0, GradSource::Fresh));
            }
            let mut step = config.fd_rel * scales[i];
            let f1 = match probe(i, step) {
                Ok(v) => v,
                Err(_) => {
                    step *= 0.5;
                    probe(i, step)?
                }
            };
            let diff = f1 - f0;
            if diff.abs() <= floor {
                Ok((history.mean(i, config.l_avg), GradSource::Averaged))
            } else {
                Ok((diff / step, GradSource::Fresh))
            }
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().unzip())
}

/// q = p - s / alpha * D^2 grad.
pub fn scaled_step(p: &[f64], gradient: &[f64], scales: &[f64], s: f64, alpha: f64) -> Vec<f64> {
    p.iter()
        .zip(gradient)
        .zip(scales)
        .map(|((p, g), d)| p - s / alpha * d * d * g)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub values: Vec<f64>,
    /// Worst scaled violation after projection.
    pub violation: f64,
    /// Worst scaled violation of the input.
    pub initial_violation: f64,
    pub sweeps: usize,
}

/// Damped linearized projection, sweeping the violated constraints in order
/// until none remains or `n_max_proj` sweeps are spent.
pub fn project_feasible(
    q: &ParameterVector,
    constraints: &ConstraintSet,
    scales: &[f64],
    config: &OptimizerConfig,
) -> Result<Projection> {
    let mut p = q.clone();
    // a raw step may leave the domain of nonlinear constraints; the ordered
    // sweep repairs the simple bounds first
    let initial_violation = constraints.worst_violation(&p.values).unwrap_or(f64::INFINITY);
    if initial_violation == 0.0 {
        return Ok(Projection {
            values: p.values,
            violation: 0.0,
            initial_violation,
            sweeps: 0,
        });
    }
    for sweep in 0..config.n_max_proj {
        let mut violated = false;
        let mut deferred = None;
        for c in &constraints.constraints {
            let h = match c.value(&p.values) {
                Ok(h) => h,
                // retried once the other constraints are repaired
                Err(e) => {
                    deferred = Some(e);
                    continue;
                }
            };
            if h >= 0.0 {
                continue;
            }
            violated = true;
            let g = c.gradient(&p, h, scales, config.fd_rel)?;
            let norm2: f64 = g.iter().zip(scales).map(|(g, d)| (g * d).powi(2)).sum();
            if !(norm2 > 0.0) {
                return Err(Error::DegenerateConstraint {
                    label: c.label.clone(),
                });
            }
            let factor = config.gamma_proj * (h - config.proj_margin * c.beta) / norm2;
            for i in 0..p.len() {
                if p.active[i] {
                    p.values[i] -= factor * scales[i] * scales[i] * g[i];
                }
            }
        }
        if !violated {
            if let Some(e) = deferred {
                return Err(e);
            }
            return Ok(Projection {
                values: p.values,
                violation: 0.0,
                initial_violation,
                sweeps: sweep,
            });
        }
    }
    let violation = constraints.worst_violation(&p.values)?;
    Ok(Projection {
        values: p.values,
        violation,
        initial_violation,
        sweeps: config.n_max_proj,
    })
}

/// m = f + alpha M max_j max(0, -h_j) / beta_j.
pub fn merit_value(
    objective_value: f64,
    p: &[f64],
    constraints: &ConstraintSet,
    config: &OptimizerConfig,
) -> Result<f64> {
    Ok(objective_value + config.alpha_merit * config.m_penalty * constraints.worst_violation(p)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub values: Vec<f64>,
    /// NaN when the objective failed.
    pub objective: f64,
    pub merit: f64,
    pub learning_rate: f64,
    pub worst_violation: f64,
    pub z_opt: Option<f64>,
    pub max_field: Option<f64>,
    pub accepted: bool,
    /// Source of each gradient component used to build this step.
    pub gradient_source: Vec<GradSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative objective change below chi for n_conv consecutive steps.
    Converged,
    /// Objective confined to a band narrower than chi over n_conv steps.
    Oscillation,
    IterationCap,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationTrace {
    pub names: Vec<String>,
    pub active: Vec<bool>,
    pub scales: Vec<f64>,
    /// Objective scale |f(p0)|.
    pub alpha: f64,
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    /// Penalty multiplier at the end of the run.
    pub m_penalty: f64,
}

impl OptimizationTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    pub fn initial(&self) -> Option<&TraceRecord> {
        self.records.first()
    }

    /// Last accepted iterate.
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.iter().rev().find(|r| r.accepted)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{source}")]
pub struct OptimizeFailure {
    pub source: Error,
    pub trace: Box<OptimizationTrace>,
}

fn relative_change(new: f64, old: f64) -> f64 {
    let d = (new - old).abs();
    if old == 0.0 {
        d
    } else {
        d / old.abs()
    }
}

/// Run the constrained descent from `p0`.
pub fn optimize<O: Objective + ?Sized>(
    objective: &O,
    p0: &ParameterVector,
    constraints: &ConstraintSet,
    config: &OptimizerConfig,
) -> std::result::Result<OptimizationTrace, OptimizeFailure> {
    let mut trace = OptimizationTrace {
        names: p0.names.clone(),
        active: p0.active.clone(),
        scales: Vec::new(),
        alpha: f64::NAN,
        records: Vec::new(),
        termination: Termination::Failed,
        m_penalty: config.m_penalty,
    };
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(source) => {
                    trace.termination = Termination::Failed;
                    return Err(OptimizeFailure {
                        source,
                        trace: Box::new(trace),
                    });
                }
            }
        };
    }
    bail!(config.validate());
    bail!(p0.validate());
    let scales = match &config.d_scales {
        Some(d) if d.len() == p0.len() => d.clone(),
        Some(_) => bail!(Err(Error::InvalidParameter(
            "d_scales length differs from the parameter count".into()
        ))),
        None => default_scales(p0),
    };
    trace.scales = scales.clone();
    let mut cfg = config.clone();

    let start = bail!(project_feasible(p0, constraints, &scales, &cfg));
    if start.violation > 0.0 {
        bail!(Err(Error::Infeasible {
            attempts: start.sweeps,
            violation: start.violation,
        }));
    }
    let mut p = p0.with_values(start.values);
    let f0 = bail!(objective.evaluate(&p.values));
    let alpha = if f0.value == 0.0 { 1.0 } else { f0.value.abs() };
    trace.alpha = alpha;
    objective.commit(&p.values);
    let mut f_p = f0;
    let m0 = bail!(merit_value(f0.value, &p.values, constraints, &cfg));
    let mut window: VecDeque<f64> = VecDeque::from([m0]);
    let mut history = GradientHistory::new();
    let mut s = cfg.s_init.clamp(cfg.s_min, cfg.s_max);
    let (mut grad, mut source) =
        bail!(finite_diff_gradient(objective, &p, f_p.value, &scales, &cfg, &history));
    history.push(grad.clone(), cfg.l_avg);
    trace.records.push(TraceRecord {
        iteration: 0,
        values: p.values.clone(),
        objective: f0.value,
        merit: m0,
        learning_rate: s,
        worst_violation: 0.0,
        z_opt: f0.z_opt,
        max_field: f0.max_field,
        accepted: true,
        gradient_source: source.clone(),
    });

    let mut small_steps = 0usize;
    let mut failures = 0usize;
    let mut escalation = 0usize;
    let mut last_raw_violation = 0.0;
    let mut recent: VecDeque<f64> = VecDeque::new();

    for iteration in 1..=cfg.max_iter {
        let raw = scaled_step(&p.values, &grad, &scales, s, alpha);
        let q_raw = p.with_values(raw);
        let proj = match project_feasible(&q_raw, constraints, &scales, &cfg) {
            Ok(proj) => proj,
            Err(e @ Error::DegenerateConstraint { .. }) => bail!(Err(e)),
            Err(e) => {
                log::debug!("projection failed at iteration {iteration}: {e}");
                Projection {
                    values: q_raw.values,
                    violation: f64::INFINITY,
                    initial_violation: f64::INFINITY,
                    sweeps: 0,
                }
            }
        };
        let q = proj.values;

        let eval = if proj.violation > 0.0 {
            None
        } else {
            match objective.evaluate(&q) {
                Ok(v) => Some(v),
                Err(e) => {
                    failures += 1;
                    log::debug!("objective failed at iteration {iteration}: {e}");
                    if failures > cfg.max_failures {
                        trace.termination = Termination::Failed;
                        return Err(OptimizeFailure {
                            source: e,
                            trace: Box::new(trace),
                        });
                    }
                    None
                }
            }
        };
        let Some(f_q) = eval else {
            trace.records.push(TraceRecord {
                iteration,
                values: q,
                objective: f64::NAN,
                merit: f64::NAN,
                learning_rate: s,
                worst_violation: proj.violation,
                z_opt: None,
                max_field: None,
                accepted: false,
                gradient_source: source.clone(),
            });
            s = (s * cfg.rate_down).max(cfg.s_min);
            continue;
        };
        failures = 0;

        let m_q = bail!(merit_value(f_q.value, &q, constraints, &cfg));
        let reference = window.iter().sum::<f64>() / window.len() as f64;
        let accept = m_q < reference;
        let change = relative_change(f_q.value, f_p.value);

        // penalty escalation when the raw steps keep trading violation for
        // objective
        if f_q.value < f_p.value && proj.initial_violation > last_raw_violation {
            escalation += 1;
            if escalation >= cfg.m_escalation {
                cfg.m_penalty *= 2.0;
                escalation = 0;
                log::info!("penalty multiplier raised to {}", cfg.m_penalty);
            }
        } else {
            escalation = 0;
        }
        last_raw_violation = proj.initial_violation;

        trace.records.push(TraceRecord {
            iteration,
            values: q.clone(),
            objective: f_q.value,
            merit: m_q,
            learning_rate: s,
            worst_violation: proj.violation,
            z_opt: f_q.z_opt,
            max_field: f_q.max_field,
            accepted: accept,
            gradient_source: source.clone(),
        });

        if accept {
            p.values = q;
            f_p = f_q;
            window.push_back(m_q);
            while window.len() > cfg.k_window {
                window.pop_front();
            }
            s = (s * cfg.rate_up).min(cfg.s_max);
            objective.commit(&p.values);
            (grad, source) =
                bail!(finite_diff_gradient(objective, &p, f_p.value, &scales, &cfg, &history));
            history.push(grad.clone(), cfg.l_avg);
        } else {
            s = (s * cfg.rate_down).max(cfg.s_min);
        }

        if change < cfg.chi {
            small_steps += 1;
        } else {
            small_steps = 0;
        }
        if small_steps >= cfg.n_conv {
            trace.termination = Termination::Converged;
            trace.m_penalty = cfg.m_penalty;
            return Ok(trace);
        }
        recent.push_back(f_p.value);
        while recent.len() > cfg.n_conv {
            recent.pop_front();
        }
        if recent.len() == cfg.n_conv {
            let hi = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = recent.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi - lo < cfg.chi * lo.abs() {
                trace.termination = Termination::Oscillation;
                trace.m_penalty = cfg.m_penalty;
                return Ok(trace);
            }
        }
    }
    trace.termination = Termination::IterationCap;
    trace.m_penalty = cfg.m_penalty;
    Ok(trace)
}
