//! Scenario files and the `run`, `sweep` and `verify` commands.
//!
//! Scenarios are JSON documents with 1-based agent ids; the field reference
//! lives in `docs/scenario-schema.md`.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, ConsensusPrediction, HinfReport, DEFAULT_LIMIT_TOL};
use crate::certificate::{self, Certificate, EmpiricalReport, JumpLmiReport, LmiReport, Violation};
use crate::graph::{self, ClusterPartition, ClusteredNetwork, DirectedWeightedGraph, Edge};
use crate::linalg::{self, Matrix};
use crate::sim::{self, DisturbanceSignal, HybridTrajectory, ImpulseSchedule, Mode, SimOptions};
use crate::svg;

/// Spread below which a run counts as having reached consensus.
pub const CONSENSUS_TOL: f64 = 1e-6;
/// Cap on transition-product factors when extending a schedule past its horizon.
pub const MAX_LIMIT_FACTORS: usize = 20_000;

pub const BUNDLED: [(&str, &str); 3] = [
    ("paper-fig1", include_str!("../scenarios/paper-fig1.json")),
    ("paper-fig1-leaders-only", include_str!("../scenarios/paper-fig1-leaders-only.json")),
    ("paper-fig2", include_str!("../scenarios/paper-fig2.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parse error at {field} (line {line}, column {column}): {message}")]
    Parse { field: String, line: usize, column: usize, message: String },
    #[error("validation failed:\n{}", .0.iter().map(|s| format!("  - {s}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<String>),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Validation(_) => 1,
            ScenarioError::Parse { .. } => 2,
            ScenarioError::Io { .. } | ScenarioError::Runtime(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

fn runtime(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Runtime(e.to_string())
}

fn invalid(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Validation(vec![e.to_string()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub members: Vec<usize>,
    pub leader: usize,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

/// Inter-cluster reset: a full `N x N` jump matrix, or an `m x m` leader
/// matrix embedded on the leaders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InterSpec {
    PE(Matrix),
    PL(Matrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub clusters: Vec<ClusterSpec>,
    pub inter: InterSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Uniform { delta: f64 },
    Random { delta_min: f64, delta_max: f64, seed: u64 },
    Explicit { times: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    pub p: Matrix,
    pub alpha: f64,
    pub rho: f64,
    pub beta: f64,
    #[serde(default = "default_n0")]
    pub n0: u32,
    /// Defaults to the schedule's mean interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_avg: Option<f64>,
    /// Replace `P` by its projection onto symmetric per-cluster blocks with
    /// zero row sums before checking.
    #[serde(default)]
    pub project_structure: bool,
}

fn default_n0() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    /// H∞ index on a zero-initial companion run (only with a nonzero disturbance).
    #[serde(default = "yes")]
    pub hinf: bool,
    /// Gain used for the H∞ index.
    #[serde(default = "one")]
    pub rho: f64,
    /// Closed-form prediction (only with a leader matrix).
    #[serde(default = "yes")]
    pub closed_form: bool,
    /// Trajectory-level certificate check (only with a certificate).
    #[serde(default = "yes")]
    pub empirical: bool,
    #[serde(default = "one_usize")]
    pub empirical_stride: usize,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl Default for Analyses {
    fn default() -> Self {
        Self { hinf: true, rho: 1.0, closed_form: true, empirical: true, empirical_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub network: NetworkSpec,
    pub x0: Vec<f64>,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub disturbance: DisturbanceSignal,
    pub horizon: f64,
    pub mode: Mode,
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSpec>,
    #[serde(default)]
    pub analyses: Analyses,
    /// Externally reported consensus value, echoed for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_value: Option<f64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse { field, line: inner.line(), column: inner.column(), message: inner.to_string() }
        })
    }

    /// Reads a file, or a bundled scenario by name when no such file exists.
    pub fn load(source: &str) -> Result<Self> {
        let path = Path::new(source);
        if !path.exists() {
            if let Some(text) = bundled(source) {
                return Self::from_json(text);
            }
        }
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn agent_count(&self) -> usize {
        self.x0.len()
    }

    pub fn build_network(&self) -> Result<ClusteredNetwork> {
        let n = self.x0.len();
        let mut errors = Vec::new();
        let mut seen = vec![false; n];
        let id = |k: usize, errors: &mut Vec<String>, what: &str| -> Option<usize> {
            if k == 0 || k > n {
                errors.push(format!("{what}: agent {k} is outside 1..={n}"));
                None
            } else {
                Some(k - 1)
            }
        };
        let mut clusters = Vec::new();
        let mut leaders = Vec::new();
        let mut edges = Vec::new();
        for (ci, c) in self.network.clusters.iter().enumerate() {
            let ctx = format!("network.clusters[{ci}]");
            let mut members = Vec::new();
            for &m in &c.members {
                if let Some(i) = id(m, &mut errors, &ctx) {
                    if seen[i] {
                        errors.push(format!("{ctx}: agent {m} is listed twice"));
                    }
                    seen[i] = true;
                    members.push(i);
                }
            }
            if let Some(l) = id(c.leader, &mut errors, &format!("{ctx}.leader")) {
                leaders.push(l);
            }
            for (ei, e) in c.edges.iter().enumerate() {
                let ectx = format!("{ctx}.edges[{ei}]");
                if let (Some(from), Some(to)) = (id(e.from, &mut errors, &ectx), id(e.to, &mut errors, &ectx)) {
                    edges.push(Edge { from, to, weight: e.weight });
                }
            }
            clusters.push(members);
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            errors.push(format!("agent {} belongs to no cluster", k + 1));
        }
        if let Some(cert) = &self.certificate {
            if cert.p.rows() != n || cert.p.cols() != n {
                errors.push(format!("certificate.p is {}x{}, expected {n}x{n}", cert.p.rows(), cert.p.cols()));
            }
        }
        if let DisturbanceSignal::Sinusoid { mask: Some(mask), .. } = &self.disturbance {
            if mask.len() != n {
                errors.push(format!("disturbance.mask has length {}, expected {n}", mask.len()));
            }
        }
        if !errors.is_empty() {
            return Err(ScenarioError::Validation(errors));
        }
        let partition = ClusterPartition::new(n, clusters, leaders).map_err(invalid)?;
        let intra = DirectedWeightedGraph::new(n, edges).map_err(invalid)?;
        let p_e = match &self.network.inter {
            InterSpec::PE(m) => m.clone(),
            InterSpec::PL(m) => linalg::embed_leader_matrix(m, &partition).map_err(invalid)?,
        };
        ClusteredNetwork::new(intra, partition, p_e).map_err(invalid)
    }

    pub fn build_schedule(&self) -> Result<ImpulseSchedule> {
        let s = match &self.schedule {
            ScheduleSpec::Uniform { delta } => ImpulseSchedule::uniform(*delta, self.horizon),
            ScheduleSpec::Random { delta_min, delta_max, seed } => ImpulseSchedule::random(*delta_min, *delta_max, *seed, self.horizon),
            ScheduleSpec::Explicit { times } => ImpulseSchedule::explicit(times.clone()),
        };
        s.map_err(invalid)
    }

    /// The certificate as checked, and the unprojected matrix's rejection when projecting.
    fn build_certificate(&self, network: &ClusteredNetwork, schedule: &ImpulseSchedule) -> Result<Option<(Certificate, f64, Option<String>)>> {
        let Some(spec) = &self.certificate else { return Ok(None) };
        let t_avg = match spec.t_avg.or_else(|| schedule.mean_interval()) {
            Some(t) => t,
            None => return Err(invalid("certificate.t_avg is required when the schedule has no intervals")),
        };
        let make = |p: Matrix| Certificate::new(p, spec.alpha, spec.rho, spec.beta, spec.n0, t_avg);
        if spec.project_structure {
            let projected = certificate::project_cluster_structure(&spec.p, network.partition());
            let distance = projected.max_abs_diff(&spec.p);
            let raw = make(spec.p.clone()).err().map(|e| e.to_string());
            Ok(Some((make(projected).map_err(invalid)?, distance, raw)))
        } else {
            Ok(Some((make(spec.p.clone()).map_err(invalid)?, 0.0, None)))
        }
    }
}

/// Product-limit prediction over the schedule's intervals, extended with
/// copies of the last interval until the product converges.
pub fn predict_consensus(network: &ClusteredNetwork, schedule: &ImpulseSchedule, x0: &[f64]) -> Option<ConsensusPrediction> {
    let mut intervals = schedule.intervals();
    let &last = intervals.last()?;
    loop {
        match analysis::limit_product(network, &intervals, Some(x0), DEFAULT_LIMIT_TOL) {
            Ok(p) if p.converged || intervals.len() >= MAX_LIMIT_FACTORS => return Some(p),
            Ok(_) => intervals.extend(std::iter::repeat_n(last, 100)),
            Err(e) => {
                warn!("no product-limit prediction: {e}");
                return None;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub projected: bool,
    /// Largest entrywise change made by the projection.
    pub projection_distance: f64,
    /// Why the matrix as given was rejected, when it was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unprojected_error: Option<String>,
    pub p: Matrix,
    pub flow: LmiReport,
    pub jump: JumpLmiReport,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EmpiricalSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSummary {
    pub passed: bool,
    pub jump_checks: usize,
    pub flow_checks: usize,
    pub max_jump_ratio: Option<f64>,
    pub violation_count: usize,
    pub first_violations: Vec<Violation>,
}

impl From<EmpiricalReport> for EmpiricalSummary {
    fn from(r: EmpiricalReport) -> Self {
        Self {
            passed: r.passed,
            jump_checks: r.jump_checks,
            flow_checks: r.flow_checks,
            max_jump_ratio: r.max_jump_ratio,
            violation_count: r.violations.len(),
            first_violations: r.violations.into_iter().take(10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormSummary {
    /// `cᵀx₀` with the block-eigenvector weights.
    pub block_value: f64,
    /// `cᵀx₀` with the leader-weighted block vectors.
    pub leader_weighted_value: f64,
    pub block_c: Vec<f64>,
    pub leader_weighted_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub agents: usize,
    pub horizon: f64,
    pub impulses: usize,
    pub mean_interval: Option<f64>,
    pub validation_failures: Vec<String>,
    pub consensus_value: Option<f64>,
    pub c: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub limit_factors: Option<usize>,
    pub terminal_mean: f64,
    /// `max_i |x_i(T) - consensus_value|`.
    pub terminal_deviation: Option<f64>,
    #[serde(rename = "spread_at_T")]
    pub spread_at_t: f64,
    pub consensus_achieved: bool,
    pub convergence_time: Option<f64>,
    /// Entrywise product bound at the mean interval.
    pub gamma: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub hinf: Option<HinfReport>,
    pub eta: Option<f64>,
    /// Decay rate fitted to `V(ψ)` on the disturbance-free run.
    pub eta_empirical: Option<f64>,
    pub certificate: Option<CertificateSummary>,
    pub closed_form: Option<ClosedFormSummary>,
    pub reference_value: Option<f64>,
}

pub struct RunOutput {
    pub summary: Summary,
    pub trajectory: HybridTrajectory,
    /// `(t, V)` on the main run when a certificate is present.
    pub lyapunov: Option<Vec<(f64, f64)>>,
}

impl RunOutput {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn trajectory_csv(&self) -> String {
        let mut buf = Vec::new();
        self.trajectory.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii csv")
    }

    pub fn svg(&self) -> String {
        let t = &self.trajectory;
        let series = (0..t.agents())
            .map(|i| svg::Series { label: format!("x{}", i + 1), points: t.samples.iter().map(|s| (s.time, s.state[i])).collect() })
            .collect();
        let mut panels = vec![svg::Panel { y_label: "state".into(), series, log_y: false }];
        if let Some(v) = &self.lyapunov {
            panels.push(svg::Panel { y_label: "V(t)".into(), series: vec![svg::Series { label: "V".into(), points: v.clone() }], log_y: true });
        }
        let title = self.summary.name.clone().unwrap_or_else(|| "trajectory".into());
        svg::render(&svg::Chart { title, x_label: "t".into(), panels })
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        let io = |path: PathBuf| move |e: std::io::Error| ScenarioError::Io { path, message: e.to_string() };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        for (file, body) in [("trajectory.csv", self.trajectory_csv()), ("summary.json", self.summary_json()), ("trajectory.svg", self.svg())] {
            let path = dir.join(file);
            fs::write(&path, body).map_err(io(path.clone()))?;
        }
        Ok(())
    }
}

fn validation_failures(network: &ClusteredNetwork) -> Vec<String> {
    graph::validate_network(network).failures().map(|c| format!("{}: {}", c.name, c.detail)).collect()
}

/// Runs the scenario and every applicable analysis without touching the filesystem.
pub fn evaluate(scenario: &Scenario, force: bool) -> Result<RunOutput> {
    let network = scenario.build_network()?;
    let failures = validation_failures(&network);
    if !failures.is_empty() && !force {
        return Err(ScenarioError::Validation(failures));
    }
    let schedule = scenario.build_schedule()?;
    let cert = scenario.build_certificate(&network, &schedule)?;
    let x0 = &scenario.x0;
    let opts = SimOptions { horizon: scenario.horizon, mode: scenario.mode, step: scenario.step, force };
    let w = &scenario.disturbance;
    let traj = sim::simulate(&network, x0, &schedule, w, &opts).map_err(runtime)?;
    info!("simulated {} samples, {} impulses", traj.samples.len(), traj.impulse_times.len());

    let prediction = predict_consensus(&network, &schedule, x0);
    let value = prediction.as_ref().and_then(|p| p.value);
    let final_state = traj.final_state();
    let terminal_mean = final_state.iter().sum::<f64>() / final_state.len() as f64;
    let spread_at_t = analysis::spread(final_state);
    let mean_interval = schedule.mean_interval();
    let gamma = match mean_interval {
        Some(t) => Some(analysis::check_product_bound(&network, t).map_err(runtime)?),
        None => None,
    };

    let hinf = if scenario.analyses.hinf && !w.is_zero() {
        let zero = vec![0.0; x0.len()];
        let companion = sim::simulate(&network, &zero, &schedule, w, &opts).map_err(runtime)?;
        Some(analysis::hinf_index(&companion, w, scenario.analyses.rho, scenario.horizon).map_err(runtime)?)
    } else {
        None
    };

    let mut lyapunov = None;
    let mut eta_empirical = None;
    let certificate = match (&cert, &prediction) {
        (Some((cert, distance, raw)), Some(pred)) => {
            let flow = certificate::check_lmi_flow(cert, &network).map_err(runtime)?;
            let jump = certificate::check_lmi_jump(cert, &network).map_err(runtime)?;
            let psi = analysis::disagreement(&traj, &pred.c, x0).map_err(runtime)?;
            lyapunov = Some(psi.samples.iter().map(|s| (s.time, cert.p().quadratic_form(&s.state))).collect());
            let free = if w.is_zero() {
                psi
            } else {
                let exact = SimOptions { mode: Mode::Exact, ..opts };
                let t = sim::simulate(&network, x0, &schedule, &DisturbanceSignal::Zero, &exact).map_err(runtime)?;
                analysis::disagreement(&t, &pred.c, x0).map_err(runtime)?
            };
            let trace = analysis::lyapunov_trace(&free, cert.p()).map_err(runtime)?;
            eta_empirical = analysis::decay_fit(&trace, 0.0).ok();
            let empirical = if scenario.analyses.empirical {
                let r = certificate::empirical_certificate_check(cert, &free, &DisturbanceSignal::Zero, scenario.analyses.empirical_stride)
                    .map_err(runtime)?;
                Some(r.into())
            } else {
                None
            };
            Some(CertificateSummary {
                projected: scenario.certificate.as_ref().is_some_and(|c| c.project_structure),
                projection_distance: *distance,
                unprojected_error: raw.clone(),
                p: cert.p().clone(),
                flow,
                jump,
                eta: cert.eta(),
                empirical,
            })
        }
        (Some(_), None) => {
            warn!("certificate checks skipped: no consensus prediction");
            None
        }
        _ => None,
    };

    let closed_form = match &scenario.network.inter {
        InterSpec::PL(p_l) if scenario.analyses.closed_form => match analysis::predict_consensus_closed_form(&network, p_l, x0) {
            Ok(cf) => Some(ClosedFormSummary {
                block_value: cf.value,
                leader_weighted_value: cf.leader_weighted_value,
                block_c: cf.c,
                leader_weighted_c: cf.leader_weighted_c,
            }),
            Err(e) => {
                warn!("closed-form prediction skipped: {e}");
                None
            }
        },
        _ => None,
    };

    let summary = Summary {
        name: scenario.name.clone(),
        agents: x0.len(),
        horizon: scenario.horizon,
        impulses: traj.impulse_times.len(),
        mean_interval,
        validation_failures: failures,
        consensus_value: value,
        c: prediction.as_ref().map(|p| p.c.clone()),
        residual: prediction.as_ref().map(|p| p.residual),
        limit_factors: prediction.as_ref().map(|p| p.k_used),
        terminal_mean,
        terminal_deviation: value.map(|v| final_state.iter().map(|x| (x - v).abs()).fold(0.0, f64::max)),
        spread_at_t,
        consensus_achieved: spread_at_t < CONSENSUS_TOL,
        convergence_time: analysis::convergence_time(&traj, CONSENSUS_TOL),
        gamma,
        j: hinf.as_ref().map(|h| h.j),
        hinf,
        eta: cert.as_ref().map(|(c, _, _)| c.eta()),
        eta_empirical,
        certificate,
        closed_form,
        reference_value: scenario.reference_value,
    };
    Ok(RunOutput { summary, trajectory: traj, lyapunov })
}

/// `run`: evaluates the scenario and writes `trajectory.csv`, `summary.json`
/// and `trajectory.svg` into `out_dir`.
pub fn run_scenario(source: &str, out_dir: &Path, force: bool) -> Result<Summary> {
    let scenario = Scenario::load(source)?;
    let out = evaluate(&scenario, force)?;
    out.write_artifacts(out_dir)?;
    Ok(out.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub consensus_value: Option<f64>,
    pub residual: Option<f64>,
    pub convergence_time: Option<f64>,
}

/// Re-runs the scenario with a uniform schedule for each `δ`, in parallel;
/// rows come back in input order.
pub fn sweep(scenario: &Scenario, deltas: &[f64], force: bool) -> Result<Vec<SweepRow>> {
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(invalid(format!("delta must be positive, got {d}")));
    }
    deltas
        .par_iter()
        .map(|&delta| {
            let mut s = scenario.clone();
            s.schedule = ScheduleSpec::Uniform { delta };
            s.analyses = Analyses { hinf: false, closed_form: false, empirical: false, ..s.analyses };
            s.certificate = None;
            let out = evaluate(&s, force)?;
            Ok(SweepRow {
                delta,
                consensus_value: out.summary.consensus_value,
                residual: out.summary.residual,
                convergence_time: out.summary.convergence_time,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map(sim::fmt_sig12).unwrap_or_default();
    let mut s = String::from("delta,consensus_value,residual,convergence_time\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", sim::fmt_sig12(r.delta), opt(r.consensus_value), opt(r.residual), opt(r.convergence_time)));
    }
    s
}

pub struct VerifyReport {
    pub lines: Vec<String>,
    pub passed: bool,
}

fn describe(name: &str, r: &LmiReport) -> Vec<String> {
    let mark = if r.verdict.at_least_semidefinite() { "pass" } else { "FAIL" };
    let verdict = serde_json::to_value(r.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let eig: Vec<String> = r.eigenvalues.iter().map(|v| format!("{v:.6e}")).collect();
    vec![
        format!(
            "[{mark}] {name}: {verdict} (max eigenvalue {:.6e}, epsilon {:.3e}, near-zero {}, null alignment {:.3e})",
            r.max_eigenvalue, r.epsilon, r.near_zero_count, r.null_state_alignment
        ),
        format!("       eigenvalues: [{}]", eig.join(", ")),
        format!("       indicator forms: {:?}", r.indicator_forms.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>()),
    ]
}

/// `verify`: network hypotheses plus, with a certificate, the flow and jump reports.
pub fn verify(scenario: &Scenario) -> Result<VerifyReport> {
    let network = scenario.build_network()?;
    let schedule = scenario.build_schedule()?;
    let report = graph::validate_network(&network);
    let mut lines: Vec<String> =
        report.checks.iter().map(|c| format!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail)).collect();
    let mut passed = report.passed;
    if let Some((cert, distance, raw)) = scenario.build_certificate(&network, &schedule)? {
        if let Some(e) = raw {
            lines.push(format!("[note] certificate P as given: {e}; checking its cluster-structure projection (max change {distance:.3e})"));
        }
        let flow = certificate::check_lmi_flow(&cert, &network).map_err(runtime)?;
        let jump = certificate::check_lmi_jump(&cert, &network).map_err(runtime)?;
        lines.extend(describe("flow LMI", &flow));
        lines.extend(describe("jump LMI (P_e' P P_e - beta P)", &jump.quadratic));
        match &jump.block {
            Some(b) => lines.extend(describe("jump LMI (block form)", b)),
            None => lines.push("[note] jump LMI block form skipped: P is singular".into()),
        }
        lines.push(format!("[info] eta = alpha - ln(beta)/T_avg = {:.6}", cert.eta()));
        passed &= flow.verdict.at_least_semidefinite() && jump.quadratic.verdict.at_least_semidefinite();
    }
    Ok(VerifyReport { lines, passed })
}
