//! Consensus diagnostics.
//!
//! The product limit `lim Π_k = 1 cᵀ` of the per-interval transition
//! matrices `P_e e^{-L δ_i}` gives the predicted consensus value `cᵀ x₀`.
//! For leaders-only interaction the value also has closed forms built from
//! the stationary distribution of the leader matrix and the per-cluster left
//! null vectors. The remaining helpers evaluate disagreement trajectories:
//! the H∞ performance index, Lyapunov traces and an empirical decay rate.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{validate_network, ClusteredNetwork};
use crate::linalg::{self, LinalgError, Matrix};
use crate::sim::{DisturbanceSignal, HybridTrajectory, Tag};

/// Residual below which a product is reported as converged.
pub const DEFAULT_LIMIT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("network fails validation: {0}")]
    InvalidNetwork(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("horizon {horizon} exceeds trajectory end {end}")]
    HorizonExceedsTrajectory { horizon: f64, end: f64 },
    #[error("no positive samples left to fit")]
    EmptyFit,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Max minus min of a nonempty vector.
pub fn spread(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusPrediction {
    /// Mean row of the product.
    pub c: Vec<f64>,
    /// `cᵀ x₀` when an initial state was supplied.
    pub value: Option<f64>,
    pub k_used: usize,
    /// `‖Π_k - 1 cᵀ‖∞`.
    pub residual: f64,
    pub converged: bool,
}

fn require_valid(network: &ClusteredNetwork) -> Result<()> {
    let report = validate_network(network);
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        Err(AnalysisError::InvalidNetwork(failed.join(", ")))
    }
}

/// `Π = M_k ⋯ M_1` with `M_i = P_e e^{-L δ_i}`, newest factor on the left.
pub fn transition_product(network: &ClusteredNetwork, intervals: &[f64]) -> Result<Matrix> {
    let neg_l = network.laplacian().scale(-1.0);
    let mut cache: HashMap<u64, Matrix> = HashMap::new();
    let mut prod = Matrix::identity(network.node_count());
    for &d in intervals {
        let m = match cache.get(&d.to_bits()) {
            Some(m) => m,
            None => {
                let m = network.p_e().matmul(&linalg::mat_exp(&neg_l, d)?);
                cache.entry(d.to_bits()).or_insert(m)
            }
        };
        prod = m.matmul(&prod);
    }
    Ok(prod)
}

/// Product-limit consensus prediction over the intervals `δ_1..δ_k`.
///
/// Non-convergence is not an error: the prediction comes back with
/// `converged = false`.
pub fn limit_product(
    network: &ClusteredNetwork,
    intervals: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
) -> Result<ConsensusPrediction> {
    require_valid(network)?;
    if intervals.is_empty() {
        return Err(AnalysisError::Precondition("at least one interval is required".into()));
    }
    if let Some(&d) = intervals.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(AnalysisError::Precondition(format!("interval {d} is not positive")));
    }
    let n = network.node_count();
    if let Some(x) = x0 {
        if x.len() != n {
            return Err(AnalysisError::DimensionMismatch { expected: n, found: x.len() });
        }
    }
    let prod = transition_product(network, intervals)?;
    let mut c = vec![0.0; n];
    for i in 0..n {
        for (cj, v) in c.iter_mut().zip(prod.row(i)) {
            *cj += v / n as f64;
        }
    }
    let residual = (0..n)
        .map(|i| prod.row(i).iter().zip(&c).map(|(p, cj)| (p - cj).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(ConsensusPrediction {
        value: x0.map(|x| linalg::dot(&c, x)),
        c,
        k_used: intervals.len(),
        residual,
        converged: residual <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormPrediction {
    /// Stationary distribution of the leader matrix.
    pub phi: Vec<f64>,
    /// Per-cluster left null vectors placed in their cluster's columns (m x N).
    pub q: Matrix,
    /// `φᵀ Q / Σ φ`.
    pub c: Vec<f64>,
    pub value: f64,
    /// Weights `φ_τ / r_τ(l_τ)` on each cluster's null vector, normalized.
    /// This combination is invariant under both the flow and the
    /// leaders-only jump, so it equals the product-limit row.
    pub leader_weighted_c: Vec<f64>,
    pub leader_weighted_value: f64,
}

/// Closed-form consensus value for leaders-only interaction.
///
/// Returns the block reading `x* = φᵀ Q x₀ / Σ φ_τ`, where row `τ` of `Q`
/// carries cluster `τ`'s left null vector, and the leader-weighted variant.
pub fn predict_consensus_closed_form(network: &ClusteredNetwork, p_l: &Matrix, x0: &[f64]) -> Result<ClosedFormPrediction> {
    let part = network.partition();
    let n = network.node_count();
    if x0.len() != n {
        return Err(AnalysisError::DimensionMismatch { expected: n, found: x0.len() });
    }
    let embedded = linalg::embed_leader_matrix(p_l, part)?;
    if embedded.max_abs_diff(network.p_e()) > 1e-12 {
        return Err(AnalysisError::Precondition("jump matrix is not the leaders-only embedding of P_l".into()));
    }
    let phi = linalg::stationary_distribution(p_l)?;
    let m = part.cluster_count();
    let mut q = Matrix::zeros(m, n);
    let mut leader_weights = Vec::with_capacity(m);
    for tau in 0..m {
        let r = linalg::left_null_vector(&network.cluster_laplacian(tau))?;
        let mut leader_entry = 0.0;
        for (k, &node) in part.members(tau).iter().enumerate() {
            q[(tau, node)] = r[k];
            if node == part.leaders()[tau] {
                leader_entry = r[k];
            }
        }
        if leader_entry <= 0.0 {
            return Err(AnalysisError::Precondition(format!("leader of cluster {} has zero weight in its cluster", tau + 1)));
        }
        leader_weights.push(phi[tau] / leader_entry);
    }
    let phi_sum: f64 = phi.iter().sum();
    let c: Vec<f64> = q.vecmat(&phi).iter().map(|v| v / phi_sum).collect();
    let lw_sum: f64 = leader_weights.iter().sum();
    let lw: Vec<f64> = leader_weights.iter().map(|w| w / lw_sum).collect();
    let leader_weighted_c = q.vecmat(&lw);
    Ok(ClosedFormPrediction {
        value: linalg::dot(&c, x0),
        leader_weighted_value: linalg::dot(&leader_weighted_c, x0),
        phi,
        q,
        c,
        leader_weighted_c,
    })
}

/// `ψ = x - (cᵀ x₀) 1` on every sample.
pub fn disagreement(traj: &HybridTrajectory, c: &[f64], x0: &[f64]) -> Result<HybridTrajectory> {
    let n = traj.agents();
    if c.len() != n || x0.len() != n {
        return Err(AnalysisError::DimensionMismatch { expected: n, found: if c.len() != n { c.len() } else { x0.len() } });
    }
    let shift = linalg::dot(c, x0);
    Ok(traj.map_states(|x| x.iter().map(|v| v - shift).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HinfReport {
    #[serde(rename = "J")]
    pub j: f64,
    pub z_energy: f64,
    pub w_energy: f64,
    pub rho: f64,
    /// `z_energy / (ρ² w_energy)`; absent when the disturbance has no energy.
    pub ratio: Option<f64>,
}

/// `J = ∫_0^T (zᵀz - ρ² wᵀw) dt` with `z = ψ`, by the trapezoid rule on the
/// trajectory samples. Jumps carry no integral mass.
pub fn hinf_index(traj_z: &HybridTrajectory, w: &DisturbanceSignal, rho: f64, horizon: f64) -> Result<HinfReport> {
    let start = traj_z.samples.first().map_or(0.0, |s| s.time);
    hinf_index_window(traj_z, w, rho, start, horizon)
}

/// [`hinf_index`] restricted to `(from, to]`.
pub fn hinf_index_window(traj_z: &HybridTrajectory, w: &DisturbanceSignal, rho: f64, from: f64, to: f64) -> Result<HinfReport> {
    if !(rho > 0.0) {
        return Err(AnalysisError::Precondition(format!("rho must be positive, got {rho}")));
    }
    let end = traj_z.end_time();
    if to > end + 1e-12 * end.abs().max(1.0) {
        return Err(AnalysisError::HorizonExceedsTrajectory { horizon: to, end });
    }
    let n = traj_z.agents();
    let density = |s: &crate::sim::Sample| (linalg::dot(&s.state, &s.state), w.energy_density(s.time, n));
    let mut z_energy = 0.0;
    let mut w_energy = 0.0;
    for pair in traj_z.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let lo = a.time.max(from);
        let hi = b.time.min(to);
        if hi <= lo || b.time <= a.time {
            continue;
        }
        let (za, wa) = density(a);
        let (zb, wb) = density(b);
        let lerp = |fa: f64, fb: f64, t: f64| fa + (fb - fa) * (t - a.time) / (b.time - a.time);
        let h = hi - lo;
        z_energy += 0.5 * h * (lerp(za, zb, lo) + lerp(za, zb, hi));
        w_energy += 0.5 * h * (lerp(wa, wb, lo) + lerp(wa, wb, hi));
    }
    let rho2 = rho * rho;
    Ok(HinfReport {
        j: z_energy - rho2 * w_energy,
        z_energy,
        w_energy,
        rho,
        ratio: (w_energy > 0.0).then(|| z_energy / (rho2 * w_energy)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovPoint {
    pub time: f64,
    pub v: f64,
    pub tag: Tag,
}

/// `V = ψᵀ P ψ` at every sample.
pub fn lyapunov_trace(traj: &HybridTrajectory, p: &Matrix) -> Result<Vec<LyapunovPoint>> {
    let n = traj.agents();
    if p.rows() != n || p.cols() != n {
        return Err(AnalysisError::DimensionMismatch { expected: n, found: p.rows() });
    }
    Ok(traj.samples.iter().map(|s| LyapunovPoint { time: s.time, v: p.quadratic_form(&s.state), tag: s.tag }).collect())
}

/// Least-squares slope of `ln V` against `t` over flow samples with
/// `t ≥ t0`, negated so that decay is positive.
pub fn decay_fit(trace: &[LyapunovPoint], t0: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|p| p.tag == Tag::Flow && p.time >= t0 && p.v > 0.0)
        .map(|p| (p.time, p.v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(AnalysisError::EmptyFit);
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::EmptyFit);
    }
    Ok(-sxy / sxx)
}

/// Largest `γ` with `P_e e^{-Lt} ≥ γ (P_e + e^{-Lt})` entrywise.
pub fn check_product_bound(network: &ClusteredNetwork, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(AnalysisError::Precondition(format!("t must be positive, got {t}")));
    }
    let e = linalg::mat_exp(&network.laplacian().scale(-1.0), t)?;
    let prod = network.p_e().matmul(&e);
    let sum = network.p_e().add(&e);
    let n = network.node_count();
    let mut gamma = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if sum[(i, j)] > 1e-12 {
                gamma = gamma.min(prod[(i, j)] / sum[(i, j)]);
            }
        }
    }
    Ok(gamma)
}

/// Earliest sample time after which the spread stays below `tol`.
pub fn convergence_time(traj: &HybridTrajectory, tol: f64) -> Option<f64> {
    let mut candidate = None;
    for s in &traj.samples {
        if spread(&s.state) < tol {
            candidate.get_or_insert(s.time);
        } else {
            candidate = None;
        }
    }
    candidate
}
