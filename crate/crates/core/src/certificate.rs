//! Robust H∞ certificates `(P, α, ρ, β)` and their checks.
//!
//! The flow condition is the block matrix
//! `[[-P L - Lᵀ P + α P, P], [P, -ρ² I]] ≺ 0` and the jump condition is
//! `P_eᵀ P P_e - β P ≺ 0`, with the Schur-complement block form
//! `[[-β P, P_eᵀ], [P_e, -P⁻¹]] ≺ 0` as a cross-check when `P` is invertible.
//!
//! On consensus directions (cluster indicators) a certificate with per-cluster
//! zero row sums makes both matrices exactly singular, so reports carry a
//! third verdict between strict and fail for that structured null space.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ClusterPartition, ClusteredNetwork};
use crate::linalg::{self, LinalgError, Matrix};
use crate::sim::{DisturbanceSignal, HybridTrajectory, Tag};

/// Relative eigenvalue threshold: `ε = EPS_REL · ‖M‖∞`.
pub const EPS_REL: f64 = 1e-8;
/// Largest accepted residual of near-null state parts off the cluster-indicator span.
pub const ALIGNMENT_TOL: f64 = 1e-6;
/// Absolute slack for trajectory-level inequality checks.
pub const EMPIRICAL_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("P is {rows}x{cols}, expected {n}x{n}")]
    Shape { rows: usize, cols: usize, n: usize },
    #[error("P is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("P is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("P is zero")]
    ZeroMatrix,
    #[error("{name} = {value} is out of range")]
    Range { name: &'static str, value: f64 },
    #[error("stride {stride} does not fit the sample grid")]
    Stride { stride: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, CertificateError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    p: Matrix,
    alpha: f64,
    rho: f64,
    beta: f64,
    n0: u32,
    t_avg: f64,
}

impl Certificate {
    pub fn new(p: Matrix, alpha: f64, rho: f64, beta: f64, n0: u32, t_avg: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(CertificateError::Shape { rows: p.rows(), cols: p.cols(), n: p.rows() });
        }
        let asym = p.asymmetry();
        if asym > 1e-10 {
            return Err(CertificateError::NotSymmetric(asym));
        }
        if p.max_abs() == 0.0 {
            return Err(CertificateError::ZeroMatrix);
        }
        let min_eig = linalg::sym_eig(&p)?.min();
        if min_eig < -1e-9 * p.norm_inf() {
            return Err(CertificateError::NotPsd(min_eig));
        }
        for (name, value) in [("alpha", alpha), ("rho", rho), ("t_avg", t_avg)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(CertificateError::Range { name, value });
            }
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(CertificateError::Range { name: "beta", value: beta });
        }
        if n0 == 0 {
            return Err(CertificateError::Range { name: "n0", value: 0.0 });
        }
        Ok(Self { p: p.symmetrized(), alpha, rho, beta, n0, t_avg })
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n0(&self) -> u32 {
        self.n0
    }

    pub fn t_avg(&self) -> f64 {
        self.t_avg
    }

    pub fn eta(&self) -> f64 {
        convergence_rate(self)
    }
}

/// `η = α - ln(β) / T_avg`.
pub fn convergence_rate(cert: &Certificate) -> f64 {
    cert.alpha - cert.beta.ln() / cert.t_avg
}

/// Orthogonal projection of a symmetric matrix onto block-diagonal matrices
/// whose cluster blocks are symmetric with zero row sums: each block becomes
/// `Π_τ P_ττ Π_τ` with `Π_τ = I - 11ᵀ/n_τ`; cross-cluster entries vanish.
pub fn project_cluster_structure(p: &Matrix, partition: &ClusterPartition) -> Matrix {
    let n = partition.node_count();
    let sym = p.symmetrized();
    let mut out = Matrix::zeros(n, n);
    for members in partition.clusters() {
        let k = members.len();
        let block: Vec<Vec<f64>> = members.iter().map(|&i| members.iter().map(|&j| sym[(i, j)]).collect()).collect();
        let row_mean: Vec<f64> = block.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
        let col_mean: Vec<f64> = (0..k).map(|j| block.iter().map(|r| r[j]).sum::<f64>() / k as f64).collect();
        let total = row_mean.iter().sum::<f64>() / k as f64;
        for (a, &i) in members.iter().enumerate() {
            for (b, &j) in members.iter().enumerate() {
                out[(i, j)] = block[a][b] - row_mean[a] - col_mean[b] + total;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Fail,
    SemidefiniteWithStructuredNull,
    Strict,
}

impl Verdict {
    pub fn at_least_semidefinite(self) -> bool {
        self >= Verdict::SemidefiniteWithStructuredNull
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmiReport {
    pub max_eigenvalue: f64,
    pub near_zero_count: usize,
    pub null_state_alignment: f64,
    pub verdict: Verdict,
    pub norm: f64,
    pub epsilon: f64,
    pub eigenvalues: Vec<f64>,
    /// Rayleigh quotients of the matrix at each cluster indicator (state part).
    pub indicator_forms: Vec<f64>,
}

fn indicator_residual(state: &[f64], partition: &ClusterPartition) -> f64 {
    let mut sq = 0.0;
    for members in partition.clusters() {
        let mean = members.iter().map(|&i| state[i]).sum::<f64>() / members.len() as f64;
        sq += members.iter().map(|&i| (state[i] - mean).powi(2)).sum::<f64>();
    }
    sq.sqrt()
}

/// Spectral report of a symmetric LMI matrix whose first `N` coordinates are
/// the agent states.
pub fn assess(matrix: &Matrix, partition: &ClusterPartition) -> Result<LmiReport> {
    let n = partition.node_count();
    let eig = linalg::sym_eig(matrix)?;
    let norm = matrix.norm_inf();
    let epsilon = EPS_REL * norm;
    let max_eigenvalue = eig.max();
    let mut near_zero_count = 0;
    let mut null_state_alignment: f64 = 0.0;
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda.abs() <= epsilon {
            near_zero_count += 1;
            let v = eig.vector(k);
            null_state_alignment = null_state_alignment.max(indicator_residual(&v[..n], partition));
        }
    }
    let verdict = if max_eigenvalue < -epsilon {
        Verdict::Strict
    } else if max_eigenvalue <= epsilon && near_zero_count <= partition.cluster_count() && null_state_alignment <= ALIGNMENT_TOL {
        Verdict::SemidefiniteWithStructuredNull
    } else {
        Verdict::Fail
    };
    let indicator_forms = (0..partition.cluster_count())
        .map(|c| {
            let mut v = vec![0.0; matrix.rows()];
            v[..n].copy_from_slice(&partition.indicator(c));
            matrix.quadratic_form(&v) / linalg::dot(&v, &v)
        })
        .collect();
    Ok(LmiReport { max_eigenvalue, near_zero_count, null_state_alignment, verdict, norm, epsilon, eigenvalues: eig.values, indicator_forms })
}

/// `[[-P L - Lᵀ P + α P, P], [P, -ρ² I]]`.
pub fn flow_matrix(p: &Matrix, laplacian: &Matrix, alpha: f64, rho: f64) -> Matrix {
    let n = p.rows();
    let pl = p.matmul(laplacian);
    let top_left = pl.add(&pl.transpose()).scale(-1.0).add(&p.scale(alpha));
    Matrix::block2x2(&top_left, p, p, &Matrix::identity(n).scale(-rho * rho))
}

/// `P_eᵀ P P_e - β P`.
pub fn jump_matrix(p: &Matrix, p_e: &Matrix, beta: f64) -> Matrix {
    p_e.transpose().matmul(p).matmul(p_e).sub(&p.scale(beta)).symmetrized()
}

/// `[[-β P, P_eᵀ], [P_e, -P⁻¹]]`, or `None` when `P` is singular.
pub fn jump_block_matrix(p: &Matrix, p_e: &Matrix, beta: f64) -> Option<Matrix> {
    let inv = linalg::inverse(p).ok()?.symmetrized();
    Some(Matrix::block2x2(&p.scale(-beta), &p_e.transpose(), p_e, &inv.scale(-1.0)))
}

pub fn check_lmi_flow(cert: &Certificate, network: &ClusteredNetwork) -> Result<LmiReport> {
    let n = network.node_count();
    if cert.p.rows() != n {
        return Err(CertificateError::Shape { rows: cert.p.rows(), cols: cert.p.cols(), n });
    }
    assess(&flow_matrix(&cert.p, network.laplacian(), cert.alpha, cert.rho), network.partition())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpLmiReport {
    /// `P_eᵀ P P_e - β P` form (normative).
    pub quadratic: LmiReport,
    /// Block form; absent when `P` is singular.
    pub block: Option<LmiReport>,
    /// Whether both forms reach the same verdict; absent when the block form is.
    pub agreement: Option<bool>,
}

/// Both jump forms for an arbitrary jump matrix.
pub fn jump_lmi_forms(p: &Matrix, p_e: &Matrix, beta: f64, partition: &ClusterPartition) -> Result<JumpLmiReport> {
    let quadratic = assess(&jump_matrix(p, p_e, beta), partition)?;
    let block = match jump_block_matrix(p, p_e, beta) {
        Some(m) => Some(assess(&m, partition)?),
        None => None,
    };
    let agreement = block.as_ref().map(|b| b.verdict == quadratic.verdict);
    Ok(JumpLmiReport { quadratic, block, agreement })
}

pub fn check_lmi_jump(cert: &Certificate, network: &ClusteredNetwork) -> Result<JumpLmiReport> {
    let n = network.node_count();
    if cert.p.rows() != n {
        return Err(CertificateError::Shape { rows: cert.p.rows(), cols: cert.p.cols(), n });
    }
    jump_lmi_forms(&cert.p, network.p_e(), cert.beta, network.partition())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Jump,
    Flow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub time: f64,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub jump_checks: usize,
    pub flow_checks: usize,
    /// Largest `V(t_k⁺) / V(t_k)` over impulses with `V(t_k) > 0`.
    pub max_jump_ratio: Option<f64>,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

/// Trajectory-level check of `V(t_k⁺) ≤ β V(t_k)` at impulses and of
/// `V̇ + αV + zᵀz - ρ² wᵀw < 0` on flow samples, with `V̇` from central
/// differences `stride` samples apart inside each flow segment.
pub fn empirical_certificate_check(
    cert: &Certificate,
    traj_psi: &HybridTrajectory,
    w: &DisturbanceSignal,
    stride: usize,
) -> Result<EmpiricalReport> {
    let n = traj_psi.agents();
    if cert.p.rows() != n {
        return Err(CertificateError::Shape { rows: cert.p.rows(), cols: cert.p.cols(), n });
    }
    let segments = traj_psi.segments();
    let longest = segments.iter().map(|r| r.len()).max().unwrap_or(0);
    if stride == 0 || 2 * stride >= longest {
        return Err(CertificateError::Stride { stride });
    }
    let v: Vec<f64> = traj_psi.samples.iter().map(|s| cert.p.quadratic_form(&s.state)).collect();
    let mut violations = Vec::new();
    let mut max_jump_ratio: Option<f64> = None;

    let pairs = traj_psi.jump_pairs();
    for &(pre, post) in &pairs {
        let excess = v[post] - cert.beta * v[pre];
        if v[pre] > 0.0 {
            let ratio = v[post] / v[pre];
            max_jump_ratio = Some(max_jump_ratio.map_or(ratio, |m| m.max(ratio)));
        }
        if excess > EMPIRICAL_SLACK {
            violations.push(Violation { time: traj_psi.samples[pre].time, kind: ViolationKind::Jump, magnitude: excess });
        }
    }

    let mut flow_checks = 0;
    let rho2 = cert.rho * cert.rho;
    for seg in &segments {
        if seg.len() <= 2 * stride {
            continue;
        }
        for i in seg.start + stride..seg.end - stride {
            let s = &traj_psi.samples[i];
            debug_assert!(s.tag == Tag::Flow);
            let (a, b) = (i - stride, i + stride);
            let vdot = (v[b] - v[a]) / (traj_psi.samples[b].time - traj_psi.samples[a].time);
            let zz = linalg::dot(&s.state, &s.state);
            let ww = w.energy_density(s.time, n);
            let lhs = vdot + cert.alpha * v[i] + zz - rho2 * ww;
            flow_checks += 1;
            if lhs > EMPIRICAL_SLACK {
                violations.push(Violation { time: s.time, kind: ViolationKind::Flow, magnitude: lhs });
            }
        }
    }
    Ok(EmpiricalReport { jump_checks: pairs.len(), flow_checks, max_jump_ratio, passed: violations.is_empty(), violations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub iterations: usize,
    pub seed: u64,
    /// Target margin for strict negativity off the structured null space.
    pub margin: f64,
    /// Lower bound on the eigenvalues of `P` off the structured null space.
    pub min_eigenvalue: f64,
    pub t_avg: f64,
    pub n0: u32,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { iterations: 300, seed: 0, margin: 1e-3, min_eigenvalue: 1e-2, t_avg: 0.5, n0: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    /// Present iff both the flow and the jump report reach at least the
    /// structured-null verdict.
    pub certificate: Option<Certificate>,
    /// Best structured `P` found, whether or not it certifies.
    pub best_p: Option<Matrix>,
    pub flow: Option<LmiReport>,
    pub jump: Option<LmiReport>,
    /// Penalty after each accepted step; nonincreasing.
    pub penalty_history: Vec<f64>,
}

/// Orthonormal basis (as columns) of the complement of the cluster-indicator span.
fn disagreement_basis(partition: &ClusterPartition) -> Matrix {
    let n = partition.node_count();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for members in partition.clusters() {
        // Helmert-style contrasts inside each cluster
        for k in 1..members.len() {
            let mut v = vec![0.0; n];
            let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
            for &i in &members[..k] {
                v[i] = scale;
            }
            v[members[k]] = -(k as f64) * scale;
            basis.push(v);
        }
    }
    let mut q = Matrix::zeros(n, basis.len());
    for (j, v) in basis.iter().enumerate() {
        for i in 0..n {
            q[(i, j)] = v[i];
        }
    }
    q
}

struct Penalty<'a> {
    laplacian: &'a Matrix,
    p_e: &'a Matrix,
    partition: &'a ClusterPartition,
    alpha: f64,
    rho: f64,
    beta: f64,
    margin: f64,
    min_eigenvalue: f64,
    q_state: Matrix,
    q_flow: Matrix,
}

impl Penalty<'_> {
    /// Penalty value and its structured subgradient.
    fn eval(&self, p: &Matrix) -> Result<(f64, Matrix)> {
        let n = p.rows();
        let mut total = 0.0;
        let mut grad = Matrix::zeros(n, n);

        let f = flow_matrix(p, self.laplacian, self.alpha, self.rho);
        let fc = self.q_flow.transpose().matmul(&f).matmul(&self.q_flow);
        let e = linalg::sym_eig(&fc)?;
        let top = e.max() + self.margin;
        if top > 0.0 {
            total += top;
            let u = self.q_flow.matvec(&e.vector(e.values.len() - 1));
            let (a, b) = u.split_at(n);
            let la = self.laplacian.matvec(a);
            for i in 0..n {
                for j in 0..n {
                    grad[(i, j)] += -(a[i] * la[j] + la[i] * a[j]) + self.alpha * a[i] * a[j] + (b[i] * a[j] + a[i] * b[j]);
                }
            }
        }

        let jm = jump_matrix(p, self.p_e, self.beta);
        let jc = self.q_state.transpose().matmul(&jm).matmul(&self.q_state);
        let add_jump_grad = |grad: &mut Matrix, u: &[f64]| {
            let pu = self.p_e.matvec(u);
            for i in 0..n {
                for j in 0..n {
                    grad[(i, j)] += pu[i] * pu[j] - self.beta * u[i] * u[j];
                }
            }
        };
        let e = linalg::sym_eig(&jc)?;
        let top = e.max() + self.margin;
        if top > 0.0 {
            total += top;
            add_jump_grad(&mut grad, &self.q_state.matvec(&e.vector(e.values.len() - 1)));
        }
        let e = linalg::sym_eig(&jm)?;
        if e.max() > 0.0 {
            total += e.max();
            add_jump_grad(&mut grad, &e.vector(n - 1));
        }

        let pc = self.q_state.transpose().matmul(p).matmul(&self.q_state);
        let e = linalg::sym_eig(&pc)?;
        let gap = self.min_eigenvalue - e.min();
        if gap > 0.0 {
            total += gap;
            let u = self.q_state.matvec(&e.vector(0));
            for i in 0..n {
                for j in 0..n {
                    grad[(i, j)] -= u[i] * u[j];
                }
            }
        }
        Ok((total, project_cluster_structure(&grad, self.partition)))
    }
}

/// Projected subgradient descent over symmetric `P` with per-cluster zero
/// row sums, on a hinge penalty of the largest eigenvalues of the flow and
/// jump matrices off the structured null space.
pub fn search_certificate(network: &ClusteredNetwork, alpha: f64, rho: f64, beta: f64, opts: &SearchOptions) -> Result<SearchOutcome> {
    let partition = network.partition();
    let n = network.node_count();
    let q_state = disagreement_basis(partition);
    if q_state.cols() == 0 {
        info!("certificate search: no disagreement directions, structured P is zero");
        return Ok(SearchOutcome { certificate: None, best_p: None, flow: None, jump: None, penalty_history: Vec::new() });
    }
    let q_flow = Matrix::block_diagonal(&[q_state.clone(), Matrix::identity(n)]);
    let pen = Penalty {
        laplacian: network.laplacian(),
        p_e: network.p_e(),
        partition,
        alpha,
        rho,
        beta,
        margin: opts.margin,
        min_eigenvalue: opts.min_eigenvalue,
        q_state: q_state.clone(),
        q_flow,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut noise = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            noise[(i, j)] = rng.gen_range(-1e-3..1e-3);
        }
    }
    let mut p = project_cluster_structure(&q_state.matmul(&q_state.transpose()).add(&noise), partition);
    let (mut value, mut grad) = pen.eval(&p)?;
    let mut history = vec![value];
    let mut step = 0.1;
    for _ in 0..opts.iterations {
        if value == 0.0 {
            break;
        }
        let gnorm = grad.max_abs();
        if gnorm == 0.0 {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let trial = p.sub(&grad.scale(step / gnorm));
            let (tv, tg) = pen.eval(&trial)?;
            if tv < value {
                p = trial;
                value = tv;
                grad = tg;
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        history.push(value);
    }

    let flow = assess(&flow_matrix(&p, network.laplacian(), alpha, rho), partition)?;
    let jump = assess(&jump_matrix(&p, network.p_e(), beta), partition)?;
    info!(
        "certificate search: penalty {:.3e} after {} steps, flow max eig {:.3e} ({:?}), jump max eig {:.3e} ({:?})",
        value,
        history.len() - 1,
        flow.max_eigenvalue,
        flow.verdict,
        jump.max_eigenvalue,
        jump.verdict
    );
    let certificate = if flow.verdict.at_least_semidefinite() && jump.verdict.at_least_semidefinite() {
        Certificate::new(p.clone(), alpha, rho, beta, opts.n0, opts.t_avg).ok()
    } else {
        None
    };
    Ok(SearchOutcome { certificate, best_p: Some(p), flow: Some(flow), jump: Some(jump), penalty_history: history })
}
