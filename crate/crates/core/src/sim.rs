//! Impulsive hybrid integration: `ẋ = -L x + w(t)` between impulses and
//! `x(t_k⁺) = P_e x(t_k)` at impulses.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{validate_network, ClusteredNetwork};
use crate::linalg::{self, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("network fails validation: {0}")]
    InvalidNetwork(String),
    #[error("exact mode requires a zero disturbance")]
    DisturbanceInExactMode,
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("step {step} is not smaller than the shortest segment {segment}")]
    StepTooLarge { step: f64, segment: f64 },
    #[error("state has length {found}, network has {expected} agents")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Reset times `t_1 < t_2 < ...` after a start time `t_0`, with spacing
/// bounded in `[delta_min, delta_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSchedule {
    start: f64,
    times: Vec<f64>,
    delta_min: f64,
    delta_max: f64,
}

impl ImpulseSchedule {
    pub fn new(start: f64, times: Vec<f64>, delta_min: f64, delta_max: f64) -> Result<Self> {
        if !(delta_min > 0.0 && delta_min.is_finite()) {
            return Err(SimError::Schedule(format!("delta_min must be positive, got {delta_min}")));
        }
        if !(delta_max >= delta_min && delta_max.is_finite()) {
            return Err(SimError::Schedule(format!("delta_max {delta_max} below delta_min {delta_min}")));
        }
        let mut prev = start;
        // relative slack so that k * delta grids are accepted
        let slack = 1e-9 * delta_max;
        for (k, &t) in times.iter().enumerate() {
            let gap = t - prev;
            if !t.is_finite() || gap < delta_min - slack || gap > delta_max + slack {
                return Err(SimError::Schedule(format!(
                    "interval {} ending at t={t} has length {gap}, outside [{delta_min}, {delta_max}]",
                    k + 1
                )));
            }
            prev = t;
        }
        Ok(Self { start, times, delta_min, delta_max })
    }

    /// `t_k = t_0 + k δ` for every `t_k ≤ horizon`.
    pub fn uniform(delta: f64, horizon: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(SimError::Schedule(format!("delta must be positive, got {delta}")));
        }
        let count = (horizon / delta * (1.0 + 1e-12)).floor().max(0.0) as usize;
        let times = (1..=count).map(|k| k as f64 * delta).collect();
        Self::new(0.0, times, delta, delta)
    }

    /// Spacings drawn uniformly from `[delta_min, delta_max]`, reproducible from `seed`.
    pub fn random(delta_min: f64, delta_max: f64, seed: u64, horizon: f64) -> Result<Self> {
        if !(delta_min > 0.0) || delta_max < delta_min {
            return Err(SimError::Schedule(format!("invalid bounds [{delta_min}, {delta_max}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut times = Vec::new();
        let mut t = 0.0;
        loop {
            let d = if delta_max > delta_min { rng.gen_range(delta_min..=delta_max) } else { delta_min };
            t += d;
            if t > horizon {
                break;
            }
            times.push(t);
        }
        Self::new(0.0, times, delta_min, delta_max)
    }

    /// Explicit times; the bounds are the observed extreme spacings.
    pub fn explicit(times: Vec<f64>) -> Result<Self> {
        let mut prev = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &t in &times {
            lo = lo.min(t - prev);
            hi = hi.max(t - prev);
            prev = t;
        }
        if times.is_empty() {
            lo = 1.0;
            hi = 1.0;
        }
        Self::new(0.0, times, lo, hi)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn delta_min(&self) -> f64 {
        self.delta_min
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }

    /// Interval lengths `t_k - t_{k-1}`, starting with `t_1 - t_0`.
    pub fn intervals(&self) -> Vec<f64> {
        let mut prev = self.start;
        self.times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }

    pub fn mean_interval(&self) -> Option<f64> {
        let iv = self.intervals();
        (!iv.is_empty()).then(|| iv.iter().sum::<f64>() / iv.len() as f64)
    }
}

/// External disturbance `w(t)`, evaluated per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSignal {
    #[default]
    Zero,
    /// `amplitude · sin(omega · t + phase)` on every agent selected by `mask`
    /// (all agents when absent).
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<bool>>,
    },
    /// `inner` on `[start, end]`, zero elsewhere.
    Windowed { inner: Box<DisturbanceSignal>, start: f64, end: f64 },
}

impl DisturbanceSignal {
    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Sinusoid { amplitude, mask, .. } => {
                *amplitude == 0.0 || mask.as_ref().is_some_and(|m| m.iter().all(|b| !b))
            }
            Self::Windowed { inner, start, end } => inner.is_zero() || end <= start,
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match self {
            Self::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Self::Sinusoid { amplitude, omega, phase, mask } => {
                let v = amplitude * (omega * t + phase).sin();
                for (i, o) in out.iter_mut().enumerate() {
                    let on = mask.as_ref().is_none_or(|m| m.get(i).copied().unwrap_or(false));
                    *o = if on { v } else { 0.0 };
                }
            }
            Self::Windowed { inner, start, end } => {
                if t >= *start && t <= *end {
                    inner.eval_into(t, out);
                } else {
                    out.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
    }

    pub fn eval(&self, t: f64, agents: usize) -> Vec<f64> {
        let mut out = vec![0.0; agents];
        self.eval_into(t, &mut out);
        out
    }

    /// `wᵀ w` at time `t`.
    pub fn energy_density(&self, t: f64, agents: usize) -> f64 {
        let w = self.eval(t, agents);
        linalg::dot(&w, &w)
    }
}

/// `‖w‖_T = (∫_0^T wᵀw dt)^{1/2}` by composite Simpson quadrature with
/// spacing at most `step`.
pub fn disturbance_norm(w: &DisturbanceSignal, agents: usize, horizon: f64, step: f64) -> f64 {
    if w.is_zero() || horizon <= 0.0 {
        return 0.0;
    }
    let mut n = (horizon / step).ceil().max(2.0) as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let h = horizon / n as f64;
    let mut sum = w.energy_density(0.0, agents) + w.energy_density(horizon, agents);
    for k in 1..n {
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * w.energy_density(k as f64 * h, agents);
    }
    (sum * h / 3.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Flow,
    PreJump,
    PostJump,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Flow => "flow",
            Tag::PreJump => "pre_jump",
            Tag::PostJump => "post_jump",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub state: Vec<f64>,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub samples: Vec<Sample>,
    pub step: f64,
    /// True when the run was forced past a failing network validation.
    pub forced: bool,
    pub impulse_times: Vec<f64>,
}

impl HybridTrajectory {
    pub fn agents(&self) -> usize {
        self.samples.first().map_or(0, |s| s.state.len())
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are never empty")
    }

    pub fn final_state(&self) -> &[f64] {
        &self.last().state
    }

    pub fn end_time(&self) -> f64 {
        self.last().time
    }

    /// `(pre, post)` sample index pairs, one per impulse.
    pub fn jump_pairs(&self) -> Vec<(usize, usize)> {
        self.samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].tag == Tag::PreJump && w[1].tag == Tag::PostJump)
            .map(|(i, _)| (i, i + 1))
            .collect()
    }

    /// Flow segments as index ranges: each starts at the initial or a
    /// post-jump sample and ends at the next pre-jump sample (or the end).
    pub fn segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut begin = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if s.tag == Tag::PreJump {
                out.push(begin..i + 1);
                begin = i + 1;
            }
        }
        if begin < self.samples.len() {
            out.push(begin..self.samples.len());
        }
        out
    }

    /// Applies `f` to every state, keeping times and tags.
    pub fn map_states(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> HybridTrajectory {
        HybridTrajectory {
            samples: self.samples.iter().map(|s| Sample { time: s.time, state: f(&s.state), tag: s.tag }).collect(),
            step: self.step,
            forced: self.forced,
            impulse_times: self.impulse_times.clone(),
        }
    }

    /// CSV with header `t,tag,x1..xN` and 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t,tag")?;
        for i in 1..=self.agents() {
            write!(out, ",x{i}")?;
        }
        writeln!(out)?;
        for s in &self.samples {
            write!(out, "{},{}", fmt_sig12(s.time), s.tag.as_str())?;
            for v in &s.state {
                write!(out, ",{}", fmt_sig12(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn fmt_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Flow via `e^{-L(t - t_k)} x(t_k⁺)`; zero disturbance only.
    Exact,
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    pub mode: Mode,
    pub step: f64,
    pub force: bool,
}

impl SimOptions {
    pub fn new(horizon: f64, mode: Mode, step: f64) -> Self {
        Self { horizon, mode, step, force: false }
    }
}

/// `P_e x`.
pub fn apply_impulse(x: &[f64], network: &ClusteredNetwork) -> Result<Vec<f64>> {
    let n = network.node_count();
    if x.len() != n {
        return Err(SimError::DimensionMismatch { expected: n, found: x.len() });
    }
    Ok(network.p_e().matvec(x))
}

struct Flow<'a> {
    neg_l: Matrix,
    w: &'a DisturbanceSignal,
    mode: Mode,
    step: f64,
    cache: HashMap<u64, Matrix>,
    wbuf: Vec<f64>,
}

impl Flow<'_> {
    fn propagator(&mut self, dt: f64) -> Result<&Matrix> {
        let key = dt.to_bits();
        if !self.cache.contains_key(&key) {
            let e = linalg::mat_exp(&self.neg_l, dt)?;
            self.cache.insert(key, e);
        }
        Ok(&self.cache[&key])
    }

    fn rhs(&mut self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut dx = self.neg_l.matvec(x);
        self.w.eval_into(t, &mut self.wbuf);
        for (d, w) in dx.iter_mut().zip(&self.wbuf) {
            *d += w;
        }
        dx
    }

    fn rk4(&mut self, t0: f64, x: &[f64], t1: f64) -> Vec<f64> {
        let span = t1 - t0;
        let n_sub = ((span / self.step) - 1e-9).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;
        let mut x = x.to_vec();
        let mut t = t0;
        for k in 0..n_sub {
            let k1 = self.rhs(t, &x);
            let tmp: Vec<f64> = x.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = self.rhs(t + 0.5 * h, &tmp);
            let tmp: Vec<f64> = x.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = self.rhs(t + 0.5 * h, &tmp);
            let tmp: Vec<f64> = x.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = self.rhs(t + h, &tmp);
            for i in 0..x.len() {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t = if k + 1 == n_sub { t1 } else { t0 + (k + 1) as f64 * h };
        }
        x
    }

    /// State at `t` from the segment anchor `(t_a, x_a)`, or from the previous
    /// sample `(t_p, x_p)` in RK4 mode.
    fn advance(&mut self, anchor: (f64, &[f64]), prev: (f64, &[f64]), t: f64) -> Result<Vec<f64>> {
        match self.mode {
            Mode::Exact => Ok(linalg::mat_exp(&self.neg_l, t - anchor.0)?.matvec(anchor.1)),
            Mode::Rk4 => Ok(self.rk4(prev.0, prev.1, t)),
        }
    }
}

/// Integrates the hybrid system on `[0, horizon]`.
///
/// Samples lie on the uniform grid `i · step` plus a `pre_jump`/`post_jump`
/// pair at every impulse `t_k ≤ horizon`; an impulse that lands on a grid
/// point replaces that grid sample. The final sample is at `horizon`.
pub fn simulate(
    network: &ClusteredNetwork,
    x0: &[f64],
    schedule: &ImpulseSchedule,
    w: &DisturbanceSignal,
    opts: &SimOptions,
) -> Result<HybridTrajectory> {
    let n = network.node_count();
    if x0.len() != n {
        return Err(SimError::DimensionMismatch { expected: n, found: x0.len() });
    }
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(SimError::BadStep(opts.step));
    }
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(SimError::BadHorizon(opts.horizon));
    }
    if opts.mode == Mode::Exact && !w.is_zero() {
        return Err(SimError::DisturbanceInExactMode);
    }
    if !opts.force {
        let report = validate_network(network);
        if !report.passed {
            let failed: Vec<String> = report.failures().map(|c| format!("{} ({})", c.name, c.detail)).collect();
            return Err(SimError::InvalidNetwork(failed.join("; ")));
        }
    }
    let t0 = schedule.start();
    let horizon = opts.horizon;
    let tol = 1e-9 * opts.step;
    let impulses: Vec<f64> = schedule.times().iter().copied().filter(|&t| t <= horizon + tol).collect();
    let mut prev_t = t0;
    for &t in &impulses {
        if opts.step >= t - prev_t {
            return Err(SimError::StepTooLarge { step: opts.step, segment: t - prev_t });
        }
        prev_t = t;
    }

    let mut flow = Flow {
        neg_l: network.laplacian().scale(-1.0),
        w,
        mode: opts.mode,
        step: opts.step,
        cache: HashMap::new(),
        wbuf: vec![0.0; n],
    };

    let grid_count = ((horizon - t0) / opts.step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=grid_count).map(|i| t0 + i as f64 * opts.step).collect();
    if horizon - grid[grid.len() - 1] > tol {
        grid.push(horizon);
    }

    let mut samples = Vec::with_capacity(grid.len() + 2 * impulses.len());
    samples.push(Sample { time: t0, state: x0.to_vec(), tag: Tag::Flow });
    let mut anchor_t = t0;
    let mut anchor_x = x0.to_vec();
    let mut next_imp = 0;
    let mut gi = 1;
    loop {
        let g = grid.get(gi).copied();
        let imp = impulses.get(next_imp).copied();
        let (t, is_impulse) = match (g, imp) {
            (None, None) => break,
            (Some(g), None) => (g, false),
            (None, Some(i)) => (i, true),
            (Some(g), Some(i)) => {
                if i <= g + tol {
                    if (g - i).abs() <= tol {
                        gi += 1;
                    }
                    (i, true)
                } else {
                    (g, false)
                }
            }
        };
        let prev = samples.last().expect("nonempty");
        let (pt, px) = (prev.time, prev.state.clone());
        let x = if is_impulse && opts.mode == Mode::Exact {
            // whole segment in one cached propagator e^{-L δ_k}
            flow.propagator(t - anchor_t)?.matvec(&anchor_x)
        } else {
            flow.advance((anchor_t, &anchor_x), (pt, &px), t)?
        };
        if is_impulse {
            let post = network.p_e().matvec(&x);
            samples.push(Sample { time: t, state: x, tag: Tag::PreJump });
            samples.push(Sample { time: t, state: post.clone(), tag: Tag::PostJump });
            anchor_t = t;
            anchor_x = post;
            next_imp += 1;
        } else {
            samples.push(Sample { time: t, state: x, tag: Tag::Flow });
            gi += 1;
        }
    }
    Ok(HybridTrajectory { samples, step: opts.step, forced: opts.force, impulse_times: impulses })
}
