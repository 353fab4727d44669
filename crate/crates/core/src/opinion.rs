//! Group choice as a nonlinear dynamical opinion process.
//!
//! Each agent carries a zero-sum opinion vector `z` over an ordered option
//! set and a scalar attention `u` that scales social influence. Opinions
//! integrate
//!
//! ```text
//! dz_i/dt = P0 F_i(z),
//! F_ij    = -d z_ij + u_i sum_l S( sum_k A_ik^jl z_kl ) + b_ij
//! ```
//!
//! and attention relaxes toward a Hill-saturated function of the squared
//! opinion magnitudes the agent can see (its own plus fresh neighbors).
//! Everything here is a pure function of value-passed state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered option labels. The order is the tie-break order used by
/// [`dominant_option`] and is fixed for a whole mission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionSet {
    labels: Vec<String>,
}

impl OptionSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "an option set needs at least 2 options, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidInput(format!("duplicate option label `{l}`")));
            }
        }
        Ok(OptionSet { labels })
    }

    /// The explore / exploit / migrate set of the bloom scenario.
    pub fn explore_exploit_migrate() -> Self {
        OptionSet {
            labels: vec!["explore".into(), "exploit".into(), "migrate".into()],
        }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionState {
    pub z: Vec<f64>,
    pub u: f64,
    /// Seconds since mission start.
    pub time: f64,
}

impl OpinionState {
    pub fn neutral(options: usize, u: f64) -> Self {
        OpinionState {
            z: vec![0.0; options],
            u,
            time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.iter().any(|v| !v.is_finite()) || !self.u.is_finite() || !self.time.is_finite() {
            return Err(Error::InvalidInput("opinion state has non-finite entries".into()));
        }
        if self.u < 0.0 {
            return Err(Error::InvalidInput(format!("negative attention {}", self.u)));
        }
        let sum: f64 = self.z.iter().sum();
        if sum.abs() > ZERO_SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("opinion vector is not zero-sum (sum {sum:e})")));
        }
        Ok(())
    }
}

pub const ZERO_SUM_TOLERANCE: f64 = 1e-9;

/// Bounded odd saturation with unit slope at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saturation {
    #[default]
    Tanh,
    ClippedLinear,
}

impl Saturation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Saturation::Tanh => x.tanh(),
            Saturation::ClippedLinear => x.clamp(-1.0, 1.0),
        }
    }
}

/// Homogeneous coupling tensor: every neighbor pair shares the same
/// inter-agent gains, and every agent the same intra-agent gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTensor {
    /// Intra-agent same-option gain `A_ii^jj`, one per option.
    pub alpha_self: Vec<f64>,
    /// Intra-agent different-option gain `A_ii^jl`; diagonal unused.
    pub gamma_self: Vec<Vec<f64>>,
    /// Inter-agent same-option gain `A_ik^jj`.
    pub a_same: Vec<f64>,
    /// Inter-agent different-option gain `A_ik^jl`; diagonal unused.
    pub a_diff: Vec<Vec<f64>>,
    /// Opinion resistance `d`.
    pub resistance: f64,
}

impl CouplingTensor {
    /// Explore/exploit compete, migrate cooperates with everything.
    pub fn bloom_default() -> Self {
        CouplingTensor {
            alpha_self: vec![0.2, 0.2, 0.2],
            gamma_self: vec![vec![0.0; 3]; 3],
            a_same: vec![0.1, 0.1, 0.3],
            a_diff: vec![
                vec![0.0, 0.3, -0.1],
                vec![0.3, 0.0, -0.1],
                vec![-0.1, -0.1, 0.0],
            ],
            resistance: 1.0,
        }
    }

    /// Uniform gains for `n` options.
    pub fn uniform(n: usize, alpha_self: f64, a_same: f64, a_diff: f64, resistance: f64) -> Self {
        let mut diff = vec![vec![a_diff; n]; n];
        for (j, row) in diff.iter_mut().enumerate() {
            row[j] = 0.0;
        }
        CouplingTensor {
            alpha_self: vec![alpha_self; n],
            gamma_self: vec![vec![0.0; n]; n],
            a_same: vec![a_same; n],
            a_diff: diff,
            resistance,
        }
    }

    pub fn options(&self) -> usize {
        self.alpha_self.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.options();
        if n < 2 {
            return Err(Error::InvalidInput("coupling needs at least 2 options".into()));
        }
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if self.a_same.len() != n || !square(&self.gamma_self) || !square(&self.a_diff) {
            return Err(Error::InvalidInput(format!(
                "coupling tensor dimensions disagree with {n} options"
            )));
        }
        if let Some(j) = self.alpha_self.iter().position(|&a| !(a >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "intra-agent same-option gain for option {j} must be >= 0"
            )));
        }
        if !(self.resistance > 0.0) || !self.resistance.is_finite() {
            return Err(Error::InvalidInput("resistance must be positive".into()));
        }
        let finite = self.a_same.iter().all(|v| v.is_finite())
            && self.gamma_self.iter().flatten().all(|v| v.is_finite())
            && self.a_diff.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("coupling tensor has non-finite entries".into()));
        }
        Ok(())
    }

    #[inline]
    fn intra(&self, j: usize, l: usize) -> f64 {
        if j == l {
            self.alpha_self[j]
        } else {
            self.gamma_self[j][l]
        }
    }

    #[inline]
    fn inter(&self, j: usize, l: usize) -> f64 {
        if j == l {
            self.a_same[j]
        } else {
            self.a_diff[j][l]
        }
    }
}

/// Attention dynamics parameters. The saturation is a Hill function
/// `u_min + (u_max - u_min) y^n / (h^n + y^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionParams {
    pub tau_u: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub hill_n: f64,
    pub hill_half: f64,
}

impl Default for AttentionParams {
    fn default() -> Self {
        AttentionParams {
            tau_u: 2.0,
            u_min: 0.0,
            u_max: 1.0,
            hill_n: 2.0,
            hill_half: 4.0,
        }
    }
}

impl AttentionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau_u > 0.0
            && self.u_min >= 0.0
            && self.u_max > self.u_min
            && self.hill_n >= 1.0
            && self.hill_half > 0.0
            && [self.tau_u, self.u_min, self.u_max, self.hill_n, self.hill_half]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid attention parameters {self:?}")))
        }
    }

    pub fn hill(&self, y: f64) -> f64 {
        let y = y.max(0.0);
        let yn = y.powf(self.hill_n);
        let hn = self.hill_half.powf(self.hill_n);
        if yn.is_infinite() {
            return self.u_max;
        }
        self.u_min + (self.u_max - self.u_min) * yn / (hn + yn)
    }
}

/// Per-option input bias `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionInput {
    pub b: Vec<f64>,
}

impl OpinionInput {
    pub fn zeros(options: usize) -> Self {
        OpinionInput { b: vec![0.0; options] }
    }
}

/// What an agent knows about one neighbor's opinion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborOpinionView {
    pub agent_id: usize,
    pub z: Vec<f64>,
    /// Attention is not carried on the wire, so this is usually `None`.
    pub u: Option<f64>,
    /// Seconds since the opinion was received.
    pub age: f64,
}

/// `P0 v = v - mean(v)`: projection onto the zero-sum subspace.
pub fn project_zero_sum(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("cannot project a non-finite vector".into()));
    }
    Ok(project_unchecked(v))
}

fn project_unchecked(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn check_dims(state: &OpinionState, b: &[f64], neighbors: &[NeighborOpinionView], n: usize) -> Result<()> {
    if state.z.len() != n || b.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected {n} options, got z of {} and b of {}",
            state.z.len(),
            b.len()
        )));
    }
    if let Some(v) = neighbors.iter().find(|v| v.z.len() != n) {
        return Err(Error::InvalidInput(format!(
            "neighbor {} reports {} options, expected {n}",
            v.agent_id,
            v.z.len()
        )));
    }
    Ok(())
}

/// Right-hand side `P0 F_i(z)` of the opinion dynamics at the given state.
pub fn opinion_drift(
    state: &OpinionState,
    input: &OpinionInput,
    neighbors: &[NeighborOpinionView],
    coupling: &CouplingTensor,
    saturation: Saturation,
) -> Result<Vec<f64>> {
    let n = coupling.options();
    check_dims(state, &input.b, neighbors, n)?;

    // Neighbor opinions only enter through their per-option sums.
    let mut social = vec![0.0; n];
    for view in neighbors {
        for (s, z) in social.iter_mut().zip(&view.z) {
            *s += z;
        }
    }

    let mut f = vec![0.0; n];
    for j in 0..n {
        let mut influence = 0.0;
        for l in 0..n {
            let arg = coupling.intra(j, l) * state.z[l] + coupling.inter(j, l) * social[l];
            influence += saturation.apply(arg);
        }
        f[j] = -coupling.resistance * state.z[j] + state.u * influence + input.b[j];
        if !f[j].is_finite() {
            return Err(Error::OpinionDiverged { option: j });
        }
    }
    Ok(project_unchecked(&f))
}

/// One forward-Euler step of the opinion dynamics. Attention is carried
/// through unchanged; see [`attention_step`].
pub fn opinion_step(
    state: &OpinionState,
    input: &OpinionInput,
    neighbors: &[NeighborOpinionView],
    coupling: &CouplingTensor,
    saturation: Saturation,
    dt: f64,
) -> Result<OpinionState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let drift = opinion_drift(state, input, neighbors, coupling, saturation)?;
    let mut z = Vec::with_capacity(drift.len());
    for (j, (zj, fj)) in state.z.iter().zip(&drift).enumerate() {
        let next = zj + dt * fj;
        if !next.is_finite() {
            return Err(Error::OpinionDiverged { option: j });
        }
        z.push(next);
    }
    Ok(OpinionState {
        z: project_unchecked(&z),
        u: state.u,
        time: state.time + dt,
    })
}

/// Mean squared opinion magnitude visible to an agent: the input of the
/// attention saturation.
pub fn attention_drive(state: &OpinionState, neighbors: &[NeighborOpinionView], include_self: bool) -> f64 {
    let n = state.z.len() as f64;
    let own: f64 = if include_self {
        state.z.iter().map(|z| z * z).sum()
    } else {
        0.0
    };
    let others: f64 = neighbors.iter().flat_map(|v| v.z.iter()).map(|z| z * z).sum();
    (own + others) / n
}

/// Time derivative of attention at the given state.
pub fn attention_rate(
    state: &OpinionState,
    neighbors: &[NeighborOpinionView],
    include_self: bool,
    params: &AttentionParams,
) -> f64 {
    (-state.u + params.hill(attention_drive(state, neighbors, include_self))) / params.tau_u
}

/// One forward-Euler step of the attention dynamics; opinions are carried
/// through unchanged. The result is floored at zero.
pub fn attention_step(
    state: &OpinionState,
    neighbors: &[NeighborOpinionView],
    include_self: bool,
    params: &AttentionParams,
    dt: f64,
) -> Result<OpinionState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    params.validate()?;
    let u = state.u + dt * attention_rate(state, neighbors, include_self, params);
    if !u.is_finite() {
        return Err(Error::AttentionDiverged { value: u });
    }
    Ok(OpinionState {
        z: state.z.clone(),
        u: u.max(0.0),
        time: state.time + dt,
    })
}

/// Everything the engine needs besides state and inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    pub coupling: CouplingTensor,
    pub saturation: Saturation,
    pub attention: AttentionParams,
    /// Include the agent's own opinion in the attention drive.
    pub attention_self_loop: bool,
    /// Euler sub-steps per engine tick.
    pub substeps: u32,
}

impl EngineParams {
    pub fn bloom_default() -> Self {
        EngineParams {
            coupling: CouplingTensor::bloom_default(),
            saturation: Saturation::Tanh,
            attention: AttentionParams::default(),
            attention_self_loop: true,
            substeps: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.coupling.validate()?;
        self.attention.validate()?;
        if self.substeps == 0 {
            return Err(Error::InvalidInput("substeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Advances opinion and attention jointly over one engine tick of length
/// `dt`, split into `params.substeps` Euler steps. Each sub-step evaluates
/// both right-hand sides at the same state. Neighbor views are held fixed
/// for the whole tick.
pub fn engine_tick(
    state: &OpinionState,
    input: &OpinionInput,
    neighbors: &[NeighborOpinionView],
    params: &EngineParams,
    dt: f64,
) -> Result<OpinionState> {
    let h = dt / f64::from(params.substeps.max(1));
    let mut current = state.clone();
    for _ in 0..params.substeps.max(1) {
        let z_next = opinion_step(&current, input, neighbors, &params.coupling, params.saturation, h)?;
        let u_next = attention_step(&current, neighbors, params.attention_self_loop, &params.attention, h)?;
        current = OpinionState {
            z: z_next.z,
            u: u_next.u,
            time: z_next.time,
        };
    }
    current.time = state.time + dt;
    Ok(current)
}

/// Index (0-based) of the lowest-ordered option attaining the maximum
/// opinion.
pub fn dominant_option(z: &[f64]) -> Result<usize> {
    if z.is_empty() {
        return Err(Error::InvalidInput("empty opinion vector".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite opinion vector".into()));
    }
    let mut best = 0;
    for (j, v) in z.iter().enumerate().skip(1) {
        if *v > z[best] {
            best = j;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairRegime {
    Cooperation,
    Competition,
    Neutral,
}

/// Sign of `A_ik^jj - A_ik^jl` for the homogeneous inter-agent gains.
pub fn classify_pair_regime(coupling: &CouplingTensor, j: usize, l: usize) -> Result<PairRegime> {
    let n = coupling.options();
    if j == l {
        return Err(Error::InvalidArgument(format!("pair regime needs two distinct options, got {j} twice")));
    }
    if j >= n || l >= n {
        return Err(Error::InvalidArgument(format!("option index out of range for {n} options")));
    }
    let diff = coupling.a_same[j] - coupling.a_diff[j][l];
    Ok(if diff > 0.0 {
        PairRegime::Cooperation
    } else if diff < 0.0 {
        PairRegime::Competition
    } else {
        PairRegime::Neutral
    })
}
