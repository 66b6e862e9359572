//! Monte Carlo reproduction of the analytic correlations.
//!
//! Two estimators run on the same event stream:
//!
//! * [`Estimator::SignedWeight`] evaluates, per event, the retained terms of
//!   each joint intensity product at the event's branch and sampled `cos² θ`.
//!   The four weights of an event sum to one but can be negative, so they are
//!   quasi-probabilities, not counts.
//! * [`Estimator::OutcomeSampling`] draws one detector per side from the
//!   phase-averaged joint law `P(np) = P(pn) = ½cos²Δ`, `P(nn) = P(pp) = ½sin²Δ`
//!   and tallies coincidence counts.
//!
//! Events are split over `n_partitions` independent streams; event `i` is
//! drawn from partition `i mod n_partitions`. Partition tallies are merged in
//! partition order, so results depend on `(seed, n_partitions)` only, never on
//! the number of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::PhaseMoments;
use crate::error::{ModelError, Result};
use crate::estimators::{joint_expansion, CorrelationEstimate, EstimateMethod, PortPair};
use crate::optics::{AnalyzerSetting, Port};
use crate::rng::RandomStream;
use crate::source::{sample_emission, Branch, EmissionEvent, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    SignedWeight,
    OutcomeSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_events: u64,
    pub seed: u64,
    pub n_partitions: u32,
    pub estimator: Estimator,
    pub settings: Vec<AnalyzerSetting>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_events == 0 {
            return Err(ModelError::InvalidConfig("n_events must be at least 1".into()));
        }
        if self.n_partitions == 0 {
            return Err(ModelError::InvalidConfig("n_partitions must be at least 1".into()));
        }
        if !self.n_events.is_multiple_of(u64::from(self.n_partitions)) {
            return Err(ModelError::InvalidConfig(format!(
                "n_events ({}) must be divisible by n_partitions ({})",
                self.n_events, self.n_partitions
            )));
        }
        if self.settings.is_empty() {
            return Err(ModelError::InvalidConfig("no analyzer settings given".into()));
        }
        Ok(())
    }
}

/// Coincidence and singles counts for one setting.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeTally {
    /// Indexed by [`PortPair::index`]: nn, np, pn, pp.
    pub coincidences: [u64; 4],
    /// Indexed by [`Port::index`].
    pub singles_a: [u64; 2],
    pub singles_b: [u64; 2],
    /// Events in which both ports of a side fired.
    pub same_side_a: u64,
    pub same_side_b: u64,
}

impl OutcomeTally {
    fn record(&mut self, a: Port, b: Port) {
        self.coincidences[PortPair::new(a, b).index()] += 1;
        self.singles_a[a.index()] += 1;
        self.singles_b[b.index()] += 1;
    }

    fn merge(&mut self, other: &OutcomeTally) {
        for k in 0..4 {
            self.coincidences[k] += other.coincidences[k];
        }
        for k in 0..2 {
            self.singles_a[k] += other.singles_a[k];
            self.singles_b[k] += other.singles_b[k];
        }
        self.same_side_a += other.same_side_a;
        self.same_side_b += other.same_side_b;
    }
}

/// Accumulated signed weights for one setting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightTally {
    /// Indexed by [`PortPair::index`].
    pub weight_sums: [f64; 4],
    pub weight_square_sums: [f64; 4],
    /// Sums of the per-event combination `w_nn + w_pp − w_np − w_pn`.
    pub combination_sum: f64,
    pub combination_square_sum: f64,
    /// Per-event singles weights, indexed by [`Port::index`].
    pub singles_a: [f64; 2],
    pub singles_b: [f64; 2],
    /// Largest `|Σ weights − 1|` over all events.
    pub max_weight_sum_error: f64,
}

impl WeightTally {
    fn record(&mut self, weights: &[f64; 4], singles_a: &[f64; 2], singles_b: &[f64; 2]) {
        let mut total = 0.0;
        let mut combination = 0.0;
        for (k, pair) in PortPair::ALL.iter().enumerate() {
            let w = weights[k];
            self.weight_sums[k] += w;
            self.weight_square_sums[k] += w * w;
            total += w;
            combination += pair.sign() * w;
        }
        let err = (total - 1.0).abs();
        debug_assert!(err <= 1e-12, "event weights sum to {total}");
        self.max_weight_sum_error = self.max_weight_sum_error.max(err);
        self.combination_sum += combination;
        self.combination_square_sum += combination * combination;
        for k in 0..2 {
            self.singles_a[k] += singles_a[k];
            self.singles_b[k] += singles_b[k];
        }
    }

    fn merge(&mut self, other: &WeightTally) {
        for k in 0..4 {
            self.weight_sums[k] += other.weight_sums[k];
            self.weight_square_sums[k] += other.weight_square_sums[k];
        }
        for k in 0..2 {
            self.singles_a[k] += other.singles_a[k];
            self.singles_b[k] += other.singles_b[k];
        }
        self.combination_sum += other.combination_sum;
        self.combination_square_sum += other.combination_square_sum;
        self.max_weight_sum_error = self.max_weight_sum_error.max(other.max_weight_sum_error);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum Tally {
    OutcomeSampling(OutcomeTally),
    SignedWeight(WeightTally),
}

impl Tally {
    fn empty(estimator: Estimator) -> Self {
        match estimator {
            Estimator::OutcomeSampling => Tally::OutcomeSampling(OutcomeTally::default()),
            Estimator::SignedWeight => Tally::SignedWeight(WeightTally::default()),
        }
    }

    fn merge(&mut self, other: &Tally) {
        match (self, other) {
            (Tally::OutcomeSampling(a), Tally::OutcomeSampling(b)) => a.merge(b),
            (Tally::SignedWeight(a), Tally::SignedWeight(b)) => a.merge(b),
            _ => unreachable!("tallies of one run share an estimator"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRecord {
    pub setting: AnalyzerSetting,
    pub n_events: u64,
    pub tally: Tally,
}

impl SettingRecord {
    /// Fraction of events registered at `(side, port)`.
    pub fn singles_rate(&self, side: Side, port: Port) -> f64 {
        let n = self.n_events as f64;
        match (&self.tally, side) {
            (Tally::OutcomeSampling(t), Side::A) => t.singles_a[port.index()] as f64 / n,
            (Tally::OutcomeSampling(t), Side::B) => t.singles_b[port.index()] as f64 / n,
            (Tally::SignedWeight(t), Side::A) => t.singles_a[port.index()] / n,
            (Tally::SignedWeight(t), Side::B) => t.singles_b[port.index()] / n,
        }
    }

    /// Empirical `⟨I_n I_p⟩` on one side. `None` for signed weights, which do
    /// not produce counts.
    pub fn same_side_rate(&self, side: Side) -> Option<f64> {
        match &self.tally {
            Tally::OutcomeSampling(t) => {
                let k = match side {
                    Side::A => t.same_side_a,
                    Side::B => t.same_side_b,
                };
                Some(k as f64 / self.n_events as f64)
            }
            Tally::SignedWeight(_) => None,
        }
    }

    pub fn joint_rate(&self, pair: PortPair) -> f64 {
        let n = self.n_events as f64;
        match &self.tally {
            Tally::OutcomeSampling(t) => t.coincidences[pair.index()] as f64 / n,
            Tally::SignedWeight(t) => t.weight_sums[pair.index()] / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub seed: u64,
    pub n_partitions: u32,
    pub n_events: u64,
    pub estimator: Estimator,
    pub settings: Vec<SettingRecord>,
}

impl CountsRecord {
    pub fn get(&self, setting: &AnalyzerSetting) -> Option<&SettingRecord> {
        self.settings.iter().find(|r| r.setting == *setting)
    }
}

/// Signed weights `[nn, np, pn, pp]` of one event: retained terms of each joint
/// product at the event's branch and relative phase.
pub fn signed_weight_event(event: &EmissionEvent, setting: &AnalyzerSetting) -> [f64; 4] {
    let moments = PhaseMoments::Sampled(event.relative_phase());
    PortPair::ALL.map(|pair| joint_expansion(pair, setting).branch_value(event.branch(), moments))
}

fn outcome_from_uniforms(p_opposite: f64, u_a: f64, u_b: f64) -> (Port, Port) {
    let a = if u_a < 0.5 { Port::N } else { Port::P };
    let b = if u_b < p_opposite { a.other() } else { a };
    (a, b)
}

/// Draws `(a, b)` in the ±1 convention from the phase-averaged joint law.
/// Side A is drawn first from a fair coin; side B lands on the opposite port
/// with probability `cos² Δ`.
pub fn sample_outcome_pair<R: Rng + ?Sized>(setting: &AnalyzerSetting, rng: &mut R) -> (i8, i8) {
    let p = opposite_probability(setting);
    let (a, b) = outcome_from_uniforms(p, rng.random(), rng.random());
    (a.outcome(), b.outcome())
}

fn opposite_probability(setting: &AnalyzerSetting) -> f64 {
    let c = setting.delta().cos();
    c * c
}

// Per-setting constants, precomputed from the term algebra.
struct Kernel {
    p_opposite: f64,
    // [branch][pair] -> (c0, c2): weight = c0 + c2 cos²θ
    weights: [[[f64; 2]; 4]; 2],
    // [branch][port] -> singles weight, per side
    singles_a: [[f64; 2]; 2],
    singles_b: [[f64; 2]; 2],
}

fn branch_index(b: Branch) -> usize {
    match b {
        Branch::Pair1H2V => 0,
        Branch::Pair1V2H => 1,
    }
}

impl Kernel {
    fn new(setting: &AnalyzerSetting) -> Self {
        use crate::algebra::Expansion;
        let mut weights = [[[0.0; 2]; 4]; 2];
        let mut singles_a = [[0.0; 2]; 2];
        let mut singles_b = [[0.0; 2]; 2];
        for branch in Branch::ALL {
            let bi = branch_index(branch);
            for pair in PortPair::ALL {
                let poly = joint_expansion(pair, setting).phase_polynomial(branch);
                weights[bi][pair.index()] = [poly[0], poly[2]];
            }
            for port in Port::ALL {
                let a = Expansion::port_intensity(Side::A, port, setting.theta1()).phase_polynomial(branch);
                let b = Expansion::port_intensity(Side::B, port, setting.theta2()).phase_polynomial(branch);
                singles_a[bi][port.index()] = a[0];
                singles_b[bi][port.index()] = b[0];
            }
        }
        Kernel {
            p_opposite: opposite_probability(setting),
            weights,
            singles_a,
            singles_b,
        }
    }

    fn event_weights(&self, branch: Branch, cos_sq: f64) -> [f64; 4] {
        let w = &self.weights[branch_index(branch)];
        [
            w[0][0] + w[0][1] * cos_sq,
            w[1][0] + w[1][1] * cos_sq,
            w[2][0] + w[2][1] * cos_sq,
            w[3][0] + w[3][1] * cos_sq,
        ]
    }
}

fn run_partition(config: &RunConfig, kernels: &[Kernel], partition: u32) -> Vec<Tally> {
    let mut rng = RandomStream::for_partition(config.seed, partition);
    let per_partition = config.n_events / u64::from(config.n_partitions);
    let mut tallies: Vec<Tally> = kernels.iter().map(|_| Tally::empty(config.estimator)).collect();
    for _ in 0..per_partition {
        // Fixed draw count per event: branch, phase, u_a, u_b.
        let event = sample_emission(&mut rng);
        let u_a: f64 = rng.random();
        let u_b: f64 = rng.random();
        let cos = event.relative_phase().cos();
        let cos_sq = cos * cos;
        let bi = branch_index(event.branch());
        for (kernel, tally) in kernels.iter().zip(tallies.iter_mut()) {
            match tally {
                Tally::OutcomeSampling(t) => {
                    let (a, b) = outcome_from_uniforms(kernel.p_opposite, u_a, u_b);
                    t.record(a, b);
                }
                Tally::SignedWeight(t) => {
                    let w = kernel.event_weights(event.branch(), cos_sq);
                    t.record(&w, &kernel.singles_a[bi], &kernel.singles_b[bi]);
                }
            }
        }
    }
    tallies
}

/// Runs every setting of `config` over the same event stream.
pub fn run_experiment(config: &RunConfig) -> Result<CountsRecord> {
    config.validate()?;
    let cells = (config.n_partitions as usize)
        .checked_mul(config.settings.len())
        .ok_or_else(|| ModelError::ResourceExhausted("partition x setting count overflows".into()))?;
    let mut probe: Vec<Tally> = Vec::new();
    probe
        .try_reserve_exact(cells)
        .map_err(|e| ModelError::ResourceExhausted(format!("cannot allocate {cells} tallies: {e}")))?;
    drop(probe);

    let kernels: Vec<Kernel> = config.settings.iter().map(Kernel::new).collect();
    let partials: Vec<Vec<Tally>> = (0..config.n_partitions)
        .into_par_iter()
        .map(|p| run_partition(config, &kernels, p))
        .collect();

    let mut merged: Vec<Tally> = config.settings.iter().map(|_| Tally::empty(config.estimator)).collect();
    for partial in &partials {
        for (m, t) in merged.iter_mut().zip(partial) {
            m.merge(t);
        }
    }

    Ok(CountsRecord {
        seed: config.seed,
        n_partitions: config.n_partitions,
        n_events: config.n_events,
        estimator: config.estimator,
        settings: config
            .settings
            .iter()
            .zip(merged)
            .map(|(setting, tally)| SettingRecord {
                setting: *setting,
                n_events: config.n_events,
                tally,
            })
            .collect(),
    })
}

/// Correlation estimate `E = ⟨ab⟩` for one setting of a record.
///
/// Outcome counts give `(N_nn + N_pp − N_np − N_pn)/N` with a binomial
/// standard error; the agreement fraction entering the error uses the Jeffreys
/// estimate `(k + ½)/(N + 1)`, so a finite run never reports zero error.
/// Signed weights give the mean per-event combination with its sample error.
pub fn empirical_correlation(record: &CountsRecord, setting: &AnalyzerSetting) -> Result<CorrelationEstimate> {
    let rec = record.get(setting).ok_or(ModelError::SettingNotFound {
        theta1: setting.theta1(),
        theta2: setting.theta2(),
    })?;
    Ok(setting_estimate(rec))
}

pub(crate) fn setting_estimate(rec: &SettingRecord) -> CorrelationEstimate {
    let n = rec.n_events as f64;
    let (value, std_error) = match &rec.tally {
        Tally::OutcomeSampling(t) => {
            let same = t.coincidences[PortPair::NN.index()] + t.coincidences[PortPair::PP.index()];
            let diff = t.coincidences[PortPair::NP.index()] + t.coincidences[PortPair::PN.index()];
            let value = (same as f64 - diff as f64) / n;
            let q = (same as f64 + 0.5) / (n + 1.0);
            (value, 2.0 * (q * (1.0 - q) / n).sqrt())
        }
        Tally::SignedWeight(t) => {
            let mean = t.combination_sum / n;
            let var = if rec.n_events > 1 {
                ((t.combination_square_sum - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / n).sqrt())
        }
    };
    CorrelationEstimate {
        value,
        std_error,
        n_events: rec.n_events,
        method: EstimateMethod::MonteCarlo,
    }
}
