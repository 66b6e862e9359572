//! CHSH analysis of ±1 outcome datasets.
//!
//! When the four columns a, a′, b, b′ coexist row by row, every row satisfies
//! `ab + ab′ + a′b − a′b′ = a(b + b′) + a′(b − b′) = ±2`, so the CHSH value of
//! any such dataset is at most 2 whatever produced it. Correlations taken from
//! four statistically independent runs carry no such constraint and reach
//! `2√2` under the Bell correlation.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};
use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::estimators::bell_correlation;
use crate::montecarlo::{
    empirical_correlation, run_experiment, sample_outcome_pair, Estimator, RunConfig,
};
use crate::optics::AnalyzerSetting;
use crate::rng::{derive_seed, RandomStream};

/// Column names of a CHSH dataset.
pub const CHSH_COLUMNS: [&str; 4] = ["a", "a'", "b", "b'"];

/// Bound of the CHSH value for datasets whose four columns share rows.
pub const SHARED_BOUND: f64 = 2.0;

/// CHSH value of the Bell correlation at optimal angles.
pub const QUANTUM_CHSH: f64 = 2.0 * SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SharedRun,
    IndependentPairs,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeColumn {
    pub name: String,
    pub values: Vec<i8>,
}

/// Named columns of ±1 outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDataset {
    columns: Vec<OutcomeColumn>,
    provenance: Provenance,
}

impl OutcomeDataset {
    pub fn new(columns: Vec<OutcomeColumn>, provenance: Provenance) -> Result<Self> {
        for col in &columns {
            if let Some((row, &v)) = col.values.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
                return Err(ModelError::NotPlusMinusOne {
                    column: col.name.clone(),
                    row,
                    value: i64::from(v),
                });
            }
        }
        if provenance != Provenance::IndependentPairs {
            if let Some(first) = columns.first() {
                for col in &columns[1..] {
                    if col.values.len() != first.values.len() {
                        return Err(ModelError::LengthMismatch {
                            left: first.values.len(),
                            right: col.values.len(),
                        });
                    }
                }
            }
        }
        Ok(OutcomeDataset {
            columns,
            provenance,
        })
    }

    pub fn column(&self, name: &str) -> Option<&[i8]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn columns(&self) -> &[OutcomeColumn] {
        &self.columns
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Number of rows (length of the first column).
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn chsh_columns(&self) -> Result<[&[i8]; 4]> {
        let get = |name: &str| {
            self.column(name)
                .ok_or_else(|| ModelError::MissingColumn(name.to_string()))
        };
        Ok([get("a")?, get("a'")?, get("b")?, get("b'")?])
    }
}

fn integer_product_sum(x: &[i8], y: &[i8]) -> Result<i64> {
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(ModelError::EmptyColumn);
    }
    Ok(x.iter().zip(y).map(|(&a, &b)| i64::from(a) * i64::from(b)).sum())
}

/// `(1/N) Σ xᵢ yᵢ`.
pub fn cross_correlation(x: &[i8], y: &[i8]) -> Result<f64> {
    Ok(integer_product_sum(x, y)? as f64 / x.len() as f64)
}

/// `ab + ab′ + a′b − a′b′` for one row.
pub fn row_combination(a: i8, a_prime: i8, b: i8, b_prime: i8) -> i32 {
    let (a, ap, b, bp) = (i32::from(a), i32::from(a_prime), i32::from(b), i32::from(b_prime));
    a * b + a * bp + ap * b - ap * bp
}

/// `|E(a,b) + E(a,b′) + E(a′,b) − E(a′,b′)|`.
pub fn chsh_value(e_ab: f64, e_abp: f64, e_apb: f64, e_apbp: f64) -> f64 {
    (e_ab + e_abp + e_apb - e_apbp).abs()
}

/// Analyzer angles for the two settings on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl ChshSettings {
    /// θ₁ ∈ {π/4, 0}, θ₂ ∈ {π/8, 3π/8}: the three combined pairs sit at
    /// |Δ| = π/8 and the subtracted pair (a′, b′) at 3π/8.
    pub fn standard() -> Self {
        ChshSettings {
            a: FRAC_PI_4,
            a_prime: 0.0,
            b: FRAC_PI_8,
            b_prime: 3.0 * FRAC_PI_8,
        }
    }

    /// Setting pairs in the order (a,b), (a,b′), (a′,b), (a′,b′).
    pub fn pairs(&self) -> Result<[AnalyzerSetting; 4]> {
        Ok([
            AnalyzerSetting::new(self.a, self.b)?,
            AnalyzerSetting::new(self.a, self.b_prime)?,
            AnalyzerSetting::new(self.a_prime, self.b)?,
            AnalyzerSetting::new(self.a_prime, self.b_prime)?,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundContext {
    /// Four columns sharing rows: the bound 2 holds identically.
    SharedData,
    /// Four independent runs: no shared-row bound; reference value 2√2.
    IndependentPairs,
}

impl BoundContext {
    pub fn reference(self) -> f64 {
        match self {
            BoundContext::SharedData => SHARED_BOUND,
            BoundContext::IndependentPairs => QUANTUM_CHSH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    /// Keyed `"a,b"`, `"a,b'"`, `"a',b"`, `"a',b'"`.
    pub correlations: BTreeMap<String, f64>,
    /// Standard errors of the correlations, when they are estimates.
    pub std_errors: Option<BTreeMap<String, f64>>,
    pub chsh_value: f64,
    pub context: BoundContext,
    pub bound: f64,
    pub bound_satisfied: bool,
}

const PAIR_KEYS: [&str; 4] = ["a,b", "a,b'", "a',b", "a',b'"];

fn report(values: [f64; 4], chsh: f64, errors: Option<[f64; 4]>, context: BoundContext) -> ChshReport {
    let correlations = PAIR_KEYS.iter().map(|k| k.to_string()).zip(values).collect();
    let std_errors = errors.map(|e| PAIR_KEYS.iter().map(|k| k.to_string()).zip(e).collect());
    ChshReport {
        correlations,
        std_errors,
        chsh_value: chsh,
        context,
        bound: context.reference(),
        bound_satisfied: chsh <= SHARED_BOUND,
    }
}

/// CHSH value of a dataset with columns a, a′, b, b′ sharing rows.
///
/// The value is formed from integer sums, `|Σ rows| / N` with `|Σ rows| ≤ 2N`,
/// so the floating-point result can never exceed 2.
pub fn chsh_from_shared(d: &OutcomeDataset) -> Result<ChshReport> {
    let [a, ap, b, bp] = d.chsh_columns()?;
    let sums = [
        integer_product_sum(a, b)?,
        integer_product_sum(a, bp)?,
        integer_product_sum(ap, b)?,
        integer_product_sum(ap, bp)?,
    ];
    let n = a.len() as f64;
    let total = (sums[0] + sums[1] + sums[2] - sums[3]).abs();
    Ok(report(
        sums.map(|s| s as f64 / n),
        total as f64 / n,
        None,
        BoundContext::SharedData,
    ))
}

/// CHSH value assembled from the analytic Bell correlation.
pub fn chsh_analytic(settings: &ChshSettings) -> Result<ChshReport> {
    let e = settings.pairs()?.map(|s| bell_correlation(&s));
    Ok(report(e, chsh_value(e[0], e[1], e[2], e[3]), None, BoundContext::IndependentPairs))
}

/// Runs a separate experiment for each of the four pairs, each with its own
/// seed derived from `seed`, and combines the four correlations.
pub fn chsh_from_independent(
    settings: &ChshSettings,
    n_per_pair: u64,
    seed: u64,
    n_partitions: u32,
    estimator: Estimator,
) -> Result<ChshReport> {
    let pairs = settings.pairs()?;
    let mut values = [0.0; 4];
    let mut errors = [0.0; 4];
    for (k, setting) in pairs.iter().enumerate() {
        let config = RunConfig {
            n_events: n_per_pair,
            seed: derive_seed(seed, k as u64),
            n_partitions,
            estimator,
            settings: vec![*setting],
        };
        let record = run_experiment(&config)?;
        let est = empirical_correlation(&record, setting)?;
        values[k] = est.value;
        errors[k] = est.std_error;
    }
    Ok(report(
        values,
        chsh_value(values[0], values[1], values[2], values[3]),
        Some(errors),
        BoundContext::IndependentPairs,
    ))
}

/// Simulated shared-row dataset: each row draws (a, b) jointly at the (a, b)
/// setting and (a′, b′) jointly at the (a′, b′) setting.
pub fn generate_shared_dataset(settings: &ChshSettings, n: usize, seed: u64) -> Result<OutcomeDataset> {
    let [ab, _, _, apbp] = settings.pairs()?;
    let mut rng = RandomStream::new(seed, 0);
    let mut cols: [Vec<i8>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    for _ in 0..n {
        let (a, b) = sample_outcome_pair(&ab, &mut rng);
        let (ap, bp) = sample_outcome_pair(&apbp, &mut rng);
        cols[0].push(a);
        cols[1].push(ap);
        cols[2].push(b);
        cols[3].push(bp);
    }
    let columns = CHSH_COLUMNS
        .iter()
        .zip(cols)
        .map(|(name, values)| OutcomeColumn {
            name: name.to_string(),
            values,
        })
        .collect();
    OutcomeDataset::new(columns, Provenance::SharedRun)
}

/// Outcome of an adversarial search for a shared dataset with large CHSH value.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub best_chsh: f64,
    pub best_dataset: OutcomeDataset,
    pub steps: usize,
}

/// Simulated annealing over single-entry flips of an `n_rows` × 4 ±1 table,
/// maximizing its shared-row CHSH value.
pub fn anneal_chsh(n_rows: usize, steps: usize, seed: u64) -> Result<AnnealOutcome> {
    if n_rows == 0 {
        return Err(ModelError::EmptyColumn);
    }
    let mut rng = RandomStream::new(seed, 1);
    let mut cols: [Vec<i8>; 4] =
        std::array::from_fn(|_| (0..n_rows).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect());
    // Row sums of ab + ab′ + a′b − a′b′.
    let mut total: i64 = (0..n_rows)
        .map(|i| i64::from(row_combination(cols[0][i], cols[1][i], cols[2][i], cols[3][i])))
        .sum();
    let mut best_total = total.abs();
    let mut best = cols.clone();

    let t_start = 2.0_f64;
    let t_end = 0.01_f64;
    for step in 0..steps {
        let frac = step as f64 / steps.max(1) as f64;
        let temperature = t_start * (t_end / t_start).powf(frac);
        let col = rng.random_range(0..4usize);
        let row = rng.random_range(0..n_rows);
        let before = i64::from(row_combination(cols[0][row], cols[1][row], cols[2][row], cols[3][row]));
        cols[col][row] = -cols[col][row];
        let after = i64::from(row_combination(cols[0][row], cols[1][row], cols[2][row], cols[3][row]));
        let candidate = total - before + after;
        let gain = (candidate.abs() - total.abs()) as f64;
        if gain >= 0.0 || rng.random::<f64>() < (gain / temperature).exp() {
            total = candidate;
            if total.abs() > best_total {
                best_total = total.abs();
                best = cols.clone();
            }
        } else {
            cols[col][row] = -cols[col][row];
        }
    }

    let columns = CHSH_COLUMNS
        .iter()
        .zip(best)
        .map(|(name, values)| OutcomeColumn {
            name: name.to_string(),
            values,
        })
        .collect();
    Ok(AnnealOutcome {
        best_chsh: best_total as f64 / n_rows as f64,
        best_dataset: OutcomeDataset::new(columns, Provenance::SharedRun)?,
        steps,
    })
}

fn canonical_column_name(raw: &str) -> String {
    match raw.trim() {
        "a_prime" | "ap" => "a'".to_string(),
        "b_prime" | "bp" => "b'".to_string(),
        other => other.to_string(),
    }
}

/// Reads a CSV dataset: a header row of column names, then rows of `1`, `+1`
/// or `-1`. Lines starting with `#` are ignored. Errors name the offending
/// line and column.
pub fn read_dataset_csv<R: Read>(reader: R) -> Result<OutcomeDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(&e, "header"))?
        .iter()
        .map(canonical_column_name)
        .collect();
    if headers.is_empty() || headers.iter().any(|h| h.is_empty()) {
        return Err(ModelError::Dataset {
            line: 1,
            column: "header".into(),
            message: "empty column name".into(),
        });
    }
    let mut values: Vec<Vec<i8>> = vec![Vec::new(); headers.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&e, "?"))?;
        let line = record.position().map_or(0, |p| p.line());
        for (k, field) in record.iter().enumerate() {
            let v = match field {
                "1" | "+1" => 1,
                "-1" => -1,
                other => {
                    return Err(ModelError::Dataset {
                        line,
                        column: headers[k].clone(),
                        message: format!("expected +1 or -1, found `{other}`"),
                    })
                }
            };
            values[k].push(v);
        }
    }
    let columns = headers
        .into_iter()
        .zip(values)
        .map(|(name, values)| OutcomeColumn { name, values })
        .collect();
    OutcomeDataset::new(columns, Provenance::External)
}

fn csv_error(e: &csv::Error, column: &str) -> ModelError {
    let line = e.position().map_or(0, |p| p.line());
    ModelError::Dataset {
        line,
        column: column.to_string(),
        message: e.to_string(),
    }
}
