//! Subject-based data generation and Monte Carlo experiments.
//!
//! Each of `S` subjects makes `V^(s)` comparisons, i.i.d. across subjects.
//! Every comparison picks an unordered pair `(i, j)` with probability
//! `P_ij` and records a win for `i` with probability `σ(β*_i − β*_j)`.
//!
//! Replications draw from independent ChaCha streams keyed by
//! `(seed, level, replication)`, so results do not depend on how rayon
//! schedules them.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::inference::{self, InferenceError, Interval};
use crate::likelihood::sigmoid;
use crate::pairdata::{ComparisonData, PairDataError};
use crate::solver::{self, Constraint, FitOptions, SolverError};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid design: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Fit(#[from] SolverError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Data(#[from] PairDataError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(msg: impl Into<String>) -> SimulateError {
    SimulateError::InvalidSpec(msg.into())
}

/// Distribution of the number of comparisons a single subject makes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PerSubject {
    Fixed(u32),
    /// Poisson(λ) conditioned on at least one comparison.
    Poisson(f64),
    /// Uniform on the integers `low..=high`.
    Uniform(u32, u32),
}

impl PerSubject {
    fn validate(&self) -> Result<(), SimulateError> {
        match *self {
            PerSubject::Fixed(0) => Err(invalid("fixed comparison count must be positive")),
            PerSubject::Poisson(l) if !(l.is_finite() && l > 0.0) => Err(invalid("Poisson rate must be positive")),
            PerSubject::Uniform(a, b) if a == 0 || a > b => Err(invalid("uniform bounds need 1 <= low <= high")),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PerSubject::Fixed(k) => k as f64,
            PerSubject::Poisson(l) => l / (1.0 - (-l).exp()),
            PerSubject::Uniform(a, b) => (a as f64 + b as f64) / 2.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            PerSubject::Fixed(k) => k,
            PerSubject::Uniform(a, b) => rng.random_range(a..=b),
            PerSubject::Poisson(lambda) => {
                if lambda > 1.0 {
                    let dist = rand_distr::Poisson::new(lambda).expect("validated rate");
                    loop {
                        let k = dist.sample(rng) as u32;
                        if k >= 1 {
                            return k;
                        }
                    }
                }
                // Inversion on the zero-truncated pmf; rejection would waste
                // most draws for small λ.
                let p0 = (-lambda).exp();
                let u: f64 = rng.random::<f64>() * (1.0 - p0);
                let mut k = 1u32;
                let mut pk = p0 * lambda;
                let mut cdf = pk;
                while u > cdf && pk > 0.0 {
                    k += 1;
                    pk *= lambda / k as f64;
                    cdf += pk;
                }
                k
            }
        }
    }
}

/// Data-generating design with true scores `β*` and pair frequencies `P`.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub beta_star: DVector<f64>,
    /// Symmetric, zero diagonal, `Σ_{i<j} P_ij = 1`.
    pub pair_freq: DMatrix<f64>,
    pub subjects: usize,
    pub per_subject: PerSubject,
    pub seed: u64,
}

impl DesignSpec {
    pub fn new(
        beta_star: DVector<f64>,
        pair_freq: DMatrix<f64>,
        subjects: usize,
        per_subject: PerSubject,
        seed: u64,
    ) -> Result<Self, SimulateError> {
        let spec = Self {
            beta_star,
            pair_freq,
            subjects,
            per_subject,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Every unordered pair equally likely.
    pub fn uniform_pairs(
        beta_star: DVector<f64>,
        subjects: usize,
        per_subject: PerSubject,
        seed: u64,
    ) -> Result<Self, SimulateError> {
        let n = beta_star.len();
        if n < 2 {
            return Err(invalid("need at least two objects"));
        }
        Self::new(beta_star, uniform_pair_freq(n), subjects, per_subject, seed)
    }

    pub fn n(&self) -> usize {
        self.beta_star.len()
    }

    pub fn with_subjects(&self, subjects: usize) -> Self {
        Self {
            subjects,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        let n = self.n();
        if n < 2 {
            return Err(invalid("need at least two objects"));
        }
        if self.beta_star.iter().any(|b| !b.is_finite()) {
            return Err(invalid("true scores must be finite"));
        }
        if self.beta_star.sum().abs() > 1e-10 * (1.0 + self.beta_star.amax()) * n as f64 {
            return Err(invalid("true scores must sum to zero"));
        }
        let p = &self.pair_freq;
        if p.shape() != (n, n) {
            return Err(invalid(format!("pair frequency matrix must be {n}x{n}")));
        }
        let mut total = 0.0;
        for i in 0..n {
            if p[(i, i)] != 0.0 {
                return Err(invalid("pair frequency diagonal must be zero"));
            }
            for j in (i + 1)..n {
                let v = p[(i, j)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid("pair frequencies must be non-negative"));
                }
                if (v - p[(j, i)]).abs() > 1e-15 {
                    return Err(invalid("pair frequency matrix must be symmetric"));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("pair frequencies sum to {total} over unordered pairs, expected 1")));
        }
        if self.subjects == 0 {
            return Err(invalid("need at least one subject"));
        }
        self.per_subject.validate()
    }

    /// Expected Fisher information per comparison,
    /// `Σ_{i<j} P_ij σ(β*_i−β*_j) σ(β*_j−β*_i) (e_i−e_j)(e_i−e_j)ᵀ`.
    pub fn fisher_information(&self) -> DMatrix<f64> {
        let n = self.n();
        let b = &self.beta_star;
        let mut info = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let p = self.pair_freq[(i, j)];
                if p == 0.0 {
                    continue;
                }
                let c = p * sigmoid(b[i] - b[j]) * sigmoid(b[j] - b[i]);
                info[(i, i)] += c;
                info[(j, j)] += c;
                info[(i, j)] -= c;
                info[(j, i)] -= c;
            }
        }
        info
    }

    /// `I†(β*)`, the limiting covariance of `√V (β̂ − β*)`.
    pub fn limiting_covariance(&self) -> Result<DMatrix<f64>, SimulateError> {
        Ok(inference::pseudoinverse_known_kernel(&self.fisher_information())?)
    }
}

pub fn uniform_pair_freq(n: usize) -> DMatrix<f64> {
    let pairs = (n * (n - 1) / 2) as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / pairs })
}

/// `n` scores evenly spaced on `[low, high]`, then centred.
pub fn linear_scores(n: usize, low: f64, high: f64) -> DVector<f64> {
    let step = if n > 1 { (high - low) / (n - 1) as f64 } else { 0.0 };
    let mut b = DVector::from_fn(n, |i, _| low + step * i as f64);
    let mean = b.mean();
    b.add_scalar_mut(-mean);
    b
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn replication_stream(level: usize, replication: usize) -> u64 {
    ((level as u64) << 32) | replication as u64
}

/// Draws one pooled dataset from the design.
pub fn generate_dataset<R: Rng + ?Sized>(spec: &DesignSpec, rng: &mut R) -> Result<ComparisonData, SimulateError> {
    spec.validate()?;
    let n = spec.n();
    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    let mut win_prob = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = spec.pair_freq[(i, j)];
            if p > 0.0 {
                pairs.push((i, j));
                weights.push(p);
                win_prob.push(sigmoid(spec.beta_star[i] - spec.beta_star[j]));
            }
        }
    }
    let picker = WeightedIndex::new(&weights).map_err(|e| invalid(e.to_string()))?;

    let mut wins = vec![vec![0u64; n]; n];
    for _ in 0..spec.subjects {
        let k = spec.per_subject.sample(rng);
        for _ in 0..k {
            let idx = picker.sample(rng);
            let (i, j) = pairs[idx];
            if rng.random::<f64>() < win_prob[idx] {
                wins[i][j] += 1;
            } else {
                wins[j][i] += 1;
            }
        }
    }
    Ok(ComparisonData::from_unlabelled(wins)?)
}

/// `max_{i<j} |V_ij / V − P_ij|`.
pub fn pair_frequency_distance(data: &ComparisonData, pair_freq: &DMatrix<f64>) -> f64 {
    let n = data.n();
    let total = data.total_comparisons() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((data.comparisons(i, j) as f64 / total - pair_freq[(i, j)]).abs());
        }
    }
    worst
}

/// Outcome of one simulated replication.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationResult {
    pub subjects: usize,
    pub replication: usize,
    pub total_comparisons: u64,
    /// Sup-norm distance of `V/V_total` from `P`.
    pub freq_distance: f64,
    /// `None` when the data failed the connectivity condition.
    pub beta_hat: Option<Vec<f64>>,
    pub max_abs_error: Option<f64>,
    pub covered: Option<Vec<bool>>,
}

impl ReplicationResult {
    pub fn excluded(&self) -> bool {
        self.beta_hat.is_none()
    }
}

#[derive(Debug, Clone, Serialize)]
struct ReplicationRow {
    subjects: usize,
    replication: usize,
    excluded: bool,
    total_comparisons: u64,
    freq_distance: f64,
    max_abs_error: Option<f64>,
    beta_hat: String,
    covered: String,
}

impl From<&ReplicationResult> for ReplicationRow {
    fn from(r: &ReplicationResult) -> Self {
        let join = |v: Option<String>| v.unwrap_or_default();
        Self {
            subjects: r.subjects,
            replication: r.replication,
            excluded: r.excluded(),
            total_comparisons: r.total_comparisons,
            freq_distance: r.freq_distance,
            max_abs_error: r.max_abs_error,
            beta_hat: join(r.beta_hat.as_ref().map(|b| {
                b.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(";")
            })),
            covered: join(r.covered.as_ref().map(|c| {
                c.iter().map(|&x| if x { "1" } else { "0" }).collect::<Vec<_>>().join(";")
            })),
        }
    }
}

/// Writes one CSV row per replication, keyed by `(subjects, replication)`.
pub fn write_replications_csv<W: Write>(records: &[ReplicationResult], writer: W) -> Result<(), SimulateError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(ReplicationRow::from(r))?;
    }
    wtr.flush()?;
    Ok(())
}

fn fit_replication(
    spec: &DesignSpec,
    level: usize,
    replication: usize,
    opts: &FitOptions,
) -> Result<(ComparisonData, ReplicationResult, Option<solver::FitResult>), SimulateError> {
    let mut rng = stream_rng(spec.seed, replication_stream(level, replication));
    let data = generate_dataset(spec, &mut rng)?;
    let mut record = ReplicationResult {
        subjects: spec.subjects,
        replication,
        total_comparisons: data.total_comparisons(),
        freq_distance: pair_frequency_distance(&data, &spec.pair_freq),
        beta_hat: None,
        max_abs_error: None,
        covered: None,
    };
    let fit = match solver::fit_sum_constraint(&data, opts) {
        Ok(fit) => fit,
        Err(SolverError::NotConnected(_)) => return Ok((data, record, None)),
        Err(e) => return Err(e.into()),
    };
    let err = (&*fit.beta_hat - &spec.beta_star).amax();
    record.beta_hat = Some(fit.beta_hat.iter().copied().collect());
    record.max_abs_error = Some(err);
    Ok((data, record, Some(fit)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRow {
    pub subjects: usize,
    pub replications: usize,
    pub fitted: usize,
    pub excluded: usize,
    pub exclusion_rate: f64,
    pub mean_total_comparisons: f64,
    pub mean_error: f64,
    /// Monte Carlo standard error of `mean_error`.
    pub mean_error_se: f64,
    pub median_error: f64,
    pub q90_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyTable {
    pub rows: Vec<ConsistencyRow>,
    pub records: Vec<ReplicationResult>,
}

impl ConsistencyTable {
    /// Whether the mean error strictly decreases along the ladder.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_error < w[0].mean_error)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SimulateError> {
        let mut wtr = csv::Writer::from_writer(writer);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean `‖β̂ − β*‖∞` for each subject count in `ladder`, `replications` each.
///
/// Replications whose data fail the connectivity condition are excluded and
/// counted.
pub fn consistency_experiment(
    base: &DesignSpec,
    ladder: &[usize],
    replications: usize,
) -> Result<ConsistencyTable, SimulateError> {
    base.validate()?;
    if ladder.is_empty() || replications == 0 {
        return Err(invalid("need a non-empty ladder and at least one replication"));
    }
    let opts = FitOptions::default();
    let mut rows = Vec::with_capacity(ladder.len());
    let mut records = Vec::with_capacity(ladder.len() * replications);
    for (level, &subjects) in ladder.iter().enumerate() {
        let spec = base.with_subjects(subjects);
        spec.validate()?;
        let level_records: Vec<ReplicationResult> = (0..replications)
            .into_par_iter()
            .map(|r| fit_replication(&spec, level, r, &opts).map(|(_, rec, _)| rec))
            .collect::<Result<_, _>>()?;

        let mut errors: Vec<f64> = level_records.iter().filter_map(|r| r.max_abs_error).collect();
        errors.sort_by(f64::total_cmp);
        let fitted = errors.len();
        let mean = errors.iter().sum::<f64>() / fitted.max(1) as f64;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (fitted.max(2) - 1) as f64;
        rows.push(ConsistencyRow {
            subjects,
            replications,
            fitted,
            excluded: replications - fitted,
            exclusion_rate: (replications - fitted) as f64 / replications as f64,
            mean_total_comparisons: level_records.iter().map(|r| r.total_comparisons as f64).sum::<f64>()
                / replications as f64,
            mean_error: if fitted > 0 { mean } else { f64::NAN },
            mean_error_se: (var / fitted.max(1) as f64).sqrt(),
            median_error: quantile(&errors, 0.5),
            q90_error: quantile(&errors, 0.9),
        });
        records.extend(level_records);
    }
    Ok(ConsistencyTable { rows, records })
}

/// Sample skewness and excess kurtosis.
pub fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub subjects: usize,
    pub multiplier: f64,
    pub replications: usize,
    pub used: usize,
    pub excluded: usize,
    pub exclusion_rate: f64,
    pub per_object: Vec<f64>,
    pub aggregate: f64,
    pub mean_total_comparisons: f64,
    /// Skewness of `√V (β̂_i − β*_i) / √I†_ii` per object.
    pub skewness: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
    /// Empirical covariance of `β̂` scaled by the mean total comparisons.
    pub scaled_covariance: Vec<Vec<f64>>,
    pub limiting_covariance: Vec<Vec<f64>>,
    /// Monte Carlo standard error of each `scaled_covariance` entry.
    pub covariance_mc_se: Vec<Vec<f64>>,
    /// Largest `|scaled − limiting| / mc_se` over entries.
    pub max_covariance_z: f64,
    #[serde(skip)]
    pub records: Vec<ReplicationResult>,
}

impl CoverageReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SimulateError> {
        #[derive(Serialize)]
        struct Row {
            object: String,
            coverage: f64,
            skewness: f64,
            excess_kurtosis: f64,
        }
        let mut wtr = csv::Writer::from_writer(writer);
        for (i, &c) in self.per_object.iter().enumerate() {
            wtr.serialize(Row {
                object: (i + 1).to_string(),
                coverage: c,
                skewness: self.skewness[i],
                excess_kurtosis: self.excess_kurtosis[i],
            })?;
        }
        wtr.serialize(Row {
            object: "all".into(),
            coverage: self.aggregate,
            skewness: f64::NAN,
            excess_kurtosis: f64::NAN,
        })?;
        wtr.flush()?;
        Ok(())
    }
}

/// Fits each replication under the sum constraint, forms
/// `β̂_i ± multiplier · se_i` and records whether `β*_i` is covered.
pub fn coverage_experiment(
    spec: &DesignSpec,
    replications: usize,
    multiplier: f64,
) -> Result<CoverageReport, SimulateError> {
    spec.validate()?;
    if replications < 2 {
        return Err(invalid("need at least two replications"));
    }
    if !(multiplier.is_finite() && multiplier >= 0.0) {
        return Err(invalid("multiplier must be non-negative"));
    }
    let n = spec.n();
    let opts = FitOptions::default();
    let limiting = spec.limiting_covariance()?;

    let records: Vec<ReplicationResult> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<ReplicationResult, SimulateError> {
            let (data, mut rec, fit) = fit_replication(spec, 0, r, &opts)?;
            if let Some(fit) = fit {
                let var = inference::variance_sum_constraint(&fit, &data)?;
                let ci: Vec<Interval> = inference::confidence_intervals(&fit, &var, multiplier)?;
                rec.covered = Some(ci.iter().zip(spec.beta_star.iter()).map(|(c, &b)| c.contains(b)).collect());
            }
            Ok(rec)
        })
        .collect::<Result<_, _>>()?;

    let used: Vec<&ReplicationResult> = records.iter().filter(|r| !r.excluded()).collect();
    let m = used.len();
    if m < 2 {
        return Err(invalid("fewer than two replications satisfied the connectivity condition"));
    }
    let mut per_object = vec![0.0; n];
    for r in &used {
        for (i, &c) in r.covered.as_ref().expect("fitted replication").iter().enumerate() {
            if c {
                per_object[i] += 1.0;
            }
        }
    }
    per_object.iter_mut().for_each(|c| *c /= m as f64);
    let aggregate = per_object.iter().sum::<f64>() / n as f64;

    let mean_v = used.iter().map(|r| r.total_comparisons as f64).sum::<f64>() / m as f64;
    let betas: Vec<DVector<f64>> = used
        .iter()
        .map(|r| DVector::from_vec(r.beta_hat.clone().expect("fitted replication")))
        .collect();

    let mut skewness = Vec::with_capacity(n);
    let mut excess_kurtosis = Vec::with_capacity(n);
    for i in 0..n {
        let sd = limiting[(i, i)].sqrt();
        let z: Vec<f64> = used
            .iter()
            .zip(&betas)
            .map(|(r, b)| (r.total_comparisons as f64).sqrt() * (b[i] - spec.beta_star[i]) / sd)
            .collect();
        let (s, k) = moments(&z);
        skewness.push(s);
        excess_kurtosis.push(k);
    }

    let mean_beta = betas.iter().fold(DVector::zeros(n), |acc, b| acc + b) / m as f64;
    let devs: Vec<DVector<f64>> = betas.iter().map(|b| b - &mean_beta).collect();
    let mut scaled = DMatrix::zeros(n, n);
    let mut mc_se = DMatrix::zeros(n, n);
    let mut max_z: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let prods: Vec<f64> = devs.iter().map(|d| d[i] * d[j]).collect();
            let mean_prod = prods.iter().sum::<f64>() / m as f64;
            let cov = prods.iter().sum::<f64>() / (m - 1) as f64;
            let var_prod = prods.iter().map(|p| (p - mean_prod).powi(2)).sum::<f64>() / (m - 1) as f64;
            scaled[(i, j)] = mean_v * cov;
            mc_se[(i, j)] = mean_v * (var_prod / m as f64).sqrt();
            max_z = max_z.max((scaled[(i, j)] - limiting[(i, j)]).abs() / mc_se[(i, j)]);
        }
    }

    Ok(CoverageReport {
        subjects: spec.subjects,
        multiplier,
        replications,
        used: m,
        excluded: replications - m,
        exclusion_rate: (replications - m) as f64 / replications as f64,
        per_object,
        aggregate,
        mean_total_comparisons: mean_v,
        skewness,
        excess_kurtosis,
        scaled_covariance: matrix_rows(&scaled),
        limiting_covariance: matrix_rows(&limiting),
        covariance_mc_se: matrix_rows(&mc_se),
        max_covariance_z: max_z,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencyConvergence {
    pub small_subjects: usize,
    pub large_subjects: usize,
    pub small_distances: Vec<f64>,
    pub large_distances: Vec<f64>,
    /// Fraction of paired seeds where the large design is closer to `P`.
    pub fraction_closer: f64,
}

/// Compares `‖V/V − P‖∞` at two subject counts over `pairs` paired seeds:
/// pair `k` uses stream `k` of `base.seed` for both sizes.
pub fn frequency_convergence(
    base: &DesignSpec,
    small_subjects: usize,
    large_subjects: usize,
    pairs: usize,
) -> Result<FrequencyConvergence, SimulateError> {
    let small = base.with_subjects(small_subjects);
    let large = base.with_subjects(large_subjects);
    small.validate()?;
    large.validate()?;
    let distances: Vec<(f64, f64)> = (0..pairs)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64), SimulateError> {
            let ds = generate_dataset(&small, &mut stream_rng(base.seed, k as u64))?;
            let dl = generate_dataset(&large, &mut stream_rng(base.seed, k as u64))?;
            Ok((
                pair_frequency_distance(&ds, &base.pair_freq),
                pair_frequency_distance(&dl, &base.pair_freq),
            ))
        })
        .collect::<Result<_, _>>()?;
    let closer = distances.iter().filter(|(s, l)| l < s).count();
    Ok(FrequencyConvergence {
        small_subjects,
        large_subjects,
        small_distances: distances.iter().map(|d| d.0).collect(),
        large_distances: distances.iter().map(|d| d.1).collect(),
        fraction_closer: closer as f64 / pairs.max(1) as f64,
    })
}

/// Shape of the synthetic uncertainty-concentration example.
pub const DEMO_OBJECTS: usize = 21;
pub const DEMO_TOTAL_COMPARISONS: usize = 750;
pub const DEMO_RARE_COMPARISONS: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub labels: Vec<String>,
    pub rare: usize,
    pub rare_comparisons: u64,
    pub total_comparisons: u64,
    pub attempts: usize,
    pub sum_intervals: Vec<Interval>,
    pub sum_se: Vec<f64>,
    pub reference_intervals: Vec<Interval>,
    pub reference_se: Vec<f64>,
    pub sum_total_variance: f64,
    pub reference_total_variance: f64,
    /// Under the sum constraint the rare object has the largest SE.
    pub rare_has_max_sum_se: bool,
    pub reference_se_is_zero: bool,
    /// Every non-reference SE under the reference constraint exceeds its
    /// sum-constraint counterpart.
    pub reference_ses_exceed_sum: bool,
    pub reference_trace_exceeds_sum: bool,
    #[serde(skip)]
    pub data: Option<ComparisonData>,
}

/// Synthetic 21-object survey: 750 comparisons, of which the first object
/// (the reference) takes part in exactly 8 against uniformly drawn opponents;
/// the rest are spread uniformly over the other pairs. Outcomes follow
/// evenly spaced true scores with the rare object in the middle. Datasets are
/// redrawn until the win graph is strongly connected.
pub fn uncertainty_concentration_demo<R: Rng + ?Sized>(rng: &mut R) -> Result<DemoReport, SimulateError> {
    let n = DEMO_OBJECTS;
    let rare = 0usize;
    let spaced = linear_scores(n, -1.0, 1.0);
    // Middle value (zero) goes to the rare object.
    let mut beta_star = Vec::with_capacity(n);
    beta_star.push(spaced[n / 2]);
    beta_star.extend((0..n).filter(|&k| k != n / 2).map(|k| spaced[k]));
    let labels: Vec<String> = (1..=n).map(|i| format!("item{i:02}")).collect();

    let others: Vec<(usize, usize)> = (1..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let mut attempts = 0;
    let data = loop {
        attempts += 1;
        if attempts > 1000 {
            return Err(invalid("could not draw a strongly connected demo dataset"));
        }
        let mut wins = vec![vec![0u64; n]; n];
        let mut record = |i: usize, j: usize, rng: &mut R| {
            if rng.random::<f64>() < sigmoid(beta_star[i] - beta_star[j]) {
                wins[i][j] += 1;
            } else {
                wins[j][i] += 1;
            }
        };
        for _ in 0..DEMO_RARE_COMPARISONS {
            let opponent = rng.random_range(1..n);
            record(rare, opponent, rng);
        }
        for _ in 0..(DEMO_TOTAL_COMPARISONS - DEMO_RARE_COMPARISONS) {
            let (i, j) = others[rng.random_range(0..others.len())];
            record(i, j, rng);
        }
        let data = ComparisonData::from_matrix(labels.clone(), wins)?;
        if data.check_connectivity().strongly_connected {
            break data;
        }
    };

    let opts = FitOptions::default();
    let sum_fit = solver::fit_sum_constraint(&data, &opts)?;
    let sum_var = inference::variance_sum_constraint(&sum_fit, &data)?;
    let reference = Constraint::reference(n, rare);
    let ref_fit = solver::reconstrain(&sum_fit, &data, &reference)?;
    let ref_var = inference::variance_general_constraint(&sum_var, &reference)?;
    let sum_intervals = inference::confidence_intervals(&sum_fit, &sum_var, 2.0)?;
    let reference_intervals = inference::confidence_intervals(&ref_fit, &ref_var, 2.0)?;

    let sum_se: Vec<f64> = sum_var.se.iter().copied().collect();
    let reference_se: Vec<f64> = ref_var.se.iter().copied().collect();
    let argmax = sum_se
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);

    Ok(DemoReport {
        rare,
        rare_comparisons: data.object_comparisons()[rare],
        total_comparisons: data.total_comparisons(),
        attempts,
        rare_has_max_sum_se: argmax == rare,
        reference_se_is_zero: reference_se[rare] == 0.0,
        reference_ses_exceed_sum: (0..n).filter(|&i| i != rare).all(|i| reference_se[i] > sum_se[i]),
        reference_trace_exceeds_sum: ref_var.total_variance() > sum_var.total_variance(),
        sum_total_variance: sum_var.total_variance(),
        reference_total_variance: ref_var.total_variance(),
        sum_intervals,
        sum_se,
        reference_intervals,
        reference_se,
        labels,
        data: Some(data),
    })
}
