//! Argument parsing and subcommand implementations for `btident`.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 non-identifiable data.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bt_ident::inference::{self, Interval};
use bt_ident::pairdata::{ComparisonData, ConnectivityReport};
use bt_ident::simulate::{self, DesignSpec, PerSubject};
use bt_ident::solver::{self, Constraint, FitOptions, SolverError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "btident", version, about = "Bradley-Terry scores with standard errors under linear identifying constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit scores from a winner,loser,count CSV.
    Fit(FitArgs),
    /// Report connectivity and per-object comparison counts.
    Check(CheckArgs),
    /// Run a Monte Carlo experiment.
    Simulate(SimulateArgs),
    /// Synthetic 21-object example contrasting reference and sum constraints.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    /// `sum`, `ref:<label>` or `alpha:<comma-separated reals in label order>`.
    #[arg(long, default_value = "sum")]
    pub constraint: ConstraintSpec,
    #[arg(long, default_value_t = 2.0)]
    pub ci_multiplier: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub input: PathBuf,
    /// Objects with fewer comparisons than this are flagged.
    #[arg(long, default_value_t = 10)]
    pub rare_below: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Consistency,
    Coverage,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub experiment: Experiment,
    #[arg(long, default_value_t = 5)]
    pub objects: usize,
    /// True scores are evenly spaced on `[-spread, spread]`.
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// Subject counts: the ladder for consistency, the first value for coverage.
    #[arg(long, value_delimiter = ',')]
    pub subjects: Option<Vec<usize>>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// `fixed:<k>`, `poisson:<lambda>` or `uniform:<low>:<high>`.
    #[arg(long, default_value = "fixed:5")]
    pub per_subject: PerSubjectSpec,
    #[arg(long, default_value_t = 2.0)]
    pub ci_multiplier: f64,
    #[arg(long, default_value_t = 0.93)]
    pub coverage_low: f64,
    #[arg(long, default_value_t = 0.975)]
    pub coverage_high: f64,
    /// Largest tolerated covariance z-score in the coverage run.
    #[arg(long, default_value_t = 3.0)]
    pub max_z: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory for the CSV tables.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub ci_multiplier: f64,
    /// Directory for the two interval files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    NotIdentifiable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::NotIdentifiable(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::NotIdentifiable(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

fn io_err(context: &str, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    Sum,
    Reference(String),
    Alpha(Vec<f64>),
}

impl FromStr for ConstraintSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "sum" {
            return Ok(ConstraintSpec::Sum);
        }
        if let Some(label) = s.strip_prefix("ref:") {
            if label.is_empty() {
                return Err("ref: needs a label".into());
            }
            return Ok(ConstraintSpec::Reference(label.to_string()));
        }
        if let Some(list) = s.strip_prefix("alpha:") {
            let alpha = list
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad alpha entry {x:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(ConstraintSpec::Alpha(alpha));
        }
        Err(format!("unknown constraint {s:?}; expected sum, ref:<label> or alpha:<reals>"))
    }
}

impl fmt::Display for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSpec::Sum => f.write_str("sum"),
            ConstraintSpec::Reference(l) => write!(f, "ref:{l}"),
            ConstraintSpec::Alpha(a) => {
                let parts: Vec<String> = a.iter().map(|x| x.to_string()).collect();
                write!(f, "alpha:{}", parts.join(","))
            }
        }
    }
}

impl ConstraintSpec {
    pub fn resolve(&self, data: &ComparisonData) -> Result<Constraint, CliError> {
        let n = data.n();
        match self {
            ConstraintSpec::Sum => Ok(Constraint::sum(n)),
            ConstraintSpec::Reference(label) => data
                .index_of(label)
                .map(|i| Constraint::reference(n, i))
                .ok_or_else(|| CliError::Usage(format!("unknown reference label {label:?}"))),
            ConstraintSpec::Alpha(alpha) => {
                if alpha.len() != n {
                    return Err(CliError::Usage(format!(
                        "alpha has {} entries but the data have {n} objects",
                        alpha.len()
                    )));
                }
                let c = Constraint::from_vec(alpha.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
                c.check_identifiable().map_err(|e| CliError::Usage(e.to_string()))?;
                Ok(c)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerSubjectSpec(pub PerSubject);

impl FromStr for PerSubjectSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<u32>().map_err(|e| format!("bad count {x:?}: {e}"));
        let dist = match parts.as_slice() {
            ["fixed", k] => PerSubject::Fixed(num(k)?),
            ["poisson", l] => PerSubject::Poisson(l.parse().map_err(|e| format!("bad rate {l:?}: {e}"))?),
            ["uniform", a, b] => PerSubject::Uniform(num(a)?, num(b)?),
            _ => return Err(format!("unknown per-subject spec {s:?}")),
        };
        Ok(PerSubjectSpec(dist))
    }
}

/// Machine-readable fit report; rows sorted by estimate, descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    pub ci: Vec<[f64; 2]>,
    pub constraint: String,
    pub loglik: f64,
    pub n_comparisons: u64,
}

impl FitReport {
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "constraint: {}", self.constraint)?;
        writeln!(w, "log-likelihood: {}", fixed(self.loglik))?;
        writeln!(w, "comparisons: {}", self.n_comparisons)?;
        let width = self.labels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(5);
        writeln!(w, "{:<width$}  {:>12}  {:>12}  {:>12}  {:>12}", "label", "estimate", "se", "ci_low", "ci_high")?;
        for k in 0..self.labels.len() {
            writeln!(
                w,
                "{:<width$}  {:>12}  {:>12}  {:>12}  {:>12}",
                self.labels[k],
                fixed(self.estimates[k]),
                fixed(self.se[k]),
                fixed(self.ci[k][0]),
                fixed(self.ci[k][1]),
            )?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["label", "estimate", "se", "ci_low", "ci_high"])?;
        for k in 0..self.labels.len() {
            wtr.write_record([
                self.labels[k].clone(),
                self.estimates[k].to_string(),
                self.se[k].to_string(),
                self.ci[k][0].to_string(),
                self.ci[k][1].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Six decimals, with negative zero printed as zero.
pub fn fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

fn load(path: &Path) -> Result<ComparisonData, CliError> {
    ComparisonData::load_csv(path).map_err(|e| io_err(&path.display().to_string(), e))
}

fn describe_partition(data: &ComparisonData, report: &ConnectivityReport) -> String {
    let names = |idx: &[usize]| -> String {
        let v: Vec<&str> = idx.iter().map(|&i| data.label(i)).collect();
        format!("{{{}}}", v.join(", "))
    };
    match &report.witness {
        Some(w) => format!(
            "no object in {} ever beat an object in {}; the scores are not identifiable. \
             Analyze the strongly connected components separately.",
            names(&w.rest),
            names(&w.dominant)
        ),
        None => "comparison graph is not strongly connected".to_string(),
    }
}

pub fn fit_report(data: &ComparisonData, spec: &ConstraintSpec, multiplier: f64) -> Result<FitReport, CliError> {
    if !(multiplier.is_finite() && multiplier >= 0.0) {
        return Err(CliError::Usage(format!("ci multiplier must be non-negative, got {multiplier}")));
    }
    let constraint = spec.resolve(data)?;
    let sum_fit = match solver::fit_sum_constraint(data, &FitOptions::default()) {
        Ok(f) => f,
        Err(SolverError::NotConnected(report)) => {
            return Err(CliError::NotIdentifiable(describe_partition(data, &report)))
        }
        Err(e) => return Err(CliError::Io(format!("fit failed: {e}"))),
    };
    let fail = |e: &dyn fmt::Display| CliError::Io(format!("variance estimation failed: {e}"));
    let var_sum = inference::variance_sum_constraint(&sum_fit, data).map_err(|e| fail(&e))?;
    let (fit, var) = if constraint.is_sum_like() {
        (sum_fit, var_sum)
    } else {
        let fit = solver::reconstrain(&sum_fit, data, &constraint).map_err(|e| fail(&e))?;
        let var = inference::variance_general_constraint(&var_sum, &constraint).map_err(|e| fail(&e))?;
        (fit, var)
    };
    let intervals = inference::confidence_intervals(&fit, &var, multiplier).map_err(|e| fail(&e))?;

    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&a, &b| fit.beta_hat[b].total_cmp(&fit.beta_hat[a]));
    Ok(FitReport {
        labels: order.iter().map(|&i| data.label(i).to_string()).collect(),
        estimates: order.iter().map(|&i| fit.beta_hat[i]).collect(),
        se: order.iter().map(|&i| var.se[i]).collect(),
        ci: order.iter().map(|&i| [intervals[i].low, intervals[i].high]).collect(),
        constraint: spec.to_string(),
        loglik: fit.loglik,
        n_comparisons: data.total_comparisons(),
    })
}

pub fn cmd_fit<W: Write>(args: &FitArgs, mut out: W) -> Result<(), CliError> {
    let data = load(&args.input)?;
    let report = fit_report(&data, &args.constraint, args.ci_multiplier)?;
    let stdout_err = |e: &dyn fmt::Display| io_err("writing output", e);
    match args.format {
        Format::Table => report.write_table(&mut out).map_err(|e| stdout_err(&e))?,
        Format::Csv => report.write_csv(&mut out).map_err(|e| stdout_err(&e))?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report).map_err(|e| stdout_err(&e))?;
            writeln!(out).map_err(|e| stdout_err(&e))?;
        }
    }
    if let Some(path) = &args.out {
        let file = fs::File::create(path).map_err(|e| io_err(&path.display().to_string(), e))?;
        serde_json::to_writer_pretty(file, &report).map_err(|e| io_err(&path.display().to_string(), e))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckReport {
    strongly_connected: bool,
    components: Vec<Vec<String>>,
    /// Objects nobody outside ever beat, when not strongly connected.
    dominant: Option<Vec<String>>,
    comparisons: Vec<(String, u64)>,
    rare: Vec<String>,
    total_comparisons: u64,
}

pub fn cmd_check<W: Write>(args: &CheckArgs, mut out: W) -> Result<(), CliError> {
    let data = load(&args.input)?;
    let report = data.check_connectivity();
    let names = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| data.label(i).to_string()).collect() };
    let counts = data.object_comparisons();
    let check = CheckReport {
        strongly_connected: report.strongly_connected,
        components: report.components.iter().map(|c| names(c)).collect(),
        dominant: report.witness.as_ref().map(|w| names(&w.dominant)),
        comparisons: (0..data.n()).map(|i| (data.label(i).to_string(), counts[i])).collect(),
        rare: (0..data.n()).filter(|&i| counts[i] < args.rare_below).map(|i| data.label(i).to_string()).collect(),
        total_comparisons: data.total_comparisons(),
    };
    let w = |e: std::io::Error| io_err("writing output", e);
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &check).map_err(|e| io_err("writing output", e))?;
            writeln!(out).map_err(w)?;
        }
        Format::Table | Format::Csv => {
            let verdict = if check.strongly_connected { "yes" } else { "no" };
            writeln!(out, "strongly connected: {verdict}").map_err(w)?;
            writeln!(out, "components: {}", check.components.len()).map_err(w)?;
            for (k, c) in check.components.iter().enumerate() {
                writeln!(out, "  {}: {{{}}}", k + 1, c.join(", ")).map_err(w)?;
            }
            if !report.strongly_connected {
                writeln!(out, "{}", describe_partition(&data, &report)).map_err(w)?;
            }
            writeln!(out, "comparisons per object (total {}):", check.total_comparisons).map_err(w)?;
            let width = data.labels().iter().map(|l| l.chars().count()).max().unwrap_or(0);
            for (label, c) in &check.comparisons {
                let flag = if *c < args.rare_below { "  rare" } else { "" };
                writeln!(out, "  {label:<width$}  {c:>8}{flag}").map_err(w)?;
            }
        }
    }
    if report.strongly_connected {
        Ok(())
    } else {
        Err(CliError::NotIdentifiable(describe_partition(&data, &report)))
    }
}

fn create_in(dir: &Path, name: &str) -> Result<(PathBuf, fs::File), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(&dir.display().to_string(), e))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| io_err(&path.display().to_string(), e))?;
    Ok((path, file))
}

fn sim_err(e: simulate::SimulateError) -> CliError {
    match e {
        simulate::SimulateError::Io(e) => CliError::Io(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

pub fn cmd_simulate<W: Write>(args: &SimulateArgs, mut out: W) -> Result<(), CliError> {
    if args.objects < 2 {
        return Err(CliError::Usage("need at least two objects".into()));
    }
    if !(args.spread.is_finite() && args.spread >= 0.0) {
        return Err(CliError::Usage("spread must be non-negative".into()));
    }
    let beta_star = simulate::linear_scores(args.objects, -args.spread, args.spread);
    let w = |e: std::io::Error| io_err("writing output", e);
    match args.experiment {
        Experiment::Consistency => {
            let ladder = args.subjects.clone().unwrap_or_else(|| vec![50, 200, 800, 3200]);
            let first = *ladder.first().ok_or_else(|| CliError::Usage("empty subject ladder".into()))?;
            let spec = DesignSpec::uniform_pairs(beta_star, first, args.per_subject.0, args.seed).map_err(sim_err)?;
            let table = simulate::consistency_experiment(&spec, &ladder, args.replications.unwrap_or(200))
                .map_err(sim_err)?;
            let (summary_path, f) = create_in(&args.out, "consistency.csv")?;
            table.write_csv(f).map_err(sim_err)?;
            let (records_path, f) = create_in(&args.out, "consistency_replications.csv")?;
            simulate::write_replications_csv(&table.records, f).map_err(sim_err)?;
            for row in &table.rows {
                writeln!(
                    out,
                    "S={:<8} fitted {:>5}/{:<5} mean sup error {:.6} (se {:.6})",
                    row.subjects, row.fitted, row.replications, row.mean_error, row.mean_error_se
                )
                .map_err(w)?;
            }
            let verdict = if table.strictly_decreasing() { "PASS" } else { "FAIL" };
            writeln!(out, "{verdict} consistency: mean error strictly decreasing along the ladder").map_err(w)?;
            writeln!(out, "wrote {} and {}", summary_path.display(), records_path.display()).map_err(w)?;
        }
        Experiment::Coverage => {
            let subjects = args.subjects.as_ref().and_then(|s| s.first().copied()).unwrap_or(2000);
            let spec =
                DesignSpec::uniform_pairs(beta_star, subjects, args.per_subject.0, args.seed).map_err(sim_err)?;
            let rep = simulate::coverage_experiment(&spec, args.replications.unwrap_or(1000), args.ci_multiplier)
                .map_err(sim_err)?;
            let (summary_path, f) = create_in(&args.out, "coverage.csv")?;
            rep.write_csv(f).map_err(sim_err)?;
            let (records_path, f) = create_in(&args.out, "coverage_replications.csv")?;
            simulate::write_replications_csv(&rep.records, f).map_err(sim_err)?;
            let in_band = (args.coverage_low..=args.coverage_high).contains(&rep.aggregate);
            let cov_ok = rep.max_covariance_z <= args.max_z;
            writeln!(
                out,
                "used {}/{} replications, per-object coverage {:?}",
                rep.used,
                rep.replications,
                rep.per_object.iter().map(|c| (c * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            )
            .map_err(w)?;
            writeln!(
                out,
                "{} coverage: aggregate {:.4} in [{}, {}]; max covariance z {:.2} (limit {})",
                if in_band && cov_ok { "PASS" } else { "FAIL" },
                rep.aggregate,
                args.coverage_low,
                args.coverage_high,
                rep.max_covariance_z,
                args.max_z
            )
            .map_err(w)?;
            writeln!(out, "wrote {} and {}", summary_path.display(), records_path.display()).map_err(w)?;
        }
    }
    Ok(())
}

fn write_intervals(path: &Path, file: fs::File, labels: &[String], intervals: &[Interval]) -> Result<(), CliError> {
    let err = |e: csv::Error| io_err(&path.display().to_string(), e);
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record(["label", "center", "low", "high"]).map_err(err)?;
    for (label, iv) in labels.iter().zip(intervals) {
        wtr.write_record([label.clone(), iv.center.to_string(), iv.low.to_string(), iv.high.to_string()])
            .map_err(err)?;
    }
    wtr.flush().map_err(|e| io_err(&path.display().to_string(), e))
}

pub fn cmd_demo<W: Write>(args: &DemoArgs, mut out: W) -> Result<(), CliError> {
    let report = simulate::uncertainty_concentration_demo(&mut simulate::stream_rng(args.seed, 0)).map_err(sim_err)?;
    let rescale = |ivs: &[Interval], se: &[f64]| -> Vec<Interval> {
        ivs.iter()
            .zip(se)
            .map(|(iv, s)| Interval {
                center: iv.center,
                low: iv.center - args.ci_multiplier * s,
                high: iv.center + args.ci_multiplier * s,
            })
            .collect()
    };
    let reference = rescale(&report.reference_intervals, &report.reference_se);
    let sum = rescale(&report.sum_intervals, &report.sum_se);
    let (ref_path, f) = create_in(&args.out, "demo_reference.csv")?;
    write_intervals(&ref_path, f, &report.labels, &reference)?;
    let (sum_path, f) = create_in(&args.out, "demo_sum.csv")?;
    write_intervals(&sum_path, f, &report.labels, &sum)?;

    let w = |e: std::io::Error| io_err("writing output", e);
    let rare = &report.labels[report.rare];
    writeln!(
        out,
        "{} objects, {} comparisons; {rare} compared {} times (reference object)",
        report.labels.len(),
        report.total_comparisons,
        report.rare_comparisons
    )
    .map_err(w)?;
    writeln!(
        out,
        "total variance: reference constraint {:.6}, sum constraint {:.6}",
        report.reference_total_variance, report.sum_total_variance
    )
    .map_err(w)?;
    writeln!(out, "{rare} SE under sum constraint: {:.6}", report.sum_se[report.rare]).map_err(w)?;
    let checks = [
        ("rare object has the largest SE under the sum constraint", report.rare_has_max_sum_se),
        ("reference SE is zero", report.reference_se_is_zero),
        ("every other SE is larger under the reference constraint", report.reference_ses_exceed_sum),
        ("reference total variance exceeds sum total variance", report.reference_trace_exceeds_sum),
    ];
    for (what, ok) in checks {
        writeln!(out, "{} {what}", if ok { "PASS" } else { "FAIL" }).map_err(w)?;
    }
    writeln!(out, "wrote {} and {}", ref_path.display(), sum_path.display()).map_err(w)?;
    Ok(())
}

pub fn run<W: Write>(cli: &Cli, out: W) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Demo(a) => cmd_demo(a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_objects() -> ComparisonData {
        ComparisonData::from_records([("A", "B", 3u64), ("B", "A", 1)]).unwrap()
    }

    #[test]
    fn parses_constraint_specs() {
        assert_eq!("sum".parse::<ConstraintSpec>().unwrap(), ConstraintSpec::Sum);
        assert_eq!("ref:A".parse::<ConstraintSpec>().unwrap(), ConstraintSpec::Reference("A".into()));
        assert_eq!(
            "alpha:1, 0.5,-2".parse::<ConstraintSpec>().unwrap(),
            ConstraintSpec::Alpha(vec![1.0, 0.5, -2.0])
        );
        assert!("ref:".parse::<ConstraintSpec>().is_err());
        assert!("alpha:1,x".parse::<ConstraintSpec>().is_err());
        assert!("median".parse::<ConstraintSpec>().is_err());
    }

    #[test]
    fn resolves_constraints_against_labels() {
        let data = two_objects();
        let c = ConstraintSpec::Reference("B".into()).resolve(&data).unwrap();
        assert_eq!(c.alpha().as_slice(), &[0.0, 1.0]);
        assert!(ConstraintSpec::Reference("Z".into()).resolve(&data).is_err());
        assert!(ConstraintSpec::Alpha(vec![1.0]).resolve(&data).is_err());
        assert!(ConstraintSpec::Alpha(vec![1.0, -1.0]).resolve(&data).is_err());
    }

    #[test]
    fn parses_per_subject_specs() {
        assert_eq!("fixed:5".parse::<PerSubjectSpec>().unwrap().0, PerSubject::Fixed(5));
        assert_eq!("poisson:2.5".parse::<PerSubjectSpec>().unwrap().0, PerSubject::Poisson(2.5));
        assert_eq!("uniform:1:4".parse::<PerSubjectSpec>().unwrap().0, PerSubject::Uniform(1, 4));
        assert!("uniform:1".parse::<PerSubjectSpec>().is_err());
    }

    #[test]
    fn fixed_formatting_drops_negative_zero() {
        assert_eq!(fixed(-0.0), "0.000000");
        assert_eq!(fixed(-1e-12), "0.000000");
        assert_eq!(fixed(-0.5493061), "-0.549306");
    }

    #[test]
    fn report_is_sorted_and_consistent_across_constraints() {
        let data = ComparisonData::from_records([("A", "B", 1u64), ("B", "A", 2), ("B", "C", 3), ("C", "A", 2)]).unwrap();
        let sum = fit_report(&data, &ConstraintSpec::Sum, 2.0).unwrap();
        assert!(sum.estimates.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(sum.labels[0], "B");
        let r = fit_report(&data, &ConstraintSpec::Reference("C".into()), 2.0).unwrap();
        assert!((sum.loglik - r.loglik).abs() < 1e-12);
        let pos = |rep: &FitReport, l: &str| rep.labels.iter().position(|x| x == l).unwrap();
        for a in ["A", "B", "C"] {
            for b in ["A", "B", "C"] {
                let d1 = sum.estimates[pos(&sum, a)] - sum.estimates[pos(&sum, b)];
                let d2 = r.estimates[pos(&r, a)] - r.estimates[pos(&r, b)];
                assert!((d1 - d2).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn negative_multiplier_is_usage_error() {
        let err = fit_report(&two_objects(), &ConstraintSpec::Sum, -1.0).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
