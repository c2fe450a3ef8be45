//! Pairwise comparison counts and the connectivity test that gates fitting.
//!
//! `W[i][j]` counts how often object `i` beat object `j`; `V = W + Wᵀ` counts
//! how often the pair was compared at all. The constrained MLE exists and is
//! unique exactly when the directed win graph (edge `i → j` iff `W[i][j] > 0`)
//! is strongly connected.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PairDataError {
    #[error("no comparison records")]
    EmptyInput,
    #[error("object `{0}` compared with itself")]
    SelfComparison(String),
    #[error("labels must be non-empty")]
    EmptyLabel,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("need at least two objects, found {0}")]
    TooFewObjects(usize),
    #[error("data contain no comparisons")]
    NoComparisons,
    #[error("win count for ({0}, {1}) overflows u64")]
    CountOverflow(String, String),
    #[error("expected a {expected}x{expected} matrix: {detail}")]
    DimensionMismatch { expected: usize, detail: String },
    #[error("diagonal entry {0} is non-zero")]
    NonZeroDiagonal(usize),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Aggregated win counts over `n` labelled objects. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonData {
    labels: Vec<String>,
    wins: Vec<u64>,
}

/// JSON export shape: labels plus the row-major win matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinsJson {
    pub labels: Vec<String>,
    pub wins: Vec<Vec<u64>>,
}

impl ComparisonData {
    /// Accumulates `(winner, loser, count)` records.
    ///
    /// Labels are indexed in order of first appearance. A zero count only
    /// registers its two labels, which lets an object with no recorded wins or
    /// losses survive a CSV round trip.
    pub fn from_records<I, S, T>(records: I) -> Result<Self, PairDataError>
    where
        I: IntoIterator<Item = (S, T, u64)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut builder = Builder::default();
        let mut any = false;
        for (winner, loser, count) in records {
            any = true;
            builder.push(winner.as_ref(), loser.as_ref(), count)?;
        }
        if !any {
            return Err(PairDataError::EmptyInput);
        }
        builder.finish()
    }

    /// Builds from an explicit square win matrix.
    pub fn from_matrix(labels: Vec<String>, wins: Vec<Vec<u64>>) -> Result<Self, PairDataError> {
        let n = labels.len();
        if wins.len() != n {
            return Err(PairDataError::DimensionMismatch {
                expected: n,
                detail: format!("{} rows", wins.len()),
            });
        }
        let mut seen = HashMap::with_capacity(n);
        for label in &labels {
            if label.is_empty() {
                return Err(PairDataError::EmptyLabel);
            }
            if seen.insert(label.as_str(), ()).is_some() {
                return Err(PairDataError::DuplicateLabel(label.clone()));
            }
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in wins.iter().enumerate() {
            if row.len() != n {
                return Err(PairDataError::DimensionMismatch {
                    expected: n,
                    detail: format!("row {i} has {} entries", row.len()),
                });
            }
            if row[i] != 0 {
                return Err(PairDataError::NonZeroDiagonal(i));
            }
            flat.extend_from_slice(row);
        }
        Self::validated(labels, flat)
    }

    /// Builds from a win matrix with labels `"1"`, `"2"`, ….
    pub fn from_unlabelled(wins: Vec<Vec<u64>>) -> Result<Self, PairDataError> {
        let labels = (1..=wins.len()).map(|i| i.to_string()).collect();
        Self::from_matrix(labels, wins)
    }

    fn validated(labels: Vec<String>, wins: Vec<u64>) -> Result<Self, PairDataError> {
        let n = labels.len();
        if n < 2 {
            return Err(PairDataError::TooFewObjects(n));
        }
        let data = Self { labels, wins };
        // Overflow of V = W + Wᵀ would make the comparison counts meaningless.
        let mut total: u64 = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = data.wins(i, j).checked_add(data.wins(j, i)).ok_or_else(|| {
                    PairDataError::CountOverflow(data.labels[i].clone(), data.labels[j].clone())
                })?;
                total = total.checked_add(v).ok_or_else(|| {
                    PairDataError::CountOverflow(data.labels[i].clone(), data.labels[j].clone())
                })?;
            }
        }
        if total == 0 {
            return Err(PairDataError::NoComparisons);
        }
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Times `i` beat `j`.
    #[inline]
    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.wins[i * self.n() + j]
    }

    /// Times `i` and `j` were compared, `V[i][j] = W[i][j] + W[j][i]`.
    #[inline]
    pub fn comparisons(&self, i: usize, j: usize) -> u64 {
        self.wins(i, j) + self.wins(j, i)
    }

    /// Total comparisons over unordered pairs.
    pub fn total_comparisons(&self) -> u64 {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.comparisons(i, j))
            .sum()
    }

    /// Number of comparisons each object took part in. Sums to twice the total.
    pub fn object_comparisons(&self) -> Vec<u64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| self.comparisons(i, j)).sum())
            .collect()
    }

    pub fn wins_rows(&self) -> Vec<Vec<u64>> {
        self.wins.chunks(self.n()).map(<[u64]>::to_vec).collect()
    }

    pub fn wins_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.wins(i, j) as f64)
    }

    pub fn comparisons_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.comparisons(i, j) as f64)
    }

    /// Relabels objects: object `i` of `self` becomes object `perm[i]` of the result.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, PairDataError> {
        let n = self.n();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if perm.len() != n || check.iter().enumerate().any(|(k, &p)| k != p) {
            return Err(PairDataError::DimensionMismatch {
                expected: n,
                detail: "not a permutation".into(),
            });
        }
        let mut labels = vec![String::new(); n];
        let mut wins = vec![0u64; n * n];
        for i in 0..n {
            labels[perm[i]] = self.labels[i].clone();
            for j in 0..n {
                wins[perm[i] * n + perm[j]] = self.wins(i, j);
            }
        }
        Ok(Self { labels, wins })
    }

    pub fn check_connectivity(&self) -> ConnectivityReport {
        check_connectivity(self)
    }

    pub fn to_json(&self) -> WinsJson {
        WinsJson {
            labels: self.labels.clone(),
            wins: self.wins_rows(),
        }
    }

    pub fn from_json(json: WinsJson) -> Result<Self, PairDataError> {
        Self::from_matrix(json.labels, json.wins)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), PairDataError> {
        serde_json::to_writer_pretty(writer, &self.to_json())?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self, PairDataError> {
        Self::from_json(serde_json::from_reader(reader)?)
    }

    /// Parses long-format CSV with header `winner,loser,count`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, PairDataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();

        let header = match records.next() {
            None => return Err(PairDataError::EmptyInput),
            Some(r) => r.map_err(csv_error)?,
        };
        let expected = ["winner", "loser", "count"];
        if header.len() != 3 || header.iter().zip(expected).any(|(a, b)| !a.eq_ignore_ascii_case(b)) {
            return Err(PairDataError::Parse {
                line: 1,
                message: "expected header `winner,loser,count`".into(),
            });
        }

        let mut builder = Builder::default();
        let mut any = false;
        for record in records {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != 3 {
                return Err(PairDataError::Parse {
                    line,
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let count: u64 = record[2].parse().map_err(|_| PairDataError::Parse {
                line,
                message: format!("count `{}` is not a non-negative integer", &record[2]),
            })?;
            builder
                .push(&record[0], &record[1], count)
                .map_err(|e| match e {
                    PairDataError::EmptyLabel | PairDataError::SelfComparison(_) => {
                        PairDataError::Parse {
                            line,
                            message: e.to_string(),
                        }
                    }
                    other => other,
                })?;
            any = true;
        }
        if !any {
            return Err(PairDataError::EmptyInput);
        }
        builder.finish()
    }

    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self, PairDataError> {
        Self::read_csv(File::open(path)?)
    }

    /// Writes long-format CSV such that [`ComparisonData::read_csv`]
    /// reproduces both `W` and the label order.
    ///
    /// Pairs are emitted in order of their larger index, so object `k` first
    /// appears after objects `0..k`. A zero-count row is added where needed to
    /// introduce a label at the right position.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PairDataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["winner", "loser", "count"]).map_err(csv_error)?;
        let n = self.n();
        for k in 1..n {
            let step_has_wins = (0..k).any(|j| self.comparisons(j, k) > 0);
            if (k == 1 && self.wins(0, 1) == 0) || !step_has_wins {
                wtr.write_record([self.label(0), self.label(k), "0"]).map_err(csv_error)?;
            }
            for j in 0..k {
                for (a, b) in [(j, k), (k, j)] {
                    let w = self.wins(a, b);
                    if w > 0 {
                        wtr.write_record([self.label(a), self.label(b), &w.to_string()])
                            .map_err(csv_error)?;
                    }
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), PairDataError> {
        self.write_csv(File::create(path)?)
    }
}

fn csv_error(e: csv::Error) -> PairDataError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => PairDataError::Io(io),
        kind => PairDataError::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

#[derive(Default)]
struct Builder {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    entries: HashMap<(usize, usize), u64>,
}

impl Builder {
    fn intern(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        i
    }

    fn push(&mut self, winner: &str, loser: &str, count: u64) -> Result<(), PairDataError> {
        if winner.is_empty() || loser.is_empty() {
            return Err(PairDataError::EmptyLabel);
        }
        if winner == loser {
            return Err(PairDataError::SelfComparison(winner.to_owned()));
        }
        let w = self.intern(winner);
        let l = self.intern(loser);
        let slot = self.entries.entry((w, l)).or_insert(0);
        *slot = slot
            .checked_add(count)
            .ok_or_else(|| PairDataError::CountOverflow(winner.to_owned(), loser.to_owned()))?;
        Ok(())
    }

    fn finish(self) -> Result<ComparisonData, PairDataError> {
        let n = self.labels.len();
        let mut wins = vec![0u64; n * n];
        for ((i, j), c) in self.entries {
            wins[i * n + j] = c;
        }
        ComparisonData::validated(self.labels, wins)
    }
}

/// Two-set partition violating the connectivity condition: nobody in
/// `rest` ever beat anybody in `dominant`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bipartition {
    pub dominant: Vec<usize>,
    pub rest: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConnectivityReport {
    pub strongly_connected: bool,
    /// Strongly connected components, each sorted, ordered by smallest member.
    pub components: Vec<Vec<usize>>,
    pub witness: Option<Bipartition>,
}

impl ConnectivityReport {
    /// Component index of every object.
    pub fn component_of(&self, n: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        for (c, members) in self.components.iter().enumerate() {
            for &v in members {
                out[v] = c;
            }
        }
        out
    }
}

/// Strongly connected components of the win graph, with a witness partition
/// when there is more than one.
///
/// The witness takes the first component (by smallest member) that no
/// outside object ever beat, i.e. a source of the condensation.
pub fn check_connectivity(data: &ComparisonData) -> ConnectivityReport {
    let n = data.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| data.wins(i, j) > 0).collect())
        .collect();
    let mut components = tarjan_scc(&adj);
    for c in &mut components {
        c.sort_unstable();
    }
    components.sort_unstable_by_key(|c| c[0]);

    if components.len() == 1 {
        return ConnectivityReport {
            strongly_connected: true,
            components,
            witness: None,
        };
    }

    let mut comp_of = vec![0usize; n];
    for (c, members) in components.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut has_incoming = vec![false; components.len()];
    for (i, targets) in adj.iter().enumerate() {
        for &j in targets {
            if comp_of[i] != comp_of[j] {
                has_incoming[comp_of[j]] = true;
            }
        }
    }
    // A DAG with at least one vertex always has a source.
    let source = has_incoming.iter().position(|&b| !b).unwrap_or(0);
    let dominant = components[source].clone();
    let rest = (0..n).filter(|&v| comp_of[v] != source).collect();
    ConnectivityReport {
        strongly_connected: false,
        components,
        witness: Some(Bipartition { dominant, rest }),
    }
}

/// Iterative Tarjan; components are returned sinks first.
fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0usize;
    // (vertex, position in its adjacency list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                out.push(comp);
            }
        }
    }
    out
}
