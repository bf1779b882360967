//! Inverse-Ising benchmark: draw Boltzmann ground truths, sample training data,
//! fit every candidate hypergraph and record what each selection method picks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::ArchitectureMatrix;
use crate::ising::{self, Hypergraph, InteractionClosure};
use crate::selection::{self, Method, ModelScore, SelectionConfig};
use crate::simplex::{self, Distribution};
use crate::solver::SolveOptions;
use crate::{Error, Result};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "MAXENT_THREADS";

/// Largest spin count the exhaustive candidate sweep accepts.
pub const MAX_BENCH_SPINS: usize = 5;

fn default_spins() -> usize {
    5
}

fn default_hyperedges() -> Vec<Vec<usize>> {
    Hypergraph::g_ising().edges()
}

fn default_sizes() -> Vec<u64> {
    vec![100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000]
}

fn default_realizations() -> usize {
    50
}

fn default_samples() -> usize {
    10
}

fn default_test_samples() -> usize {
    100
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_prefactor() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "default_spins")]
    pub spins: usize,
    /// Generating hypergraph, 1-based spin indices.
    #[serde(default = "default_hyperedges")]
    pub hyperedges: Vec<Vec<usize>>,
    #[serde(default = "default_sizes")]
    pub sample_sizes: Vec<u64>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Training samples per realization and sample size.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Fresh test samples per training sample.
    #[serde(default = "default_test_samples")]
    pub test_samples: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; falls back to [`THREADS_ENV`], then to all cores.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_prefactor")]
    pub alpha_prefactor: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            spins: default_spins(),
            hyperedges: default_hyperedges(),
            sample_sizes: default_sizes(),
            realizations: default_realizations(),
            samples: default_samples(),
            test_samples: default_test_samples(),
            methods: default_methods(),
            seed: default_seed(),
            threads: None,
            alpha_prefactor: default_prefactor(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.spins == 0 || self.spins > MAX_BENCH_SPINS {
            return fail(format!(
                "spins must be in 1..={MAX_BENCH_SPINS}, got {}",
                self.spins
            ));
        }
        if self.realizations == 0 || self.samples == 0 || self.test_samples == 0 {
            return fail("realizations, samples and test_samples must be >= 1".into());
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 10) {
            return fail("sample_sizes must be non-empty and every size >= 10".into());
        }
        if self.methods.is_empty() {
            return fail("at least one method required".into());
        }
        if self.threads == Some(0) {
            return fail("threads must be >= 1".into());
        }
        if !(self.alpha_prefactor > 0.0) {
            return fail(format!(
                "alpha_prefactor must be positive, got {}",
                self.alpha_prefactor
            ));
        }
        let g = Hypergraph::new(self.spins, &self.hyperedges)?;
        if g.edge_masks().iter().any(|e| e.count_ones() > 3) {
            return fail("generating hyperedges are limited to three spins".into());
        }
        Ok(())
    }

    pub fn hypergraph(&self) -> Result<Hypergraph> {
        Hypergraph::new(self.spins, &self.hyperedges)
    }

    /// Configured thread count, then `MAXENT_THREADS`, then rayon's default.
    pub fn effective_threads(&self) -> usize {
        self.threads
            .or_else(|| {
                std::env::var(THREADS_ENV)
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .filter(|&t| t > 0)
            })
            .unwrap_or_else(rayon::current_num_threads)
    }
}

/// Candidate set shared by every task.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: BenchmarkConfig,
    pub truth: InteractionClosure,
    pub candidates: Vec<InteractionClosure>,
    pub architectures: Vec<ArchitectureMatrix>,
    /// Position of the generating closure among the candidates.
    pub truth_index: usize,
}

pub fn prepare(cfg: &BenchmarkConfig) -> Result<Prepared> {
    cfg.validate()?;
    let truth = ising::closure(&cfg.hypergraph()?)?;
    let candidates = ising::enumerate_models(cfg.spins)?;
    let architectures = candidates.iter().map(ising::architecture).collect();
    let truth_index = candidates
        .iter()
        .position(|c| *c == truth)
        .expect("enumeration covers every closure");
    Ok(Prepared {
        config: cfg.clone(),
        truth,
        candidates,
        architectures,
        truth_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Task {
    pub realization: usize,
    pub n: u64,
    pub sample: usize,
}

impl Task {
    /// File-name friendly identifier.
    pub fn key(&self) -> String {
        format!("r{}_n{}_s{}", self.realization, self.n, self.sample)
    }
}

pub fn tasks(cfg: &BenchmarkConfig) -> Vec<Task> {
    let mut v = Vec::new();
    for realization in 0..cfg.realizations {
        for &n in &cfg.sample_sizes {
            for sample in 0..cfg.samples {
                v.push(Task {
                    realization,
                    n,
                    sample,
                });
            }
        }
    }
    v
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed from a sequence of words; independent of evaluation order.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Ground-truth distribution of one realization.
pub fn realization_distribution(prep: &Prepared, realization: usize) -> Result<Distribution> {
    let seed = derive_seed(&[prep.config.seed, 0, realization as u64]);
    let params = ising::random_params(
        &prep.config.hypergraph()?,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )?;
    ising::boltzmann(&params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub n: u64,
    pub realization: usize,
    pub sample: usize,
    /// Candidate index in enumeration order.
    pub selected: usize,
    pub exact: bool,
    pub fallback: bool,
    pub tp_rate: f64,
    pub fp_rate: f64,
    /// `N·KL(q‖p̂)`; infinite when the fit excludes a microstate of `q`.
    pub train_kl: f64,
    /// Mean `N·KL(g‖p̂)` over the test samples.
    pub test_kl: f64,
    /// Whether the generating closure passed the empirical threshold.
    pub truth_pass: bool,
}

pub const REPORT_HEADER: &str =
    "method,n,realization,sample,selected,exact,fallback,tp_rate,fp_rate,train_kl,test_kl,truth_pass";

impl ReportRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.n,
            self.realization,
            self.sample,
            self.selected,
            self.exact,
            self.fallback,
            self.tp_rate,
            self.fp_rate,
            self.train_kl,
            self.test_kl,
            self.truth_pass
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let bad =
            |what: &str| Error::InvalidConfig(format!("malformed report line ({what}): '{line}'"));
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 12 {
            return Err(bad("field count"));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad("number"));
        let int = |i: usize| f[i].parse::<u64>().map_err(|_| bad("integer"));
        let flag = |i: usize| f[i].parse::<bool>().map_err(|_| bad("flag"));
        Ok(Self {
            method: f[0].parse()?,
            n: int(1)?,
            realization: int(2)? as usize,
            sample: int(3)? as usize,
            selected: int(4)? as usize,
            exact: flag(5)?,
            fallback: flag(6)?,
            tp_rate: num(7)?,
            fp_rate: num(8)?,
            train_kl: num(9)?,
            test_kl: num(10)?,
            truth_pass: flag(11)?,
        })
    }

    fn sort_key(&self) -> (Method, u64, usize, usize) {
        (self.method, self.n, self.realization, self.sample)
    }
}

/// Scores every candidate on one training sample and applies each method.
pub fn run_task(prep: &Prepared, task: Task) -> Result<Vec<ReportRow>> {
    let cfg = &prep.config;
    let q = realization_distribution(prep, task.realization)?;
    let seed = derive_seed(&[
        cfg.seed,
        1,
        task.realization as u64,
        task.n,
        task.sample as u64,
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = simplex::multinomial_sample(&q, task.n, &mut rng);
    let f = Distribution::from_counts(&counts);
    let n = task.n as f64;
    let opts = SolveOptions::newton();

    let mut scores: Vec<ModelScore> = Vec::with_capacity(prep.candidates.len());
    let mut fits: Vec<Distribution> = Vec::with_capacity(prep.candidates.len());
    for (id, (c, r)) in prep.candidates.iter().zip(&prep.architectures).enumerate() {
        let hint = c.forced_zeros(&counts);
        match selection::score(id, r, &f, n, Some(&hint), &opts) {
            Ok((s, fit)) => {
                scores.push(s);
                fits.push(fit.distribution);
            }
            Err(e) => log::warn!("task {}: candidate {id} ({c}) skipped: {e}", task.key()),
        }
    }
    if scores.is_empty() {
        return Err(Error::NoSolvableCandidate);
    }
    let truth_pass = scores
        .iter()
        .find(|s| s.id == prep.truth_index)
        .is_some_and(|s| {
            let sel = SelectionConfig {
                method: Method::HyperMaxent,
                alpha_prefactor: cfg.alpha_prefactor,
            };
            s.p_value >= sel.alpha_empirical(s, n)
        });

    let tests: Vec<Distribution> = (0..cfg.test_samples)
        .map(|_| Distribution::from_counts(&simplex::multinomial_sample(&q, task.n, &mut rng)))
        .collect();
    let implies = |i: usize, j: usize| {
        prep.candidates[scores[i].id].is_subfamily_of(&prep.candidates[scores[j].id])
    };

    let mut rows = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let sel = SelectionConfig {
            method,
            alpha_prefactor: cfg.alpha_prefactor,
        };
        let choice =
            selection::choose(&scores, &implies, n, &sel).ok_or(Error::NoSolvableCandidate)?;
        let id = scores[choice.index].id;
        let chosen = &prep.candidates[id];
        let p_hat = &fits[choice.index];
        let (tp_rate, fp_rate) = ising::tp_fp_rates(chosen, &prep.truth)?;
        let test_kl = tests
            .iter()
            .map(|g| n * simplex::kl_or_infinite(g, p_hat))
            .sum::<f64>()
            / tests.len() as f64;
        rows.push(ReportRow {
            method,
            n: task.n,
            realization: task.realization,
            sample: task.sample,
            selected: id,
            exact: id == prep.truth_index,
            fallback: choice.fallback,
            tp_rate,
            fp_rate,
            train_kl: n * simplex::kl_or_infinite(&q, p_hat),
            test_kl,
            truth_pass,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    /// Sorted by method, sample size, realization and sample.
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn from_rows(mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by_key(ReportRow::sort_key);
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv_line());
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<(Method, u64), Vec<&ReportRow>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry((r.method, r.n)).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|((method, n), rows)| {
                let count = rows.len() as f64;
                let mean =
                    |f: &dyn Fn(&ReportRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / count;
                let finite_mean = |f: &dyn Fn(&ReportRow) -> f64| {
                    let v: Vec<f64> = rows
                        .iter()
                        .map(|r| f(r))
                        .filter(|x| x.is_finite())
                        .collect();
                    let m = if v.is_empty() {
                        f64::NAN
                    } else {
                        v.iter().sum::<f64>() / v.len() as f64
                    };
                    (m, rows.len() - v.len())
                };
                let (train_kl, train_infinite) = finite_mean(&|r| r.train_kl);
                let (test_kl, test_infinite) = finite_mean(&|r| r.test_kl);
                SummaryRow {
                    method,
                    n,
                    rows: rows.len(),
                    accuracy: mean(&|r| f64::from(u8::from(r.exact))),
                    tp_rate: mean(&|r| r.tp_rate),
                    fp_rate: mean(&|r| r.fp_rate),
                    fp_nonzero: mean(&|r| f64::from(u8::from(r.fp_rate > 0.0))),
                    fallback_rate: mean(&|r| f64::from(u8::from(r.fallback))),
                    train_kl,
                    train_infinite,
                    test_kl,
                    test_infinite,
                    truth_pass_rate: mean(&|r| f64::from(u8::from(r.truth_pass))),
                }
            })
            .collect()
    }
}

/// Per-(method, N) averages.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub n: u64,
    pub rows: usize,
    /// Fraction of samples where the generating closure was selected exactly.
    pub accuracy: f64,
    pub tp_rate: f64,
    pub fp_rate: f64,
    /// Fraction of samples with at least one false positive.
    pub fp_nonzero: f64,
    pub fallback_rate: f64,
    /// Mean over finite values; `train_infinite` counts the rest.
    pub train_kl: f64,
    pub train_infinite: usize,
    pub test_kl: f64,
    pub test_infinite: usize,
    pub truth_pass_rate: f64,
}

pub const SUMMARY_HEADER: &str = "method,n,rows,accuracy,tp_rate,fp_rate,fp_nonzero,fallback_rate,train_kl,train_infinite,test_kl,test_infinite,truth_pass_rate";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.n,
            r.rows,
            r.accuracy,
            r.tp_rate,
            r.fp_rate,
            r.fp_nonzero,
            r.fallback_rate,
            r.train_kl,
            r.train_infinite,
            r.test_kl,
            r.test_infinite,
            r.truth_pass_rate
        );
    }
    out
}

/// Runs every task on a dedicated pool of `cfg.effective_threads()` workers.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let prep = prepare(cfg)?;
    run_tasks(&prep, &tasks(cfg), cfg.effective_threads())
}

/// Runs the given tasks in parallel; results do not depend on `threads`.
pub fn run_tasks(prep: &Prepared, tasks: &[Task], threads: usize) -> Result<BenchmarkReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let per_task: Vec<Result<Vec<ReportRow>>> =
        pool.install(|| tasks.par_iter().map(|&t| run_task(prep, t)).collect());
    let mut rows = Vec::new();
    for r in per_task {
        rows.extend(r?);
    }
    Ok(BenchmarkReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_part() {
        let a = derive_seed(&[1, 2, 3]);
        assert_ne!(a, derive_seed(&[1, 2, 4]));
        assert_ne!(a, derive_seed(&[1, 3, 2]));
        assert_eq!(a, derive_seed(&[1, 2, 3]));
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = BenchmarkConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.sample_sizes.len(), 6);
        let bad = BenchmarkConfig {
            sample_sizes: vec![5],
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        let bad = BenchmarkConfig {
            hyperedges: vec![vec![1, 2, 3, 4]],
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn report_lines_round_trip() {
        let row = ReportRow {
            method: Method::HyperMaxentLrt,
            n: 1000,
            realization: 3,
            sample: 1,
            selected: 42,
            exact: false,
            fallback: false,
            tp_rate: 11.0 / 14.0,
            fp_rate: 0.1,
            train_kl: f64::INFINITY,
            test_kl: 22.123456789,
            truth_pass: true,
        };
        assert_eq!(ReportRow::from_csv_line(&row.to_csv_line()).unwrap(), row);
        assert!(ReportRow::from_csv_line("bic,1").is_err());
    }

    #[test]
    fn task_grid_size() {
        let cfg = BenchmarkConfig {
            realizations: 2,
            samples: 3,
            sample_sizes: vec![10, 100],
            ..Default::default()
        };
        assert_eq!(tasks(&cfg).len(), 12);
    }
}
