//! Entropy-based model scoring and selection.
//!
//! All entropies are in nats. Scores are only defined up to model-independent
//! additive constants; this module standardizes on
//!
//! ```text
//! bic = 2N·H[p̂] + D·ln N        aic = 2N·H[p̂] + 2D
//! ```
//!
//! so that score *differences* between two models are exact.
//!
//! Microstates with zero empirical frequency that a model forces to zero are
//! dropped before solving. The number of states `|A|` and the rank `D` used in
//! degrees of freedom and thresholds refer to that working space.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::constraints::{self, ArchitectureMatrix};
use crate::simplex::{self, Distribution, SupportMask};
use crate::solver::{self, MaxEntSolution, SolveOptions};
use crate::{Error, Result};

/// Cumulative χ² distribution with `k` degrees of freedom. `k = 0` is the point
/// mass at zero.
pub fn chi2_cdf(k: usize, x: f64) -> f64 {
    if k == 0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(k as f64 / 2.0, x / 2.0)
}

/// Upper tail `1 − F_k(x)`, computed directly so that tiny p-values keep their
/// relative precision.
pub fn chi2_sf(k: usize, x: f64) -> f64 {
    if k == 0 {
        return if x >= 0.0 { 0.0 } else { 1.0 };
    }
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(k as f64 / 2.0, x / 2.0)
}

/// p-value of a non-negative statistic under χ²_k, with the zero-dof convention
/// `p = 1`.
fn chi2_p_value(k: usize, stat: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        chi2_sf(k, stat.max(0.0))
    }
}

/// MaxEnt fit of an architecture to an empirical distribution, possibly on a
/// reduced working space.
#[derive(Debug, Clone)]
pub struct EmpiricalFit {
    /// Kept microstates of the full space.
    pub mask: SupportMask,
    /// Canonical architecture on the working space, bound to the data.
    pub architecture: ArchitectureMatrix,
    /// Solution on the working space.
    pub solution: MaxEntSolution,
    /// `p̂` on the full space (zero on dropped microstates).
    pub distribution: Distribution,
}

impl EmpiricalFit {
    pub fn states(&self) -> usize {
        self.mask.count()
    }

    pub fn rank(&self) -> usize {
        self.architecture.rank()
    }

    pub fn dof(&self) -> usize {
        self.states() - self.rank()
    }

    pub fn entropy(&self) -> f64 {
        simplex::entropy(&self.solution.distribution)
    }
}

/// Fits `r` to the moments of `f`.
///
/// `hint` optionally names microstates already known to be forced to zero by the
/// model on this data. If the moments still sit on the boundary of the marginal
/// polytope, the face containing them is found and the fit repeated there.
pub fn fit_empirical(
    r: &ArchitectureMatrix,
    f: &Distribution,
    hint: Option<&SupportMask>,
    opts: &SolveOptions,
) -> Result<EmpiricalFit> {
    if f.len() != r.states() {
        return Err(Error::DimensionMismatch {
            expected: r.states(),
            found: f.len(),
        });
    }
    let mask = match hint {
        Some(m) => {
            if m.full_len() != f.len() {
                return Err(Error::DimensionMismatch {
                    expected: f.len(),
                    found: m.full_len(),
                });
            }
            if let Some(index) = (0..f.len()).find(|&i| !m.keep()[i] && f.probs()[i] > 0.0) {
                return Err(Error::SupportViolation { index });
            }
            m.clone()
        }
        None => SupportMask::full(f.len()),
    };
    match fit_on(r, f, &mask, opts) {
        Ok(fit) => Ok(fit),
        Err(e) if f.is_strictly_positive() => Err(e),
        Err(
            Error::InfeasibleMoments { .. }
            | Error::SingularJacobian { .. }
            | Error::NoConvergence { .. },
        ) => {
            let rw = bound_restriction(r, f, &mask)?;
            let face = constraints::facial_support(&rw)?;
            let refined = mask.compose(&face);
            fit_on(r, f, &refined, opts)
        }
        Err(e) => Err(e),
    }
}

fn bound_restriction(
    r: &ArchitectureMatrix,
    f: &Distribution,
    mask: &SupportMask,
) -> Result<ArchitectureMatrix> {
    // Bind first: f vanishes off the mask, so its moments stay consistent there.
    let fw = Distribution::new(mask.restrict(f.probs()))?;
    r.rebind(f)?.restrict(mask)?.rebind(&fw)
}

fn fit_on(
    r: &ArchitectureMatrix,
    f: &Distribution,
    mask: &SupportMask,
    opts: &SolveOptions,
) -> Result<EmpiricalFit> {
    let architecture = bound_restriction(r, f, mask)?;
    let fw = mask.restrict(f.probs());
    let floor = fw.iter().copied().filter(|&x| x > 0.0).fold(1.0, f64::min) / 2.0;
    let guess: Vec<f64> = fw.iter().map(|&x| x.max(floor).ln()).collect();
    let solution = solver::solve_newton_from(&architecture, Some(&guess), opts)?;
    let distribution = Distribution::from_weights(mask.expand(solution.distribution.probs()));
    Ok(EmpiricalFit {
        mask: mask.clone(),
        architecture,
        solution,
        distribution,
    })
}

/// `δ̂ = H[p̂] − H[f]`, clipped at zero.
pub fn empirical_delta(fit: &EmpiricalFit, f: &Distribution) -> f64 {
    (fit.entropy() - simplex::entropy(f)).max(0.0)
}

/// `1 − F_{|A|−D}(2N·δ̂)`.
pub fn empirical_p_value(r: &ArchitectureMatrix, f: &Distribution, n: f64) -> Result<f64> {
    let fit = fit_empirical(r, f, None, &SolveOptions::newton())?;
    Ok(chi2_p_value(fit.dof(), 2.0 * n * empirical_delta(&fit, f)))
}

/// Degrees of freedom of the likelihood-ratio test between two fits on the same
/// data, `(|A_w|−D) − (|A'_w|−D')`.
fn lrt_dof(simple: &ModelScore, complex: &ModelScore) -> usize {
    (simple.states - simple.rank).saturating_sub(complex.states - complex.rank)
}

fn lrt_statistic(simple: &ModelScore, complex: &ModelScore, n: f64) -> f64 {
    (2.0 * n * (simple.maxent_entropy - complex.maxent_entropy)).max(0.0)
}

/// `1 − F_{D'−D}(2N·(H[p̂] − H[p̂']))` for `r` nested in `r_complex`.
pub fn lrt_p_value(
    r: &ArchitectureMatrix,
    r_complex: &ArchitectureMatrix,
    f: &Distribution,
    n: f64,
) -> Result<f64> {
    if constraints::nesting_map(r, r_complex).is_none() {
        return Err(Error::NotNested);
    }
    let opts = SolveOptions::newton();
    let a = score(0, r, f, n, None, &opts)?.0;
    let b = score(1, r_complex, f, n, None, &opts)?.0;
    Ok(chi2_p_value(lrt_dof(&a, &b), lrt_statistic(&a, &b, n)))
}

pub fn bic(r: &ArchitectureMatrix, f: &Distribution, n: f64) -> Result<f64> {
    Ok(score(0, r, f, n, None, &SolveOptions::newton())?.0.bic)
}

pub fn aic(r: &ArchitectureMatrix, f: &Distribution, n: f64) -> Result<f64> {
    Ok(score(0, r, f, n, None, &SolveOptions::newton())?.0.aic)
}

/// `H[p̂] − (|A|−D)/(2N)`.
pub fn expected_entropy(r: &ArchitectureMatrix, f: &Distribution, n: f64) -> Result<f64> {
    Ok(score(0, r, f, n, None, &SolveOptions::newton())?
        .0
        .expected_entropy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub id: usize,
    /// Working-space size `|A|`.
    pub states: usize,
    /// Rank `D̂` on the working space.
    pub rank: usize,
    pub maxent_entropy: f64,
    pub empirical_delta: f64,
    pub p_value: f64,
    pub bic: f64,
    pub aic: f64,
    pub expected_entropy: f64,
}

impl ModelScore {
    pub fn dof(&self) -> usize {
        self.states - self.rank
    }
}

/// Scores one candidate on data `f` of sample size `n`.
pub fn score(
    id: usize,
    r: &ArchitectureMatrix,
    f: &Distribution,
    n: f64,
    hint: Option<&SupportMask>,
    opts: &SolveOptions,
) -> Result<(ModelScore, EmpiricalFit)> {
    if !(n > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sample size must be positive, got {n}"
        )));
    }
    let fit = fit_empirical(r, f, hint, opts)?;
    let h = fit.entropy();
    let delta = empirical_delta(&fit, f);
    let d = fit.rank() as f64;
    let s = ModelScore {
        id,
        states: fit.states(),
        rank: fit.rank(),
        maxent_entropy: h,
        empirical_delta: delta,
        p_value: chi2_p_value(fit.dof(), 2.0 * n * delta),
        bic: 2.0 * n * h + d * n.ln(),
        aic: 2.0 * n * h + 2.0 * d,
        expected_entropy: h - fit.dof() as f64 / (2.0 * n),
    };
    Ok((s, fit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bic,
    Aic,
    HyperMaxent,
    HyperMaxentLrt,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Bic,
        Method::Aic,
        Method::HyperMaxent,
        Method::HyperMaxentLrt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bic => "bic",
            Method::Aic => "aic",
            Method::HyperMaxent => "hyper_maxent",
            Method::HyperMaxentLrt => "hyper_maxent_lrt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown selection method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub method: Method,
    /// Multiplies both 1/N thresholds.
    pub alpha_prefactor: f64,
}

impl SelectionConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha_prefactor: 1.0,
        }
    }

    /// `α_emp = c·(|A|−D)/N`.
    pub fn alpha_empirical(&self, s: &ModelScore, n: f64) -> f64 {
        self.alpha_prefactor * s.dof() as f64 / n
    }

    /// `α_LRT = c·(2|A|−D−D')/N`, with each `|A|` taken on its own working space.
    pub fn alpha_lrt(&self, simple: &ModelScore, complex: &ModelScore, n: f64) -> f64 {
        self.alpha_prefactor * (simple.dof() + complex.dof()) as f64 / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    /// Position in the score slice.
    pub index: usize,
    /// No candidate passed the thresholds; the saturated candidate was returned.
    pub fallback: bool,
}

/// Applies a selection procedure to a score table.
///
/// `implies(i, j)` must be true iff candidate `j` implies candidate `i`
/// (`j` is a refinement of `i`). Returns `None` only for an empty table.
pub fn choose(
    scores: &[ModelScore],
    implies: &dyn Fn(usize, usize) -> bool,
    n: f64,
    cfg: &SelectionConfig,
) -> Option<Choice> {
    if scores.is_empty() {
        return None;
    }
    let argmin = |key: &dyn Fn(&ModelScore) -> f64| {
        (0..scores.len()).fold(0, |best, i| {
            if key(&scores[i]) < key(&scores[best]) {
                i
            } else {
                best
            }
        })
    };
    match cfg.method {
        Method::Bic => Some(Choice {
            index: argmin(&|s| s.bic),
            fallback: false,
        }),
        Method::Aic => Some(Choice {
            index: argmin(&|s| s.aic),
            fallback: false,
        }),
        Method::HyperMaxent | Method::HyperMaxentLrt => {
            let mut order: Vec<usize> = (0..scores.len())
                .filter(|&i| scores[i].p_value >= cfg.alpha_empirical(&scores[i], n))
                .collect();
            order.sort_by(|&a, &b| {
                let (sa, sb) = (&scores[a], &scores[b]);
                sa.rank
                    .cmp(&sb.rank)
                    .then(sb.p_value.total_cmp(&sa.p_value))
                    .then(a.cmp(&b))
            });
            let found = if cfg.method == Method::HyperMaxent {
                order.first().copied()
            } else {
                order.into_iter().find(|&i| {
                    (0..scores.len())
                        .filter(|&j| j != i && implies(i, j))
                        .all(|j| {
                            let (s, c) = (&scores[i], &scores[j]);
                            chi2_p_value(lrt_dof(s, c), lrt_statistic(s, c, n))
                                >= cfg.alpha_lrt(s, c, n)
                        })
                })
            };
            Some(match found {
                Some(index) => Choice {
                    index,
                    fallback: false,
                },
                None => Choice {
                    index: saturated(scores),
                    fallback: true,
                },
            })
        }
    }
}

fn saturated(scores: &[ModelScore]) -> usize {
    (0..scores.len()).fold(0, |best, i| {
        if scores[i].rank > scores[best].rank {
            i
        } else {
            best
        }
    })
}

/// `implies[i][j]` is true iff `candidates[j]` implies `candidates[i]`.
pub fn implication_table(candidates: &[ArchitectureMatrix]) -> Vec<Vec<bool>> {
    candidates
        .iter()
        .map(|a| {
            candidates
                .iter()
                .map(|b| a.rank() <= b.rank() && constraints::nesting_map(a, b).is_some())
                .collect()
        })
        .collect()
}

/// Selection result with the full score table.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Candidate id (position in the input list).
    pub chosen: usize,
    pub fallback: bool,
    /// One row per solvable candidate, in input order.
    pub scores: Vec<ModelScore>,
}

/// Scores every candidate on `f` and applies `cfg`. Unsolvable candidates are
/// skipped with a warning.
pub fn select(
    candidates: &[ArchitectureMatrix],
    f: &Distribution,
    n: f64,
    cfg: &SelectionConfig,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::NoSolvableCandidate);
    }
    let opts = SolveOptions::newton();
    let mut scores = Vec::with_capacity(candidates.len());
    for (id, r) in candidates.iter().enumerate() {
        match score(id, r, f, n, None, &opts) {
            Ok((s, _)) => scores.push(s),
            Err(e) => log::warn!("candidate {id} skipped: {e}"),
        }
    }
    if scores.is_empty() {
        return Err(Error::NoSolvableCandidate);
    }
    let table = implication_table(candidates);
    let implies = |i: usize, j: usize| table[scores[i].id][scores[j].id];
    let c = choose(&scores, &implies, n, cfg).ok_or(Error::NoSolvableCandidate)?;
    Ok(Selection {
        chosen: scores[c.index].id,
        fallback: c.fallback,
        scores,
    })
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl ErrorEstimate {
    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidConfig("at least one trial required".into()));
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            mean,
            std_error: (var / n).sqrt(),
            trials: v.len(),
        })
    }
}

fn sample_fit<R: Rng + ?Sized>(
    r: &ArchitectureMatrix,
    q: &Distribution,
    n: u64,
    rng: &mut R,
) -> Result<Distribution> {
    let f = Distribution::from_counts(&simplex::multinomial_sample(q, n, rng));
    Ok(fit_empirical(r, &f, None, &SolveOptions::newton())?.distribution)
}

fn check_error_inputs(r: &ArchitectureMatrix, q: &Distribution, trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial required".into()));
    }
    if q.len() != r.states() {
        return Err(Error::DimensionMismatch {
            expected: r.states(),
            found: q.len(),
        });
    }
    if !q.is_strictly_positive() {
        return Err(Error::InvalidDistribution(
            "generating distribution must be strictly positive".into(),
        ));
    }
    Ok(())
}

/// Mean of `N·KL(q‖p̂)` over training samples of size `N` drawn from `q`.
pub fn mc_training_error<R: Rng + ?Sized>(
    r_model: &ArchitectureMatrix,
    q: &Distribution,
    n: u64,
    trials: usize,
    rng: &mut R,
) -> Result<ErrorEstimate> {
    check_error_inputs(r_model, q, trials)?;
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p_hat = sample_fit(r_model, q, n, rng)?;
        values.push(n as f64 * simplex::kl_or_infinite(q, &p_hat));
    }
    ErrorEstimate::from_values(&values)
}

/// Mean of `N·KL(g‖p̂_f)` over training samples `f` and independent test samples
/// `g`, both of size `N`. The standard error is taken over training samples.
pub fn mc_test_error<R: Rng + ?Sized>(
    r_model: &ArchitectureMatrix,
    q: &Distribution,
    n: u64,
    trials: usize,
    test_trials: usize,
    rng: &mut R,
) -> Result<ErrorEstimate> {
    check_error_inputs(r_model, q, trials)?;
    if test_trials == 0 {
        return Err(Error::InvalidConfig(
            "at least one test sample required".into(),
        ));
    }
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p_hat = sample_fit(r_model, q, n, rng)?;
        let mut acc = 0.0;
        for _ in 0..test_trials {
            let g = Distribution::from_counts(&simplex::multinomial_sample(q, n, rng));
            acc += n as f64 * simplex::kl_or_infinite(&g, &p_hat);
        }
        values.push(acc / test_trials as f64);
    }
    ErrorEstimate::from_values(&values)
}
