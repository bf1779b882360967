//! MaxEnt distribution of an equivalence class.
//!
//! The MaxEnt point has exponential form `p̂ = exp(Rᵀθ̂)` (no zero-probability
//! microstates). [`solve_newton`] iterates on the Lagrange multipliers `θ`
//! starting from the uniform distribution:
//!
//! ```text
//! p⁽ⁿ⁺¹⁾_α = p⁽ⁿ⁾_α · exp{ −Σ_ab R_aα (J⁻¹)_ab (m⁽ⁿ⁾_b − m̂_b) },   J_ab = Σ_α R_aα p_α R_bα
//! ```
//!
//! [`solve_ipf`] cycles through a binary coefficient matrix, rescaling each
//! marginal in turn.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::constraints::{self, ArchitectureMatrix, CoefficientMatrix, KernelBasis};
use crate::linalg::{self, Cholesky};
use crate::simplex::Distribution;
use crate::{Error, Result};

/// Probabilities below this after convergence trigger a boundary check.
const BOUNDARY_SUSPECT: f64 = 1e-9;
/// Multipliers beyond this magnitude mean the moments sit outside the interior.
const THETA_LIMIT: f64 = 300.0;
const JACOBIAN_PIVOT_TOL: f64 = 1e-14;
/// Consecutive draws outside the simplex before giving up.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Maximum moment residual `max_a |m_a − m̂_a|` at convergence.
    pub tolerance: f64,
    /// Newton iterations, or single-constraint updates for IPF.
    pub max_iterations: usize,
    /// Maximum number of step halvings per Newton iteration.
    pub max_halvings: usize,
}

impl SolveOptions {
    pub fn newton() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 500,
            max_halvings: 30,
        }
    }

    pub fn ipf() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50_000,
            max_halvings: 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be > 0 and max_iterations >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::newton()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntSolution {
    pub distribution: Distribution,
    /// Lagrange multipliers `θ̂` (Newton only), one per architecture row.
    pub multipliers: Option<Vec<f64>>,
    pub iterations: usize,
    /// Final `max_a |m_a − m̂_a|`.
    pub residual: f64,
}

struct Iterate {
    p: Vec<f64>,
    resid: Vec<f64>,
    norm2: f64,
}

fn evaluate(r: &ArchitectureMatrix, theta: &[f64]) -> Iterate {
    let p: Vec<f64> = r
        .rows()
        .tr_mul_vec(theta)
        .into_iter()
        .map(f64::exp)
        .collect();
    let m = r.rows().mul_vec(&p);
    let resid: Vec<f64> = m.iter().zip(r.moments()).map(|(a, b)| a - b).collect();
    let norm2 = linalg::dot(&resid, &resid);
    Iterate { p, resid, norm2 }
}

fn worst_constraint(resid: &[f64]) -> (usize, f64) {
    resid
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.abs()))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        )
}

/// Damped Newton-Raphson on the Lagrange multipliers.
///
/// A step that fails to decrease the moment residual is halved, up to
/// `max_halvings` times. Moments on the boundary of (or outside) the marginal
/// polytope are reported as [`Error::InfeasibleMoments`]; exclude zero-probability
/// microstates beforehand.
pub fn solve_newton(r: &ArchitectureMatrix, opts: &SolveOptions) -> Result<MaxEntSolution> {
    solve_newton_from(r, None, opts)
}

/// [`solve_newton`] started from the member of the exponential family closest
/// (in least squares on the log scale) to `log_guess` instead of the uniform
/// distribution. The solution does not depend on the start.
pub fn solve_newton_from(
    r: &ArchitectureMatrix,
    log_guess: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<MaxEntSolution> {
    opts.validate()?;
    let n = r.states();
    if let Some(g) = log_guess {
        if g.len() != n || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(
                "initial guess must be finite with one entry per state".into(),
            ));
        }
    }
    let ones = vec![1.0; n];
    let mut targets: Vec<&[f64]> = vec![&ones];
    if let Some(g) = log_guess {
        targets.push(g);
    }
    let mut coeffs = linalg::row_space_coefficients_many(r.rows(), &targets)
        .ok_or(Error::SingularJacobian { iteration: 0 })?;
    let guess_coeffs = if coeffs.len() > 1 { coeffs.pop() } else { None };
    let ones_coeffs = coeffs.pop().expect("ones coefficients");
    let ln_n = (n as f64).ln();
    let mut theta: Vec<f64> = ones_coeffs.iter().map(|c| -ln_n * c).collect();
    let mut it = evaluate(r, &theta);
    if let Some(t) = guess_coeffs {
        let guess = evaluate(r, &t);
        if guess.norm2.is_finite() && guess.norm2 < it.norm2 {
            theta = t;
            it = guess;
        }
    }
    let mut iterations = 0;

    loop {
        let (_, rmax) = worst_constraint(&it.resid);
        if rmax <= opts.tolerance {
            break;
        }
        if iterations >= opts.max_iterations {
            let (worst, residual) = worst_constraint(&it.resid);
            let min_p = it.p.iter().copied().fold(f64::INFINITY, f64::min);
            if min_p < 1e-12 || linalg::max_abs(&theta) > THETA_LIMIT {
                return Err(Error::InfeasibleMoments {
                    constraint: worst,
                    residual,
                });
            }
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
        iterations += 1;
        let step = match newton_step(r, &theta, &it, opts, iterations) {
            Err(e @ Error::SingularJacobian { .. }) => {
                return Err(diagnose_boundary(r, &it.resid).unwrap_or(e))
            }
            other => other?,
        };
        match step {
            Some((t, next)) => {
                theta = t;
                it = next;
            }
            None => {
                let (worst, residual) = worst_constraint(&it.resid);
                return Err(Error::InfeasibleMoments {
                    constraint: worst,
                    residual,
                });
            }
        }
        if linalg::max_abs(&theta) > THETA_LIMIT {
            let (worst, residual) = worst_constraint(&it.resid);
            return Err(Error::InfeasibleMoments {
                constraint: worst,
                residual,
            });
        }
    }

    // Quadratic convergence: one more step usually lands at rounding level.
    if worst_constraint(&it.resid).1 > 1e-13 {
        if let Ok(Some((t, next))) = newton_step(r, &theta, &it, opts, iterations + 1) {
            theta = t;
            it = next;
        }
    }

    let min_p = it.p.iter().copied().fold(f64::INFINITY, f64::min);
    if min_p < BOUNDARY_SUSPECT {
        if let Some(e) = diagnose_boundary(r, &it.resid) {
            return Err(e);
        }
    }

    let sum: f64 = it.p.iter().sum();
    let ln_sum = sum.ln();
    for (t, c) in theta.iter_mut().zip(&ones_coeffs) {
        *t -= ln_sum * c;
    }
    let distribution = Distribution::from_weights(it.p);
    let residual = r.residual(distribution.probs());
    Ok(MaxEntSolution {
        distribution,
        multipliers: Some(theta),
        iterations,
        residual,
    })
}

/// `InfeasibleMoments` if the moments lie outside the marginal polytope or on its
/// boundary, naming a constraint involved.
fn diagnose_boundary(r: &ArchitectureMatrix, resid: &[f64]) -> Option<Error> {
    match constraints::facial_support(r) {
        Ok(support) if support.is_full() => None,
        Ok(support) => {
            let dropped = support.keep().iter().position(|&k| !k)?;
            let constraint = (0..r.rank())
                .find(|&a| r.rows()[(a, dropped)] != 0.0)
                .unwrap_or(0);
            Some(Error::InfeasibleMoments {
                constraint,
                residual: 0.0,
            })
        }
        Err(_) => {
            let (constraint, residual) = worst_constraint(resid);
            Some(Error::InfeasibleMoments {
                constraint,
                residual,
            })
        }
    }
}

/// One safeguarded Newton step. `Ok(None)` when no halving decreases the residual.
fn newton_step(
    r: &ArchitectureMatrix,
    theta: &[f64],
    it: &Iterate,
    opts: &SolveOptions,
    iteration: usize,
) -> Result<Option<(Vec<f64>, Iterate)>> {
    let jac = r.rows().weighted_gram(&it.p);
    let chol =
        Cholesky::new(&jac, JACOBIAN_PIVOT_TOL).ok_or(Error::SingularJacobian { iteration })?;
    let step = chol.solve(&it.resid);
    let mut t = 1.0;
    for _ in 0..=opts.max_halvings {
        let trial: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
        let next = evaluate(r, &trial);
        if next.norm2.is_finite() && next.norm2 < it.norm2 {
            return Ok(Some((trial, next)));
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Iterative proportional fitting on a binary coefficient matrix.
///
/// Cycles through the rows applying `p_α ← p_α · (m̂_a / m_a)^{C_aα}` and stops when
/// every moment residual is within tolerance after a full cycle.
pub fn solve_ipf(c: &CoefficientMatrix, opts: &SolveOptions) -> Result<MaxEntSolution> {
    opts.validate()?;
    if !c.is_binary() {
        return Err(Error::InvalidCoefficients(
            "IPF requires 0/1 coefficient rows".into(),
        ));
    }
    let rows: Vec<Vec<usize>> = c
        .rows()
        .rows_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, &x)| x == 1.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let targets = c.moments();
    if let Some((a, &t)) = targets.iter().enumerate().find(|(_, &t)| !(t > 0.0)) {
        if t == 0.0 {
            return Err(Error::InfeasibleMoments {
                constraint: a,
                residual: 0.0,
            });
        }
        return Err(Error::InfeasibleMoments {
            constraint: a,
            residual: t.abs(),
        });
    }
    let mut p = vec![1.0 / c.states() as f64; c.states()];
    let mut updates = 0;
    let mut cycles = 0;
    loop {
        for (a, idx) in rows.iter().enumerate() {
            let m: f64 = idx.iter().map(|&j| p[j]).sum();
            if m <= 0.0 {
                return Err(Error::ZeroMarginal {
                    constraint: a,
                    target: targets[a],
                });
            }
            let ratio = targets[a] / m;
            for &j in idx {
                p[j] *= ratio;
            }
            updates += 1;
        }
        cycles += 1;
        let resid = rows
            .iter()
            .zip(targets)
            .map(|(idx, t)| (idx.iter().map(|&j| p[j]).sum::<f64>() - t).abs())
            .fold(0.0_f64, f64::max);
        if resid <= opts.tolerance {
            break;
        }
        if updates >= opts.max_iterations {
            return Err(Error::NoConvergence {
                iterations: updates,
                residual: resid,
            });
        }
    }
    let distribution = Distribution::from_weights(p);
    let m = c.rows().mul_vec(distribution.probs());
    let residual = m
        .iter()
        .zip(targets)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    Ok(MaxEntSolution {
        distribution,
        multipliers: None,
        iterations: cycles,
        residual,
    })
}

/// Max-norm distance of `log p` from the row space of `R`. Zero for an exact
/// MaxEnt solution.
pub fn exponential_form_residual(r: &ArchitectureMatrix, p: &Distribution) -> f64 {
    let logp: Vec<f64> = p.probs().iter().map(|x| x.ln()).collect();
    match linalg::row_space_coefficients(r.rows(), &logp) {
        Some(c) => {
            let fit = r.rows().tr_mul_vec(&c);
            fit.iter()
                .zip(&logp)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        }
        None => f64::INFINITY,
    }
}

/// Draws a member of the equivalence class near the MaxEnt point:
/// `p_α = p̂_α + √(p̂_α/N) Σ_i x_i X_iα` with standard-normal `x`. Draws leaving the
/// simplex are rejected.
pub fn sample_equivalence_class<R: Rng + ?Sized>(
    sol: &MaxEntSolution,
    kernel: &KernelBasis,
    n: f64,
    rng: &mut R,
) -> Result<Distribution> {
    let p_hat = sol.distribution.probs();
    if kernel.vectors().is_empty() {
        return Ok(sol.distribution.clone());
    }
    if kernel.vectors()[0].len() != p_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: p_hat.len(),
            found: kernel.vectors()[0].len(),
        });
    }
    let scale: Vec<f64> = p_hat.iter().map(|p| (p / n).sqrt()).collect();
    for _ in 0..MAX_REJECTIONS {
        let mut pi = vec![0.0; p_hat.len()];
        for v in kernel.vectors() {
            let x: f64 = rng.sample(StandardNormal);
            for (a, b) in pi.iter_mut().zip(v) {
                *a += x * b;
            }
        }
        let p: Vec<f64> = p_hat
            .iter()
            .zip(&scale)
            .zip(&pi)
            .map(|((ph, s), x)| ph + s * x)
            .collect();
        if p.iter().all(|&x| x >= 0.0) {
            return Distribution::new(p);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: MAX_REJECTIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::to_architecture;
    use crate::linalg::Matrix;

    fn table_2x2() -> CoefficientMatrix {
        // Microstates (row, col): 00, 01, 10, 11. Row marginal P(row=0)=0.6,
        // column marginal P(col=0)=0.3.
        CoefficientMatrix::new(
            Matrix::from_rows(&[
                vec![1.0; 4],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0, 0.0, 1.0, 0.0],
            ]),
            vec![1.0, 0.6, 0.3],
        )
        .unwrap()
    }

    #[test]
    fn newton_normalization_only_is_uniform() {
        let c = CoefficientMatrix::new(Matrix::from_rows(&[vec![1.0; 5]]), vec![1.0]).unwrap();
        let sol = solve_newton(&to_architecture(&c).unwrap(), &SolveOptions::newton()).unwrap();
        assert!(sol.distribution.max_abs_diff(&Distribution::uniform(5)) < 1e-15);
    }

    #[test]
    fn newton_identity_returns_frequencies() {
        let f = [0.1, 0.2, 0.3, 0.4];
        let mut rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| f64::from(i == j)).collect())
            .collect();
        rows.push(vec![1.0; 4]);
        let c = CoefficientMatrix::new(Matrix::from_rows(&rows), vec![0.1, 0.2, 0.3, 0.4, 1.0])
            .unwrap();
        let sol = solve_newton(&to_architecture(&c).unwrap(), &SolveOptions::newton()).unwrap();
        for (a, b) in sol.distribution.probs().iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn product_distribution_from_marginals() {
        let expected = [0.18, 0.42, 0.12, 0.28];
        let sol = solve_newton(
            &to_architecture(&table_2x2()).unwrap(),
            &SolveOptions::newton(),
        )
        .unwrap();
        let ipf = solve_ipf(&table_2x2(), &SolveOptions::ipf()).unwrap();
        for i in 0..4 {
            assert!((sol.distribution.probs()[i] - expected[i]).abs() < 1e-12);
            assert!((ipf.distribution.probs()[i] - expected[i]).abs() < 1e-9);
        }
        assert!(sol.residual <= 1e-10);
        assert!(sol.multipliers.as_ref().unwrap().len() == 3);
    }

    #[test]
    fn ipf_single_normalization_row() {
        let c = CoefficientMatrix::new(Matrix::from_rows(&[vec![1.0; 3]]), vec![1.0]).unwrap();
        let sol = solve_ipf(&c, &SolveOptions::ipf()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.distribution.max_abs_diff(&Distribution::uniform(3)) < 1e-16);
    }

    #[test]
    fn boundary_moments_are_infeasible() {
        let c = CoefficientMatrix::new(
            Matrix::from_rows(&[vec![1.0; 4], vec![1.0, 1.0, 0.0, 0.0]]),
            vec![1.0, 0.0],
        )
        .unwrap();
        let r = to_architecture(&c).unwrap();
        assert!(matches!(
            solve_newton(&r, &SolveOptions::newton()),
            Err(Error::InfeasibleMoments { .. })
        ));
        assert!(matches!(
            solve_ipf(&c, &SolveOptions::ipf()),
            Err(Error::InfeasibleMoments { .. })
        ));
    }

    #[test]
    fn outside_polytope_is_infeasible() {
        let c = CoefficientMatrix::new(
            Matrix::from_rows(&[vec![1.0; 4], vec![1.0, 1.0, 0.0, 0.0]]),
            vec![1.0, 1.2],
        )
        .unwrap();
        let r = to_architecture(&c).unwrap();
        match solve_newton(&r, &SolveOptions::newton()) {
            Err(Error::InfeasibleMoments { constraint, .. }) => assert!(constraint < 2),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn options_are_validated() {
        let r = to_architecture(&table_2x2()).unwrap();
        let bad = SolveOptions {
            tolerance: 0.0,
            ..SolveOptions::newton()
        };
        assert!(matches!(
            solve_newton(&r, &bad),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn ipf_rejects_non_binary() {
        let c = CoefficientMatrix::new(
            Matrix::from_rows(&[vec![1.0; 3], vec![0.5, 0.0, 2.0]]),
            vec![1.0, 0.8],
        )
        .unwrap();
        assert!(matches!(
            solve_ipf(&c, &SolveOptions::ipf()),
            Err(Error::InvalidCoefficients(_))
        ));
    }
}
