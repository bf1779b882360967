//! Linear phenomenological constraints.
//!
//! A raw, possibly redundant [`CoefficientMatrix`] `C` with moments `m` is reduced
//! by Gauss-Jordan elimination to its reduced row-echelon form. Dropping the
//! redundant all-zero rows leaves the [`ArchitectureMatrix`] `R` of full row rank
//! `D`, which defines a model independently of how its constraints were written.
//! Columns are microstates in canonical (lexicographic) order, so two
//! architectures over the same space are equal iff their matrices are equal.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::linalg::{self, Matrix};
use crate::simplex::{Distribution, SupportMask};
use crate::{Error, Result};

/// Pivot threshold, relative to the largest remaining entry.
pub const PIVOT_TOLERANCE: f64 = 1e-9;

/// Maximum residual of `R = T·R'` accepted as an exact nesting.
pub const NESTING_TOLERANCE: f64 = 1e-9;

const SNAP: f64 = 1e-12;

/// Raw linear constraints `C p = m`, possibly redundant.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    rows: Matrix,
    moments: Vec<f64>,
}

impl CoefficientMatrix {
    /// Requires every row to have a nonzero entry and at least one all-ones
    /// (normalization) row.
    pub fn new(rows: Matrix, moments: Vec<f64>) -> Result<Self> {
        if rows.nrows() != moments.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.nrows(),
                found: moments.len(),
            });
        }
        if rows.ncols() < 2 {
            return Err(Error::InvalidCoefficients(
                "need at least 2 microstates".into(),
            ));
        }
        if let Some(i) = rows.rows_iter().position(|r| r.iter().all(|&x| x == 0.0)) {
            return Err(Error::InvalidCoefficients(format!("row {i} is all zeros")));
        }
        if let Some(i) = rows
            .rows_iter()
            .position(|r| r.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidCoefficients(format!(
                "row {i} has a non-finite entry"
            )));
        }
        if !rows.rows_iter().any(|r| r.iter().all(|&x| x == 1.0)) {
            return Err(Error::InvalidCoefficients(
                "no all-ones normalization row".into(),
            ));
        }
        Ok(Self { rows, moments })
    }

    /// Coefficient rows with the moments induced by `f`.
    pub fn from_distribution(rows: Matrix, f: &Distribution) -> Result<Self> {
        if rows.ncols() != f.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.ncols(),
                found: f.len(),
            });
        }
        let moments = rows.mul_vec(f.probs());
        Self::new(rows, moments)
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn states(&self) -> usize {
        self.rows.ncols()
    }

    pub fn is_binary(&self) -> bool {
        self.rows
            .rows_iter()
            .all(|r| r.iter().all(|&x| x == 0.0 || x == 1.0))
    }

    pub fn with_moments_of(&self, f: &Distribution) -> Result<Self> {
        Self::from_distribution(self.rows.clone(), f)
    }
}

/// Canonical full-row-rank constraint system in reduced row-echelon form.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureMatrix {
    rows: Matrix,
    moments: Vec<f64>,
    pivots: Vec<usize>,
}

impl ArchitectureMatrix {
    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    /// Pivot column of each row.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Number of independent constraints `D`.
    pub fn rank(&self) -> usize {
        self.rows.nrows()
    }

    /// Number of microstates `|A|`.
    pub fn states(&self) -> usize {
        self.rows.ncols()
    }

    /// Same architecture with the moments induced by `p`.
    pub fn rebind(&self, p: &Distribution) -> Result<Self> {
        Ok(Self {
            moments: induced_moments(self, p)?,
            ..self.clone()
        })
    }

    pub fn with_moments(&self, moments: Vec<f64>) -> Result<Self> {
        if moments.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                found: moments.len(),
            });
        }
        Ok(Self {
            moments,
            ..self.clone()
        })
    }

    /// Canonical architecture of the system restricted to the kept microstates.
    /// Excluded microstates are taken to carry zero probability.
    pub fn restrict(&self, mask: &SupportMask) -> Result<Self> {
        if mask.full_len() != self.states() {
            return Err(Error::DimensionMismatch {
                expected: self.states(),
                found: mask.full_len(),
            });
        }
        if mask.is_full() {
            return Ok(self.clone());
        }
        let sub = self.rows.select_columns(&mask.indices());
        let (rows, moments, pivots) = reduce(sub, self.moments.clone())?;
        Ok(Self {
            rows,
            moments,
            pivots,
        })
    }

    /// Whether every column sums to one and the moments sum to one, i.e. the
    /// normalization row is the sum of the canonical rows.
    pub fn satisfies_normalization(&self, tol: f64) -> bool {
        let cols_ok = (0..self.states())
            .all(|j| ((0..self.rank()).map(|a| self.rows[(a, j)]).sum::<f64>() - 1.0).abs() <= tol);
        cols_ok && (self.moments.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// Entrywise comparison of rows and moments.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows.nrows() == other.rows.nrows()
            && self.rows.ncols() == other.rows.ncols()
            && self.rows.max_abs_diff(&other.rows) <= tol
            && self
                .moments
                .iter()
                .zip(&other.moments)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Residual of `R p − m̂` in max norm.
    pub fn residual(&self, p: &[f64]) -> f64 {
        let m = self.rows.mul_vec(p);
        m.iter()
            .zip(&self.moments)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Reduced row-echelon form of the augmented system `[C | m]` with redundant rows
/// dropped.
pub fn to_architecture(c: &CoefficientMatrix) -> Result<ArchitectureMatrix> {
    let (rows, moments, pivots) = reduce(c.rows.clone(), c.moments.clone())?;
    let arch = ArchitectureMatrix {
        rows,
        moments,
        pivots,
    };
    if !arch.satisfies_normalization(1e-10)
        && c.rows.rows_iter().any(|r| r.iter().all(|&x| x == 1.0))
    {
        log::warn!("canonical architecture violates column-sum normalization");
    }
    Ok(arch)
}

/// Gauss-Jordan elimination with partial pivoting.
fn reduce(mut a: Matrix, mut rhs: Vec<f64>) -> Result<(Matrix, Vec<f64>, Vec<usize>)> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut pivots = Vec::new();
    let mut lead = 0;
    let rhs_scale = linalg::max_abs(&rhs).max(1.0);
    for col in 0..n {
        if lead == m {
            break;
        }
        let mut scale = 0.0_f64;
        for i in lead..m {
            for j in col..n {
                scale = scale.max(a[(i, j)].abs());
            }
        }
        if scale == 0.0 {
            break;
        }
        let (best, best_val) = (lead..m)
            .map(|i| (i, a[(i, col)].abs()))
            .fold((lead, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= PIVOT_TOLERANCE * scale {
            continue;
        }
        a.swap_rows(lead, best);
        rhs.swap(lead, best);
        let pv = a[(lead, col)];
        for x in a.row_mut(lead) {
            *x /= pv;
        }
        rhs[lead] /= pv;
        a[(lead, col)] = 1.0;
        let pivot_row = a.row(lead).to_vec();
        for i in 0..m {
            if i == lead {
                continue;
            }
            let factor = a[(i, col)];
            if factor == 0.0 {
                continue;
            }
            for (x, p) in a.row_mut(i).iter_mut().zip(&pivot_row) {
                *x -= factor * p;
                if x.abs() < SNAP {
                    *x = 0.0;
                }
            }
            a[(i, col)] = 0.0;
            rhs[i] -= factor * rhs[lead];
        }
        pivots.push(col);
        lead += 1;
    }
    for (i, &r) in rhs.iter().enumerate().skip(lead) {
        if r.abs() > PIVOT_TOLERANCE * rhs_scale {
            return Err(Error::InconsistentSystem { row: i, moment: r });
        }
    }
    for r in rhs.iter_mut().take(lead) {
        if r.abs() < SNAP {
            *r = 0.0;
        }
    }
    let data: Vec<f64> = (0..lead).flat_map(|i| a.row(i).to_vec()).collect();
    rhs.truncate(lead);
    Ok((Matrix::from_vec(lead, n, data), rhs, pivots))
}

/// `R · p`.
pub fn induced_moments(r: &ArchitectureMatrix, p: &Distribution) -> Result<Vec<f64>> {
    if p.len() != r.states() {
        return Err(Error::DimensionMismatch {
            expected: r.states(),
            found: p.len(),
        });
    }
    Ok(r.rows.mul_vec(p.probs()))
}

/// Orthonormal basis of the kernel of `R · diag(√p̂)`.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    vectors: Vec<Vec<f64>>,
    anchor: Distribution,
}

impl KernelBasis {
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn anchor(&self) -> &Distribution {
        &self.anchor
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

/// Kernel of the architecture after column-wise rescaling by `√anchor`.
///
/// The basis is obtained by orthonormalizing the rescaled rows and completing
/// them with coordinate axes; any orthonormal completion is valid.
pub fn kernel_basis(r: &ArchitectureMatrix, anchor: &Distribution) -> Result<KernelBasis> {
    let n = r.states();
    if anchor.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: anchor.len(),
        });
    }
    if !anchor.is_strictly_positive() {
        return Err(Error::InvalidDistribution(
            "kernel anchor must be strictly positive".into(),
        ));
    }
    let sqrt_p: Vec<f64> = anchor.probs().iter().map(|p| p.sqrt()).collect();
    let mut scaled = r.rows.clone();
    for a in 0..scaled.nrows() {
        for (x, s) in scaled.row_mut(a).iter_mut().zip(&sqrt_p) {
            *x *= s;
        }
    }
    let expected = n - r.rank();
    let q = linalg::orthonormal_rows(&scaled, 1e-10).ok_or(Error::RankDeficient {
        expected,
        found: usize::MAX,
    })?;
    let vectors = linalg::orthogonal_complement(&q, n, 1e-8);
    if vectors.len() != expected {
        return Err(Error::RankDeficient {
            expected,
            found: vectors.len(),
        });
    }
    Ok(KernelBasis {
        vectors,
        anchor: anchor.clone(),
    })
}

/// Linear map `T` with `R = T · R'` relating a model to a more complex one that
/// implies it.
#[derive(Debug, Clone, PartialEq)]
pub struct NestingMap {
    matrix: Matrix,
}

impl NestingMap {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// Returns the nesting map iff every row of `r` lies in the row space of
/// `r_complex`.
///
/// Because `R'` is in reduced row-echelon form its pivot columns form an identity
/// block, so the only candidate is `T = R[:, pivots(R')]`; the map exists iff
/// `T·R'` reproduces `R` within [`NESTING_TOLERANCE`].
pub fn nesting_map(r: &ArchitectureMatrix, r_complex: &ArchitectureMatrix) -> Option<NestingMap> {
    if r.states() != r_complex.states() || r.rank() > r_complex.rank() {
        return None;
    }
    let t = r.rows.select_columns(r_complex.pivots());
    let back = t.matmul(&r_complex.rows);
    (back.max_abs_diff(&r.rows) < NESTING_TOLERANCE).then_some(NestingMap { matrix: t })
}

/// Microstates that some non-negative solution of `R p = m̂` makes positive.
///
/// Solves the homogenized linear program
/// `max Σ y  s.t.  R p = s·m̂,  0 ≤ y ≤ 1,  y ≤ p,  p, s ≥ 0`,
/// whose optimum sets `y_α = 1` exactly on that support (the cone is invariant
/// under scaling, so any attainable positive entry can be pushed to 1).
/// Excluding the complement leaves a system whose MaxEnt is strictly positive.
pub fn facial_support(r: &ArchitectureMatrix) -> Result<SupportMask> {
    let n = r.states();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let p: Vec<_> = (0..n)
        .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();
    let y: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, 1.0))).collect();
    let s = lp.add_var(0.0, (0.0, f64::INFINITY));
    for (row, &m) in r.rows.rows_iter().zip(&r.moments) {
        let mut expr: Vec<_> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (p[j], v))
            .collect();
        if m != 0.0 {
            expr.push((s, -m));
        }
        lp.add_constraint(&expr[..], ComparisonOp::Eq, 0.0);
    }
    for j in 0..n {
        lp.add_constraint(&[(y[j], 1.0), (p[j], -1.0)][..], ComparisonOp::Le, 0.0);
    }
    let sol = lp.solve().map_err(|_| Error::InfeasibleMoments {
        constraint: 0,
        residual: f64::NAN,
    })?;
    let keep: Vec<bool> = y.iter().map(|&v| sol[v] > 0.5).collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::InfeasibleMoments {
            constraint: 0,
            residual: f64::NAN,
        });
    }
    Ok(SupportMask::new(keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(rows: &[Vec<f64>], m: &[f64]) -> CoefficientMatrix {
        CoefficientMatrix::new(Matrix::from_rows(rows), m.to_vec()).unwrap()
    }

    #[test]
    fn duplicate_rows_collapse() {
        let c = coeffs(
            &[
                vec![1.0, 1.0, 1.0, 1.0],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0, 1.0, 0.0, 0.0],
            ],
            &[1.0, 0.6, 0.6],
        );
        let r = to_architecture(&c).unwrap();
        assert_eq!(r.rank(), 2);
        assert!(r.satisfies_normalization(1e-12));
    }

    #[test]
    fn normalization_only_and_identity() {
        let r = to_architecture(&coeffs(&[vec![1.0; 3]], &[1.0])).unwrap();
        assert_eq!(r.rank(), 1);
        assert_eq!(r.rows().row(0), &[1.0, 1.0, 1.0]);

        let f = [0.2, 0.3, 0.5];
        let mut rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| f64::from(i == j)).collect())
            .collect();
        rows.push(vec![1.0; 3]);
        let r = to_architecture(&coeffs(&rows, &[0.2, 0.3, 0.5, 1.0])).unwrap();
        assert_eq!(r.rank(), 3);
        assert!(r.rows().max_abs_diff(&Matrix::identity(3)) == 0.0);
        assert_eq!(r.moments(), &f);
    }

    #[test]
    fn inconsistent_system_detected() {
        let c = coeffs(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 0.7]);
        assert!(matches!(
            to_architecture(&c),
            Err(Error::InconsistentSystem { .. })
        ));
    }

    #[test]
    fn rref_is_idempotent() {
        let c = coeffs(
            &[
                vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
                vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            ],
            &[1.0, 0.4, 0.2, 0.5, 0.3],
        );
        let r = to_architecture(&c).unwrap();
        assert_eq!(r.rank(), 4);
        let (rows, m, _) = reduce(r.rows().clone(), r.moments().to_vec()).unwrap();
        let again = ArchitectureMatrix {
            rows,
            moments: m,
            pivots: r.pivots().to_vec(),
        };
        assert!(again.approx_eq(&r, 1e-12));
    }

    #[test]
    fn kernel_basis_two_states() {
        let r = to_architecture(&coeffs(&[vec![1.0, 1.0]], &[1.0])).unwrap();
        let k = kernel_basis(&r, &Distribution::uniform(2)).unwrap();
        assert_eq!(k.dim(), 1);
        let v = &k.vectors()[0];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].abs() - s).abs() < 1e-12 && (v[0] + v[1]).abs() < 1e-12);
    }

    #[test]
    fn kernel_basis_identity_is_empty() {
        let r = to_architecture(&coeffs(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            &[0.5, 0.5, 1.0],
        ))
        .unwrap();
        assert_eq!(
            kernel_basis(&r, &Distribution::uniform(2)).unwrap().dim(),
            0
        );
    }

    #[test]
    fn nesting_examples() {
        let ones = vec![1.0; 4];
        let a = vec![1.0, 1.0, 0.0, 0.0];
        let b = vec![1.0, 0.0, 1.0, 0.0];
        let ra = to_architecture(&coeffs(&[ones.clone(), a.clone()], &[1.0, 0.5])).unwrap();
        let rb = to_architecture(&coeffs(&[ones.clone(), b.clone()], &[1.0, 0.5])).unwrap();
        let rab = to_architecture(&coeffs(&[ones, a, b], &[1.0, 0.5, 0.5])).unwrap();
        let id = nesting_map(&ra, &ra).unwrap();
        assert!(id.matrix().max_abs_diff(&Matrix::identity(2)) < 1e-15);
        assert!(nesting_map(&ra, &rab).is_some());
        assert!(nesting_map(&rb, &rab).is_some());
        assert!(nesting_map(&ra, &rb).is_none());
        assert!(nesting_map(&rab, &ra).is_none());
    }

    #[test]
    fn facial_support_drops_forced_zeros() {
        // Marginal of the first two states is zero.
        let c = coeffs(
            &[
                vec![1.0; 4],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ],
            &[1.0, 0.0, 0.3],
        );
        let r = to_architecture(&c).unwrap();
        let mask = facial_support(&r).unwrap();
        assert_eq!(mask.keep(), &[false, false, true, true]);

        let c = coeffs(&[vec![1.0; 4], vec![1.0, 1.0, 0.0, 0.0]], &[1.0, 0.4]);
        assert!(facial_support(&to_architecture(&c).unwrap())
            .unwrap()
            .is_full());
    }

    #[test]
    fn facial_support_rejects_outside_polytope() {
        let c = coeffs(&[vec![1.0; 3], vec![1.0, 0.0, 0.0]], &[1.0, 1.3]);
        let r = to_architecture(&c).unwrap();
        assert!(matches!(
            facial_support(&r),
            Err(Error::InfeasibleMoments { .. })
        ));
    }
}
