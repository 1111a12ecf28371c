//! Symmetric positive (semi)definite solves for normal equations.
//!
//! Gram matrices here mix columns whose magnitudes differ by many orders
//! (accelerations next to positions), so every solve first equilibrates the
//! matrix to unit diagonal, measures the reciprocal condition number of the
//! equilibrated matrix, and then factorizes with symmetric diagonal pivoting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Reciprocal condition number below which a Gram matrix counts as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Outcome of a successful symmetric solve.
#[derive(Debug, Clone)]
pub struct SymSolution {
    pub x: DVector<f64>,
    /// Reciprocal 2-norm condition number of the equilibrated matrix.
    pub rcond: f64,
}

fn equilibration(a: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut d = DVector::zeros(n);
    for i in 0..n {
        let aii = a[(i, i)];
        if !(aii > 0.0) || !aii.is_finite() {
            return None;
        }
        d[i] = 1.0 / aii.sqrt();
    }
    Some(d)
}

fn scaled(a: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut s = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            s[(i, j)] = d[i] * a[(i, j)] * d[j];
        }
    }
    // exact symmetry for the eigen solver
    for j in 0..n {
        for i in 0..j {
            let m = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = m;
            s[(j, i)] = m;
        }
    }
    s
}

/// Reciprocal condition number of `a` after diagonal equilibration.
/// Returns 0 for matrices with a non-positive diagonal entry.
pub fn rcond_equilibrated(a: &DMatrix<f64>) -> f64 {
    match equilibration(a) {
        Some(d) => rcond_of(&scaled(a, &d)),
        None => 0.0,
    }
}

fn rcond_of(s: &DMatrix<f64>) -> f64 {
    if s.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(s.clone());
    let max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !min.is_finite() || min <= 0.0 {
        0.0
    } else {
        min / max
    }
}

/// `L D L^T` factorization with symmetric diagonal pivoting, `P A P^T = L D L^T`.
struct PivotedLdl {
    l: DMatrix<f64>,
    d: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedLdl {
    fn new(mut a: DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = DMatrix::<f64>::identity(n, n);
        let mut d = vec![0.0; n];
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, i)].abs().total_cmp(&a[(j, j)].abs()))
                .unwrap();
            if p != k {
                a.swap_rows(k, p);
                a.swap_columns(k, p);
                perm.swap(k, p);
                // swap the already computed multipliers
                for c in 0..k {
                    let tmp = l[(k, c)];
                    l[(k, c)] = l[(p, c)];
                    l[(p, c)] = tmp;
                }
            }
            let pivot = a[(k, k)];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return None;
            }
            d[k] = pivot;
            for i in k + 1..n {
                l[(i, k)] = a[(i, k)] / pivot;
            }
            for j in k + 1..n {
                let ljk = l[(j, k)];
                for i in j..n {
                    let v = a[(i, j)] - l[(i, k)] * pivot * ljk;
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
        }
        Some(Self { l, d, perm })
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = b.len();
        let mut z: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[(i, k)] * z[k];
            }
            z[i] = s;
        }
        for i in 0..n {
            z[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * z[k];
            }
            z[i] = s;
        }
        let mut x = DVector::zeros(n);
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }
}

/// Solves `a x = b` for a symmetric positive definite `a`.
///
/// `what` names the matrix in the singularity error.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, what: &'static str) -> Result<SymSolution> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dims("symmetric solve (square)", n, a.ncols()));
    }
    if b.len() != n {
        return Err(Error::dims("symmetric solve rhs", n, b.len()));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    let singular = |rcond: f64| Error::Singular {
        what,
        rcond,
        threshold: RCOND_THRESHOLD,
    };
    let d = equilibration(a).ok_or_else(|| singular(0.0))?;
    let s = scaled(a, &d);
    let rcond = rcond_of(&s);
    if rcond < RCOND_THRESHOLD {
        return Err(singular(rcond));
    }
    let ldl = PivotedLdl::new(s).ok_or_else(|| singular(0.0))?;

    let db = b.component_mul(&d);
    let mut z = ldl.solve(&db);
    // one step of refinement against the original matrix
    let x0 = z.component_mul(&d);
    let r = b - a * &x0;
    z += ldl.solve(&r.component_mul(&d));
    Ok(SymSolution {
        x: z.component_mul(&d),
        rcond,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_badly_scaled_system() {
        // columns spanning twelve orders of magnitude
        let scales = [1e3, 1.0, 1e-2, 1e-9];
        let n = scales.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let base = if i == j {
                    2.0
                } else {
                    0.3 / (1.0 + (i + j) as f64)
                };
                a[(i, j)] = base * scales[i] * scales[j];
            }
        }
        // solution components of comparable size once scaled
        let x_true = DVector::from_vec(vec![18.8e-3, 172.0, 7.21e2, -3.1e9]);
        let b = &a * &x_true;
        let sol = solve_spd(&a, &b, "test").unwrap();
        for i in 0..n {
            assert!(
                ((sol.x[i] - x_true[i]) / x_true[i]).abs() < 1e-10,
                "{i}: {}",
                sol.x[i]
            );
        }
        assert!(sol.rcond > 0.1);
    }

    #[test]
    fn rank_deficient_is_singular() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(matches!(
            solve_spd(&a, &b, "t"),
            Err(Error::Singular { .. })
        ));
        assert_eq!(rcond_equilibrated(&a), 0.0);
    }

    #[test]
    fn zero_diagonal_is_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            solve_spd(&a, &b, "t"),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn pivoting_permutation_roundtrip() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.1, 0.2, 9.0, 0.5, 0.1, 0.5, 4.0]);
        let x = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let sol = solve_spd(&a, &(&a * &x), "t").unwrap();
        assert!((sol.x - x).amax() < 1e-14);
    }
}
