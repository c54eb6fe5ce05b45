//! Dense symmetric factorization with pivot monitoring, plus an
//! active-set-style clamp-and-re-solve loop for bounded (motor) rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solver::SolveDiagnostics;

/// Cholesky factor that tracks its smallest pivot.
struct MonitoredCholesky {
    l: DMatrix<f64>,
}

/// Factorize a symmetric matrix, declaring it singular when any pivot falls
/// below `rank_tolerance` times the largest pivot seen.
fn factor(a: &DMatrix<f64>, rank_tolerance: f64) -> Result<MonitoredCholesky> {
    let n = a.nrows();
    let mut l = a.clone_owned();
    let mut max_pivot: f64 = 0.0;
    for j in 0..n {
        let mut d = l[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        max_pivot = max_pivot.max(d);
        if !(d.is_finite()) || d <= rank_tolerance * max_pivot.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularSystem(format!(
                "pivot {d:.3e} at row {j} below rank tolerance {rank_tolerance:.1e} × {max_pivot:.3e}"
            )));
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut v = l[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok(MonitoredCholesky { l })
}

impl MonitoredCholesky {
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.l.nrows();
        let mut x = b.clone_owned();
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[(i, k)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.l[(k, i)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
        x
    }
}

/// Solve `A·λ = b` with bounds by factorization.
///
/// Bilateral rows (infinite bounds) solve directly; bounded rows are
/// handled by clamp-and-re-solve: solve unbounded, clamp violators to
/// their bounds, move them to the right-hand side, repeat — at most
/// row-count passes. Raises [`Error::SingularSystem`] when a pivot falls
/// under `rank_tolerance` relative to the largest pivot.
pub fn direct_solve(
    a: &DMatrix<f64>,
    b: &[f64],
    bounds: &[(f64, f64)],
    rank_tolerance: f64,
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let m = b.len();
    assert_eq!(a.nrows(), m);
    assert_eq!(a.ncols(), m);
    assert_eq!(bounds.len(), m);
    if m == 0 {
        return Ok((
            Vec::new(),
            SolveDiagnostics {
                iterations_used: 0,
                residual: 0.0,
                rank: 0,
                dropped_rows: Vec::new(),
                singular_flag: false,
            },
        ));
    }

    // clamped[i] = Some(value) once row i is pinned at a bound.
    let mut clamped: Vec<Option<f64>> = vec![None; m];
    let mut lambda = vec![0.0; m];
    let mut passes = 0;
    loop {
        passes += 1;
        let free: Vec<usize> = (0..m).filter(|&i| clamped[i].is_none()).collect();
        if !free.is_empty() {
            let nf = free.len();
            let mut af = DMatrix::zeros(nf, nf);
            let mut bf = DVector::zeros(nf);
            for (ri, &i) in free.iter().enumerate() {
                let mut rhs = b[i];
                for (j, c) in clamped.iter().enumerate() {
                    if let Some(v) = c {
                        rhs -= a[(i, j)] * v;
                    }
                }
                bf[ri] = rhs;
                for (rj, &j) in free.iter().enumerate() {
                    af[(ri, rj)] = a[(i, j)];
                }
            }
            let chol = factor(&af, rank_tolerance)?;
            let xf = chol.solve(&bf);
            for (ri, &i) in free.iter().enumerate() {
                lambda[i] = xf[ri];
            }
        }
        for (i, c) in clamped.iter().enumerate() {
            if let Some(v) = c {
                lambda[i] = *v;
            }
        }

        // Clamp every out-of-bounds free row; done when none violate.
        let mut any = false;
        for &i in &(0..m).collect::<Vec<_>>() {
            if clamped[i].is_some() {
                continue;
            }
            let (lo, hi) = bounds[i];
            if lambda[i] < lo {
                clamped[i] = Some(lo);
                any = true;
            } else if lambda[i] > hi {
                clamped[i] = Some(hi);
                any = true;
            }
        }
        if !any || passes >= m {
            break;
        }
    }

    // Residual: |A·λ − b| on free rows, complementarity on clamped ones.
    let lam = DVector::from_column_slice(&lambda);
    let w = a * &lam - DVector::from_column_slice(b);
    let mut residual: f64 = 0.0;
    for i in 0..m {
        let v = match clamped[i] {
            None => w[i].abs(),
            Some(v) if v == bounds[i].0 => (-w[i]).max(0.0),
            Some(_) => w[i].max(0.0),
        };
        residual = residual.max(v);
    }

    Ok((
        lambda,
        SolveDiagnostics {
            iterations_used: passes,
            residual,
            rank: m,
            dropped_rows: Vec::new(),
            singular_flag: false,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_system_is_fine() {
        let a = DMatrix::zeros(0, 0);
        let (lambda, diag) = direct_solve(&a, &[], &[], 1e-8).unwrap();
        assert!(lambda.is_empty());
        assert!(!diag.singular_flag);
    }

    #[test]
    fn solves_spd_system() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = [1.0, 2.0];
        let unb = [(f64::NEG_INFINITY, f64::INFINITY); 2];
        let (lambda, diag) = direct_solve(&a, &b, &unb, 1e-10).unwrap();
        let x = a * DVector::from_column_slice(&lambda);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
        assert!(diag.residual < 1e-12);
    }

    #[test]
    fn singular_matrix_is_detected() {
        // Duplicated row → zero pivot.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = [1.0, 1.0];
        let unb = [(f64::NEG_INFINITY, f64::INFINITY); 2];
        let err = direct_solve(&a, &b, &unb, 1e-10).unwrap_err();
        assert!(matches!(err, Error::SingularSystem(_)));
    }

    #[test]
    fn clamped_row_moves_to_bound() {
        // Unbounded solution would be λ = (1, 2); cap row 1 at 0.5.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = [1.0, 2.0];
        let bounds = [(f64::NEG_INFINITY, f64::INFINITY), (-0.5, 0.5)];
        let (lambda, _) = direct_solve(&a, &b, &bounds, 1e-10).unwrap();
        assert_relative_eq!(lambda[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(lambda[1], 0.5, epsilon = 1e-12);
    }
}
