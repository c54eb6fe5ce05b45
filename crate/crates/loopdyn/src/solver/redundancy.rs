//! Rank-revealing detection of redundant constraint rows.
//!
//! Closed kinematic loops make joint rows linearly dependent; before a
//! dense factorization those rows must go. The sweep below processes rows
//! in assembly order (scene joint order, then row slot) and keeps a row iff
//! it is independent of the rows already kept — so the earliest rows win,
//! the removal is deterministic, and the result is disclosed instead of
//! hidden inside the solver.

use nalgebra::DVector;

use crate::body::MassMatrix;
use crate::rows::ConstraintRow;

#[derive(Debug, Clone, Default)]
pub struct Redundancy {
    pub rank: usize,
    /// Indices (into the input slice) of retained rows, in order.
    pub kept: Vec<usize>,
    /// Removed rows as (joint index, row slot).
    pub dropped: Vec<(usize, usize)>,
}

/// Map a row's two Jacobian blocks into one stacked vector over the
/// degrees of freedom of dynamic bodies (static bodies cannot move and
/// contribute nothing to the rank).
fn stack_row(row: &ConstraintRow, dof_offset: &[Option<usize>], n_dof: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n_dof);
    let mut put = |body: Option<usize>, jac: &crate::rows::Jac6| {
        if let Some(b) = body {
            if let Some(off) = dof_offset[b] {
                for k in 0..3 {
                    v[off + k] += jac.lin[k];
                    v[off + 3 + k] += jac.ang[k];
                }
            }
        }
    };
    put(row.body_a, &row.j_a);
    put(row.body_b, &row.j_b);
    v
}

/// Offsets of each dynamic body's 6-DOF block; `None` for static bodies.
pub fn dynamic_dof_offsets(mass: &MassMatrix) -> (Vec<Option<usize>>, usize) {
    let mut offsets = Vec::with_capacity(mass.len());
    let mut next = 0;
    for i in 0..mass.len() {
        if mass.is_dynamic(i) {
            offsets.push(Some(next));
            next += 6;
        } else {
            offsets.push(None);
        }
    }
    (offsets, next)
}

/// Greedy in-order modified Gram-Schmidt over the stacked Jacobian.
///
/// A row is dropped when its residual after orthogonalization against the
/// kept rows falls below `rank_tolerance` times the largest row norm.
pub fn detect_redundant(
    rows: &[ConstraintRow],
    mass: &MassMatrix,
    rank_tolerance: f64,
) -> Redundancy {
    let (offsets, n_dof) = dynamic_dof_offsets(mass);
    if n_dof == 0 {
        return Redundancy {
            rank: 0,
            kept: Vec::new(),
            dropped: rows.iter().map(|r| (r.joint, r.slot)).collect(),
        };
    }
    let stacked: Vec<DVector<f64>> = rows
        .iter()
        .map(|r| stack_row(r, &offsets, n_dof))
        .collect();
    let scale = stacked
        .iter()
        .map(|v| v.norm())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let threshold = rank_tolerance * scale;

    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Redundancy::default();
    for (i, row) in rows.iter().enumerate() {
        let mut v = stacked[i].clone();
        // Twice-through MGS for numerical robustness.
        for _ in 0..2 {
            for q in &basis {
                let p = q.dot(&v);
                v -= q * p;
            }
        }
        let norm = v.norm();
        if norm > threshold {
            basis.push(v / norm);
            out.kept.push(i);
        } else {
            out.dropped.push((row.joint, row.slot));
        }
    }
    out.rank = out.kept.len();
    out
}
