//! Symmetric Toeplitz solver: Levinson recursion with a dense fallback.

/// Reflection magnitude at or above which the recursion is abandoned.
pub const NEAR_SINGULAR: f64 = 1.0 - 1e-9;

/// Solve `T x = y` where `T[i][j] = column[|i - j|]`.
///
/// Uses the Levinson recursion (O(n^2)). When a reflection coefficient
/// reaches [`NEAR_SINGULAR`] in magnitude, falls back to Gaussian
/// elimination with partial pivoting on the dense matrix. Returns `None`
/// if the system is singular.
pub fn solve_symmetric_toeplitz(column: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(column.len(), y.len());
    levinson(column, y).or_else(|| solve_dense(&toeplitz_matrix(column), y))
}

pub fn levinson(column: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let n = column.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let t0 = column[0];
    if !(t0 > 0.0) {
        return None;
    }

    // Forward vector f solves T_k f = e_1; by symmetry the backward vector is
    // f reversed.
    let mut f = vec![1.0 / t0];
    let mut x = vec![y[0] / t0];
    let mut next_f = Vec::with_capacity(n);

    for k in 1..n {
        let eps: f64 = (0..k).map(|i| column[k - i] * f[i]).sum();
        if !(eps.abs() < NEAR_SINGULAR) {
            return None;
        }
        let denom = 1.0 - eps * eps;

        next_f.clear();
        next_f.extend((0..=k).map(|i| {
            let fwd = if i < k { f[i] } else { 0.0 };
            let bwd = if i > 0 { f[k - i] } else { 0.0 };
            (fwd - eps * bwd) / denom
        }));
        std::mem::swap(&mut f, &mut next_f);

        let eps_x: f64 = (0..k).map(|i| column[k - i] * x[i]).sum();
        let resid = y[k] - eps_x;
        x.push(0.0);
        if resid != 0.0 {
            for i in 0..=k {
                x[i] += resid * f[k - i];
            }
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

pub fn toeplitz_matrix(column: &[f64]) -> Vec<Vec<f64>> {
    let n = column.len();
    (0..n)
        .map(|i| (0..n).map(|j| column[i.abs_diff(j)]).collect())
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(matrix: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = y.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut b = y.to_vec();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) {
        return None;
    }
    let tiny = scale * n as f64 * f64::EPSILON;

    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= tiny {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}
