//! Small dense matrix helpers. Dimensions here are algebra dimensions
//! (at most a few dozen), so plain partial-pivot LU and textbook Cholesky
//! are adequate and keep results bit-deterministic.

/// Determinant via LU with partial pivoting; consumes the matrix.
pub(crate) fn lu_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    debug_assert!(a.iter().all(|r| r.len() == n));
    let mut det = 1.0;
    for c in 0..n {
        let mut p = c;
        for r in (c + 1)..n {
            if a[r][c].abs() > a[p][c].abs() {
                p = r;
            }
        }
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    det
}

/// Lower-triangular L with L·Lᵀ = a; None unless a is symmetric positive
/// definite (symmetry to 1e-12 relative, pivots strictly positive).
pub(crate) fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return None;
    }
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                return None;
            }
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}
