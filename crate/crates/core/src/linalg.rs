/// Solve the square system `a·x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` for (numerically) singular systems.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Affine map `x ↦ w·x + c` through `n + 1` affinely independent points of
/// `ℝⁿ`, taking `values[i]` at `points[i]`.
pub(crate) fn affine_through(points: &[Vec<f64>], values: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = points.first()?.len();
    if points.len() < n + 1 {
        return None;
    }
    let p0 = &points[0];
    let a = (1..=n)
        .map(|i| points[i].iter().zip(p0).map(|(p, q)| p - q).collect())
        .collect();
    let b = (1..=n).map(|i| values[i] - values[0]).collect();
    let w = solve(a, b)?;
    let c = values[0] - w.iter().zip(p0).map(|(wi, pi)| wi * pi).sum::<f64>();
    Some((w, c))
}
