//! Small dense helpers for the multivariate Gaussian fits.

/// Column means of `rows` (each of length `dim`).
pub(crate) fn mean(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut mu = vec![0.0; dim];
    for r in rows {
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v;
        }
    }
    let n = rows.len() as f64;
    mu.iter_mut().for_each(|m| *m /= n);
    mu
}

/// Row-major `dim x dim` covariance normalized by `rows.len() - ddof`.
pub(crate) fn covariance(rows: &[Vec<f64>], mu: &[f64], ddof: usize) -> Vec<f64> {
    let dim = mu.len();
    let mut cov = vec![0.0; dim * dim];
    let mut centred = vec![0.0; dim];
    for r in rows {
        for ((c, v), m) in centred.iter_mut().zip(r).zip(mu) {
            *c = v - m;
        }
        for i in 0..dim {
            let ci = centred[i];
            for j in i..dim {
                cov[i * dim + j] += ci * centred[j];
            }
        }
    }
    let denom = (rows.len() - ddof) as f64;
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / denom;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    cov
}

/// Solves `a x = b` for symmetric positive-definite `a`; `None` if a pivot is
/// not positive.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}
