//! Independent reference computations for unit tests.

use crate::linalg::Matrix;

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = a.row(i).to_vec();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| aug[x][c].abs().total_cmp(&aug[y][c].abs()))
            .unwrap();
        aug.swap(c, p);
        let piv = aug[c][c];
        aug[c].iter_mut().for_each(|v| *v /= piv);
        for r in 0..n {
            if r != c {
                let f = aug[r][c];
                let src = aug[c].clone();
                aug[r].iter_mut().zip(&src).for_each(|(v, s)| *v -= f * s);
            }
        }
    }
    Matrix::from_rows(&aug.iter().map(|r| r[n..].to_vec()).collect::<Vec<_>>()).unwrap()
}

/// Unconstrained minimizer `-B^{-1} r` of `y^T B y + 2 r^T y`.
pub fn normal_equations_minimizer(b: &Matrix, r: &[f64]) -> Vec<f64> {
    gauss_jordan_inverse(b)
        .mul_vec(r)
        .into_iter()
        .map(|v| -v)
        .collect()
}

/// `(A^T A, A^T b, ||b||^2)` of a random least-squares problem with entries
/// uniform in `[-1, 1]`.
pub fn random_least_squares(seed: u64, m: usize, l: usize) -> (Matrix, Vec<f64>, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..l)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, c)| a * c).sum::<f64>();
    let gram: Vec<Vec<f64>> = cols
        .iter()
        .map(|a| cols.iter().map(|c| dot(a, c)).collect())
        .collect();
    let atb = cols.iter().map(|a| dot(a, &b)).collect();
    (Matrix::from_rows(&gram).unwrap(), atb, dot(&b, &b))
}
