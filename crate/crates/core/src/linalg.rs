//! Small dense factorizations: Cholesky for the weight solve, and a
//! row-streaming Givens QR for tall least-squares problems.

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        if a.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("expected a square {n}x{n} matrix")));
        }
        let mut lower = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a[j][j];
            for k in 0..j {
                diag -= lower[j * n + k] * lower[j * n + k];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
            }
            let ljj = diag.sqrt();
            lower[j * n + j] = ljj;
            for i in j + 1..n {
                let mut v = a[i][j];
                for k in 0..j {
                    v -= lower[i * n + k] * lower[j * n + k];
                }
                lower[i * n + j] = v / ljj;
            }
        }
        Ok(Self { n, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[i * n + k] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= l[k * n + i] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        y
    }

    /// 1-norm condition number `‖A‖₁ ‖A⁻¹‖₁`, with `A⁻¹` applied column by
    /// column through the factor. Only meant for the small systems here.
    pub fn condition_number(&self, a: &[Vec<f64>]) -> f64 {
        let n = self.n;
        let norm1 = |col: &dyn Fn(usize) -> Vec<f64>| {
            (0..n)
                .map(|j| col(j).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let a_norm = norm1(&|j| (0..n).map(|i| a[i][j]).collect());
        let inv_norm = norm1(&|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            self.solve(&e)
        });
        a_norm * inv_norm
    }
}

/// Least squares `min ‖X β - y‖²` accumulated one row at a time with Givens
/// rotations, so the design matrix never has to be stored.
#[derive(Debug, Clone)]
pub struct StreamingQr {
    p: usize,
    r: Vec<f64>,
    qty: Vec<f64>,
    residual_ss: f64,
    rows: usize,
}

impl StreamingQr {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            r: vec![0.0; p * p],
            qty: vec![0.0; p],
            residual_ss: 0.0,
            rows: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn push(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.p);
        let p = self.p;
        let mut row = x.to_vec();
        let mut rhs = y;
        for k in 0..p {
            if row[k] == 0.0 {
                continue;
            }
            let rkk = self.r[k * p + k];
            let rho = rkk.hypot(row[k]);
            let (c, s) = (rkk / rho, row[k] / rho);
            self.r[k * p + k] = rho;
            row[k] = 0.0;
            for j in k + 1..p {
                let a = self.r[k * p + j];
                let b = row[j];
                self.r[k * p + j] = c * a + s * b;
                row[j] = -s * a + c * b;
            }
            let a = self.qty[k];
            self.qty[k] = c * a + s * rhs;
            rhs = -s * a + c * rhs;
        }
        self.residual_ss += rhs * rhs;
        self.rows += 1;
    }

    /// Back-substitute for β. A diagonal of `R` smaller than `rel_tol` times
    /// the largest one marks the column as dependent on earlier ones.
    pub fn solve(&self, rel_tol: f64) -> std::result::Result<Vec<f64>, usize> {
        let p = self.p;
        let scale = (0..p).map(|k| self.r[k * p + k].abs()).fold(0.0, f64::max);
        for k in 0..p {
            if self.r[k * p + k].abs() <= rel_tol * scale || scale == 0.0 {
                return Err(k);
            }
        }
        let mut beta = self.qty.clone();
        for i in (0..p).rev() {
            for j in i + 1..p {
                beta[i] -= self.r[i * p + j] * beta[j];
            }
            beta[i] /= self.r[i * p + i];
        }
        Ok(beta)
    }

    pub fn residual_sum_of_squares(&self) -> f64 {
        self.residual_ss
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = vec![
            vec![4.0, 2.0, 0.6],
            vec![2.0, 5.0, 1.0],
            vec![0.6, 1.0, 3.0],
        ];
        let ch = Cholesky::factor(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = ch.solve(&b);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-14);
        }
        let cond = ch.condition_number(&a);
        assert!(cond > 1.0 && cond < 10.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(
            Cholesky::factor(&a),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
        assert!(Cholesky::factor(&[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn streaming_qr_matches_normal_equations() {
        // y = 2 x0 - x1 + noise-free, overdetermined
        let mut qr = StreamingQr::new(2);
        let rows = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, -1.0), (0.5, 3.0)];
        for &(a, b) in &rows {
            qr.push(&[a, b], 2.0 * a - b);
        }
        let beta = qr.solve(1e-12).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-13 && (beta[1] + 1.0).abs() < 1e-13);
        assert!(qr.residual_sum_of_squares() < 1e-24);
        assert_eq!(qr.rows(), 5);
    }

    #[test]
    fn streaming_qr_flags_dependent_column() {
        let mut qr = StreamingQr::new(3);
        for i in 0..10 {
            let x = i as f64;
            qr.push(&[x, 1.0, 2.0 * x], 1.0);
        }
        assert_eq!(qr.solve(1e-10), Err(2));
    }
}
