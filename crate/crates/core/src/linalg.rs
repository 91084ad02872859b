//! Symmetric tridiagonal matrices, which is all that P1 assembly in 1D produces.

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.matvec(x), y)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matvec(&vec![1.0; self.dim()])
    }

    /// Thomas algorithm. Returns `None` on a zero pivot.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        if n == 0 {
            return Some(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 {
            return None;
        }
        c[0] = if n > 1 { self.off[0] / pivot } else { 0.0 };
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.off[i - 1] * c[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            c[i] = if i + 1 < n { self.off[i] / pivot } else { 0.0 };
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Some(d)
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `a * x + b * y`
pub fn axpby(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(u, v)| a * u + b * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_inverts_matvec() {
        let m = SymTridiag {
            diag: vec![4.0, 5.0, 6.0, 7.0],
            off: vec![1.0, -2.0, 0.5],
        };
        let x = vec![1.0, -1.0, 2.0, 0.25];
        let y = m.matvec(&x);
        let z = m.solve(&y).unwrap();
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = SymTridiag {
            diag: vec![0.0, 1.0],
            off: vec![1.0],
        };
        assert!(m.solve(&[1.0, 1.0]).is_none());
    }
}
