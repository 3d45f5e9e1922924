//! Small dense and banded kernels: LU determinants and minors, dense
//! solves, and a band LU for the implicit time step.

/// Determinant of a row-major `n x n` matrix via LU with partial pivoting.
/// The empty matrix has determinant 1.
pub fn determinant(n: usize, mut a: Vec<f64>) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))
            .expect("non-empty range");
        let pv = a[pivot * n + col];
        if pv == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        det *= pv;
        for row in col + 1..n {
            let factor = a[row * n + col] / pv;
            if factor != 0.0 {
                for k in col + 1..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
    }
    det
}

/// Determinant of `a` with row `row` and column `col` removed.
pub fn minor(n: usize, a: &[f64], row: usize, col: usize) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let mut sub = Vec::with_capacity((n - 1) * (n - 1));
    for i in (0..n).filter(|&i| i != row) {
        for j in (0..n).filter(|&j| j != col) {
            sub.push(a[i * n + j]);
        }
    }
    determinant(n - 1, sub)
}

/// Solves `a x = b` by LU with partial pivoting. Returns `None` when a
/// pivot is exactly zero.
pub fn solve_dense(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))?;
        let pv = a[pivot * n + col];
        if pv == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / pv;
            if factor != 0.0 {
                for k in col + 1..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Some(x)
}

/// Square band matrix with `bw` sub- and super-diagonals, stored row by
/// row as `2*bw + 1` slots centred on the diagonal.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw, "({i}, {j}) outside band {}", self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw + 1).min(self.n);
            let row = &self.data[i * (2 * self.bw + 1)..];
            let mut s = 0.0;
            for j in lo..hi {
                s += row[j + self.bw - i] * x[j];
            }
            *yi = s;
        }
    }

    /// LU factorization without pivoting. Valid for matrices that are
    /// strictly diagonally dominant by columns (no pivot growth), which is
    /// what the implicit reaction-diffusion operator produces.
    pub fn factor(mut self) -> Option<BandLu> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pv = self.get(k, k);
            if pv == 0.0 || !pv.is_finite() {
                return None;
            }
            let hi = (k + bw + 1).min(n);
            for i in k + 1..hi {
                let s = self.slot(i, k);
                let l = self.data[s] / pv;
                self.data[s] = l;
                if l != 0.0 {
                    for j in k + 1..hi {
                        let u = self.get(k, j);
                        let t = self.slot(i, j);
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        Some(BandLu { lu: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.lu;
        let (n, bw) = (m.n, m.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for j in lo..i {
                s -= m.data[m.slot(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut s = b[i];
            for j in i + 1..hi {
                s -= m.data[m.slot(i, j)] * b[j];
            }
            b[i] = s / m.data[m.slot(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_small() {
        assert_eq!(determinant(0, vec![]), 1.0);
        assert_eq!(determinant(1, vec![-2.0]), -2.0);
        assert!((determinant(2, vec![1.0, 2.0, 3.0, 4.0]) + 2.0).abs() < 1e-14);
        // needs a row swap
        assert!((determinant(3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(determinant(2, vec![1.0, 2.0, 2.0, 4.0]), 0.0);
    }

    #[test]
    fn minors_of_two_species_matrix() {
        let a = [-1.0, 2.0, 1.0, -2.0];
        assert_eq!(minor(2, &a, 0, 0), -2.0);
        assert_eq!(minor(2, &a, 1, 1), -1.0);
        assert_eq!(minor(2, &a, 1, 0), 2.0);
        assert_eq!(minor(1, &[0.0], 0, 0), 1.0);
    }

    #[test]
    fn dense_solve() {
        let x = solve_dense(2, vec![0.0, 1.0, 2.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(x, vec![2.0, 3.0]);
        assert!(solve_dense(2, vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn band_solve_matches_dense() {
        let n = 9;
        let bw = 2;
        let mut band = BandMatrix::zeros(n, bw);
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                let v = if i == j { 6.0 } else { -1.0 / (1.0 + (i + 2 * j) as f64) };
                band.add(i, j, v);
                dense[i * n + j] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let expected = solve_dense(n, dense, b.clone()).unwrap();
        let mut y = vec![0.0; n];
        band.mul_vec(&expected, &mut y);
        for (yi, bi) in y.iter().zip(&b) {
            assert!((yi - bi).abs() < 1e-13);
        }
        let lu = band.factor().unwrap();
        let mut x = b;
        lu.solve_in_place(&mut x);
        for (xi, ei) in x.iter().zip(&expected) {
            assert!((xi - ei).abs() < 1e-13);
        }
    }
}
