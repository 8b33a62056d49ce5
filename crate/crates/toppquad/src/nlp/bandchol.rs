//! Symmetric positive-definite banded Cholesky factorization.
//!
//! Storage is lower-band by diagonals: `band[k][i]` holds `A[i, i - k]` for
//! `k = 0..=bw`. Factorization and triangular solves are `O(n * bw^2)`.

pub struct BandMatrix {
    pub n: usize,
    pub bw: usize,
    /// `band[k][i] = A[i, i-k]`; entries with `i < k` are unused.
    pub band: Vec<Vec<f64>>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: (0..=bw).map(|_| vec![0.0; n]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for d in self.band.iter_mut() {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        // Lower triangle only.
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.bw);
        self.band[r - c][r] += v;
    }

    #[inline]
    pub fn add_diag(&mut self, i: usize, v: f64) {
        self.band[0][i] += v;
    }

    /// In-place Cholesky; returns false when a pivot is not positive.
    pub fn cholesky_in_place(&mut self) -> bool {
        let n = self.n;
        let bw = self.bw;
        for j in 0..n {
            // Diagonal pivot.
            let mut d = self.band[0][j];
            let k0 = j.saturating_sub(bw);
            for k in k0..j {
                let l_jk = self.band[j - k][j];
                d -= l_jk * l_jk;
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let d_sqrt = d.sqrt();
            self.band[0][j] = d_sqrt;
            let i_max = (j + bw).min(n - 1);
            for i in j + 1..=i_max {
                let mut s = self.band[i - j][i];
                let k0 = i.saturating_sub(bw).max(k0);
                for k in k0..j {
                    // Both L[i,k] and L[j,k] must be inside the band.
                    if i - k <= bw {
                        s -= self.band[i - k][i] * self.band[j - k][j];
                    }
                }
                self.band[i - j][i] = s / d_sqrt;
            }
        }
        true
    }

    /// Solve `L L^T x = b` after `cholesky_in_place`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let bw = self.bw;
        // Forward: L y = b.
        for i in 0..n {
            let mut s = b[i];
            let k0 = i.saturating_sub(bw);
            for k in k0..i {
                s -= self.band[i - k][i] * b[k];
            }
            b[i] = s / self.band[0][i];
        }
        // Backward: L^T x = y.
        for i in (0..n).rev() {
            let mut s = b[i];
            let j_max = (i + bw).min(n - 1);
            for j in i + 1..=j_max {
                s -= self.band[j - i][j] * b[j];
            }
            b[i] = s / self.band[0][i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_cholesky_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(n, bw) in &[(6usize, 2usize), (30, 4), (80, 7)] {
            // Random banded SPD matrix: B^T B + I restricted to the band.
            let mut a = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i.saturating_sub(bw)..=i {
                    let v = rng.random_range(-1.0..1.0);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
                a[(i, i)] += bw as f64 + 2.0;
            }
            let mut band = BandMatrix::zeros(n, bw);
            for i in 0..n {
                for j in i.saturating_sub(bw)..=i {
                    band.band[i - j][i] = a[(i, j)];
                }
            }
            let b: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let dense = a.clone().cholesky().expect("SPD").solve(&b);
            assert!(band.cholesky_in_place());
            let mut x: Vec<f64> = b.iter().cloned().collect();
            band.solve_in_place(&mut x);
            for i in 0..n {
                assert!((x[i] - dense[i]).abs() < 1e-9, "entry {i}");
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut band = BandMatrix::zeros(3, 1);
        band.band[0][0] = 1.0;
        band.band[0][1] = -1.0;
        band.band[0][2] = 1.0;
        assert!(!band.cholesky_in_place());
    }
}
