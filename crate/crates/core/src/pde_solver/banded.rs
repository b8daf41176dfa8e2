//! Banded LU with partial pivoting.
//!
//! Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` diagonals hold
//! the fill produced by row interchanges. Multipliers are kept separately and
//! the interchanges are replayed during the solve.

const SINGULAR_RELATIVE: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Factorizes in place; `Err(column)` when a pivot is numerically zero.
    pub fn factor(mut self) -> Result<BandedLu, usize> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let scale = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tiny = SINGULAR_RELATIVE * scale.max(f64::MIN_POSITIVE);
        let mut pivots = vec![0usize; n];
        let mut multipliers = vec![0.0; n * kl.max(1)];
        let mut sign = 1.0;

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(k);
            }
            pivots[k] = p;
            if p != k {
                sign = -sign;
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            if pivot < 0.0 {
                sign = -sign;
            }
            for i in k + 1..=last_row {
                let l = self.data[self.slot(i, k)] / pivot;
                multipliers[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let upper = self.data[self.slot(k, j)];
                        let s = self.slot(i, j);
                        self.data[s] -= l * upper;
                    }
                }
            }
        }
        Ok(BandedLu {
            upper: self,
            pivots,
            multipliers,
            det_sign: sign,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    upper: BandedMatrix,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
    det_sign: f64,
}

impl BandedLu {
    /// Sign of the determinant of the factored matrix.
    pub fn det_sign(&self) -> f64 {
        self.det_sign
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let u = &self.upper;
        let (n, kl, ku) = (u.n, u.kl, u.ku);
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.multipliers[k * kl + (i - k - 1)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= u.data[u.slot(i, j)] * b[j];
            }
            b[i] = s / u.data[u.slot(i, i)];
        }
    }
}
