//! Banded LU with partial pivoting.

/// Square band matrix with `kl` sub- and `ku` super-diagonals; rows keep
/// `kl` extra columns for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i}, {j}) outside the band");
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j);
        self.data[k] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Factors in place; `None` if a pivot is below `tiny` times the largest
    /// entry.
    pub fn factor(mut self, tiny: f64) -> Option<BandLu> {
        let n = self.n;
        let scale = self.max_abs();
        if n == 0 {
            return Some(BandLu { m: self, pivots: Vec::new() });
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return None;
        }
        let (kl, span) = (self.kl, self.kl + self.ku);
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny * scale) {
                return None;
            }
            pivots[k] = p;
            let cmax = (k + span).min(n - 1);
            if p != k {
                for j in k..=cmax {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let d = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / d;
                self.set(i, k, l);
                if l != 0.0 {
                    for j in k + 1..=cmax {
                        let v = self.get(k, j);
                        if v != 0.0 {
                            self.add(i, j, -l * v);
                        }
                    }
                }
            }
        }
        Some(BandLu { m: self, pivots })
    }
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let last = (k + m.kl).min(n.saturating_sub(1));
            for i in k + 1..=last {
                x[i] -= m.get(i, k) * x[k];
            }
        }
        let span = m.kl + m.ku;
        for k in (0..n).rev() {
            let cmax = (k + span).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=cmax {
                s -= m.get(k, j) * x[j];
            }
            x[k] = s / m.get(k, k);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_pivoting_band_system() {
        // lower-triangular-heavy matrix forces row swaps
        let n = 12;
        let (kl, ku) = (2, 1);
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j { 1e-3 } else { 1.0 + ((i * 7 + j * 3) % 5) as f64 };
                m.set(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 2.0).collect();
        let b = m.mul_vec(&x);
        let got = m.clone().factor(1e-14).unwrap().solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-9, "{g} vs {e}");
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandMatrix::zeros(4, 1, 1);
        assert!(m.factor(1e-14).is_none());
    }
}
