//! Small dense matrices (d <= 4) used in every hot loop.

use smallvec::SmallVec;

pub const MAX_DIM: usize = 4;

/// A point in R^d or on the torus, stored inline.
pub type Point = SmallVec<[f64; MAX_DIM]>;

pub fn point(xs: &[f64]) -> Point {
    SmallVec::from_slice(xs)
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn add(x: &[f64], y: &[f64]) -> Point {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Point {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Row-major d x d matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    d: usize,
    a: [f64; MAX_DIM * MAX_DIM],
}

impl Mat {
    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1 && d <= MAX_DIM, "dimension {d} unsupported");
        Mat { d, a: [0.0; MAX_DIM * MAX_DIM] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Mat::zeros(d);
        for i in 0..d {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(xs: &[f64]) -> Self {
        let mut m = Mat::zeros(xs.len());
        for (i, x) in xs.iter().enumerate() {
            m.set(i, i, *x);
        }
        m
    }

    pub fn scalar(d: usize, s: f64) -> Self {
        Mat::diag(&vec![s; d])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.len();
        let mut m = Mat::zeros(d);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), d, "matrix must be square");
            for (j, v) in r.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|i| (0..self.d).map(|j| self.get(i, j)).collect()).collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * MAX_DIM + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * MAX_DIM + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut m = Mat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                m.set(j, i, self.get(i, j));
            }
        }
        m
    }

    pub fn mul(&self, o: &Mat) -> Self {
        assert_eq!(self.d, o.d);
        let mut m = Mat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                let mut s = 0.0;
                for k in 0..self.d {
                    s += self.get(i, k) * o.get(k, j);
                }
                m.set(i, j, s);
            }
        }
        m
    }

    #[inline]
    pub fn apply(&self, x: &[f64]) -> Point {
        let mut y = Point::new();
        for i in 0..self.d {
            let mut s = 0.0;
            for k in 0..self.d {
                s += self.get(i, k) * x[k];
            }
            y.push(s);
        }
        y
    }

    pub fn apply_i64(&self, nu: &[i64]) -> Point {
        let mut y = Point::new();
        for i in 0..self.d {
            let mut s = 0.0;
            for k in 0..self.d {
                s += self.get(i, k) * nu[k] as f64;
            }
            y.push(s);
        }
        y
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        for v in m.a.iter_mut() {
            *v *= s;
        }
        m
    }

    pub fn det(&self) -> f64 {
        let (lu, sign, ok) = self.lu();
        if !ok {
            return 0.0;
        }
        let mut p = sign;
        for i in 0..self.d {
            p *= lu.get(i, i);
        }
        p
    }

    fn lu(&self) -> (Mat, f64, bool) {
        let mut m = *self;
        let mut sign = 1.0;
        let d = self.d;
        for c in 0..d {
            let mut piv = c;
            for r in c + 1..d {
                if m.get(r, c).abs() > m.get(piv, c).abs() {
                    piv = r;
                }
            }
            if m.get(piv, c) == 0.0 {
                return (m, sign, false);
            }
            if piv != c {
                for k in 0..d {
                    let t = m.get(c, k);
                    m.set(c, k, m.get(piv, k));
                    m.set(piv, k, t);
                }
                sign = -sign;
            }
            for r in c + 1..d {
                let f = m.get(r, c) / m.get(c, c);
                for k in c..d {
                    m.set(r, k, m.get(r, k) - f * m.get(c, k));
                }
            }
        }
        (m, sign, true)
    }

    /// Gauss-Jordan inverse; `None` when singular to working precision.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.d;
        let mut a = *self;
        let mut inv = Mat::identity(d);
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        for c in 0..d {
            let mut piv = c;
            for r in c + 1..d {
                if a.get(r, c).abs() > a.get(piv, c).abs() {
                    piv = r;
                }
            }
            if a.get(piv, c).abs() <= 1e-14 * scale {
                return None;
            }
            for k in 0..d {
                let t = a.get(c, k);
                a.set(c, k, a.get(piv, k));
                a.set(piv, k, t);
                let t = inv.get(c, k);
                inv.set(c, k, inv.get(piv, k));
                inv.set(piv, k, t);
            }
            let p = a.get(c, c);
            for k in 0..d {
                a.set(c, k, a.get(c, k) / p);
                inv.set(c, k, inv.get(c, k) / p);
            }
            for r in 0..d {
                if r != c {
                    let f = a.get(r, c);
                    if f != 0.0 {
                        for k in 0..d {
                            a.set(r, k, a.get(r, k) - f * a.get(c, k));
                            inv.set(r, k, inv.get(r, k) - f * inv.get(c, k));
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    /// Euclidean norm of row `i`.
    pub fn row_norm2(&self, i: usize) -> f64 {
        (0..self.d).map(|k| self.get(i, k).powi(2)).sum::<f64>().sqrt()
    }

    pub fn row_norm1(&self, i: usize) -> f64 {
        (0..self.d).map(|k| self.get(i, k).abs()).sum()
    }

    /// Frobenius norm, an upper bound for the operator norm.
    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn pow(&self, k: i32) -> Option<Self> {
        let base = if k < 0 { self.inverse()? } else { *self };
        let mut r = Mat::identity(self.d);
        for _ in 0..k.unsigned_abs() {
            r = r.mul(&base);
        }
        Some(r)
    }

    pub fn max_abs_diff(&self, o: &Mat) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.d {
            for j in 0..self.d {
                m = m.max((self.get(i, j) - o.get(i, j)).abs());
            }
        }
        m
    }
}

/// Integer box `lo[i]..=hi[i]` iterated in lexicographic order.
pub fn integer_box(lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64])) {
    let d = lo.len();
    if (0..d).any(|i| lo[i] > hi[i]) {
        return;
    }
    let mut nu: SmallVec<[i64; MAX_DIM]> = SmallVec::from_slice(lo);
    loop {
        f(&nu);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if nu[i] < hi[i] {
                nu[i] += 1;
                for k in i + 1..d {
                    nu[k] = lo[k];
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0]]);
        let p = m.mul(&m.inverse().unwrap());
        assert!(p.max_abs_diff(&Mat::identity(2)) < 1e-14);
        assert!((m.det() - 5.5).abs() < 1e-14);
    }

    #[test]
    fn singular_has_no_inverse() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(m.inverse().is_none());
        assert_eq!(m.det(), 0.0);
    }

    #[test]
    fn box_iteration_counts() {
        let mut n = 0;
        integer_box(&[-1, 0], &[1, 2], |_| n += 1);
        assert_eq!(n, 9);
    }
}
