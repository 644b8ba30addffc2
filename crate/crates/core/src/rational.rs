//! Exact rational matrices for lattice membership.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::linalg::Mat;

pub type Q = Ratio<i128>;

/// Largest denominator accepted when recovering a rational from an `f64`.
const MAX_DEN: i128 = 1 << 24;

/// Recovers `x` as a rational when some p/q with q <= 2^24 rounds exactly to `x`.
pub fn rational_from_f64(x: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    if x == x.trunc() && x.abs() < 1e15 {
        return Some(Q::from_integer(x as i128));
    }
    // continued fraction convergents
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > MAX_DEN {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if h1 as f64 / k1 as f64 == x {
            return Some(Q::new(h1, k1));
        }
        let frac = r - a;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Parses "p/q", "p" or a decimal literal into an exact rational.
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i128 = p.trim().parse().ok()?;
        let q: i128 = q.trim().parse().ok()?;
        if q == 0 {
            return None;
        }
        return Some(Q::new(p, q));
    }
    if let Ok(p) = s.parse::<i128>() {
        return Some(Q::from_integer(p));
    }
    // decimal: digits after the point give an exact power-of-ten denominator
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (ip, fp) = body.split_once('.')?;
    if fp.len() > 18 || !fp.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let ip: i128 = if ip.is_empty() { 0 } else { ip.parse().ok()? };
    let den = 10i128.pow(fp.len() as u32);
    let fr: i128 = if fp.is_empty() { 0 } else { fp.parse().ok()? };
    let v = Q::new(ip * den + fr, den);
    Some(if neg { -v } else { v })
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.numer().to_f64().unwrap() / q.denom().to_f64().unwrap()
}

/// Row-major exact d x d matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMat {
    d: usize,
    a: Vec<Q>,
}

impl QMat {
    pub fn zeros(d: usize) -> Self {
        QMat { d, a: vec![Q::zero(); d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = QMat::zeros(d);
        for i in 0..d {
            m.set(i, i, Q::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Q>]) -> Self {
        let d = rows.len();
        let mut m = QMat::zeros(d);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), d, "matrix must be square");
            for (j, v) in r.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }

    pub fn from_integers(rows: &[Vec<i64>]) -> Self {
        let rows: Vec<Vec<Q>> = rows
            .iter()
            .map(|r| r.iter().map(|v| Q::from_integer(*v as i128)).collect())
            .collect();
        QMat::from_rows(&rows)
    }

    pub fn diag(xs: &[Q]) -> Self {
        let mut m = QMat::zeros(xs.len());
        for (i, x) in xs.iter().enumerate() {
            m.set(i, i, *x);
        }
        m
    }

    /// Exact counterpart of a float matrix when every entry is recoverable.
    pub fn from_mat(m: &Mat) -> Option<Self> {
        let d = m.dim();
        let mut q = QMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                q.set(i, j, rational_from_f64(m.get(i, j))?);
            }
        }
        Some(q)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> Q {
        self.a[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.a[i * self.d + j] = v;
    }

    pub fn to_mat(&self) -> Mat {
        let mut m = Mat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                m.set(i, j, q_to_f64(&self.get(i, j)));
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = QMat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                m.set(j, i, self.get(i, j));
            }
        }
        m
    }

    pub fn mul(&self, o: &QMat) -> Self {
        let mut m = QMat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                let mut s = Q::zero();
                for k in 0..self.d {
                    s += self.get(i, k) * o.get(k, j);
                }
                m.set(i, j, s);
            }
        }
        m
    }

    pub fn apply(&self, x: &[Q]) -> Vec<Q> {
        (0..self.d)
            .map(|i| (0..self.d).fold(Q::zero(), |s, k| s + self.get(i, k) * x[k]))
            .collect()
    }

    pub fn scale(&self, s: Q) -> Self {
        QMat { d: self.d, a: self.a.iter().map(|v| v * s).collect() }
    }

    pub fn det(&self) -> Q {
        let d = self.d;
        let mut m = self.clone();
        let mut det = Q::one();
        for c in 0..d {
            let piv = match (c..d).find(|&r| !m.get(r, c).is_zero()) {
                Some(p) => p,
                None => return Q::zero(),
            };
            if piv != c {
                for k in 0..d {
                    let t = m.get(c, k);
                    m.set(c, k, m.get(piv, k));
                    m.set(piv, k, t);
                }
                det = -det;
            }
            let p = m.get(c, c);
            det *= p;
            for r in c + 1..d {
                let f = m.get(r, c) / p;
                if !f.is_zero() {
                    for k in c..d {
                        let v = m.get(r, k) - f * m.get(c, k);
                        m.set(r, k, v);
                    }
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.d;
        let mut a = self.clone();
        let mut inv = QMat::identity(d);
        for c in 0..d {
            let piv = (c..d).find(|&r| !a.get(r, c).is_zero())?;
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
                    if !f.is_zero() {
                        for k in 0..d {
                            let v = a.get(r, k) - f * a.get(c, k);
                            a.set(r, k, v);
                            let v = inv.get(r, k) - f * inv.get(c, k);
                            inv.set(r, k, v);
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    pub fn is_integer(&self) -> bool {
        self.a.iter().all(|v| v.is_integer())
    }

    /// Least common multiple of all entry denominators.
    pub fn denominator_lcm(&self) -> i128 {
        self.a.iter().fold(1i128, |l, v| l.lcm(v.denom()))
    }

    /// Entries times `den`, which must clear every denominator.
    pub fn scaled_integers(&self, den: i128) -> Option<Vec<i128>> {
        self.a
            .iter()
            .map(|v| {
                let s = v * Q::from_integer(den);
                if s.is_integer() {
                    Some(*s.numer())
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn abs_det(&self) -> Q {
        self.det().abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_simple_fractions() {
        assert_eq!(rational_from_f64(0.5), Some(Q::new(1, 2)));
        assert_eq!(rational_from_f64(0.1), Some(Q::new(1, 10)));
        assert_eq!(rational_from_f64(-0.75), Some(Q::new(-3, 4)));
        assert_eq!(rational_from_f64(1.0 / 3.0), Some(Q::new(1, 3)));
        assert_eq!(rational_from_f64(std::f64::consts::SQRT_2), None);
    }

    #[test]
    fn parses_fraction_strings() {
        assert_eq!(parse_rational("3/4"), Some(Q::new(3, 4)));
        assert_eq!(parse_rational("-2"), Some(Q::from_integer(-2)));
        assert_eq!(parse_rational("0.125"), Some(Q::new(1, 8)));
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn exact_inverse() {
        let m = QMat::from_integers(&[vec![1, 1], vec![0, 1]]);
        let inv = m.inverse().unwrap();
        assert_eq!(inv, QMat::from_integers(&[vec![1, -1], vec![0, 1]]));
        assert_eq!(m.det(), Q::one());
    }
}
