//! Truncated matrix-valued power series in `z₁, z̄₁, …, zₙ, z̄ₙ`.
//!
//! Multidegrees list exponents in the order `(z₁, z̄₁, z₂, z̄₂, …)`. All
//! arithmetic drops terms of total degree above the truncation degree.

mod coeff;
pub mod families;
mod frame;
mod json;

use std::collections::BTreeMap;

pub use coeff::{Coeff, Exact};
pub use frame::{holomorphic_frame, relation_matrix, solve_gauge_step, FrameSolution, StageReport, FLOAT_GATE};
pub use json::{problem_from_json, solution_to_json, FrobeniusProblem, FAMILIES};

use crate::error::{Error, Result};

pub type Multidegree = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncSeries<T: Coeff> {
    n: usize,
    rows: usize,
    cols: usize,
    degree: u32,
    /// Row-major `rows × cols` blocks, zero blocks never stored.
    coeffs: BTreeMap<Multidegree, Vec<T>>,
}

fn total(md: &[u32]) -> u32 {
    md.iter().sum()
}

pub(crate) fn mat_mul<T: Coeff>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for l in 0..k {
            let x = &a[i * k + l];
            if x.is_zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] = out[i * n + j].clone() + x.clone() * b[l * n + j].clone();
            }
        }
    }
    out
}

/// Gauss–Jordan inverse of a square coefficient matrix.
pub(crate) fn mat_inverse<T: Coeff>(a: &[T], r: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = vec![T::zero(); r * r];
    for i in 0..r {
        inv[i * r + i] = T::one();
    }
    for col in 0..r {
        let piv = (col..r).max_by(|&i, &j| {
            coeff::pivot_weight(&m[i * r + col]).total_cmp(&coeff::pivot_weight(&m[j * r + col]))
        })?;
        if m[piv * r + col].is_zero() {
            return None;
        }
        for c in 0..r {
            m.swap(col * r + c, piv * r + c);
            inv.swap(col * r + c, piv * r + c);
        }
        let d = m[col * r + col].clone();
        for c in 0..r {
            m[col * r + c] = m[col * r + c].clone() / d.clone();
            inv[col * r + c] = inv[col * r + c].clone() / d.clone();
        }
        for row in 0..r {
            if row == col || m[row * r + col].is_zero() {
                continue;
            }
            let f = m[row * r + col].clone();
            for c in 0..r {
                m[row * r + c] = m[row * r + c].clone() - f.clone() * m[col * r + c].clone();
                inv[row * r + c] = inv[row * r + c].clone() - f.clone() * inv[col * r + c].clone();
            }
        }
    }
    Some(inv)
}

impl<T: Coeff> TruncSeries<T> {
    pub fn zero(n: usize, shape: (usize, usize), degree: u32) -> Self {
        Self {
            n,
            rows: shape.0,
            cols: shape.1,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize, q: usize, degree: u32) -> Self {
        let mut m = vec![T::zero(); q * q];
        for i in 0..q {
            m[i * q + i] = T::one();
        }
        Self::constant(n, (q, q), degree, m)
    }

    pub fn constant(n: usize, shape: (usize, usize), degree: u32, m: Vec<T>) -> Self {
        let mut s = Self::zero(n, shape, degree);
        s.insert(vec![0; 2 * n], m);
        s
    }

    /// Scalar monomial `c · z^α z̄^β` (as a 1×1 series).
    pub fn monomial(n: usize, degree: u32, md: &[u32], c: T) -> Self {
        let mut s = Self::zero(n, (1, 1), degree);
        s.insert(md.to_vec(), vec![c]);
        s
    }

    /// Exponent vector of `z_j^a z̄_j^b` with the other variables absent.
    pub fn md(n: usize, j: usize, a: u32, b: u32) -> Multidegree {
        let mut m = vec![0; 2 * n];
        m[2 * j] = a;
        m[2 * j + 1] = b;
        m
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coeffs(&self) -> &BTreeMap<Multidegree, Vec<T>> {
        &self.coeffs
    }

    pub fn coeff(&self, md: &[u32]) -> Vec<T> {
        self.coeffs
            .get(md)
            .cloned()
            .unwrap_or_else(|| vec![T::zero(); self.rows * self.cols])
    }

    /// Adds `m` to the coefficient at `md`; ignored above the degree.
    pub fn insert(&mut self, md: Multidegree, m: Vec<T>) {
        assert_eq!(md.len(), 2 * self.n, "multidegree length");
        assert_eq!(m.len(), self.rows * self.cols, "coefficient shape");
        if total(&md) > self.degree {
            return;
        }
        let slot = self
            .coeffs
            .entry(md.clone())
            .or_insert_with(|| vec![T::zero(); m.len()]);
        for (a, b) in slot.iter_mut().zip(m) {
            *a = a.clone() + b;
        }
        if slot.iter().all(|x| x.is_zero()) {
            self.coeffs.remove(&md);
        }
    }

    fn from_map(n: usize, shape: (usize, usize), degree: u32, map: BTreeMap<Multidegree, Vec<T>>) -> Self {
        let coeffs = map
            .into_iter()
            .filter(|(md, v)| total(md) <= degree && v.iter().any(|x| !x.is_zero()))
            .collect();
        Self {
            n,
            rows: shape.0,
            cols: shape.1,
            degree,
            coeffs,
        }
    }

    fn check_compatible(&self, o: &Self, what: &str) -> Result<()> {
        if self.n != o.n {
            return Err(Error::structural(format!(
                "{what}: series in {} and {} variables",
                self.n, o.n
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .values()
            .flat_map(|v| v.iter().map(|x| x.magnitude()))
            .fold(0.0, f64::max)
    }

    /// Relabels the truncation degree. Raising it asserts that the missing
    /// top-degree terms vanish, which is harmless wherever only the lower
    /// degrees are used.
    pub fn with_degree(&self, degree: u32) -> Self {
        Self::from_map(self.n, self.shape(), degree, self.coeffs.clone())
    }

    pub fn truncate(&self, degree: u32) -> Self {
        Self::from_map(self.n, self.shape(), degree.min(self.degree), self.coeffs.clone())
    }

    fn zip_with(&self, o: &Self, what: &str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_compatible(o, what)?;
        if self.shape() != o.shape() {
            return Err(Error::structural(format!(
                "{what}: shapes {:?} and {:?}",
                self.shape(),
                o.shape()
            )));
        }
        let degree = self.degree.min(o.degree);
        let zero = vec![T::zero(); self.rows * self.cols];
        let mut map = BTreeMap::new();
        for md in self.coeffs.keys().chain(o.coeffs.keys()) {
            if map.contains_key(md) {
                continue;
            }
            let a = self.coeffs.get(md).unwrap_or(&zero);
            let b = o.coeffs.get(md).unwrap_or(&zero);
            let v = a.iter().zip(b).map(|(x, y)| f(x.clone(), y.clone())).collect();
            map.insert(md.clone(), v);
        }
        Ok(Self::from_map(self.n, self.shape(), degree, map))
    }

    pub fn try_add(&self, o: &Self) -> Result<Self> {
        self.zip_with(o, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self> {
        self.zip_with(o, "sub", |a, b| a - b)
    }

    pub fn scale(&self, c: &T) -> Self {
        let map = self
            .coeffs
            .iter()
            .map(|(md, v)| (md.clone(), v.iter().map(|x| x.clone() * c.clone()).collect()))
            .collect();
        Self::from_map(self.n, self.shape(), self.degree, map)
    }

    pub fn neg(&self) -> Self {
        self.scale(&-T::one())
    }

    /// Matrix product, truncated at the smaller degree.
    pub fn try_mul(&self, o: &Self) -> Result<Self> {
        self.check_compatible(o, "mul")?;
        if self.cols != o.rows {
            return Err(Error::structural(format!(
                "mul: shapes {:?} and {:?}",
                self.shape(),
                o.shape()
            )));
        }
        let degree = self.degree.min(o.degree);
        let mut map: BTreeMap<Multidegree, Vec<T>> = BTreeMap::new();
        for (ma, ca) in &self.coeffs {
            let da = total(ma);
            for (mb, cb) in &o.coeffs {
                if da + total(mb) > degree {
                    continue;
                }
                let md: Multidegree = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                let prod = mat_mul(ca, cb, self.rows, self.cols, o.cols);
                match map.get_mut(&md) {
                    Some(slot) => {
                        for (s, p) in slot.iter_mut().zip(prod) {
                            *s = s.clone() + p;
                        }
                    }
                    None => {
                        map.insert(md, prod);
                    }
                }
            }
        }
        Ok(Self::from_map(self.n, (self.rows, o.cols), degree, map))
    }

    /// Inverse of a square series with invertible constant term.
    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::structural("inverse of a non-square series"));
        }
        let q = self.rows;
        let c0 = self.coeff(&vec![0; 2 * self.n]);
        let c0inv = mat_inverse(&c0, q)
            .ok_or_else(|| Error::precondition("constant term of the series is singular"))?;
        let c0s = Self::constant(self.n, (q, q), self.degree, c0inv);
        // S = c₀(I + M) with M = c₀⁻¹(S − c₀) nilpotent modulo truncation
        let m = c0s.try_mul(&self.try_sub(&Self::constant(self.n, (q, q), self.degree, c0))?)?;
        let mut acc = Self::identity(self.n, q, self.degree);
        let mut term = acc.clone();
        for _ in 0..self.degree {
            term = term.try_mul(&m)?.neg();
            if term.is_zero() {
                break;
            }
            acc = acc.try_add(&term)?;
        }
        acc.try_mul(&c0s)
    }

    /// Conjugate transpose as a real-analytic function: coefficients are
    /// conjugated and `z_j ↔ z̄_j`.
    pub fn adjoint(&self) -> Self {
        let map = self
            .coeffs
            .iter()
            .map(|(md, v)| {
                let mut m2 = md.clone();
                for j in 0..self.n {
                    m2.swap(2 * j, 2 * j + 1);
                }
                let mut w = vec![T::zero(); v.len()];
                for i in 0..self.rows {
                    for k in 0..self.cols {
                        w[k * self.rows + i] = v[i * self.cols + k].conj();
                    }
                }
                (m2, w)
            })
            .collect();
        Self::from_map(self.n, (self.cols, self.rows), self.degree, map)
    }

    fn check_var(&self, j: usize) {
        assert!(j < self.n, "variable index {j} out of range for {} variables", self.n);
    }

    /// `∂/∂z̄_j`, truncated at degree `D − 1`. Variables are 0-based.
    pub fn dbar(&self, j: usize) -> Self {
        self.check_var(j);
        self.differentiate(2 * j + 1)
    }

    /// `∂/∂z_j`, truncated at degree `D − 1`.
    pub fn dz(&self, j: usize) -> Self {
        self.check_var(j);
        self.differentiate(2 * j)
    }

    fn differentiate(&self, slot: usize) -> Self {
        let map = self
            .coeffs
            .iter()
            .filter(|(md, _)| md[slot] > 0)
            .map(|(md, v)| {
                let k = md[slot];
                let mut m2 = md.clone();
                m2[slot] -= 1;
                let c = T::from_ratio(k as i64, 1);
                (m2, v.iter().map(|x| x.clone() * c.clone()).collect())
            })
            .collect();
        Self::from_map(self.n, self.shape(), self.degree.saturating_sub(1), map)
    }

    /// Right inverse of `∂̄_j` on monomials: `z̄_j^k ↦ z̄_j^{k+1}/(k+1)`.
    /// Terms that would exceed the degree are dropped.
    pub fn zbar_antiderivative(&self, j: usize) -> Self {
        self.check_var(j);
        let slot = 2 * j + 1;
        let map = self
            .coeffs
            .iter()
            .map(|(md, v)| {
                let k = md[slot];
                let mut m2 = md.clone();
                m2[slot] += 1;
                let c = T::from_ratio(1, k as i64 + 1);
                (m2, v.iter().map(|x| x.clone() * c.clone()).collect())
            })
            .collect();
        Self::from_map(self.n, self.shape(), self.degree, map)
    }

    /// Pullback under `z_j ↦ r z_j`.
    pub fn dilate(&self, r: &T, j: usize) -> Self {
        self.check_var(j);
        let map = self
            .coeffs
            .iter()
            .map(|(md, v)| {
                let mut f = T::one();
                for _ in 0..md[2 * j] + md[2 * j + 1] {
                    f = f * r.clone();
                }
                (md.clone(), v.iter().map(|x| x.clone() * f.clone()).collect())
            })
            .collect();
        Self::from_map(self.n, self.shape(), self.degree, map)
    }

    /// Sets `z̄₁ = … = z̄_p = 0`.
    pub fn restrict_antihol(&self, p: usize) -> Self {
        assert!(p <= self.n, "restriction past the last variable");
        let map = self
            .coeffs
            .iter()
            .filter(|(md, _)| (0..p).all(|j| md[2 * j + 1] == 0))
            .map(|(md, v)| (md.clone(), v.clone()))
            .collect();
        Self::from_map(self.n, self.shape(), self.degree, map)
    }

    /// No coefficient carries a positive `z̄_j` exponent for `j < p`.
    pub fn is_holomorphic_in(&self, p: usize) -> bool {
        self.coeffs.keys().all(|md| (0..p.min(self.n)).all(|j| md[2 * j + 1] == 0))
    }

    /// Convert coefficients to another field (exact ↔ float).
    pub fn map_coeffs<U: Coeff>(&self) -> TruncSeries<U> {
        let map = self
            .coeffs
            .iter()
            .map(|(md, v)| (md.clone(), v.iter().map(|x| U::from_c64(x.to_c64())).collect()))
            .collect();
        TruncSeries::from_map(self.n, self.shape(), self.degree, map)
    }

    /// Kronecker-style embedding of a scalar series as `s · M`.
    pub fn times_matrix(&self, m: &[T], shape: (usize, usize)) -> Result<Self> {
        if self.shape() != (1, 1) {
            return Err(Error::structural("times_matrix needs a scalar series"));
        }
        let map = self
            .coeffs
            .iter()
            .map(|(md, v)| (md.clone(), m.iter().map(|x| x.clone() * v[0].clone()).collect()))
            .collect();
        Ok(Self::from_map(self.n, shape, self.degree, map))
    }

    /// `exp(s) = Σ s^k/k!` for a scalar series without constant term.
    pub fn exp(&self) -> Result<Self> {
        if self.shape() != (1, 1) || !self.coeff(&vec![0; 2 * self.n])[0].is_zero() {
            return Err(Error::precondition("exp needs a scalar series with zero constant term"));
        }
        let mut acc = Self::identity(self.n, 1, self.degree);
        let mut term = acc.clone();
        for k in 1..=self.degree as i64 {
            term = term.try_mul(self)?.scale(&T::from_ratio(1, k));
            if term.is_zero() {
                break;
            }
            acc = acc.try_add(&term)?;
        }
        Ok(acc)
    }
}
