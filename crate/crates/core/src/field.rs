//! Matrix-valued fields in a twisted (Landau-gauge) trivialization.
//!
//! Rows and columns each carry an integer charge. Entry `(i, j)` is a
//! section of the line bundle of degree `q = row_charge[i] − col_charge[j]`
//! on the first torus factor: it is periodic in `x1` and satisfies
//!
//! ```text
//! u(x1, y1 + L1) = exp(−2πi q x1 / L1) · u(x1, y1)
//! ```
//!
//! The unitary background connection is `D_x1 = ∂_x1 + i q κ y1`,
//! `D_y1 = ∂_y1` with `κ = 2π/L1²`; the second factor (when `n = 2`) is
//! untwisted. Covariant derivatives are fourth-order central differences
//! with Peierls phases along `x1` and twisted ghost values across `y1`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ScalarField, TorusGeometry};
use crate::linalg::{self, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct TwistedField {
    geom: TorusGeometry,
    rows: usize,
    cols: usize,
    row_charges: Vec<i64>,
    col_charges: Vec<i64>,
    data: Vec<C64>,
}

impl TwistedField {
    pub fn zeros(geom: &TorusGeometry, row_charges: &[i64], col_charges: &[i64]) -> Self {
        let (rows, cols) = (row_charges.len(), col_charges.len());
        Self {
            geom: *geom,
            rows,
            cols,
            row_charges: row_charges.to_vec(),
            col_charges: col_charges.to_vec(),
            data: vec![ZERO; geom.npoints() * rows * cols],
        }
    }

    /// Identity endomorphism of a bundle whose rows carry `charges`.
    pub fn identity(geom: &TorusGeometry, charges: &[i64]) -> Self {
        let r = charges.len();
        let id = linalg::identity(r);
        let mut f = Self::zeros(geom, charges, charges);
        for m in f.data.chunks_mut(r * r) {
            m.copy_from_slice(&id);
        }
        f
    }

    pub fn from_data(
        geom: &TorusGeometry,
        row_charges: &[i64],
        col_charges: &[i64],
        data: Vec<C64>,
    ) -> Result<Self> {
        let expect = geom.npoints() * row_charges.len() * col_charges.len();
        if data.len() != expect {
            return Err(Error::structural(format!(
                "field data has {} entries, expected {expect}",
                data.len()
            )));
        }
        Ok(Self {
            geom: *geom,
            rows: row_charges.len(),
            cols: col_charges.len(),
            row_charges: row_charges.to_vec(),
            col_charges: col_charges.to_vec(),
            data,
        })
    }

    /// Builds a field from a pointwise generator; `f` receives the grid
    /// index and writes a row-major `rows×cols` matrix.
    pub fn from_point_fn(
        geom: &TorusGeometry,
        row_charges: &[i64],
        col_charges: &[i64],
        f: impl Fn(usize, &mut [C64]) + Sync,
    ) -> Self {
        let mut out = Self::zeros(geom, row_charges, col_charges);
        let block = out.block();
        out.data
            .par_chunks_mut(block)
            .enumerate()
            .for_each(|(p, m)| f(p, m));
        out
    }

    /// A scalar field placed in entry `(i, j)`, all other entries zero.
    pub fn with_entry(
        geom: &TorusGeometry,
        row_charges: &[i64],
        col_charges: &[i64],
        i: usize,
        j: usize,
        entry: &ScalarField,
    ) -> Self {
        let cols = col_charges.len();
        let vals = entry.data();
        Self::from_point_fn(geom, row_charges, col_charges, |p, m| {
            m[i * cols + j] = vals[p];
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_charges(&self) -> &[i64] {
        &self.row_charges
    }

    pub fn col_charges(&self) -> &[i64] {
        &self.col_charges
    }

    pub fn charge(&self, i: usize, j: usize) -> i64 {
        self.row_charges[i] - self.col_charges[j]
    }

    pub fn block(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn at(&self, p: usize) -> &[C64] {
        let b = self.block();
        &self.data[p * b..(p + 1) * b]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [C64] {
        let b = self.block();
        &mut self.data[p * b..(p + 1) * b]
    }

    pub fn entry(&self, i: usize, j: usize) -> ScalarField {
        let (b, idx) = (self.block(), i * self.cols + j);
        let vals = (0..self.geom.npoints()).map(|p| self.data[p * b + idx]).collect();
        ScalarField::from_vec(&self.geom, vals).expect("grid-sized")
    }

    fn same_twist(&self, other: &Self) -> bool {
        self.geom == other.geom
            && self.rows == other.rows
            && self.cols == other.cols
            && (0..self.rows)
                .all(|i| (0..self.cols).all(|j| self.charge(i, j) == other.charge(i, j)))
    }

    fn check_twist(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_twist(other) {
            Ok(())
        } else {
            Err(Error::structural(format!(
                "{what}: twist mismatch ({:?}/{:?} vs {:?}/{:?})",
                self.row_charges, self.col_charges, other.row_charges, other.col_charges
            )))
        }
    }

    /// Same shape and charges, new pointwise values.
    pub fn map_points(&self, f: impl Fn(usize, &[C64], &mut [C64]) + Sync) -> Self {
        let mut out = self.zeros_like();
        let b = self.block();
        out.data
            .par_chunks_mut(b)
            .zip(self.data.par_chunks(b))
            .enumerate()
            .for_each(|(p, (o, m))| f(p, m, o));
        out
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.geom, &self.row_charges, &self.col_charges)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_twist(other, "add")?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_twist(other, "sub")?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: C64, other: &Self) -> Result<Self> {
        self.check_twist(other, "axpy")?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += c * b);
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= c);
        out
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// Pointwise multiplication by an untwisted scalar field.
    pub fn mul_scalar(&self, f: &ScalarField) -> Result<Self> {
        if f.geometry() != &self.geom {
            return Err(Error::structural("scalar factor on a different geometry"));
        }
        let vals = f.data();
        Ok(self.map_points(|p, m, o| {
            for (a, b) in o.iter_mut().zip(m) {
                *a = b * vals[p];
            }
        }))
    }

    /// Pointwise matrix product; the inner charges must match.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.geom != other.geom {
            return Err(Error::structural("product of fields on different geometries"));
        }
        if self.cols != other.rows || self.col_charges != other.row_charges {
            return Err(Error::structural(format!(
                "product: inner charges {:?} and {:?} differ",
                self.col_charges, other.row_charges
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(&self.geom, &self.row_charges, &other.col_charges);
        out.data
            .par_chunks_mut(m * n)
            .zip(self.data.par_chunks(m * k).zip(other.data.par_chunks(k * n)))
            .for_each(|(o, (a, b))| linalg::mul_into(a, b, o, m, k, n));
        Ok(out)
    }

    /// Pointwise conjugate transpose; charges swap roles.
    pub fn adjoint(&self) -> Self {
        let (m, n) = (self.rows, self.cols);
        let mut out = Self::zeros(&self.geom, &self.col_charges, &self.row_charges);
        out.data
            .par_chunks_mut(m * n)
            .zip(self.data.par_chunks(m * n))
            .for_each(|(o, a)| o.copy_from_slice(&linalg::adjoint(a, m, n)));
        out
    }

    /// Pointwise commutator `[self, other]` of endomorphism fields.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.try_mul(other)?.try_sub(&other.try_mul(self)?)
    }

    /// Pointwise trace. Diagonal entries must be untwisted.
    pub fn trace(&self) -> Result<ScalarField> {
        if self.rows != self.cols || (0..self.rows).any(|i| self.charge(i, i) != 0) {
            return Err(Error::structural("trace of a non-endomorphism field"));
        }
        let r = self.rows;
        let vals = self.data.chunks(r * r).map(|m| linalg::trace(m, r)).collect();
        ScalarField::from_vec(&self.geom, vals)
    }

    pub fn hermitize(&mut self) {
        let r = self.rows;
        self.data.par_chunks_mut(r * r).for_each(|m| linalg::hermitize(m, r));
    }

    pub fn hermitian_defect(&self) -> f64 {
        let r = self.rows;
        self.data
            .par_chunks(r * r)
            .map(|m| linalg::hermitian_defect(m, r))
            .reduce(|| 0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.data)
    }

    /// `sup_x |A(x)|` in the operator norm.
    pub fn sup_op_norm(&self) -> f64 {
        let r = self.rows;
        self.data
            .par_chunks(r * r)
            .map(|m| linalg::op_norm(m, r))
            .reduce(|| 0.0, f64::max)
    }

    /// Pointwise Frobenius norm squared as a real scalar field.
    pub fn frob2_field(&self) -> ScalarField {
        let vals = self
            .data
            .chunks(self.block())
            .map(|m| C64::new(linalg::frob2(m), 0.0))
            .collect();
        ScalarField::from_vec(&self.geom, vals).expect("grid-sized")
    }

    /// Pointwise inverse, reporting the first singular point.
    pub fn inverse(&self) -> Result<Self> {
        let r = self.rows;
        let mut out = Self::zeros(&self.geom, &self.col_charges, &self.row_charges);
        let bad: Option<usize> = out
            .data
            .par_chunks_mut(r * r)
            .zip(self.data.par_chunks(r * r))
            .enumerate()
            .filter_map(|(p, (o, m))| match linalg::inverse(m, r) {
                Some(inv) => {
                    o.copy_from_slice(&inv);
                    None
                }
                None => Some(p),
            })
            .min();
        match bad {
            Some(point) => Err(Error::Numerical {
                point,
                msg: "singular matrix".into(),
            }),
            None => Ok(out),
        }
    }

    /// Applies a spectral function to a Hermitian field.
    pub fn herm_apply(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let r = self.rows;
        self.map_points(|_, m, o| o.copy_from_slice(&linalg::herm_apply(m, r, &f)))
    }

    /// Pointwise eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<Vec<f64>> {
        let r = self.rows;
        self.data
            .par_chunks(r * r)
            .map(|m| linalg::herm_eigenvalues(m, r))
            .collect()
    }

    /// Value at the lattice point `(ix, iy, …)` where indices may leave the
    /// fundamental domain; the twist supplies the automorphy factor.
    pub fn extended_value(&self, idx: &[i64], i: usize, j: usize) -> C64 {
        let n = self.geom.grid() as i64;
        let mut p = 0;
        for (a, &k) in idx.iter().enumerate() {
            p += (k.rem_euclid(n) as usize) * self.geom.stride(a);
        }
        let wraps = idx[1].div_euclid(n);
        let x = idx[0].rem_euclid(n) as f64 * self.geom.spacing(0);
        let phase = y_wrap_phase(&self.geom, x, wraps);
        self.data[p * self.block() + i * self.cols + j] * phase.powi(self.charge(i, j) as i32)
    }

    fn charges_flat(&self) -> Vec<i32> {
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .map(|(i, j)| self.charge(i, j) as i32)
            .collect()
    }

    /// Apply a symmetric/antisymmetric 5-tap stencil along `axis`:
    /// `out = w1 (u₊₁ ± u₋₁) + w2 (u₊₂ ± u₋₂) + w0 u₀`, with twisted ghosts.
    fn stencil(&self, axis: usize, w0: f64, w1: f64, w2: f64, sign: f64) -> Self {
        let g = &self.geom;
        let n = g.grid();
        let stride = g.stride(axis);
        let b = self.block();
        let charges = self.charges_flat();
        let mut distinct: Vec<i32> = charges.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let ci: Vec<usize> = charges.iter().map(|q| distinct.binary_search(q).unwrap()).collect();
        const TAPS: [i64; 4] = [1, -1, 2, -2];
        // phase tables keyed by the coordinate the phase depends on
        let tables: Vec<Vec<C64>> = distinct
            .iter()
            .map(|&q| match axis {
                0 => {
                    let (hx, hy, kappa) = (g.spacing(0), g.spacing(1), g.flux_kappa());
                    (0..n)
                        .flat_map(|iy| {
                            TAPS.map(|k| C64::from_polar(1.0, q as f64 * kappa * iy as f64 * hy * k as f64 * hx))
                        })
                        .collect()
                }
                1 => (0..n)
                    .flat_map(|ix| {
                        let x = ix as f64 * g.spacing(0);
                        [-1i64, 0, 1].map(|w| y_wrap_phase(g, x, w).powi(q))
                    })
                    .collect(),
                _ => vec![ONE],
            })
            .collect();
        self.map_points(|p, m, o| {
            let i = g.axis_index(p, axis) as i64;
            let base = p - (i as usize) * stride;
            let mut nb = [0usize; 4];
            let mut key = [0usize; 4];
            for (t, &k) in TAPS.iter().enumerate() {
                let j = i + k;
                nb[t] = base + (j.rem_euclid(n as i64) as usize) * stride;
                key[t] = match axis {
                    0 => g.axis_index(p, 1) * 4 + t,
                    1 => g.axis_index(p, 0) * 3 + (j.div_euclid(n as i64) + 1) as usize,
                    _ => 0,
                };
            }
            for (e, out) in o.iter_mut().enumerate() {
                let tb = &tables[ci[e]];
                let u = |t: usize| tb[key[t]] * self.data[nb[t] * b + e];
                *out = (u(0) + u(1) * sign) * w1 + (u(2) + u(3) * sign) * w2 + m[e] * w0;
            }
        })
    }

    /// Covariant first derivative along a real axis.
    pub fn d_axis(&self, axis: usize) -> Self {
        let h = self.geom.spacing(axis);
        self.stencil(axis, 0.0, 2.0 / (3.0 * h), -1.0 / (12.0 * h), -1.0)
    }

    /// Covariant second derivative along a real axis, compact 5-point.
    pub fn d2_axis(&self, axis: usize) -> Self {
        let h2 = self.geom.spacing(axis).powi(2);
        let (w1, w2) = (4.0 / (3.0 * h2), -1.0 / (12.0 * h2));
        self.stencil(axis, -2.0 * (w1 + w2), w1, w2, 1.0)
    }

    /// `(D_j, D̄_j)` sharing the two axis derivatives.
    pub fn dz_dzbar(&self, j: usize) -> (Self, Self) {
        let dx = self.d_axis(2 * j);
        let dy = self.d_axis(2 * j + 1);
        let dz = dx.axpy(C64::new(0.0, -1.0), &dy).unwrap().scale_real(0.5);
        let dzb = dx.axpy(C64::new(0.0, 1.0), &dy).unwrap().scale_real(0.5);
        (dz, dzb)
    }

    /// `D_j = ½(D_{x_j} − i D_{y_j})`.
    pub fn dz(&self, j: usize) -> Self {
        let dx = self.d_axis(2 * j);
        let dy = self.d_axis(2 * j + 1);
        dx.axpy(C64::new(0.0, -1.0), &dy).unwrap().scale_real(0.5)
    }

    /// `D̄_j = ½(D_{x_j} + i D_{y_j})`.
    pub fn dzbar(&self, j: usize) -> Self {
        let dx = self.d_axis(2 * j);
        let dy = self.d_axis(2 * j + 1);
        dx.axpy(C64::new(0.0, 1.0), &dy).unwrap().scale_real(0.5)
    }

    /// `D̄_j D_j = ¼(D_{xx} + D_{yy}) − ¼ q κ` (flux only on factor 1).
    pub fn dzbar_dz(&self, j: usize) -> Self {
        let mut out = self
            .d2_axis(2 * j)
            .try_add(&self.d2_axis(2 * j + 1))
            .unwrap()
            .scale_real(0.25);
        if j == 0 {
            let kappa = self.geom.flux_kappa();
            let charges = self.charges_flat();
            let b = self.block();
            for (idx, z) in out.data.iter_mut().enumerate() {
                *z -= self.data[idx] * (0.25 * kappa * charges[idx % b] as f64);
            }
        }
        out
    }
}

fn y_wrap_phase(g: &TorusGeometry, x: f64, wraps: i64) -> C64 {
    if wraps == 0 {
        ONE
    } else {
        let l = g.period(0);
        C64::from_polar(1.0, -2.0 * std::f64::consts::PI * wraps as f64 * x / l)
    }
}
