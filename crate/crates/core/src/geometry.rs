//! Flat Kähler tori, their grids, and the scalar calculus on them.
//!
//! The torus is a product of `n` square factors `C / (L_j Z + i L_j Z)`.
//! Real axes are ordered `(x1, y1, x2, y2)` and the grid index is row-major
//! in that order (last axis fastest). The Kähler form is `s · ω_std` with
//! `ω_std = ½ i Σ dz^j ∧ dz̄^j`, where the scale `s` is fixed so that the
//! total volume is `2π`.
//!
//! Conventions used throughout the crate:
//!
//! * `Λ(Σ a_{jk̄} dz^j ∧ dz̄^k) = −2i Σ a_{jj̄} / s`, so `Λω = n`;
//! * `Δφ = iΛ∂∂̄φ = (2/s) Σ ∂_{z_j}∂_{z̄_j} φ`, which is negative
//!   semidefinite and equals half the Riemannian Laplacian of the metric.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ZERO;

/// Total volume every geometry is normalized to.
pub const VOLUME: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGeometry {
    n: usize,
    periods: [f64; 2],
    grid: usize,
    vol_scale: f64,
}

impl TorusGeometry {
    pub fn new(n: usize, periods: &[f64], grid: usize) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::structural(format!("complex dimension must be 1 or 2, got {n}")));
        }
        if periods.len() != n {
            return Err(Error::structural(format!(
                "expected {n} periods, got {}",
                periods.len()
            )));
        }
        if periods.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::structural("periods must be positive and finite"));
        }
        if grid < 16 || !grid.is_power_of_two() {
            return Err(Error::structural(format!(
                "grid must be a power of two >= 16, got {grid}"
            )));
        }
        let mut p = [1.0; 2];
        p[..n].copy_from_slice(periods);
        let area: f64 = p[..n].iter().map(|l| l * l).product();
        let vol_scale = (VOLUME / area).powf(1.0 / n as f64);
        Ok(Self {
            n,
            periods: p,
            grid,
            vol_scale,
        })
    }

    /// Square factors with unit metric scale: `L = (2π)^{1/(2n)}`.
    pub fn standard(n: usize, grid: usize) -> Result<Self> {
        let l = VOLUME.powf(0.5 / n as f64);
        Self::new(n, &vec![l; n], grid)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods[..self.n]
    }

    pub fn period(&self, factor: usize) -> f64 {
        self.periods[factor]
    }

    pub fn vol_scale(&self) -> f64 {
        self.vol_scale
    }

    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn npoints(&self) -> usize {
        self.grid.pow(self.axes() as u32)
    }

    /// Coordinate spacing on the given real axis.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis / 2] / self.grid as f64
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.grid.pow((self.axes() - 1 - axis) as u32)
    }

    /// Volume element of one grid cell in the Kähler metric.
    pub fn cell_volume(&self) -> f64 {
        (0..self.n)
            .map(|j| self.vol_scale * self.spacing(2 * j) * self.spacing(2 * j + 1))
            .product()
    }

    pub fn volume(&self) -> f64 {
        self.cell_volume() * self.npoints() as f64
    }

    /// Grid index along `axis` of point `p`.
    pub fn axis_index(&self, p: usize, axis: usize) -> usize {
        (p / self.stride(axis)) % self.grid
    }

    pub fn coords(&self, p: usize) -> [f64; 4] {
        let mut c = [0.0; 4];
        for (a, slot) in c.iter_mut().enumerate().take(self.axes()) {
            *slot = self.axis_index(p, a) as f64 * self.spacing(a);
        }
        c
    }

    /// Analytic degree carried by one unit of flux through the first
    /// factor: `(1/2π) ∫ iΛF` of the constant-curvature unit line bundle.
    /// Equal to 1 when `n = 1`.
    pub fn degree_scale(&self) -> f64 {
        VOLUME / (self.vol_scale * self.periods[0] * self.periods[0])
    }

    /// Landau-gauge field strength per unit charge: the background unitary
    /// connection of the unit line bundle is `i κ y1 dx1`.
    pub fn flux_kappa(&self) -> f64 {
        2.0 * PI / (self.periods[0] * self.periods[0])
    }

    /// Signed wavenumber of FFT bin `m` along `axis`.
    pub fn wavenumber(&self, axis: usize, m: usize) -> f64 {
        let n = self.grid as i64;
        let m = m as i64;
        let signed = if m <= n / 2 { m } else { m - n };
        2.0 * PI * signed as f64 / self.periods[axis / 2]
    }

    /// Symbol of `Δ = iΛ∂∂̄` on the Fourier mode with the given bins.
    pub fn laplacian_symbol(&self, bins: &[usize]) -> f64 {
        let k2: f64 = (0..self.axes())
            .map(|a| self.wavenumber(a, bins[a]).powi(2))
            .sum();
        -k2 / (2.0 * self.vol_scale)
    }

    fn bins(&self, p: usize) -> [usize; 4] {
        let mut b = [0; 4];
        for (a, slot) in b.iter_mut().enumerate().take(self.axes()) {
            *slot = self.axis_index(p, a);
        }
        b
    }
}

/// Complex scalar function sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    geom: TorusGeometry,
    data: Vec<C64>,
}

impl ScalarField {
    pub fn zeros(geom: &TorusGeometry) -> Self {
        Self::constant(geom, ZERO)
    }

    pub fn constant(geom: &TorusGeometry, c: C64) -> Self {
        Self {
            geom: *geom,
            data: vec![c; geom.npoints()],
        }
    }

    pub fn from_fn(geom: &TorusGeometry, f: impl Fn([f64; 4]) -> C64) -> Self {
        let data = (0..geom.npoints()).map(|p| f(geom.coords(p))).collect();
        Self { geom: *geom, data }
    }

    pub fn from_vec(geom: &TorusGeometry, data: Vec<C64>) -> Result<Self> {
        if data.len() != geom.npoints() {
            return Err(Error::structural(format!(
                "scalar field has {} samples, grid has {}",
                data.len(),
                geom.npoints()
            )));
        }
        Ok(Self { geom: *geom, data })
    }

    pub fn from_real(geom: &TorusGeometry, data: &[f64]) -> Result<Self> {
        Self::from_vec(geom, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// `exp(i Σ_a 2π k_a x_a / L_a)`, one Fourier mode per axis.
    pub fn fourier_mode(geom: &TorusGeometry, k: &[i64]) -> Self {
        let g = *geom;
        Self::from_fn(geom, |c| {
            let phase: f64 = (0..g.axes())
                .map(|a| 2.0 * PI * k[a] as f64 * c[a] / g.period(a / 2))
                .sum();
            C64::from_polar(1.0, phase)
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            geom: self.geom,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn sup_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> C64 {
        integrate(self) / VOLUME
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.geom != other.geom {
            return Err(Error::structural("scalar fields live on different geometries"));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            geom: self.geom,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            geom: self.geom,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            geom: self.geom,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|z| z * c)
    }
}

/// Linear structure shared by scalar and matrix-valued fields, enough for
/// form-level operations such as [`lambda_contract`].
pub trait FieldLinear: Sized + Clone {
    fn geometry(&self) -> &TorusGeometry;
    fn add_field(&self, other: &Self) -> Result<Self>;
    fn scale_field(&self, c: C64) -> Self;
}

impl FieldLinear for ScalarField {
    fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }
    fn add_field(&self, other: &Self) -> Result<Self> {
        self.try_add(other)
    }
    fn scale_field(&self, c: C64) -> Self {
        self.scale(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormType {
    /// (0,0)
    Function,
    /// (1,0), one component per `dz^j`
    Holomorphic,
    /// (0,1), one component per `dz̄^j`
    AntiHolomorphic,
    /// (1,1), components `(j,k̄)` stored row-major as `j * n + k`
    Mixed,
}

impl FormType {
    pub fn components(self, n: usize) -> usize {
        match self {
            FormType::Function => 1,
            FormType::Holomorphic | FormType::AntiHolomorphic => n,
            FormType::Mixed => n * n,
        }
    }
}

/// A differential form of pure type with coefficients of type `F`.
#[derive(Debug, Clone)]
pub struct FormField<F> {
    pub kind: FormType,
    pub components: Vec<F>,
}

impl<F: FieldLinear> FormField<F> {
    pub fn new(kind: FormType, components: Vec<F>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::structural("form field without components"))?;
        let n = first.geometry().n();
        if components.len() != kind.components(n) {
            return Err(Error::structural(format!(
                "{kind:?} form on an n={n} torus needs {} components, got {}",
                kind.components(n),
                components.len()
            )));
        }
        if components.iter().any(|c| c.geometry() != first.geometry()) {
            return Err(Error::structural("form components on different geometries"));
        }
        Ok(Self { kind, components })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        self.components[0].geometry()
    }

    /// Coefficient `a_{jk̄}` of a (1,1) form.
    pub fn mixed(&self, j: usize, k: usize) -> &F {
        &self.components[j * self.geometry().n() + k]
    }
}

/// `Λ(Σ a_{jk̄} dz^j ∧ dz̄^k) = −2i Σ_j a_{jj̄}`, measured in the
/// ω-normal frame (hence the division by the metric scale).
pub fn lambda_contract<F: FieldLinear>(f: &FormField<F>) -> Result<F> {
    if f.kind != FormType::Mixed {
        return Err(Error::structural(format!(
            "Λ acts on (1,1) forms, got {:?}",
            f.kind
        )));
    }
    let geom = *f.geometry();
    let n = geom.n();
    if f.components.len() != n * n {
        return Err(Error::structural("(1,1) form has the wrong number of components"));
    }
    let factor = C64::new(0.0, -2.0 / geom.vol_scale());
    let mut acc = f.mixed(0, 0).clone();
    for j in 1..n {
        acc = acc.add_field(f.mixed(j, j))?;
    }
    Ok(acc.scale_field(factor))
}

/// Riemann sum against the Kähler volume form.
pub fn integrate(f: &ScalarField) -> C64 {
    let s: C64 = f.data.iter().sum();
    s * f.geom.cell_volume()
}

#[derive(Clone)]
struct Planner {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Planner {
    fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
        }
    }
}

/// Multidimensional FFT over all `2n` axes. Unnormalized forward,
/// normalized inverse.
fn fftn(geom: &TorusGeometry, data: &mut [C64], inverse: bool) {
    let n = geom.grid();
    let plan = Planner::new(n);
    let fft = if inverse { &plan.inv } else { &plan.fwd };
    let mut line = vec![ZERO; n];
    let total = geom.npoints();
    for axis in 0..geom.axes() {
        let stride = geom.stride(axis);
        for start in 0..total {
            if (start / stride) % n != 0 {
                continue;
            }
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
    if inverse {
        let norm = 1.0 / total as f64;
        for z in data.iter_mut() {
            *z *= norm;
        }
    }
}

/// Applies a Fourier multiplier `m(bins)` to a scalar field.
fn fourier_multiply(f: &ScalarField, m: impl Fn(&[usize]) -> C64) -> ScalarField {
    let geom = f.geom;
    let mut data = f.data.clone();
    fftn(&geom, &mut data, false);
    for (p, z) in data.iter_mut().enumerate() {
        *z *= m(&geom.bins(p));
    }
    fftn(&geom, &mut data, true);
    ScalarField { geom, data }
}

fn first_derivative_symbol(geom: &TorusGeometry, axis: usize, bin: usize) -> f64 {
    if 2 * bin == geom.grid() {
        0.0
    } else {
        geom.wavenumber(axis, bin)
    }
}

/// Spectral `∂/∂z_j`.
pub fn spectral_dz(f: &ScalarField, j: usize) -> ScalarField {
    let g = f.geom;
    fourier_multiply(f, |b| {
        let kx = first_derivative_symbol(&g, 2 * j, b[2 * j]);
        let ky = first_derivative_symbol(&g, 2 * j + 1, b[2 * j + 1]);
        // ½(∂x − i∂y) with ∂ → ik
        C64::new(0.0, 0.5 * kx) + C64::new(0.5 * ky, 0.0)
    })
}

/// Spectral `∂/∂z̄_j`.
pub fn spectral_dzbar(f: &ScalarField, j: usize) -> ScalarField {
    let g = f.geom;
    fourier_multiply(f, |b| {
        let kx = first_derivative_symbol(&g, 2 * j, b[2 * j]);
        let ky = first_derivative_symbol(&g, 2 * j + 1, b[2 * j + 1]);
        C64::new(0.0, 0.5 * kx) - C64::new(0.5 * ky, 0.0)
    })
}

/// Spectral `∂_{z_j}∂_{z̄_k}`. On the diagonal the full second-derivative
/// symbol is used (Nyquist bins included), so that `(2/s) Σ_j ∂_j∂̄_j`
/// coincides with [`laplacian`].
pub fn spectral_dd(f: &ScalarField, j: usize, k: usize) -> ScalarField {
    if j != k {
        return spectral_dz(&spectral_dzbar(f, k), j);
    }
    let g = f.geom;
    fourier_multiply(f, |b| {
        let kx = g.wavenumber(2 * j, b[2 * j]);
        let ky = g.wavenumber(2 * j + 1, b[2 * j + 1]);
        C64::new(-0.25 * (kx * kx + ky * ky), 0.0)
    })
}

/// `∂∂̄φ` as a (1,1) form, coefficients `∂_{z_j}∂_{z̄_k}φ`.
pub fn ddbar(f: &ScalarField) -> FormField<ScalarField> {
    let n = f.geom.n();
    let mut comps = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            comps.push(spectral_dd(f, j, k));
        }
    }
    FormField {
        kind: FormType::Mixed,
        components: comps,
    }
}

/// Spectral `Δ = iΛ∂∂̄`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = f.geom;
    fourier_multiply(f, |b| C64::new(g.laplacian_symbol(b), 0.0))
}

/// Periodic convolution `(f ⋆ k)(x) = Σ_y f(y) k(x − y) dV`.
pub fn convolve(f: &ScalarField, kernel: &ScalarField) -> Result<ScalarField> {
    if f.geom != kernel.geom {
        return Err(Error::structural("convolution of fields on different geometries"));
    }
    let geom = f.geom;
    let mut a = f.data.clone();
    let mut b = kernel.data.clone();
    fftn(&geom, &mut a, false);
    fftn(&geom, &mut b, false);
    let dv = geom.cell_volume();
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y * dv;
    }
    fftn(&geom, &mut a, true);
    Ok(ScalarField { geom, data: a })
}

/// Metric distance from the origin to grid point `p` on the torus.
pub fn torus_distance(geom: &TorusGeometry, p: usize) -> f64 {
    let n = geom.grid();
    let mut d2 = 0.0;
    for a in 0..geom.axes() {
        let i = geom.axis_index(p, a);
        let m = i.min(n - i) as f64 * geom.spacing(a);
        d2 += m * m;
    }
    (geom.vol_scale() * d2).sqrt()
}

/// Discrete Green's kernel `G(x) = G(x, 0)` with `−ΔG = δ_0 − 1/Vol` and
/// zero mean.
pub fn green_kernel(geom: &TorusGeometry) -> ScalarField {
    let dv = geom.cell_volume();
    let delta = ScalarField::from_vec(
        geom,
        (0..geom.npoints())
            .map(|p| if p == 0 { C64::new(1.0 / dv, 0.0) } else { ZERO })
            .collect(),
    )
    .expect("grid-sized");
    let g = *geom;
    fourier_multiply(&delta, |b| {
        let sym = g.laplacian_symbol(b);
        if sym == 0.0 {
            ZERO
        } else {
            C64::new(-1.0 / sym, 0.0)
        }
    })
}

/// Solves `Δu = f` for zero-mean `f`, returning the zero-mean solution
/// and the minimum of the discrete Green's kernel (the `−A` lower bound).
pub fn green_solve(f: &ScalarField) -> Result<(ScalarField, f64)> {
    let mean = integrate(f);
    if mean.norm() >= 1e-9 {
        return Err(Error::precondition(format!(
            "green_solve needs a zero-mean source, integral is {mean}"
        )));
    }
    let g = f.geom;
    let u = fourier_multiply(f, |b| {
        let sym = g.laplacian_symbol(b);
        if sym == 0.0 {
            ZERO
        } else {
            C64::new(1.0 / sym, 0.0)
        }
    });
    let greens_min = green_kernel(&g)
        .data
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    Ok((u, greens_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_zero_mean(geom: &TorusGeometry, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = ScalarField::zeros(geom);
        for _ in 0..6 {
            let k: Vec<i64> = (0..geom.axes()).map(|_| rng.gen_range(-3..=3)).collect();
            if k.iter().all(|&x| x == 0) {
                continue;
            }
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            acc = acc.try_add(&ScalarField::fourier_mode(geom, &k).scale(c)).unwrap();
        }
        acc
    }

    #[test]
    fn volume_is_two_pi() {
        for (n, periods) in [(1, vec![1.7]), (1, vec![2.0 * PI]), (2, vec![1.0, 3.0])] {
            let g = TorusGeometry::new(n, &periods, 16).unwrap();
            assert!((g.volume() - VOLUME).abs() / VOLUME < 1e-12);
            let one = ScalarField::constant(&g, C64::new(1.0, 0.0));
            assert!((integrate(&one).re - VOLUME).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(TorusGeometry::new(3, &[1.0, 1.0, 1.0], 16).is_err());
        assert!(TorusGeometry::new(1, &[1.0], 24).is_err());
        assert!(TorusGeometry::new(1, &[1.0], 8).is_err());
        assert!(TorusGeometry::new(1, &[-1.0], 16).is_err());
    }

    #[test]
    fn lambda_of_kahler_form_is_dimension() {
        for n in [1, 2] {
            let g = TorusGeometry::new(n, &vec![1.3; n], 16).unwrap();
            let s = g.vol_scale();
            let comps = (0..n * n)
                .map(|idx| {
                    let (j, k) = (idx / n, idx % n);
                    let v = if j == k { C64::new(0.0, 0.5 * s) } else { ZERO };
                    ScalarField::constant(&g, v)
                })
                .collect();
            let omega = FormField::new(FormType::Mixed, comps).unwrap();
            let l = lambda_contract(&omega).unwrap();
            for z in l.data() {
                assert!((z - C64::new(n as f64, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn off_diagonal_pair_contracts_to_zero() {
        let g = TorusGeometry::standard(2, 16).unwrap();
        let mut comps = vec![ScalarField::zeros(&g); 4];
        comps[1] = ScalarField::constant(&g, C64::new(0.7, -0.1));
        let f = FormField::new(FormType::Mixed, comps).unwrap();
        assert_eq!(lambda_contract(&f).unwrap().sup_abs(), 0.0);
    }

    #[test]
    fn lambda_rejects_wrong_type() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let f = FormField::new(FormType::Holomorphic, vec![ScalarField::zeros(&g)]).unwrap();
        assert!(matches!(lambda_contract(&f), Err(Error::Structural(_))));
        assert!(FormField::new(FormType::Mixed, vec![ScalarField::zeros(&g); 2]).is_err());
    }

    #[test]
    fn contracted_i_ddbar_matches_laplacian_of_sine() {
        let g = TorusGeometry::new(1, &[2.1], 32).unwrap();
        let phi = ScalarField::from_fn(&g, |c| {
            C64::new((2.0 * PI * (2.0 * c[0] + c[1]) / 2.1).sin(), 0.0)
        });
        let form = ddbar(&phi);
        let i_form = FormField::new(
            FormType::Mixed,
            form.components.iter().map(|c| c.scale(C64::new(0.0, 1.0))).collect(),
        )
        .unwrap();
        let contracted = lambda_contract(&i_form).unwrap();
        let lap = laplacian(&phi);
        // closed form: symbol −|k|²/(2s)
        let k2 = (2.0 * PI / 2.1_f64).powi(2) * 5.0;
        let expected = phi.scale(C64::new(-k2 / (2.0 * g.vol_scale()), 0.0));
        for ((a, b), c) in contracted.data().iter().zip(lap.data()).zip(expected.data()) {
            assert!((a - b).norm() < 1e-10);
            assert!((a - c).norm() < 1e-10);
        }
        assert!(integrate(&contracted).norm() < 1e-9);
    }

    #[test]
    fn integrate_is_linear_and_kills_modes() {
        let g = TorusGeometry::standard(2, 16).unwrap();
        let mode = ScalarField::fourier_mode(&g, &[1, 0, -2, 1]);
        assert!(integrate(&mode).norm() < 1e-12);
        let f = random_zero_mean(&g, 3).try_add(&ScalarField::constant(&g, C64::new(0.3, 0.0))).unwrap();
        let c = C64::new(2.5, -1.0);
        assert!((integrate(&f.scale(c)) - c * integrate(&f)).norm() < 1e-12);
    }

    #[test]
    fn green_solve_zero_and_mode() {
        let g = TorusGeometry::new(1, &[1.9], 32).unwrap();
        let (u, _) = green_solve(&ScalarField::zeros(&g)).unwrap();
        assert_eq!(u.sup_abs(), 0.0);

        let k = [2i64, -1];
        let mode = ScalarField::fourier_mode(&g, &k);
        let (u, gmin) = green_solve(&mode).unwrap();
        let xi2: f64 = k
            .iter()
            .map(|&m| (2.0 * PI * m as f64 / 1.9).powi(2))
            .sum::<f64>()
            / (2.0 * g.vol_scale());
        let expected = mode.scale(C64::new(-1.0 / xi2, 0.0));
        assert!(u.try_sub(&expected).unwrap().sup_abs() < 1e-12);
        assert!(gmin < 0.0);
    }

    #[test]
    fn green_solve_residual_on_random_source() {
        for n in [1, 2] {
            let g = TorusGeometry::standard(n, 16).unwrap();
            let f = random_zero_mean(&g, 11 + n as u64);
            let (u, _) = green_solve(&f).unwrap();
            assert!(laplacian(&u).try_sub(&f).unwrap().sup_abs() < 1e-9);
            assert!(integrate(&u).norm() < 1e-9);
        }
    }

    #[test]
    fn green_solve_rejects_nonzero_mean() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let f = ScalarField::constant(&g, C64::new(1.0, 0.0));
        assert!(matches!(green_solve(&f), Err(Error::Precondition(_))));
    }

    #[test]
    fn green_kernel_reproduces_mean_free_part() {
        // φ(0) = avg φ + ∫ (−Δφ)(y) G(0 − y) dV(y); check against a mode
        let g = TorusGeometry::standard(1, 32).unwrap();
        let phi = random_zero_mean(&g, 5);
        let lap = laplacian(&phi);
        let kernel = green_kernel(&g);
        let n = g.grid();
        let mut acc = ZERO;
        for p in 0..g.npoints() {
            let (ix, iy) = (g.axis_index(p, 0), g.axis_index(p, 1));
            let q = ((n - ix) % n) * n + (n - iy) % n;
            acc += -lap.data()[p] * kernel.data()[q];
        }
        acc *= g.cell_volume();
        assert!((acc - phi.data()[0]).norm() < 1e-10);
    }
}
