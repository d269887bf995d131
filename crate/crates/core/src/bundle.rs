//! Holomorphic structures `∂̄_a = D̄ + a` on twisted direct sums of line
//! bundles, Hermitian metrics `H = H₀h`, Chern curvature and slopes.
//!
//! `H₀` is the identity pairing in the twisted frame, so the Chern
//! connection of `(∂̄_a, H₀)` has (1,0) part `∂₀ = D − a†` (acting on
//! endomorphisms as `∂₀π = Dπ − [a†, π]`). Changing the metric to
//! `H₀h` adds `h⁻¹∂₀h`, and the curvature changes by `∂̄_a(h⁻¹∂₀h)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::TwistedField;
use crate::geometry::{
    self, laplacian, FieldLinear, FormField, FormType, ScalarField, TorusGeometry, VOLUME,
};
use crate::linalg::{self, ZERO};

impl FieldLinear for TwistedField {
    fn geometry(&self) -> &TorusGeometry {
        TwistedField::geometry(self)
    }
    fn add_field(&self, other: &Self) -> Result<Self> {
        self.try_add(other)
    }
    fn scale_field(&self, c: C64) -> Self {
        self.scale(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub rank: usize,
    pub degree: i64,
}

/// Rank, block degrees and the (0,1)-form `a` defining `∂̄_a`.
#[derive(Debug, Clone)]
pub struct BundleSpec {
    geom: TorusGeometry,
    blocks: Vec<Block>,
    charges: Vec<i64>,
    a: Vec<TwistedField>,
    // derived
    a_adj: Vec<TwistedField>,
    dbar_a_adj: Vec<TwistedField>,
    k0: TwistedField,
}

impl BundleSpec {
    /// `a` has one endomorphism field per `dz̄_j`.
    pub fn new(geom: &TorusGeometry, blocks: &[Block], a: Vec<TwistedField>) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().any(|b| b.rank == 0) {
            return Err(Error::structural("bundle needs blocks of positive rank"));
        }
        let charges: Vec<i64> = blocks
            .iter()
            .flat_map(|b| std::iter::repeat(b.degree).take(b.rank))
            .collect();
        if a.len() != geom.n() {
            return Err(Error::structural(format!(
                "a needs {} components, got {}",
                geom.n(),
                a.len()
            )));
        }
        for comp in &a {
            if comp.geometry() != geom
                || comp.row_charges() != charges.as_slice()
                || comp.col_charges() != charges.as_slice()
            {
                return Err(Error::structural(
                    "a must be an endomorphism field twisted by the block degrees",
                ));
            }
        }
        let a_adj: Vec<_> = a.iter().map(TwistedField::adjoint).collect();
        let dbar_a_adj: Vec<_> = a_adj.iter().enumerate().map(|(j, f)| f.dzbar(j)).collect();
        let mut spec = Self {
            geom: *geom,
            blocks: blocks.to_vec(),
            charges,
            a,
            a_adj,
            dbar_a_adj,
            k0: TwistedField::zeros(geom, &[0], &[0]),
        };
        spec.k0 = spec.contracted_background()?;
        if geom.n() == 2 {
            let res = spec.integrability_residual()?;
            if res > 1e-9 {
                return Err(Error::precondition(format!(
                    "a is not integrable: |∂̄a + a∧a| = {res:e}"
                )));
            }
        }
        Ok(spec)
    }

    /// Direct sum of line bundles with `a = 0`.
    pub fn direct_sum(geom: &TorusGeometry, degrees: &[i64]) -> Result<Self> {
        let blocks: Vec<Block> = degrees.iter().map(|&d| Block { rank: 1, degree: d }).collect();
        let a = (0..geom.n())
            .map(|_| TwistedField::zeros(geom, degrees, degrees))
            .collect();
        Self::new(geom, &blocks, a)
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn rank(&self) -> usize {
        self.charges.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Per-row charges (block degrees repeated by block rank).
    pub fn charges(&self) -> &[i64] {
        &self.charges
    }

    pub fn a(&self) -> &[TwistedField] {
        &self.a
    }

    pub fn degree(&self) -> i64 {
        self.blocks.iter().map(|b| b.rank as i64 * b.degree).sum()
    }

    /// Topological value of `∫ Tr iF̂`.
    pub fn chern_weil_integral(&self) -> f64 {
        VOLUME * self.degree() as f64 * self.geom.degree_scale()
    }

    pub fn identity(&self) -> TwistedField {
        TwistedField::identity(&self.geom, &self.charges)
    }

    pub fn zero_endo(&self) -> TwistedField {
        TwistedField::zeros(&self.geom, &self.charges, &self.charges)
    }

    pub fn zero_section(&self) -> TwistedField {
        TwistedField::zeros(&self.geom, &self.charges, &[0])
    }

    /// Constant background `iF̂` of the twisted frame, row by row.
    fn background_diag(&self) -> Vec<f64> {
        let ds = self.geom.degree_scale();
        self.charges.iter().map(|&d| d as f64 * ds).collect()
    }

    /// Contracted curvature `iF̂₀` of `(∂̄_a, H₀)`, cached at construction.
    pub fn k0(&self) -> &TwistedField {
        &self.k0
    }

    fn contracted_background(&self) -> Result<TwistedField> {
        let r = self.rank();
        let s = self.geom.vol_scale();
        let bg = self.background_diag();
        let mut acc = self.zero_endo();
        for j in 0..self.geom.n() {
            let da = self.a[j].dz(j);
            let term = da
                .try_add(&da.adjoint())?
                .try_add(&self.a[j].commutator(&self.a_adj[j])?)?;
            acc = acc.try_add(&term)?;
        }
        let mut out = acc.scale_real(2.0 / s);
        for p in 0..self.geom.npoints() {
            let m = out.at_mut(p);
            for i in 0..r {
                m[i * r + i] += bg[i];
            }
        }
        Ok(out)
    }

    /// Full curvature `F₀` of `(∂̄_a, H₀)` as a (1,1) form:
    /// `F₀_{jk̄} = F_bg + D_j a_k + (D_k a_j)† + a_k a_j† − a_j† a_k`.
    pub fn curvature0(&self) -> Result<FormField<TwistedField>> {
        let n = self.geom.n();
        let r = self.rank();
        let kappa = self.geom.flux_kappa();
        let mut comps = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let mut f = self.a[k]
                    .dz(j)
                    .try_add(&self.a[j].dz(k).adjoint())?
                    .try_add(&self.a[k].try_mul(&self.a_adj[j])?)?
                    .try_sub(&self.a_adj[j].try_mul(&self.a[k])?)?;
                if j == 0 && k == 0 {
                    for p in 0..self.geom.npoints() {
                        let m = f.at_mut(p);
                        for i in 0..r {
                            m[i * r + i] += 0.5 * kappa * self.charges[i] as f64;
                        }
                    }
                }
                comps.push(f);
            }
        }
        FormField::new(FormType::Mixed, comps)
    }

    /// `max |∂̄_j a_k − ∂̄_k a_j + [a_j, a_k]|` over index pairs.
    pub fn integrability_residual(&self) -> Result<f64> {
        let n = self.geom.n();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in j + 1..n {
                let res = self.a[k]
                    .dzbar(j)
                    .try_sub(&self.a[j].dzbar(k))?
                    .try_add(&self.a[j].commutator(&self.a[k])?)?;
                worst = worst.max(res.max_abs());
            }
        }
        Ok(worst)
    }

    /// `μ(E) = (1/2π) ∫ Tr iF̂₀ / r`.
    pub fn slope(&self) -> f64 {
        let tr = self.k0.trace().expect("endomorphism");
        geometry::integrate(&tr).re / (VOLUME * self.rank() as f64)
    }

    /// `λ`, the average of `Tr F̂₀ / r`, with `F̂₀ = −i·iF̂₀`.
    pub fn lambda(&self) -> C64 {
        let tr = self.k0.trace().expect("endomorphism");
        let hat = geometry::integrate(&tr) * C64::new(0.0, -1.0);
        hat / (VOLUME * self.rank() as f64)
    }

    /// `∂̄_a s = (D̄_j s + a_j s) dz̄^j` for a section (or any field on which
    /// `a` acts from the left).
    pub fn dbar_a(&self, s: &TwistedField) -> Result<FormField<TwistedField>> {
        self.check_section(s)?;
        let comps = (0..self.geom.n())
            .map(|j| s.dzbar(j).try_add(&self.a[j].try_mul(s)?))
            .collect::<Result<Vec<_>>>()?;
        FormField::new(FormType::AntiHolomorphic, comps)
    }

    /// (1,0) part of the Chern connection of `(∂̄_a, H₀h)` on sections:
    /// `D_j s − a_j† s + (h⁻¹∂₀h)_j s`.
    pub fn d0_h(&self, h: &MetricField, s: &TwistedField) -> Result<FormField<TwistedField>> {
        self.check_section(s)?;
        let xi = self.connection_difference(h)?;
        let comps = (0..self.geom.n())
            .map(|j| {
                s.dz(j)
                    .try_sub(&self.a_adj[j].try_mul(s)?)?
                    .try_add(&xi[j].try_mul(s)?)
            })
            .collect::<Result<Vec<_>>>()?;
        FormField::new(FormType::Holomorphic, comps)
    }

    fn check_section(&self, s: &TwistedField) -> Result<()> {
        if s.geometry() != &self.geom || s.row_charges() != self.charges.as_slice() {
            return Err(Error::structural(format!(
                "field with row charges {:?} is not a section of a bundle with charges {:?}",
                s.row_charges(),
                self.charges
            )));
        }
        Ok(())
    }

    /// `∂₀` on endomorphisms: `D_j π − [a_j†, π]`.
    pub fn d0_endo(&self, pi: &TwistedField, j: usize) -> Result<TwistedField> {
        pi.dz(j).try_sub(&self.a_adj[j].commutator(pi)?)
    }

    /// `∂̄_a` on endomorphisms: `D̄_j π + [a_j, π]`.
    pub fn dbar_endo(&self, pi: &TwistedField, j: usize) -> Result<TwistedField> {
        pi.dzbar(j).try_add(&self.a[j].commutator(pi)?)
    }

    /// `h⁻¹ ∂₀h`, one endomorphism per `dz^j`.
    pub fn connection_difference(&self, h: &MetricField) -> Result<Vec<TwistedField>> {
        let w = h.h.inverse()?;
        (0..self.geom.n())
            .map(|j| w.try_mul(&self.d0_endo(&h.h, j)?))
            .collect()
    }

    fn log_det(&self, h: &MetricField) -> Result<ScalarField> {
        let r = self.rank();
        let mut vals = Vec::with_capacity(self.geom.npoints());
        for p in 0..self.geom.npoints() {
            let d = linalg::det(h.h.at(p), r).re;
            if !(d > 0.0) {
                return Err(Error::Numerical {
                    point: p,
                    msg: format!("det h = {d} is not positive"),
                });
            }
            vals.push(C64::new(d.ln(), 0.0));
        }
        ScalarField::from_vec(&self.geom, vals)
    }

    /// `X_j = ∂̄_a(h⁻¹∂₀h)_{j j̄}` expanded by Leibniz, with the compact
    /// stencil for `D̄_j D_j h`. Writing `W = h⁻¹`, `P = D_j h`,
    /// `Q = D̄_j h`, `L = D̄_j D_j h`:
    ///
    /// ```text
    /// ξ = W(P − a†h + h a†)
    /// X = W(L − QWP + QW a†h − (D̄a†)h − a†Q) + D̄a† + aξ − ξa
    /// ```
    fn diagonal_term(&self, h: &MetricField, j: usize) -> Result<TwistedField> {
        let r = self.rank();
        let hh = &h.h;
        let (p_f, q_f) = hh.dz_dzbar(j);
        let l_f = hh.dzbar_dz(j);
        let a = &self.a[j];
        let ad = &self.a_adj[j];
        let dad = &self.dbar_a_adj[j];
        let x = hh.map_points(|pt, hm, out| {
            let w = match linalg::inverse(hm, r) {
                Some(w) => w,
                None => {
                    out.iter_mut().for_each(|z| *z = C64::new(f64::NAN, f64::NAN));
                    return;
                }
            };
            let (pm, qm, lm) = (p_f.at(pt), q_f.at(pt), l_f.at(pt));
            let (am, adm, dadm) = (a.at(pt), ad.at(pt), dad.at(pt));
            let rr = r * r;
            let mut buf = vec![ZERO; 6 * rr];
            let (adh, rest) = buf.split_at_mut(rr);
            let (t1, rest) = rest.split_at_mut(rr);
            let (xi, rest) = rest.split_at_mut(rr);
            let (qw, rest) = rest.split_at_mut(rr);
            let (t2, t3) = rest.split_at_mut(rr);
            let mm = |x: &[C64], y: &[C64], o: &mut [C64]| linalg::mul_into(x, y, o, r, r, r);
            mm(adm, hm, adh);
            mm(hm, adm, t1);
            for i in 0..rr {
                t1[i] += pm[i] - adh[i];
            }
            mm(&w, t1, xi);
            mm(qm, &w, qw);
            // bracket = L + QW a†h − QWP − (D̄a†)h − a†Q, accumulated in t1
            mm(qw, adh, t1);
            mm(qw, pm, t2);
            for i in 0..rr {
                t1[i] += lm[i] - t2[i];
            }
            mm(dadm, hm, t2);
            mm(adm, qm, &mut t3[..rr]);
            for i in 0..rr {
                t1[i] -= t2[i] + t3[i];
            }
            mm(&w, t1, out);
            mm(am, xi, t2);
            mm(xi, am, &mut t3[..rr]);
            for i in 0..rr {
                out[i] += dadm[i] + t2[i] - t3[i];
            }
        });
        if let Some(idx) = x.data().iter().position(|z| !z.is_finite()) {
            return Err(Error::Numerical {
                point: idx / (r * r),
                msg: "singular metric in curvature".into(),
            });
        }
        Ok(x)
    }

    /// Contracted curvature `iF̂_H` of `H = H₀h`.
    ///
    /// The traceless part is `K₀ − (2/s) Σ_j X_j`; the trace is taken from
    /// `Tr K₀ − Δ log det h`, which is the same quantity evaluated
    /// spectrally, so that `∫ Tr iF̂_H` is exactly topological.
    pub fn contracted_curvature(&self, h: &MetricField) -> Result<TwistedField> {
        let r = self.rank();
        let s = self.geom.vol_scale();
        let mut acc = self.k0.clone();
        for j in 0..self.geom.n() {
            acc = acc.axpy(C64::new(-2.0 / s, 0.0), &self.diagonal_term(h, j)?)?;
        }
        let target = self.k0.trace()?.try_sub(&laplacian(&self.log_det(h)?))?;
        Ok(replace_trace(&acc, &target, r))
    }

    /// Full curvature `F_H = F₀ + ∂̄_a(h⁻¹∂₀h)` as a (1,1) form.
    pub fn curvature(&self, h: &MetricField) -> Result<FormField<TwistedField>> {
        let f0 = self.curvature0()?;
        let corr = self.curvature_correction(h)?;
        let comps = f0
            .components
            .iter()
            .zip(&corr.components)
            .map(|(a, b)| a.try_add(b))
            .collect::<Result<Vec<_>>>()?;
        FormField::new(FormType::Mixed, comps)
    }

    /// The change term `∂̄_a(h⁻¹∂₀h)` in components `(j,k̄)`, with traces
    /// `−∂_j∂̄_k log det h`. Diagonal pairs use the expanded form of
    /// [`Self::contracted_curvature`], off-diagonal pairs compose first
    /// derivatives.
    pub fn curvature_correction(&self, h: &MetricField) -> Result<FormField<TwistedField>> {
        let n = self.geom.n();
        let r = self.rank();
        let log_det = self.log_det(h)?;
        let xi = if n > 1 { self.connection_difference(h)? } else { vec![] };
        let mut comps = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let raw = if j == k {
                    self.diagonal_term(h, j)?
                } else {
                    self.dbar_endo(&xi[j], k)?
                };
                let target = geometry::spectral_dd(&log_det, j, k);
                comps.push(replace_trace(&raw, &target, r).scale_real(-1.0));
            }
        }
        FormField::new(FormType::Mixed, comps)
    }

    /// `⟨φ, ψ⟩_H` componentwise for form-valued sections.
    pub fn pairing(
        &self,
        phi: &FormField<TwistedField>,
        psi: &FormField<TwistedField>,
        h: &MetricField,
    ) -> Result<FormField<ScalarField>> {
        let n = self.geom.n();
        let pair = |x: &TwistedField, y: &TwistedField| -> Result<ScalarField> {
            self.check_section(x)?;
            self.check_section(y)?;
            let hx = h.h.try_mul(x)?;
            let vals = (0..self.geom.npoints())
                .map(|p| {
                    let (u, v) = (hx.at(p), y.at(p));
                    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
                })
                .collect();
            ScalarField::from_vec(&self.geom, vals)
        };
        use FormType::*;
        let (kind, comps) = match (phi.kind, psi.kind) {
            (Function, Function) => (Function, vec![pair(&phi.components[0], &psi.components[0])?]),
            (Function, other) => (
                conjugate_type(other),
                psi.components
                    .iter()
                    .map(|y| pair(&phi.components[0], y))
                    .collect::<Result<_>>()?,
            ),
            (other, Function) => (
                other,
                phi.components
                    .iter()
                    .map(|x| pair(x, &psi.components[0]))
                    .collect::<Result<_>>()?,
            ),
            (Holomorphic, Holomorphic) => {
                // φ_j dz^j ∧ conj(ψ_k dz^k) = φ_j ψ̄_k dz^j ∧ dz̄^k
                let mut c = Vec::with_capacity(n * n);
                for j in 0..n {
                    for k in 0..n {
                        c.push(pair(&phi.components[j], &psi.components[k])?);
                    }
                }
                (Mixed, c)
            }
            (AntiHolomorphic, AntiHolomorphic) => {
                // φ_j dz̄^j ∧ ψ̄_k dz^k = −φ_j ψ̄_k dz^k ∧ dz̄^j
                let mut c = Vec::with_capacity(n * n);
                for k in 0..n {
                    for j in 0..n {
                        c.push(
                            pair(&phi.components[j], &psi.components[k])?.scale(C64::new(-1.0, 0.0)),
                        );
                    }
                }
                (Mixed, c)
            }
            (a, b) => {
                return Err(Error::structural(format!(
                    "pairing of {a:?} with {b:?} has no supported form type"
                )))
            }
        };
        FormField::new(kind, comps)
    }

    /// `(∫ |φ|²_H dV)^{1/2}`; one-form components are weighted by the
    /// metric `2/s` of `dz^j`.
    pub fn l2_norm(&self, phi: &FormField<TwistedField>, h: &MetricField) -> Result<f64> {
        let weight = match phi.kind {
            FormType::Function => 1.0,
            FormType::Holomorphic | FormType::AntiHolomorphic => 2.0 / self.geom.vol_scale(),
            FormType::Mixed => (2.0 / self.geom.vol_scale()).powi(2),
        };
        let mut total = 0.0;
        for c in &phi.components {
            let hx = h.h.try_mul(c)?;
            let dens: f64 = hx
                .data()
                .iter()
                .zip(c.data())
                .map(|(a, b)| (a * b.conj()).re)
                .sum();
            total += dens * weight * self.geom.cell_volume();
        }
        Ok(total.max(0.0).sqrt())
    }

    /// Gauge transform by a constant block-respecting unitary `u`:
    /// `a ↦ u a u†`.
    pub fn conjugate(&self, u: &[C64]) -> Result<Self> {
        let r = self.rank();
        for i in 0..r {
            for j in 0..r {
                if self.charges[i] != self.charges[j] && u[i * r + j].norm() > 0.0 {
                    return Err(Error::structural("gauge mixes blocks of different degree"));
                }
            }
        }
        let ud = linalg::adjoint(u, r, r);
        let a = self
            .a
            .iter()
            .map(|f| f.map_points(|_, m, o| o.copy_from_slice(&linalg::mul_sq(&linalg::mul_sq(u, m, r), &ud, r))))
            .collect();
        Self::new(&self.geom, &self.blocks, a)
    }
}

fn conjugate_type(t: FormType) -> FormType {
    match t {
        FormType::Holomorphic => FormType::AntiHolomorphic,
        FormType::AntiHolomorphic => FormType::Holomorphic,
        other => other,
    }
}

/// Returns `m − (Tr m / r) I + (target / r) I` pointwise.
fn replace_trace(m: &TwistedField, target: &ScalarField, r: usize) -> TwistedField {
    let t = target.data();
    m.map_points(|p, a, o| {
        o.copy_from_slice(a);
        let shift = (t[p] - linalg::trace(a, r)) / r as f64;
        for i in 0..r {
            o[i * r + i] += shift;
        }
    })
}

/// Hermitian positive-definite endomorphism field `h` with `H = H₀h`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub h: TwistedField,
}

impl MetricField {
    pub fn new(h: TwistedField) -> Result<Self> {
        let r = h.rows();
        if r != h.cols() || h.row_charges() != h.col_charges() {
            return Err(Error::structural("metric must be an endomorphism field"));
        }
        let defect = h.hermitian_defect();
        if defect > 1e-12 * (1.0 + h.max_abs()) {
            return Err(Error::precondition(format!("h is not Hermitian (defect {defect:e})")));
        }
        for p in 0..h.geometry().npoints() {
            if !linalg::is_positive_definite(h.at(p), r) {
                return Err(Error::Numerical {
                    point: p,
                    msg: "h is not positive definite".into(),
                });
            }
        }
        Ok(Self { h })
    }

    pub fn identity(spec: &BundleSpec) -> Self {
        Self { h: spec.identity() }
    }

    pub fn rank(&self) -> usize {
        self.h.rows()
    }

    /// `max_x |det h(x) − 1|`.
    pub fn det_defect(&self) -> f64 {
        let r = self.rank();
        (0..self.h.geometry().npoints())
            .map(|p| (linalg::det(self.h.at(p), r) - 1.0).norm())
            .fold(0.0, f64::max)
    }

    /// `sup_X |h|_{H₀}` (largest eigenvalue).
    pub fn sup_norm(&self) -> f64 {
        self.h.sup_op_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn constant_curvature_line_bundle() {
        for d in [-2i64, 1, 3] {
            let g = TorusGeometry::standard(1, 16).unwrap();
            let spec = BundleSpec::direct_sum(&g, &[d]).unwrap();
            let k = spec.contracted_curvature(&MetricField::identity(&spec)).unwrap();
            for p in 0..g.npoints() {
                assert!((k.at(p)[0] - C64::new(d as f64, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn split_hat_f_and_slopes() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = BundleSpec::direct_sum(&g, &[1, -1]).unwrap();
        let k = spec.contracted_curvature(&MetricField::identity(&spec)).unwrap();
        let m = k.at(5);
        assert!((m[0] - 1.0).norm() < 1e-12 && (m[3] + 1.0).norm() < 1e-12);
        assert!(spec.slope().abs() < 1e-14 && spec.lambda().norm() < 1e-14);
        let spec = BundleSpec::direct_sum(&g, &[0, 1]).unwrap();
        assert!((spec.slope() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slope_is_i_lambda() {
        for seed in 0..10 {
            let g = TorusGeometry::standard(1, 16).unwrap();
            let degrees = [seed as i64 % 3 - 1, 1 - (seed as i64 % 2) * 2];
            let spec = presets::random_bundle(&g, &degrees, seed, 0.3).unwrap();
            let diff = C64::new(spec.slope(), 0.0) - C64::new(0.0, 1.0) * spec.lambda();
            assert!(diff.norm() < 1e-12, "seed {seed}: {diff}");
        }
    }

    #[test]
    fn scalar_metric_leaves_curvature() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = presets::random_bundle(&g, &[0, 1], 3, 0.4).unwrap();
        let k1 = spec.contracted_curvature(&MetricField::identity(&spec)).unwrap();
        let h = MetricField::new(spec.identity().scale_real(3.7)).unwrap();
        let k2 = spec.contracted_curvature(&h).unwrap();
        assert!(k1.try_sub(&k2).unwrap().max_abs() < 1e-12);
        assert!(k1.try_sub(spec.k0()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn curvature_contracts_to_hat_f() {
        for n in [1, 2] {
            let g = TorusGeometry::standard(n, 16).unwrap();
            let spec = presets::random_bundle(&g, &[0, -1], 9, 0.3).unwrap();
            let h = presets::random_metric(&spec, 4, 0.3).unwrap();
            let f = spec.curvature(&h).unwrap();
            let k = lambda_contract_i(&f);
            let direct = spec.contracted_curvature(&h).unwrap();
            let err = k.try_sub(&direct).unwrap().max_abs();
            assert!(err < 1e-10, "n={n} err {err}");
            // change rule holds exactly
            let f0 = spec.curvature0().unwrap();
            let corr = spec.curvature_correction(&h).unwrap();
            for idx in 0..n * n {
                let res = f.components[idx]
                    .try_sub(&f0.components[idx])
                    .unwrap()
                    .try_sub(&corr.components[idx])
                    .unwrap()
                    .max_abs();
                assert!(res < 1e-12);
            }
        }
    }

    fn lambda_contract_i(f: &FormField<TwistedField>) -> TwistedField {
        geometry::lambda_contract(f).unwrap().scale(C64::new(0.0, 1.0))
    }

    #[test]
    fn hat_f_is_h_self_adjoint_and_integrates_to_degree() {
        let g = TorusGeometry::standard(1, 64).unwrap();
        let spec = presets::random_bundle(&g, &[1, -2], 2, 0.3).unwrap();
        let h = presets::random_metric(&spec, 8, 0.4).unwrap();
        let k = spec.contracted_curvature(&h).unwrap();
        // (K)^{†_H} = h⁻¹ K† h
        let kh = h.h.inverse().unwrap().try_mul(&k.adjoint()).unwrap().try_mul(&h.h).unwrap();
        let err = kh.try_sub(&k).unwrap().max_abs();
        assert!(err < 1e-9 * (1.0 + k.max_abs()), "self-adjointness {err}");
        let tr = geometry::integrate(&k.trace().unwrap());
        assert!((tr.re - spec.chern_weil_integral()).abs() < 1e-9);
        assert!((spec.chern_weil_integral() - 2.0 * std::f64::consts::PI * -1.0).abs() < 1e-12);
    }

    #[test]
    fn dbar_a_kills_constants() {
        let g = TorusGeometry::standard(1, 32).unwrap();
        let spec = BundleSpec::direct_sum(&g, &[0]).unwrap();
        let s = spec.zero_section().map_points(|_, _, o| o[0] = C64::new(2.0, 1.0));
        assert_eq!(spec.dbar_a(&s).unwrap().components[0].max_abs(), 0.0);
    }

    fn leibniz_defect(grid: usize) -> f64 {
        let g = TorusGeometry::standard(1, grid).unwrap();
        let spec = presets::random_bundle(&g, &[1, 0], 5, 0.3).unwrap();
        let s = presets::random_section(&spec, 6, 1.0);
        let f = ScalarField::fourier_mode(&g, &[1, -1]).scale(C64::new(0.5, 0.2));
        let lhs = spec.dbar_a(&s.mul_scalar(&f).unwrap()).unwrap();
        let rhs = spec.dbar_a(&s).unwrap().components[0]
            .mul_scalar(&f)
            .unwrap()
            .try_add(&s.mul_scalar(&geometry::spectral_dzbar(&f, 0)).unwrap())
            .unwrap();
        lhs.components[0].try_sub(&rhs).unwrap().max_abs()
    }

    #[test]
    fn dbar_a_leibniz_converges_at_fourth_order() {
        let (e1, e2) = (leibniz_defect(64), leibniz_defect(128));
        let rate = (e1 / e2).log2();
        assert!(rate > 3.5, "rate {rate} ({e1:e} -> {e2:e})");
        assert!(e2 < 1e-4);
    }

    #[test]
    fn pairing_compatibility_with_chern_connection() {
        // ∂⟨s,t⟩_H = ⟨∂_H s, t⟩_H + ⟨s, ∂̄_a t⟩_H
        let defect = |grid: usize| {
            let g = TorusGeometry::standard(1, grid).unwrap();
            let spec = presets::random_bundle(&g, &[1, 0], 8, 0.3).unwrap();
            let h = presets::random_metric(&spec, 9, 0.3).unwrap();
            let s = presets::random_section(&spec, 10, 1.0);
            let t = presets::random_section(&spec, 11, 1.0);
            let func = |x: &TwistedField| FormField::new(FormType::Function, vec![x.clone()]).unwrap();
            let st = spec.pairing(&func(&s), &func(&t), &h).unwrap();
            let lhs = geometry::spectral_dz(&st.components[0], 0);
            let ds = spec.d0_h(&h, &s).unwrap();
            let dt = spec.dbar_a(&t).unwrap();
            let a = spec.pairing(&func(&ds.components[0]), &func(&t), &h).unwrap();
            let b = spec.pairing(&func(&s), &func(&dt.components[0]), &h).unwrap();
            let rhs = a.components[0].try_add(&b.components[0]).unwrap();
            lhs.try_sub(&rhs).unwrap().sup_abs()
        };
        let (e1, e2) = (defect(32), defect(64));
        assert!(e2 < e1 / 10.0 && e2 < 1e-2, "{e1:e} {e2:e}");
    }

    #[test]
    fn pairing_identities() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = presets::random_bundle(&g, &[1, 0], 1, 0.3).unwrap();
        let h = presets::random_metric(&spec, 2, 0.5).unwrap();
        let s = FormField::new(FormType::Function, vec![presets::random_section(&spec, 3, 1.0)]).unwrap();
        let t = FormField::new(FormType::Function, vec![presets::random_section(&spec, 4, 1.0)]).unwrap();
        let ss = spec.pairing(&s, &s, &h).unwrap();
        assert!(ss.components[0].data().iter().all(|z| z.re >= 0.0 && z.im.abs() < 1e-12));
        let st = spec.pairing(&s, &t, &h).unwrap();
        let ts = spec.pairing(&t, &s, &h).unwrap();
        for (a, b) in st.components[0].data().iter().zip(ts.components[0].data()) {
            assert!((a - b.conj()).norm() < 1e-12);
        }
        // ⟨hs, s⟩_{H₀} = ⟨s, s⟩_{H₀h}
        let hs = FormField::new(FormType::Function, vec![h.h.try_mul(&s.components[0]).unwrap()]).unwrap();
        let id = MetricField::identity(&spec);
        let lhs = spec.pairing(&hs, &s, &id).unwrap();
        for (a, b) in lhs.components[0].data().iter().zip(ss.components[0].data()) {
            assert!((a - b).norm() < 1e-12);
        }
        let hol = FormField::new(FormType::Holomorphic, vec![s.components[0].clone()]).unwrap();
        let anti = FormField::new(FormType::AntiHolomorphic, vec![s.components[0].clone()]).unwrap();
        assert!(spec.pairing(&hol, &anti, &h).is_err());
    }

    #[test]
    fn gauge_covariance() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = presets::random_bundle_blocks(
            &g,
            &[Block { rank: 2, degree: 0 }, Block { rank: 1, degree: 1 }],
            7,
            0.3,
        )
        .unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let u = vec![
            C64::new(c, 0.0), C64::new(0.0, s), ZERO,
            C64::new(0.0, s), C64::new(c, 0.0), ZERO,
            ZERO, ZERO, C64::new(0.0, 1.0),
        ];
        let gauged = spec.conjugate(&u).unwrap();
        let h = presets::random_metric(&spec, 1, 0.3).unwrap();
        let ud = linalg::adjoint(&u, 3, 3);
        let conj = |f: &TwistedField| {
            f.map_points(|_, m, o| o.copy_from_slice(&linalg::mul_sq(&linalg::mul_sq(&u, m, 3), &ud, 3)))
        };
        let h2 = MetricField::new(conj(&h.h)).unwrap();
        let k = spec.contracted_curvature(&h).unwrap();
        let k2 = gauged.contracted_curvature(&h2).unwrap();
        assert!(conj(&k).try_sub(&k2).unwrap().max_abs() < 1e-10);
    }
}
