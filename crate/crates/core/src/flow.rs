//! Donaldson heat flow `ḣ = −2i h(F̂ − λI) = −2h(iF̂ − μI)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleSpec, MetricField};
use crate::error::{Error, Result};
use crate::field::TwistedField;
use crate::geometry::{self, ScalarField};
use crate::linalg;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FlowControls {
    /// Initial step; `None` picks [`FlowControls::default_dt`].
    pub dt0: Option<f64>,
    pub t_max: f64,
    /// Residual tolerance `ε` on `‖iF̂ − μI‖_{L²}`.
    pub epsilon: f64,
    /// Blow-up threshold `M` on `sup |h|`.
    pub blowup: f64,
    /// Keep every `snapshot_stride`-th accepted step (plus first and last).
    pub snapshot_stride: usize,
    /// Renormalize `det h = 1` after each step; `None` means "rank > 1".
    pub normalize_det: Option<bool>,
    pub max_halvings: u32,
    /// Allowed increase of the squared residual between accepted steps.
    pub monotone_tol: f64,
}

impl Default for FlowControls {
    fn default() -> Self {
        Self {
            dt0: None,
            t_max: 50.0,
            epsilon: 1e-6,
            blowup: 1e6,
            snapshot_stride: 100,
            normalize_det: None,
            max_halvings: 20,
            monotone_tol: 1e-8,
        }
    }
}

impl FlowControls {
    /// `0.2 · s · h² / n` when the determinant is pinned. Otherwise the
    /// trace evolves under the spectral Laplacian, whose Nyquist modes are
    /// stiffer than the stencil's, and the factor drops to `0.12`.
    pub fn default_dt(spec: &BundleSpec, normalize_det: bool) -> f64 {
        let g = spec.geometry();
        let h = (0..g.axes()).map(|a| g.spacing(a)).fold(f64::INFINITY, f64::min);
        let c = if normalize_det { 0.2 } else { 0.12 };
        c * g.vol_scale() * h * h / g.n() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converged,
    BlowUp,
    Timeout,
}

/// Per accepted step diagnostics, one shared time index.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: Vec<f64>,
    pub residual: Vec<f64>,
    pub sup_h: Vec<f64>,
    pub trace_integral: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub det_defect: Vec<f64>,
    pub dt: Vec<f64>,
}

impl Diagnostics {
    fn push(&mut self, t: f64, res: f64, sup_h: f64, tr: f64, det: f64, dt: f64) {
        let diss = match (self.t.last(), self.residual.last(), self.dissipation.last()) {
            (Some(&t0), Some(&r0), Some(&d0)) => d0 + 0.5 * (t - t0) * (r0 * r0 + res * res),
            _ => 0.0,
        };
        self.t.push(t);
        self.residual.push(res);
        self.sup_h.push(sup_h);
        self.trace_integral.push(tr);
        self.dissipation.push(diss);
        self.det_defect.push(det);
        self.dt.push(dt);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub h: MetricField,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub h: MetricField,
    /// `iF̂ − μI` relative to the reference in use, at `h`.
    pub excess: TwistedField,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
    pub verdict: Verdict,
    pub mu: f64,
    pub normalize_det: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest increase of the squared residual between accepted steps.
    pub max_residual_increase: f64,
}

impl FlowTrajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has snapshots")
    }
}

/// The flow's right-hand side and bookkeeping for one bundle.
pub struct DonaldsonFlow<'a> {
    spec: &'a BundleSpec,
    mu: f64,
    normalize_det: bool,
    /// `Tr K₀/r − μ`, subtracted when the determinant is pinned so that the
    /// reference metric is conformally balanced.
    shift: Option<ScalarField>,
}

impl<'a> DonaldsonFlow<'a> {
    pub fn new(spec: &'a BundleSpec, normalize_det: Option<bool>) -> Self {
        let mu = spec.slope();
        let normalize_det = normalize_det.unwrap_or(spec.rank() > 1);
        let shift = if normalize_det {
            let r = spec.rank() as f64;
            let tr = spec.k0().trace().expect("endomorphism");
            let s = tr.map(|z| C64::new(z.re / r - mu, 0.0));
            if s.sup_abs() > 0.0 {
                Some(s)
            } else {
                None
            }
        } else {
            None
        };
        Self {
            spec,
            mu,
            normalize_det,
            shift,
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn normalizes_det(&self) -> bool {
        self.normalize_det
    }

    /// `iF̂_H − μI` (with the conformal shift when the determinant is pinned).
    pub fn excess(&self, h: &MetricField) -> Result<TwistedField> {
        let r = self.spec.rank();
        let k = self.spec.contracted_curvature(h)?;
        let shift = self.shift.as_ref();
        let mu = self.mu;
        Ok(k.map_points(|p, m, o| {
            o.copy_from_slice(m);
            let d = mu + shift.map_or(0.0, |s| s.data()[p].re);
            for i in 0..r {
                o[i * r + i] -= d;
            }
        }))
    }

    /// `‖X‖_{L²}` in the metric `H`: `∫ Tr(X h⁻¹ X† h)`.
    pub fn h_norm(&self, x: &TwistedField, h: &MetricField) -> Result<f64> {
        let dens = h_norm_density(x, h)?;
        Ok(geometry::integrate(&dens).re.max(0.0).sqrt())
    }

    fn rhs(&self, h: &MetricField, excess: &TwistedField) -> Result<TwistedField> {
        Ok(h.h.try_mul(excess)?.scale_real(-2.0))
    }

    pub fn state(&self, t: f64, h: MetricField) -> Result<FlowState> {
        let excess = self.excess(&h)?;
        let residual = self.h_norm(&excess, &h)?;
        Ok(FlowState {
            t,
            h,
            excess,
            residual,
        })
    }

    fn project(&self, h: &mut TwistedField) -> Result<()> {
        h.hermitize();
        let r = h.rows();
        for p in 0..h.geometry().npoints() {
            if !linalg::is_positive_definite(h.at(p), r) {
                return Err(Error::Numerical {
                    point: p,
                    msg: "positivity lost".into(),
                });
            }
        }
        if self.normalize_det {
            for p in 0..h.geometry().npoints() {
                let m = h.at_mut(p);
                let d = linalg::det(m, r).re;
                let f = d.powf(-1.0 / r as f64);
                m.iter_mut().for_each(|z| *z *= f);
            }
            h.hermitize();
        }
        Ok(())
    }

    fn try_step(&self, state: &FlowState, dt: f64) -> Result<FlowState> {
        let h0 = &state.h.h;
        let stage = |h: &TwistedField| -> Result<TwistedField> {
            let mut hh = h.clone();
            hh.hermitize();
            let m = MetricField { h: hh };
            self.rhs(&m, &self.excess(&m)?)
        };
        let k1 = self.rhs(&state.h, &state.excess)?;
        let k2 = stage(&h0.axpy(C64::new(0.5 * dt, 0.0), &k1)?)?;
        let k3 = stage(&h0.axpy(C64::new(0.5 * dt, 0.0), &k2)?)?;
        let k4 = stage(&h0.axpy(C64::new(dt, 0.0), &k3)?)?;
        let mut h = h0.clone();
        let w = dt / 6.0;
        let (b1, b2, b3, b4) = (k1.data(), k2.data(), k3.data(), k4.data());
        for (i, z) in h.data_mut().iter_mut().enumerate() {
            *z += (b1[i] + (b2[i] + b3[i]) * 2.0 + b4[i]) * w;
        }
        if h.data().iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical {
                point: 0,
                msg: "non-finite metric after step".into(),
            });
        }
        self.project(&mut h)?;
        self.state(state.t + dt, MetricField { h })
    }

    /// One accepted step: RK4, symmetrization, determinant renormalization.
    /// On loss of positivity the step is halved up to `max_halvings` times.
    /// Returns the new state and the step actually taken.
    pub fn step(&self, state: &FlowState, dt: f64, max_halvings: u32) -> Result<(FlowState, f64)> {
        if !(dt > 0.0) {
            return Err(Error::precondition("dt must be positive"));
        }
        let mut dt = dt;
        let mut last_err = None;
        for _ in 0..=max_halvings {
            match self.try_step(state, dt) {
                Ok(s) => return Ok((s, dt)),
                Err(e @ Error::Numerical { .. }) => {
                    last_err = Some(e);
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        let e = last_err.unwrap();
        Err(Error::Numerical {
            point: match e {
                Error::Numerical { point, .. } => point,
                _ => 0,
            },
            msg: format!(
                "step rejected after {max_halvings} halvings at t = {} (last dt {dt:e}): {e}",
                state.t
            ),
        })
    }

    fn trace_integral(&self, state: &FlowState) -> Result<f64> {
        // ∫ Tr iF̂ = ∫ Tr(excess) + rμ·Vol (+ the shift, which integrates to 0)
        let tr = geometry::integrate(&state.excess.trace()?).re;
        Ok(tr + self.spec.rank() as f64 * self.mu * geometry::VOLUME)
    }

    fn record(&self, d: &mut Diagnostics, s: &FlowState, dt: f64) -> Result<()> {
        let det = if self.normalize_det { s.h.det_defect() } else { 0.0 };
        d.push(s.t, s.residual, s.h.sup_norm(), self.trace_integral(s)?, det, dt);
        Ok(())
    }

    /// Integrates from `h₀ = I` until convergence, blow-up or `t_max`.
    pub fn run(&self, controls: &FlowControls) -> Result<FlowTrajectory> {
        self.run_from(MetricField::identity(self.spec), controls)
    }

    pub fn run_from(&self, h0: MetricField, controls: &FlowControls) -> Result<FlowTrajectory> {
        let dt0 = controls.dt0.unwrap_or_else(|| FlowControls::default_dt(self.spec, self.normalize_det));
        if !(dt0 > 0.0) || !(controls.t_max > 0.0) || !(controls.epsilon > 0.0) || !(controls.blowup > 0.0) {
            return Err(Error::precondition("flow controls must be positive"));
        }
        let stride = controls.snapshot_stride.max(1);
        let mut h0 = h0;
        self.project(&mut h0.h)?;
        let mut state = self.state(0.0, h0)?;
        let mut diag = Diagnostics::default();
        self.record(&mut diag, &state, 0.0)?;
        let mut snapshots = vec![Snapshot {
            t: 0.0,
            h: state.h.clone(),
        }];
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut worst_increase: f64 = 0.0;
        let verdict = loop {
            if state.residual < controls.epsilon {
                break Verdict::Converged;
            }
            if state.h.sup_norm() > controls.blowup {
                break Verdict::BlowUp;
            }
            if state.t >= controls.t_max {
                break Verdict::Timeout;
            }
            let dt = dt0.min(controls.t_max - state.t).max(1e-300);
            let (next, taken) = self.step(&state, dt, controls.max_halvings)?;
            if taken < dt {
                rejected += (dt / taken).log2().round() as usize;
            }
            let inc = next.residual.powi(2) - state.residual.powi(2);
            worst_increase = worst_increase.max(inc);
            if inc > controls.monotone_tol {
                return Err(Error::Numerical {
                    point: 0,
                    msg: format!(
                        "residual² increased by {inc:e} at t = {} (tolerance {:e})",
                        next.t, controls.monotone_tol
                    ),
                });
            }
            state = next;
            accepted += 1;
            self.record(&mut diag, &state, taken)?;
            if accepted % stride == 0 {
                snapshots.push(Snapshot {
                    t: state.t,
                    h: state.h.clone(),
                });
            }
        };
        if snapshots.last().map(|s| s.t) != Some(state.t) {
            snapshots.push(Snapshot {
                t: state.t,
                h: state.h.clone(),
            });
        }
        Ok(FlowTrajectory {
            snapshots,
            diagnostics: diag,
            verdict,
            mu: self.mu,
            normalize_det: self.normalize_det,
            accepted_steps: accepted,
            rejected_steps: rejected,
            max_residual_increase: worst_increase,
        })
    }
}

/// Pointwise `|X|²_H = Tr(X h⁻¹ X† h)` as a real scalar field.
pub fn h_norm_density(x: &TwistedField, h: &MetricField) -> Result<ScalarField> {
    let w = h.h.inverse()?;
    let r = x.rows();
    let vals = (0..x.geometry().npoints())
        .map(|p| {
            let xm = x.at(p);
            let a = linalg::mul_sq(xm, w.at(p), r);
            let b = linalg::mul_sq(&linalg::adjoint(xm, r, r), h.h.at(p), r);
            C64::new(linalg::trace(&linalg::mul_sq(&a, &b, r), r).re, 0.0)
        })
        .collect();
    ScalarField::from_vec(x.geometry(), vals)
}

/// Theorem 4.1 diagnostics along the stored snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thm41Report {
    pub t: Vec<f64>,
    /// (i) `‖F_H‖_{L²}`
    pub curvature_l2: Vec<f64>,
    /// (ii) `sup |iF̂_H|_H`
    pub hat_f_sup: Vec<f64>,
    /// (iii) `‖∇_H iF̂_H‖_{L²}`
    pub grad_hat_f_l2: Vec<f64>,
    /// Maximum-principle bound for (ii): `sup_{t=0}|iF̂ − μ|_H + |μ|√r`.
    pub hat_f_bound: f64,
    pub bound_respected: bool,
    /// Indices where the squared residual increased by more than 1e-8.
    pub dissipation_violations: Vec<usize>,
}

pub fn diagnostics_thm41(spec: &BundleSpec, traj: &FlowTrajectory) -> Result<Thm41Report> {
    if traj.snapshots.len() < 2 {
        return Err(Error::precondition("diagnostics need at least two snapshots"));
    }
    let flow = DonaldsonFlow::new(spec, Some(traj.normalize_det));
    let g = spec.geometry();
    let n = g.n();
    let w1 = 2.0 / g.vol_scale();
    let r = spec.rank();
    let mut rep = Thm41Report {
        t: vec![],
        curvature_l2: vec![],
        hat_f_sup: vec![],
        grad_hat_f_l2: vec![],
        hat_f_bound: 0.0,
        bound_respected: true,
        dissipation_violations: vec![],
    };
    for (idx, snap) in traj.snapshots.iter().enumerate() {
        let h = &snap.h;
        let f = spec.curvature(h)?;
        let mut f2 = 0.0;
        for c in &f.components {
            f2 += w1 * w1 * geometry::integrate(&h_norm_density(c, h)?).re;
        }
        let k = spec.contracted_curvature(h)?;
        let k_sup = h_norm_density(&k, h)?
            .data()
            .iter()
            .map(|z| z.re.max(0.0).sqrt())
            .fold(0.0, f64::max);
        if idx == 0 {
            let ex = flow.excess(h)?;
            let ex_sup = h_norm_density(&ex, h)?
                .data()
                .iter()
                .map(|z| z.re.max(0.0).sqrt())
                .fold(0.0, f64::max);
            rep.hat_f_bound = ex_sup + traj.mu.abs() * (r as f64).sqrt();
        }
        let xi = spec.connection_difference(h)?;
        let mut grad2 = 0.0;
        for j in 0..n {
            let dbar = spec.dbar_endo(&k, j)?;
            let del = spec.d0_endo(&k, j)?.try_add(&xi[j].commutator(&k)?)?;
            grad2 += w1 * geometry::integrate(&h_norm_density(&dbar, h)?).re;
            grad2 += w1 * geometry::integrate(&h_norm_density(&del, h)?).re;
        }
        rep.t.push(snap.t);
        rep.curvature_l2.push(f2.max(0.0).sqrt());
        rep.hat_f_sup.push(k_sup);
        rep.grad_hat_f_l2.push(grad2.max(0.0).sqrt());
        if k_sup > rep.hat_f_bound * (1.0 + 1e-6) + 1e-9 {
            rep.bound_respected = false;
        }
    }
    let res = &traj.diagnostics.residual;
    for i in 1..res.len() {
        if res[i] * res[i] - res[i - 1] * res[i - 1] > 1e-8 {
            rep.dissipation_violations.push(i);
        }
    }
    Ok(rep)
}

/// A connected set of grid cells where the local curvature energy exceeds
/// the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub cells: Vec<usize>,
    pub peak_energy: f64,
    pub peak_cell: usize,
}

/// Detects curvature concentration from a pointwise energy density:
/// thresholds `∫_{B(x,ρ)} e dV` at `eps_loc` and returns the connected
/// components (periodic nearest-neighbor adjacency). Empty for `n = 1`.
pub fn concentration_from_density(
    density: &ScalarField,
    radius: f64,
    eps_loc: f64,
) -> Result<Vec<Region>> {
    let g = *density.geometry();
    if g.n() == 1 {
        return Ok(vec![]);
    }
    let ball = (0..g.npoints())
        .map(|p| {
            let inside = geometry::torus_distance(&g, p) <= radius;
            C64::new(if inside { 1.0 } else { 0.0 }, 0.0)
        })
        .collect();
    let ball = ScalarField::from_vec(&g, ball)?;
    let local = geometry::convolve(density, &ball)?;
    let hot: Vec<bool> = local.data().iter().map(|z| z.re > eps_loc).collect();
    let mut seen = vec![false; g.npoints()];
    let mut regions = vec![];
    let n = g.grid();
    for start in 0..g.npoints() {
        if !hot[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut cells = vec![];
        while let Some(p) = stack.pop() {
            cells.push(p);
            for a in 0..g.axes() {
                let stride = g.stride(a);
                let i = g.axis_index(p, a);
                for j in [(i + 1) % n, (i + n - 1) % n] {
                    let q = p - i * stride + j * stride;
                    if hot[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        cells.sort_unstable();
        let (peak_cell, peak_energy) = cells
            .iter()
            .map(|&c| (c, local.data()[c].re))
            .fold((cells[0], f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        regions.push(Region {
            cells,
            peak_energy,
            peak_cell,
        });
    }
    Ok(regions)
}

/// Curvature concentration on the final snapshot of a trajectory.
pub fn concentration_detect(
    spec: &BundleSpec,
    traj: &FlowTrajectory,
    radius: f64,
    eps_loc: f64,
) -> Result<Vec<Region>> {
    let g = spec.geometry();
    if g.n() == 1 {
        return Ok(vec![]);
    }
    let h = &traj.last().h;
    let f = spec.curvature(h)?;
    let w = (2.0 / g.vol_scale()).powi(2);
    let mut dens = ScalarField::zeros(g);
    for c in &f.components {
        dens = dens.try_add(&h_norm_density(c, h)?.scale(C64::new(w, 0.0)))?;
    }
    concentration_from_density(&dens, radius, eps_loc)
}

/// Cells covered by any region.
pub fn region_mask(npoints: usize, regions: &[Region]) -> Vec<bool> {
    let mut mask = vec![false; npoints];
    for r in regions {
        for &c in &r.cells {
            mask[c] = true;
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusGeometry;
    use crate::presets;
    use std::f64::consts::PI;

    #[test]
    fn hermitian_einstein_is_a_fixed_point() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = BundleSpec::direct_sum(&g, &[1, 1]).unwrap();
        let flow = DonaldsonFlow::new(&spec, None);
        let s = flow.state(0.0, MetricField::identity(&spec)).unwrap();
        let (s2, _) = flow.step(&s, 0.01, 20).unwrap();
        assert!(s2.h.h.try_sub(&s.h.h).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn split_diagonal_ode() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = BundleSpec::direct_sum(&g, &[1, -1]).unwrap();
        let flow = DonaldsonFlow::new(&spec, None);
        let mut s = flow.state(0.0, MetricField::identity(&spec)).unwrap();
        for _ in 0..100 {
            s = flow.step(&s, 0.01, 20).unwrap().0;
        }
        let m = s.h.h.at(7);
        assert!((m[0].re / (-2.0f64).exp() - 1.0).abs() < 1e-7);
        assert!((m[3].re / 2.0f64.exp() - 1.0).abs() < 1e-7);
        assert!(m[1].norm() < 1e-14);
    }

    #[test]
    fn line_bundle_mode_decays_at_heat_rate() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = BundleSpec::direct_sum(&g, &[0]).unwrap();
        let flow = DonaldsonFlow::new(&spec, None);
        let amp = 1e-3;
        let u = ScalarField::fourier_mode(&g, &[1, 0]).map(|z| C64::new(amp * z.re, 0.0));
        let h = TwistedField::identity(&g, &[0]).mul_scalar(&u.map(|z| z.exp())).unwrap();
        let mut s = flow.state(0.0, MetricField::new(h).unwrap()).unwrap();
        let dt = 0.005;
        for _ in 0..200 {
            s = flow.step(&s, dt, 20).unwrap().0;
        }
        let rate = 2.0 * PI; // 2 · |k|²/(2s) with |k|² = 2π
        let expect = amp * (-rate * s.t).exp();
        let got = s.h.h.at(0)[0].re.ln();
        assert!(((got - expect) / expect).abs() < 1e-4, "{got} vs {expect}");
    }

    #[test]
    fn concentration_bump_is_found() {
        let g = TorusGeometry::standard(2, 16).unwrap();
        let target = 3 * g.stride(0) + 5 * g.stride(1) + 7 * g.stride(2) + 2 * g.stride(3);
        let dens = ScalarField::from_vec(
            &g,
            (0..g.npoints())
                .map(|p| if p == target { C64::new(50.0 / g.cell_volume(), 0.0) } else { C64::new(0.0, 0.0) })
                .collect(),
        )
        .unwrap();
        let regions = concentration_from_density(&dens, 0.3, 1.0).unwrap();
        assert_eq!(regions.len(), 1);
        assert!(regions[0].cells.contains(&target));
        let flat = ScalarField::zeros(&g);
        assert!(concentration_from_density(&flat, 0.3, 1.0).unwrap().is_empty());
    }

    #[test]
    fn flat_surface_has_no_concentration() {
        let g = TorusGeometry::standard(2, 16).unwrap();
        let spec = BundleSpec::direct_sum(&g, &[0]).unwrap();
        let flow = DonaldsonFlow::new(&spec, None);
        let traj = flow.run(&FlowControls::default()).unwrap();
        assert_eq!(traj.verdict, Verdict::Converged);
        assert!(concentration_detect(&spec, &traj, 0.3, 1e-6).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_controls() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = presets::build("split_1_-1", &g, None, 0, None).unwrap();
        let flow = DonaldsonFlow::new(&spec, None);
        let c = FlowControls {
            dt0: Some(-1.0),
            ..Default::default()
        };
        assert!(flow.run(&c).is_err());
    }
}
