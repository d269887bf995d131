//! Blow-up post-processing: the normalized limit `h∞`, its kernel
//! projection `π`, multiplier-sheaf membership and the destabilizing slope,
//! plus the pointwise inequalities used along the way.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleSpec, MetricField};
use crate::error::{Error, Result};
use crate::field::TwistedField;
use crate::flow::{h_norm_density, FlowTrajectory, Verdict};
use crate::geometry::{self, FormField, FormType, ScalarField, VOLUME};
use crate::linalg;

/// Thresholds for the destabilization pipeline.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DestabConfig {
    /// Last Cauchy gap below which `h'_k` counts as converged.
    pub delta_conv: f64,
    /// Eigenvalues of `h∞` below `tau` span the kernel.
    pub tau: f64,
    /// Decreasing σ values for the `I − h∞^σ` cross-check.
    pub sigma_schedule: Vec<f64>,
    pub delta_mem: f64,
    pub tol_slope: f64,
}

impl Default for DestabConfig {
    fn default() -> Self {
        Self {
            delta_conv: 1e-3,
            tau: 1e-6,
            sigma_schedule: (1..=20).map(|k| 0.5f64.powi(k)).collect(),
            delta_mem: 1e-4,
            tol_slope: 1e-3,
        }
    }
}

/// `h' = h / sup_X |h|_{H₀}`.
pub fn normalize_blowup(h: &TwistedField) -> Result<TwistedField> {
    let sup = h.sup_op_norm();
    if !(sup > 0.0) || !sup.is_finite() {
        return Err(Error::precondition(format!("cannot normalize a field with sup norm {sup:e}")));
    }
    Ok(h.scale_real(1.0 / sup))
}

/// Normalized limit of a blow-up trajectory.
#[derive(Debug, Clone)]
pub struct LimitEndo {
    pub h_inf: TwistedField,
    /// `h'_k` for every stored snapshot.
    pub normalized: Vec<TwistedField>,
    pub times: Vec<f64>,
    /// `sup |h'_{k+1} − h'_k|` over unmasked cells.
    pub gaps: Vec<f64>,
    /// `true` marks an excluded cell.
    pub mask: Vec<bool>,
}

impl LimitEndo {
    fn included(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| !m).map(|(p, _)| p)
    }
}

/// Nonincreasing over the second half of the sequence.
fn settles(xs: &[f64]) -> bool {
    let start = xs.len() / 2;
    xs[start..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
}

pub fn limit_endo(traj: &FlowTrajectory, mask: Option<&[bool]>, delta_conv: f64) -> Result<LimitEndo> {
    if traj.verdict != Verdict::BlowUp {
        return Err(Error::precondition(format!(
            "limit extraction needs a blow-up trajectory (verdict {:?})",
            traj.verdict
        )));
    }
    if traj.snapshots.len() < 3 {
        return Err(Error::precondition("limit extraction needs at least three snapshots"));
    }
    let npts = traj.last().h.h.geometry().npoints();
    let mask = match mask {
        Some(m) if m.len() != npts => {
            return Err(Error::structural(format!("mask has {} cells, grid has {npts}", m.len())))
        }
        Some(m) => m.to_vec(),
        None => vec![false; npts],
    };
    let normalized = traj
        .snapshots
        .iter()
        .map(|s| normalize_blowup(&s.h.h))
        .collect::<Result<Vec<_>>>()?;
    let r = normalized[0].rows();
    let gaps = normalized
        .windows(2)
        .map(|w| {
            let d = w[1].try_sub(&w[0])?;
            Ok((0..npts)
                .into_par_iter()
                .filter(|&p| !mask[p])
                .map(|p| linalg::op_norm(d.at(p), r))
                .reduce(|| 0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    if !settles(&gaps) || *gaps.last().unwrap() >= delta_conv {
        return Err(Error::NoLimit { gaps });
    }
    Ok(LimitEndo {
        h_inf: normalized.last().unwrap().clone(),
        times: traj.snapshots.iter().map(|s| s.t).collect(),
        normalized,
        gaps,
        mask,
    })
}

/// Spectral power `h^σ`; eigenvalues in `[−1e-9, 0)` are clamped to zero.
pub fn sigma_power(h: &TwistedField, sigma: f64) -> Result<TwistedField> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::precondition(format!("σ must lie in (0, 1], got {sigma}")));
    }
    for (p, ev) in h.eigenvalues().iter().enumerate() {
        if ev[0] < -1e-9 {
            return Err(Error::Numerical {
                point: p,
                msg: format!("negative eigenvalue {:e} in σ-power", ev[0]),
            });
        }
    }
    Ok(h.herm_apply(|l| l.max(0.0).powf(sigma)))
}

#[derive(Debug, Clone)]
pub struct ProjectionField {
    pub pi: TwistedField,
    pub rank: usize,
    pub tau: f64,
    /// Unmasked cells whose kernel count differs from `rank`.
    pub exceptional: Vec<usize>,
    /// `histogram[m]` = number of unmasked cells with `m` eigenvalues below `tau`.
    pub histogram: Vec<usize>,
    /// Largest entry gap between the extrapolated `I − h∞^σ` and `π` on
    /// cells whose spectrum avoids `[tau, 10 tau]`.
    pub sigma_agreement: f64,
    /// Unmasked cells not in the exceptional set.
    pub regular: Vec<bool>,
}

/// Minimum share of unmasked cells that must carry the modal kernel rank.
pub const PLATEAU_FRACTION: f64 = 0.5;

pub fn projection_pi(limit: &LimitEndo, schedule: &[f64], tau: f64) -> Result<ProjectionField> {
    if schedule.len() < 2 || schedule.windows(2).any(|w| !(w[1] < w[0])) || schedule[0] > 1.0 {
        return Err(Error::precondition("σ schedule must decrease from at most 1 and have two entries"));
    }
    let h = &limit.h_inf;
    let r = h.rows();
    let (s1, s0) = (schedule[schedule.len() - 1], schedule[schedule.len() - 2]);
    let npts = h.geometry().npoints();
    struct Cell {
        pi: Vec<C64>,
        count: usize,
        agreement: f64,
    }
    let cells: Vec<Cell> = (0..npts)
        .into_par_iter()
        .map(|p| {
            let (vals, vecs) = linalg::herm_eig(h.at(p), r);
            let proj: Vec<f64> = vals.iter().map(|&l| if l < tau { 1.0 } else { 0.0 }).collect();
            let pi = linalg::from_spectrum(&proj, &vecs, r);
            // 1 − λ^σ with the kernel clamped, extrapolated linearly to σ = 0
            let limit_val = |l: f64| {
                if l < tau {
                    1.0
                } else {
                    let f = |s: f64| 1.0 - l.powf(s);
                    (s0 * f(s1) - s1 * f(s0)) / (s0 - s1)
                }
            };
            let sig = linalg::from_spectrum(&vals.iter().map(|&l| limit_val(l)).collect::<Vec<_>>(), &vecs, r);
            let separated = vals.iter().all(|&l| l < tau || l > 10.0 * tau);
            let agreement = if separated {
                pi.iter().zip(&sig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            } else {
                0.0
            };
            Cell {
                pi,
                count: proj.iter().filter(|&&x| x > 0.0).count(),
                agreement,
            }
        })
        .collect();
    let mut histogram = vec![0usize; r + 1];
    for p in limit.included() {
        histogram[cells[p].count] += 1;
    }
    let included: usize = histogram.iter().sum();
    let (rank, &modal) = histogram
        .iter()
        .enumerate()
        .max_by_key(|&(m, &c)| (c, std::cmp::Reverse(m)))
        .unwrap();
    if included == 0 || (modal as f64) < PLATEAU_FRACTION * included as f64 {
        return Err(Error::NoPlateau { histogram });
    }
    let exceptional: Vec<usize> = limit.included().filter(|&p| cells[p].count != rank).collect();
    let mut regular = vec![false; npts];
    for p in limit.included() {
        regular[p] = cells[p].count == rank;
    }
    let sigma_agreement = limit
        .included()
        .filter(|&p| regular[p])
        .map(|p| cells[p].agreement)
        .fold(0.0, f64::max);
    let mut pi = h.zeros_like();
    for (p, c) in cells.iter().enumerate() {
        pi.at_mut(p).copy_from_slice(&c.pi);
    }
    Ok(ProjectionField {
        pi,
        rank,
        tau,
        exceptional,
        histogram,
        sigma_agreement,
        regular,
    })
}


/// `max |π² − π|` and `max |π† − π|` over regular cells.
pub fn projection_defects(proj: &ProjectionField) -> (f64, f64) {
    let r = proj.pi.rows();
    let mut idem: f64 = 0.0;
    let mut herm: f64 = 0.0;
    for (p, &ok) in proj.regular.iter().enumerate() {
        if !ok {
            continue;
        }
        let m = proj.pi.at(p);
        let sq = linalg::mul_sq(m, m, r);
        let adj = linalg::adjoint(m, r, r);
        for i in 0..r * r {
            idem = idem.max((sq[i] - m[i]).norm());
            herm = herm.max((adj[i] - m[i]).norm());
        }
    }
    (idem, herm)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsheafSlope {
    pub mu: f64,
    /// `∫ Tr(iF̂₀ π)`
    pub trace_term: f64,
    /// `∫ |∂₀π|²_{H₀}`, nonnegative.
    pub second_fundamental: f64,
    pub rank: usize,
    pub excluded_cells: usize,
}

/// `μ(F) = [∫ Tr(iF̂₀ π) − ∫ |∂₀π|²] / (2π k)` over the cells marked in
/// `include` (all cells when `None`).
pub fn slope_subsheaf(
    spec: &BundleSpec,
    pi: &TwistedField,
    rank: usize,
    include: Option<&[bool]>,
) -> Result<SubsheafSlope> {
    if rank == 0 {
        return Err(Error::UndefinedSlope);
    }
    let g = spec.geometry();
    let s = g.vol_scale();
    let npts = g.npoints();
    let all = vec![true; npts];
    let include = include.unwrap_or(&all);
    let weight = |f: &ScalarField| -> f64 {
        f.data()
            .iter()
            .zip(include)
            .filter(|(_, &ok)| ok)
            .map(|(z, _)| z.re)
            .sum::<f64>()
            * g.cell_volume()
    };
    let trace_term = weight(&spec.k0().try_mul(pi)?.trace()?);
    let mut sff = 0.0;
    for j in 0..g.n() {
        sff += 2.0 / s * weight(&spec.d0_endo(pi, j)?.frob2_field());
    }
    Ok(SubsheafSlope {
        mu: (trace_term - sff) / (VOLUME * rank as f64),
        trace_term,
        second_fundamental: sff,
        rank,
        excluded_cells: include.iter().filter(|&&ok| !ok).count(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Membership {
    pub by_integral: bool,
    pub by_kernel: bool,
    /// `∫ |s|²_{H₀h'_k}` per snapshot.
    pub series: Vec<f64>,
    /// `‖h∞ s‖_{L²(H₀)}`
    pub kernel_norm: f64,
}

pub fn multiplier_membership(
    spec: &BundleSpec,
    s: &TwistedField,
    limit: &LimitEndo,
    delta_mem: f64,
) -> Result<Membership> {
    let sec = FormField::new(FormType::Function, vec![s.clone()])?;
    let series = limit
        .normalized
        .iter()
        .map(|h| Ok(spec.l2_norm(&sec, &MetricField { h: h.clone() })?.powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    let hs = FormField::new(FormType::Function, vec![limit.h_inf.try_mul(s)?])?;
    let kernel_norm = spec.l2_norm(&hs, &MetricField::identity(spec))?;
    Ok(Membership {
        by_integral: settles(&series) && *series.last().unwrap() < delta_mem,
        by_kernel: kernel_norm < delta_mem,
        series,
        kernel_norm,
    })
}

/// Evidence for the destabilizing subsheaf of a blow-up run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DestabReport {
    pub destabilizing: bool,
    pub rank_e: usize,
    pub rank_f: usize,
    pub mu_e: f64,
    pub mu_f: f64,
    pub slope: SubsheafSlope,
    pub gaps: Vec<f64>,
    pub histogram: Vec<usize>,
    /// Pointwise eigenvalues of `h∞`, ascending.
    pub spectrum: Vec<Vec<f64>>,
    pub exceptional_cells: usize,
    pub masked_cells: usize,
    pub sigma_agreement: f64,
    pub idempotence_defect: f64,
    pub hermiticity_defect: f64,
    pub config: DestabConfig,
}

pub fn destabilize_verdict(
    spec: &BundleSpec,
    traj: &FlowTrajectory,
    mask: Option<&[bool]>,
    cfg: &DestabConfig,
) -> Result<(DestabReport, ProjectionField)> {
    let limit = limit_endo(traj, mask, cfg.delta_conv)?;
    let proj = projection_pi(&limit, &cfg.sigma_schedule, cfg.tau)?;
    let r = spec.rank();
    if proj.rank == 0 || proj.rank >= r {
        return Err(Error::precondition(format!(
            "kernel rank {} is not a proper subsheaf of a rank-{r} bundle",
            proj.rank
        )));
    }
    let slope = slope_subsheaf(spec, &proj.pi, proj.rank, Some(&proj.regular))?;
    let mu_e = spec.slope();
    let (idem, herm) = projection_defects(&proj);
    let report = DestabReport {
        destabilizing: slope.mu >= mu_e - cfg.tol_slope,
        rank_e: r,
        rank_f: proj.rank,
        mu_e,
        mu_f: slope.mu,
        slope,
        gaps: limit.gaps.clone(),
        histogram: proj.histogram.clone(),
        spectrum: limit.h_inf.eigenvalues(),
        exceptional_cells: proj.exceptional.len(),
        masked_cells: limit.mask.iter().filter(|&&m| m).count(),
        sigma_agreement: proj.sigma_agreement,
        idempotence_defect: idem,
        hermiticity_defect: herm,
        config: cfg.clone(),
    };
    Ok((report, proj))
}

/// Both sides of the Harnack comparison for one metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Harnack {
    /// `avg Tr h / sup Tr h`
    pub c: f64,
    /// `exp(−C)`
    pub bound: f64,
    pub sup_k0: f64,
    pub sup_kh: f64,
    pub green_min: f64,
}

impl Harnack {
    pub fn holds(&self, tol: f64) -> bool {
        self.c >= self.bound * (1.0 - tol)
    }
}

/// `Δ log Tr h ≥ −(|iF̂₀| + |iF̂_H|)` and the Green representation give
/// `sup Tr h ≤ e^C · avg Tr h` with `C = sup(|iF̂₀| + |iF̂_H|)·(−G_min)·Vol`.
pub fn harnack_check(spec: &BundleSpec, h: &MetricField) -> Result<Harnack> {
    let g = spec.geometry();
    let tr = h.h.trace()?;
    let sup_tr = tr.data().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let avg = geometry::integrate(&tr).re / g.volume();
    let ident = MetricField::identity(spec);
    let sup_norm = |f: ScalarField| f.data().iter().map(|z| z.re.max(0.0).sqrt()).fold(0.0, f64::max);
    let sup_k0 = sup_norm(h_norm_density(spec.k0(), &ident)?);
    let sup_kh = sup_norm(h_norm_density(&spec.contracted_curvature(h)?, h)?);
    let (_, green_min) = geometry::green_solve(&ScalarField::zeros(g))?;
    let c_exp = (sup_k0 + sup_kh) * (-green_min) * g.volume();
    Ok(Harnack {
        c: avg / sup_tr,
        bound: (-c_exp).exp(),
        sup_k0,
        sup_kh,
        green_min,
    })
}

/// Both sides of `|h^{−σ/2} ∂₀h^σ|² ≤ Re⟨h⁻¹∂₀h, ∂₀h^σ⟩` at one point,
/// given `A_j = ∂₀_j h`. `∂₀h^σ` follows from the divided differences of
/// `λ ↦ λ^σ` in the eigenframe of `h`.
pub fn uy_sides(h: &[C64], d: &[Vec<C64>], r: usize, sigma: f64, form_weight: f64) -> (f64, f64) {
    let (vals, v) = linalg::herm_eig(h, r);
    let vd = linalg::adjoint(&v, r, r);
    let gamma = |i: usize, j: usize| {
        let (li, lj) = (vals[i], vals[j]);
        if ((li - lj) / li.max(lj)).abs() < 1e-9 {
            sigma * (0.5 * (li + lj)).powf(sigma - 1.0)
        } else {
            (li.powf(sigma) - lj.powf(sigma)) / (li - lj)
        }
    };
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for a in d {
        let b = linalg::mul_sq(&linalg::mul_sq(&vd, a, r), &v, r);
        for i in 0..r {
            for j in 0..r {
                let gij = gamma(i, j);
                let m2 = b[i * r + j].norm_sqr();
                lhs += vals[i].powf(-sigma) * gij * gij * m2;
                rhs += gij * m2 / vals[i];
            }
        }
    }
    (form_weight * lhs, form_weight * rhs)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UyCheck {
    /// `max_x (LHS − RHS)`
    pub max_violation: f64,
    /// `max_x RHS`, the natural scale of both sides.
    pub scale: f64,
    /// `max_x |LHS − σ·RHS|`, zero for commuting families.
    pub commuting_defect: f64,
}

pub fn uy_inequality_check(spec: &BundleSpec, h: &MetricField, sigma: f64) -> Result<UyCheck> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::precondition(format!("σ must lie in (0, 1], got {sigma}")));
    }
    let g = spec.geometry();
    let r = spec.rank();
    let w = 2.0 / g.vol_scale();
    let d: Vec<TwistedField> = (0..g.n()).map(|j| spec.d0_endo(&h.h, j)).collect::<Result<_>>()?;
    let sides: Vec<(f64, f64)> = (0..g.npoints())
        .into_par_iter()
        .map(|p| {
            let dp: Vec<Vec<C64>> = d.iter().map(|f| f.at(p).to_vec()).collect();
            uy_sides(h.h.at(p), &dp, r, sigma, w)
        })
        .collect();
    Ok(UyCheck {
        max_violation: sides.iter().map(|(l, r)| l - r).fold(f64::NEG_INFINITY, f64::max),
        scale: sides.iter().map(|x| x.1).fold(0.0, f64::max),
        commuting_defect: sides.iter().map(|(l, r)| (l - sigma * r).abs()).fold(0.0, f64::max),
    })
}

/// Integration by parts behind the energy identity:
/// `∫ |h^{−1/2}∂₀h|² = ∫ ⟨iF̂_{H₀h} − iF̂_{H₀}, h⟩`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyIdentity {
    pub gradient_side: f64,
    pub curvature_side: f64,
    pub defect: f64,
}

pub fn energy_identity(spec: &BundleSpec, h: &MetricField) -> Result<EnergyIdentity> {
    let g = spec.geometry();
    let r = spec.rank();
    let w = 2.0 / g.vol_scale();
    let inv = h.h.inverse()?;
    let mut grad = 0.0;
    for j in 0..g.n() {
        let b = spec.d0_endo(&h.h, j)?;
        let dens: f64 = (0..g.npoints())
            .map(|p| {
                let bm = b.at(p);
                let t = linalg::mul_sq(&linalg::adjoint(bm, r, r), &linalg::mul_sq(inv.at(p), bm, r), r);
                linalg::trace(&t, r).re
            })
            .sum();
        grad += w * dens * g.cell_volume();
    }
    let diff = spec.contracted_curvature(h)?.try_sub(spec.k0())?;
    let curv = geometry::integrate(&diff.try_mul(&h.h)?.trace()?).re;
    Ok(EnergyIdentity {
        gradient_side: grad,
        curvature_side: curv,
        defect: (grad - curv).abs(),
    })
}

/// `s` with `π s = s`, for building kernel sections.
pub fn project_section(pi: &TwistedField, s: &TwistedField) -> Result<TwistedField> {
    pi.try_mul(s)
}

/// `(I − π) s`.
pub fn complement_section(pi: &TwistedField, s: &TwistedField) -> Result<TwistedField> {
    let ps = pi.try_mul(s)?;
    s.try_sub(&ps)
}
