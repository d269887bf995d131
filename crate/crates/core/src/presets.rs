//! Named bundle presets and seeded random twisted fields.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::{Block, BundleSpec, MetricField};
use crate::error::{Error, Result};
use crate::field::TwistedField;
use crate::geometry::{ScalarField, TorusGeometry};
use crate::linalg::ZERO;

pub const PRESETS: &[&str] = &[
    "split_1_-1",
    "split_2_0",
    "stable_extension_r2",
    "unstable_extension_r2",
    "line_random",
    "direct_sum",
    "extension",
    "random_smooth",
];

/// Named preset. `degrees` is required by the generic kinds
/// (`direct_sum`, `extension`, `random_smooth`) and must match the fixed
/// ones when given for a named bundle.
pub fn build(
    name: &str,
    geom: &TorusGeometry,
    degrees: Option<&[i64]>,
    seed: u64,
    amplitude: Option<f64>,
) -> Result<BundleSpec> {
    let fixed = |d: &[i64]| -> Result<Vec<i64>> {
        match degrees {
            Some(given) if given != d => Err(Error::Scenario {
                key: "bundle.degrees".into(),
                msg: format!("preset {name} has degrees {d:?}, scenario gives {given:?}"),
            }),
            _ => Ok(d.to_vec()),
        }
    };
    let needed = || -> Result<Vec<i64>> {
        degrees.map(<[i64]>::to_vec).ok_or_else(|| Error::Scenario {
            key: "bundle.degrees".into(),
            msg: format!("preset {name} needs explicit degrees"),
        })
    };
    match name {
        "split_1_-1" => BundleSpec::direct_sum(geom, &fixed(&[1, -1])?),
        "split_2_0" => BundleSpec::direct_sum(geom, &fixed(&[2, 0])?),
        "stable_extension_r2" => {
            fixed(&[0, 1])?;
            extension(geom, &[0, 1], seed, amplitude.unwrap_or(0.1))
        }
        "unstable_extension_r2" => {
            fixed(&[1, -1])?;
            extension(geom, &[1, -1], seed, amplitude.unwrap_or(0.3))
        }
        "line_random" => random_bundle(geom, &fixed(&[0])?, seed, amplitude.unwrap_or(0.3)),
        "direct_sum" => BundleSpec::direct_sum(geom, &needed()?),
        "extension" => {
            let d = needed()?;
            if d.len() != 2 {
                return Err(Error::Scenario {
                    key: "bundle.degrees".into(),
                    msg: "extension needs exactly two degrees".into(),
                });
            }
            extension(geom, &d, seed, amplitude.unwrap_or(0.1))
        }
        "random_smooth" => random_bundle(geom, &needed()?, seed, amplitude.unwrap_or(0.3)),
        other => Err(Error::Unknown {
            kind: "preset",
            name: other.into(),
            available: PRESETS.join(", "),
        }),
    }
}

/// Random trigonometric polynomial in `x1` times a Gaussian in `y1`,
/// periodized into a section of charge `q`. With `all_factors` the result
/// is also modulated by a random periodic function of the second factor.
pub fn random_twisted(
    geom: &TorusGeometry,
    q: i64,
    rng: &mut impl Rng,
    amplitude: f64,
    all_factors: bool,
) -> ScalarField {
    let l = geom.period(0);
    let coeffs: Vec<C64> = (0..5)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let y0 = rng.gen_range(0.0..l);
    let width = l / 4.0;
    let second: Vec<(i64, i64, C64)> = if all_factors && geom.n() == 2 {
        (0..3)
            .map(|_| {
                (
                    rng.gen_range(-2..=2),
                    rng.gen_range(-2..=2),
                    C64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                )
            })
            .collect()
    } else {
        vec![]
    };
    let l2 = geom.period(1);
    ScalarField::from_fn(geom, |c| {
        let (x, y) = (c[0], c[1]);
        let trig = |x: f64| -> C64 {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &a)| a * C64::from_polar(1.0, 2.0 * PI * (k as f64 - 2.0) * x / l))
                .sum()
        };
        let mut acc = ZERO;
        for m in -4i64..=4 {
            let yy = y + m as f64 * l - y0;
            let env = (-0.5 * yy * yy / (width * width)).exp();
            acc += trig(x) * env * C64::from_polar(1.0, 2.0 * PI * (q * m) as f64 * x / l);
        }
        let mut modulation = C64::new(1.0, 0.0);
        for &(kx, ky, a) in &second {
            modulation += a * C64::from_polar(1.0, 2.0 * PI * (kx as f64 * c[2] + ky as f64 * c[3]) / l2);
        }
        acc * modulation * amplitude
    })
}

/// Antiholomorphic-harmonic representative of `H¹` of the charge `q < 0`
/// line bundle: `Σ_m exp(−κ(y1 + mL)²/2) exp(2πi q m x1/L)`, which is
/// annihilated by `D`.
pub fn harmonic_class(geom: &TorusGeometry, q: i64) -> Result<ScalarField> {
    if q != -1 {
        return Err(Error::precondition(format!(
            "harmonic representative is implemented for charge −1 (got {q})"
        )));
    }
    let l = geom.period(0);
    let kappa = geom.flux_kappa();
    Ok(ScalarField::from_fn(geom, |c| {
        let (x, y) = (c[0], c[1]);
        let mut acc = ZERO;
        for m in -6i64..=6 {
            let yy = y + m as f64 * l;
            acc += C64::from_polar((-0.5 * kappa * yy * yy).exp(), 2.0 * PI * (q * m) as f64 * x / l);
        }
        acc
    }))
}

/// Rank-2 extension `0 → L_{d0} → E → L_{d1} → 0` with the class in the
/// `(0,1)` block. When `d0 − d1 = −1` the block carries the harmonic class
/// scaled so that `h = I` nearly balances the slopes, plus a seeded
/// perturbation of size `amplitude`; otherwise only the perturbation.
pub fn extension(geom: &TorusGeometry, degrees: &[i64], seed: u64, amplitude: f64) -> Result<BundleSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = degrees[0] - degrees[1];
    let mut entry = random_twisted(geom, q, &mut rng, amplitude, false);
    if q == -1 {
        let u = harmonic_class(geom, q)?;
        let mean_sq = u.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / geom.npoints() as f64;
        // (2/s) ε² ⟨|u|²⟩ = (d1 − d0)/2 · degree_scale
        let target = 0.5 * geom.degree_scale();
        let eps = (target * geom.vol_scale() / (2.0 * mean_sq)).sqrt();
        entry = entry.try_add(&u.scale(C64::new(eps, 0.0)))?;
    }
    let mut a = vec![TwistedField::with_entry(geom, degrees, degrees, 0, 1, &entry)];
    for _ in 1..geom.n() {
        a.push(TwistedField::zeros(geom, degrees, degrees));
    }
    let blocks: Vec<Block> = degrees.iter().map(|&d| Block { rank: 1, degree: d }).collect();
    BundleSpec::new(geom, &blocks, a)
}

/// Random smooth `a` in every block (rank-1 blocks).
pub fn random_bundle(geom: &TorusGeometry, degrees: &[i64], seed: u64, amplitude: f64) -> Result<BundleSpec> {
    let blocks: Vec<Block> = degrees.iter().map(|&d| Block { rank: 1, degree: d }).collect();
    random_bundle_blocks(geom, &blocks, seed, amplitude)
}

/// Random smooth `a`. For `n = 2` only `a_1` is nonzero and it depends on
/// the first factor alone, which keeps `a` integrable.
pub fn random_bundle_blocks(
    geom: &TorusGeometry,
    blocks: &[Block],
    seed: u64,
    amplitude: f64,
) -> Result<BundleSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let charges: Vec<i64> = blocks
        .iter()
        .flat_map(|b| std::iter::repeat(b.degree).take(b.rank))
        .collect();
    let r = charges.len();
    let mut a1 = TwistedField::zeros(geom, &charges, &charges);
    for i in 0..r {
        for j in 0..r {
            let e = random_twisted(geom, charges[i] - charges[j], &mut rng, amplitude, false);
            a1 = a1.try_add(&TwistedField::with_entry(geom, &charges, &charges, i, j, &e))?;
        }
    }
    let mut a = vec![a1];
    for _ in 1..geom.n() {
        a.push(TwistedField::zeros(geom, &charges, &charges));
    }
    BundleSpec::new(geom, blocks, a)
}

/// Random Hermitian endomorphism field compatible with the bundle's twist.
pub fn random_hermitian(spec: &BundleSpec, seed: u64, amplitude: f64) -> TwistedField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = spec.geometry();
    let c = spec.charges();
    let r = c.len();
    let mut x = spec.zero_endo();
    for i in 0..r {
        for j in i..r {
            let e = random_twisted(geom, c[i] - c[j], &mut rng, amplitude, true);
            let e = if i == j { ScalarField::from_vec(geom, e.data().iter().map(|z| C64::new(z.re, 0.0)).collect()).unwrap() } else { e };
            let f = TwistedField::with_entry(geom, c, c, i, j, &e);
            x = x.try_add(&f).unwrap();
            if i != j {
                x = x.try_add(&f.adjoint()).unwrap();
            }
        }
    }
    x
}

/// `h = exp(X)` for a random Hermitian `X`.
pub fn random_metric(spec: &BundleSpec, seed: u64, amplitude: f64) -> Result<MetricField> {
    let mut h = random_hermitian(spec, seed, amplitude).herm_apply(f64::exp);
    h.hermitize();
    MetricField::new(h)
}

/// Random smooth section of the bundle.
pub fn random_section(spec: &BundleSpec, seed: u64, amplitude: f64) -> TwistedField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = spec.geometry();
    let c = spec.charges();
    let mut s = spec.zero_section();
    for (i, &q) in c.iter().enumerate() {
        let e = random_twisted(geom, q, &mut rng, amplitude, true);
        s = s.try_add(&TwistedField::with_entry(geom, c, &[0], i, 0, &e)).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_class_is_holomorphically_coclosed() {
        let g = TorusGeometry::standard(1, 64).unwrap();
        let u = harmonic_class(&g, -1).unwrap();
        let f = TwistedField::with_entry(&g, &[-1], &[0], 0, 0, &u);
        let du = f.dz(0).max_abs();
        assert!(du < 1e-5, "D u = {du}");
        assert!(f.dzbar(0).max_abs() > 0.1);
    }

    #[test]
    fn random_twisted_fields_obey_their_twist() {
        let g = TorusGeometry::standard(1, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_twisted(&g, 2, &mut rng, 1.0, false);
        let f = TwistedField::with_entry(&g, &[2], &[0], 0, 0, &u);
        // smoothness across the seam shows up as a small FD derivative error
        let d = f.d_axis(1);
        let d_fine = {
            let g2 = TorusGeometry::standard(1, 64).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let u2 = random_twisted(&g2, 2, &mut rng, 1.0, false);
            TwistedField::with_entry(&g2, &[2], &[0], 0, 0, &u2).d_axis(1)
        };
        // sample the common points
        let mut worst: f64 = 0.0;
        for iy in 0..32 {
            for ix in 0..32 {
                let a = d.at(ix * 32 + iy)[0];
                let b = d_fine.at(2 * ix * 64 + 2 * iy)[0];
                worst = worst.max((a - b).norm());
            }
        }
        assert!(worst < 1e-2 * d.max_abs(), "{worst}");
    }

    #[test]
    fn unknown_preset_lists_available() {
        let g = TorusGeometry::standard(1, 16).unwrap();
        match build("nope", &g, None, 0, None) {
            Err(Error::Unknown { available, .. }) => assert!(available.contains("split_1_-1")),
            other => panic!("{other:?}"),
        }
        assert!(build("split_1_-1", &g, Some(&[2, 0]), 0, None).is_err());
        assert!(build("direct_sum", &g, None, 0, None).is_err());
    }
}
