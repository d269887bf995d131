use serde::Serialize;

use super::{Coeff, TruncSeries};
use crate::error::{Error, Result};

/// Gate for "zero" in float mode.
pub const FLOAT_GATE: f64 = 1e-12;

fn residual_ok<T: Coeff>(r: &TruncSeries<T>) -> bool {
    if T::EXACT {
        r.is_zero()
    } else {
        r.max_abs() < FLOAT_GATE
    }
}

/// Solves `∂̄_j B + B A = 0` with `B = I + F`, `F(0) = 0`, by the graded
/// iteration `F ← −P_j((I + F) A)`. Variables are 0-based and `A` must be
/// holomorphic in `z₀ … z_{p−1}`.
pub fn solve_gauge_step<T: Coeff>(
    a: &TruncSeries<T>,
    j: usize,
    p: usize,
) -> Result<(TruncSeries<T>, TruncSeries<T>)> {
    let (q, c) = a.shape();
    if q != c {
        return Err(Error::structural(format!("relation matrix must be square, got {q}×{c}")));
    }
    if !a.is_holomorphic_in(p) {
        return Err(Error::precondition(format!(
            "relation matrix for variable {} is not holomorphic in the first {p} variables",
            j + 1
        )));
    }
    let n = a.vars();
    let d = a.degree();
    let id = TruncSeries::identity(n, q, d);
    let mut f = TruncSeries::zero(n, (q, q), d);
    for _ in 0..=d + 1 {
        let next = id.try_add(&f)?.try_mul(a)?.zbar_antiderivative(j).neg();
        if next == f {
            break;
        }
        f = next;
    }
    let b = id.try_add(&f)?;
    let res = b.dbar(j).try_add(&b.try_mul(a)?.truncate(d - 1))?;
    if !residual_ok(&res) {
        return Err(Error::SeriesStage {
            stage: format!("gauge step in variable {}", j + 1),
            residual: res.max_abs(),
        });
    }
    Ok((b, f))
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    /// 1-based variable made holomorphic at this stage.
    pub variable: usize,
    /// `max |∂̄_k g|` over `k ≤ variable` after the stage.
    pub residual: f64,
    pub exact_zero: bool,
}

#[derive(Debug, Clone)]
pub struct FrameSolution<T: Coeff> {
    pub g: TruncSeries<T>,
    pub b_total: TruncSeries<T>,
    /// `∂̄_k g` for each variable, modulo degree `D − 1`.
    pub dbar_g: Vec<TruncSeries<T>>,
    pub stages: Vec<StageReport>,
}

impl<T: Coeff> FrameSolution<T> {
    pub fn max_residual(&self) -> f64 {
        self.dbar_g.iter().map(|r| r.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_exact(&self) -> bool {
        self.dbar_g.iter().all(|r| r.is_zero())
    }
}

/// Induction on the number of holomorphic variables: at stage `p` the
/// relation matrix of `z_{p+1}` is restricted to `z̄₁ = … = z̄_p = 0`, gauged
/// away, and the remaining relation matrices are transported by
/// `A_k ↦ (∂̄_k B + B A_k) B⁻¹`.
pub fn holomorphic_frame<T: Coeff>(f: &TruncSeries<T>, a: &[TruncSeries<T>]) -> Result<FrameSolution<T>> {
    let n = f.vars();
    let d = f.degree();
    let q = f.shape().0;
    if a.len() != n {
        return Err(Error::structural(format!("{} relation matrices for {n} variables", a.len())));
    }
    for (k, ak) in a.iter().enumerate() {
        if ak.shape() != (q, q) || ak.vars() != n {
            return Err(Error::structural(format!(
                "relation matrix {} has shape {:?}, expected {q}×{q}",
                k + 1,
                ak.shape()
            )));
        }
        let res = f.dbar(k).try_sub(&ak.try_mul(f)?.truncate(d - 1))?;
        if !residual_ok(&res) {
            return Err(Error::SeriesStage {
                stage: format!("input relation for variable {}", k + 1),
                residual: res.max_abs(),
            });
        }
    }
    let mut g = f.clone();
    // relations hold modulo degree D − 1, so A_k is carried at degree D
    let mut rel: Vec<TruncSeries<T>> = a.iter().map(|x| x.with_degree(d)).collect();
    let mut b_total = TruncSeries::identity(n, q, d);
    let mut stages = Vec::with_capacity(n);
    for p in 0..n {
        let ap = rel[p].restrict_antihol(p);
        let (b, _) = solve_gauge_step(&ap, p, p)?;
        let binv = b.inverse()?;
        for (k, ak) in rel.iter_mut().enumerate().skip(p + 1) {
            *ak = b
                .dbar(k)
                .try_add(&b.try_mul(ak)?.truncate(d - 1))?
                .try_mul(&binv)?
                .with_degree(d);
        }
        g = b.try_mul(&g)?;
        b_total = b.try_mul(&b_total)?;
        let worst = (0..=p).map(|k| g.dbar(k)).collect::<Vec<_>>();
        let ok = worst.iter().all(residual_ok);
        let residual = worst.iter().map(|r| r.max_abs()).fold(0.0, f64::max);
        if !ok {
            return Err(Error::SeriesStage {
                stage: format!("holomorphy in variables 1..={}", p + 1),
                residual,
            });
        }
        stages.push(StageReport {
            variable: p + 1,
            residual,
            exact_zero: worst.iter().all(|r| r.is_zero()),
        });
    }
    let dbar_g = (0..n).map(|k| g.dbar(k)).collect();
    Ok(FrameSolution {
        g,
        b_total,
        dbar_g,
        stages,
    })
}

/// `A_k = (∂̄_k f) f⁺` with the right inverse `f⁺ = f†(f f†)⁻¹`.
pub fn relation_matrix<T: Coeff>(f: &TruncSeries<T>) -> Result<Vec<TruncSeries<T>>> {
    let (q, r) = f.shape();
    let d = f.degree();
    let fadj = f.adjoint();
    let gram = f.try_mul(&fadj)?;
    let ginv = if q <= r {
        gram.inverse().ok()
    } else {
        None
    };
    let ginv = ginv.ok_or_else(|| {
        Error::precondition(format!(
            "f(0) has no right inverse ({q} generators in rank {r}); supply the relation matrices A_k explicitly"
        ))
    })?;
    let pinv = fadj.try_mul(&ginv)?;
    (0..f.vars())
        .map(|k| {
            let ak = f.dbar(k).try_mul(&pinv)?;
            let res = f.dbar(k).try_sub(&ak.try_mul(f)?.truncate(d - 1))?;
            if !residual_ok(&res) {
                return Err(Error::SeriesStage {
                    stage: format!("relation matrix for variable {}", k + 1),
                    residual: res.max_abs(),
                });
            }
            Ok(ak)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::families;
    use crate::series::Exact;
    use num_complex::Complex64 as C64;

    type S = TruncSeries<Exact>;

    fn q(a: i64, b: i64) -> Exact {
        Exact::from_ratio(a, b)
    }

    #[test]
    fn zero_relation_gives_identity() {
        let a = S::zero(2, (3, 3), 6);
        let (b, f) = solve_gauge_step(&a, 0, 0).unwrap();
        assert!(f.is_zero());
        assert_eq!(b, S::identity(2, 3, 6));
    }

    #[test]
    fn scalar_exponential_gauge() {
        let d = 8;
        let (f, a) = families::exp_scalar::<Exact>(1, d);
        assert_eq!(a[0], S::monomial(1, d, &[1, 0], q(1, 1)));
        let (b, _) = solve_gauge_step(&a[0], 0, 0).unwrap();
        let expect = S::monomial(1, d, &[1, 1], q(-1, 1)).exp().unwrap();
        assert_eq!(b, expect);
        assert_eq!(b.try_mul(&f).unwrap(), S::identity(1, 1, d));
        // a few explicit coefficients of exp(−z z̄)
        assert_eq!(b.coeff(&[2, 2])[0], q(1, 2));
        assert_eq!(b.coeff(&[3, 3])[0], q(-1, 6));
        assert_eq!(b.coeff(&[4, 4])[0], q(1, 24));
    }

    #[test]
    fn nonholomorphic_relation_is_rejected() {
        let a = S::monomial(2, 4, &[0, 1, 0, 0], q(1, 1));
        assert!(matches!(solve_gauge_step(&a, 1, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn random_relation_residual_is_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..3 {
            let mut a = S::zero(2, (2, 2), 5);
            for _ in 0..6 {
                let md: Vec<u32> = (0..4).map(|_| rng.gen_range(0..2)).collect();
                let m = (0..4).map(|_| q(rng.gen_range(-3..=3), rng.gen_range(1..=4))).collect();
                a.insert(md, m);
            }
            let (b, f) = solve_gauge_step(&a, 1, 0).unwrap();
            assert!(b.dbar(1).try_add(&b.try_mul(&a).unwrap().truncate(4)).unwrap().is_zero());
            assert!(f.coeff(&[0, 0, 0, 0]).iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn holomorphic_input_is_fixed() {
        let (f, a) = families::holomorphic::<Exact>(6);
        let sol = holomorphic_frame(&f, &a).unwrap();
        assert_eq!(sol.g, f);
        assert_eq!(sol.b_total, S::identity(f.vars(), f.shape().0, 6));
    }

    #[test]
    fn gauged_pair_round_trip() {
        let d = 7;
        let (f, a) = families::gauged_pair::<Exact>(d);
        let sol = holomorphic_frame(&f, &a).unwrap();
        assert!(sol.is_exact());
        assert_eq!(sol.b_total.try_mul(&f).unwrap(), sol.g);
        assert!(sol.b_total.inverse().is_ok());
        // the holomorphic generators are recovered exactly
        assert_eq!(sol.g, families::gauged_pair_holomorphic::<Exact>(d));
        let derived = relation_matrix(&f).unwrap();
        assert_eq!(derived[0], a[0].truncate(d - 1));
    }

    #[test]
    fn two_variable_exponential() {
        let d = 6;
        let (f, a) = families::exp_scalar::<Exact>(2, d);
        let sol = holomorphic_frame(&f, &a).unwrap();
        assert_eq!(sol.g, S::identity(2, 1, d));
        assert!(sol.stages.iter().all(|s| s.exact_zero));
    }

    #[test]
    fn float_mode_meets_gate() {
        let (f, a) = families::exp_scalar::<C64>(2, 6);
        let sol = holomorphic_frame(&f, &a).unwrap();
        assert!(sol.max_residual() < FLOAT_GATE);
    }

    #[test]
    fn relation_matrix_examples() {
        let (f, _) = families::holomorphic::<Exact>(5);
        assert!(relation_matrix(&f).unwrap().iter().all(|a| a.is_zero()));
        let (f, _) = families::exp_scalar::<Exact>(1, 8);
        let a = relation_matrix(&f).unwrap();
        assert_eq!(a[0], S::monomial(1, 7, &[1, 0], q(1, 1)));
        // rank-deficient constant term
        let mut bad = S::zero(1, (2, 2), 4);
        bad.insert(vec![1, 0], vec![q(1, 1), q(0, 1), q(0, 1), q(1, 1)]);
        assert!(matches!(relation_matrix(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn random_gauge_round_trip() {
        let d = 5;
        for seed in 0..3 {
            let (f, a) = families::random_gauged::<Exact>(2, 2, d, seed);
            let derived = relation_matrix(&f).unwrap();
            for (x, y) in derived.iter().zip(&a) {
                assert_eq!(x.truncate(d - 1), y.truncate(d - 1));
            }
            let sol = holomorphic_frame(&f, &a).unwrap();
            assert!(sol.is_exact());
        }
    }
}
