//! Worked Frobenius problems with known answers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Coeff, TruncSeries};

type Problem<T> = (TruncSeries<T>, Vec<TruncSeries<T>>);

fn entry<T: Coeff>(shape: (usize, usize), at: usize, s: &TruncSeries<T>) -> TruncSeries<T> {
    let mut m = vec![T::zero(); shape.0 * shape.1];
    m[at] = T::one();
    s.times_matrix(&m, shape).expect("scalar series")
}

/// `f = exp(Σ z_j z̄_j)` with `A_j = z_j`; the frame is `g = 1`.
pub fn exp_scalar<T: Coeff>(n: usize, d: u32) -> Problem<T> {
    let mut s = TruncSeries::zero(n, (1, 1), d);
    for j in 0..n {
        s.insert(TruncSeries::<T>::md(n, j, 1, 1), vec![T::one()]);
    }
    let f = s.exp().expect("no constant term");
    let a = (0..n)
        .map(|j| TruncSeries::monomial(n, d, &TruncSeries::<T>::md(n, j, 1, 0), T::one()))
        .collect();
    (f, a)
}

/// Two holomorphic generators in two variables, all `A_k = 0`.
pub fn holomorphic<T: Coeff>(d: u32) -> Problem<T> {
    let n = 2;
    let mono = |md: [u32; 4], c: i64| TruncSeries::monomial(n, d, &md, T::from_ratio(c, 1));
    let mut f = TruncSeries::identity(n, 2, d);
    let terms = [
        (0, mono([1, 0, 0, 0], 1)),
        (1, mono([0, 0, 1, 0], 1)),
        (2, mono([1, 0, 1, 0], 1)),
        (3, mono([0, 0, 2, 0], 1)),
    ];
    for (at, s) in terms {
        f = f.try_add(&entry((2, 2), at, &s)).unwrap();
    }
    (f, vec![TruncSeries::zero(n, (2, 2), d); n])
}

/// Holomorphic `f_h = [[1, z], [z², 1 + z]]` in one variable.
pub fn gauged_pair_holomorphic<T: Coeff>(d: u32) -> TruncSeries<T> {
    let n = 1;
    let mono = |a: u32, c: i64| TruncSeries::monomial(n, d, &[a, 0], T::from_ratio(c, 1));
    let mut f = TruncSeries::identity(n, 2, d);
    for (at, s) in [(1, mono(1, 1)), (2, mono(2, 1)), (3, mono(1, 1))] {
        f = f.try_add(&entry((2, 2), at, &s)).unwrap();
    }
    f
}

/// `f = (I + z̄ E₁₂) f_h` with the constant relation matrix `A = E₁₂`.
pub fn gauged_pair<T: Coeff>(d: u32) -> Problem<T> {
    let n = 1;
    let zb = TruncSeries::monomial(n, d, &[0, 1], T::one());
    let gauge = TruncSeries::identity(n, 2, d)
        .try_add(&entry((2, 2), 1, &zb))
        .unwrap();
    let f = gauge.try_mul(&gauged_pair_holomorphic(d)).unwrap();
    let a = entry((2, 2), 1, &TruncSeries::identity(n, 1, d));
    (f, vec![a])
}

/// `f = G f_h` for a seeded real-analytic gauge `G = I + …` and holomorphic
/// `f_h = I + …`; `A_k = (∂̄_k G) G⁻¹`.
pub fn random_gauged<T: Coeff>(n: usize, q: usize, d: u32, seed: u64) -> Problem<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef = |rng: &mut ChaCha8Rng| T::from_ratio(rng.gen_range(-4..=4), rng.gen_range(1..=4));
    let mut g = TruncSeries::identity(n, q, d);
    let mut fh = TruncSeries::identity(n, q, d);
    for _ in 0..4 * n {
        let md: Vec<u32> = (0..2 * n).map(|_| rng.gen_range(0..2)).collect();
        if md.iter().all(|&e| e == 0) {
            continue;
        }
        g.insert(md, (0..q * q).map(|_| coef(&mut rng)).collect());
        let mut hol = vec![0; 2 * n];
        hol[2 * rng.gen_range(0..n)] = rng.gen_range(1..3);
        fh.insert(hol, (0..q * q).map(|_| coef(&mut rng)).collect());
    }
    let ginv = g.inverse().expect("unipotent gauge");
    let f = g.try_mul(&fh).unwrap();
    let a = (0..n)
        .map(|k| g.dbar(k).try_mul(&ginv).unwrap())
        .collect();
    (f, a)
}
