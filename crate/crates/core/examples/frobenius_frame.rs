//! Holomorphic frames for truncated-series generators, exact and float.
//!
//! `cargo run --release --example frobenius_frame`

use donaldson_lab::series::{self, families, Coeff, Exact, TruncSeries};
use num_complex::Complex64 as C64;

fn report<T: Coeff>(name: &str, f: &TruncSeries<T>, a: &[TruncSeries<T>]) -> donaldson_lab::Result<()> {
    let sol = series::holomorphic_frame(f, a)?;
    println!(
        "{name:<14} {:<5} n={} D={} max |∂̄g| = {:.1e}, identically zero: {}",
        if T::EXACT { "exact" } else { "float" },
        f.vars(),
        f.degree(),
        sol.max_residual(),
        sol.is_exact()
    );
    Ok(())
}

fn main() -> donaldson_lab::Result<()> {
    let d = 8;
    let (f, a) = families::exp_scalar::<Exact>(1, d);
    let sol = series::holomorphic_frame(&f, &a)?;
    println!("exp(z z̄): g = 1 is {}", sol.g == TruncSeries::identity(1, 1, d));
    print!("B = exp(−z z̄):");
    for k in 0..=4u32 {
        let c = sol.b_total.coeff(&[k, k])[0].clone();
        print!(" {}", c.re);
    }
    println!();

    let (f, a) = families::gauged_pair::<Exact>(d);
    report("gauged_pair", &f, &a)?;
    let (f, a) = families::holomorphic::<Exact>(6);
    report("holomorphic", &f, &a)?;
    let (f, a) = families::random_gauged::<Exact>(2, 2, 6, 3);
    report("random_gauged", &f, &a)?;

    let (f, a) = families::random_gauged::<C64>(2, 2, 6, 3);
    report("random_gauged", &f, &a)?;
    // relation matrices recovered from the generators alone
    let (f, _) = families::gauged_pair::<C64>(d);
    let a = series::relation_matrix(&f)?;
    report("derived A", &f, &a)?;
    Ok(())
}
