//! Poisson solve on the flat torus and the Green's kernel minimum.
//!
//! `cargo run --release --example torus_green`

use donaldson_lab::geometry::{self, ScalarField, TorusGeometry};
use num_complex::Complex64 as C64;

fn main() -> donaldson_lab::Result<()> {
    for grid in [16, 32, 64] {
        let g = TorusGeometry::standard(1, grid)?;
        // Δu = f for a single Fourier mode: u = f / symbol
        let f = ScalarField::fourier_mode(&g, &[1, 2]);
        let (u, gmin) = geometry::green_solve(&f)?;
        let back = geometry::laplacian(&u);
        let err = back.try_sub(&f)?.sup_abs();
        println!("grid {grid:>3}: |Δu − f| = {err:.2e}, min G = {gmin:.6}, volume = {:.6}", g.volume());
    }

    let g = TorusGeometry::new(2, &[2.0, 3.0], 16)?;
    let bump = ScalarField::from_fn(&g, |c| C64::new((c[0].sin() * c[3].cos()).exp(), 0.0));
    let mean = geometry::integrate(&bump) / g.volume();
    let src = bump.map(|z| z - mean);
    let (_, gmin) = geometry::green_solve(&src)?;
    println!("n = 2, periods (2, 3): min G = {gmin:.6}, metric scale s = {:.6}", g.vol_scale());
    Ok(())
}
