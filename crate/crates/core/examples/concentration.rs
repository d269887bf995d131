//! Curvature concentration on a 2-torus: regions where the energy in a
//! small ball exceeds a threshold, and the mask they induce.
//!
//! `cargo run --release --example concentration`

use donaldson_lab::flow;
use donaldson_lab::geometry::{ScalarField, TorusGeometry};
use num_complex::Complex64 as C64;

fn main() -> donaldson_lab::Result<()> {
    let g = TorusGeometry::standard(2, 16)?;
    let centres = [[0.4, 0.4, 0.4, 0.4], [1.6, 1.2, 0.5, 1.4]];
    let density = ScalarField::from_fn(&g, |c| {
        let bump = |z: [f64; 4]| {
            let d2: f64 = (0..4).map(|a| (c[a] - z[a]).powi(2)).sum();
            200.0 * (-d2 / 0.02).exp()
        };
        C64::new(centres.iter().map(|&z| bump(z)).sum(), 0.0)
    });
    for eps in [0.01, 0.1, 1.0] {
        let regions = flow::concentration_from_density(&density, 0.3, eps)?;
        let mask = flow::region_mask(g.npoints(), &regions);
        println!(
            "eps {eps:>5}: {} regions, {} masked cells, peaks {:?}",
            regions.len(),
            mask.iter().filter(|&&m| m).count(),
            regions.iter().map(|r| format!("{:.3}", r.peak_energy)).collect::<Vec<_>>()
        );
    }
    Ok(())
}
