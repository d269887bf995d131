//! The pointwise inequality `|h^{−σ/2}∂₀h^σ|² ≤ ⟨h⁻¹∂₀h, ∂₀h^σ⟩` on random
//! metrics, and the Harnack bound along a blow-up.
//!
//! `cargo run --release --example uy_harnack`

use donaldson_lab::destab;
use donaldson_lab::flow::{DonaldsonFlow, FlowControls};
use donaldson_lab::geometry::TorusGeometry;
use donaldson_lab::presets;

fn main() -> donaldson_lab::Result<()> {
    let g = TorusGeometry::standard(1, 16)?;
    let spec = presets::build("stable_extension_r2", &g, None, 0, None)?;
    for seed in 0..3 {
        let h = presets::random_metric(&spec, seed, 0.8)?;
        print!("field {seed}:");
        for sigma in [0.1, 0.5, 0.9, 1.0] {
            let c = destab::uy_inequality_check(&spec, &h, sigma)?;
            print!("  σ={sigma}: {:+.2e}", c.max_violation / c.scale);
        }
        println!();
    }

    let spec = presets::build("unstable_extension_r2", &g, None, 0, None)?;
    let traj = DonaldsonFlow::new(&spec, None).run(&FlowControls::default())?;
    println!("{:>8} {:>10} {:>12} {:>10}", "t", "c", "exp(-C)", "sup Tr h");
    for s in &traj.snapshots {
        let hk = destab::harnack_check(&spec, &s.h)?;
        let tr = s.h.h.trace()?;
        let sup = tr.data().iter().map(|z| z.re).fold(0.0, f64::max);
        println!("{:>8.3} {:>10.6} {:>12.4e} {:>10.3e}", s.t, hk.c, hk.bound, sup);
    }
    Ok(())
}
