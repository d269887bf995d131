//! The two branches of the flow: bounded convergence on a stable bundle and
//! blow-up on `O(1) ⊕ O(−1)`, where `h_t = diag(e^{−2t}, e^{2t})` exactly.
//!
//! `cargo run --release --example blowup_dichotomy`

use donaldson_lab::destab;
use donaldson_lab::flow::{DonaldsonFlow, FlowControls};
use donaldson_lab::geometry::TorusGeometry;
use donaldson_lab::presets;

fn main() -> donaldson_lab::Result<()> {
    let g = TorusGeometry::standard(1, 16)?;
    for name in ["stable_extension_r2", "split_1_-1"] {
        let spec = presets::build(name, &g, None, 0, None)?;
        let traj = DonaldsonFlow::new(&spec, None).run(&FlowControls::default())?;
        let d = &traj.diagnostics;
        println!(
            "{name:<20} {:?} at t = {:.3}, sup|h| = {:.3e}",
            traj.verdict,
            traj.last().t,
            d.sup_h.last().unwrap()
        );
        if name != "split_1_-1" {
            continue;
        }
        let mut worst: f64 = 0.0;
        for s in traj.snapshots.iter().filter(|s| s.t <= 5.0) {
            let m = s.h.h.at(0);
            let e = (2.0 * s.t).exp();
            worst = worst.max((m[0].re * e - 1.0).abs()).max((m[3].re / e - 1.0).abs());
        }
        println!("  relative error against diag(e^-2t, e^2t) up to t = 5: {worst:.2e}");
        let lim = destab::limit_endo(&traj, None, 1e-3)?;
        let m = lim.h_inf.at(0);
        println!("  normalized limit at a grid point: diag({:.2e}, {:.6})", m[0].re, m[3].re);
    }
    Ok(())
}
