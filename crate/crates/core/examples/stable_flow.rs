//! Heat flow on a stable non-split extension: the residual decreases to
//! the tolerance and the metric stays bounded.
//!
//! `cargo run --release --example stable_flow`

use donaldson_lab::flow::{DonaldsonFlow, FlowControls};
use donaldson_lab::geometry::TorusGeometry;
use donaldson_lab::presets;

fn main() -> donaldson_lab::Result<()> {
    let g = TorusGeometry::standard(1, 16)?;
    let spec = presets::build("stable_extension_r2", &g, None, 0, None)?;
    println!("rank {}, degree {}, slope {}", spec.rank(), spec.degree(), spec.slope());

    let flow = DonaldsonFlow::new(&spec, None);
    let traj = flow.run(&FlowControls::default())?;
    let d = &traj.diagnostics;
    let every = (d.len() / 8).max(1);
    println!("{:>9} {:>12} {:>10} {:>12}", "t", "residual", "sup|h|", "dissipation");
    for i in (0..d.len()).step_by(every).chain([d.len() - 1]) {
        println!("{:>9.4} {:>12.4e} {:>10.6} {:>12.6}", d.t[i], d.residual[i], d.sup_h[i], d.dissipation[i]);
    }
    let increases = d.residual.windows(2).filter(|w| w[1] > w[0]).count();
    println!(
        "{:?} after {} steps, residual increased on {increases} steps",
        traj.verdict, traj.accepted_steps
    );
    Ok(())
}
