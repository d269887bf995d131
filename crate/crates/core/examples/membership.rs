//! Sections killed by the limit endomorphism, tested two ways: the weighted
//! norms along the normalized sequence and the kernel of `h∞`.
//!
//! `cargo run --release --example membership`

use donaldson_lab::checks;
use donaldson_lab::destab::DestabConfig;
use donaldson_lab::flow::{DonaldsonFlow, FlowControls};
use donaldson_lab::geometry::TorusGeometry;
use donaldson_lab::presets;

fn main() -> donaldson_lab::Result<()> {
    let g = TorusGeometry::standard(1, 16)?;
    let spec = presets::build("unstable_extension_r2", &g, None, 0, None)?;
    let traj = DonaldsonFlow::new(&spec, None).run(&FlowControls::default())?;
    let cases = checks::membership_cases(&spec, &traj, 9, 0, &DestabConfig::default())?;
    println!("{:<11} {:>12} {:>12} {:>9} {:>9}", "section", "last norm²", "|h∞ s|", "integral", "kernel");
    for (label, m) in &cases {
        println!(
            "{label:<11} {:>12.3e} {:>12.3e} {:>9} {:>9}",
            m.series.last().unwrap(),
            m.kernel_norm,
            m.by_integral,
            m.by_kernel
        );
    }
    Ok(())
}
