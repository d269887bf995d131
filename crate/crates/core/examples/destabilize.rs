//! From a blow-up run to the destabilizing subsheaf: normalized limit,
//! kernel projection, slope of the subsheaf.
//!
//! `cargo run --release --example destabilize`

use donaldson_lab::destab::{self, DestabConfig};
use donaldson_lab::flow::{DonaldsonFlow, FlowControls};
use donaldson_lab::geometry::TorusGeometry;
use donaldson_lab::presets;

fn main() -> donaldson_lab::Result<()> {
    let g = TorusGeometry::standard(1, 16)?;
    for name in ["split_1_-1", "split_2_0", "unstable_extension_r2"] {
        let spec = presets::build(name, &g, None, 0, None)?;
        let traj = DonaldsonFlow::new(&spec, None).run(&FlowControls::default())?;
        let (rep, _) = destab::destabilize_verdict(&spec, &traj, None, &DestabConfig::default())?;
        println!(
            "{name:<22} k = {}  mu(F) = {:.6}  mu(E) = {:.6}  trace term {:.4}  second fundamental form {:.4}",
            rep.rank_f, rep.mu_f, rep.mu_e, rep.slope.trace_term, rep.slope.second_fundamental
        );
        println!(
            "{:<22} last gap {:.2e}, histogram {:?}, sigma cross-check {:.2e}",
            "",
            rep.gaps.last().unwrap(),
            rep.histogram,
            rep.sigma_agreement
        );
    }

    // a converged run has nothing to destabilize
    let spec = presets::build("stable_extension_r2", &g, None, 0, None)?;
    let traj = DonaldsonFlow::new(&spec, None).run(&FlowControls::default())?;
    match destab::destabilize_verdict(&spec, &traj, None, &DestabConfig::default()) {
        Err(e) => println!("stable_extension_r2: {e}"),
        Ok(_) => println!("stable_extension_r2: unexpectedly produced a subsheaf"),
    }
    Ok(())
}
