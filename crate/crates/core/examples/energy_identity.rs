//! Integration by parts `∫|h^{−1/2}∂₀h|² = ∫⟨iF̂_H − iF̂_{H₀}, h⟩` on a fixed
//! smooth metric, refined over grids.
//!
//! `cargo run --release --example energy_identity`

use donaldson_lab::destab;
use donaldson_lab::geometry::TorusGeometry;
use donaldson_lab::presets;

fn main() -> donaldson_lab::Result<()> {
    let mut prev: Option<f64> = None;
    for grid in [32, 64, 128, 256] {
        let g = TorusGeometry::standard(1, grid)?;
        let spec = presets::build("stable_extension_r2", &g, None, 0, None)?;
        let h = presets::random_metric(&spec, 4, 0.4)?;
        let e = destab::energy_identity(&spec, &h)?;
        let rate = prev.map(|p| (p / e.defect).log2());
        println!(
            "grid {grid:>3}: gradient {:.10}  curvature {:.10}  defect {:.3e}  rate {}",
            e.gradient_side,
            e.curvature_side,
            e.defect,
            rate.map_or("-".into(), |r| format!("{r:.2}"))
        );
        prev = Some(e.defect);
    }
    Ok(())
}
