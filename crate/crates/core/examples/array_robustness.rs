//! Write three emitters at the design energy and at +/- an energy offset and
//! compare their output intensity images (default: configs/vortex_l1.json).
//!
//!     cargo run --release --example array_robustness [config.json]

use vvchip::config::Config;
use vvchip::sweep::array_robustness;

fn main() -> vvchip::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/vortex_l1.json").into());
    let cfg = Config::load(path.as_ref())?;
    let r = array_robustness(&cfg.scenario(), &cfg.array_offsets())?;
    for (p, peak) in r.points.iter().zip(&r.peak_radii) {
        let charge = p.charge.map(|c| c.charge.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "{:<10} efficiency {:.4}  charge {charge}  peak radius {peak:.2} um",
            p.label, p.efficiency
        );
    }
    for (i, j, c) in &r.correlations {
        println!("corr({i},{j}) = {c:.5}");
    }
    println!(
        "min correlation {:.5}, peak spread {:.3} um",
        r.min_correlation().unwrap_or(f64::NAN),
        r.peak_spread()
    );
    Ok(())
}
