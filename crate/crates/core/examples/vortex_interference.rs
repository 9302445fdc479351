//! Interfere the emitted vortex with a Gaussian reference and count the
//! spiral arms (default: configs/vortex_l1.json).
//!
//!     cargo run --release --example vortex_interference [config.json] [out.pgm]

use vvchip::config::Config;
use vvchip::field::{
    arm_count, interfere_reference, project_polarization, synthesize_field, topological_charge, ProjectionAxis,
};
use vvchip::io::encode_pgm16;

fn main() -> vvchip::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/vortex_l1.json").into());
    let out = args.next().unwrap_or_else(|| "interference.pgm".into());
    let cfg = Config::load(path.as_ref())?;
    let sc = cfg.scenario();
    let d = sc.build_device()?;
    let plan = d.plan(sc.lengths.l1, sc.lengths.lcp, sc.lengths.l2, sc.ramp, sc.method)?;
    let o = d.propagate(sc.input, &plan)?;
    let f = synthesize_field(&o.gamma, &d.basis.ring_modes())?;
    let axis = ProjectionAxis::new(cfg.reference.analyzer_deg.to_radians());
    let signal = project_polarization(&f, axis);
    let image = interfere_reference(&f, &sc.reference, axis, d.k0())?;
    let charge = topological_charge(&d.grid, &signal)?;
    let arms = arm_count(&d.grid, &image, &signal)?;
    println!("efficiency {:.4}", o.gamma.power());
    println!(
        "charge {} (raw {:.3}) on r = {:.2} um",
        charge.charge, charge.raw, charge.radius
    );
    println!("spiral arms {arms}");
    std::fs::write(&out, encode_pgm16(&d.grid, &image)?).map_err(|e| vvchip::Error::io(&out, e))?;
    println!("wrote {out}");
    Ok(())
}
