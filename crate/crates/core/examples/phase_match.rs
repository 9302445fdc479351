//! Scan ring radius and locate where the l=1 and l=2 ring modes are phase
//! matched to the single guide.
//!
//!     cargo run --release --example phase_match [config.json]

use vvchip::config::Config;
use vvchip::phase::phase_match_orders;

fn main() -> vvchip::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => Config::load(p.as_ref())?,
        None => Config::default(),
    };
    let spec = cfg.device_spec();
    let pm = &cfg.phase_match;
    let found = phase_match_orders(
        &spec.isolated_single_profile()?,
        &cfg.ring_family(),
        &[1, 2],
        (pm.r_min_um, pm.r_max_um),
        pm.scan_points,
        spec.k0(),
        &cfg.solver_options(),
    )?;
    let m = &found[0];
    println!("single guide n_eff {:.8}", m.n_eff_single);
    println!("R (um)   n_eff l=1     n_eff l=2");
    for (i, r) in m.curve.radii.iter().enumerate() {
        let show = |v: f64, g: bool| if g { format!("{v:.8}") } else { "  cut off ".into() };
        println!(
            "{r:6.3}   {}    {}",
            show(m.curve.n_eff_l1[i], m.guided_l1[i]),
            show(m.curve.n_eff_l2[i], m.guided_l2[i])
        );
    }
    for f in &found {
        println!("l={} phase matched at R = {:.4} um", f.order, f.radius);
    }
    Ok(())
}
