//! Sweep the write pulse energy of the single guide around its design value
//! (default: configs/vortex_l1.json).
//!
//!     cargo run --release --example energy_sweep [config.json]

use vvchip::config::Config;
use vvchip::sweep::energy_sweep;

fn main() -> vvchip::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/vortex_l1.json").into());
    let cfg = Config::load(path.as_ref())?;
    let r = energy_sweep(&cfg.scenario(), &cfg.sweep_offsets())?;
    println!("dE (nJ)  dbeta (rad/m)  xi (rad/m)  efficiency  vectorness  charge");
    for p in &r.points {
        let charge = p.charge.map(|c| c.charge.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "{:>7.2}  {:>13.2}  {:>10.3}  {:>10.4}  {:>10.4}  {charge}",
            p.d_energy * 1e9,
            p.delta_beta,
            p.xi,
            p.efficiency,
            p.vectorness
        );
    }
    Ok(())
}
