//! Solve the fundamental mode of the single guide and the vortex doublet of
//! the ring guide for a config (default: configs/default.json).
//!
//!     cargo run --release --example solve_modes [config.json]

use vvchip::config::Config;
use vvchip::modes::{count_for_order, solve_modes_with};

fn load() -> vvchip::Result<Config> {
    match std::env::args().nth(1) {
        Some(p) => Config::load(p.as_ref()),
        None => Config::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/default.json").as_ref()),
    }
}

fn main() -> vvchip::Result<()> {
    let cfg = load()?;
    let spec = cfg.device_spec();
    let opts = cfg.solver_options();
    let (pa, pb) = spec.profiles()?;
    println!("grid {} x {} at {} um", pa.grid.nx, pa.grid.ny, pa.grid.dx);
    let single = solve_modes_with(&pa, spec.k0(), 1, &opts)?;
    let ring = solve_modes_with(&pb, spec.k0(), count_for_order(spec.ell), &opts)?;
    println!("structure  idx  n_eff         beta (rad/m)      order  residual");
    for (name, set) in [("single", &single), ("ring", &ring)] {
        for (i, m) in set.iter().enumerate() {
            println!(
                "{name:<10} {i:>3}  {:.9}  {:.6e}  {:>5}  {:.1e}",
                m.n_eff, m.beta, m.oam, m.residual
            );
        }
    }
    Ok(())
}
