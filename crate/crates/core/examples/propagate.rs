//! Build the full emitter, print its coupling matrix and propagate one input
//! through the three sections (default: configs/fitted.json).
//!
//!     cargo run --release --example propagate [config.json]

use vvchip::config::Config;
use vvchip::coupling::LABELS;
use vvchip::sweep::single_run;

fn main() -> vvchip::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/fitted.json").into());
    let cfg = Config::load(path.as_ref())?;
    let sc = cfg.scenario();
    let d = sc.build_device()?;
    println!(
        "coupling matrix (rad/m), relative to beta_bar = {:.6e}",
        d.basis.beta_bar
    );
    for i in 0..6 {
        let row: Vec<String> = (0..6)
            .map(|j| format!("{:>9.2}{:+9.2}i", d.k.k[(i, j)].re, d.k.k[(i, j)].im))
            .collect();
        println!("{:>5} {}", LABELS[i], row.join(" "));
    }
    let b = d.butt_diagnostics();
    println!(
        "butt coupling: c_max {:.4}, delta_max {:.2} rad/m, delta/c {:.1}",
        b.c_max,
        b.delta_max,
        b.delta_max / b.c_max
    );
    let r = single_run(&sc)?;
    let p = &r.points[0];
    let g = p.gamma.as_array();
    for (name, z) in ["x_+l", "x_-l", "y_+l", "y_-l"].iter().zip(g) {
        println!("{name}: {:+.4} {:+.4}i  |.|^2 {:.4}", z.re, z.im, z.norm_sqr());
    }
    println!("efficiency {:.4}", p.efficiency);
    println!("extinction D/A {}  H/V {}", p.extinction_da, p.extinction_hv);
    if let Some(c) = p.charge {
        println!("charge {} (raw {:.3})", c.charge, c.raw);
    }
    for n in &r.notices {
        println!("note: {n}");
    }
    Ok(())
}
