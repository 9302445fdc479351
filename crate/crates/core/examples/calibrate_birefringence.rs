//! Find the x/y permittivity split that makes both guides act as a quarter
//! wave plate over a given total length.
//!
//! The x-y propagation-constant difference is linear in the split, so one
//! probe device is enough.
//!
//!     cargo run --release --example calibrate_birefringence [config.json] [length_mm]

use vvchip::config::Config;
use vvchip::device::Device;
use vvchip::waveguide::BirefringenceTensor;

const PROBE: f64 = 1e-4;

fn main() -> vvchip::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(p) => Config::load(p.as_ref())?,
        None => Config::default(),
    };
    let length = args
        .next()
        .map(|s| s.parse::<f64>().expect("length in mm"))
        .unwrap_or(14.0)
        * 1e-3;
    let mut spec = cfg.device_spec();
    let probe = BirefringenceTensor::diagonal(PROBE, -PROBE, 0.0);
    spec.d_eps_a = probe;
    spec.d_eps_b = probe;
    let d = Device::build_with(&spec, &cfg.solver_options())?;
    let k = &d.k.k;
    let split_a = (k[(0, 0)] - k[(1, 1)]).re;
    let split_b = (k[(2, 2)] - k[(4, 4)]).re;
    let mean = 0.5 * (split_a + split_b);
    println!("x-y split per {PROBE:e}: single {split_a:.3} rad/m, ring {split_b:.3} rad/m");
    let d_eps = PROBE * std::f64::consts::FRAC_PI_2 / (mean * length);
    println!(
        "quarter wave over {:.1} mm: d_eps_x = +{d_eps:.4e}, d_eps_y = -{d_eps:.4e}",
        length * 1e3
    );
    Ok(())
}
