//! Run the six standard input polarizations through one emitter and write a
//! montage of intensity and H/D/V/A projections (default: configs/fitted.json).
//!
//!     cargo run --release --example polarization_panel [config.json] [panel.ppm]

use vvchip::config::Config;
use vvchip::io::encode_ppm_montage;
use vvchip::sweep::polarization_panel;

fn main() -> vvchip::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/fitted.json").into());
    let out = args.next().unwrap_or_else(|| "panel.ppm".into());
    let cfg = Config::load(path.as_ref())?;
    let r = polarization_panel(&cfg.scenario())?;
    println!("input  efficiency  D/A (dB)  H/V (dB)  relation residual");
    for p in &r.points {
        let rel = p.relation.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<5}  {:>10.4}  {:>8}  {:>8}  {rel}",
            p.label,
            p.efficiency,
            p.extinction_da.to_string(),
            p.extinction_hv.to_string()
        );
    }
    let rows: Vec<Vec<&[f64]>> = r
        .points
        .iter()
        .map(|p| p.images.iter().map(|i| i.data.as_slice()).collect())
        .collect();
    std::fs::write(&out, encode_ppm_montage(&r.grid, &rows, 4)?).map_err(|e| vvchip::Error::io(&out, e))?;
    println!("wrote {out}");
    Ok(())
}
