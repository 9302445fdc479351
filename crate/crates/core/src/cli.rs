//! Command-line front end. Every subcommand writes a run directory; failures
//! are recorded in its manifest and mapped to exit codes 2 (config),
//! 3 (numerical) and 4 (i/o).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::Config;
use crate::coupling::LABELS;
use crate::device::Device;
use crate::error::{Error, Result};
use crate::field::{
    arm_count, interfere_reference, project_polarization, scalar_intensity, synthesize_field, topological_charge,
    ProjectionAxis,
};
use crate::io::{complex_cells, encode_ppm_montage, unix_now, ErrorRecord, Manifest, RunDir};
use crate::modes::{count_for_order, solve_modes_with, ModeField};
use crate::phase::phase_match_radius;
use crate::sweep::{array_robustness, energy_sweep, polarization_panel, single_run, SweepResult};

#[derive(Debug, Parser)]
#[command(name = "vvchip", version, about = "Gaussian-to-vortex waveguide coupler simulator")]
pub struct Cli {
    /// JSON configuration; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, value_name = "N", env = "VVCHIP_WORKERS")]
    pub workers: Option<usize>,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    pub print_defaults: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Guided modes of the single guide and the ring.
    SolveModes,
    /// Dispersion scan and phase-matching ring radius.
    PhaseMatch,
    /// Propagate the configured input through the chip.
    Propagate,
    /// Outputs for RCP, LCP, H, V, D and A inputs.
    Panel,
    /// Efficiency versus pulse energy of the single guide.
    SweepEnergy,
    /// Three emitters written at -dE, 0 and +dE.
    Array,
    /// Interference of the output with a reference beam.
    Interfere,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveModes => "solve-modes",
            Command::PhaseMatch => "phase-match",
            Command::Propagate => "propagate",
            Command::Panel => "panel",
            Command::SweepEnergy => "sweep-energy",
            Command::Array => "array",
            Command::Interfere => "interfere",
        }
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    run(&cli)
}

fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> i32 {
    let cfg = resolve_config(cli);
    if cli.print_defaults {
        return match cfg {
            Ok(c) => {
                println!("{}", c.to_json());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        };
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: no subcommand given (try --help)");
        return 2;
    };
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().ok().map(|c| PathBuf::from(&c.output_dir)))
        .unwrap_or_else(|| PathBuf::from(Config::default().output_dir));
    let mut dir = match RunDir::create(&out) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        seed: cfg.as_ref().map(|c| c.seed).unwrap_or_default(),
        created_unix_s: unix_now(),
        config: cfg
            .as_ref()
            .map(|c| serde_json::to_value(c).expect("config serializes"))
            .unwrap_or(serde_json::Value::Null),
        summary: serde_json::Value::Null,
        notices: Vec::new(),
        files: Vec::new(),
        error: None,
    };
    let result = cfg.and_then(|c| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(c.workers)
            .build()
            .map_err(|e| Error::Model(format!("cannot start worker pool: {e}")))?;
        pool.install(|| dispatch(cmd, &c, &mut dir))
    });
    let code = match result {
        Ok((summary, notices)) => {
            manifest.summary = summary;
            manifest.notices = notices;
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            manifest.error = Some(ErrorRecord::from(&e));
            e.exit_code()
        }
    };
    match dir.finish(manifest) {
        Ok(p) => {
            if code == 0 {
                eprintln!("wrote {}", p.display());
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

type Outcome = (serde_json::Value, Vec<String>);

fn dispatch(cmd: Command, cfg: &Config, dir: &mut RunDir) -> Result<Outcome> {
    match cmd {
        Command::SolveModes => solve_modes_cmd(cfg, dir),
        Command::PhaseMatch => phase_match_cmd(cfg, dir),
        Command::Propagate => propagate_cmd(cfg, dir),
        Command::Panel => panel_cmd(cfg, dir),
        Command::SweepEnergy => sweep_energy_cmd(cfg, dir),
        Command::Array => array_cmd(cfg, dir),
        Command::Interfere => interfere_cmd(cfg, dir),
    }
}

fn mode_rows(s: &mut String, structure: &str, modes: &[ModeField]) {
    for (i, m) in modes.iter().enumerate() {
        let _ = writeln!(s, "{structure},{i},{},{},{},{}", m.beta, m.n_eff, m.oam, m.residual);
    }
}

fn solve_modes_cmd(cfg: &Config, dir: &mut RunDir) -> Result<Outcome> {
    let spec = cfg.device_spec();
    let opts = cfg.solver_options();
    let (pa, pb) = spec.profiles()?;
    let k0 = spec.k0();
    let single = solve_modes_with(&pa, k0, 1, &opts)?;
    let ring = solve_modes_with(&pb, k0, count_for_order(spec.ell), &opts)?;
    let mut csv = String::from("structure,index,beta_per_m,n_eff,order,residual\n");
    mode_rows(&mut csv, "single", &single);
    mode_rows(&mut csv, "ring", &ring);
    dir.write("metrics.csv", csv.as_bytes())?;
    let both: Vec<f64> = pa.eps_iso.iter().zip(&pb.eps_iso).map(|(a, b)| a.max(*b)).collect();
    dir.write_pgm("images/profile.pgm", &pa.grid, &both)?;
    for (name, set) in [("single", &single), ("ring", &ring)] {
        for (i, m) in set.iter().enumerate() {
            dir.write_pgm(&format!("images/mode_{name}_{i}.pgm"), &m.grid, &m.intensity())?;
        }
    }
    let summary = json!({
        "n_eff_single": single[0].n_eff,
        "n_eff_ring": ring.iter().map(|m| m.n_eff).collect::<Vec<_>>(),
        "orders_ring": ring.iter().map(|m| m.oam).collect::<Vec<_>>(),
    });
    Ok((summary, Vec::new()))
}

fn phase_match_cmd(cfg: &Config, dir: &mut RunDir) -> Result<Outcome> {
    let spec = cfg.device_spec();
    let single = spec.isolated_single_profile()?;
    let pm = &cfg.phase_match;
    let m = phase_match_radius(
        &single,
        &cfg.ring_family(),
        pm.order,
        (pm.r_min_um, pm.r_max_um),
        pm.scan_points,
        spec.k0(),
        &cfg.solver_options(),
    )?;
    let mut csv = String::from("radius_um,n_eff_gaussian,n_eff_l1,n_eff_l2,guided_l1,guided_l2\n");
    for (i, r) in m.curve.radii.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{r},{},{},{},{},{}",
            m.curve.n_eff_gaussian, m.curve.n_eff_l1[i], m.curve.n_eff_l2[i], m.guided_l1[i], m.guided_l2[i]
        );
    }
    dir.write("curves/dispersion.csv", csv.as_bytes())?;
    let metrics = format!(
        "order,radius_um,n_eff_single\n{},{},{}\n",
        m.order, m.radius, m.n_eff_single
    );
    dir.write("metrics.csv", metrics.as_bytes())?;
    Ok((
        json!({"order": m.order, "radius_um": m.radius, "n_eff_single": m.n_eff_single}),
        Vec::new(),
    ))
}

fn coupling_csv(d: &Device) -> String {
    let mut s = String::from("row,col,re_per_m,im_per_m,terms\n");
    for i in 0..6 {
        for j in 0..6 {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                LABELS[i],
                LABELS[j],
                complex_cells(d.k.k[(i, j)]),
                d.k.provenance[i][j].join("+")
            );
        }
    }
    s
}

fn device_summary(d: &Device) -> serde_json::Value {
    let b = d.butt_diagnostics();
    json!({
        "kappa_scale_per_m": d.k.kappa_scale(),
        "mismatch_per_m": d.mismatch(),
        "raw_asymmetry": d.k.raw_asymmetry,
        "half_split_per_m": d.basis.half_split,
        "butt": {
            "c_max": b.c_max,
            "delta_max_per_m": b.delta_max,
            "c_rate_per_m": b.c_rate,
            "delta_over_c": if b.c_max > 0.0 { b.delta_max / b.c_max } else { f64::INFINITY },
            "delta_over_c_rate": if b.c_rate > 0.0 { b.delta_max / b.c_rate } else { f64::INFINITY },
        },
    })
}

fn point_summary(r: &SweepResult) -> serde_json::Value {
    let rows: Vec<_> = r
        .points
        .iter()
        .map(|p| {
            json!({
                "label": p.label,
                "efficiency": p.efficiency,
                "vectorness": p.vectorness,
                "extinction_DA_dB": p.extinction_da.to_string(),
                "extinction_HV_dB": p.extinction_hv.to_string(),
                "charge": p.charge.map(|c| c.charge),
                "relation_residual": p.relation,
            })
        })
        .collect();
    json!(rows)
}

fn propagate_cmd(cfg: &Config, dir: &mut RunDir) -> Result<Outcome> {
    let sc = cfg.scenario();
    let d = sc.build_device()?;
    let r = single_run(&sc)?;
    dir.write_sweep(&r)?;
    dir.write("curves/coupling.csv", coupling_csv(&d).as_bytes())?;
    dir.write("curves/provenance.txt", d.k.provenance_table().as_bytes())?;
    let summary = json!({"device": device_summary(&d), "points": point_summary(&r)});
    Ok((summary, r.notices))
}

fn panel_cmd(cfg: &Config, dir: &mut RunDir) -> Result<Outcome> {
    let r = polarization_panel(&cfg.scenario())?;
    dir.write_sweep(&r)?;
    let rows: Vec<Vec<&[f64]>> = r
        .points
        .iter()
        .map(|p| p.images.iter().map(|i| i.data.as_slice()).collect())
        .collect();
    dir.write("images/panel.ppm", &encode_ppm_montage(&r.grid, &rows, 4)?)?;
    Ok((json!({"points": point_summary(&r)}), r.notices))
}

fn sweep_energy_cmd(cfg: &Config, dir: &mut RunDir) -> Result<Outcome> {
    let r = energy_sweep(&cfg.scenario(), &cfg.sweep_offsets())?;
    dir.write_sweep(&r)?;
    Ok((json!({"points": point_summary(&r)}), r.notices))
}

fn array_cmd(cfg: &Config, dir: &mut RunDir) -> Result<Outcome> {
    let r = array_robustness(&cfg.scenario(), &cfg.array_offsets())?;
    dir.write_sweep(&r)?;
    let summary = json!({
        "min_correlation": r.min_correlation(),
        "peak_radii_um": r.peak_radii,
        "peak_spread_um": r.peak_spread(),
        "points": point_summary(&r),
    });
    Ok((summary, r.notices))
}

fn interfere_cmd(cfg: &Config, dir: &mut RunDir) -> Result<Outcome> {
    let sc = cfg.scenario();
    let d = sc.build_device()?;
    let plan = d.plan(sc.lengths.l1, sc.lengths.lcp, sc.lengths.l2, sc.ramp, sc.method)?;
    let out = d.propagate(sc.input, &plan)?;
    let f = synthesize_field(&out.gamma, &d.basis.ring_modes())?;
    let axis = ProjectionAxis::new(cfg.reference.analyzer_deg.to_radians());
    let signal = project_polarization(&f, axis);
    let image = interfere_reference(&f, &sc.reference, axis, d.k0())?;
    dir.write_pgm("images/signal.pgm", &d.grid, &scalar_intensity(&signal))?;
    dir.write_pgm("images/interference.pgm", &d.grid, &image)?;
    let charge = topological_charge(&d.grid, &signal)?;
    let arms = arm_count(&d.grid, &image, &signal)?;
    let metrics = format!(
        "charge,charge_raw,arms,crest_radius_um,efficiency\n{},{},{},{},{}\n",
        charge.charge,
        charge.raw,
        arms,
        charge.radius,
        out.gamma.power()
    );
    dir.write("metrics.csv", metrics.as_bytes())?;
    let summary =
        json!({"charge": charge.charge, "charge_raw": charge.raw, "arms": arms, "efficiency": out.gamma.power()});
    Ok((summary, out.notices))
}

/// Read a finished run's manifest back as JSON.
pub fn read_manifest(dir: &Path) -> Result<serde_json::Value> {
    let p = dir.join("manifest.json");
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::config(p.display().to_string(), e.to_string()))
}
