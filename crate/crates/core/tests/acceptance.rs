//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line; exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vvchip::chip::GammaCoefficients;
use vvchip::config::Config;
use vvchip::device::Device;
use vvchip::evolve::{evolve, propagator, AmplitudeState, Method};
use vvchip::field::{
    arm_count, axis_difference, interfere_reference, project_polarization, synthesize_field, topological_charge,
    ProjectionAxis,
};
use vvchip::grid::GridSpec;
use vvchip::modes::{solve_modes_with, SolverOptions};
use vvchip::numeric::CMatrix;
use vvchip::phase::phase_match_orders;
use vvchip::sweep::{array_robustness, detuned_efficiency, dominant_subspace, polarization_panel, InputPolarization};
use vvchip::waveguide::{delta_beta_from_write, PermittivityProfile};

fn config(name: &str) -> Config {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    Config::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// 1. degenerate two-mode coupler against sin^2(kappa z)

fn two_mode_oracle() -> Outcome {
    let t = Instant::now();
    let (mut e_expm, mut e_rk4) = (0.0f64, 0.0f64);
    for kappa in [100.0, 1000.0] {
        let k = CMatrix::from_real(&[vec![0.0, kappa], vec![kappa, 0.0]]);
        let s0 = AmplitudeState::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        for i in 0..=400 {
            let z = 4e-3 * i as f64 / 400.0;
            let want = (kappa * z).sin().powi(2);
            let (a, _) = evolve(&s0, &k, z, Method::Expm).unwrap();
            let (b, _) = evolve(&s0, &k, z, Method::Rk4).unwrap();
            e_expm = e_expm.max((a.amps[1].norm_sqr() - want).abs());
            e_rk4 = e_rk4.max((b.amps[1].norm_sqr() - want).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        e_expm < 1e-9 && e_rk4 < 1e-6 && secs < 1.0,
        format!("max err expm {e_expm:.2e} (<1e-9), rk4 {e_rk4:.2e} (<1e-6), {secs:.3} s (<1 s)"),
    )
}

// 2. power conservation and unitarity of 6x6 Hermitian evolution

fn random_hermitian(rng: &mut ChaCha8Rng) -> CMatrix {
    let mut k = CMatrix::zeros(6);
    for i in 0..6 {
        k[(i, i)] = Complex64::new(rng.gen_range(-500.0..500.0), 0.0);
        for j in i + 1..6 {
            let z = Complex64::new(rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0));
            k[(i, j)] = z;
            k[(j, i)] = z.conj();
        }
    }
    k
}

fn unitarity() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut e_pow, mut e_unit) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let k = random_hermitian(&mut rng);
        let amps: Vec<Complex64> = (0..6)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let s0 = AmplitudeState::new(amps);
        let (s1, _) = evolve(&s0, &k, 10e-3, Method::Expm).unwrap();
        e_pow = e_pow.max((s1.power() - s0.power()).abs() / s0.power());
        let (m, _) = propagator(&k, 10e-3);
        e_unit = e_unit.max(m.unitarity_defect());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        e_pow < 1e-10 && e_unit < 1e-9 && secs < 1.0,
        format!("power drift {e_pow:.2e} (<1e-10), unitarity defect {e_unit:.2e} (<1e-9), {secs:.3} s (<1 s)"),
    )
}

// 3. step-index LP01 against the Bessel dispersion relation

const LAMBDA: f64 = 0.78; // um
const N_CLAD: f64 = 1.45;
const CORE_RADIUS: f64 = 2.0;
const CORE_DN: f64 = 5e-3;

fn lp01_analytic() -> f64 {
    use puruspe::bessel::{Jn, Kn};
    let k0 = 2.0 * PI / LAMBDA;
    let n_core = N_CLAD + CORE_DN;
    let v = k0 * CORE_RADIUS * (n_core * n_core - N_CLAD * N_CLAD).sqrt();
    let f = |u: f64| {
        let w = (v * v - u * u).sqrt();
        u * Jn(1, u) / Jn(0, u) - w * Kn(1, w) / Kn(0, w)
    };
    let (mut lo, mut hi) = (1e-6, v.min(2.404_825_557_695_773) - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    (n_core * n_core - (u / (k0 * CORE_RADIUS)).powi(2)).sqrt()
}

/// Step-index core with pixel values set to the covered area fraction.
fn step_profile(dx: f64, margin: f64) -> PermittivityProfile {
    let half = CORE_RADIUS + margin;
    let grid = GridSpec::covering_anchored(-half, half, -half, half, dx, (0.0, 0.0)).unwrap();
    let eps_s = N_CLAD * N_CLAD;
    let d_eps = (N_CLAD + CORE_DN).powi(2) - eps_s;
    let sub = 16;
    let eps_iso = grid.sample(|x, y| {
        let mut inside = 0;
        for i in 0..sub {
            for j in 0..sub {
                let px = x + dx * ((i as f64 + 0.5) / sub as f64 - 0.5);
                let py = y + dx * ((j as f64 + 0.5) / sub as f64 - 0.5);
                if px * px + py * py < CORE_RADIUS * CORE_RADIUS {
                    inside += 1;
                }
            }
        }
        d_eps * inside as f64 / (sub * sub) as f64
    });
    PermittivityProfile {
        eps_iso,
        peak_delta_eps: d_eps,
        ..PermittivityProfile::uniform(grid, eps_s)
    }
}

fn mode_solver_oracle() -> Outcome {
    let t = Instant::now();
    let cfg = Config::default();
    let k0 = 2.0 * PI / LAMBDA * 1e6;
    let opts = SolverOptions::default();
    let solve = |dx: f64| solve_modes_with(&step_profile(dx, cfg.grid.margin_um), k0, 1, &opts).unwrap()[0].n_eff;
    let exact = lp01_analytic();
    let coarse = solve(cfg.grid.dx_um);
    let fine = solve(0.5 * cfg.grid.dx_um);
    let secs = t.elapsed().as_secs_f64();
    let (err, halving) = ((coarse - exact).abs(), (coarse - fine).abs());
    outcome(
        err <= 1e-4 && halving < 1e-4 && secs < 30.0,
        format!(
            "n_eff {coarse:.7} vs Bessel {exact:.7}: |dn| {err:.2e} (<=1e-4), grid halving {halving:.2e} (<1e-4), {secs:.1} s (<30 s)"
        ),
    )
}

// 4. phase-matching radii of both orders

fn phase_matching() -> Outcome {
    let t = Instant::now();
    let cfg = Config::default();
    let spec = cfg.device_spec();
    let pm = &cfg.phase_match;
    let found = phase_match_orders(
        &spec.isolated_single_profile().unwrap(),
        &cfg.ring_family(),
        &[1, 2],
        (pm.r_min_um, pm.r_max_um),
        pm.scan_points,
        spec.k0(),
        &cfg.solver_options(),
    );
    let secs = t.elapsed().as_secs_f64();
    let found = match found {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("scan failed: {e}")),
    };
    let (r1, r2) = (found[0].radius, found[1].radius);
    let within = |r: f64, target: f64| (r - target).abs() <= 0.15 * target;
    outcome(
        r1 < r2 && within(r1, 3.5) && within(r2, 4.9) && secs < 300.0,
        format!("R*(1) = {r1:.3} um (3.5 +/- 15%), R*(2) = {r2:.3} um (4.9 +/- 15%), {secs:.0} s (<300 s)"),
    )
}

// 5. efficiency vs write detuning against the two-mode detuned formula

fn detuned_law(d: &Device, cfg: &Config) -> Outcome {
    let write = cfg.write_params();
    let lcp = cfg.lengths().lcp;
    let h = InputPolarization::H.jones();
    let mut worst = (0.0f64, 0.0, 0.0, 0.0);
    for i in -8..=8 {
        let de = 1.25e-9 * i as f64;
        let db = delta_beta_from_write(&write, de, 0.0).unwrap();
        let dd = d.with_detuning(d.spec.detuning + db);
        let plan = dd.plan(0.0, lcp, 0.0, None, Method::Expm).unwrap();
        let model = dd.propagate(h, &plan).unwrap().gamma.power();
        let sub = dominant_subspace(&dd);
        let law = detuned_efficiency(sub.kappa, sub.delta, lcp);
        if (model - law).abs() >= worst.0 {
            worst = ((model - law).abs(), de * 1e9, model, law);
        }
    }
    outcome(
        worst.0 <= 0.02,
        format!(
            "max |eta_model - eta_law| {:.4} (<=0.02) at dE {:+.2} nJ (model {:.4}, law {:.4})",
            worst.0, worst.1, worst.2, worst.3
        ),
    )
}

// 6. polarization identities of the fitted emitter

fn polarization_identities() -> Outcome {
    let cfg = config("fitted.json");
    let r = match polarization_panel(&cfg.scenario()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("panel failed: {e}")),
    };
    let point = |p: InputPolarization| r.points.iter().find(|q| q.input == p.jones()).expect("panel point");
    let (rcp, lcp, h) = (
        point(InputPolarization::Rcp),
        point(InputPolarization::Lcp),
        point(InputPolarization::H),
    );
    let da_rcp = rcp.extinction_da.capped(100.0);
    let ad_lcp = match lcp.extinction_da {
        vvchip::field::Extinction::Finite(v) => -v,
        vvchip::field::Extinction::Infinite => -100.0,
    };
    let tol = cfg.grid.dx_um / h.crest_radius;
    let psi = [0.0, 0.25 * PI, 0.5 * PI, 0.75 * PI];
    let lobe_err = h
        .lobe_axes
        .iter()
        .zip(psi)
        .map(|(a, p)| axis_difference(*a, p))
        .fold(0.0, f64::max);
    let rel: Vec<f64> = [rcp, lcp, h]
        .iter()
        .map(|p| p.relation.unwrap_or(f64::INFINITY))
        .collect();
    let rel_max = rel.iter().cloned().fold(0.0, f64::max);
    outcome(
        da_rcp >= 10.0 && ad_lcp >= 9.0 && lobe_err <= tol && rel_max < 0.15,
        format!(
            "RCP D/A {da_rcp:.1} dB (>=10), LCP A/D {ad_lcp:.1} dB (>=9), H lobe error {lobe_err:.3} rad (<={tol:.3}), relation residuals R {:.3} L {:.3} H {:.3} (<0.15)",
            rel[0], rel[1], rel[2]
        ),
    )
}

// 7. winding number and spiral arm count

fn charge_and_arms() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, ell) in [("vortex_l1.json", 1), ("vortex_l2.json", 2)] {
        let cfg = config(name);
        let sc = cfg.scenario();
        let d = sc.build_device().unwrap();
        let modes = d.basis.ring_modes();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        for (sign, g) in [(1, [one, zero, zero, zero]), (-1, [zero, one, zero, zero])] {
            let f = synthesize_field(&GammaCoefficients::from_slice(&g), &modes).unwrap();
            let c = topological_charge(&d.grid, &f.ex);
            let good = matches!(c, Ok(c) if c.charge == sign * ell && (c.raw - c.charge as f64).abs() < 0.05);
            ok &= good;
            notes.push(format!(
                "synth {:+}: {}",
                sign * ell,
                c.map(|c| format!("{:.3}", c.raw)).unwrap_or_else(|e| e.to_string())
            ));
        }
        let plan = d
            .plan(sc.lengths.l1, sc.lengths.lcp, sc.lengths.l2, sc.ramp, sc.method)
            .unwrap();
        let out = d.propagate(sc.input, &plan).unwrap();
        let f = synthesize_field(&out.gamma, &modes).unwrap();
        let axis = ProjectionAxis::new(cfg.reference.analyzer_deg.to_radians());
        let signal = project_polarization(&f, axis);
        let image = interfere_reference(&f, &sc.reference, axis, d.k0()).unwrap();
        let c = topological_charge(&d.grid, &signal);
        let arms = arm_count(&d.grid, &image, &signal);
        let good_c = matches!(c, Ok(c) if c.charge.abs() == ell && (c.raw - c.charge as f64).abs() < 0.05);
        let good_a = matches!(arms, Ok(a) if a == ell as usize);
        ok &= good_c && good_a;
        notes.push(format!(
            "l={ell} emitter charge {}, arms {}",
            c.map(|c| format!("{:.3}", c.raw)).unwrap_or_else(|e| e.to_string()),
            arms.map(|a| a.to_string()).unwrap_or_else(|e| e.to_string())
        ));
    }
    outcome(ok, notes.join("; "))
}

// 8. perturbed triplets

fn array_triplets() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, de) in [("vortex_l1.json", 1.465), ("vortex_l2.json", 0.4)] {
        let cfg = config(name);
        let r = match array_robustness(&cfg.scenario(), &cfg.array_offsets()) {
            Ok(r) => r,
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
                continue;
            }
        };
        let min = r.min_correlation().unwrap_or(f64::NAN);
        let charges: Vec<Option<i32>> = r.points.iter().map(|p| p.charge.map(|c| c.charge)).collect();
        let same = charges[0].is_some() && charges.iter().all(|c| *c == charges[0]);
        ok &= min >= 0.95 && same;
        notes.push(format!("+/-{de} nJ: min corr {min:.5} (>=0.95), charges {charges:?}"));
    }
    outcome(ok, notes.join("; "))
}

// 9. butt coupling against the shift scale

fn butt_magnitude(d: &Device) -> Outcome {
    let b = d.butt_diagnostics();
    let ratio = b.delta_max / b.c_max;
    outcome(
        ratio >= 100.0,
        format!(
            "|C| {:.3e}, |delta| {:.2} rad/m, ratio {ratio:.0} (>=100); |C| kappa {:.2} rad/m",
            b.c_max, b.delta_max, b.c_rate
        ),
    )
}

// 10. identical outputs from repeated runs

fn run_cli(out: &Path, workers: &str) -> i32 {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.json");
    vvchip::cli::main_with_args([
        "vvchip".as_ref(),
        "--config".as_ref(),
        cfg.as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
        "--workers".as_ref(),
        workers.as_ref(),
        "propagate".as_ref(),
    ])
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name() != Some("manifest.json".as_ref()) {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let codes = (run_cli(&a, "1"), run_cli(&b, "2"));
    if codes != (0, 0) {
        return outcome(false, format!("exit codes {codes:?}"));
    }
    let (fa, fb) = (files_under(&a), files_under(&b));
    let differing: Vec<_> = fa
        .iter()
        .filter(|p| std::fs::read(a.join(p)).ok() != std::fs::read(b.join(p)).ok())
        .collect();
    outcome(
        fa == fb && !fa.is_empty() && differing.is_empty(),
        format!("{} files compared, {} differ", fa.len(), differing.len()),
    )
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        println!(
            "criterion {n:>2} {name}: {} | {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(n);
        }
    };
    report(1, "two-mode oracle", two_mode_oracle());
    report(2, "unitarity", unitarity());
    report(3, "mode-solver oracle", mode_solver_oracle());
    report(4, "phase-matching ordering", phase_matching());
    let cfg = Config::default();
    let device = cfg.scenario().build_device().expect("default device");
    report(5, "detuned-conversion law", detuned_law(&device, &cfg));
    report(6, "polarization identities", polarization_identities());
    report(7, "topological charge", charge_and_arms());
    report(8, "array robustness", array_triplets());
    report(9, "butt-coupling magnitude", butt_magnitude(&device));
    report(10, "determinism", determinism());
    if !failed.is_empty() {
        println!("acceptance: {} failing criteria {failed:?}", failed.len());
        std::process::exit(1);
    }
    println!("acceptance: all criteria pass");
}
