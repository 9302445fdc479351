//! JSON run configuration. Keys carry their unit as a suffix (`_um`, `_mm`,
//! `_nJ`, `_deg`, ...); every key is optional and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chip::Ramp;
use crate::device::{DeviceSpec, RingShape, TrackShape};
use crate::error::{Error, Result};
use crate::evolve::Method;
use crate::field::ReferenceBeam;
use crate::modes::SolverOptions;
use crate::numeric::J;
use crate::phase::RingFamily;
use crate::sweep::{InputPolarization, Lengths, Scenario};
use crate::waveguide::{BirefringenceTensor, WriteParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub wavelength_nm: f64,
    pub substrate_index: f64,
    pub grid: GridConfig,
    pub single: TrackConfig,
    pub ring: RingConfig,
    pub coupler: CouplerConfig,
    pub vortex_order: u32,
    pub birefringence: BirefringenceConfig,
    pub write: WriteConfig,
    pub input: InputConfig,
    pub phase_match: PhaseMatchConfig,
    pub sweep: SweepConfig,
    pub array: ArrayConfig,
    pub reference: ReferenceConfig,
    pub solver: SolverConfig,
    pub output_dir: String,
    pub seed: u64,
    /// Worker threads for sweeps; 0 uses all cores.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dx_um: f64,
    pub margin_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    /// 1/e half-width.
    pub width_um: f64,
    pub aspect: f64,
    /// Peak permittivity change over the substrate permittivity.
    pub peak_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingConfig {
    pub radius_um: f64,
    pub width_ratio: f64,
    pub aspect: f64,
    pub n_tracks: usize,
    pub center_scan: bool,
    pub peak_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplerConfig {
    pub spacing_um: f64,
    pub phi_a_deg: f64,
    pub l1_mm: f64,
    pub lcp_mm: f64,
    pub l2_mm: f64,
    /// Raised-cosine switch-on length at each end; 0 disables it.
    pub ramp_mm: f64,
    pub ramp_steps: usize,
    /// `expm` or `rk4`.
    pub method: String,
    pub mass_matrix: bool,
    pub detuning_per_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TensorConfig {
    pub d_eps_x: f64,
    pub d_eps_y: f64,
    pub d_eps_z: f64,
    pub theta_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BirefringenceConfig {
    /// Single-mode guide.
    pub a: TensorConfig,
    /// Ring.
    pub b: TensorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WriteConfig {
    #[serde(rename = "pulse_energy_nJ")]
    pub pulse_energy_nj: f64,
    pub speed_mm_per_s: f64,
    #[serde(rename = "rep_rate_MHz")]
    pub rep_rate_mhz: f64,
    pub waist_um: f64,
    pub eta: f64,
    /// Defaults to the vacuum wavenumber when absent.
    pub k0_prime_per_m: Option<f64>,
    pub xi_per_m: f64,
    /// Draw a residual shift per sweep point from `[-xi_max, xi_max]`.
    pub xi_max_per_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// One of RCP, LCP, H, V, D, A.
    pub polarization: String,
    /// Explicit Jones vector `[[re, im], [re, im]]`, overriding `polarization`.
    pub jones: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseMatchConfig {
    pub order: u32,
    pub r_min_um: f64,
    pub r_max_um: f64,
    pub scan_points: usize,
    /// Grid clearance beyond the ring, in track widths.
    pub margin_widths: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Pulse-energy offsets from the calibration energy.
    #[serde(rename = "d_energies_nJ")]
    pub d_energies_nj: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    /// Emitters are written at `-d, 0, +d`.
    #[serde(rename = "d_energy_nJ")]
    pub d_energy_nj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub waist_um: f64,
    /// Wavefront curvature radius; `null` for a plane wavefront.
    pub curvature_mm: Option<f64>,
    pub tilt_x_deg: f64,
    pub tilt_y_deg: f64,
    pub phase_deg: f64,
    pub amplitude: f64,
    /// Analyzer angle applied to the signal before interfering.
    pub analyzer_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub guard: usize,
    pub depth: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            wavelength_nm: 780.0,
            substrate_index: 1.45,
            grid: GridConfig::default(),
            single: TrackConfig::default(),
            ring: RingConfig::default(),
            coupler: CouplerConfig::default(),
            vortex_order: 1,
            birefringence: BirefringenceConfig::default(),
            write: WriteConfig::default(),
            input: InputConfig::default(),
            phase_match: PhaseMatchConfig::default(),
            sweep: SweepConfig::default(),
            array: ArrayConfig::default(),
            reference: ReferenceConfig::default(),
            solver: SolverConfig::default(),
            output_dir: "runs/default".into(),
            seed: SolverOptions::default().seed,
            workers: 0,
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dx_um: 0.2,
            margin_um: 13.0,
        }
    }
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            width_um: 2.38,
            aspect: 1.0,
            peak_rel: 3e-3,
        }
    }
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            radius_um: 3.5,
            width_ratio: 0.55,
            aspect: 1.0,
            n_tracks: 12,
            center_scan: false,
            peak_rel: 3e-3,
        }
    }
}

impl Default for CouplerConfig {
    fn default() -> Self {
        CouplerConfig {
            spacing_um: 15.0,
            phi_a_deg: 180.0,
            l1_mm: 5.0,
            lcp_mm: 4.0,
            l2_mm: 5.0,
            ramp_mm: 0.0,
            ramp_steps: 32,
            method: "expm".into(),
            mass_matrix: false,
            detuning_per_m: 0.0,
        }
    }
}

impl Default for TensorConfig {
    fn default() -> Self {
        TensorConfig {
            d_eps_x: 0.0,
            d_eps_y: 0.0,
            d_eps_z: 0.0,
            theta_deg: 0.0,
        }
    }
}

impl Default for WriteConfig {
    fn default() -> Self {
        WriteConfig {
            pulse_energy_nj: 250.0,
            speed_mm_per_s: 10.0,
            rep_rate_mhz: 1.0,
            waist_um: 2.0,
            // mean written change equals the peak change 3e-3 eps_s at 250 nJ
            eta: 4.46782e-21,
            k0_prime_per_m: None,
            xi_per_m: 0.0,
            xi_max_per_m: 0.0,
        }
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            polarization: "H".into(),
            jones: None,
        }
    }
}

impl Default for PhaseMatchConfig {
    fn default() -> Self {
        PhaseMatchConfig {
            order: 1,
            r_min_um: 2.5,
            r_max_um: 6.5,
            scan_points: 9,
            margin_widths: 6.0,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            d_energies_nj: vec![-10.0, -7.5, -5.0, -2.5, 0.0],
        }
    }
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig { d_energy_nj: 1.465 }
    }
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        let r = ReferenceBeam::default();
        ReferenceConfig {
            waist_um: r.waist_um,
            curvature_mm: Some(r.curvature_m * 1e3),
            tilt_x_deg: 0.0,
            tilt_y_deg: 0.0,
            phase_deg: 0.0,
            amplitude: r.amplitude,
            analyzer_deg: 0.0,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            tolerance: o.tolerance,
            max_iterations: o.max_iterations,
            guard: o.guard,
            depth: o.depth,
        }
    }
}

struct Check(Vec<(String, String)>);

impl Check {
    fn positive(&mut self, path: &str, v: f64, unit: &str) {
        if !(v > 0.0 && v.is_finite()) {
            self.0
                .push((path.into(), format!("expected a positive value in {unit}, got {v}")));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64, unit: &str) {
        if !(v >= 0.0 && v.is_finite()) {
            self.0
                .push((path.into(), format!("expected a value >= 0 in {unit}, got {v}")));
        }
    }

    fn finite(&mut self, path: &str, v: f64, unit: &str) {
        if !v.is_finite() {
            self.0
                .push((path.into(), format!("expected a finite value in {unit}, got {v}")));
        }
    }

    fn rule(&mut self, ok: bool, path: &str, message: String) {
        if !ok {
            self.0.push((path.into(), message));
        }
    }
}

impl Config {
    pub fn from_json(text: &str, origin: &str) -> Result<Config> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { origin.to_string() } else { path };
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Field-level checks; the first failure is reported with its key path.
    pub fn validate(&self) -> Result<()> {
        let mut c = Check(Vec::new());
        c.positive("wavelength_nm", self.wavelength_nm, "nm");
        c.rule(
            self.substrate_index >= 1.0 && self.substrate_index.is_finite(),
            "substrate_index",
            format!("expected a refractive index >= 1, got {}", self.substrate_index),
        );
        c.positive("grid.dx_um", self.grid.dx_um, "um");
        c.positive("grid.margin_um", self.grid.margin_um, "um");
        c.positive("single.width_um", self.single.width_um, "um");
        c.positive("single.aspect", self.single.aspect, "a dimensionless ratio");
        c.positive(
            "single.peak_rel",
            self.single.peak_rel,
            "units of the substrate permittivity",
        );
        c.positive("ring.radius_um", self.ring.radius_um, "um");
        c.positive("ring.width_ratio", self.ring.width_ratio, "units of the ring radius");
        c.positive("ring.aspect", self.ring.aspect, "a dimensionless ratio");
        c.rule(
            self.ring.n_tracks >= 3,
            "ring.n_tracks",
            format!("expected at least 3 tracks, got {}", self.ring.n_tracks),
        );
        c.positive(
            "ring.peak_rel",
            self.ring.peak_rel,
            "units of the substrate permittivity",
        );
        c.positive("coupler.spacing_um", self.coupler.spacing_um, "um");
        c.finite("coupler.phi_a_deg", self.coupler.phi_a_deg, "deg");
        c.non_negative("coupler.l1_mm", self.coupler.l1_mm, "mm");
        c.non_negative("coupler.lcp_mm", self.coupler.lcp_mm, "mm");
        c.non_negative("coupler.l2_mm", self.coupler.l2_mm, "mm");
        c.non_negative("coupler.ramp_mm", self.coupler.ramp_mm, "mm");
        c.rule(
            self.coupler.ramp_mm == 0.0 || self.coupler.ramp_steps > 0,
            "coupler.ramp_steps",
            "expected at least one step when a ramp is set".into(),
        );
        c.rule(
            matches!(self.coupler.method.as_str(), "expm" | "rk4"),
            "coupler.method",
            format!("expected \"expm\" or \"rk4\", got {:?}", self.coupler.method),
        );
        c.finite("coupler.detuning_per_m", self.coupler.detuning_per_m, "rad/m");
        c.rule(
            (1..=2).contains(&self.vortex_order),
            "vortex_order",
            format!("expected 1 or 2, got {}", self.vortex_order),
        );
        for (name, t) in [("a", &self.birefringence.a), ("b", &self.birefringence.b)] {
            for (key, v) in [("d_eps_x", t.d_eps_x), ("d_eps_y", t.d_eps_y), ("d_eps_z", t.d_eps_z)] {
                c.finite(&format!("birefringence.{name}.{key}"), v, "permittivity units");
            }
            c.rule(
                t.theta_deg.abs() <= 90.0,
                &format!("birefringence.{name}.theta_deg"),
                format!("expected an axis angle in [-90, 90] deg, got {}", t.theta_deg),
            );
        }
        c.positive("write.pulse_energy_nJ", self.write.pulse_energy_nj, "nJ");
        c.positive("write.speed_mm_per_s", self.write.speed_mm_per_s, "mm/s");
        c.positive("write.rep_rate_MHz", self.write.rep_rate_mhz, "MHz");
        c.positive("write.waist_um", self.write.waist_um, "um");
        c.positive("write.eta", self.write.eta, "dimensionless units");
        if let Some(k) = self.write.k0_prime_per_m {
            c.positive("write.k0_prime_per_m", k, "rad/m");
        }
        c.finite("write.xi_per_m", self.write.xi_per_m, "rad/m");
        c.non_negative("write.xi_max_per_m", self.write.xi_max_per_m, "rad/m");
        if self.input.jones.is_none() {
            c.rule(
                InputPolarization::parse(&self.input.polarization).is_some(),
                "input.polarization",
                format!(
                    "expected one of RCP, LCP, H, V, D, A, got {:?}",
                    self.input.polarization
                ),
            );
        } else if let Some(j) = self.input.jones {
            let p: f64 = j.iter().flatten().map(|v| v * v).sum();
            c.rule(
                p > 0.0 && p.is_finite(),
                "input.jones",
                "expected a nonzero Jones vector".into(),
            );
        }
        c.rule(
            (1..=2).contains(&self.phase_match.order),
            "phase_match.order",
            format!("expected 1 or 2, got {}", self.phase_match.order),
        );
        c.positive("phase_match.r_min_um", self.phase_match.r_min_um, "um");
        c.rule(
            self.phase_match.r_max_um > self.phase_match.r_min_um,
            "phase_match.r_max_um",
            format!(
                "expected a value above r_min_um ({} um), got {} um",
                self.phase_match.r_min_um, self.phase_match.r_max_um
            ),
        );
        c.rule(
            self.phase_match.scan_points >= 2,
            "phase_match.scan_points",
            format!("expected at least 2 points, got {}", self.phase_match.scan_points),
        );
        c.positive(
            "phase_match.margin_widths",
            self.phase_match.margin_widths,
            "track widths",
        );
        for (i, &de) in self.sweep.d_energies_nj.iter().enumerate() {
            c.rule(
                de.is_finite() && de.abs() < self.write.pulse_energy_nj,
                &format!("sweep.d_energies_nJ[{i}]"),
                format!(
                    "expected |dE| below the pulse energy ({} nJ), got {de} nJ",
                    self.write.pulse_energy_nj
                ),
            );
        }
        c.rule(
            self.array.d_energy_nj.is_finite() && self.array.d_energy_nj.abs() < self.write.pulse_energy_nj,
            "array.d_energy_nJ",
            format!(
                "expected |dE| below the pulse energy ({} nJ), got {} nJ",
                self.write.pulse_energy_nj, self.array.d_energy_nj
            ),
        );
        c.positive("reference.waist_um", self.reference.waist_um, "um");
        if let Some(rc) = self.reference.curvature_mm {
            c.rule(
                rc != 0.0 && rc.is_finite(),
                "reference.curvature_mm",
                format!("expected a nonzero radius in mm (null for a plane wave), got {rc}"),
            );
        }
        c.finite(
            "reference.amplitude",
            self.reference.amplitude,
            "units of the signal peak",
        );
        c.positive("solver.tolerance", self.solver.tolerance, "relative residual");
        c.rule(
            self.solver.max_iterations > 0,
            "solver.max_iterations",
            "expected at least one iteration".into(),
        );
        c.rule(
            self.solver.depth > 0,
            "solver.depth",
            "expected a depth of at least 1".into(),
        );
        match c.0.into_iter().next() {
            Some((path, message)) => Err(Error::Config { path, message }),
            None => Ok(()),
        }
    }

    pub fn method(&self) -> Method {
        if self.coupler.method == "rk4" {
            Method::Rk4
        } else {
            Method::Expm
        }
    }

    pub fn lengths(&self) -> Lengths {
        Lengths {
            l1: self.coupler.l1_mm * 1e-3,
            lcp: self.coupler.lcp_mm * 1e-3,
            l2: self.coupler.l2_mm * 1e-3,
        }
    }

    pub fn ramp(&self) -> Option<Ramp> {
        (self.coupler.ramp_mm > 0.0).then(|| Ramp {
            length: self.coupler.ramp_mm * 1e-3,
            steps: self.coupler.ramp_steps,
        })
    }

    fn tensor(t: &TensorConfig) -> BirefringenceTensor {
        BirefringenceTensor {
            d_eps_x: t.d_eps_x,
            d_eps_y: t.d_eps_y,
            d_eps_z: t.d_eps_z,
            theta: t.theta_deg.to_radians(),
        }
    }

    pub fn ring_shape(&self) -> RingShape {
        RingShape {
            radius: self.ring.radius_um,
            width_ratio: self.ring.width_ratio,
            aspect: self.ring.aspect,
            n_tracks: self.ring.n_tracks,
            center_scan: self.ring.center_scan,
            peak_rel: self.ring.peak_rel,
        }
    }

    pub fn device_spec(&self) -> DeviceSpec {
        DeviceSpec {
            wavelength_nm: self.wavelength_nm,
            n_s: self.substrate_index,
            dx_um: self.grid.dx_um,
            margin_um: self.grid.margin_um,
            spacing_um: self.coupler.spacing_um,
            phi_a: self.coupler.phi_a_deg.to_radians(),
            single: TrackShape {
                width: self.single.width_um,
                aspect: self.single.aspect,
                peak_rel: self.single.peak_rel,
            },
            ring: self.ring_shape(),
            ell: self.vortex_order,
            d_eps_a: Self::tensor(&self.birefringence.a),
            d_eps_b: Self::tensor(&self.birefringence.b),
            scale_a: 1.0,
            scale_b: 1.0,
            detuning: self.coupler.detuning_per_m,
            mass_matrix: self.coupler.mass_matrix,
        }
    }

    pub fn write_params(&self) -> WriteParams {
        let k0 = 2.0 * std::f64::consts::PI / (self.wavelength_nm * 1e-9);
        WriteParams {
            e_sp: self.write.pulse_energy_nj * 1e-9,
            v: self.write.speed_mm_per_s * 1e-3,
            f_rp: self.write.rep_rate_mhz * 1e6,
            w0: self.write.waist_um * 1e-6,
            eta: self.write.eta,
            n_s: self.substrate_index,
            k0_prime: self.write.k0_prime_per_m.unwrap_or(k0),
            xi: self.write.xi_per_m,
        }
    }

    pub fn input_jones(&self) -> [num_complex::Complex64; 2] {
        match self.input.jones {
            Some(j) => [j[0][0] + J * j[0][1], j[1][0] + J * j[1][1]],
            None => InputPolarization::parse(&self.input.polarization)
                .unwrap_or(InputPolarization::H)
                .jones(),
        }
    }

    pub fn reference_beam(&self) -> ReferenceBeam {
        ReferenceBeam {
            waist_um: self.reference.waist_um,
            curvature_m: self.reference.curvature_mm.map_or(f64::INFINITY, |r| r * 1e-3),
            tilt: (
                self.reference.tilt_x_deg.to_radians(),
                self.reference.tilt_y_deg.to_radians(),
            ),
            phase: self.reference.phase_deg.to_radians(),
            amplitude: self.reference.amplitude,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            seed: self.seed,
            guard: self.solver.guard,
            depth: self.solver.depth,
        }
    }

    pub fn ring_family(&self) -> RingFamily {
        RingFamily {
            shape: self.ring_shape(),
            eps_s: self.substrate_index * self.substrate_index,
            dx_um: self.grid.dx_um,
            margin_widths: self.phase_match.margin_widths,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            device: self.device_spec(),
            lengths: self.lengths(),
            ramp: self.ramp(),
            method: self.method(),
            write: self.write_params(),
            input: self.input_jones(),
            reference: self.reference_beam(),
            xi_max: self.write.xi_max_per_m,
            seed: self.seed,
            workers: self.workers,
            solver: self.solver_options(),
        }
    }

    /// Energy offsets of the array study (J).
    pub fn array_offsets(&self) -> [f64; 3] {
        let d = self.array.d_energy_nj * 1e-9;
        [-d, 0.0, d]
    }

    pub fn sweep_offsets(&self) -> Vec<f64> {
        self.sweep.d_energies_nj.iter().map(|d| d * 1e-9).collect()
    }
}
