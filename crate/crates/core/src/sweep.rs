//! Experiment families built on a single device description: pulse-energy
//! sweeps, arrays of emitters written at perturbed energies, and panels over
//! the six standard input polarizations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chip::{GammaCoefficients, Ramp};
use crate::device::{Device, DeviceSpec};
use crate::error::{Error, Result};
use crate::evolve::Method;
use crate::field::{
    axis_extinction, conversion_efficiency, crest_radius, field_centroid, intensity_image, lobe_axis, profile_peak,
    project_polarization, radial_profile, scalar_intensity, synthesize_field, topological_charge, vectorness_index,
    ChargeMeasurement, Extinction, ProjectionAxis, ReferenceBeam, VectorField,
};
use crate::grid::GridSpec;
use crate::modes::{solve_modes_with, SolverOptions};
use crate::numeric::J;
use crate::waveguide::{delta_beta_from_write, energy_scale, perturbation_from_energy, WriteParams};

/// Segment lengths of the chip (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lengths {
    pub l1: f64,
    pub lcp: f64,
    pub l2: f64,
}

impl Default for Lengths {
    fn default() -> Self {
        Lengths {
            l1: 5e-3,
            lcp: 4e-3,
            l2: 5e-3,
        }
    }
}

/// The six standard input states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputPolarization {
    Rcp,
    Lcp,
    H,
    V,
    D,
    A,
}

impl InputPolarization {
    pub const ALL: [InputPolarization; 6] = [
        InputPolarization::Rcp,
        InputPolarization::Lcp,
        InputPolarization::H,
        InputPolarization::V,
        InputPolarization::D,
        InputPolarization::A,
    ];

    /// Jones vector in image axes. RCP is `(1, -j)/sqrt 2`.
    pub fn jones(self) -> [Complex64; 2] {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let c = |a: f64, b: f64| Complex64::new(a, b);
        match self {
            InputPolarization::Rcp => [c(r, 0.0), c(0.0, -r)],
            InputPolarization::Lcp => [c(r, 0.0), c(0.0, r)],
            InputPolarization::H => [c(1.0, 0.0), c(0.0, 0.0)],
            InputPolarization::V => [c(0.0, 0.0), c(1.0, 0.0)],
            InputPolarization::D => [c(r, 0.0), c(r, 0.0)],
            InputPolarization::A => [c(r, 0.0), c(-r, 0.0)],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InputPolarization::Rcp => "RCP",
            InputPolarization::Lcp => "LCP",
            InputPolarization::H => "H",
            InputPolarization::V => "V",
            InputPolarization::D => "D",
            InputPolarization::A => "A",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.label().eq_ignore_ascii_case(s))
    }
}

/// Expected amplitude pattern of the vortex coefficients for the circular and
/// horizontal inputs, written as `lhs = rhs` for `(x_-l, y_-l, y_l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Rcp,
    Lcp,
    H,
}

impl Relation {
    pub fn for_input(p: InputPolarization) -> Option<Relation> {
        match p {
            InputPolarization::Rcp => Some(Relation::Rcp),
            InputPolarization::Lcp => Some(Relation::Lcp),
            InputPolarization::H => Some(Relation::H),
            _ => None,
        }
    }

    fn rhs(self, g: &GammaCoefficients) -> [Complex64; 3] {
        let (xp, yp) = (g.x_plus, g.y_plus);
        match self {
            Relation::Rcp => [J * xp, J * yp, xp],
            Relation::Lcp => [-J * xp, -J * yp, -xp],
            Relation::H => [xp, -yp, -J * xp],
        }
    }
}

/// `|lhs - rhs| / |gamma|` for the relation pattern of `rel`.
pub fn relation_residual(rel: Relation, g: &GammaCoefficients) -> f64 {
    let lhs = [g.x_minus, g.y_minus, g.y_plus];
    let rhs = rel.rhs(g);
    let num: f64 = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den = g.power();
    if den == 0.0 {
        return f64::INFINITY;
    }
    (num / den).sqrt()
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub device: DeviceSpec,
    pub lengths: Lengths,
    pub ramp: Option<Ramp>,
    pub method: Method,
    pub write: WriteParams,
    pub input: [Complex64; 2],
    pub reference: ReferenceBeam,
    /// Half-width of the uniform interval the residual shift is drawn from
    /// per sweep point (rad/m); zero disables the draw.
    pub xi_max: f64,
    pub seed: u64,
    /// Sweep worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub solver: SolverOptions,
}

impl Scenario {
    pub fn new(device: DeviceSpec, write: WriteParams) -> Self {
        Scenario {
            device,
            lengths: Lengths::default(),
            ramp: None,
            method: Method::Expm,
            write,
            input: InputPolarization::H.jones(),
            reference: ReferenceBeam::default(),
            xi_max: 0.0,
            seed: SolverOptions::default().seed,
            workers: 0,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.write.validate()?;
        self.reference.validate()?;
        if !(self.xi_max >= 0.0 && self.xi_max.is_finite()) {
            return Err(Error::Contract(format!("xi_max must be >= 0, got {}", self.xi_max)));
        }
        Ok(())
    }

    /// Solver options with the scenario seed.
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            seed: self.seed,
            ..self.solver
        }
    }

    pub fn build_device(&self) -> Result<Device> {
        Device::build_with(&self.device, &self.solver_options())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Model(format!("cannot start worker pool: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Energy,
    Polarization,
    ArrayPerturbation,
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedImage {
    pub name: String,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub index: usize,
    pub label: String,
    /// Pulse-energy offset of the point (J); zero outside energy studies.
    pub d_energy: f64,
    pub input: [Complex64; 2],
    pub gamma: GammaCoefficients,
    pub efficiency: f64,
    pub vectorness: f64,
    pub extinction_da: Extinction,
    pub extinction_hv: Extinction,
    /// Write-model shift for `d_energy` (rad/m).
    pub delta_beta: f64,
    /// Residual shift drawn for this point (rad/m).
    pub xi: f64,
    /// Winding of the dominant polarization component, `None` when the crest
    /// circle passes through a zero.
    pub charge: Option<ChargeMeasurement>,
    /// Residual of the relation pattern for RCP, LCP and H inputs.
    pub relation: Option<f64>,
    /// Lobe axis of the H, D, V and A projections (rad, mod pi).
    pub lobe_axes: [f64; 4],
    /// Crest radius of the total intensity (um).
    pub crest_radius: f64,
    pub images: Vec<NamedImage>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub grid: GridSpec,
    pub ell: u32,
    pub points: Vec<PointResult>,
    /// Pairwise normalized image correlations `(i, j, r)`.
    pub correlations: Vec<(usize, usize, f64)>,
    /// Radial-profile peak position per point (um).
    pub peak_radii: Vec<f64>,
    pub notices: Vec<String>,
}

impl SweepResult {
    pub fn min_correlation(&self) -> Option<f64> {
        self.correlations.iter().map(|c| c.2).reduce(f64::min)
    }

    /// Largest pairwise spread of radial-profile peak positions (um).
    pub fn peak_spread(&self) -> f64 {
        let lo = self.peak_radii.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.peak_radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.peak_radii.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// Scalar field of the dominant polarization of `f` and its Jones vector.
pub fn principal_component(f: &VectorField) -> (Vec<Complex64>, [Complex64; 2]) {
    let c = f.coherency();
    let (a, d, b) = (c[0][0].re, c[1][1].re, c[0][1]);
    let tr = a + d;
    let disc = ((a - d) * (a - d) / 4.0 + b.norm_sqr()).sqrt();
    let lmax = 0.5 * tr + disc;
    // eigenvector of [[a, b], [b*, d]] for lmax
    let v = if b.norm() > 1e-300 {
        [b, Complex64::new(lmax - a, 0.0)]
    } else if a >= d {
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
    } else {
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
    };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let e = [v[0] / n, v[1] / n];
    let s =
        f.ex.iter()
            .zip(&f.ey)
            .map(|(x, y)| e[0].conj() * x + e[1].conj() * y)
            .collect();
    (s, e)
}

/// Zero-lag normalized cross-correlation of two images.
pub fn image_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Contract("images must be non-empty and the same size".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x - ma, y - mb);
        sab += u * v;
        saa += u * u;
        sbb += v * v;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Contract("correlation of a constant image".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

const AXES: [ProjectionAxis; 4] = [
    ProjectionAxis::H,
    ProjectionAxis::D,
    ProjectionAxis::V,
    ProjectionAxis::A,
];
const AXIS_NAMES: [&str; 4] = ["H", "D", "V", "A"];

/// Propagate one input through `device` and measure the output.
pub fn evaluate(
    device: &Device,
    lengths: Lengths,
    ramp: Option<Ramp>,
    method: Method,
    input: [Complex64; 2],
    projections: bool,
) -> Result<(PointResult, Vec<String>)> {
    let plan = device.plan(lengths.l1, lengths.lcp, lengths.l2, ramp, method)?;
    let out = device.propagate(input, &plan)?;
    let f = synthesize_field(&out.gamma, &device.basis.ring_modes())?;
    let intensity = intensity_image(&f);
    let efficiency = conversion_efficiency(&out.gamma, 1.0)?;
    let vectorness = if efficiency > 0.0 { vectorness_index(&f) } else { 0.0 };
    let (ext_da, ext_hv) = if efficiency > 0.0 {
        (
            axis_extinction(&f, ProjectionAxis::D)?,
            axis_extinction(&f, ProjectionAxis::H)?,
        )
    } else {
        (Extinction::Finite(0.0), Extinction::Finite(0.0))
    };
    let charge = if efficiency > 0.0 {
        let (s, _) = principal_component(&f);
        topological_charge(&device.grid, &s).ok()
    } else {
        None
    };
    let mut images = vec![NamedImage {
        name: "intensity".into(),
        data: intensity.clone(),
    }];
    let mut lobe_axes = [0.0; 4];
    if projections {
        for (k, axis) in AXES.iter().enumerate() {
            let img = scalar_intensity(&project_polarization(&f, *axis));
            if img.iter().any(|v| *v > 0.0) {
                lobe_axes[k] = lobe_axis(&device.grid, &img);
            }
            images.push(NamedImage {
                name: format!("proj_{}", AXIS_NAMES[k]),
                data: img,
            });
        }
    }
    let crest = if efficiency > 0.0 {
        crest_radius(&device.grid, &intensity, field_centroid(&device.grid, &intensity))
    } else {
        0.0
    };
    Ok((
        PointResult {
            index: 0,
            label: String::new(),
            d_energy: 0.0,
            input,
            gamma: out.gamma,
            efficiency,
            vectorness,
            extinction_da: ext_da,
            extinction_hv: ext_hv,
            delta_beta: 0.0,
            xi: 0.0,
            charge,
            relation: None,
            lobe_axes,
            crest_radius: crest,
            images,
        },
        out.notices,
    ))
}

/// Run the scenario's own input through the scenario's device.
pub fn single_run(s: &Scenario) -> Result<SweepResult> {
    s.validate()?;
    let d = s.build_device()?;
    let (mut p, notices) = evaluate(&d, s.lengths, s.ramp, s.method, s.input, true)?;
    p.label = "run".into();
    Ok(SweepResult {
        axis: SweepAxis::Single,
        grid: d.grid,
        ell: s.device.ell,
        points: vec![p],
        correlations: Vec::new(),
        peak_radii: Vec::new(),
        notices: dedup(notices),
    })
}

fn dedup(mut v: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    v.retain(|s| seen.insert(s.clone()));
    v
}

/// Residual shifts for `n` points, drawn in point order.
fn draw_xi(s: &Scenario, n: usize) -> Vec<f64> {
    if s.xi_max == 0.0 {
        return vec![s.write.xi; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    (0..n)
        .map(|_| s.write.xi + rng.gen_range(-s.xi_max..=s.xi_max))
        .collect()
}

/// Efficiency and polarization structure versus the pulse energy of the
/// single-mode guide. `d_energies` are offsets from the calibration energy (J).
pub fn energy_sweep(s: &Scenario, d_energies: &[f64]) -> Result<SweepResult> {
    s.validate()?;
    if d_energies.is_empty() {
        return Err(Error::Contract("energy sweep needs at least one point".into()));
    }
    let opts = s.solver_options();
    let base = s.build_device()?;
    let deltas: Vec<f64> = d_energies
        .iter()
        .map(|&de| delta_beta_from_write(&s.write, de, 0.0))
        .collect::<Result<_>>()?;
    let xis = draw_xi(s, d_energies.len());
    let pool = s.pool()?;
    let rows: Vec<Result<(PointResult, Vec<String>)>> = pool.install(|| {
        d_energies
            .par_iter()
            .enumerate()
            .map(|(i, &de)| {
                let mut spec = s.device.clone();
                perturbation_from_energy(&spec.single_track(), &s.write, de)?;
                spec.scale_a = s.device.scale_a * energy_scale(&s.write, de);
                spec.detuning = s.device.detuning + xis[i];
                let (pa, pb) = spec.profiles()?;
                let pa = pa.with_birefringence(spec.d_eps_a);
                let pb = pb.with_birefringence(spec.d_eps_b);
                let gauss = solve_modes_with(&pa, spec.k0(), 1, &opts)?.swap_remove(0);
                let d = Device::assemble(&spec, pa, pb, gauss, base.even.clone(), base.odd.clone())?;
                let (mut p, n) = evaluate(&d, s.lengths, s.ramp, s.method, s.input, false)?;
                p.index = i;
                p.label = format!("dE{i}");
                p.d_energy = de;
                p.delta_beta = deltas[i];
                p.xi = xis[i];
                Ok((p, n))
            })
            .collect()
    });
    let mut points = Vec::with_capacity(rows.len());
    let mut notices = Vec::new();
    for r in rows {
        let (p, n) = r?;
        points.push(p);
        notices.extend(n);
    }
    Ok(SweepResult {
        axis: SweepAxis::Energy,
        grid: base.grid,
        ell: s.device.ell,
        points,
        correlations: Vec::new(),
        peak_radii: Vec::new(),
        notices: dedup(notices),
    })
}

/// Emitters written entirely at `E_sp + dE` for each offset (J), compared by
/// image correlation, radial-profile peak and charge.
pub fn array_robustness(s: &Scenario, d_energies: &[f64]) -> Result<SweepResult> {
    s.validate()?;
    if d_energies.len() < 2 {
        return Err(Error::Contract("array study needs at least two emitters".into()));
    }
    let opts = s.solver_options();
    for &de in d_energies {
        delta_beta_from_write(&s.write, de, 0.0)?;
    }
    let pool = s.pool()?;
    let rows: Vec<Result<(PointResult, Vec<String>)>> = pool.install(|| {
        d_energies
            .par_iter()
            .enumerate()
            .map(|(i, &de)| {
                let scale = energy_scale(&s.write, de);
                let mut spec = s.device.clone();
                perturbation_from_energy(&spec.single_track(), &s.write, de)?;
                spec.scale_a = s.device.scale_a * scale;
                spec.scale_b = s.device.scale_b * scale;
                let d = Device::build_with(&spec, &opts)?;
                let (mut p, n) = evaluate(&d, s.lengths, s.ramp, s.method, s.input, false)?;
                p.index = i;
                p.label = format!("emitter{i}");
                p.d_energy = de;
                p.delta_beta = delta_beta_from_write(&s.write, de, 0.0)?;
                Ok((p, n))
            })
            .collect()
    });
    let mut points = Vec::with_capacity(rows.len());
    let mut notices = Vec::new();
    for r in rows {
        let (p, n) = r?;
        points.push(p);
        notices.extend(n);
    }
    let grid = s.device.grid()?;
    let mut correlations = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let r = image_correlation(&points[i].images[0].data, &points[j].images[0].data)?;
            correlations.push((i, j, r));
        }
    }
    let peak_radii = points
        .iter()
        .map(|p| profile_peak(&radial_profile(&grid, &p.images[0].data, 0.0)).0)
        .collect();
    Ok(SweepResult {
        axis: SweepAxis::ArrayPerturbation,
        grid,
        ell: s.device.ell,
        points,
        correlations,
        peak_radii,
        notices: dedup(notices),
    })
}

/// Output for each of the six standard inputs, with projections, extinction
/// ratios and the relation residuals of the circular and horizontal inputs.
pub fn polarization_panel(s: &Scenario) -> Result<SweepResult> {
    s.validate()?;
    let d = s.build_device()?;
    let pool = s.pool()?;
    let rows: Vec<Result<(PointResult, Vec<String>)>> = pool.install(|| {
        InputPolarization::ALL
            .par_iter()
            .enumerate()
            .map(|(i, &pol)| {
                let (mut p, n) = evaluate(&d, s.lengths, s.ramp, s.method, pol.jones(), true)?;
                p.index = i;
                p.label = pol.label().into();
                p.relation = Relation::for_input(pol).map(|r| relation_residual(r, &p.gamma));
                Ok((p, n))
            })
            .collect()
    });
    let mut points = Vec::with_capacity(6);
    let mut notices = Vec::new();
    for r in rows {
        let (p, n) = r?;
        points.push(p);
        notices.extend(n);
    }
    Ok(SweepResult {
        axis: SweepAxis::Polarization,
        grid: d.grid,
        ell: s.device.ell,
        points,
        correlations: Vec::new(),
        peak_radii: Vec::new(),
        notices: dedup(notices),
    })
}

/// Gaussian mode and the vortex combination it drives, reduced to a
/// two-mode coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominantSubspace {
    /// `sqrt(|K_{G,+l}|^2 + |K_{G,-l}|^2)` (rad/m).
    pub kappa: f64,
    /// Diagonal mismatch `K_GG - K_{+l,+l}` (rad/m).
    pub delta: f64,
}

/// Dominant subspace of the `x'` Gaussian mode of `d`.
pub fn dominant_subspace(d: &Device) -> DominantSubspace {
    let k = &d.k.k;
    let kappa = (k[(0, 2)].norm_sqr() + k[(0, 3)].norm_sqr()).sqrt();
    DominantSubspace {
        kappa,
        delta: (k[(0, 0)] - k[(2, 2)]).re,
    }
}

/// Power transferred by a two-mode coupler of strength `kappa` and mismatch
/// `delta` over length `l`: `kappa^2/(kappa^2 + (delta/2)^2) sin^2(sqrt(...) l)`.
pub fn detuned_efficiency(kappa: f64, delta: f64, l: f64) -> f64 {
    let w2 = kappa * kappa + 0.25 * delta * delta;
    if w2 == 0.0 {
        return 0.0;
    }
    kappa * kappa / w2 * (w2.sqrt() * l).sin().powi(2)
}
