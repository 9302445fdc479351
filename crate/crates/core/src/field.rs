//! Output-facet fields and the measurements made on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chip::GammaCoefficients;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::modes::ModeField;
use crate::numeric::{pairwise_csum_by, pairwise_sum_by, J};

/// Transverse field with two polarization components in image axes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub ex: Vec<Complex64>,
    pub ey: Vec<Complex64>,
}

impl VectorField {
    pub fn power(&self) -> f64 {
        pairwise_sum_by(0, self.ex.len(), |i| self.ex[i].norm_sqr() + self.ey[i].norm_sqr()) * self.grid.cell_area()
    }

    /// Integrated coherency matrix `[[<|Ex|^2>, <Ex Ey*>], [<Ey Ex*>, <|Ey|^2>]]`.
    pub fn coherency(&self) -> [[Complex64; 2]; 2] {
        let n = self.ex.len();
        let a = self.grid.cell_area();
        let xx = pairwise_sum_by(0, n, |i| self.ex[i].norm_sqr()) * a;
        let yy = pairwise_sum_by(0, n, |i| self.ey[i].norm_sqr()) * a;
        let xy = pairwise_csum_by(0, n, |i| self.ex[i] * self.ey[i].conj()) * a;
        [[Complex64::new(xx, 0.0), xy], [xy.conj(), Complex64::new(yy, 0.0)]]
    }

    pub fn scaled(&self, s: Complex64) -> VectorField {
        VectorField {
            grid: self.grid,
            ex: self.ex.iter().map(|v| v * s).collect(),
            ey: self.ey.iter().map(|v| v * s).collect(),
        }
    }
}

/// `1 - (largest power fraction in any single uniform polarization)`.
pub fn vectorness_index(f: &VectorField) -> f64 {
    let c = f.coherency();
    let tr = c[0][0].re + c[1][1].re;
    if tr <= 0.0 {
        return 0.0;
    }
    let d = c[0][0].re - c[1][1].re;
    let lmax = 0.5 * (tr + (d * d + 4.0 * c[0][1].norm_sqr()).sqrt());
    (1.0 - lmax / tr).max(0.0)
}

/// `E_x = g_x+ E_+ + g_x- E_-`, `E_y` likewise. `modes` are
/// `[x_l, x_-l, y_l, y_-l]`.
pub fn synthesize_field(gamma: &GammaCoefficients, modes: &[ModeField; 4]) -> Result<VectorField> {
    let grid = modes[0].grid;
    for m in &modes[1..] {
        grid.ensure_same(&m.grid)?;
    }
    let g = gamma.as_array();
    let n = grid.len();
    let mut ex = vec![Complex64::new(0.0, 0.0); n];
    let mut ey = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        ex[i] = g[0] * modes[0].profile[i] + g[1] * modes[1].profile[i];
        ey[i] = g[2] * modes[2].profile[i] + g[3] * modes[3].profile[i];
    }
    Ok(VectorField { grid, ex, ey })
}

/// Linear analyzer at angle `psi` from the horizontal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionAxis {
    pub psi: f64,
}

impl ProjectionAxis {
    pub const H: ProjectionAxis = ProjectionAxis { psi: 0.0 };
    pub const D: ProjectionAxis = ProjectionAxis {
        psi: std::f64::consts::FRAC_PI_4,
    };
    pub const V: ProjectionAxis = ProjectionAxis {
        psi: std::f64::consts::FRAC_PI_2,
    };
    pub const A: ProjectionAxis = ProjectionAxis {
        psi: 3.0 * std::f64::consts::FRAC_PI_4,
    };

    pub fn new(psi: f64) -> Self {
        ProjectionAxis { psi }
    }

    pub fn jones(&self) -> [f64; 2] {
        [self.psi.cos(), self.psi.sin()]
    }

    pub fn orthogonal(&self) -> Self {
        ProjectionAxis {
            psi: self.psi + std::f64::consts::FRAC_PI_2,
        }
    }
}

pub fn project_polarization(f: &VectorField, axis: ProjectionAxis) -> Vec<Complex64> {
    let [c, s] = axis.jones();
    f.ex.iter().zip(&f.ey).map(|(x, y)| x * c + y * s).collect()
}

pub fn scalar_power(grid: &GridSpec, field: &[Complex64]) -> f64 {
    pairwise_sum_by(0, field.len(), |i| field[i].norm_sqr()) * grid.cell_area()
}

pub fn intensity_image(f: &VectorField) -> Vec<f64> {
    f.ex.iter()
        .zip(&f.ey)
        .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
        .collect()
}

pub fn scalar_intensity(field: &[Complex64]) -> Vec<f64> {
    field.iter().map(|v| v.norm_sqr()).collect()
}

/// `sum |gamma|^2 / input power`.
pub fn conversion_efficiency(gamma: &GammaCoefficients, input_power: f64) -> Result<f64> {
    if !(input_power > 0.0) {
        return Err(Error::Contract(format!(
            "input power must be positive, got {input_power}"
        )));
    }
    Ok(gamma.power() / input_power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extinction {
    Finite(f64),
    Infinite,
}

impl Extinction {
    /// Value in dB with the infinite case mapped to `cap`.
    pub fn capped(&self, cap: f64) -> f64 {
        match self {
            Extinction::Finite(v) => v.min(cap),
            Extinction::Infinite => cap,
        }
    }
}

impl std::fmt::Display for Extinction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extinction::Finite(v) => write!(f, "{v:.3}"),
            Extinction::Infinite => write!(f, "inf"),
        }
    }
}

/// `10 log10(pa / pb)`.
pub fn extinction_ratio(pa: f64, pb: f64) -> Result<Extinction> {
    if !(pa >= 0.0 && pb >= 0.0) {
        return Err(Error::Contract(format!("powers must be >= 0, got {pa} and {pb}")));
    }
    if pb == 0.0 {
        if pa == 0.0 {
            return Err(Error::Contract("both powers are zero".into()));
        }
        return Ok(Extinction::Infinite);
    }
    Ok(Extinction::Finite(10.0 * (pa / pb).log10()))
}

/// Extinction between the analyzer `axis` and its orthogonal partner.
pub fn axis_extinction(f: &VectorField, axis: ProjectionAxis) -> Result<Extinction> {
    let pa = scalar_power(&f.grid, &project_polarization(f, axis));
    let pb = scalar_power(&f.grid, &project_polarization(f, axis.orthogonal()));
    extinction_ratio(pa, pb)
}

/// Co-propagating reference beam for interference images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBeam {
    /// 1/e field radius (um).
    pub waist_um: f64,
    /// Wavefront curvature radius (m); infinite for a plane wavefront.
    pub curvature_m: f64,
    /// Tilt angles about y and x (rad).
    pub tilt: (f64, f64),
    pub phase: f64,
    /// Peak amplitude relative to the peak of the projected signal.
    pub amplitude: f64,
}

impl Default for ReferenceBeam {
    fn default() -> Self {
        ReferenceBeam {
            waist_um: 12.0,
            curvature_m: 10e-6,
            tilt: (0.0, 0.0),
            phase: 0.0,
            amplitude: 1.0,
        }
    }
}

impl ReferenceBeam {
    pub fn validate(&self) -> Result<()> {
        if !(self.waist_um > 0.0) {
            return Err(Error::Contract(format!(
                "reference waist must be > 0, got {}",
                self.waist_um
            )));
        }
        if self.curvature_m == 0.0 {
            return Err(Error::Contract("reference curvature radius must be nonzero".into()));
        }
        Ok(())
    }

    /// Samples on `grid` about `center` with free-space wavenumber `k0`.
    pub fn sample(&self, grid: &GridSpec, center: (f64, f64), k0: f64, peak: f64) -> Vec<Complex64> {
        let k0_um = k0 * 1e-6;
        let rc_um = self.curvature_m * 1e6;
        grid.sample(|x, y| {
            let (dx, dy) = (x - center.0, y - center.1);
            let r2 = dx * dx + dy * dy;
            let curv = if rc_um.is_finite() {
                k0_um * r2 / (2.0 * rc_um)
            } else {
                0.0
            };
            let tilt = k0_um * (self.tilt.0.sin() * dx + self.tilt.1.sin() * dy);
            let amp = self.amplitude * peak * (-r2 / (self.waist_um * self.waist_um)).exp();
            amp * (J * (self.phase - curv + tilt)).exp()
        })
    }
}

pub fn field_centroid(grid: &GridSpec, intensity: &[f64]) -> (f64, f64) {
    let w = pairwise_sum_by(0, intensity.len(), |i| intensity[i]);
    if w == 0.0 {
        return (0.0, 0.0);
    }
    let sx = pairwise_sum_by(0, intensity.len(), |i| intensity[i] * grid.coords(i).0);
    let sy = pairwise_sum_by(0, intensity.len(), |i| intensity[i] * grid.coords(i).1);
    (sx / w, sy / w)
}

/// `|project(f, axis) + E_ref|^2`.
pub fn interfere_reference(
    f: &VectorField,
    reference: &ReferenceBeam,
    axis: ProjectionAxis,
    k0: f64,
) -> Result<Vec<f64>> {
    reference.validate()?;
    let s = project_polarization(f, axis);
    let peak = s.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let c = field_centroid(&f.grid, &scalar_intensity(&s));
    let r = reference.sample(&f.grid, c, k0, peak);
    Ok(s.iter().zip(&r).map(|(a, b)| (a + b).norm_sqr()).collect())
}

fn bilinear_c(grid: &GridSpec, re: &[f64], im: &[f64], x: f64, y: f64) -> Complex64 {
    Complex64::new(grid.bilinear(re, x, y), grid.bilinear(im, x, y))
}

/// Largest radius about `c` whose circle stays inside the grid.
fn max_radius(grid: &GridSpec, c: (f64, f64)) -> f64 {
    let r = (c.0 - grid.origin.0)
        .min(grid.x_max() - c.0)
        .min(c.1 - grid.origin.1)
        .min(grid.y_max() - c.1);
    (r - grid.dx.max(grid.dy)).max(0.0)
}

/// Radius of the maximum azimuthally averaged intensity about `c`.
pub fn crest_radius(grid: &GridSpec, intensity: &[f64], c: (f64, f64)) -> f64 {
    let rmax = max_radius(grid, c);
    let step = 0.5 * grid.dx.min(grid.dy);
    let n_ang = 256;
    let mut best = (f64::MIN, step);
    let mut r = step;
    while r <= rmax {
        let m: f64 = (0..n_ang)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n_ang as f64;
                grid.bilinear(intensity, c.0 + r * a.cos(), c.1 + r * a.sin())
            })
            .sum();
        if m > best.0 {
            best = (m, r);
        }
        r += step;
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeMeasurement {
    pub charge: i32,
    /// Phase circulation divided by 2 pi before rounding.
    pub raw: f64,
    pub residual: f64,
    pub radius: f64,
    pub center: (f64, f64),
}

pub const CHARGE_SAMPLES: usize = 720;
const SINGULAR_LEVEL: f64 = 1e-9;
const SINGULAR_FRACTION: f64 = 0.10;

/// Winding number of a scalar field on the intensity-crest circle about the
/// intensity centroid.
pub fn topological_charge(grid: &GridSpec, field: &[Complex64]) -> Result<ChargeMeasurement> {
    let intensity = scalar_intensity(field);
    let c = field_centroid(grid, &intensity);
    let r = crest_radius(grid, &intensity, c);
    charge_on_circle(grid, field, c, r)
}

pub fn charge_on_circle(grid: &GridSpec, field: &[Complex64], c: (f64, f64), r: f64) -> Result<ChargeMeasurement> {
    let re: Vec<f64> = field.iter().map(|v| v.re).collect();
    let im: Vec<f64> = field.iter().map(|v| v.im).collect();
    let amax = field.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor = SINGULAR_LEVEL * amax;
    let n = CHARGE_SAMPLES;
    let samples: Vec<Complex64> = (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            bilinear_c(grid, &re, &im, c.0 + r * a.cos(), c.1 + r * a.sin())
        })
        .collect();
    let low = samples.iter().filter(|v| v.norm() < floor).count();
    let fraction = low as f64 / n as f64;
    // a nodal line crossing between two samples
    let crossing = (0..n).any(|k| {
        let (a, b) = (samples[k], samples[(k + 1) % n]);
        segment_distance_to_origin(a, b) < floor
    });
    if amax == 0.0 || fraction > SINGULAR_FRACTION || crossing {
        return Err(Error::SingularCircle {
            fraction: 100.0 * fraction,
        });
    }
    let mut total = 0.0;
    for k in 0..n {
        let d = (samples[(k + 1) % n] / samples[k]).arg();
        total += d;
    }
    let raw = total / (2.0 * std::f64::consts::PI);
    let charge = raw.round() as i32;
    Ok(ChargeMeasurement {
        charge,
        raw,
        residual: (raw - charge as f64).abs(),
        radius: r,
        center: c,
    })
}

fn segment_distance_to_origin(a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return a.norm();
    }
    let t = (-(a.re * d.re + a.im * d.im) / l2).clamp(0.0, 1.0);
    (a + d * t).norm()
}

/// Bilinear samples of `image` along the ray at angle `phi0` from the
/// intensity centroid to the grid edge, step `dx/2`.
pub fn radial_profile(grid: &GridSpec, image: &[f64], phi0: f64) -> Vec<(f64, f64)> {
    let c = field_centroid(grid, image);
    let step = 0.5 * grid.dx;
    let (s, co) = phi0.sin_cos();
    let mut out = Vec::new();
    let mut r = 0.0;
    loop {
        let (x, y) = (c.0 + r * co, c.1 + r * s);
        if x < grid.origin.0 || x > grid.x_max() || y < grid.origin.1 || y > grid.y_max() {
            break;
        }
        out.push((r, grid.bilinear(image, x, y)));
        r += step;
    }
    out
}

/// Radius of the largest sample of a radial profile.
pub fn profile_peak(profile: &[(f64, f64)]) -> (f64, f64) {
    profile
        .iter()
        .cloned()
        .fold((0.0, f64::MIN), |b, p| if p.1 > b.1 { p } else { b })
}

/// Orientation (mod pi) of the brightest direction of an image on its
/// crest circle, refined by a parabola through the neighbouring samples.
pub fn lobe_axis(grid: &GridSpec, image: &[f64]) -> f64 {
    let c = field_centroid(grid, image);
    let r = crest_radius(grid, image, c);
    let n = 2048;
    let vals: Vec<f64> = (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            grid.bilinear(image, c.0 + r * a.cos(), c.1 + r * a.sin())
        })
        .collect();
    let k = (0..n).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let (ym, y0, yp) = (vals[(k + n - 1) % n], vals[k], vals[(k + 1) % n]);
    let den = ym - 2.0 * y0 + yp;
    let off = if den != 0.0 { 0.5 * (ym - yp) / den } else { 0.0 };
    let a = 2.0 * std::f64::consts::PI * (k as f64 + off) / n as f64;
    a.rem_euclid(std::f64::consts::PI)
}

/// Distance between two angles modulo pi.
pub fn axis_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}

/// Number of fringe periods of an interference image around a circle about
/// `c`, from the winding of the analytic signal of the azimuthal intensity.
pub fn spiral_arms(grid: &GridSpec, image: &[f64], c: (f64, f64), r: f64) -> Result<usize> {
    let n = 512;
    let vals: Vec<f64> = (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            grid.bilinear(image, c.0 + r * a.cos(), c.1 + r * a.sin())
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    // positive-frequency part of the azimuthal signal
    let harmonics: Vec<Complex64> = (1..n / 2)
        .map(|m| {
            vals.iter()
                .enumerate()
                .map(|(k, v)| {
                    let a = -2.0 * std::f64::consts::PI * (m * k) as f64 / n as f64;
                    (v - mean) * Complex64::from_polar(1.0, a)
                })
                .sum::<Complex64>()
        })
        .collect();
    let analytic: Vec<Complex64> = (0..n)
        .map(|k| {
            harmonics
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    let a = 2.0 * std::f64::consts::PI * ((i + 1) * k) as f64 / n as f64;
                    h * Complex64::from_polar(1.0, a)
                })
                .sum()
        })
        .collect();
    let amax = analytic.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if amax == 0.0 {
        return Ok(0);
    }
    if analytic.iter().any(|v| v.norm() < 1e-9 * amax) {
        return Err(Error::SingularCircle { fraction: 0.0 });
    }
    let total: f64 = (0..n).map(|k| (analytic[(k + 1) % n] / analytic[k]).arg()).sum();
    Ok((total / (2.0 * std::f64::consts::PI)).round().abs() as usize)
}

/// Fringe count of an interference image on the crest circle of the signal.
pub fn arm_count(grid: &GridSpec, image: &[f64], signal: &[Complex64]) -> Result<usize> {
    let si = scalar_intensity(signal);
    let c = field_centroid(grid, &si);
    let r = crest_radius(grid, &si, c);
    spiral_arms(grid, image, c, r)
}

/// Leakage amplitude `a_x b_y (e^{j phi_x} - e^{j phi_y})` between the
/// polarization eigenmodes of a birefringent guide.
pub fn birefringent_leakage(a_x: Complex64, b_y: Complex64, phi_x: f64, phi_y: f64) -> Result<Complex64> {
    let p = a_x.norm_sqr() + b_y.norm_sqr();
    if (p - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "leakage amplitudes must have unit power, got {p}"
        )));
    }
    Ok(a_x * b_y * ((J * phi_x).exp() - (J * phi_y).exp()))
}

/// Least-squares fit of `A sin(2 psi + phi0) + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineFit {
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    /// The data carry no angular variation to fit.
    pub unconstrained: bool,
}

pub fn fit_sine(psi: &[f64], y: &[f64]) -> Result<SineFit> {
    if psi.len() != y.len() {
        return Err(Error::Contract("angle and value lists differ in length".into()));
    }
    let mut distinct: Vec<f64> = psi.iter().map(|p| p.rem_euclid(std::f64::consts::PI)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if distinct.len() < 8 {
        return Err(Error::Contract(format!(
            "sine fit needs at least 8 distinct angles, got {}",
            distinct.len()
        )));
    }
    // normal equations on [sin 2psi, cos 2psi, 1]
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (p, v) in psi.iter().zip(y) {
        let row = [(2.0 * p).sin(), (2.0 * p).cos(), 1.0];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * v;
        }
    }
    let sol = solve3(ata, atb).ok_or_else(|| Error::Contract("sine fit is singular".into()))?;
    let (a, b, off) = (sol[0], sol[1], sol[2]);
    let amplitude = (a * a + b * b).sqrt();
    let phase = b.atan2(a);
    let rms = (psi
        .iter()
        .zip(y)
        .map(|(p, v)| (amplitude * (2.0 * p + phase).sin() + off - v).powi(2))
        .sum::<f64>()
        / psi.len() as f64)
        .sqrt();
    let lo = y.iter().cloned().fold(f64::MAX, f64::min);
    let hi = y.iter().cloned().fold(f64::MIN, f64::max);
    let unconstrained = hi - lo <= 1e-9 * hi.abs().max(1.0);
    Ok(SineFit {
        amplitude: if unconstrained { 0.0 } else { amplitude },
        phase: if unconstrained { 0.0 } else { phase },
        offset: off,
        residual: rms,
        unconstrained,
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..3 {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..3 {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

/// Cap applied to the polarization extinction when the orthogonal power
/// vanishes.
pub const EXTINCTION_CAP_DB: f64 = 120.0;

/// Extinction between the analyzer parallel to the input polarization `psi`
/// and the orthogonal one, computed from the output coefficients.
pub fn preserved_extinction(gamma: &GammaCoefficients, psi: f64) -> f64 {
    let (c, s) = (psi.cos(), psi.sin());
    let par = (gamma.x_plus * c + gamma.y_plus * s).norm_sqr() + (gamma.x_minus * c + gamma.y_minus * s).norm_sqr();
    let perp = (-gamma.x_plus * s + gamma.y_plus * c).norm_sqr() + (-gamma.x_minus * s + gamma.y_minus * c).norm_sqr();
    let total = par + perp;
    if total == 0.0 {
        return 0.0;
    }
    let perp = perp.max(1e-12 * total);
    (10.0 * (par / perp).log10()).min(EXTINCTION_CAP_DB)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionCurve {
    pub psi: Vec<f64>,
    pub extinction_db: Vec<f64>,
    pub fit: SineFit,
}

impl ExtinctionCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("psi_rad,extinction_db,fit_db\n");
        for (p, e) in self.psi.iter().zip(&self.extinction_db) {
            let f = self.fit.amplitude * (2.0 * p + self.fit.phase).sin() + self.fit.offset;
            s.push_str(&format!("{p},{e},{f}\n"));
        }
        s
    }
}

/// Output extinction for linear inputs at each angle in `psi`, with a sine
/// fit. `run` maps an input Jones vector to the output coefficients.
pub fn extinction_vs_polarization<F>(psi: &[f64], run: F) -> Result<ExtinctionCurve>
where
    F: Fn([Complex64; 2]) -> Result<GammaCoefficients>,
{
    let mut ext = Vec::with_capacity(psi.len());
    for &p in psi {
        let g = run([Complex64::new(p.cos(), 0.0), Complex64::new(p.sin(), 0.0)])?;
        ext.push(preserved_extinction(&g, p));
    }
    let fit = fit_sine(psi, &ext)?;
    Ok(ExtinctionCurve {
        psi: psi.to_vec(),
        extinction_db: ext,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::Polarization;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::covering(-8.0, 8.0, -8.0, 8.0, 0.1).unwrap()
    }

    /// Analytic vortex `r^|l| exp(-r^2/w^2) e^{j l phi}`, unit power.
    fn vortex(g: &GridSpec, ell: i32, pol: Polarization) -> ModeField {
        let mut p: Vec<Complex64> = g.sample(|x, y| {
            let r = (x * x + y * y).sqrt();
            let phi = y.atan2(x);
            Complex64::from_polar(r.powi(ell.abs()) * (-r * r / 4.0).exp(), ell as f64 * phi)
        });
        let n = (p.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_area()).sqrt();
        p.iter_mut().for_each(|v| *v /= n);
        ModeField {
            grid: *g,
            beta: 1.0,
            n_eff: 1.0,
            profile: p,
            pol,
            oam: ell,
            norm: 1.0,
            residual: 0.0,
        }
    }

    fn ring_modes(g: &GridSpec, ell: i32) -> [ModeField; 4] {
        [
            vortex(g, ell, Polarization::X),
            vortex(g, -ell, Polarization::X),
            vortex(g, ell, Polarization::Y),
            vortex(g, -ell, Polarization::Y),
        ]
    }

    fn gamma(v: [Complex64; 4]) -> GammaCoefficients {
        GammaCoefficients::from_slice(&v)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const Z: Complex64 = Complex64 { re: 0.0, im: 0.0 };

    #[test]
    fn single_component_gives_x_polarized_donut() {
        let g = grid();
        let m = ring_modes(&g, 1);
        let f = synthesize_field(&gamma([c(1.0, 0.0), Z, Z, Z]), &m).unwrap();
        assert!(f.ey.iter().all(|v| v.norm() == 0.0));
        assert!((f.power() - 1.0).abs() < 1e-10);
        let q = topological_charge(&g, &f.ex).unwrap();
        assert_eq!(q.charge, 1);
        let prof = radial_profile(&g, &intensity_image(&f), 0.3);
        let peak = profile_peak(&prof);
        assert!(prof[0].1 < 0.01 * peak.1);
        assert!((peak.0 - 2.0f64.sqrt()).abs() < 0.1);
    }

    #[test]
    fn equal_superposition_gives_lobes_along_x() {
        let g = grid();
        let m = ring_modes(&g, 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let f = synthesize_field(&gamma([c(s, 0.0), c(s, 0.0), Z, Z]), &m).unwrap();
        let img = intensity_image(&f);
        assert!(axis_difference(lobe_axis(&g, &img), 0.0) < 0.01);
        let along = profile_peak(&radial_profile(&g, &img, 0.0)).1;
        let across = profile_peak(&radial_profile(&g, &img, PI / 2.0)).1;
        assert!(along / across > 10.0);
        assert!(matches!(
            topological_charge(&g, &f.ex),
            Err(Error::SingularCircle { .. })
        ));
    }

    #[test]
    fn charges_of_constructed_vortices() {
        let g = grid();
        for ell in [-3, -2, -1, 1, 2, 3] {
            let m = vortex(&g, ell, Polarization::X);
            let q = topological_charge(&g, &m.profile).unwrap();
            assert_eq!(q.charge, ell);
            assert!(q.residual < 1e-9);
        }
    }

    #[test]
    fn radial_beam_lobes_follow_the_analyzer() {
        let g = grid();
        let m = ring_modes(&g, 1);
        let h = 0.5;
        // E = f(r)(cos phi, sin phi): x from (e^{j phi} + e^{-j phi})/2, y from -j(...)/2
        let f = synthesize_field(&gamma([c(h, 0.0), c(h, 0.0), c(0.0, -h), c(0.0, h)]), &m).unwrap();
        for k in 0..8 {
            let psi = PI * k as f64 / 8.0;
            let p = project_polarization(&f, ProjectionAxis::new(psi));
            let ax = lobe_axis(&g, &scalar_intensity(&p));
            assert!(axis_difference(ax, psi) < 0.02, "psi {psi} lobe {ax}");
        }
        assert!(vectorness_index(&f) > 0.49);
    }

    #[test]
    fn projections_split_power() {
        let g = grid();
        let m = ring_modes(&g, 2);
        let f = synthesize_field(&gamma([c(0.3, 0.1), c(-0.2, 0.5), c(0.0, 0.4), c(0.6, -0.1)]), &m).unwrap();
        let total = f.power();
        assert!((total - 0.3f64.hypot(0.1).powi(2) - 0.2f64.hypot(0.5).powi(2) - 0.16 - 0.37).abs() < 1e-10);
        for psi in [0.0, 0.3, PI / 4.0] {
            let a = ProjectionAxis::new(psi);
            let pa = scalar_power(&g, &project_polarization(&f, a));
            let pb = scalar_power(&g, &project_polarization(&f, a.orthogonal()));
            assert!((pa + pb - total).abs() < 1e-12);
        }
        let x_only = synthesize_field(&gamma([c(1.0, 0.0), Z, Z, Z]), &m).unwrap();
        assert!(scalar_power(&g, &project_polarization(&x_only, ProjectionAxis::V)) < 1e-30);
    }

    #[test]
    fn global_phase_leaves_images_identical() {
        let g = grid();
        let m = ring_modes(&g, 1);
        let gm = gamma([c(0.3, 0.1), c(-0.2, 0.5), c(0.0, 0.4), c(0.6, -0.1)]);
        let a = intensity_image(&synthesize_field(&gm, &m).unwrap());
        let b = intensity_image(&synthesize_field(&gm.scaled(Complex64::from_polar(1.0, 0.7)), &m).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn extinction_definitions() {
        assert_eq!(extinction_ratio(2.0, 2.0).unwrap(), Extinction::Finite(0.0));
        match extinction_ratio(10.47, 1.0).unwrap() {
            Extinction::Finite(v) => assert!((v - 10.2).abs() < 0.005),
            _ => panic!(),
        }
        assert_eq!(extinction_ratio(1.0, 0.0).unwrap(), Extinction::Infinite);
        assert!(extinction_ratio(-1.0, 1.0).is_err());
        let g = gamma([c(0.6, 0.0), Z, c(0.0, 0.8), Z]);
        assert!((conversion_efficiency(&g, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interference_arm_count_matches_charge() {
        let g = grid();
        for ell in [-3, -2, -1, 1, 2, 3] {
            let m = ring_modes(&g, ell);
            let f = synthesize_field(&gamma([c(1.0, 0.0), Z, Z, Z]), &m).unwrap();
            let img = interfere_reference(&f, &ReferenceBeam::default(), ProjectionAxis::H, 2.0 * PI / 780e-9).unwrap();
            assert_eq!(arm_count(&g, &img, &f.ex).unwrap(), ell.unsigned_abs() as usize);
        }
        // no reference: plain intensity
        let m = ring_modes(&g, 1);
        let f = synthesize_field(&gamma([c(1.0, 0.0), Z, Z, Z]), &m).unwrap();
        let r = ReferenceBeam {
            amplitude: 0.0,
            ..ReferenceBeam::default()
        };
        let img = interfere_reference(&f, &r, ProjectionAxis::H, 8e6).unwrap();
        assert_eq!(img, intensity_image(&f));
    }

    #[test]
    fn leakage_cases() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(
            birefringent_leakage(c(s, 0.0), c(s, 0.0), 0.4, 0.4).unwrap().norm(),
            0.0
        );
        assert_eq!(birefringent_leakage(Z, c(1.0, 0.0), 0.0, 1.0).unwrap().norm(), 0.0);
        let v = birefringent_leakage(c(s, 0.0), c(s, 0.0), PI, 0.0).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!(birefringent_leakage(c(1.0, 0.0), c(1.0, 0.0), 0.0, 0.0).is_err());
    }

    #[test]
    fn sine_fit_recovers_noisy_parameters() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (a, p0, b) = (3.0, 0.7, 8.0);
        let psi: Vec<f64> = (0..24).map(|k| PI * k as f64 / 24.0).collect();
        let y: Vec<f64> = psi
            .iter()
            .map(|p| {
                let v = a * (2.0 * p + p0).sin() + b;
                v * (1.0 + 0.01 * (2.0 * rng.gen::<f64>() - 1.0))
            })
            .collect();
        let f = fit_sine(&psi, &y).unwrap();
        assert!((f.amplitude - a).abs() < 0.05 * a);
        assert!((f.phase - p0).abs() < 0.05 * p0);
        assert!((f.offset - b).abs() < 0.05 * b);
        assert!(!f.unconstrained);
        let flat = fit_sine(&psi, &vec![5.0; psi.len()]).unwrap();
        assert!(flat.unconstrained && flat.amplitude == 0.0);
        assert!(fit_sine(&psi[..5], &y[..5]).is_err());
    }

    proptest! {
        #[test]
        fn parseval_for_any_gamma(v in prop::collection::vec(-1.0f64..1.0, 8), psi in 0.0f64..PI) {
            let g = GridSpec::covering(-6.0, 6.0, -6.0, 6.0, 0.25).unwrap();
            let m = ring_modes(&g, 1);
            let gm = gamma([c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])]);
            let f = synthesize_field(&gm, &m).unwrap();
            let a = ProjectionAxis::new(psi);
            let pa = scalar_power(&g, &project_polarization(&f, a));
            let pb = scalar_power(&g, &project_polarization(&f, a.orthogonal()));
            prop_assert!((pa + pb - f.power()).abs() < 1e-12 * f.power().max(1e-300));
        }
    }
}
