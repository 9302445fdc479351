//! Permittivity of laser-written tracks and rings, birefringence tensors and
//! the pulse-energy write model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_8128e-12;

/// Pixels of clearance required between a track footprint and the grid edge.
pub const FOOTPRINT_MARGIN_PX: usize = 3;

/// A track footprint extends this many 1/e half-widths from its centre.
pub const FOOTPRINT_WIDTHS: f64 = 3.0;

/// Elliptical Gaussian written track. Lengths in micrometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSpec {
    pub center: (f64, f64),
    /// 1/e half-widths along x and y.
    pub widths: (f64, f64),
    pub peak_delta_eps: f64,
}

impl TrackSpec {
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let u = (x - self.center.0) / self.widths.0;
        let v = (y - self.center.1) / self.widths.1;
        self.peak_delta_eps * (-(u * u) - v * v).exp()
    }

    pub fn footprint(&self) -> (f64, f64, f64, f64) {
        let hx = FOOTPRINT_WIDTHS * self.widths.0;
        let hy = FOOTPRINT_WIDTHS * self.widths.1;
        (
            self.center.0 - hx,
            self.center.0 + hx,
            self.center.1 - hy,
            self.center.1 + hy,
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.widths.0 > 0.0 && self.widths.1 > 0.0) {
            return Err(Error::Geometry(format!(
                "track widths must be positive, got {:?}",
                self.widths
            )));
        }
        if !(self.peak_delta_eps >= 0.0 && self.peak_delta_eps.is_finite()) {
            return Err(Error::Geometry(format!(
                "track peak permittivity change must be non-negative, got {}",
                self.peak_delta_eps
            )));
        }
        Ok(())
    }
}

/// Annulus of overlapping tracks. `track.center` is the ring centre; the
/// individual tracks sit on the circle of radius `radius` at angles
/// `2 pi k / 12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub radius: f64,
    pub n_tracks: usize,
    pub track: TrackSpec,
    pub center_scan: bool,
}

pub const RING_TRACKS: usize = 12;

impl RingSpec {
    pub fn center(&self) -> (f64, f64) {
        self.track.center
    }

    /// Tracks on the circle, followed by the central track when present.
    pub fn tracks(&self) -> Vec<TrackSpec> {
        let (cx, cy) = self.center();
        let mut out: Vec<TrackSpec> = (0..RING_TRACKS)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / RING_TRACKS as f64;
                TrackSpec {
                    center: (cx + self.radius * a.cos(), cy + self.radius * a.sin()),
                    ..self.track
                }
            })
            .collect();
        if self.center_scan {
            out.push(self.track);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.track.validate()?;
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Geometry(format!(
                "ring radius must be positive, got {}",
                self.radius
            )));
        }
        match (self.n_tracks, self.center_scan) {
            (12, false) | (13, true) => {}
            (n, c) => {
                return Err(Error::Geometry(format!(
                    "ring needs 12 tracks, or 13 with the centre scan (got {n}, centre scan {c})"
                )))
            }
        }
        let pitch = 2.0 * std::f64::consts::PI / RING_TRACKS as f64;
        let min_width = pitch * self.radius * (std::f64::consts::PI / 12.0).sin();
        let w = self.track.widths.0.min(self.track.widths.1);
        if w < min_width {
            return Err(Error::Geometry(format!(
                "adjacent ring tracks do not overlap: width {w:.3} um < {min_width:.3} um"
            )));
        }
        Ok(())
    }
}

/// Diagonal birefringence perturbation in the waveguide's own axes, rotated
/// by `theta` (rad) with respect to the image axes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BirefringenceTensor {
    pub d_eps_x: f64,
    pub d_eps_y: f64,
    pub d_eps_z: f64,
    pub theta: f64,
}

impl BirefringenceTensor {
    pub fn diagonal(d_eps_x: f64, d_eps_y: f64, d_eps_z: f64) -> Self {
        BirefringenceTensor {
            d_eps_x,
            d_eps_y,
            d_eps_z,
            theta: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.d_eps_x == 0.0 && self.d_eps_y == 0.0 && self.d_eps_z == 0.0
    }

    /// Transverse 2x2 block of the tensor expressed in image axes.
    pub fn transverse(&self) -> [[f64; 2]; 2] {
        let t = rotate_tensor(self, self.theta);
        [[t[0][0], t[0][1]], [t[1][0], t[1][1]]]
    }
}

pub type Tensor3 = [[f64; 3]; 3];

/// Axis rotation between the two waveguides.
pub fn rotation(theta: f64) -> Tensor3 {
    let (s, c) = theta.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn matmul(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(a: &Tensor3) -> Tensor3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// The diagonal tensor of `t` carried into axes rotated by `theta`:
/// `R(theta) D R(theta)^T`.
pub fn rotate_tensor(t: &BirefringenceTensor, theta: f64) -> Tensor3 {
    let d = [[t.d_eps_x, 0.0, 0.0], [0.0, t.d_eps_y, 0.0], [0.0, 0.0, t.d_eps_z]];
    rotate_full(&d, theta)
}

pub fn rotate_full(d: &Tensor3, theta: f64) -> Tensor3 {
    let r = rotation(theta);
    matmul(&matmul(&r, d), &transpose(&r))
}

/// Sampled relative permittivity of one written structure on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermittivityProfile {
    pub grid: GridSpec,
    pub eps_s: f64,
    /// Isotropic written change, one value per pixel.
    pub eps_iso: Vec<f64>,
    /// Peak written change used to normalize the birefringence footprint.
    pub peak_delta_eps: f64,
    pub d_eps: BirefringenceTensor,
}

impl PermittivityProfile {
    pub fn uniform(grid: GridSpec, eps_s: f64) -> Self {
        PermittivityProfile {
            grid,
            eps_s,
            eps_iso: vec![0.0; grid.len()],
            peak_delta_eps: 0.0,
            d_eps: BirefringenceTensor::default(),
        }
    }

    pub fn max_iso(&self) -> f64 {
        self.eps_iso.iter().cloned().fold(0.0, f64::max)
    }

    /// Written-region footprint `eps_iso / peak`, the spatial weight of the
    /// birefringence tensor.
    pub fn footprint_weight(&self) -> Vec<f64> {
        if self.peak_delta_eps > 0.0 {
            self.eps_iso.iter().map(|v| v / self.peak_delta_eps).collect()
        } else {
            vec![0.0; self.eps_iso.len()]
        }
    }

    /// Integral of `eps_iso` over the grid (um^2).
    pub fn integral(&self) -> f64 {
        crate::numeric::pairwise_sum(&self.eps_iso) * self.grid.cell_area()
    }

    pub fn with_birefringence(mut self, d_eps: BirefringenceTensor) -> Self {
        self.d_eps = d_eps;
        self
    }

    /// Largest boundary value relative to the peak.
    pub fn boundary_fraction(&self) -> f64 {
        let g = &self.grid;
        let peak = self.max_iso();
        if peak == 0.0 {
            return 0.0;
        }
        let mut m: f64 = 0.0;
        for ix in 0..g.nx {
            m = m.max(self.eps_iso[g.idx(ix, 0)]);
            m = m.max(self.eps_iso[g.idx(ix, g.ny - 1)]);
        }
        for iy in 0..g.ny {
            m = m.max(self.eps_iso[g.idx(0, iy)]);
            m = m.max(self.eps_iso[g.idx(g.nx - 1, iy)]);
        }
        m / peak
    }
}

fn check_inside(grid: &GridSpec, track: &TrackSpec) -> Result<()> {
    let (x0, x1, y0, y1) = track.footprint();
    if grid.contains_box(x0, x1, y0, y1, FOOTPRINT_MARGIN_PX) {
        Ok(())
    } else {
        Err(Error::Geometry(format!(
            "track at ({:.3}, {:.3}) um does not fit inside the grid",
            track.center.0, track.center.1
        )))
    }
}

pub fn gaussian_track_profile(grid: &GridSpec, track: &TrackSpec, eps_s: f64) -> Result<PermittivityProfile> {
    track.validate()?;
    check_inside(grid, track)?;
    Ok(PermittivityProfile {
        grid: *grid,
        eps_s,
        eps_iso: grid.sample(|x, y| track.value_at(x, y)),
        peak_delta_eps: track.peak_delta_eps,
        d_eps: BirefringenceTensor::default(),
    })
}

/// Pixelwise maximum over the ring tracks.
pub fn ring_profile(grid: &GridSpec, ring: &RingSpec, eps_s: f64) -> Result<PermittivityProfile> {
    ring.validate()?;
    let tracks = ring.tracks();
    for t in &tracks {
        check_inside(grid, t)?;
    }
    let eps_iso = grid.sample(|x, y| tracks.iter().map(|t| t.value_at(x, y)).fold(0.0, f64::max));
    Ok(PermittivityProfile {
        grid: *grid,
        eps_s,
        eps_iso,
        peak_delta_eps: ring.track.peak_delta_eps,
        d_eps: BirefringenceTensor::default(),
    })
}

/// Laser writing parameters, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriteParams {
    /// Single-pulse energy (J).
    pub e_sp: f64,
    /// Writing speed (m/s).
    pub v: f64,
    /// Pulse repetition rate (Hz).
    pub f_rp: f64,
    /// Spot waist (m).
    pub w0: f64,
    pub eta: f64,
    pub n_s: f64,
    /// Modified propagation constant (rad/m).
    pub k0_prime: f64,
    /// Residual propagation-constant shift (rad/m).
    pub xi: f64,
}

impl WriteParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("e_sp", self.e_sp),
            ("v", self.v),
            ("f_rp", self.f_rp),
            ("w0", self.w0),
            ("eta", self.eta),
            ("n_s", self.n_s),
            ("k0_prime", self.k0_prime),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Model(format!(
                    "write parameter {name} must be positive, got {v}"
                )));
            }
        }
        if !self.xi.is_finite() {
            return Err(Error::Model("write parameter xi must be finite".into()));
        }
        Ok(())
    }

    /// Index change coefficient `eta f / (2 eps0 n_s w0 v)` in 1/J.
    fn index_per_joule(&self) -> f64 {
        self.eta * self.f_rp / (2.0 * EPS0 * self.n_s * self.w0 * self.v)
    }

    /// Average written permittivity change `eta E f / (eps0 w0 v)`.
    pub fn mean_delta_eps(&self) -> f64 {
        2.0 * self.n_s * self.index_per_joule() * self.e_sp
    }

    /// Propagation constant of a guide written at pulse energy `e_sp` (rad/m).
    pub fn beta_at(&self, e_sp: f64) -> f64 {
        self.k0_prime * (self.n_s + self.index_per_joule() * e_sp)
    }
}

/// Linearized propagation-constant change caused by a pulse-energy change
/// `de` (J) and writing-speed change `dv` (m/s), plus the residual `xi`.
pub fn delta_beta_from_write(p: &WriteParams, de: f64, dv: f64) -> Result<f64> {
    p.validate()?;
    if de.abs() >= p.e_sp || dv.abs() >= p.v {
        return Err(Error::Contract(format!(
            "write perturbation out of band: |dE|={:.3e} J (E_sp {:.3e}), |dv|={:.3e} m/s (v {:.3e})",
            de.abs(),
            p.e_sp,
            dv.abs(),
            p.v
        )));
    }
    let a = p.k0_prime * p.index_per_joule();
    Ok(a * de - a * p.e_sp / p.v * dv + p.xi)
}

/// Track written with pulse energy `E_sp + de`: peak scales by `1 + de/E_sp`.
pub fn perturbation_from_energy(base: &TrackSpec, p: &WriteParams, de: f64) -> Result<TrackSpec> {
    p.validate()?;
    let scale = energy_scale(p, de);
    let peak = base.peak_delta_eps * scale;
    if !(peak > 0.0) {
        return Err(Error::Model(format!(
            "pulse energy change {de:.3e} J leaves a non-positive permittivity change"
        )));
    }
    Ok(TrackSpec {
        peak_delta_eps: peak,
        ..*base
    })
}

pub fn energy_scale(p: &WriteParams, de: f64) -> f64 {
    1.0 + de / p.e_sp
}
