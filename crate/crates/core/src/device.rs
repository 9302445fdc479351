//! A complete two-waveguide emitter: geometry, profiles on a shared grid,
//! modes and coupling matrices.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chip::{propagate_chip, ChipOutput, Ramp, SegmentPlan};
use crate::coupling::{assemble_from_overlaps, butt_matrix, CouplingMatrix, ModeBasis, OverlapSet};
use crate::error::{Error, Result};
use crate::evolve::{AmplitudeState, Method};
use crate::grid::GridSpec;
use crate::modes::{count_for_order, find_doublet, solve_modes_with, ModeField, SolverOptions};
use crate::numeric::CMatrix;
use crate::waveguide::{
    gaussian_track_profile, ring_profile, BirefringenceTensor, PermittivityProfile, RingSpec, TrackSpec,
};

/// Minimum number of pixels across the full 1/e width of any track.
pub const MIN_PX_PER_WIDTH: f64 = 8.0;

/// Shape of a single elliptical track; the axes are `w/sqrt(aspect)` along
/// `x` and `w*sqrt(aspect)` along `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackShape {
    /// 1/e half-width (um).
    pub width: f64,
    pub aspect: f64,
    /// Peak permittivity change relative to the substrate permittivity.
    pub peak_rel: f64,
}

impl TrackShape {
    pub fn widths(&self) -> (f64, f64) {
        let s = self.aspect.sqrt();
        (self.width / s, self.width * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingShape {
    pub radius: f64,
    /// Track 1/e half-width as a fraction of the radius.
    pub width_ratio: f64,
    pub aspect: f64,
    pub n_tracks: usize,
    pub center_scan: bool,
    pub peak_rel: f64,
}

impl RingShape {
    pub fn track_shape(&self) -> TrackShape {
        TrackShape {
            width: self.width_ratio * self.radius,
            aspect: self.aspect,
            peak_rel: self.peak_rel,
        }
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        RingShape { radius, ..*self }
    }

    pub fn spec(&self, eps_s: f64, center: (f64, f64)) -> RingSpec {
        let t = self.track_shape();
        RingSpec {
            radius: self.radius,
            n_tracks: self.n_tracks,
            track: TrackSpec {
                center,
                widths: t.widths(),
                peak_delta_eps: t.peak_rel * eps_s,
            },
            center_scan: self.center_scan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub wavelength_nm: f64,
    pub n_s: f64,
    pub dx_um: f64,
    /// Clearance between the outermost written structure and the grid edge.
    pub margin_um: f64,
    /// Centre-to-centre distance between the single guide and the ring.
    pub spacing_um: f64,
    /// Direction of the single guide seen from the ring centre (rad).
    pub phi_a: f64,
    pub single: TrackShape,
    pub ring: RingShape,
    pub ell: u32,
    pub d_eps_a: BirefringenceTensor,
    pub d_eps_b: BirefringenceTensor,
    /// Peak multipliers from write-energy changes, `1 + dE/E_sp`.
    pub scale_a: f64,
    pub scale_b: f64,
    /// Extra propagation-constant shift of the Gaussian modes (rad/m).
    pub detuning: f64,
    /// Use `(I + C)^-1 K` as the generator in the coupling region.
    pub mass_matrix: bool,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec {
            wavelength_nm: 780.0,
            n_s: 1.45,
            dx_um: 0.2,
            margin_um: 13.0,
            spacing_um: 15.0,
            phi_a: std::f64::consts::PI,
            single: TrackShape {
                width: 2.38,
                aspect: 1.0,
                peak_rel: 3e-3,
            },
            ring: RingShape {
                radius: 3.5,
                width_ratio: 0.55,
                aspect: 1.0,
                n_tracks: 12,
                center_scan: false,
                peak_rel: 3e-3,
            },
            ell: 1,
            d_eps_a: BirefringenceTensor::default(),
            d_eps_b: BirefringenceTensor::default(),
            scale_a: 1.0,
            scale_b: 1.0,
            detuning: 0.0,
            mass_matrix: false,
        }
    }
}

impl DeviceSpec {
    pub fn eps_s(&self) -> f64 {
        self.n_s * self.n_s
    }

    /// Vacuum wavenumber (rad/m).
    pub fn k0(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.wavelength_nm * 1e-9)
    }

    pub fn a_center(&self) -> (f64, f64) {
        (self.spacing_um * self.phi_a.cos(), self.spacing_um * self.phi_a.sin())
    }

    pub fn single_track(&self) -> TrackSpec {
        TrackSpec {
            center: self.a_center(),
            widths: self.single.widths(),
            peak_delta_eps: self.single.peak_rel * self.eps_s() * self.scale_a,
        }
    }

    pub fn ring_spec(&self) -> RingSpec {
        let mut r = self.ring.spec(self.eps_s(), (0.0, 0.0));
        r.track.peak_delta_eps *= self.scale_b;
        r
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Geometry(format!("{name} must be positive, got {v}")))
            }
        };
        pos("wavelength", self.wavelength_nm)?;
        pos("substrate index", self.n_s)?;
        pos("grid spacing", self.dx_um)?;
        pos("margin", self.margin_um)?;
        pos("spacing", self.spacing_um)?;
        pos("single track width", self.single.width)?;
        pos("single track aspect", self.single.aspect)?;
        pos("ring aspect", self.ring.aspect)?;
        pos("ring width ratio", self.ring.width_ratio)?;
        if self.ell == 0 {
            return Err(Error::Geometry("vortex order must be at least 1".into()));
        }
        let narrowest = [self.single.widths(), self.ring.track_shape().widths()]
            .iter()
            .map(|w| w.0.min(w.1))
            .fold(f64::MAX, f64::min);
        if 2.0 * narrowest / self.dx_um < MIN_PX_PER_WIDTH {
            return Err(Error::Geometry(format!(
                "grid spacing {} um resolves the narrowest track (1/e width {:.3} um) with fewer than {} pixels",
                self.dx_um,
                2.0 * narrowest,
                MIN_PX_PER_WIDTH
            )));
        }
        let outer = self.ring.radius * (1.0 + self.ring.width_ratio);
        if self.spacing_um <= outer {
            return Err(Error::Geometry(format!(
                "spacing {} um puts the single guide inside the ring (outer radius {outer:.2} um)",
                self.spacing_um
            )));
        }
        self.ring_spec().validate()
    }

    /// Shared grid covering both structures with the configured margin,
    /// centred on the ring with a pixel on its axis. The grid is mirror
    /// symmetric about both axes through the ring centre, so ring doublets
    /// stay aligned with the grid axes.
    pub fn grid(&self) -> Result<GridSpec> {
        let (ax, ay) = self.a_center();
        let r = self.ring.radius;
        let hx = ax.abs().max(r) + self.margin_um;
        let hy = ay.abs().max(r) + self.margin_um;
        GridSpec::covering_anchored(-hx, hx, -hy, hy, self.dx_um, (0.0, 0.0))
    }

    /// The single-mode guide alone, centred on its own grid.
    pub fn isolated_single_profile(&self) -> Result<PermittivityProfile> {
        self.validate()?;
        let mut t = self.single_track();
        t.center = (0.0, 0.0);
        let h = t.widths.0.max(t.widths.1) + self.margin_um;
        let g = GridSpec::covering_anchored(-h, h, -h, h, self.dx_um, (0.0, 0.0))?;
        gaussian_track_profile(&g, &t, self.eps_s())
    }

    pub fn profiles(&self) -> Result<(PermittivityProfile, PermittivityProfile)> {
        self.validate()?;
        let g = self.grid()?;
        let pa = gaussian_track_profile(&g, &self.single_track(), self.eps_s())?.with_birefringence(self.d_eps_a);
        let pb = ring_profile(&g, &self.ring_spec(), self.eps_s())?.with_birefringence(self.d_eps_b);
        Ok((pa, pb))
    }
}

/// Diagnostics of the neglected butt coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButtDiagnostics {
    /// Largest `|C|` between the two waveguides (dimensionless).
    pub c_max: f64,
    /// Largest inter-waveguide coupling `|kappa|` (rad/m).
    pub kappa_max: f64,
    /// Largest propagation-constant shift `|delta|` on the diagonal (rad/m).
    pub delta_max: f64,
    /// Rate correction `|C| |kappa|` that the butt terms would add (rad/m).
    pub c_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Device {
    pub spec: DeviceSpec,
    pub grid: GridSpec,
    pub profile_a: PermittivityProfile,
    pub profile_b: PermittivityProfile,
    pub gauss: ModeField,
    pub even: ModeField,
    pub odd: ModeField,
    pub basis: ModeBasis,
    pub overlaps: OverlapSet,
    pub k: CouplingMatrix,
    pub butt: CMatrix,
    pub notices: Vec<String>,
}

impl Device {
    pub fn build(spec: &DeviceSpec) -> Result<Device> {
        Self::build_with(spec, &SolverOptions::default())
    }

    pub fn build_with(spec: &DeviceSpec, opts: &SolverOptions) -> Result<Device> {
        let (pa, pb) = spec.profiles()?;
        let k0 = spec.k0();
        let gauss = solve_modes_with(&pa, k0, 1, opts)?.swap_remove(0);
        let ring_modes = solve_modes_with(&pb, k0, count_for_order(spec.ell), opts)?;
        let i = find_doublet(&ring_modes, spec.ell).ok_or(Error::Cutoff)?;
        let even = ring_modes[i].clone();
        let odd = ring_modes[i + 1].clone();
        Self::assemble(spec, pa, pb, gauss, even, odd)
    }

    /// Rebuild the matrices from already solved modes.
    pub fn assemble(
        spec: &DeviceSpec,
        pa: PermittivityProfile,
        pb: PermittivityProfile,
        gauss: ModeField,
        even: ModeField,
        odd: ModeField,
    ) -> Result<Device> {
        let theta = spec.d_eps_a.theta;
        let basis = ModeBasis::new(&gauss, &even, &odd, spec.ell as i32, theta)?;
        let overlaps = OverlapSet::new(&basis, &pa, &pb)?;
        let mut k = assemble_from_overlaps(&basis, &overlaps, &pa, &pb, spec.k0(), true);
        for i in 0..2 {
            k.k[(i, i)] += Complex64::new(spec.detuning, 0.0);
            if spec.detuning != 0.0 {
                k.provenance[i][i].push("detuning".into());
            }
        }
        let butt = butt_matrix(&basis, &overlaps);
        Ok(Device {
            spec: spec.clone(),
            grid: pa.grid,
            profile_a: pa,
            profile_b: pb,
            gauss,
            even,
            odd,
            basis,
            overlaps,
            k,
            butt,
            notices: Vec::new(),
        })
    }

    /// Same modes, new detuning of the Gaussian modes.
    pub fn with_detuning(&self, detuning: f64) -> Device {
        let mut d = self.clone();
        let delta = detuning - self.spec.detuning;
        for i in 0..2 {
            d.k.k[(i, i)] += Complex64::new(delta, 0.0);
        }
        d.spec.detuning = detuning;
        d
    }

    pub fn k0(&self) -> f64 {
        self.spec.k0()
    }

    /// Generator used in the coupling region.
    pub fn coupling_generator(&self) -> Result<CMatrix> {
        if !self.spec.mass_matrix {
            return Ok(self.k.k.clone());
        }
        let m = CMatrix::identity(6).add(&self.butt);
        let inv = m.inverse().ok_or_else(|| Error::Model("I + C is singular".into()))?;
        Ok(inv.mul(&self.k.k))
    }

    pub fn plan(&self, l1: f64, lcp: f64, l2: f64, ramp: Option<Ramp>, method: Method) -> Result<SegmentPlan> {
        let mut plan = SegmentPlan::new(&self.k, l1, lcp, l2)?;
        plan.kcp = self.coupling_generator()?;
        plan.ramp = ramp;
        plan.method = method;
        Ok(plan)
    }

    /// Propagate a unit-power input of Jones vector `jones` (image axes).
    pub fn propagate(&self, jones: [Complex64; 2], plan: &SegmentPlan) -> Result<ChipOutput> {
        let n = (jones[0].norm_sqr() + jones[1].norm_sqr()).sqrt();
        if n == 0.0 {
            return Err(Error::Contract("input Jones vector is zero".into()));
        }
        let j = [jones[0] / n, jones[1] / n];
        let input = AmplitudeState::new(self.basis.input_amplitudes(j));
        let mut out = propagate_chip(&input, plan)?;
        out.notices.extend(self.notices.iter().cloned());
        Ok(out)
    }

    pub fn butt_diagnostics(&self) -> ButtDiagnostics {
        let c_max = self.butt.max_abs();
        let kappa_max = self.k.kappa_scale();
        let mut delta_max: f64 = 0.0;
        for x in 0..6 {
            // isotropic and birefringent shifts only; beta - beta_bar excluded
            let shift = self.k.k[(x, x)].re - (self.basis.modes[x].beta - self.basis.beta_bar);
            let shift = if x < 2 { shift - self.spec.detuning } else { shift };
            delta_max = delta_max.max(shift.abs());
        }
        ButtDiagnostics {
            c_max,
            kappa_max,
            delta_max,
            c_rate: c_max * kappa_max,
        }
    }

    /// Phase mismatch between the Gaussian mode and the vortex pair (rad/m),
    /// including the shifts on the matrix diagonal.
    pub fn mismatch(&self) -> f64 {
        let k = &self.k.k;
        let g = k[(0, 0)].re;
        let r = 0.5 * (k[(2, 2)].re + k[(3, 3)].re);
        g - r
    }
}
