//! Coupled-mode coefficients by overlap integrals and the six-mode matrix.
//!
//! Waveguide `a` carries the Gaussian mode in two polarizations along its own
//! optical axes `x'`, `y'` (rotated by `theta` from the image axes). Waveguide
//! `b` carries the `+l` and `-l` vortex modes in `x` and `y`. Basis order:
//! `[G_x', G_y', x_l, x_-l, y_l, y_-l]`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modes::{make_oam_pair, ModeField, Polarization};
use crate::numeric::{pairwise_csum_by, CMatrix};
use crate::waveguide::PermittivityProfile;

pub const LABELS: [&str; 6] = ["G_x'", "G_y'", "x_l", "x_-l", "y_l", "y_-l"];

/// Jones vector of a polarization label in image axes.
pub fn pol_vector(pol: Polarization, theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    match pol {
        Polarization::X => [1.0, 0.0],
        Polarization::Y => [0.0, 1.0],
        Polarization::XPrime => [c, s],
        Polarization::YPrime => [-s, c],
    }
}

fn bilinear2(p: [f64; 2], t: &[[f64; 2]; 2], q: [f64; 2]) -> f64 {
    p[0] * (t[0][0] * q[0] + t[0][1] * q[1]) + p[1] * (t[1][0] * q[0] + t[1][1] * q[1])
}

/// One permittivity term of an overlap integral.
#[derive(Debug, Clone, Copy)]
pub enum EpsTerm<'a> {
    /// Isotropic change, per pixel.
    Scalar(&'a [f64]),
    /// Transverse tensor (image axes) times a per-pixel weight.
    Tensor { weight: &'a [f64], tensor: [[f64; 2]; 2] },
}

/// `(k0^2 / 2 beta_x N_x) * integral conj(bra) * (sum of terms) * ket dx dy`,
/// with the polarizations of `bra` and `ket` contracted through each term.
pub fn coupling_overlap(
    bra: &ModeField,
    ket: &ModeField,
    terms: &[EpsTerm],
    k0: f64,
    beta_x: f64,
    n_x: f64,
    theta: f64,
) -> Result<Complex64> {
    bra.grid.ensure_same(&ket.grid)?;
    let n = bra.grid.len();
    let pb = pol_vector(bra.pol, theta);
    let pk = pol_vector(ket.pol, theta);
    let dot = pb[0] * pk[0] + pb[1] * pk[1];
    let mut total = Complex64::new(0.0, 0.0);
    for term in terms {
        let (w, factor) = match term {
            EpsTerm::Scalar(w) => (*w, dot),
            EpsTerm::Tensor { weight, tensor } => (*weight, bilinear2(pb, tensor, pk)),
        };
        if w.len() != n {
            return Err(Error::Contract(format!(
                "permittivity term has {} samples, grid has {n}",
                w.len()
            )));
        }
        if factor == 0.0 {
            continue;
        }
        let s = pairwise_csum_by(0, n, |i| bra.profile[i].conj() * ket.profile[i] * w[i]);
        total += s * factor;
    }
    Ok(total * bra.grid.cell_area() * k0 * k0 / (2.0 * beta_x * n_x))
}

/// `(beta_ket / beta_x N_x) * integral conj(bra) ket dx dy`.
pub fn butt_coupling(bra: &ModeField, ket: &ModeField, beta_ket: f64, n_x: f64) -> Result<Complex64> {
    bra.grid.ensure_same(&ket.grid)?;
    let s = pairwise_csum_by(0, bra.profile.len(), |i| bra.profile[i].conj() * ket.profile[i]);
    Ok(s * bra.grid.cell_area() * beta_ket / (bra.beta * n_x))
}

/// The six coupled modes.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub modes: [ModeField; 6],
    /// Mean of the six propagation constants (rad/m).
    pub beta_bar: f64,
    /// Half the even/odd splitting of the ring doublet, `(beta_e - beta_o)/2`,
    /// which couples `+l` and `-l` (rad/m).
    pub half_split: f64,
    pub theta: f64,
    pub ell: i32,
}

impl ModeBasis {
    pub fn new(gauss: &ModeField, even: &ModeField, odd: &ModeField, ell: i32, theta: f64) -> Result<Self> {
        gauss.grid.ensure_same(&even.grid)?;
        let (plus, minus) = make_oam_pair(even, odd, ell)?;
        let modes = [
            gauss.clone().with_pol(Polarization::XPrime),
            gauss.clone().with_pol(Polarization::YPrime),
            plus.clone().with_pol(Polarization::X),
            minus.clone().with_pol(Polarization::X),
            plus.with_pol(Polarization::Y),
            minus.with_pol(Polarization::Y),
        ];
        let beta_bar = modes.iter().map(|m| m.beta).sum::<f64>() / 6.0;
        Ok(ModeBasis {
            modes,
            beta_bar,
            half_split: 0.5 * (even.beta - odd.beta),
            theta,
            ell,
        })
    }

    pub fn in_a(i: usize) -> bool {
        i < 2
    }

    /// The four vortex modes `[x_l, x_-l, y_l, y_-l]`.
    pub fn ring_modes(&self) -> [ModeField; 4] {
        [
            self.modes[2].clone(),
            self.modes[3].clone(),
            self.modes[4].clone(),
            self.modes[5].clone(),
        ]
    }

    /// Amplitudes in waveguide `a` for an input Jones vector in image axes.
    pub fn input_amplitudes(&self, jones: [Complex64; 2]) -> Vec<Complex64> {
        let ex = pol_vector(Polarization::XPrime, self.theta);
        let ey = pol_vector(Polarization::YPrime, self.theta);
        let mut v = vec![Complex64::new(0.0, 0.0); 6];
        v[0] = jones[0] * ex[0] + jones[1] * ex[1];
        v[1] = jones[0] * ey[0] + jones[1] * ey[1];
        v
    }
}

/// Hermitian 6x6 generator of the amplitude evolution `dA/dz = -j K A`.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingMatrix {
    #[serde(skip)]
    pub k: CMatrix,
    /// Which contributions fed each entry.
    pub provenance: Vec<Vec<Vec<String>>>,
    /// `|K_raw - K_raw^dagger| / |K_raw|` before symmetrization.
    pub raw_asymmetry: f64,
    pub coupled: bool,
}

impl CouplingMatrix {
    pub fn zero_inter_blocks(&self) -> CouplingMatrix {
        let mut out = self.clone();
        for i in 0..2 {
            for j in 2..6 {
                out.k[(i, j)] = Complex64::new(0.0, 0.0);
                out.k[(j, i)] = Complex64::new(0.0, 0.0);
                out.provenance[i][j].clear();
                out.provenance[j][i].clear();
            }
        }
        out.coupled = false;
        out
    }

    /// Largest inter-waveguide coupling magnitude (rad/m).
    pub fn kappa_scale(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 2..6 {
                m = m.max(self.k[(i, j)].norm());
            }
        }
        m
    }

    pub fn provenance_table(&self) -> String {
        let mut s = String::from("row\tcol\tterms\n");
        for i in 0..6 {
            for j in 0..6 {
                let t = &self.provenance[i][j];
                if !t.is_empty() {
                    s.push_str(&format!("{}\t{}\t{}\n", LABELS[i], LABELS[j], t.join("+")));
                }
            }
        }
        s
    }
}

/// Overlap integrals `integral conj(f_i) f_j w dx dy` for the three spatial
/// fields `[gauss, f_+, f_-]` and one weight.
fn spatial_overlaps(fields: &[&ModeField; 3], w: &[f64]) -> [[Complex64; 3]; 3] {
    let n = w.len();
    let da = fields[0].grid.cell_area();
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (fi, fj) = (&fields[i].profile, &fields[j].profile);
            out[i][j] = pairwise_csum_by(0, n, |k| fi[k].conj() * fj[k] * w[k]) * da;
        }
    }
    out
}

const FIELD_OF: [usize; 6] = [0, 0, 1, 2, 1, 2];

/// Spatial overlaps shared by every assembly on one device.
#[derive(Debug, Clone)]
pub struct OverlapSet {
    /// `eps_b` weight (perturbation felt by `a` modes).
    pub by_eps_b: [[Complex64; 3]; 3],
    /// `eps_a` weight (perturbation felt by `b` modes).
    pub by_eps_a: [[Complex64; 3]; 3],
    /// Written footprints of `a` and `b`.
    pub by_foot_a: [[Complex64; 3]; 3],
    pub by_foot_b: [[Complex64; 3]; 3],
    /// Plain overlaps, for the butt coupling.
    pub plain: [[Complex64; 3]; 3],
}

impl OverlapSet {
    pub fn new(basis: &ModeBasis, pa: &PermittivityProfile, pb: &PermittivityProfile) -> Result<Self> {
        let g = &basis.modes[0].grid;
        g.ensure_same(&pa.grid)?;
        g.ensure_same(&pb.grid)?;
        let fields = [&basis.modes[0], &basis.modes[2], &basis.modes[3]];
        let ones = vec![1.0; g.len()];
        Ok(OverlapSet {
            by_eps_b: spatial_overlaps(&fields, &pb.eps_iso),
            by_eps_a: spatial_overlaps(&fields, &pa.eps_iso),
            by_foot_a: spatial_overlaps(&fields, &pa.footprint_weight()),
            by_foot_b: spatial_overlaps(&fields, &pb.footprint_weight()),
            plain: spatial_overlaps(&fields, &ones),
        })
    }
}

/// Assemble the coupling matrix. Entry `[X][Y]` is
/// `k0^2/(2 beta_X) * integral conj(E_X) (eps_pert(Y) + S_a T_a + S_b T_b) E_Y`,
/// where `eps_pert(Y)` is the other waveguide's isotropic change and `S T` the
/// footprint-weighted birefringence tensors. The raw matrix is then
/// symmetrized; its asymmetry is recorded.
pub fn assemble_matrix(
    basis: &ModeBasis,
    pa: &PermittivityProfile,
    pb: &PermittivityProfile,
    k0: f64,
    coupled: bool,
) -> Result<CouplingMatrix> {
    let ov = OverlapSet::new(basis, pa, pb)?;
    Ok(assemble_from_overlaps(basis, &ov, pa, pb, k0, coupled))
}

pub fn assemble_from_overlaps(
    basis: &ModeBasis,
    ov: &OverlapSet,
    pa: &PermittivityProfile,
    pb: &PermittivityProfile,
    k0: f64,
    coupled: bool,
) -> CouplingMatrix {
    let ta = pa.d_eps.transverse();
    let tb = pb.d_eps.transverse();
    let zero = Complex64::new(0.0, 0.0);
    let mut raw = CMatrix::zeros(6);
    let mut prov = vec![vec![Vec::<String>::new(); 6]; 6];
    for x in 0..6 {
        let px = pol_vector(basis.modes[x].pol, basis.theta);
        let pre = k0 * k0 / (2.0 * basis.modes[x].beta);
        for y in 0..6 {
            let py = pol_vector(basis.modes[y].pol, basis.theta);
            let (i, j) = (FIELD_OF[x], FIELD_OF[y]);
            let dot = px[0] * py[0] + px[1] * py[1];
            let (scalar, tag) = if ModeBasis::in_a(y) {
                (ov.by_eps_b[i][j], "eps_b")
            } else {
                (ov.by_eps_a[i][j], "eps_a")
            };
            let fa = bilinear2(px, &ta, py);
            let fb = bilinear2(px, &tb, py);
            let mut v = zero;
            let p = &mut prov[x][y];
            if dot != 0.0 && scalar != zero {
                v += scalar * dot;
                p.push(tag.to_string());
            }
            if fa != 0.0 && ov.by_foot_a[i][j] != zero {
                v += ov.by_foot_a[i][j] * fa;
                p.push("d_eps_a".to_string());
            }
            if fb != 0.0 && ov.by_foot_b[i][j] != zero {
                v += ov.by_foot_b[i][j] * fb;
                p.push("d_eps_b".to_string());
            }
            raw[(x, y)] = v * pre;
        }
        raw[(x, x)] += Complex64::new(basis.modes[x].beta - basis.beta_bar, 0.0);
        prov[x][x].insert(0, "beta".to_string());
    }
    // intrinsic splitting of the ring doublet couples +l and -l
    if basis.half_split != 0.0 {
        for (p, m) in [(2, 3), (4, 5)] {
            raw[(p, m)] += Complex64::new(basis.half_split, 0.0);
            raw[(m, p)] += Complex64::new(basis.half_split, 0.0);
            prov[p][m].push("split".to_string());
            prov[m][p].push("split".to_string());
        }
    }
    let norm = raw.frobenius();
    let raw_asymmetry = if norm > 0.0 {
        raw.sub(&raw.adjoint()).frobenius() / norm
    } else {
        0.0
    };
    let out = CouplingMatrix {
        k: raw.hermitian_part(),
        provenance: prov,
        raw_asymmetry,
        coupled: true,
    };
    if coupled {
        out
    } else {
        out.zero_inter_blocks()
    }
}

/// Butt-coupling matrix: nonzero only between modes of different waveguides.
pub fn butt_matrix(basis: &ModeBasis, ov: &OverlapSet) -> CMatrix {
    let mut c = CMatrix::zeros(6);
    for x in 0..6 {
        let px = pol_vector(basis.modes[x].pol, basis.theta);
        for y in 0..6 {
            if ModeBasis::in_a(x) == ModeBasis::in_a(y) {
                continue;
            }
            let py = pol_vector(basis.modes[y].pol, basis.theta);
            let dot = px[0] * py[0] + px[1] * py[1];
            let s = ov.plain[FIELD_OF[x]][FIELD_OF[y]];
            c[(x, y)] = s * dot * basis.modes[y].beta / basis.modes[x].beta;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::modes::ModeField;
    use std::f64::consts::PI;

    const K0: f64 = 2.0 * PI / 780e-9;

    fn gaussian_mode(g: &GridSpec, c: (f64, f64), w: f64, pol: Polarization) -> ModeField {
        let mut prof: Vec<Complex64> = g.sample(|x, y| {
            let r2 = (x - c.0).powi(2) + (y - c.1).powi(2);
            Complex64::new((-r2 / (w * w)).exp(), 0.0)
        });
        let p: f64 = prof.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_area();
        prof.iter_mut().for_each(|v| *v /= p.sqrt());
        let beta = 1.452 * K0;
        ModeField {
            grid: *g,
            beta,
            n_eff: 1.452,
            profile: prof,
            pol,
            oam: 0,
            norm: 1.0,
            residual: 0.0,
        }
    }

    fn grid() -> GridSpec {
        GridSpec::covering(-8.0, 8.0, -8.0, 8.0, 0.1).unwrap()
    }

    #[test]
    fn zero_terms_give_zero() {
        let g = grid();
        let m = gaussian_mode(&g, (0.0, 0.0), 2.0, Polarization::X);
        let z = vec![0.0; g.len()];
        let v = coupling_overlap(&m, &m, &[EpsTerm::Scalar(&z)], K0, m.beta, 1.0, 0.0).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn constant_scalar_gives_normalization_identity() {
        let g = grid();
        let m = gaussian_mode(&g, (0.5, -0.3), 1.7, Polarization::X);
        let c = 2.5e-3;
        let w = vec![c; g.len()];
        let v = coupling_overlap(&m, &m, &[EpsTerm::Scalar(&w)], K0, m.beta, 1.0, 0.0).unwrap();
        let want = K0 * K0 * c / (2.0 * m.beta);
        assert!((v.re - want).abs() < 1e-12 * want);
        assert!(v.im.abs() < 1e-12 * want);
    }

    #[test]
    fn orthogonal_polarizations_do_not_couple_through_scalars() {
        let g = grid();
        let a = gaussian_mode(&g, (0.0, 0.0), 2.0, Polarization::X);
        let b = gaussian_mode(&g, (0.0, 0.0), 2.0, Polarization::Y);
        let w = vec![1e-3; g.len()];
        let v = coupling_overlap(&a, &b, &[EpsTerm::Scalar(&w)], K0, a.beta, 1.0, 0.0).unwrap();
        assert_eq!(v.norm(), 0.0);
        // rotated axes pick up cos(theta)
        let ap = a.clone().with_pol(Polarization::XPrime);
        let t = 0.3;
        let v0 = coupling_overlap(&a, &a, &[EpsTerm::Scalar(&w)], K0, a.beta, 1.0, t).unwrap();
        let v1 = coupling_overlap(&ap, &a, &[EpsTerm::Scalar(&w)], K0, a.beta, 1.0, t).unwrap();
        assert!((v1 - v0 * t.cos()).norm() < 1e-12 * v0.norm());
    }

    #[test]
    fn tensor_term_contracts_polarizations() {
        let g = grid();
        let a = gaussian_mode(&g, (0.0, 0.0), 2.0, Polarization::X);
        let b = a.clone().with_pol(Polarization::Y);
        let w = vec![1.0; g.len()];
        let t = [[1e-4, 2e-5], [2e-5, -3e-5]];
        let term = [EpsTerm::Tensor { weight: &w, tensor: t }];
        let pre = K0 * K0 / (2.0 * a.beta);
        let xx = coupling_overlap(&a, &a, &term, K0, a.beta, 1.0, 0.0).unwrap();
        let xy = coupling_overlap(&a, &b, &term, K0, a.beta, 1.0, 0.0).unwrap();
        let yy = coupling_overlap(&b, &b, &term, K0, a.beta, 1.0, 0.0).unwrap();
        assert!((xx.re - pre * 1e-4).abs() < 1e-10 * pre * 1e-4);
        assert!((xy.re - pre * 2e-5).abs() < 1e-10 * pre * 2e-5);
        assert!((yy.re + pre * 3e-5).abs() < 1e-10 * pre * 3e-5);
    }

    #[test]
    fn grid_mismatch_is_a_contract_error() {
        let g = grid();
        let h = GridSpec::covering(-8.0, 8.0, -8.0, 8.1, 0.1).unwrap();
        let a = gaussian_mode(&g, (0.0, 0.0), 2.0, Polarization::X);
        let b = gaussian_mode(&h, (0.0, 0.0), 2.0, Polarization::X);
        assert!(matches!(
            coupling_overlap(&a, &b, &[], K0, a.beta, 1.0, 0.0),
            Err(Error::Contract(_))
        ));
        let short = vec![0.0; 3];
        assert!(coupling_overlap(&a, &a, &[EpsTerm::Scalar(&short)], K0, a.beta, 1.0, 0.0).is_err());
    }

    #[test]
    fn butt_coupling_identities() {
        let g = grid();
        let a = gaussian_mode(&g, (0.0, 0.0), 2.0, Polarization::X);
        let c = butt_coupling(&a, &a, 1.1 * a.beta, 1.0).unwrap();
        assert!((c.re - 1.1).abs() < 1e-12 && c.im.abs() < 1e-12);
        // an odd partner is orthogonal to the even Gaussian
        let mut odd = a.clone();
        for k in 0..g.len() {
            let (x, _) = g.coords(k);
            odd.profile[k] *= x;
        }
        assert!(butt_coupling(&a, &odd, a.beta, 1.0).unwrap().norm() < 1e-12);
    }

    #[test]
    fn pol_vectors_are_orthonormal() {
        for t in [-1.0, 0.0, 0.4, 1.5] {
            let x = pol_vector(Polarization::XPrime, t);
            let y = pol_vector(Polarization::YPrime, t);
            assert!((x[0] * y[0] + x[1] * y[1]).abs() < 1e-15);
            assert!((x[0] * x[0] + x[1] * x[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn kappa_between_identical_tracks_matches_fine_quadrature() {
        use crate::modes::{solve_modes_with, SolverOptions};
        use crate::waveguide::{gaussian_track_profile, TrackSpec};

        let eps_s = 1.45f64 * 1.45;
        let track = |cx: f64| TrackSpec {
            center: (cx, 0.0),
            widths: (2.38, 2.38),
            peak_delta_eps: 3e-3 * eps_s,
        };
        let (ta, tb) = (track(-7.5), track(7.5));
        let g = GridSpec::covering_anchored(-17.0, 17.0, -9.5, 9.5, 0.2, (0.0, 0.0)).unwrap();
        let pa = gaussian_track_profile(&g, &ta, eps_s).unwrap();
        let pb = gaussian_track_profile(&g, &tb, eps_s).unwrap();
        let opts = SolverOptions::default();
        let ma = solve_modes_with(&pa, K0, 1, &opts)
            .unwrap()
            .swap_remove(0)
            .with_pol(Polarization::X);
        let mb = solve_modes_with(&pb, K0, 1, &opts)
            .unwrap()
            .swap_remove(0)
            .with_pol(Polarization::X);

        let kab = coupling_overlap(&ma, &mb, &[EpsTerm::Scalar(&pa.eps_iso)], K0, ma.beta, 1.0, 0.0).unwrap();
        let kba = coupling_overlap(&mb, &ma, &[EpsTerm::Scalar(&pb.eps_iso)], K0, mb.beta, 1.0, 0.0).unwrap();

        // 4x finer midpoint rule, modes interpolated, permittivity analytic
        let parts = |m: &ModeField| -> (Vec<f64>, Vec<f64>) {
            (
                m.profile.iter().map(|z| z.re).collect(),
                m.profile.iter().map(|z| z.im).collect(),
            )
        };
        let (ar, ai) = parts(&ma);
        let (br, bi) = parts(&mb);
        let sub = 4;
        let h = g.dx / sub as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for iy in 0..g.ny * sub {
            let y = g.origin.1 - 0.5 * g.dx + (iy as f64 + 0.5) * h;
            for ix in 0..g.nx * sub {
                let x = g.origin.0 - 0.5 * g.dx + (ix as f64 + 0.5) * h;
                let ea = Complex64::new(g.bilinear(&ar, x, y), g.bilinear(&ai, x, y));
                let eb = Complex64::new(g.bilinear(&br, x, y), g.bilinear(&bi, x, y));
                acc += ea.conj() * eb * ta.value_at(x, y);
            }
        }
        let oracle = acc * h * h * K0 * K0 / (2.0 * ma.beta);

        assert!(oracle.norm() > 1.0, "kappa {oracle}");
        assert!(
            (kab.norm() - oracle.norm()).abs() / oracle.norm() < 5e-3,
            "{kab} vs {oracle}"
        );
        assert!((kab.norm() - kba.norm()).abs() / oracle.norm() < 5e-3, "{kab} vs {kba}");
    }
}
