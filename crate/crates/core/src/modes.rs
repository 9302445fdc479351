//! Scalar guided modes of a permittivity profile.
//!
//! Solves `(lap + k0^2 eps) E = beta^2 E` with a five-point stencil and a zero
//! boundary. The largest eigenvalues are found by shift-invert subspace
//! iteration: each outer step grows the current block with a few powers of
//! `(sigma - A)^-1` applied through a banded Cholesky factor, then a
//! Rayleigh-Ritz projection on `A` selects the new block.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::numeric::{dot, pairwise_sum_by, symmetric_eigen, BandCholesky};
use crate::waveguide::PermittivityProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    X,
    Y,
    XPrime,
    YPrime,
}

impl Polarization {
    pub fn label(self) -> &'static str {
        match self {
            Polarization::X => "x",
            Polarization::Y => "y",
            Polarization::XPrime => "x'",
            Polarization::YPrime => "y'",
        }
    }
}

/// A guided eigenmode sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub grid: GridSpec,
    /// Propagation constant (rad/m).
    pub beta: f64,
    pub n_eff: f64,
    /// Transverse profile, normalized so that `sum |E|^2 dx dy = norm` (um^2).
    pub profile: Vec<Complex64>,
    pub pol: Polarization,
    /// Azimuthal order: 0 for Gaussian-like modes, +-l for vortex modes and
    /// the unsigned order for standing-wave ring modes.
    pub oam: i32,
    pub norm: f64,
    /// Relative eigen-residual reported by the solver.
    pub residual: f64,
}

impl ModeField {
    pub fn power(&self) -> f64 {
        let a = self.grid.cell_area();
        pairwise_sum_by(0, self.profile.len(), |i| self.profile[i].norm_sqr()) * a
    }

    /// `integral conj(self) * other dx dy`.
    pub fn inner(&self, other: &ModeField) -> Complex64 {
        let a = self.grid.cell_area();
        crate::numeric::pairwise_csum_by(0, self.profile.len(), |i| self.profile[i].conj() * other.profile[i]) * a
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.profile.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn with_pol(mut self, pol: Polarization) -> Self {
        self.pol = pol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative eigen-residual `|A x - beta^2 x| / |beta^2 x|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    /// Krylov powers added per outer iteration.
    pub depth: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 10_000,
            seed: 0x5eed,
            guard: 4,
            depth: 5,
        }
    }
}

/// Pairs whose propagation constants agree to this relative level are treated
/// as one azimuthal doublet; this admits the split of slightly elliptical
/// rings.
pub const DOUBLET_TOL: f64 = 1e-4;

/// Degenerate doublets are only re-gauged when their eigenvalues agree to this
/// relative level, so the rotation leaves the residual below tolerance.
const REGAUGE_TOL: f64 = 1e-10;

struct Operator {
    nf: usize,
    ns: usize,
    /// `1/df^2`, `1/ds^2`
    cf: f64,
    cs: f64,
    /// `k0^2 eps_iso` per internal index
    pot: Vec<f64>,
    swap: bool,
    nx: usize,
}

impl Operator {
    fn new(profile: &PermittivityProfile, k0_um: f64) -> Self {
        let g = &profile.grid;
        // run the fast index along the shorter side to keep the band narrow
        let swap = g.ny < g.nx;
        let (nf, ns, df, ds) = if swap {
            (g.ny, g.nx, g.dy, g.dx)
        } else {
            (g.nx, g.ny, g.dx, g.dy)
        };
        let mut pot = vec![0.0; g.len()];
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let t = if swap { ix * g.ny + iy } else { iy * g.nx + ix };
                pot[t] = k0_um * k0_um * profile.eps_iso[g.idx(ix, iy)];
            }
        }
        Operator {
            nf,
            ns,
            cf: 1.0 / (df * df),
            cs: 1.0 / (ds * ds),
            pot,
            swap,
            nx: g.nx,
        }
    }

    fn len(&self) -> usize {
        self.nf * self.ns
    }

    /// `y = (lap + k0^2 eps_iso) x`, the substrate term shifted out.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nf, ns) = (self.nf, self.ns);
        for s in 0..ns {
            for f in 0..nf {
                let i = s * nf + f;
                let mut v = (self.pot[i] - 2.0 * self.cf - 2.0 * self.cs) * x[i];
                if f > 0 {
                    v += self.cf * x[i - 1];
                }
                if f + 1 < nf {
                    v += self.cf * x[i + 1];
                }
                if s > 0 {
                    v += self.cs * x[i - nf];
                }
                if s + 1 < ns {
                    v += self.cs * x[i + nf];
                }
                y[i] = v;
            }
        }
    }

    /// Lower band of `sigma I - A`.
    fn shifted_entry(&self, sigma: f64, i: usize, j: usize) -> f64 {
        if i == j {
            sigma - self.pot[i] + 2.0 * self.cf + 2.0 * self.cs
        } else if i - j == 1 && i % self.nf != 0 {
            -self.cf
        } else if i - j == self.nf {
            -self.cs
        } else {
            0.0
        }
    }

    fn to_grid(&self, x: &[f64]) -> Vec<f64> {
        if !self.swap {
            return x.to_vec();
        }
        let ny = self.nf;
        let mut out = vec![0.0; x.len()];
        for ix in 0..self.nx {
            for iy in 0..ny {
                out[iy * self.nx + ix] = x[ix * ny + iy];
            }
        }
        out
    }
}

/// Orthogonalize `w` against the columns in `basis` (two passes of classical
/// Gram-Schmidt) and normalize. Returns `false` if `w` is numerically inside
/// the span.
fn orthonormalize_against(basis: &[Vec<f64>], w: &mut [f64]) -> bool {
    let n0 = crate::numeric::norm(w);
    if n0 == 0.0 {
        return false;
    }
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|b| dot(b, w)).collect();
        for (b, c) in basis.iter().zip(coeffs) {
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
    }
    let n1 = crate::numeric::norm(w);
    if n1 <= 1e-10 * n0 {
        return false;
    }
    for wi in w.iter_mut() {
        *wi /= n1;
    }
    true
}

struct RitzPair {
    theta: f64,
    vec: Vec<f64>,
    residual: f64,
}

fn subspace_iteration(
    op: &Operator,
    chol: &BandCholesky,
    sub_sub: f64,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<RitzPair>> {
    let n = op.len();
    let p = (count + opts.guard).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut block: Vec<Vec<f64>> = Vec::with_capacity(p);
    while block.len() < p {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        if orthonormalize_against(&block, &mut v) {
            block.push(v);
        }
    }
    let mut last_residual = f64::INFINITY;
    let mut tmp = vec![0.0; n];
    for _iter in 0..opts.max_iterations.max(1) {
        // Krylov expansion with the shift-inverted operator
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p * (opts.depth + 1));
        for v in &block {
            let mut w = v.clone();
            if orthonormalize_against(&basis, &mut w) {
                basis.push(w);
            }
        }
        let mut front: Vec<Vec<f64>> = basis.clone();
        for _ in 0..opts.depth {
            let mut next = Vec::with_capacity(front.len());
            for v in &front {
                let mut w = v.clone();
                chol.solve_in_place(&mut w);
                if orthonormalize_against(&basis, &mut w) {
                    basis.push(w.clone());
                    next.push(w);
                }
            }
            if next.is_empty() {
                break;
            }
            front = next;
        }
        // Rayleigh-Ritz on A
        let q = basis.len();
        let av: Vec<Vec<f64>> = basis
            .iter()
            .map(|b| {
                let mut y = vec![0.0; n];
                op.apply(b, &mut y);
                y
            })
            .collect();
        let mut h = vec![0.0; q * q];
        for i in 0..q {
            for j in i..q {
                let v = dot(&basis[i], &av[j]);
                h[i * q + j] = v;
                h[j * q + i] = v;
            }
        }
        let (w, y) = symmetric_eigen(&h, q);
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
        let keep = p.min(q);
        let mut pairs = Vec::with_capacity(keep);
        for &c in order.iter().take(keep) {
            let mut x = vec![0.0; n];
            let mut ax = vec![0.0; n];
            for k in 0..q {
                let coef = y[k * q + c];
                if coef == 0.0 {
                    continue;
                }
                for i in 0..n {
                    x[i] += coef * basis[k][i];
                    ax[i] += coef * av[k][i];
                }
            }
            let nx = crate::numeric::norm(&x);
            for i in 0..n {
                x[i] /= nx;
                ax[i] /= nx;
            }
            let theta = w[c];
            for i in 0..n {
                tmp[i] = ax[i] - theta * x[i];
            }
            let r = crate::numeric::norm(&tmp) / (theta + sub_sub).abs();
            pairs.push(RitzPair {
                theta,
                vec: x,
                residual: r,
            });
        }
        // converged once every wanted guided pair is below tolerance and the
        // first unguided pair (if any among the wanted) is certainly unguided
        let mut worst: f64 = 0.0;
        let mut done = true;
        for pr in pairs.iter().take(count) {
            if pr.theta > 0.0 {
                worst = worst.max(pr.residual);
                if pr.residual >= opts.tolerance {
                    done = false;
                }
            } else {
                let bound = pr.residual * (pr.theta + sub_sub).abs();
                worst = worst.max(pr.residual);
                if pr.theta + bound >= 0.0 && pr.residual >= opts.tolerance {
                    done = false;
                }
                break;
            }
        }
        last_residual = worst;
        if done {
            pairs.truncate(count);
            return Ok(pairs);
        }
        block = pairs.into_iter().map(|pr| pr.vec).collect();
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: last_residual,
    })
}

/// Intensity centroid of a set of real fields on a grid.
pub fn centroid(grid: &GridSpec, fields: &[&[f64]]) -> (f64, f64) {
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for k in 0..grid.len() {
        let w: f64 = fields.iter().map(|f| f[k] * f[k]).sum();
        let (x, y) = grid.coords(k);
        sw += w;
        sx += w * x;
        sy += w * y;
    }
    if sw == 0.0 {
        (0.0, 0.0)
    } else {
        (sx / sw, sy / sw)
    }
}

/// Overlaps of `u` with `cos(m phi)` and `sin(m phi)` about `c`.
fn harmonic_overlap(grid: &GridSpec, u: &[f64], m: i32, c: (f64, f64)) -> (f64, f64) {
    let mut a = 0.0;
    let mut b = 0.0;
    for k in 0..grid.len() {
        let (x, y) = grid.coords(k);
        let phi = (y - c.1).atan2(x - c.0);
        let mp = m as f64 * phi;
        a += u[k] * mp.cos();
        b += u[k] * mp.sin();
    }
    (a, b)
}

/// Dominant azimuthal order (0..=6) of the real fields about `c`.
pub fn dominant_order(grid: &GridSpec, fields: &[&[f64]], c: (f64, f64)) -> i32 {
    let mut best = (0, f64::MIN);
    for m in 0..=6 {
        let mut p = 0.0;
        for f in fields {
            let (a, b) = harmonic_overlap(grid, f, m, c);
            p += if m == 0 { a * a } else { 4.0 * (a * a + b * b) };
        }
        if p > best.1 * (1.0 + 1e-9) {
            best = (m, p);
        }
    }
    best.0
}

fn make_field(grid: &GridSpec, v: &[f64], beta: f64, k0: f64, oam: i32, residual: f64) -> ModeField {
    let s = 1.0 / grid.cell_area().sqrt();
    ModeField {
        grid: *grid,
        beta,
        n_eff: beta / k0,
        profile: v.iter().map(|&x| Complex64::new(x * s, 0.0)).collect(),
        pol: Polarization::X,
        oam,
        norm: 1.0,
        residual,
    }
}

/// The `count` largest-beta guided modes, ordered by descending beta with
/// degenerate azimuthal doublets ordered even (cos) then odd (sin).
pub fn solve_modes(profile: &PermittivityProfile, k0: f64, count: usize) -> Result<Vec<ModeField>> {
    solve_modes_with(profile, k0, count, &SolverOptions::default())
}

pub fn solve_modes_with(
    profile: &PermittivityProfile,
    k0: f64,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<ModeField>> {
    if count == 0 {
        return Err(Error::Contract("mode count must be at least 1".into()));
    }
    let max_iso = profile.max_iso();
    if !(max_iso > 0.0) {
        return Err(Error::Cutoff);
    }
    let grid = profile.grid;
    let k0_um = k0 * 1e-6;
    let sub_sub = k0_um * k0_um * profile.eps_s;
    let op = Operator::new(profile, k0_um);
    let sigma = k0_um * k0_um * max_iso;
    let chol = BandCholesky::factor(op.len(), op.nf, |i, j| op.shifted_entry(sigma, i, j))
        .ok_or_else(|| Error::Model("shifted operator is not positive definite".into()))?;
    let pairs = subspace_iteration(&op, &chol, sub_sub, count, opts)?;

    let guided: Vec<RitzPair> = pairs.into_iter().filter(|p| p.theta > 0.0).collect();
    if guided.is_empty() {
        return Err(Error::Cutoff);
    }
    let betas: Vec<f64> = guided.iter().map(|p| (p.theta + sub_sub).sqrt() * 1e6).collect();
    let vecs: Vec<Vec<f64>> = guided.iter().map(|p| op.to_grid(&p.vec)).collect();

    let mut out = Vec::with_capacity(guided.len());
    let mut i = 0;
    while i < guided.len() {
        let doublet = i + 1 < guided.len() && (betas[i] - betas[i + 1]).abs() / betas[i] < DOUBLET_TOL;
        if doublet {
            let (u, v) = (&vecs[i], &vecs[i + 1]);
            let c = centroid(&grid, &[u, v]);
            let m = dominant_order(&grid, &[u, v], c);
            if m > 0 {
                let pair = gauge_doublet(&grid, u, v, m, c, guided[i].theta, guided[i + 1].theta);
                let (even, odd, swapped) = pair;
                let (be, bo) = if swapped {
                    (betas[i + 1], betas[i])
                } else {
                    (betas[i], betas[i + 1])
                };
                let (re, ro) = if swapped {
                    (guided[i + 1].residual, guided[i].residual)
                } else {
                    (guided[i].residual, guided[i + 1].residual)
                };
                out.push(make_field(&grid, &even, be, k0, m, re));
                out.push(make_field(&grid, &odd, bo, k0, m, ro));
                i += 2;
                continue;
            }
        }
        let u = &vecs[i];
        let c = centroid(&grid, &[u]);
        let m = dominant_order(&grid, &[u], c);
        let mut v = u.clone();
        fix_sign(&grid, &mut v, m, c);
        out.push(make_field(&grid, &v, betas[i], k0, m, guided[i].residual));
        i += 1;
    }
    Ok(out)
}

fn fix_sign(grid: &GridSpec, v: &mut [f64], m: i32, c: (f64, f64)) {
    let (a, b) = harmonic_overlap(grid, v, m, c);
    let s = if a.abs() >= b.abs() { a } else { b };
    let s = if s == 0.0 {
        // fall back to the largest entry
        let k = (0..v.len())
            .max_by(|&x, &y| v[x].abs().total_cmp(&v[y].abs()))
            .unwrap_or(0);
        v[k]
    } else {
        s
    };
    if s < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Orient a doublet so that the first member maximizes its overlap with
/// `cos(m phi)` and the second has positive overlap with `sin(m phi)`.
fn gauge_doublet(
    grid: &GridSpec,
    u: &[f64],
    v: &[f64],
    m: i32,
    c: (f64, f64),
    theta_u: f64,
    theta_v: f64,
) -> (Vec<f64>, Vec<f64>, bool) {
    let (au, bu) = harmonic_overlap(grid, u, m, c);
    let (av, bv) = harmonic_overlap(grid, v, m, c);
    let scale = theta_u.abs().max(theta_v.abs()).max(1e-300);
    let exact = (theta_u - theta_v).abs() <= REGAUGE_TOL * scale;
    if exact {
        let r = (au * au + av * av).sqrt();
        let (ca, sa) = if r > 0.0 { (au / r, av / r) } else { (1.0, 0.0) };
        let mut even: Vec<f64> = u.iter().zip(v).map(|(a, b)| ca * a + sa * b).collect();
        let mut odd: Vec<f64> = u.iter().zip(v).map(|(a, b)| -sa * a + ca * b).collect();
        let (_, bo) = harmonic_overlap(grid, &odd, m, c);
        if bo < 0.0 {
            odd.iter_mut().for_each(|x| *x = -*x);
        }
        let (ae, _) = harmonic_overlap(grid, &even, m, c);
        if ae < 0.0 {
            even.iter_mut().for_each(|x| *x = -*x);
        }
        (even, odd, false)
    } else {
        // split doublet: keep the eigenvectors, order and sign them
        let u_is_even = au.abs() + bv.abs() >= av.abs() + bu.abs();
        let (mut even, mut odd, swapped) = if u_is_even {
            (u.to_vec(), v.to_vec(), false)
        } else {
            (v.to_vec(), u.to_vec(), true)
        };
        let (ae, _) = harmonic_overlap(grid, &even, m, c);
        if ae < 0.0 {
            even.iter_mut().for_each(|x| *x = -*x);
        }
        let (_, bo) = harmonic_overlap(grid, &odd, m, c);
        if bo < 0.0 {
            odd.iter_mut().for_each(|x| *x = -*x);
        }
        (even, odd, swapped)
    }
}

/// Eigen-residual `|A x - beta^2 x| / |beta^2 x|` of a real mode, recomputed
/// from scratch on the grid.
pub fn eigen_residual(profile: &PermittivityProfile, k0: f64, mode: &ModeField) -> f64 {
    let g = &profile.grid;
    let k0_um = k0 * 1e-6;
    let b2 = (mode.beta * 1e-6).powi(2);
    let cx = 1.0 / (g.dx * g.dx);
    let cy = 1.0 / (g.dy * g.dy);
    let e = &mode.profile;
    let mut num = 0.0;
    let mut den = 0.0;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let i = g.idx(ix, iy);
            let mut lap = -2.0 * (cx + cy) * e[i];
            if ix > 0 {
                lap += cx * e[i - 1];
            }
            if ix + 1 < g.nx {
                lap += cx * e[i + 1];
            }
            if iy > 0 {
                lap += cy * e[i - g.nx];
            }
            if iy + 1 < g.ny {
                lap += cy * e[i + g.nx];
            }
            let eps = profile.eps_s + profile.eps_iso[i];
            // subtract the substrate part analytically to avoid cancellation
            let r = lap + (k0_um * k0_um * eps - b2) * e[i];
            num += r.norm_sqr();
            den += (b2 * e[i]).norm_sqr();
        }
    }
    (num / den).sqrt()
}

/// Which mode `effective_index` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelector {
    Fundamental,
    /// Even member of the azimuthal doublet of this order.
    Vortex(u32),
    Index(usize),
}

/// Position of the even member of the highest-beta doublet of order `ell`.
pub fn find_doublet(modes: &[ModeField], ell: u32) -> Option<usize> {
    (0..modes.len().saturating_sub(1)).find(|&i| {
        modes[i].oam == ell as i32
            && modes[i + 1].oam == ell as i32
            && (modes[i].beta - modes[i + 1].beta).abs() / modes[i].beta < DOUBLET_TOL
    })
}

/// Number of modes to request so that the doublet of order `ell` is included.
pub fn count_for_order(ell: u32) -> usize {
    2 * ell as usize + 3
}

pub fn effective_index(
    profile: &PermittivityProfile,
    k0: f64,
    selector: ModeSelector,
    opts: &SolverOptions,
) -> Result<f64> {
    match selector {
        ModeSelector::Fundamental => {
            let m = solve_modes_with(profile, k0, 1, opts)?;
            Ok(m[0].n_eff)
        }
        ModeSelector::Index(i) => {
            let m = solve_modes_with(profile, k0, i + 1, opts)?;
            m.get(i).map(|m| m.n_eff).ok_or(Error::Cutoff)
        }
        ModeSelector::Vortex(ell) => {
            let m = solve_modes_with(profile, k0, count_for_order(ell), opts)?;
            find_doublet(&m, ell).map(|i| m[i].n_eff).ok_or(Error::Cutoff)
        }
    }
}

/// Combine a degenerate standing-wave doublet into the vortex pair
/// `(even + j odd)/sqrt 2`, `(even - j odd)/sqrt 2` carrying charge `+ell`, `-ell`.
pub fn make_oam_pair(even: &ModeField, odd: &ModeField, ell: i32) -> Result<(ModeField, ModeField)> {
    even.grid.ensure_same(&odd.grid)?;
    let rel = (even.beta - odd.beta).abs() / even.beta.abs().max(odd.beta.abs());
    if !(rel < 1e-4) {
        return Err(Error::Contract(format!(
            "doublet is not degenerate: relative beta split {rel:.3e}"
        )));
    }
    let ov = even.inner(odd).norm() / (even.power() * odd.power()).sqrt();
    if ov > 1e-6 {
        return Err(Error::Contract(format!(
            "doublet members are not orthogonal: overlap {ov:.3e}"
        )));
    }
    if ell == 0 || even.oam.abs() != ell.abs() || odd.oam.abs() != ell.abs() {
        return Err(Error::Contract(format!(
            "doublet order ({}, {}) does not match requested charge {ell}",
            even.oam, odd.oam
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let j = Complex64::new(0.0, 1.0);
    let beta = 0.5 * (even.beta + odd.beta);
    let mk = |sign: f64| -> ModeField {
        let profile = even
            .profile
            .iter()
            .zip(&odd.profile)
            .map(|(e, o)| (e + j * sign * o) * s)
            .collect();
        ModeField {
            grid: even.grid,
            beta,
            n_eff: 0.5 * (even.n_eff + odd.n_eff),
            profile,
            pol: even.pol,
            oam: if sign > 0.0 { ell.abs() } else { -ell.abs() },
            norm: 0.5 * (even.norm + odd.norm),
            residual: even.residual.max(odd.residual),
        }
    };
    Ok((mk(1.0), mk(-1.0)))
}

/// Dispersion of the single-mode guide and the first two ring doublets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    pub radii: Vec<f64>,
    pub n_eff_gaussian: f64,
    pub n_eff_l1: Vec<f64>,
    pub n_eff_l2: Vec<f64>,
}

impl DispersionCurve {
    pub fn order(&self, ell: u32) -> &[f64] {
        match ell {
            1 => &self.n_eff_l1,
            _ => &self.n_eff_l2,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("radius_um,n_eff_gaussian,n_eff_l1,n_eff_l2\n");
        for (i, r) in self.radii.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r, self.n_eff_gaussian, self.n_eff_l1[i], self.n_eff_l2[i]
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveguide::{gaussian_track_profile, ring_profile, RingSpec, TrackSpec};
    use std::f64::consts::PI;

    const K0: f64 = 2.0 * PI / 780e-9;
    const EPS_S: f64 = 1.45 * 1.45;

    fn single() -> PermittivityProfile {
        let g = GridSpec::covering(-10.0, 10.0, -10.0, 10.0, 0.25).unwrap();
        let t = TrackSpec {
            center: (0.0, 0.0),
            widths: (2.38, 2.38),
            peak_delta_eps: 3e-3 * EPS_S,
        };
        gaussian_track_profile(&g, &t, EPS_S).unwrap()
    }

    fn ring(r: f64) -> PermittivityProfile {
        let half = r + 4.5 * 0.55 * r + 1.0;
        let g = GridSpec::covering(-half, half, -half, half, 0.2).unwrap();
        let w = 0.55 * r;
        let spec = RingSpec {
            radius: r,
            n_tracks: 12,
            track: TrackSpec {
                center: (0.0, 0.0),
                widths: (w, w),
                peak_delta_eps: 3e-3 * EPS_S,
            },
            center_scan: false,
        };
        ring_profile(&g, &spec, EPS_S).unwrap()
    }

    #[test]
    fn uniform_profile_is_cutoff() {
        let g = GridSpec::covering(-4.0, 4.0, -4.0, 4.0, 0.25).unwrap();
        let p = PermittivityProfile::uniform(g, EPS_S);
        assert!(matches!(solve_modes(&p, K0, 1), Err(Error::Cutoff)));
    }

    #[test]
    fn single_track_fundamental_is_guided_and_converged() {
        let p = single();
        let m = solve_modes(&p, K0, 1).unwrap();
        let n = m[0].n_eff;
        assert!(n > 1.45 && n < 1.45 + p.max_iso() / 2.9 + 1e-6, "n_eff {n}");
        assert!(eigen_residual(&p, K0, &m[0]) < 1e-8);
        assert!((m[0].power() - 1.0).abs() < 1e-10);
        assert_eq!(m[0].oam, 0);
    }

    #[test]
    fn ring_doublets_are_gauged_and_orthonormal() {
        let p = ring(5.2);
        let modes = solve_modes(&p, K0, 5).unwrap();
        assert_eq!(modes.len(), 5);
        assert!(find_doublet(&modes, 2).is_some());
        for i in 0..modes.len() {
            assert!(eigen_residual(&p, K0, &modes[i]) < 1e-8);
            for j in 0..modes.len() {
                let g = modes[i].inner(&modes[j]).norm();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-8, "gram[{i}][{j}] = {g}");
            }
        }
        let i1 = find_doublet(&modes, 1).expect("first-order doublet");
        let (e, o) = (&modes[i1], &modes[i1 + 1]);
        assert!((e.beta - o.beta).abs() / e.beta < 1e-5);
        let c = (0.0, 0.0);
        let re: Vec<f64> = e.profile.iter().map(|v| v.re).collect();
        let ro: Vec<f64> = o.profile.iter().map(|v| v.re).collect();
        let (ae, be) = harmonic_overlap(&p.grid, &re, 1, c);
        let (ao, bo) = harmonic_overlap(&p.grid, &ro, 1, c);
        assert!(ae > 0.0 && bo > 0.0);
        assert!(be.abs() < 1e-6 * ae && ao.abs() < 1e-6 * bo);
    }

    #[test]
    fn solver_is_deterministic() {
        let p = single();
        let a = solve_modes(&p, K0, 2).unwrap();
        let b = solve_modes(&p, K0, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let p = single();
        let opts = SolverOptions {
            max_iterations: 1,
            depth: 1,
            ..SolverOptions::default()
        };
        match solve_modes_with(&p, K0, 3, &opts) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual.is_finite() && residual > 0.0);
            }
            other => panic!("expected no convergence, got {other:?}"),
        }
    }

    #[test]
    fn oam_pair_construction_is_unitary() {
        let p = ring(3.7);
        let modes = solve_modes(&p, K0, 3).unwrap();
        let i = find_doublet(&modes, 1).unwrap();
        let (plus, minus) = make_oam_pair(&modes[i], &modes[i + 1], 1).unwrap();
        assert!(plus.inner(&minus).norm() < 1e-10);
        assert!((plus.power() - minus.power()).abs() < 1e-12);
        assert_eq!((plus.oam, minus.oam), (1, -1));
        // invert: even = (plus + minus)/sqrt2, odd = (plus - minus)/(j sqrt2)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let j = Complex64::new(0.0, 1.0);
        for k in 0..p.grid.len() {
            let e = (plus.profile[k] + minus.profile[k]) * s;
            let o = (plus.profile[k] - minus.profile[k]) * s / j;
            assert!((e - modes[i].profile[k]).norm() < 1e-12);
            assert!((o - modes[i + 1].profile[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn oam_pair_rejects_bad_inputs() {
        let p = ring(3.7);
        let modes = solve_modes(&p, K0, 3).unwrap();
        let i = find_doublet(&modes, 1).unwrap();
        // fundamental and first-order mode are neither degenerate nor same order
        assert!(make_oam_pair(&modes[0], &modes[i], 1).is_err());
        assert!(make_oam_pair(&modes[i], &modes[i + 1], 2).is_err());
        assert!(make_oam_pair(&modes[i], &modes[i], 1).is_err());
    }

    #[test]
    fn n_eff_grows_with_index_contrast() {
        let p = single();
        let mut q = p.clone();
        q.eps_iso.iter_mut().for_each(|v| *v *= 1.2);
        let opts = SolverOptions::default();
        let a = effective_index(&p, K0, ModeSelector::Fundamental, &opts).unwrap();
        let b = effective_index(&q, K0, ModeSelector::Fundamental, &opts).unwrap();
        assert!(b > a);
    }
}
