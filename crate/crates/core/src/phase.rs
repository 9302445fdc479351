//! Ring radius at which a ring vortex order is phase matched to the single
//! guide.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::RingShape;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::modes::{find_doublet, solve_modes_with, DispersionCurve, ModeSelector, SolverOptions};
use crate::waveguide::{ring_profile, PermittivityProfile};

/// Rings that share a shape and scale with their radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingFamily {
    pub shape: RingShape,
    pub eps_s: f64,
    pub dx_um: f64,
    /// Clearance beyond the outermost track centre, in track widths.
    pub margin_widths: f64,
}

impl RingFamily {
    pub fn profile_at(&self, radius: f64) -> Result<PermittivityProfile> {
        let shape = self.shape.with_radius(radius);
        let spec = shape.spec(self.eps_s, (0.0, 0.0));
        let w = shape.track_shape().widths();
        let half = radius + self.margin_widths * w.0.max(w.1);
        let g = GridSpec::covering(-half, half, -half, half, self.dx_um)?;
        ring_profile(&g, &spec, self.eps_s)
    }

    /// Effective indices of the first two vortex orders at `radius`. An order
    /// that is not guided is reported at the substrate index, its cutoff
    /// value, with `false` in the mask.
    pub fn orders_at(&self, radius: f64, k0: f64, opts: &SolverOptions) -> Result<[(f64, bool); 2]> {
        let p = self.profile_at(radius)?;
        let n_s = self.eps_s.sqrt();
        let modes = match solve_modes_with(&p, k0, 7, opts) {
            Ok(m) => m,
            Err(Error::Cutoff) => return Ok([(n_s, false), (n_s, false)]),
            Err(e) => return Err(e),
        };
        let pick = |ell| match find_doublet(&modes, ell) {
            Some(i) => (modes[i].n_eff, true),
            None => (n_s, false),
        };
        Ok([pick(1), pick(2)])
    }

    pub fn order_at(&self, radius: f64, order: u32, k0: f64, opts: &SolverOptions) -> Result<f64> {
        let p = self.profile_at(radius)?;
        crate::modes::effective_index(&p, k0, ModeSelector::Vortex(order), opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatch {
    pub order: u32,
    pub radius: f64,
    pub n_eff_single: f64,
    pub curve: DispersionCurve,
    pub guided_l1: Vec<bool>,
    pub guided_l2: Vec<bool>,
}

/// Resolution of the bisection (um).
pub const RADIUS_TOL: f64 = 0.01;

/// Scan the dispersion of both vortex orders at `n` radii in `[lo, hi]`.
pub fn dispersion_scan(
    family: &RingFamily,
    n_single: f64,
    lo: f64,
    hi: f64,
    n: usize,
    k0: f64,
    opts: &SolverOptions,
) -> Result<(DispersionCurve, Vec<bool>, Vec<bool>)> {
    if !(hi > lo && lo > 0.0) || n < 2 {
        return Err(Error::Contract(format!(
            "bad radius range [{lo}, {hi}] with {n} points"
        )));
    }
    let radii: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let rows: Vec<[(f64, bool); 2]> = radii
        .par_iter()
        .map(|&r| family.orders_at(r, k0, opts))
        .collect::<Result<Vec<_>>>()?;
    let curve = DispersionCurve {
        radii: radii.clone(),
        n_eff_gaussian: n_single,
        n_eff_l1: rows.iter().map(|r| r[0].0).collect(),
        n_eff_l2: rows.iter().map(|r| r[1].0).collect(),
    };
    let g1 = rows.iter().map(|r| r[0].1).collect();
    let g2 = rows.iter().map(|r| r[1].1).collect();
    Ok((curve, g1, g2))
}

/// Bisection root of `n_ring(order, R) - n_single` inside the scanned range.
pub fn phase_match_radius(
    single: &PermittivityProfile,
    family: &RingFamily,
    order: u32,
    range: (f64, f64),
    scan_points: usize,
    k0: f64,
    opts: &SolverOptions,
) -> Result<PhaseMatch> {
    let mut v = phase_match_orders(single, family, &[order], range, scan_points, k0, opts)?;
    Ok(v.swap_remove(0))
}

/// Phase-matching radii of several orders from one shared dispersion scan.
pub fn phase_match_orders(
    single: &PermittivityProfile,
    family: &RingFamily,
    orders: &[u32],
    range: (f64, f64),
    scan_points: usize,
    k0: f64,
    opts: &SolverOptions,
) -> Result<Vec<PhaseMatch>> {
    if let Some(o) = orders.iter().find(|o| !(1..=2).contains(*o)) {
        return Err(Error::Contract(format!(
            "phase matching supports orders 1 and 2, got {o}"
        )));
    }
    let n_single = crate::modes::effective_index(single, k0, ModeSelector::Fundamental, opts)?;
    let (curve, g1, g2) = dispersion_scan(family, n_single, range.0, range.1, scan_points, k0, opts)?;
    orders
        .iter()
        .map(|&order| {
            let radius = refine_crossing(
                family,
                &curve,
                if order == 1 { &g1 } else { &g2 },
                order,
                range,
                k0,
                opts,
            )?;
            Ok(PhaseMatch {
                order,
                radius,
                n_eff_single: n_single,
                curve: curve.clone(),
                guided_l1: g1.clone(),
                guided_l2: g2.clone(),
            })
        })
        .collect()
}

fn refine_crossing(
    family: &RingFamily,
    curve: &DispersionCurve,
    guided: &[bool],
    order: u32,
    range: (f64, f64),
    k0: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let n_single = curve.n_eff_gaussian;
    let vals = curve.order(order);
    let mut bracket = None;
    for i in 0..vals.len() - 1 {
        if !(guided[i] || guided[i + 1]) {
            continue;
        }
        let (a, b) = (vals[i] - n_single, vals[i + 1] - n_single);
        if a == 0.0 {
            bracket = Some((curve.radii[i], curve.radii[i]));
            break;
        }
        if a * b < 0.0 {
            bracket = Some((curve.radii[i], curve.radii[i + 1]));
            break;
        }
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::NoCrossing {
        lo: range.0,
        hi: range.1,
    })?;
    let f = |r: f64| -> Result<f64> {
        match family.order_at(r, order, k0, opts) {
            Ok(n) => Ok(n - n_single),
            Err(Error::Cutoff) => Ok(family.eps_s.sqrt() - n_single),
            Err(e) => Err(e),
        }
    };
    if hi > lo {
        let mut f_lo = f(lo)?;
        while hi - lo > RADIUS_TOL {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (fm < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
        }
    }
    Ok(0.5 * (lo + hi))
}
