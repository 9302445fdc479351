//! Three-segment chip propagation: lead-in, coupling region, lead-out.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::evolve::{evolve, propagator, AmplitudeState, Method};
use crate::numeric::CMatrix;

/// Output amplitudes of the four vortex modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaCoefficients {
    pub x_plus: Complex64,
    pub x_minus: Complex64,
    pub y_plus: Complex64,
    pub y_minus: Complex64,
}

impl GammaCoefficients {
    pub fn from_slice(v: &[Complex64]) -> Self {
        GammaCoefficients {
            x_plus: v[0],
            x_minus: v[1],
            y_plus: v[2],
            y_minus: v[3],
        }
    }

    pub fn as_array(&self) -> [Complex64; 4] {
        [self.x_plus, self.x_minus, self.y_plus, self.y_minus]
    }

    pub fn power(&self) -> f64 {
        self.as_array().iter().map(|g| g.norm_sqr()).sum()
    }

    /// Fraction of the vortex power carried by the `+l` modes.
    pub fn plus_fraction(&self) -> f64 {
        let p = self.power();
        if p == 0.0 {
            return 0.0;
        }
        (self.x_plus.norm_sqr() + self.y_plus.norm_sqr()) / p
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        GammaCoefficients {
            x_plus: self.x_plus * s,
            x_minus: self.x_minus * s,
            y_plus: self.y_plus * s,
            y_minus: self.y_minus * s,
        }
    }
}

/// Raised-cosine switch-on of the inter-waveguide blocks at both ends of the
/// coupling region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    /// Length of each ramp (m).
    pub length: f64,
    pub steps: usize,
}

impl Default for Ramp {
    fn default() -> Self {
        Ramp {
            length: 0.5e-3,
            steps: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SegmentPlan {
    pub l1: f64,
    pub lcp: f64,
    pub l2: f64,
    pub k1: CMatrix,
    pub kcp: CMatrix,
    pub k2: CMatrix,
    pub ramp: Option<Ramp>,
    pub method: Method,
}

impl SegmentPlan {
    /// Plan whose outer segments use `kcp` with the inter-waveguide blocks
    /// removed.
    pub fn new(kcp: &CouplingMatrix, l1: f64, lcp: f64, l2: f64) -> Result<Self> {
        for (name, v) in [("l1", l1), ("lcp", lcp), ("l2", l2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Contract(format!("segment length {name} must be >= 0, got {v}")));
            }
        }
        let open = kcp.zero_inter_blocks();
        Ok(SegmentPlan {
            l1,
            lcp,
            l2,
            k1: open.k.clone(),
            kcp: kcp.k.clone(),
            k2: open.k,
            ramp: None,
            method: Method::Expm,
        })
    }

    pub fn total_length(&self) -> f64 {
        self.l1 + self.lcp + self.l2
    }

    /// Piecewise-constant generators covering the whole chip, as `(K, dz)`.
    pub fn pieces(&self) -> Vec<(CMatrix, f64)> {
        let mut out = vec![(self.k1.clone(), self.l1)];
        match self.ramp {
            Some(r) if r.length > 0.0 && r.steps > 0 && self.lcp > 0.0 => {
                let lr = r.length.min(0.5 * self.lcp);
                let h = lr / r.steps as f64;
                let blend = |g: f64| -> CMatrix { self.k1.add(&self.kcp.sub(&self.k1).scale(Complex64::new(g, 0.0))) };
                let gs: Vec<f64> = (0..r.steps)
                    .map(|i| {
                        let t = (i as f64 + 0.5) / r.steps as f64;
                        0.5 * (1.0 - (std::f64::consts::PI * t).cos())
                    })
                    .collect();
                for &g in &gs {
                    out.push((blend(g), h));
                }
                out.push((self.kcp.clone(), self.lcp - 2.0 * lr));
                for &g in gs.iter().rev() {
                    out.push((blend(g), h));
                }
            }
            _ => out.push((self.kcp.clone(), self.lcp)),
        }
        out.push((self.k2.clone(), self.l2));
        out
    }
}

#[derive(Debug, Clone)]
pub struct ChipOutput {
    pub gamma: GammaCoefficients,
    /// Amplitudes left in the Gaussian modes `[G_x', G_y']`.
    pub residue: [Complex64; 2],
    pub state: AmplitudeState,
    pub notices: Vec<String>,
}

/// Full-chip transfer matrix `M2 Mcp M1`.
pub fn transfer_matrix(plan: &SegmentPlan) -> (CMatrix, Vec<String>) {
    let mut m = CMatrix::identity(plan.k1.dim());
    let mut notes = Vec::new();
    for (k, dz) in plan.pieces() {
        let (p, n) = propagator(&k, dz);
        m = p.mul(&m);
        notes.extend(n);
    }
    (m, notes)
}

pub fn propagate_chip(input: &AmplitudeState, plan: &SegmentPlan) -> Result<ChipOutput> {
    if input.amps.len() != 6 {
        return Err(Error::Contract(format!(
            "chip input needs 6 amplitudes, got {}",
            input.amps.len()
        )));
    }
    if input.amps[2..].iter().any(|a| a.norm() != 0.0) {
        return Err(Error::Contract(
            "chip input must have zero vortex-mode amplitudes".into(),
        ));
    }
    let mut state = input.clone();
    let mut notices = Vec::new();
    for (k, dz) in plan.pieces() {
        let (s, note) = evolve(&state, &k, dz, plan.method)?;
        state = s;
        notices.extend(note);
    }
    Ok(ChipOutput {
        gamma: GammaCoefficients::from_slice(&state.amps[2..6]),
        residue: [state.amps[0], state.amps[1]],
        state,
        notices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Ideal device: a Gaussian pair coupled to the even combination of a
    /// degenerate vortex pair in each polarization.
    fn ideal(kappa_even: f64) -> CouplingMatrix {
        let k = kappa_even / std::f64::consts::SQRT_2;
        let mut m = CMatrix::zeros(6);
        for (g, p, q) in [(0, 2, 3), (1, 4, 5)] {
            m[(g, p)] = c(k);
            m[(p, g)] = c(k);
            m[(g, q)] = c(k);
            m[(q, g)] = c(k);
        }
        CouplingMatrix {
            k: m,
            provenance: vec![vec![Vec::new(); 6]; 6],
            raw_asymmetry: 0.0,
            coupled: true,
        }
    }

    fn input() -> AmplitudeState {
        AmplitudeState::new(vec![c(0.6), Complex64::new(0.0, 0.8), c(0.0), c(0.0), c(0.0), c(0.0)])
    }

    #[test]
    fn no_coupling_length_gives_no_conversion() {
        let plan = SegmentPlan::new(&ideal(250.0), 5e-3, 0.0, 5e-3).unwrap();
        let out = propagate_chip(&input(), &plan).unwrap();
        assert_eq!(out.gamma.power(), 0.0);
    }

    #[test]
    fn half_beat_length_transfers_everything() {
        let ke = 250.0;
        let lcp = std::f64::consts::PI / (2.0 * ke);
        let plan = SegmentPlan::new(&ideal(ke), 2e-3, lcp, 3e-3).unwrap();
        let out = propagate_chip(&input(), &plan).unwrap();
        assert!((out.gamma.power() - 1.0).abs() < 1e-12);
        assert!(out.residue[0].norm() < 1e-7 && out.residue[1].norm() < 1e-7);
    }

    #[test]
    fn transfer_matrix_is_unitary_and_matches_stepping() {
        let mut k = ideal(300.0);
        k.k[(0, 0)] = c(40.0);
        k.k[(3, 3)] = c(-25.0);
        let mut plan = SegmentPlan::new(&k, 3e-3, 4e-3, 3e-3).unwrap();
        plan.ramp = Some(Ramp::default());
        let (m, notes) = transfer_matrix(&plan);
        assert!(notes.is_empty());
        assert!(m.unitarity_defect() < 1e-12);
        let out = propagate_chip(&input(), &plan).unwrap();
        let direct = m.mul_vec(&input().amps);
        for i in 0..6 {
            assert!((direct[i] - out.state.amps[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_vortex_input() {
        let plan = SegmentPlan::new(&ideal(100.0), 1e-3, 1e-3, 1e-3).unwrap();
        let mut s = input();
        s.amps[3] = c(0.1);
        assert!(propagate_chip(&s, &plan).is_err());
        assert!(SegmentPlan::new(&ideal(100.0), -1.0, 1e-3, 1e-3).is_err());
    }

    proptest::proptest! {
        #[test]
        fn common_beta_shift_leaves_moduli_unchanged(
            v in proptest::collection::vec(-400.0f64..400.0, 21),
            shift in -1e4f64..1e4,
        ) {
            let mut k = ideal(0.0);
            let mut it = v.into_iter();
            for i in 0..6 {
                k.k[(i, i)] = c(it.next().unwrap());
                for j in i + 1..6 {
                    let z = c(it.next().unwrap());
                    k.k[(i, j)] = z;
                    k.k[(j, i)] = z;
                }
            }
            let mut shifted = k.clone();
            for i in 0..6 {
                shifted.k[(i, i)] += c(shift);
            }
            let a = propagate_chip(&input(), &SegmentPlan::new(&k, 2e-3, 4e-3, 3e-3).unwrap()).unwrap();
            let b = propagate_chip(&input(), &SegmentPlan::new(&shifted, 2e-3, 4e-3, 3e-3).unwrap()).unwrap();
            for (x, y) in a.gamma.as_array().iter().zip(b.gamma.as_array()) {
                proptest::prop_assert!((x.norm() - y.norm()).abs() < 1e-10);
            }
        }
    }
}
