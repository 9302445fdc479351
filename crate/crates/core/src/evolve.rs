//! Amplitude evolution `dA/dz = -j K A` for constant `K`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{hermitian_eigen, CMatrix, J};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub amps: Vec<Complex64>,
    /// Position along the chip (m).
    pub z: f64,
}

impl AmplitudeState {
    pub fn new(amps: Vec<Complex64>) -> Self {
        AmplitudeState { amps, z: 0.0 }
    }

    pub fn power(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Expm,
    Rk4,
}

/// Relative Hermitian defect above which the eigen route is not trusted.
const HERMITIAN_TOL: f64 = 1e-12;

/// `exp(-j K dz)`. Hermitian generators go through an eigendecomposition; any
/// other generator falls back to scaling and squaring of a Taylor series and
/// the returned notice says so.
pub fn propagator(k: &CMatrix, dz: f64) -> (CMatrix, Option<String>) {
    let scale = k.frobenius();
    if scale == 0.0 || dz == 0.0 {
        return (CMatrix::identity(k.dim()), None);
    }
    if k.hermitian_defect() <= HERMITIAN_TOL * scale {
        if let Some((w, v)) = hermitian_eigen(k) {
            let n = k.dim();
            let mut d = CMatrix::zeros(n);
            for i in 0..n {
                d[(i, i)] = (-J * w[i] * dz).exp();
            }
            return (v.mul(&d).mul(&v.adjoint()), None);
        }
        let m = series_expm(&k.scale(-J * dz));
        return (m, Some("eigendecomposition stalled; used scaling-and-squaring".into()));
    }
    let m = series_expm(&k.scale(-J * dz));
    (
        m,
        Some(format!(
            "non-Hermitian generator (defect {:.2e}); used scaling-and-squaring",
            k.hermitian_defect() / scale
        )),
    )
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn series_expm(a: &CMatrix) -> CMatrix {
    let n = a.dim();
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.25 {
        s += 1;
    }
    let b = a.scale(Complex64::new(2f64.powi(-(s as i32)), 0.0));
    let mut term = CMatrix::identity(n);
    let mut sum = CMatrix::identity(n);
    for k in 1..=20 {
        term = term.mul(&b).scale(Complex64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.mul(&sum);
    }
    sum
}

fn deriv(k: &CMatrix, y: &[Complex64]) -> Vec<Complex64> {
    k.mul_vec(y).into_iter().map(|v| -J * v).collect()
}

fn rk4_step(k: &CMatrix, y: &[Complex64], h: f64) -> Vec<Complex64> {
    let axpy = |a: &[Complex64], b: &[Complex64], s: f64| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    };
    let k1 = deriv(k, y);
    let k2 = deriv(k, &axpy(y, &k1, 0.5 * h));
    let k3 = deriv(k, &axpy(y, &k2, 0.5 * h));
    let k4 = deriv(k, &axpy(y, &k3, h));
    (0..y.len())
        .map(|i| y[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0))
        .collect()
}

/// Classical RK4 with step-doubling error control.
pub fn rk4(k: &CMatrix, y0: &[Complex64], dz: f64, tol: f64) -> Vec<Complex64> {
    let mut y = y0.to_vec();
    if dz == 0.0 {
        return y;
    }
    let rate = k.max_abs() * k.dim() as f64;
    let mut h = if rate > 0.0 { (0.05 / rate).min(dz) } else { dz };
    let mut z = 0.0;
    while z < dz {
        h = h.min(dz - z);
        let full = rk4_step(k, &y, h);
        let half = rk4_step(k, &y, 0.5 * h);
        let two = rk4_step(k, &half, 0.5 * h);
        let err = full.iter().zip(&two).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / 15.0;
        if err <= tol || h < 1e-15 * dz {
            // Richardson-corrected accepted step
            y = two.iter().zip(&full).map(|(b, a)| b + (b - a) / 15.0).collect();
            z += h;
            let grow = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 2.0 };
            h *= grow.clamp(0.2, 2.0);
        } else {
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.9);
        }
    }
    y
}

pub const RK4_TOL: f64 = 1e-12;

/// Advance `state` by `dz` under generator `k`. Returns the new state and an
/// optional notice about the numerical route taken.
pub fn evolve(
    state: &AmplitudeState,
    k: &CMatrix,
    dz: f64,
    method: Method,
) -> Result<(AmplitudeState, Option<String>)> {
    if !(dz >= 0.0) {
        return Err(Error::Contract(format!("propagation step must be >= 0, got {dz}")));
    }
    if state.amps.len() != k.dim() {
        return Err(Error::Contract(format!(
            "state has {} amplitudes, generator is {}x{}",
            state.amps.len(),
            k.dim(),
            k.dim()
        )));
    }
    let (amps, notice) = match method {
        Method::Expm => {
            let (m, notice) = propagator(k, dz);
            (m.mul_vec(&state.amps), notice)
        }
        Method::Rk4 => (rk4(k, &state.amps, dz, RK4_TOL), None),
    };
    Ok((AmplitudeState { amps, z: state.z + dz }, notice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_mode(kappa: f64) -> CMatrix {
        CMatrix::from_real(&[vec![0.0, kappa], vec![kappa, 0.0]])
    }

    #[test]
    fn zero_generator_is_identity() {
        let k = CMatrix::zeros(3);
        let s = AmplitudeState::new(vec![c(1.0, 0.5), c(0.0, 0.0), c(-0.2, 0.1)]);
        let (out, note) = evolve(&s, &k, 1e-3, Method::Expm).unwrap();
        assert_eq!(out.amps, s.amps);
        assert!(note.is_none());
    }

    #[test]
    fn two_mode_transfer_matches_sine_law() {
        let kappa = 1000.0;
        let k = two_mode(kappa);
        let s = AmplitudeState::new(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let z = std::f64::consts::PI / (2.0 * kappa);
        let (out, _) = evolve(&s, &k, z, Method::Expm).unwrap();
        assert!((out.amps[1].norm_sqr() - 1.0).abs() < 1e-12);
        let (out, _) = evolve(&s, &k, z, Method::Rk4).unwrap();
        assert!((out.amps[1].norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_step_is_rejected() {
        let s = AmplitudeState::new(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(evolve(&s, &two_mode(1.0), -1.0, Method::Expm).is_err());
    }

    #[test]
    fn non_hermitian_generator_falls_back_with_notice() {
        let k = CMatrix::from_rows(&[vec![c(0.0, 0.0), c(200.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]);
        let s = AmplitudeState::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let (out, note) = evolve(&s, &k, 1e-3, Method::Expm).unwrap();
        assert!(note.is_some());
        // nilpotent: exp(-jKz) = I - jKz
        assert!((out.amps[0] - c(0.0, -0.2)).norm() < 1e-14);
        assert!((out.amps[1] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn series_matches_eigen_route() {
        let k = CMatrix::from_rows(&[
            vec![c(30.0, 0.0), c(100.0, 40.0), c(0.0, 5.0)],
            vec![c(100.0, -40.0), c(-20.0, 0.0), c(70.0, 0.0)],
            vec![c(0.0, -5.0), c(70.0, 0.0), c(10.0, 0.0)],
        ]);
        let (a, _) = propagator(&k, 4e-3);
        let b = series_expm(&k.scale(-J * 4e-3));
        assert!(a.sub(&b).max_abs() < 1e-12);
    }

    fn hermitian_from(v: &[f64]) -> CMatrix {
        let n = 4;
        let mut m = CMatrix::zeros(n);
        let mut t = 0;
        for i in 0..n {
            m[(i, i)] = c(v[t], 0.0);
            t += 1;
            for j in (i + 1)..n {
                m[(i, j)] = c(v[t], v[t + 1]);
                m[(j, i)] = c(v[t], -v[t + 1]);
                t += 2;
            }
        }
        m
    }

    proptest! {
        #[test]
        fn semigroup_and_norm(v in prop::collection::vec(-500.0f64..500.0, 16), z1 in 0.0f64..5e-3, z2 in 0.0f64..5e-3) {
            let k = hermitian_from(&v);
            let s = AmplitudeState::new(vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0), c(0.0, 0.0)]);
            let (a, _) = evolve(&s, &k, z1, Method::Expm).unwrap();
            let (a, _) = evolve(&a, &k, z2, Method::Expm).unwrap();
            let (b, _) = evolve(&s, &k, z1 + z2, Method::Expm).unwrap();
            for i in 0..4 {
                prop_assert!((a.amps[i] - b.amps[i]).norm() < 1e-12);
            }
            prop_assert!((b.power() - s.power()).abs() < 1e-12);
        }
    }
}
