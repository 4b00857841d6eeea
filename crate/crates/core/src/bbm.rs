//! Limit experiments as the fractional order approaches 1: seminorm sweeps
//! against the local magnetic Dirichlet energy, operator sweeps against the
//! local magnetic Schrodinger operator, and the mollifier-moment identities
//! that drive both.

use num_complex::Complex64;
use serde::Serialize;

use crate::energy::{PairEngine, PairQuadratureSpec};
use crate::error::{Error, Result};
use crate::field::{covariant_gradient, covariant_stencil_gradient, SampledField, VectorPotential};
use crate::geom::Vec3;
use crate::kernel::{constants, kernel_mass, FracParams};
use crate::operator::{apply_local_limit, apply_regularized, QuadratureSpec};
use crate::quad::tanh_sinh;
use crate::specfun::bessel_k;
use crate::sum::sum_slice;

/// One seminorm sweep toward s = 1.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub s_values: Vec<f64>,
    /// Weighted seminorm energy (C_s/2) m^nu [u]^2 at each s.
    pub seminorm_energy: Vec<f64>,
    /// The local target int |grad_A u|^2 (grid quadrature).
    pub local_energy: f64,
    pub rel_gap: Vec<f64>,
}

/// Mollifier moments at one order: the normalized second moment I1 (whose
/// closed value is s m^(2s-2)) and the cutoff defect I2 (which vanishes as
/// s -> 1).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MollifierMoments {
    pub s: f64,
    pub i1: f64,
    pub i2: f64,
}

/// Quintic smoothstep cutoff: 1 below r_omega, 0 above 2 r_omega.
fn cutoff(r: f64, r_omega: f64) -> f64 {
    if r <= r_omega {
        1.0
    } else if r >= 2.0 * r_omega {
        0.0
    } else {
        let t = (r - r_omega) / r_omega;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// I1 and I2 for each order in the sweep.
///
/// I1 = (2 pi / 3) C_s m^nu int_0^inf r^((5-2s)/2) K_nu(m r) dr, with the
/// closed value s m^(2s-2); I2 carries the (psi - 1) defect of the cutoff
/// supported beyond r_omega and decays as s -> 1.
pub fn mollifier_moments(s_list: &[f64], m: f64, r_omega: f64) -> Result<Vec<MollifierMoments>> {
    if !(r_omega > 0.0) {
        return Err(Error::domain("cutoff radius must be positive"));
    }
    s_list
        .iter()
        .map(|&s| {
            let p = FracParams::new(s, m)?;
            let i1 = kernel_mass(p)?;
            let nu = p.nu();
            let pref = 2.0 * std::f64::consts::PI / 3.0 * constants(p).cap_c_s * m.powf(nu);
            let integrand = |r: f64| {
                r.powf((5.0 - 2.0 * s) / 2.0)
                    * bessel_k(nu, m * r).map(|e| e.value).unwrap_or(0.0)
                    * (cutoff(r, r_omega) - 1.0)
            };
            let upper = 2.0 * r_omega + 60.0 / m;
            let q = tanh_sinh(integrand, r_omega, upper, 1e-11, 12);
            if !q.value.is_finite() {
                return Err(Error::NonConvergence {
                    what: "mollifier defect quadrature".into(),
                    residual: q.est_abs_err,
                });
            }
            Ok(MollifierMoments { s, i1, i2: pref * q.value })
        })
        .collect()
}

/// Grid quadrature of the local magnetic Dirichlet energy
/// int |(grad - iA) u|^2 dx.
pub fn local_magnetic_energy(a: &VectorPotential, u: &SampledField) -> Result<f64> {
    let grid = u.grid();
    let w = grid.cell_volume();
    let terms: Result<Vec<f64>> = (0..grid.len())
        .map(|idx| {
            let g = if u.analytic().is_some() {
                covariant_gradient(a, u, grid.node_of(idx))?
            } else {
                covariant_stencil_gradient(a, u, idx)?
            };
            Ok(g.norm_sq())
        })
        .collect();
    Ok(sum_slice(&terms?) * w)
}

/// Seminorm energies along increasing s, against the local energy target.
pub fn bbm_sweep(
    a: &VectorPotential,
    u: &SampledField,
    s_list: &[f64],
    m: f64,
    spec: PairQuadratureSpec,
) -> Result<SweepResult> {
    if s_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("sweep orders must be strictly increasing"));
    }
    let local_energy = local_magnetic_energy(a, u)?;
    let mut seminorm_energy = Vec::with_capacity(s_list.len());
    let mut rel_gap = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let p = FracParams::new(s, m)?;
        let engine = PairEngine::new(p, u.grid(), spec)?;
        let raw = engine.bilinear_raw(a, u, u)?;
        let semi = engine.kernel().seminorm_weight() * raw.total();
        seminorm_energy.push(semi);
        rel_gap.push((semi - local_energy).abs() / local_energy.abs().max(f64::MIN_POSITIVE));
    }
    Ok(SweepResult { s_values: s_list.to_vec(), seminorm_energy, local_energy, rel_gap })
}

/// One point of an operator limit sweep.
#[derive(Debug, Clone, Copy)]
pub struct OperatorLimitPoint {
    pub s: f64,
    pub value: Complex64,
    /// |applied(s) - local| / |local|.
    pub target_gap: f64,
}

/// Pointwise operator values along increasing s against the local operator
/// (-Delta_A + m^2) u(x).
pub fn operator_limit_sweep(
    a: &VectorPotential,
    u: &SampledField,
    x: Vec3,
    s_list: &[f64],
    m: f64,
    q: &QuadratureSpec,
) -> Result<Vec<OperatorLimitPoint>> {
    let target = apply_local_limit(m, a, u, x)?;
    s_list
        .iter()
        .map(|&s| {
            let p = FracParams::new(s, m)?;
            let applied = apply_regularized(p, a, u, x, q)?;
            Ok(OperatorLimitPoint {
                s,
                value: applied.value,
                target_gap: (applied.value - target).norm() / target.norm().max(f64::MIN_POSITIVE),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CartesianGrid, Gaussian};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn mollifier_first_moment_identity() {
        let out = mollifier_moments(&[0.5, 0.99], 1.0, 2.0).unwrap();
        assert_relative_eq!(out[0].i1, 0.5, max_relative = 1e-8);
        assert_relative_eq!(out[1].i1, 0.99, max_relative = 1e-8);
    }

    #[test]
    fn mollifier_defect_shrinks_toward_one() {
        let out = mollifier_moments(&[0.9, 0.99], 1.0, 2.0).unwrap();
        assert!(out[1].i2.abs() < out[0].i2.abs(), "i2: {:?}", out);
        // psi - 1 <= 0 beyond the cutoff, so I2 is nonpositive
        assert!(out[0].i2 <= 0.0);
    }

    #[test]
    fn first_moment_lattice() {
        for s in [0.1, 0.5, 0.9] {
            for m in [0.5, 2.0] {
                let out = mollifier_moments(&[s], m, 1.0).unwrap();
                assert!(
                    (out[0].i1 - s * m.powf(2.0 * s - 2.0)).abs() <= 1e-8 * (1.0 + out[0].i1),
                    "s={s} m={m}"
                );
            }
        }
    }

    #[test]
    fn gaussian_local_energy_closed_form() {
        // int |grad e^{-|x|^2/2}|^2 = (3/2) pi^(3/2)
        let grid = CartesianGrid::centered(17, 4.8).unwrap();
        let u = SampledField::from_analytic(grid, Arc::new(Gaussian::unit()));
        let zero = VectorPotential::zero();
        let local = local_magnetic_energy(&zero, &u).unwrap();
        let expect = 1.5 * std::f64::consts::PI.powf(1.5);
        assert_relative_eq!(local, expect, max_relative = 1e-6);
    }

    #[test]
    fn sweep_requires_increasing_orders() {
        let grid = CartesianGrid::centered(9, 3.0).unwrap();
        let u = SampledField::from_analytic(grid, Arc::new(Gaussian::unit()));
        let zero = VectorPotential::zero();
        assert!(bbm_sweep(&zero, &u, &[0.9, 0.7], 1.0, PairQuadratureSpec::default()).is_err());
    }

    #[test]
    fn operator_sweep_on_constants() {
        // u = 1 near x: value = m^(2s) -> m^2
        use crate::field::AnalyticField;
        use crate::geom::{CMat3, CVec3};
        struct One;
        impl AnalyticField for One {
            fn value(&self, _x: Vec3) -> Complex64 {
                Complex64::new(1.0, 0.0)
            }
            fn gradient(&self, _x: Vec3) -> CVec3 {
                CVec3::ZERO
            }
            fn hessian(&self, _x: Vec3) -> CMat3 {
                CMat3::zero()
            }
        }
        let grid = CartesianGrid::centered(5, 3.0).unwrap();
        let u = SampledField::from_analytic(grid, Arc::new(One));
        let zero = VectorPotential::zero();
        let pts =
            operator_limit_sweep(&zero, &u, Vec3::ZERO, &[0.7, 0.99], 1.0, &QuadratureSpec::default())
                .unwrap();
        for pt in &pts {
            assert_relative_eq!(pt.value.re, 1.0, max_relative = 1e-9);
        }
    }
}
