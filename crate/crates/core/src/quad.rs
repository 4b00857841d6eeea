//! Quadrature building blocks: tanh-sinh rules for singular endpoints,
//! Gauss-Legendre panels, and Lebedev-style angular nodes on the sphere.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Result of an adaptive 1-D quadrature: value plus an error estimate taken
/// from the last refinement step.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub est_abs_err: f64,
}

/// Tanh-sinh quadrature on (a, b).
///
/// The change of variable x = c + d*tanh((pi/2) sinh u) pushes the nodes
/// double-exponentially into the endpoints, so integrable algebraic endpoint
/// singularities converge at full accuracy. Levels are doubled until two
/// successive estimates agree to `tol` (relative) or `max_level` is hit.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_level: u32) -> QuadResult {
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    // u beyond ~3.8 gives node weights far below f64 resolution
    let u_max = 3.8;

    // Evaluate the symmetric node pair at +/- u. The distance to each
    // endpoint is computed as d * 2/(1 + e^{2 sigma}) rather than through
    // 1 - tanh, which would cancel catastrophically and poison integrands
    // that are singular at an endpoint.
    let eval_pair = |u: f64| -> f64 {
        let sigma = FRAC_PI_2 * u.sinh();
        let t = 2.0 / (1.0 + (2.0 * sigma).exp()); // 1 - tanh(sigma)
        let ch = sigma.cosh();
        let w = FRAC_PI_2 * u.cosh() / (ch * ch);
        if !(t > 0.0) || !w.is_finite() {
            return 0.0;
        }
        let x_lo = a + d * t;
        let x_hi = b - d * t;
        let mut acc = 0.0;
        if x_lo > a && x_lo < b {
            let y = f(x_lo);
            if y.is_finite() {
                acc += y * w;
            }
        }
        if u > 0.0 && x_hi > a && x_hi < b {
            let y = f(x_hi);
            if y.is_finite() {
                acc += y * w;
            }
        }
        acc
    };

    let mut h = 1.0;
    let mut sum = f(c) * FRAC_PI_2; // u = 0 node: x = c, weight pi/2
    if !sum.is_finite() {
        sum = 0.0;
    }
    let mut k = 1;
    while (k as f64) * h <= u_max {
        sum += eval_pair(k as f64 * h);
        k += 1;
    }
    let mut value = d * h * sum;
    let mut est = value.abs();

    for _ in 0..max_level {
        h *= 0.5;
        // add the new midpoints only
        let mut k = 1;
        while (k as f64) * h <= u_max {
            sum += eval_pair(k as f64 * h);
            k += 2;
        }
        let new_value = d * h * sum;
        est = (new_value - value).abs();
        value = new_value;
        if est <= tol * value.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    QuadResult { value, est_abs_err: est }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // recurrence for P_n(x) and P'_n(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Legendre quadrature of `f` on [a, b] with `n` nodes.
pub fn gl_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (xs, ws) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in xs.iter().zip(ws.iter()) {
        acc += w * f(c + d * x);
    }
    acc * d
}

/// Geometrically graded panels from `a` to `b` (ratio 2 toward `a`), with
/// `n_per_panel` Gauss-Legendre nodes on each. Suited to integrands that are
/// smooth but steep toward the left endpoint.
pub fn graded_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n_per_panel: usize) -> f64 {
    assert!(b > a && a > 0.0);
    let mut edges = vec![b];
    let mut e = b;
    while e * 0.5 > a {
        e *= 0.5;
        edges.push(e);
    }
    edges.push(a);
    let mut acc = 0.0;
    for w in edges.windows(2) {
        acc += gl_integrate(f, w[1], w[0], n_per_panel);
    }
    acc
}

/// One node of an angular rule on the unit sphere.
#[derive(Debug, Clone, Copy)]
pub struct AngularNode {
    pub dir: Vec3,
    /// Normalized weight; the rule integrates f over S^2 as 4*pi*sum w_i f_i.
    pub weight: f64,
}

fn orbit_axes(w: f64, out: &mut Vec<AngularNode>) {
    for k in 0..3 {
        for sgn in [1.0, -1.0] {
            out.push(AngularNode { dir: Vec3::axis(k) * sgn, weight: w });
        }
    }
}

fn orbit_edge_midpoints(w: f64, out: &mut Vec<AngularNode>) {
    let a = 1.0 / 2f64.sqrt();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for si in [a, -a] {
            for sj in [a, -a] {
                let d = Vec3::ZERO.with_component(i, si).with_component(j, sj);
                out.push(AngularNode { dir: d, weight: w });
            }
        }
    }
}

fn orbit_cube_corners(w: f64, out: &mut Vec<AngularNode>) {
    let a = 1.0 / 3f64.sqrt();
    for sx in [a, -a] {
        for sy in [a, -a] {
            for sz in [a, -a] {
                out.push(AngularNode { dir: Vec3::new(sx, sy, sz), weight: w });
            }
        }
    }
}

/// 24-point orbit (a, a, b) with b = sqrt(1 - 2a^2), all permutations/signs.
fn orbit_aab(a: f64, w: f64, out: &mut Vec<AngularNode>) {
    let b = (1.0 - 2.0 * a * a).sqrt();
    // the b component visits each coordinate slot once
    for (i, j, k) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        for si in [a, -a] {
            for sj in [a, -a] {
                for sk in [b, -b] {
                    let d = Vec3::ZERO
                        .with_component(i, si)
                        .with_component(j, sj)
                        .with_component(k, sk);
                    out.push(AngularNode { dir: d, weight: w });
                }
            }
        }
    }
}

/// 24-point orbit (a, b, 0) with b = sqrt(1 - a^2), all permutations/signs.
fn orbit_ab0(a: f64, w: f64, out: &mut Vec<AngularNode>) {
    let b = (1.0 - a * a).sqrt();
    for (i, j) in [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)] {
        for si in [a, -a] {
            for sj in [b, -b] {
                let d = Vec3::ZERO.with_component(i, si).with_component(j, sj);
                out.push(AngularNode { dir: d, weight: w });
            }
        }
    }
}

/// Lebedev rule with `n` points, n in {6, 26, 50, 86}.
///
/// Octahedrally symmetric (hence antipodally symmetric, which makes odd
/// integrands cancel exactly in truncated principal values). Weights are the
/// published rule constants and sum to 1.
pub fn lebedev(n: usize) -> Result<Vec<AngularNode>> {
    let mut nodes = Vec::with_capacity(n);
    match n {
        6 => orbit_axes(1.0 / 6.0, &mut nodes),
        26 => {
            orbit_axes(4.761_904_761_904_762e-2, &mut nodes);
            orbit_edge_midpoints(3.809_523_809_523_810e-2, &mut nodes);
            orbit_cube_corners(3.214_285_714_285_714e-2, &mut nodes);
        }
        50 => {
            orbit_axes(1.269_841_269_841_270e-2, &mut nodes);
            orbit_edge_midpoints(2.257_495_590_828_924e-2, &mut nodes);
            orbit_cube_corners(2.109_375e-2, &mut nodes);
            orbit_aab(3.015_113_445_777_636e-1, 2.017_333_553_791_887e-2, &mut nodes);
        }
        86 => {
            orbit_axes(1.154_401_154_401_154e-2, &mut nodes);
            orbit_cube_corners(1.194_390_908_585_628e-2, &mut nodes);
            orbit_aab(3.696_028_464_541_502e-1, 1.111_055_571_060_340e-2, &mut nodes);
            orbit_aab(6.943_540_066_026_664e-1, 1.187_650_129_453_714e-2, &mut nodes);
            orbit_ab0(3.742_430_390_903_412e-1, 1.181_230_374_690_448e-2, &mut nodes);
        }
        _ => {
            return Err(Error::capability(format!(
                "no angular rule with {n} nodes; available: 6, 26, 50, 86"
            )))
        }
    }
    debug_assert_eq!(nodes.len(), n);
    Ok(nodes)
}

/// The next finer angular rule, for convergence studies.
pub fn next_angular_order(n: usize) -> usize {
    match n {
        6 => 26,
        26 => 50,
        _ => 86,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        // int_0^1 x^(-1/2) dx = 2
        let r = tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-13, 12);
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-12);
        // int_0^1 ln(x) dx = -1
        let r = tanh_sinh(|x| x.ln(), 0.0, 1.0, 1e-13, 12);
        assert_relative_eq!(r.value, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_polynomial_exactness() {
        // 5-node rule is exact through degree 9
        let v = gl_integrate(|x| x.powi(8), -1.0, 1.0, 5);
        assert_relative_eq!(v, 2.0 / 9.0, max_relative = 1e-13);
        let v = gl_integrate(|x| (3.0 * x).exp(), 0.0, 2.0, 20);
        assert_relative_eq!(v, (6f64.exp() - 1.0) / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn lebedev_weights_and_moments() {
        for n in [6, 26, 50, 86] {
            let rule = lebedev(n).unwrap();
            let wsum: f64 = rule.iter().map(|p| p.weight).sum();
            assert_relative_eq!(wsum, 1.0, max_relative = 1e-12);
            for p in &rule {
                assert_relative_eq!(p.dir.norm(), 1.0, max_relative = 1e-12);
            }
            // sphere averages: <x^2> = 1/3, <x^2 y^2> = 1/15, <x^4> = 1/5
            let avg = |f: &dyn Fn(Vec3) -> f64| -> f64 {
                rule.iter().map(|p| p.weight * f(p.dir)).sum()
            };
            assert_relative_eq!(avg(&|d| d.x * d.x), 1.0 / 3.0, max_relative = 1e-12);
            if n >= 26 {
                assert_relative_eq!(avg(&|d| d.x * d.x * d.y * d.y), 1.0 / 15.0, max_relative = 1e-11);
                assert_relative_eq!(avg(&|d| d.x.powi(4)), 1.0 / 5.0, max_relative = 1e-11);
            }
            if n >= 50 {
                // degree-6 moments: <x^6> = 1/7, <x^4 y^2> = 1/35, <x^2 y^2 z^2> = 1/105
                assert_relative_eq!(avg(&|d| d.x.powi(6)), 1.0 / 7.0, max_relative = 1e-11);
                assert_relative_eq!(avg(&|d| d.x.powi(4) * d.y * d.y), 1.0 / 35.0, max_relative = 1e-11);
                assert_relative_eq!(
                    avg(&|d| d.x * d.x * d.y * d.y * d.z * d.z),
                    1.0 / 105.0,
                    max_relative = 1e-11
                );
            }
            if n >= 86 {
                // a degree-14 moment: <x^14> = 1/15
                assert_relative_eq!(avg(&|d| d.x.powi(14)), 1.0 / 15.0, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn lebedev_antipodal_symmetry() {
        for n in [26, 50, 86] {
            let rule = lebedev(n).unwrap();
            // every odd polynomial integrates to exactly zero
            let s: f64 = rule.iter().map(|p| p.weight * p.dir.x.powi(3) * p.dir.y * p.dir.z).sum();
            assert!(s.abs() < 1e-16);
            let s: f64 = rule.iter().map(|p| p.weight * p.dir.x).sum();
            assert!(s.abs() < 1e-16);
        }
    }
}
