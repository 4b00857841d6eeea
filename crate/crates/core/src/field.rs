//! Magnetic potentials, sampled fields, the midpoint phase factor, and
//! covariant derivative calculus.
//!
//! The potential A enters every nonlocal expression only through the phase
//! e^{i(x-y).A((x+y)/2)}, evaluated at the segment midpoint. Pointwise
//! calculus (covariant gradient, magnetic Laplacian, magnetic Hessian) uses
//! analytic derivatives when the field carries an evaluator and central
//! finite differences on the grid otherwise.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::{CMat3, CVec3, Mat3, SymMat3, Vec3};

// ---------------------------------------------------------------------------
// potentials
// ---------------------------------------------------------------------------

/// Scalar radial profile a(r) defining the equivariant potential
/// A(x) = a(|x|) x.
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PotentialKind {
    Zero,
    /// A(x) = M x for a constant real symmetric M.
    LinearMatrix(SymMat3),
    /// A(x) = a(|x|) x; equivariant by construction.
    RadialProfile(Profile),
    /// Trilinear interpolation of samples on a uniform lattice; queries
    /// outside the lattice are a hard error.
    Tabulated(Arc<TabulatedPotential>),
}

/// A magnetic vector potential A: R^3 -> R^3.
#[derive(Clone)]
pub struct VectorPotential {
    pub kind: PotentialKind,
    /// User-supplied Lipschitz bound metadata; not verified here.
    pub lipschitz_bound: Option<f64>,
}

impl std::fmt::Debug for VectorPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.kind {
            PotentialKind::Zero => "Zero".to_string(),
            PotentialKind::LinearMatrix(m) => format!("LinearMatrix({m:?})"),
            PotentialKind::RadialProfile(_) => "RadialProfile(..)".to_string(),
            PotentialKind::Tabulated(_) => "Tabulated(..)".to_string(),
        };
        write!(f, "VectorPotential::{name}")
    }
}

impl VectorPotential {
    pub fn zero() -> Self {
        VectorPotential { kind: PotentialKind::Zero, lipschitz_bound: Some(0.0) }
    }

    pub fn linear(m: SymMat3) -> Self {
        VectorPotential { kind: PotentialKind::LinearMatrix(m), lipschitz_bound: None }
    }

    pub fn radial<F: Fn(f64) -> f64 + Send + Sync + 'static>(a: F) -> Self {
        VectorPotential { kind: PotentialKind::RadialProfile(Arc::new(a)), lipschitz_bound: None }
    }

    pub fn tabulated(tab: TabulatedPotential) -> Self {
        VectorPotential { kind: PotentialKind::Tabulated(Arc::new(tab)), lipschitz_bound: None }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    pub fn eval(&self, x: Vec3) -> Result<Vec3> {
        match &self.kind {
            PotentialKind::Zero => Ok(Vec3::ZERO),
            PotentialKind::LinearMatrix(m) => Ok(m.mul_vec(x)),
            PotentialKind::RadialProfile(a) => Ok(a(x.norm()) * x),
            PotentialKind::Tabulated(t) => t.eval(x),
        }
    }

    /// Jacobian dA_k/dx_h as a row-major matrix, [h][k].
    pub fn jacobian(&self, x: Vec3) -> Result<[[f64; 3]; 3]> {
        match &self.kind {
            PotentialKind::Zero => Ok([[0.0; 3]; 3]),
            PotentialKind::LinearMatrix(m) => {
                let mut j = [[0.0; 3]; 3];
                for h in 0..3 {
                    for k in 0..3 {
                        j[h][k] = m.get(h, k);
                    }
                }
                Ok(j)
            }
            PotentialKind::RadialProfile(a) => {
                let r = x.norm();
                // d/dx_h [a(r) x_k] = a'(r) x_h x_k / r + a(r) delta_hk
                let da = if r > 1e-12 {
                    let hstep = (1e-6 * r.max(1.0)).max(1e-9);
                    (a(r + hstep) - a((r - hstep).max(0.0))) / (2.0 * hstep)
                } else {
                    0.0
                };
                let ar = a(r);
                let mut j = [[0.0; 3]; 3];
                for h in 0..3 {
                    for k in 0..3 {
                        let xh = x.component(h);
                        let xk = x.component(k);
                        j[h][k] = if r > 1e-12 { da * xh * xk / r } else { 0.0 };
                        if h == k {
                            j[h][k] += ar;
                        }
                    }
                }
                Ok(j)
            }
            PotentialKind::Tabulated(t) => {
                let h = t.grid.h;
                let mut j = [[0.0; 3]; 3];
                for d in 0..3 {
                    let e = Vec3::axis(d) * h;
                    let plus = t.eval(x + e)?;
                    let minus = t.eval(x - e)?;
                    let g = (plus - minus) / (2.0 * h);
                    j[d] = [g.x, g.y, g.z];
                }
                Ok(j)
            }
        }
    }

    pub fn divergence(&self, x: Vec3) -> Result<f64> {
        let j = self.jacobian(x)?;
        Ok(j[0][0] + j[1][1] + j[2][2])
    }
}

// ---------------------------------------------------------------------------
// grids
// ---------------------------------------------------------------------------

/// Uniform cubic lattice: nodes origin + h*(i, j, k), 0 <= i,j,k < n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid {
    pub n: usize,
    pub h: f64,
    pub origin: Vec3,
}

impl CartesianGrid {
    /// Grid of n^3 nodes covering [-half_width, half_width]^3.
    pub fn centered(n: usize, half_width: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("grid needs at least 2 nodes per axis"));
        }
        if !(half_width > 0.0) {
            return Err(Error::domain("grid half-width must be positive"));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        Ok(CartesianGrid { n, h, origin: Vec3::new(-half_width, -half_width, -half_width) })
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn decompose(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.n;
        let j = (idx / self.n) % self.n;
        let i = idx / (self.n * self.n);
        (i, j, k)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.h
    }

    pub fn node_of(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.decompose(idx);
        self.node(i, j, k)
    }

    /// Cell volume h^3.
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    pub fn contains(&self, x: Vec3) -> bool {
        let lo = self.origin;
        let hi = self.node(self.n - 1, self.n - 1, self.n - 1);
        let eps = 1e-9 * self.h;
        x.x >= lo.x - eps
            && x.y >= lo.y - eps
            && x.z >= lo.z - eps
            && x.x <= hi.x + eps
            && x.y <= hi.y + eps
            && x.z <= hi.z + eps
    }
}

/// 1-D radial lattice with midpoint nodes r_j = (j + 1/2) dr and shell
/// weights 4 pi r_j^2 dr.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub n: usize,
    pub dr: f64,
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::domain("radial grid needs at least 4 nodes"));
        }
        if !(r_max > 0.0) {
            return Err(Error::domain("radial extent must be positive"));
        }
        Ok(RadialGrid { n, dr: r_max / n as f64 })
    }

    pub fn node(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dr
    }

    pub fn weight(&self, j: usize) -> f64 {
        let r = self.node(j);
        4.0 * std::f64::consts::PI * r * r * self.dr
    }

    pub fn r_max(&self) -> f64 {
        self.n as f64 * self.dr
    }
}

// ---------------------------------------------------------------------------
// analytic field evaluators
// ---------------------------------------------------------------------------

/// A closed-form complex field with first and second derivatives.
pub trait AnalyticField: Send + Sync {
    fn value(&self, x: Vec3) -> Complex64;
    fn gradient(&self, x: Vec3) -> CVec3;
    fn hessian(&self, x: Vec3) -> CMat3;
}

/// amp * exp(-a |x|^2), the workhorse test field. Its unitary Fourier
/// transform amp (2a)^(-3/2) exp(-|xi|^2/(4a)) is used by the symbol oracle.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian {
    pub a: f64,
    pub amp: f64,
}

impl Gaussian {
    /// exp(-|x|^2 / 2).
    pub fn unit() -> Self {
        Gaussian { a: 0.5, amp: 1.0 }
    }
}

impl AnalyticField for Gaussian {
    fn value(&self, x: Vec3) -> Complex64 {
        Complex64::new(self.amp * (-self.a * x.norm_sq()).exp(), 0.0)
    }

    fn gradient(&self, x: Vec3) -> CVec3 {
        let v = self.amp * (-self.a * x.norm_sq()).exp();
        CVec3::from_real(x * (-2.0 * self.a * v))
    }

    fn hessian(&self, x: Vec3) -> CMat3 {
        let v = self.amp * (-self.a * x.norm_sq()).exp();
        let mut h = CMat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut e = 4.0 * self.a * self.a * x.component(i) * x.component(j) * v;
                if i == j {
                    e -= 2.0 * self.a * v;
                }
                h.0[i][j] = Complex64::new(e, 0.0);
            }
        }
        h
    }
}

/// A finite combination of shifted Gaussians with complex coefficients;
/// smooth, decaying, and cheap to differentiate. Used to generate seeded
/// random test fields.
#[derive(Debug, Clone)]
pub struct GaussianMix {
    pub terms: Vec<(Complex64, f64, Vec3)>, // (coeff, a, center)
}

impl AnalyticField for GaussianMix {
    fn value(&self, x: Vec3) -> Complex64 {
        self.terms
            .iter()
            .map(|&(c, a, x0)| c * (-a * (x - x0).norm_sq()).exp())
            .sum()
    }

    fn gradient(&self, x: Vec3) -> CVec3 {
        let mut g = CVec3::ZERO;
        for &(c, a, x0) in &self.terms {
            let d = x - x0;
            let e = c * (-a * d.norm_sq()).exp() * (-2.0 * a);
            g = g + CVec3::from_real(d) * e;
        }
        g
    }

    fn hessian(&self, x: Vec3) -> CMat3 {
        let mut h = CMat3::zero();
        for &(c, a, x0) in &self.terms {
            let d = x - x0;
            let v = c * (-a * d.norm_sq()).exp();
            for i in 0..3 {
                for j in 0..3 {
                    let mut e = v * (4.0 * a * a * d.component(i) * d.component(j));
                    if i == j {
                        e -= v * 2.0 * a;
                    }
                    h.0[i][j] += e;
                }
            }
        }
        h
    }
}

/// v(x) = e^{i eta . x} u(x + xi): the gauge/translation transform.
pub struct GaugeTransformed {
    pub inner: Arc<dyn AnalyticField>,
    pub xi: Vec3,
    pub eta: Vec3,
}

impl AnalyticField for GaugeTransformed {
    fn value(&self, x: Vec3) -> Complex64 {
        Complex64::from_polar(1.0, self.eta.dot(x)) * self.inner.value(x + self.xi)
    }

    fn gradient(&self, x: Vec3) -> CVec3 {
        let ph = Complex64::from_polar(1.0, self.eta.dot(x));
        let u = self.inner.value(x + self.xi);
        let g = self.inner.gradient(x + self.xi);
        (g + CVec3::from_real(self.eta) * (Complex64::i() * u)) * ph
    }

    fn hessian(&self, x: Vec3) -> CMat3 {
        let ph = Complex64::from_polar(1.0, self.eta.dot(x));
        let u = self.inner.value(x + self.xi);
        let g = self.inner.gradient(x + self.xi);
        let hss = self.inner.hessian(x + self.xi);
        let i = Complex64::i();
        let mut out = CMat3::zero();
        for a in 0..3 {
            for b in 0..3 {
                let ea = self.eta.component(a);
                let eb = self.eta.component(b);
                out.0[a][b] = ph
                    * (hss.0[a][b]
                        + i * ea * g.component(b)
                        + i * eb * g.component(a)
                        - ea * eb * u);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// sampled fields
// ---------------------------------------------------------------------------

/// A complex field sampled on a cartesian lattice, optionally backed by an
/// analytic evaluator (in which case the samples agree with it at the nodes
/// by construction).
#[derive(Clone)]
pub struct SampledField {
    grid: CartesianGrid,
    values: Vec<Complex64>,
    analytic: Option<Arc<dyn AnalyticField>>,
}

impl std::fmt::Debug for SampledField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SampledField {{ n: {}, h: {}, analytic: {} }}",
            self.grid.n,
            self.grid.h,
            self.analytic.is_some()
        )
    }
}

impl SampledField {
    pub fn from_analytic(grid: CartesianGrid, f: Arc<dyn AnalyticField>) -> Self {
        let values = (0..grid.len()).map(|idx| f.value(grid.node_of(idx))).collect();
        SampledField { grid, values, analytic: Some(f) }
    }

    pub fn from_values(grid: CartesianGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::domain("field samples must be finite"));
        }
        Ok(SampledField { grid, values, analytic: None })
    }

    pub fn grid(&self) -> CartesianGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn analytic(&self) -> Option<&Arc<dyn AnalyticField>> {
        self.analytic.as_ref()
    }

    /// Same samples, analytic evaluator dropped. Used where grid-only and
    /// analytic-backed fields must go through identical code paths.
    pub fn strip_analytic(&self) -> SampledField {
        SampledField { grid: self.grid, values: self.values.clone(), analytic: None }
    }

    /// Pointwise modulus |u| as a grid-only real field.
    pub fn modulus(&self) -> SampledField {
        let values = self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
        SampledField { grid: self.grid, values, analytic: None }
    }

    /// Field value at an arbitrary point: analytic evaluator when present,
    /// otherwise trilinear interpolation with zero extension outside.
    pub fn value_at(&self, x: Vec3) -> Complex64 {
        if let Some(f) = &self.analytic {
            return f.value(x);
        }
        self.trilinear(x)
    }

    pub fn trilinear(&self, x: Vec3) -> Complex64 {
        let g = &self.grid;
        let p = (x - g.origin) / g.h;
        let zero = Complex64::new(0.0, 0.0);
        if p.x < 0.0 || p.y < 0.0 || p.z < 0.0 {
            return zero;
        }
        let (fi, fj, fk) = (p.x.floor(), p.y.floor(), p.z.floor());
        let (i, j, k) = (fi as usize, fj as usize, fk as usize);
        if i + 1 >= g.n || j + 1 >= g.n || k + 1 >= g.n {
            // points in the last cell boundary plane or outside
            if i + 1 == g.n && j < g.n && k < g.n && (p.x - fi).abs() < 1e-12 {
                // fall through to exact node lookup below
            } else {
                return zero;
            }
        }
        let (tx, ty, tz) = (p.x - fi, p.y - fj, p.z - fk);
        let mut acc = zero;
        for (di, wx) in [(0usize, 1.0 - tx), (1, tx)] {
            for (dj, wy) in [(0usize, 1.0 - ty), (1, ty)] {
                for (dk, wz) in [(0usize, 1.0 - tz), (1, tz)] {
                    let w = wx * wy * wz;
                    if w == 0.0 {
                        continue;
                    }
                    acc += self.values[g.index(i + di, j + dj, k + dk)] * w;
                }
            }
        }
        acc
    }

    /// Discrete L^2 mass sum |u_i|^2 h^3.
    pub fn l2_norm_sq(&self) -> f64 {
        let w = self.grid.cell_volume();
        crate::sum::sum_slice(&self.values.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()) * w
    }

    /// Discrete L^p norm (sum |u_i|^p h^3)^(1/p).
    pub fn lp_norm(&self, p: f64) -> f64 {
        let w = self.grid.cell_volume();
        let s = crate::sum::sum_slice(&self.values.iter().map(|v| v.norm().powf(p)).collect::<Vec<_>>());
        (s * w).powf(1.0 / p)
    }

    fn node_index_of(&self, x: Vec3) -> Option<(usize, usize, usize)> {
        let g = &self.grid;
        let p = (x - g.origin) / g.h;
        let i = p.x.round();
        let j = p.y.round();
        let k = p.z.round();
        let tol = 1e-9;
        if (p.x - i).abs() > tol || (p.y - j).abs() > tol || (p.z - k).abs() > tol {
            return None;
        }
        if i < 0.0 || j < 0.0 || k < 0.0 {
            return None;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= g.n || j >= g.n || k >= g.n {
            return None;
        }
        Some((i, j, k))
    }

    /// Plain gradient of u at x: analytic when available, else a 4th-order
    /// central stencil at an interior grid node.
    pub fn gradient_at(&self, x: Vec3) -> Result<CVec3> {
        if let Some(f) = &self.analytic {
            return Ok(f.gradient(x));
        }
        let (i, j, k) = self
            .node_index_of(x)
            .ok_or_else(|| Error::domain("stencil gradient needs x on a grid node"))?;
        let g = self.grid;
        if [i, j, k].iter().any(|&t| t < 2 || t + 2 >= g.n) {
            return Err(Error::domain(
                "stencil gradient needs an interior node (two-node margin) or an analytic evaluator",
            ));
        }
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (axis, o) in out.iter_mut().enumerate() {
            let at = |d: i64| -> Complex64 {
                let (mut a, mut b, mut c) = (i as i64, j as i64, k as i64);
                match axis {
                    0 => a += d,
                    1 => b += d,
                    _ => c += d,
                }
                self.values[g.index(a as usize, b as usize, c as usize)]
            };
            *o = (-at(2) + at(1) * 8.0 - at(-1) * 8.0 + at(-2)) / (12.0 * g.h);
        }
        Ok(CVec3::new(out[0], out[1], out[2]))
    }

    fn second_partial(&self, x: Vec3, a: usize, b: usize) -> Result<Complex64> {
        if let Some(f) = &self.analytic {
            return Ok(f.hessian(x).0[a][b]);
        }
        let (i, j, k) = self
            .node_index_of(x)
            .ok_or_else(|| Error::domain("stencil Hessian needs x on a grid node"))?;
        let g = self.grid;
        if [i, j, k].iter().any(|&t| t < 2 || t + 2 >= g.n) {
            return Err(Error::domain(
                "stencil Hessian needs an interior node (two-node margin) or an analytic evaluator",
            ));
        }
        let at = |da: i64, db: i64| -> Complex64 {
            let (mut p, mut q, mut r) = (i as i64, j as i64, k as i64);
            for (axis, d) in [(a, da), (b, db)] {
                match axis {
                    0 => p += d,
                    1 => q += d,
                    _ => r += d,
                }
            }
            self.values[g.index(p as usize, q as usize, r as usize)]
        };
        let h = g.h;
        if a == b {
            Ok((-at(2, 0) + at(1, 0) * 16.0 - at(0, 0) * 30.0 + at(-1, 0) * 16.0 - at(-2, 0))
                / (12.0 * h * h))
        } else {
            Ok((at(1, 1) + at(-1, -1) - at(1, -1) - at(-1, 1)) / (4.0 * h * h))
        }
    }
}

// ---------------------------------------------------------------------------
// tabulated potentials
// ---------------------------------------------------------------------------

/// Vector potential sampled on a uniform lattice, trilinearly interpolated.
pub struct TabulatedPotential {
    pub grid: CartesianGrid,
    pub values: Vec<Vec3>,
}

impl TabulatedPotential {
    pub fn new(grid: CartesianGrid, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain("tabulated potential sample count mismatch"));
        }
        Ok(TabulatedPotential { grid, values })
    }

    pub fn eval(&self, x: Vec3) -> Result<Vec3> {
        let g = &self.grid;
        if !g.contains(x) {
            return Err(Error::capacity(format!(
                "tabulated potential queried outside its lattice at ({}, {}, {})",
                x.x, x.y, x.z
            )));
        }
        let p = (x - g.origin) / g.h;
        let i = (p.x.floor() as usize).min(g.n - 2);
        let j = (p.y.floor() as usize).min(g.n - 2);
        let k = (p.z.floor() as usize).min(g.n - 2);
        let (tx, ty, tz) = (p.x - i as f64, p.y - j as f64, p.z - k as f64);
        let mut acc = Vec3::ZERO;
        for (di, wx) in [(0usize, 1.0 - tx), (1, tx)] {
            for (dj, wy) in [(0usize, 1.0 - ty), (1, ty)] {
                for (dk, wz) in [(0usize, 1.0 - tz), (1, tz)] {
                    acc = acc + self.values[g.index(i + di, j + dj, k + dk)] * (wx * wy * wz);
                }
            }
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// midpoint phase and covariant calculus
// ---------------------------------------------------------------------------

/// The unit phase factor e^{i(x-y).A((x+y)/2)}.
pub fn midpoint_phase(a: &VectorPotential, x: Vec3, y: Vec3) -> Result<Complex64> {
    let ang = midpoint_phase_angle(a, x, y)?;
    Ok(Complex64::from_polar(1.0, ang))
}

/// The real angle (x-y).A((x+y)/2).
pub fn midpoint_phase_angle(a: &VectorPotential, x: Vec3, y: Vec3) -> Result<f64> {
    if a.is_zero() {
        return Ok(0.0);
    }
    let mid = (x + y) * 0.5;
    Ok((x - y).dot(a.eval(mid)?))
}

/// Covariant gradient (nabla - i A) u at x.
pub fn covariant_gradient(a: &VectorPotential, u: &SampledField, x: Vec3) -> Result<CVec3> {
    let g = u.gradient_at(x)?;
    if a.is_zero() {
        return Ok(g);
    }
    let av = a.eval(x)?;
    let uv = u.value_at(x);
    Ok(g - CVec3::from_real(av) * (Complex64::i() * uv))
}

/// The positive magnetic Laplacian -(nabla - iA)^2 u
/// = -Lap u + i u div A + 2 i A . grad u + |A|^2 u.
pub fn magnetic_laplacian(a: &VectorPotential, u: &SampledField, x: Vec3) -> Result<Complex64> {
    let mut lap = Complex64::new(0.0, 0.0);
    for axis in 0..3 {
        lap += u.second_partial(x, axis, axis)?;
    }
    let uv = u.value_at(x);
    if a.is_zero() {
        return Ok(-lap);
    }
    let av = a.eval(x)?;
    let div = a.divergence(x)?;
    let grad = u.gradient_at(x)?;
    let i = Complex64::i();
    Ok(-lap + i * uv * div + i * 2.0 * grad.dot_real(av) + av.norm_sq() * uv)
}

/// Magnetic Hessian: the symmetric complex matrix with entries
/// h_{ab} u = d2_{ab} u - i A_b d_a u - i A_a d_b u
///            - (i/2)(d_a A_b + d_b A_a) u - A_a A_b u.
/// Its trace is -(positive magnetic Laplacian).
pub fn magnetic_hessian(a: &VectorPotential, u: &SampledField, x: Vec3) -> Result<CMat3> {
    let uv = u.value_at(x);
    let grad = u.gradient_at(x)?;
    let av = a.eval(x)?;
    let ja = a.jacobian(x)?;
    let i = Complex64::i();
    let mut out = CMat3::zero();
    for p in 0..3 {
        for q in 0..3 {
            let d2 = u.second_partial(x, p, q)?;
            let sym_grad_a = 0.5 * (ja[p][q] + ja[q][p]);
            out.0[p][q] = d2
                - i * av.component(q) * grad.component(p)
                - i * av.component(p) * grad.component(q)
                - i * sym_grad_a * uv
                - av.component(p) * av.component(q) * uv;
        }
    }
    Ok(out)
}

/// Midpoint-phase central-difference covariant gradient on the lattice.
///
/// Per axis: D_a u(x) = [e^{-i h A_a(x + h e_a / 2)} u(x + h e_a)
///                      - e^{+i h A_a(x - h e_a / 2)} u(x - h e_a)] / (2h),
/// with zero extension outside the grid. Gauge covariant on the lattice:
/// under v(x) = e^{i eta.x} u(x + xi) with linear A and eta = -A xi, the
/// modulus |D_a v|(x) equals |D_a u|(x + xi) exactly.
pub fn covariant_stencil_gradient(
    a: &VectorPotential,
    u: &SampledField,
    idx: usize,
) -> Result<CVec3> {
    let g = u.grid();
    let (i, j, k) = g.decompose(idx);
    let x = g.node(i, j, k);
    let h = g.h;
    let mut comps = [Complex64::new(0.0, 0.0); 3];
    for (axis, c) in comps.iter_mut().enumerate() {
        let step = Vec3::axis(axis) * h;
        let up = {
            let (mut a3, mut b3, mut c3) = (i as i64, j as i64, k as i64);
            match axis {
                0 => a3 += 1,
                1 => b3 += 1,
                _ => c3 += 1,
            }
            if a3 < 0 || b3 < 0 || c3 < 0 || a3 >= g.n as i64 || b3 >= g.n as i64 || c3 >= g.n as i64
            {
                Complex64::new(0.0, 0.0)
            } else {
                u.values()[g.index(a3 as usize, b3 as usize, c3 as usize)]
            }
        };
        let dn = {
            let (mut a3, mut b3, mut c3) = (i as i64, j as i64, k as i64);
            match axis {
                0 => a3 -= 1,
                1 => b3 -= 1,
                _ => c3 -= 1,
            }
            if a3 < 0 || b3 < 0 || c3 < 0 || a3 >= g.n as i64 || b3 >= g.n as i64 || c3 >= g.n as i64
            {
                Complex64::new(0.0, 0.0)
            } else {
                u.values()[g.index(a3 as usize, b3 as usize, c3 as usize)]
            }
        };
        if a.is_zero() {
            *c = (up - dn) / (2.0 * h);
        } else {
            let phi_up = h * a.eval(x + step * 0.5)?.component(axis);
            let phi_dn = h * a.eval(x - step * 0.5)?.component(axis);
            *c = (Complex64::from_polar(1.0, -phi_up) * up
                - Complex64::from_polar(1.0, phi_dn) * dn)
                / (2.0 * h);
        }
    }
    Ok(CVec3::new(comps[0], comps[1], comps[2]))
}

/// Max deviation of the rotational equivariance identity
/// g(x-y).A(g (x+y)/2) = (x-y).A((x+y)/2) over the given samples.
pub fn isometry_check(
    a: &VectorPotential,
    rotations: &[Mat3],
    pairs: &[(Vec3, Vec3)],
) -> Result<(bool, f64)> {
    let mut worst: f64 = 0.0;
    for g in rotations {
        for &(x, y) in pairs {
            let base = (x - y).dot(a.eval((x + y) * 0.5)?);
            let rotated = g.mul_vec(x - y).dot(a.eval(g.mul_vec((x + y) * 0.5))?);
            worst = worst.max((rotated - base).abs());
        }
    }
    Ok((worst <= 1e-12, worst))
}
