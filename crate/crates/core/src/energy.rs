//! Quadratic forms and nonlinear energies: the Bessel-kernel Gagliardo
//! seminorm, the full norm and its polarization, the weak-form residual, the
//! diamagnetic gap, Riesz convolutions, and the Choquard quotient.
//!
//! The double integral over pairs is discretized on the sampling lattice.
//! Three refinements keep it honest near the kernel singularity and at the
//! box boundary:
//!
//! * the zero cell (y in the cell of x) is replaced by the quadratic model
//!   |grad_A u(x)|^2 (1/3) int_cell |z|^2 k(z) dz, the leading term of the
//!   phase-corrected difference;
//! * optionally, displacement cells with |d|^2 <= near_q h^2 are integrated
//!   by product Gauss-Legendre against the actual field values, which
//!   removes the midpoint error of the steep kernel right next to the
//!   singularity;
//! * pairs with one end outside the box are closed by treating the field as
//!   zero there, so the sum approximates the whole-space integral for
//!   decaying fields.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    covariant_gradient, covariant_stencil_gradient, midpoint_phase_angle, CartesianGrid,
    SampledField, VectorPotential,
};
use crate::geom::{CVec3, Vec3};
use crate::kernel::{FracParams, LevyKernel};
use crate::quad::{gauss_legendre, lebedev};
use crate::sum::{par_sum_by, sum_slice, Accumulator};

/// Near-field policy for the pair sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NearField {
    /// Zero-cell model only; plain lattice weights elsewhere. Cheap, and the
    /// only level available to iterative solvers.
    Model,
    /// Product-exact Gauss-Legendre over displacement cells with integer
    /// squared distance <= `max_q`, `gl`^3 nodes per cell. Needs field
    /// values between nodes (analytic evaluator or trilinear interpolation).
    CellRefined { max_q: usize, gl: usize },
}

/// Controls for the discrete pair double integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairQuadratureSpec {
    /// Pairs closer than `h_cut_factor * h` are excluded from the lattice
    /// sum and covered by the zero-cell model. The default excludes only
    /// the diagonal.
    pub h_cut_factor: f64,
    /// Truncate pair interactions beyond this distance. `None` keeps all.
    pub r_far: Option<f64>,
    /// Close the sum against an implicit zero field outside the grid.
    pub exterior_closure: bool,
    pub near_field: NearField,
    /// Pair-sum capacity guard (nodes per grid).
    pub max_nodes: usize,
}

impl Default for PairQuadratureSpec {
    fn default() -> Self {
        PairQuadratureSpec {
            h_cut_factor: 1.0,
            r_far: None,
            exterior_closure: true,
            near_field: NearField::Model,
            max_nodes: 33 * 33 * 33,
        }
    }
}

impl PairQuadratureSpec {
    /// The refined profile used by the verification suites.
    pub fn refined() -> Self {
        PairQuadratureSpec { near_field: NearField::CellRefined { max_q: 12, gl: 4 }, ..Default::default() }
    }
}

/// Energy decomposition for one configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Raw pair double integral [u]^2_{A,s} (no prefactor).
    pub seminorm_sq: f64,
    /// m^(2s) ||u||^2_{L^2}.
    pub mass_sq: f64,
    /// (C_s/2) m^((3+2s)/2) seminorm_sq + mass_sq.
    pub norm_sq: f64,
    /// Magnitude of the modeled (zero-cell) part, after the prefactor.
    pub quad_err: f64,
}

/// Riesz-potential normalization choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RieszMode {
    /// pi^(3/2) 2^alpha Gamma(alpha/2) / Gamma((3-alpha)/2), as printed in
    /// the operator definition used here.
    AsWritten,
    /// Gamma((3-alpha)/2) / (pi^(3/2) 2^alpha Gamma(alpha/2)), the common
    /// convention with I_alpha * I_beta = I_(alpha+beta).
    Standard,
}

/// Parameters of the Choquard nonlinearity (I_alpha * |u|^p) |u|^(p-2) u.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChoquardParams {
    pub alpha: f64,
    pub p: f64,
    pub riesz_mode: RieszMode,
}

impl ChoquardParams {
    pub fn new(alpha: f64, p: f64, riesz_mode: RieszMode) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 3.0) {
            return Err(Error::domain(format!("alpha must lie in (0,3), got {alpha}")));
        }
        Ok(ChoquardParams { alpha, p, riesz_mode })
    }

    /// Admissible exponent window 1 + alpha/3 < p < (3+alpha)/(3-2s).
    pub fn validate_for(&self, s: f64) -> Result<()> {
        let lo = 1.0 + self.alpha / 3.0;
        let hi = (3.0 + self.alpha) / (3.0 - 2.0 * s);
        if !(self.p > lo && self.p < hi) {
            return Err(Error::domain(format!(
                "Choquard exponent p={} outside ({lo:.4}, {hi:.4}) for s={s}",
                self.p
            )));
        }
        Ok(())
    }

    /// The Riesz constant in the selected mode.
    pub fn riesz_constant(&self) -> f64 {
        let a = self.alpha;
        let g_half = crate::specfun::gamma(a / 2.0).expect("alpha/2 > 0");
        let g_rest = crate::specfun::gamma((3.0 - a) / 2.0).expect("(3-alpha)/2 > 0");
        let pi32 = std::f64::consts::PI.powf(1.5);
        match self.riesz_mode {
            RieszMode::AsWritten => pi32 * 2f64.powf(a) * g_half / g_rest,
            RieszMode::Standard => g_rest / (pi32 * 2f64.powf(a) * g_half),
        }
    }
}

/// Right-hand sides for the weak residual.
#[derive(Debug, Clone, Copy)]
pub enum RhsKind {
    Power { p_exp: f64 },
    Choquard(ChoquardParams),
}

// ---------------------------------------------------------------------------
// pair engine
// ---------------------------------------------------------------------------

/// Precomputed machinery for pair sums of fields on one lattice with one
/// parameter pair: the kernel displacement table, the zero-cell moment, and
/// the exterior closure profile. Field independent, so it is built once and
/// reused across evaluations.
pub struct PairEngine {
    lk: std::sync::Arc<LevyKernel>,
    grid: CartesianGrid,
    spec: PairQuadratureSpec,
    /// Kernel at displacement sqrt(q) h, indexed by integer squared
    /// displacement q; zero where the pair is excluded (q = 0, below the
    /// h_cut, beyond r_far, or inside the refined near region).
    ktab: Vec<f64>,
    /// Second-moment model constant: (1/3) int_W |z|^2 k(z) dz over the
    /// excluded cell union W.
    c0: f64,
    /// Exterior closure per node (sum of kernel mass over outside lattice).
    ext: Vec<f64>,
    /// Near cells for the refined level: (displacement, GL offsets).
    near_cells: Vec<[i64; 3]>,
    near_gl: Vec<(Vec3, f64)>,
}

impl PairEngine {
    pub fn new(params: FracParams, grid: CartesianGrid, spec: PairQuadratureSpec) -> Result<Self> {
        if grid.len() > spec.max_nodes {
            return Err(Error::capacity(format!(
                "grid has {} nodes, pair-sum budget allows {}",
                grid.len(),
                spec.max_nodes
            )));
        }
        let lk = LevyKernel::cached(params);
        let n = grid.n;
        let h = grid.h;
        let qmax = 3 * (n - 1) * (n - 1);

        let near_q = match spec.near_field {
            NearField::Model => 0,
            NearField::CellRefined { max_q, .. } => max_q,
        };
        let hcut_q = spec.h_cut_factor * spec.h_cut_factor; // in units of h^2
        let rfar_q = spec.r_far.map(|r| (r / h) * (r / h));

        let mut ktab = vec![0.0; qmax + 1];
        for (q, slot) in ktab.iter_mut().enumerate().skip(1) {
            let qf = q as f64;
            if qf < hcut_q || q <= near_q {
                continue;
            }
            if let Some(rq) = rfar_q {
                if qf > rq {
                    continue;
                }
            }
            *slot = lk.profile(h * qf.sqrt());
        }

        // zero-cell model constant over the excluded cell union: always the
        // central cell, plus the cells of lattice points under the h_cut
        let mut c0 = second_moment_center_cell(&lk, h);
        if spec.h_cut_factor > 1.0 {
            let reach = spec.h_cut_factor.ceil() as i64;
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        let q = (dx * dx + dy * dy + dz * dz) as f64;
                        if q == 0.0 || q >= hcut_q {
                            continue;
                        }
                        c0 += second_moment_offset_cell(&lk, h, [dx, dy, dz]);
                    }
                }
            }
        }

        // near-field cell list and GL offsets
        let mut near_cells = Vec::new();
        let mut near_gl = Vec::new();
        if let NearField::CellRefined { max_q, gl } = spec.near_field {
            let reach = (max_q as f64).sqrt().floor() as i64;
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        let q = dx * dx + dy * dy + dz * dz;
                        if q == 0 || q as usize > max_q {
                            continue;
                        }
                        if (q as f64) < hcut_q {
                            continue;
                        }
                        near_cells.push([dx, dy, dz]);
                    }
                }
            }
            let (xs, ws) = gauss_legendre(gl);
            for (&ax, &wx) in xs.iter().zip(ws.iter()) {
                for (&ay, &wy) in xs.iter().zip(ws.iter()) {
                    for (&az, &wz) in xs.iter().zip(ws.iter()) {
                        near_gl.push((
                            Vec3::new(ax, ay, az) * (0.5 * h),
                            wx * wy * wz * (0.5 * h).powi(3),
                        ));
                    }
                }
            }
        }

        // exterior closure: ext_i = T_all - T_in(i), both truncated at the
        // same radius, where T_all is the position-independent full-lattice
        // kernel mass and T_in the in-box part
        let mut ext = vec![0.0; grid.len()];
        if spec.exterior_closure {
            let r_reach = spec.r_far.unwrap_or(f64::INFINITY).min(38.0 / params.m());
            let mq = ((r_reach / h) * (r_reach / h)).floor() as usize;
            let reach = (mq as f64).sqrt().floor() as i64;
            let w = grid.cell_volume();
            // kernel table out to the closure radius
            let kext: Vec<f64> = (0..=3 * (reach as usize) * (reach as usize))
                .map(|q| if q == 0 { 0.0 } else { lk.profile(h * (q as f64).sqrt()) })
                .collect();
            let mut t_all = Accumulator::new();
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        let q = (dx * dx + dy * dy + dz * dz) as usize;
                        if q == 0 || q > mq {
                            continue;
                        }
                        t_all.add(kext[q]);
                    }
                }
            }
            let t_all = t_all.value() * w;
            let nn = grid.len();
            let t_in: Vec<f64> = (0..nn)
                .into_par_iter()
                .map(|idx| {
                    let (i, j, k) = grid.decompose(idx);
                    let mut acc = Accumulator::new();
                    for i2 in 0..n {
                        for j2 in 0..n {
                            for k2 in 0..n {
                                let dx = i as i64 - i2 as i64;
                                let dy = j as i64 - j2 as i64;
                                let dz = k as i64 - k2 as i64;
                                let q = (dx * dx + dy * dy + dz * dz) as usize;
                                if q == 0 || q > mq {
                                    continue;
                                }
                                acc.add(kext[q]);
                            }
                        }
                    }
                    acc.value() * w
                })
                .collect();
            for (e, t) in ext.iter_mut().zip(t_in.iter()) {
                *e = (t_all - t).max(0.0);
            }
        }

        Ok(PairEngine { lk, grid, spec, ktab, c0, ext, near_cells, near_gl })
    }

    pub fn kernel(&self) -> &LevyKernel {
        &self.lk
    }

    pub fn grid(&self) -> CartesianGrid {
        self.grid
    }

    pub fn spec(&self) -> &PairQuadratureSpec {
        &self.spec
    }

    pub fn params(&self) -> FracParams {
        self.lk.params()
    }

    /// Zero-cell model constant (1/3) int_W |z|^2 k.
    pub fn zero_cell_moment(&self) -> f64 {
        self.c0
    }

    pub fn exterior_profile(&self) -> &[f64] {
        &self.ext
    }

    /// Per-node kernel row sums sum_j k(|x_l - x_j|) over the active pair
    /// table, the diagonal scale of the pair quadratic form.
    pub fn kernel_row_sums(&self) -> Vec<f64> {
        let grid = self.grid;
        let n = grid.n;
        (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = grid.decompose(idx);
                let mut acc = Accumulator::new();
                for i2 in 0..n {
                    let dx = i as i64 - i2 as i64;
                    for j2 in 0..n {
                        let dy = j as i64 - j2 as i64;
                        let qxy = dx * dx + dy * dy;
                        for k2 in 0..n {
                            let dz = k as i64 - k2 as i64;
                            acc.add(self.ktab[(qxy + dz * dz) as usize]);
                        }
                    }
                }
                acc.value()
            })
            .collect()
    }

    fn check_field(&self, u: &SampledField) -> Result<()> {
        if u.grid() != self.grid {
            return Err(Error::domain("field grid does not match the pair engine grid"));
        }
        Ok(())
    }

    /// Covariant gradient at a node: analytic when carried, lattice stencil
    /// otherwise.
    fn node_gradient(&self, a: &VectorPotential, u: &SampledField, idx: usize) -> Result<CVec3> {
        if u.analytic().is_some() {
            covariant_gradient(a, u, self.grid.node_of(idx))
        } else {
            covariant_stencil_gradient(a, u, idx)
        }
    }

    /// Raw bilinear pair form <u, v>_{A,s} (no prefactor): lattice pair sum
    /// + refined near cells + zero-cell model + exterior closure. For u = v
    /// this is the squared Gagliardo seminorm.
    pub fn bilinear_raw(
        &self,
        a: &VectorPotential,
        u: &SampledField,
        v: &SampledField,
    ) -> Result<RawParts> {
        self.check_field(u)?;
        self.check_field(v)?;
        let grid = self.grid;
        let n = grid.n;
        let nn = grid.len();
        let w = grid.cell_volume();
        let uvals = u.values();
        let vvals = v.values();
        let same = std::ptr::eq(u, v);

        // main lattice pair sum, ordered pairs, deterministic reduction
        let pair = par_sum_by(nn, |idx| {
            let (i, j, k) = grid.decompose(idx);
            let xi = grid.node(i, j, k);
            let ui = uvals[idx];
            let vi = vvals[idx];
            let mut acc = Accumulator::new();
            for i2 in 0..n {
                let dx = i as i64 - i2 as i64;
                for j2 in 0..n {
                    let dy = j as i64 - j2 as i64;
                    let qxy = dx * dx + dy * dy;
                    let row = (i2 * n + j2) * n;
                    for k2 in 0..n {
                        let dz = k as i64 - k2 as i64;
                        let q = (qxy + dz * dz) as usize;
                        let kv = self.ktab[q];
                        if kv == 0.0 {
                            continue;
                        }
                        let jdx = row + k2;
                        let (du, dv) = if a.is_zero() {
                            (ui - uvals[jdx], vi - vvals[jdx])
                        } else {
                            let xj = grid.node(i2, j2, k2);
                            let ang = midpoint_phase_angle(a, xi, xj).expect("potential eval");
                            let ph = Complex64::from_polar(1.0, -ang);
                            (ph * ui - uvals[jdx], ph * vi - vvals[jdx])
                        };
                        let prod = if same { du.norm_sqr() } else { (du * dv.conj()).re };
                        acc.add(kv * prod);
                    }
                }
            }
            acc.value() * w * w
        });

        // refined near cells
        let near = if self.near_cells.is_empty() {
            0.0
        } else {
            par_sum_by(nn, |idx| {
                let x = grid.node_of(idx);
                let ui = uvals[idx];
                let vi = vvals[idx];
                let mut acc = Accumulator::new();
                for cell in &self.near_cells {
                    let base = Vec3::new(cell[0] as f64, cell[1] as f64, cell[2] as f64) * grid.h;
                    for &(off, wq) in &self.near_gl {
                        let z = base + off;
                        let kv = self.lk.profile(z.norm());
                        let y = x + z;
                        let (du, dv) = if a.is_zero() {
                            let uy = u.value_at(y);
                            (ui - uy, if same { Complex64::default() } else { vi - v.value_at(y) })
                        } else {
                            let ang = midpoint_phase_angle(a, x, y).expect("potential eval");
                            let ph = Complex64::from_polar(1.0, -ang);
                            let uy = u.value_at(y);
                            (
                                ph * ui - uy,
                                if same { Complex64::default() } else { ph * vi - v.value_at(y) },
                            )
                        };
                        let prod = if same { du.norm_sqr() } else { (du * dv.conj()).re };
                        acc.add(kv * wq * prod);
                    }
                }
                acc.value() * w
            })
        };

        // zero-cell quadratic model
        let corr = {
            let gs: Result<Vec<f64>> = (0..nn)
                .into_par_iter()
                .map(|idx| -> Result<f64> {
                    let gu = self.node_gradient(a, u, idx)?;
                    Ok(if same {
                        gu.norm_sq()
                    } else {
                        let gv = self.node_gradient(a, v, idx)?;
                        gu.dot_conj(gv).re
                    })
                })
                .collect();
            sum_slice(&gs?) * self.c0 * w
        };

        // exterior closure: both orderings of (inside, outside) pairs
        let ext = if self.spec.exterior_closure {
            let terms: Vec<f64> = (0..nn)
                .map(|idx| {
                    let p = if same {
                        uvals[idx].norm_sqr()
                    } else {
                        (uvals[idx] * vvals[idx].conj()).re
                    };
                    2.0 * p * self.ext[idx]
                })
                .collect();
            sum_slice(&terms) * w
        } else {
            0.0
        };

        Ok(RawParts { pair: pair + near, corr, ext })
    }

    /// Full norm bilinear form a(u, v) = (C_s/2) m^nu <u,v> + m^(2s) (u,v).
    pub fn norm_bilinear(
        &self,
        a: &VectorPotential,
        u: &SampledField,
        v: &SampledField,
    ) -> Result<f64> {
        let raw = self.bilinear_raw(a, u, v)?;
        let p = self.params();
        let w = self.grid.cell_volume();
        let l2: Vec<f64> = u
            .values()
            .iter()
            .zip(v.values().iter())
            .map(|(a, b)| (a * b.conj()).re)
            .collect();
        Ok(self.lk.seminorm_weight() * raw.total() + p.m().powf(2.0 * p.s()) * sum_slice(&l2) * w)
    }

    /// Gradient of the squared norm: the vector g with
    /// d ||u + t d||^2 / dt |_0 = 2 Re sum_l g_l conj(d_l), so that
    /// a(u, v) = Re sum_l g_l(u) conj(v_l). Grid-only fields (the solver
    /// path), so the zero-cell term differentiates the lattice stencil.
    pub fn norm_gradient(&self, a: &VectorPotential, u: &SampledField) -> Result<Vec<Complex64>> {
        self.check_field(u)?;
        if !self.near_cells.is_empty() {
            return Err(Error::capability(
                "norm gradient is only assembled at the Model near-field level",
            ));
        }
        let grid = self.grid;
        let n = grid.n;
        let nn = grid.len();
        let w = grid.cell_volume();
        let uvals = u.values();
        let p = self.params();
        let weight = self.lk.seminorm_weight();
        let m2s = p.m().powf(2.0 * p.s());

        // pair part: 2 sum_j k_lj w^2 (u_l - e^{i(x_l-x_j).A} u_j),
        // plus the diagonal exterior and mass terms
        let mut grad: Vec<Complex64> = (0..nn)
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = grid.decompose(idx);
                let xi = grid.node(i, j, k);
                let ui = uvals[idx];
                let mut acc_re = Accumulator::new();
                let mut acc_im = Accumulator::new();
                for i2 in 0..n {
                    let dx = i as i64 - i2 as i64;
                    for j2 in 0..n {
                        let dy = j as i64 - j2 as i64;
                        let qxy = dx * dx + dy * dy;
                        let row = (i2 * n + j2) * n;
                        for k2 in 0..n {
                            let dz = k as i64 - k2 as i64;
                            let q = (qxy + dz * dz) as usize;
                            let kv = self.ktab[q];
                            if kv == 0.0 {
                                continue;
                            }
                            let jdx = row + k2;
                            let term = if a.is_zero() {
                                ui - uvals[jdx]
                            } else {
                                let xj = grid.node(i2, j2, k2);
                                let ang =
                                    midpoint_phase_angle(a, xi, xj).expect("potential eval");
                                ui - Complex64::from_polar(1.0, ang) * uvals[jdx]
                            };
                            acc_re.add(kv * term.re);
                            acc_im.add(kv * term.im);
                        }
                    }
                }
                let pair = Complex64::new(acc_re.value(), acc_im.value()) * (2.0 * w * w);
                weight * pair + (weight * 2.0 * self.ext[idx] + m2s) * w * ui
            })
            .collect();

        // zero-cell stencil adjoint: C = c0 sum_i w sum_a |D_a u(x_i)|^2,
        // dC/d conj(u_l) = (c0 w / 2h) sum_a [ D_{a, l-e_a} e^{+i h A_a(x_l - h e_a/2)}
        //                                     - D_{a, l+e_a} e^{-i h A_a(x_l + h e_a/2)} ]
        let gvecs: Result<Vec<CVec3>> = (0..nn)
            .into_par_iter()
            .map(|idx| covariant_stencil_gradient(a, u, idx))
            .collect();
        let gvecs = gvecs?;
        let h = grid.h;
        let scale = weight * self.c0 * w / (2.0 * h);
        for idx in 0..nn {
            let (i, j, k) = grid.decompose(idx);
            let x = grid.node(i, j, k);
            for axis in 0..3 {
                let step = Vec3::axis(axis) * h;
                let lower = match axis {
                    0 => (i >= 1).then(|| grid.index(i - 1, j, k)),
                    1 => (j >= 1).then(|| grid.index(i, j - 1, k)),
                    _ => (k >= 1).then(|| grid.index(i, j, k - 1)),
                };
                if let Some(lo) = lower {
                    let phi = if a.is_zero() {
                        0.0
                    } else {
                        h * a.eval(x - step * 0.5)?.component(axis)
                    };
                    grad[idx] +=
                        scale * gvecs[lo].component(axis) * Complex64::from_polar(1.0, phi);
                }
                let upper = match axis {
                    0 => (i + 1 < n).then(|| grid.index(i + 1, j, k)),
                    1 => (j + 1 < n).then(|| grid.index(i, j + 1, k)),
                    _ => (k + 1 < n).then(|| grid.index(i, j, k + 1)),
                };
                if let Some(up) = upper {
                    let phi = if a.is_zero() {
                        0.0
                    } else {
                        h * a.eval(x + step * 0.5)?.component(axis)
                    };
                    grad[idx] -=
                        scale * gvecs[up].component(axis) * Complex64::from_polar(1.0, -phi);
                }
            }
        }
        Ok(grad)
    }

    /// Energy report for one field.
    pub fn report(&self, a: &VectorPotential, u: &SampledField) -> Result<EnergyReport> {
        let raw = self.bilinear_raw(a, u, u)?;
        let p = self.params();
        let mass_sq = p.m().powf(2.0 * p.s()) * u.l2_norm_sq();
        let weight = self.lk.seminorm_weight();
        let seminorm_sq = raw.total();
        Ok(EnergyReport {
            seminorm_sq,
            mass_sq,
            norm_sq: weight * seminorm_sq + mass_sq,
            quad_err: weight * raw.corr.abs(),
        })
    }
}

/// Parts of the raw pair double integral.
#[derive(Debug, Clone, Copy)]
pub struct RawParts {
    /// Lattice pair contribution (including refined near cells).
    pub pair: f64,
    /// Zero-cell model contribution.
    pub corr: f64,
    /// Exterior closure contribution.
    pub ext: f64,
}

impl RawParts {
    pub fn total(&self) -> f64 {
        self.pair + self.corr + self.ext
    }
}

/// (1/3) int over the central cell [-h/2, h/2]^3 of |z|^2 k(|z|) dz:
/// the inscribed ball radially, the corner remainder by per-direction
/// Gauss-Legendre under a Lebedev rule.
fn second_moment_center_cell(lk: &LevyKernel, h: f64) -> f64 {
    let rin = 0.5 * h;
    let radial = |r: f64| r.powi(4) * lk.profile(r);
    let ball = 4.0 * std::f64::consts::PI
        * crate::kernel::fourth_moment(lk.params(), rin).expect("ball moment");
    let rule = lebedev(86).expect("static rule");
    let (xs, ws) = gauss_legendre(16);
    let mut rest = 0.0;
    for node in &rule {
        let d = node.dir;
        let maxc = d.x.abs().max(d.y.abs()).max(d.z.abs());
        let rout = rin / maxc;
        if rout <= rin {
            continue;
        }
        let mid = 0.5 * (rin + rout);
        let half = 0.5 * (rout - rin);
        let mut acc = 0.0;
        for (x, wq) in xs.iter().zip(ws.iter()) {
            let r = mid + half * x;
            acc += wq * radial(r);
        }
        rest += node.weight * acc * half;
    }
    (ball + 4.0 * std::f64::consts::PI * rest) / 3.0
}

/// (1/3) int over an off-center cell of |z|^2 k(|z|) dz by product GL.
fn second_moment_offset_cell(lk: &LevyKernel, h: f64, d: [i64; 3]) -> f64 {
    let (xs, ws) = gauss_legendre(8);
    let mut acc = 0.0;
    for (&ax, &wx) in xs.iter().zip(ws.iter()) {
        for (&ay, &wy) in xs.iter().zip(ws.iter()) {
            for (&az, &wz) in xs.iter().zip(ws.iter()) {
                let z = Vec3::new(
                    (d[0] as f64 + 0.5 * ax) * h,
                    (d[1] as f64 + 0.5 * ay) * h,
                    (d[2] as f64 + 0.5 * az) * h,
                );
                acc += wx * wy * wz * z.norm_sq() * lk.profile(z.norm());
            }
        }
    }
    acc * (0.5 * h).powi(3) / 3.0
}

// ---------------------------------------------------------------------------
// public operations
// ---------------------------------------------------------------------------

/// Squared seminorm, mass, and norm of `u`.
pub fn seminorm_sq(
    p: FracParams,
    a: &VectorPotential,
    u: &SampledField,
    spec: PairQuadratureSpec,
) -> Result<EnergyReport> {
    PairEngine::new(p, u.grid(), spec)?.report(a, u)
}

/// Polarized inner product (u, v)_{A,s}: the real bilinear form whose
/// diagonal is the squared norm.
pub fn inner_product(
    p: FracParams,
    a: &VectorPotential,
    u: &SampledField,
    v: &SampledField,
    spec: PairQuadratureSpec,
) -> Result<f64> {
    PairEngine::new(p, u.grid(), spec)?.norm_bilinear(a, u, v)
}

/// Pointwise nonlinearity f(u) for the selected right-hand side.
pub fn nonlinearity(
    rhs: &RhsKind,
    u: &SampledField,
    engine_spec: PairQuadratureSpec,
) -> Result<Vec<Complex64>> {
    match rhs {
        RhsKind::Power { p_exp } => Ok(u
            .values()
            .iter()
            .map(|&z| {
                let r = z.norm();
                if r == 0.0 {
                    Complex64::default()
                } else {
                    z * r.powf(p_exp - 2.0)
                }
            })
            .collect()),
        RhsKind::Choquard(cp) => {
            let _ = engine_spec;
            let conv = riesz_convolution_all(*cp, u)?;
            Ok(u.values()
                .iter()
                .zip(conv.iter())
                .map(|(&z, &c)| {
                    let r = z.norm();
                    if r == 0.0 {
                        Complex64::default()
                    } else {
                        z * (c * r.powf(cp.p - 2.0))
                    }
                })
                .collect())
        }
    }
}

/// Max over test fields v of |a(u,v) - lambda Re int f(u) conj(v)| / ||v||,
/// the discrete weak-form residual.
pub fn weak_residual(
    p: FracParams,
    a: &VectorPotential,
    u: &SampledField,
    rhs: RhsKind,
    tests: &[SampledField],
    lambda: f64,
    spec: PairQuadratureSpec,
) -> Result<f64> {
    if tests.is_empty() {
        return Err(Error::domain("weak residual needs a nonempty test set"));
    }
    let engine = PairEngine::new(p, u.grid(), spec)?;
    let f = nonlinearity(&rhs, u, spec)?;
    let w = u.grid().cell_volume();
    let mut worst: f64 = 0.0;
    for v in tests {
        let auv = engine.norm_bilinear(a, u, v)?;
        let terms: Vec<f64> = f
            .iter()
            .zip(v.values().iter())
            .map(|(fi, vi)| (fi * vi.conj()).re)
            .collect();
        let rhs_val = lambda * sum_slice(&terms) * w;
        let vnorm = engine.norm_bilinear(a, v, v)?.sqrt();
        if vnorm == 0.0 {
            continue;
        }
        worst = worst.max((auv - rhs_val).abs() / vnorm);
    }
    Ok(worst)
}

/// ||u||^2_{A,s} - || |u| ||^2_{H^s_m}: nonnegative up to rounding by the
/// diamagnetic inequality. Both sides are evaluated grid-only through the
/// identical lattice path so the comparison is termwise.
pub fn diamagnetic_gap(
    p: FracParams,
    a: &VectorPotential,
    u: &SampledField,
    spec: PairQuadratureSpec,
) -> Result<f64> {
    let mut spec = spec;
    spec.near_field = NearField::Model;
    let engine = PairEngine::new(p, u.grid(), spec)?;
    let ug = u.strip_analytic();
    let um = u.modulus();
    let zero = VectorPotential::zero();
    let lhs = engine.report(a, &ug)?.norm_sq;
    let rhs = engine.report(&zero, &um)?.norm_sq;
    Ok(lhs - rhs)
}

/// Riesz potential (I_alpha * w)(x) at a grid node, by direct lattice sum
/// with the self-cell replaced by the equal-volume ball integral.
pub fn riesz_convolution(cp: ChoquardParams, w: &SampledField, x: Vec3) -> Result<f64> {
    let grid = w.grid();
    let p = (x - grid.origin) / grid.h;
    let (i, j, k) = (p.x.round() as i64, p.y.round() as i64, p.z.round() as i64);
    if (p.x - i as f64).abs() > 1e-9 || (p.y - j as f64).abs() > 1e-9 || (p.z - k as f64).abs() > 1e-9
    {
        return Err(Error::domain("riesz convolution point must be a grid node"));
    }
    if i < 0 || j < 0 || k < 0 || i >= grid.n as i64 || j >= grid.n as i64 || k >= grid.n as i64 {
        return Err(Error::domain("riesz convolution point outside the grid"));
    }
    let all = riesz_convolution_all(cp, w)?;
    Ok(all[grid.index(i as usize, j as usize, k as usize)])
}

/// (I_alpha * w) at every node.
pub fn riesz_convolution_all(cp: ChoquardParams, w: &SampledField) -> Result<Vec<f64>> {
    if !(cp.alpha > 0.0 && cp.alpha < 3.0) {
        return Err(Error::domain(format!("alpha must lie in (0,3), got {}", cp.alpha)));
    }
    let grid = w.grid();
    let n = grid.n;
    let h = grid.h;
    let cell = grid.cell_volume();
    let aa = cp.riesz_constant();
    let beta = 3.0 - cp.alpha;
    let qmax = 3 * (n - 1) * (n - 1);
    let rtab: Vec<f64> = (0..=qmax)
        .map(|q| if q == 0 { 0.0 } else { (h * (q as f64).sqrt()).powf(-beta) })
        .collect();
    // self cell: constant density over the equal-volume ball
    let r_eq = (3.0 / (4.0 * std::f64::consts::PI)).powf(1.0 / 3.0) * h;
    let self_cell = 4.0 * std::f64::consts::PI * r_eq.powf(cp.alpha) / cp.alpha;
    let vals: Vec<f64> = w.values().iter().map(|z| z.re).collect();
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = grid.decompose(idx);
            let mut acc = Accumulator::new();
            for i2 in 0..n {
                let dx = i as i64 - i2 as i64;
                for j2 in 0..n {
                    let dy = j as i64 - j2 as i64;
                    let qxy = dx * dx + dy * dy;
                    let row = (i2 * n + j2) * n;
                    for k2 in 0..n {
                        let dz = k as i64 - k2 as i64;
                        let q = (qxy + dz * dz) as usize;
                        if q == 0 {
                            continue;
                        }
                        acc.add(rtab[q] * vals[row + k2]);
                    }
                }
            }
            aa * (acc.value() * cell + self_cell * vals[idx])
        })
        .collect();
    Ok(out)
}

/// Choquard interaction energy D(u) = int (I_alpha * |u|^p) |u|^p.
pub fn choquard_energy(cp: ChoquardParams, u: &SampledField) -> Result<f64> {
    let grid = u.grid();
    let wvals: Vec<Complex64> =
        u.values().iter().map(|z| Complex64::new(z.norm().powf(cp.p), 0.0)).collect();
    let wfield = SampledField::from_values(grid, wvals)?;
    let conv = riesz_convolution_all(cp, &wfield)?;
    let cell = grid.cell_volume();
    let terms: Vec<f64> =
        conv.iter().zip(wfield.values().iter()).map(|(c, w)| c * w.re).collect();
    Ok(sum_slice(&terms) * cell)
}

/// The scale-invariant Choquard quotient G(u) = ||u||^2_{A,s} / D(u)^(1/p).
pub fn choquard_quotient(
    p: FracParams,
    a: &VectorPotential,
    u: &SampledField,
    cp: ChoquardParams,
    spec: PairQuadratureSpec,
) -> Result<f64> {
    let d = choquard_energy(cp, u)?;
    if !(d > 0.0) {
        return Err(Error::domain("Choquard quotient of a field with D(u) = 0"));
    }
    let norm_sq = seminorm_sq(p, a, u, spec)?.norm_sq;
    Ok(norm_sq / d.powf(1.0 / cp.p))
}
