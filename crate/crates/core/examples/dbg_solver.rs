use fracmag::solver::*;
use fracmag::{FracParams, VectorPotential};

fn main() {
    let p = FracParams::new(0.5, 1.0).unwrap();
    let cfg = MinimizeConfig {
        grid: GridSpec::Radial { n: 96, r_max: 10.0 },
        p_exp: 3.0,
        max_iters: 2000,
        step0: 0.5,
        tol_energy: 1e-12,
        tol_residual: 1e-5,
        seed: 7,
        lp_mass: 1.0,
    };
    match minimize_power(p, &VectorPotential::zero(), &cfg) {
        Ok(gs) => {
            println!("iters={} energy={:.10} residual={:.3e}", gs.iters, gs.energy, gs.residual);
            println!("trace len {} first {:?} last {:?}", gs.trace.len(), &gs.trace[..4.min(gs.trace.len())], &gs.trace[gs.trace.len().saturating_sub(4)..]);
        }
        Err(e) => println!("err: {e}"),
    }
}
