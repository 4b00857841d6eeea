use fracmag::energy::{ChoquardParams, RieszMode};
use fracmag::solver::*;
use fracmag::{FracParams, VectorPotential};

fn main() {
    let p = FracParams::new(0.5, 1.0).unwrap();
    let cp = ChoquardParams::new(2.0, 2.0, RieszMode::Standard).unwrap();
    let cfg = MinimizeConfig {
        grid: GridSpec::Radial { n: 96, r_max: 10.0 },
        p_exp: 3.0,
        max_iters: 2000,
        step0: 0.5,
        tol_energy: 1e-12,
        tol_residual: 1e-4,
        seed: 7,
        lp_mass: 1.0,
    };
    match minimize_choquard(p, &VectorPotential::zero(), &cp, &cfg) {
        Ok(gs) => {
            println!("iters={} tau={:.10} residual={:.3e}", gs.iters, gs.energy, gs.residual);
            let n = gs.trace.len();
            println!("trace len {} last {:?}", n, &gs.trace[n.saturating_sub(3)..]);
        }
        Err(e) => println!("err: {e}"),
    }
}
