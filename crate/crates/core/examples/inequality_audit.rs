// Audits the cellwise energy and Cauchy-Schwarz inequalities for random
// piecewise harmonic pairs.

use pcf_energy::measure::{inequality_audit, scaling_audit};
use pcf_energy::structure::Word;
use pcf_energy::zoo;
use rand::SeedableRng;

pub fn run_example() -> pcf_energy::Result<()> {
    let sg = zoo::gasket(2, 2)?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    for _ in 0..5 {
        let f = sg.random_function(1, &mut rng, 5)?;
        let g = sg.random_function(2, &mut rng, 5)?;
        let report = inequality_audit(&sg, &f, &g, 4)?;
        println!("{} cells, {} violations", report.cells, report.violations());
    }

    let w: Word = "13".parse()?;
    let report = scaling_audit(&sg, &sg.basis(0), &sg.basis(2), &w, 2)?;
    println!("scaling under psi_13: exact = {}", report.exact);
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
