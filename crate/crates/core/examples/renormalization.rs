// Solves the renormalization equation for gaskets and prints the
// harmonic extension matrices.

use pcf_energy::harmonic::{solve_renormalization, trace_to_boundary};
use pcf_energy::zoo;

pub fn run_example() -> pcf_energy::Result<()> {
    for (d, l) in [(2, 2), (3, 2), (2, 3)] {
        let sg = zoo::gasket(d, l)?;
        let renorm = solve_renormalization(sg.structure(), sg.harmonic().d())?;
        println!("gasket({d},{l}): {} cells, r = {}", sg.n_symbols(), renorm.rho);
    }

    let sg = zoo::gasket(2, 2)?;
    let traced = trace_to_boundary(sg.structure(), sg.harmonic().d(), sg.harmonic().weights())?;
    assert_eq!(&traced, sg.harmonic().d());
    for i in 0..3 {
        println!("A_{} = {:?}", i + 1, sg.harmonic().a(i).to_rows().iter().map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>());
    }
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
