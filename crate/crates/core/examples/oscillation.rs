// Oscillation of a harmonic function on cells against `√(r_w ν_f(K_w))`.

use pcf_energy::derivative::oscillation_audit;
use pcf_energy::zoo;

pub fn run_example() -> pcf_energy::Result<()> {
    let sg = zoo::gasket(2, 2)?;
    let report = oscillation_audit(&sg, &sg.basis(0), 3, 2)?;
    let (lo, hi) = report.band.expect("h_1 is nonconstant");
    println!("Osc / sqrt(r_w nu(K_w)) lies in [{lo:.4}, {hi:.4}] over {} cells", report.cells.len());
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
