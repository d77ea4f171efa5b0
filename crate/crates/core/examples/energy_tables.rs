// Cell tables of the energy measure of a boundary harmonic function, and
// their CSV form.

use pcf_energy::measure::{cell_energy_measure, energy_measure};
use pcf_energy::scalar::rational;
use pcf_energy::zoo;

pub fn run_example() -> pcf_energy::Result<()> {
    let sg = zoo::gasket(2, 2)?;
    let h1 = sg.basis(0);

    let t1 = energy_measure(&sg, &h1, 1)?;
    let mut csv = Vec::new();
    t1.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));

    // Total mass is 2E(f) at every level, and tables refine additively.
    let t4 = energy_measure(&sg, &h1, 4)?;
    assert_eq!(t4.total(), rational(2, 1) * sg.energy(&h1)?);
    assert_eq!(t4.coarsen().and_then(|t| t.coarsen()).unwrap(), energy_measure(&sg, &h1, 2)?);

    let mutual = cell_energy_measure(&sg, &h1, &sg.basis(1), 2)?;
    println!("nu_(h1,h2) on K_11 = {}", mutual.get(&"11".parse()?).unwrap());
    println!("nu_(h1,h2)(K) = {}", mutual.total());
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
