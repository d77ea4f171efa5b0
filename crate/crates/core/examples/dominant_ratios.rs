// The dominant measure `Σ_q ν_{h_q}` and Radon-Nikodym cell ratios
// against it.

use pcf_energy::measure::{boundary_dominant, energy_measure, rn_ratio};
use pcf_energy::zoo;

pub fn run_example() -> pcf_energy::Result<()> {
    let sg = zoo::gasket(2, 2)?;
    let nu = boundary_dominant(&sg, 2)?;
    println!("nu(K) = {}", nu.table().total());

    let z = rn_ratio(&energy_measure(&sg, &sg.basis(0), 2)?, nu.table())?;
    for (i, r) in z.ratios().iter().enumerate().take(3) {
        println!("Z(K_{}) = {}", nu.table().word(i), r.as_ref().unwrap());
    }
    assert!(z.is_absolutely_continuous());

    // On Hata's set ι(1,0,0) is constant on K_2, so its ratio vanishes there.
    let hata = zoo::hata(pcf_energy::scalar::rational(1, 2))?;
    let nu = boundary_dominant(&hata, 3)?;
    let z = rn_ratio(&energy_measure(&hata, &hata.basis(0), 3)?, nu.table())?;
    println!("hata: {} cells with 0/0 := 1", z.zero_over_zero().len());
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
