// Gasket-specific checks: nondegeneracy of the `A_i`, the boundary
// eigenvectors `u_q` and `ṽ_q`, and positivity of `ν_h / ν`.

use pcf_energy::scalar::rational;
use pcf_energy::zoo::{self, boundary_eigencheck, fdom_probe, nondegeneracy_check};

pub fn run_example() -> pcf_energy::Result<()> {
    for (d, l) in [(2, 2), (2, 3), (3, 2)] {
        let sg = zoo::gasket(d, l)?;
        let dets: Vec<String> = nondegeneracy_check(sg.harmonic()).into_iter().map(|e| e.det).collect();
        println!("gasket({d},{l}) det A_i: {}", dets.join(" "));
        for q in 1..=d + 1 {
            let e = boundary_eigencheck(&sg, q)?;
            println!("  q_{q}: (u,v) = {}, other |λ| ≤ {:.4} < r = {:.4}", e.pairing, e.max_other_modulus, e.r);
        }
    }

    let sg = zoo::gasket(2, 2)?;
    let h = sg.harmonic_fn(vec![rational(2, 1), rational(-1, 1), rational(5, 1)])?;
    let probe = fdom_probe(&sg, &h, 5)?;
    println!("min nu_h / nu at level 5: {:.4e}", probe.min_ratio);
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
