// The slope field df/dg along a ladder of levels: the identity sum
// `S_m` climbs towards `E(f)` and the remainders shrink.

use pcf_energy::derivative::derivative_ladder;
use pcf_energy::scalar::rational;
use pcf_energy::zoo;

pub fn run_example() -> pcf_energy::Result<()> {
    let sg = zoo::gasket(2, 2)?;
    let f = sg.from_values(1, [3, 0, -1, 2, 1, 0].map(|x| rational(x, 1)).to_vec())?;
    let g = sg.harmonic_fn(vec![rational(1, 1), rational(0, 1), rational(0, 1)])?;
    for step in derivative_ladder(&sg, &f, &g, &[1, 2, 3, 4, 5, 6])? {
        let median = step.sqrt_remainder.map(|q| q.median).unwrap_or(0.0);
        println!(
            "m={} S_m={:.6} E(f)={:.6} gap={:.3e} median sqrt(rho)={:.3e}",
            step.level, step.s_m, step.energy, step.gap, median
        );
    }
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
