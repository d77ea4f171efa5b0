// The level-8 pipeline (tables, Gram field, ranks) on the gasket, run on
// thread pools of different sizes; rational output is identical.

use std::time::Instant;

use pcf_energy::index::{gram_field, index_field, DEFAULT_RANK_TOL};
use pcf_energy::measure::boundary_dominant;
use pcf_energy::zoo;

pub fn run_example() -> pcf_energy::Result<()> {
    let sg = zoo::gasket(2, 2)?;
    let level = 6;
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        let start = Instant::now();
        let ranks = pool.install(|| -> pcf_energy::Result<_> {
            let nu = boundary_dominant(&sg, level)?;
            let field = gram_field(&sg, &sg.boundary_basis(), &nu, level)?;
            Ok((field.matrices().to_vec(), index_field(&field, DEFAULT_RANK_TOL).ranks()))
        })?;
        println!("{threads} thread(s): {:?}", start.elapsed());
        outputs.push(ranks);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
