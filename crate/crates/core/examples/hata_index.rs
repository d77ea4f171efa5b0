// Index of Hata's tree-like set: the Gram field has rank one away from
// the spine `1^m`.

use pcf_energy::index::{gram_field, index_estimate, index_field, rank_one_factor, DEFAULT_RANK_TOL};
use pcf_energy::measure::boundary_dominant;
use pcf_energy::scalar::rational;
use pcf_energy::zoo;

pub fn run_example() -> pcf_energy::Result<()> {
    let hata = zoo::hata(rational(1, 2))?;
    let m = 8;
    let nu = boundary_dominant(&hata, m)?;
    let field = gram_field(&hata, &hata.boundary_basis(), &nu, m)?;
    let report = index_estimate(&index_field(&field, DEFAULT_RANK_TOL), 1e-2);
    println!("esssup proxy = {}, max rank = {}", report.esssup_proxy, report.max_rank);
    for cell in &report.trimmed {
        println!("  rank {} on K_{} ({:.2e} of the mass)", cell.rank, cell.word, cell.mass_fraction);
    }

    // Off the spine every non-null M_w factors as ζζᵗ.
    let worst = field
        .matrices()
        .iter()
        .skip(1)
        .flatten()
        .map(|mw| rank_one_factor(mw).residual)
        .fold(0.0, f64::max);
    println!("{} null cells; worst rank-one residual off the spine: {worst:.1e}", field.null_cells());
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
