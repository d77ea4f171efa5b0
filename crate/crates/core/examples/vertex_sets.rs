// Builds the gasket and Hata structures from their gluing tables and
// prints the vertex counts of the first few refinement levels.

use pcf_energy::structure::{build_structure, Word};
use pcf_energy::zoo;

pub fn run_example() -> pcf_energy::Result<()> {
    for (name, desc) in [
        ("gasket(2,2)", zoo::gasket_structure(2, 2)?),
        ("gasket(3,2)", zoo::gasket_structure(3, 2)?),
        ("hata", zoo::hata_structure()),
    ] {
        let s = build_structure(&desc)?;
        let counts: Vec<usize> = (0..=4)
            .map(|m| s.vertex_set(m).map(|v| v.n_vertices()))
            .collect::<pcf_energy::Result<_>>()?;
        println!("{name:<12} #V_m for m=0..4: {counts:?}");
    }

    // A vertex is named by its lexicographically smallest (word, point).
    let sg = build_structure(&zoo::gasket_structure(2, 2)?)?;
    let v2 = sg.vertex_set(2)?;
    let cell: Word = "12".parse()?;
    let verts = v2.cell_vertices(cell.index(3));
    for &v in verts {
        let (w, a) = v2.representative(v as usize, 3);
        println!("vertex {v} of K_12 is q_{} of K_{w}", a + 1);
    }
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
