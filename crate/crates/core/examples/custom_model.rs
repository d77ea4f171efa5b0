// Round-trips a model through JSON and loads a hand-written structure
// with solved weights in float mode.

use pcf_energy::harmonic::Fractal;
use pcf_energy::measure::energy_measure;
use pcf_energy::zoo::{ModelDescription, ZooFamily};

const SOURCE: &str = r#"{
  "structure": {
    "n_symbols": 3,
    "boundary_size": 3,
    "gluing": [[1, 2, 2, 1], [1, 3, 3, 1], [2, 3, 3, 2]],
    "anchors": {"1": 1, "2": 2, "3": 3}
  },
  "harmonic": {
    "D": [["-2", "1", "1"], ["1", "-2", "1"], ["1", "1", "-2"]],
    "r": ["0.6", "3/5", 0.6],
    "Q": "mean"
  }
}"#;

pub fn run_example() -> pcf_energy::Result<()> {
    let model: ModelDescription = serde_json::from_str(SOURCE)?;
    let sg: Fractal<f64> = model.build()?;
    let table = energy_measure(&sg, &sg.basis(0), 3)?;
    println!("float mode: nu_h1(K) = {}", table.total());

    let emitted = serde_json::to_string(&ZooFamily::Hata { r: pcf_energy::scalar::rational(1, 3) }.model()?)?;
    let back: ModelDescription = serde_json::from_str(&emitted)?;
    let hata: Fractal<num::BigRational> = back.build()?;
    println!("hata(1/3) weights: {:?}", hata.harmonic().weights().iter().map(ToString::to_string).collect::<Vec<_>>());
    Ok(())
}

fn main() -> pcf_energy::Result<()> {
    run_example()
}
