//! Cell-level energy measures `ν_{f,g}(K_w)`, dominant measures,
//! Radon–Nikodym cell ratios and the measure inequalities as audits.
//!
//! For `f, g ∈ H_k` and `w = u·x` with `|u| = k`,
//!
//! ```text
//! ν_{f,g}(K_w) = −(2 / r_w) ᵗ(A'_x b_u(f)) D (A'_x b_u(g)),
//! ```
//!
//! where `b_u(f) = ι^{-1}(ψ_u^* f)` are the boundary values of `f` on the
//! cell `K_u`. The values are exact: there is no discretization error at
//! any level.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harmonic::{Fractal, HarmonicStructure, PiecewiseHarmonicFn};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::structure::Word;

/// Minimum number of independent subtrees handed to the thread pool.
const MIN_PARALLEL_TASKS: usize = 64;

/// Values of a (signed) measure on the cells `K_w`, `w ∈ W_m`, in
/// lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMeasureTable<T> {
    level: usize,
    n_symbols: usize,
    values: Vec<T>,
}

impl<T: Scalar> CellMeasureTable<T> {
    pub fn new(level: usize, n_symbols: usize, values: Vec<T>) -> Result<Self> {
        let expected = n_symbols.checked_pow(level as u32);
        if expected != Some(values.len()) {
            return Err(Error::LevelMismatch {
                expected: expected.unwrap_or(usize::MAX),
                found: values.len(),
            });
        }
        Ok(Self {
            level,
            n_symbols,
            values,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, w: &Word) -> Option<&T> {
        if w.level() != self.level {
            return None;
        }
        self.values.get(w.index(self.n_symbols))
    }

    pub fn word(&self, cell: usize) -> Word {
        Word::from_index(cell, self.level, self.n_symbols)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Word, &T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.word(i), v))
    }

    /// Sum over cells in lexicographic order (deterministic).
    pub fn total(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + v.clone())
    }

    /// Table one level up: `value(w) = Σ_i value(w·i)`.
    pub fn coarsen(&self) -> Option<Self> {
        if self.level == 0 {
            return None;
        }
        let values = self
            .values
            .chunks(self.n_symbols)
            .map(|c| c.iter().fold(T::zero(), |acc, v| acc + v.clone()))
            .collect();
        Some(Self {
            level: self.level - 1,
            n_symbols: self.n_symbols,
            values,
        })
    }

    /// Values on the cells `w·u`, re-indexed by `u`.
    pub fn subtable(&self, w: &Word) -> Option<Self> {
        if w.level() > self.level {
            return None;
        }
        let depth = self.level - w.level();
        let width = self.n_symbols.pow(depth as u32);
        let start = w.index(self.n_symbols) * width;
        Some(Self {
            level: depth,
            n_symbols: self.n_symbols,
            values: self.values[start..start + width].to_vec(),
        })
    }

    pub fn scaled(&self, c: &T) -> Self {
        Self {
            level: self.level,
            n_symbols: self.n_symbols,
            values: self.values.iter().map(|v| v.clone() * c.clone()).collect(),
        }
    }

    pub fn to_f64(&self) -> CellMeasureTable<f64> {
        CellMeasureTable {
            level: self.level,
            n_symbols: self.n_symbols,
            values: self.values.iter().map(Scalar::to_f64).collect(),
        }
    }

    /// `word,value` rows in lexicographic order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "word,value")?;
        for (w, v) in self.iter() {
            writeln!(out, "{w},{v}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let values: serde_json::Map<String, serde_json::Value> = self
            .iter()
            .map(|(w, v)| (w.to_string(), scalar_json(v)))
            .collect();
        serde_json::json!({ "level": self.level, "values": values })
    }
}

/// Exact values are written as `"p/q"` strings, floats as JSON numbers.
pub fn scalar_json<T: Scalar>(v: &T) -> serde_json::Value {
    if T::EXACT {
        serde_json::Value::String(v.to_string())
    } else {
        serde_json::Number::from_f64(v.to_f64())
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
}

/// `Bᵀ (−D) B · (2 / r_w)` for the boundary-value block `B` (columns are
/// functions).
fn cell_gram_from_block<T: Scalar>(d: &Matrix<T>, block: &Matrix<T>, inv_r: &T) -> Matrix<T> {
    let factor = -(T::one() + T::one()) * inv_r.clone();
    block.transpose().mul(&d.mul(block)).scale(&factor)
}

/// Diagonal of [`cell_gram_from_block`] only.
fn cell_diagonal_from_block<T: Scalar>(d: &Matrix<T>, block: &Matrix<T>, inv_r: &T) -> Vec<T> {
    let factor = -(T::one() + T::one()) * inv_r.clone();
    let db = d.mul(block);
    (0..block.cols())
        .map(|j| {
            (0..block.rows()).fold(T::zero(), |acc, a| acc + block[(a, j)].clone() * db[(a, j)].clone())
                * factor.clone()
        })
        .collect()
}

fn descend_blocks<T: Scalar, R>(
    hs: &HarmonicStructure<T>,
    block: Matrix<T>,
    inv_r: T,
    depth: usize,
    leaf: &(impl Fn(&Matrix<T>, &T) -> R + Sync),
    out: &mut Vec<R>,
) {
    if depth == 0 {
        out.push(leaf(&block, &inv_r));
        return;
    }
    for i in 0..hs.n_symbols() {
        let next = hs.a_proj(i).mul(&block);
        let next_inv = inv_r.clone() / hs.weights()[i].clone();
        descend_blocks(hs, next, next_inv, depth - 1, leaf, out);
    }
}

/// Boundary-value blocks `P·B_u` (one column per function) and `1/r_u` for
/// every `u ∈ W_k`, `k` the deepest function level.
fn starting_blocks<T: Scalar>(
    fractal: &Fractal<T>,
    functions: &[PiecewiseHarmonicFn<T>],
) -> Result<(usize, Vec<(Matrix<T>, T)>)> {
    let level = functions.iter().map(|f| f.level()).max().unwrap_or(0);
    let columns = functions
        .iter()
        .map(|f| fractal.extend(f, level).and_then(|f| fractal.cell_boundary_values(&f)))
        .collect::<Result<Vec<_>>>()?;
    let inv = fractal.inverse_weights(level)?;
    let n0 = fractal.boundary_size();
    let p = fractal.harmonic().p();
    let blocks = inv
        .into_iter()
        .enumerate()
        .map(|(u, inv_r)| {
            let b = Matrix::from_fn(n0, functions.len(), |a, j| columns[j][u][a].clone());
            (p.mul(&b), inv_r)
        })
        .collect();
    Ok((level, blocks))
}

/// Evaluates `leaf(A'_x P B_u, 1/r_w)` on every cell `w = u·x ∈ W_m`, in
/// lexicographic order. Work is split over independent subtrees; the
/// result does not depend on the number of threads.
fn map_cells<T: Scalar, R: Send>(
    fractal: &Fractal<T>,
    functions: &[PiecewiseHarmonicFn<T>],
    level: usize,
    leaf: impl Fn(&Matrix<T>, &T) -> R + Sync,
) -> Result<Vec<R>> {
    let function_level = functions.iter().map(|f| f.level()).max().unwrap_or(0);
    if level < function_level {
        return Err(Error::LevelTooShallow {
            requested: level,
            function_level,
        });
    }
    fractal.structure().n_cells(level)?;
    let hs = fractal.harmonic();
    let (k, mut blocks) = starting_blocks(fractal, functions)?;

    // Push the split point down until there are enough independent tasks.
    let mut split = k;
    while split < level && blocks.len() < MIN_PARALLEL_TASKS {
        blocks = blocks
            .into_iter()
            .flat_map(|(b, inv_r)| {
                (0..hs.n_symbols())
                    .map(|i| (hs.a_proj(i).mul(&b), inv_r.clone() / hs.weights()[i].clone()))
                    .collect::<Vec<_>>()
            })
            .collect();
        split += 1;
    }
    let depth = level - split;
    let chunks: Vec<Vec<R>> = blocks
        .into_par_iter()
        .map(|(b, inv_r)| {
            let mut out = Vec::with_capacity(hs.n_symbols().pow(depth as u32));
            descend_blocks(hs, b, inv_r, depth, &leaf, &mut out);
            out
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Per-cell Gram matrices `(ν_{f_i,f_j}(K_w))_{ij}` for all `w ∈ W_m`, in
/// lexicographic order.
pub fn cell_gram_matrices<T: Scalar>(
    fractal: &Fractal<T>,
    functions: &[PiecewiseHarmonicFn<T>],
    level: usize,
) -> Result<Vec<Matrix<T>>> {
    let d = fractal.harmonic().d();
    map_cells(fractal, functions, level, |b, inv_r| cell_gram_from_block(d, b, inv_r))
}

/// `ν_{f_i}` tables for many functions at once, skipping the off-diagonal
/// entries.
pub fn energy_measures<T: Scalar>(
    fractal: &Fractal<T>,
    functions: &[PiecewiseHarmonicFn<T>],
    level: usize,
) -> Result<Vec<CellMeasureTable<T>>> {
    let d = fractal.harmonic().d();
    let diagonals = map_cells(fractal, functions, level, |b, inv_r| cell_diagonal_from_block(d, b, inv_r))?;
    (0..functions.len())
        .map(|j| {
            CellMeasureTable::new(
                level,
                fractal.n_symbols(),
                diagonals.iter().map(|row| row[j].clone()).collect(),
            )
        })
        .collect()
}

/// Extracts the `(i, j)` entry of every cell Gram matrix as a table.
pub fn table_from_grams<T: Scalar>(
    grams: &[Matrix<T>],
    i: usize,
    j: usize,
    level: usize,
    n_symbols: usize,
) -> Result<CellMeasureTable<T>> {
    CellMeasureTable::new(level, n_symbols, grams.iter().map(|g| g[(i, j)].clone()).collect())
}

/// `ν_{f,g}(K_w)` for all `w ∈ W_m`.
pub fn cell_energy_measure<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    g: &PiecewiseHarmonicFn<T>,
    level: usize,
) -> Result<CellMeasureTable<T>> {
    let grams = cell_gram_matrices(fractal, &[f.clone(), g.clone()], level)?;
    table_from_grams(&grams, 0, 1, level, fractal.n_symbols())
}

/// `ν_f(K_w)` for all `w ∈ W_m`.
pub fn energy_measure<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    level: usize,
) -> Result<CellMeasureTable<T>> {
    let mut tables = energy_measures(fractal, std::slice::from_ref(f), level)?;
    Ok(tables.pop().expect("one table per function"))
}

/// `ν = Σ a_i ν_{f_i}` with strictly positive coefficients.
#[derive(Clone, Debug)]
pub struct DominantMeasure<T> {
    table: CellMeasureTable<T>,
    components: Vec<(T, PiecewiseHarmonicFn<T>)>,
}

impl<T: Scalar> DominantMeasure<T> {
    pub fn table(&self) -> &CellMeasureTable<T> {
        &self.table
    }

    pub fn components(&self) -> &[(T, PiecewiseHarmonicFn<T>)] {
        &self.components
    }

    pub fn level(&self) -> usize {
        self.table.level
    }

    /// Same measure, evaluated at a different level.
    pub fn at_level(&self, fractal: &Fractal<T>, level: usize) -> Result<Self> {
        dominant_measure(fractal, &self.components, level)
    }
}

/// Builds `Σ a_i ν_{f_i}` at level `m`. Whether the components actually
/// span enough of the domain to be energy-dominant is the caller's
/// responsibility; the boundary basis `{h_q}` is the usual choice.
pub fn dominant_measure<T: Scalar>(
    fractal: &Fractal<T>,
    components: &[(T, PiecewiseHarmonicFn<T>)],
    level: usize,
) -> Result<DominantMeasure<T>> {
    if components.is_empty() {
        return Err(Error::Config("dominant measure needs at least one component".into()));
    }
    if let Some((a, _)) = components.iter().find(|(a, _)| *a <= T::zero()) {
        return Err(Error::NonpositiveCoefficient(a.to_string()));
    }
    let functions: Vec<_> = components.iter().map(|(_, f)| f.clone()).collect();
    let tables = energy_measures(fractal, &functions, level)?;
    let values = (0..tables[0].len())
        .map(|c| {
            components
                .iter()
                .zip(&tables)
                .fold(T::zero(), |acc, ((a, _), t)| acc + a.clone() * t.values()[c].clone())
        })
        .collect();
    Ok(DominantMeasure {
        table: CellMeasureTable::new(level, fractal.n_symbols(), values)?,
        components: components.to_vec(),
    })
}

/// `ν = Σ_q ν_{h_q}`.
pub fn boundary_dominant<T: Scalar>(fractal: &Fractal<T>, level: usize) -> Result<DominantMeasure<T>> {
    let comps: Vec<_> = fractal
        .boundary_basis()
        .into_iter()
        .map(|h| (T::one(), h))
        .collect();
    dominant_measure(fractal, &comps, level)
}

/// Cell ratios `Z_m = num / den` with `0/0 := 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioTable<T> {
    level: usize,
    n_symbols: usize,
    /// `None` where `den = 0 ≠ num`.
    ratios: Vec<Option<T>>,
    zero_over_zero: Vec<usize>,
    violations: Vec<usize>,
}

impl<T: Scalar> RatioTable<T> {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn ratios(&self) -> &[Option<T>] {
        &self.ratios
    }

    pub fn get(&self, w: &Word) -> Option<&T> {
        self.ratios.get(w.index(self.n_symbols))?.as_ref()
    }

    /// Cells where the convention `0/0 := 1` was applied.
    pub fn zero_over_zero(&self) -> Vec<Word> {
        self.zero_over_zero
            .iter()
            .map(|&c| Word::from_index(c, self.level, self.n_symbols))
            .collect()
    }

    /// Cells with `den = 0` but `num ≠ 0`: absolute continuity fails there.
    pub fn violations(&self) -> Vec<Word> {
        self.violations
            .iter()
            .map(|&c| Word::from_index(c, self.level, self.n_symbols))
            .collect()
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn rn_ratio<T: Scalar>(num: &CellMeasureTable<T>, den: &CellMeasureTable<T>) -> Result<RatioTable<T>> {
    if num.level != den.level || num.n_symbols != den.n_symbols {
        return Err(Error::LevelMismatch {
            expected: den.level,
            found: num.level,
        });
    }
    let mut zero_over_zero = Vec::new();
    let mut violations = Vec::new();
    let ratios = num
        .values
        .iter()
        .zip(&den.values)
        .enumerate()
        .map(|(c, (n, d))| {
            if d.is_zero() {
                if n.is_zero() {
                    zero_over_zero.push(c);
                    Some(T::one())
                } else {
                    violations.push(c);
                    None
                }
            } else {
                Some(n.clone() / d.clone())
            }
        })
        .collect();
    Ok(RatioTable {
        level: num.level,
        n_symbols: num.n_symbols,
        ratios,
        zero_over_zero,
        violations,
    })
}

/// Result of checking, on every cell `B`,
/// `|√ν_f(B) − √ν_g(B)|² ≤ ν_{f−g}(B) ≤ 2E(f−g)` and
/// `|ν_{f,g}(B)| ≤ √ν_f(B) √ν_g(B)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InequalityReport {
    pub level: usize,
    pub cells: usize,
    pub energy_lower_violations: usize,
    pub energy_upper_violations: usize,
    pub schwarz_violations: usize,
    /// Cells where Cauchy–Schwarz holds with equality (within tolerance).
    pub schwarz_tight_cells: usize,
    /// Largest relative excess over all cells and inequalities (0 if none).
    pub max_relative_violation: f64,
}

impl InequalityReport {
    pub fn violations(&self) -> usize {
        self.energy_lower_violations + self.energy_upper_violations + self.schwarz_violations
    }
}

/// Relative tolerance for the audits in `f64` mode; exact mode uses 0.
pub const AUDIT_TOL: f64 = 1e-9;

pub fn inequality_audit<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    g: &PiecewiseHarmonicFn<T>,
    level: usize,
) -> Result<InequalityReport> {
    let diff = fractal.linear_combination(&[(T::one(), f), (-T::one(), g)])?;
    let grams = cell_gram_matrices(fractal, &[f.clone(), g.clone(), diff.clone()], level)?;
    let two = T::one() + T::one();
    let bound = two.clone() * fractal.energy(&diff)?;
    let four = two.clone() * two.clone();

    let mut report = InequalityReport {
        level,
        cells: grams.len(),
        ..Default::default()
    };
    let mut note = |excess: f64, scale: f64| {
        let rel = if scale > 0.0 { excess / scale } else { excess };
        if rel > report.max_relative_violation {
            report.max_relative_violation = rel;
        }
    };
    for gm in &grams {
        let (a, b, c, x) = (
            gm[(0, 0)].clone(),
            gm[(1, 1)].clone(),
            gm[(2, 2)].clone(),
            gm[(0, 1)].clone(),
        );
        let scale = [&a, &b, &c].iter().map(|v| v.abs()).fold(T::zero(), |m, v| if v > m { v } else { m });
        let scale_f = scale.to_f64();

        // (√a − √b)² ≤ c  ⇔  a + b − c ≤ 2√(ab)
        let s = a.clone() + b.clone() - c.clone();
        let lower_ok = if T::EXACT {
            s <= T::zero() || s.clone() * s.clone() <= four.clone() * a.clone() * b.clone()
        } else {
            let (af, bf, cf) = (a.to_f64().max(0.0), b.to_f64().max(0.0), c.to_f64());
            let lhs = (af.sqrt() - bf.sqrt()).powi(2);
            lhs - cf <= AUDIT_TOL * scale_f
        };
        if !lower_ok {
            report.energy_lower_violations += 1;
            let (af, bf) = (a.to_f64().max(0.0), b.to_f64().max(0.0));
            note((af.sqrt() - bf.sqrt()).powi(2) - c.to_f64(), scale_f);
        }

        if c.clone() > bound.clone() + T::slack(&bound, AUDIT_TOL) {
            report.energy_upper_violations += 1;
            note((c.clone() - bound.clone()).to_f64(), bound.to_f64());
        }

        let lhs = x.clone() * x.clone();
        let rhs = a.clone() * b.clone();
        let slack = T::slack(&(scale.clone() * scale.clone()), AUDIT_TOL);
        if lhs > rhs.clone() + slack.clone() {
            report.schwarz_violations += 1;
            note((lhs.clone() - rhs.clone()).to_f64(), (scale.clone() * scale.clone()).to_f64());
        }
        if (lhs - rhs).abs() <= slack {
            report.schwarz_tight_cells += 1;
        }
    }
    Ok(report)
}

/// Comparison of `ν_{f,g}(K_{w·u})` with `(1/r_w) ν_{ψ_w^* f, ψ_w^* g}(K_u)`
/// over all `u ∈ W_depth`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub word: String,
    pub depth: usize,
    pub cells: usize,
    pub max_relative_discrepancy: f64,
    /// All cells agree exactly (meaningful in rational mode).
    pub exact: bool,
}

pub fn scaling_audit<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    g: &PiecewiseHarmonicFn<T>,
    w: &Word,
    depth: usize,
) -> Result<ScalingReport> {
    let direct = cell_energy_measure(fractal, f, g, w.level() + depth)?
        .subtable(w)
        .expect("word fits the table");
    let fw = fractal.pullback(f, w)?;
    let gw = fractal.pullback(g, w)?;
    let inv_rw = T::one() / fractal.harmonic().r_word(w);
    let pulled = cell_energy_measure(fractal, &fw, &gw, depth)?.scaled(&inv_rw);
    let mut worst = 0.0f64;
    let mut exact = true;
    for (l, r) in direct.values().iter().zip(pulled.values()) {
        if l != r {
            exact = false;
            let scale = l.abs().to_f64().max(r.abs().to_f64());
            let diff = (l.clone() - r.clone()).abs().to_f64();
            let rel = if scale > 0.0 { diff / scale } else { diff };
            worst = worst.max(rel);
        }
    }
    Ok(ScalingReport {
        word: w.to_string(),
        depth,
        cells: direct.len(),
        max_relative_discrepancy: worst,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;
    use crate::zoo;
    use num::BigRational;
    use rand::SeedableRng;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        rational(n, d)
    }

    #[test]
    fn gasket_level_one_table() {
        let sg = zoo::gasket(2, 2).unwrap();
        let t = energy_measure(&sg, &sg.basis(0), 1).unwrap();
        assert_eq!(t.values(), &[q(12, 5), q(4, 5), q(4, 5)]);
        assert_eq!(t.total(), q(4, 1));
    }

    #[test]
    fn oracle_cell_energies_from_level_m_extension() {
        // Independent route: extend to V_m, then 2/r_w · E^(0) on each cell.
        let sg = zoo::gasket(2, 2).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let f = sg.random_function(1, &mut rng, 4).unwrap();
        let m = 3;
        let ext = sg.extend(&f, m).unwrap();
        let vs = sg.vertex_set(m).unwrap();
        let inv = sg.inverse_weights(m).unwrap();
        let table = energy_measure(&sg, &f, m).unwrap();
        for c in 0..vs.n_cells() {
            let u: Vec<Q> = vs.cell_vertices(c).iter().map(|&v| ext.values()[v as usize].clone()).collect();
            let e0 = crate::harmonic::boundary_energy(sg.harmonic().d(), &u, &u);
            assert_eq!(table.values()[c], q(2, 1) * inv[c].clone() * e0);
        }
    }

    #[test]
    fn batched_diagonal_matches_single_tables() {
        let sg = zoo::gasket(2, 2).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let fns: Vec<_> = (0..4).map(|k| sg.random_function(k % 3, &mut rng, 4).unwrap()).collect();
        let batch = energy_measures(&sg, &fns, 3).unwrap();
        for (f, t) in fns.iter().zip(&batch) {
            assert_eq!(t, &energy_measure(&sg, f, 3).unwrap());
        }
    }

    #[test]
    fn constant_function_has_zero_measure() {
        let sg = zoo::gasket(2, 2).unwrap();
        let t = energy_measure(&sg, &sg.constant(q(5, 1)), 3).unwrap();
        assert!(t.values().iter().all(|v| *v == q(0, 1)));
    }

    #[test]
    fn hata_kills_first_coordinate_on_second_cell() {
        let hata = zoo::hata(q(1, 2)).unwrap();
        let f = hata.harmonic_fn(vec![q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        let t = energy_measure(&hata, &f, 1).unwrap();
        assert_eq!(t.values()[1], q(0, 1));
        assert!(t.values()[0] > q(0, 1));
    }

    #[test]
    fn polarization_and_bilinearity() {
        let sg = zoo::gasket(2, 2).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let f = sg.random_function(1, &mut rng, 3).unwrap();
        let g = sg.random_function(2, &mut rng, 3).unwrap();
        let h = sg.random_function(0, &mut rng, 3).unwrap();
        let m = 3;
        let fg = cell_energy_measure(&sg, &f, &g, m).unwrap();
        let sum = sg.linear_combination(&[(q(1, 1), &f), (q(1, 1), &g)]).unwrap();
        let (a, b, c) = (
            energy_measure(&sg, &sum, m).unwrap(),
            energy_measure(&sg, &f, m).unwrap(),
            energy_measure(&sg, &g, m).unwrap(),
        );
        for i in 0..fg.len() {
            let pol = (a.values()[i].clone() - b.values()[i].clone() - c.values()[i].clone()) / q(2, 1);
            assert_eq!(fg.values()[i], pol);
        }
        // table(2f − 3h, g) = 2 table(f, g) − 3 table(h, g)
        let combo = sg.linear_combination(&[(q(2, 1), &f), (q(-3, 1), &h)]).unwrap();
        let lhs = cell_energy_measure(&sg, &combo, &g, m).unwrap();
        let hg = cell_energy_measure(&sg, &h, &g, m).unwrap();
        for i in 0..lhs.len() {
            assert_eq!(
                lhs.values()[i],
                q(2, 1) * fg.values()[i].clone() - q(3, 1) * hg.values()[i].clone()
            );
        }
        let gf = cell_energy_measure(&sg, &g, &f, m).unwrap();
        assert_eq!(gf, fg);
    }

    #[test]
    fn too_shallow_level_is_rejected() {
        let sg = zoo::gasket(2, 2).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let f = sg.random_function(2, &mut rng, 3).unwrap();
        assert!(matches!(
            energy_measure(&sg, &f, 1),
            Err(Error::LevelTooShallow { requested: 1, function_level: 2 })
        ));
    }

    #[test]
    fn dominant_examples() {
        let sg = zoo::gasket(2, 2).unwrap();
        let nu = boundary_dominant(&sg, 1).unwrap();
        assert_eq!(nu.table().values(), &[q(4, 1), q(4, 1), q(4, 1)]);
        assert_eq!(nu.table().total(), q(12, 1));
        let single = dominant_measure(&sg, &[(q(1, 1), sg.basis(1))], 2).unwrap();
        assert_eq!(single.table(), &energy_measure(&sg, &sg.basis(1), 2).unwrap());
        assert!(matches!(
            dominant_measure(&sg, &[(q(0, 1), sg.basis(0))], 1),
            Err(Error::NonpositiveCoefficient(_))
        ));
    }

    #[test]
    fn ratio_examples() {
        let sg = zoo::gasket(2, 2).unwrap();
        let nu = boundary_dominant(&sg, 1).unwrap();
        let num = energy_measure(&sg, &sg.basis(0), 1).unwrap();
        let z = rn_ratio(&num, nu.table()).unwrap();
        assert_eq!(z.get(&"1".parse().unwrap()), Some(&q(3, 5)));
        let same = rn_ratio(nu.table(), nu.table()).unwrap();
        assert!(same.ratios().iter().all(|r| r.as_ref() == Some(&q(1, 1))));
        let zero = CellMeasureTable::new(1, 3, vec![q(0, 1); 3]).unwrap();
        let z0 = rn_ratio(&zero, nu.table()).unwrap();
        assert!(z0.ratios().iter().all(|r| r.as_ref() == Some(&q(0, 1))));
        let zz = rn_ratio(&zero, &zero).unwrap();
        assert_eq!(zz.zero_over_zero().len(), 3);
        let bad = rn_ratio(nu.table(), &zero).unwrap();
        assert_eq!(bad.violations().len(), 3);
        assert!(!bad.is_absolutely_continuous());
    }

    #[test]
    fn audits_on_basis_pairs() {
        let sg = zoo::gasket(2, 2).unwrap();
        for m in 0..=4 {
            let r = inequality_audit(&sg, &sg.basis(0), &sg.basis(1), m).unwrap();
            assert_eq!(r.violations(), 0, "level {m}");
        }
        let r = inequality_audit(&sg, &sg.basis(0), &sg.basis(0), 3).unwrap();
        assert_eq!(r.schwarz_tight_cells, r.cells);
    }

    #[test]
    fn scaling_audit_is_exact() {
        let sg = zoo::gasket(2, 2).unwrap();
        let w = Word::from_one_based(&[1], 3).unwrap();
        let r = scaling_audit(&sg, &sg.basis(0), &sg.basis(0), &w, 3).unwrap();
        assert!(r.exact);
        let r0 = scaling_audit(&sg, &sg.basis(0), &sg.basis(1), &Word::empty(), 2).unwrap();
        assert!(r0.exact);
        let hata = zoo::hata(q(1, 2)).unwrap();
        let f = hata.harmonic_fn(vec![q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        let w2 = Word::from_one_based(&[2], 2).unwrap();
        let r2 = scaling_audit(&hata, &f, &f, &w2, 3).unwrap();
        assert!(r2.exact);
        let direct = energy_measure(&hata, &f, 4).unwrap().subtable(&w2).unwrap();
        assert!(direct.values().iter().all(|v| *v == q(0, 1)));
    }

    #[test]
    fn csv_and_json_are_lexicographic() {
        let sg = zoo::gasket(2, 2).unwrap();
        let t = energy_measure(&sg, &sg.basis(0), 1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "word,value\n1,12/5\n2,4/5\n3,4/5\n");
        let j = t.to_json();
        assert_eq!(j["values"]["1"], "12/5");
        let tf = t.to_f64();
        assert_eq!(tf.to_json()["values"]["2"], 0.8);
    }
}
