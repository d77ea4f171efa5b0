//! Per-cell density matrices `M_w = (ν_{f_i,f_j}(K_w) / ν(K_w))_{ij}`,
//! their numerical ranks, and the index estimate built from them.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harmonic::{Fractal, PiecewiseHarmonicFn};
use crate::linalg::{singular_values, symmetric_eigenvalues, Matrix};
use crate::measure::{cell_gram_matrices, CellMeasureTable, DominantMeasure};
use crate::scalar::Scalar;
use crate::structure::Word;

/// Relative singular-value threshold for the numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Mass fraction allowed above the essential-supremum proxy.
pub const DEFAULT_ESSSUP_DELTA: f64 = 1e-2;

/// `M_w` for every cell of `W_m`; cells with `ν(K_w) = 0` are null and
/// carry no matrix.
#[derive(Clone, Debug)]
pub struct GramField<T> {
    level: usize,
    n_symbols: usize,
    n_functions: usize,
    matrices: Vec<Option<Matrix<T>>>,
    masses: Vec<T>,
}

impl<T: Scalar> GramField<T> {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_functions(&self) -> usize {
        self.n_functions
    }

    pub fn matrices(&self) -> &[Option<Matrix<T>>] {
        &self.matrices
    }

    pub fn matrix(&self, w: &Word) -> Option<&Matrix<T>> {
        self.matrices.get(w.index(self.n_symbols))?.as_ref()
    }

    /// `ν(K_w)` in lexicographic order.
    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn null_cells(&self) -> usize {
        self.matrices.iter().filter(|m| m.is_none()).count()
    }
}

/// Divides per-cell Gram matrices by the dominant measure.
pub fn gram_field_from_grams<T: Scalar>(
    grams: Vec<Matrix<T>>,
    dominant: &CellMeasureTable<T>,
    n_functions: usize,
) -> GramField<T> {
    let matrices = grams
        .into_iter()
        .zip(dominant.values())
        .map(|(g, nu)| {
            if *nu > T::zero() {
                Some(g.scale(&(T::one() / nu.clone())))
            } else {
                None
            }
        })
        .collect();
    GramField {
        level: dominant.level(),
        n_symbols: dominant.n_symbols(),
        n_functions,
        matrices,
        masses: dominant.values().to_vec(),
    }
}

/// Assembles `M_w` at level `m` for the given functions. The dominant
/// measure is re-evaluated at level `m` if it was built elsewhere.
pub fn gram_field<T: Scalar>(
    fractal: &Fractal<T>,
    functions: &[PiecewiseHarmonicFn<T>],
    dominant: &DominantMeasure<T>,
    level: usize,
) -> Result<GramField<T>> {
    if functions.is_empty() {
        return Err(Error::Config("gram field needs at least one function".into()));
    }
    let relevel;
    let dominant = if dominant.level() == level {
        dominant
    } else {
        relevel = dominant.at_level(fractal, level)?;
        &relevel
    };
    let grams = cell_gram_matrices(fractal, functions, level)?;
    Ok(gram_field_from_grams(grams, dominant.table(), functions.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEstimate {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
}

impl RankEstimate {
    /// `σ_2 / σ_1`, or 0 when undefined.
    pub fn sigma_ratio(&self) -> f64 {
        match self.singular_values.as_slice() {
            [s1, s2, ..] if *s1 > 0.0 => s2 / s1,
            _ => 0.0,
        }
    }
}

/// `rank = #{σ_k > tol · σ_1}`; the zero matrix has rank 0.
pub fn rank_estimate<T: Scalar>(m: &Matrix<T>, tol: f64) -> RankEstimate {
    let sv = singular_values(&m.to_nalgebra());
    let s1 = sv.first().copied().unwrap_or(0.0);
    let rank = if s1 > 0.0 {
        sv.iter().filter(|&&s| s > tol * s1).count()
    } else {
        0
    };
    RankEstimate {
        rank,
        singular_values: sv,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellIndex {
    /// `None` for null cells.
    pub rank: Option<usize>,
    pub sigma_ratio: f64,
    /// Smallest eigenvalue over `σ_1` (nonnegative definiteness check).
    pub min_eigen_ratio: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexField {
    level: usize,
    n_symbols: usize,
    n_functions: usize,
    rank_tol: f64,
    cells: Vec<CellIndex>,
}

impl IndexField {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn cells(&self) -> &[CellIndex] {
        &self.cells
    }

    pub fn cell(&self, w: &Word) -> Option<&CellIndex> {
        self.cells.get(w.index(self.n_symbols))
    }

    pub fn ranks(&self) -> Vec<Option<usize>> {
        self.cells.iter().map(|c| c.rank).collect()
    }

    /// `word,rank,sigma_ratio,mass`; null cells have an empty rank.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "word,rank,sigma_ratio,mass")?;
        for (i, c) in self.cells.iter().enumerate() {
            let w = Word::from_index(i, self.level, self.n_symbols);
            let rank = c.rank.map(|r| r.to_string()).unwrap_or_default();
            writeln!(out, "{w},{rank},{:e},{:e}", c.sigma_ratio, c.mass)?;
        }
        Ok(())
    }
}

/// Numerical rank and spectrum of every `M_w`, computed in parallel with
/// results in cell order.
pub fn index_field<T: Scalar>(field: &GramField<T>, rank_tol: f64) -> IndexField {
    let cells = field
        .matrices
        .par_iter()
        .zip(field.masses.par_iter())
        .map(|(m, mass)| match m {
            None => CellIndex {
                rank: None,
                sigma_ratio: 0.0,
                min_eigen_ratio: 0.0,
                mass: mass.to_f64(),
            },
            Some(m) => {
                let est = rank_estimate(m, rank_tol);
                let s1 = est.singular_values.first().copied().unwrap_or(0.0);
                let lambda_min = symmetric_eigenvalues(&m.to_nalgebra())
                    .first()
                    .copied()
                    .unwrap_or(0.0);
                CellIndex {
                    rank: Some(est.rank),
                    sigma_ratio: est.sigma_ratio(),
                    min_eigen_ratio: if s1 > 0.0 { lambda_min / s1 } else { 0.0 },
                    mass: mass.to_f64(),
                }
            }
        })
        .collect();
    IndexField {
        level: field.level,
        n_symbols: field.n_symbols,
        n_functions: field.n_functions,
        rank_tol,
        cells,
    }
}

/// `ν`-weighted quantile: the smallest value whose cumulative weight
/// reaches `p` of the total. Zero-weight entries are ignored.
pub fn weighted_quantile(samples: &[(f64, f64)], p: f64) -> Option<f64> {
    let mut s: Vec<(f64, f64)> = samples.iter().copied().filter(|(_, w)| *w > 0.0).collect();
    if s.is_empty() {
        return None;
    }
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = s.iter().map(|(_, w)| w).sum();
    let mut acc = 0.0;
    for (v, w) in &s {
        acc += w;
        if acc >= p * total {
            return Some(*v);
        }
    }
    s.last().map(|(v, _)| *v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub q10: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q90: f64,
}

impl Quantiles {
    pub fn weighted(samples: &[(f64, f64)]) -> Option<Self> {
        Some(Self {
            q10: weighted_quantile(samples, 0.10)?,
            q25: weighted_quantile(samples, 0.25)?,
            median: weighted_quantile(samples, 0.50)?,
            q75: weighted_quantile(samples, 0.75)?,
            q90: weighted_quantile(samples, 0.90)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HighRankCell {
    pub word: String,
    pub rank: usize,
    pub mass_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexReport {
    pub level: usize,
    pub cells: usize,
    pub null_cells: usize,
    pub rank_tol: f64,
    pub delta: f64,
    /// Smallest `k` with `ν(rank > k) ≤ δ·ν(K)`.
    pub esssup_proxy: usize,
    /// Largest rank on any non-null cell.
    pub max_rank: usize,
    /// Fraction of `ν`-mass carrying each rank.
    pub rank_histogram: BTreeMap<usize, f64>,
    pub sigma_ratio_quantiles: Option<Quantiles>,
    /// Cells of rank above the proxy (the trimmed mass), heaviest first.
    pub trimmed: Vec<HighRankCell>,
    pub trimmed_mass: f64,
}

/// Essential-supremum proxy of the rank field under `ν`: the least `k`
/// such that cells of rank above `k` carry at most a `δ` fraction of the
/// mass. Those cells are listed in the report.
pub fn index_estimate(field: &IndexField, delta: f64) -> IndexReport {
    let live: Vec<(usize, usize, f64)> = field
        .cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.rank.map(|r| (i, r, c.mass)))
        .collect();
    let total: f64 = live.iter().map(|&(_, _, m)| m).sum();
    let max_rank = live.iter().map(|&(_, r, _)| r).max().unwrap_or(0);

    let mut rank_histogram = BTreeMap::new();
    for &(_, r, m) in &live {
        *rank_histogram.entry(r).or_insert(0.0) += if total > 0.0 { m / total } else { 0.0 };
    }
    let mut esssup_proxy = max_rank;
    for k in 0..=max_rank {
        let above: f64 = live.iter().filter(|&&(_, r, _)| r > k).map(|&(_, _, m)| m).sum();
        if above <= delta * total {
            esssup_proxy = k;
            break;
        }
    }
    let mut trimmed: Vec<HighRankCell> = live
        .iter()
        .filter(|&&(_, r, _)| r > esssup_proxy)
        .map(|&(i, r, m)| HighRankCell {
            word: Word::from_index(i, field.level, field.n_symbols).to_string(),
            rank: r,
            mass_fraction: if total > 0.0 { m / total } else { 0.0 },
        })
        .collect();
    trimmed.sort_by(|a, b| b.mass_fraction.total_cmp(&a.mass_fraction));
    let trimmed_mass = trimmed.iter().map(|c| c.mass_fraction).sum();

    let samples: Vec<(f64, f64)> = field
        .cells
        .iter()
        .filter(|c| c.rank.is_some())
        .map(|c| (c.sigma_ratio, c.mass))
        .collect();
    IndexReport {
        level: field.level,
        cells: field.cells.len(),
        null_cells: field.cells.len() - live.len(),
        rank_tol: field.rank_tol,
        delta,
        esssup_proxy,
        max_rank,
        rank_histogram,
        sigma_ratio_quantiles: Quantiles::weighted(&samples),
        trimmed,
        trimmed_mass,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankOneFactor {
    pub zeta: Vec<f64>,
    /// `‖M − ζζᵗ‖_F / ‖M‖_F` (0 for `M = 0`).
    pub residual: f64,
}

/// `ζ^i = M_{in} / √M_{nn}` with `n` the first index where `M_{nn} > 0`.
pub fn rank_one_factor<T: Scalar>(m: &Matrix<T>) -> RankOneFactor {
    let mf = m.to_f64();
    let n = mf.rows();
    let Some(pivot) = (0..n).find(|&i| mf[(i, i)] > 0.0) else {
        return RankOneFactor {
            zeta: vec![0.0; n],
            residual: 0.0,
        };
    };
    let root = mf[(pivot, pivot)].sqrt();
    let zeta: Vec<f64> = (0..n).map(|i| mf[(i, pivot)] / root).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            num += (mf[(i, j)] - zeta[i] * zeta[j]).powi(2);
            den += mf[(i, j)].powi(2);
        }
    }
    RankOneFactor {
        zeta,
        residual: (num / den).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub level: usize,
    pub compared: usize,
    pub disagreements: Vec<String>,
    /// Cells null under exactly one of the two measures.
    pub excluded: Vec<String>,
}

/// Compares per-cell ranks of `M_w` under two dominant measures.
pub fn stability_check<T: Scalar>(
    fractal: &Fractal<T>,
    functions: &[PiecewiseHarmonicFn<T>],
    dominant_a: &DominantMeasure<T>,
    dominant_b: &DominantMeasure<T>,
    level: usize,
    rank_tol: f64,
) -> Result<StabilityReport> {
    let grams = cell_gram_matrices(fractal, functions, level)?;
    let table = |d: &DominantMeasure<T>| -> Result<CellMeasureTable<T>> {
        if d.level() == level {
            Ok(d.table().clone())
        } else {
            Ok(d.at_level(fractal, level)?.table().clone())
        }
    };
    let (ta, tb) = (table(dominant_a)?, table(dominant_b)?);
    let fa = index_field(&gram_field_from_grams(grams.clone(), &ta, functions.len()), rank_tol);
    let fb = index_field(&gram_field_from_grams(grams, &tb, functions.len()), rank_tol);
    let mut report = StabilityReport {
        level,
        compared: 0,
        disagreements: Vec::new(),
        excluded: Vec::new(),
    };
    for (i, (a, b)) in fa.cells.iter().zip(&fb.cells).enumerate() {
        let word = || Word::from_index(i, level, fractal.n_symbols()).to_string();
        match (a.rank, b.rank) {
            (Some(x), Some(y)) => {
                report.compared += 1;
                if x != y {
                    report.disagreements.push(word());
                }
            }
            (None, None) => {}
            _ => report.excluded.push(word()),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{boundary_dominant, dominant_measure, energy_measure};
    use crate::scalar::rational;
    use crate::zoo;
    use num::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        rational(n, d)
    }

    #[test]
    fn rank_threshold_semantics() {
        let z = Matrix::<f64>::zeros(3, 3);
        assert_eq!(rank_estimate(&z, 1e-9).rank, 0);
        let d = Matrix::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1e-15, 0.0],
            vec![0.0, 0.0, 0.0],
        ]);
        assert_eq!(rank_estimate(&d, 1e-9).rank, 1);
    }

    #[test]
    fn rank_one_factor_examples() {
        let id = Matrix::<f64>::identity(2);
        let f = rank_one_factor(&id);
        assert!((f.residual - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let z0 = [0.3, -1.2, 2.5];
        let m = Matrix::from_fn(3, 3, |i, j| z0[i] * z0[j]);
        let f = rank_one_factor(&m);
        assert!(f.residual <= 1e-12);
        // Sign follows the pivot: ζ = ±ζ₀.
        for (a, b) in f.zeta.iter().zip(z0) {
            assert!((a.abs() - b.abs()).abs() < 1e-12);
        }
        assert_eq!(rank_one_factor(&Matrix::<f64>::zeros(2, 2)).residual, 0.0);
    }

    #[test]
    fn gasket_level_one_trace_is_one() {
        let sg = zoo::gasket(2, 2).unwrap();
        let nu = boundary_dominant(&sg, 1).unwrap();
        let field = gram_field(&sg, &sg.boundary_basis(), &nu, 1).unwrap();
        let m = field.matrix(&"1".parse().unwrap()).unwrap();
        let trace = (0..3).fold(q(0, 1), |acc, i| acc + m[(i, i)].clone());
        assert_eq!(trace, q(1, 1));
        assert_eq!(m[(0, 0)], q(3, 5));
    }

    #[test]
    fn constant_function_row_vanishes() {
        let sg = zoo::gasket(2, 2).unwrap();
        let nu = boundary_dominant(&sg, 2).unwrap();
        let fns = vec![sg.basis(0), sg.constant(q(2, 1)), sg.basis(1)];
        let field = gram_field(&sg, &fns, &nu, 2).unwrap();
        for m in field.matrices().iter().flatten() {
            for j in 0..3 {
                assert_eq!(m[(1, j)], q(0, 1));
                assert_eq!(m[(j, 1)], q(0, 1));
            }
        }
    }

    #[test]
    fn hata_off_spine_rank_one() {
        let h = zoo::hata(q(1, 2)).unwrap();
        let m = 6;
        let nu = boundary_dominant(&h, m).unwrap();
        let field = gram_field(&h, &h.boundary_basis(), &nu, m).unwrap();
        let idx = index_field(&field, DEFAULT_RANK_TOL);
        let spine = Word::from_zero_based(vec![0; m]);
        for (i, c) in idx.cells().iter().enumerate() {
            let w = Word::from_index(i, m, 2);
            if w == spine {
                assert_eq!(c.rank, Some(2));
            } else if let Some(r) = c.rank {
                assert_eq!(r, 1, "{w}");
                let f = rank_one_factor(field.matrices()[i].as_ref().unwrap());
                assert!(f.residual <= 1e-10);
            }
            assert!(c.min_eigen_ratio >= -1e-10);
        }
        // Exact oracle: off the spine, every 2x2 minor of M_w vanishes.
        let grams = cell_gram_matrices(&h, &h.boundary_basis(), m).unwrap();
        for (i, g) in grams.iter().enumerate() {
            if i == 0 {
                continue;
            }
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                let minor = g[(a, a)].clone() * g[(b, b)].clone() - g[(a, b)].clone() * g[(b, a)].clone();
                assert_eq!(minor, q(0, 1));
            }
        }
        // The spine carries r^m = 1/64 of the mass.
        assert_eq!(index_estimate(&idx, 1e-2).esssup_proxy, 2);
        let rep = index_estimate(&idx, 2e-2);
        assert_eq!(rep.esssup_proxy, 1);
        assert_eq!(rep.trimmed.len(), 1);
        assert_eq!(rep.trimmed[0].word, "111111");
        assert!((rep.trimmed_mass - 0.5f64.powi(6)).abs() < 1e-12);
    }

    #[test]
    fn single_function_proxy_is_one() {
        let sg = zoo::gasket(2, 2).unwrap();
        let f = sg.basis(2);
        let nu = dominant_measure(&sg, &[(q(1, 1), f.clone())], 3).unwrap();
        let field = gram_field(&sg, &[f], &nu, 3).unwrap();
        let rep = index_estimate(&index_field(&field, DEFAULT_RANK_TOL), 1e-6);
        assert_eq!(rep.esssup_proxy, 1);
        assert_eq!(rep.rank_histogram.get(&1), Some(&1.0));
    }

    #[test]
    fn weighted_quantiles() {
        let s = [(3.0, 1.0), (1.0, 1.0), (2.0, 2.0), (9.0, 0.0)];
        assert_eq!(weighted_quantile(&s, 0.5), Some(2.0));
        assert_eq!(weighted_quantile(&s, 0.2), Some(1.0));
        assert_eq!(weighted_quantile(&s, 1.0), Some(3.0));
        assert_eq!(weighted_quantile(&[], 0.5), None);
    }

    #[test]
    fn stability_examples() {
        let sg = zoo::gasket(2, 2).unwrap();
        let m = 3;
        let nu = boundary_dominant(&sg, m).unwrap();
        let fns = sg.boundary_basis();
        let same = stability_check(&sg, &fns, &nu, &nu, m, DEFAULT_RANK_TOL).unwrap();
        assert!(same.disagreements.is_empty() && same.excluded.is_empty());
        assert_eq!(same.compared, 27);

        let g = sg.harmonic_fn(vec![q(1, 1), q(-2, 1), q(5, 1)]).unwrap();
        let nu_g = dominant_measure(&sg, &[(q(1, 1), g)], m).unwrap();
        let rep = stability_check(&sg, &fns, &nu, &nu_g, m, DEFAULT_RANK_TOL).unwrap();
        assert!(rep.disagreements.is_empty());

        // On Hata, ν_{ι(1,0,0)} vanishes on K_2 where Σ ν_{h_q} does not.
        let h = zoo::hata(q(1, 2)).unwrap();
        let f = h.basis(0);
        let nu_f = dominant_measure(&h, &[(q(1, 1), f.clone())], 2).unwrap();
        let nu_h = boundary_dominant(&h, 2).unwrap();
        let rep = stability_check(&h, &h.boundary_basis(), &nu_h, &nu_f, 2, DEFAULT_RANK_TOL).unwrap();
        let t = energy_measure(&h, &f, 2).unwrap();
        let expected: Vec<String> = t
            .iter()
            .zip(nu_h.table().values())
            .filter(|((_, v), n)| **v == q(0, 1) && **n > q(0, 1))
            .map(|((w, _), _)| w.to_string())
            .collect();
        assert_eq!(rep.excluded, expected);
        assert!(rep.excluded.contains(&"22".to_string()));
    }
}
