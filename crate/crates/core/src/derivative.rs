//! The derivative `df/dg` as a per-cell slope field, with the energy
//! identity, remainder and oscillation diagnostics.
//!
//! On a cell `K_w` the slope is `a_w = ν_{f,g}(K_w) / ν_g(K_w)`, the
//! conditional expectation of `dν_{f,g}/dν_g` given the level-`m` cells.
//! The remainder `f − a_w g` has relative mass
//! `ρ_w = (ν_f(K_w) − a_w² ν_g(K_w)) / ν_g(K_w)` there.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harmonic::{Fractal, PiecewiseHarmonicFn};
use crate::index::Quantiles;
use crate::measure::{cell_gram_matrices, energy_measure};
use crate::scalar::Scalar;
use crate::structure::Word;

/// Default number of extra levels used to sample oscillations.
pub const DEFAULT_PROBE_DEPTH: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeField<T> {
    level: usize,
    n_symbols: usize,
    /// `None` where `ν_g(K_w) = 0`.
    slopes: Vec<Option<T>>,
    remainders: Vec<Option<T>>,
    masses: Vec<T>,
}

impl<T: Scalar> SlopeField<T> {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn slopes(&self) -> &[Option<T>] {
        &self.slopes
    }

    pub fn remainders(&self) -> &[Option<T>] {
        &self.remainders
    }

    /// `ν_g(K_w)`.
    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn slope(&self, w: &Word) -> Option<&T> {
        self.slopes.get(w.index(self.n_symbols))?.as_ref()
    }

    /// Cells where `ν_g` vanishes and the slope is undefined.
    pub fn undefined_cells(&self) -> Vec<Word> {
        self.slopes
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| Word::from_index(i, self.level, self.n_symbols))
            .collect()
    }

    /// `S_m = ½ Σ_w a_w² ν_g(K_w)` over cells with `ν_g(K_w) > 0`.
    pub fn identity_sum(&self) -> T {
        let half = T::from_ratio(1, 2);
        self.slopes
            .iter()
            .zip(&self.masses)
            .filter_map(|(a, m)| a.as_ref().map(|a| a.clone() * a.clone() * m.clone()))
            .fold(T::zero(), |acc, x| acc + x)
            * half
    }

    /// `S_m` accumulated in `f64` from per-cell terms computed in the
    /// backend. Exact sums over many cells carry one denominator per cell
    /// and become very expensive; this keeps each term exact but not the sum.
    pub fn identity_sum_f64(&self) -> f64 {
        let terms = self
            .slopes
            .iter()
            .zip(&self.masses)
            .filter_map(|(a, m)| a.as_ref().map(|a| (a.clone() * a.clone() * m.clone()).to_f64()));
        kahan_sum(terms) * 0.5
    }

    /// `word,slope,remainder_ratio,mass`; undefined cells have empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "word,slope,remainder_ratio,mass")?;
        for (i, ((a, r), m)) in self.slopes.iter().zip(&self.remainders).zip(&self.masses).enumerate() {
            let w = Word::from_index(i, self.level, self.n_symbols);
            let a = a.as_ref().map(ToString::to_string).unwrap_or_default();
            let r = r.as_ref().map(ToString::to_string).unwrap_or_default();
            writeln!(out, "{w},{a},{r},{m}")?;
        }
        Ok(())
    }
}

pub fn slope_field<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    g: &PiecewiseHarmonicFn<T>,
    level: usize,
) -> Result<SlopeField<T>> {
    if g.is_constant() {
        return Err(Error::ConstantReference);
    }
    let grams = cell_gram_matrices(fractal, &[f.clone(), g.clone()], level)?;
    let mut slopes = Vec::with_capacity(grams.len());
    let mut remainders = Vec::with_capacity(grams.len());
    let mut masses = Vec::with_capacity(grams.len());
    for gm in grams {
        let (nf, nfg, ng) = (gm[(0, 0)].clone(), gm[(0, 1)].clone(), gm[(1, 1)].clone());
        if ng > T::zero() {
            let a = nfg / ng.clone();
            let rho = (nf - a.clone() * a.clone() * ng.clone()) / ng.clone();
            slopes.push(Some(a));
            remainders.push(Some(rho));
        } else {
            slopes.push(None);
            remainders.push(None);
        }
        masses.push(ng);
    }
    Ok(SlopeField {
        level,
        n_symbols: fractal.n_symbols(),
        slopes,
        remainders,
        masses,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyGap<T> {
    pub level: usize,
    pub s_m: T,
    pub energy: T,
    /// `E(f) − S_m`.
    pub gap: T,
}

pub fn energy_identity_gap<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    g: &PiecewiseHarmonicFn<T>,
    level: usize,
) -> Result<EnergyGap<T>> {
    let field = slope_field(fractal, f, g, level)?;
    let s_m = field.identity_sum();
    let energy = fractal.energy(f)?;
    Ok(EnergyGap {
        level,
        gap: energy.clone() - s_m.clone(),
        s_m,
        energy,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderStep {
    pub level: usize,
    pub s_m: f64,
    pub energy: f64,
    pub gap: f64,
    /// `ν_g`-weighted quantiles of `√ρ_w`.
    pub sqrt_remainder: Option<Quantiles>,
    pub undefined_cells: usize,
}

/// Identity gap and remainder quantiles along ascending levels.
pub fn derivative_ladder<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    g: &PiecewiseHarmonicFn<T>,
    levels: &[usize],
) -> Result<Vec<LadderStep>> {
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("levels must be strictly ascending".into()));
    }
    let energy = fractal.energy(f)?;
    levels
        .iter()
        .map(|&m| {
            let field = slope_field(fractal, f, g, m)?;
            let s_m = field.identity_sum_f64();
            Ok(LadderStep {
                level: m,
                s_m,
                energy: energy.to_f64(),
                gap: energy.to_f64() - s_m,
                sqrt_remainder: Quantiles::weighted(&remainder_samples(&field)),
                undefined_cells: field.undefined_cells().len(),
            })
        })
        .collect()
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

fn remainder_samples<T: Scalar>(field: &SlopeField<T>) -> Vec<(f64, f64)> {
    field
        .remainders
        .iter()
        .zip(&field.masses)
        .filter_map(|(r, m)| r.as_ref().map(|r| (r.to_f64().max(0.0).sqrt(), m.to_f64())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemainderLevel {
    pub level: usize,
    pub quantiles: Option<Quantiles>,
    pub max: f64,
}

/// `ν_g`-weighted quantiles of `√ρ_w` for each level of the ladder.
pub fn remainder_negligibility<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    g: &PiecewiseHarmonicFn<T>,
    levels: &[usize],
) -> Result<Vec<RemainderLevel>> {
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("levels must be strictly ascending".into()));
    }
    levels
        .iter()
        .map(|&m| {
            let samples = remainder_samples(&slope_field(fractal, f, g, m)?);
            Ok(RemainderLevel {
                level: m,
                quantiles: Quantiles::weighted(&samples),
                max: samples
                    .iter()
                    .filter(|(_, w)| *w > 0.0)
                    .map(|(v, _)| *v)
                    .fold(0.0, f64::max),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationCell {
    pub word: String,
    /// `max − min` of `f` over the sampled vertices of `K_w`.
    pub osc: f64,
    /// `√(r_w ν_f(K_w))`.
    pub scale: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationReport {
    pub level: usize,
    pub probe_depth: usize,
    pub cells: Vec<OscillationCell>,
    /// Range of `ratio` over cells with `ν_f(K_w) > 0`; `None` if there are
    /// no such cells.
    pub band: Option<(f64, f64)>,
}

/// Compares the oscillation of `f` on each level-`m` cell, sampled on the
/// vertices `depth` levels below, with `√(r_w ν_f(K_w))`. For harmonic
/// pieces the maximum principle makes vertex sampling exact at the
/// corners; interior extrema are approached as `depth` grows.
pub fn oscillation_audit<T: Scalar>(
    fractal: &Fractal<T>,
    f: &PiecewiseHarmonicFn<T>,
    level: usize,
    probe_depth: usize,
) -> Result<OscillationReport> {
    let table = energy_measure(fractal, f, level)?;
    let fine = level + probe_depth;
    let ext = fractal.extend(f, fine)?;
    let vs = fractal.vertex_set(fine)?;
    let n = fractal.n_symbols();
    let per_cell = n.pow(probe_depth as u32);
    let n_cells = table.len();
    let mut lo = vec![f64::INFINITY; n_cells];
    let mut hi = vec![f64::NEG_INFINITY; n_cells];
    for c in 0..vs.n_cells() {
        let parent = c / per_cell;
        for &v in vs.cell_vertices(c) {
            let x = ext.values()[v as usize].to_f64();
            lo[parent] = lo[parent].min(x);
            hi[parent] = hi[parent].max(x);
        }
    }
    let inv = fractal.inverse_weights(level)?;
    let mut band: Option<(f64, f64)> = None;
    let cells = (0..n_cells)
        .map(|c| {
            let mass = table.values()[c].to_f64();
            let r_w = 1.0 / inv[c].to_f64();
            let scale = (r_w * mass.max(0.0)).sqrt();
            let osc = hi[c] - lo[c];
            let ratio = (table.values()[c] > T::zero()).then(|| osc / scale);
            if let Some(x) = ratio {
                band = Some(band.map_or((x, x), |(a, b)| (a.min(x), b.max(x))));
            }
            OscillationCell {
                word: Word::from_index(c, level, n).to_string(),
                osc,
                scale,
                ratio,
            }
        })
        .collect();
    Ok(OscillationReport {
        level,
        probe_depth,
        cells,
        band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::cell_energy_measure;
    use crate::scalar::rational;
    use crate::zoo;
    use num::BigRational;
    use rand::SeedableRng;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        rational(n, d)
    }

    #[test]
    fn self_slope_is_one() {
        let sg = zoo::gasket(2, 2).unwrap();
        let g = sg.basis(0);
        let s = slope_field(&sg, &g, &g, 3).unwrap();
        assert!(s.slopes().iter().flatten().all(|a| *a == q(1, 1)));
        assert!(s.remainders().iter().flatten().all(|r| *r == q(0, 1)));
        let gap = energy_identity_gap(&sg, &g, &g, 3).unwrap();
        assert_eq!(gap.gap, q(0, 1));
        assert_eq!(gap.s_m, q(2, 1));
    }

    #[test]
    fn affine_slope_is_constant() {
        let sg = zoo::gasket(2, 2).unwrap();
        let g = sg.harmonic_fn(vec![q(1, 1), q(-1, 1), q(3, 1)]).unwrap();
        let f = g.scaled(&q(3, 1)).shifted(&q(5, 1));
        let s = slope_field(&sg, &f, &g, 3).unwrap();
        assert!(s.slopes().iter().flatten().all(|a| *a == q(3, 1)));
        assert!(s.remainders().iter().flatten().all(|r| *r == q(0, 1)));
        for m in 0..4 {
            assert_eq!(energy_identity_gap(&sg, &f, &g, m).unwrap().gap, q(0, 1));
        }
        let ladder = remainder_negligibility(&sg, &f, &g, &[1, 2, 3]).unwrap();
        assert!(ladder.iter().all(|l| l.max == 0.0));
    }

    #[test]
    fn polarization_slope_on_k1() {
        let sg = zoo::gasket(2, 2).unwrap();
        let (f, g) = (sg.basis(1), sg.basis(0));
        let s = slope_field(&sg, &f, &g, 1).unwrap();
        let sum = sg.linear_combination(&[(q(1, 1), &f), (q(1, 1), &g)]).unwrap();
        let k1 = |h: &PiecewiseHarmonicFn<Q>| energy_measure(&sg, h, 1).unwrap().values()[0].clone();
        let num = (k1(&sum) - k1(&f) - k1(&g)) / q(2, 1);
        assert_eq!(s.slope(&"1".parse().unwrap()), Some(&(num / k1(&g))));
    }

    #[test]
    fn constant_reference_is_rejected() {
        let sg = zoo::gasket(2, 2).unwrap();
        assert!(matches!(
            slope_field(&sg, &sg.basis(0), &sg.constant(q(1, 1)), 2),
            Err(Error::ConstantReference)
        ));
    }

    #[test]
    fn identity_sum_increases_to_energy() {
        let sg = zoo::gasket(2, 2).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let f = sg.random_function(1, &mut rng, 5).unwrap();
        let g = sg.harmonic_fn(vec![q(0, 1), q(1, 1), q(3, 1)]).unwrap();
        let gaps: Vec<Q> = (1..=5).map(|m| energy_identity_gap(&sg, &f, &g, m).unwrap().gap).collect();
        assert!(gaps.iter().all(|x| *x >= q(0, 1)));
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
        assert!(gaps[4] < gaps[0]);
    }

    #[test]
    fn hata_undefined_cells_follow_support() {
        let h = zoo::hata(q(1, 2)).unwrap();
        let g = h.harmonic_fn(vec![q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        let f = h.harmonic_fn(vec![q(0, 1), q(1, 1), q(0, 1)]).unwrap();
        let s = slope_field(&h, &f, &g, 4).unwrap();
        let ng = cell_energy_measure(&h, &g, &g, 4).unwrap();
        for (i, w) in (0..16).map(|i| (i, Word::from_index(i, 4, 2))) {
            assert_eq!(s.slopes()[i].is_none(), ng.values()[i] == q(0, 1), "{w}");
        }
        assert!(s.undefined_cells().iter().any(|w| w.symbols()[0] == 1));
        let rem = remainder_negligibility(&h, &f, &g, &[2, 4, 6]).unwrap();
        assert!(rem.iter().all(|l| l.quantiles.is_some() && l.max.is_finite()));
    }

    #[test]
    fn oscillation_band() {
        let sg = zoo::gasket(2, 2).unwrap();
        let rep = oscillation_audit(&sg, &sg.basis(0), 4, DEFAULT_PROBE_DEPTH).unwrap();
        let (lo, hi) = rep.band.unwrap();
        assert!(lo > 0.0 && hi / lo < 10.0, "{lo} {hi}");
        let c = oscillation_audit(&sg, &sg.constant(q(2, 1)), 2, 1).unwrap();
        assert!(c.band.is_none());
        assert!(c.cells.iter().all(|x| x.osc == 0.0 && x.scale == 0.0));
    }
}
