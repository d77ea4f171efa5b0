//! Built-in fractals: `d`-dimensional level-`l` Sierpinski gaskets and
//! Hata's tree-like set, with the gasket-specific spectral checks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{
    solve_renormalization, Fractal, HarmonicDescription, HarmonicStructure, PiecewiseHarmonicFn,
    Projection,
};
use crate::linalg::{complex_eigenvalues, singular_values, Matrix};
use crate::measure::energy_measures;
use crate::scalar::{parse_rational, Scalar};
use crate::structure::{build_structure, StructureDescription};

/// Largest number of level-1 cells a generated gasket may have.
pub const MAX_GASKET_CELLS: usize = 64;

/// Threshold below which `det A_i` counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Structure and harmonic structure in one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub structure: StructureDescription,
    pub harmonic: HarmonicDescription,
}

impl ModelDescription {
    pub fn build<T: Scalar>(&self) -> Result<Fractal<T>> {
        let s = build_structure(&self.structure)?;
        let hs = self.harmonic.build(&s)?;
        Ok(Fractal::new(s, hs))
    }

    pub fn from_fractal<T: Scalar>(fractal: &Fractal<T>) -> Self {
        Self {
            structure: fractal.structure().description(),
            harmonic: fractal.harmonic().description(),
        }
    }
}

/// A named built-in family member, e.g. `gasket:2,3` or `hata:1/2`.
#[derive(Clone, Debug, PartialEq)]
pub enum ZooFamily {
    Gasket { d: usize, l: usize },
    Hata { r: BigRational },
}

impl ZooFamily {
    pub fn model(&self) -> Result<ModelDescription> {
        let fractal = match self {
            ZooFamily::Gasket { d, l } => gasket(*d, *l)?,
            ZooFamily::Hata { r } => hata(r.clone())?,
        };
        Ok(ModelDescription::from_fractal(&fractal))
    }

    /// Builds the member in the requested scalar backend. Exact data are
    /// derived first and then converted.
    pub fn build<T: Scalar>(&self) -> Result<Fractal<T>> {
        self.model()?.build()
    }
}

impl fmt::Display for ZooFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZooFamily::Gasket { d, l } => write!(f, "gasket:{d},{l}"),
            ZooFamily::Hata { r } => write!(f, "hata:{r}"),
        }
    }
}

impl FromStr for ZooFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        match name.trim() {
            "gasket" => {
                let parts: Vec<&str> = args.split(',').map(str::trim).collect();
                let (d, l) = match parts.as_slice() {
                    [""] => (2, 2),
                    [d, l] => (
                        d.parse().map_err(|_| Error::Parse(format!("bad gasket dimension {d:?}")))?,
                        l.parse().map_err(|_| Error::Parse(format!("bad gasket level {l:?}")))?,
                    ),
                    _ => return Err(Error::Parse(format!("expected gasket:d,l, got {s:?}"))),
                };
                Ok(ZooFamily::Gasket { d, l })
            }
            "hata" => {
                let r = if args.trim().is_empty() {
                    BigRational::from_ratio(1.into(), 2.into())
                } else {
                    parse_rational(args)?
                };
                Ok(ZooFamily::Hata { r })
            }
            other => Err(Error::Parse(format!("unknown family {other:?} (expected gasket or hata)"))),
        }
    }
}

/// One-line summaries for `zoo list`.
pub fn family_list() -> Vec<(&'static str, &'static str)> {
    vec![
        ("gasket:d,l", "d-dimensional level-l Sierpinski gasket (d >= 2, l >= 2, at most 64 cells)"),
        ("hata:r", "Hata's tree-like set with harmonic weights (r, 1 - r^2), 0 < r < 1"),
    ]
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    (0..k).try_fold(1usize, |acc, i| acc.checked_mul(n - i).map(|x| x / (i + 1)))
}

/// Compositions of `total` into `parts` nonnegative integers, in
/// lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// Structure of the level-`l` subdivision of the `d`-simplex into upward
/// subsimplices. Corner cells come first, in boundary order, so that
/// `q_i` is the fixed point of `ψ_i`.
pub fn gasket_structure(d: usize, l: usize) -> Result<StructureDescription> {
    if d < 2 || l < 2 {
        return Err(Error::ParamOutOfRange(format!("gasket needs d >= 2 and l >= 2, got d={d}, l={l}")));
    }
    let n_cells = binomial(l - 1 + d, d).unwrap_or(usize::MAX);
    if n_cells > MAX_GASKET_CELLS {
        return Err(Error::UnsupportedScale(format!(
            "gasket({d},{l}) with {n_cells} cells"
        )));
    }
    // A cell is its offset k (a composition of l-1 into d+1 parts); its
    // corners are k + e_j in integer barycentric coordinates (scaled by l).
    let mut corners: Vec<Vec<usize>> = (0..=d)
        .map(|j| (0..=d).map(|i| if i == j { l - 1 } else { 0 }).collect())
        .collect();
    let mut rest: Vec<Vec<usize>> = compositions(l - 1, d + 1)
        .into_iter()
        .filter(|k| !corners.contains(k))
        .collect();
    rest.reverse();
    corners.extend(rest);
    let cells = corners;

    let mut points: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
    for (c, k) in cells.iter().enumerate() {
        for j in 0..=d {
            let mut p = k.clone();
            p[j] += 1;
            points.entry(p).or_default().push((c, j));
        }
    }
    let gluing = points
        .values()
        .flat_map(|members| {
            let (c0, j0) = members[0];
            members[1..]
                .iter()
                .map(move |&(c, j)| [c0 + 1, j0 + 1, c + 1, j + 1])
        })
        .collect();
    Ok(StructureDescription {
        n_symbols: cells.len(),
        boundary_size: d + 1,
        gluing,
        anchors: (1..=d + 1).map(|q| (q.to_string(), q)).collect(),
        embedding: BTreeMap::new(),
        level_cap: None,
    })
}

/// Gasket with the complete-graph form (`−d` on the diagonal, `1` off it),
/// equal weights solved from the renormalization equation, and the mean
/// projection.
pub fn gasket(d: usize, l: usize) -> Result<Fractal<BigRational>> {
    let s = build_structure(&gasket_structure(d, l)?)?;
    let form = Matrix::from_fn(d + 1, d + 1, |i, j| {
        if i == j {
            <BigRational as Scalar>::from_i64(-(d as i64))
        } else {
            <BigRational as Scalar>::from_i64(1)
        }
    });
    let renorm = solve_renormalization(&s, &form)?;
    let hs = HarmonicStructure::new(&s, form, renorm.weights, Projection::Mean)?;
    Ok(Fractal::new(s, hs))
}

/// Hata's tree-like set. Boundary order is `(c, 0, 1)`: `q_2 = 0` and
/// `q_3 = 1` are the fixed points of `ψ_1` and `ψ_2`, and
/// `q_1 = c = ψ_1(1)`. The single identification is `ψ_1(c) = ψ_2(0)`.
pub fn hata_structure() -> StructureDescription {
    StructureDescription {
        n_symbols: 2,
        boundary_size: 3,
        gluing: vec![[1, 1, 2, 2]],
        anchors: [("2".to_string(), 1), ("3".to_string(), 2)].into_iter().collect(),
        embedding: [("1".to_string(), [1, 3])].into_iter().collect(),
        level_cap: None,
    }
}

/// Harmonic structure with `h = 1/r`,
/// `D = [[−h, h, 0], [h, −(h+1), 1], [0, 1, −1]]`, weights `(r, 1 − r²)`
/// and `Q` the value at `q_3`.
pub fn hata(r: BigRational) -> Result<Fractal<BigRational>> {
    let zero = <BigRational as Scalar>::from_i64(0);
    let one = <BigRational as Scalar>::from_i64(1);
    if r <= zero || r >= one {
        return Err(Error::ParamOutOfRange(format!("Hata parameter r = {r} is not in (0, 1)")));
    }
    let s = build_structure(&hata_structure())?;
    let h = one.clone() / r.clone();
    let form = Matrix::from_rows(vec![
        vec![-h.clone(), h.clone(), zero.clone()],
        vec![h.clone(), -(h + one.clone()), one.clone()],
        vec![zero, one.clone(), -one.clone()],
    ]);
    let weights = vec![r.clone(), one - r.clone() * r];
    let hs = HarmonicStructure::new(&s, form, weights, Projection::Pin(3))?;
    Ok(Fractal::new(s, hs))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NondegeneracyEntry {
    /// 1-based symbol.
    pub symbol: usize,
    pub det: String,
    pub det_f64: f64,
    pub condition_number: f64,
    pub degenerate: bool,
}

/// `det A_i` (exact in rational mode) and the 2-norm condition number for
/// every symbol.
pub fn nondegeneracy_check<T: Scalar>(hs: &HarmonicStructure<T>) -> Vec<NondegeneracyEntry> {
    hs.extension_matrices()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let det = a.determinant();
            let sv = singular_values(&a.to_nalgebra());
            let smin = sv.last().copied().unwrap_or(0.0);
            let condition_number = if smin > 0.0 { sv[0] / smin } else { f64::INFINITY };
            NondegeneracyEntry {
                symbol: i + 1,
                det_f64: det.to_f64(),
                degenerate: det.to_f64().abs() <= DEGENERACY_TOL,
                det: det.to_string(),
                condition_number,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenReport {
    /// 1-based boundary index and the symbol whose fixed point it is.
    pub q: usize,
    pub symbol: usize,
    pub r: f64,
    /// `‖ᵗA_q u_q − r u_q‖_∞`.
    pub left_residual: f64,
    /// `‖A_q ṽ_q − r ṽ_q‖_∞`.
    pub right_residual: f64,
    /// `(u_q, ṽ_q)` and the value `−D_qq` it should equal.
    pub pairing: f64,
    pub expected_pairing: f64,
    /// Eigenvalues of `A_q` as `(re, im)`.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Largest modulus among eigenvalues other than `1` and `r`.
    pub max_other_modulus: f64,
    pub passed: bool,
}

/// Tolerance for the eigenvector checks.
pub const EIGEN_TOL: f64 = 1e-10;

/// Checks that `u_q` (column `q` of `D`) is a left and `ṽ_q = 1 − 1_q` a
/// right eigenvector of `A_q` for the eigenvalue `r_q`, and that all other
/// eigenvalues besides `1` are smaller than `r_q` in modulus.
pub fn boundary_eigencheck<T: Scalar>(fractal: &Fractal<T>, q: usize) -> Result<EigenReport> {
    let n0 = fractal.boundary_size();
    if q == 0 || q > n0 {
        return Err(Error::InvalidBoundaryIndex {
            index: q,
            boundary_size: n0,
        });
    }
    let symbol = fractal.structure().anchor(q - 1).ok_or(Error::NotAnchored(q))?;
    let hs = fractal.harmonic();
    let a = hs.a(symbol);
    let r = hs.weights()[symbol].clone();
    let u = hs.d().column(q - 1);
    let v: Vec<T> = (0..n0).map(|x| if x == q - 1 { T::zero() } else { T::one() }).collect();

    let max_dev = |lhs: Vec<T>, base: &[T]| {
        lhs.iter()
            .zip(base)
            .map(|(x, y)| (x.clone() - r.clone() * y.clone()).abs().to_f64())
            .fold(0.0, f64::max)
    };
    let left_residual = max_dev(a.transpose().mul_vec(&u), &u);
    let right_residual = max_dev(a.mul_vec(&v), &v);
    let pairing = crate::linalg::dot(&u, &v).to_f64();
    let expected_pairing = -hs.d()[(q - 1, q - 1)].to_f64();

    let rf = r.to_f64();
    let mut eigenvalues = complex_eigenvalues(&a.to_nalgebra());
    eigenvalues.sort_by(|x, y| {
        let mx = x.0.hypot(x.1);
        let my = y.0.hypot(y.1);
        my.total_cmp(&mx)
    });
    let mut others = eigenvalues.clone();
    for target in [1.0, rf] {
        if let Some(pos) = others
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| {
                (x.0 - target).hypot(x.1).total_cmp(&(y.0 - target).hypot(y.1))
            })
            .map(|(i, _)| i)
        {
            others.remove(pos);
        }
    }
    let max_other_modulus = others.iter().map(|z| z.0.hypot(z.1)).fold(0.0, f64::max);
    let passed = left_residual <= EIGEN_TOL
        && right_residual <= EIGEN_TOL
        && (pairing - expected_pairing).abs() <= EIGEN_TOL * expected_pairing.abs().max(1.0)
        && max_other_modulus < rf - EIGEN_TOL;
    Ok(EigenReport {
        q,
        symbol: symbol + 1,
        r: rf,
        left_residual,
        right_residual,
        pairing,
        expected_pairing,
        eigenvalues,
        max_other_modulus,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdomReport {
    pub level: usize,
    pub cells: usize,
    /// `min_w ν_h(K_w)/ν(K_w)` over cells with `ν(K_w) > 0`.
    pub min_ratio: f64,
    /// Cells with `ν_h(K_w) = 0 < ν(K_w)`: counterexample candidates.
    pub zero_cells: Vec<String>,
    /// Cells with `ν(K_w) = 0`, left out of the ratio.
    pub null_cells: usize,
    pub passed: bool,
}

/// Probes whether `ν_h` is comparable to `ν = Σ_q ν_{h_q}` cell by cell.
pub fn fdom_probe<T: Scalar>(
    fractal: &Fractal<T>,
    h: &PiecewiseHarmonicFn<T>,
    level: usize,
) -> Result<FdomReport> {
    if h.is_constant() {
        return Err(Error::ConstantFunction);
    }
    let mut functions = vec![h.clone()];
    functions.extend(fractal.boundary_basis());
    let tables = energy_measures(fractal, &functions, level)?;
    let mut min_ratio = f64::INFINITY;
    let mut zero_cells = Vec::new();
    let mut null_cells = 0;
    for c in 0..tables[0].len() {
        let nu = tables[1..].iter().fold(T::zero(), |acc, t| acc + t.values()[c].clone());
        if nu <= T::zero() {
            null_cells += 1;
            continue;
        }
        let vh = tables[0].values()[c].clone();
        if vh.is_zero() || (!T::EXACT && vh.to_f64() <= EIGEN_TOL * nu.to_f64()) {
            zero_cells.push(tables[0].word(c).to_string());
        }
        min_ratio = min_ratio.min((vh / nu).to_f64());
    }
    if !min_ratio.is_finite() {
        min_ratio = 0.0;
    }
    Ok(FdomReport {
        level,
        cells: tables[0].len(),
        passed: zero_cells.is_empty() && min_ratio > 0.0,
        min_ratio,
        zero_cells,
        null_cells,
    })
}
