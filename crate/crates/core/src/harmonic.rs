//! Boundary forms, graph energies, harmonic structures and piecewise
//! harmonic functions.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::{parse_rational, Scalar};
use crate::structure::{SelfSimilarStructure, VertexSet, Word};

/// Symmetry tolerance for boundary forms.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance for proportionality and harmonic-structure residuals.
pub const VERIFY_TOL: f64 = 1e-9;

/// Projection `Q` of harmonic functions onto constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    /// `Q u = mean(u)·1`.
    Mean,
    /// `Q u = u(q_k)·1` for the 1-based boundary index `k`.
    Pin(usize),
}

impl Projection {
    pub fn matrix<T: Scalar>(&self, n0: usize) -> Result<Matrix<T>> {
        match *self {
            Projection::Mean => {
                let w = T::from_ratio(1, n0 as i64);
                Ok(Matrix::from_fn(n0, n0, |_, _| w.clone()))
            }
            Projection::Pin(k) if (1..=n0).contains(&k) => Ok(Matrix::from_fn(n0, n0, |_, j| {
                if j == k - 1 {
                    T::one()
                } else {
                    T::zero()
                }
            })),
            Projection::Pin(k) => Err(Error::InvalidBoundaryIndex {
                index: k,
                boundary_size: n0,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryFormReport {
    pub d1_ok: bool,
    pub d2_ok: bool,
    pub d3_ok: bool,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl BoundaryFormReport {
    pub fn all_ok(&self) -> bool {
        self.d1_ok && self.d2_ok && self.d3_ok
    }
}

/// Checks (D1) nonpositivity, (D2) kernel = constants and (D3) nonnegative
/// off-diagonal entries.
pub fn validate_boundary_form<T: Scalar>(d: &Matrix<T>) -> Result<BoundaryFormReport> {
    let asym = d
        .asymmetry()
        .ok_or_else(|| Error::InvalidBoundaryForm("D is not square".into()))?
        .to_f64();
    if asym > SYMMETRY_TOL {
        return Err(Error::AsymmetricInput(asym));
    }
    let n = d.rows();
    let eigenvalues = linalg::symmetric_eigenvalues(&d.to_nalgebra());
    let scale = d.max_abs().to_f64().max(f64::MIN_POSITIVE);
    let tol = SYMMETRY_TOL * scale * n as f64;
    let d1_ok = eigenvalues.iter().all(|&l| l <= tol);
    let kernel_dim = eigenvalues.iter().filter(|&&l| l.abs() <= tol).count();
    let ones = vec![T::one(); n];
    let row_sum_tol = T::slack(&d.max_abs(), SYMMETRY_TOL * n as f64);
    let constants_in_kernel = d.mul_vec(&ones).iter().all(|x| x.abs() <= row_sum_tol);
    let d2_ok = kernel_dim == 1 && constants_in_kernel;
    let d3_ok = (0..n).all(|i| (0..n).all(|j| i == j || d[(i, j)] >= T::zero()));
    Ok(BoundaryFormReport {
        d1_ok,
        d2_ok,
        d3_ok,
        eigenvalues,
    })
}

/// `E^(0)(u, v) = (-D u, v)`.
pub fn boundary_energy<T: Scalar>(d: &Matrix<T>, u: &[T], v: &[T]) -> T {
    -linalg::dot(&d.mul_vec(u), v)
}

/// Level-1 conductance matrix `L` with `E^(1)(u, u) = uᵀ L u` for the
/// cell weights `r`.
pub fn level1_form<T: Scalar>(
    s: &SelfSimilarStructure,
    d: &Matrix<T>,
    weights: &[T],
) -> Result<(VertexSet, Matrix<T>)> {
    check_weights(s, d, weights)?;
    let vs = s.vertex_set(1)?;
    let n0 = s.boundary_size();
    let mut l = Matrix::<T>::zeros(vs.n_vertices(), vs.n_vertices());
    for (i, r) in weights.iter().enumerate() {
        let inv = T::one() / r.clone();
        let verts = vs.cell_vertices(i);
        for a in 0..n0 {
            for b in 0..n0 {
                let (va, vb) = (verts[a] as usize, verts[b] as usize);
                l[(va, vb)] = l[(va, vb)].clone() - inv.clone() * d[(a, b)].clone();
            }
        }
    }
    Ok((vs, l))
}

fn check_weights<T: Scalar>(s: &SelfSimilarStructure, d: &Matrix<T>, weights: &[T]) -> Result<()> {
    let n0 = s.boundary_size();
    if d.rows() != n0 || d.cols() != n0 {
        return Err(Error::InvalidBoundaryForm(format!(
            "D is {}x{}, boundary has {n0} points",
            d.rows(),
            d.cols()
        )));
    }
    if weights.len() != s.n_symbols() {
        return Err(Error::InvalidStructure(format!(
            "{} weights for {} symbols",
            weights.len(),
            s.n_symbols()
        )));
    }
    if let Some(i) = weights.iter().position(|r| *r <= T::zero()) {
        return Err(Error::ParamOutOfRange(format!("weight r_{} must be positive", i + 1)));
    }
    Ok(())
}

struct Split<T> {
    vs: VertexSet,
    interior: Vec<usize>,
    l: Matrix<T>,
    /// `L_II^{-1} L_IB`.
    interior_response: Matrix<T>,
}

fn split_level1<T: Scalar>(
    s: &SelfSimilarStructure,
    d: &Matrix<T>,
    weights: &[T],
) -> Result<Split<T>> {
    let (vs, l) = level1_form(s, d, weights)?;
    let boundary: Vec<usize> = vs.boundary().iter().map(|&v| v as usize).collect();
    let interior: Vec<usize> = (0..vs.n_vertices())
        .filter(|v| !boundary.contains(v))
        .collect();
    let interior_response = if interior.is_empty() {
        Matrix::<T>::zeros(0, boundary.len())
    } else {
        let l_ii = l.submatrix(&interior, &interior);
        let l_ib = l.submatrix(&interior, &boundary);
        l_ii.solve(&l_ib).ok_or(Error::SingularInteriorBlock)?
    };
    Ok(Split {
        vs,
        interior,
        l,
        interior_response,
    })
}

/// Trace of `E^(1)` onto `V_0`, returned in the sign convention of `D`
/// (i.e. minus the Schur complement of the conductance matrix).
pub fn trace_to_boundary<T: Scalar>(
    s: &SelfSimilarStructure,
    d: &Matrix<T>,
    weights: &[T],
) -> Result<Matrix<T>> {
    let split = split_level1(s, d, weights)?;
    let boundary: Vec<usize> = split.vs.boundary().iter().map(|&v| v as usize).collect();
    let l_bb = split.l.submatrix(&boundary, &boundary);
    let schur = if split.interior.is_empty() {
        l_bb
    } else {
        let l_bi = split.l.submatrix(&boundary, &split.interior);
        l_bb.sub(&l_bi.mul(&split.interior_response))
    };
    Ok(schur.scale(&-T::one()))
}

fn relative_residual<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    let num = a.sub(b).frobenius_sq().to_f64().sqrt();
    let den = b.frobenius_sq().to_f64().sqrt();
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Renormalization<T> {
    /// Scalar with `trace(D, unit weights) = rho · D`.
    pub rho: T,
    /// Equal weights `r_i = rho`.
    pub weights: Vec<T>,
    /// `‖trace − rho·D‖_F / ‖trace‖_F`.
    pub residual: f64,
}

/// Equal-weight renormalization: finds `rho` with the unit-weight traced
/// form equal to `rho · D`, so that `r_i = rho` makes `(D, r)` harmonic.
pub fn solve_renormalization<T: Scalar>(
    s: &SelfSimilarStructure,
    d: &Matrix<T>,
) -> Result<Renormalization<T>> {
    let ones = vec![T::one(); s.n_symbols()];
    let traced = trace_to_boundary(s, d, &ones)?;
    let dd = d.frobenius_sq();
    if dd.is_zero() {
        return Err(Error::InvalidBoundaryForm("D is zero".into()));
    }
    let inner = (0..d.rows())
        .flat_map(|i| (0..d.cols()).map(move |j| (i, j)))
        .fold(T::zero(), |acc, (i, j)| {
            acc + traced[(i, j)].clone() * d[(i, j)].clone()
        });
    let rho = inner / dd;
    let residual = relative_residual(&d.scale(&rho), &traced);
    if residual > VERIFY_TOL {
        return Err(Error::NotProportional(residual));
    }
    Ok(Renormalization {
        weights: vec![rho.clone(); s.n_symbols()],
        rho,
        residual,
    })
}

/// Relative residual `‖trace(D, r) − D‖_F / ‖D‖_F`; zero exactly for a
/// harmonic structure in rational mode.
pub fn verify_harmonic_structure<T: Scalar>(
    s: &SelfSimilarStructure,
    d: &Matrix<T>,
    weights: &[T],
) -> Result<f64> {
    let traced = trace_to_boundary(s, d, weights)?;
    Ok(relative_residual(&traced, d))
}

/// Verified harmonic structure with cached `A_i` and `A'_i = P A_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicStructure<T> {
    d: Matrix<T>,
    weights: Vec<T>,
    projection: Projection,
    p: Matrix<T>,
    extension: Vec<Matrix<T>>,
    projected: Vec<Matrix<T>>,
    residual: f64,
}

impl<T: Scalar> HarmonicStructure<T> {
    /// Validates `D`, regularity and the renormalization identity, then
    /// derives the extension matrices from the level-1 harmonic extension.
    pub fn new(
        s: &SelfSimilarStructure,
        d: Matrix<T>,
        weights: Vec<T>,
        projection: Projection,
    ) -> Result<Self> {
        check_weights(s, &d, &weights)?;
        let report = validate_boundary_form(&d)?;
        if !report.all_ok() {
            return Err(Error::InvalidBoundaryForm(format!(
                "D1={} D2={} D3={}",
                report.d1_ok, report.d2_ok, report.d3_ok
            )));
        }
        if let Some(i) = weights.iter().position(|r| *r >= T::one()) {
            return Err(Error::NotRegular { index: i + 1 });
        }
        let residual = verify_harmonic_structure(s, &d, &weights)?;
        if residual > VERIFY_TOL {
            return Err(Error::NotHarmonic(residual));
        }

        let split = split_level1(s, &d, &weights)?;
        let n0 = s.boundary_size();
        let mut ext_rows: Vec<Option<Vec<T>>> = vec![None; split.vs.n_vertices()];
        for (a, &v) in split.vs.boundary().iter().enumerate() {
            ext_rows[v as usize] = Some((0..n0).map(|b| if a == b { T::one() } else { T::zero() }).collect());
        }
        for (k, &v) in split.interior.iter().enumerate() {
            ext_rows[v] = Some(
                split
                    .interior_response
                    .row(k)
                    .iter()
                    .map(|x| -x.clone())
                    .collect(),
            );
        }
        let extension: Vec<Matrix<T>> = (0..s.n_symbols())
            .map(|i| {
                let verts = split.vs.cell_vertices(i);
                Matrix::from_rows(
                    verts
                        .iter()
                        .map(|&v| ext_rows[v as usize].clone().expect("every vertex assigned"))
                        .collect(),
                )
            })
            .collect();
        let q = projection.matrix::<T>(n0)?;
        let p = Matrix::identity(n0).sub(&q);
        let projected = extension.iter().map(|a| p.mul(a)).collect();
        Ok(Self {
            d,
            weights,
            projection,
            p,
            extension,
            projected,
            residual,
        })
    }

    pub fn d(&self) -> &Matrix<T> {
        &self.d
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn boundary_size(&self) -> usize {
        self.d.rows()
    }

    pub fn n_symbols(&self) -> usize {
        self.weights.len()
    }

    /// `P = Id − Q`.
    pub fn p(&self) -> &Matrix<T> {
        &self.p
    }

    pub fn q(&self) -> Matrix<T> {
        Matrix::identity(self.boundary_size()).sub(&self.p)
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `A_i` for a 0-based symbol.
    pub fn a(&self, i: usize) -> &Matrix<T> {
        &self.extension[i]
    }

    /// `A'_i = P A_i`.
    pub fn a_proj(&self, i: usize) -> &Matrix<T> {
        &self.projected[i]
    }

    pub fn extension_matrices(&self) -> &[Matrix<T>] {
        &self.extension
    }

    pub fn projected_matrices(&self) -> &[Matrix<T>] {
        &self.projected
    }

    /// `A_w = A_{w_m} ⋯ A_{w_1}`.
    pub fn a_word(&self, w: &Word) -> Matrix<T> {
        w.symbols().iter().fold(Matrix::identity(self.boundary_size()), |acc, &s| {
            self.extension[s as usize].mul(&acc)
        })
    }

    /// `A'_w = A'_{w_m} ⋯ A'_{w_1}`, with `A'_∅ = P`.
    pub fn a_proj_word(&self, w: &Word) -> Matrix<T> {
        if w.is_empty() {
            return self.p.clone();
        }
        w.symbols().iter().fold(Matrix::identity(self.boundary_size()), |acc, &s| {
            self.projected[s as usize].mul(&acc)
        })
    }

    pub fn r_word(&self, w: &Word) -> T {
        w.symbols()
            .iter()
            .fold(T::one(), |acc, &s| acc * self.weights[s as usize].clone())
    }

    pub fn to_f64(&self) -> HarmonicStructure<f64> {
        HarmonicStructure {
            d: self.d.to_f64(),
            weights: self.weights.iter().map(Scalar::to_f64).collect(),
            projection: self.projection,
            p: self.p.to_f64(),
            extension: self.extension.iter().map(Matrix::to_f64).collect(),
            projected: self.projected.iter().map(Matrix::to_f64).collect(),
            residual: self.residual,
        }
    }

    pub fn description(&self) -> HarmonicDescription {
        let text = |x: &T| serde_json::Value::String(x.to_string());
        HarmonicDescription {
            d: self.d.to_rows().iter().map(|r| r.iter().map(text).collect()).collect(),
            r: self.weights.iter().map(text).collect(),
            q: self.projection,
        }
    }
}

/// On-disk harmonic structure. Entries may be JSON numbers, decimal strings
/// or `"p/q"` strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicDescription {
    #[serde(rename = "D")]
    pub d: Vec<Vec<serde_json::Value>>,
    pub r: Vec<serde_json::Value>,
    #[serde(rename = "Q", default = "default_projection")]
    pub q: Projection,
}

fn default_projection() -> Projection {
    Projection::Mean
}

pub(crate) fn parse_entry<T: Scalar>(value: &serde_json::Value) -> Result<T> {
    match value {
        serde_json::Value::String(s) => T::parse(s),
        serde_json::Value::Number(n) => parse_rational(&n.to_string()).map(|q| T::from_rational(&q)),
        other => Err(Error::Parse(format!("expected a number, got {other}"))),
    }
}

impl HarmonicDescription {
    pub fn boundary_form<T: Scalar>(&self) -> Result<Matrix<T>> {
        let rows = self
            .d
            .iter()
            .map(|r| r.iter().map(parse_entry).collect::<Result<Vec<T>>>())
            .collect::<Result<Vec<_>>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidBoundaryForm("D must be square".into()));
        }
        Ok(Matrix::from_rows(rows))
    }

    pub fn weights<T: Scalar>(&self) -> Result<Vec<T>> {
        self.r.iter().map(parse_entry).collect()
    }

    pub fn build<T: Scalar>(&self, s: &SelfSimilarStructure) -> Result<HarmonicStructure<T>> {
        HarmonicStructure::new(s, self.boundary_form()?, self.weights()?, self.q)
    }
}

/// A function in `H_k`, stored by its values on `V_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseHarmonicFn<T> {
    level: usize,
    values: Vec<T>,
}

impl<T: Scalar> PiecewiseHarmonicFn<T> {
    pub fn level(&self) -> usize {
        self.level
    }

    /// Values indexed by vertex id of `V_level`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scaled(&self, c: &T) -> Self {
        Self {
            level: self.level,
            values: self.values.iter().map(|v| v.clone() * c.clone()).collect(),
        }
    }

    pub fn shifted(&self, c: &T) -> Self {
        Self {
            level: self.level,
            values: self.values.iter().map(|v| v.clone() + c.clone()).collect(),
        }
    }

    pub fn to_f64(&self) -> PiecewiseHarmonicFn<f64> {
        PiecewiseHarmonicFn {
            level: self.level,
            values: self.values.iter().map(Scalar::to_f64).collect(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

/// A structure together with a harmonic structure on it, plus a cache of
/// vertex sets. The entry point for all function-level computations.
#[derive(Debug)]
pub struct Fractal<T> {
    structure: SelfSimilarStructure,
    harmonic: HarmonicStructure<T>,
    vertex_sets: Mutex<BTreeMap<usize, Arc<VertexSet>>>,
}

impl<T: Scalar> Clone for Fractal<T> {
    fn clone(&self) -> Self {
        Self::new(self.structure.clone(), self.harmonic.clone())
    }
}

impl<T: Scalar> Fractal<T> {
    pub fn new(structure: SelfSimilarStructure, harmonic: HarmonicStructure<T>) -> Self {
        Self {
            structure,
            harmonic,
            vertex_sets: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn structure(&self) -> &SelfSimilarStructure {
        &self.structure
    }

    pub fn harmonic(&self) -> &HarmonicStructure<T> {
        &self.harmonic
    }

    pub fn n_symbols(&self) -> usize {
        self.structure.n_symbols()
    }

    pub fn boundary_size(&self) -> usize {
        self.structure.boundary_size()
    }

    pub fn to_f64(&self) -> Fractal<f64> {
        Fractal::new(self.structure.clone(), self.harmonic.to_f64())
    }

    pub fn vertex_set(&self, level: usize) -> Result<Arc<VertexSet>> {
        if let Some(vs) = self.vertex_sets.lock().expect("cache lock").get(&level) {
            return Ok(Arc::clone(vs));
        }
        let vs = Arc::new(self.structure.vertex_set(level)?);
        self.vertex_sets
            .lock()
            .expect("cache lock")
            .insert(level, Arc::clone(&vs));
        Ok(vs)
    }

    /// `1/r_w` for every `w ∈ W_m`, lexicographic.
    pub fn inverse_weights(&self, level: usize) -> Result<Vec<T>> {
        self.structure.n_cells(level)?;
        let inv: Vec<T> = self
            .harmonic
            .weights()
            .iter()
            .map(|r| T::one() / r.clone())
            .collect();
        let mut out = vec![T::one()];
        for _ in 0..level {
            out = out
                .iter()
                .flat_map(|p| inv.iter().map(move |q| p.clone() * q.clone()))
                .collect();
        }
        Ok(out)
    }

    /// `E^(m)(u, v) = Σ_w (1/r_w) E^(0)(u∘ψ_w|V_0, v∘ψ_w|V_0)`.
    pub fn graph_energy(&self, level: usize, u: &[T], v: &[T]) -> Result<T> {
        let vs = self.vertex_set(level)?;
        for x in [u, v] {
            if x.len() != vs.n_vertices() {
                return Err(Error::LevelMismatch {
                    expected: vs.n_vertices(),
                    found: x.len(),
                });
            }
        }
        let inv = self.inverse_weights(level)?;
        let d = self.harmonic.d();
        let mut total = T::zero();
        for (cell, w) in inv.iter().enumerate() {
            let verts = vs.cell_vertices(cell);
            let uc: Vec<T> = verts.iter().map(|&i| u[i as usize].clone()).collect();
            let vc: Vec<T> = verts.iter().map(|&i| v[i as usize].clone()).collect();
            total = total + w.clone() * boundary_energy(d, &uc, &vc);
        }
        Ok(total)
    }

    /// Harmonic function `ι(u)` with boundary values `u`.
    pub fn harmonic_fn(&self, boundary_values: Vec<T>) -> Result<PiecewiseHarmonicFn<T>> {
        if boundary_values.len() != self.boundary_size() {
            return Err(Error::LevelMismatch {
                expected: self.boundary_size(),
                found: boundary_values.len(),
            });
        }
        Ok(PiecewiseHarmonicFn {
            level: 0,
            values: boundary_values,
        })
    }

    /// `h_q` for a 0-based boundary index.
    pub fn basis(&self, q: usize) -> PiecewiseHarmonicFn<T> {
        PiecewiseHarmonicFn {
            level: 0,
            values: (0..self.boundary_size())
                .map(|i| if i == q { T::one() } else { T::zero() })
                .collect(),
        }
    }

    /// `{h_q : q ∈ V_0}` in boundary order.
    pub fn boundary_basis(&self) -> Vec<PiecewiseHarmonicFn<T>> {
        (0..self.boundary_size()).map(|q| self.basis(q)).collect()
    }

    pub fn constant(&self, c: T) -> PiecewiseHarmonicFn<T> {
        PiecewiseHarmonicFn {
            level: 0,
            values: vec![c; self.boundary_size()],
        }
    }

    /// `H_n(f)`: the element of `H_n` agreeing with the given values on `V_n`.
    pub fn project_hn(&self, level: usize, values: &[Option<T>]) -> Result<PiecewiseHarmonicFn<T>> {
        let vs = self.vertex_set(level)?;
        if values.len() > vs.n_vertices() {
            return Err(Error::LevelMismatch {
                expected: vs.n_vertices(),
                found: values.len(),
            });
        }
        let values = (0..vs.n_vertices())
            .map(|v| {
                values
                    .get(v)
                    .cloned()
                    .flatten()
                    .ok_or(Error::MissingVertexValue { level, vertex: v })
            })
            .collect::<Result<Vec<T>>>()?;
        Ok(PiecewiseHarmonicFn { level, values })
    }

    pub fn from_values(&self, level: usize, values: Vec<T>) -> Result<PiecewiseHarmonicFn<T>> {
        let vs = self.vertex_set(level)?;
        if values.len() != vs.n_vertices() {
            return Err(Error::MissingVertexValue {
                level,
                vertex: values.len().min(vs.n_vertices()),
            });
        }
        Ok(PiecewiseHarmonicFn { level, values })
    }

    /// `E(f) = E^(k)(f|V_k, f|V_k)` for `f ∈ H_k`.
    pub fn energy(&self, f: &PiecewiseHarmonicFn<T>) -> Result<T> {
        self.graph_energy(f.level, &f.values, &f.values)
    }

    pub fn energy_pair(&self, f: &PiecewiseHarmonicFn<T>, g: &PiecewiseHarmonicFn<T>) -> Result<T> {
        let (f, g) = self.align(f, g)?;
        self.graph_energy(f.level, &f.values, &g.values)
    }

    /// `ι^{-1}(ψ_u^* f)` for every `u ∈ W_k`, `k = f.level`.
    pub fn cell_boundary_values(&self, f: &PiecewiseHarmonicFn<T>) -> Result<Vec<Vec<T>>> {
        let vs = self.vertex_set(f.level)?;
        Ok((0..vs.n_cells())
            .map(|c| {
                vs.cell_vertices(c)
                    .iter()
                    .map(|&v| f.values[v as usize].clone())
                    .collect()
            })
            .collect())
    }

    /// `ι^{-1}(ψ_w^* f)` for `|w| ≥ f.level`.
    pub fn boundary_values_on(&self, f: &PiecewiseHarmonicFn<T>, w: &Word) -> Result<Vec<T>> {
        if w.level() < f.level {
            return Err(Error::LevelTooShallow {
                requested: w.level(),
                function_level: f.level,
            });
        }
        let vs = self.vertex_set(f.level)?;
        let head = w.prefix(f.level).index(self.n_symbols());
        let start: Vec<T> = vs
            .cell_vertices(head)
            .iter()
            .map(|&v| f.values[v as usize].clone())
            .collect();
        let tail = w.suffix_from(f.level);
        Ok(self.harmonic.a_word(&tail).mul_vec(&start))
    }

    /// Harmonic extension of `f` to `V_n`, `n ≥ f.level`.
    pub fn extend(&self, f: &PiecewiseHarmonicFn<T>, level: usize) -> Result<PiecewiseHarmonicFn<T>> {
        if level < f.level {
            return Err(Error::LevelTooShallow {
                requested: level,
                function_level: f.level,
            });
        }
        if level == f.level {
            return Ok(f.clone());
        }
        let target = self.vertex_set(level)?;
        let depth = level - f.level;
        let per_cell = self.structure.n_cells(depth)?;
        let mut values: Vec<Option<T>> = vec![None; target.n_vertices()];
        for (u, start) in self.cell_boundary_values(f)?.into_iter().enumerate() {
            let mut offset = 0usize;
            descend(&self.harmonic, start, depth, &mut |b: &Vec<T>| {
                let cell = u * per_cell + offset;
                for (a, &v) in target.cell_vertices(cell).iter().enumerate() {
                    values[v as usize] = Some(b[a].clone());
                }
                offset += 1;
            });
        }
        Ok(PiecewiseHarmonicFn {
            level,
            values: values
                .into_iter()
                .map(|v| v.expect("every vertex lies in some cell"))
                .collect(),
        })
    }

    /// Restriction of `f` to `V_k ⊂ V_{f.level}`, viewed as a level-`k`
    /// function. Only an element of `H_k` if `f` already was.
    pub fn restrict(&self, f: &PiecewiseHarmonicFn<T>, level: usize) -> Result<PiecewiseHarmonicFn<T>> {
        if level > f.level {
            return Err(Error::LevelMismatch {
                expected: f.level,
                found: level,
            });
        }
        let coarse = self.vertex_set(level)?;
        let fine = self.vertex_set(f.level)?;
        let n = self.n_symbols();
        let values = (0..coarse.n_vertices())
            .map(|v| {
                let (w, a) = coarse.representative(v, n);
                let (mut cell, mut b) = (w.index(n), a);
                for _ in level..f.level {
                    let (k, c) = self.structure.embedding()[b];
                    cell = cell * n + k;
                    b = c;
                }
                f.values[fine.cell_vertices(cell)[b] as usize].clone()
            })
            .collect();
        Ok(PiecewiseHarmonicFn { level, values })
    }

    /// Lifts both functions to a common level.
    pub fn align(
        &self,
        f: &PiecewiseHarmonicFn<T>,
        g: &PiecewiseHarmonicFn<T>,
    ) -> Result<(PiecewiseHarmonicFn<T>, PiecewiseHarmonicFn<T>)> {
        let level = f.level.max(g.level);
        Ok((self.extend(f, level)?, self.extend(g, level)?))
    }

    /// `Σ c_i f_i` at the deepest level among the terms.
    pub fn linear_combination(
        &self,
        terms: &[(T, &PiecewiseHarmonicFn<T>)],
    ) -> Result<PiecewiseHarmonicFn<T>> {
        let level = terms.iter().map(|(_, f)| f.level).max().unwrap_or(0);
        let n = self.vertex_set(level)?.n_vertices();
        let mut values = vec![T::zero(); n];
        for (c, f) in terms {
            let f = self.extend(f, level)?;
            for (slot, v) in values.iter_mut().zip(&f.values) {
                *slot = slot.clone() + c.clone() * v.clone();
            }
        }
        Ok(PiecewiseHarmonicFn { level, values })
    }

    /// `ψ_w^* f`. For `|w| ≥ f.level` the result is harmonic (level 0).
    pub fn pullback(&self, f: &PiecewiseHarmonicFn<T>, w: &Word) -> Result<PiecewiseHarmonicFn<T>> {
        if w.level() >= f.level {
            return self.harmonic_fn(self.boundary_values_on(f, w)?);
        }
        let level = f.level - w.level();
        let fine = self.vertex_set(f.level)?;
        let coarse = self.vertex_set(level)?;
        let base = w.index(self.n_symbols()) * coarse.n_cells();
        let mut values: Vec<Option<T>> = vec![None; coarse.n_vertices()];
        for x in 0..coarse.n_cells() {
            for (&cv, &fv) in coarse
                .cell_vertices(x)
                .iter()
                .zip(fine.cell_vertices(base + x))
            {
                values[cv as usize] = Some(f.values[fv as usize].clone());
            }
        }
        Ok(PiecewiseHarmonicFn {
            level,
            values: values.into_iter().map(|v| v.expect("covered")).collect(),
        })
    }

    /// Random element of `H_k` with integer vertex values in
    /// `[-max_abs, max_abs]` (exact in both backends).
    pub fn random_function<R: Rng + ?Sized>(
        &self,
        level: usize,
        rng: &mut R,
        max_abs: i64,
    ) -> Result<PiecewiseHarmonicFn<T>> {
        let n = self.vertex_set(level)?.n_vertices();
        loop {
            let values: Vec<T> = (0..n)
                .map(|_| T::from_i64(rng.random_range(-max_abs..=max_abs)))
                .collect();
            let f = PiecewiseHarmonicFn { level, values };
            if !f.is_constant() {
                return Ok(f);
            }
        }
    }
}

/// Visits `A_x b` for every `x ∈ W_depth` in lexicographic order.
pub(crate) fn descend<T: Scalar>(
    hs: &HarmonicStructure<T>,
    start: Vec<T>,
    depth: usize,
    visit: &mut dyn FnMut(&Vec<T>),
) {
    if depth == 0 {
        visit(&start);
        return;
    }
    for i in 0..hs.n_symbols() {
        let next = hs.a(i).mul_vec(&start);
        descend(hs, next, depth - 1, visit);
    }
}
