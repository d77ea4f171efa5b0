//! The twelve acceptance criteria, run in sequence so that timings are not
//! distorted by other tests. Each prints one PASS/FAIL line to the real
//! stderr (bypassing the test harness capture).

use std::io::Write;
use std::time::{Duration, Instant};

use num::{BigRational, Zero};
use pcf_energy::derivative::{derivative_ladder, slope_field};
use pcf_energy::harmonic::{Fractal, PiecewiseHarmonicFn};
use pcf_energy::index::{
    gram_field, index_estimate, index_field, rank_estimate, stability_check, DEFAULT_ESSSUP_DELTA,
    DEFAULT_RANK_TOL,
};
use pcf_energy::linalg::Matrix;
use pcf_energy::measure::{
    boundary_dominant, dominant_measure, energy_measures, inequality_audit, scaling_audit,
};
use pcf_energy::scalar::{rational, Scalar};
use pcf_energy::structure::Word;
use pcf_energy::zoo::{self, boundary_eigencheck, fdom_probe, nondegeneracy_check};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = BigRational;

fn q(n: i64, d: i64) -> Q {
    rational(n, d)
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        passed: true,
        detail: detail.into(),
    }
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn report(id: usize, name: &str, elapsed: Duration, outcome: &Outcome) {
    let tag = if outcome.passed { "PASS" } else { "FAIL" };
    let line = format!(
        "[{tag}] criterion {id:>2} {name:<28} {:>8.2}s  {}\n",
        elapsed.as_secs_f64(),
        outcome.detail
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn qm(rows: Vec<Vec<Q>>) -> Matrix<Q> {
    Matrix::from_rows(rows)
}

/// Random nonconstant `ι(u)` with small integer boundary values.
fn random_harmonic<T: Scalar>(fractal: &Fractal<T>, rng: &mut impl Rng) -> PiecewiseHarmonicFn<T> {
    loop {
        let values: Vec<T> = (0..fractal.boundary_size())
            .map(|_| T::from_i64(rng.random_range(-5..=5)))
            .collect();
        let h = fractal.harmonic_fn(values).expect("boundary size matches");
        if !h.is_constant() {
            return h;
        }
    }
}

// 1 ----------------------------------------------------------------------

fn hata_golden() -> Outcome {
    for (n, d) in [(1, 3), (1, 2), (2, 3)] {
        let r = q(n, d);
        let hata = zoo::hata(r.clone()).expect("valid parameter");
        let hs = hata.harmonic();
        let h = q(1, 1) / r.clone();
        let (zero, one) = (q(0, 1), q(1, 1));
        let s = r.clone() * r.clone();
        let d_expected = qm(vec![
            vec![-h.clone(), h.clone(), zero.clone()],
            vec![h.clone(), -(h.clone() + one.clone()), one.clone()],
            vec![zero.clone(), one.clone(), -one.clone()],
        ]);
        let a1 = qm(vec![
            vec![zero.clone(), one.clone() - s.clone(), s.clone()],
            vec![zero.clone(), one.clone(), zero.clone()],
            vec![one.clone(), zero.clone(), zero.clone()],
        ]);
        let a2 = qm(vec![
            vec![zero.clone(), one.clone() - s.clone(), s.clone()],
            vec![zero.clone(), one.clone() - s.clone(), s.clone()],
            vec![zero.clone(), zero.clone(), one.clone()],
        ]);
        if hs.d() != &d_expected || hs.a(0) != &a1 || hs.a(1) != &a2 {
            return check(false, format!("closed form mismatch at r = {r}"));
        }
        if hs.weights() != [r.clone(), one - s] {
            return check(false, format!("weights mismatch at r = {r}"));
        }
        let ranks = (hs.a_proj(0).exact_rank(), hs.a_proj(1).exact_rank());
        if ranks != (2, 1) {
            return check(false, format!("ranks {ranks:?} at r = {r}"));
        }
    }
    pass("D, A_1, A_2 exact for r in {1/3, 1/2, 2/3}; rank A'_1 = 2, rank A'_2 = 1")
}

// 2 ----------------------------------------------------------------------

fn hata_index() -> Outcome {
    let hata = zoo::hata(q(1, 2)).unwrap();
    let m = 10;
    let nu = boundary_dominant(&hata, m).unwrap();
    let field = gram_field(&hata, &hata.boundary_basis(), &nu, m).unwrap();
    let spine = Word::from_zero_based(vec![0; m]);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (i, mw) in field.matrices().iter().enumerate() {
        if i == spine.index(2) {
            continue;
        }
        if let Some(mw) = mw {
            let sv = rank_estimate(mw, DEFAULT_RANK_TOL).singular_values;
            worst = worst.max(sv[1] / sv[0]);
            checked += 1;
        }
    }
    let rep = index_estimate(&index_field(&field, DEFAULT_RANK_TOL), DEFAULT_ESSSUP_DELTA);
    check(
        worst <= 1e-9 && rep.esssup_proxy == 1,
        format!(
            "max σ2/σ1 off spine = {worst:.1e} over {checked} cells ({} ν-null); proxy = {} (δ = {}, trimmed {:.2e})",
            rep.null_cells, rep.esssup_proxy, rep.delta, rep.trimmed_mass
        ),
    )
}

// 3 ----------------------------------------------------------------------

/// Independent oracle: the level-1 network of `gasket(d, 2)` built from
/// edge midpoints, reduced to the corners by exact Gaussian elimination.
/// Returns the traced off-diagonal conductance, which is `ρ` since `D` has
/// unit off-diagonal entries.
fn gasket_l2_schur(d: usize) -> Q {
    // Vertices: unordered pairs {i, j} (i = j are the corners).
    let mut verts = Vec::new();
    for i in 0..=d {
        for j in i..=d {
            verts.push((i, j));
        }
    }
    let id = |a: usize, b: usize| verts.iter().position(|&v| v == (a.min(b), a.max(b))).unwrap();
    let n = verts.len();
    let mut l = vec![vec![q(0, 1); n]; n];
    for cell in 0..=d {
        let members: Vec<usize> = (0..=d).map(|j| id(cell, j)).collect();
        for &x in &members {
            for &y in &members {
                if x != y {
                    l[x][y] = l[x][y].clone() + q(1, 1);
                    l[x][x] = l[x][x].clone() - q(1, 1);
                }
            }
        }
    }
    // Eliminate interior vertices one at a time (Schur complement).
    let mut alive: Vec<usize> = (0..n).collect();
    for (k, &(i, j)) in verts.iter().enumerate() {
        if i == j {
            continue;
        }
        alive.retain(|&x| x != k);
        let pivot = l[k][k].clone();
        for &x in &alive {
            for &y in &alive {
                let delta = l[x][k].clone() * l[k][y].clone() / pivot.clone();
                l[x][y] = l[x][y].clone() - delta;
            }
        }
    }
    l[id(0, 0)][id(1, 1)].clone()
}

fn renormalization() -> Outcome {
    let r22 = zoo::gasket(2, 2).unwrap().harmonic().weights()[0].clone();
    let r32 = zoo::gasket(3, 2).unwrap().harmonic().weights()[0].clone();
    let (o22, o32) = (gasket_l2_schur(2), gasket_l2_schur(3));
    check(
        r22 == q(3, 5) && r32 == q(2, 3) && o22 == r22 && o32 == r32,
        format!("gasket(2,2): r = {r22} (oracle {o22}); gasket(3,2): r = {r32} (oracle {o32})"),
    )
}

// 4 ----------------------------------------------------------------------

const TRIALS: usize = 100;
const MAX_LEVEL: usize = 8;

/// Checks `Σ_w ν_f(K_w) = 2E(f)` and one-step additivity for `TRIALS`
/// random functions of levels 0..=2 at every level up to `MAX_LEVEL`.
fn identities_for<T: Scalar>(fractal: &Fractal<T>, seed: u64, batch: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let functions: Vec<_> = (0..TRIALS)
        .map(|i| fractal.random_function(i % 3, &mut rng, 6).unwrap())
        .collect();
    let energies: Vec<T> = functions.iter().map(|f| fractal.energy(f).unwrap()).collect();
    let two = T::from_i64(2);
    let mut checks = 0;
    for start in (0..TRIALS).step_by(batch) {
        let chunk = start..(start + batch).min(TRIALS);
        let mut previous: Vec<Option<pcf_energy::measure::CellMeasureTable<T>>> = vec![None; chunk.len()];
        for m in 0..=MAX_LEVEL {
            let live: Vec<usize> = chunk.clone().filter(|&i| functions[i].level() <= m).collect();
            let fns: Vec<_> = live.iter().map(|&i| functions[i].clone()).collect();
            let tables = energy_measures(fractal, &fns, m).map_err(|e| e.to_string())?;
            for (&i, table) in live.iter().zip(tables) {
                let expected = two.clone() * energies[i].clone();
                let tol = T::slack(&expected, 1e-10);
                if (table.total() - expected.clone()).abs() > tol {
                    return Err(format!("trial {i}, m = {m}: total {} vs 2E = {expected}", table.total()));
                }
                let slot = &mut previous[i - chunk.start];
                if let Some(prev) = slot.take() {
                    let coarse = table.coarsen().expect("m > 0");
                    for (a, b) in coarse.values().iter().zip(prev.values()) {
                        if (a.clone() - b.clone()).abs() > tol {
                            return Err(format!("trial {i}, m = {m}: additivity {a} vs {b}"));
                        }
                    }
                }
                *slot = Some(table);
                checks += 1;
            }
        }
    }
    Ok(checks)
}

fn measure_identities() -> Outcome {
    let sg = zoo::gasket(2, 2).unwrap();
    let tables = energy_measures(&sg, &[sg.basis(0)], 1).unwrap();
    if tables[0].values() != [q(12, 5), q(4, 5), q(4, 5)] {
        return check(false, format!("level-1 table {:?}", tables[0].values()));
    }
    let mut parts = vec!["table (12/5, 4/5, 4/5)".to_string()];
    let runs: Vec<(&str, Box<dyn Fn() -> Result<usize, String>>)> = vec![
        ("gasket(2,2) rational", Box::new(|| identities_for(&zoo::gasket(2, 2).unwrap(), 1, TRIALS))),
        ("hata(1/2) rational", Box::new(|| identities_for(&zoo::hata(q(1, 2)).unwrap(), 2, TRIALS))),
        ("gasket(3,2) float", Box::new(|| identities_for(&zoo::gasket(3, 2).unwrap().to_f64(), 3, 25))),
        ("gasket(2,3) float", Box::new(|| identities_for(&zoo::gasket(2, 3).unwrap().to_f64(), 4, 10))),
    ];
    for (name, run) in runs {
        let start = Instant::now();
        match run() {
            Ok(n) => parts.push(format!("{name}: {n} tables ok in {:.1}s", start.elapsed().as_secs_f64())),
            Err(e) => return check(false, format!("{name}: {e}")),
        }
    }
    pass(parts.join("; "))
}

// 5 ----------------------------------------------------------------------

fn inequality_audits() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    let run = |fractal: &Fractal<Q>, seed: u64| -> (usize, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = 0;
        let mut cells = 0;
        for i in 0..1000 {
            let f = fractal.random_function(i % 3, &mut rng, 6).unwrap();
            let g = fractal.random_function((i / 3) % 3, &mut rng, 6).unwrap();
            let rep = inequality_audit(fractal, &f, &g, 6).unwrap();
            violations += rep.violations();
            cells += rep.cells;
        }
        (violations, cells)
    };
    for (name, fractal, seed) in [
        ("gasket(2,2)", zoo::gasket(2, 2).unwrap(), 10),
        ("hata(1/2)", zoo::hata(q(1, 2)).unwrap(), 11),
    ] {
        let (v, c) = run(&fractal, seed);
        ok &= v == 0;
        details.push(format!("{name}: {v} violations over {c} cell checks"));
    }
    check(ok, details.join("; "))
}

// 6 ----------------------------------------------------------------------

fn scaling() -> Outcome {
    let mut audited = 0;
    for (name, fractal) in [("gasket(2,2)", zoo::gasket(2, 2).unwrap()), ("hata(1/2)", zoo::hata(q(1, 2)).unwrap())] {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = fractal.n_symbols();
        let pairs: Vec<_> = (0..3)
            .map(|i| {
                (
                    fractal.random_function(i % 2, &mut rng, 4).unwrap(),
                    fractal.random_function(0, &mut rng, 4).unwrap(),
                )
            })
            .chain(std::iter::once((fractal.basis(0), fractal.basis(0))))
            .collect();
        for len in 0..=3 {
            for idx in 0..n.pow(len as u32) {
                let w = Word::from_index(idx, len, n);
                for (f, g) in &pairs {
                    for depth in 0..=3 {
                        if w.level() + depth < f.level().max(g.level()) {
                            continue;
                        }
                        let rep = scaling_audit(&fractal, f, g, &w, depth).unwrap();
                        if !rep.exact {
                            return check(false, format!("{name}: w = {w}, depth {depth}: {:e}", rep.max_relative_discrepancy));
                        }
                        audited += 1;
                    }
                }
            }
        }
    }
    pass(format!("{audited} (w, u-depth, f, g) combinations exact"))
}

// 7 ----------------------------------------------------------------------

fn derivative_suite() -> Outcome {
    let sg = zoo::gasket(2, 2).unwrap();
    let levels: Vec<usize> = (0..=8).collect();

    // (a) f = 3g + 5.
    let g = sg.harmonic_fn(vec![q(2, 1), q(-1, 1), q(4, 1)]).unwrap();
    let f = g.scaled(&q(3, 1)).shifted(&q(5, 1));
    for &m in &levels {
        let s = slope_field(&sg, &f, &g, m).unwrap();
        if !s.slopes().iter().flatten().all(|a| *a == q(3, 1)) {
            return check(false, format!("(a) nonconstant slope at m = {m}"));
        }
        let gap = sg.energy(&f).unwrap() - s.identity_sum();
        if !gap.is_zero() {
            return check(false, format!("(a) gap {gap} at m = {m}"));
        }
    }

    // (b), (c) random f ∈ H_1 against random nonconstant harmonic g. The
    // exact identity sum accumulates one distinct denominator per cell, so
    // these run in f64.
    let sg = sg.to_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_ratio = 0.0f64;
    for trial in 0..20 {
        let f = sg.random_function(1, &mut rng, 6).unwrap();
        let g = random_harmonic(&sg, &mut rng);
        let ladder = derivative_ladder(&sg, &f, &g, &levels[1..]).unwrap();
        let monotone = ladder.windows(2).all(|w| w[1].s_m >= w[0].s_m - 1e-12 * w[0].energy);
        let bounded = ladder.iter().all(|s| s.gap >= -1e-12 * s.energy);
        let gap_at = |m: usize| ladder.iter().find(|s| s.level == m).unwrap().gap;
        let median_at = |m: usize| {
            ladder
                .iter()
                .find(|s| s.level == m)
                .and_then(|s| s.sqrt_remainder.as_ref())
                .map(|q| q.median)
                .unwrap_or(0.0)
        };
        if !(monotone && bounded) {
            return check(false, format!("(b) trial {trial}: monotone = {monotone}, bounded = {bounded}"));
        }
        if !(gap_at(8) < gap_at(2)) {
            return check(false, format!("(b) trial {trial}: gap(8) = {} vs gap(2) = {}", gap_at(8), gap_at(2)));
        }
        if !(median_at(8) < median_at(4)) {
            return check(
                false,
                format!("(c) trial {trial}: median √ρ at 8 = {} vs at 4 = {}", median_at(8), median_at(4)),
            );
        }
        if gap_at(2) > 0.0 {
            worst_ratio = worst_ratio.max(gap_at(8) / gap_at(2));
        }
    }
    pass(format!("affine exact at m = 0..8; 20 random pairs monotone, max gap(8)/gap(2) = {worst_ratio:.3}"))
}

// 8 ----------------------------------------------------------------------

fn eigenstructure() -> Outcome {
    let mut corners = 0;
    for (d, l) in [(2, 2), (2, 3), (3, 2)] {
        let sg = zoo::gasket(d, l).unwrap();
        let hs = sg.harmonic();
        for qq in 1..=d + 1 {
            let rep = boundary_eigencheck(&sg, qq).unwrap();
            // Exact oracle in rational arithmetic.
            let i = sg.structure().anchor(qq - 1).unwrap();
            let a = hs.a(i);
            let r = hs.weights()[i].clone();
            let u: Vec<Q> = (0..=d).map(|x| if x == qq - 1 { q(-(d as i64), 1) } else { q(1, 1) }).collect();
            let v: Vec<Q> = (0..=d).map(|x| if x == qq - 1 { q(0, 1) } else { q(1, 1) }).collect();
            let scaled = |x: &[Q]| x.iter().map(|y| y.clone() * r.clone()).collect::<Vec<_>>();
            let pairing = u.iter().zip(&v).fold(q(0, 1), |acc, (x, y)| acc + x.clone() * y.clone());
            let exact = a.transpose().mul_vec(&u) == scaled(&u)
                && a.mul_vec(&v) == scaled(&v)
                && pairing == q(d as i64, 1);
            if !(rep.passed && exact) {
                return check(false, format!("gasket({d},{l}) q_{qq}: {rep:?}"));
            }
            corners += 1;
        }
    }
    pass(format!("{corners} corners: eigenvector identities exact, (u_q, ṽ_q) = d, other |λ| < r"))
}

// 9 ----------------------------------------------------------------------

fn nondegeneracy() -> Outcome {
    let mut dets = Vec::new();
    for (d, l) in [(2, 2), (2, 3), (3, 2)] {
        let sg = zoo::gasket(d, l).unwrap();
        for (i, a) in sg.harmonic().extension_matrices().iter().enumerate() {
            if a.determinant().is_zero() {
                return check(false, format!("gasket({d},{l}): det A_{} = 0", i + 1));
            }
        }
        let rep = nondegeneracy_check(sg.harmonic());
        if rep.iter().any(|e| e.degenerate) {
            return check(false, format!("gasket({d},{l}) flagged degenerate"));
        }
        dets.push(format!("gasket({d},{l}) det A_1 = {}", rep[0].det));
    }
    let hata = zoo::hata(q(1, 2)).unwrap();
    let rep = nondegeneracy_check(hata.harmonic());
    let hata_ok = !rep[0].degenerate && rep[1].degenerate && hata.harmonic().a(1).determinant().is_zero();
    dets.push(format!("hata det A_2 = {}", rep[1].det));
    check(hata_ok, dets.join("; "))
}

// 10, 11 -----------------------------------------------------------------

fn fdom() -> (Outcome, Option<PiecewiseHarmonicFn<Q>>) {
    let sg = zoo::gasket(2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut first = None;
    let mut worst = f64::INFINITY;
    for trial in 0..20 {
        let h = random_harmonic(&sg, &mut rng);
        let rep = fdom_probe(&sg, &h, 8).unwrap();
        if !rep.passed || rep.cells != 6561 || rep.null_cells != 0 {
            return (check(false, format!("trial {trial}: {} zero cells, min {}", rep.zero_cells.len(), rep.min_ratio)), None);
        }
        worst = worst.min(rep.min_ratio);
        first.get_or_insert(h);
    }
    (pass(format!("20 harmonic h, 6561 cells each: min ν_h/ν = {worst:.3e} > 0")), first)
}

fn stability(g: Option<PiecewiseHarmonicFn<Q>>) -> Outcome {
    let Some(g) = g else {
        return check(false, "no reference function from criterion 10");
    };
    let sg = zoo::gasket(2, 2).unwrap();
    let m = 6;
    let nu = boundary_dominant(&sg, m).unwrap();
    let nu_g = dominant_measure(&sg, &[(q(1, 1), g)], m).unwrap();
    let rep = stability_check(&sg, &sg.boundary_basis(), &nu, &nu_g, m, DEFAULT_RANK_TOL).unwrap();
    check(
        rep.disagreements.is_empty() && rep.excluded.is_empty() && rep.compared == 729,
        format!("{} cells compared, {} disagreements, {} excluded", rep.compared, rep.disagreements.len(), rep.excluded.len()),
    )
}

// 12 ---------------------------------------------------------------------

fn pipeline(threads: usize) -> (Duration, Vec<Option<Matrix<Q>>>, Vec<Option<usize>>) {
    let sg = zoo::gasket(2, 2).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let nu = boundary_dominant(&sg, 8).unwrap();
        let field = gram_field(&sg, &sg.boundary_basis(), &nu, 8).unwrap();
        let ranks = index_field(&field, DEFAULT_RANK_TOL).ranks();
        (start.elapsed(), field.matrices().to_vec(), ranks)
    })
}

fn performance() -> Outcome {
    let (t1, m1, r1) = pipeline(1);
    let (t8, m8, r8) = pipeline(8);
    let identical = m1 == m8 && r1 == r8;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let speedup = t1.as_secs_f64() / t8.as_secs_f64();
    let scaling = if cores >= 8 {
        let ok = speedup >= 4.0;
        (ok, format!("speedup {speedup:.2}x on 8 threads"))
    } else {
        (true, format!("scaling UNVERIFIED: only {cores} core(s) available ({speedup:.2}x observed)"))
    };
    check(
        t1 < Duration::from_secs(5) && identical && scaling.0,
        format!(
            "1 thread {:.2}s, 8 threads {:.2}s, identical rational output = {identical}; {}",
            t1.as_secs_f64(),
            t8.as_secs_f64(),
            scaling.1
        ),
    )
}

#[test]
fn acceptance_criteria() {
    // `ACCEPTANCE_ONLY=7,8` restricts the run to the listed criteria.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failures = Vec::new();
    let mut run = |id: usize, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            return;
        }
        let start = Instant::now();
        let mut outcome = f();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                outcome.passed = false;
                outcome.detail = format!("{} (over the {:?} budget)", outcome.detail, limit);
            }
        }
        report(id, name, elapsed, &outcome);
        if !outcome.passed {
            failures.push(id);
        }
    };
    run(1, "hata golden", Some(Duration::from_secs(1)), &mut hata_golden);
    run(2, "hata index", Some(Duration::from_secs(10)), &mut hata_index);
    run(3, "renormalization", None, &mut renormalization);
    run(4, "measure identities", None, &mut measure_identities);
    run(5, "inequality audits", None, &mut inequality_audits);
    run(6, "scaling audit", None, &mut scaling);
    run(7, "derivative suite", Some(Duration::from_secs(30)), &mut derivative_suite);
    run(8, "eigenstructure", None, &mut eigenstructure);
    run(9, "nondegeneracy", None, &mut nondegeneracy);
    let mut g = None;
    run(10, "fdom probe", None, &mut || {
        let (outcome, h) = fdom();
        g = h;
        outcome
    });
    run(11, "rank stability", None, &mut || stability(g.take()));
    run(12, "performance", None, &mut performance);
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
