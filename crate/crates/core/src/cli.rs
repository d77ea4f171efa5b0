//! Command-line front end. The binary is a thin wrapper around [`run`].
//!
//! Exit codes: 0 ok, 2 configuration error, 3 invariant violation found,
//! 4 internal error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::BigRational;
use serde::Deserialize;
use serde_json::json;

use crate::derivative::{derivative_ladder, oscillation_audit, slope_field, DEFAULT_PROBE_DEPTH};
use crate::error::{Error, Result};
use crate::harmonic::{
    solve_renormalization, validate_boundary_form, Fractal, HarmonicDescription, HarmonicStructure,
    PiecewiseHarmonicFn, Projection,
};
use crate::index::{
    gram_field, index_estimate, index_field, stability_check, DEFAULT_ESSSUP_DELTA, DEFAULT_RANK_TOL,
};
use crate::linalg::Matrix;
use crate::measure::{
    boundary_dominant, cell_energy_measure, dominant_measure, energy_measure, inequality_audit, rn_ratio,
    scalar_json, CellMeasureTable,
};
use crate::scalar::Scalar;
use crate::structure::{build_structure, StructureDescription};
use crate::zoo::{self, ModelDescription, ZooFamily};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "pcf-energy", version, about = "Energy measures, index and derivatives on p.c.f. fractals")]
pub struct Cli {
    /// TOML file with defaults for any option below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "FD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the boundary form and the harmonic-structure identity.
    Verify(ModelArgs),
    /// Cell table of ν_f or ν_{f,g}.
    EnergyMeasure(EnergyArgs),
    /// Dominant measure Σ a_i ν_{f_i} (default: Σ_q ν_{h_q}).
    Dominant(DominantArgs),
    /// Per-cell ranks of the Gram field and the index estimate.
    Index(IndexArgs),
    /// Slope field df/dg and the energy-identity ladder.
    Derivative(DerivativeArgs),
    /// Oscillation against √(r_w ν_f(K_w)).
    Oscillation(OscillationArgs),
    /// Built-in fractal families.
    #[command(subcommand)]
    Zoo(ZooCommand),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rational,
    Float,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// Built-in family, e.g. `gasket:2,2` or `hata:1/2`.
    #[arg(long)]
    zoo: Option<String>,
    /// Combined `{"structure", "harmonic"}` JSON, as written by `zoo emit`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Structure JSON.
    #[arg(long)]
    structure: Option<PathBuf>,
    /// Harmonic-structure JSON, or `solve` for the complete-graph form
    /// with equal solved weights.
    #[arg(long)]
    harmonic: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Args, Debug)]
struct OutArgs {
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Function spec: `basis:qN`, `boundary:v1,..`, `vertex:K:v0,..`, `const:c`.
    #[arg(long)]
    f: String,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    level: Option<usize>,
    /// Also audit the cell inequalities for (f, g); exit 3 on violation.
    #[arg(long)]
    audit: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct DominantArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `coef*spec` components; defaults to the boundary basis.
    #[arg(long = "component")]
    components: Vec<String>,
    #[arg(long)]
    level: Option<usize>,
    /// Also report the cell ratios ν_f / ν for this function.
    #[arg(long)]
    ratio_of: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Functions spanning the Gram field; defaults to the boundary basis.
    #[arg(long = "function")]
    functions: Vec<String>,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Mass fraction allowed above the essential-supremum proxy.
    #[arg(long)]
    delta: Option<f64>,
    /// Compare ranks against the dominant measure ν_g for this function;
    /// exit 3 on any disagreement.
    #[arg(long)]
    compare_with: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct DerivativeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    f: String,
    #[arg(long)]
    g: String,
    /// `start:end:step`, inclusive.
    #[arg(long)]
    levels: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct OscillationArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    f: String,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    probe_depth: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Subcommand, Debug)]
enum ZooCommand {
    /// List the built-in families.
    List,
    /// Write a family member as model JSON.
    Emit {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        /// Hata parameter.
        #[arg(long, default_value = "1/2")]
        r: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Values read from `--config`. Flags override these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub zoo: Option<String>,
    pub model: Option<PathBuf>,
    pub structure: Option<PathBuf>,
    pub harmonic: Option<String>,
    pub mode: Option<Mode>,
    pub threads: Option<usize>,
    pub level: Option<usize>,
    pub levels: Option<String>,
    pub rank_tol: Option<f64>,
    pub delta: Option<f64>,
    pub probe_depth: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

const DEFAULT_LEVEL: usize = 4;

struct Ctx {
    file: FileConfig,
    stdout: Box<dyn Write + Send>,
}

impl Ctx {
    fn level(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.level).unwrap_or(DEFAULT_LEVEL)
    }

    fn emit(&mut self, value: &serde_json::Value, out: &OutArgs) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        if let Some(path) = &out.out_json {
            fs::write(path, format!("{text}\n"))?;
        }
        writeln!(self.stdout, "{text}")?;
        Ok(())
    }
}

fn write_csv(path: &Option<PathBuf>, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    if let Some(path) = path {
        let mut buf = Vec::new();
        f(&mut buf)?;
        fs::write(path, buf)?;
    }
    Ok(())
}

/// Parses the arguments and runs the command, writing reports to stdout.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    run_with_output(args, Box::new(std::io::stdout()))
}

pub fn run_with_output<I, S>(args: I, stdout: Box<dyn Write + Send>) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

fn execute(cli: Cli, stdout: Box<dyn Write + Send>) -> Result<i32> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut ctx = Ctx { file, stdout };
    pool.install(|| dispatch(cli.command, &mut ctx))
}

fn dispatch(command: Command, ctx: &mut Ctx) -> Result<i32> {
    if let Command::Zoo(z) = command {
        return zoo_command(z, ctx);
    }
    let model = match &command {
        Command::Verify(m) => m,
        Command::EnergyMeasure(a) => &a.model,
        Command::Dominant(a) => &a.model,
        Command::Index(a) => &a.model,
        Command::Derivative(a) => &a.model,
        Command::Oscillation(a) => &a.model,
        Command::Zoo(_) => unreachable!(),
    }
    .clone();
    match model.mode.or(ctx.file.mode).unwrap_or(Mode::Rational) {
        Mode::Rational => with_fractal::<BigRational>(command, &model, ctx),
        Mode::Float => with_fractal::<f64>(command, &model, ctx),
    }
}

fn with_fractal<T: Scalar>(command: Command, model: &ModelArgs, ctx: &mut Ctx) -> Result<i32> {
    let source = ModelSource::resolve(model, &ctx.file)?;
    if let Command::Verify(_) = command {
        return verify::<T>(&source, ctx);
    }
    let fractal = source.load::<T>()?;
    match command {
        Command::EnergyMeasure(a) => energy_command(&fractal, a, ctx),
        Command::Dominant(a) => dominant_command(&fractal, a, ctx),
        Command::Index(a) => index_command(&fractal, a, ctx),
        Command::Derivative(a) => derivative_command(&fractal, a, ctx),
        Command::Oscillation(a) => oscillation_command(&fractal, a, ctx),
        Command::Verify(_) | Command::Zoo(_) => unreachable!(),
    }
}

enum ModelSource {
    Zoo(ZooFamily),
    Model(ModelDescription),
    Parts {
        structure: StructureDescription,
        harmonic: Option<HarmonicDescription>,
    },
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl ModelSource {
    fn resolve(args: &ModelArgs, file: &FileConfig) -> Result<Self> {
        // Flags win over the config file as a whole source, not field by field.
        let flagged = args.zoo.is_some() || args.model.is_some() || args.structure.is_some();
        let (zoo, model, structure, harmonic) = if flagged {
            (args.zoo.clone(), args.model.clone(), args.structure.clone(), args.harmonic.clone())
        } else {
            (
                file.zoo.clone(),
                file.model.clone(),
                file.structure.clone(),
                args.harmonic.clone().or_else(|| file.harmonic.clone()),
            )
        };
        let given = [zoo.is_some(), model.is_some(), structure.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if given != 1 {
            return Err(Error::Config(
                "give exactly one of --zoo, --model or --structure".into(),
            ));
        }
        if let Some(z) = zoo {
            return Ok(ModelSource::Zoo(z.parse()?));
        }
        if let Some(path) = model {
            return Ok(ModelSource::Model(read_json(&path)?));
        }
        let structure: StructureDescription = read_json(structure.as_deref().expect("checked above"))?;
        let harmonic = match harmonic.as_deref() {
            None | Some("solve") => None,
            Some(path) => Some(read_json(Path::new(path))?),
        };
        Ok(ModelSource::Parts { structure, harmonic })
    }

    fn load<T: Scalar>(&self) -> Result<Fractal<T>> {
        match self {
            ModelSource::Zoo(z) => z.build(),
            ModelSource::Model(m) => m.build(),
            ModelSource::Parts { structure, harmonic } => {
                let s = build_structure(structure)?;
                let hs = match harmonic {
                    Some(h) => h.build(&s)?,
                    None => solved_harmonic(&s)?,
                };
                Ok(Fractal::new(s, hs))
            }
        }
    }
}

/// Complete-graph form with equal weights from the renormalization solver.
fn solved_harmonic<T: Scalar>(s: &crate::structure::SelfSimilarStructure) -> Result<HarmonicStructure<T>> {
    let n0 = s.boundary_size();
    let d = Matrix::from_fn(n0, n0, |i, j| {
        if i == j {
            T::from_i64(1 - n0 as i64)
        } else {
            T::one()
        }
    });
    let renorm = solve_renormalization(s, &d)?;
    HarmonicStructure::new(s, d, renorm.weights, Projection::Mean)
}

fn is_invariant_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotHarmonic(_)
            | Error::NotProportional(_)
            | Error::NotRegular { .. }
            | Error::InvalidBoundaryForm(_)
            | Error::SingularInteriorBlock
            | Error::DisconnectedStructure { .. }
    )
}

fn verify<T: Scalar>(source: &ModelSource, ctx: &mut Ctx) -> Result<i32> {
    let fractal = match source.load::<T>() {
        Ok(f) => f,
        Err(e) if is_invariant_failure(&e) => {
            let report = json!({ "ok": false, "error": e.code(), "message": e.to_string() });
            ctx.emit(&report, &OutArgs { out_csv: None, out_json: None })?;
            return Ok(EXIT_VIOLATION);
        }
        Err(e) => return Err(e),
    };
    let hs = fractal.harmonic();
    let form = validate_boundary_form(hs.d())?;
    let ranks: Vec<usize> = hs
        .projected_matrices()
        .iter()
        .map(|a| {
            if T::EXACT {
                a.exact_rank()
            } else {
                crate::index::rank_estimate(a, DEFAULT_RANK_TOL).rank
            }
        })
        .collect();
    let report = json!({
        "ok": true,
        "n_symbols": fractal.n_symbols(),
        "boundary_size": fractal.boundary_size(),
        "boundary_form": form,
        "weights": hs.weights().iter().map(scalar_json).collect::<Vec<_>>(),
        "residual": hs.residual(),
        "projected_ranks": ranks,
        "nondegeneracy": zoo::nondegeneracy_check(hs),
    });
    ctx.emit(&report, &OutArgs { out_csv: None, out_json: None })?;
    Ok(EXIT_OK)
}

/// Parses a function spec:
/// `basis:qN` / `hN` (1-based boundary index), `boundary:v1,v2,...`,
/// `vertex:K:v0,v1,...` (values on `V_K`), `const:c`.
pub fn parse_function<T: Scalar>(fractal: &Fractal<T>, spec: &str) -> Result<PiecewiseHarmonicFn<T>> {
    let bad = |msg: &str| Error::Config(format!("function spec {spec:?}: {msg}"));
    let values = |text: &str| -> Result<Vec<T>> { text.split(',').map(|v| T::parse(v.trim())).collect() };
    let basis = |idx: &str| -> Result<PiecewiseHarmonicFn<T>> {
        let q: usize = idx.parse().map_err(|_| bad("bad boundary index"))?;
        if q == 0 || q > fractal.boundary_size() {
            return Err(Error::InvalidBoundaryIndex {
                index: q,
                boundary_size: fractal.boundary_size(),
            });
        }
        Ok(fractal.basis(q - 1))
    };
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "basis" => basis(rest.trim_start_matches(['q', 'h'])),
        k if k.starts_with('h') && rest.is_empty() => basis(&k[1..]),
        "boundary" => fractal.harmonic_fn(values(rest)?),
        "const" => Ok(fractal.constant(T::parse(rest)?)),
        "vertex" => {
            let (level, vals) = rest.split_once(':').ok_or_else(|| bad("expected vertex:K:values"))?;
            let level: usize = level.parse().map_err(|_| bad("bad level"))?;
            fractal.from_values(level, values(vals)?)
        }
        _ => Err(bad("unknown kind (basis, boundary, vertex, const)")),
    }
}

fn table_report<T: Scalar>(table: &CellMeasureTable<T>) -> serde_json::Value {
    let mut v = table.to_json();
    v["total"] = scalar_json(&table.total());
    v
}

fn energy_command<T: Scalar>(fractal: &Fractal<T>, a: EnergyArgs, ctx: &mut Ctx) -> Result<i32> {
    let level = ctx.level(a.level);
    let f = parse_function(fractal, &a.f)?;
    let g = a.g.as_deref().map(|s| parse_function(fractal, s)).transpose()?;
    let table = match &g {
        Some(g) => cell_energy_measure(fractal, &f, g, level)?,
        None => energy_measure(fractal, &f, level)?,
    };
    let mut report = table_report(&table);
    let energy = match &g {
        Some(g) => fractal.energy_pair(&f, g)?,
        None => fractal.energy(&f)?,
    };
    report["energy"] = scalar_json(&energy);
    let mut code = EXIT_OK;
    if a.audit {
        let g = g.ok_or_else(|| Error::Config("--audit needs --g".into()))?;
        let audit = inequality_audit(fractal, &f, &g, level)?;
        if audit.violations() > 0 {
            code = EXIT_VIOLATION;
        }
        report["audit"] = serde_json::to_value(audit)?;
    }
    write_csv(&a.out.out_csv, |buf| table.write_csv(buf))?;
    ctx.emit(&report, &a.out)?;
    Ok(code)
}

/// `coef*spec` or just `spec` (coefficient 1).
fn parse_component<T: Scalar>(fractal: &Fractal<T>, text: &str) -> Result<(T, PiecewiseHarmonicFn<T>)> {
    match text.split_once('*') {
        Some((c, spec)) => Ok((T::parse(c)?, parse_function(fractal, spec)?)),
        None => Ok((T::one(), parse_function(fractal, text)?)),
    }
}

fn dominant_command<T: Scalar>(fractal: &Fractal<T>, a: DominantArgs, ctx: &mut Ctx) -> Result<i32> {
    let level = ctx.level(a.level);
    let nu = if a.components.is_empty() {
        boundary_dominant(fractal, level)?
    } else {
        let comps = a
            .components
            .iter()
            .map(|c| parse_component(fractal, c))
            .collect::<Result<Vec<_>>>()?;
        dominant_measure(fractal, &comps, level)?
    };
    let mut report = table_report(nu.table());
    let mut code = EXIT_OK;
    if let Some(spec) = &a.ratio_of {
        let f = parse_function(fractal, spec)?;
        let z = rn_ratio(&energy_measure(fractal, &f, level)?, nu.table())?;
        if !z.is_absolutely_continuous() {
            code = EXIT_VIOLATION;
        }
        let ratios: serde_json::Map<String, serde_json::Value> = z
            .ratios()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let w = nu.table().word(i).to_string();
                (w, r.as_ref().map(scalar_json).unwrap_or(serde_json::Value::Null))
            })
            .collect();
        report["ratio"] = json!({
            "values": ratios,
            "zero_over_zero": z.zero_over_zero().iter().map(ToString::to_string).collect::<Vec<_>>(),
            "violations": z.violations().iter().map(ToString::to_string).collect::<Vec<_>>(),
        });
    }
    write_csv(&a.out.out_csv, |buf| nu.table().write_csv(buf))?;
    ctx.emit(&report, &a.out)?;
    Ok(code)
}

fn function_list<T: Scalar>(fractal: &Fractal<T>, specs: &[String]) -> Result<Vec<PiecewiseHarmonicFn<T>>> {
    if specs.is_empty() {
        Ok(fractal.boundary_basis())
    } else {
        specs.iter().map(|s| parse_function(fractal, s)).collect()
    }
}

fn index_command<T: Scalar>(fractal: &Fractal<T>, a: IndexArgs, ctx: &mut Ctx) -> Result<i32> {
    let level = ctx.level(a.level);
    let rank_tol = a.rank_tol.or(ctx.file.rank_tol).unwrap_or(DEFAULT_RANK_TOL);
    let delta = a.delta.or(ctx.file.delta).unwrap_or(DEFAULT_ESSSUP_DELTA);
    let functions = function_list(fractal, &a.functions)?;
    let nu = boundary_dominant(fractal, level)?;
    let field = index_field(&gram_field(fractal, &functions, &nu, level)?, rank_tol);
    let mut report = serde_json::to_value(index_estimate(&field, delta))?;
    let mut code = EXIT_OK;
    if let Some(spec) = &a.compare_with {
        let g = parse_function(fractal, spec)?;
        let nu_g = dominant_measure(fractal, &[(T::one(), g)], level)?;
        let stab = stability_check(fractal, &functions, &nu, &nu_g, level, rank_tol)?;
        if !stab.disagreements.is_empty() {
            code = EXIT_VIOLATION;
        }
        report["stability"] = serde_json::to_value(stab)?;
    }
    write_csv(&a.out.out_csv, |buf| field.write_csv(buf))?;
    ctx.emit(&report, &a.out)?;
    Ok(code)
}

/// `start:end:step` (inclusive) or a single level.
pub fn parse_levels(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad level ladder {text:?} (expected start:end:step)"));
    let parts: Vec<usize> = text
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, end, step) = match parts.as_slice() {
        [m] => (*m, *m, 1),
        [a, b] => (*a, *b, 1),
        [a, b, s] => (*a, *b, *s),
        _ => return Err(bad()),
    };
    if step == 0 || start > end {
        return Err(bad());
    }
    Ok((start..=end).step_by(step).collect())
}

fn derivative_command<T: Scalar>(fractal: &Fractal<T>, a: DerivativeArgs, ctx: &mut Ctx) -> Result<i32> {
    let levels = match a.levels.as_deref().or(ctx.file.levels.as_deref()) {
        Some(text) => parse_levels(text)?,
        None => vec![ctx.level(None)],
    };
    let f = parse_function(fractal, &a.f)?;
    let g = parse_function(fractal, &a.g)?;
    let ladder = derivative_ladder(fractal, &f, &g, &levels)?;
    let slack = 1e-9 * ladder.first().map(|s| s.energy.abs()).unwrap_or(0.0);
    let violated = ladder.iter().any(|s| s.gap < -slack)
        || ladder.windows(2).any(|w| w[1].s_m < w[0].s_m - slack);
    let top = *levels.last().expect("nonempty ladder");
    let field = slope_field(fractal, &f, &g, top)?;
    write_csv(&a.out.out_csv, |buf| field.write_csv(buf))?;
    let report = json!({ "levels": ladder, "csv_level": top });
    ctx.emit(&report, &a.out)?;
    Ok(if violated { EXIT_VIOLATION } else { EXIT_OK })
}

fn oscillation_command<T: Scalar>(fractal: &Fractal<T>, a: OscillationArgs, ctx: &mut Ctx) -> Result<i32> {
    let level = ctx.level(a.level);
    let depth = a.probe_depth.or(ctx.file.probe_depth).unwrap_or(DEFAULT_PROBE_DEPTH);
    let f = parse_function(fractal, &a.f)?;
    let report = oscillation_audit(fractal, &f, level, depth)?;
    write_csv(&a.out.out_csv, |buf| {
        writeln!(buf, "word,osc,scale,ratio")?;
        for c in &report.cells {
            let ratio = c.ratio.map(|r| format!("{r:e}")).unwrap_or_default();
            writeln!(buf, "{},{:e},{:e},{ratio}", c.word, c.osc, c.scale)?;
        }
        Ok(())
    })?;
    ctx.emit(&serde_json::to_value(&report)?, &a.out)?;
    Ok(EXIT_OK)
}

fn zoo_command(command: ZooCommand, ctx: &mut Ctx) -> Result<i32> {
    match command {
        ZooCommand::List => {
            for (name, about) in zoo::family_list() {
                writeln!(ctx.stdout, "{name:<12} {about}")?;
            }
        }
        ZooCommand::Emit { family, d, l, r, out } => {
            let fam = match family.as_str() {
                "gasket" => ZooFamily::Gasket { d, l },
                "hata" => ZooFamily::Hata {
                    r: crate::scalar::parse_rational(&r)?,
                },
                other if other.contains(':') => other.parse()?,
                other => return Err(Error::Config(format!("unknown family {other:?}"))),
            };
            let text = serde_json::to_string_pretty(&fam.model()?)?;
            match out {
                Some(path) => fs::write(path, format!("{text}\n"))?,
                None => writeln!(ctx.stdout, "{text}")?,
            }
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ladders() {
        assert_eq!(parse_levels("2:8:2").unwrap(), vec![2, 4, 6, 8]);
        assert_eq!(parse_levels("3").unwrap(), vec![3]);
        assert_eq!(parse_levels("1:3").unwrap(), vec![1, 2, 3]);
        assert!(parse_levels("4:2:1").is_err());
        assert!(parse_levels("1:2:0").is_err());
    }

    #[test]
    fn function_specs() {
        let sg = zoo::gasket(2, 2).unwrap();
        assert_eq!(parse_function(&sg, "basis:q2").unwrap(), sg.basis(1));
        assert_eq!(parse_function(&sg, "h3").unwrap(), sg.basis(2));
        assert_eq!(
            parse_function(&sg, "boundary:1,1/2,0").unwrap().values()[1],
            crate::scalar::rational(1, 2)
        );
        let v = parse_function(&sg, "vertex:1:1,0,0,0.5,0.5,0").unwrap();
        assert_eq!(v.level(), 1);
        assert!(parse_function(&sg, "basis:q4").is_err());
        assert!(parse_function(&sg, "vertex:1:1,2").is_err());
        assert!(parse_function(&sg, "nope").is_err());
    }
}
