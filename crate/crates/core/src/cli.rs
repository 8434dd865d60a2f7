//! Command-line experiment driver.
//!
//! Every subcommand reads a config, writes its artifacts into the output
//! directory together with `manifest.toml`, and exits with 0 on success or a
//! true verdict, 1 on invalid input, and 2 on numerical failure or a false
//! verdict.

use crate::analysis::{
    condition_margin, default_tolerance, off_center_bump, starshape_report, superlevel_boundary,
    StarshapeReport,
};
use crate::config::{Diagnostic, Experiment, ExperimentConfig, FactorSpec};
use crate::domains::{star_defect, StarshapedRing};
use crate::error::{Error, Result};
use crate::oracle::{compare_round, RadialPotential};
use crate::solver::{solve_linear, solve_qlaplace, write_dump, RingGrid, ScalarField, SolveOutcome};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

/// Environment variable bounding the number of concurrent sweep runs.
pub const THREADS_ENV: &str = "STARCAP_THREADS";

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_FAILED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "starcap", version, about = "Capacitary potentials of starshaped rings and starshapedness checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Dirichlet problem and write the field dump.
    Solve(RunArgs),
    /// Solve, then check that every superlevel set is starshaped.
    Verify(RunArgs),
    /// Compare a round-annulus solve with the radial quadrature potential.
    Oracle(RunArgs),
    /// Sample the dilation condition on the right-hand side.
    CheckCondition(RunArgs),
    /// Run verify over a grid of exponents, factors and grid sizes.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Grid size `MxK` (overrides `solver.grid`).
    #[arg(long, value_name = "MxK")]
    pub grid: Option<String>,
    /// Exponent (overrides `solver.q`).
    #[arg(long, value_name = "FLOAT")]
    pub q: Option<f64>,
    /// Verdict or margin tolerance.
    #[arg(long, value_name = "FLOAT")]
    pub tol: Option<f64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Verify(_) => "verify",
            Command::Oracle(_) => "oracle",
            Command::CheckCondition(_) => "check-condition",
            Command::Sweep(_) => "sweep",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a)
            | Command::Verify(a)
            | Command::Oracle(a)
            | Command::CheckCondition(a)
            | Command::Sweep(a) => a,
        }
    }
}

/// Exit code for an error: numerical failures are 2, everything else 1.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::LinearSolve { .. } | Error::NotFinite { .. } | Error::Factorization(_) | Error::RootFinding { .. } => {
            EXIT_FAILED
        }
        _ => EXIT_INVALID,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

struct Context {
    command: &'static str,
    args: RunArgs,
    config: ExperimentConfig,
    config_text: String,
    out: PathBuf,
    started: Instant,
    files: Vec<String>,
}

impl Context {
    fn create(&mut self, name: &str) -> Result<BufWriter<fs::File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(fs::File::create(self.out.join(name))?))
    }

    fn tol(&self) -> Option<f64> {
        self.args.tol.or(self.config.analysis.tol)
    }

    fn experiment(&self) -> Result<Experiment> {
        self.config.experiment()
    }

    fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let file = self.create(name)?;
        let mut writer = csv::Writer::from_writer(file);
        for row in rows {
            writer.serialize(row).map_err(|e| Error::Config(format!("writing {name}: {e}")))?;
        }
        writer.flush()?;
        Ok(())
    }

    fn finish(&mut self, exit: u8) -> Result<u8> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            starcap_version: &'a str,
            dump_format: &'a str,
            config: String,
            config_sha256: String,
            seed: u64,
            grid_override: Option<&'a str>,
            q_override: Option<f64>,
            tol_override: Option<f64>,
            exit_code: u8,
            wall_time_s: f64,
            files: &'a [String],
        }
        let manifest = Manifest {
            command: self.command,
            starcap_version: env!("CARGO_PKG_VERSION"),
            dump_format: "starcap field dump v1",
            config: self.args.config.display().to_string(),
            config_sha256: sha256_hex(self.config_text.as_bytes()),
            seed: self.config.run.seed,
            grid_override: self.args.grid.as_deref(),
            q_override: self.args.q,
            tol_override: self.args.tol,
            exit_code: exit,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            files: &self.files,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(self.out.join("manifest.toml"), text)?;
        Ok(exit)
    }
}

fn execute(cli: &Cli) -> Result<u8> {
    let args = cli.command.args().clone();
    let (mut config, config_text) = ExperimentConfig::load(&args.config)?;
    if let Some(grid) = &args.grid {
        config.solver.grid = grid.clone();
    }
    if let Some(q) = args.q {
        config.solver.q = q;
    }
    if let Some(tol) = args.tol {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!("--tol must be non-negative, got {tol}")));
        }
    }
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => config.base_dir.join(&config.output.dir),
    };
    let mut ctx = Context {
        command: cli.command.name(),
        args,
        config,
        config_text,
        out,
        started: Instant::now(),
        files: Vec::new(),
    };
    // validate before touching the filesystem
    ctx.experiment()?;
    fs::create_dir_all(&ctx.out)?;
    let result = match &cli.command {
        Command::Solve(_) => cmd_solve(&mut ctx),
        Command::Verify(_) => cmd_verify(&mut ctx),
        Command::Oracle(_) => cmd_oracle(&mut ctx),
        Command::CheckCondition(_) => cmd_check_condition(&mut ctx),
        Command::Sweep(_) => cmd_sweep(&mut ctx),
    };
    match result {
        Ok(exit) => ctx.finish(exit),
        Err(err) => {
            ctx.finish(exit_code(&err))?;
            Err(err)
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Short digest of the ring's sampled boundaries and factor.
pub fn ring_hash(ring: &StarshapedRing) -> String {
    let mut text = String::new();
    for (name, rho) in [("outer", ring.outer()), ("inner", ring.inner())] {
        text.push_str(name);
        for v in rho.samples() {
            let _ = write!(text, " {v:e}");
        }
        text.push('\n');
    }
    let _ = write!(text, "factor {}", ring.factor());
    sha256_hex(text.as_bytes())[..16].to_string()
}

/// Solves with the linear path at `q = 2` and Picard iteration otherwise.
pub fn solve(exp: &Experiment, grid: &RingGrid) -> Result<SolveOutcome> {
    if exp.solver.q == 2.0 {
        solve_linear(grid, &exp.rhs, &exp.solver)
    } else {
        solve_qlaplace(grid, &exp.rhs, &exp.solver)
    }
}

fn write_log<W: Write>(out: &mut W, command: &str, exp: &Experiment, outcome: &SolveOutcome, secs: f64) -> Result<()> {
    let (m, k) = exp.grid;
    writeln!(out, "# starcap solve log")?;
    writeln!(out, "command {command}")?;
    writeln!(out, "ring {}", exp.ring)?;
    writeln!(out, "ring_hash {}", ring_hash(&exp.ring))?;
    writeln!(out, "grid {m}x{k}")?;
    writeln!(out, "q {}", exp.solver.q)?;
    writeln!(out, "rhs {}", exp.rhs.label())?;
    writeln!(
        out,
        "epsilon {} picard_tol {} max_picard {} linear_tol {}",
        exp.solver.epsilon, exp.solver.picard_tol, exp.solver.max_picard, exp.solver.linear_tol
    )?;
    for (it, (update, residual)) in outcome.update_history.iter().zip(&outcome.linear_residuals).enumerate() {
        writeln!(out, "iteration {} update {update:.6e} linear_residual {residual:.3e}", it + 1)?;
    }
    writeln!(out, "converged {}", outcome.converged)?;
    if !outcome.converged {
        writeln!(out, "NOT CONVERGED after {} iterations", outcome.iterations)?;
    }
    writeln!(out, "iterations {}", outcome.iterations)?;
    writeln!(out, "final_update {:e}", outcome.final_update)?;
    writeln!(out, "wall_time_s {secs:.3}")?;
    Ok(())
}

fn solve_and_log(ctx: &mut Context, exp: &Experiment) -> Result<(RingGrid, SolveOutcome)> {
    let grid = RingGrid::new(&exp.ring, exp.grid.0, exp.grid.1)?;
    let start = Instant::now();
    let outcome = solve(exp, &grid)?;
    let secs = start.elapsed().as_secs_f64();
    let mut log = ctx.create("solve.log")?;
    write_log(&mut log, ctx.command, exp, &outcome, secs)?;
    log.flush()?;
    let mut dump = ctx.create("field.dump")?;
    write_dump(&outcome.field, &mut dump)?;
    dump.flush()?;
    Ok((grid, outcome))
}

fn cmd_solve(ctx: &mut Context) -> Result<u8> {
    let exp = ctx.experiment()?;
    let (_, outcome) = solve_and_log(ctx, &exp)?;
    println!(
        "solve: converged={} iterations={} final_update={:e}",
        outcome.converged, outcome.iterations, outcome.final_update
    );
    Ok(if outcome.converged { EXIT_OK } else { EXIT_FAILED })
}

/// A solve followed by the starshapedness analysis.
#[derive(Debug, Clone)]
pub struct Verification {
    pub outcome: SolveOutcome,
    /// Sup-norm distance to the solve on the half-resolution grid, when measured.
    pub refinement_error: Option<f64>,
    pub report: StarshapeReport,
    pub analysed: ScalarField,
}

/// Solves `exp`, measures the refinement error unless `tol` is given, and
/// reports on the solution (or on the injected diagnostic field).
pub fn verify_experiment(
    exp: &Experiment,
    grid: &RingGrid,
    outcome: SolveOutcome,
    tol: Option<f64>,
    diagnostic: Diagnostic,
    bump_center: [f64; 2],
) -> Result<Verification> {
    let refinement_error = match tol {
        Some(_) => None,
        None => Some(refinement_error(exp, &outcome.field)?),
    };
    let tol = tol.unwrap_or_else(|| default_tolerance(refinement_error.unwrap_or(0.0)));
    let analysed = match diagnostic {
        Diagnostic::Bump => off_center_bump(grid, bump_center)?,
        _ => outcome.field.clone(),
    };
    let report = starshape_report(&analysed, tol)?;
    Ok(Verification { outcome, refinement_error, report, analysed })
}

/// Sup-norm difference between the solve on `(m/2, k/2)` and `fine`, measured
/// at the coarse nodes.
pub fn refinement_error(exp: &Experiment, fine: &ScalarField) -> Result<f64> {
    let (m, k) = exp.grid;
    if m % 2 != 0 || m / 2 < 8 || k / 2 < 4 {
        return Err(Error::invalid(format!(
            "grid {m}x{k} is too small to measure the refinement error (need even m >= 16 and k >= 8); pass --tol"
        )));
    }
    let coarse_grid = RingGrid::new(&exp.ring, m / 2, k / 2)?;
    let coarse = solve(exp, &coarse_grid)?;
    if !coarse.converged {
        return Err(Error::invalid("the half-resolution solve used for the tolerance did not converge"));
    }
    coarse.field.refinement_difference(fine)
}

#[derive(Debug, Serialize)]
struct LevelRow<'a> {
    experiment: &'a str,
    level: f64,
    rho_min: f64,
    rho_max: f64,
    star_defect: f64,
    envelope_defect: f64,
    monotonicity_defect: f64,
    normal_defect: f64,
    tolerance: f64,
    refinement_error: f64,
    verdict: bool,
    converged: bool,
    iterations: usize,
    q: f64,
    m: usize,
    k: usize,
    factor: String,
    ring_hash: &'a str,
    rhs: &'a str,
    epsilon: f64,
    picard_tol: f64,
    linear_tol: f64,
    max_picard: usize,
    seed: u64,
    diagnostic: &'a str,
    note: String,
}

fn diagnostic_name(d: Diagnostic) -> &'static str {
    match d {
        Diagnostic::None => "none",
        Diagnostic::Bump => "bump",
        Diagnostic::Constant => "constant",
    }
}

fn cmd_verify(ctx: &mut Context) -> Result<u8> {
    let exp = ctx.experiment()?;
    let (grid, outcome) = solve_and_log(ctx, &exp)?;
    let run = ctx.config.run.clone();
    let v = verify_experiment(&exp, &grid, outcome, ctx.tol(), run.diagnostic, run.bump_center)?;
    let hash = ring_hash(&exp.ring);
    let experiment = ctx
        .args
        .config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let mut rows = Vec::new();
    for &level in &ctx.config.analysis.levels {
        let (rho_min, rho_max, defect, note) = match superlevel_boundary(&v.analysed, level) {
            Ok(rho) => {
                let (lo, hi) = rho.min_max(1);
                match star_defect(&rho, [0.0, 0.0], 4 * grid.m()) {
                    Ok(d) => (lo, hi, d, String::new()),
                    Err(e) => (lo, hi, f64::NAN, e.to_string()),
                }
            }
            Err(e) => (f64::NAN, f64::NAN, f64::NAN, e.to_string()),
        };
        rows.push(LevelRow {
            experiment: &experiment,
            level,
            rho_min,
            rho_max,
            star_defect: defect,
            envelope_defect: v.report.envelope_defect,
            monotonicity_defect: v.report.monotonicity_defect,
            normal_defect: v.report.normal_defect,
            tolerance: v.report.tolerance,
            refinement_error: v.refinement_error.unwrap_or(f64::NAN),
            verdict: v.report.verdict,
            converged: v.outcome.converged,
            iterations: v.outcome.iterations,
            q: exp.solver.q,
            m: grid.m(),
            k: grid.k(),
            factor: exp.ring.factor().to_string(),
            ring_hash: &hash,
            rhs: exp.rhs.label(),
            epsilon: exp.solver.epsilon,
            picard_tol: exp.solver.picard_tol,
            linear_tol: exp.solver.linear_tol,
            max_picard: exp.solver.max_picard,
            seed: run.seed,
            diagnostic: diagnostic_name(run.diagnostic),
            note,
        });
    }
    ctx.write_csv("verify.csv", &rows)?;
    let r = &v.report;
    println!(
        "verify: verdict={} envelope_defect={:e} monotonicity_defect={:e} normal_defect={:e} tol={:e} converged={}",
        r.verdict, r.envelope_defect, r.monotonicity_defect, r.normal_defect, r.tolerance, v.outcome.converged
    );
    Ok(if r.verdict && v.outcome.converged { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_oracle(ctx: &mut Context) -> Result<u8> {
    let exp = ctx.experiment()?;
    let (r1, r0) = exp
        .ring
        .round_radii()
        .ok_or_else(|| Error::invalid("oracle needs a round annulus (constant inner and outer radius)"))?;
    if !exp.rhs.is_zero() {
        return Err(Error::invalid("oracle covers the zero right-hand side only"));
    }
    if ctx.config.run.diagnostic != Diagnostic::None {
        return Err(Error::invalid("oracle does not support diagnostic modes"));
    }
    let factor = exp.ring.factor().clone();
    let q = exp.solver.q;
    let n = ctx.config.oracle.n;
    let table = RadialPotential::new(factor.clone(), n, q, r1, r0)?.table(ctx.config.oracle.resolution)?;

    #[derive(Serialize)]
    struct TableRow {
        r: f64,
        u: f64,
    }
    let rows: Vec<TableRow> = table.iter().map(|&(r, u)| TableRow { r, u }).collect();
    ctx.write_csv("oracle_table.csv", &rows)?;

    let (_, outcome) = solve_and_log(ctx, &exp)?;
    let planar = RadialPotential::new(factor.clone(), 2, q, r1, r0)?;
    let max_error = compare_round(&outcome.field, &planar)?;

    #[derive(Serialize)]
    struct Summary {
        n_table: usize,
        q: f64,
        factor: String,
        r1: f64,
        r0: f64,
        m: usize,
        k: usize,
        max_error: f64,
        converged: bool,
        iterations: usize,
        ring_hash: String,
    }
    let summary = Summary {
        n_table: n,
        q,
        factor: factor.to_string(),
        r1,
        r0,
        m: exp.grid.0,
        k: exp.grid.1,
        max_error,
        converged: outcome.converged,
        iterations: outcome.iterations,
        ring_hash: ring_hash(&exp.ring),
    };
    ctx.write_csv("oracle.csv", &[summary])?;
    println!("oracle: max_error={max_error:e} converged={}", outcome.converged);
    Ok(if outcome.converged { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_check_condition(ctx: &mut Context) -> Result<u8> {
    let exp = ctx.experiment()?;
    let tol = ctx.args.tol.unwrap_or(ctx.config.analysis.condition_tol);
    let samples = ctx.config.condition_samples();
    let result = condition_margin(&exp.rhs, exp.ring.factor(), exp.solver.q, &exp.ring, samples)?;
    let holds = result.margin >= -tol;

    #[derive(Serialize)]
    struct Row {
        margin: f64,
        tolerance: f64,
        holds: bool,
        x1: f64,
        x2: f64,
        tau: f64,
        s: f64,
        v1: f64,
        v2: f64,
        q: f64,
        factor: String,
        ring_hash: String,
        rhs: String,
        x_count: usize,
        tau_count: usize,
        s_count: usize,
        v_count: usize,
        seed: u64,
    }
    let a = result.argmin;
    let row = Row {
        margin: result.margin,
        tolerance: tol,
        holds,
        x1: a.x[0],
        x2: a.x[1],
        tau: a.tau,
        s: a.s,
        v1: a.v[0],
        v2: a.v[1],
        q: exp.solver.q,
        factor: exp.ring.factor().to_string(),
        ring_hash: ring_hash(&exp.ring),
        rhs: exp.rhs.label().to_string(),
        x_count: samples.x_count,
        tau_count: samples.tau_count,
        s_count: samples.s_count,
        v_count: samples.v_count,
        seed: ctx.config.run.seed,
    };
    ctx.write_csv("condition.csv", &[row])?;
    println!("check-condition: margin={:e} holds={holds}", result.margin);
    Ok(if holds { EXIT_OK } else { EXIT_FAILED })
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    index: usize,
    q: f64,
    factor: String,
    m: usize,
    k: usize,
    ring_hash: String,
    rhs: String,
    epsilon: f64,
    picard_tol: f64,
    linear_tol: f64,
    max_picard: usize,
    converged: bool,
    iterations: usize,
    refinement_error: f64,
    tolerance: f64,
    envelope_defect: f64,
    monotonicity_defect: f64,
    normal_defect: f64,
    verdict: bool,
    seed: u64,
    error: String,
}

fn sweep_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

fn cmd_sweep(ctx: &mut Context) -> Result<u8> {
    let cfg = &ctx.config;
    let sweep = cfg.sweep.clone().ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    let qs = sweep.q.unwrap_or_else(|| vec![cfg.solver.q]);
    let factors = sweep.factors.unwrap_or_else(|| vec![cfg.factor.clone()]);
    let grids = sweep.grids.unwrap_or_else(|| vec![cfg.solver.grid.clone()]);
    if qs.is_empty() || factors.is_empty() || grids.is_empty() {
        return Err(Error::Config("sweep lists must not be empty".into()));
    }
    let mut combos: Vec<(f64, FactorSpec, String)> = Vec::new();
    for g in &grids {
        for f in &factors {
            for &q in &qs {
                combos.push((q, f.clone(), g.clone()));
            }
        }
    }
    // reject malformed combinations up front
    for (q, f, g) in &combos {
        cfg.experiment_with(f, *q, g)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = sweep_threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let tol = ctx.args.tol.or(cfg.analysis.tol);
    let rows: Vec<SweepRow> = pool.install(|| {
        combos
            .par_iter()
            .enumerate()
            .map(|(index, (q, f, g))| sweep_row(cfg, index, *q, f, g, tol))
            .collect()
    });
    ctx.write_csv("sweep.csv", &rows)?;
    let passed = rows.iter().filter(|r| r.verdict && r.converged && r.error.is_empty()).count();
    println!("sweep: {passed}/{} runs verified", rows.len());
    Ok(if passed == rows.len() { EXIT_OK } else { EXIT_FAILED })
}

fn sweep_row(cfg: &ExperimentConfig, index: usize, q: f64, f: &FactorSpec, g: &str, tol: Option<f64>) -> SweepRow {
    let exp = cfg.experiment_with(f, q, g).expect("combinations are validated before the sweep");
    let mut row = SweepRow {
        index,
        q,
        factor: exp.ring.factor().to_string(),
        m: exp.grid.0,
        k: exp.grid.1,
        ring_hash: ring_hash(&exp.ring),
        rhs: exp.rhs.label().to_string(),
        epsilon: exp.solver.epsilon,
        picard_tol: exp.solver.picard_tol,
        linear_tol: exp.solver.linear_tol,
        max_picard: exp.solver.max_picard,
        converged: false,
        iterations: 0,
        refinement_error: f64::NAN,
        tolerance: f64::NAN,
        envelope_defect: f64::NAN,
        monotonicity_defect: f64::NAN,
        normal_defect: f64::NAN,
        verdict: false,
        seed: cfg.run.seed,
        error: String::new(),
    };
    let result = RingGrid::new(&exp.ring, exp.grid.0, exp.grid.1).and_then(|grid| {
        let outcome = solve(&exp, &grid)?;
        verify_experiment(&exp, &grid, outcome, tol, cfg.run.diagnostic, cfg.run.bump_center)
    });
    match result {
        Ok(v) => {
            row.converged = v.outcome.converged;
            row.iterations = v.outcome.iterations;
            row.refinement_error = v.refinement_error.unwrap_or(f64::NAN);
            row.tolerance = v.report.tolerance;
            row.envelope_defect = v.report.envelope_defect;
            row.monotonicity_defect = v.report.monotonicity_defect;
            row.normal_defect = v.report.normal_defect;
            row.verdict = v.report.verdict;
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}
