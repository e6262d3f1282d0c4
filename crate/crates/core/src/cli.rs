//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use crate::certify::{approximation_report, PipelineOptions, DEFAULT_CERT_TOL};
use crate::error::{QmcError, Result};
use crate::exact::{qmc_value, state_energy, MAX_EXACT_QUBITS};
use crate::graph::{parse_graph_file, Family, WeightedGraph};
use crate::moment::{build_lasserre, Level, ProblemSummary};
use crate::product::{expected_product_energy, local_vectors, sample_best};
use crate::rounding::{
    assemble_matching_state, edge_values, max_weight_matching, repair_degree_bound, threshold, LargeEdge,
    MatchingResult,
};
use crate::sdp::{solve_with, SdpSolution, SolverOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qmc", version, about = "Quantum Max Cut relaxations, rounding and certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a moment relaxation and report its value.
    Solve(RunArgs),
    /// Solve the level-2 relaxation and round it to quantum states.
    Round(RunArgs),
    /// Compute the exact optimum by dense diagonalization.
    Exact(RunArgs),
    /// Run the full pipeline and every certificate.
    Certify(RunArgs),
    /// Run the pipeline over many seeds of a graph family.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Edge-list graph file.
    pub input: Option<PathBuf>,
    /// Generate the graph instead, e.g. `star:5` or `gnp:8:0.5`.
    #[arg(long)]
    pub family: Option<String>,
    /// Relaxation level: 1, 1.5 or 2.
    #[arg(long, default_value = "2")]
    pub level: String,
    /// Degree bound of the large-edge graph.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Product-state samples.
    #[arg(long, default_value_t = 1024)]
    pub samples: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the per-iteration solver trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of instances; instance `k` uses seed `seed + k`.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name =
        path.file_name().ok_or_else(|| QmcError::Argument(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

impl RunArgs {
    fn graph(&self) -> Result<WeightedGraph> {
        match (&self.input, &self.family) {
            (Some(p), None) => parse_graph_file(p),
            (None, Some(f)) => Family::parse(f)?.generate(self.seed),
            _ => Err(QmcError::Argument("give exactly one of an input file or --family".into())),
        }
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            trace: self.trace.is_some(),
            ..SolverOptions::default()
        }
    }

    fn pipeline(&self) -> PipelineOptions {
        PipelineOptions {
            d: self.d,
            seed: self.seed,
            samples: self.samples,
            solver: self.solver(),
            cert_tol: DEFAULT_CERT_TOL,
        }
    }
}

#[derive(Serialize)]
struct SolveReport {
    level: String,
    problem: ProblemSummary,
    converged: bool,
    objective: f64,
    dual_objective: f64,
    primal_residual: f64,
    psd_residual: f64,
    iterations: usize,
    edge_values: Vec<(usize, usize, f64)>,
}

fn solve_report(
    level: Level,
    summary: ProblemSummary,
    sol: &SdpSolution,
    converged: bool,
    p: &crate::moment::MomentProblem,
) -> Result<SolveReport> {
    Ok(SolveReport {
        level: level.to_string(),
        problem: summary,
        converged,
        objective: sol.objective,
        dual_objective: sol.dual_objective,
        primal_residual: sol.primal_residual,
        psd_residual: sol.psd_residual,
        iterations: sol.iterations,
        edge_values: edge_values(sol, p)?.pairs().collect(),
    })
}

fn cmd_solve(a: &RunArgs) -> Result<i32> {
    let level = Level::parse(&a.level)?;
    let g = a.graph()?;
    let p = build_lasserre(&g, level)?;
    let (sol, converged) = match solve_with(&p, &a.solver()) {
        Ok(s) => (s, true),
        Err(QmcError::NonConvergence { best, .. }) => (*best, false),
        Err(e) => return Err(e),
    };
    if let Some(t) = &a.trace {
        write_atomic(t, &sol.trace_csv())?;
    }
    emit(&a.out, &to_json(&solve_report(level, p.summary(), &sol, converged, &p)?)?)?;
    Ok(if converged { EXIT_OK } else { EXIT_NON_CONVERGENCE })
}

#[derive(Serialize)]
struct RoundReport {
    objective: f64,
    d: usize,
    alpha: f64,
    #[serde(rename = "L")]
    large: Vec<LargeEdge>,
    repaired: Vec<LargeEdge>,
    matching: MatchingResult,
    matching_energy: f64,
    product_expected: f64,
    product_best: f64,
    product_bloch: Vec<[f64; 3]>,
    samples: usize,
    seed: u64,
    best_energy: f64,
}

fn cmd_round(a: &RunArgs) -> Result<i32> {
    if Level::parse(&a.level)? != Level::Two {
        return Err(QmcError::UnsupportedLevel(format!(
            "rounding needs the level-2 relaxation, got {}",
            a.level
        )));
    }
    let g = a.graph()?;
    let p = build_lasserre(&g, Level::Two)?;
    let sol = solve_with(&p, &a.solver())?;
    if let Some(t) = &a.trace {
        write_atomic(t, &sol.trace_csv())?;
    }
    let vals = edge_values(&sol, &p)?;
    let mut gl = threshold(&vals, &g, a.d)?;
    let repaired = repair_degree_bound(&mut gl);
    let matching = max_weight_matching(g.num_vertices(), &gl.weighted_edges())?;
    let matching_energy = state_energy(&assemble_matching_state(&matching, g.num_vertices())?, &g)?;
    let sampled = sample_best(&local_vectors(&sol, &p)?, &g, a.seed, a.samples)?;
    let bloch = match &sampled.best {
        crate::exact::RoundedState::Product { bloch } => bloch.clone(),
        _ => unreachable!("product sampling returns product states"),
    };
    let report = RoundReport {
        objective: sol.objective,
        d: a.d,
        alpha: gl.alpha,
        large: gl.edges,
        repaired,
        matching,
        matching_energy,
        product_expected: expected_product_energy(&vals, &g)?,
        product_best: sampled.best_energy,
        product_bloch: bloch,
        samples: a.samples,
        seed: a.seed,
        best_energy: matching_energy.max(sampled.best_energy),
    };
    emit(&a.out, &to_json(&report)?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ExactReport {
    n: usize,
    edges: usize,
    lambda_max: f64,
}

fn cmd_exact(a: &RunArgs) -> Result<i32> {
    let g = a.graph()?;
    if g.num_vertices() > MAX_EXACT_QUBITS {
        return Err(QmcError::SizeCap(format!(
            "exact diagonalization limited to {MAX_EXACT_QUBITS} qubits, got {}",
            g.num_vertices()
        )));
    }
    let report = ExactReport { n: g.num_vertices(), edges: g.edges().len(), lambda_max: qmc_value(&g)? };
    emit(&a.out, &to_json(&report)?)?;
    Ok(EXIT_OK)
}

fn cmd_certify(a: &RunArgs) -> Result<i32> {
    let g = a.graph()?;
    let report = approximation_report(&g, &a.pipeline())?;
    emit(&a.out, &report.to_json()?)?;
    eprint!("{}", report.summary_text());
    Ok(if report.passed { EXIT_OK } else { EXIT_CERTIFICATION })
}

#[derive(Serialize)]
struct BenchRow {
    index: usize,
    seed: u64,
    n: usize,
    edges: usize,
    sdp: f64,
    lambda_max: Option<f64>,
    matching: f64,
    product_best: f64,
    best_vs_sdp: f64,
    best_vs_exact: Option<f64>,
    passed: bool,
}

#[derive(Serialize)]
struct BenchReport {
    family: String,
    rows: Vec<BenchRow>,
    min_best_vs_sdp: f64,
    min_best_vs_exact: Option<f64>,
    guarantee: f64,
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.9}"))
}

fn cmd_bench(b: &BenchArgs) -> Result<i32> {
    let family = b
        .run
        .family
        .as_deref()
        .ok_or_else(|| QmcError::Argument("bench needs --family".into()))
        .and_then(Family::parse)?;
    let mut rows = Vec::with_capacity(b.count);
    let mut guarantee = 0.0;
    for k in 0..b.count {
        let seed = b.run.seed.wrapping_add(k as u64);
        let g = family.generate(seed)?;
        let mut opts = b.run.pipeline();
        opts.seed = seed;
        let r = approximation_report(&g, &opts)?;
        info!("instance {k}: best/sdp = {:.6}", r.ratios.best_vs_sdp);
        guarantee = r.ratios.guarantee;
        rows.push(BenchRow {
            index: k,
            seed,
            n: r.instance.n,
            edges: r.instance.edges,
            sdp: r.sdp.objective,
            lambda_max: r.exact.lambda_max,
            matching: r.rounding.energies.matching_state,
            product_best: r.product.best_sample,
            best_vs_sdp: r.ratios.best_vs_sdp,
            best_vs_exact: r.ratios.best_vs_exact,
            passed: r.passed,
        });
    }
    let min_sdp = rows.iter().map(|r| r.best_vs_sdp).fold(f64::INFINITY, f64::min);
    let min_exact = rows.iter().filter_map(|r| r.best_vs_exact).reduce(f64::min);
    let mut csv = String::from(
        "index,seed,n,edges,sdp,lambda_max,matching,product_best,best_vs_sdp,best_vs_exact,passed\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.9},{},{:.9},{:.9},{:.9},{},{}",
            r.index,
            r.seed,
            r.n,
            r.edges,
            r.sdp,
            csv_opt(r.lambda_max),
            r.matching,
            r.product_best,
            r.best_vs_sdp,
            csv_opt(r.best_vs_exact),
            r.passed
        );
    }
    print!("{csv}");
    let all_passed = rows.iter().all(|r| r.passed);
    if let Some(out) = &b.run.out {
        let report = BenchReport {
            family: family.name(),
            rows,
            min_best_vs_sdp: min_sdp,
            min_best_vs_exact: min_exact,
            guarantee,
        };
        write_atomic(out, &to_json(&report)?)?;
    }
    if min_sdp < guarantee {
        warn!("minimum ratio {min_sdp:.6} is below {guarantee:.6}");
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_CERTIFICATION })
}

pub fn exit_code(e: &QmcError) -> i32 {
    match e {
        QmcError::Argument(_)
        | QmcError::UnsupportedLevel(_)
        | QmcError::NotInBasis(_)
        | QmcError::Graph(_)
        | QmcError::Parse { .. }
        | QmcError::Dimension(_)
        | QmcError::SizeCap(_)
        | QmcError::Domain(_)
        | QmcError::Io(_) => EXIT_INPUT,
        QmcError::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        QmcError::DegreeBound { .. } => EXIT_CERTIFICATION,
        QmcError::Numeric(_) | QmcError::UnsupportedStructure(_) | QmcError::Json(_) => EXIT_FAILURE,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Round(a) => cmd_round(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Bench(b) => cmd_bench(b),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
