//! Command-line pipelines. Every command fills a [`Report`]; artifacts go to
//! the paths given with `-o` and friends.

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use hardcomplete_core::factorize::bounded_factorize;
use hardcomplete_core::gadgets::{
    csp_completeness, csp_gadget, partition_completeness, partition_gadget, Amplify, Family,
    GramConstraintSystem, Label, Reduction, VectorAssignment,
};
use hardcomplete_core::gram_decode::{
    decode_assignment, decode_partition, max_product_change, variable_labels,
};
use hardcomplete_core::graph::{
    coloring_factorization, completion_from_coloring, graph_to_partial, pad_partial, Coloring,
    Graph,
};
use hardcomplete_core::matrix::{
    coherence, consistency, numerical_rank, revealed_errors, Factorization, PartialMatrix,
    DEFAULT_RANK_TOL,
};
use hardcomplete_core::oracle::{brute_coloring, brute_one_in_k, brute_partition};
use hardcomplete_core::rng;
use hardcomplete_core::rounding::{
    coloring_bound, decode_coloring, decode_independent_set, expected_size_bound_halved,
    expected_size_bound_stated, filter_accurate_submatrix, ConeRoundingParams, NetColoringParams,
};
use hardcomplete_core::solve::{complete_bounded_rank, solve_gram_system, SolverConfig};
use serde_json::{json, Value};

use crate::formats;
use crate::report::{num, Report, StageError};

/// Environment variable read when `--seed` is absent.
pub const SEED_ENV: &str = "HARDCOMPLETE_SEED";

/// Largest matrix side handed to the SDP inside `roundtrip graph`; larger
/// graphs use the indicator factorization of the coloring.
const SDP_ROUNDTRIP_LIMIT: usize = 200;

#[derive(Parser, Debug)]
#[command(
    name = "hardcomplete",
    version,
    about = "Reductions, completions, factorizations and decoders for low-rank matrix completion"
)]
pub struct Cli {
    /// Base seed for every randomized step (falls back to $HARDCOMPLETE_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a partial matrix or Gram-constraint system from an instance.
    Reduce {
        #[command(subcommand)]
        kind: ReduceKind,
    },
    /// Search for a completion with the alternating heuristics.
    Complete {
        #[command(subcommand)]
        kind: CompleteKind,
    },
    /// Row-norm bounded factorization of a dense matrix.
    Factorize(FactorizeArgs),
    /// Decode a combinatorial solution from a completion.
    Decode {
        #[command(subcommand)]
        kind: DecodeKind,
    },
    /// Oracle, completeness witness, optional noise, decode and verify.
    Roundtrip {
        #[command(subcommand)]
        kind: RoundtripKind,
    },
    /// Check an artifact against its instance.
    Verify {
        #[command(subcommand)]
        kind: VerifyKind,
    },
}

#[derive(Args, Debug)]
pub struct AmplifyArg {
    /// Repeat the result block-diagonally this many times.
    #[arg(long, default_value_t = 1)]
    pub amplify: usize,
}

#[derive(Subcommand, Debug)]
pub enum ReduceKind {
    /// DIMACS graph to the partial matrix P_G (PMX).
    Graph {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Embed in a matrix this many times larger, padded with revealed zeros.
        #[arg(long)]
        pad: Option<usize>,
        #[command(flatten)]
        amplify: AmplifyArg,
    },
    /// Partition weights (JSON) to a Gram-constraint system (JSON).
    Partition {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        amplify: AmplifyArg,
    },
    /// Exact-one-in-k instance (eoks) to a Gram-constraint system (JSON).
    Csp {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        amplify: AmplifyArg,
    },
}

#[derive(Args, Debug)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    /// Objective at which a run stops early.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Fit accepted as a completion.
    #[arg(long, default_value_t = 1e-6)]
    pub accept: f64,
}

#[derive(Subcommand, Debug)]
pub enum CompleteKind {
    /// Rank-bounded completion of a PMX partial matrix.
    Matrix {
        input: PathBuf,
        #[arg(long)]
        rank: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Completed matrix (DMX).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Unclipped factors (FAC).
        #[arg(long)]
        factors: Option<PathBuf>,
    },
    /// Vectors in a fixed dimension for a Gram-constraint system.
    Gram {
        input: PathBuf,
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Vector assignment (JSON).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct FactorizeArgs {
    /// Dense matrix (DMX).
    pub input: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Factorization (FAC).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DecodeKind {
    /// Random-cone rounding of a factorized completion of P_G.
    IndependentSet {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        factors: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        /// Accuracy threshold; defaults to 1/(2cr).
        #[arg(long)]
        delta: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Net coloring of a factorized completion of P_G.
    Coloring {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        factors: PathBuf,
        /// Net resolution; defaults to just below the largest admissible value.
        #[arg(long)]
        delta_net: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split from vectors for a Partition system.
    Partition {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assignment from vectors for an Exact-one-in-k system.
    Assignment {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        /// Error level assumed for the internal constraints (the measured value is used if larger).
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum RoundtripKind {
    /// Brute-force coloring, M_f, bounded factorization, both graph decoders.
    Graph {
        input: PathBuf,
        /// Number of colors.
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 20)]
        trials: u64,
    },
    /// Brute-force split, planar witness, optional lift and noise, decode.
    Partition {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Brute-force assignment, witness, optional lift and noise, decode.
    Csp {
        input: PathBuf,
        /// Ambient dimension (2k to 4k - 1); defaults to 2k.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum VerifyKind {
    /// Dense matrix against a partial matrix.
    Completion {
        partial: PathBuf,
        matrix: PathBuf,
        /// Maximum allowed rank.
        #[arg(long)]
        rank: Option<usize>,
        /// Allowed error: sum of squared errors at most eps * n.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Vector assignment against a Gram-constraint system.
    Gram {
        system: PathBuf,
        vectors: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Coloring (JSON) against a DIMACS graph.
    Coloring { graph: PathBuf, coloring: PathBuf },
    /// Factorization against a dense matrix, with the row-norm bound.
    Factorization {
        matrix: PathBuf,
        factors: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

/// Error tagged with the pipeline stage that produced it.
pub struct Failure {
    pub stage: &'static str,
    pub error: anyhow::Error,
}

type Out<T> = std::result::Result<T, Failure>;

trait Stage<T> {
    fn stage(self, name: &'static str) -> Out<T>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for std::result::Result<T, E> {
    fn stage(self, name: &'static str) -> Out<T> {
        self.map_err(|e| Failure {
            stage: name,
            error: e.into(),
        })
    }
}

fn fail<T>(stage: &'static str, msg: String) -> Out<T> {
    Err(Failure {
        stage,
        error: anyhow!(msg),
    })
}

/// Seed and where it came from: `flag`, `env` or `default`.
pub fn resolve_seed(flag: Option<u64>) -> anyhow::Result<(u64, &'static str)> {
    if let Some(s) = flag {
        return Ok((s, "flag"));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok((
            v.trim()
                .parse()
                .map_err(|_| anyhow!("{SEED_ENV} must be an unsigned integer, got `{v}`"))?,
            "env",
        )),
        Err(_) => Ok((0, "default")),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Reduce { kind } => match kind {
            ReduceKind::Graph { .. } => "reduce graph",
            ReduceKind::Partition { .. } => "reduce partition",
            ReduceKind::Csp { .. } => "reduce csp",
        },
        Command::Complete { kind } => match kind {
            CompleteKind::Matrix { .. } => "complete matrix",
            CompleteKind::Gram { .. } => "complete gram",
        },
        Command::Factorize(_) => "factorize",
        Command::Decode { kind } => match kind {
            DecodeKind::IndependentSet { .. } => "decode independent-set",
            DecodeKind::Coloring { .. } => "decode coloring",
            DecodeKind::Partition { .. } => "decode partition",
            DecodeKind::Assignment { .. } => "decode assignment",
        },
        Command::Roundtrip { kind } => match kind {
            RoundtripKind::Graph { .. } => "roundtrip graph",
            RoundtripKind::Partition { .. } => "roundtrip partition",
            RoundtripKind::Csp { .. } => "roundtrip csp",
        },
        Command::Verify { kind } => match kind {
            VerifyKind::Completion { .. } => "verify completion",
            VerifyKind::Gram { .. } => "verify gram",
            VerifyKind::Coloring { .. } => "verify coloring",
            VerifyKind::Factorization { .. } => "verify factorization",
        },
    }
}

/// Runs a parsed command line; stage failures are recorded in the report.
pub fn run(cli: &Cli) -> Report {
    let name = command_name(&cli.command);
    let (seed, source) = match resolve_seed(cli.seed) {
        Ok(s) => s,
        Err(e) => {
            let mut r = Report::new(name, 0, "invalid");
            r.error = Some(StageError {
                stage: "seed".into(),
                message: e.to_string(),
            });
            return r;
        }
    };
    let mut report = Report::new(name, seed, source);
    let result = match &cli.command {
        Command::Reduce { kind } => reduce(kind, &mut report),
        Command::Complete { kind } => complete(kind, seed, &mut report),
        Command::Factorize(args) => factorize(args, &mut report),
        Command::Decode { kind } => decode(kind, seed, &mut report),
        Command::Roundtrip { kind } => roundtrip(kind, seed, &mut report),
        Command::Verify { kind } => verify(kind, &mut report),
    };
    if let Err(f) = result {
        report.error = Some(StageError {
            stage: f.stage.into(),
            message: format!("{:#}", f.error),
        });
    }
    report
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn read(path: &Path) -> Out<String> {
    formats::read_file(path).stage("read")
}

fn write(path: &Path, contents: &str, report: &mut Report) -> Out<()> {
    formats::write_file(path, contents).stage("write")?;
    report.artifacts.push(path_str(path));
    Ok(())
}

fn write_json(path: &Path, value: &Value, report: &mut Report) -> Out<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON value serializes") + "\n";
    write(path, &text, report)
}

fn provenance(report: &Report) -> Vec<String> {
    let inputs = serde_json::to_string(&report.inputs).expect("inputs serialize");
    vec![format!(
        "hardcomplete {} seed={} inputs={inputs}",
        report.command, report.seed
    )]
}

fn family_counts(sys: &GramConstraintSystem) -> Value {
    let families = [
        Family::UnitNorm,
        Family::Orthogonality,
        Family::SumCoupling,
        Family::Rotation,
        Family::InternalVariable,
        Family::ExternalVariable,
        Family::InternalClause,
        Family::ExternalClause,
        Family::CrossBlock,
        Family::Other,
    ];
    let mut map = serde_json::Map::new();
    for f in families {
        let count = sys.count_family(f);
        if count > 0 {
            map.insert(f.name().into(), count.into());
        }
    }
    Value::Object(map)
}

fn residuals_json(sys: &GramConstraintSystem, va: &VectorAssignment) -> Out<Value> {
    let by = sys.residuals_by_family(va).stage("verify")?;
    Ok(Value::Object(
        by.into_iter()
            .map(|(f, r)| (f.name().to_string(), num(r)))
            .collect(),
    ))
}

// reduce

fn reduce(kind: &ReduceKind, report: &mut Report) -> Out<()> {
    match kind {
        ReduceKind::Graph {
            input,
            output,
            pad,
            amplify,
        } => {
            report.input("graph", path_str(input));
            report.input("pad", pad.map_or(Value::Null, Value::from));
            report.input("amplify", amplify.amplify);
            let g = formats::parse_dimacs(&read(input)?).stage("parse")?;
            let mut pm = graph_to_partial(&g);
            if amplify.amplify != 1 {
                pm = pm
                    .amplify_block_diagonal(amplify.amplify)
                    .stage("amplify")?;
            }
            if let Some(factor) = pad {
                pm = pad_partial(&pm, *factor).stage("pad")?;
            }
            report.measure("vertices", g.n());
            report.measure("edges", g.edge_count());
            report.measure("n", pm.n());
            report.measure("revealed", pm.revealed_count());
            report.measure("revealed_fraction", num(pm.revealed_fraction()));
            report.check(
                "revealed_count",
                amplify.amplify != 1
                    || pad.is_some()
                    || pm.revealed_count() == g.n() + 2 * g.edge_count(),
                "|Omega| = n + 2m before padding and amplification",
            );
            let text = formats::write_pmx(&pm, &provenance(report));
            write(output, &text, report)
        }
        ReduceKind::Partition {
            input,
            output,
            amplify,
        } => {
            report.input("weights", path_str(input));
            report.input("amplify", amplify.amplify);
            let inst = formats::parse_partition(&read(input)?).stage("parse")?;
            let sys = partition_gadget(&inst).stage("reduce")?;
            report.measure("items", inst.n());
            report.measure("scale", num(inst.scale()));
            let expected = 3 * inst.n();
            report.check(
                "label_count",
                sys.labels().len() == expected,
                format!("{} labels, expected 3n = {expected}", sys.labels().len()),
            );
            finish_system(sys, amplify.amplify, output, report)
        }
        ReduceKind::Csp {
            input,
            output,
            amplify,
        } => {
            report.input("instance", path_str(input));
            report.input("amplify", amplify.amplify);
            let inst = formats::parse_eoks(&read(input)?).stage("parse")?;
            let sys = csp_gadget(&inst).stage("reduce")?;
            let (k, n, m) = (inst.k(), inst.n_vars(), inst.clauses().len());
            report.measure("k", k);
            report.measure("variables", n);
            report.measure("clauses", m);
            let expected = (n + 1) * 4 * k * k + m + 1;
            report.check(
                "label_count",
                sys.labels().len() == expected,
                format!(
                    "{} labels, expected (n+1) 4k^2 + m + 1 = {expected}",
                    sys.labels().len()
                ),
            );
            finish_system(sys, amplify.amplify, output, report)
        }
    }
}

fn finish_system(
    sys: GramConstraintSystem,
    copies: usize,
    output: &Path,
    report: &mut Report,
) -> Out<()> {
    let sys = if copies != 1 {
        sys.amplify_block_diagonal(copies).stage("amplify")?
    } else {
        sys
    };
    report.measure("labels", sys.labels().len());
    report.measure("constraints", sys.constraints().len());
    report.measure("families", family_counts(&sys));
    let value = formats::system_json(&sys, &provenance(report));
    write_json(output, &value, report)
}

// complete

fn solver_config(rank: usize, c: f64, args: &SolverArgs, seed: u64) -> SolverConfig {
    let mut cfg = SolverConfig::new(rank, c);
    cfg.restarts = args.restarts;
    cfg.max_iter = args.max_iter;
    cfg.tol = args.tol;
    cfg.seed = seed;
    cfg
}

fn solver_inputs(report: &mut Report, args: &SolverArgs) {
    report.input("restarts", args.restarts);
    report.input("max_iter", args.max_iter);
    report.input("tol", num(args.tol));
    report.input("accept", num(args.accept));
}

fn complete(kind: &CompleteKind, seed: u64, report: &mut Report) -> Out<()> {
    match kind {
        CompleteKind::Matrix {
            input,
            rank,
            solver,
            output,
            factors,
        } => {
            report.input("partial", path_str(input));
            report.input("rank", *rank);
            solver_inputs(report, solver);
            let pm = formats::parse_pmx(&read(input)?).stage("parse")?;
            let cfg = solver_config(*rank, pm.coeff_bound(), solver, seed);
            let out = complete_bounded_rank(&pm, &cfg).stage("solve")?;
            report.measure("rmse_sum", num(out.rmse_sum));
            report.measure("rank", numerical_rank(&out.matrix, DEFAULT_RANK_TOL));
            report.measure("clipped_entries", out.clipped_entries);
            report.measure("best_restart", out.best_restart);
            report.measure(
                "restart_rmse",
                out.restart_rmse.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            );
            report.measure("revealed_fraction", num(pm.revealed_fraction()));
            report.check(
                "coefficient_bound",
                out.matrix.max_abs() <= pm.coeff_bound(),
                format!(
                    "max |entry| {} <= c = {}",
                    out.matrix.max_abs(),
                    pm.coeff_bound()
                ),
            );
            report.check(
                "fit",
                out.rmse_sum <= solver.accept,
                format!(
                    "sum of squared errors {:e} <= {:e}",
                    out.rmse_sum, solver.accept
                ),
            );
            let prov = provenance(report);
            if let Some(path) = output {
                write(path, &formats::write_dmx(&out.matrix, &prov), report)?;
            }
            if let Some(path) = factors {
                write(
                    path,
                    &formats::write_fac(&out.factors, &prov).stage("write")?,
                    report,
                )?;
            }
            Ok(())
        }
        CompleteKind::Gram {
            input,
            dim,
            solver,
            output,
        } => {
            report.input("system", path_str(input));
            report.input("dim", *dim);
            solver_inputs(report, solver);
            let sys = formats::parse_system(&read(input)?).stage("parse")?;
            let cfg = solver_config(*dim, 1.0, solver, seed);
            let out = solve_gram_system(&sys, *dim, &cfg).stage("solve")?;
            report.measure("max_residual", num(out.max_residual));
            report.measure("objective", num(out.objective));
            report.measure("best_restart", out.best_restart);
            report.measure(
                "restart_residuals",
                out.restart_residuals
                    .iter()
                    .map(|&x| num(x))
                    .collect::<Vec<_>>(),
            );
            report.measure("residuals", residuals_json(&sys, &out.assignment)?);
            report.check(
                "fit",
                out.max_residual <= solver.accept,
                format!("max residual {:e} <= {:e}", out.max_residual, solver.accept),
            );
            if let Some(path) = output {
                write_json(path, &formats::vectors_json(&out.assignment), report)?;
            }
            Ok(())
        }
    }
}

// factorize

fn factorize(args: &FactorizeArgs, report: &mut Report) -> Out<()> {
    report.input("matrix", path_str(&args.input));
    report.input("tol", num(args.tol));
    let m = formats::parse_dmx(&read(&args.input)?).stage("parse")?;
    let out = bounded_factorize(&m, args.tol).stage("factorize")?;
    let rank = numerical_rank(&m, DEFAULT_RANK_TOL);
    report.measure("c", num(out.coeff_bound));
    report.measure("rank", rank);
    report.measure("dim", out.factorization.dim());
    report.measure("norm_bound", num(out.norm_bound));
    report.measure("max_row_norm", num(out.max_row_norm));
    report.measure("reconstruction_error", num(out.reconstruction_error));
    report.measure("sdp_eta", num(out.sdp_eta));
    report.measure("sdp_dim", out.sdp_dim);
    report.measure("sdp_iterations", out.sdp_iterations);
    report.measure("rank_deficient", out.rank_deficient);
    report.check(
        "dimension",
        out.factorization.dim() == rank,
        format!("dimension {} = rank {rank}", out.factorization.dim()),
    );
    report.check(
        "reconstruction",
        out.reconstruction_error <= 1e-6,
        format!("max error {:e} <= 1e-6", out.reconstruction_error),
    );
    report.check(
        "norm_bound",
        out.within_bound(1e-3),
        format!(
            "max row norm {} <= (cr)^(1/4) (1 + 1e-3) = {}",
            out.max_row_norm,
            out.norm_bound * 1.001
        ),
    );
    if let Some(path) = &args.output {
        let text = formats::write_fac(&out.factorization, &provenance(report)).stage("write")?;
        write(path, &text, report)?;
    }
    Ok(())
}

// decode

fn graph_and_factors(
    graph: &Path,
    factors: &Path,
    report: &mut Report,
) -> Out<(Graph, PartialMatrix, Factorization)> {
    report.input("graph", path_str(graph));
    report.input("factors", path_str(factors));
    let g = formats::parse_dimacs(&read(graph)?).stage("parse")?;
    let f = formats::parse_fac(&read(factors)?).stage("parse")?;
    if f.u().nrows() != g.n() {
        return fail(
            "parse",
            format!(
                "factorization has {} rows, graph has {} vertices",
                f.u().nrows(),
                g.n()
            ),
        );
    }
    Ok((g.clone(), graph_to_partial(&g), f))
}

/// Seeded cone-rounding trials with an exhaustive edge check on each.
struct TrialSummary {
    best: Vec<usize>,
    best_trial: u64,
    mean: f64,
    all_independent: bool,
    survivors: usize,
    eps: f64,
    delta: f64,
}

fn independent_set_trials(
    g: &Graph,
    pm: &PartialMatrix,
    fact: &Factorization,
    trials: u64,
    delta: Option<f64>,
    seed: u64,
) -> Out<TrialSummary> {
    let (c, r, n) = (pm.coeff_bound(), fact.dim(), g.n());
    let base = match delta {
        Some(d) => ConeRoundingParams::with_delta(c, r, d, seed),
        None => ConeRoundingParams::new(c, r, seed),
    }
    .stage("decode")?;
    let m = fact.reconstruct();
    let (sse, _) = revealed_errors(pm, &m).stage("decode")?;
    let survivors = filter_accurate_submatrix(pm, &m, base.delta).stage("decode")?;
    let mut best = Vec::new();
    let mut best_trial = 0;
    let mut total = 0usize;
    let mut all_independent = true;
    for t in 0..trials {
        let params = ConeRoundingParams {
            seed: rng::derive_seed(seed, t),
            ..base
        };
        let out = decode_independent_set(fact, &params, &survivors).stage("decode")?;
        all_independent &= g.is_independent(&out.members);
        total += out.members.len();
        if out.members.len() > best.len() {
            best = out.members;
            best_trial = t;
        }
    }
    Ok(TrialSummary {
        best,
        best_trial,
        mean: if trials > 0 {
            total as f64 / trials as f64
        } else {
            0.0
        },
        all_independent,
        survivors: survivors.len(),
        eps: sse / n.max(1) as f64,
        delta: base.delta,
    })
}

fn record_trials(
    report: &mut Report,
    s: &TrialSummary,
    n: usize,
    c: f64,
    r: usize,
    trials: u64,
) -> Value {
    let stated = expected_size_bound_stated(n, c, r, s.eps);
    let halved = expected_size_bound_halved(n, c, r, s.eps, s.delta);
    report.measure("trials", trials);
    report.measure("survivors", s.survivors);
    report.measure("best_size", s.best.len());
    report.measure("mean_size", num(s.mean));
    report.measure("bound_stated", num(stated));
    report.measure("bound_halved", num(halved));
    report.measure("eps", num(s.eps));
    report.measure("delta", num(s.delta));
    report.check(
        "independent",
        s.all_independent,
        format!("every one of {trials} sets checked against all edges"),
    );
    json!({
        "members": s.best.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "trial": s.best_trial,
        "trial_seed": rng::derive_seed(report.seed, s.best_trial),
        "seed": report.seed,
        "trials": trials,
        "mean_size": num(s.mean),
        "bound_stated": num(stated),
        "bound_halved": num(halved),
    })
}

fn net_coloring(
    g: &Graph,
    pm: &PartialMatrix,
    fact: &Factorization,
    delta_net: Option<f64>,
    report: &mut Report,
) -> Out<Coloring> {
    let (c, r) = (pm.coeff_bound(), fact.dim());
    let (_, eps) = revealed_errors(pm, &fact.reconstruct()).stage("decode")?;
    let params = match delta_net {
        Some(d) => NetColoringParams::with_delta_net(c, r, eps, d),
        None => NetColoringParams::new(c, r, eps),
    }
    .stage("decode")?;
    let coloring = decode_coloring(fact, &params).stage("decode")?;
    let bound = coloring_bound(c, r, eps);
    report.measure("eps", num(eps));
    report.measure("delta_net", num(params.delta_net));
    report.measure("colors", coloring.k());
    report.measure("color_bound", num(bound));
    let proper = coloring.check_proper(g);
    report.check(
        "proper",
        proper.is_ok(),
        proper
            .err()
            .map_or("no monochromatic edge".into(), |e| e.to_string()),
    );
    report.check(
        "color_count",
        coloring.k() as f64 <= bound,
        format!("{} colors <= {bound}", coloring.k()),
    );
    Ok(coloring)
}

fn decode(kind: &DecodeKind, seed: u64, report: &mut Report) -> Out<()> {
    match kind {
        DecodeKind::IndependentSet {
            graph,
            factors,
            trials,
            delta,
            output,
        } => {
            report.input("trials", *trials);
            report.input("delta", delta.map_or(Value::Null, num));
            let (g, pm, fact) = graph_and_factors(graph, factors, report)?;
            let s = independent_set_trials(&g, &pm, &fact, *trials, *delta, seed)?;
            let artifact = record_trials(report, &s, g.n(), pm.coeff_bound(), fact.dim(), *trials);
            if let Some(path) = output {
                write_json(
                    path,
                    &json!({ "kind": "independent_set", "value": artifact }),
                    report,
                )?;
            }
            Ok(())
        }
        DecodeKind::Coloring {
            graph,
            factors,
            delta_net,
            output,
        } => {
            report.input("delta_net", delta_net.map_or(Value::Null, num));
            let (g, pm, fact) = graph_and_factors(graph, factors, report)?;
            let coloring = net_coloring(&g, &pm, &fact, *delta_net, report)?;
            if let Some(path) = output {
                write_json(path, &formats::coloring_json(&coloring), report)?;
            }
            Ok(())
        }
        DecodeKind::Partition {
            system,
            vectors,
            tol,
            output,
        } => {
            report.input("system", path_str(system));
            report.input("vectors", path_str(vectors));
            report.input("tol", num(*tol));
            let sys = formats::parse_system(&read(system)?).stage("parse")?;
            let va = formats::parse_vectors(&read(vectors)?).stage("parse")?;
            let value = partition_decode(&sys, &va, *tol, report)?;
            if let Some(path) = output {
                write_json(path, &value, report)?;
            }
            Ok(())
        }
        DecodeKind::Assignment {
            system,
            vectors,
            eps,
            output,
        } => {
            report.input("system", path_str(system));
            report.input("vectors", path_str(vectors));
            report.input("eps", num(*eps));
            let sys = formats::parse_system(&read(system)?).stage("parse")?;
            let va = formats::parse_vectors(&read(vectors)?).stage("parse")?;
            let value = assignment_decode(&sys, &va, *eps, report)?;
            if let Some(path) = output {
                write_json(path, &value, report)?;
            }
            Ok(())
        }
    }
}

fn partition_decode(
    sys: &GramConstraintSystem,
    va: &VectorAssignment,
    tol: f64,
    report: &mut Report,
) -> Out<Value> {
    let Reduction::Partition(inst) = sys.reduction() else {
        return fail(
            "decode",
            format!(
                "expected a partition system, got `{}`",
                sys.reduction().kind()
            ),
        );
    };
    let d = decode_partition(sys, va, tol).stage("decode")?;
    let residue = inst.residue(&d.split).stage("verify")?;
    report.measure("max_constraint_residual", num(d.max_constraint_residual));
    report.measure("planarity_residual", num(d.planarity_residual));
    report.measure("signed_sum", num(d.signed_sum));
    report.measure("split", formats::split_json(&d.split));
    report.check(
        "equal_sums",
        residue == num_rational::Ratio::from_integer(0),
        format!("exact residue {residue}"),
    );
    Ok(json!({
        "kind": "partition",
        "value": formats::split_json(&d.split),
        "diagnostics": {
            "angles": d.angles.iter().map(|&a| num(a)).collect::<Vec<_>>(),
            "planarity_residual": num(d.planarity_residual),
            "signed_sum": num(d.signed_sum),
            "max_constraint_residual": num(d.max_constraint_residual),
            "residue": residue.to_string(),
        }
    }))
}

fn assignment_decode(
    sys: &GramConstraintSystem,
    va: &VectorAssignment,
    eps: f64,
    report: &mut Report,
) -> Out<Value> {
    let Reduction::OneInKSat(inst) = sys.reduction() else {
        return fail(
            "decode",
            format!("expected a csp system, got `{}`", sys.reduction().kind()),
        );
    };
    let out = decode_assignment(sys, va, eps).stage("decode")?;
    let d = &out.diagnostics;
    let rep = &d.repair;
    let (repaired, _) =
        hardcomplete_core::gram_decode::repair_internal(va, sys, eps).stage("decode")?;
    let product = max_product_change(va, &repaired, &variable_labels(inst)).stage("decode")?;
    report.measure("assignment", formats::assignment_json(&out.assignment));
    report.measure("eps", num(rep.eps));
    report.measure("delta", num(d.delta));
    report.measure("max_drift", num(rep.max_drift));
    report.measure("max_clause_drift", num(rep.max_clause_drift));
    report.measure("max_product_change", num(product));
    report.measure("clause_deviation", num(d.clause_deviation));
    report.check(
        "satisfies",
        d.violated_clause.is_none(),
        d.violated_clause
            .map_or("every clause has exactly one -1 literal".into(), |c| {
                format!("clause {c} violated")
            }),
    );
    report.check(
        "drift",
        rep.max_drift <= rep.drift_bound(),
        format!(
            "{:e} <= 3 sqrt(eps) = {:e}",
            rep.max_drift,
            rep.drift_bound()
        ),
    );
    report.check(
        "product_change",
        product <= rep.product_bound(),
        format!("{product:e} <= 7 sqrt(eps) = {:e}", rep.product_bound()),
    );
    Ok(json!({
        "kind": "assignment",
        "value": formats::assignment_json(&out.assignment),
        "diagnostics": {
            "delta": num(d.delta),
            "magnitude_floor": num(d.magnitude_floor),
            "magnitudes": d.magnitudes.iter().map(|&m| num(m)).collect::<Vec<_>>(),
            "clause_deviation": num(d.clause_deviation),
            "clause_threshold": num(d.clause_threshold),
            "violated_clause": d.violated_clause,
            "repair": {
                "eps": num(rep.eps),
                "internal_residual_before": num(rep.internal_residual_before),
                "internal_residual_after": num(rep.internal_residual_after),
                "max_drift": num(rep.max_drift),
                "max_clause_drift": num(rep.max_clause_drift),
                "max_product_change": num(product),
            }
        }
    }))
}

// roundtrip

fn lift(va: &VectorAssignment, dim: usize, seed: u64) -> Out<VectorAssignment> {
    if dim == va.dim() {
        return Ok(va.clone());
    }
    let q = rng::random_orthogonal(&mut rng::seeded(seed), dim);
    va.embedded(dim, 0)
        .stage("lift")?
        .transformed(&q)
        .stage("lift")
}

fn roundtrip(kind: &RoundtripKind, seed: u64, report: &mut Report) -> Out<()> {
    match kind {
        RoundtripKind::Graph {
            input,
            rank,
            trials,
        } => {
            report.input("graph", path_str(input));
            report.input("rank", *rank);
            report.input("trials", *trials);
            let g = formats::parse_dimacs(&read(input)?).stage("parse")?;
            let Some(f) = brute_coloring(&g, *rank).stage("oracle")? else {
                return fail("oracle", format!("graph has no proper {rank}-coloring"));
            };
            let pm = graph_to_partial(&g);
            let m = completion_from_coloring(&g, &f).stage("completeness")?;
            let rep = consistency(&pm, &m).stage("completeness")?;
            report.measure("coloring", formats::coloring_json(&f));
            report.measure("rmse_sum", num(rep.rmse_sum));
            report.measure("rank", rep.rank_est);
            report.check(
                "exact_completion",
                rep.rmse_sum == 0.0 && rep.coeff_bound_ok,
                format!("rmse_sum {}", rep.rmse_sum),
            );
            report.check(
                "completion_rank",
                rep.rank_est == f.nonempty_classes(),
                format!(
                    "rank {} = nonempty classes {}",
                    rep.rank_est,
                    f.nonempty_classes()
                ),
            );
            if let Ok(predicted) = f.predicted_coherence() {
                let mu = coherence(&m, DEFAULT_RANK_TOL).stage("completeness")?;
                report.measure("coherence", num(mu));
                report.measure("predicted_coherence", num(predicted));
                report.check(
                    "coherence",
                    (mu - predicted).abs() <= 1e-9,
                    format!("mu {mu} vs (n/k)/min class {predicted}"),
                );
            }

            let (fact, how) = if g.n() <= SDP_ROUNDTRIP_LIMIT {
                let out = bounded_factorize(&m, 1e-8).stage("factorize")?;
                report.check(
                    "norm_bound",
                    out.within_bound(1e-3),
                    format!("max row norm {} vs {}", out.max_row_norm, out.norm_bound),
                );
                (out.factorization, "sdp")
            } else {
                let k = f.k();
                let mut compact = f.clone();
                if f.nonempty_classes() < k {
                    compact = Coloring::new(k, f.colors().to_vec()).stage("factorize")?;
                }
                (coloring_factorization(&compact), "indicator")
            };
            report.measure("factorization", how);
            report.measure("factor_dim", fact.dim());

            let mut sub = Report::new("", seed, "");
            net_coloring(&g, &pm, &fact, None, &mut sub)?;
            let s = independent_set_trials(&g, &pm, &fact, *trials, None, seed)?;
            record_trials(&mut sub, &s, g.n(), pm.coeff_bound(), fact.dim(), *trials);
            for (k, v) in sub.measured {
                report.measured.insert(format!("decode_{k}"), v);
            }
            report.checks.extend(sub.checks);
            Ok(())
        }
        RoundtripKind::Partition {
            input,
            dim,
            noise,
            tol,
        } => {
            report.input("weights", path_str(input));
            report.input("dim", *dim);
            report.input("noise", num(*noise));
            report.input("tol", num(*tol));
            if !(2..=3).contains(dim) {
                return fail("lift", format!("dimension must be 2 or 3, got {dim}"));
            }
            let inst = formats::parse_partition(&read(input)?).stage("parse")?;
            let Some(split) = brute_partition(&inst).stage("oracle")? else {
                return fail("oracle", "instance has no equal-sum split".into());
            };
            let sys = partition_gadget(&inst).stage("reduce")?;
            let va = partition_completeness(&inst, &split).stage("completeness")?;
            let exact = sys.max_residual(&va).stage("completeness")?;
            report.measure("oracle_split", formats::split_json(&split));
            report.measure("completeness_residual", num(exact));
            report.check(
                "completeness",
                exact <= 1e-12,
                format!("max residual {exact:e} <= 1e-12"),
            );
            let va = lift(&va, *dim, rng::derive_seed(seed, 0))?
                .perturbed(*noise, rng::derive_seed(seed, 1));
            report.measure(
                "noisy_residual",
                num(sys.max_residual(&va).stage("verify")?),
            );
            partition_decode(&sys, &va, *tol, report)?;
            Ok(())
        }
        RoundtripKind::Csp { input, dim, noise } => {
            report.input("instance", path_str(input));
            report.input("dim", dim.map_or(Value::Null, Value::from));
            report.input("noise", num(*noise));
            let inst = formats::parse_eoks(&read(input)?).stage("parse")?;
            let Some(f) = brute_one_in_k(&inst).stage("oracle")? else {
                return fail("oracle", "instance is unsatisfiable".into());
            };
            let sys = csp_gadget(&inst).stage("reduce")?;
            let va = csp_completeness(&inst, &f).stage("completeness")?;
            let exact = sys.max_residual(&va).stage("completeness")?;
            report.measure("oracle_assignment", formats::assignment_json(&f));
            report.measure("completeness_residual", num(exact));
            report.check(
                "completeness",
                exact <= 1e-12,
                format!("max residual {exact:e} <= 1e-12"),
            );
            let dim = dim.unwrap_or(2 * inst.k());
            let va = lift(&va, dim, rng::derive_seed(seed, 0))?
                .perturbed(*noise, rng::derive_seed(seed, 1));
            let measured = sys.max_residual(&va).stage("verify")?;
            report.measure("noisy_residual", num(measured));
            assignment_decode(&sys, &va, measured, report)?;
            Ok(())
        }
    }
}

// verify

fn verify(kind: &VerifyKind, report: &mut Report) -> Out<()> {
    match kind {
        VerifyKind::Completion {
            partial,
            matrix,
            rank,
            eps,
        } => {
            report.input("partial", path_str(partial));
            report.input("matrix", path_str(matrix));
            report.input("rank", rank.map_or(Value::Null, Value::from));
            report.input("eps", eps.map_or(Value::Null, num));
            let pm = formats::parse_pmx(&read(partial)?).stage("parse")?;
            let m = formats::parse_dmx(&read(matrix)?).stage("parse")?;
            let rep = consistency(&pm, &m).stage("verify")?;
            report.measure("rmse_sum", num(rep.rmse_sum));
            report.measure("max_entry_err", num(rep.max_entry_err));
            report.measure("rank", rep.rank_est);
            report.measure("revealed_fraction", num(rep.revealed_fraction));
            if rep.rank_est > 0 {
                report.measure(
                    "coherence",
                    num(coherence(&m, DEFAULT_RANK_TOL).stage("verify")?),
                );
            }
            report.check(
                "coefficient_bound",
                rep.coeff_bound_ok,
                format!("entries within c = {}", pm.coeff_bound()),
            );
            if let Some(r) = rank {
                report.check(
                    "rank",
                    rep.rank_est <= *r,
                    format!("rank {} <= {r}", rep.rank_est),
                );
            }
            let allowed = eps.unwrap_or(0.0) * pm.n() as f64;
            report.check(
                "fit",
                rep.rmse_sum <= allowed,
                format!(
                    "sum of squared errors {:e} <= eps n = {allowed:e}",
                    rep.rmse_sum
                ),
            );
            Ok(())
        }
        VerifyKind::Gram {
            system,
            vectors,
            tol,
        } => {
            report.input("system", path_str(system));
            report.input("vectors", path_str(vectors));
            report.input("tol", num(*tol));
            let sys = formats::parse_system(&read(system)?).stage("parse")?;
            let va = formats::parse_vectors(&read(vectors)?).stage("parse")?;
            let max = sys.max_residual(&va).stage("verify")?;
            report.measure("max_residual", num(max));
            report.measure("residuals", residuals_json(&sys, &va)?);
            let labels: Vec<Label> = sys.labels().to_vec();
            let gram = va.gram(&labels).stage("verify")?;
            report.measure("gram_rank", numerical_rank(&gram, DEFAULT_RANK_TOL));
            report.check(
                "constraints",
                max <= *tol,
                format!("max residual {max:e} <= {tol:e}"),
            );
            Ok(())
        }
        VerifyKind::Coloring { graph, coloring } => {
            report.input("graph", path_str(graph));
            report.input("coloring", path_str(coloring));
            let g = formats::parse_dimacs(&read(graph)?).stage("parse")?;
            let f = formats::parse_coloring(&read(coloring)?).stage("parse")?;
            let proper = f.check_proper(&g);
            report.measure("k", f.k());
            report.measure("class_sizes", f.class_sizes());
            report.check(
                "proper",
                proper.is_ok(),
                proper
                    .err()
                    .map_or("no monochromatic edge".into(), |e| e.to_string()),
            );
            Ok(())
        }
        VerifyKind::Factorization {
            matrix,
            factors,
            tol,
        } => {
            report.input("matrix", path_str(matrix));
            report.input("factors", path_str(factors));
            report.input("tol", num(*tol));
            let m = formats::parse_dmx(&read(matrix)?).stage("parse")?;
            let f = formats::parse_fac(&read(factors)?).stage("parse")?;
            let back = f.reconstruct();
            if back.nrows() != m.nrows() || back.ncols() != m.ncols() {
                return fail(
                    "verify",
                    format!(
                        "factorization is {}x{}, matrix is {}x{}",
                        back.nrows(),
                        back.ncols(),
                        m.nrows(),
                        m.ncols()
                    ),
                );
            }
            let err = (back.into_inner() - m.as_matrix()).abs().max();
            let (c, r) = (m.max_abs(), numerical_rank(&m, DEFAULT_RANK_TOL));
            let bound = hardcomplete_core::factorize::row_norm_bound(c, r);
            report.measure("reconstruction_error", num(err));
            report.measure("max_row_norm", num(f.max_row_norm()));
            report.measure("norm_bound", num(bound));
            report.measure("dim", f.dim());
            report.measure("rank", r);
            report.check(
                "reconstruction",
                err <= *tol,
                format!("max error {err:e} <= {tol:e}"),
            );
            report.check(
                "norm_bound",
                f.max_row_norm() <= bound * 1.001,
                format!("max row norm {} <= {}", f.max_row_norm(), bound * 1.001),
            );
            Ok(())
        }
    }
}
