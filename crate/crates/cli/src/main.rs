use std::fs::File;
use std::io::{self, BufRead, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use prefelicit::bench::{
    benchmark_suite, evaluate_model, holdout_set, run_benchmark_with_progress, simulated_oracle, utility_by_id,
    write_csv, BenchConfig, BudgetMode, TestUtility, DEFAULT_EVAL_SAMPLES, DEFAULT_HOLDOUT_SIZE,
};
use prefelicit::model::{DEFAULT_CURVE_GRID, DEFAULT_CURVE_SAMPLES};
use prefelicit::{
    curve_summary, init_session, load_session, FitConfig, OracleResponse, PolicyKind, QueryPair, QueryPolicy,
    SessionState,
};
use prefelicit_service::{ServiceConfig, DEFAULT_MAX_SESSIONS, DEFAULT_PORT, INTROSPECTION_SEED};

#[derive(Parser)]
#[command(
    name = "prefelicit",
    version,
    about = "Elicit multi-metric utility functions from pairwise preferences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated benchmark over test utilities and query policies; one CSV row per run.
    Bench(BenchArgs),
    /// A session in the terminal, answered by a simulated oracle or by you.
    Session(SessionArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Utility-curve summaries of a session as CSV.
    Curves(CurvesArgs),
}

#[derive(Args, Clone)]
struct Scale {
    /// Monte-Carlo samples per likelihood evaluation during fits.
    #[arg(long, default_value_t = prefelicit::likelihood::DEFAULT_FIT_SAMPLES)]
    mc_samples: usize,
    /// Random candidate pairs scored per active query.
    #[arg(long, default_value_t = prefelicit::acquisition::DEFAULT_CANDIDATES)]
    candidates: usize,
    /// Shape draws behind each acquisition score.
    #[arg(long, default_value_t = prefelicit::acquisition::DEFAULT_ACQUISITION_SAMPLES)]
    shape_samples: usize,
    /// Latin-hypercube optimizer starts per fit.
    #[arg(long, default_value_t = 16)]
    starts: usize,
    /// Likelihood evaluations per optimizer start.
    #[arg(long, default_value_t = 200)]
    evals: usize,
}

impl Scale {
    fn fit(&self) -> FitConfig {
        FitConfig {
            n_starts: self.starts,
            max_evals_per_start: self.evals,
            mc_samples: self.mc_samples,
            ..FitConfig::default()
        }
    }

    fn policy(&self, kind: PolicyKind) -> QueryPolicy {
        QueryPolicy {
            n_candidates: self.candidates,
            n_shape_samples: self.shape_samples,
            ..QueryPolicy::new(kind, 0)
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated utility ids; all nine by default.
    #[arg(long, value_delimiter = ',')]
    utilities: Vec<String>,
    /// Comma-separated policies (random, single_entropy, pair_entropy); all by default.
    #[arg(long, value_delimiter = ',')]
    policies: Vec<PolicyKind>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Whether the initialization queries count toward the 10N budget.
    #[arg(long, default_value = "inclusive")]
    budget_mode: BudgetMode,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HOLDOUT_SIZE)]
    holdout_size: usize,
    /// Shape draws behind each model score on the hold-out set.
    #[arg(long, default_value_t = DEFAULT_EVAL_SAMPLES)]
    eval_samples: usize,
    /// Run cells one after another.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    quiet: bool,
    #[command(flatten)]
    scale: Scale,
}

#[derive(Args)]
struct SessionArgs {
    /// Test utility that answers (and scores) the session.
    #[arg(long, default_value = "lin-1-2")]
    utility: String,
    #[arg(long, default_value = "pair_entropy")]
    policy: PolicyKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total queries; ten per metric by default.
    #[arg(long)]
    budget: Option<usize>,
    /// Answer the queries yourself (A, B or E) instead of the simulated oracle.
    #[arg(long)]
    interactive: bool,
    /// Continue a saved session document.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Write the session document here after every answer.
    #[arg(long)]
    save: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HOLDOUT_SIZE)]
    holdout_size: usize,
    #[command(flatten)]
    scale: Scale,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "PREFELICIT_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, env = "PREFELICIT_HOST", default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, env = "PREFELICIT_DATA_DIR", default_value = "prefelicit-data")]
    data_dir: PathBuf,
    #[arg(long, env = "PREFELICIT_MC_SAMPLES", default_value_t = prefelicit::likelihood::DEFAULT_FIT_SAMPLES)]
    mc_samples: usize,
    #[arg(long, env = "PREFELICIT_CANDIDATES", default_value_t = prefelicit::acquisition::DEFAULT_CANDIDATES)]
    candidates: usize,
    #[arg(long, env = "PREFELICIT_MAX_SESSIONS", default_value_t = DEFAULT_MAX_SESSIONS)]
    max_sessions: usize,
}

#[derive(Args)]
struct CurvesArgs {
    /// Session document to summarize.
    #[arg(long)]
    session: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CURVE_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_CURVE_GRID)]
    grid: usize,
    #[arg(long, default_value_t = INTROSPECTION_SEED)]
    seed: u64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn bench(args: BenchArgs) -> Result<()> {
    let suite: Vec<TestUtility> = if args.utilities.is_empty() {
        benchmark_suite()
    } else {
        args.utilities
            .iter()
            .map(|id| utility_by_id(id))
            .collect::<prefelicit::Result<_>>()?
    };
    let policies = if args.policies.is_empty() {
        PolicyKind::ALL.to_vec()
    } else {
        args.policies.clone()
    };
    let config = BenchConfig {
        runs: args.runs,
        base_seed: args.seed,
        budget_mode: args.budget_mode,
        holdout_size: args.holdout_size,
        eval_samples: args.eval_samples,
        n_candidates: args.scale.candidates,
        n_shape_samples: args.scale.shape_samples,
        fit: args.scale.fit(),
        parallel: !args.sequential,
        ..BenchConfig::default()
    };
    let quiet = args.quiet;
    let results = run_benchmark_with_progress(&suite, &policies, &config, |r| {
        if !quiet {
            eprintln!(
                "{:<16} {:<14} run {} tau {:.4} ({} ms)",
                r.utility, r.policy, r.run, r.tau, r.wall_ms
            );
        }
    })?;
    write_csv(&results, output(&args.out)?)?;

    if !quiet {
        eprintln!("\n{:<16} {:<14} {:>8} {:>8}", "utility", "policy", "mean", "reported");
        for r in &results {
            let reported = suite
                .iter()
                .find(|t| t.id == r.utility)
                .and_then(|t| t.reported)
                .map(|v| format!("{:.4}", v.for_policy(r.policy)))
                .unwrap_or_else(|| "-".into());
            eprintln!("{:<16} {:<14} {:>8.4} {:>8}", r.utility, r.policy, r.mean_tau, reported);
        }
    }
    Ok(())
}

fn show(q: &QueryPair, s: &SessionState) {
    let names = s
        .metric_names
        .clone()
        .unwrap_or_else(|| (1..=s.space.n_metrics()).map(|i| format!("f{i}")).collect());
    println!("query {}/{} ({:?})", s.answered() + 1, s.budget, s.phase());
    for (i, name) in names.iter().enumerate() {
        println!(
            "  {:<10} {:<9} A {:.4}   B {:.4}",
            name,
            format!("{:?}", s.space.direction(i)).to_lowercase(),
            q.a.get(i),
            q.b.get(i)
        );
    }
}

fn ask(lines: &mut impl Iterator<Item = io::Result<String>>) -> Result<Option<OracleResponse>> {
    loop {
        print!("  prefer [A/B/E, q to stop]: ");
        io::stdout().flush()?;
        let Some(line) = lines.next() else { return Ok(None) };
        let line = line?;
        match line.trim() {
            "q" | "Q" => return Ok(None),
            answer => match answer.parse() {
                Ok(r) => return Ok(Some(r)),
                Err(_) => println!("  answer A, B or E"),
            },
        }
    }
}

fn session(args: SessionArgs) -> Result<()> {
    let test = utility_by_id(&args.utility)?;
    let mut s = match &args.resume {
        Some(path) => load_session(&std::fs::read(path).with_context(|| format!("reading {}", path.display()))?)?,
        None => {
            let budget = args
                .budget
                .unwrap_or_else(|| BudgetMode::Inclusive.budget(test.n_metrics()));
            init_session(
                test.space(),
                args.scale.policy(args.policy),
                budget,
                args.scale.fit(),
                args.seed,
            )?
        }
    };
    if s.space != test.space() {
        bail!("session metrics do not match utility {}", test.id);
    }
    println!(
        "session {} ({}, {} metrics, budget {})",
        s.session_id,
        s.policy.kind,
        s.space.n_metrics(),
        s.budget
    );
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    while !s.is_complete() {
        let q = s.next_query()?;
        show(&q, &s);
        let response = if args.interactive {
            match ask(&mut lines)? {
                Some(r) => r,
                None => break,
            }
        } else {
            let r = simulated_oracle(&test, &q);
            println!("  oracle: {r:?}");
            r
        };
        s.record_response(response)?;
        if let Some(path) = &args.save {
            std::fs::write(path, s.save()).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if !s.is_complete() {
        println!("stopped after {} answers", s.answered());
        return Ok(());
    }
    s.finalize()?;
    println!("sigma_e {:.4}", s.theta_mle.sigma_e);
    for (i, m) in s.theta_mle.metrics.iter().enumerate() {
        println!(
            "  f{}: ln alpha ~ N({:.3}, {:.3}^2), ln beta ~ N({:.3}, {:.3}^2)",
            i + 1,
            m.mu_alpha,
            m.sigma_alpha,
            m.mu_beta,
            m.sigma_beta
        );
    }
    if let Some(f) = s.last_fit {
        println!("log-likelihood {:.4} over {} answers", f.log_likelihood, f.dataset_len);
    }
    let holdout = holdout_set(&test, args.holdout_size, args.seed);
    let tau = evaluate_model(&s.theta_mle, &test, &holdout, DEFAULT_EVAL_SAMPLES, args.seed)?;
    println!("kendall tau on {} hold-out points: {tau:.4}", holdout.len());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::new(args.data_dir);
    config.fit.mc_samples = args.mc_samples;
    config.n_candidates = args.candidates;
    config.max_sessions = args.max_sessions;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(prefelicit_service::serve(config, SocketAddr::new(args.host, args.port)))?;
    Ok(())
}

fn curves(args: CurvesArgs) -> Result<()> {
    let bytes = std::fs::read(&args.session).with_context(|| format!("reading {}", args.session.display()))?;
    let mut s = load_session(&bytes)?;
    s.finalize()?;
    let names = s
        .metric_names
        .clone()
        .unwrap_or_else(|| (1..=s.space.n_metrics()).map(|i| format!("f{i}")).collect());
    let mut w = csv::Writer::from_writer(output(&args.out)?);
    w.write_record(["metric_index", "name", "direction", "x", "median", "q25", "q75"])?;
    for (i, name) in names.iter().enumerate() {
        let c = curve_summary(&s.theta_mle, &s.space, i, args.samples, args.grid, args.seed)?;
        let direction = format!("{:?}", c.direction).to_lowercase();
        for g in 0..c.grid.len() {
            w.write_record([
                i.to_string(),
                name.clone(),
                direction.clone(),
                c.grid[g].to_string(),
                c.median[g].to_string(),
                c.q25[g].to_string(),
                c.q75[g].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bench(a) => bench(a),
        Command::Session(a) => session(a),
        Command::Serve(a) => serve(a),
        Command::Curves(a) => curves(a),
    }
}
