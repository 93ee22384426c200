//! Command-line front-end: load a model from JSON or a builtin instance
//! spec, run the solvers/simulator/benchmarks, and emit CSV or JSON
//! reports.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use convexdp_core::dp_det::{
    bellman_step, conjugate_dp_step, solve, StageReport,
};
use convexdp_core::dp_stoch::{stoch_bellman_post, stoch_solve};
use convexdp_core::instances::{
    cdf_convolution_oracle, make_hard_instance, make_lower_bound_instance, make_lqr,
    make_pwl_instance, newsvendor_oracle, HardInstanceParams,
};
use convexdp_core::lft::{widened_dual_grid, DiscreteFn};
use convexdp_core::model::{DpModel, NoiseModel};
use convexdp_core::qlft_sim::simulate_qdp;
use convexdp_core::{Error, Result};

#[derive(Parser)]
#[command(name = "convexdp", version, about = "Convex dynamic-programming toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Flags shared by the model-consuming commands.
#[derive(Args)]
struct ModelArgs {
    /// path to a model JSON file
    #[arg(long, conflicts_with = "instance")]
    model: Option<PathBuf>,
    /// builtin instance spec, e.g. lqr:d=1,T=3 or hard:a=1-2,lambda=0.5
    #[arg(long)]
    instance: Option<String>,
    /// target one-step accuracy; picks grid resolutions for builtin instances
    #[arg(long)]
    epsilon: Option<f64>,
    /// dual grid points per axis (default: match the primal resolution)
    #[arg(long, conflicts_with = "epsilon")]
    duals: Option<usize>,
    /// horizon override
    #[arg(long)]
    horizon: Option<usize>,
    /// seed for randomized instance generation
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// worker cap (the solvers are single-threaded; values ≥ 1 are accepted)
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic solve with per-stage error-bound report
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// additionally run the exhaustive Bellman oracle and report the gap
        #[arg(long)]
        oracle: bool,
    },
    /// Stochastic solve over post-decision states
    SolveStoch {
        #[command(flatten)]
        model: ModelArgs,
        /// additionally run the exhaustive Bellman oracle and report the gap
        #[arg(long)]
        oracle: bool,
    },
    /// Classical simulation of the quantum pipeline with success accounting
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Time exhaustive Bellman vs conjugate backups over a grid-size sweep
    Bench {
        /// smallest grid exponent (N = 2^min .. 2^max)
        #[arg(long, default_value_t = 6)]
        min_exp: u32,
        /// largest grid exponent
        #[arg(long, default_value_t = 13)]
        max_exp: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact enumeration oracles for the inventory family
    Oracle {
        #[command(subcommand)]
        which: OracleCmd,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// P(sum of two-point demands ≤ cap), printed as an exact fraction
    Cdf {
        /// comma-separated demand magnitudes
        #[arg(long, value_delimiter = ',')]
        a: Vec<u64>,
        #[arg(long)]
        cap: i64,
    },
    /// smallest z with P(sum ≤ z) ≥ lambda
    Newsvendor {
        /// comma-separated demand magnitudes
        #[arg(long, value_delimiter = ',')]
        a: Vec<u64>,
        #[arg(long)]
        lambda: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(feasible) => {
            if feasible {
                ExitCode::SUCCESS
            } else {
                eprintln!("feasibility violation: oracle backups clamped off-grid states");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether the run was feasibility-clean.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Solve { model, oracle } => {
            let m = load_model(&model)?;
            let duals = dual_points(&m, &model)?;
            let reports = solve(&m, &duals)?;
            let gaps = if oracle { Some(det_oracle_gaps(&m, &reports)?) } else { None };
            let feasible = gaps.as_ref().map_or(true, |g| g.iter().all(|&(_, c)| c <= 1e-9));
            emit_report(&model, &reports, gaps.as_deref())?;
            Ok(feasible)
        }
        Command::SolveStoch { model, oracle } => {
            let m = load_model(&model)?;
            let duals = dual_points(&m, &model)?;
            let reports = stoch_solve(&m, &duals)?;
            let gaps = if oracle { Some(stoch_oracle_gaps(&m, &reports)?) } else { None };
            let feasible = gaps.as_ref().map_or(true, |g| g.iter().all(|&(_, c)| c <= 1e-9));
            emit_report(&model, &reports, gaps.as_deref())?;
            Ok(feasible)
        }
        Command::Simulate { model } => {
            let m = load_model(&model)?;
            let duals = dual_points(&m, &model)?;
            let (_, trace) = simulate_qdp(&m, &duals)?;
            let text = match model.format {
                Format::Csv => trace.to_table(),
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&trace)
                        .map_err(|e| Error::BadParams(e.to_string()))?;
                    s.push('\n');
                    s
                }
            };
            write_out(model.out.as_deref(), &text)?;
            Ok(trace.mismatches.is_empty())
        }
        Command::Bench { min_exp, max_exp, out } => {
            if min_exp < 2 || max_exp > 20 || min_exp > max_exp {
                return Err(Error::BadParams("need 2 ≤ min-exp ≤ max-exp ≤ 20".into()));
            }
            let text = bench(min_exp, max_exp)?;
            write_out(out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Oracle { which } => {
            match which {
                OracleCmd::Cdf { a, cap } => {
                    let (num, den) = cdf_convolution_oracle(&a, cap)?;
                    println!("{num}/{den}");
                }
                OracleCmd::Newsvendor { a, lambda } => {
                    println!("{}", newsvendor_oracle(&a, lambda)?);
                }
            }
            Ok(true)
        }
    }
}

fn write_out(path: Option<&std::path::Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::BadParams(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout();
            so.write_all(text.as_bytes())
                .and_then(|()| so.flush())
                .map_err(|e| Error::BadParams(e.to_string()))
        }
    }
}

fn load_model(args: &ModelArgs) -> Result<DpModel> {
    if args.threads == 0 {
        return Err(Error::BadParams("threads must be at least 1".into()));
    }
    if let Some(eps) = args.epsilon {
        if !(eps > 0.0) {
            return Err(Error::BadParams("epsilon must be positive".into()));
        }
    }
    let mut model = match (&args.model, &args.instance) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::BadParams(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<DpModel>(&text)
                .map_err(|e| Error::BadParams(format!("model JSON: {e}")))?
        }
        (None, Some(spec)) => parse_instance(spec, args.epsilon, args.seed)?,
        _ => return Err(Error::BadParams("provide exactly one of --model / --instance".into())),
    };
    if let Some(h) = args.horizon {
        if h == 0 {
            return Err(Error::BadParams("horizon must be at least 1".into()));
        }
        model.horizon = h;
    }
    model.validate()?;
    Ok(model)
}

/// Dual grid sizes: match the primal resolution per axis (the regime
/// where postselection accounting is stable), or the ε-driven power of
/// two when a target accuracy is given.
fn dual_points(model: &DpModel, args: &ModelArgs) -> Result<Vec<usize>> {
    let grid = model.state_space.product_grid()?;
    if let Some(k) = args.duals {
        return Ok(vec![k; grid.dim]);
    }
    match args.epsilon {
        Some(eps) => {
            let (_, k) = convexdp_core::dp_det::resolutions_for_epsilon(model, eps)?;
            Ok(vec![k; grid.dim])
        }
        None => Ok(grid.points_per_axis.clone()),
    }
}

/// Decode `name:key=val,…`. Lists inside a value use `-` (e.g. a=1-2-4).
fn parse_instance(spec: &str, epsilon: Option<f64>, seed: u64) -> Result<DpModel> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut kv = std::collections::BTreeMap::new();
    for pair in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::BadParams(format!("bad key=val pair '{pair}'")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get_f = |kv: &std::collections::BTreeMap<String, String>, k: &str, d: f64| -> Result<f64> {
        kv.get(k).map_or(Ok(d), |v| {
            v.parse().map_err(|_| Error::BadParams(format!("bad float for {k}: '{v}'")))
        })
    };
    let get_u = |kv: &std::collections::BTreeMap<String, String>, k: &str, d: usize| -> Result<usize> {
        kv.get(k).map_or(Ok(d), |v| {
            v.parse().map_err(|_| Error::BadParams(format!("bad integer for {k}: '{v}'")))
        })
    };
    let horizon = get_u(&kv, "T", 3)?;
    // ε-driven resolution for the grid-box families
    let eps_points = |dflt: usize| -> usize {
        epsilon.map_or(dflt, |eps| {
            let raw = (horizon as f64 / eps).ceil().max(2.0);
            let mut n = 2usize;
            while (n as f64) < raw && n < 1 << 15 {
                n <<= 1;
            }
            n + 1
        })
    };
    match name {
        "lqr" => make_lqr(
            get_u(&kv, "d", 1)?,
            horizon,
            (get_f(&kv, "qx", 0.0)?, get_f(&kv, "qu", 1.0)?, get_f(&kv, "qt", 1.0)?),
            get_u(&kv, "points", eps_points(129))?,
        ),
        "randlqr" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = || rng.gen_range(0.5..2.0);
            make_lqr(
                get_u(&kv, "d", 1)?,
                horizon,
                (c(), c(), c()),
                get_u(&kv, "points", eps_points(129))?,
            )
        }
        "hard" => {
            let a = kv
                .get("a")
                .ok_or_else(|| Error::BadParams("hard instance needs a=…".into()))?
                .split('-')
                .map(|v| v.parse::<u64>().map_err(|_| Error::BadParams(format!("bad demand '{v}'"))))
                .collect::<Result<Vec<_>>>()?;
            let mut p = HardInstanceParams::new(a, get_f(&kv, "lambda", 0.5)?);
            p.points_per_unit = get_u(&kv, "ppu", p.points_per_unit)?;
            if let Some(b) = kv.get("beta") {
                p.beta = Some(b.parse().map_err(|_| Error::BadParams("bad beta".into()))?);
            }
            make_hard_instance(&p).map(|(m, _)| m)
        }
        "lower" => {
            let d = get_u(&kv, "d", 3)?;
            let alpha: Vec<u8> = kv
                .get("alpha")
                .map(|s| s.bytes().map(|b| b - b'0').collect())
                .unwrap_or_else(|| vec![0; d]);
            make_lower_bound_instance(d, get_u(&kv, "k", 0)?, &alpha)
        }
        "pwl" => {
            let span = get_f(&kv, "span", 2.0)?;
            make_pwl_instance(
                &[-span, 0.0, span],
                &[span, 0.0, span],
                horizon,
                get_u(&kv, "points", eps_points(65))?,
            )
        }
        other => Err(Error::BadParams(format!("unknown instance family '{other}'"))),
    }
}

/// Per-stage max |conjugate − exhaustive Bellman| and the oracle's
/// feasibility clamp, deterministic chain.
fn det_oracle_gaps(model: &DpModel, reports: &[StageReport]) -> Result<Vec<(f64, f64)>> {
    let grid = model.state_space.product_grid()?;
    let actions = model.action_space.product_grid()?;
    let mut j = DiscreteFn::sample(grid, |x| model.gt.eval(x))?;
    let mut gaps = Vec::with_capacity(reports.len());
    for r in reports {
        let out = bellman_step(&j, model, &actions, r.stage)?;
        let gap = out
            .value
            .values
            .iter()
            .zip(&r.value.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        gaps.push((gap, out.max_clamp));
        j = out.value;
    }
    Ok(gaps)
}

/// Stochastic analogue over post-decision values.
fn stoch_oracle_gaps(model: &DpModel, reports: &[StageReport]) -> Result<Vec<(f64, f64)>> {
    let grid = model.state_space.product_grid()?;
    let actions = model.action_space.product_grid()?;
    let last: NoiseModel = model.noise_at(model.horizon - 1);
    let mut v = DiscreteFn::sample(grid, |m| {
        last.support
            .iter()
            .zip(&last.probs)
            .map(|(xi, p)| {
                let w: Vec<f64> = m.iter().zip(xi).map(|(a, b)| a + b).collect();
                p * model.gt.eval(&w)
            })
            .sum()
    })?;
    let mut gaps = Vec::with_capacity(reports.len());
    for r in reports {
        let out = stoch_bellman_post(&v, model, &model.noise_at(r.stage), &actions, r.stage + 1)?;
        let gap = out
            .value
            .values
            .iter()
            .zip(&r.value.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        gaps.push((gap, out.max_clamp));
        v = out.value;
    }
    Ok(gaps)
}

fn emit_report(
    args: &ModelArgs,
    reports: &[StageReport],
    gaps: Option<&[(f64, f64)]>,
) -> Result<()> {
    let text = match args.format {
        Format::Csv => {
            let mut out = String::from("stage,e1,e2,bound");
            if gaps.is_some() {
                out.push_str(",oracle_gap,oracle_clamp");
            }
            out.push('\n');
            // cumulative T-step bound: errors of later stages compound
            let mut bound = 0.0;
            for (i, r) in reports.iter().enumerate() {
                bound += r.e1 + r.e2;
                out.push_str(&format!("{},{},{},{}", r.stage, r.e1, r.e2, bound));
                if let Some(g) = gaps {
                    out.push_str(&format!(",{},{}", g[i].0, g[i].1));
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            #[derive(serde::Serialize)]
            struct Row<'a> {
                #[serde(flatten)]
                report: &'a StageReport,
                bound: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                oracle_gap: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                oracle_clamp: Option<f64>,
            }
            let mut bound = 0.0;
            let rows: Vec<Row> = reports
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    bound += r.e1 + r.e2;
                    Row {
                        report: r,
                        bound,
                        oracle_gap: gaps.map(|g| g[i].0),
                        oracle_clamp: gaps.map(|g| g[i].1),
                    }
                })
                .collect();
            let mut s =
                serde_json::to_string_pretty(&rows).map_err(|e| Error::BadParams(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    write_out(args.out.as_deref(), &text)
}

/// One-step timing sweep: exhaustive Bellman is Θ(N·M) while the
/// conjugate backup is Θ(N + K) in one dimension.
fn bench(min_exp: u32, max_exp: u32) -> Result<String> {
    let mut out = String::from("n,k,t_bellman_ns,t_conj_ns\n");
    for e in min_exp..=max_exp {
        let n = (1usize << e) + 1;
        let m = make_lqr(1, 1, (0.0, 1.0, 1.0), n)?;
        let grid = m.state_space.product_grid()?;
        let actions = m.action_space.product_grid()?;
        let j = DiscreteFn::sample(grid, |x| m.gt.eval(x))?;
        let duals = widened_dual_grid(&j, &[n])?;

        let t0 = Instant::now();
        let b = bellman_step(&j, &m, &actions, 0)?;
        let t_bell = t0.elapsed().as_nanos();

        let t1 = Instant::now();
        let c = conjugate_dp_step(&j, &m, &duals, 0)?;
        let t_conj = t1.elapsed().as_nanos();

        // keep both results alive so the timed calls cannot be elided
        std::hint::black_box((&b.value.values, &c.value.values));
        out.push_str(&format!("{n},{n},{t_bell},{t_conj}\n"));
    }
    Ok(out)
}
