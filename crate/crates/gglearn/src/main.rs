use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gglearn::error::{Error, Result};
use gglearn::estimators::{empirical_mi, test_cmi, test_mi};
use gglearn::experiments::{
    eps_vs_m_star, mi_convergence_curve, read_csv, recovery_comparison, write_csv,
    ConvergenceKind, ExperimentConfig, LAMBDA_GRID,
};
use gglearn::glasso::{graphical_lasso, precision_to_tree};
use gglearn::hard_instances::{BlockKind, BlockSpec, InstanceFile};
use gglearn::linalg::{unbiased_covariance, SampleBatch, SymMatrix};
use gglearn::structure::chow_liu;

#[derive(Parser)]
#[command(name = "gglearn", about = "Tree-structured Gaussian graphical model learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BatchInput {
    /// CSV of samples: header row of variable names, one sample per row
    #[arg(long)]
    input: String,
    /// comma-separated column names to use (defaults to file order)
    #[arg(long)]
    cols: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate mutual information between the first two selected columns
    EstimateMi(BatchInput),
    /// Test I(X;Z) >= eps vs independence on the first two selected columns
    TestMi {
        #[command(flatten)]
        input: BatchInput,
        #[arg(long)]
        eps: f64,
    },
    /// Test I(X;Y|Z) >= eps on the first three selected columns
    TestCmi {
        #[command(flatten)]
        input: BatchInput,
        #[arg(long)]
        eps: f64,
    },
    /// Learn a tree over all columns; writes the edge list as JSON
    ChowLiu {
        #[command(flatten)]
        input: BatchInput,
        #[arg(long)]
        out: Option<String>,
    },
    /// Generate a hard-instance JSON file
    GenInstance {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        eps: f64,
        /// block count (per-block scale is eps/n)
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// per-block R1/R2 selection as a bit string, default all ones
        #[arg(long)]
        bits: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// Experiment harness
    #[command(subcommand)]
    Exp(ExpCommand),
    /// Baselines
    #[command(subcommand)]
    Baseline(BaselineCommand),
}

#[derive(Subcommand)]
enum ExpCommand {
    /// Sample complexity m* across an epsilon grid
    EpsVsM {
        #[arg(long)]
        config: Option<String>,
        /// realizable | non-realizable
        #[arg(long, default_value = "realizable")]
        kind: String,
        #[arg(long)]
        out: String,
    },
    /// Estimator convergence curves
    MiConvergence {
        #[arg(long)]
        config: Option<String>,
        /// mi-independent | mi-dependent | cmi-independent | cmi-dependent
        #[arg(long)]
        kind: String,
        /// comma-separated sample sizes
        #[arg(long, default_value = "100,316,1000,3162,10000")]
        ms: String,
        #[arg(long)]
        out: String,
    },
    /// Chow-Liu vs glasso exact-recovery rates
    Recovery {
        #[arg(long)]
        config: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value = "100,316,1000,3162,10000")]
        ms: String,
        #[arg(long)]
        out: String,
    },
}

#[derive(Subcommand)]
enum BaselineCommand {
    /// Graphical lasso on a sample batch; writes precision matrix and tree
    Glasso {
        #[command(flatten)]
        input: BatchInput,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: Option<String>,
    },
}

fn load_batch(input: &BatchInput) -> Result<SampleBatch> {
    let csv = read_csv(&input.input)?;
    if csv.header.is_empty() {
        return Err(Error::InvalidParameter(format!("{}: missing header row", input.input)));
    }
    let idx: Vec<usize> = match &input.cols {
        Some(cols) => cols
            .split(',')
            .map(|name| {
                csv.header
                    .iter()
                    .position(|h| h == name.trim())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown column {name}")))
            })
            .collect::<Result<_>>()?,
        None => (0..csv.header.len()).collect(),
    };
    let m = csv.rows.len();
    let k = idx.len();
    let mut data = Vec::with_capacity(m * k);
    for (r, row) in csv.rows.iter().enumerate() {
        for &j in &idx {
            let field = row.get(j).ok_or_else(|| {
                Error::InvalidParameter(format!("row {r}: expected {} fields, got {}", csv.header.len(), row.len()))
            })?;
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("row {r}: bad float {field:?}")))?;
            data.push(v);
        }
    }
    Ok(SampleBatch::new(m, k, data, csv.seed.unwrap_or(0), input.input.clone()))
}

fn need_cols(batch: &SampleBatch, k: usize) -> Result<()> {
    if batch.k == k {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("expected {k} columns, got {}", batch.k)))
    }
}

fn load_config(path: &Option<String>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidParameter(format!("reading {p}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidParameter(format!("parsing {p}: {e}")))
        }
    }
}

fn parse_ms(ms: &str) -> Result<Vec<usize>> {
    ms.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad sample size {s:?}")))
        })
        .collect()
}

fn parse_bits(bits: &Option<String>, n: usize) -> Result<Vec<bool>> {
    match bits {
        None => Ok(vec![true; n]),
        Some(s) => {
            if s.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "bits length {} does not match block count {n}",
                    s.len()
                )));
            }
            s.chars()
                .map(|c| match c {
                    '1' => Ok(true),
                    '0' => Ok(false),
                    _ => Err(Error::InvalidParameter(format!("bits must be 0/1, got {c:?}"))),
                })
                .collect()
        }
    }
}

fn write_out(out: &Option<String>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidParameter(format!("writing {path}: {e}"))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::EstimateMi(input) => {
            let batch = load_batch(&input)?;
            need_cols(&batch, 2)?;
            let est = empirical_mi(&batch.column(0), &batch.column(1))?;
            println!("{}", serde_json::to_string_pretty(&est).unwrap());
        }
        Command::TestMi { input, eps } => {
            let batch = load_batch(&input)?;
            need_cols(&batch, 2)?;
            let v = test_mi(&batch.column(0), &batch.column(1), eps)?;
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
        }
        Command::TestCmi { input, eps } => {
            let batch = load_batch(&input)?;
            need_cols(&batch, 3)?;
            let v = test_cmi(&batch.column(0), &batch.column(1), &batch.column(2), eps)?;
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
        }
        Command::ChowLiu { input, out } => {
            let batch = load_batch(&input)?;
            let tree = chow_liu(&batch)?;
            write_out(&out, &serde_json::to_string(&tree).unwrap())?;
        }
        Command::GenInstance { kind, eps, n, bits, seed: _, out } => {
            let kind = match kind.as_str() {
                "realizable" => BlockKind::Realizable,
                "non-realizable" | "nonrealizable" => BlockKind::NonRealizable,
                other => {
                    return Err(Error::InvalidParameter(format!("unknown instance kind {other:?}")))
                }
            };
            let spec = BlockSpec { kind, bits: parse_bits(&bits, n)?, epsilon: eps, n };
            let inst = InstanceFile::from_spec(&spec)?;
            std::fs::write(&out, serde_json::to_string_pretty(&inst).unwrap())
                .map_err(|e| Error::InvalidParameter(format!("writing {out}: {e}")))?;
        }
        Command::Exp(exp) => run_exp(exp)?,
        Command::Baseline(BaselineCommand::Glasso { input, lambda, out }) => {
            let batch = load_batch(&input)?;
            let s = unbiased_covariance(&batch)?;
            let lambdas: Vec<f64> = match lambda {
                Some(l) => vec![l],
                None => LAMBDA_GRID.to_vec(),
            };
            let mut best: Option<(f64, SymMatrix)> = None;
            for l in lambdas {
                let res = graphical_lasso(&s, l, 1e-6, 500)?;
                if res.converged && best.is_none() {
                    best = Some((l, res.theta));
                }
            }
            let (l, theta) =
                best.ok_or_else(|| Error::InvalidParameter("glasso did not converge".into()))?;
            let tree = precision_to_tree(&theta)?;
            let report = serde_json::json!({
                "lambda": l,
                "theta": theta,
                "tree": tree,
            });
            write_out(&out, &serde_json::to_string_pretty(&report).unwrap())?;
        }
    }
    Ok(())
}

fn run_exp(exp: ExpCommand) -> Result<()> {
    match exp {
        ExpCommand::EpsVsM { config, kind, out } => {
            let config = load_config(&config)?;
            let make: Box<dyn Fn(f64) -> Result<_>> = match kind.as_str() {
                "realizable" => Box::new(|eps| {
                    gglearn::hard_instances::realizable_block(
                        eps,
                        1,
                        gglearn::hard_instances::BlockChoice::R1,
                        gglearn::hard_instances::RealizableVariant::Chain,
                    )
                }),
                "non-realizable" | "nonrealizable" => Box::new(|eps| {
                    gglearn::hard_instances::nonrealizable_block(
                        eps,
                        1,
                        gglearn::hard_instances::BlockChoice::R1,
                    )
                }),
                other => {
                    return Err(Error::InvalidParameter(format!("unknown instance kind {other:?}")))
                }
            };
            let curve = eps_vs_m_star(make, &config)?;
            let rows: Vec<Vec<String>> = curve
                .epsilons
                .iter()
                .zip(&curve.m_star)
                .map(|(e, m)| vec![format!("{e}"), format!("{m}")])
                .collect();
            write_csv(&out, &["epsilon", "m_star"], &rows, config.seed, config.hash())?;
            eprintln!("log-log slope: {:.4} (r^2 {:.4})", curve.fit.slope, curve.fit.r_squared);
        }
        ExpCommand::MiConvergence { config, kind, ms, out } => {
            let config = load_config(&config)?;
            let kind = match kind.as_str() {
                "mi-independent" => ConvergenceKind::MiIndependent,
                "mi-dependent" => ConvergenceKind::MiDependent,
                "cmi-independent" => ConvergenceKind::CmiIndependent,
                "cmi-dependent" => ConvergenceKind::CmiDependent,
                other => {
                    return Err(Error::InvalidParameter(format!("unknown curve kind {other:?}")))
                }
            };
            let curve = mi_convergence_curve(kind, &parse_ms(&ms)?, &config)?;
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|p| {
                    vec![
                        format!("{}", p.m),
                        format!("{}", p.mean_error),
                        format!("{}", p.variance),
                        format!("{}", p.failed_trials),
                    ]
                })
                .collect();
            write_csv(
                &out,
                &["m", "mean_abs_error", "variance", "failed_trials"],
                &rows,
                config.seed,
                config.hash(),
            )?;
            eprintln!("log-log slope: {:.4} (r^2 {:.4})", curve.fit.slope, curve.fit.r_squared);
        }
        ExpCommand::Recovery { config, eps, ms, out } => {
            let config = load_config(&config)?;
            let curve = recovery_comparison(eps, &parse_ms(&ms)?, &config)?;
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|p| {
                    vec![
                        format!("{}", p.m),
                        format!("{}", p.chow_liu_rate),
                        format!("{}", p.glasso_rate),
                    ]
                })
                .collect();
            write_csv(&out, &["m", "chow_liu_rate", "glasso_rate"], &rows, config.seed, config.hash())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses 0 for --help/--version and we map parse failures to 2
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::InvalidParameter(msg)) if msg.starts_with("unknown") => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
