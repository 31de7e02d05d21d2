//! Command-line front end: argument parsing, config-file expansion, output
//! formatting, and exit-code policy (0 ok, 2 validation error, 3 failed
//! verification verdict).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gbc_fbl::capacity::{
    lambda_sum_capacity, pareto_boundary, pareto_boundary_csv, PowerSplit,
};
use gbc_fbl::channel::{ChannelParams, Receiver};
use gbc_fbl::fbl::{fano_bound, fbl_constants, outer_bound_region};
use gbc_fbl::poincare::{mixture_variance_report, PerturbationSet, VarianceReport};
use gbc_fbl::rng::CounterRng;
use gbc_fbl::simulator::{
    build_superposition_codebook, check_weak_converse_membership, chebyshev_gammas,
    estimate_error_probabilities, measure_max_error, phase_transition_scan, verify_lemma1,
    verify_prop1, ExpurgationAudit, Lemma1Report, MaxErrorReport, MembershipReport, SimResult,
    SuperpositionConfig,
};

const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

#[derive(Debug)]
struct CliError(String);

impl From<gbc_fbl::Error> for CliError {
    fn from(e: gbc_fbl::Error) -> Self {
        CliError(e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "gbc-fbl", version, about = "Finite-blocklength toolkit for the two-receiver degraded Gaussian broadcast channel", disable_help_subcommand = true)]
struct Cli {
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format; each subcommand has a natural default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for stochastic subcommands (default: GBC_FBL_THREADS
    /// or all cores). Affects wall time only, never output bytes.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Convert rate summaries printed to stderr into bits (machine output
    /// stays in nats).
    #[arg(long, global = true)]
    display_bits: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ChannelArgs {
    /// Peak power P.
    #[arg(long)]
    p: f64,
    /// Noise variance at receiver 1.
    #[arg(long = "sigma1-sq")]
    sigma1_sq: f64,
    /// Noise variance at receiver 2 (>= receiver 1's).
    #[arg(long = "sigma2-sq")]
    sigma2_sq: f64,
}

impl ChannelArgs {
    fn params(&self) -> Result<ChannelParams, CliError> {
        Ok(ChannelParams::new(self.p, self.sigma1_sq, self.sigma2_sq)?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pareto boundary of the capacity region over the power split.
    Region {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Weighted sum capacity; sweeps a lambda grid when --lambda is omitted.
    LambdaSum {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Finite-blocklength outer bound on the rate region.
    OuterBound {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Fano upper bounds on log message sizes.
    Fano {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u64>,
        #[arg(long)]
        epsilon: f64,
    },
    /// Outer-bound constants at a given error parameter.
    Constants {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        epsilon: f64,
    },
    /// Build a superposition code and estimate its error rates.
    Simulate {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m1: usize,
        #[arg(long)]
        m2: usize,
        #[arg(long)]
        alpha: f64,
        /// Power back-off from P (default P/sqrt(n)).
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Error-rate scan over rate scales and blocklengths.
    Scan {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        scales: Vec<f64>,
        #[arg(long = "n-list", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Variance-bound reports for randomized mixture log-densities.
    VerifyPoincare {
        #[arg(long)]
        n: usize,
        #[arg(long = "set-size")]
        set_size: usize,
        #[arg(long = "sigma-sq", default_value_t = 1.0)]
        sigma_sq: f64,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Converse audits (threshold bound, expurgation, region membership) on
    /// a tiny exactly-computable code.
    VerifyConverse {
        #[command(flatten)]
        ch: ChannelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m1: usize,
        #[arg(long)]
        m2: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
}

struct Output {
    text: String,
    verdict_fail: bool,
    summary: Option<String>,
}

impl Output {
    fn ok(text: String) -> Self {
        Output {
            text,
            verdict_fail: false,
            summary: None,
        }
    }
}

/// Expands a JSON config document into an argv vector. The document mirrors
/// the flag names one-to-one:
/// `{"command": "scan", "args": {"p": 1, "scales": [0.7, 1.3], ...}}`.
pub fn expand_config(bytes: &[u8]) -> Result<Vec<String>, String> {
    let v: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| format!("config parse: {e}"))?;
    let obj = v.as_object().ok_or("config must be a JSON object")?;
    for key in obj.keys() {
        if key != "command" && key != "args" {
            return Err(format!("unknown config key {key:?}"));
        }
    }
    let command = obj
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or("config needs a string \"command\"")?;
    let mut argv = vec!["gbc-fbl".to_string(), command.to_string()];
    let empty = serde_json::Map::new();
    let args = match obj.get("args") {
        None => &empty,
        Some(a) => a.as_object().ok_or("\"args\" must be an object")?,
    };
    for (key, val) in args {
        match val {
            serde_json::Value::Bool(true) => argv.push(format!("--{key}")),
            serde_json::Value::Bool(false) => {}
            serde_json::Value::Array(items) => {
                let parts: Result<Vec<String>, String> =
                    items.iter().map(scalar_to_string).collect();
                argv.push(format!("--{key}"));
                argv.push(parts?.join(","));
            }
            other => {
                argv.push(format!("--{key}"));
                argv.push(scalar_to_string(other)?);
            }
        }
    }
    Ok(argv)
}

fn scalar_to_string(v: &serde_json::Value) -> Result<String, String> {
    match v {
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::String(s) => Ok(s.clone()),
        other => Err(format!("unsupported config value {other}")),
    }
}

/// Runs the CLI on the given argv (including the program name) and returns
/// the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut args: Vec<String> = argv.into_iter().map(Into::into).collect();
    if let Some(pos) = args.iter().position(|a| a == "--config") {
        if pos != 1 || args.len() != 3 {
            eprintln!("error: --config <path> must be the only argument");
            return 2;
        }
        let bytes = match std::fs::read(&args[2]) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", args[2]);
                return 2;
            }
        };
        args = match expand_config(&bytes) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        };
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads.or_else(|| {
        std::env::var("GBC_FBL_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let result = match threads {
        Some(0) => Err(invalid("--threads must be positive")),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(invalid(format!("thread pool: {e}"))),
        },
        None => execute(&cli),
    };
    match result {
        Ok(out) => {
            if let Some(summary) = &out.summary {
                eprintln!("{summary}");
            }
            match &cli.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, out.text.as_bytes()) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return 2;
                    }
                }
                None => print!("{}", out.text),
            }
            if out.verdict_fail {
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.0);
            2
        }
    }
}

fn format_or(cli: &Cli, default: Format) -> Format {
    cli.format.unwrap_or(default)
}

fn json_only(cli: &Cli, name: &str) -> Result<(), CliError> {
    if cli.format == Some(Format::Csv) {
        return Err(invalid(format!("{name} emits JSON only")));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| invalid(format!("serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn rate_summary(display_bits: bool, label: &str, nats: f64) -> String {
    if display_bits {
        format!("{label}: {} bits", nats / NATS_PER_BIT)
    } else {
        format!("{label}: {nats} nats")
    }
}

fn execute(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Region { ch, points } => {
            let params = ch.params()?;
            let boundary = pareto_boundary(&params, *points)?;
            let text = match format_or(cli, Format::Csv) {
                Format::Csv => pareto_boundary_csv(&boundary),
                Format::Json => {
                    #[derive(Serialize)]
                    struct Row {
                        alpha: f64,
                        r1_nats: f64,
                        r2_nats: f64,
                    }
                    let rows: Vec<Row> = boundary
                        .iter()
                        .map(|(a, r)| Row {
                            alpha: a.value(),
                            r1_nats: r.r1,
                            r2_nats: r.r2,
                        })
                        .collect();
                    to_json(&rows)?
                }
            };
            Ok(Output::ok(text))
        }
        Command::LambdaSum { ch, lambda, points } => {
            let params = ch.params()?;
            #[derive(Serialize)]
            struct Row {
                lambda: f64,
                value_nats: f64,
                argmax_alpha: f64,
            }
            match lambda {
                Some(l) => {
                    json_only(cli, "lambda-sum with a single --lambda")?;
                    let res = lambda_sum_capacity(&params, *l)?;
                    let row = Row {
                        lambda: res.lambda,
                        value_nats: res.value,
                        argmax_alpha: res.argmax_alpha.value(),
                    };
                    let mut out = Output::ok(to_json(&row)?);
                    out.summary = Some(rate_summary(
                        cli.display_bits,
                        "lambda-sum capacity",
                        res.value,
                    ));
                    Ok(out)
                }
                None => {
                    if *points < 2 {
                        return Err(invalid("--points must be at least 2"));
                    }
                    let rows: Result<Vec<Row>, CliError> = (0..*points)
                        .map(|i| {
                            let l = i as f64 / (*points - 1) as f64;
                            let res = lambda_sum_capacity(&params, l)?;
                            Ok(Row {
                                lambda: l,
                                value_nats: res.value,
                                argmax_alpha: res.argmax_alpha.value(),
                            })
                        })
                        .collect();
                    let rows = rows?;
                    let text = match format_or(cli, Format::Csv) {
                        Format::Csv => {
                            let mut s = String::from("lambda,value_nats,argmax_alpha\n");
                            for r in &rows {
                                s.push_str(&format!(
                                    "{},{},{}\n",
                                    r.lambda, r.value_nats, r.argmax_alpha
                                ));
                            }
                            s
                        }
                        Format::Json => to_json(&rows)?,
                    };
                    Ok(Output::ok(text))
                }
            }
        }
        Command::OuterBound {
            ch,
            n,
            epsilon,
            points,
        } => {
            let params = ch.params()?;
            let region = outer_bound_region(&params, *n, *epsilon, *points)?;
            let text = match format_or(cli, Format::Csv) {
                Format::Csv => region.to_csv(),
                Format::Json => to_json(&region)?,
            };
            Ok(Output::ok(text))
        }
        Command::Fano { ch, n, epsilon } => {
            let params = ch.params()?;
            #[derive(Serialize)]
            struct Row {
                n: u64,
                epsilon: f64,
                rx1_log_m_nats: f64,
                rx2_log_m_nats: f64,
            }
            let rows: Result<Vec<Row>, CliError> = n
                .iter()
                .map(|&n| {
                    Ok(Row {
                        n,
                        epsilon: *epsilon,
                        rx1_log_m_nats: fano_bound(n, *epsilon, params.power(), params.sigma1_sq())?,
                        rx2_log_m_nats: fano_bound(n, *epsilon, params.power(), params.sigma2_sq())?,
                    })
                })
                .collect();
            let rows = rows?;
            let text = match format_or(cli, Format::Csv) {
                Format::Csv => {
                    let mut s = String::from("n,epsilon,rx1_log_m_nats,rx2_log_m_nats\n");
                    for r in &rows {
                        s.push_str(&format!(
                            "{},{},{},{}\n",
                            r.n, r.epsilon, r.rx1_log_m_nats, r.rx2_log_m_nats
                        ));
                    }
                    s
                }
                Format::Json => to_json(&rows)?,
            };
            Ok(Output::ok(text))
        }
        Command::Constants { ch, epsilon } => {
            json_only(cli, "constants")?;
            let params = ch.params()?;
            let c = fbl_constants(&params, *epsilon)?;
            Ok(Output::ok(to_json(&c)?))
        }
        Command::Simulate {
            ch,
            n,
            m1,
            m2,
            alpha,
            margin,
            trials,
            seed,
        } => {
            json_only(cli, "simulate")?;
            let params = ch.params()?;
            let margin =
                margin.unwrap_or_else(|| SuperpositionConfig::default_power_margin(params.power(), *n));
            let config = SuperpositionConfig::new(
                params,
                *n,
                *m1,
                *m2,
                PowerSplit::new(*alpha)?,
                margin,
                *seed,
            )?;
            let built = build_superposition_codebook(&config)?;
            let trial_seed = CounterRng::new(*seed, 1).next_u64();
            let result = estimate_error_probabilities(
                &built.codebook,
                &config,
                *trials,
                &CounterRng::new(trial_seed, 0),
            )?;
            #[derive(Serialize)]
            struct Report {
                config: SuperpositionConfig,
                rescaled_codewords: usize,
                result: SimResult,
            }
            Ok(Output::ok(to_json(&Report {
                config,
                rescaled_codewords: built.rescaled,
                result,
            })?))
        }
        Command::Scan {
            ch,
            alpha,
            scales,
            n_list,
            trials,
            seed,
        } => {
            let params = ch.params()?;
            let table = phase_transition_scan(
                &params,
                PowerSplit::new(*alpha)?,
                scales,
                n_list,
                *trials,
                *seed,
            )?;
            let mut out = Output::ok(match format_or(cli, Format::Csv) {
                Format::Csv => table.to_csv(),
                Format::Json => to_json(&table)?,
            });
            if !table.warnings.is_empty() {
                out.summary = Some(table.warnings.join("\n"));
            }
            Ok(out)
        }
        Command::VerifyPoincare {
            n,
            set_size,
            sigma_sq,
            batch,
            trials,
            seed,
        } => {
            json_only(cli, "verify-poincare")?;
            if *n == 0 || *set_size == 0 || *batch == 0 {
                return Err(invalid("--n, --set-size and --batch must be positive"));
            }
            if !(sigma_sq.is_finite() && *sigma_sq > 0.0) {
                return Err(invalid("--sigma-sq must be positive"));
            }
            let sigma = sigma_sq.sqrt();
            let mut reports: Vec<VarianceReport> = Vec::with_capacity(*batch);
            for b in 0..*batch {
                let mut gen = CounterRng::new(*seed, (b + 1) as u64);
                let vectors: Vec<Vec<f64>> = (0..*set_size)
                    .map(|_| {
                        (0..*n)
                            .map(|_| 2.0 * sigma * (2.0 * gen.uniform() - 1.0))
                            .collect()
                    })
                    .collect();
                let raw: Vec<f64> = (0..*set_size).map(|_| gen.uniform()).collect();
                let total: f64 = raw.iter().sum();
                let log_weights: Vec<f64> = raw.iter().map(|w| (w / total).ln()).collect();
                let kappa = vectors
                    .iter()
                    .map(|g| g.iter().map(|v| v * v).sum::<f64>())
                    .fold(0.0, f64::max);
                let pert = PerturbationSet::new(vectors, log_weights, kappa)?;
                let trial_seed = gen.next_u64();
                reports.push(mixture_variance_report(
                    &pert,
                    *sigma_sq,
                    *trials,
                    &CounterRng::new(trial_seed, 0),
                )?);
            }
            #[derive(Serialize)]
            struct Report {
                n: usize,
                set_size: usize,
                sigma_sq: f64,
                reports: Vec<VarianceReport>,
                pass: bool,
            }
            let pass = reports.iter().all(|r| r.pass);
            Ok(Output {
                text: to_json(&Report {
                    n: *n,
                    set_size: *set_size,
                    sigma_sq: *sigma_sq,
                    reports,
                    pass,
                })?,
                verdict_fail: !pass,
                summary: None,
            })
        }
        Command::VerifyConverse {
            ch,
            n,
            m1,
            m2,
            alpha,
            trials,
            seed,
        } => {
            json_only(cli, "verify-converse")?;
            let params = ch.params()?;
            let config = SuperpositionConfig::new(
                params,
                *n,
                *m1,
                *m2,
                PowerSplit::new(*alpha)?,
                SuperpositionConfig::default_power_margin(params.power(), *n),
                *seed,
            )?;
            let built = build_superposition_codebook(&config)?;
            let cb = &built.codebook;
            let derived = |k: u64| {
                let s = CounterRng::new(*seed, 0x5EED_0000 + k).next_u64();
                CounterRng::new(s, 0)
            };
            let max_error = measure_max_error(cb, &params, *trials, &derived(1))?;
            let eps = max_error.eps_used();
            if eps >= 1.0 {
                return Err(invalid(
                    "measured maximal error reaches 1; the converse displays are vacuous here",
                ));
            }
            let g1 = chebyshev_gammas(cb, &params, Receiver::Rx1, eps, *trials, &derived(2))?;
            let g2 = chebyshev_gammas(cb, &params, Receiver::Rx2, eps, *trials, &derived(3))?;
            let lemma1_rx1 = verify_lemma1(cb, &params, Receiver::Rx1, &g1, *trials, &derived(4))?;
            let lemma1_rx2 = verify_lemma1(cb, &params, Receiver::Rx2, &g2, *trials, &derived(5))?;
            let expurgation = verify_prop1(cb, &params, *trials, &derived(6))?;
            let membership = check_weak_converse_membership(cb, &params, *trials, &derived(7))?;
            #[derive(Serialize)]
            struct Report {
                eps_used: f64,
                max_error: MaxErrorReport,
                lemma1_rx1: Lemma1Report,
                lemma1_rx2: Lemma1Report,
                expurgation: ExpurgationAudit,
                membership: MembershipReport,
                pass: bool,
            }
            let pass =
                lemma1_rx1.pass && lemma1_rx2.pass && expurgation.pass && membership.inside;
            Ok(Output {
                text: to_json(&Report {
                    eps_used: eps,
                    max_error,
                    lemma1_rx1,
                    lemma1_rx2,
                    expurgation,
                    membership,
                    pass,
                })?,
                verdict_fail: !pass,
                summary: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_expansion_maps_flags() {
        let cfg = br#"{"command":"region","args":{"p":1,"sigma1-sq":1,"sigma2-sq":2,"points":5}}"#;
        let argv = expand_config(cfg).unwrap();
        assert_eq!(argv[0], "gbc-fbl");
        assert_eq!(argv[1], "region");
        assert!(argv.contains(&"--p".to_string()));
        assert!(argv.contains(&"--sigma2-sq".to_string()));
        assert!(argv.contains(&"5".to_string()));
    }

    #[test]
    fn config_expansion_arrays_and_bools() {
        let cfg = br#"{"command":"scan","args":{"scales":[0.7,1.3],"display-bits":true,"quiet":false}}"#;
        let argv = expand_config(cfg).unwrap();
        let joined = argv.join(" ");
        assert!(joined.contains("--scales 0.7,1.3"));
        assert!(joined.contains("--display-bits"));
        assert!(!joined.contains("--quiet"));
    }

    #[test]
    fn config_expansion_rejects_garbage() {
        assert!(expand_config(b"not json").is_err());
        assert!(expand_config(b"[]").is_err());
        assert!(expand_config(br#"{"args":{}}"#).is_err());
        assert!(expand_config(br#"{"command":"x","extra":1}"#).is_err());
        assert!(expand_config(br#"{"command":"x","args":{"k":{"nested":1}}}"#).is_err());
        assert!(expand_config(br#"{"command":"x","args":{"k":null}}"#).is_err());
    }
}
