//! `mdtc`: command-line front end for the consensus simulator.

mod explain;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mdt_core::domain::{AuditLog, Clock, FixedClock, MemorySink, PatientCase, SystemClock};
use mdt_core::rl::{load_model, save_model, Algo, EpisodeStats};
use mdt_core::sim::{generate_cases, write_cohort, Engine};
use mdt_core::{AppConfig, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "mdtc", version, about = "Multi-agent consensus simulator")]
struct Cli {
    /// TOML configuration; unspecified keys take the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for cohort runs (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Deterministic audit timestamps.
    #[arg(long, global = true)]
    fixed_clock: bool,

    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic cases, one JSON file each.
    GenCases {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        difficulty: Option<f64>,
    },
    /// Run one consultation; writes result.json and audit.jsonl.
    Consult {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep per-round matrix snapshots in the result.
        #[arg(long)]
        trace: bool,
    },
    /// Run a synthetic cohort and write summary, per-case results and metrics.
    Cohort {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a meta-controller policy on a synthetic training pool.
    Train {
        #[arg(long, value_parser = parse_algo)]
        algo: Algo,
        #[arg(long)]
        episodes: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a trained policy with the maintain-position baseline.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cohort_seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the evidence and objective breakdown behind a result.
    Explain {
        #[arg(long)]
        result: PathBuf,
        /// Treatment index or name.
        #[arg(long)]
        treatment: String,
    },
}

fn parse_algo(s: &str) -> std::result::Result<Algo, String> {
    s.parse::<Algo>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("mdtc:error:usage: {}", e.kind());
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mdtc:error:{}: {e}", e.kind());
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    if cli.fixed_clock {
        config.fixed_clock = true;
    }
    if cli.print_config {
        print!("{}", config.to_toml_string()?);
        return Ok(ExitCode::SUCCESS);
    }
    let Some(command) = cli.command else {
        eprintln!("mdtc:error:usage: missing subcommand (try --help)");
        return Ok(ExitCode::from(2));
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| dispatch(command, config))?;
    Ok(ExitCode::SUCCESS)
}

fn dispatch(command: Command, mut config: AppConfig) -> Result<()> {
    match command {
        Command::GenCases { n, seed, out, difficulty } => {
            let d = difficulty.unwrap_or(config.sim.difficulty);
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Config(format!("difficulty {d} not in [0,1]")));
            }
            fs::create_dir_all(&out)?;
            for case in generate_cases(n, seed, d, &config.sim, &config.catalog) {
                write_json(&out.join(format!("{}.json", case.id)), &case)?;
            }
            Ok(())
        }
        Command::Consult { case, out, trace } => {
            config.trace |= trace;
            let engine = Engine::new(config)?;
            let text = fs::read_to_string(&case)?;
            let case = engine.validate_case(PatientCase::from_json(&text)?)?;
            let mut clock: Box<dyn Clock> = if engine.config.fixed_clock {
                Box::new(FixedClock::default())
            } else {
                Box::new(SystemClock::default())
            };
            let mut sink = MemorySink::default();
            let result = {
                let mut log = AuditLog::new(&case.id, clock.as_mut(), &mut sink);
                engine.consult(&case, &mut log)?
            };
            fs::create_dir_all(&out)?;
            write_json(&out.join("result.json"), &result)?;
            fs::write(out.join("audit.jsonl"), sink.to_jsonl())?;
            println!(
                "{}: {} (W = {:.4}, rounds = {}, {})",
                result.case_id,
                result.recommendation_name,
                result.final_matrix.kendall_w,
                result.rounds_used,
                result.termination_reason.as_str()
            );
            Ok(())
        }
        Command::Cohort { n, seed, out } => {
            if n == 0 {
                return Err(Error::Config("cohort needs --n >= 1".into()));
            }
            let out = out.unwrap_or_else(|| PathBuf::from(&config.output_dir));
            let engine = Engine::new(config)?;
            let outcome = engine.run_cohort(n, seed);
            write_cohort(&out, &outcome)?;
            let m = &outcome.metrics;
            println!(
                "cases {} failed {} consensus_rate {:.4} mean_w {:.4} mean_rounds {:.4} accuracy {:.4}",
                m.n_cases, m.n_failed, m.consensus_rate, m.mean_w, m.mean_rounds, m.accuracy
            );
            Ok(())
        }
        Command::Train { algo, episodes, seed, out } => {
            let engine = Engine::new(config)?;
            let outcome = engine.train(algo, episodes, seed)?;
            fs::create_dir_all(&out)?;
            save_model(fs::File::create(out.join("model.json"))?, &outcome.model)?;
            write_curve(&out.join("learning_curve.csv"), &outcome.curve)?;
            write_json(&out.join("manifest.json"), &outcome.manifest)?;
            if let Some(last) = outcome.curve.chunks(100).last() {
                let r = last.iter().map(|e| e.reward).sum::<f64>() / last.len() as f64;
                println!("{} trained for {episodes} episodes; final mean reward {r:.4}", algo.as_str());
            }
            Ok(())
        }
        Command::Eval { model, cohort_seed, n, out } => {
            let engine = Engine::new(config)?;
            let model = load_model(fs::File::open(&model)?)?;
            let cmp = engine.evaluate_policy(&model, cohort_seed, n)?;
            println!("method,n,mean_rounds,consensus_rate,mean_w");
            for row in cmp.rows() {
                println!(
                    "{},{},{:.4},{:.4},{:.4}",
                    row.method, row.n, row.mean_rounds, row.consensus_rate, row.mean_w
                );
            }
            println!("paired_mean_round_reduction,{:.4}", cmp.mean_paired_diff);
            if let Some(out) = out {
                fs::create_dir_all(&out)?;
                write_json(&out.join("comparison.json"), &cmp)?;
            }
            Ok(())
        }
        Command::Explain { result, treatment } => {
            let text = fs::read_to_string(&result)?;
            let result = serde_json::from_str(&text)?;
            print!("{}", explain::render(&result, &treatment)?);
            Ok(())
        }
    }
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Trailing 100-episode means of reward and final W, plus each episode's
/// round count.
fn write_curve(path: &Path, curve: &[EpisodeStats]) -> Result<()> {
    const WINDOW: usize = 100;
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "episode,mean_reward,mean_w,rounds")?;
    for (i, e) in curve.iter().enumerate() {
        let window = &curve[(i + 1).saturating_sub(WINDOW)..=i];
        let r = window.iter().map(|x| x.reward).sum::<f64>() / window.len() as f64;
        let w = window.iter().filter_map(|x| x.final_w).sum::<f64>() / window.len() as f64;
        writeln!(
            f,
            "{},{:.6},{:.6},{}",
            e.episode,
            r,
            w,
            e.rounds.map_or(String::new(), |x| x.to_string())
        )?;
    }
    f.flush()?;
    Ok(())
}
