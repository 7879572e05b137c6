//! Command-line entry point: encrypted-inference benchmarks across swarm
//! sizes, end-to-end scenario runs, approximation error/cost reports, and
//! one-off inference, all over the in-process or loopback TCP transports.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use uavmpc::bench::{
    approx_report, bench_csv, paper_reported_table, run_bench, run_scenario,
    run_scenario_scripted, ApproxFn, InferenceMode,
};
use uavmpc::net::{run_in_process, run_tcp, SessionConfig};
use uavmpc::nn::{secure_generate, EncodedModel, GeluMode, ModelConfig, ModelWeights};
use uavmpc::ring::FixedPointConfig;
use uavmpc::swarm::{detokenize, metrics_csv, tokenize, Scenario};

#[derive(Parser)]
#[command(name = "uavmpc", about = "Encrypted UAV command engine benchmarks and runs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransportKind {
    Local,
    Tcp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeluFlavor {
    /// The deployed piecewise approximation.
    Paper,
    /// Exact reference activation (plaintext engines only).
    Exact,
}

#[derive(Args)]
struct Common {
    /// Weight file; omit to use a built-in toy model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Fixed-point fractional bits.
    #[arg(long, default_value_t = 16)]
    fbits: u32,
    /// SoftMax temperature.
    #[arg(long, default_value_t = 1.0)]
    temp: f64,
    #[arg(long, value_enum, default_value_t = TransportKind::Local)]
    transport: TransportKind,
    /// RNG / session seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the CSV output here instead of only printing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GeluFlavor::Paper)]
    gelu: GeluFlavor,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encrypted-inference scaling benchmark across swarm sizes.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated swarm sizes.
        #[arg(long, default_value = "1,2,3,4", value_delimiter = ',')]
        swarm_sizes: Vec<usize>,
        /// Repetitions per size; wall time is the median.
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Run a scenario file end to end and report the mission metrics.
    Scenario {
        #[command(flatten)]
        common: Common,
        /// Scenario TOML file.
        file: PathBuf,
        /// encrypted | plaintext | scripted
        #[arg(long, default_value = "encrypted")]
        mode: String,
        /// Tokens to generate per command.
        #[arg(long, default_value_t = 8)]
        gen_steps: usize,
    },
    /// Error profile and round/byte costs of a kernel approximation.
    Approx {
        #[command(flatten)]
        common: Common,
        /// gelu | softmax | exp | reciprocal | rsqrt
        #[arg(long, default_value = "gelu")]
        function: String,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 0.0625)]
        step: f64,
    },
    /// One encrypted greedy generation from a prompt.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Prompt text, tokenized with the built-in vocabulary.
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 8)]
        steps: usize,
        /// Recompute attention over the full prefix instead of caching.
        #[arg(long)]
        no_cache: bool,
    },
    /// Generate a toy weight file.
    GenModel {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 32)]
        d_model: usize,
        #[arg(long, default_value_t = 2)]
        heads: usize,
        #[arg(long, default_value_t = 64)]
        vocab: usize,
        #[arg(long, default_value_t = 16)]
        max_seq: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn load_model(common: &Common) -> Result<ModelWeights> {
    let mut w = match &common.model {
        Some(path) => ModelWeights::load(path)
            .with_context(|| format!("loading model {}", path.display()))?,
        None => {
            let cfg = ModelConfig::new(2, 32, 2, 64, 16)?;
            ModelWeights::toy(cfg, common.seed)?
        }
    };
    w.cfg.temperature = common.temp;
    w.cfg.gelu_mode = match common.gelu {
        GeluFlavor::Paper => GeluMode::PaperPiecewise,
        GeluFlavor::Exact => GeluMode::ExactReference,
    };
    w.cfg.validate()?;
    Ok(w)
}

fn fixed_point(common: &Common) -> Result<FixedPointConfig> {
    Ok(FixedPointConfig::new(common.fbits)?)
}

fn write_out(common: &Common, csv: &str) -> Result<()> {
    if let Some(path) = &common.out {
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Bench { common, swarm_sizes, reps } => {
            if common.transport == TransportKind::Tcp {
                bail!("bench supports --transport local only");
            }
            let w = load_model(&common)?;
            let fx = fixed_point(&common)?;
            let rows = run_bench(&w, fx, &swarm_sizes, reps, common.seed)?;
            let csv = bench_csv(&rows);
            print!("{csv}");
            println!();
            print!("{}", paper_reported_table());
            write_out(&common, &csv)?;
        }
        Cmd::Scenario { common, file, mode, gen_steps } => {
            let sc = Scenario::load(&file)?;
            let run = match mode.as_str() {
                "scripted" => run_scenario_scripted(&sc)?,
                "encrypted" | "plaintext" => {
                    let w = load_model(&common)?;
                    let fx = fixed_point(&common)?;
                    let m = if mode == "encrypted" {
                        InferenceMode::Encrypted
                    } else {
                        InferenceMode::Plaintext
                    };
                    run_scenario(&sc, m, &w, fx, gen_steps)?
                }
                other => bail!("unknown mode {other}; expected encrypted|plaintext|scripted"),
            };
            for (i, text) in run.texts.iter().enumerate() {
                println!("command[{i}]: {text}");
            }
            println!(
                "parsed {}/{} commands, mean cosine vs script {:.4}",
                run.parsed,
                run.texts.len(),
                run.mean_cosine
            );
            let csv = metrics_csv(&run.name, &run.outcome);
            print!("{csv}");
            write_out(&common, &csv)?;
        }
        Cmd::Approx { common, function, lo, hi, step } => {
            let fx = fixed_point(&common)?;
            let rep = approx_report(ApproxFn::parse(&function)?, lo, hi, step, fx)?;
            print!("{}", rep.summary());
            write_out(&common, &rep.profile.to_csv())?;
        }
        Cmd::Infer { common, prompt, steps, no_cache } => {
            let w = load_model(&common)?;
            let fx = fixed_point(&common)?;
            let tokens: Vec<usize> = tokenize(&prompt)
                .into_iter()
                .map(|t| if t < w.cfg.vocab { t } else { 0 })
                .collect();
            let encoded = EncodedModel::public(&w, fx)?;
            let cfg = SessionConfig::in_process(common.seed, fx);
            let program = |ctx: &mut uavmpc::net::PartyCtx| {
                secure_generate(ctx, &encoded, &tokens, steps, !no_cache)
            };
            let report = match common.transport {
                TransportKind::Local => run_in_process(&cfg, program)?,
                TransportKind::Tcp => run_tcp(&cfg, program)?,
            };
            let merged = report.merged_stats();
            let generated = &report.outputs[0];
            println!("prompt tokens: {tokens:?}");
            println!("generated tokens: {generated:?}");
            println!("generated text: {}", detokenize(generated));
            println!(
                "rounds: {}  bytes sent: {}",
                merged.total_rounds(),
                merged.total_bytes_sent()
            );
        }
        Cmd::GenModel { out, layers, d_model, heads, vocab, max_seq, seed } => {
            let cfg = ModelConfig::new(layers, d_model, heads, vocab, max_seq)?;
            let w = ModelWeights::toy(cfg, seed)?;
            w.save(&out)?;
            println!("wrote {} ({} layers, d={d_model}, vocab={vocab})", out.display(), layers);
        }
    }
    Ok(())
}
