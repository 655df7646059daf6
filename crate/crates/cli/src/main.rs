use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use stcsf::csf::{csf, detection_probability, BartenParams, FieldGeometry};
use stcsf::percept::{MethodKind, Perceiver};
use stcsf::stackgen::{normalize_to_display, read_stack, write_stack, Corpus, ViewingConditions};
use stcsf::sweep::{
    run_sweep, write_error_manifest, ConfigError, CsvSink, SweepConfig, SweepError, SweptParameter,
};

#[derive(Parser)]
#[command(
    name = "simulate",
    version,
    about = "Spatiotemporal CSF model observer for browsed 3D image stacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write one CSV row per (method, value).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write the trend report (printed to stdout) to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print a sweep config over the default grid of one parameter.
    Config {
        #[arg(long)]
        parameter: SweptParameter,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a stack corpus and write it with a manifest.
    GenCorpus {
        /// Take the corpus settings from this sweep config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        amplitude: Option<f64>,
    },
    /// Perceive one stack file.
    Perceive {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        method: MethodKind,
        /// Monte Carlo seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// The input is already in display luminance; skip normalization.
        #[arg(long)]
        displayed: bool,
        #[command(flatten)]
        viewing: ViewingArgs,
    },
    /// Contrast sensitivity utilities.
    Csf {
        #[command(subcommand)]
        command: CsfCommand,
    },
}

#[derive(Subcommand)]
enum CsfCommand {
    /// Print S(u, w) and the detection probability of modulation m.
    Eval {
        /// Spatial frequency, cycles/degree.
        #[arg(long)]
        u: f64,
        /// Temporal frequency, Hz.
        #[arg(long)]
        w: f64,
        /// Mean luminance, cd/m².
        #[arg(long)]
        l: f64,
        /// Field size, degrees.
        #[arg(long)]
        x0: f64,
        /// Modulation.
        #[arg(long)]
        m: f64,
    },
}

#[derive(Args)]
struct ViewingArgs {
    #[arg(long, default_value_t = ViewingConditions::default().l_max)]
    l_max: f64,
    #[arg(long, default_value_t = ViewingConditions::default().contrast)]
    contrast: f64,
    #[arg(long, default_value_t = ViewingConditions::default().ssr)]
    ssr: f64,
    #[arg(long, default_value_t = ViewingConditions::default().browse_speed)]
    browse_speed: f64,
}

impl From<&ViewingArgs> for ViewingConditions {
    fn from(a: &ViewingArgs) -> Self {
        ViewingConditions {
            l_max: a.l_max,
            contrast: a.contrast,
            ssr: a.ssr,
            browse_speed: a.browse_speed,
        }
    }
}

fn sweep(
    config: PathBuf,
    out: PathBuf,
    threads: Option<usize>,
    report: Option<PathBuf>,
) -> anyhow::Result<()> {
    let config =
        SweepConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    let mut sink = CsvSink::create(&out)?;
    let mut completed = 0;
    let result = run_sweep(&config, threads, |row| {
        sink.push(row)?;
        completed += 1;
        Ok::<(), ConfigError>(())
    });
    match result {
        Ok(output) => {
            let text = serde_json::to_string_pretty(&output.report)?;
            if let Some(path) = report {
                std::fs::write(&path, &text)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{text}");
            Ok(())
        }
        Err(e) => {
            write_error_manifest(&out, &e, config.sweep.parameter, completed)?;
            Err(e.into())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sweep {
            config,
            out,
            threads,
            report,
        } => sweep(config, out, threads, report),
        Command::Config {
            parameter,
            pairs,
            seed,
        } => {
            let mut config = SweepConfig::for_parameter(parameter);
            if let Some(n) = pairs {
                config.corpus.n_pairs = n;
            }
            if let Some(s) = seed {
                config.corpus.master_seed = s;
            }
            config.validate()?;
            println!("{}", config.to_json());
            Ok(())
        }
        Command::GenCorpus {
            config,
            out_dir,
            pairs,
            seed,
            amplitude,
        } => {
            let mut spec = match config {
                Some(path) => SweepConfig::load(path)?.corpus,
                None => Default::default(),
            };
            if let Some(n) = pairs {
                spec.n_pairs = n;
            }
            if let Some(s) = seed {
                spec.master_seed = s;
            }
            if let Some(a) = amplitude {
                if !(a >= 0.0) {
                    bail!("amplitude must be >= 0");
                }
                spec.lesion.amplitude = a;
            }
            let manifest = Corpus::generate(spec)?.write(&out_dir)?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Perceive {
            input,
            output,
            method,
            seed,
            displayed,
            viewing,
        } => {
            let vc = ViewingConditions::from(&viewing);
            let stack =
                read_stack(&input).with_context(|| format!("reading {}", input.display()))?;
            let stack = if displayed {
                stack
            } else {
                normalize_to_display(&stack, &vc)?
            };
            let perceived = Perceiver::new(stack.dims(), BartenParams::default())?.perceive(
                &stack,
                method.with_seed(seed),
                &vc,
            )?;
            write_stack(&perceived, &output)?;
            Ok(())
        }
        Command::Csf {
            command: CsfCommand::Eval { u, w, l, x0, m },
        } => {
            let params = BartenParams::default();
            let s = csf(u, w, FieldGeometry::new(x0, l)?, &params)?;
            let p = detection_probability(m, s, params.k_crozier)?;
            println!("{s}");
            println!("{p}");
            Ok(())
        }
    }
}

fn kind(e: &anyhow::Error) -> &'static str {
    if let Some(e) = e.downcast_ref::<SweepError>() {
        return e.source.kind();
    }
    if let Some(e) = e.downcast_ref::<stcsf::Error>() {
        return e.kind();
    }
    if e.is::<ConfigError>() {
        return "config";
    }
    if e.is::<stcsf::stackgen::StackError>() {
        return "stack";
    }
    if e.is::<stcsf::csf::CsfError>() {
        return "csf";
    }
    if e.is::<stcsf::percept::PerceptError>() {
        return "percept";
    }
    if e.is::<std::io::Error>() {
        return "io";
    }
    "error"
}

fn report_error(kind: &str, message: String) {
    eprintln!("{}", serde_json::json!({ "error": message, "kind": kind }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim().to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(kind(&e), format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
