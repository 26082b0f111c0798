mod canonical;
mod commands;
mod doc;

use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use covkit::{CovError, Tolerances, DEFAULT_SEED};

use commands::{Action, Outcome, Settings};

#[derive(Parser, Debug)]
#[command(name = "covkit", version, about = "Covariant measurements, instruments and channels for finite groups")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Tolerance for linear identities.
    #[arg(long, global = true)]
    tol_lin: Option<f64>,
    /// Allowed negative eigenvalue in positivity checks.
    #[arg(long, global = true)]
    tol_psd: Option<f64>,
    /// Relative cutoff for rank decisions.
    #[arg(long, global = true)]
    rank_cutoff: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Coset representative rule: lex-min or example.
    #[arg(long, global = true)]
    section_policy: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the seeded POVM and report its structural flags.
    Classify { doc: String },
    /// Build and normalize the seeded POVM.
    Normalize { doc: String },
    /// Solve the linear covariance constraints on the outcome space.
    Solve { doc: String },
    /// Naimark dilation of the seeded rank-one POVM.
    Dilate { doc: String },
    /// Covariant instruments.
    Instrument {
        #[command(subcommand)]
        action: InstrumentAction,
    },
    /// Covariant channels (instruments with one outcome).
    Channel {
        #[command(subcommand)]
        action: ChannelAction,
    },
    /// Sweep the symmetric family at one or more alpha values.
    Symfamily {
        #[arg(long)]
        dim: usize,
        #[arg(long, required_unless_present = "grid")]
        alpha: Option<f64>,
        /// Uniform grid `a0:a1:n`.
        #[arg(long)]
        grid: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum InstrumentAction {
    Validate { doc: String },
    Build { doc: String },
    Dilate { doc: String },
    Extreme { doc: String },
}

#[derive(Subcommand, Debug)]
enum ChannelAction {
    Validate { doc: String },
    Extreme { doc: String },
}

fn read_doc(path: &str) -> Result<doc::Document, CovError> {
    let mut text = String::new();
    let res = if path == "-" {
        io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| CovError::Invalid(format!("cannot read {path}: {e}")))?;
    doc::parse(&text)
}

fn settings(g: &Global, opts: Option<&doc::Options>) -> Result<Settings, CovError> {
    let mut tol = Tolerances::default();
    let pick = |flag: Option<f64>, doc: Option<f64>, name: &str, slot: &mut f64| -> Result<(), CovError> {
        if let Some(v) = flag.or(doc) {
            if !(v.is_finite() && v > 0.0) {
                return Err(CovError::Invalid(format!("{name} must be positive, got {v}")));
            }
            *slot = v;
        }
        Ok(())
    };
    pick(g.tol_lin, opts.and_then(|o| o.tol_lin), "tol-lin", &mut tol.lin)?;
    pick(g.tol_psd, opts.and_then(|o| o.tol_psd), "tol-psd", &mut tol.psd)?;
    pick(g.rank_cutoff, opts.and_then(|o| o.rank_cutoff), "rank-cutoff", &mut tol.rank)?;
    Ok(Settings {
        tol,
        seed: g.seed.or(opts.and_then(|o| o.seed)).unwrap_or(DEFAULT_SEED),
        section_policy: g.section_policy.clone().or(opts.and_then(|o| o.section_policy.clone())),
    })
}

fn with_doc(
    g: &Global,
    path: &str,
    f: impl FnOnce(&doc::Document, &Settings) -> Result<Outcome, CovError>,
) -> Result<Outcome, CovError> {
    let d = read_doc(path)?;
    let s = settings(g, Some(&d.options))?;
    f(&d, &s)
}

fn emit(g: &Global, body: &[u8]) -> Result<(), CovError> {
    let res = match &g.out {
        Some(p) => std::fs::write(p, body),
        None => io::stdout().lock().write_all(body),
    };
    res.map_err(|e| CovError::Invalid(format!("cannot write report: {e}")))
}

fn json_body(report: &serde_json::Value) -> Result<Vec<u8>, CovError> {
    let mut s = canonical::to_string(report).map_err(|e| CovError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn run(cli: &Cli) -> Result<bool, CovError> {
    let g = &cli.global;
    if g.format == Format::Csv && !matches!(cli.command, Command::Symfamily { .. }) {
        return Err(CovError::Invalid("csv output is only available for symfamily".into()));
    }
    let outcome = match &cli.command {
        Command::Classify { doc } => with_doc(g, doc, commands::cmd_classify)?,
        Command::Normalize { doc } => with_doc(g, doc, commands::cmd_normalize)?,
        Command::Solve { doc } => with_doc(g, doc, commands::cmd_solve)?,
        Command::Dilate { doc } => with_doc(g, doc, commands::cmd_dilate)?,
        Command::Instrument { action } => {
            let (a, doc) = match action {
                InstrumentAction::Validate { doc } => (Action::Validate, doc),
                InstrumentAction::Build { doc } => (Action::Build, doc),
                InstrumentAction::Dilate { doc } => (Action::Dilate, doc),
                InstrumentAction::Extreme { doc } => (Action::Extreme, doc),
            };
            with_doc(g, doc, |d, s| commands::cmd_instrument(d, s, a, false))?
        }
        Command::Channel { action } => {
            let (a, doc) = match action {
                ChannelAction::Validate { doc } => (Action::Validate, doc),
                ChannelAction::Extreme { doc } => (Action::Extreme, doc),
            };
            with_doc(g, doc, |d, s| commands::cmd_instrument(d, s, a, true))?
        }
        Command::Symfamily { dim, alpha, grid } => {
            let alphas = match (alpha, grid) {
                (_, Some(spec)) => commands::parse_grid(spec)?,
                (Some(a), None) => vec![*a],
                (None, None) => unreachable!("clap requires alpha or grid"),
            };
            let s = settings(g, None)?;
            let res = commands::cmd_symfamily(*dim, &alphas, &s)?;
            if g.format == Format::Csv {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in &res.records {
                    w.serialize(r).map_err(|e| CovError::Numerical(e.to_string()))?;
                }
                let body = w.into_inner().map_err(|e| CovError::Numerical(e.to_string()))?;
                emit(g, &body)?;
                return Ok(true);
            }
            Outcome {
                report: res.report,
                passed: true,
            }
        }
    };
    emit(g, &json_body(&outcome.report)?)?;
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("covkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
