use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use gblb_core::dataset::{
    load_arff, load_csv, parse_label_xml, synth_dataset, CsvLabels, Imputation, LabelSpec,
};
use gblb_core::experiment::{format_comparison, format_report};
use gblb_core::{
    compare_runs, run_experiment, train, BinConfig, Dataset, ExperimentConfig, LossFunction,
    RunReport, TrainConfig,
};

/// Gradient-boosted multi-label rule learning with optional label binning.
#[derive(Debug, Parser)]
#[command(name = "gblb", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare two run reports: speedup of B over A and metric deltas.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the comparison as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Arff,
    Csv,
    Synth,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Loss {
    /// Example-wise logistic loss (non-decomposable)
    Exwlog,
    /// Label-wise logistic loss (decomposable)
    Lwlog,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Impute {
    None,
    Meanmode,
}

#[derive(Debug, Clone, Copy)]
struct SynthSpec {
    examples: usize,
    attributes: usize,
    labels: usize,
    correlation: f64,
}

fn parse_synth(s: &str) -> Result<SynthSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [n, a, l, c] = parts.as_slice() else {
        return Err("expected n,a,l,corr".into());
    };
    let int = |x: &str| x.parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok(SynthSpec {
        examples: int(n)?,
        attributes: int(a)?,
        labels: int(l)?,
        correlation: c.parse().map_err(|e| format!("{c:?}: {e}"))?,
    })
}

fn parse_bins(s: &str) -> Result<Option<BinConfig>, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let config = BinConfig::from_str(s).map_err(|e| e.to_string())?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(Some(config))
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Dataset file (ARFF or CSV).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of trailing label columns.
    #[arg(long, conflicts_with_all = ["labels_xml", "label_prefix"])]
    labels: Option<usize>,
    /// XML file listing the label attributes (ARFF only).
    #[arg(long)]
    labels_xml: Option<PathBuf>,
    /// Header prefix marking label columns (CSV only).
    #[arg(long)]
    label_prefix: Option<String>,
    /// Input format; inferred from the file extension or --synth when absent.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Synthetic dataset `n,a,l,corr`.
    #[arg(long, value_parser = parse_synth)]
    synth: Option<SynthSpec>,
    #[arg(long, value_enum, default_value = "exwlog")]
    loss: Loss,
    #[arg(long, default_value_t = 5000)]
    rules: usize,
    #[arg(long, default_value_t = 0.3)]
    shrinkage: f64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    /// `none`, a fraction of the label count, an absolute count, or `per-label`.
    #[arg(long, default_value = "none", value_parser = parse_bins)]
    bins: std::option::Option<BinConfig>,
    /// Fraction of attributes drawn per rule (default: square root of the count).
    #[arg(long)]
    feature_sample: Option<f64>,
    /// Train every rule on all examples instead of a bootstrap sample.
    #[arg(long)]
    no_bagging: bool,
    /// Cross-validation folds; 1 trains and evaluates on the whole dataset.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "none")]
    impute: Impute,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Train on the whole dataset and write the ensemble here (`.txt` for text, JSON otherwise).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn usage_error(message: impl std::fmt::Display) -> ! {
    Cli::command()
        .error(ErrorKind::MissingRequiredArgument, message)
        .exit()
}

fn load(args: &RunArgs) -> anyhow::Result<Dataset> {
    let format = args.format.unwrap_or_else(|| {
        if args.synth.is_some() {
            Format::Synth
        } else if args
            .data
            .as_deref()
            .and_then(Path::extension)
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            Format::Csv
        } else {
            Format::Arff
        }
    });
    let imputation = match args.impute {
        Impute::None => Imputation::None,
        Impute::Meanmode => Imputation::MeanMode,
    };
    if let Format::Synth = format {
        let Some(s) = args.synth else {
            usage_error("--format synth requires --synth n,a,l,corr");
        };
        return Ok(synth_dataset(
            s.examples,
            s.attributes,
            s.labels,
            s.correlation,
            args.seed,
        )?);
    }
    let Some(path) = &args.data else {
        usage_error("the following required argument was not provided: --data <DATA>");
    };
    let dataset = match format {
        Format::Arff => {
            let spec = match (&args.labels_xml, args.labels) {
                (Some(xml), _) => {
                    let text = std::fs::read_to_string(xml)
                        .with_context(|| format!("reading {}", xml.display()))?;
                    LabelSpec::Names(parse_label_xml(&text)?)
                }
                (None, Some(n)) => LabelSpec::Trailing(n),
                (None, None) => usage_error("ARFF input requires --labels N or --labels-xml PATH"),
            };
            load_arff(path, &spec, imputation)?
        }
        Format::Csv => {
            let spec = match (&args.label_prefix, args.labels) {
                (Some(prefix), _) => CsvLabels::Prefix(prefix.clone()),
                (None, Some(n)) => CsvLabels::Trailing(n),
                (None, None) => {
                    usage_error("CSV input requires --labels N or --label-prefix PREFIX")
                }
            };
            load_csv(path, &spec, imputation)?
        }
        Format::Synth => unreachable!(),
    };
    Ok(dataset)
}

fn run(args: &RunArgs) -> anyhow::Result<()> {
    let dataset = load(args)?;
    let config = ExperimentConfig {
        train: TrainConfig {
            loss: match args.loss {
                Loss::Exwlog => LossFunction::ExampleWiseLogistic,
                Loss::Lwlog => LossFunction::LabelWiseLogistic,
            },
            rule_count: args.rules,
            shrinkage: args.shrinkage,
            l2_weight: args.l2,
            bin_config: args.bins,
            feature_sample_fraction: args.feature_sample,
            instance_sampling: !args.no_bagging,
            seed: args.seed,
        },
        folds: args.folds,
        threads: args.threads,
    };
    let report = run_experiment(&dataset, &config)?;
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_json()?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{}", format_report(&report));

    if let Some(path) = &args.model {
        let (ensemble, _) = train(&dataset.view(), &config.train)?;
        let text = if path.extension().is_some_and(|e| e == "txt") {
            ensemble.to_text()
        } else {
            ensemble.to_json()?
        };
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn read_report(path: &Path) -> anyhow::Result<RunReport> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunReport::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn compare(a: &Path, b: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let comparison = compare_runs(&read_report(a)?, &read_report(b)?)?;
    if let Some(out) = out {
        std::fs::write(out, serde_json::to_string_pretty(&comparison)?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{}", format_comparison(&comparison));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Compare { a, b, out }) => compare(a, b, out.as_deref()),
        None => {
            if cli.run.folds == 0 {
                Cli::command()
                    .error(ErrorKind::ValueValidation, "--folds must be at least 1")
                    .exit();
            }
            run(&cli.run)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
