use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use structcot::error::{Error, Result};
use structcot::manifest::{ExperimentManifest, KappaMode, Overrides, ResolvedManifest};
use structcot::{ingest, report, runner, sheets, Gateway, RunOptions, RunStore};
use structcot_core::{parse_response, AbstainPolicy};

/// Structured chain-of-thought experiment harness for DDoS flow classification.
#[derive(Parser)]
#[command(name = "structcot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest, its dataset and template packs without sending requests.
    Validate(Common),
    /// Send a tiny request to every model endpoint.
    Health(Common),
    /// Execute the model × condition × record grid.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue a partial store, skipping trials already persisted.
        #[arg(long)]
        resume: bool,
    },
    /// Write blinded rating sheets for two raters and the sealed key.
    ExportSheets {
        #[command(flatten)]
        common: Common,
        /// Runs to sample for rating (default: all).
        #[arg(long)]
        sample_size: Option<usize>,
        /// Seed for sampling and shuffling (default: manifest rating.seed).
        #[arg(long = "sheet-seed")]
        sheet_seed: Option<u64>,
    },
    /// Validate completed sheets and bind the scores to their runs.
    ImportRatings {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sheet_a: Option<PathBuf>,
        #[arg(long)]
        sheet_b: Option<PathBuf>,
        #[arg(long)]
        key: Option<PathBuf>,
    },
    /// Write classification, reasoning, kappa, Pareto, size-gain and compliance tables.
    Report {
        #[command(flatten)]
        common: Common,
        /// Pooled (one kappa per dimension) or stratified per model and condition.
        #[arg(long)]
        kappa: Option<KappaMode>,
    },
    /// Parse one raw model output and print the analysis as JSON.
    ParseDebug {
        /// File holding the raw output; `-` or absent reads stdin.
        input: Option<PathBuf>,
        /// Schema file used for citation checks (default: bundled SDN DDoS layout).
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory (default: the manifest's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the dataset sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of model names.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Keep only this named ablation set.
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long)]
    abstain_policy: Option<AbstainPolicy>,
}

impl Common {
    fn load(&self, kappa: Option<KappaMode>) -> Result<ResolvedManifest> {
        let overrides = Overrides {
            output_dir: self.out.clone(),
            seed: self.seed,
            models: self.models.clone(),
            ablation: self.ablation.clone(),
            abstain_policy: self.abstain_policy,
            kappa,
        };
        ExperimentManifest::load_with(&self.manifest, &overrides)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[E_USAGE]: {first} (see --help)");
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Validate(common) => {
            let manifest = common.load(None)?;
            let prepared = runner::prepare(&manifest)?;
            for model in &manifest.manifest.models {
                model.credential()?;
            }
            let dist = prepared.sample.distribution();
            println!(
                "ok: manifest {} | dataset {} rows, sample {} (normal {}, attack {}) | {} model(s) × {} condition(s) × {} record(s) = {} trials",
                &manifest.digest[..12],
                prepared.dataset.total_rows,
                prepared.sample.records.len(),
                dist.normal,
                dist.attack,
                manifest.manifest.models.len(),
                prepared.conditions.len(),
                prepared.sample.records.len(),
                prepared.trial_count()
            );
            Ok(())
        }
        Command::Health(common) => {
            let manifest = common.load(None)?;
            let gateway = Gateway::new(manifest.manifest.gateway.clone());
            let mut first_error = None;
            for model in &manifest.manifest.models {
                match gateway.health_check(model) {
                    Ok(h) => println!("ok {} {} HTTP {} {} ms", h.model, h.endpoint_url, h.http_status, h.latency_ms),
                    Err(e) => {
                        println!("fail {} {}: {e}", model.name, model.endpoint_url);
                        first_error.get_or_insert(e);
                    }
                }
            }
            first_error.map_or(Ok(()), Err)
        }
        Command::Run { common, resume } => {
            let manifest = common.load(None)?;
            let prepared = runner::prepare(&manifest)?;
            let gateway = Gateway::new(manifest.manifest.gateway.clone());
            let store = RunStore::new(manifest.runs_dir());
            let summary = runner::run(&prepared, &gateway, &store, RunOptions { resume })?;
            println!(
                "scheduled {} | skipped {} | executed {} | failed {} | store {}",
                summary.scheduled,
                summary.skipped,
                summary.executed,
                summary.failed,
                store.dir().display()
            );
            Ok(())
        }
        Command::ExportSheets {
            common,
            sample_size,
            sheet_seed,
        } => {
            let manifest = common.load(None)?;
            let runs = RunStore::new(manifest.runs_dir()).load()?;
            let rating = &manifest.manifest.rating;
            let paths = sheets::export_sheets(
                &runs,
                &rating.dimensions,
                sample_size.or(rating.sample_size),
                sheet_seed.unwrap_or(rating.seed),
                &manifest.sheets_dir(),
                &manifest.keys_dir(),
            )?;
            println!(
                "sheets {} and {} | rubric {} | key {}",
                paths.sheet_a.display(),
                paths.sheet_b.display(),
                paths.rubric.display(),
                paths.key.display()
            );
            Ok(())
        }
        Command::ImportRatings {
            common,
            sheet_a,
            sheet_b,
            key,
        } => {
            let manifest = common.load(None)?;
            let runs = RunStore::new(manifest.runs_dir()).load()?;
            let sheet_a = sheet_a.unwrap_or_else(|| manifest.sheets_dir().join(sheets::SHEET_A));
            let sheet_b = sheet_b.unwrap_or_else(|| manifest.sheets_dir().join(sheets::SHEET_B));
            let key = key.unwrap_or_else(|| manifest.keys_dir().join(sheets::KEY_FILE));
            let bound = sheets::import_ratings(&sheet_a, &sheet_b, &key, &runs)?;
            let out = manifest.ratings_dir().join(sheets::BOUND_FILE);
            sheets::write_bound(&out, &bound)?;
            println!("bound {} rated runs → {}", bound.rater_a.len(), out.display());
            Ok(())
        }
        Command::Report { common, kappa } => {
            let manifest = common.load(kappa)?;
            let runs = RunStore::new(manifest.runs_dir()).load()?;
            let bound_path = manifest.ratings_dir().join(sheets::BOUND_FILE);
            let ratings = if bound_path.exists() {
                Some(sheets::read_bound(&bound_path)?)
            } else {
                None
            };
            let bundle = report::build_report(&manifest, &runs, ratings.as_ref())?;
            let written = report::write_report(&bundle, &manifest.report_dir())?;
            for notice in &bundle.notices {
                println!("notice: {notice}");
            }
            println!("wrote {} files to {}", written.len(), manifest.report_dir().display());
            Ok(())
        }
        Command::ParseDebug { input, schema } => {
            let schema = match schema {
                Some(p) => ingest::load_schema(&p)?,
                None => ingest::default_schema(),
            };
            let raw = read_input(input.as_deref())?;
            let parsed = parse_response(&raw, &schema);
            println!("{}", serde_json::to_string_pretty(&parsed).expect("analysis serializes"));
            Ok(())
        }
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => {
            let bytes = std::fs::read(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
            Ok(String::from_utf8_lossy(&bytes).into_owned())
        }
        _ => {
            let mut bytes = Vec::new();
            std::io::stdin().read_to_end(&mut bytes).map_err(|source| Error::Io {
                path: PathBuf::from("<stdin>"),
                source,
            })?;
            Ok(String::from_utf8_lossy(&bytes).into_owned())
        }
    }
}
