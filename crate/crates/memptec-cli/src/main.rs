//! Command-line front end: reproducible, config-driven runs of the
//! ingestion → extraction → training → evaluation → attack pipeline.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use pipeline::IngestArgs;

#[derive(Parser)]
#[command(name = "memptec", version, about = "Malicious package detection from registry metadata")]
struct Cli {
    /// Configuration file (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory artifacts are written to.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Registry cache directory (env: MEMPTEC_CACHE_DIR).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Worker threads; results are identical for any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Fixed observation instant (RFC 3339) for feature extraction.
    #[arg(long, global = true)]
    reference_time: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch and cache package documents from the registry.
    Ingest(IngestCli),
    /// Generate the seeded synthetic corpus.
    Synth {
        /// Number of malicious records.
        #[arg(long)]
        malicious: Option<usize>,
        /// Number of benign records.
        #[arg(long)]
        benign: Option<usize>,
    },
    /// Extract feature matrices to CSV.
    Extract {
        /// Feature sets to extract (existing_tec, memptec_e, memptec_d, memptec).
        #[arg(long, value_delimiter = ',')]
        feature_sets: Option<Vec<String>>,
    },
    /// Train models and save them to disk.
    Train {
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        feature_sets: Option<Vec<String>>,
    },
    /// Run the repeated-split evaluation across feature sets and algorithms.
    Evaluate {
        #[arg(long, value_delimiter = ',')]
        feature_sets: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        /// Number of repeated splits.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Manipulate malicious feature values from benign distributions.
    Attack {
        /// percentage, topn or information.
        #[arg(long)]
        kind: Option<String>,
        /// Percentage steps, e.g. 10,20,30.
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<f64>>,
        #[arg(long)]
        top_n: Option<usize>,
        /// permutation or exact_shapley.
        #[arg(long)]
        ranking: Option<String>,
        #[arg(long, value_delimiter = ',')]
        feature_sets: Option<Vec<String>>,
        /// Attack every row instead of the test split.
        #[arg(long)]
        all_rows: bool,
    },
    /// Shift monotone temporal/interaction features of malicious rows.
    Drift {
        /// temporal or interaction.
        #[arg(long)]
        kind: Option<String>,
        /// Ascending day/count schedule, e.g. 0,30,90.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<u64>>,
    },
    /// Merge run artifacts into one summary document.
    Report,
    /// Dump the feature catalog as CSV.
    Catalog {
        /// Include the extra name_special_char feature.
        #[arg(long)]
        extended: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IngestCli {
    /// Package names, comma separated.
    #[arg(long, value_delimiter = ',')]
    packages: Vec<String>,
    /// File with one package name per line.
    #[arg(long)]
    list: Option<PathBuf>,
    /// Also fetch repository interaction counts.
    #[arg(long)]
    with_interactions: bool,
    /// Label for records written to --out (0 benign, 1 malicious).
    #[arg(long, default_value_t = 0)]
    label: u8,
    /// Write the fetched corpus as JSON Lines.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Never touch the network; serve from cache only.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    max_concurrent: Option<usize>,
    /// Request rate budget (requests per second).
    #[arg(long)]
    rps: Option<f64>,
    #[arg(long)]
    registry_url: Option<String>,
    #[arg(long)]
    repo_api_url: Option<String>,
}

fn apply_global_overrides(cfg: &mut RunConfig, cli: &Cli) -> Result<(), String> {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(dir) = &cli.cache_dir {
        cfg.cache_dir = dir.clone();
    } else if let Ok(dir) = std::env::var("MEMPTEC_CACHE_DIR") {
        cfg.cache_dir = PathBuf::from(dir);
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(text) = &cli.reference_time {
        let parsed = memptec::pmi::parse_timestamp(text)
            .ok_or_else(|| format!("unparseable --reference-time {text:?}"))?;
        cfg.reference_time = Some(parsed);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), MainError> {
    let mut cfg = RunConfig::load(cli.config.as_ref()).map_err(MainError::invalid)?;
    apply_global_overrides(&mut cfg, &cli).map_err(MainError::Validation)?;

    match &cli.command {
        Command::Synth { malicious, benign } => {
            if let Some(n) = malicious {
                cfg.dataset.n_malicious = *n;
            }
            if let Some(n) = benign {
                cfg.dataset.n_benign = *n;
            }
        }
        Command::Extract { feature_sets } | Command::Train { feature_sets, .. } => {
            if let Some(sets) = feature_sets {
                cfg.evaluate.feature_sets = sets.clone();
            }
        }
        Command::Evaluate {
            feature_sets,
            algorithms,
            folds,
        } => {
            if let Some(sets) = feature_sets {
                cfg.evaluate.feature_sets = sets.clone();
            }
            if let Some(algos) = algorithms {
                cfg.evaluate.algorithms = algos.clone();
            }
            if let Some(k) = folds {
                cfg.evaluate.folds = *k;
            }
        }
        Command::Attack {
            kind,
            steps,
            top_n,
            ranking,
            feature_sets,
            all_rows,
        } => {
            if let Some(kind) = kind {
                cfg.attack.kind = match kind.as_str() {
                    "percentage" => config::AttackKind::Percentage,
                    "topn" => config::AttackKind::Topn,
                    "information" => config::AttackKind::Information,
                    other => {
                        return Err(MainError::Validation(format!(
                            "unknown attack kind {other:?}"
                        )))
                    }
                };
            }
            if let Some(steps) = steps {
                cfg.attack.steps = steps.clone();
            }
            if let Some(n) = top_n {
                cfg.attack.top_n = *n;
            }
            if let Some(r) = ranking {
                cfg.attack.ranking = match r.as_str() {
                    "permutation" => memptec::adversarial::RankMethod::Permutation,
                    "exact_shapley" => memptec::adversarial::RankMethod::ExactShapley,
                    other => {
                        return Err(MainError::Validation(format!(
                            "unknown ranking method {other:?}"
                        )))
                    }
                };
            }
            if let Some(sets) = feature_sets {
                cfg.attack.feature_sets = sets.clone();
            }
            if *all_rows {
                cfg.attack.attack_all_rows = true;
            }
        }
        Command::Drift { kind, schedule } => {
            if let Some(kind) = kind {
                cfg.drift.kind = match kind.as_str() {
                    "temporal" => config::DriftKindConfig::Temporal,
                    "interaction" => config::DriftKindConfig::Interaction,
                    other => {
                        return Err(MainError::Validation(format!(
                            "unknown drift kind {other:?}"
                        )))
                    }
                };
            }
            if let Some(s) = schedule {
                cfg.drift.schedule = s.clone();
            }
        }
        Command::Ingest(args) => {
            if args.offline {
                cfg.fetch.offline = true;
            }
            if let Some(n) = args.max_concurrent {
                cfg.fetch.max_concurrent = n;
            }
            if let Some(r) = args.rps {
                cfg.fetch.requests_per_second = r;
            }
            if let Some(u) = &args.registry_url {
                cfg.fetch.registry_url = u.clone();
            }
            if let Some(u) = &args.repo_api_url {
                cfg.fetch.repo_api_url = u.clone();
            }
        }
        Command::Report | Command::Catalog { .. } => {}
    }

    cfg.validate().map_err(MainError::invalid)?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .ok();
    }

    match cli.command {
        Command::Ingest(args) => {
            let mut packages = args.packages.clone();
            if let Some(list) = &args.list {
                let text = std::fs::read_to_string(list).map_err(MainError::runtime)?;
                packages.extend(
                    text.lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(str::to_string),
                );
            }
            if packages.is_empty() {
                return Err(MainError::Validation(
                    "ingest needs --packages or --list".into(),
                ));
            }
            let ingest = IngestArgs {
                packages,
                with_interactions: args.with_interactions,
                label: args.label,
                out: args.out.clone(),
                token: std::env::var("MEMPTEC_API_TOKEN").ok(),
            };
            let n = pipeline::run_ingest(&cfg, &ingest).map_err(MainError::runtime)?;
            println!("ingested {n} packages into {}", cfg.cache_dir.display());
        }
        Command::Synth { .. } => {
            let path = pipeline::run_synth(&cfg).map_err(MainError::runtime)?;
            println!("wrote {}", path.display());
        }
        Command::Extract { .. } => {
            let sets = cfg.evaluate.feature_sets.clone();
            for path in pipeline::run_extract(&cfg, &sets).map_err(MainError::runtime)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Train { algorithms, .. } => {
            let algos = algorithms.unwrap_or_else(|| cfg.evaluate.algorithms.clone());
            let sets = cfg.evaluate.feature_sets.clone();
            for path in pipeline::run_train(&cfg, &algos, &sets).map_err(MainError::runtime)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Evaluate { .. } => {
            let artifact = pipeline::run_evaluate(&cfg).map_err(MainError::runtime)?;
            for report in &artifact.reports {
                let acc = &report.mean_se["accuracy"];
                println!(
                    "{:12} {:5} accuracy {:.4} ± {:.4}",
                    report.feature_set, report.algorithm, acc.mean, acc.standard_error
                );
            }
            println!("wrote {}", cfg.output_dir.join("report.json").display());
        }
        Command::Attack { .. } => {
            let path = pipeline::run_attack(&cfg).map_err(MainError::runtime)?;
            println!("wrote {}", path.display());
        }
        Command::Drift { .. } => {
            let path = pipeline::run_drift(&cfg).map_err(MainError::runtime)?;
            println!("wrote {}", path.display());
        }
        Command::Report => {
            let path = pipeline::run_report(&cfg).map_err(MainError::runtime)?;
            println!("wrote {}", path.display());
        }
        Command::Catalog { extended, out } => {
            pipeline::run_catalog(&cfg, extended, out.as_ref()).map_err(MainError::runtime)?;
        }
    }
    Ok(())
}

enum MainError {
    Validation(String),
    Runtime(String),
}

impl MainError {
    fn invalid(e: impl std::fmt::Display) -> Self {
        MainError::Validation(e.to_string())
    }
    fn runtime(e: impl std::fmt::Display) -> Self {
        MainError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap usage problems count as validation errors
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(MainError::Validation(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(MainError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
