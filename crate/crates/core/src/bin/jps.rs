use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use jps_core::cli::{
    cmd_bmd_study, cmd_estimate, cmd_simulate, ingest_population, parse_methods, read_population,
    surrogate_population, write_population_csv, BmdStudyOptions, CategorizationRule, ColumnMap, EstimateOptions,
    IngestedPopulation, SimulateSummary, SimulationConfig,
};
use jps_core::harness::Execution;

/// Exit status when a scenario exceeded its failure budget.
const EXIT_FLAGGED: u8 = 2;

#[derive(Parser)]
#[command(name = "jps", version, about = "Judgment post-stratification estimators for ordinal populations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo relative-efficiency study from a TOML config
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of replications
        #[arg(long)]
        replications: Option<usize>,
        /// Output CSV (overrides `out` in the config; stdout when neither is set)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated methods replacing every study's list
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Exit 0 even when a scenario is flagged unreliable
        #[arg(long)]
        allow_flagged: bool,
        /// Run replications on one thread
        #[arg(long)]
        serial: bool,
    },
    /// Estimate proportions from a CSV of (value, rank) observations
    Estimate {
        file: PathBuf,
        #[arg(long)]
        set_size: Option<usize>,
        #[arg(long)]
        categories: Option<usize>,
        /// Comma-separated methods (srs, st, ml, iso, iso_no_empty, iso_minus, iso_plus, iso_star, sm, sm_star)
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bootstrap RE tables from a finite population (the synthetic surrogate by default)
    BmdStudy {
        /// Population CSV; omitted means the synthetic surrogate
        #[arg(long)]
        population: Option<PathBuf>,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [30, 60])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [3, 6])]
        set_size: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        replications: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        allow_flagged: bool,
        #[arg(long)]
        serial: bool,
    },
    /// Write the synthetic surrogate population as CSV
    Surrogate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ingest a population CSV and report proportions and ranker correlations
    Describe {
        file: PathBuf,
        #[command(flatten)]
        columns: ColumnArgs,
    },
}

#[derive(Args)]
struct ColumnArgs {
    #[arg(long, default_value = "outcome")]
    outcome: String,
    /// Ranking columns; default is every column named z<k>
    #[arg(long, value_delimiter = ',')]
    rankers: Option<Vec<String>>,
    /// Category cut points
    #[arg(long, value_delimiter = ',', default_values_t = [0.55, 0.79])]
    thresholds: Vec<f64>,
}

impl ColumnArgs {
    fn map(&self) -> ColumnMap {
        ColumnMap { id: Some("id".into()), outcome: self.outcome.clone(), rankers: self.rankers.clone().unwrap_or_default() }
    }

    fn rule(&self) -> Result<CategorizationRule> {
        CategorizationRule::new(self.thresholds.clone())
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn finish(summary: &SimulateSummary, allow_flagged: bool) -> ExitCode {
    eprintln!("{} scenarios, {} rows", summary.scenarios, summary.rows);
    if summary.flagged > 0 {
        eprintln!("warning: {} scenario(s) flagged unreliable (more than 10% failed replications)", summary.flagged);
        if !allow_flagged {
            return ExitCode::from(EXIT_FLAGGED);
        }
    }
    ExitCode::SUCCESS
}

fn surrogate() -> Result<IngestedPopulation> {
    let (records, names) = surrogate_population(1);
    let mut buf = Vec::new();
    write_population_csv(&mut buf, &records, &names)?;
    read_population(buf.as_slice(), &ColumnMap::default(), &CategorizationRule::default())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, seed, replications, out, methods, allow_flagged, serial } => {
            let mut cfg = SimulationConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replications {
                anyhow::ensure!(r > 0, "--replications must be at least 1");
                cfg.replications = r;
            }
            if let Some(m) = methods {
                parse_methods(&m)?;
                for study in cfg.studies.iter_mut() {
                    study.methods = m.clone();
                }
            }
            let plan = cfg.plan()?;
            for s in &plan.skipped {
                eprintln!("skipped grid point rho={} p2={} p3={}: {}", s.rho, s.p2, s.p3, s.reason);
            }
            let path = out.or(cfg.out.as_ref().map(PathBuf::from));
            let summary = cmd_simulate(&plan, execution(serial), output(path.as_deref())?)?;
            Ok(finish(&summary, allow_flagged))
        }
        Command::Estimate { file, set_size, categories, methods, out } => {
            let input = File::open(&file).with_context(|| format!("cannot open {}", file.display()))?;
            let opts = EstimateOptions { set_size, num_categories: categories, methods: methods.unwrap_or_default() };
            cmd_estimate(input, &opts, output(out.as_deref())?, io::stderr())
                .with_context(|| format!("estimating from {}", file.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BmdStudy { population, columns, n, set_size, replications, seed, out, allow_flagged, serial } => {
            let pop = match population {
                Some(path) => ingest_population(&path, &columns.map(), &columns.rule()?)?,
                None => {
                    eprintln!("using the synthetic surrogate population (not real data)");
                    surrogate()?
                }
            };
            eprint!("{}", pop.report());
            let opts = BmdStudyOptions {
                sample_sizes: n,
                set_sizes: set_size,
                replications,
                seed,
                execution: execution(serial),
                ..Default::default()
            };
            let summary = cmd_bmd_study(&pop, &opts, output(out.as_deref())?)?;
            Ok(finish(&summary, allow_flagged))
        }
        Command::Surrogate { seed, out } => {
            let (records, names) = surrogate_population(seed);
            write_population_csv(output(out.as_deref())?, &records, &names)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Describe { file, columns } => {
            let pop = ingest_population(&file, &columns.map(), &columns.rule()?)?;
            print!("{}", pop.report());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
