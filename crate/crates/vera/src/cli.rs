use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vera_core::calibration::{import_observations, recommend_parameters, FitConfig, ParamPath};
use vera_core::compiler::compile_seeded;
use vera_core::engine::{simulate, EngineKind, RunConfig};
use vera_core::fixtures::{self, Competition, LotkaVolterra};
use vera_core::{validate_model, ConceptualModel, Library, TraitStore};

use crate::api::{self, ServeConfig};

#[derive(Debug, Parser)]
#[command(name = "vera", version, about = "Conceptual ecological modeling workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "library")]
        library: PathBuf,
        /// Trait CSV loaded at startup.
        #[arg(long)]
        traits: Option<PathBuf>,
        /// Per-request limit for simulate and fit, in seconds.
        #[arg(long, default_value_t = 60)]
        timeout_secs: u64,
    },
    /// Print the validation report of a model file. Exits 2 if invalid.
    Validate { model: PathBuf },
    /// Compile a model file and print the simulation spec with warnings.
    Compile {
        model: PathBuf,
        #[arg(long)]
        traits: Option<PathBuf>,
    },
    /// Simulate a model file and print the time series.
    Simulate(SimulateArgs),
    /// Fit free parameters of a model file to an observation CSV.
    Fit(FitArgs),
    /// Manage a model library directory.
    Models {
        #[arg(long, default_value = "library")]
        library: PathBuf,
        #[command(subcommand)]
        action: ModelsAction,
    },
    /// Manage a trait store kept as a CSV file.
    Traits {
        #[arg(long)]
        store: PathBuf,
        #[command(subcommand)]
        action: TraitsAction,
    },
    /// Print a built-in example model.
    Example { name: ExampleName },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[arg(long, value_enum, default_value_t = EngineArg::Stochastic)]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long)]
    pub traits: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub observations: PathBuf,
    /// Free parameter, `field@entity` or `field@source:kind:target`. Repeatable.
    #[arg(long = "free", required = true)]
    pub free: Vec<ParamPath>,
    #[arg(long)]
    pub budget: usize,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Print the full evaluation trace.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EngineArg {
    Stochastic,
    Ode,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Stochastic => EngineKind::Stochastic,
            EngineArg::Ode => EngineKind::Ode,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum ModelsAction {
    List {
        #[arg(long)]
        filter: Option<String>,
    },
    /// Create or update the model in a JSON file.
    Save {
        model: PathBuf,
        #[arg(long, value_delimiter = ',')]
        tags: Option<Vec<String>>,
    },
    Show {
        id: String,
    },
    Copy {
        id: String,
        #[arg(long)]
        name: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum TraitsAction {
    /// Ingest a trait CSV into the store, reporting rejected rows.
    Import {
        csv: PathBuf,
    },
    Lookup {
        query: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExampleName {
    Exponential,
    Logistic,
    PredatorPrey,
    Competition,
    Kudzu,
}

impl ExampleName {
    pub fn model(self) -> ConceptualModel {
        match self {
            ExampleName::Exponential => fixtures::exponential(100.0, 0.1, 0.0),
            ExampleName::Logistic => fixtures::logistic(10.0, 0.5, 1000.0),
            ExampleName::PredatorPrey => fixtures::predator_prey(LotkaVolterra::default()),
            ExampleName::Competition => fixtures::competition(Competition::default()),
            ExampleName::Kudzu => fixtures::kudzu(0.001),
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // A closed pipe (`vera ... | head`) is not an error.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn read_model(path: &Path) -> anyhow::Result<ConceptualModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ConceptualModel::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_traits(path: Option<&Path>) -> anyhow::Result<TraitStore> {
    let mut store = TraitStore::new();
    if let Some(path) = path {
        if path.exists() {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            store
                .ingest_traits(file)
                .with_context(|| format!("reading {}", path.display()))?;
        }
    }
    Ok(store)
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve {
            port,
            library,
            traits,
            timeout_secs,
        } => {
            let config = ServeConfig {
                port,
                library,
                traits,
                run_timeout: Duration::from_secs(timeout_secs),
            };
            tokio::runtime::Runtime::new()?.block_on(api::serve(config))?;
        }
        Command::Validate { model } => {
            let report = validate_model(&read_model(&model)?);
            print_json(&report)?;
            if !report.is_valid() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Compile { model, traits } => {
            let store = read_traits(traits.as_deref())?;
            print_json(&compile_seeded(&read_model(&model)?, &store)?)?;
        }
        Command::Simulate(args) => {
            let store = read_traits(args.traits.as_deref())?;
            let compiled = compile_seeded(&read_model(&args.model)?, &store)?;
            for w in &compiled.warnings {
                tracing::warn!(subject = %w.subject, "{}", w.message);
            }
            let config = RunConfig {
                duration: args.duration,
                dt: args.dt,
                seed: args.seed,
                record_every: args.record_every,
            };
            print_json(&simulate(&compiled.spec, &config, args.engine.into(), args.runs)?)?;
        }
        Command::Fit(args) => {
            let model = read_model(&args.model)?;
            let file =
                File::open(&args.observations).with_context(|| format!("opening {}", args.observations.display()))?;
            let imported = import_observations(file, &args.observations.display().to_string())?;
            for w in &imported.warnings {
                tracing::warn!("{w}");
            }
            let mut cfg = FitConfig::with_budget(args.budget);
            if let Some(dt) = args.dt {
                cfg.dt = dt;
            }
            let mut result = recommend_parameters(&model, &imported.observations, &args.free, &cfg)?;
            if !args.trace {
                result.trace.clear();
            }
            print_json(&result)?;
        }
        Command::Models { library, action } => {
            let lib = Library::open(&library)?;
            match action {
                ModelsAction::List { filter } => print_json(&lib.list(filter.as_deref())?)?,
                ModelsAction::Save { model, tags } => {
                    let id = lib.save(&read_model(&model)?, tags)?;
                    println!("{id}");
                }
                ModelsAction::Show { id } => print_json(&lib.load(&id)?)?,
                ModelsAction::Copy { id, name } => println!("{}", lib.copy(&id, &name)?),
            }
        }
        Command::Traits { store, action } => match action {
            TraitsAction::Import { csv } => {
                let mut traits = read_traits(Some(&store))?;
                let file = File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
                let report = traits.ingest_traits(file)?;
                for row in &report.rejected {
                    eprintln!("line {}: {}: {}", row.line, row.field, row.message);
                }
                let tmp = store.with_extension("csv.tmp");
                traits.write_csv(File::create(&tmp)?)?;
                std::fs::rename(&tmp, &store)?;
                println!("loaded {} rejected {}", report.loaded, report.rejected.len());
            }
            TraitsAction::Lookup { query } => {
                if !store.exists() {
                    bail!("trait store {} does not exist", store.display());
                }
                print_json(&read_traits(Some(&store))?.lookup_species(&query))?;
            }
        },
        Command::Example { name } => print_json(&name.model())?,
    }
    Ok(ExitCode::SUCCESS)
}
