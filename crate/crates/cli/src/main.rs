use clap::{Args, Parser, Subcommand, ValueEnum};
use fblab::harness::{
    run_experiment, verify_criteria, Criterion, ExperimentConfig, ExperimentKind, FamilyKind, FieldSpec, Level,
    RunManifest, Suite, OUTPUT_ROOT_ENV,
};
use fblab::LabError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lab", version, about = "Form-bounded drift experiments: fields, mollification, PDE and SDE checks")]
struct Cli {
    /// Root directory for run outputs.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the form-bound of a field with a test-function family.
    Formbound {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 32)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = Family::Origin)]
        family: Family,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Run directory; overrides the output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the mollifier schedule b_m for the given levels.
    Mollify {
        #[command(flatten)]
        field: FieldArgs,
        /// Level m; repeat for a schedule (levels must increase).
        #[arg(long = "m", required = true)]
        levels: Vec<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a `solve` experiment from a config file.
    Solve(ConfigArgs),
    /// Run a `simulate` experiment from a config file.
    Simulate(ConfigArgs),
    /// Run any experiment config, whatever its kind.
    Run(ConfigArgs),
    /// Run the acceptance criteria.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
        /// Run only these criteria (by name); default all.
        #[arg(long = "criterion")]
        criteria: Vec<String>,
    },
    /// Print a config with every default filled in.
    Template {
        #[arg(long, default_value = "solve")]
        kind: String,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FieldArgs {
    /// Catalog id: zero, hardy, weak-ld (other fields need a config file).
    #[arg(long, default_value = "hardy")]
    field: String,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 0.04)]
    delta: f64,
    /// +1 attracting, −1 repelling.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    sign: f64,
    /// Hardy time amplitude, or weak-ld amplitude.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
    /// Take the field from this config instead of the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Origin,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

const EXIT_ERROR: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CRITERION: u8 = 3;

fn field_spec(a: &FieldArgs) -> Result<FieldSpec, LabError> {
    if let Some(path) = &a.config {
        return Ok(ExperimentConfig::load(path)?.field);
    }
    Ok(match a.field.as_str() {
        "zero" => FieldSpec::Zero { dim: a.dim },
        "hardy" => FieldSpec::Hardy {
            dim: a.dim,
            delta: a.delta,
            sign: a.sign,
            amplitude: a.amplitude,
            omega: a.omega,
        },
        "weak-ld" => FieldSpec::WeakLd {
            dim: a.dim,
            amplitude: a.amplitude,
        },
        other => {
            return Err(LabError::ConfigInvalid(format!(
                "field {other:?} cannot be set from flags; pass --config with a [field] table"
            )))
        }
    })
}

fn with_out(mut cfg: ExperimentConfig, out: Option<PathBuf>) -> ExperimentConfig {
    if let Some(o) = out {
        cfg.output_dir = Some(o.to_string_lossy().into_owned());
    }
    cfg
}

fn load_kind(args: ConfigArgs, expect: Option<ExperimentKind>) -> Result<ExperimentConfig, LabError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    if let Some(k) = expect {
        if cfg.kind != k {
            return Err(LabError::ConfigInvalid(format!(
                "{}: kind is {:?}, this subcommand runs {:?}",
                args.config.display(),
                cfg.kind.to_string(),
                k.to_string()
            )));
        }
    }
    Ok(with_out(cfg, args.out))
}

fn report(m: &RunManifest) -> ExitCode {
    for f in &m.files {
        println!("wrote {f}");
    }
    for c in &m.criteria {
        println!("{} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("config hash {}  ({:.1} s)", m.config_hash, m.wall_time_s);
    if m.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CRITERION)
    }
}

fn exit_for(e: &LabError) -> ExitCode {
    match e {
        LabError::ConfigInvalid(_)
        | LabError::InvalidParameter(_)
        | LabError::DimensionMismatch { .. }
        | LabError::QOutOfRange { .. }
        | LabError::POutOfRange { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_ERROR),
    }
}

fn run(cli: Cli) -> Result<ExitCode, LabError> {
    if let Some(root) = &cli.output_root {
        // the harness reads the root from the environment
        std::env::set_var(OUTPUT_ROOT_ENV, root);
    }
    let cfg = match cli.cmd {
        Command::Formbound {
            field,
            budget,
            family,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Formbound, field_spec(&field)?);
            cfg.grid.dim = cfg.field.dim();
            cfg.seed = seed;
            cfg.formbound.budget = budget;
            cfg.formbound.family = match family {
                Family::Origin => FamilyKind::Origin,
                Family::Random => FamilyKind::Random,
            };
            with_out(cfg, out)
        }
        Command::Mollify { field, levels, out } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Mollify, field_spec(&field)?);
            cfg.grid.dim = cfg.field.dim();
            cfg.mollify.levels = levels;
            with_out(cfg, out)
        }
        Command::Solve(a) => load_kind(a, Some(ExperimentKind::Solve))?,
        Command::Simulate(a) => load_kind(a, Some(ExperimentKind::Simulate))?,
        Command::Run(a) => load_kind(a, None)?,
        Command::Verify { level, criteria } => {
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            let which: Vec<Criterion> = if criteria.is_empty() {
                Criterion::ALL.to_vec()
            } else {
                criteria
                    .iter()
                    .map(|n| {
                        Criterion::from_name(n).ok_or_else(|| LabError::ConfigInvalid(format!("unknown criterion {n:?}")))
                    })
                    .collect::<Result<_, _>>()?
            };
            let rep = verify_criteria(&Suite::new(level), &which, &fblab::harness::output_root())?;
            println!("artifacts in {}", rep.dir.display());
            return Ok(if rep.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CRITERION)
            });
        }
        Command::Template { kind } => {
            let kind: ExperimentKind = kind.parse()?;
            print!("{}", ExperimentConfig::new(kind, FieldSpec::default()).to_toml());
            return Ok(ExitCode::SUCCESS);
        }
    };
    cfg.validate()?;
    Ok(report(&run_experiment(&cfg)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
