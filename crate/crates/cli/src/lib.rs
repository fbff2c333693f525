//! Command-line front end for `turnlayer-core`.
//!
//! ```text
//! turnlayer analyze   --problem ltp1
//! turnlayer expand    --problem ntp1 --order 1 --out run/
//! turnlayer validate  --problem ltp1 --order 1 --eps 1e-2,3e-3,1e-3
//! turnlayer residuals --problem ltp1 --eps 1e-3 --margin 0.1
//! turnlayer list-problems
//! ```
//!
//! Exit codes: 0 on success, 1 when the problem violates a structural
//! condition of the construction, 2 on usage errors (bad flags, unknown
//! problem, unwritable output).

pub mod format;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use turnlayer_core::expansion::{self, ExpansionBundle, ExpansionOptions};
use turnlayer_core::matching::LayerConfig;
use turnlayer_core::validate::{self, ConvergenceStudy, StudyOptions};
use turnlayer_core::{layer, pencil, problems, regular, BvpProblem, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONDITION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "turnlayer", version, about = "Boundary-layer asymptotics for turning-point DAE boundary value problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify the pencil and check the structural conditions.
    Analyze(AnalyzeArgs),
    /// Build the expansion and export its terms as CSV.
    Expand(ExpandArgs),
    /// Compare the expansion with the reference solver over several epsilon.
    Validate(StudyArgs),
    /// Interior and boundary residuals of the expansion.
    Residuals(ResidualArgs),
    /// Print the names of the built-in problems.
    ListProblems,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    #[arg(long, value_name = "NAME")]
    problem: String,
    /// Replace the problem's interval length.
    #[arg(long, value_name = "T")]
    horizon: Option<f64>,
    #[arg(long, value_name = "X", default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long, value_name = "L", default_value_t = 0)]
    order: usize,
    /// Nodes of each boundary-layer grid.
    #[arg(long, value_name = "N", default_value_t = layer::DEFAULT_NODES)]
    grid_nodes: usize,
    /// Length of the start-layer window in the stretched variable.
    #[arg(long, value_name = "X")]
    tau_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DataFormat {
    Csv,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    /// Also write conditions.csv into this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExpandArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    build: BuildArgs,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    format: DataFormat,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    build: BuildArgs,
    #[arg(long, value_name = "COMMA_LIST", value_delimiter = ',', default_values_t = validate::STANDARD_EPSILONS)]
    eps: Vec<f64>,
    /// Reference mesh intervals (a multiple of 4).
    #[arg(long, value_name = "N", default_value_t = 16_000)]
    intervals: usize,
    /// Interior residuals are measured on [margin, T - margin].
    #[arg(long, value_name = "X", default_value_t = 0.1)]
    margin: f64,
    /// Write validate.csv into this directory instead of standard output.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    format: DataFormat,
}

#[derive(Debug, Args)]
struct ResidualArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    build: BuildArgs,
    #[arg(long, value_name = "COMMA_LIST", value_delimiter = ',', default_values_t = validate::STANDARD_EPSILONS)]
    eps: Vec<f64>,
    #[arg(long, value_name = "X", default_value_t = 0.1)]
    margin: f64,
    #[arg(long, value_name = "N", default_value_t = 201)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    format: DataFormat,
}

/// Failure of a subcommand, already classified by exit code.
#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) if e.is_condition_violation() => EXIT_CONDITION,
            _ => EXIT_USAGE,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io(e) => format!("output: {e}"),
        }
    }
}

/// Runs the command line `argv` (without the program name) with standard
/// output and error, returning the exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] with explicit output streams.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args = std::iter::once(OsString::from("turnlayer")).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(&a, out),
        Command::Expand(a) => expand(&a, out),
        Command::Validate(a) => run_validate(&a, out),
        Command::Residuals(a) => run_residuals(&a, out),
        Command::ListProblems => list_problems(out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.exit_code()
        }
    }
}

fn load_problem(args: &ProblemArgs) -> Result<BvpProblem, Error> {
    let problem = problems::get(&args.problem)?;
    let Some(horizon) = args.horizon else {
        return Ok(problem);
    };
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("--horizon must be positive, got {horizon}")));
    }
    Ok(match args.problem.as_str() {
        "ntp1" => problems::nonlinear_turning(horizon),
        _ => problems::linear_turning(horizon),
    })
}

fn expansion_options(problem: &ProblemArgs, build: &BuildArgs) -> Result<ExpansionOptions, Error> {
    if !(problem.tol > 0.0) {
        return Err(Error::InvalidInput(format!("--tol must be positive, got {}", problem.tol)));
    }
    if build.grid_nodes < 16 {
        return Err(Error::InvalidInput(format!("--grid-nodes must be at least 16, got {}", build.grid_nodes)));
    }
    if let Some(t) = build.tau_max {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("--tau-max must be positive, got {t}")));
        }
    }
    Ok(ExpansionOptions {
        order: build.order,
        tol: problem.tol,
        layers: LayerConfig {
            nodes: build.grid_nodes,
            tau_max: build.tau_max,
            xi_min: None,
            tol: problem.tol,
        },
        ..ExpansionOptions::default()
    })
}

fn check_epsilons(eps: &[f64], at_least: usize) -> Result<Vec<f64>, Error> {
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {bad}")));
    }
    let mut sorted = eps.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    if sorted.len() < at_least {
        return Err(Error::InvalidInput(format!("need at least {at_least} distinct values of epsilon")));
    }
    Ok(sorted)
}

fn create_in(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let problem = load_problem(&args.problem)?;
    let reduced = regular::solve_reduced(&problem, regular::DEFAULT_DEGREE, args.problem.tol)?;
    let c = pencil::classify_and_verify(&problem, &reduced, pencil::DEFAULT_T_FLOOR, pencil::DEFAULT_GRID)?;
    match args.format {
        ReportFormat::Text => {
            writeln!(out, "problem {} on [0, {}]", problem.name, problem.horizon)?;
            write!(out, "{}", format::report_text(&c.report, c.structure.as_ref()))?;
        }
        ReportFormat::Csv => format::write_conditions(&mut *out, &c.report)?,
    }
    if let Some(dir) = &args.out {
        format::write_conditions(create_in(dir, "conditions.csv")?, &c.report)?;
    }
    Ok(if c.report.all_pass() && c.structure.is_some() { EXIT_OK } else { EXIT_CONDITION })
}

fn expand(args: &ExpandArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let DataFormat::Csv = args.format;
    let problem = load_problem(&args.problem)?;
    let bundle = expansion::build(&problem, &expansion_options(&args.problem, &args.build)?)?;
    format::write_series(create_in(&args.out, "series.csv")?, &bundle)?;
    format::write_layers(create_in(&args.out, "layers.csv")?, &bundle)?;
    format::write_constants(create_in(&args.out, "constants.csv")?, &bundle)?;
    writeln!(out, "problem {}, order {}", problem.name, bundle.order)?;
    for c in &bundle.constants {
        let start: Vec<String> = c.start.iter().map(|&v| format::float(v)).collect();
        let end: Vec<String> = c.end.iter().map(|&v| format::float(v)).collect();
        writeln!(
            out,
            "order {}: start [{}], end [{}], boundary residual {}",
            c.order,
            start.join(", "),
            end.join(", "),
            format::float(c.residual)
        )?;
    }
    writeln!(out, "wrote series.csv, layers.csv, constants.csv to {}", args.out.display())?;
    Ok(EXIT_OK)
}

/// Measurements at every `ε` in parallel, joined into one study.
pub fn parallel_study(
    bundle: &ExpansionBundle,
    epsilons: &[f64],
    opts: &StudyOptions,
) -> Result<ConvergenceStudy, Error> {
    let rows = epsilons
        .par_iter()
        .map(|&e| validate::study_row(bundle, e, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConvergenceStudy::from_rows(bundle.order, rows))
}

fn run_validate(args: &StudyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let DataFormat::Csv = args.format;
    let problem = load_problem(&args.problem)?;
    let eps = check_epsilons(&args.eps, 3)?;
    if args.intervals < 4 || args.intervals % 4 != 0 {
        return Err(Error::InvalidInput(format!("--intervals must be a positive multiple of 4, got {}", args.intervals)).into());
    }
    let bundle = expansion::build(&problem, &expansion_options(&args.problem, &args.build)?)?;
    let mut opts = StudyOptions {
        interior_margin: args.margin,
        ..StudyOptions::default()
    };
    opts.reference.intervals = args.intervals;
    let study = parallel_study(&bundle, &eps, &opts)?;
    match &args.out {
        Some(dir) => format::write_study(create_in(dir, "validate.csv")?, &study)?,
        None => {
            format::write_study(&mut *out, &study)?;
            writeln!(out)?;
        }
    }
    write!(out, "{}", format::study_summary(&problem.name, &study))?;
    Ok(EXIT_OK)
}

fn run_residuals(args: &ResidualArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let DataFormat::Csv = args.format;
    let problem = load_problem(&args.problem)?;
    let eps = check_epsilons(&args.eps, 1)?;
    if !(args.margin > 0.0 && args.margin < 0.5 * problem.horizon) {
        return Err(Error::InvalidInput(format!("--margin must lie in (0, T/2), got {}", args.margin)).into());
    }
    let bundle = expansion::build(&problem, &expansion_options(&args.problem, &args.build)?)?;
    let mut w = csv::Writer::from_writer(&mut *out);
    w.write_record(["epsilon", "interior_residual", "boundary_residual"])?;
    for e in eps {
        let (interior, boundary) = validate::residuals(&bundle, e, args.margin, args.samples);
        w.write_record([format::float(e), format::float(interior), format::float(boundary)])?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn list_problems(out: &mut dyn Write) -> Result<i32, Failure> {
    for name in problems::list() {
        let p = problems::get(name)?;
        writeln!(out, "{name}\tn = {}, T = {}", p.dim(), p.horizon)?;
    }
    Ok(EXIT_OK)
}
