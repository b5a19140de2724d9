//! Batch frontend: one process runs one job against a JSON input file and
//! writes one JSON output file atomically. Exit codes: 0 success, 2 domain
//! error (with a machine-readable error record at the output path), 3 budget
//! exhaustion. Identical jobs produce byte-identical outputs regardless of
//! the thread setting.

mod jobs;
mod schemas;

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adelikit_core::arith::Place;
use adelikit_core::error::Error;
use jobs::Flags;
use schemas::{ErrorBody, ErrorRecord};

#[derive(Parser)]
#[command(name = "adelikit", version, about = "exact-arithmetic batch jobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct JobArgs {
    /// input JSON file
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// output JSON file (written atomically)
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
    /// truncation order for series work
    #[arg(long, default_value_t = 10)]
    order: usize,
    /// coefficient window for radius/height profiling
    #[arg(long, default_value_t = 64)]
    window: usize,
    /// comma-separated places ("2,3,inf") or "auto"
    #[arg(long, default_value = "auto")]
    places: String,
    /// search budget for oracles
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// seed pinned by the corpus; every batch job is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// worker threads for per-place fan-out (output is identical for any value)
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// quotient-norm profile of a coset across all places
    Norm(JobArgs),
    /// reduced Gröbner basis of an ideal
    Groebner(JobArgs),
    /// truncated series arithmetic, composition, inversion, adelicity
    Series(JobArgs),
    /// power-series solution of B∘A = C, or a full chart parameterization
    SolveTube(JobArgs),
    /// flattening projector on a chart
    Flatten(JobArgs),
    /// exact tube membership of a rational point at a finite place
    TubeMember(JobArgs),
    /// refinement of one adelic tube inside another
    RefineTube(JobArgs),
    /// flat section of a log connection from a kernel vector
    FlatSection(JobArgs),
    /// per-place radius-of-convergence slopes
    Radius(JobArgs),
    /// relevant places for a point and a system
    Relevant(JobArgs),
    /// truncated height of a system, or the Weil height of a point
    Height(JobArgs),
    /// v-adic evaluation of a homogeneous relation
    Relation(JobArgs),
    /// monodromy weight filtration of a nilpotent matrix
    WeightFiltration(JobArgs),
    /// Steenbrink first-page dimensions from strata data
    Steenbrink(JobArgs),
    /// Picard-jump threshold
    Threshold(JobArgs),
}

fn parse_places(s: &str) -> Result<Option<Vec<Place>>, Error> {
    if s == "auto" {
        return Ok(None);
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let place = if part == "inf" {
            Place::Infinite
        } else if let Some(p) = part.strip_prefix("p:") {
            Place::finite(
                p.parse()
                    .map_err(|_| Error::Invalid(format!("bad place {part:?}")))?,
            )?
        } else {
            Place::finite(
                part.parse()
                    .map_err(|_| Error::Invalid(format!("bad place {part:?}")))?,
            )?
        };
        out.push(place);
    }
    if out.is_empty() {
        return Err(Error::Invalid("empty places list".into()));
    }
    Ok(Some(out))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn read_input<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&raw)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn dispatch(cmd: &Command) -> (&JobArgs, Result<String, Error>) {
    macro_rules! job {
        ($args:expr, $input:ty, $body:expr) => {{
            let args = $args;
            let run = || -> Result<String, Error> {
                let input: $input = read_input(&args.input)?;
                let flags = Flags {
                    order: args.order,
                    window: args.window,
                    places: parse_places(&args.places)?,
                    budget: args.budget,
                    threads: args.threads.max(1),
                };
                let _ = &flags;
                #[allow(clippy::redundant_closure_call)]
                let out = ($body)(input, flags)?;
                Ok(out)
            };
            (args, run())
        }};
    }
    match cmd {
        Command::Norm(a) => job!(a, schemas::NormInput, |i, f: Flags| {
            jobs::run_norm(i, &f).map(|o| to_json(&o))
        }),
        Command::Groebner(a) => job!(a, schemas::GroebnerInput, |i, _f| {
            jobs::run_groebner(i).map(|o| to_json(&o))
        }),
        Command::Series(a) => job!(a, schemas::SeriesInput, |i, f: Flags| {
            jobs::run_series(i, &f).map(|o| to_json(&o))
        }),
        Command::SolveTube(a) => job!(a, schemas::SolveTubeInput, |i, f: Flags| {
            jobs::run_solve_tube(i, &f).map(|o| to_json(&o))
        }),
        Command::Flatten(a) => job!(a, schemas::FlattenInput, |i, f: Flags| {
            jobs::run_flatten(i, &f).map(|o| to_json(&o))
        }),
        Command::TubeMember(a) => job!(a, schemas::TubeMemberInput, |i, _f| {
            jobs::run_tube_member(i).map(|o| to_json(&o))
        }),
        Command::RefineTube(a) => job!(a, schemas::RefineTubeInput, |i, _f| {
            jobs::run_refine_tube(i).map(|o| to_json(&o))
        }),
        Command::FlatSection(a) => job!(a, schemas::FlatSectionInput, |i, f: Flags| {
            jobs::run_flat_section(i, &f).map(|o| to_json(&o))
        }),
        Command::Radius(a) => job!(a, schemas::RadiusInput, |i, f: Flags| {
            jobs::run_radius(i, &f).map(|o| to_json(&o))
        }),
        Command::Relevant(a) => job!(a, schemas::RelevantInput, |i, f: Flags| {
            jobs::run_relevant(i, &f).map(|o| to_json(&o))
        }),
        Command::Height(a) => job!(a, schemas::HeightInput, |i, f: Flags| {
            jobs::run_height(i, &f).map(|o| to_json(&o))
        }),
        Command::Relation(a) => job!(a, schemas::RelationInput, |i, f: Flags| {
            jobs::run_relation(i, &f).map(|o| to_json(&o))
        }),
        Command::WeightFiltration(a) => job!(a, schemas::WeightFiltrationInput, |i, _f| {
            jobs::run_weight_filtration(i).map(|o| to_json(&o))
        }),
        Command::Steenbrink(a) => job!(a, schemas::SteenbrinkInput, |i, _f| {
            jobs::run_steenbrink(i).map(|o| to_json(&o))
        }),
        Command::Threshold(a) => job!(a, schemas::ThresholdInput, |i, _f| {
            jobs::run_threshold(i).map(|o| to_json(&o))
        }),
    }
}

fn error_kind(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Budget(_) => ("budget", 3),
        _ => ("domain", 2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, result) = dispatch(&cli.command);
    match result {
        Ok(body) => {
            if let Err(e) = write_atomic(&args.output, body.as_bytes()) {
                eprintln!("adelikit: cannot write {}: {e}", args.output.display());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (kind, code) = error_kind(&e);
            let record = ErrorRecord {
                schema: adelikit_core::format::SCHEMA.into(),
                error: ErrorBody {
                    kind: kind.into(),
                    message: e.to_string(),
                },
            };
            let _ = write_atomic(&args.output, to_json(&record).as_bytes());
            eprintln!("adelikit: {e}");
            ExitCode::from(code)
        }
    }
}
