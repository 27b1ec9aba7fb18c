//! `bridgecause` command line: shooting points, neighborhoods, cause
//! diagnosis and QA corpus export over SfM output.

mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use bridgecause_core::diagnosis::{
    default_rules, diagnose, parse_rules, CauseRule, DiagnoseOptions, EventMode,
};
use bridgecause_core::ingest::{parse_mesh_obj, parse_poses, Scene};
use bridgecause_core::neighborhood::{
    select_surrounding, shooting_points_with_workers, ShootingDocument, DEFAULT_RADIUS,
};
use bridgecause_core::vqa::{
    write_corpus, Annotation, AnnotationOracle, AnswerOracle, RemoteOracle, RemoteOracleConfig,
    Vocabulary, DEFAULT_NEGATIVES,
};
use clap::{Args, Parser, Subcommand};

pub use config::FileConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "bridgecause",
    version,
    about = "Estimate bridge damage causes from surrounding images"
)]
pub struct Cli {
    /// TOML run file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute every camera's shooting point on the mesh.
    Shoot(ShootArgs),
    /// Classify cameras around the image of interest.
    Neighbors(NeighborsArgs),
    /// Identify the damage on the image of interest and rank its causes.
    Diagnose(DiagnoseArgs),
    /// Export the mechanically generated QA corpus for annotations.
    Genqa(GenqaArgs),
    /// Write the 64-image field-test fixture and a run file for it.
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SceneArgs {
    /// Wavefront OBJ mesh.
    #[arg(long, value_name = "FILE")]
    pub mesh: Option<PathBuf>,
    /// Camera pose document (JSON list).
    #[arg(long, value_name = "FILE")]
    pub poses: Option<PathBuf>,
    /// Worker threads for ray casting and oracle queries.
    #[arg(long, value_name = "N")]
    pub concurrency: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ShootArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NeighborsArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Image id of the image of interest.
    #[arg(long, value_name = "ID")]
    pub interest: Option<String>,
    /// Ball radius around the interest shooting point (m).
    #[arg(long, value_name = "M")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub neighbors: NeighborsArgs,
    /// Ground-truth annotations to answer questions from.
    #[arg(long, value_name = "FILE", conflicts_with = "oracle_endpoint")]
    pub annotations: Option<PathBuf>,
    /// URL of a remote VQA endpoint.
    #[arg(long, value_name = "URL")]
    pub oracle_endpoint: Option<String>,
    /// Cause rule file (JSON list); the built-in corrosion rules otherwise.
    #[arg(long, value_name = "FILE")]
    pub rules: Option<PathBuf>,
    /// Vocabulary file with `members`, `damages` and optional `synonyms`.
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Per-question timeout for the remote oracle (s).
    #[arg(long, value_name = "SECS")]
    pub timeout: Option<f64>,
    /// Maximum concurrent requests to the remote oracle.
    #[arg(long, value_name = "N")]
    pub max_in_flight: Option<usize>,
    /// Attempts per question against the remote oracle.
    #[arg(long, value_name = "N")]
    pub retries: Option<u32>,
    /// Ask every event question instead of stopping at the first "yes".
    #[arg(long)]
    pub full_events: bool,
    /// Also write the plain-text cause table ("-" for stdout).
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    /// Leave out the `generated_at` field.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenqaArgs {
    /// Annotation document to generate questions from.
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,
    /// Vocabulary file; the built-in one otherwise.
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Absent members and absent damages sampled per image.
    #[arg(long, value_name = "K")]
    pub negatives: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    /// Directory to write into; created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Shoot(a) => cmd_shoot(a, &file),
        Command::Neighbors(a) => cmd_neighbors(a, &file),
        Command::Diagnose(a) => cmd_diagnose(a, &file),
        Command::Genqa(a) => cmd_genqa(a, &file),
        Command::Fixture(a) => cmd_fixture(a),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document serializes");
    s.push('\n');
    s
}

fn default_concurrency() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get().min(8))
}

fn load_scene(args: &SceneArgs, file: &FileConfig) -> Result<Scene, CliError> {
    let mesh_path = config::required(args.mesh.clone(), file.mesh.clone(), "mesh")?;
    let poses_path = config::required(args.poses.clone(), file.poses.clone(), "poses")?;
    let parsed = parse_mesh_obj(&read(&mesh_path)?).map_err(|e| CliError::parse(&mesh_path, e))?;
    let s = &parsed.stats;
    log::info!(
        "{}: {} vertices, {} triangles ({} degenerate dropped, {} directives ignored)",
        mesh_path.display(),
        s.vertices,
        s.triangles,
        s.degenerate_dropped,
        s.ignored_directives
    );
    let poses = parse_poses(&read(&poses_path)?).map_err(|e| CliError::parse(&poses_path, e))?;
    log::info!("{}: {} cameras", poses_path.display(), poses.len());
    Scene::new(parsed.mesh, poses).map_err(|e| CliError::Parse(e.to_string()))
}

fn concurrency(args: &SceneArgs, file: &FileConfig) -> Result<usize, CliError> {
    match args.concurrency.or(file.concurrency) {
        Some(0) => Err(CliError::Config("--concurrency must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(default_concurrency()),
    }
}

fn radius(args: &NeighborsArgs, file: &FileConfig) -> Result<f64, CliError> {
    let r = args.radius.or(file.radius).unwrap_or(DEFAULT_RADIUS);
    if !(r >= 0.0 && r.is_finite()) {
        return Err(CliError::Config(format!(
            "--radius must be finite and non-negative, got {r}"
        )));
    }
    Ok(r)
}

fn interest(args: &NeighborsArgs, file: &FileConfig, scene: &Scene) -> Result<String, CliError> {
    let id = config::required(args.interest.clone(), file.interest.clone(), "interest")?;
    if scene.camera(&id).is_none() {
        return Err(CliError::Config(format!(
            "interest image {id:?} is not in the pose file"
        )));
    }
    Ok(id)
}

fn load_vocab(flag: Option<&PathBuf>, file: &FileConfig) -> Result<Vocabulary, CliError> {
    match flag.or(file.vocab.as_ref()) {
        Some(p) => serde_json::from_slice(&read(p)?).map_err(|e| CliError::parse(p, e)),
        None => Ok(Vocabulary::default()),
    }
}

fn load_annotations(path: &Path) -> Result<Vec<Annotation>, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::parse(path, e))
}

pub fn cmd_shoot(args: &ShootArgs, file: &FileConfig) -> Result<(), CliError> {
    let scene = load_scene(&args.scene, file)?;
    let points = shooting_points_with_workers(&scene, concurrency(&args.scene, file)?);
    let doc = ShootingDocument::new(&points);
    if !doc.missed.is_empty() {
        log::warn!("{} camera(s) miss the mesh", doc.missed.len());
    }
    emit(
        args.scene.output.as_deref().or(file.output.as_deref()),
        &to_json(&doc),
    )
}

pub fn cmd_neighbors(args: &NeighborsArgs, file: &FileConfig) -> Result<(), CliError> {
    let scene = load_scene(&args.scene, file)?;
    let radius = radius(args, file)?;
    let interest = interest(args, file, &scene)?;
    let points = shooting_points_with_workers(&scene, concurrency(&args.scene, file)?);
    let selection = select_surrounding(&points, &interest, radius)?;
    let doc = selection.to_document(&points);
    emit(
        args.scene.output.as_deref().or(file.output.as_deref()),
        &to_json(&doc),
    )
}

fn load_rules(
    args: &DiagnoseArgs,
    file: &FileConfig,
    vocab: &Vocabulary,
) -> Result<Vec<CauseRule>, CliError> {
    match args.rules.as_ref().or(file.rules.as_ref()) {
        Some(p) => parse_rules(&read(p)?, vocab).map_err(|e| match CliError::from(e) {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", p.display())),
            other => other,
        }),
        None => Ok(default_rules()),
    }
}

fn build_oracle(
    args: &DiagnoseArgs,
    file: &FileConfig,
    vocab: &Vocabulary,
) -> Result<Box<dyn AnswerOracle>, CliError> {
    // A source given on the command line replaces the file's, whichever kind.
    let (annotations, endpoint) = if args.annotations.is_some() || args.oracle_endpoint.is_some() {
        (args.annotations.clone(), args.oracle_endpoint.clone())
    } else {
        (file.annotations.clone(), file.oracle_endpoint.clone())
    };
    match (annotations, endpoint) {
        (Some(path), None) => {
            let anns = load_annotations(&path)?;
            let oracle = AnnotationOracle::new(vocab.clone(), &anns)
                .map_err(|e| CliError::parse(&path, e))?;
            Ok(Box::new(oracle))
        }
        (None, Some(url)) => {
            let mut cfg = RemoteOracleConfig::new(url);
            if let Some(t) = args.timeout.or(file.timeout_secs) {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(CliError::Config(format!(
                        "--timeout must be positive, got {t}"
                    )));
                }
                cfg.timeout = Duration::from_secs_f64(t);
            }
            if let Some(n) = args.max_in_flight.or(file.max_in_flight) {
                cfg.max_in_flight = n.max(1);
            }
            if let Some(n) = args.retries.or(file.retries) {
                cfg.max_attempts = n.max(1);
            }
            Ok(Box::new(RemoteOracle::new(cfg, vocab.clone())))
        }
        (Some(_), Some(_)) => Err(CliError::Config(
            "configure exactly one of annotations and oracle_endpoint".into(),
        )),
        (None, None) => Err(CliError::Config(
            "an oracle is required: --annotations or --oracle-endpoint".into(),
        )),
    }
}

pub fn cmd_diagnose(args: &DiagnoseArgs, file: &FileConfig) -> Result<(), CliError> {
    let vocab = load_vocab(args.vocab.as_ref(), file)?;
    let rules = load_rules(args, file, &vocab)?;
    let oracle = build_oracle(args, file, &vocab)?;
    let scene = load_scene(&args.neighbors.scene, file)?;
    let options = DiagnoseOptions {
        radius: radius(&args.neighbors, file)?,
        concurrency: concurrency(&args.neighbors.scene, file)?,
        event_mode: if args.full_events || file.full_events.unwrap_or(false) {
            EventMode::Full
        } else {
            EventMode::ShortCircuit
        },
    };
    let interest = interest(&args.neighbors, file, &scene)?;

    let mut report = diagnose(&scene, &interest, &rules, oracle.as_ref(), &vocab, &options)?;
    if !args.no_timestamp {
        report.generated_at =
            Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }
    if report.degraded_questions > 0 {
        log::warn!(
            "{} question(s) failed and were counted as \"no\"",
            report.degraded_questions
        );
    }

    let output = args
        .neighbors
        .scene
        .output
        .as_deref()
        .or(file.output.as_deref());
    let table_to_stdout = args.table.as_deref() == Some(Path::new("-"));
    if output.is_some() || !table_to_stdout {
        emit(output, &report.to_json())?;
    }
    if let Some(t) = &args.table {
        emit(Some(t), &report.render_table())?;
    }
    Ok(())
}

pub fn cmd_genqa(args: &GenqaArgs, file: &FileConfig) -> Result<(), CliError> {
    let vocab = load_vocab(args.vocab.as_ref(), file)?;
    let path = config::required(
        args.annotations.clone(),
        file.annotations.clone(),
        "annotations",
    )?;
    let anns = load_annotations(&path)?;
    let k = args
        .negatives
        .or(file.negatives)
        .unwrap_or(DEFAULT_NEGATIVES);
    let (corpus, count) = write_corpus(&anns, &vocab, k).map_err(|e| CliError::parse(&path, e))?;
    log::info!("{count} QA pairs from {} annotations", anns.len());
    emit(args.output.as_deref().or(file.output.as_deref()), &corpus)
}

pub fn cmd_fixture(args: &FixtureArgs) -> Result<(), CliError> {
    let fx = bridgecause_harness::field_fixture();
    let paths = fx
        .files
        .write_to(&args.out)
        .map_err(|e| CliError::io(&args.out, e))?;
    let rules_path = args.out.join("rules.json");
    std::fs::write(&rules_path, to_json(&default_rules()))
        .map_err(|e| CliError::io(&rules_path, e))?;
    let name = |p: &Path| {
        p.file_name()
            .expect("file name")
            .to_string_lossy()
            .into_owned()
    };
    let run_file = format!(
        "mesh = \"{}\"\nposes = \"{}\"\nannotations = \"{}\"\nrules = \"rules.json\"\ninterest = \"{}\"\nradius = {:?}\n",
        name(&paths.mesh),
        name(&paths.poses),
        name(&paths.annotations),
        fx.interest_id,
        DEFAULT_RADIUS,
    );
    let run_path = args.out.join("bridgecause.toml");
    std::fs::write(&run_path, run_file).map_err(|e| CliError::io(&run_path, e))?;
    eprintln!(
        "wrote fixture to {} (interest image {})",
        args.out.display(),
        fx.interest_id
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn both_oracle_flags_conflict() {
        let r = Cli::try_parse_from([
            "bridgecause",
            "diagnose",
            "--annotations",
            "a.json",
            "--oracle-endpoint",
            "http://x",
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn oracle_is_required() {
        let args = DiagnoseArgs::default();
        let err = build_oracle(&args, &FileConfig::default(), &Vocabulary::default())
            .err()
            .unwrap();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn flag_source_replaces_file_source() {
        let file = FileConfig {
            oracle_endpoint: Some("http://127.0.0.1:9/".into()),
            ..Default::default()
        };
        let args = DiagnoseArgs {
            annotations: Some("does-not-exist.json".into()),
            ..Default::default()
        };
        // The annotation file is used (and fails to read), not the endpoint.
        let err = build_oracle(&args, &file, &Vocabulary::default())
            .err()
            .unwrap();
        assert!(matches!(err, CliError::Io(_)), "{err}");
    }

    #[test]
    fn bad_radius_is_a_config_error() {
        let args = NeighborsArgs {
            radius: Some(-1.0),
            ..Default::default()
        };
        assert_eq!(
            radius(&args, &FileConfig::default())
                .unwrap_err()
                .exit_code(),
            2
        );
    }
}
