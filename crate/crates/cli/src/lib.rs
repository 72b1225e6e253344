//! Command-line orchestration for artifactprobe.

pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use artifactprobe::aflite::{PartitionManifest, RepresentationKind};
use artifactprobe::corpus::{combine_splits, load_records, validate, FieldMap};
use artifactprobe::embedstore::EmbeddingTable;
use artifactprobe::heuristics::{KbSettings, KnowledgeBase};
use artifactprobe::pipeline;
use artifactprobe::report::{Format, Metadata, Report};
use artifactprobe::synthgen::{self, SynthConfig};
use artifactprobe::{Dataset, Gazetteer, Split};
use clap::{Parser, Subcommand, ValueEnum};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Name of the run config written next to a synthetic bundle.
pub const SYNTH_RUN_CONFIG: &str = "artifactprobe.toml";

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<artifactprobe::Error> for Failure {
    fn from(e: artifactprobe::Error) -> Self {
        match e {
            artifactprobe::Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(
    name = "artifactprobe",
    version,
    about = "Annotation artifact diagnostics for sentence-pair corpora"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// text, delimited or markdown.
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Keep premise and hypothesis text out of every output (default).
    #[arg(long, global = true, conflicts_with = "include_text")]
    pub ids_only: bool,
    /// Allow example text in human-readable reports.
    #[arg(long, global = true)]
    pub include_text: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReprArg {
    Hypothesis,
    Premise,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check record files and report class balance.
    Validate,
    /// Majority and probe classifier scores plus the confusion matrix.
    Baseline,
    /// Top tokens per class by PMI.
    Pmi {
        #[arg(long)]
        top: Option<usize>,
    },
    /// Hypothesis length by class.
    Lengths,
    /// Heuristic detection and uniformity tests.
    Heuristics,
    /// Adversarial filtering; writes partition manifests and scores them.
    Aflite {
        #[arg(long, value_enum)]
        representation: Option<ReprArg>,
    },
    /// Every analysis in one report.
    Report,
    /// Generate a synthetic corpus bundle.
    Synth {
        /// Generator settings (TOML).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args`, runs the command and returns the exit code. Rendered
/// output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(
    args: I,
    env: Vec<(String, String)>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = std::panic::catch_unwind(|| execute(&cli, env)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(Failure::Internal(msg))
    });
    match result {
        Ok(output) => {
            for w in &output.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            match out.write_all(output.text.as_bytes()) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "artifactprobe: {}", Failure::Internal(e.to_string()));
                    EXIT_INTERNAL
                }
            }
        }
        Err(f) => {
            let _ = writeln!(err, "artifactprobe: {f}");
            f.exit_code()
        }
    }
}

/// What a command prints.
#[derive(Debug, Default)]
struct Output {
    text: String,
    warnings: Vec<String>,
}

fn execute(cli: &Cli, env: Vec<(String, String)>) -> Outcome<Output> {
    if let Command::Synth { spec, out: dir } = &cli.command {
        return synth(spec.as_deref(), dir, cli.seed);
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), env)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.propagate_seed();
    }
    if let Some(f) = &cli.format {
        cfg.report.format = f.clone();
    }
    if let Some(d) = &cli.out_dir {
        cfg.paths.output_dir = Some(d.clone());
    }
    if cli.include_text {
        cfg.report.include_text = true;
    }
    if cli.ids_only {
        cfg.report.include_text = false;
    }
    let format: Format = cfg.report.format.parse()?;

    let pool = match cli.threads {
        Some(0) => return Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| Failure::Internal(e.to_string()))?;
    pool.install(|| dispatch(cli, &cfg, format))
}

fn dispatch(cli: &Cli, cfg: &RunConfig, format: Format) -> Outcome<Output> {
    let mut session = Session::new(cfg)?;
    let (name, report) = match &cli.command {
        Command::Validate => return validate_command(&session),
        Command::Baseline => ("baseline", session.baseline()?),
        Command::Pmi { top } => ("pmi", session.pmi(top.unwrap_or(cfg.report.pmi_top_k))?),
        Command::Lengths => ("lengths", session.lengths()?),
        Command::Heuristics => ("heuristics", session.heuristics()?),
        Command::Aflite { representation } => {
            let kinds = match representation {
                Some(ReprArg::Hypothesis) => vec![RepresentationKind::HypothesisOnly],
                Some(ReprArg::Premise) => vec![RepresentationKind::PremisePlusHypothesis],
                Some(ReprArg::Both) => vec![
                    RepresentationKind::HypothesisOnly,
                    RepresentationKind::PremisePlusHypothesis,
                ],
                None => cfg.representations.clone(),
            };
            ("aflite", session.aflite(&kinds)?)
        }
        Command::Report => ("report", session.full_report()?),
        Command::Synth { .. } => unreachable!("handled before config loading"),
    };
    let text = report.render(format);
    if let Some(dir) = &cfg.paths.output_dir {
        write_file(&dir.join(format!("{name}.{}", format.extension())), &text)?;
    }
    Ok(Output {
        text,
        warnings: session.warnings,
    })
}

fn write_file(path: &Path, text: &str) -> Outcome {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| Failure::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Outcome<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Failure::Usage(format!("no paths.{key} configured")))
}

fn existing(path: &Path) -> Outcome<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Failure::Data(format!("{}: no such file", path.display())))
    }
}

pub fn manifest_file_name(kind: RepresentationKind) -> String {
    let tag = match kind {
        RepresentationKind::HypothesisOnly => "hypothesis_only",
        RepresentationKind::PremisePlusHypothesis => "premise_plus_hypothesis",
    };
    format!("manifest-{tag}.json")
}

/// Lazily loaded inputs for one command.
struct Session<'a> {
    cfg: &'a RunConfig,
    dataset: Dataset,
    gazetteer: Option<Gazetteer>,
    warnings: Vec<String>,
}

impl<'a> Session<'a> {
    fn new(cfg: &'a RunConfig) -> Outcome<Self> {
        let fields = FieldMap::default();
        let p = &cfg.paths;
        let train = load_records(
            existing(required(&p.train, "train")?)?,
            Split::Train,
            &fields,
        )?;
        let load_opt = |path: &Option<PathBuf>, split| -> Outcome<Dataset> {
            match path {
                Some(path) => Ok(load_records(existing(path)?, split, &fields)?),
                None => Ok(Dataset::empty()),
            }
        };
        let dev = load_opt(&p.dev, Split::Dev)?;
        let test = load_opt(&p.test, Split::Test)?;
        let dataset = combine_splits(&train, &dev, &test)?;
        let gazetteer = match &p.gazetteer {
            Some(path) => Some(Gazetteer::load(existing(path)?)?),
            None => None,
        };
        Ok(Self {
            cfg,
            dataset,
            gazetteer,
            warnings: Vec::new(),
        })
    }

    fn metadata(&self) -> Metadata {
        let mut notes = Vec::new();
        if self.gazetteer.is_none() {
            notes.push("no gazetteer: entity merging disabled".into());
        }
        Metadata {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: self.cfg.seed,
            config: self.cfg.to_toml(),
            notes,
            checksums: Vec::new(),
        }
    }

    fn report(&self) -> Report {
        Report {
            metadata: self.metadata(),
            ..Default::default()
        }
    }

    fn knowledge_base(&mut self) -> Outcome<KnowledgeBase> {
        let p = &self.cfg.paths;
        let settings = match &p.kb_settings {
            Some(path) => KbSettings::load(existing(path)?)?,
            None => KbSettings::default(),
        };
        let kb = KnowledgeBase::load(existing(required(&p.kb, "kb")?)?, &settings)?;
        self.warnings.extend(kb.warnings().iter().cloned());
        Ok(kb)
    }

    fn vectors(&mut self) -> Outcome<EmbeddingTable<f64>> {
        let table = EmbeddingTable::load(existing(required(&self.cfg.paths.vectors, "vectors")?)?)?;
        self.warnings.extend(table.warnings().iter().cloned());
        Ok(table)
    }

    fn baseline(&mut self) -> Outcome<Report> {
        let (scores, confusion) = pipeline::baseline_sections(&self.dataset, &self.cfg.classifier)?;
        Ok(Report {
            scores: Some(scores),
            confusion,
            ..self.report()
        })
    }

    fn pmi(&mut self, top_k: usize) -> Outcome<Report> {
        let section =
            pipeline::pmi_section(&self.dataset, &self.cfg.pmi, self.gazetteer.as_ref(), top_k)?;
        Ok(Report {
            pmi: Some(section),
            ..self.report()
        })
    }

    fn lengths(&mut self) -> Outcome<Report> {
        let rows = pipeline::length_rows(&self.dataset, self.gazetteer.as_ref())?;
        Ok(Report {
            lengths: Some(rows),
            ..self.report()
        })
    }

    fn heuristics(&mut self) -> Outcome<Report> {
        let kb = self.knowledge_base()?;
        let rows = pipeline::heuristic_rows(
            &self.dataset,
            &kb,
            self.cfg.report.include_text,
            self.cfg.report.examples_per_heuristic,
        );
        Ok(Report {
            heuristics: Some(rows),
            ..self.report()
        })
    }

    fn output_dir(&self) -> Outcome<&Path> {
        self.cfg
            .paths
            .output_dir
            .as_deref()
            .ok_or_else(|| Failure::Usage("no output directory for partition manifests".into()))
    }

    fn run_partitions(&mut self, kinds: &[RepresentationKind]) -> Outcome<Vec<PartitionManifest>> {
        let dir = self.output_dir()?.to_path_buf();
        let table = self.vectors()?;
        let mut manifests = Vec::new();
        for &kind in kinds {
            let m = pipeline::partition(
                &self.dataset,
                &table,
                self.gazetteer.as_ref(),
                &self.cfg.aflite,
                kind,
            )?;
            let path = dir.join(manifest_file_name(kind));
            write_file(&path, &m.to_json()?)?;
            manifests.push(m);
        }
        Ok(manifests)
    }

    fn partition_report(&self, manifests: &[PartitionManifest]) -> Outcome<Report> {
        let section = pipeline::partition_section(&self.dataset, manifests, &self.cfg.classifier)?;
        let mut report = self.report();
        report.metadata.checksums = manifests
            .iter()
            .map(|m| {
                (
                    pipeline::representation_name(m.representation.kind).to_string(),
                    m.checksum.clone(),
                )
            })
            .collect();
        report.partitions = Some(section);
        Ok(report)
    }

    fn aflite(&mut self, kinds: &[RepresentationKind]) -> Outcome<Report> {
        let manifests = self.run_partitions(kinds)?;
        self.partition_report(&manifests)
    }

    /// Existing manifests in the output directory are reused; otherwise the
    /// filter runs when vectors are configured.
    fn existing_manifests(&self) -> Outcome<Option<Vec<PartitionManifest>>> {
        let Some(dir) = &self.cfg.paths.output_dir else {
            return Ok(None);
        };
        let mut found = Vec::new();
        for &kind in &self.cfg.representations {
            let path = dir.join(manifest_file_name(kind));
            if !path.exists() {
                return Ok(None);
            }
            found.push(PartitionManifest::load(&path)?);
        }
        Ok(Some(found))
    }

    fn full_report(&mut self) -> Outcome<Report> {
        let mut report = self.baseline()?;
        report.pmi = self.pmi(self.cfg.report.pmi_top_k)?.pmi;
        report.lengths = self.lengths()?.lengths;
        if self.cfg.paths.kb.is_some() {
            report.heuristics = self.heuristics()?.heuristics;
        }
        let manifests = match self.existing_manifests()? {
            Some(m) => Some(m),
            None if self.cfg.paths.vectors.is_some() && self.cfg.paths.output_dir.is_some() => {
                Some(self.run_partitions(&self.cfg.representations.clone())?)
            }
            None => None,
        };
        if let Some(manifests) = manifests {
            let p = self.partition_report(&manifests)?;
            report.partitions = p.partitions;
            report.metadata.checksums = p.metadata.checksums;
        }
        Ok(report)
    }
}

fn validate_command(session: &Session) -> Outcome<Output> {
    let v = validate(&session.dataset)?;
    let mut text = format!("examples: {}\n", v.total);
    for (split, n) in &v.per_split {
        text += &format!("split {split}: {n}\n");
    }
    for (label, n) in &v.per_label {
        let share = v.label_shares.get(label).copied().unwrap_or(0.0);
        text += &format!("label {label}: {n} ({:.1}%)\n", 100.0 * share);
    }
    text += &format!("balanced: {}\n", v.balanced);
    Ok(Output {
        text,
        warnings: v.warnings,
    })
}

fn synth(spec: Option<&Path>, dir: &Path, seed: Option<u64>) -> Outcome<Output> {
    let mut cfg: SynthConfig = match spec {
        Some(path) => {
            let text = fs::read_to_string(existing(path)?)
                .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: {}", path.display(), e.message())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let bundle = synthgen::generate(&cfg)?;
    bundle.write(dir)?;
    write_file(
        &dir.join(SYNTH_RUN_CONFIG),
        &bundle_run_config(&cfg).to_toml(),
    )?;
    Ok(Output {
        text: format!(
            "wrote {} examples to {}\n",
            bundle.dataset.len(),
            dir.display()
        ),
        warnings: bundle.warnings,
    })
}

/// A run config pointing at the bundle files, with filter sizes scaled to
/// the corpus.
fn bundle_run_config(synth: &SynthConfig) -> RunConfig {
    use synthgen::files;
    let mut cfg = RunConfig {
        seed: synth.seed,
        ..Default::default()
    };
    cfg.paths.train = Some(files::TRAIN.into());
    cfg.paths.dev = Some(files::DEV.into());
    cfg.paths.test = Some(files::TEST.into());
    cfg.paths.vectors = Some(files::VECTORS.into());
    cfg.paths.gazetteer = Some(files::GAZETTEER.into());
    cfg.paths.kb = Some(files::KB.into());
    cfg.paths.kb_settings = Some(files::KB_SETTINGS.into());
    cfg.paths.output_dir = Some("out".into());
    let total = 3 * synth.size_per_class;
    cfg.aflite.train_size = ((total as f64 * 0.4).round() as usize).max(1);
    cfg.aflite.cutoff = ((total as f64 * 0.035).round() as usize).max(1);
    cfg.aflite.ensemble_size = 16;
    cfg.classifier.bucket_count = 1 << 18;
    cfg.propagate_seed();
    cfg
}
