//! Run configuration: a TOML file, then `ARTIFACTPROBE_*` environment
//! overrides, then command-line flags.

use std::path::{Path, PathBuf};

use artifactprobe::aflite::{AfliteParams, RepresentationKind};
use artifactprobe::lexstats::PmiConfig;
use artifactprobe::linmodels::TextClassifierConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::Failure;

pub const ENV_PREFIX: &str = "ARTIFACTPROBE_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    /// Cue lists and concept roles for the heuristics.
    pub kb_settings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Paths {
    fn each_mut(&mut self) -> [&mut Option<PathBuf>; 8] {
        [
            &mut self.train,
            &mut self.dev,
            &mut self.test,
            &mut self.vectors,
            &mut self.gazetteer,
            &mut self.kb,
            &mut self.kb_settings,
            &mut self.output_dir,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    /// text, delimited or markdown.
    pub format: String,
    pub pmi_top_k: usize,
    /// Put premise/hypothesis text into human-readable reports.
    pub include_text: bool,
    pub examples_per_heuristic: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            format: "text".into(),
            pmi_top_k: 15,
            include_text: false,
            examples_per_heuristic: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the seed of every stochastic component.
    pub seed: u64,
    pub representations: Vec<RepresentationKind>,
    pub paths: Paths,
    pub classifier: TextClassifierConfig,
    pub pmi: PmiConfig,
    pub aflite: AfliteParams,
    pub report: ReportSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            representations: vec![
                RepresentationKind::HypothesisOnly,
                RepresentationKind::PremisePlusHypothesis,
            ],
            paths: Paths::default(),
            classifier: TextClassifierConfig::default(),
            pmi: PmiConfig::default(),
            aflite: AfliteParams::default(),
            report: ReportSettings::default(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Usage(message.into())
}

impl RunConfig {
    /// Reads `path` (if any), applies environment overrides from `env`,
    /// resolves relative paths against the file's directory and propagates
    /// the seed.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self, Failure>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| usage(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        apply_env(&mut table, env)?;
        let mut cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| usage(format!("config: {}", e.message())))?;
        if let Some(base) = path.and_then(Path::parent) {
            for p in cfg.paths.each_mut().into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.propagate_seed();
        Ok(cfg)
    }

    pub fn propagate_seed(&mut self) {
        self.classifier.seed = self.seed;
        self.aflite.seed = self.seed;
        self.aflite.logreg.seed = self.seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every settable key, with paths filled in so they appear.
    fn schema() -> Table {
        let mut full = RunConfig::default();
        for p in full.paths.each_mut() {
            *p = Some(PathBuf::new());
        }
        match Value::try_from(&full).expect("config serializes") {
            Value::Table(t) => t,
            _ => unreachable!("config is a table"),
        }
    }
}

/// Applies `ARTIFACTPROBE_SECTION_KEY=value` overrides. Section and key
/// names are matched against the known layout, longest section first.
pub fn apply_env<I>(table: &mut Table, env: I) -> Result<(), Failure>
where
    I: IntoIterator<Item = (String, String)>,
{
    let schema = RunConfig::schema();
    let mut vars: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let rest = key[ENV_PREFIX.len()..].to_ascii_lowercase();
        let path =
            resolve(&schema, &rest).ok_or_else(|| usage(format!("unknown override {key}")))?;
        let leaf_schema = lookup(&schema, &path).expect("resolved path exists");
        let value = parse_value(&raw, leaf_schema);
        insert(table, &path, value);
    }
    Ok(())
}

fn resolve(schema: &Table, rest: &str) -> Option<Vec<String>> {
    if schema.get(rest).is_some_and(|v| !v.is_table()) {
        return Some(vec![rest.to_string()]);
    }
    let mut sections: Vec<(&String, &Table)> = schema
        .iter()
        .filter_map(|(k, v)| v.as_table().map(|t| (k, t)))
        .collect();
    sections.sort_by_key(|(k, _)| std::cmp::Reverse(k.len()));
    for (name, sub) in sections {
        if let Some(tail) = rest
            .strip_prefix(name.as_str())
            .and_then(|t| t.strip_prefix('_'))
        {
            if let Some(mut path) = resolve(sub, tail) {
                path.insert(0, name.clone());
                return Some(path);
            }
        }
    }
    None
}

fn lookup<'a>(table: &'a Table, path: &[String]) -> Option<&'a Value> {
    let (last, parents) = path.split_last()?;
    let mut t = table;
    for p in parents {
        t = t.get(p)?.as_table()?;
    }
    t.get(last)
}

fn parse_value(raw: &str, schema: &Value) -> Value {
    if schema.is_str() {
        return Value::String(raw.to_string());
    }
    if let Ok(parsed) = format!("v = {raw}").parse::<Table>() {
        if let Some(v) = parsed.get("v") {
            return v.clone();
        }
    }
    if schema.is_array() {
        let items = raw
            .split(',')
            .map(|s| Value::String(s.trim().to_string()))
            .collect();
        return Value::Array(items);
    }
    Value::String(raw.to_string())
}

fn insert(table: &mut Table, path: &[String], value: Value) {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut t = table;
    for p in parents {
        let entry = t
            .entry(p.clone())
            .or_insert_with(|| Value::Table(Table::new()));
        if !entry.is_table() {
            *entry = Value::Table(Table::new());
        }
        t = entry.as_table_mut().expect("just made a table");
    }
    t.insert(last.clone(), value);
}
