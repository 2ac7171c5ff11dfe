//! Experiment manifests: one JSON file naming the dataset, template packs,
//! models and condition grid of a run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use structcot_core::digest::sha256_hex;
use structcot_core::{
    AbstainPolicy, Author, DatasetSchema, FactorId, FactorSet, ReasoningDimension, SampleStrategy,
    Strategy, TemplatePack,
};

use crate::error::{Error, Result};
use crate::gateway::{GatewaySettings, ModelSpec};
use crate::ingest;

pub const MANUAL_PACK: &str = include_str!("../assets/manual.pack");
pub const GENERATED_PACK: &str = include_str!("../assets/generated.pack");

pub fn builtin_pack(author: Author) -> TemplatePack {
    let text = match author {
        Author::Manual => MANUAL_PACK,
        Author::Generated => GENERATED_PACK,
    };
    TemplatePack::parse(text).expect("bundled packs are complete")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Nofw,
    Fw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    /// One kappa per dimension over every rated sample.
    #[default]
    Pooled,
    /// One kappa per (model, condition, dimension).
    Stratified,
}

impl std::str::FromStr for KappaMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pooled" => Ok(KappaMode::Pooled),
            "stratified" => Ok(KappaMode::Stratified),
            _ => Err(format!("unknown kappa mode `{s}` (expected pooled or stratified)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    /// Schema file; the bundled SDN DDoS layout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    pub sample_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub strategy: SampleStrategy,
}

/// `"builtin"` or a path to a pack file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackSources {
    #[serde(default = "builtin")]
    pub manual: String,
    #[serde(default = "builtin")]
    pub generated: String,
}

fn builtin() -> String {
    "builtin".into()
}

impl Default for PackSources {
    fn default() -> Self {
        Self {
            manual: builtin(),
            generated: builtin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingSection {
    #[serde(default = "default_dimensions")]
    pub dimensions: Vec<ReasoningDimension>,
    /// Runs to put in front of raters; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kappa: KappaMode,
}

fn default_dimensions() -> Vec<ReasoningDimension> {
    ReasoningDimension::DEFAULT.to_vec()
}

impl Default for RatingSection {
    fn default() -> Self {
        Self {
            dimensions: default_dimensions(),
            sample_size: None,
            seed: 0,
            kappa: KappaMode::Pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub dataset: DatasetSection,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_authors")]
    pub authors: Vec<Author>,
    #[serde(default = "default_frameworks")]
    pub frameworks: Vec<Framework>,
    /// Named factor-removal lists, each applied to the full framework.
    #[serde(default)]
    pub ablations: BTreeMap<String, Vec<FactorId>>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub abstain_policy: AbstainPolicy,
    #[serde(default)]
    pub packs: PackSources,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub gateway: GatewaySettings,
    /// Concurrent requests issued by one model's worker pool.
    #[serde(default = "one")]
    pub workers_per_model: usize,
    #[serde(default)]
    pub rating: RatingSection,
}

fn default_authors() -> Vec<Author> {
    Author::ALL.to_vec()
}

fn default_frameworks() -> Vec<Framework> {
    vec![Framework::Nofw, Framework::Fw]
}

fn default_strategy() -> Strategy {
    Strategy::StructuredSecurityReasoning
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> usize {
    1
}

/// One cell of the prompt-condition grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub author: Author,
    pub framework: Framework,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<String>,
    pub removed: FactorSet,
}

impl Condition {
    /// `manual/nofw`, `generated/fw`, `manual/fw-no_evidence`, ...
    pub fn id(&self) -> String {
        match (&self.framework, &self.ablation) {
            (Framework::Nofw, _) => format!("{}/nofw", self.author),
            (Framework::Fw, None) => format!("{}/fw", self.author),
            (Framework::Fw, Some(name)) => format!("{}/fw-{name}", self.author),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub models: Option<Vec<String>>,
    pub ablation: Option<String>,
    pub abstain_policy: Option<AbstainPolicy>,
    pub kappa: Option<KappaMode>,
}

/// A validated manifest with paths resolved and overrides applied.
#[derive(Debug, Clone)]
pub struct ResolvedManifest {
    pub manifest: ExperimentManifest,
    /// Directory relative paths inside the manifest are resolved against.
    pub base_dir: PathBuf,
    pub output_dir: PathBuf,
    pub digest: String,
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ResolvedManifest> {
        Self::load_with(path, &Overrides::default())
    }

    pub fn load_with(path: &Path, overrides: &Overrides) -> Result<ResolvedManifest> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let manifest = Self::from_json(&text)?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        manifest.resolve(base_dir, overrides)
    }

    pub fn resolve(mut self, base_dir: PathBuf, overrides: &Overrides) -> Result<ResolvedManifest> {
        if let Some(seed) = overrides.seed {
            self.dataset.seed = seed;
        }
        if let Some(policy) = overrides.abstain_policy {
            self.abstain_policy = policy;
        }
        if let Some(kappa) = overrides.kappa {
            self.rating.kappa = kappa;
        }
        // Subset filters pick cells of the same run; they do not change
        // what the run is.
        let digest = self.digest();
        if let Some(names) = &overrides.models {
            for name in names {
                if !self.models.iter().any(|m| &m.name == name) {
                    return Err(Error::Manifest(format!("--models names unknown model `{name}`")));
                }
            }
            self.models.retain(|m| names.contains(&m.name));
        }
        if let Some(name) = &overrides.ablation {
            if !self.ablations.contains_key(name) {
                return Err(Error::Manifest(format!("--ablation names unknown ablation set `{name}`")));
            }
            self.ablations.retain(|k, _| k == name);
        }
        self.validate()?;
        let output_dir = match &overrides.output_dir {
            Some(dir) => dir.clone(),
            None => base_dir.join(&self.output_dir),
        };
        Ok(ResolvedManifest {
            manifest: self,
            base_dir,
            output_dir,
            digest,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Manifest(m));
        if self.models.is_empty() {
            return fail("at least one model is required".into());
        }
        let mut names = BTreeSet::new();
        for model in &self.models {
            model.validate()?;
            if !names.insert(model.name.as_str()) {
                return fail(format!("model `{}` is listed twice", model.name));
            }
        }
        if self.authors.is_empty() || self.frameworks.is_empty() {
            return fail("at least one author and one framework state are required".into());
        }
        if has_duplicates(&self.authors) || has_duplicates(&self.frameworks) {
            return fail("authors and frameworks must not repeat".into());
        }
        if !self.ablations.is_empty() && !self.frameworks.contains(&Framework::Fw) {
            return fail("ablation sets require the `fw` framework state".into());
        }
        for (name, factors) in &self.ablations {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-')) {
                return fail(format!("ablation name `{name}` must use only [A-Za-z0-9_-]"));
            }
            if factors.is_empty() {
                return fail(format!("ablation set `{name}` removes no factors"));
            }
        }
        if self.dataset.sample_size == 0 {
            return fail("dataset.sample_size must be positive".into());
        }
        if self.workers_per_model == 0 {
            return fail("workers_per_model must be positive".into());
        }
        if self.rating.dimensions.is_empty() || has_duplicates(&self.rating.dimensions) {
            return fail("rating.dimensions must be a non-empty list without repeats".into());
        }
        if self.rating.sample_size == Some(0) {
            return fail("rating.sample_size must be positive".into());
        }
        Ok(())
    }

    /// Grid order: author, then no-framework, full framework, ablations by name.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        for &author in &self.authors {
            for &framework in &self.frameworks {
                out.push(Condition {
                    author,
                    framework,
                    ablation: None,
                    removed: FactorSet::EMPTY,
                });
                if framework == Framework::Fw {
                    for (name, factors) in &self.ablations {
                        out.push(Condition {
                            author,
                            framework,
                            ablation: Some(name.clone()),
                            removed: factors.iter().copied().collect(),
                        });
                    }
                }
            }
        }
        out
    }

    /// SHA-256 over the canonical JSON of everything that defines the
    /// trials. Where results go, transport tuning and scoring options are
    /// left out.
    pub fn digest(&self) -> String {
        let mut identity = self.clone();
        identity.output_dir = PathBuf::new();
        identity.gateway = GatewaySettings::default();
        identity.workers_per_model = 1;
        identity.abstain_policy = AbstainPolicy::default();
        identity.rating = RatingSection::default();
        sha256_hex(&serde_json::to_vec(&identity).expect("manifest serializes"))
    }
}

fn has_duplicates<T: Ord>(items: &[T]) -> bool {
    let mut seen = BTreeSet::new();
    !items.iter().all(|i| seen.insert(i))
}

impl ResolvedManifest {
    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.resolve_path(&self.manifest.dataset.path)
    }

    pub fn schema(&self) -> Result<DatasetSchema> {
        match &self.manifest.dataset.schema {
            Some(p) => ingest::load_schema(&self.resolve_path(p)),
            None => Ok(ingest::default_schema()),
        }
    }

    /// Load the pack for every author in the grid, checking its declared
    /// authorship.
    pub fn packs(&self) -> Result<BTreeMap<Author, TemplatePack>> {
        let mut out = BTreeMap::new();
        for &author in &self.manifest.authors {
            let source = match author {
                Author::Manual => &self.manifest.packs.manual,
                Author::Generated => &self.manifest.packs.generated,
            };
            let pack = if source == "builtin" {
                builtin_pack(author)
            } else {
                let path = self.resolve_path(Path::new(source));
                let text = fs::read_to_string(&path).map_err(|e| Error::Pack {
                    name: source.clone(),
                    message: format!("cannot read {}: {e}", path.display()),
                })?;
                TemplatePack::parse(&text).map_err(|e| Error::pack(source.clone(), e))?
            };
            if pack.author != author {
                return Err(Error::Pack {
                    name: source.clone(),
                    message: format!("declares author `{}` but is configured for `{author}`", pack.author),
                });
            }
            out.insert(author, pack);
        }
        Ok(out)
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.manifest.conditions()
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.output_dir.join("runs")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("report")
    }

    pub fn sheets_dir(&self) -> PathBuf {
        self.output_dir.join("sheets")
    }

    pub fn keys_dir(&self) -> PathBuf {
        self.output_dir.join("keys")
    }

    pub fn ratings_dir(&self) -> PathBuf {
        self.output_dir.join("ratings")
    }
}
