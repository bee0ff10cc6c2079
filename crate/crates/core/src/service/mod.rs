//! Hosted tutoring sessions: an in-memory store of [`Session`]s behind a
//! JSON-over-HTTP router, with optional write-through JSON Lines logs.

mod http;
mod session;

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::csp::{CspError, Network};
use crate::discovery::{ModelDocument, ModelError};
use crate::explain::{ExplainError, Templates};
use crate::fixtures;
use crate::hints::{Catalog, CatalogError};
use crate::interaction::InteractionError;
use crate::problem::{compile, load_problem, ProblemError};

pub use http::{router, serve, AppState, Clock, ManualClock, SystemClock};
pub use session::{
    parse_log, replay, ActionRequest, ActionResponse, Applied, FinalState, LogLine, ReplayReport, Session, TraceLine,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no session `{0}`")]
    SessionNotFound(String),
    #[error("no problem `{0}`")]
    UnknownProblem(String),
    #[error("no model `{0}`")]
    UnknownModel(String),
    #[error("{0}")]
    InvalidRequest(String),
    #[error("line {line}: {message}")]
    BadLogLine { line: usize, message: String },
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::SessionNotFound(_) => "SessionNotFound",
            ServiceError::UnknownProblem(_) => "UnknownProblem",
            ServiceError::UnknownModel(_) => "UnknownModel",
            ServiceError::InvalidRequest(_) => "InvalidRequest",
            ServiceError::BadLogLine { .. } => "BadLogLine",
            ServiceError::Csp(e) => e.code(),
            ServiceError::Interaction(e) => e.code(),
            ServiceError::Classifier(e) => e.code(),
            ServiceError::Explain(e) => e.code(),
            ServiceError::Problem(e) => e.code(),
            ServiceError::Model(e) => e.code(),
            ServiceError::Catalog(e) => e.code(),
            ServiceError::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ServiceError::Io { path: path.to_path_buf(), source }
    }
}

const BUILTIN_PROBLEMS: [(&str, &str); 3] = [
    ("chain", include_str!("../../data/problems/chain.json")),
    ("coloring", include_str!("../../data/problems/coloring.json")),
    ("scheduling", include_str!("../../data/problems/scheduling.json")),
];

/// Problems, models, hint catalog and page copy a service hands to sessions.
#[derive(Debug, Clone)]
pub struct Registry {
    pub problems: BTreeMap<String, Network>,
    pub models: BTreeMap<String, Arc<ModelDocument>>,
    pub catalog: Catalog,
    pub templates: Arc<Templates>,
}

impl Default for Registry {
    /// Bundled problems and the hand-built `demo` model.
    fn default() -> Self {
        let problems = BUILTIN_PROBLEMS
            .iter()
            .map(|(id, text)| {
                let spec = load_problem(text).expect("bundled problem is valid");
                (id.to_string(), compile(&spec))
            })
            .collect();
        Registry {
            problems,
            models: BTreeMap::from([("demo".to_string(), Arc::new(fixtures::reset_model()))]),
            catalog: Catalog::default(),
            templates: Arc::new(Templates::default()),
        }
    }
}

fn json_files(dir: &Path) -> Result<Vec<(String, String)>, ServiceError> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| ServiceError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| ServiceError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let text = fs::read_to_string(&path).map_err(|e| ServiceError::io(&path, e))?;
            out.push((id, text));
        }
    }
    out.sort();
    Ok(out)
}

impl Registry {
    /// Adds every `*.json` problem in `dir`, named by file stem.
    pub fn load_problems(&mut self, dir: &Path) -> Result<(), ServiceError> {
        for (id, text) in json_files(dir)? {
            self.problems.insert(id, compile(&load_problem(&text)?));
        }
        Ok(())
    }

    pub fn load_models(&mut self, dir: &Path) -> Result<(), ServiceError> {
        for (id, text) in json_files(dir)? {
            self.models.insert(id, Arc::new(ModelDocument::from_json(&text)?));
        }
        Ok(())
    }

    pub fn load_catalog(&mut self, path: &Path) -> Result<(), ServiceError> {
        let text = fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        self.catalog = Catalog::from_json(&text)?;
        Ok(())
    }

    pub fn load_templates(&mut self, path: &Path) -> Result<(), ServiceError> {
        let text = fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        self.templates = Arc::new(Templates::from_json(&text)?);
        Ok(())
    }

    pub fn session(&self, id: &str, problem: &str, model: &str) -> Result<Session, ServiceError> {
        let network = self.problems.get(problem).ok_or_else(|| ServiceError::UnknownProblem(problem.to_string()))?;
        let doc = self.models.get(model).ok_or_else(|| ServiceError::UnknownModel(model.to_string()))?;
        Ok(Session::new(id, problem, network.clone(), model, doc.clone(), self.catalog.clone(), self.templates.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub listen: SocketAddr,
    pub problems_dir: Option<PathBuf>,
    pub models_dir: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub log_dir: Option<PathBuf>,
}

impl Config {
    pub fn registry(&self) -> Result<Registry, ServiceError> {
        let mut r = Registry::default();
        if let Some(d) = &self.problems_dir {
            r.load_problems(d)?;
        }
        if let Some(d) = &self.models_dir {
            r.load_models(d)?;
        }
        if let Some(p) = &self.catalog {
            r.load_catalog(p)?;
        }
        if let Some(p) = &self.templates {
            r.load_templates(p)?;
        }
        Ok(r)
    }
}
