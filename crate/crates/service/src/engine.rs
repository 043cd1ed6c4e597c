//! The loaded rule index and the swap point shared by the CLI and the server.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use anyhow::Context as _;
use log::info;
use valrec_core::index::RuleIndex;
use valrec_core::io::{read_mappings, Manifest, RuleStore};
use valrec_core::mapping::MappingRepository;
use valrec_core::mining::AssociationRule;
use valrec_core::model::{Context, FieldSlot};
use valrec_core::recommend::{recommend, RecommendOptions, Recommendation};

/// Everything one request needs. The index owns the mappings it was keyed
/// with, so the two cannot drift apart.
#[derive(Debug)]
pub struct EngineState {
    pub index: RuleIndex,
    pub manifest: Option<Manifest>,
    pub defaults: RecommendOptions,
}

impl EngineState {
    pub fn new(rules: Vec<AssociationRule>, m: MappingRepository, manifest: Option<Manifest>) -> Self {
        let counts = manifest.as_ref().map(Manifest::train_counts).unwrap_or_default();
        EngineState {
            index: RuleIndex::build(rules, m).with_train_counts(counts),
            manifest,
            defaults: RecommendOptions::default(),
        }
    }

    pub fn load(store: &Path, mappings: Option<&Path>) -> anyhow::Result<Self> {
        let m = match mappings {
            Some(p) => read_mappings(p).with_context(|| format!("loading mappings from {}", p.display()))?,
            None => MappingRepository::default(),
        };
        let loaded = RuleStore::load(store).with_context(|| format!("loading rule store {}", store.display()))?;
        info!("loaded {} rules from {}", loaded.rules.len(), store.display());
        Ok(Self::new(loaded.rules, m, loaded.manifest))
    }

    pub fn with_defaults(mut self, defaults: RecommendOptions) -> Self {
        self.defaults = defaults;
        self
    }

    /// `opts` replaces the configured defaults field by field.
    pub fn recommend(
        &self,
        c: &Context,
        target: &FieldSlot,
        opts: Option<&RecommendOptions>,
    ) -> valrec_core::Result<Vec<Recommendation>> {
        let merged = match opts {
            Some(o) => RecommendOptions {
                score_cutoff: o.score_cutoff.or(self.defaults.score_cutoff),
                max_results: o.max_results.or(self.defaults.max_results),
            },
            None => self.defaults.clone(),
        };
        recommend(c, target, &self.index, &merged)
    }
}

/// Readers take the current state and keep it for the whole request; a
/// reload swaps in a new one without waiting for them.
#[derive(Debug)]
pub struct Engine {
    current: RwLock<Arc<EngineState>>,
    source: Option<(PathBuf, Option<PathBuf>)>,
}

impl Engine {
    pub fn new(state: EngineState) -> Self {
        Engine { current: RwLock::new(Arc::new(state)), source: None }
    }

    /// An engine that can re-read its store on [`Engine::reload`].
    pub fn from_store(store: PathBuf, mappings: Option<PathBuf>, defaults: RecommendOptions) -> anyhow::Result<Self> {
        let state = EngineState::load(&store, mappings.as_deref())?.with_defaults(defaults);
        Ok(Engine { current: RwLock::new(Arc::new(state)), source: Some((store, mappings)) })
    }

    pub fn state(&self) -> Arc<EngineState> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn swap(&self, state: EngineState) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(state);
    }

    /// Rebuilds from the files the engine was started with. The old state
    /// stays in place if loading fails.
    pub fn reload(&self) -> anyhow::Result<usize> {
        let (store, mappings) = self.source.as_ref().context("engine was not started from a rule store")?;
        let defaults = self.state().defaults.clone();
        let state = EngineState::load(store, mappings.as_deref())?.with_defaults(defaults);
        let n = state.index.len();
        self.swap(state);
        Ok(n)
    }
}
