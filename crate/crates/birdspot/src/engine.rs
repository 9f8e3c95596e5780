//! An immutable snapshot of everything a query needs: dataset, spatial index,
//! species models, rarity table and attribute matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use birdspot_core::geo::{GeoPoint, GridIndex, Route};
use birdspot_core::sighting_model::{train_species, RarityTable, SpeciesModel};
use birdspot_core::suggester::{suggest, SuggestError, Suggestion, SuggestionSources};
use birdspot_core::verifier::{vision_prior, AttributeMatrix, VerificationSession, VerifyError};
use birdspot_core::{Dataset, PrimitiveDateTime};

use crate::checklist_file::load_dataset_from;
use crate::config::EngineConfig;
use crate::error::Result;
use crate::formats::{read_attributes, read_dataset_cache, read_models, read_rarity, RARITY_FILE};

#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    dataset: Dataset,
    index: GridIndex,
    models: BTreeMap<String, SpeciesModel>,
    rarity: RarityTable,
    matrix: AttributeMatrix,
}

/// A directory or `.csv` file is read as checklists; anything else as a
/// dataset cache.
pub fn load_dataset_path(path: &Path) -> Result<Dataset> {
    let is_csv = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"));
    if path.is_dir() || is_csv {
        load_dataset_from(&[path.to_path_buf()])
    } else {
        read_dataset_cache(path)
    }
}

/// Train a model for each requested species (all species when `species` is
/// empty) and compute the rarity table over the whole dataset.
pub fn train_models(
    dataset: &Dataset,
    species: &[String],
    config: &EngineConfig,
) -> Result<(BTreeMap<String, SpeciesModel>, RarityTable)> {
    let index = GridIndex::build(dataset, config.index.cell_size_deg)?;
    let targets: Vec<String> = if species.is_empty() {
        dataset.species().map(str::to_string).collect()
    } else {
        species.to_vec()
    };
    let mut models = BTreeMap::new();
    for s in targets {
        let model = train_species(dataset, &index, &s, config.train.negative_radius_km, &config.train.optimizer)?;
        models.insert(s, model);
    }
    let rarity = RarityTable::compute(dataset, &config.rarity)?;
    Ok((models, rarity))
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        dataset: Dataset,
        models: BTreeMap<String, SpeciesModel>,
        rarity: RarityTable,
        matrix: AttributeMatrix,
    ) -> Result<Self> {
        config.validate()?;
        let index = GridIndex::build(&dataset, config.index.cell_size_deg)?;
        Ok(Self {
            config,
            dataset,
            index,
            models,
            rarity,
            matrix,
        })
    }

    /// Load every artifact named by `config.paths`.
    pub fn load(config: EngineConfig) -> Result<Self> {
        let dataset = load_dataset_path(&config.paths.data)?;
        let models = read_models(&config.paths.models)?;
        let rarity = read_rarity(&config.paths.models.join(RARITY_FILE))?;
        let matrix = read_attributes(&config.paths.attributes)?;
        Self::new(config, dataset, models, rarity, matrix)
    }

    /// Build a snapshot straight from checklists, training every model.
    pub fn train(config: EngineConfig, dataset: Dataset, matrix: AttributeMatrix) -> Result<Self> {
        let (models, rarity) = train_models(&dataset, &[], &config)?;
        Self::new(config, dataset, models, rarity, matrix)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    pub fn models(&self) -> &BTreeMap<String, SpeciesModel> {
        &self.models
    }

    pub fn rarity(&self) -> &RarityTable {
        &self.rarity
    }

    pub fn matrix(&self) -> &AttributeMatrix {
        &self.matrix
    }

    fn sources(&self) -> SuggestionSources<'_> {
        SuggestionSources {
            dataset: &self.dataset,
            index: &self.index,
            models: &self.models,
            rarity: &self.rarity,
        }
    }

    pub fn suggest(&self, position: GeoPoint, ts: PrimitiveDateTime, level: u32) -> Result<Vec<Suggestion>, SuggestError> {
        suggest(self.sources(), position, ts, level, &self.config.suggest)
    }

    /// Like [`Engine::suggest`], but too little nearby data means "nothing to
    /// suggest" rather than an error.
    pub fn suggest_or_empty(
        &self,
        position: GeoPoint,
        ts: PrimitiveDateTime,
        level: u32,
    ) -> Result<Vec<Suggestion>, SuggestError> {
        match self.suggest(position, ts, level) {
            Err(SuggestError::NotEnoughData { .. }) => Ok(Vec::new()),
            other => other,
        }
    }

    /// Species expected on a hike: the union of suggestions at every route
    /// waypoint at the hike's start time.
    pub fn expected_species(&self, route: &Route, start: PrimitiveDateTime, level: u32) -> Result<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        for &wp in route.waypoints() {
            out.extend(self.suggest_or_empty(wp, start, level)?.into_iter().map(|s| s.species));
        }
        Ok(out)
    }

    /// Open a verification session over every species in the attribute
    /// matrix, with the prior read off the photo's attributes.
    pub fn open_verification(
        &self,
        id: impl Into<String>,
        claimed: &str,
        photo_attributes: &[bool],
    ) -> Result<VerificationSession, VerifyError> {
        let candidates = self.matrix.species();
        let prior = vision_prior(photo_attributes, candidates, &self.matrix, self.config.vision.eps)?;
        VerificationSession::open(id, claimed, candidates, Some(prior), &self.matrix, &self.config.verify)
    }
}

