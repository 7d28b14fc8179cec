//! The three evaluated systems: the unmodified base list, a re-ranker with
//! only the click profile, and a re-ranker with both profiles.

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::eval_harness::{EvalImpression, FittedMethod, RankingMethod};
use crate::features::{FEATURE_NAMES, NUM_FEATURES, QUERY_PERSONALISED};
use crate::ranker::{rank_order, train_lambdamart, QueryGroup, RankingEnsemble, TrainConfig};

pub const BASE: &str = "Base";
pub const CLICK: &str = "Click";
pub const OURS: &str = "Ours";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpec {
    pub name: &'static str,
    /// Feature indices fed to the ranker; `None` bypasses re-ranking.
    pub mask: Option<Vec<usize>>,
}

impl MethodSpec {
    pub fn base() -> Self {
        MethodSpec {
            name: BASE,
            mask: None,
        }
    }

    /// Non-personalised features plus the click profile score.
    pub fn click() -> Self {
        MethodSpec {
            name: CLICK,
            mask: Some(
                (0..NUM_FEATURES)
                    .filter(|&i| i != QUERY_PERSONALISED)
                    .collect(),
            ),
        }
    }

    pub fn ours() -> Self {
        MethodSpec {
            name: OURS,
            mask: Some((0..NUM_FEATURES).collect()),
        }
    }

    pub fn all() -> [MethodSpec; 3] {
        [Self::base(), Self::click(), Self::ours()]
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::all()
            .into_iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
    }

    pub fn feature_names(&self) -> Vec<&'static str> {
        self.mask
            .as_ref()
            .map_or_else(Vec::new, |m| m.iter().map(|&i| FEATURE_NAMES[i]).collect())
    }

    /// Masked feature rows of an impression, in suggestion order.
    pub fn rows(&self, imp: &EvalImpression) -> Vec<Vec<f64>> {
        let mask = self.mask.as_deref().unwrap_or(&[]);
        imp.features
            .iter()
            .map(|f| mask.iter().map(|&i| f.0[i]).collect())
            .collect()
    }

    /// Trains this method's ensemble. `None` for the base method.
    pub fn train(
        &self,
        train: &[&EvalImpression],
        config: &TrainConfig,
    ) -> Result<Option<RankingEnsemble>> {
        if self.mask.is_none() {
            return Ok(None);
        }
        let groups: Vec<QueryGroup> = train
            .iter()
            .map(|imp| QueryGroup {
                rows: self.rows(imp),
                labels: imp.labels.clone(),
            })
            .collect();
        train_lambdamart(&groups, &self.feature_names(), config).map(Some)
    }
}

/// A [`MethodSpec`] paired with training parameters.
pub struct ConfiguredMethod {
    pub spec: MethodSpec,
    pub train_config: TrainConfig,
}

struct Identity;

impl FittedMethod for Identity {
    fn order(&self, imp: &EvalImpression) -> Result<Vec<usize>> {
        Ok((0..imp.suggestions.len()).collect())
    }
}

pub struct FittedEnsemble {
    pub spec: MethodSpec,
    pub ensemble: RankingEnsemble,
}

impl FittedMethod for FittedEnsemble {
    fn order(&self, imp: &EvalImpression) -> Result<Vec<usize>> {
        let scores = self
            .spec
            .rows(imp)
            .iter()
            .map(|r| self.ensemble.predict(r))
            .collect::<Result<Vec<f64>>>()?;
        Ok(rank_order(&scores))
    }
}

impl RankingMethod for ConfiguredMethod {
    fn name(&self) -> &str {
        self.spec.name
    }

    fn fit(&self, train: &[&EvalImpression]) -> Result<Box<dyn FittedMethod>> {
        Ok(match self.spec.train(train, &self.train_config)? {
            None => Box::new(Identity),
            Some(ensemble) => Box::new(FittedEnsemble {
                spec: self.spec.clone(),
                ensemble,
            }),
        })
    }
}

/// Base, Click and Ours, in that order, sharing the configured ranker settings.
pub fn build_method_pipelines(cfg: &ExperimentConfig) -> Vec<ConfiguredMethod> {
    MethodSpec::all()
        .into_iter()
        .map(|spec| ConfiguredMethod {
            spec,
            train_config: cfg.ranker.clone(),
        })
        .collect()
}
