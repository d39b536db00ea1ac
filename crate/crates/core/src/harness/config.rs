//! TOML run configuration.

use serde::{Deserialize, Serialize};

use crate::detect::PipelineConfig;
use crate::dfrm::RegistrationStrategy;
use crate::error::{Error, Result};
use crate::geometry::{Homography2D, RansacConfig, Transform3D};
use crate::synthgen::GeneratorConfig;

use super::io::PairInputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Identity,
    HomographySupplied,
    HomographyEstimated,
    Transform3dSupplied,
    Transform3dEstimated,
    #[default]
    GroundTruthPose,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Row-major 3×3 for `homography_supplied`.
    pub homography: Option<Vec<f64>>,
    /// Row-major 4×4 for `transform3d_supplied`.
    pub transform: Option<Vec<f64>>,
    pub ransac: RansacConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Also write `<name>_view{1,2}_overlay.png`.
    pub overlays: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { overlays: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub strategy: StrategyConfig,
    pub pipeline: PipelineConfig,
    pub generator: GeneratorConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::format("run config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.ransac.validate()?;
        self.pipeline.features.validate()?;
        self.pipeline.difference.validate()?;
        self.pipeline.detect.validate()?;
        self.generator.validate()
    }
}

impl StrategyConfig {
    pub fn needs_depth(&self) -> bool {
        matches!(
            self.kind,
            StrategyKind::Transform3dSupplied
                | StrategyKind::Transform3dEstimated
                | StrategyKind::GroundTruthPose
        )
    }

    /// Builds the strategy, naming the first missing input.
    pub fn resolve(&self, inputs: &PairInputs) -> Result<RegistrationStrategy> {
        if self.needs_depth() {
            if inputs.depth1.is_none() {
                return Err(Error::domain(
                    "missing input: depth1 is required by this strategy",
                ));
            }
            if inputs.depth2.is_none() {
                return Err(Error::domain(
                    "missing input: depth2 is required by this strategy",
                ));
            }
        }
        let corr = || {
            inputs.correspondences.clone().ok_or_else(|| {
                Error::domain("missing input: correspondences are required by this strategy")
            })
        };
        Ok(match self.kind {
            StrategyKind::Identity => RegistrationStrategy::Identity,
            StrategyKind::HomographySupplied => {
                let h = self
                    .homography
                    .as_ref()
                    .ok_or_else(|| Error::domain("missing input: strategy.homography"))?;
                RegistrationStrategy::HomographySupplied(Homography2D::from_row_major(h)?)
            }
            StrategyKind::HomographyEstimated => RegistrationStrategy::HomographyEstimated(corr()?),
            StrategyKind::Transform3dSupplied => {
                let t = self
                    .transform
                    .as_ref()
                    .ok_or_else(|| Error::domain("missing input: strategy.transform"))?;
                RegistrationStrategy::Transform3DSupplied(Transform3D::from_row_major(t)?)
            }
            StrategyKind::Transform3dEstimated => {
                RegistrationStrategy::Transform3DEstimated(corr()?, self.ransac.clone())
            }
            StrategyKind::GroundTruthPose => {
                let cams = inputs.cameras.as_ref().ok_or_else(|| {
                    Error::domain("missing input: cameras are required by this strategy")
                })?;
                RegistrationStrategy::GroundTruthPose(cams.cam1, cams.cam2)
            }
        })
    }
}
