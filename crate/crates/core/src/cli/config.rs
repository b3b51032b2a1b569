use serde::{Deserialize, Serialize};

use crate::assemble::IntegralParams;
use crate::boxes::ExpandParams;
use crate::detect::NmsParams;
use crate::error::{Error, Result};
use crate::skeleton::Skeleton;
use crate::synth::SynthParams;

/// Every tunable of a run. Parsed from JSON with unknown keys rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub skeleton: String,
    pub sigma: f64,
    pub sigma_l: f64,
    pub nms: NmsParams<f64>,
    pub integral: IntegralParams<f64>,
    pub expand: ExpandParams<f64>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthParams::<f64>::default();
        Self {
            skeleton: "coco17".into(),
            sigma: synth.sigma,
            sigma_l: synth.sigma_l,
            nms: NmsParams::default(),
            integral: IntegralParams::default(),
            expand: ExpandParams::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(json).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.skeleton()?;
        self.synth().validate()?;
        self.nms.validate()?;
        self.integral.validate()?;
        self.expand.validate()
    }

    pub fn skeleton(&self) -> Result<Skeleton> {
        Skeleton::preset(&self.skeleton)
    }

    pub fn synth(&self) -> SynthParams<f64> {
        SynthParams { sigma: self.sigma, sigma_l: self.sigma_l }
    }
}
