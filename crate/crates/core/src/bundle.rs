//! Fixture bundles: a directory holding `scene.json` and the synthesized
//! `S.paft` (K channels), `L.paft` (2C channels) and `W.paft` (1 channel).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grids::FieldSet;
use crate::scalar::Real;
use crate::skeleton::Skeleton;
use crate::synth::{synthesize, PersonPose, SynthParams};
use crate::tensor::{read_tensor, write_tensor, Tensor};

pub const SCENE_FILE: &str = "scene.json";
pub const CONFIDENCE_FILE: &str = "S.paft";
pub const AFFINITY_FILE: &str = "L.paft";
pub const MASK_FILE: &str = "W.paft";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"), deny_unknown_fields)]
pub struct ScenePerson<T> {
    pub points: Vec<Point2<T>>,
    pub visible: Vec<bool>,
    /// Tight visible-joint box area, used as the OKS scale.
    pub area: T,
}

/// Contents of `scene.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"), deny_unknown_fields)]
pub struct Scene<T> {
    pub skeleton: Skeleton,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub occlusion_level: f64,
    pub params: SynthParams<T>,
    pub people: Vec<ScenePerson<T>>,
}

impl<T: Real> Scene<T> {
    pub fn new(
        skeleton: Skeleton,
        seed: u64,
        (width, height): (usize, usize),
        occlusion_level: f64,
        params: SynthParams<T>,
        poses: &[PersonPose<T>],
    ) -> Result<Self> {
        let people = poses
            .iter()
            .map(|p| {
                p.check(&skeleton)?;
                Ok(ScenePerson { points: p.points.clone(), visible: p.visible.clone(), area: p.joint_area() })
            })
            .collect::<Result<_>>()?;
        Ok(Self { skeleton, seed, width, height, occlusion_level, params, people })
    }

    pub fn poses(&self) -> Result<Vec<PersonPose<T>>> {
        self.people.iter().map(|p| PersonPose::new(&self.skeleton, p.points.clone(), p.visible.clone())).collect()
    }

    pub fn synthesize(&self) -> Result<FieldSet<T>> {
        synthesize(&self.poses()?, &self.skeleton, &self.params, self.width, self.height)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(json).map_err(|e| Error::Json { path: SCENE_FILE.into(), source: e })?;
        scene.poses()?;
        scene.params.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// Writes `scene.json` and the three field tensors into `dir`, creating it.
pub fn write_bundle<T: Real>(dir: impl AsRef<Path>, scene: &Scene<T>, fields: &FieldSet<T>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scene_path = dir.join(SCENE_FILE);
    fs::write(&scene_path, scene.to_json() + "\n").map_err(|e| Error::io(&scene_path, e))?;
    write_tensor(dir.join(CONFIDENCE_FILE), &Tensor::from_channels(&fields.confidences)?)?;
    write_tensor(dir.join(AFFINITY_FILE), &Tensor::from_vector_channels(&fields.affinities)?)?;
    write_tensor(dir.join(MASK_FILE), &Tensor::from_channels(std::slice::from_ref(&fields.mask))?)?;
    Ok(())
}

/// Reads a bundle back, checking channel counts and shapes against the scene.
pub fn read_bundle<T: Real>(dir: impl AsRef<Path>) -> Result<(Scene<T>, FieldSet<T>)> {
    let dir = dir.as_ref();
    let scene_path = dir.join(SCENE_FILE);
    let json = fs::read_to_string(&scene_path).map_err(|e| Error::io(&scene_path, e))?;
    let scene = Scene::<T>::from_json(&json).map_err(|e| match e {
        Error::Json { source, .. } => Error::Json { path: scene_path.clone(), source },
        other => other,
    })?;
    let confidences = read_tensor(dir.join(CONFIDENCE_FILE))?.to_channels::<T>()?;
    let affinities = read_tensor(dir.join(AFFINITY_FILE))?.to_vector_channels::<T>()?;
    let mut mask = read_tensor(dir.join(MASK_FILE))?.to_channels::<T>()?;
    if mask.len() != 1 {
        return Err(Error::InvalidGrid(format!("{MASK_FILE} has {} channels, expected 1", mask.len())));
    }
    let mask = mask.remove(0);
    if (mask.width(), mask.height()) != (scene.width, scene.height) {
        return Err(Error::DimensionMismatch(format!(
            "fields are {}x{}, scene says {}x{}",
            mask.width(),
            mask.height(),
            scene.width,
            scene.height
        )));
    }
    let fields = FieldSet::new(scene.skeleton.clone(), confidences, affinities, mask)?;
    Ok((scene, fields))
}
