//! Synthetic scene world: scenes, feature encoders, generator, rule oracle,
//! dataset builder and feature noise.

mod dataset;
mod generator;
mod noise;
mod oracle;

pub use dataset::{
    build_dataset, read_samples, write_samples, Dataset, DatasetConfig, DatasetHeader, DatasetError, Origin,
    PoolEntry, Sample, validation_split, DATASET_SCHEMA,
};
pub use generator::{environment_profile, generate_scene, required_objects, task_environments};
pub use noise::{calibrate_sigma, negative_ratio, perturb_features, NoiseOutcome};
pub use oracle::{oracle_plan, OracleError};

use serde::{Deserialize, Serialize};

use crate::vocab::{FACTOR_CLASSES, NUM_OBJECT_CLASSES, NUM_TASKS};

pub const ENVIRONMENTS: [Environment; 7] = [
    Environment::Lab,
    Environment::Dormitory,
    Environment::Kitchen,
    Environment::Office,
    Environment::LivingRoom,
    Environment::Balcony,
    Environment::Corridor,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    Lab,
    Dormitory,
    Kitchen,
    Office,
    LivingRoom,
    Balcony,
    Corridor,
}

/// One tri-state attribute slot. Index 2 is always "not applicable".
pub trait TriState: Copy {
    fn slot(self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    Empty,
    Filled,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Open,
    Closed,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Power {
    On,
    Off,
    NotApplicable,
}

impl TriState for Fill {
    fn slot(self) -> usize {
        self as usize
    }
}
impl TriState for Access {
    fn slot(self) -> usize {
        self as usize
    }
}
impl TriState for Power {
    fn slot(self) -> usize {
        self as usize
    }
}

/// Which attributes apply to an object class: (fill, access, power).
pub fn attributes_of(class_id: u8) -> (bool, bool, bool) {
    match class_id {
        0 | 1 | 5 | 9 => (true, false, false), // cup, pot, bowl, teapot
        2 => (false, false, true),             // water dispenser
        3 | 11 => (false, true, false),        // tea box, closet
        8 => (false, true, true),              // washing machine
        _ => (false, false, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub class_id: u8,
    pub fill: Fill,
    pub access: Access,
    pub power: Power,
    /// (x, y, w, h) in image-normalized coordinates.
    pub bbox: [f64; 4],
}

impl ObjectInstance {
    /// Object with every attribute not applicable.
    pub fn new(class_id: u8, bbox: [f64; 4]) -> Self {
        ObjectInstance {
            class_id,
            fill: Fill::NotApplicable,
            access: Access::NotApplicable,
            power: Power::NotApplicable,
            bbox,
        }
    }

    /// True iff every attribute is set exactly where the class admits it and
    /// the box lies in the unit square.
    pub fn is_valid(&self) -> bool {
        let (f, a, p) = attributes_of(self.class_id);
        let [x, y, w, h] = self.bbox;
        (self.class_id as usize) < NUM_OBJECT_CLASSES
            && f == (self.fill != Fill::NotApplicable)
            && a == (self.access != Access::NotApplicable)
            && p == (self.power != Power::NotApplicable)
            && self.bbox.iter().all(|v| (0.0..=1.0).contains(v))
            && x + w <= 1.0 + 1e-12
            && y + h <= 1.0 + 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub environment: Environment,
    pub objects: Vec<ObjectInstance>,
}

impl Scene {
    pub fn find(&self, class_id: u8) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.class_id == class_id)
    }

    pub fn has(&self, class_id: u8) -> bool {
        self.find(class_id).is_some()
    }
}

/// Dimensions of the scene feature vector f^I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub m_max: usize,
    pub object_dim: usize,
    pub total_dim: usize,
}

/// class one-hot + three tri-state one-hots + bbox.
pub const OBJECT_DIM: usize = NUM_OBJECT_CLASSES + 3 * 3 + 4;
pub const DEFAULT_M_MAX: usize = 10;

impl SceneLayout {
    pub fn new(m_max: usize) -> Self {
        SceneLayout {
            m_max,
            object_dim: OBJECT_DIM,
            total_dim: m_max * OBJECT_DIM,
        }
    }

    /// Index ranges of the one-hot segments of object slot `k`:
    /// class, fill, access, power.
    pub fn segments(&self, k: usize) -> [std::ops::Range<usize>; 4] {
        let b = k * self.object_dim;
        let c = b + NUM_OBJECT_CLASSES;
        [b..c, c..c + 3, c + 3..c + 6, c + 6..c + 9]
    }

    pub fn bbox_range(&self, k: usize) -> std::ops::Range<usize> {
        let b = k * self.object_dim + NUM_OBJECT_CLASSES + 9;
        b..b + 4
    }
}

impl Default for SceneLayout {
    fn default() -> Self {
        SceneLayout::new(DEFAULT_M_MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("scene has {objects} objects but the layout holds {m_max}")]
    TooManyObjects { objects: usize, m_max: usize },
    #[error("task id {0} out of range")]
    TaskOutOfRange(usize),
}

/// Objects in the order used by the encoder: by class id, then bbox.
pub fn canonical_objects(scene: &Scene) -> Vec<ObjectInstance> {
    let mut objs = scene.objects.clone();
    objs.sort_by(|a, b| {
        a.class_id.cmp(&b.class_id).then_with(|| {
            a.bbox
                .iter()
                .zip(&b.bbox)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    objs
}

pub fn encode_scene(scene: &Scene, layout: &SceneLayout) -> Result<Vec<f64>, EncodeError> {
    if scene.objects.len() > layout.m_max {
        return Err(EncodeError::TooManyObjects {
            objects: scene.objects.len(),
            m_max: layout.m_max,
        });
    }
    let mut f = vec![0.0; layout.total_dim];
    for (k, obj) in canonical_objects(scene).iter().enumerate() {
        let [class, fill, access, power] = layout.segments(k);
        f[class.start + obj.class_id as usize] = 1.0;
        f[fill.start + obj.fill.slot()] = 1.0;
        f[access.start + obj.access.slot()] = 1.0;
        f[power.start + obj.power.slot()] = 1.0;
        f[layout.bbox_range(k)].copy_from_slice(&obj.bbox);
    }
    Ok(f)
}

pub fn encode_task(task_id: usize) -> Result<Vec<f64>, EncodeError> {
    if task_id >= NUM_TASKS {
        return Err(EncodeError::TaskOutOfRange(task_id));
    }
    let mut f = vec![0.0; NUM_TASKS];
    f[task_id] = 1.0;
    Ok(f)
}

/// Two-hot encoding of an atomic action: action one-hot ++ object one-hot.
pub fn encode_atomic(a: crate::vocab::AtomicAction) -> [usize; 2] {
    [a.action.0 as usize, FACTOR_CLASSES + a.object.0 as usize]
}
