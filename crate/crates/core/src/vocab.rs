//! Primitive actions, objects and tasks.
//!
//! Both factor vocabularies have 15 classes: twelve domain entries followed by
//! the three specials `start`, `stop` and `task fail`, always in that order.

use serde::{Deserialize, Serialize};

pub const PRIMITIVE_ACTIONS: [&str; 12] = [
    "move to",
    "grasp",
    "place back",
    "pour into",
    "open",
    "pour away",
    "hold",
    "heat",
    "close",
    "turn on",
    "clean",
    "put into",
];

pub const OBJECTS: [&str; 12] = [
    "cup",
    "pot",
    "water dispenser",
    "tea box",
    "water",
    "bowl",
    "eraser",
    "board",
    "washing machine",
    "teapot",
    "clothes",
    "closet",
];

pub const SPECIALS: [&str; 3] = ["start", "stop", "task fail"];

pub const TASKS: [&str; 15] = [
    "pour the water in the cup into the bowl",
    "make tea with the cup",
    "make tea with the cup using water from the water dispenser",
    "clean the board",
    "get a cup of hot water",
    "get a cup of hot water from the pot",
    "pour a cup of water",
    "pour a cup of water from the pot",
    "pour a cup of tea from the teapot",
    "wash the clothes with the washing machine",
    "wash the clothes in the washing machine",
    "put the clothes in the closet",
    "make tea with the cup using water from the pot",
    "get a cup of hot water from the water dispenser",
    "pour a cup of water from the water dispenser",
];

/// Number of domain object classes that can appear in a scene.
pub const NUM_OBJECT_CLASSES: usize = OBJECTS.len();
/// Size of each factor vocabulary, specials included.
pub const FACTOR_CLASSES: usize = 15;
pub const NUM_TASKS: usize = TASKS.len();

pub const START: u8 = 12;
pub const STOP: u8 = 13;
pub const TASK_FAIL: u8 = 14;

/// Dense id in the primitive-action vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub u8);

/// Dense id in the object vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u8);

/// A primitive action applied to an associated object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomicAction {
    pub action: ActionId,
    pub object: ObjectId,
}

impl AtomicAction {
    pub const START: AtomicAction = AtomicAction::new(START, START);
    pub const STOP: AtomicAction = AtomicAction::new(STOP, STOP);
    pub const TASK_FAIL: AtomicAction = AtomicAction::new(TASK_FAIL, TASK_FAIL);

    pub const fn new(action: u8, object: u8) -> Self {
        AtomicAction {
            action: ActionId(action),
            object: ObjectId(object),
        }
    }

    pub fn is_task_fail(&self) -> bool {
        *self == Self::TASK_FAIL
    }

    pub fn is_stop(&self) -> bool {
        *self == Self::STOP
    }
}

impl std::fmt::Display for AtomicAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", action_name(self.action), object_name(self.object))
    }
}

pub fn action_name(id: ActionId) -> &'static str {
    let i = id.0 as usize;
    if i < PRIMITIVE_ACTIONS.len() {
        PRIMITIVE_ACTIONS[i]
    } else {
        SPECIALS.get(i - PRIMITIVE_ACTIONS.len()).copied().unwrap_or("?")
    }
}

pub fn object_name(id: ObjectId) -> &'static str {
    let i = id.0 as usize;
    if i < OBJECTS.len() {
        OBJECTS[i]
    } else {
        SPECIALS.get(i - OBJECTS.len()).copied().unwrap_or("?")
    }
}

pub fn action_id(name: &str) -> Option<ActionId> {
    PRIMITIVE_ACTIONS
        .iter()
        .chain(SPECIALS.iter())
        .position(|n| *n == name)
        .map(|i| ActionId(i as u8))
}

pub fn object_id(name: &str) -> Option<ObjectId> {
    OBJECTS
        .iter()
        .chain(SPECIALS.iter())
        .position(|n| *n == name)
        .map(|i| ObjectId(i as u8))
}

/// Serializable snapshot of all vocabularies, written into dataset headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub actions: Vec<String>,
    pub objects: Vec<String>,
    pub tasks: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        let with_specials = |xs: &[&str]| {
            xs.iter()
                .chain(SPECIALS.iter())
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
        };
        Vocab {
            actions: with_specials(&PRIMITIVE_ACTIONS),
            objects: with_specials(&OBJECTS),
            tasks: TASKS.iter().map(|s| s.to_string()).collect(),
        }
    }
}
