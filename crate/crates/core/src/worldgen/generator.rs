use rand::Rng;

use super::{attributes_of, Access, Environment, Fill, ObjectInstance, Power, Scene};

// object class ids
const CUP: u8 = 0;
const POT: u8 = 1;
const DISPENSER: u8 = 2;
const TEA_BOX: u8 = 3;
const BOWL: u8 = 5;
const ERASER: u8 = 6;
const BOARD: u8 = 7;
const WASHER: u8 = 8;
const TEAPOT: u8 = 9;
const CLOTHES: u8 = 10;
const CLOSET: u8 = 11;

/// (class, presence probability, max instances). Instance count is uniform in
/// `1..=max` when present. The built-in profiles are chosen so that every
/// class with a state attribute lands in the same encoding slot in every
/// environment.
pub type ObjectPrior = (u8, f64, usize);

pub fn environment_profile(env: Environment) -> &'static [ObjectPrior] {
    use Environment::*;
    match env {
        Kitchen => &[
            (CUP, 1.0, 1),
            (POT, 1.0, 1),
            (DISPENSER, 1.0, 1),
            (TEA_BOX, 1.0, 1),
            (BOWL, 1.0, 1),
            (TEAPOT, 1.0, 1),
        ],
        Office => &[
            (CUP, 1.0, 1),
            (POT, 1.0, 1),
            (DISPENSER, 1.0, 1),
            (TEA_BOX, 1.0, 1),
            (ERASER, 1.0, 1),
            (BOARD, 1.0, 1),
        ],
        Lab => &[(CUP, 1.0, 1), (POT, 1.0, 1), (ERASER, 1.0, 1), (BOARD, 1.0, 1)],
        Dormitory | Balcony => &[
            (CUP, 1.0, 1),
            (POT, 1.0, 1),
            (DISPENSER, 1.0, 1),
            (TEA_BOX, 1.0, 1),
            (BOWL, 1.0, 1),
            (WASHER, 1.0, 1),
            (CLOTHES, 1.0, 1),
            (CLOSET, 1.0, 1),
        ],
        LivingRoom => &[
            (CUP, 1.0, 1),
            (POT, 1.0, 1),
            (DISPENSER, 1.0, 1),
            (TEA_BOX, 1.0, 1),
            (BOWL, 1.0, 1),
            (TEAPOT, 1.0, 1),
            (CLOTHES, 1.0, 1),
            (CLOSET, 1.0, 1),
        ],
        Corridor => &[(CUP, 1.0, 1), (POT, 1.0, 1), (DISPENSER, 1.0, 1), (ERASER, 1.0, 1), (BOARD, 1.0, 1)],
    }
}

/// Probability of the "active" state per attribute: filled, closed, on.
fn state_priors(class_id: u8) -> (f64, f64, f64) {
    match class_id {
        CUP => (0.4, 0.0, 0.0),
        POT => (0.6, 0.0, 0.0),
        BOWL => (0.3, 0.0, 0.0),
        TEAPOT => (0.6, 0.0, 0.0),
        DISPENSER => (0.0, 0.0, 0.6),
        TEA_BOX => (0.0, 0.5, 0.0),
        WASHER => (0.0, 0.6, 0.25),
        CLOSET => (0.0, 0.6, 0.0),
        _ => (0.0, 0.0, 0.0),
    }
}

const JITTER: f64 = 0.05;

/// Typical top-left corner of each class in a frame; objects are placed near it.
fn anchor(class_id: u8) -> (f64, f64) {
    let c = f64::from(class_id);
    (0.05 + 0.065 * c, if class_id % 2 == 0 { 0.3 } else { 0.55 })
}

fn draw_object<R: Rng + ?Sized>(rng: &mut R, class_id: u8) -> ObjectInstance {
    let (has_fill, has_access, has_power) = attributes_of(class_id);
    let (p_filled, p_closed, p_on) = state_priors(class_id);
    let (ax, ay) = anchor(class_id);
    let x = (ax + rng.gen_range(-JITTER..JITTER)).clamp(0.0, 0.85);
    let y = (ay + rng.gen_range(-JITTER..JITTER)).clamp(0.0, 0.85);
    let w = rng.gen_range(0.05..0.15);
    let h = rng.gen_range(0.05..0.15);
    let mut obj = ObjectInstance::new(class_id, [x, y, w, h]);
    if has_fill {
        obj.fill = if rng.gen_bool(p_filled) { Fill::Filled } else { Fill::Empty };
    }
    if has_access {
        obj.access = if rng.gen_bool(p_closed) { Access::Closed } else { Access::Open };
    }
    if has_power {
        obj.power = if rng.gen_bool(p_on) { Power::On } else { Power::Off };
    }
    obj
}

/// Draws a scene from the environment's object priors. Never returns an empty
/// scene: if no object survives the draw, the most likely one is added.
pub fn generate_scene<R: Rng + ?Sized>(rng: &mut R, env: Environment) -> Scene {
    let profile = environment_profile(env);
    let mut objects = Vec::new();
    for &(class_id, p, max) in profile {
        if rng.gen_bool(p) {
            let count = if max > 1 { rng.gen_range(1..=max) } else { 1 };
            for _ in 0..count {
                objects.push(draw_object(rng, class_id));
            }
        }
    }
    if objects.is_empty() {
        let &(class_id, _, _) = profile
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("profiles are nonempty");
        objects.push(draw_object(rng, class_id));
    }
    Scene {
        environment: env,
        objects,
    }
}

/// Objects a scene must contain for a task to be posed in it.
pub fn required_objects(task_id: usize) -> &'static [u8] {
    match task_id {
        0 => &[CUP, BOWL],
        1 => &[CUP, TEA_BOX],
        2 => &[CUP, TEA_BOX, DISPENSER],
        3 => &[ERASER, BOARD],
        4 | 6 => &[CUP],
        5 | 7 => &[CUP, POT],
        8 => &[CUP, TEAPOT],
        9 => &[CLOTHES, WASHER],
        10 => &[CLOSET, WASHER],
        11 => &[CLOTHES, CLOSET],
        12 => &[CUP, POT, TEA_BOX],
        13 | 14 => &[CUP, DISPENSER],
        _ => &[],
    }
}

/// Environments in which a task is posed.
pub fn task_environments(task_id: usize) -> &'static [Environment] {
    use Environment::*;
    match task_id {
        0 => &[Kitchen, LivingRoom, Dormitory],
        1 => &[Kitchen, Office, Dormitory, LivingRoom],
        2 => &[Kitchen, Office, Dormitory],
        3 => &[Office, Lab, Corridor],
        4 => &[Kitchen, Office, Dormitory, Lab],
        5 => &[Kitchen, Dormitory],
        6 => &[Kitchen, Office, Lab, Dormitory, LivingRoom],
        7 => &[Kitchen, Dormitory, LivingRoom],
        8 => &[Kitchen, LivingRoom],
        9 | 10 => &[Balcony],
        11 => &[Dormitory, LivingRoom],
        12 => &[Kitchen, Dormitory],
        13 => &[Office, Kitchen, Corridor],
        14 => &[Office, Kitchen, Corridor],
        _ => &[],
    }
}
