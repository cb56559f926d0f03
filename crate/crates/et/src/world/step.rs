//! Environment dynamics and the egocentric observation.

use serde::{Deserialize, Serialize};

use super::{ActionType, GridWorld, ObjectClass, Terrain, WorldError, CLASS_COUNT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepResult {
    Ok,
    Failed,
}

/// Egocentric crop side length.
pub const CROP: usize = 7;
/// Channels per cell: terrain (3) + object class (24) + state flags (6)
/// + held-object class (24) + empty-hand (1).
pub const OBS_CHANNELS: usize = 3 + CLASS_COUNT + 6 + CLASS_COUNT + 1;
/// Flat multi-hot feature dimension of one observation.
pub const FEATURE_DIM: usize = CROP * CROP * OBS_CHANNELS;

const CH_FLOOR: usize = 0;
const CH_WALL: usize = 1;
const CH_COUNTER: usize = 2;
const CH_CLASS0: usize = 3;
const CH_FLAG0: usize = 3 + CLASS_COUNT;
const CH_HELD0: usize = 3 + CLASS_COUNT + 6;
const CH_EMPTY_HAND: usize = OBS_CHANNELS - 1;

/// Rotation-normalized symbolic crop, stored as the sorted set of active
/// feature indices (`cell * OBS_CHANNELS + channel`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub active: Vec<u16>,
}

impl Observation {
    pub fn has(&self, row: usize, col: usize, channel: usize) -> bool {
        let idx = ((row * CROP + col) * OBS_CHANNELS + channel) as u16;
        self.active.binary_search(&idx).is_ok()
    }

    pub fn feature_indices(&self) -> Vec<usize> {
        self.active.iter().map(|&i| i as usize).collect()
    }
}

/// Pure egocentric observation of the world.
///
/// Row axis is the facing direction: row 0 lies five cells ahead, row 5 is
/// the agent's own cell, row 6 one cell behind; columns run left→right in the
/// agent frame. Cells outside the map read as wall. The held object (or the
/// empty hand) is broadcast to every cell's held channels.
pub fn observe(world: &GridWorld) -> Observation {
    let fwd = world.agent.orientation.forward();
    let right = world.agent.orientation.right().forward();
    let mut active = Vec::with_capacity(CROP * CROP * 3);

    let held_channel = match world.agent.held {
        Some(id) => CH_HELD0 + world.object(id).class.id(),
        None => CH_EMPTY_HAND,
    };

    for i in 0..CROP {
        let rel_f = 5 - i as i32;
        for j in 0..CROP {
            let rel_r = j as i32 - 3;
            let pos = (
                world.agent.pos.0 + rel_f * fwd.0 + rel_r * right.0,
                world.agent.pos.1 + rel_f * fwd.1 + rel_r * right.1,
            );
            let cell = i * CROP + j;
            let base = cell * OBS_CHANNELS;
            let terrain_ch = match world.terrain_at(pos) {
                Terrain::Floor => CH_FLOOR,
                Terrain::Wall => CH_WALL,
                Terrain::Counter => CH_COUNTER,
            };
            active.push((base + terrain_ch) as u16);

            if world.in_bounds(pos) {
                let mut class_hits = [false; CLASS_COUNT];
                let mut flag_hits = [false; 6];
                for o in &world.objects {
                    if o.pos == pos && world.is_visible(o.id) {
                        class_hits[o.class.id()] = true;
                        for (f, hit) in [o.open, o.toggled_on, o.sliced, o.clean, o.hot, o.cold]
                            .into_iter()
                            .zip(flag_hits.iter_mut())
                        {
                            *hit |= f;
                        }
                    }
                }
                for (c, &hit) in class_hits.iter().enumerate() {
                    if hit {
                        active.push((base + CH_CLASS0 + c) as u16);
                    }
                }
                for (f, &hit) in flag_hits.iter().enumerate() {
                    if hit {
                        active.push((base + CH_FLAG0 + f) as u16);
                    }
                }
            }
            active.push((base + held_channel) as u16);
        }
    }
    active.sort_unstable();
    Observation { active }
}

/// The three cells the agent can interact with: straight ahead, then the two
/// forward diagonals.
fn frontal_arc(world: &GridWorld) -> [(i32, i32); 3] {
    let fwd = world.agent.orientation.forward();
    let right = world.agent.orientation.right().forward();
    let p = world.agent.pos;
    let ahead = (p.0 + fwd.0, p.1 + fwd.1);
    [
        ahead,
        (ahead.0 - right.0, ahead.1 - right.1),
        (ahead.0 + right.0, ahead.1 + right.1),
    ]
}

/// Nearest visible instance of `class` in the frontal arc: straight-ahead
/// beats diagonals, remaining ties go to the lowest object id.
pub(crate) fn resolve_instance(world: &GridWorld, class: ObjectClass) -> Option<u32> {
    let arc = frontal_arc(world);
    let mut best: Option<(usize, u32)> = None;
    for o in &world.objects {
        if o.class != class || !world.is_visible(o.id) {
            continue;
        }
        let rank = match arc.iter().position(|&c| c == o.pos) {
            Some(0) => 0,
            Some(_) => 1,
            None => continue,
        };
        if best.map_or(true, |(r, id)| (rank, o.id) < (r, id)) {
            best = Some((rank, o.id));
        }
    }
    best.map(|(_, id)| id)
}

/// Apply one action. Failed actions leave the world untouched; interactions
/// with a missing target class are a contract error.
pub fn step(
    world: &mut GridWorld,
    action: ActionType,
    target: Option<ObjectClass>,
) -> Result<StepResult, WorldError> {
    if action.is_interaction() && target.is_none() {
        return Err(WorldError::MissingTarget {
            action: action.name(),
        });
    }
    match action {
        ActionType::MoveAhead => {
            let fwd = world.agent.orientation.forward();
            let next = (world.agent.pos.0 + fwd.0, world.agent.pos.1 + fwd.1);
            if world.walkable(next) {
                world.agent.pos = next;
                Ok(StepResult::Ok)
            } else {
                Ok(StepResult::Failed)
            }
        }
        ActionType::RotateLeft => {
            world.agent.orientation = world.agent.orientation.left();
            Ok(StepResult::Ok)
        }
        ActionType::RotateRight => {
            world.agent.orientation = world.agent.orientation.right();
            Ok(StepResult::Ok)
        }
        ActionType::Stop => Ok(StepResult::Ok),
        ActionType::Pickup => {
            let class = target.unwrap();
            if world.agent.held.is_some() || !class.is_pickupable() {
                return Ok(StepResult::Failed);
            }
            let Some(id) = resolve_instance(world, class) else {
                return Ok(StepResult::Failed);
            };
            for o in world.objects.iter_mut() {
                o.contained_ids.retain(|&c| c != id);
            }
            world.agent.held = Some(id);
            Ok(StepResult::Ok)
        }
        ActionType::Put => {
            let class = target.unwrap();
            let Some(held) = world.agent.held else {
                return Ok(StepResult::Failed);
            };
            if !class.is_receptacle() {
                return Ok(StepResult::Failed);
            }
            let Some(recep_id) = resolve_instance(world, class) else {
                return Ok(StepResult::Failed);
            };
            let recep = world.object(recep_id);
            if recep.class.is_openable() && !recep.open {
                return Ok(StepResult::Failed);
            }
            let recep_pos = recep.pos;
            let chills = recep.class == ObjectClass::Fridge;
            {
                let obj = world.object_mut(held);
                obj.pos = recep_pos;
                if chills {
                    obj.cold = true;
                }
            }
            world.object_mut(recep_id).contained_ids.push(held);
            world.agent.held = None;
            Ok(StepResult::Ok)
        }
        ActionType::Open => {
            let class = target.unwrap();
            if !class.is_openable() {
                return Ok(StepResult::Failed);
            }
            match resolve_instance(world, class) {
                Some(id) if !world.object(id).open => {
                    world.object_mut(id).open = true;
                    Ok(StepResult::Ok)
                }
                _ => Ok(StepResult::Failed),
            }
        }
        ActionType::Close => {
            let class = target.unwrap();
            if !class.is_openable() {
                return Ok(StepResult::Failed);
            }
            match resolve_instance(world, class) {
                Some(id) if world.object(id).open => {
                    world.object_mut(id).open = false;
                    Ok(StepResult::Ok)
                }
                _ => Ok(StepResult::Failed),
            }
        }
        ActionType::ToggleOn => {
            let class = target.unwrap();
            if !class.is_toggleable() {
                return Ok(StepResult::Failed);
            }
            match resolve_instance(world, class) {
                Some(id) if !world.object(id).toggled_on => {
                    world.object_mut(id).toggled_on = true;
                    let held = world.agent.held;
                    if class == ObjectClass::Microwave {
                        if let Some(h) = held {
                            world.object_mut(h).hot = true;
                        }
                    }
                    if class == ObjectClass::Faucet {
                        let faucet_pos = world.object(id).pos;
                        let over_sink = world
                            .objects
                            .iter()
                            .any(|o| o.class == ObjectClass::Sink && o.pos == faucet_pos);
                        if let (Some(h), true) = (held, over_sink) {
                            world.object_mut(h).clean = true;
                        }
                    }
                    Ok(StepResult::Ok)
                }
                _ => Ok(StepResult::Failed),
            }
        }
        ActionType::ToggleOff => {
            let class = target.unwrap();
            if !class.is_toggleable() {
                return Ok(StepResult::Failed);
            }
            match resolve_instance(world, class) {
                Some(id) if world.object(id).toggled_on => {
                    world.object_mut(id).toggled_on = false;
                    Ok(StepResult::Ok)
                }
                _ => Ok(StepResult::Failed),
            }
        }
        ActionType::Slice => {
            let class = target.unwrap();
            let knife_held = world
                .agent
                .held
                .map(|id| world.object(id).class == ObjectClass::Knife)
                .unwrap_or(false);
            if !knife_held || !class.is_sliceable() {
                return Ok(StepResult::Failed);
            }
            match resolve_instance(world, class) {
                Some(id) if !world.object(id).sliced => {
                    world.object_mut(id).sliced = true;
                    Ok(StepResult::Ok)
                }
                _ => Ok(StepResult::Failed),
            }
        }
    }
}
