//! Seeded task sampling: layout choice, object placement, task spec.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::goals::conditions_for;
use super::layout::{build_terrain, connected};
use super::planner::plan_expert;
use super::{
    AgentState, GridWorld, ObjectClass, ObjectInstance, Orientation, TaskSpec, TaskType, Terrain,
    WorldError,
};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Seen,
    Unseen,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorldConfig {
    pub width: i32,
    pub height: i32,
    pub train_layouts: Vec<u32>,
    pub unseen_layouts: Vec<u32>,
    pub task_weights: Vec<(TaskType, f64)>,
    pub distractor_pickupables: usize,
    pub max_resample: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            width: 13,
            height: 13,
            train_layouts: (0..8).collect(),
            unseen_layouts: vec![8, 9],
            task_weights: vec![
                (TaskType::PickPlace, 0.20),
                (TaskType::HeatPlace, 0.20),
                (TaskType::CoolPlace, 0.20),
                (TaskType::CleanPlace, 0.20),
                (TaskType::SlicePlace, 0.10),
                (TaskType::PickTwoPlace, 0.10),
            ],
            distractor_pickupables: 3,
            max_resample: 50,
        }
    }
}

impl WorldConfig {
    pub fn layouts(&self, split: Split) -> &[u32] {
        match split {
            Split::Seen => &self.train_layouts,
            Split::Unseen => &self.unseen_layouts,
        }
    }
}

/// Fixed furniture set present in every world.
const FURNITURE: [ObjectClass; 12] = [
    ObjectClass::Table,
    ObjectClass::CounterTop,
    ObjectClass::Shelf,
    ObjectClass::Bed,
    ObjectClass::Fridge,
    ObjectClass::Microwave,
    ObjectClass::Cabinet,
    ObjectClass::Drawer,
    ObjectClass::Sink,
    ObjectClass::GarbageCan,
    ObjectClass::Faucet,
    ObjectClass::Lamp,
];

/// Receptacle classes a task may place into.
const GOAL_RECEPTACLES: [ObjectClass; 8] = [
    ObjectClass::Table,
    ObjectClass::CounterTop,
    ObjectClass::Shelf,
    ObjectClass::Bed,
    ObjectClass::GarbageCan,
    ObjectClass::Fridge,
    ObjectClass::Cabinet,
    ObjectClass::Drawer,
];

/// Deterministically sample a world plus a solvable task. Resamples up to
/// `config.max_resample` internally before reporting a generation error.
pub fn sample_task(
    seed: u64,
    config: &WorldConfig,
    split: Split,
) -> Result<(GridWorld, TaskSpec), WorldError> {
    for attempt in 0..config.max_resample {
        let stream = rng::derive(seed.wrapping_add((attempt as u64) << 48), "sample_task");
        let mut r = rng::seeded(stream);
        if let Some(pair) = try_sample(seed, config, split, &mut r) {
            return Ok(pair);
        }
    }
    Err(WorldError::Generation {
        seed,
        tried: config.max_resample,
    })
}

fn try_sample(
    seed: u64,
    config: &WorldConfig,
    split: Split,
    r: &mut ChaCha8Rng,
) -> Option<(GridWorld, TaskSpec)> {
    let pool = config.layouts(split);
    let layout_id = pool[rng::index(r, pool.len())];
    let terrain = build_terrain(config.width, config.height, layout_id);

    let task_type = weighted_task(&config.task_weights, r);
    let pickup_class = match task_type {
        TaskType::SlicePlace => {
            let sliceable: Vec<_> = ObjectClass::ALL
                .iter()
                .copied()
                .filter(|c| c.is_sliceable())
                .collect();
            sliceable[rng::index(r, sliceable.len())]
        }
        _ => {
            let pickable: Vec<_> = ObjectClass::ALL
                .iter()
                .copied()
                .filter(|c| c.is_pickupable())
                .collect();
            pickable[rng::index(r, pickable.len())]
        }
    };
    let recep_pool: Vec<_> = GOAL_RECEPTACLES
        .iter()
        .copied()
        .filter(|&c| !(task_type == TaskType::CoolPlace && c == ObjectClass::Fridge))
        .collect();
    let receptacle_class = recep_pool[rng::index(r, recep_pool.len())];

    let mut world = GridWorld {
        width: config.width,
        height: config.height,
        terrain,
        objects: Vec::new(),
        agent: AgentState {
            pos: (1, 1),
            orientation: Orientation::North,
            held: None,
        },
        rng_seed: seed,
        layout_id,
    };

    // Furniture converts its floor cell to counter terrain; the faucet shares
    // the sink cell.
    let mut next_id = 0u32;
    let mut sink_pos = None;
    for class in FURNITURE {
        if class == ObjectClass::Faucet {
            let pos = sink_pos?;
            world.objects.push(ObjectInstance::new(next_id, class, pos));
            next_id += 1;
            continue;
        }
        let pos = place_furniture(&mut world, r)?;
        if class == ObjectClass::Sink {
            sink_pos = Some(pos);
        }
        world.objects.push(ObjectInstance::new(next_id, class, pos));
        next_id += 1;
    }

    // Task pickups (two instances for PickTwoPlace) plus distractors, all on
    // floor cells so no goal condition can hold at start.
    let pickup_count = if task_type == TaskType::PickTwoPlace { 2 } else { 1 };
    for _ in 0..pickup_count {
        let pos = random_floor(&world, r)?;
        world
            .objects
            .push(ObjectInstance::new(next_id, pickup_class, pos));
        next_id += 1;
    }
    if task_type == TaskType::SlicePlace && pickup_class != ObjectClass::Knife {
        let pos = random_floor(&world, r)?;
        world
            .objects
            .push(ObjectInstance::new(next_id, ObjectClass::Knife, pos));
        next_id += 1;
    }
    let mut distractor_pool: Vec<_> = ObjectClass::ALL
        .iter()
        .copied()
        .filter(|&c| c.is_pickupable() && c != pickup_class && c != ObjectClass::Knife)
        .collect();
    for _ in 0..config.distractor_pickupables {
        if distractor_pool.is_empty() {
            break;
        }
        let class = distractor_pool.remove(rng::index(r, distractor_pool.len()));
        let pos = random_floor(&world, r)?;
        world.objects.push(ObjectInstance::new(next_id, class, pos));
        next_id += 1;
    }

    world.agent.pos = random_floor(&world, r)?;
    world.agent.orientation = Orientation::ALL[rng::index(r, 4)];

    let task = TaskSpec {
        task_type,
        pickup_class,
        receptacle_class,
        goal_conditions: conditions_for(task_type, pickup_class, receptacle_class),
    };

    plan_expert(&world, &task).ok()?;
    Some((world, task))
}

fn weighted_task(weights: &[(TaskType, f64)], r: &mut ChaCha8Rng) -> TaskType {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut draw = rng::uniform(r) * total;
    for &(t, w) in weights {
        draw -= w;
        if draw <= 0.0 {
            return t;
        }
    }
    weights.last().unwrap().0
}

fn floor_cells(world: &GridWorld) -> Vec<(i32, i32)> {
    let mut cells = Vec::new();
    for y in 0..world.height {
        for x in 0..world.width {
            if world.walkable((x, y)) {
                cells.push((x, y));
            }
        }
    }
    cells
}

fn random_floor(world: &GridWorld, r: &mut ChaCha8Rng) -> Option<(i32, i32)> {
    let cells = floor_cells(world);
    if cells.is_empty() {
        return None;
    }
    Some(cells[rng::index(r, cells.len())])
}

/// Convert a random floor cell to counter terrain while keeping the floor
/// connected and the new furniture reachable.
fn place_furniture(world: &mut GridWorld, r: &mut ChaCha8Rng) -> Option<(i32, i32)> {
    let mut cells = floor_cells(world);
    // Shuffle deterministically.
    for i in (1..cells.len()).rev() {
        cells.swap(i, rng::index(r, i + 1));
    }
    for pos in cells {
        let idx = (pos.1 * world.width + pos.0) as usize;
        world.terrain[idx] = Terrain::Counter;
        let reachable = Orientation::ALL
            .iter()
            .any(|o| world.walkable((pos.0 + o.forward().0, pos.1 + o.forward().1)));
        let occupied = world.objects.iter().any(|o| o.pos == pos);
        if reachable && !occupied && connected(&world.terrain, world.width, world.height) {
            return Some(pos);
        }
        world.terrain[idx] = Terrain::Floor;
    }
    None
}
