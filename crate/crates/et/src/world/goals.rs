//! Goal conditions: checkable predicates over final world state.

use serde::{Deserialize, Serialize};

use super::{GridWorld, ObjectClass, TaskSpec, TaskType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateFlag {
    Open,
    ToggledOn,
    Sliced,
    Clean,
    Hot,
    Cold,
}

pub const STATE_FLAGS: [StateFlag; 6] = [
    StateFlag::Open,
    StateFlag::ToggledOn,
    StateFlag::Sliced,
    StateFlag::Clean,
    StateFlag::Hot,
    StateFlag::Cold,
];

/// A single checkable condition on world state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    /// ≥ `count` un-held instances of `pickup` share a cell with an instance
    /// of `recep`.
    AtReceptacle {
        pickup: ObjectClass,
        recep: ObjectClass,
        count: usize,
    },
    /// ≥ `count` instances of `pickup` are contained in instances of `recep`.
    ContainedIn {
        pickup: ObjectClass,
        recep: ObjectClass,
        count: usize,
    },
    /// Some instance of `class` has the flag set.
    HasState { class: ObjectClass, flag: StateFlag },
}

impl Predicate {
    pub fn holds(&self, world: &GridWorld) -> bool {
        match *self {
            Predicate::AtReceptacle {
                pickup,
                recep,
                count,
            } => {
                let spots: Vec<(i32, i32)> = world
                    .objects
                    .iter()
                    .filter(|o| o.class == recep)
                    .map(|o| o.pos)
                    .collect();
                let n = world
                    .objects
                    .iter()
                    .filter(|o| {
                        o.class == pickup
                            && world.agent.held != Some(o.id)
                            && spots.contains(&o.pos)
                    })
                    .count();
                n >= count
            }
            Predicate::ContainedIn {
                pickup,
                recep,
                count,
            } => {
                let n = world
                    .objects
                    .iter()
                    .filter(|o| o.class == recep)
                    .flat_map(|o| o.contained_ids.iter())
                    .filter(|&&id| world.object(id).class == pickup)
                    .count();
                n >= count
            }
            Predicate::HasState { class, flag } => world
                .objects
                .iter()
                .any(|o| o.class == class && o.flag(flag)),
        }
    }
}

/// Goal-condition list for a task family.
pub fn conditions_for(
    task_type: TaskType,
    pickup: ObjectClass,
    recep: ObjectClass,
) -> Vec<Predicate> {
    let at = |count| Predicate::AtReceptacle {
        pickup,
        recep,
        count,
    };
    let contained = |count| Predicate::ContainedIn {
        pickup,
        recep,
        count,
    };
    let state = |flag| Predicate::HasState {
        class: pickup,
        flag,
    };
    match task_type {
        TaskType::PickPlace => vec![at(1), contained(1)],
        TaskType::HeatPlace => vec![at(1), state(StateFlag::Hot), contained(1)],
        TaskType::CoolPlace => vec![at(1), state(StateFlag::Cold), contained(1)],
        TaskType::CleanPlace => vec![at(1), state(StateFlag::Clean), contained(1)],
        TaskType::SlicePlace => vec![at(1), state(StateFlag::Sliced), contained(1)],
        TaskType::PickTwoPlace => vec![contained(1), at(2), contained(2)],
    }
}

/// Count satisfied goal conditions; success means satisfied == total.
pub fn goal_conditions_met(world: &GridWorld, task: &TaskSpec) -> (usize, usize) {
    let satisfied = task
        .goal_conditions
        .iter()
        .filter(|p| p.holds(world))
        .count();
    (satisfied, task.goal_conditions.len())
}
