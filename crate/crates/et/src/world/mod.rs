//! Deterministic discrete household gridworld: task sampling, dynamics,
//! egocentric observation, the scripted expert, and goal checking.
//!
//! All randomness flows from explicit seeds; (world, action, target) → world'
//! is a pure function and replaying a demonstration is bit-reproducible.

mod classes;
mod demo;
mod goals;
mod layout;
mod planner;
mod sample;
mod step;

pub use classes::{ActionType, ObjectClass, ACTION_COUNT, CLASS_COUNT};
pub use demo::{generate_demo, load_demos, replay, save_demos, Demonstration};
pub use goals::{goal_conditions_met, Predicate, StateFlag};
pub use planner::{plan_expert, plan_subgoals, ExpertPlan};
pub use sample::{sample_task, Split, WorldConfig};
pub use step::{observe, step, Observation, StepResult, CROP, FEATURE_DIM, OBS_CHANNELS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("could not generate a solvable task after {tried} attempts (seed {seed})")]
    Generation { seed: u64, tried: usize },
    #[error("no path to any instance of {class}")]
    NoPath { class: &'static str },
    #[error("interaction {action} requires a target class")]
    MissingTarget { action: &'static str },
    #[error("expert action {action} failed at step {step} (planner bug)")]
    ExpertActionFailed { action: &'static str, step: usize },
    #[error("replay diverged: {0}")]
    Replay(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("dataset line {line}: {err}")]
    Decode { line: usize, err: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terrain {
    Floor,
    Wall,
    Counter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    North,
    East,
    South,
    West,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::North,
        Orientation::East,
        Orientation::South,
        Orientation::West,
    ];

    pub fn id(self) -> usize {
        Self::ALL.iter().position(|&o| o == self).unwrap()
    }

    /// Unit vector the agent is facing; y grows southward.
    pub fn forward(self) -> (i32, i32) {
        match self {
            Orientation::North => (0, -1),
            Orientation::East => (1, 0),
            Orientation::South => (0, 1),
            Orientation::West => (-1, 0),
        }
    }

    pub fn right(self) -> Orientation {
        Self::ALL[(self.id() + 1) % 4]
    }

    pub fn left(self) -> Orientation {
        Self::ALL[(self.id() + 3) % 4]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: u32,
    pub class: ObjectClass,
    pub pos: (i32, i32),
    pub is_receptacle: bool,
    pub open: bool,
    pub toggled_on: bool,
    pub sliced: bool,
    pub clean: bool,
    pub hot: bool,
    pub cold: bool,
    pub contained_ids: Vec<u32>,
}

impl ObjectInstance {
    pub fn new(id: u32, class: ObjectClass, pos: (i32, i32)) -> Self {
        ObjectInstance {
            id,
            class,
            pos,
            is_receptacle: class.is_receptacle(),
            open: false,
            toggled_on: false,
            sliced: false,
            clean: false,
            hot: false,
            cold: false,
            contained_ids: Vec::new(),
        }
    }

    pub fn flag(&self, f: StateFlag) -> bool {
        match f {
            StateFlag::Open => self.open,
            StateFlag::ToggledOn => self.toggled_on,
            StateFlag::Sliced => self.sliced,
            StateFlag::Clean => self.clean,
            StateFlag::Hot => self.hot,
            StateFlag::Cold => self.cold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub pos: (i32, i32),
    pub orientation: Orientation,
    pub held: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    pub width: i32,
    pub height: i32,
    pub terrain: Vec<Terrain>,
    pub objects: Vec<ObjectInstance>,
    pub agent: AgentState,
    pub rng_seed: u64,
    pub layout_id: u32,
}

impl GridWorld {
    pub fn in_bounds(&self, pos: (i32, i32)) -> bool {
        pos.0 >= 0 && pos.0 < self.width && pos.1 >= 0 && pos.1 < self.height
    }

    pub fn terrain_at(&self, pos: (i32, i32)) -> Terrain {
        if !self.in_bounds(pos) {
            return Terrain::Wall;
        }
        self.terrain[(pos.1 * self.width + pos.0) as usize]
    }

    pub fn walkable(&self, pos: (i32, i32)) -> bool {
        self.terrain_at(pos) == Terrain::Floor
    }

    pub fn object(&self, id: u32) -> &ObjectInstance {
        self.objects.iter().find(|o| o.id == id).unwrap()
    }

    pub fn object_mut(&mut self, id: u32) -> &mut ObjectInstance {
        self.objects.iter_mut().find(|o| o.id == id).unwrap()
    }

    /// Container of an object, if any.
    pub fn container_of(&self, id: u32) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.contained_ids.contains(&id))
    }

    /// Visible means: not held, and not inside a closed openable receptacle.
    pub fn is_visible(&self, id: u32) -> bool {
        if self.agent.held == Some(id) {
            return false;
        }
        match self.container_of(id) {
            Some(container) => !container.class.is_openable() || container.open,
            None => true,
        }
    }
}

/// Task families; each expands to goal conditions over final state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskType {
    PickPlace,
    HeatPlace,
    CoolPlace,
    CleanPlace,
    SlicePlace,
    PickTwoPlace,
}

impl TaskType {
    pub const ALL: [TaskType; 6] = [
        TaskType::PickPlace,
        TaskType::HeatPlace,
        TaskType::CoolPlace,
        TaskType::CleanPlace,
        TaskType::SlicePlace,
        TaskType::PickTwoPlace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskType::PickPlace => "PickPlace",
            TaskType::HeatPlace => "HeatPlace",
            TaskType::CoolPlace => "CoolPlace",
            TaskType::CleanPlace => "CleanPlace",
            TaskType::SlicePlace => "SlicePlace",
            TaskType::PickTwoPlace => "PickTwoPlace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_type: TaskType,
    pub pickup_class: ObjectClass,
    pub receptacle_class: ObjectClass,
    pub goal_conditions: Vec<Predicate>,
}

/// Planning/annotation unit: a verb and its target class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubgoalType {
    Goto,
    Pickup,
    Put,
    Open,
    Close,
    ToggleOn,
    ToggleOff,
    Slice,
    Heat,
    Cool,
    Clean,
}

impl SubgoalType {
    pub const ALL: [SubgoalType; 11] = [
        SubgoalType::Goto,
        SubgoalType::Pickup,
        SubgoalType::Put,
        SubgoalType::Open,
        SubgoalType::Close,
        SubgoalType::ToggleOn,
        SubgoalType::ToggleOff,
        SubgoalType::Slice,
        SubgoalType::Heat,
        SubgoalType::Cool,
        SubgoalType::Clean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubgoalType::Goto => "GOTO",
            SubgoalType::Pickup => "PICKUP",
            SubgoalType::Put => "PUT",
            SubgoalType::Open => "OPEN",
            SubgoalType::Close => "CLOSE",
            SubgoalType::ToggleOn => "TOGGLEON",
            SubgoalType::ToggleOff => "TOGGLEOFF",
            SubgoalType::Slice => "SLICE",
            SubgoalType::Heat => "HEAT",
            SubgoalType::Cool => "COOL",
            SubgoalType::Clean => "CLEAN",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subgoal {
    pub kind: SubgoalType,
    pub target: ObjectClass,
}

impl Subgoal {
    pub fn new(kind: SubgoalType, target: ObjectClass) -> Self {
        Subgoal { kind, target }
    }

    /// Target-class validity per subgoal type.
    pub fn is_valid(&self) -> bool {
        match self.kind {
            SubgoalType::Goto => true,
            SubgoalType::Pickup => self.target.is_pickupable(),
            SubgoalType::Put => self.target.is_receptacle(),
            SubgoalType::Open | SubgoalType::Close => self.target.is_openable(),
            SubgoalType::ToggleOn | SubgoalType::ToggleOff => self.target.is_toggleable(),
            SubgoalType::Slice => self.target.is_sliceable(),
            SubgoalType::Heat => self.target == ObjectClass::Microwave,
            SubgoalType::Cool => self.target == ObjectClass::Fridge,
            SubgoalType::Clean => self.target == ObjectClass::Sink,
        }
    }
}
