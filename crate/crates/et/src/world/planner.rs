//! Scripted expert: BFS navigation between subgoal waypoints plus
//! per-subgoal interaction macros.

use std::collections::VecDeque;

use super::goals::goal_conditions_met;
use super::step::{step, StepResult};
use super::{
    ActionType, GridWorld, ObjectClass, Orientation, Subgoal, SubgoalType, TaskSpec, TaskType,
    WorldError,
};

/// Expert trajectory for one task, ending in Stop.
#[derive(Clone, Debug)]
pub struct ExpertPlan {
    pub subgoals: Vec<Subgoal>,
    pub actions: Vec<ActionType>,
    pub target_classes: Vec<Option<ObjectClass>>,
    /// Owning subgoal per action; the final Stop gets `subgoals.len()`.
    pub subgoal_index: Vec<usize>,
}

impl ExpertPlan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Overall progress target per step: (t+1)/T.
    pub fn overall_progress(&self) -> Vec<f64> {
        let t_total = self.actions.len() as f64;
        (1..=self.actions.len()).map(|t| t as f64 / t_total).collect()
    }

    /// Within-subgoal progress target per step.
    pub fn subgoal_progress(&self) -> Vec<f64> {
        let mut lens = vec![0usize; self.subgoals.len() + 1];
        for &s in &self.subgoal_index {
            lens[s] += 1;
        }
        let mut seen = vec![0usize; self.subgoals.len() + 1];
        self.subgoal_index
            .iter()
            .map(|&s| {
                seen[s] += 1;
                seen[s] as f64 / lens[s] as f64
            })
            .collect()
    }
}

/// Subgoal decomposition of a task. The Put macro grows Open/Close wrappers
/// when the goal receptacle is openable.
pub fn decompose(task: &TaskSpec) -> Vec<Subgoal> {
    let x = task.pickup_class;
    let y = task.receptacle_class;
    let goto = |c| Subgoal::new(SubgoalType::Goto, c);
    let pick = |c| Subgoal::new(SubgoalType::Pickup, c);

    let mut place = vec![goto(y)];
    if y.is_openable() {
        place.push(Subgoal::new(SubgoalType::Open, y));
        place.push(Subgoal::new(SubgoalType::Put, y));
        place.push(Subgoal::new(SubgoalType::Close, y));
    } else {
        place.push(Subgoal::new(SubgoalType::Put, y));
    }

    let mut subgoals = Vec::new();
    match task.task_type {
        TaskType::PickPlace => {
            subgoals.extend([goto(x), pick(x)]);
        }
        TaskType::HeatPlace => {
            subgoals.extend([
                goto(x),
                pick(x),
                goto(ObjectClass::Microwave),
                Subgoal::new(SubgoalType::Heat, ObjectClass::Microwave),
            ]);
        }
        TaskType::CoolPlace => {
            subgoals.extend([
                goto(x),
                pick(x),
                goto(ObjectClass::Fridge),
                Subgoal::new(SubgoalType::Cool, ObjectClass::Fridge),
            ]);
        }
        TaskType::CleanPlace => {
            subgoals.extend([
                goto(x),
                pick(x),
                goto(ObjectClass::Sink),
                Subgoal::new(SubgoalType::Clean, ObjectClass::Sink),
            ]);
        }
        TaskType::SlicePlace => {
            subgoals.extend([
                goto(ObjectClass::Knife),
                pick(ObjectClass::Knife),
                goto(x),
                Subgoal::new(SubgoalType::Slice, x),
                goto(ObjectClass::CounterTop),
                Subgoal::new(SubgoalType::Put, ObjectClass::CounterTop),
                goto(x),
                pick(x),
            ]);
        }
        TaskType::PickTwoPlace => {
            subgoals.extend([goto(x), pick(x)]);
            subgoals.extend(place.clone());
            subgoals.extend([goto(x), pick(x)]);
        }
    }
    subgoals.extend(place);
    subgoals
}

/// Plan full demonstration actions for a task.
pub fn plan_expert(world: &GridWorld, task: &TaskSpec) -> Result<ExpertPlan, WorldError> {
    let subgoals = decompose(task);
    let (plan, end_world) = plan_subgoals(world, &subgoals, Some(task.receptacle_class))?;
    let (satisfied, total) = goal_conditions_met(&end_world, task);
    if satisfied != total {
        return Err(WorldError::Replay(format!(
            "expert plan satisfies {satisfied}/{total} goal conditions"
        )));
    }
    Ok(plan)
}

/// Plan a bare subgoal sequence from a world state; returns the plan and the
/// world after executing it. `avoid_recep` excludes already-placed targets
/// from Goto resolution.
pub fn plan_subgoals(
    world: &GridWorld,
    subgoals: &[Subgoal],
    avoid_recep: Option<ObjectClass>,
) -> Result<(ExpertPlan, GridWorld), WorldError> {
    let mut sim = world.clone();
    let mut plan = ExpertPlan {
        subgoals: subgoals.to_vec(),
        actions: Vec::new(),
        target_classes: Vec::new(),
        subgoal_index: Vec::new(),
    };

    for (si, sg) in subgoals.iter().enumerate() {
        let macro_actions = match sg.kind {
            SubgoalType::Goto => {
                navigate_to(&mut sim, sg.target, avoid_recep, si, &mut plan)?;
                continue;
            }
            SubgoalType::Pickup => vec![(ActionType::Pickup, sg.target)],
            SubgoalType::Put => vec![(ActionType::Put, sg.target)],
            SubgoalType::Open => vec![(ActionType::Open, sg.target)],
            SubgoalType::Close => vec![(ActionType::Close, sg.target)],
            SubgoalType::ToggleOn => vec![(ActionType::ToggleOn, sg.target)],
            SubgoalType::ToggleOff => vec![(ActionType::ToggleOff, sg.target)],
            SubgoalType::Slice => vec![(ActionType::Slice, sg.target)],
            SubgoalType::Heat => vec![
                (ActionType::ToggleOn, ObjectClass::Microwave),
                (ActionType::ToggleOff, ObjectClass::Microwave),
            ],
            SubgoalType::Cool => {
                let held_class = sim
                    .agent
                    .held
                    .map(|id| sim.object(id).class)
                    .ok_or_else(|| WorldError::Replay("cool subgoal with empty hand".into()))?;
                vec![
                    (ActionType::Open, ObjectClass::Fridge),
                    (ActionType::Put, ObjectClass::Fridge),
                    (ActionType::Pickup, held_class),
                    (ActionType::Close, ObjectClass::Fridge),
                ]
            }
            SubgoalType::Clean => vec![
                (ActionType::ToggleOn, ObjectClass::Faucet),
                (ActionType::ToggleOff, ObjectClass::Faucet),
            ],
        };
        for (action, target) in macro_actions {
            apply(&mut sim, action, Some(target), si, &mut plan)?;
        }
    }

    apply(&mut sim, ActionType::Stop, None, subgoals.len(), &mut plan)?;
    Ok((plan, sim))
}

fn apply(
    sim: &mut GridWorld,
    action: ActionType,
    target: Option<ObjectClass>,
    subgoal: usize,
    plan: &mut ExpertPlan,
) -> Result<(), WorldError> {
    let result = step(sim, action, target)?;
    if result == StepResult::Failed {
        return Err(WorldError::ExpertActionFailed {
            action: action.name(),
            step: plan.actions.len(),
        });
    }
    plan.actions.push(action);
    plan.target_classes.push(target);
    plan.subgoal_index.push(subgoal);
    Ok(())
}

/// BFS to the closest approach cell that faces an instance of `class`,
/// emitting rotations and moves. Neighbor expansion order is N,E,S,W and
/// instance ties break on the lowest object id.
fn navigate_to(
    sim: &mut GridWorld,
    class: ObjectClass,
    avoid_recep: Option<ObjectClass>,
    subgoal: usize,
    plan: &mut ExpertPlan,
) -> Result<(), WorldError> {
    let (dist, parent) = bfs(sim, sim.agent.pos);
    let at = |p: (i32, i32)| (p.1 * sim.width + p.0) as usize;

    let placed: Vec<u32> = match avoid_recep {
        Some(recep) => sim
            .objects
            .iter()
            .filter(|o| o.class == recep)
            .flat_map(|o| o.contained_ids.iter().copied())
            .collect(),
        None => Vec::new(),
    };

    // (distance, instance id, approach y, approach x) — lowest wins.
    let mut best: Option<(usize, u32, i32, i32, Orientation)> = None;
    for o in &sim.objects {
        if o.class != class || !sim.is_visible(o.id) || placed.contains(&o.id) {
            continue;
        }
        for dir in Orientation::ALL {
            let f = dir.forward();
            let approach = (o.pos.0 - f.0, o.pos.1 - f.1);
            if !sim.walkable(approach) {
                continue;
            }
            let Some(d) = dist[at(approach)] else { continue };
            let cand = (d, o.id, approach.1, approach.0, dir);
            if best.map_or(true, |b| {
                (cand.0, cand.1, cand.2, cand.3) < (b.0, b.1, b.2, b.3)
            }) {
                best = Some(cand);
            }
        }
    }
    let Some((_, _, ay, ax, face)) = best else {
        return Err(WorldError::NoPath {
            class: class.name(),
        });
    };

    // Reconstruct the path back from the approach cell.
    let mut path = vec![(ax, ay)];
    while *path.last().unwrap() != sim.agent.pos {
        let p = parent[at(*path.last().unwrap())].unwrap();
        path.push(p);
    }
    path.reverse();

    for w in path.windows(2) {
        let dir = direction(w[0], w[1]);
        rotate_to(sim, dir, subgoal, plan)?;
        apply(sim, ActionType::MoveAhead, None, subgoal, plan)?;
    }
    rotate_to(sim, face, subgoal, plan)
}

fn direction(from: (i32, i32), to: (i32, i32)) -> Orientation {
    match (to.0 - from.0, to.1 - from.1) {
        (0, -1) => Orientation::North,
        (1, 0) => Orientation::East,
        (0, 1) => Orientation::South,
        (-1, 0) => Orientation::West,
        d => panic!("non-adjacent path step {d:?}"),
    }
}

fn rotate_to(
    sim: &mut GridWorld,
    desired: Orientation,
    subgoal: usize,
    plan: &mut ExpertPlan,
) -> Result<(), WorldError> {
    let diff = (desired.id() + 4 - sim.agent.orientation.id()) % 4;
    let turns: &[ActionType] = match diff {
        0 => &[],
        1 => &[ActionType::RotateRight],
        2 => &[ActionType::RotateRight, ActionType::RotateRight],
        _ => &[ActionType::RotateLeft],
    };
    for &t in turns {
        apply(sim, t, None, subgoal, plan)?;
    }
    Ok(())
}

/// Distance field + parent pointers over floor cells.
fn bfs(
    world: &GridWorld,
    start: (i32, i32),
) -> (Vec<Option<usize>>, Vec<Option<(i32, i32)>>) {
    let n = (world.width * world.height) as usize;
    let mut dist = vec![None; n];
    let mut parent = vec![None; n];
    let at = |p: (i32, i32)| (p.1 * world.width + p.0) as usize;
    let mut queue = VecDeque::from([start]);
    dist[at(start)] = Some(0);
    while let Some(p) = queue.pop_front() {
        let d = dist[at(p)].unwrap();
        for (dx, dy) in [(0, -1), (1, 0), (0, 1), (-1, 0)] {
            let next = (p.0 + dx, p.1 + dy);
            if world.walkable(next) && dist[at(next)].is_none() {
                dist[at(next)] = Some(d + 1);
                parent[at(next)] = Some(p);
                queue.push_back(next);
            }
        }
    }
    (dist, parent)
}
