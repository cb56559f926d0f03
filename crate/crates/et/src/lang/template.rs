//! Stochastic template grammar for natural-language instructions.
//!
//! One goal sentence plus one sentence per subgoal. Surface variety comes
//! from per-type templates, per-class synonyms, optional filler prefixes and
//! "it" coreference for repeated classes. No template string is shared
//! across subgoal types, so a sentence always pins down its subgoal type.

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use crate::rng;
use crate::world::{ObjectClass, Subgoal, SubgoalType};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LangConfig {
    pub filler_prob: f64,
    pub coref_prob: f64,
    pub min_count: usize,
}

impl Default for LangConfig {
    fn default() -> Self {
        LangConfig {
            filler_prob: 0.25,
            coref_prob: 0.3,
            min_count: 1,
        }
    }
}

pub(crate) fn templates(kind: SubgoalType) -> &'static [&'static str] {
    match kind {
        SubgoalType::Goto => &[
            "go to {}",
            "walk over to {}",
            "head to {}",
            "move to {}",
            "find {}",
        ],
        SubgoalType::Pickup => &["pick up {}", "grab {}", "take {}", "pick {} up"],
        SubgoalType::Put => &[
            "put it on {}",
            "place it on {}",
            "set it down on {}",
            "put it in {}",
        ],
        SubgoalType::Open => &["open {}", "pull {} open", "open {} up", "swing {} open"],
        SubgoalType::Close => &["close {}", "shut {}", "push {} shut", "close {} up"],
        SubgoalType::ToggleOn => &[
            "turn on {}",
            "switch on {}",
            "turn {} on",
            "flip {} on",
        ],
        SubgoalType::ToggleOff => &[
            "turn off {}",
            "switch off {}",
            "turn {} off",
            "flip {} off",
        ],
        SubgoalType::Slice => &[
            "slice {}",
            "cut {}",
            "cut {} up",
            "slice {} into pieces",
        ],
        SubgoalType::Heat => &[
            "heat it in {}",
            "warm it up in {}",
            "cook it in {}",
            "zap it in {}",
        ],
        SubgoalType::Cool => &[
            "chill it in {}",
            "cool it down in {}",
            "leave it in {} to chill",
            "let it cool in {}",
        ],
        SubgoalType::Clean => &[
            "wash it in {}",
            "rinse it in {}",
            "clean it in {}",
            "give it a wash in {}",
        ],
    }
}

pub(crate) fn synonyms(class: ObjectClass) -> &'static [&'static str] {
    match class {
        ObjectClass::Apple => &["apple", "red apple"],
        ObjectClass::Bread => &["bread", "loaf"],
        ObjectClass::Tomato => &["tomato", "ripe tomato"],
        ObjectClass::Potato => &["potato", "spud"],
        ObjectClass::Egg => &["egg", "brown egg"],
        ObjectClass::Cup => &["cup", "paper cup"],
        ObjectClass::Mug => &["mug", "coffee mug"],
        ObjectClass::Plate => &["plate", "dish"],
        ObjectClass::Pan => &["pan", "frying pan"],
        ObjectClass::Knife => &["knife", "blade"],
        ObjectClass::Fork => &["fork", "dinner fork"],
        ObjectClass::Spoon => &["spoon", "teaspoon"],
        ObjectClass::Table => &["table", "dining table"],
        ObjectClass::CounterTop => &["counter", "countertop"],
        ObjectClass::Shelf => &["shelf", "shelving unit"],
        ObjectClass::Bed => &["bed", "mattress"],
        ObjectClass::Fridge => &["fridge", "refrigerator"],
        ObjectClass::Microwave => &["microwave", "microwave oven"],
        ObjectClass::Cabinet => &["cabinet", "cupboard"],
        ObjectClass::Drawer => &["drawer", "dresser drawer"],
        ObjectClass::Sink => &["sink", "basin"],
        ObjectClass::GarbageCan => &["trash can", "garbage bin"],
        ObjectClass::Faucet => &["faucet", "tap"],
        ObjectClass::Lamp => &["lamp", "desk lamp"],
    }
}

const FILLERS: [&str; 5] = ["please", "now", "then", "next", "after that"];

/// Instruction token sequence for a subgoal list, deterministic in `seed`.
pub fn template_natural(subgoals: &[Subgoal], cfg: &LangConfig, seed: u64) -> Vec<String> {
    assert!(!subgoals.is_empty(), "template_natural on empty subgoals");
    let mut r = rng::seeded(rng::derive(seed, "template"));
    let mut text = String::new();

    text.push_str(&goal_sentence(subgoals, &mut r));
    text.push_str(" . ");

    let mut mentioned: Vec<ObjectClass> = Vec::new();
    for sg in subgoals {
        let tpl = {
            let options = templates(sg.kind);
            options[rng::index(&mut r, options.len())]
        };
        let slot = if mentioned.contains(&sg.target) && rng::uniform(&mut r) < cfg.coref_prob {
            "it".to_string()
        } else {
            let syns = synonyms(sg.target);
            format!("the {}", syns[rng::index(&mut r, syns.len())])
        };
        mentioned.push(sg.target);

        if rng::uniform(&mut r) < cfg.filler_prob {
            text.push_str(FILLERS[rng::index(&mut r, FILLERS.len())]);
            text.push(' ');
        }
        text.push_str(&tpl.replace("{}", &slot));
        text.push_str(" . ");
    }
    tokenize(&text, true)
}

fn goal_sentence(subgoals: &[Subgoal], r: &mut rand_chacha::ChaCha8Rng) -> String {
    let pickup = subgoals
        .iter()
        .find(|s| s.kind == SubgoalType::Pickup)
        .map(|s| s.target);
    let place = subgoals
        .iter()
        .rev()
        .find(|s| s.kind == SubgoalType::Put)
        .map(|s| s.target);

    let (Some(x), Some(y)) = (pickup, place) else {
        // Navigation-only instruction lists get a bare goal.
        let target = subgoals.last().unwrap().target;
        let syns = synonyms(target);
        return format!("reach the {}", syns[rng::index(r, syns.len())]);
    };

    let modifier = subgoals
        .iter()
        .find_map(|s| match s.kind {
            SubgoalType::Heat => Some("heated "),
            SubgoalType::Cool => Some("chilled "),
            SubgoalType::Clean => Some("washed "),
            SubgoalType::Slice => Some("sliced "),
            _ => None,
        })
        .unwrap_or("");
    let pickups = subgoals
        .iter()
        .filter(|s| s.kind == SubgoalType::Pickup && s.target == x)
        .count();
    let count = if pickups > 1 { "two " } else { "a " };
    let prep = if y.is_openable() { "in" } else { "on" };

    let xs = synonyms(x);
    let ys = synonyms(y);
    let core = format!(
        "put {count}{modifier}{} {prep} the {}",
        xs[rng::index(r, xs.len())],
        ys[rng::index(r, ys.len())]
    );
    match rng::index(r, 4) {
        0 => core,
        1 => format!("you need to {core}"),
        2 => format!("your task is to {core}"),
        _ => format!("task : {core}"),
    }
}
