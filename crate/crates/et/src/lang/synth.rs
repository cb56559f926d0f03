//! Lossless synthetic instructions: [TYPE, CLASS] pairs in chronological
//! order, terminated by EOS.

use super::LangError;
use crate::world::{ObjectClass, Subgoal, SubgoalType};

pub fn synth_annotation(subgoals: &[Subgoal]) -> Result<Vec<String>, LangError> {
    if subgoals.is_empty() {
        return Err(LangError::EmptySubgoals);
    }
    let mut tokens = Vec::with_capacity(subgoals.len() * 2 + 1);
    for sg in subgoals {
        if !sg.is_valid() {
            return Err(LangError::InvalidSubgoal(*sg));
        }
        tokens.push(sg.kind.name().to_string());
        tokens.push(sg.target.name().to_uppercase());
    }
    tokens.push("EOS".to_string());
    Ok(tokens)
}

/// Inverse of [`synth_annotation`]; everything after the first EOS is
/// ignored.
pub fn parse_synth(tokens: &[String]) -> Result<Vec<Subgoal>, LangError> {
    let mut subgoals = Vec::new();
    let mut iter = tokens.iter();
    loop {
        let Some(ty) = iter.next() else { break };
        if ty == "EOS" {
            break;
        }
        let kind = SubgoalType::ALL
            .iter()
            .copied()
            .find(|k| k.name() == ty)
            .ok_or_else(|| LangError::BadToken(ty.clone()))?;
        let Some(cls) = iter.next() else {
            return Err(LangError::DanglingType);
        };
        if cls == "EOS" {
            return Err(LangError::DanglingType);
        }
        let target = ObjectClass::ALL
            .iter()
            .copied()
            .find(|c| c.name().to_uppercase() == *cls)
            .ok_or_else(|| LangError::BadToken(cls.clone()))?;
        subgoals.push(Subgoal::new(kind, target));
    }
    Ok(subgoals)
}
