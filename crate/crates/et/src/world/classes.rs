//! Object classes and action types.

use serde::{Deserialize, Serialize};

/// The 24 object classes. Identifiers double as class-prediction targets and
/// observation channels, so the order here is load-bearing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Apple,
    Bread,
    Tomato,
    Potato,
    Egg,
    Cup,
    Mug,
    Plate,
    Pan,
    Knife,
    Fork,
    Spoon,
    Table,
    CounterTop,
    Shelf,
    Bed,
    Fridge,
    Microwave,
    Cabinet,
    Drawer,
    Sink,
    GarbageCan,
    Faucet,
    Lamp,
}

pub const CLASS_COUNT: usize = 24;

impl ObjectClass {
    pub const ALL: [ObjectClass; CLASS_COUNT] = [
        ObjectClass::Apple,
        ObjectClass::Bread,
        ObjectClass::Tomato,
        ObjectClass::Potato,
        ObjectClass::Egg,
        ObjectClass::Cup,
        ObjectClass::Mug,
        ObjectClass::Plate,
        ObjectClass::Pan,
        ObjectClass::Knife,
        ObjectClass::Fork,
        ObjectClass::Spoon,
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

    pub fn id(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Apple => "Apple",
            ObjectClass::Bread => "Bread",
            ObjectClass::Tomato => "Tomato",
            ObjectClass::Potato => "Potato",
            ObjectClass::Egg => "Egg",
            ObjectClass::Cup => "Cup",
            ObjectClass::Mug => "Mug",
            ObjectClass::Plate => "Plate",
            ObjectClass::Pan => "Pan",
            ObjectClass::Knife => "Knife",
            ObjectClass::Fork => "Fork",
            ObjectClass::Spoon => "Spoon",
            ObjectClass::Table => "Table",
            ObjectClass::CounterTop => "CounterTop",
            ObjectClass::Shelf => "Shelf",
            ObjectClass::Bed => "Bed",
            ObjectClass::Fridge => "Fridge",
            ObjectClass::Microwave => "Microwave",
            ObjectClass::Cabinet => "Cabinet",
            ObjectClass::Drawer => "Drawer",
            ObjectClass::Sink => "Sink",
            ObjectClass::GarbageCan => "GarbageCan",
            ObjectClass::Faucet => "Faucet",
            ObjectClass::Lamp => "Lamp",
        }
    }

    pub fn is_pickupable(self) -> bool {
        (self as usize) < ObjectClass::Table as usize
    }

    pub fn is_receptacle(self) -> bool {
        matches!(
            self,
            ObjectClass::Table
                | ObjectClass::CounterTop
                | ObjectClass::Shelf
                | ObjectClass::Bed
                | ObjectClass::Fridge
                | ObjectClass::Microwave
                | ObjectClass::Cabinet
                | ObjectClass::Drawer
                | ObjectClass::Sink
                | ObjectClass::GarbageCan
        )
    }

    pub fn is_openable(self) -> bool {
        matches!(
            self,
            ObjectClass::Fridge | ObjectClass::Microwave | ObjectClass::Cabinet | ObjectClass::Drawer
        )
    }

    pub fn is_toggleable(self) -> bool {
        matches!(
            self,
            ObjectClass::Microwave | ObjectClass::Faucet | ObjectClass::Lamp
        )
    }

    pub fn is_sliceable(self) -> bool {
        matches!(
            self,
            ObjectClass::Apple | ObjectClass::Bread | ObjectClass::Tomato | ObjectClass::Potato
        )
    }
}

/// Agent actions: 4 control, 7 interactions that take a target class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionType {
    MoveAhead,
    RotateLeft,
    RotateRight,
    Stop,
    Pickup,
    Put,
    Open,
    Close,
    ToggleOn,
    ToggleOff,
    Slice,
}

pub const ACTION_COUNT: usize = 11;

impl ActionType {
    pub const ALL: [ActionType; ACTION_COUNT] = [
        ActionType::MoveAhead,
        ActionType::RotateLeft,
        ActionType::RotateRight,
        ActionType::Stop,
        ActionType::Pickup,
        ActionType::Put,
        ActionType::Open,
        ActionType::Close,
        ActionType::ToggleOn,
        ActionType::ToggleOff,
        ActionType::Slice,
    ];

    pub fn id(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).unwrap()
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn is_interaction(self) -> bool {
        self.id() >= 4
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionType::MoveAhead => "MoveAhead",
            ActionType::RotateLeft => "RotateLeft",
            ActionType::RotateRight => "RotateRight",
            ActionType::Stop => "Stop",
            ActionType::Pickup => "Pickup",
            ActionType::Put => "Put",
            ActionType::Open => "Open",
            ActionType::Close => "Close",
            ActionType::ToggleOn => "ToggleOn",
            ActionType::ToggleOff => "ToggleOff",
            ActionType::Slice => "Slice",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_seven_interactions() {
        let n = ActionType::ALL.iter().filter(|a| a.is_interaction()).count();
        assert_eq!(n, 7);
        assert_eq!(ACTION_COUNT, 11);
    }

    #[test]
    fn class_ids_round_trip() {
        for (i, c) in ObjectClass::ALL.iter().enumerate() {
            assert_eq!(c.id(), i);
            assert_eq!(ObjectClass::from_id(i), Some(*c));
        }
        assert_eq!(ObjectClass::from_id(CLASS_COUNT), None);
    }

    #[test]
    fn class_property_partition() {
        let pickup = ObjectClass::ALL.iter().filter(|c| c.is_pickupable()).count();
        assert_eq!(pickup, 12);
        assert!(ObjectClass::Fridge.is_openable());
        assert!(!ObjectClass::Table.is_openable());
        assert!(ObjectClass::Potato.is_sliceable());
        assert!(!ObjectClass::Egg.is_sliceable());
    }
}
