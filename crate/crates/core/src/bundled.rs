//! Example theories shipped with the crate.

use crate::syntax::{parse_theory, Theory};

#[derive(Clone, Copy, Debug)]
pub struct Bundled {
    pub name: &'static str,
    pub source: &'static str,
    /// Whether every exogenous assignment yields an execution model.
    pub sound: bool,
}

impl Bundled {
    pub fn theory(&self) -> Theory {
        parse_theory(self.source)
            .unwrap_or_else(|e| panic!("bundled theory `{}` does not parse: {e}", self.name))
    }
}

macro_rules! bundled {
    ($name:literal, $sound:expr) => {
        Bundled {
            name: $name,
            source: include_str!(concat!("../theories/", $name, ".cpl")),
            sound: $sound,
        }
    };
}

pub const ALL: &[Bundled] = &[
    bundled!("suzy_billy", true),
    bundled!("gears", true),
    bundled!("gears_locked", true),
    bundled!("blood_pressure", true),
    bundled!("repeat_class", true),
    bundled!("refuse_throw", true),
    bundled!("penguins", true),
    bundled!("birds_prob", true),
    bundled!("superhero", true),
    bundled!("loop", false),
];

pub fn get(name: &str) -> Option<&'static Bundled> {
    ALL.iter().find(|b| b.name == name)
}

pub fn sound() -> impl Iterator<Item = &'static Bundled> {
    ALL.iter().filter(|b| b.sound)
}
