//! Synthetic stand-ins for the three demonstration datasets and scripted
//! model conversations over them.
//!
//! Record ids are assigned in line order, so importing a generator's output
//! into an empty repository reproduces the ids the traces refer to.

mod breathing;
mod lisa;
mod polis;
pub mod traces;

use serde_json::{Map, Value};

use crate::repository::{Capability, FixtureGrant, FixtureLine};
use crate::UserId;

pub use breathing::ml_breathing;
pub use lisa::{lisa_replica, KADI_PAPER_FILE, KADI_PAPER_TITLE};
pub use polis::polis;

pub(crate) fn line(identifier: &str, title: &str, description: &str, extras: Value) -> FixtureLine {
    let extras = match extras {
        Value::Object(m) => m,
        Value::Null => Map::new(),
        other => panic!("extras must be an object, got {other}"),
    };
    FixtureLine {
        identifier: identifier.to_owned(),
        title: title.to_owned(),
        description: description.to_owned(),
        extras,
        files: Vec::new(),
        links: Vec::new(),
        grants: Vec::new(),
    }
}

/// Gives `user` the capability on every line.
pub fn grant_all(lines: &mut [FixtureLine], user: &str, capability: Capability) {
    for l in lines {
        l.grants.push(FixtureGrant { user: UserId::new(user), capability });
    }
}

/// Adds the grants chosen by `pick` for each 1-based record position.
pub fn grant_by(lines: &mut [FixtureLine], mut pick: impl FnMut(u64) -> Vec<(String, Capability)>) {
    for (i, l) in lines.iter_mut().enumerate() {
        for (user, capability) in pick(i as u64 + 1) {
            l.grants.push(FixtureGrant { user: UserId::new(user), capability });
        }
    }
}

pub fn to_ndjson(lines: &[FixtureLine]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(l).expect("fixture lines serialize"));
        out.push('\n');
    }
    out
}
