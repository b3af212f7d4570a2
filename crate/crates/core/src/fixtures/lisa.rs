//! One record holding 158 extracted paper texts about solid-state batteries.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::line;
use crate::repository::{FixtureFile, FixtureLine, MediaKind};

pub const KADI_PAPER_FILE: &str = "1282-1-9024-1-10-20210210.pdf";
pub const KADI_PAPER_TITLE: &str = "Kadi4Mat: A research data infrastructure for materials science";

const KADI_PAPER_TEXT: &str = "Kadi4Mat: A research data infrastructure for materials science

Abstract. The concepts and current developments of a research data infrastructure for materials science are presented, extending and combining the features of an electronic lab notebook and a repository. The objective of this infrastructure is to incorporate the possibility of structured data storage and data exchange with documented and reproducible data analysis and visualization, which finally leads to the publication of the data. This way, researchers can be supported throughout the entire research process. The software is being developed as a web-based application, allowing the management of research data in records that can be linked and grouped into collections.

1. Introduction
Research data management in materials science faces heterogeneous data from experiments and simulations. Kadi4Mat, the Karlsruhe Data Infrastructure for Materials Science, addresses this by combining a repository with workflow tools. Records hold metadata and files, access permissions protect unpublished data, and a plugin system connects external tools.";

const CITING_PAPER_TEXT: &str = "Workflow automation for solid-state electrolyte screening

Abstract. We report an automated screening workflow for sulfide solid-state electrolytes that stores all intermediate results in a research data infrastructure. Measurements of ionic conductivity and interfacial stability are linked to the synthesis records.

References
[1] Kadi4Mat: A research data infrastructure for materials science. Data Science Journal, 2021.
[2] Interface engineering of lithium metal anodes in garnet electrolytes.";

const TOPICS: &[&str] = &[
    "garnet electrolyte", "sulfide electrolyte", "lithium metal anode", "cathode coating", "interfacial resistance",
    "ionic conductivity", "dendrite growth", "polymer electrolyte", "argyrodite", "LLZO", "NMC cathode",
    "stack pressure", "grain boundary", "thin film battery", "composite cathode", "space charge layer",
];
const WORDS: &[&str] = &[
    "the", "measured", "impedance", "spectroscopy", "reveals", "a", "decrease", "increase", "of", "in", "at",
    "temperature", "cycling", "stability", "density", "functional", "theory", "predicts", "diffusion", "barrier",
    "samples", "were", "sintered", "pressed", "annealed", "under", "argon", "capacity", "retention", "after",
    "cycles", "interface", "decomposition", "voltage", "window", "electrochemical", "performance", "solid",
    "state", "cell", "layer", "thickness", "microstructure", "analysis", "shows", "improved", "contact",
];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(8..18);
    let mut s: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect();
    s.insert(rng.random_range(0..n), TOPICS.choose(rng).expect("non-empty"));
    let mut out = s.join(" ");
    if let Some(first) = out.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    out.push('.');
    out
}

fn paper(rng: &mut ChaCha8Rng, index: usize) -> (String, String) {
    let topic = TOPICS[index % TOPICS.len()];
    let title = format!("Study {index} on {topic} in solid-state lithium batteries");
    let mut text = format!("{title}\n\nAbstract. ");
    for p in 0..rng.random_range(2..5) {
        if p > 0 {
            text.push_str("\n\n");
        }
        let sentences: Vec<String> = (0..rng.random_range(3..7)).map(|_| sentence(rng)).collect();
        text.push_str(&sentences.join(" "));
    }
    let name = format!("{:04}-{}.pdf", 1000 + index, topic.replace(' ', "-").to_lowercase());
    (name, text)
}

/// A single record with 158 files; file texts stand in for PDF extraction.
pub fn lisa_replica() -> Vec<FixtureLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x115a);
    let mut l = line(
        "lisa-replica",
        "LISA Replica",
        "Replication of the solid-state battery literature collection used as a knowledge base.",
        json!({ "type": "literature", "papers": 158 }),
    );
    l.files.push(FixtureFile::text(KADI_PAPER_FILE, MediaKind::PlainText, KADI_PAPER_TEXT));
    l.files.push(FixtureFile::text("1107-electrolyte-screening.pdf", MediaKind::PlainText, CITING_PAPER_TEXT));
    for i in 0..156 {
        let (name, text) = paper(&mut rng, i);
        l.files.push(FixtureFile::text(name, MediaKind::PlainText, &text));
    }
    vec![l]
}
