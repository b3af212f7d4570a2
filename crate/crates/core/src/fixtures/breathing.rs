//! 417 tightly linked records of a breathing-detection ML study.
//!
//! Layout: 1 project, 2 raw recordings, 3 the training dataset,
//! 4..=238 recording sessions, 239..=328 trainings 000..089, and
//! 329..=417 models, where model `i` links to training `i - 329`.

use serde_json::json;

use super::line;
use crate::repository::{FixtureFile, FixtureLink, FixtureLine, MediaKind};

pub const DATASET_IDENTIFIER: &str = "cids-breathing-detection-tfrecords_";

fn training_ident(i: usize) -> String {
    format!("cids-breathing-detection-results-training{i:03}")
}

pub fn ml_breathing() -> Vec<FixtureLine> {
    let mut lines = Vec::with_capacity(417);
    lines.push(line(
        "cids-breathing-detection",
        "cids-breathing-detection",
        "Project record for breathing detection from respiration sensor signals.",
        json!({ "type": "kadiai:project" }),
    ));
    lines.push(line(
        "cids-breathing-detection-raw",
        "cids-breathing-detection-raw",
        "Raw respiration sensor recordings.",
        json!({ "type": "kadiai:raw" }),
    ));
    let mut dataset = line(
        DATASET_IDENTIFIER,
        "cids-breathing-detection-tfrecords",
        "Preprocessed windows of respiration signals serialized as TFRecord shards.",
        json!({ "type": "kadiai:dataset", "format": "tfrecord", "window_seconds": 10, "sampling_rate_hz": 100 }),
    );
    for shard in 0..320 {
        dataset.files.push(FixtureFile {
            name: format!("breathing-train-shard-{shard:04}-of-0320.tfrecord"),
            media_kind: MediaKind::Unsupported,
            content_base64: "AAEC".into(),
        });
    }
    dataset.links.push(FixtureLink { to_identifier: "cids-breathing-detection-raw".into(), annotation: "derived from".into() });
    lines.push(dataset);

    for s in 0..235 {
        let mut l = line(
            &format!("cids-breathing-detection-session{s:03}"),
            &format!("cids-breathing-detection-session{s:03}"),
            "Recording session of respiration sensor data.",
            json!({ "type": "kadiai:session", "subject": format!("s{:02}", s % 23), "duration_min": 20 + s % 7 }),
        );
        l.links.push(FixtureLink { to_identifier: "cids-breathing-detection-raw".into(), annotation: "part of".into() });
        lines.push(l);
    }
    for t in 0..90 {
        let mut l = line(
            &training_ident(t),
            &training_ident(t),
            "Training run of a breathing detection model.",
            json!({ "type": "kadiai:training", "epochs": 40 + t % 5 * 10, "learning_rate": 0.001, "batch_size": 64 }),
        );
        l.links.push(FixtureLink { to_identifier: DATASET_IDENTIFIER.into(), annotation: "trained on".into() });
        lines.push(l);
    }
    for m in 0..89 {
        let ident = format!("cids-breathing-detection-model{m:03}");
        let mut l = line(
            &ident,
            &ident,
            "Breathing detection model: convolutional network classifying breathing phases.",
            json!({ "type": "kadiai:model", "architecture": "cnn", "layers": 4 + m % 3, "val_accuracy": 0.90 + (m % 9) as f64 / 100.0 }),
        );
        l.files.push(FixtureFile::text(
            "model-card.md",
            MediaKind::Markdown,
            &format!("# Breathing detection model {m:03}\n\nConvolutional model detecting inhale and exhale phases in respiration signals. Trained with {}.", training_ident(m)),
        ));
        l.links.push(FixtureLink { to_identifier: training_ident(m), annotation: "result of".into() });
        lines.push(l);
    }
    debug_assert_eq!(lines.len(), 417);
    lines
}
