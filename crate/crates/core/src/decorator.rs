//! Rewrites an input with what its nearest training neighbors look like.
//!
//! A decorated text is the rendered original followed by one or more
//! segments of the form `{sep} [{label name} {distance}]`, optionally
//! followed by the neighbor's text:
//!
//! ```text
//! LABEL  I love this. [SEP] [positive 0.5]
//! TEXT   I love this. [SEP] [positive 0.5] This is great!
//! BOTH   I love this. [SEP] [positive 0.5] This is great! [SEP] [negative 0.7] I hate this.
//! ```
//!
//! Training examples are decorated from their nearest *other* training
//! example; test inputs from their nearest training example.

use std::fmt;
use std::str::FromStr;

use crate::data::{LabelMap, LabeledDataset, LabeledExample};
use crate::encoders::{EmbeddingVector, Encoder};
use crate::error::{Error, Result};
use crate::neighbors::{NeighborHit, NeighborIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DecorationMode {
    /// Neighbor label and distance.
    #[default]
    Label,
    /// Neighbor label, distance, and text.
    Text,
    /// One label/distance/text segment per label.
    Both,
}

impl DecorationMode {
    pub const ALL: [DecorationMode; 3] = [Self::Label, Self::Text, Self::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Label => "LABEL",
            Self::Text => "TEXT",
            Self::Both => "BOTH",
        }
    }
}

impl fmt::Display for DecorationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecorationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!("unknown decoration mode {s:?} (LABEL, TEXT, BOTH)"))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoratorConfig {
    pub mode: DecorationMode,
    pub separator: String,
    pub distance_decimals: usize,
}

impl Default for DecoratorConfig {
    fn default() -> Self {
        Self {
            mode: DecorationMode::Label,
            separator: "[SEP]".into(),
            distance_decimals: 1,
        }
    }
}

impl DecoratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.separator.is_empty() {
            return Err(Error::Config("separator must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoratedExample {
    /// Dataset id of the decorated training example; `None` for test inputs.
    pub id: Option<usize>,
    pub decorated_text: String,
    /// Gold label, carried for training examples.
    pub label: Option<usize>,
    /// Neighbor hits the segments were rendered from, in segment order.
    pub cited: Vec<NeighborHit>,
}

/// One decoration segment, without a leading space.
///
/// The distance uses `distance_decimals` fixed decimals; exact binary ties
/// round half to even.
pub fn format_segment(
    hit: &NeighborHit,
    label_map: &LabelMap,
    neighbor_text: &str,
    mode: DecorationMode,
    config: &DecoratorConfig,
) -> Result<String> {
    let name = label_map
        .name(hit.label)
        .ok_or(Error::UnknownLabel { label: hit.label })?;
    let head = format!(
        "{} [{} {:.*}]",
        config.separator, name, config.distance_decimals, hit.distance
    );
    Ok(match mode {
        DecorationMode::Label => head,
        DecorationMode::Text | DecorationMode::Both => format!("{head} {neighbor_text}"),
    })
}

/// Appends one segment per hit (in the given order) to `original`.
///
/// `neighbors` supplies the text of each cited row.
pub fn decorate_with_hits(
    original: &str,
    hits: &[NeighborHit],
    neighbors: &LabeledDataset,
    config: &DecoratorConfig,
) -> Result<String> {
    let mut out = original.to_string();
    for hit in hits {
        let neighbor = neighbors
            .get(hit.id)
            .ok_or_else(|| Error::Config(format!("neighbor id {} outside dataset", hit.id)))?;
        let segment = format_segment(
            hit,
            neighbors.label_map(),
            &neighbor.render(&config.separator),
            config.mode,
            config,
        )?;
        out.push(' ');
        out.push_str(&segment);
    }
    Ok(out)
}

fn select_hits(
    index: &NeighborIndex,
    v: &EmbeddingVector,
    exclude: Option<usize>,
    mode: DecorationMode,
) -> Result<Vec<NeighborHit>> {
    match mode {
        DecorationMode::Label | DecorationMode::Text => index.query(v, 1, exclude),
        DecorationMode::Both => Ok(index.nearest_per_label(v, exclude)?.into_values().collect()),
    }
}

/// Decorates training example `example` against the index built from its
/// own dataset, never citing the example itself.
pub fn decorate_train(
    example: &LabeledExample,
    index: &NeighborIndex,
    train: &LabeledDataset,
    config: &DecoratorConfig,
) -> Result<DecoratedExample> {
    if index.len() < 2 {
        return Err(Error::TooFewExamples(index.len()));
    }
    let hits = select_hits(
        index,
        index.vector(example.id),
        Some(example.id),
        config.mode,
    )?;
    let original = example.render(&config.separator);
    Ok(DecoratedExample {
        id: Some(example.id),
        decorated_text: decorate_with_hits(&original, &hits, train, config)?,
        label: Some(example.label),
        cited: hits,
    })
}

/// Decorates a rendered test input whose embedding is already known.
pub fn decorate_test_embedded(
    rendered: &str,
    embedding: &EmbeddingVector,
    index: &NeighborIndex,
    train: &LabeledDataset,
    config: &DecoratorConfig,
) -> Result<DecoratedExample> {
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let hits = select_hits(index, embedding, None, config.mode)?;
    Ok(DecoratedExample {
        id: None,
        decorated_text: decorate_with_hits(rendered, &hits, train, config)?,
        label: None,
        cited: hits,
    })
}

/// Embeds `text` with `encoder` and decorates it from the training index.
pub fn decorate_test(
    text: &str,
    encoder: &dyn Encoder,
    index: &NeighborIndex,
    train: &LabeledDataset,
    config: &DecoratorConfig,
) -> Result<DecoratedExample> {
    let embedding = encoder.encode(text)?;
    decorate_test_embedded(text, &embedding, index, train, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetRecord;
    use crate::encoders::HashEncoder;

    fn sentiment() -> LabelMap {
        LabelMap::new(["positive", "negative"]).unwrap()
    }

    fn hit(id: usize, distance: f64, label: usize) -> NeighborHit {
        NeighborHit {
            id,
            distance,
            label,
        }
    }

    fn cfg(mode: DecorationMode) -> DecoratorConfig {
        DecoratorConfig {
            mode,
            ..DecoratorConfig::default()
        }
    }

    fn dataset(rows: &[(&str, usize)]) -> LabeledDataset {
        LabeledDataset::from_records(
            rows.iter().map(|&(t, l)| DatasetRecord {
                text: t.into(),
                text_pair: None,
                label: l,
            }),
            sentiment(),
        )
        .unwrap()
    }

    #[test]
    fn segment_formats() {
        let c = cfg(DecorationMode::Label);
        let h = hit(1, 0.5, 0);
        assert_eq!(
            format_segment(
                &h,
                &sentiment(),
                "This is great!",
                DecorationMode::Label,
                &c
            )
            .unwrap(),
            "[SEP] [positive 0.5]"
        );
        assert_eq!(
            format_segment(&h, &sentiment(), "This is great!", DecorationMode::Text, &c).unwrap(),
            "[SEP] [positive 0.5] This is great!"
        );
        assert_eq!(
            format_segment(&hit(0, 0.0, 0), &sentiment(), "", DecorationMode::Label, &c).unwrap(),
            "[SEP] [positive 0.0]"
        );
        assert!(
            format_segment(&hit(0, 0.0, 5), &sentiment(), "", DecorationMode::Label, &c).is_err()
        );
    }

    #[test]
    fn distance_rounding_is_half_even_on_exact_ties() {
        let c = DecoratorConfig {
            distance_decimals: 1,
            ..cfg(DecorationMode::Label)
        };
        let seg =
            |d| format_segment(&hit(0, d, 0), &sentiment(), "", DecorationMode::Label, &c).unwrap();
        assert_eq!(seg(0.25), "[SEP] [positive 0.2]");
        assert_eq!(seg(0.75), "[SEP] [positive 0.8]");
        assert_eq!(seg(1.25), "[SEP] [positive 1.2]");
        let c3 = DecoratorConfig {
            distance_decimals: 3,
            ..c
        };
        assert_eq!(
            format_segment(
                &hit(0, 2f64.sqrt(), 0),
                &sentiment(),
                "",
                DecorationMode::Label,
                &c3
            )
            .unwrap(),
            "[SEP] [positive 1.414]"
        );
    }

    #[test]
    fn two_example_dataset_cites_the_other() {
        let ds = dataset(&[("good stuff", 0), ("bad stuff", 1)]);
        let enc = HashEncoder::new(16).unwrap();
        let vectors = enc.encode_batch(&ds.rendered("[SEP]")).unwrap();
        let index = NeighborIndex::new(vectors, ds.labels()).unwrap();
        let c = cfg(DecorationMode::Label);
        let d0 = decorate_train(&ds.examples()[0], &index, &ds, &c).unwrap();
        let d1 = decorate_train(&ds.examples()[1], &index, &ds, &c).unwrap();
        assert!(d0.decorated_text.starts_with("good stuff [SEP] [negative "));
        assert!(d1.decorated_text.starts_with("bad stuff [SEP] [positive "));
        assert_eq!(d0.cited[0].id, 1);
        assert_eq!(d1.cited[0].id, 0);
    }

    #[test]
    fn exact_test_match_cites_zero_distance() {
        let ds = dataset(&[("I love this.", 0), ("This is awful!", 1)]);
        let enc = HashEncoder::new(32).unwrap();
        let index = NeighborIndex::new(
            enc.encode_batch(&ds.rendered("[SEP]")).unwrap(),
            ds.labels(),
        )
        .unwrap();
        let d = decorate_test(
            "This is awful!",
            &enc,
            &index,
            &ds,
            &cfg(DecorationMode::Text),
        )
        .unwrap();
        assert_eq!(
            d.decorated_text,
            "This is awful! [SEP] [negative 0.0] This is awful!"
        );
    }

    #[test]
    fn singleton_class_omits_own_label_in_both() {
        let ds = dataset(&[("a b", 0), ("c d", 1), ("c e", 1)]);
        let enc = HashEncoder::new(32).unwrap();
        let index = NeighborIndex::new(
            enc.encode_batch(&ds.rendered("[SEP]")).unwrap(),
            ds.labels(),
        )
        .unwrap();
        let d = decorate_train(&ds.examples()[0], &index, &ds, &cfg(DecorationMode::Both)).unwrap();
        assert_eq!(d.cited.len(), 1);
        assert_eq!(d.cited[0].label, 1);
        let d = decorate_train(&ds.examples()[1], &index, &ds, &cfg(DecorationMode::Both)).unwrap();
        assert_eq!(d.cited.iter().map(|h| h.label).collect::<Vec<_>>(), [0, 1]);
        assert_eq!(d.cited[1].id, 2);
    }

    #[test]
    fn single_row_index_cannot_decorate_training() {
        let ds = dataset(&[("alone", 0)]);
        let enc = HashEncoder::new(8).unwrap();
        let index = NeighborIndex::new(
            enc.encode_batch(&ds.rendered("[SEP]")).unwrap(),
            ds.labels(),
        )
        .unwrap();
        assert!(matches!(
            decorate_train(&ds.examples()[0], &index, &ds, &cfg(DecorationMode::Label)),
            Err(Error::TooFewExamples(1))
        ));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "both".parse::<DecorationMode>().unwrap(),
            DecorationMode::Both
        );
        assert!("neither".parse::<DecorationMode>().is_err());
    }
}
