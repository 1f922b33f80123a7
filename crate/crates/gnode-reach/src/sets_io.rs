//! `.set.json` input sets and `.spec.json` property files.

use std::path::Path;

use gnode_reach_core::verify::{RobustnessQuery, SetSelection};
use gnode_reach_core::{HalfspaceSpec, IntervalBox, StarSet, Zonotope};
use serde::{Deserialize, Serialize};

use crate::model_io::ModelError;

/// An input set: `{"kind": "box", "lower": [..], "upper": [..]}`, a star
/// (`center`, `basis`, `P`, `d`, optional `pred_lb`/`pred_ub`) or
/// a zonotope (`center`, `generators`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetDoc {
    Box(IntervalBox),
    Star(StarSet),
    Zonotope(Zonotope),
}

impl SetDoc {
    pub fn to_star(&self) -> StarSet {
        match self {
            SetDoc::Box(b) => StarSet::from_box(b),
            SetDoc::Star(s) => s.clone(),
            SetDoc::Zonotope(z) => z.to_star(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SetDoc::Box(b) => b.dim(),
            SetDoc::Star(s) => s.dim(),
            SetDoc::Zonotope(z) => z.dim(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionDoc {
    #[default]
    Final,
    Every,
    Layer(usize),
}

impl From<SelectionDoc> for SetSelection {
    fn from(s: SelectionDoc) -> Self {
        match s {
            SelectionDoc::Final => SetSelection::Final,
            SelectionDoc::Every => SetSelection::Every,
            SelectionDoc::Layer(i) => SetSelection::Layer(i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpecDoc {
    /// ∞-norm robustness around `nominal`. Without `label` the model's own
    /// prediction at `nominal` is used.
    Robustness {
        nominal: Vec<f64>,
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clamp: Option<[f64; 2]>,
    },
    /// The selected sets must not meet `unsafe_region`.
    Safety {
        unsafe_region: HalfspaceSpec,
        #[serde(default)]
        sets: SelectionDoc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        input: Option<SetDoc>,
    },
}

impl SpecDoc {
    /// The robustness query, given the label to use when none is stored.
    pub fn robustness_query(&self, fallback_label: usize) -> Option<gnode_reach_core::Result<RobustnessQuery>> {
        let SpecDoc::Robustness {
            nominal,
            epsilon,
            label,
            mask,
            clamp,
        } = self
        else {
            return None;
        };
        Some((|| {
            let mut q = RobustnessQuery::new(nominal.clone(), *epsilon, label.unwrap_or(fallback_label))?;
            if let Some(m) = mask {
                q = q.with_mask(m.clone())?;
            }
            if let Some([lo, hi]) = clamp {
                q = q.with_clamp(*lo, *hi)?;
            }
            Ok(q)
        })())
    }
}

fn read(path: &Path) -> Result<String, ModelError> {
    std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ModelError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ModelError::Schema {
        pointer: crate::model_io::path_to_pointer(&e.path().to_string()),
        message: e.into_inner().to_string(),
    })
}

pub fn parse_set(text: &str) -> Result<SetDoc, ModelError> {
    parse(text)
}

pub fn parse_spec(text: &str) -> Result<SpecDoc, ModelError> {
    parse(text)
}

pub fn load_set(path: &Path) -> Result<SetDoc, ModelError> {
    parse_set(&read(path)?)
}

pub fn load_spec(path: &Path) -> Result<SpecDoc, ModelError> {
    parse_spec(&read(path)?)
}

pub fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_set() {
        let s = parse_set(r#"{"kind": "box", "lower": [0, -1], "upper": [1, 1]}"#).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.to_star().contains(&[0.5, -0.5]).unwrap());
        assert!(parse_set(r#"{"kind": "box", "lower": [2], "upper": [1]}"#).is_err());
    }

    #[test]
    fn set_round_trip() {
        let z = Zonotope::from_box(&IntervalBox::new(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap());
        for doc in [SetDoc::Zonotope(z.clone()), SetDoc::Star(z.to_star())] {
            let back = parse_set(&to_pretty(&doc)).unwrap();
            assert_eq!(back, doc);
        }
    }

    #[test]
    fn specs() {
        let r = parse_spec(r#"{"kind": "robustness", "nominal": [1, 0], "epsilon": 0.4}"#).unwrap();
        let q = r.robustness_query(0).unwrap().unwrap();
        assert_eq!(q.label(), 0);
        let s = parse_spec(
            r#"{"kind": "safety", "unsafe_region": {"normal": [-1], "offset": -1.5}, "sets": "every",
                "input": {"kind": "box", "lower": [0], "upper": [0]}}"#,
        )
        .unwrap();
        let SpecDoc::Safety { sets, input, .. } = &s else {
            panic!()
        };
        assert_eq!(*sets, SelectionDoc::Every);
        assert_eq!(input.as_ref().unwrap().dim(), 1);
        assert!(s.robustness_query(0).is_none());
        let layer =
            parse_spec(r#"{"kind": "safety", "unsafe_region": {"normal": [1], "offset": 0}, "sets": {"layer": 2}}"#);
        assert!(matches!(
            layer.unwrap(),
            SpecDoc::Safety {
                sets: SelectionDoc::Layer(2),
                ..
            }
        ));
    }

    #[test]
    fn unknown_spec_kind_is_rejected() {
        assert!(parse_spec(r#"{"kind": "liveness"}"#).is_err());
    }
}
