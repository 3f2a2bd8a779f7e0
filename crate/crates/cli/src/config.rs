//! System definitions as sectioned TOML.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::CliError;

/// Expression text with its position in the source.
pub type Text = Spanned<String>;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub chart: ChartSection,
    pub metric: MetricSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forces: Option<ForcesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationSection>,
    /// Extra monitor channels, name = expression in q and q_dot.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub monitors: IndexMap<String, Text>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<LeafSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSection>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSection {
    pub coords: Vec<String>,
}

/// Either `rows` (lower triangle, row i holds g_i0 .. g_ii) or `diagonal`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<Text>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Vec<Text>>,
}

/// At most one of the three. `force` is the classical force covector and
/// enters Newton's law with the opposite sign of `work_form`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ForcesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work_form: Option<Vec<Text>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Text>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<Vec<Text>>,
}

/// Linear constraints by their component lists, or holonomic ones by the
/// functions B_k whose level sets are the leaves.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forms: Option<Vec<Vec<Text>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<Text>>,
}

/// `form = "d<coord>"`, explicit `components`, or the `function` whose
/// differential is the time form.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<Text>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Text>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<Text>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assume_definite: Option<bool>,
}

/// Group frame (t, a) ↦ (t, φ_t(a)): `kind` is translation, rotation,
/// dilatation or explicit (with `flow` and `inverse` in the coordinates and t).
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<Vec<Text>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<Vec<Text>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    pub h: f64,
    pub t_end: f64,
    pub q0: Vec<f64>,
    pub qdot0: Vec<f64>,
    /// Project velocities back onto the admissible set after every step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<bool>,
}

/// Explicit chart on a leaf of the constraints, used to check that the
/// constrained motion is the leaf's own motion.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSection {
    pub coords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<Text>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Vec<Text>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Text>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<Text>,
    /// Ambient coordinates as functions of the leaf coordinates.
    pub embedding: Vec<Text>,
    pub q0: Vec<f64>,
    pub qdot0: Vec<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    /// Number of sampled states for `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Number of sampled states for frame classification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

pub const BUNDLED: [(&str, &str); 7] = [
    ("sphere_r_const", include_str!("../configs/sphere_r_const.toml")),
    ("sphere_r_equals_t", include_str!("../configs/sphere_r_equals_t.toml")),
    ("frame_translation", include_str!("../configs/frame_translation.toml")),
    ("frame_rotation", include_str!("../configs/frame_rotation.toml")),
    ("frame_dilatation", include_str!("../configs/frame_dilatation.toml")),
    ("oscillator", include_str!("../configs/oscillator.toml")),
    ("moving_wire", include_str!("../configs/moving_wire.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// A parsed config together with its text, so that spans can be turned
/// into line numbers.
#[derive(Clone, Debug)]
pub struct Source {
    pub origin: String,
    pub text: String,
    pub config: Config,
}

impl Source {
    pub fn parse(origin: &str, text: &str) -> Result<Source, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            CliError::config(origin, line, e.message())
        })?;
        Ok(Source { origin: origin.to_string(), text: text.to_string(), config })
    }

    /// A file path, or the name of a bundled config.
    pub fn load(spec: &str) -> Result<Source, CliError> {
        let path = Path::new(spec);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::config(spec, None, &e.to_string()))?;
            return Source::parse(spec, &text);
        }
        match bundled(spec) {
            Some(text) => Source::parse(spec, text),
            None => {
                let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
                Err(CliError::config(
                    spec,
                    None,
                    &format!("no such file, and not a bundled config (bundled: {})", names.join(", ")),
                ))
            }
        }
    }

    pub fn line(&self, t: &Text) -> usize {
        line_of(&self.text, t.span().start)
    }

    /// Error located at an expression of this config.
    pub fn error_at(&self, t: &Text, msg: &str) -> CliError {
        CliError::config(&self.origin, Some(self.line(t)), msg)
    }

    pub fn error(&self, msg: &str) -> CliError {
        CliError::config(&self.origin, None, msg)
    }
}

impl Config {
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::config("<dump>", None, &e.to_string()))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_configs_parse() {
        for (name, text) in BUNDLED {
            Source::parse(name, text).unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let text = "[chart]\ncoords = [\"x\"]\n[metric]\ndiagonal = [\"1\"]\nspeed = 3\n";
        let err = Source::parse("t", text).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn spans_give_lines() {
        let text = "[chart]\ncoords = [\"x\"]\n\n[metric]\ndiagonal = [\"1 +\"]\n";
        let s = Source::parse("t", text).unwrap();
        let d = s.config.metric.diagonal.as_ref().unwrap();
        assert_eq!(s.line(&d[0]), 5);
    }
}
