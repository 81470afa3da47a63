use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FEATURE_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "aopath-b")]
    AopathB,
    #[serde(rename = "aopath-s")]
    AopathS,
    #[serde(rename = "atclassifier")]
    AtClassifier,
    #[serde(rename = "nopaths")]
    NoPaths,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::AopathB, Variant::AopathS, Variant::AtClassifier, Variant::NoPaths];

    pub fn is_aopath(self) -> bool {
        matches!(self, Variant::AopathB | Variant::AopathS)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::AopathB => "aopath-b",
            Variant::AopathS => "aopath-s",
            Variant::AtClassifier => "atclassifier",
            Variant::NoPaths => "nopaths",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

/// Architecture and ablation switches.
///
/// For the AOPath variants, `use_audio_head` adds a separate `768 → 1` head
/// over `D`. For `AtClassifier` it instead feeds `D` through the shared text
/// head as well.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PartialPathwayConfig")]
pub struct PathwayConfig {
    pub variant: Variant,
    pub feature_dim: usize,
    pub proj_dim: usize,
    pub lstm_hidden: usize,
    pub k: usize,
    pub use_actions: bool,
    pub use_objects: bool,
    pub use_audio_head: bool,
    pub use_text_head: bool,
    pub use_attention: bool,
}

impl Default for PathwayConfig {
    fn default() -> Self {
        Self::preset(Variant::AopathS)
    }
}

/// Config as written in a file: unset fields come from the variant's preset.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialPathwayConfig {
    variant: Option<Variant>,
    feature_dim: Option<usize>,
    proj_dim: Option<usize>,
    lstm_hidden: Option<usize>,
    k: Option<usize>,
    use_actions: Option<bool>,
    use_objects: Option<bool>,
    use_audio_head: Option<bool>,
    use_text_head: Option<bool>,
    use_attention: Option<bool>,
}

impl From<PartialPathwayConfig> for PathwayConfig {
    fn from(p: PartialPathwayConfig) -> Self {
        let base = PathwayConfig::preset(p.variant.unwrap_or(Variant::AopathS));
        Self {
            variant: base.variant,
            feature_dim: p.feature_dim.unwrap_or(base.feature_dim),
            proj_dim: p.proj_dim.unwrap_or(base.proj_dim),
            lstm_hidden: p.lstm_hidden.unwrap_or(base.lstm_hidden),
            k: p.k.unwrap_or(base.k),
            use_actions: p.use_actions.unwrap_or(base.use_actions),
            use_objects: p.use_objects.unwrap_or(base.use_objects),
            use_audio_head: p.use_audio_head.unwrap_or(base.use_audio_head),
            use_text_head: p.use_text_head.unwrap_or(base.use_text_head),
            use_attention: p.use_attention.unwrap_or(base.use_attention),
        }
    }
}

impl PathwayConfig {
    /// Reference configuration of each variant: text head and both pathways
    /// on, attention on, separate audio head off.
    pub fn preset(variant: Variant) -> Self {
        let (proj_dim, lstm_hidden) = match variant {
            Variant::AopathB => (256, 128),
            _ => (8, 4),
        };
        Self {
            variant,
            feature_dim: FEATURE_DIM,
            proj_dim,
            lstm_hidden,
            k: 15,
            use_actions: variant.is_aopath(),
            use_objects: variant.is_aopath(),
            use_audio_head: variant == Variant::AtClassifier,
            use_text_head: true,
            use_attention: variant.is_aopath(),
        }
    }

    /// Whether the model reads dictionary pathways at all.
    pub fn uses_pathways(&self) -> bool {
        self.variant.is_aopath() && (self.use_actions || self.use_objects)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.feature_dim == 0 {
            return fail("feature_dim must be positive");
        }
        match self.variant {
            Variant::AtClassifier => {
                if !self.use_text_head {
                    return fail("atclassifier needs its text head");
                }
            }
            Variant::NoPaths => {
                if self.proj_dim == 0 || self.lstm_hidden == 0 {
                    return fail("proj_dim and lstm_hidden must be positive");
                }
            }
            Variant::AopathB | Variant::AopathS => {
                if self.proj_dim == 0 || self.lstm_hidden == 0 {
                    return fail("proj_dim and lstm_hidden must be positive");
                }
                if self.k == 0 {
                    return fail("K must be at least 1");
                }
                if !(self.use_actions || self.use_objects || self.use_text_head || self.use_audio_head) {
                    return fail("every output is disabled");
                }
            }
        }
        Ok(())
    }
}
