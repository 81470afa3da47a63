use serde::{Deserialize, Serialize};

use super::{run_experiment, GenreSplit, RunConfig};
use crate::error::Result;
use crate::lexicon::Lexicon;
use crate::network::{count_params, PathwayConfig};

/// The settings that identify one ablation row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSettings {
    pub variant: String,
    pub labels: usize,
    pub feature_size: usize,
    pub pathways: String,
    pub outputs: String,
    pub attention: bool,
    pub params: usize,
}

impl RowSettings {
    pub fn of(cfg: &PathwayConfig) -> Self {
        let pathways = match (cfg.uses_pathways() && cfg.use_actions, cfg.uses_pathways() && cfg.use_objects) {
            (true, true) => "actions+objects",
            (true, false) => "actions",
            (false, true) => "objects",
            (false, false) => "none",
        };
        let outputs = match (cfg.use_text_head, cfg.use_audio_head) {
            (true, true) => "text+audio",
            (true, false) => "text",
            (false, true) => "audio",
            (false, false) => "none",
        };
        Self {
            variant: cfg.variant.to_string(),
            labels: cfg.k,
            feature_size: cfg.proj_dim,
            pathways: pathways.into(),
            outputs: outputs.into(),
            attention: cfg.use_attention && cfg.uses_pathways(),
            params: count_params(cfg),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub split: String,
    pub accuracy: f64,
    pub n_eval: usize,
    pub loss_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub settings: RowSettings,
    pub seed: u64,
    pub cells: Vec<AblationCell>,
}

/// One row per config, one cell per split.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub splits: Vec<String>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn num_cells(&self) -> usize {
        self.rows.iter().map(|r| r.cells.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table, accuracies in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::from("| variant | K | feat | pathways | outputs | attention | params |");
        for s in &self.splits {
            out.push_str(&format!(" {s} |"));
        }
        out.push_str("\n|---|---|---|---|---|---|---|");
        out.push_str(&"---|".repeat(self.splits.len()));
        for r in &self.rows {
            let s = &r.settings;
            out.push_str(&format!(
                "\n| {} | {} | {} | {} | {} | {} | {} |",
                s.variant,
                s.labels,
                s.feature_size,
                s.pathways,
                s.outputs,
                if s.attention { "yes" } else { "no" },
                s.params
            ));
            for c in &r.cells {
                out.push_str(&format!(" {:.2} |", 100.0 * c.accuracy));
            }
        }
        out.push('\n');
        out
    }
}

/// Trains and evaluates every (config, split) pair. Each cell starts from its
/// config's own seed, so any cell can be reproduced alone.
pub fn run_ablation(matrix: &[RunConfig], splits: &[GenreSplit], lexicon: &Lexicon) -> Result<AblationReport> {
    let mut report = AblationReport {
        splits: splits.iter().map(ToString::to_string).collect(),
        rows: Vec::with_capacity(matrix.len()),
    };
    for cfg in matrix {
        let mut row = AblationRow {
            settings: RowSettings::of(&cfg.model),
            seed: cfg.seed,
            cells: Vec::with_capacity(splits.len()),
        };
        for split in splits {
            log::info!("ablation: {} on {split}", cfg.model.variant);
            let exp = run_experiment(cfg, split, lexicon)?;
            row.cells.push(AblationCell {
                split: split.to_string(),
                accuracy: exp.metrics.accuracy,
                n_eval: exp.metrics.n,
                loss_curve: exp.metrics.loss_curve,
            });
        }
        report.rows.push(row);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Variant;

    #[test]
    fn row_settings_carry_parameter_counts() {
        let counts: Vec<usize> = [Variant::AopathS, Variant::AopathB, Variant::AtClassifier]
            .into_iter()
            .map(|v| RowSettings::of(&PathwayConfig::preset(v)).params)
            .collect();
        assert_eq!(counts, [26_282, 1_579_010, 769]);
        let s = RowSettings::of(&PathwayConfig::preset(Variant::AtClassifier));
        assert_eq!(s.pathways, "none");
        assert!(!s.attention);
    }
}
