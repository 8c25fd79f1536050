//! Workspace configuration: where inputs live, where outputs go, and the
//! settings every stage shares.
//!
//! A workspace file is plain `key = value` lines; `#` starts a comment and
//! `pcap` may repeat. Flags override the file, the file overrides defaults.
//!
//! ```text
//! pcap = captures/day2/*.pcap
//! hera_dir = flows
//! csv_dir = datasets
//! ground_truth = gt/day2.csv
//! interval = 60
//! features = unsw-nb15
//! ```

use std::path::{Path, PathBuf};

use crate::commands::CliError;
use crate::dataset::{select_feature_set, FeatureList, FeatureSelection, Mode, DEFAULT_WINDOW};
use crate::flow::ExportConfig;
use crate::label::{LabelOptions, DEFAULT_BENIGN_LABEL};

pub const WORKSPACE_ENV: &str = "HERA_WORKSPACE";

/// Every field is optional so a flag set and a file can be layered.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorkspaceConfig {
    pub pcap_paths: Vec<String>,
    pub hera_dir: Option<PathBuf>,
    pub csv_dir: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub interval: Option<f64>,
    pub idle_timeout: Option<f64>,
    pub reorder_slack: Option<f64>,
    pub emit_management: Option<bool>,
    pub features: Option<String>,
    pub mode: Option<String>,
    pub keep_management: Option<bool>,
    pub window: Option<usize>,
    pub benign_label: Option<String>,
    pub bidirectional: Option<bool>,
    pub prefilter: Option<bool>,
    pub jobs: Option<usize>,
    pub force: Option<bool>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Usage(format!("workspace line {line}: bad value {v:?} for {key}")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("workspace line {line}: {key} expects true or false, got {v:?}"))),
    }
}

impl WorkspaceConfig {
    /// Parses workspace text. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut c = WorkspaceConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CliError::Usage(format!("workspace line {line}: expected key = value")))?;
            let path = || base.join(value);
            match key {
                "pcap" => c.pcap_paths.push(path().to_string_lossy().into_owned()),
                "hera_dir" => c.hera_dir = Some(path()),
                "csv_dir" => c.csv_dir = Some(path()),
                "ground_truth" => c.ground_truth = Some(path()),
                "interval" => c.interval = Some(parse_value(line, key, value)?),
                "idle_timeout" => c.idle_timeout = Some(parse_value(line, key, value)?),
                "reorder_slack" => c.reorder_slack = Some(parse_value(line, key, value)?),
                "emit_management" => c.emit_management = Some(parse_bool(line, key, value)?),
                "features" => c.features = Some(value.to_string()),
                "mode" => c.mode = Some(value.to_string()),
                "keep_management" => c.keep_management = Some(parse_bool(line, key, value)?),
                "window" => c.window = Some(parse_value(line, key, value)?),
                "benign_label" => c.benign_label = Some(value.to_string()),
                "bidirectional" => c.bidirectional = Some(parse_bool(line, key, value)?),
                "prefilter" => c.prefilter = Some(parse_bool(line, key, value)?),
                "jobs" => c.jobs = Some(parse_value(line, key, value)?),
                "force" => c.force = Some(parse_bool(line, key, value)?),
                _ => return Err(CliError::Usage(format!("workspace line {line}: unknown key {key:?}"))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        WorkspaceConfig::parse(&text, base)
    }

    /// Fills every unset field of `self` from `lower`.
    pub fn or(self, lower: WorkspaceConfig) -> WorkspaceConfig {
        WorkspaceConfig {
            pcap_paths: if self.pcap_paths.is_empty() { lower.pcap_paths } else { self.pcap_paths },
            hera_dir: self.hera_dir.or(lower.hera_dir),
            csv_dir: self.csv_dir.or(lower.csv_dir),
            ground_truth: self.ground_truth.or(lower.ground_truth),
            interval: self.interval.or(lower.interval),
            idle_timeout: self.idle_timeout.or(lower.idle_timeout),
            reorder_slack: self.reorder_slack.or(lower.reorder_slack),
            emit_management: self.emit_management.or(lower.emit_management),
            features: self.features.or(lower.features),
            mode: self.mode.or(lower.mode),
            keep_management: self.keep_management.or(lower.keep_management),
            window: self.window.or(lower.window),
            benign_label: self.benign_label.or(lower.benign_label),
            bidirectional: self.bidirectional.or(lower.bidirectional),
            prefilter: self.prefilter.or(lower.prefilter),
            jobs: self.jobs.or(lower.jobs),
            force: self.force.or(lower.force),
        }
    }

    pub fn export_config(&self) -> Result<ExportConfig, CliError> {
        let usage = |e: crate::flow::ConfigError| CliError::Usage(e.to_string());
        let mut cfg = ExportConfig::new(self.interval.unwrap_or(60.0)).map_err(usage)?;
        if let Some(t) = self.idle_timeout {
            cfg = cfg.with_idle_timeout(t).map_err(usage)?;
        }
        if let Some(s) = self.reorder_slack {
            cfg = cfg.with_reorder_slack(s).map_err(usage)?;
        }
        Ok(cfg.with_management(self.emit_management.unwrap_or(true)))
    }

    pub fn feature_list(&self) -> Result<FeatureList, CliError> {
        let sel = FeatureSelection::parse(self.features.as_deref().unwrap_or("default"));
        select_feature_set(&sel).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn dataset_mode(&self) -> Result<Mode, CliError> {
        self.mode
            .as_deref()
            .unwrap_or("racluster")
            .parse()
            .map_err(|e: crate::dataset::DatasetError| CliError::Usage(e.to_string()))
    }

    pub fn window_size(&self) -> Result<usize, CliError> {
        match self.window.unwrap_or(DEFAULT_WINDOW) {
            0 => Err(CliError::Usage("connection window must be at least 1".into())),
            w => Ok(w),
        }
    }

    pub fn label_options(&self) -> LabelOptions {
        LabelOptions {
            bidirectional: self.bidirectional.unwrap_or(false),
            benign_label: self.benign_label.clone().unwrap_or_else(|| DEFAULT_BENIGN_LABEL.into()),
            prefilter: self.prefilter.unwrap_or(true),
        }
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or(1).max(1)
    }

    pub fn force(&self) -> bool {
        self.force.unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_layers() {
        let text = "# demo\npcap = a.pcap\npcap = b.pcap # second\ninterval = 30\nkeep_management = yes\n";
        let file = WorkspaceConfig::parse(text, Path::new("/ws")).unwrap();
        assert_eq!(file.pcap_paths, ["/ws/a.pcap", "/ws/b.pcap"]);
        assert_eq!(file.keep_management, Some(true));
        let flags = WorkspaceConfig { interval: Some(10.0), ..Default::default() };
        let merged = flags.or(file);
        assert_eq!(merged.interval, Some(10.0));
        assert_eq!(merged.pcap_paths.len(), 2);
        assert_eq!(merged.export_config().unwrap().interval(), crate::Micros::from_secs(10));
    }

    #[test]
    fn rejects_bad_lines() {
        for bad in ["interval", "colour = red", "interval = soon", "force = maybe"] {
            assert!(matches!(WorkspaceConfig::parse(bad, Path::new(".")), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn non_positive_interval_is_usage() {
        for i in [0.0, -5.0] {
            let c = WorkspaceConfig { interval: Some(i), ..Default::default() };
            assert!(matches!(c.export_config(), Err(CliError::Usage(_))));
        }
    }
}
