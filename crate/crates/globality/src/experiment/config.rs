//! Flat key=value experiment configuration.
//!
//! Every key has a registered default; setting an unknown key is an error,
//! so typos fail fast instead of silently running the default. The effective
//! configuration (defaults included) is hashed and stamped into every output
//! file. `threads` and `out_dir` are excluded from both: they change where
//! and how fast results appear, never what they contain.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Registered keys and their defaults.
const KEYS: &[(&str, &str)] = &[
    ("experiment", ""),
    ("seed", "0"),
    ("out_dir", "out"),
    ("threads", "1"),
    // sinusoid benchmark
    ("sigma", "1.0"),
    ("theta_true", "9.42477796076938"),
    ("samples", "100"),
    ("n_columns", "1"),
    ("trials", "2000"),
    ("start_mode", "uniform"),
    ("scan_resolution", "4001"),
    ("dedup_tol", "1e-4"),
    ("label_tol", "1e-3"),
    // tests
    ("alpha", "0.05"),
    ("bootstrap_replicates", "1000"),
    ("gap_replicates", "200"),
    ("threshold_rule", "asymptotic"),
    // relaxations
    ("relaxation", "poly"),
    ("poly_degree", "1"),
    ("direction_file", ""),
    ("discover_nominal", "100"),
    ("discover_starts", "100"),
    ("discover_dims", "1"),
    ("mismatch_tol", "1e-3"),
    // optimizer
    ("optim_tol", "1e-8"),
    ("optim_max_iter", "500"),
    // profile
    ("noise", "on"),
    // optics
    ("grid_size", "64"),
    ("oversampling", "2.0"),
    ("zernike_modes", "4-15"),
    ("tau", "0.2"),
    ("shell_taus", "0.05,0.1,0.2"),
    ("shell_points", "8"),
    ("shell_starts", "32"),
    ("bound_checks", "100"),
    ("psf_dumps", "1"),
    // wavefront restart demo
    ("toy_grid", "16"),
    ("toy_sigma", "1e-3"),
    ("toy_box", "0.5"),
    ("toy_diversity", "0,0.5"),
    ("toy_tau", "0.2"),
    ("toy_replicates", "64"),
    ("toy_truth", "0.15,-0.10,0.08,0.12,-0.09,0.05"),
    ("toy_modes", "4-9"),
    ("max_restarts", "20"),
];

/// Keys that never influence output bytes.
const UNSTAMPED: &[&str] = &["threads", "out_dir"];

#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new() -> Self {
        ExperimentConfig::default()
    }

    /// Parse `key=value` lines; `#` comments and blank lines are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key=value, got {raw:?}", path.display(), lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("unknown config key {key:?}")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Effective value: explicit setting or registered default.
    pub fn get(&self, key: &str) -> &str {
        if let Some(v) = self.entries.get(key) {
            return v;
        }
        KEYS.iter()
            .find(|(k, _)| *k == key)
            .map(|(_, d)| *d)
            .unwrap_or_else(|| panic!("unregistered config key {key:?}"))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self.get(key);
        raw.parse::<f64>()
            .map_err(|_| Error::Config(format!("{key}: expected a number, got {raw:?}")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        let raw = self.get(key);
        raw.parse::<usize>()
            .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {raw:?}")))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        let raw = self.get(key);
        raw.parse::<u64>()
            .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {raw:?}")))
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "on" | "true" | "1" => Ok(true),
            "off" | "false" | "0" => Ok(false),
            other => Err(Error::Config(format!("{key}: expected on/off, got {other:?}"))),
        }
    }

    /// Comma-separated floats.
    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.get(key);
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("{key}: bad number {s:?} in {raw:?}")))
            })
            .collect()
    }

    /// Comma-separated integers, with `a-b` expanding to the inclusive range.
    pub fn get_usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self.get(key);
        let mut out = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            if let Some((a, b)) = part.split_once('-') {
                let lo: usize = a.trim().parse().map_err(|_| {
                    Error::Config(format!("{key}: bad range start {a:?} in {raw:?}"))
                })?;
                let hi: usize = b.trim().parse().map_err(|_| {
                    Error::Config(format!("{key}: bad range end {b:?} in {raw:?}"))
                })?;
                if hi < lo {
                    return Err(Error::Config(format!("{key}: empty range {part:?}")));
                }
                out.extend(lo..=hi);
            } else {
                out.push(part.parse().map_err(|_| {
                    Error::Config(format!("{key}: bad integer {part:?} in {raw:?}"))
                })?);
            }
        }
        Ok(out)
    }

    /// FNV-1a over the sorted effective `key=value` pairs (minus the
    /// unstamped keys), so two configs hash equal exactly when they request
    /// the same computation.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for key in sorted_keys() {
            if UNSTAMPED.contains(&key) {
                continue;
            }
            feed(key.as_bytes());
            feed(b"=");
            feed(self.get(key).as_bytes());
            feed(b"\n");
        }
        h
    }

    /// Header lines stamped into every output file.
    pub fn stamp_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# config_hash={:016x}", self.hash()),
            format!("# seed={}", self.get("seed")),
        ];
        for key in sorted_keys() {
            if UNSTAMPED.contains(&key) || key == "seed" {
                continue;
            }
            lines.push(format!("# {}={}", key, self.get(key)));
        }
        lines
    }
}

fn sorted_keys() -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = KEYS.iter().map(|(k, _)| *k).collect();
    keys.sort_unstable();
    keys
}
