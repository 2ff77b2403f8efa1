use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::check_dim;

/// Relation whose decay exponent `dimension` fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `P_0[H_x < ∞]`, exact and by simulation.
    #[serde(rename = "hit")]
    Hit,
    #[serde(rename = "M")]
    M,
    #[serde(rename = "L")]
    L,
    #[serde(rename = "R")]
    R,
    /// Slab composition of order `n`.
    #[serde(rename = "C")]
    C,
}

impl Relation {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hit" => Relation::Hit,
            "M" => Relation::M,
            "L" => Relation::L,
            "R" => Relation::R,
            "C" => Relation::C,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Relation::Hit => "hit",
            Relation::M => "M",
            Relation::L => "L",
            Relation::R => "R",
            Relation::C => "C",
        }
    }
}

/// Settings of one run, read from a flat `key = value` file and overridden
/// by command-line pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub d: usize,
    pub u: f64,
    pub u_low: f64,
    pub u_high: f64,
    pub base_radius: u32,
    pub window_radius: u32,
    pub escape_radius: u32,
    pub replicas: u64,
    pub seed: u64,
    /// Worker cap; `0` leaves the pool size to the runtime.
    pub threads: usize,
    /// Distance grid (ℓ1 norms) for exponent fits and reach probabilities.
    pub gauges: Vec<u32>,
    /// Base radii of the connectivity ladder (empty: quarter, half and full
    /// base radius).
    pub radii: Vec<u32>,
    /// Ball radii of the nested-count check.
    pub rhos: Vec<u32>,
    /// Deepest generation index.
    pub depth: usize,
    /// Radius `V̄` sets are restricted to (`0`: the escape radius).
    pub clip: u32,
    pub relation: Relation,
    /// Composition order for `relation = C`.
    pub n: usize,
    /// Chain length for `reach` checks.
    pub m: usize,
    /// Escape walks per site in `capacity` (`0` skips the simulation).
    pub walks: u64,
    /// Tolerance on fitted slopes from simulation.
    pub tolerance: f64,
    /// Tolerance on fitted slopes from exact values.
    pub exact_tolerance: f64,
    /// Relative agreement required between the two Green oracles.
    pub accuracy: f64,
    /// Connectivity fraction required at the largest base radius.
    pub threshold: f64,
    /// Persisted soup file to analyse instead of sampling.
    pub soup: Option<PathBuf>,
    /// Number of generation stacks written out.
    pub persist: u64,
    pub plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d: 5,
            u: 1.0,
            u_low: 0.0,
            u_high: 1.0,
            base_radius: 4,
            window_radius: 2,
            escape_radius: 16,
            replicas: 100,
            seed: 1,
            threads: 0,
            gauges: vec![4, 6, 8, 12, 16, 24],
            radii: Vec::new(),
            rhos: vec![2, 4, 8],
            depth: 2,
            clip: 0,
            relation: Relation::M,
            n: 3,
            m: 2,
            walks: 0,
            tolerance: 0.5,
            exact_tolerance: 0.2,
            accuracy: 1e-4,
            threshold: 0.95,
            soup: None,
            persist: 1,
            plots: true,
        }
    }
}

fn bad(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.to_string(), reason: reason.into() }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, format!("cannot parse `{v}`")))
}

fn list(key: &str, v: &str) -> Result<Vec<u32>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{v}`"))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines (`#` starts a comment) on top of the
    /// defaults. Overrides are applied last, in order.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(&format!("line {}", no + 1), format!("expected `key = value`, got `{line}`")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        pairs.extend(overrides.iter().cloned());
        let mut cfg = ExperimentConfig::default();
        let (mut u_low_set, mut u_high_set) = (false, false);
        for (k, v) in &pairs {
            let v = v.as_str();
            match k.as_str() {
                "d" => cfg.d = num(k, v)?,
                "u" => cfg.u = num(k, v)?,
                "uLow" => {
                    cfg.u_low = num(k, v)?;
                    u_low_set = true;
                }
                "uHigh" => {
                    cfg.u_high = num(k, v)?;
                    u_high_set = true;
                }
                "baseRadius" => cfg.base_radius = num(k, v)?,
                "windowRadius" => cfg.window_radius = num(k, v)?,
                "escapeRadius" => cfg.escape_radius = num(k, v)?,
                "replicas" => cfg.replicas = num(k, v)?,
                "seed" => cfg.seed = num(k, v)?,
                "threads" => cfg.threads = num(k, v)?,
                "gauges" => cfg.gauges = list(k, v)?,
                "radii" => cfg.radii = list(k, v)?,
                "rhos" => cfg.rhos = list(k, v)?,
                "depth" => cfg.depth = num(k, v)?,
                "clip" => cfg.clip = num(k, v)?,
                "relation" => {
                    cfg.relation = Relation::parse(v).ok_or_else(|| bad(k, format!("unknown relation `{v}` (hit, M, L, R, C)")))?
                }
                "n" => cfg.n = num(k, v)?,
                "m" => cfg.m = num(k, v)?,
                "walks" => cfg.walks = num(k, v)?,
                "tolerance" => cfg.tolerance = num(k, v)?,
                "exactTolerance" => cfg.exact_tolerance = num(k, v)?,
                "accuracy" => cfg.accuracy = num(k, v)?,
                "threshold" => cfg.threshold = num(k, v)?,
                "soup" => cfg.soup = (!v.is_empty()).then(|| PathBuf::from(v)),
                "persist" => cfg.persist = num(k, v)?,
                "plots" => cfg.plots = flag(k, v)?,
                other => return Err(bad(other, "unknown key")),
            }
        }
        if !u_high_set {
            cfg.u_high = if u_low_set { cfg.u_low + cfg.u } else { cfg.u };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.d).map_err(|_| bad("d", format!("{} is outside 3..=8", self.d)))?;
        if !(self.u > 0.0 && self.u.is_finite()) {
            return Err(bad("u", "intensity must be positive and finite"));
        }
        if !(self.u_low >= 0.0 && self.u_low < self.u_high && self.u_high.is_finite()) {
            return Err(bad("uLow", format!("need 0 <= uLow < uHigh, got [{}, {}]", self.u_low, self.u_high)));
        }
        if self.window_radius > self.base_radius {
            return Err(bad("windowRadius", format!("{} exceeds baseRadius {}", self.window_radius, self.base_radius)));
        }
        if 2 * self.base_radius as u64 > self.escape_radius as u64 {
            return Err(bad(
                "escapeRadius",
                format!("must be at least twice baseRadius ({} < 2 * {})", self.escape_radius, self.base_radius),
            ));
        }
        if self.replicas < 1 {
            return Err(bad("replicas", "at least one replica"));
        }
        for (name, v) in [("tolerance", self.tolerance), ("exactTolerance", self.exact_tolerance), ("accuracy", self.accuracy)] {
            if !(v > 0.0) {
                return Err(bad(name, "must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(bad("threshold", "must lie in [0, 1]"));
        }
        if self.gauges.contains(&0) {
            return Err(bad("gauges", "distances must be positive"));
        }
        Ok(())
    }

    /// The settings as ordered `key -> value` text, as echoed in reports.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("d", self.d.to_string());
        put("u", self.u.to_string());
        put("uLow", self.u_low.to_string());
        put("uHigh", self.u_high.to_string());
        put("baseRadius", self.base_radius.to_string());
        put("windowRadius", self.window_radius.to_string());
        put("escapeRadius", self.escape_radius.to_string());
        put("replicas", self.replicas.to_string());
        put("seed", self.seed.to_string());
        put("threads", self.threads.to_string());
        put("gauges", join(&self.gauges));
        put("radii", join(&self.radii));
        put("rhos", join(&self.rhos));
        put("depth", self.depth.to_string());
        put("clip", self.clip.to_string());
        put("relation", self.relation.name().to_string());
        put("n", self.n.to_string());
        put("m", self.m.to_string());
        put("walks", self.walks.to_string());
        put("tolerance", self.tolerance.to_string());
        put("exactTolerance", self.exact_tolerance.to_string());
        put("accuracy", self.accuracy.to_string());
        put("threshold", self.threshold.to_string());
        put("soup", self.soup.as_ref().map_or(String::new(), |p| p.display().to_string()));
        put("persist", self.persist.to_string());
        put("plots", self.plots.to_string());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn file_then_overrides() {
        let text = "# comment\nd = 3\nbaseRadius = 5 # trailing\nescapeRadius=12\ngauges = 2, 4,8\n";
        let cfg = ExperimentConfig::parse(text, &[kv("d", "5"), kv("seed", "9")]).unwrap();
        assert_eq!(cfg.d, 5);
        assert_eq!(cfg.base_radius, 5);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.gauges, vec![2, 4, 8]);
        assert_eq!(cfg.u_high, 1.0);
    }

    #[test]
    fn level_interval_follows_u() {
        let cfg = ExperimentConfig::parse("u = 2.5", &[]).unwrap();
        assert_eq!((cfg.u_low, cfg.u_high), (0.0, 2.5));
        let cfg = ExperimentConfig::parse("u = 2\nuLow = 1", &[]).unwrap();
        assert_eq!((cfg.u_low, cfg.u_high), (1.0, 3.0));
    }

    #[test]
    fn diagnostics_name_the_field() {
        let field = |text: &str| match ExperimentConfig::parse(text, &[]) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field("d = 9"), "d");
        assert_eq!(field("windowRadius = 9"), "windowRadius");
        assert_eq!(field("baseRadius = 9"), "escapeRadius");
        assert_eq!(field("replicas = 0"), "replicas");
        assert_eq!(field("bogus = 1"), "bogus");
        assert_eq!(field("u = x"), "u");
        assert_eq!(field("just words"), "line 1");
        assert_eq!(field("relation = Q"), "relation");
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::parse("relation = C\nn = 4\nradii = 4,8\nplots = false", &[]).unwrap();
        let text: String = cfg.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(ExperimentConfig::parse(&text, &[]).unwrap(), cfg);
    }
}
