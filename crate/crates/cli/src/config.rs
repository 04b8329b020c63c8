//! Resolved run configuration: a JSON file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use trigroots::charprobe::Convention;
use trigroots::polyeval::WindowSpec;
use trigroots_verify::{Profile, Tolerances};

pub const BUILD_ID: &str = env!("TRIGROOTS_BUILD_ID");

/// Every knob any command reads. Fields a command does not use are ignored;
/// unset options fall back to per-command defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub dist: Vec<String>,
    pub n: Vec<usize>,
    pub trials: Option<u64>,
    pub window: WindowSpec,
    pub seed: u64,
    pub tau: f64,
    pub eps: f64,
    pub delta: Option<f64>,
    pub t: Option<f64>,
    pub s: Option<f64>,
    pub pair: Option<[f64; 2]>,
    pub grid_points: Option<usize>,
    // cg
    pub tol: Option<f64>,
    pub tmax: Option<f64>,
    pub t0: Option<f64>,
    pub tail_order: Option<u32>,
    // edgeworth
    pub check: Option<String>,
    pub nodes: usize,
    // charfn / smallball
    pub scan: bool,
    pub x: Vec<f64>,
    pub center: Vec<Vec<f64>>,
    pub r_min: f64,
    pub r_max: f64,
    pub radii: usize,
    pub directions: usize,
    pub c_star: f64,
    pub convention: Convention,
    // verify
    pub profile: Profile,
    pub tolerances: Tolerances,
    // not part of the config hash
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            dist: vec!["gaussian".into()],
            n: Vec::new(),
            trials: None,
            window: WindowSpec::Full,
            seed: 20_240_601,
            tau: trigroots::diophantine::DEFAULT_TAU,
            eps: 1.0,
            delta: None,
            t: None,
            s: None,
            pair: None,
            grid_points: None,
            tol: None,
            tmax: None,
            t0: None,
            tail_order: None,
            check: None,
            nodes: 12,
            scan: false,
            x: Vec::new(),
            center: Vec::new(),
            r_min: 0.1,
            r_max: 100.0,
            radii: 25,
            directions: 64,
            c_star: 1.0,
            convention: Convention::Unit,
            profile: Profile::Full,
            tolerances: Tolerances::default(),
            threads: None,
            out: None,
            svg: None,
        }
    }
}

/// Drops nulls, `false` and empty arrays so unset flags never override the
/// file.
fn prune(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m
            .into_iter()
            .filter(|(_, v)| !matches!(v, Value::Null | Value::Bool(false)) && !matches!(v, Value::Array(a) if a.is_empty()))
            .collect(),
        _ => Map::new(),
    }
}

impl RunConfig {
    /// `file` first, then `flags` on top; objects such as `tolerances` merge
    /// key by key.
    pub fn resolve(file: Option<&Path>, flags: Value) -> Result<Self, String> {
        let mut base = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                match serde_json::from_str::<Value>(&text).map_err(|e| format!("{}: {e}", p.display()))? {
                    Value::Object(m) => m,
                    _ => return Err(format!("{}: config must be a JSON object", p.display())),
                }
            }
            None => Map::new(),
        };
        for (k, v) in prune(flags) {
            match (base.get_mut(&k), v) {
                (Some(Value::Object(old)), Value::Object(new)) => old.extend(new),
                (_, v) => {
                    base.insert(k, v);
                }
            }
        }
        serde_json::from_value(Value::Object(base)).map_err(|e| e.to_string())
    }

    /// Worker threads: the flag or `THREADS`, else every available core.
    pub fn parallelism(&self) -> usize {
        self.threads
            .filter(|&t| t > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// SHA-256 of the config with threads and output paths blanked, since
    /// neither changes any result.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        c.out = None;
        c.svg = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn provenance(&self) -> Value {
        serde_json::json!({
            "build_id": BUILD_ID,
            "seed": self.seed,
            "config_hash": self.hash(),
            "config": self,
        })
    }

    /// Comment lines heading every CSV.
    pub fn csv_preamble(&self) -> String {
        format!(
            "# build_id={BUILD_ID}\n# seed={}\n# config_hash={}\n",
            self.seed,
            self.hash()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let c = RunConfig {
            command: "sweep".into(),
            dist: vec!["gaussian".into(), "discrete:-1:0.5,1:0.5".into()],
            n: vec![8, 16],
            pair: Some([0.5, 1.5]),
            center: vec![vec![0.0, 1.0]],
            ..Default::default()
        };
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
    }

    #[test]
    fn flags_override_file_and_threads_skip_hash() {
        let dir = std::env::temp_dir().join(format!("trigroots-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.json");
        std::fs::write(&p, r#"{"seed": 5, "trials": 10, "tolerances": {"cg_abs": 1e-9}}"#).unwrap();
        let flags = serde_json::json!({"trials": 20, "n": [], "scan": false, "tolerances": {"psi_abs": 0.5}});
        let c = RunConfig::resolve(Some(&p), flags).unwrap();
        assert_eq!((c.seed, c.trials), (5, Some(20)));
        assert_eq!(c.tolerances.cg_abs, 1e-9);
        assert_eq!(c.tolerances.psi_abs, 0.5);
        let mut d = c.clone();
        d.threads = Some(7);
        assert_eq!(c.hash(), d.hash());
        d.seed = 6;
        assert_ne!(c.hash(), d.hash());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::resolve(None, serde_json::json!({"trails": 3})).is_err());
    }
}
