//! Shipped Gridworlds and the JSON interchange format for arbitrary MDPs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use osiris_core::gridworld::{build_gridworld, Gridworld, GridworldConfig};
use osiris_core::mdp::DEFAULT_T_MAX;
use osiris_core::{Error as CoreError, MdpSpec, Policy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const DILLY_DALLYING: &str = include_str!("../assets/gridworld_dilly_dallying.json");
const EXPRESS: &str = include_str!("../assets/gridworld_express.json");

/// Policy names the experiments look up in interchange files.
pub const EVALUATION: &str = "evaluation";
pub const BEHAVIOR: &str = "behavior";

/// An MDP with the evaluation and behavior policies of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub name: String,
    pub mdp: MdpSpec,
    pub eval: Policy,
    pub behavior: Policy,
    /// Present for Gridworlds; carries the cell geometry.
    pub grid: Option<Gridworld>,
}

impl Environment {
    pub fn from_gridworld(grid: Gridworld) -> Self {
        Self {
            name: grid.config.name.clone(),
            mdp: grid.mdp.clone(),
            eval: grid.eval.clone(),
            behavior: grid.behavior.clone(),
            grid: Some(grid),
        }
    }

    pub fn corridor_states(&self) -> Vec<usize> {
        self.grid.as_ref().map(Gridworld::corridor_states).unwrap_or_default()
    }

    pub fn branch_state(&self) -> Option<usize> {
        self.grid.as_ref().and_then(Gridworld::branch_state)
    }
}

/// Which environment an experiment runs on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvChoice {
    DillyDallying,
    Express,
    /// A Gridworld layout or an interchange document.
    File(PathBuf),
}

impl FromStr for EnvChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dilly_dallying" => Ok(Self::DillyDallying),
            "express" => Ok(Self::Express),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(Self::File(PathBuf::from(path))),
                _ => Err(CliError::Config(format!(
                    "unknown environment {s:?}; expected dilly_dallying, express or file:<path>"
                ))),
            },
        }
    }
}

impl fmt::Display for EnvChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DillyDallying => f.write_str("dilly_dallying"),
            Self::Express => f.write_str("express"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for EnvChoice {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EnvChoice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl EnvChoice {
    pub fn load(&self) -> Result<Environment> {
        match self {
            Self::DillyDallying => Ok(canonical_dilly_dallying()),
            Self::Express => Ok(canonical_express()),
            Self::File(path) => load_environment(path),
        }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        path: origin.to_path_buf(),
        message: format!("at {}: {}", e.path(), e.inner()),
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parses and builds a Gridworld layout.
pub fn parse_gridworld(text: &str, origin: &Path) -> Result<Gridworld> {
    let config: GridworldConfig = parse_json(text, origin)?;
    build_gridworld(&config).map_err(|e| CliError::Schema {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

fn shipped(text: &str, name: &str) -> Environment {
    let grid = parse_gridworld(text, Path::new(name)).expect("shipped layout is valid");
    Environment::from_gridworld(grid)
}

/// The Dilly-Dallying Gridworld: behavior ε = 0.5 everywhere.
pub fn canonical_dilly_dallying() -> Environment {
    shipped(DILLY_DALLYING, "gridworld_dilly_dallying.json")
}

/// Same layout with behavior ε = 0.2 inside the corridor.
pub fn canonical_express() -> Environment {
    shipped(EXPRESS, "gridworld_express.json")
}

/// Loads either a Gridworld layout (recognised by its `width` field) or an
/// interchange document with `evaluation` and `behavior` policies.
pub fn load_environment(path: &Path) -> Result<Environment> {
    let text = read(path)?;
    let probe: serde_json::Value = parse_json(&text, path)?;
    if probe.get("width").is_some() {
        return Ok(Environment::from_gridworld(parse_gridworld(&text, path)?));
    }
    let (mdp, mut policies) = parse_mdp(&text, path)?;
    let mut take = |name: &str| {
        policies.remove(name).ok_or_else(|| CliError::Schema {
            path: path.to_path_buf(),
            message: format!("at policies: missing policy {name:?}"),
        })
    };
    let eval = take(EVALUATION)?;
    let behavior = take(BEHAVIOR)?;
    Ok(Environment {
        name: path.display().to_string(),
        mdp,
        eval,
        behavior,
        grid: None,
    })
}

fn default_gamma() -> f64 {
    1.0
}

fn default_t_max() -> usize {
    DEFAULT_T_MAX
}

/// On-disk MDP document with dense nested tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    pub initial_dist: Vec<f64>,
    pub terminal: Vec<usize>,
    /// `[s][a][s']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `[s][a]`.
    pub reward: Vec<Vec<f64>>,
    #[serde(default)]
    pub policies: BTreeMap<String, Vec<Vec<f64>>>,
}

impl MdpDocument {
    pub fn from_specs(mdp: &MdpSpec, policies: &BTreeMap<String, Policy>) -> Self {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let rows = |p: &Policy| p.table().chunks(na).map(<[f64]>::to_vec).collect();
        Self {
            n_states: ns,
            n_actions: na,
            gamma: mdp.gamma(),
            t_max: mdp.t_max(),
            initial_dist: mdp.initial_distribution().to_vec(),
            terminal: mdp.terminal_states(),
            transition: (0..ns)
                .map(|s| (0..na).map(|a| mdp.transition_row(s, a).to_vec()).collect())
                .collect(),
            reward: (0..ns).map(|s| (0..na).map(|a| mdp.reward(s, a)).collect()).collect(),
            policies: policies.iter().map(|(k, p)| (k.clone(), rows(p))).collect(),
        }
    }

    /// Validates the document. Errors name the offending field by JSON path.
    pub fn into_specs(self) -> std::result::Result<(MdpSpec, BTreeMap<String, Policy>), String> {
        let (ns, na) = (self.n_states, self.n_actions);
        let shape =
            |what: &str, found: usize, expected: usize| format!("at {what}: {found} entries, expected {expected}");
        if self.transition.len() != ns {
            return Err(shape("transition", self.transition.len(), ns));
        }
        if self.reward.len() != ns {
            return Err(shape("reward", self.reward.len(), ns));
        }
        for s in 0..ns {
            if self.transition[s].len() != na {
                return Err(shape(&format!("transition[{s}]"), self.transition[s].len(), na));
            }
            for a in 0..na {
                if self.transition[s][a].len() != ns {
                    return Err(shape(&format!("transition[{s}][{a}]"), self.transition[s][a].len(), ns));
                }
            }
            if self.reward[s].len() != na {
                return Err(shape(&format!("reward[{s}]"), self.reward[s].len(), na));
            }
        }
        let transition: Vec<f64> = self.transition.into_iter().flatten().flatten().collect();
        let reward: Vec<f64> = self.reward.into_iter().flatten().collect();
        let mdp = MdpSpec::new(
            ns,
            na,
            transition,
            reward,
            self.initial_dist,
            &self.terminal,
            self.gamma,
            self.t_max,
        )
        .map_err(|e| locate(e, "transition", na))?;
        let mut policies = BTreeMap::new();
        for (name, rows) in self.policies {
            if rows.len() != ns {
                return Err(shape(&format!("policies.{name}"), rows.len(), ns));
            }
            let policy = Policy::from_rows(&rows).map_err(|e| locate(e, &format!("policies.{name}"), 0))?;
            policies.insert(name, policy);
        }
        Ok((mdp, policies))
    }
}

/// Turns a core row error into a message with a JSON path.
fn locate(err: CoreError, field: &str, n_actions: usize) -> String {
    match &err {
        CoreError::InvalidRow {
            what: "transition",
            row,
            reason,
        } => {
            format!("at {field}[{}][{}]: row {reason}", row / n_actions, row % n_actions)
        }
        CoreError::InvalidRow {
            what: "reward",
            row,
            reason,
        } => format!("at reward[{row}]: {reason}"),
        CoreError::InvalidRow {
            what: "initial distribution",
            reason,
            ..
        } => format!("at initial_dist: {reason}"),
        CoreError::InvalidRow {
            what: "policy",
            row,
            reason,
        } => format!("at {field}[{row}]: row {reason}"),
        _ => err.to_string(),
    }
}

/// Parses an interchange document.
pub fn parse_mdp(text: &str, origin: &Path) -> Result<(MdpSpec, BTreeMap<String, Policy>)> {
    let doc: MdpDocument = parse_json(text, origin)?;
    doc.into_specs().map_err(|message| CliError::Schema {
        path: origin.to_path_buf(),
        message,
    })
}

pub fn load_mdp(path: &Path) -> Result<(MdpSpec, BTreeMap<String, Policy>)> {
    parse_mdp(&read(path)?, path)
}

pub fn save_mdp(path: &Path, mdp: &MdpSpec, policies: &BTreeMap<String, Policy>) -> Result<()> {
    let doc = MdpDocument::from_specs(mdp, policies);
    let text = serde_json::to_string_pretty(&doc).expect("documents always serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Evaluation and behavior policies of an environment under their
/// interchange names.
pub fn named_policies(env: &Environment) -> BTreeMap<String, Policy> {
    BTreeMap::from([
        (EVALUATION.to_string(), env.eval.clone()),
        (BEHAVIOR.to_string(), env.behavior.clone()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_choice_round_trips() {
        for s in ["dilly_dallying", "express", "file:some/layout.json"] {
            assert_eq!(s.parse::<EnvChoice>().unwrap().to_string(), s);
        }
        assert!("file:".parse::<EnvChoice>().is_err());
        assert!("cartpole".parse::<EnvChoice>().is_err());
    }

    #[test]
    fn shipped_layouts_build() {
        let dd = canonical_dilly_dallying();
        let ex = canonical_express();
        assert_eq!(dd.mdp, ex.mdp);
        assert_eq!(dd.eval, ex.eval);
        assert_eq!(dd.corridor_states().len(), 6);
        assert!(dd.branch_state().is_some());
    }

    #[test]
    fn transition_error_names_the_row() {
        let doc = r#"{"n_states": 2, "n_actions": 1, "initial_dist": [1, 0], "terminal": [1],
            "transition": [[[0.5, 0.4]], [[0, 1]]], "reward": [[1], [0]]}"#;
        let err = parse_mdp(doc, Path::new("m.json")).unwrap_err().to_string();
        assert!(err.contains("transition[0][0]"), "{err}");
    }
}
