use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::mesh::read_mesh;
use crate::model::BoundaryValue;
use crate::{Error, Result};

/// Structured override file. Every field is optional; present fields replace
/// the scenario's values.
///
/// ```toml
/// tau = 1e-4
/// mesh_file = "channel.mesh"
///
/// [system]
/// d = [0.6, 1.0, 1.5]
/// lambda2 = 0.02
///
/// [newton]
/// tol = 1e-12
///
/// [[boundary]]
/// name = "left"
/// u = [0.002, 0.002, 0.006]
/// phi = 0.0
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub tau: Option<f64>,
    pub steps: Option<usize>,
    pub eps: Option<f64>,
    pub max_retries: Option<usize>,
    pub output_every: Option<usize>,
    pub cross_section: Option<f64>,
    /// Mesh in the text format of [`crate::mesh::parse_mesh`]; relative paths
    /// resolve against the override file.
    pub mesh_file: Option<PathBuf>,
    pub system: Option<SystemOverrides>,
    pub newton: Option<NewtonOverrides>,
    pub boundary: Vec<RegionOverride>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemOverrides {
    pub d: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub lambda2: Option<f64>,
    pub linear_pnp: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOverrides {
    pub tol: Option<f64>,
    pub step_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_halvings: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionOverride {
    pub name: String,
    pub u: Option<Vec<f64>>,
    pub phi: Option<f64>,
}

impl ScenarioOverrides {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut o = Self::parse(&std::fs::read_to_string(path)?)?;
        if let (Some(m), Some(dir)) = (&o.mesh_file, path.parent()) {
            if m.is_relative() {
                o.mesh_file = Some(dir.join(m));
            }
        }
        Ok(o)
    }

    /// Applies the overrides and validates the result.
    pub fn apply(&self, s: &mut Scenario) -> Result<()> {
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(s.tau, self.tau);
        set!(s.steps, self.steps);
        set!(s.eps, self.eps);
        set!(s.max_retries, self.max_retries);
        set!(s.output_every, self.output_every);
        if self.cross_section.is_some() {
            s.cross_section = self.cross_section;
        }
        if let Some(sys) = &self.system {
            set!(s.system.d, sys.d);
            set!(s.system.z, sys.z);
            set!(s.system.beta, sys.beta);
            set!(s.system.lambda2, sys.lambda2);
            set!(s.system.linear_pnp, sys.linear_pnp);
        }
        if let Some(nw) = &self.newton {
            set!(s.newton.tol, nw.tol);
            set!(s.newton.step_tol, nw.step_tol);
            set!(s.newton.max_iter, nw.max_iter);
            set!(s.newton.max_halvings, nw.max_halvings);
        }
        for r in &self.boundary {
            let mut val = match s.boundary.get(&r.name) {
                Ok(v) => v.clone(),
                Err(_) => match &r.u {
                    Some(u) => BoundaryValue { u: u.clone(), phi: 0.0 },
                    None => return Err(Error::MissingBoundaryData(r.name.clone())),
                },
            };
            set!(val.u, r.u);
            set!(val.phi, r.phi);
            s.boundary.set(&r.name, val);
        }
        s.relift();
        if let Some(path) = &self.mesh_file {
            s.mesh = read_mesh(path, s.mesh.policy())?;
        }
        s.validate()
    }
}
