//! Channel set-ups and verification configurations.
//!
//! Lengths are scaled: the calcium channel lives in `[0, 1] x [0, 2/3]`, the
//! bipolar pore in `[0, 20] x [-7, 7]`.

mod meshes;
mod overrides;

use std::fmt;
use std::sync::Arc;

pub use overrides::{NewtonOverrides, RegionOverride, ScenarioOverrides, SystemOverrides};

use crate::mesh::{BoundaryTag, CellPointPolicy, Point, StripLattice, TriMesh};
use crate::model::{BoundaryData, BoundaryValue, ImmobileProfile, Lifting, SpeciesSystem};
use crate::newton::NewtonSettings;
use crate::{Error, Result};

/// Avogadro constant, 1/mol.
pub const AVOGADRO: f64 = 6.022e23;
/// Typical concentration, particles per litre.
pub const TYPICAL_CONCENTRATION: f64 = 3.7037e25;
/// One mol/L in scaled units.
pub const MOLAR: f64 = AVOGADRO / TYPICAL_CONCENTRATION;
/// Maximal scaled oxygen density in the calcium channel (52 mol/L).
pub const OXYGEN_MAX: f64 = 52.0 * MOLAR;

/// Finest calcium refinement level.
pub const CALCIUM_MAX_LEVEL: usize = 4;

/// Initial concentrations `u^I`.
#[derive(Clone)]
pub enum InitialProfile {
    /// The concentrations of the boundary lifting.
    Lifted,
    Uniform(Vec<f64>),
    Field(Arc<dyn Fn(Point) -> Vec<f64> + Send + Sync>),
}

impl fmt::Debug for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialProfile::Lifted => f.write_str("Lifted"),
            InitialProfile::Uniform(u) => f.debug_tuple("Uniform").field(u).finish(),
            InitialProfile::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// Everything a run needs apart from the choice of scheme.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub mesh: TriMesh,
    pub system: SpeciesSystem,
    pub immobile: ImmobileProfile,
    pub boundary: BoundaryData,
    pub lifting: Lifting,
    pub initial: InitialProfile,
    pub tau: f64,
    pub steps: usize,
    pub eps: f64,
    pub newton: NewtonSettings,
    /// Step halvings allowed by the time-step controller.
    pub max_retries: usize,
    /// Write a record every `output_every` steps.
    pub output_every: usize,
    /// Line `x = const` through which the current is measured.
    pub cross_section: Option<f64>,
}

impl Scenario {
    /// A scenario with no immobile species, uniform initial data taken from
    /// the lifting and default solver settings.
    pub fn new(name: &str, mesh: TriMesh, system: SpeciesSystem, boundary: BoundaryData, lifting: Lifting) -> Self {
        Scenario {
            name: name.to_string(),
            mesh,
            system,
            immobile: ImmobileProfile::none(),
            boundary,
            lifting,
            initial: InitialProfile::Lifted,
            tau: 1e-3,
            steps: 100,
            eps: crate::fem::DEFAULT_EPS,
            newton: NewtonSettings::default(),
            max_retries: 10,
            output_every: 1,
            cross_section: None,
        }
    }

    pub fn initial_u(&self, p: Point) -> Vec<f64> {
        match &self.initial {
            InitialProfile::Lifted => self.lifting.eval(p).u,
            InitialProfile::Uniform(u) => u.clone(),
            InitialProfile::Field(f) => f(p),
        }
    }

    /// Checks parameters and the boundary values against the immobile
    /// density on each Dirichlet region.
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if self.output_every == 0 {
            return Err(Error::InvalidParameter("output_every must be at least 1".into()));
        }
        let n = self.system.n();
        for (v, &p) in self.mesh.vertices().iter().enumerate() {
            if let Some(id) = self.mesh.vertex_dirichlet(v) {
                let val = self.boundary.get(&self.mesh.dirichlet_names()[id])?;
                if val.u.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: val.u.len() });
                }
                val.validate(self.immobile.density(p))?;
            }
        }
        Ok(())
    }

    /// Sets the potential on the Dirichlet region `name` and keeps the lifting
    /// consistent with it.
    pub fn set_boundary_potential(&mut self, name: &str, phi: f64) -> Result<()> {
        let mut val = self.boundary.get(name)?.clone();
        val.phi = phi;
        self.boundary.set(name, val);
        self.relift();
        Ok(())
    }

    /// Applied voltage `Phi_bar` on the right bath.
    pub fn set_voltage(&mut self, u: f64) -> Result<()> {
        self.set_boundary_potential("right", u)
    }

    /// Refreshes the end values of a linear lifting from the `left` and
    /// `right` regions.
    pub(crate) fn relift(&mut self) {
        if let Lifting::LinearX { left, right, .. } = &mut self.lifting {
            if let Ok(v) = self.boundary.get("left") {
                *left = v.clone();
            }
            if let Ok(v) = self.boundary.get("right") {
                *right = v.clone();
            }
        }
    }
}

fn polygon_mesh(
    vertices: &[[f64; 2]],
    triangles: &[[usize; 3]],
    nb: usize,
    tag: impl Fn(Point, Point) -> BoundaryTag,
) -> Result<TriMesh> {
    let boundary: Vec<_> = (0..nb)
        .map(|i| {
            let j = (i + 1) % nb;
            (i, j, tag(vertices[i], vertices[j]))
        })
        .collect();
    TriMesh::from_arrays(vertices.to_vec(), triangles.to_vec(), &boundary, CellPointPolicy::Circumcenter)
}

/// Tags edges on `x = x_left` and `x = x_right` as the `left` and `right` baths.
fn bath_tags(x_left: f64, x_right: f64) -> impl Fn(Point, Point) -> BoundaryTag {
    move |a, b| {
        let on = |x: f64| (a[0] - x).abs() < 1e-9 && (b[0] - x).abs() < 1e-9;
        if on(x_left) {
            BoundaryTag::dirichlet("left")
        } else if on(x_right) {
            BoundaryTag::dirichlet("right")
        } else {
            BoundaryTag::Neumann
        }
    }
}

/// The 74-triangle acute base mesh of the calcium channel.
pub fn calcium_base_mesh() -> Result<TriMesh> {
    polygon_mesh(&meshes::CALCIUM_VERTICES, &meshes::CALCIUM_TRIANGLES, 24, bath_tags(0.0, 1.0))
}

/// `u_ox(x) / OXYGEN_MAX`: one in the middle of the neck, linear ramps on
/// `[0.35, 0.45]` and `[0.55, 0.65]`.
pub fn oxygen_shape(x: f64) -> f64 {
    if (0.45..=0.55).contains(&x) {
        1.0
    } else if (0.35..0.45).contains(&x) {
        10.0 * (x - 0.35)
    } else if x > 0.55 && x <= 0.65 {
        10.0 * (0.65 - x)
    } else {
        0.0
    }
}

/// Calcium-selective channel: Ca2+, Na+, Cl- around confined half-charged
/// oxygen ions in the neck.
pub fn calcium_channel(level: usize) -> Result<Scenario> {
    if level > CALCIUM_MAX_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "calcium refinement level must be at most {CALCIUM_MAX_LEVEL}, got {level}"
        )));
    }
    let mut mesh = calcium_base_mesh()?;
    for _ in 0..level {
        mesh = mesh.regular_refine();
    }
    let system = SpeciesSystem::new(vec![0.5937, 1.0, 1.5232], vec![2.0, 1.0, -1.0], 3.8922, 0.011713)?;
    let left = BoundaryValue { u: vec![0.1 * MOLAR, 0.1 * MOLAR, 0.3 * MOLAR], phi: 0.0 };
    let right = BoundaryValue { u: vec![0.05 * MOLAR, 0.15 * MOLAR, 0.25 * MOLAR], phi: 0.0 };
    let mut boundary = BoundaryData::default();
    boundary.set("left", left.clone());
    boundary.set("right", right.clone());
    let lifting = Lifting::LinearX { x0: 0.0, x1: 1.0, left, right };
    let mut s = Scenario::new(&format!("calcium-l{level}"), mesh, system, boundary, lifting);
    s.immobile = ImmobileProfile::new(-0.5, |p| OXYGEN_MAX * oxygen_shape(p[0]));
    s.tau = 2e-4;
    s.steps = 600;
    s.cross_section = Some(0.5);
    Ok(s)
}

/// Options of the bipolar pore.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BipolarOptions {
    /// `Phi_bar` on the right bath; the left bath is grounded.
    pub voltage: f64,
    /// Density inside the confined-ion disks.
    pub c_max: f64,
    /// Drop the solvent factor (`u_0 = 1`).
    pub linear_pnp: bool,
}

impl Default for BipolarOptions {
    fn default() -> Self {
        BipolarOptions { voltage: 0.0, c_max: 0.2971, linear_pnp: false }
    }
}

pub const BIPOLAR_LENGTH: f64 = 20.0;
pub const BIPOLAR_DISK_RADIUS: f64 = 1.4;
/// Disk centres and the charge carried per unit density.
pub const BIPOLAR_DISKS: [(Point, f64); 8] = [
    ([5.5, -1.75], 0.5),
    ([5.5, 1.75], 0.5),
    ([8.5, -1.75], 0.5),
    ([8.5, 1.75], 0.5),
    ([11.5, -1.75], -0.5),
    ([11.5, 1.75], -0.5),
    ([14.5, -1.75], -0.5),
    ([14.5, 1.75], -0.5),
];

fn disk_at(p: Point) -> Option<f64> {
    let r2 = BIPOLAR_DISK_RADIUS * BIPOLAR_DISK_RADIUS;
    BIPOLAR_DISKS.iter().find(|(c, _)| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) <= r2).map(|&(_, q)| q)
}

/// The bipolar pore mesh: baths `[0, 4]` and `[16, 20]` of height 14 joined
/// by a channel of height 7.
pub fn bipolar_mesh() -> Result<TriMesh> {
    let rows: Vec<f64> = (0..=32).map(|j| -7.0 + 0.4375 * j as f64).collect();
    let strips = (0..32)
        .map(|j| if !(8..24).contains(&j) { vec![(0.0, 4.0), (16.0, 20.0)] } else { vec![(0.0, 20.0)] })
        .collect();
    let lattice = StripLattice { x0: 0.0, dx: 0.5, rows, strips };
    lattice.build(bath_tags(0.0, BIPOLAR_LENGTH), CellPointPolicy::Circumcenter)
}

/// Bipolar pore with eight confined-ion disks: four positive upstream, four
/// negative downstream.
pub fn bipolar_channel(opts: &BipolarOptions) -> Result<Scenario> {
    let c_max = opts.c_max;
    if !(0.0..1.0).contains(&c_max) {
        return Err(Error::InvalidParameter(format!("c_max must lie in [0, 1), got {c_max}")));
    }
    let system = SpeciesSystem::new(vec![1.0, 1.0], vec![1.0, -1.0], 3.8922, 1.1713)?.with_linear_pnp(opts.linear_pnp);
    let ubar = vec![0.0016, 0.0016];
    let left = BoundaryValue { u: ubar.clone(), phi: 0.0 };
    let right = BoundaryValue { u: ubar, phi: opts.voltage };
    let mut boundary = BoundaryData::default();
    boundary.set("left", left.clone());
    boundary.set("right", right.clone());
    let lifting = Lifting::LinearX { x0: 0.0, x1: BIPOLAR_LENGTH, left, right };
    let mut s = Scenario::new("bipolar", bipolar_mesh()?, system, boundary, lifting);
    s.immobile = ImmobileProfile::with_charge(
        move |p| disk_at(p).map_or(0.0, |_| c_max),
        move |p| disk_at(p).map_or(0.0, |q| q * c_max),
    );
    s.tau = 1e-2;
    s.steps = 1000;
    s.cross_section = Some(0.5 * BIPOLAR_LENGTH);
    Ok(s)
}

/// Exact potential of the manufactured Poisson problem.
pub fn manufactured_potential(p: Point) -> f64 {
    (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin()
}

/// Uniform concentration of the single species in the manufactured problem.
pub const MANUFACTURED_U: f64 = 0.1;

/// Unit square with `lambda^2 = 1`, one species of valence one at constant
/// density and a background charge chosen so that `sin(pi x) sin(pi y)`
/// solves the Poisson equation with zero Dirichlet data.
pub fn manufactured_poisson(level: usize) -> Result<Scenario> {
    let mut mesh =
        polygon_mesh(&meshes::SQUARE_VERTICES, &meshes::SQUARE_TRIANGLES, 12, |_, _| BoundaryTag::dirichlet("wall"))?;
    for _ in 0..level {
        mesh = mesh.regular_refine();
    }
    let system = SpeciesSystem::new(vec![1.0], vec![1.0], 1.0, 1.0)?;
    let wall = BoundaryValue { u: vec![MANUFACTURED_U], phi: 0.0 };
    let mut boundary = BoundaryData::default();
    boundary.set("wall", wall.clone());
    let mut s = Scenario::new(&format!("manufactured-l{level}"), mesh, system, boundary, Lifting::Constant(wall));
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    s.immobile = ImmobileProfile::with_charge(|_| 0.0, move |p| 2.0 * pi2 * manufactured_potential(p) - MANUFACTURED_U);
    Ok(s)
}

/// Scenario by name, as accepted by the command line. The bipolar mesh is
/// refined `level` times.
pub fn by_name(name: &str, level: usize) -> Result<Scenario> {
    let refined = |mut s: Scenario| {
        for _ in 0..level {
            s.mesh = s.mesh.regular_refine();
        }
        s
    };
    match name {
        "calcium" => calcium_channel(level),
        "bipolar" => bipolar_channel(&BipolarOptions::default()).map(refined),
        "bipolar-crowded" => bipolar_channel(&BipolarOptions { c_max: 0.7, ..Default::default() }).map(refined),
        "manufactured" => manufactured_poisson(level),
        other => Err(Error::Config(format!(
            "unknown scenario {other:?} (expected calcium, bipolar, bipolar-crowded or manufactured)"
        ))),
    }
}
