//! Species parameters, the entropy-variable transform and the entropy density.
//!
//! Concentrations `u_1..u_n` are volume fractions; the solvent fraction is
//! `u_0 = 1 - sum u_i - c` where `c` is the local density of immobile
//! species. In entropy variables `w_i = log(u_i / u_0) + beta z_i Phi` the
//! mobility matrix is diagonal with entries `D_i u_i u_0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mesh::Point;
use crate::{Error, Result};

/// Physical parameters of the ion system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSystem {
    /// Scaled diffusivities `D_i`.
    pub d: Vec<f64>,
    /// Charge numbers `z_i`.
    pub z: Vec<f64>,
    pub beta: f64,
    /// Scaled permittivity `lambda^2`.
    pub lambda2: f64,
    /// Drops the size-exclusion term: `u_0 == 1` and `u_i = exp(w_i - beta z_i Phi)`.
    #[serde(default)]
    pub linear_pnp: bool,
}

impl SpeciesSystem {
    pub fn new(d: Vec<f64>, z: Vec<f64>, beta: f64, lambda2: f64) -> Result<Self> {
        let s = SpeciesSystem { d, z, beta, lambda2, linear_pnp: false };
        s.validate()?;
        Ok(s)
    }

    pub fn with_linear_pnp(mut self, on: bool) -> Self {
        self.linear_pnp = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.is_empty() {
            return Err(Error::InvalidParameter("at least one species is required".into()));
        }
        if self.d.len() != self.z.len() {
            return Err(Error::InvalidParameter(format!(
                "{} diffusivities but {} charges",
                self.d.len(),
                self.z.len()
            )));
        }
        if let Some(d) = self.d.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter(format!("diffusivity must be positive, got {d}")));
        }
        if self.z.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter("charges must be finite".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.lambda2 > 0.0 && self.lambda2.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda^2 must be positive, got {}", self.lambda2)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Solvent fraction implied by `u` and `c` (identically 1 for linear PNP).
    pub fn solvent(&self, u: &[f64], c: f64) -> f64 {
        if self.linear_pnp {
            1.0
        } else {
            1.0 - u.iter().sum::<f64>() - c
        }
    }

    /// Entropy density of the state relative to `ubar`, solvent included
    /// unless the model is linear.
    pub fn entropy_at(&self, u: &[f64], c: f64, ubar: &[f64], cbar: f64) -> Result<f64> {
        let mut h = entropy_density(u, ubar)?;
        if !self.linear_pnp {
            let u0 = 1.0 - u.iter().sum::<f64>() - c;
            let ub0 = 1.0 - ubar.iter().sum::<f64>() - cbar;
            h += entropy_density(&[u0.max(0.0)], &[ub0])?;
        }
        Ok(h)
    }
}

/// Density of immobile charged species and the background charge it carries.
#[derive(Clone)]
pub struct ImmobileProfile {
    density: Option<Field>,
    charge: Option<Field>,
}

type Field = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

impl ImmobileProfile {
    pub fn none() -> Self {
        ImmobileProfile { density: None, charge: None }
    }

    /// Uniformly charged confined ions: `f(x) = charge_per_unit * c(x)`.
    pub fn new(charge_per_unit: f64, density: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        let density: Field = Arc::new(density);
        let d = density.clone();
        ImmobileProfile { density: Some(density), charge: Some(Arc::new(move |p| charge_per_unit * d(p))) }
    }

    /// Independent density `c(x)` and background charge `f(x)`.
    pub fn with_charge(
        density: impl Fn(Point) -> f64 + Send + Sync + 'static,
        charge: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ImmobileProfile { density: Some(Arc::new(density)), charge: Some(Arc::new(charge)) }
    }

    pub fn density(&self, p: Point) -> f64 {
        self.density.as_ref().map_or(0.0, |f| f(p))
    }

    /// Background charge `f(x)`.
    pub fn charge(&self, p: Point) -> f64 {
        self.charge.as_ref().map_or(0.0, |f| f(p))
    }

    pub fn is_none(&self) -> bool {
        self.density.is_none() && self.charge.is_none()
    }
}

impl fmt::Debug for ImmobileProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImmobileProfile")
            .field("density", &self.density.is_some())
            .field("charge", &self.charge.is_some())
            .finish()
    }
}

/// Dirichlet values on one boundary region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValue {
    pub u: Vec<f64>,
    pub phi: f64,
}

impl BoundaryValue {
    /// Positivity and strict sub-saturation against the local immobile density.
    pub fn validate(&self, c: f64) -> Result<()> {
        if let Some((i, &v)) = self.u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonpositiveConcentration { species: i + 1, value: v });
        }
        let u0 = 1.0 - self.u.iter().sum::<f64>() - c;
        if !(u0 > 0.0) {
            return Err(Error::SaturatedState(u0));
        }
        Ok(())
    }
}

/// Boundary data per Dirichlet region name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub regions: Vec<(String, BoundaryValue)>,
}

impl BoundaryData {
    pub fn get(&self, name: &str) -> Result<&BoundaryValue> {
        self.regions
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::MissingBoundaryData(name.to_string()))
    }

    pub fn set(&mut self, name: &str, value: BoundaryValue) {
        match self.regions.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = value,
            None => self.regions.push((name.to_string(), value)),
        }
    }
}

/// Extension of boundary data into the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Lifting {
    Constant(BoundaryValue),
    /// Linear in `x` between `left` at `x0` and `right` at `x1`, constant outside.
    LinearX {
        x0: f64,
        x1: f64,
        left: BoundaryValue,
        right: BoundaryValue,
    },
}

impl Lifting {
    pub fn eval(&self, p: Point) -> BoundaryValue {
        match self {
            Lifting::Constant(v) => v.clone(),
            Lifting::LinearX { x0, x1, left, right } => {
                let t = ((p[0] - x0) / (x1 - x0)).clamp(0.0, 1.0);
                BoundaryValue {
                    u: left.u.iter().zip(&right.u).map(|(a, b)| (1.0 - t) * a + t * b).collect(),
                    phi: (1.0 - t) * left.phi + t * right.phi,
                }
            }
        }
    }
}

/// A pointwise state with its derived solvent fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBox {
    pub u: Vec<f64>,
    pub u0: f64,
}

impl StateBox {
    /// Accepts states with `u_i > 0` and `u_0 > 0`.
    pub fn new(u: Vec<f64>, c: f64) -> Result<Self> {
        if let Some((i, &v)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonpositiveConcentration { species: i + 1, value: v });
        }
        let u0 = 1.0 - u.iter().sum::<f64>() - c;
        if !(u0 > 0.0) {
            return Err(Error::SaturatedState(u0));
        }
        Ok(StateBox { u, u0 })
    }
}

/// `w_i = log(u_i / u_0) + beta z_i Phi`.
pub fn to_entropy(sys: &SpeciesSystem, u: &[f64], phi: f64, c: f64) -> Result<Vec<f64>> {
    let mut w = vec![0.0; u.len()];
    to_entropy_into(sys, u, phi, c, &mut w)?;
    Ok(w)
}

pub fn to_entropy_into(sys: &SpeciesSystem, u: &[f64], phi: f64, c: f64, w: &mut [f64]) -> Result<()> {
    if u.len() != sys.n() || w.len() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: u.len().min(w.len()) });
    }
    if let Some((i, &v)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonpositiveConcentration { species: i + 1, value: v });
    }
    let u0 = sys.solvent(u, c);
    if !(u0 > 0.0) {
        return Err(Error::SaturatedState(u0));
    }
    let lu0 = u0.ln();
    for i in 0..u.len() {
        w[i] = u[i].ln() - lu0 + sys.beta * sys.z[i] * phi;
    }
    Ok(())
}

/// Inverse transform; returns `(u, u_0)`.
pub fn from_entropy(sys: &SpeciesSystem, w: &[f64], phi: f64, c: f64) -> (Vec<f64>, f64) {
    let mut u = vec![0.0; w.len()];
    let u0 = from_entropy_into(sys, w, phi, c, &mut u);
    (u, u0)
}

/// Writes `u` and returns `u_0`.
///
/// The exponentials are shifted by `m = max(0, max_j a_j)` with
/// `a_j = w_j - beta z_j Phi`, so no term overflows.
pub fn from_entropy_into(sys: &SpeciesSystem, w: &[f64], phi: f64, c: f64, u: &mut [f64]) -> f64 {
    debug_assert_eq!(w.len(), u.len());
    if sys.linear_pnp {
        for i in 0..w.len() {
            u[i] = (w[i] - sys.beta * sys.z[i] * phi).exp();
        }
        return 1.0;
    }
    let mut m: f64 = 0.0;
    for i in 0..w.len() {
        u[i] = w[i] - sys.beta * sys.z[i] * phi;
        m = m.max(u[i]);
    }
    let one = (-m).exp();
    let mut denom = one;
    for ui in u.iter_mut() {
        *ui = (*ui - m).exp();
        denom += *ui;
    }
    let scale = (1.0 - c) / denom;
    for ui in u.iter_mut() {
        *ui *= scale;
    }
    one * scale
}

/// Partial derivatives of `(u, u_0)` with respect to `(w, Phi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyJacobian {
    /// Row-major `n x n`: entry `(i, j)` is `du_i / dw_j`.
    pub du_dw: Vec<f64>,
    pub du_dphi: Vec<f64>,
    pub du0_dw: Vec<f64>,
    pub du0_dphi: f64,
}

pub fn jacobian_from_entropy(sys: &SpeciesSystem, w: &[f64], phi: f64, c: f64) -> EntropyJacobian {
    let (u, u0) = from_entropy(sys, w, phi, c);
    let n = w.len();
    let mut jac =
        EntropyJacobian { du_dw: vec![0.0; n * n], du_dphi: vec![0.0; n], du0_dw: vec![0.0; n], du0_dphi: 0.0 };
    jacobian_into(sys, &u, u0, c, &mut jac.du_dw, &mut jac.du_dphi, &mut jac.du0_dw, &mut jac.du0_dphi);
    jac
}

/// Closed-form partials given `u = u(w, Phi)` and `u_0`.
#[allow(clippy::too_many_arguments)]
pub fn jacobian_into(
    sys: &SpeciesSystem,
    u: &[f64],
    u0: f64,
    c: f64,
    du_dw: &mut [f64],
    du_dphi: &mut [f64],
    du0_dw: &mut [f64],
    du0_dphi: &mut f64,
) {
    let n = u.len();
    let b = sys.beta;
    if sys.linear_pnp {
        du_dw.fill(0.0);
        for i in 0..n {
            du_dw[i * n + i] = u[i];
            du_dphi[i] = -b * sys.z[i] * u[i];
        }
        du0_dw.fill(0.0);
        *du0_dphi = 0.0;
        return;
    }
    let inv = 1.0 / (1.0 - c);
    let zbar: f64 = u.iter().zip(&sys.z).map(|(u, z)| u * z).sum::<f64>() * inv;
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            du_dw[i * n + j] = u[i] * (delta - u[j] * inv);
        }
        du_dphi[i] = -b * u[i] * (sys.z[i] - zbar);
        du0_dw[i] = -u0 * u[i] * inv;
    }
    *du0_dphi = b * u0 * zbar;
}

/// `sum_i [u_i log(u_i/ubar_i) - u_i + ubar_i]` with `0 log 0 = 0`.
pub fn entropy_density(u: &[f64], ubar: &[f64]) -> Result<f64> {
    let mut h = 0.0;
    for (&ui, &bi) in u.iter().zip(ubar) {
        if ui < 0.0 {
            return Err(Error::NegativeConcentration(ui));
        }
        if !(bi > 0.0) {
            return Err(Error::InvalidParameter(format!("reference concentration must be positive, got {bi}")));
        }
        let t = if ui == 0.0 { 0.0 } else { ui * (ui / bi).ln() };
        h += t - ui + bi;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sys(n: usize) -> SpeciesSystem {
        let z = [1.0, -1.0, 2.0, -2.0];
        let d = [1.0, 0.7, 1.3, 0.4];
        SpeciesSystem::new(d[..n].to_vec(), z[..n].to_vec(), 2.0, 0.1).unwrap()
    }

    #[test]
    fn forward_examples() {
        let s1 = SpeciesSystem::new(vec![1.0], vec![1.0], 1.0, 1.0).unwrap();
        assert_eq!(to_entropy(&s1, &[0.5], 0.0, 0.0).unwrap(), vec![0.0]);
        let s2 = sys(2);
        let w = to_entropy(&s2, &[1.0 / 3.0, 1.0 / 3.0], 0.5, 0.0).unwrap();
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], -1.0, epsilon = 1e-15);
        let w = to_entropy(&s1, &[1e-300], 0.0, 0.0).unwrap();
        assert!(w[0].is_finite() && w[0] < -690.0);
        assert!(matches!(to_entropy(&s1, &[0.0], 0.0, 0.0), Err(Error::NonpositiveConcentration { species: 1, .. })));
        assert!(matches!(to_entropy(&s1, &[0.8], 0.0, 0.3), Err(Error::SaturatedState(_))));
    }

    #[test]
    fn inverse_examples() {
        let s1 = SpeciesSystem::new(vec![1.0], vec![1.0], 1.0, 1.0).unwrap();
        let (u, u0) = from_entropy(&s1, &[0.0], 0.0, 0.0);
        assert_eq!((u[0], u0), (0.5, 0.5));
        let s2 = sys(2);
        let (u, u0) = from_entropy(&s2, &[0.0, 0.0], 0.0, 0.0);
        for v in u.iter().chain([&u0]) {
            assert_relative_eq!(*v, 1.0 / 3.0, epsilon = 1e-16);
        }
        let (u, u0) = from_entropy(&s2, &[800.0, 0.0], 0.0, 0.3);
        assert_relative_eq!(u[0], 0.7, epsilon = 1e-15);
        assert!(u0 >= 0.0 && u[1] >= 0.0 && u0.is_finite());
        let (u, _) = from_entropy(&s2, &[-800.0, -900.0], 0.0, 0.0);
        assert!(u.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn jacobian_examples() {
        let s1 = SpeciesSystem::new(vec![1.0], vec![1.0], 1.0, 1.0).unwrap();
        let j = jacobian_from_entropy(&s1, &[0.0], 0.0, 0.0);
        assert_relative_eq!(j.du_dw[0], 0.25, epsilon = 1e-15);
        let h = 1e-6;
        let fd = (from_entropy(&s1, &[h], 0.0, 0.0).0[0] - from_entropy(&s1, &[-h], 0.0, 0.0).0[0]) / (2.0 * h);
        assert!((fd - 0.25).abs() < 1e-8);
    }

    #[test]
    fn entropy_density_examples() {
        assert_eq!(entropy_density(&[0.2, 0.3], &[0.2, 0.3]).unwrap(), 0.0);
        let h = entropy_density(&[1.0], &[0.5]).unwrap();
        assert_relative_eq!(h, 2f64.ln() - 0.5, epsilon = 1e-15);
        // Oracle: composite Simpson on int_{0.5}^{1} log(s/0.5) ds.
        let n = 2000;
        let f = |s: f64| (s / 0.5).ln();
        let dx = 0.5 / n as f64;
        let mut q = f(0.5) + f(1.0);
        for k in 1..n {
            q += if k % 2 == 1 { 4.0 } else { 2.0 } * f(0.5 + k as f64 * dx);
        }
        assert!((q * dx / 3.0 - h).abs() < 1e-12);
        assert_eq!(entropy_density(&[0.0], &[0.5]).unwrap(), 0.5);
        assert!(matches!(entropy_density(&[-0.1], &[0.5]), Err(Error::NegativeConcentration(_))));
    }

    #[test]
    fn linear_pnp_transform() {
        let s = sys(2).with_linear_pnp(true);
        let u = [0.3, 2.0];
        let w = to_entropy(&s, &u, 0.4, 0.9).unwrap();
        let (back, u0) = from_entropy(&s, &w, 0.4, 0.9);
        assert_eq!(u0, 1.0);
        for (a, b) in back.iter().zip(&u) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(SpeciesSystem::new(vec![], vec![], 1.0, 1.0).is_err());
        assert!(SpeciesSystem::new(vec![1.0], vec![1.0, 2.0], 1.0, 1.0).is_err());
        assert!(SpeciesSystem::new(vec![0.0], vec![1.0], 1.0, 1.0).is_err());
        assert!(SpeciesSystem::new(vec![1.0], vec![1.0], -1.0, 1.0).is_err());
        assert!(SpeciesSystem::new(vec![1.0], vec![1.0], 1.0, 0.0).is_err());
        let bv = BoundaryValue { u: vec![0.3, 0.3], phi: 0.0 };
        assert!(bv.validate(0.3).is_ok());
        assert!(matches!(bv.validate(0.4), Err(Error::SaturatedState(_))));
    }

    #[test]
    fn lifting_is_linear_in_x() {
        let l = Lifting::LinearX {
            x0: 0.0,
            x1: 2.0,
            left: BoundaryValue { u: vec![0.1], phi: 0.0 },
            right: BoundaryValue { u: vec![0.3], phi: 1.0 },
        };
        let v = l.eval([0.5, 7.0]);
        assert_relative_eq!(v.u[0], 0.15, epsilon = 1e-15);
        assert_relative_eq!(v.phi, 0.25, epsilon = 1e-15);
        assert_eq!(l.eval([3.0, 0.0]).phi, 1.0);
    }

    fn simplex_state(n: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
        (prop::collection::vec(0.01f64..1.0, n + 1), prop::sample::select(vec![0.0, 0.3, 0.7])).prop_map(|(raw, c)| {
            let s: f64 = raw.iter().sum();
            let u = raw[..raw.len() - 1].iter().map(|r| r / s * (1.0 - c)).collect();
            (u, c)
        })
    }

    proptest! {
        #[test]
        fn round_trip_u((u, c) in simplex_state(3), phi in -3.0f64..3.0) {
            let s = sys(3);
            let w = to_entropy(&s, &u, phi, c).unwrap();
            let (back, u0) = from_entropy(&s, &w, phi, c);
            for (a, b) in back.iter().zip(&u) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!((back.iter().sum::<f64>() + u0 + c - 1.0).abs() < 1e-14);
        }

        #[test]
        fn round_trip_w(w in prop::collection::vec(-30.0f64..30.0, 3), phi in -2.0f64..2.0, c in 0.0f64..0.7) {
            let s = sys(3);
            let (u, u0) = from_entropy(&s, &w, phi, c);
            prop_assert!(u.iter().all(|v| *v > 0.0) && u0 > 0.0);
            // Below this 1 - c - sum(u) is no longer resolved in f64.
            prop_assume!(u0 > 1e-13);
            prop_assert!(u.iter().sum::<f64>() < 1.0 - c);
            let back = to_entropy(&s, &u, phi, c).unwrap();
            // Recomputing u_0 = 1 - sum u - c loses digits as u_0 -> 0.
            let tol = 1e-12 + 1e-15 / u0;
            for (a, b) in back.iter().zip(&w) {
                prop_assert!((a - b).abs() <= tol, "{a} vs {b}, tol {tol}");
            }
        }

        #[test]
        fn jacobian_matches_central_differences(w in prop::collection::vec(-4.0f64..4.0, 3), phi in -1.0f64..1.0, c in 0.0f64..0.7) {
            let s = sys(3);
            let j = jacobian_from_entropy(&s, &w, phi, c);
            let h = 1e-6;
            for k in 0..4 {
                let (mut wp, mut wm, mut pp, mut pm) = (w.clone(), w.clone(), phi, phi);
                if k < 3 { wp[k] += h; wm[k] -= h; } else { pp += h; pm -= h; }
                let (up, u0p) = from_entropy(&s, &wp, pp, c);
                let (um, u0m) = from_entropy(&s, &wm, pm, c);
                let scale = 1e-6 * (1.0 + j.du_dw.iter().fold(0.0f64, |a, b| a.max(b.abs())));
                for i in 0..3 {
                    let fd = (up[i] - um[i]) / (2.0 * h);
                    let an = if k < 3 { j.du_dw[i * 3 + k] } else { j.du_dphi[i] };
                    prop_assert!((fd - an).abs() <= scale, "du{i}/d{k}: fd {fd} an {an}");
                }
                let fd0 = (u0p - u0m) / (2.0 * h);
                let an0 = if k < 3 { j.du0_dw[k] } else { j.du0_dphi };
                prop_assert!((fd0 - an0).abs() <= scale);
            }
            // Columns of the full (u, u0) Jacobian sum to zero.
            for k in 0..3 {
                let s: f64 = (0..3).map(|i| j.du_dw[i * 3 + k]).sum::<f64>() + j.du0_dw[k];
                prop_assert!(s.abs() < 1e-15);
            }
            for i in 0..3 {
                for k in 0..3 {
                    if i != k {
                        prop_assert!((j.du_dw[i * 3 + k] - j.du_dw[k * 3 + i]).abs() < 1e-15);
                    }
                }
            }
        }

        #[test]
        fn entropy_density_nonnegative_and_convex(
            u in prop::collection::vec(0.0f64..1.0, 3),
            v in prop::collection::vec(0.0f64..1.0, 3),
            b in prop::collection::vec(0.01f64..1.0, 3),
        ) {
            let hu = entropy_density(&u, &b).unwrap();
            let hv = entropy_density(&v, &b).unwrap();
            prop_assert!(hu >= -1e-15);
            let m: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
            prop_assert!(entropy_density(&m, &b).unwrap() <= 0.5 * (hu + hv) + 1e-14);
        }
    }
}
