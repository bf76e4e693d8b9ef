//! Spectral measures on the real line: atoms plus a gridded absolutely
//! continuous density.
//!
//! All laws in this crate — closed-form families, convolution results,
//! Stieltjes-inverted transforms — are carried by [`SpectralMeasure`]. The
//! integration rule is fixed once here so every tolerance in the test suite
//! is reproducible: nodes are mapped through θ = acos((mid − x)/halfwidth)
//! and each node receives the weight halfwidth·sin(θ_k)·(b_{k+1} − b_k),
//! where the b's are midpoints between consecutive θ's. On a Chebyshev–Gauss
//! layout this is the θ-midpoint rule, which integrates densities with
//! square-root (and inverse square-root) edge behaviour to spectral
//! accuracy; on arbitrary ordered grids it degrades gracefully to a
//! second-order rule.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Normalization tolerance: total mass must be within this of 1.
pub const EPS_NORM: f64 = 1e-6;

/// Atom locations closer than this are a constructor error, not merged.
pub const ATOM_COLLISION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("density grid nodes are not strictly increasing at index {0}")]
    NodesNotIncreasing(usize),
    #[error("density grid node {index} = {node} lies outside [{lo}, {hi}]")]
    NodeOutsideSupport { index: usize, node: f64, lo: f64, hi: f64 },
    #[error("negative density value {value} at node index {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("density grid needs support_lo < support_hi (got {lo} ≥ {hi})")]
    EmptySupport { lo: f64, hi: f64 },
    #[error("nodes/values length mismatch: {nodes} nodes vs {values} values")]
    LengthMismatch { nodes: usize, values: usize },
    #[error("atom mass {0} outside (0, 1]")]
    BadAtomMass(f64),
    #[error("atoms at {0} and {1} collide (closer than {ATOM_COLLISION_TOL:e})")]
    AtomCollision(f64, f64),
    #[error("total mass {0} deviates from 1 by more than {EPS_NORM:e}")]
    MassNotNormalized(f64),
    #[error("non-finite value of integrand at node {node}")]
    NonFiniteIntegrand { node: f64 },
    #[error("non-finite numeric field: {0}")]
    NonFinite(&'static str),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "x")]
    pub location: f64,
    pub mass: f64,
}

/// Sampled absolutely continuous part on `[support_lo, support_hi]`.
///
/// `values[k]` is the Lebesgue density at `nodes[k]`. Nodes are strictly
/// increasing and stay inside the support interval; they need not touch the
/// endpoints (family constructors deliberately keep them interior so that
/// inverse-square-root edges stay finite at every node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    #[serde(rename = "lo")]
    pub support_lo: f64,
    #[serde(rename = "hi")]
    pub support_hi: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(lo: f64, hi: f64, nodes: Vec<f64>, values: Vec<f64>) -> Result<Self, MeasureError> {
        let g = DensityGrid { support_lo: lo, support_hi: hi, nodes, values };
        g.check()?;
        Ok(g)
    }

    /// Chebyshev–Gauss layout: n interior nodes clustered at the edges,
    /// values filled from `density`. This is the layout every family
    /// constructor uses; the integration rule is spectrally accurate on it.
    pub fn chebyshev(lo: f64, hi: f64, n: usize, density: impl Fn(f64) -> f64) -> Result<Self, MeasureError> {
        let (nodes, values) = chebyshev_samples(lo, hi, n, density);
        DensityGrid::new(lo, hi, nodes, values)
    }

    fn check(&self) -> Result<(), MeasureError> {
        if !(self.support_lo.is_finite() && self.support_hi.is_finite()) {
            return Err(MeasureError::NonFinite("support endpoints"));
        }
        if self.support_lo >= self.support_hi {
            return Err(MeasureError::EmptySupport { lo: self.support_lo, hi: self.support_hi });
        }
        if self.nodes.len() != self.values.len() {
            return Err(MeasureError::LengthMismatch { nodes: self.nodes.len(), values: self.values.len() });
        }
        for (i, w) in self.nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(MeasureError::NodesNotIncreasing(i + 1));
            }
        }
        for (i, (&x, &v)) in self.nodes.iter().zip(&self.values).enumerate() {
            if !x.is_finite() || !v.is_finite() {
                return Err(MeasureError::NonFinite("grid entry"));
            }
            if x < self.support_lo - 1e-12 || x > self.support_hi + 1e-12 {
                return Err(MeasureError::NodeOutsideSupport { index: i, node: x, lo: self.support_lo, hi: self.support_hi });
            }
            if v < 0.0 {
                return Err(MeasureError::NegativeDensity { index: i, value: v });
            }
        }
        Ok(())
    }

    /// Quadrature weights of the fixed arccos-map midpoint rule, one per node.
    pub fn quad_weights(&self) -> Vec<f64> {
        let mid = 0.5 * (self.support_lo + self.support_hi);
        let hw = 0.5 * (self.support_hi - self.support_lo);
        let theta: Vec<f64> = self.nodes.iter().map(|&x| ((x - mid) / hw).clamp(-1.0, 1.0).acos()).map(|t| std::f64::consts::PI - t).collect();
        // theta is increasing with x; cell boundaries at midpoints, padded to [0, π]
        let n = theta.len();
        let mut wts = Vec::with_capacity(n);
        for k in 0..n {
            let b_lo = if k == 0 { 0.0 } else { 0.5 * (theta[k - 1] + theta[k]) };
            let b_hi = if k + 1 == n { std::f64::consts::PI } else { 0.5 * (theta[k] + theta[k + 1]) };
            wts.push(hw * theta[k].sin() * (b_hi - b_lo));
        }
        wts
    }

    /// ∫ density dx by the fixed rule.
    pub fn total_mass(&self) -> f64 {
        self.quad_weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }
}

/// Chebyshev–Gauss nodes of `[lo, hi]` with density samples; shared by
/// constructors that fill grids from closed forms or Stieltjes inversion.
pub fn chebyshev_samples(lo: f64, hi: f64, n: usize, density: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mid = 0.5 * (lo + hi);
    let hw = 0.5 * (hi - lo);
    let mut nodes = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        // angle measured so nodes come out increasing
        let theta = std::f64::consts::PI * (2.0 * (n - 1 - k) as f64 + 1.0) / (2.0 * n as f64);
        let x = mid + hw * theta.cos();
        nodes.push(x);
        values.push(density(x).max(0.0));
    }
    (nodes, values)
}

/// A probability measure on ℝ: finitely many atoms plus an optional
/// absolutely continuous part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    pub atoms: Vec<Atom>,
    pub ac: Option<DensityGrid>,
}

/// Outcome of [`SpectralMeasure::validate`].
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub total_mass: f64,
    pub atom_mass: f64,
    pub ac_mass: f64,
    pub negative_values: usize,
    pub atom_collisions: Vec<(usize, usize)>,
    pub pass: bool,
    pub messages: Vec<String>,
}

impl SpectralMeasure {
    /// The point mass δ_c.
    pub fn dirac(c: f64) -> Self {
        SpectralMeasure { atoms: vec![Atom { location: c, mass: 1.0 }], ac: None }
    }

    /// Purely atomic measure; masses must be positive and sum to ~1.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        let m = SpectralMeasure { atoms, ac: None };
        m.check_strict()?;
        Ok(m)
    }

    /// Purely absolutely continuous measure.
    pub fn from_density(ac: DensityGrid) -> Result<Self, MeasureError> {
        let m = SpectralMeasure { atoms: Vec::new(), ac: Some(ac) };
        m.check_strict()?;
        Ok(m)
    }

    /// Atoms plus density; the usual constructor for family laws.
    pub fn with_parts(atoms: Vec<Atom>, ac: Option<DensityGrid>) -> Result<Self, MeasureError> {
        let m = SpectralMeasure { atoms, ac };
        m.check_strict()?;
        Ok(m)
    }

    fn check_strict(&self) -> Result<(), MeasureError> {
        for a in &self.atoms {
            if !a.location.is_finite() || !a.mass.is_finite() {
                return Err(MeasureError::NonFinite("atom"));
            }
            if a.mass <= 0.0 || a.mass > 1.0 + EPS_NORM {
                return Err(MeasureError::BadAtomMass(a.mass));
            }
        }
        for i in 0..self.atoms.len() {
            for j in (i + 1)..self.atoms.len() {
                if (self.atoms[i].location - self.atoms[j].location).abs() < ATOM_COLLISION_TOL {
                    return Err(MeasureError::AtomCollision(self.atoms[i].location, self.atoms[j].location));
                }
            }
        }
        if let Some(g) = &self.ac {
            g.check()?;
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > EPS_NORM {
            return Err(MeasureError::MassNotNormalized(mass));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        let atom_mass: f64 = self.atoms.iter().map(|a| a.mass).sum();
        atom_mass + self.ac.as_ref().map_or(0.0, |g| g.total_mass())
    }

    /// Mass sitting exactly at `x0` (within the collision tolerance).
    pub fn mass_at(&self, x0: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| (a.location - x0).abs() < 1e-9)
            .map(|a| a.mass)
            .sum()
    }

    /// Diagnostic validation: never errors, reports everything it finds.
    pub fn validate(&self) -> Diagnostics {
        let atom_mass: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let ac_mass = self.ac.as_ref().map_or(0.0, |g| g.total_mass());
        let total = atom_mass + ac_mass;
        let mut messages = Vec::new();
        let mut collisions = Vec::new();
        for i in 0..self.atoms.len() {
            if self.atoms[i].mass <= 0.0 {
                messages.push(format!("atom {} has non-positive mass {}", i, self.atoms[i].mass));
            }
            for j in (i + 1)..self.atoms.len() {
                if (self.atoms[i].location - self.atoms[j].location).abs() < ATOM_COLLISION_TOL {
                    collisions.push((i, j));
                    messages.push(format!(
                        "atoms {} and {} collide at {}",
                        i, j, self.atoms[i].location
                    ));
                }
            }
        }
        let mut negative = 0;
        if let Some(g) = &self.ac {
            if g.check().is_err() {
                messages.push("density grid fails structural checks".to_string());
            }
            negative = g.values.iter().filter(|&&v| v < 0.0).count();
            if negative > 0 {
                messages.push(format!("{negative} negative density values"));
            }
        }
        if (total - 1.0).abs() > EPS_NORM {
            messages.push(format!("total mass {total} outside 1 ± {EPS_NORM:e}"));
        }
        let pass = messages.is_empty() && collisions.is_empty();
        Diagnostics { total_mass: total, atom_mass, ac_mass, negative_values: negative, atom_collisions: collisions, pass, messages }
    }

    /// ∫ f dμ for complex-valued f; errors if f is non-finite at any node.
    pub fn integrate<F>(&self, f: F) -> Result<Complex64, MeasureError>
    where
        F: Fn(f64) -> Complex64,
    {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            let v = f(a.location);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(MeasureError::NonFiniteIntegrand { node: a.location });
            }
            acc += a.mass * v;
        }
        if let Some(g) = &self.ac {
            let wts = g.quad_weights();
            for ((&x, &rho), w) in g.nodes.iter().zip(&g.values).zip(wts) {
                let v = f(x);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(MeasureError::NonFiniteIntegrand { node: x });
                }
                acc += w * rho * v;
            }
        }
        Ok(acc)
    }

    /// ∫ f dμ for real f.
    pub fn integrate_real<F>(&self, f: F) -> Result<f64, MeasureError>
    where
        F: Fn(f64) -> f64,
    {
        Ok(self.integrate(|x| Complex64::new(f(x), 0.0))?.re)
    }

    /// k-th raw moment; k = 0 returns the total mass.
    pub fn moment(&self, k: u32) -> f64 {
        self.integrate_real(|x| x.powi(k as i32)).unwrap_or(f64::NAN)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.moment(1);
        self.moment(2) - m1 * m1
    }

    /// Smallest and largest points carrying mass (atoms included).
    pub fn support_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.atoms {
            lo = lo.min(a.location);
            hi = hi.max(a.location);
        }
        if let Some(g) = &self.ac {
            lo = lo.min(g.support_lo);
            hi = hi.max(g.support_hi);
        }
        (lo, hi)
    }

    /// True when the measure is (numerically) a single point mass.
    pub fn as_point_mass(&self) -> Option<f64> {
        if self.ac.as_ref().map_or(0.0, |g| g.total_mass()) > 1e-9 {
            return None;
        }
        if self.atoms.len() == 1 && (self.atoms[0].mass - 1.0).abs() < 1e-9 {
            return Some(self.atoms[0].location);
        }
        None
    }

    /// Distribution function F(x) = μ((−∞, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc: f64 = self.atoms.iter().filter(|a| a.location <= x).map(|a| a.mass).sum();
        if let Some(g) = &self.ac {
            if x >= g.support_hi {
                acc += g.total_mass();
            } else if x > g.support_lo {
                let wts = g.quad_weights();
                for ((&xi, &rho), w) in g.nodes.iter().zip(&g.values).zip(&wts) {
                    if xi <= x {
                        acc += w * rho;
                    } else {
                        break;
                    }
                }
            }
        }
        acc.min(1.0)
    }

    /// Quantile function (generalized inverse of the CDF), by bisection on
    /// the support interval. `p` is clamped to (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        let (lo0, hi0) = self.support_bounds();
        let (mut lo, mut hi) = (lo0 - 1e-9, hi0 + 1e-9);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Multiply the underlying random variable by s > 0.
    pub fn dilate(&self, s: f64) -> SpectralMeasure {
        assert!(s > 0.0, "dilation factor must be positive");
        let atoms = self.atoms.iter().map(|a| Atom { location: s * a.location, mass: a.mass }).collect();
        let ac = self.ac.as_ref().map(|g| DensityGrid {
            support_lo: s * g.support_lo,
            support_hi: s * g.support_hi,
            nodes: g.nodes.iter().map(|&x| s * x).collect(),
            values: g.values.iter().map(|&v| v / s).collect(),
        });
        SpectralMeasure { atoms, ac }
    }

    /// Shift the underlying random variable by c.
    pub fn shift(&self, c: f64) -> SpectralMeasure {
        let atoms = self.atoms.iter().map(|a| Atom { location: a.location + c, mass: a.mass }).collect();
        let ac = self.ac.as_ref().map(|g| DensityGrid {
            support_lo: g.support_lo + c,
            support_hi: g.support_hi + c,
            nodes: g.nodes.iter().map(|&x| x + c).collect(),
            values: g.values.clone(),
        });
        SpectralMeasure { atoms, ac }
    }

    /// JSON in the published measure format; bit-exact for finite doubles.
    pub fn to_json(&self) -> Result<String, MeasureError> {
        for a in &self.atoms {
            if !a.location.is_finite() || !a.mass.is_finite() {
                return Err(MeasureError::NonFinite("atom"));
            }
        }
        if let Some(g) = &self.ac {
            g.check()?;
        }
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, MeasureError> {
        let m: SpectralMeasure = serde_json::from_str(s)?;
        if let Some(g) = &m.ac {
            g.check()?;
        }
        Ok(m)
    }
}

/// Kolmogorov–Smirnov distance between two measures: the CDFs are compared
/// at every grid-cell boundary and on both sides of every atom.
pub fn ks_distance(a: &SpectralMeasure, b: &SpectralMeasure) -> f64 {
    let mut pts = Vec::new();
    for m in [a, b] {
        for at in &m.atoms {
            pts.push(at.location - 1e-12);
            pts.push(at.location + 1e-12);
        }
        if let Some(g) = &m.ac {
            pts.push(g.support_lo);
            pts.push(g.support_hi);
            for w in g.nodes.windows(2) {
                pts.push(0.5 * (w[0] + w[1]));
            }
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut sup: f64 = 0.0;
    for &x in &pts {
        sup = sup.max((a.cdf(x) - b.cdf(x)).abs());
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn semicircle(n: usize) -> SpectralMeasure {
        // variance-one semicircle on [−2, 2]
        let g = DensityGrid::chebyshev(-2.0, 2.0, n, |x| (4.0 - x * x).max(0.0).sqrt() / (2.0 * std::f64::consts::PI)).unwrap();
        SpectralMeasure::from_density(g).unwrap()
    }

    fn arcsine_pm(n: usize) -> SpectralMeasure {
        // arcsine law on [−√2, √2]: variance-one case with inverse-sqrt edges
        let r = 2.0f64.sqrt();
        let g = DensityGrid::chebyshev(-r, r, n, |x| 1.0 / (std::f64::consts::PI * (2.0 - x * x).max(1e-300).sqrt())).unwrap();
        SpectralMeasure::from_density(g).unwrap()
    }

    #[test]
    fn dirac_moments() {
        let d = SpectralMeasure::dirac(0.0);
        assert_eq!(d.integrate_real(|x| x * x).unwrap(), 0.0);
        let d3 = SpectralMeasure::dirac(3.0);
        assert_eq!(d3.moment(1), 3.0);
        assert_eq!(d3.moment(0), 1.0);
    }

    #[test]
    fn semicircle_low_moments() {
        let m = semicircle(4096);
        assert_abs_diff_eq!(m.moment(0), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.moment(1), 0.0, epsilon = 1e-12);
        // second moment: Catalan C1 = 1, tolerance from the examples
        assert_abs_diff_eq!(m.moment(2), 1.0, epsilon = 1e-8);
        // fourth moment: Catalan C2 = 2
        assert_abs_diff_eq!(m.moment(4), 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.moment(6), 5.0, epsilon = 1e-6);
    }

    #[test]
    fn arcsine_moments_inverse_sqrt_edges() {
        let m = arcsine_pm(4096);
        assert_abs_diff_eq!(m.moment(0), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.mean(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.variance(), 1.0, epsilon = 1e-9);
        // arcsine on [−√2, √2]: m4 = 3/2 (2·(1/2)^2·C(4,2)/4 … fixed by direct calc: E x^4 = 3/2)
        assert_abs_diff_eq!(m.moment(4), 1.5, epsilon = 1e-8);
    }

    #[test]
    fn integrate_is_linear() {
        let m = semicircle(2048);
        let f = |x: f64| Complex64::new(x * x, 0.5 * x);
        let g = |x: f64| Complex64::new(x.powi(3) - 1.0, x);
        let (a, b) = (Complex64::new(1.25, 0.0), Complex64::new(-0.5, 0.0));
        let lhs = m.integrate(|x| a * f(x) + b * g(x)).unwrap();
        let rhs = a * m.integrate(f).unwrap() + b * m.integrate(g).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn validate_passes_and_fails() {
        let m = semicircle(2048);
        let d = m.validate();
        assert!(d.pass, "{:?}", d.messages);
        assert_abs_diff_eq!(d.total_mass, 1.0, epsilon = 1e-6);

        // colliding atoms are reported, not merged
        let bad = SpectralMeasure {
            atoms: vec![Atom { location: 1.0, mass: 0.5 }, Atom { location: 1.0, mass: 0.5 }],
            ac: None,
        };
        let d = bad.validate();
        assert!(!d.pass);
        assert_eq!(d.atom_collisions.len(), 1);
        assert!(SpectralMeasure::with_parts(bad.atoms.clone(), None).is_err());
    }

    #[test]
    fn non_finite_integrand_names_node() {
        let m = SpectralMeasure::dirac(2.0);
        let err = m.integrate_real(|x| 1.0 / (x - 2.0)).unwrap_err();
        match err {
            MeasureError::NonFiniteIntegrand { node } => assert_eq!(node, 2.0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn cdf_quantile_and_ks() {
        let m = semicircle(2048);
        assert_abs_diff_eq!(m.cdf(0.0), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(m.quantile(0.5), 0.0, epsilon = 1e-4);
        assert!(ks_distance(&m, &m) < 1e-15);
        let shifted = m.shift(0.05);
        let d = ks_distance(&m, &shifted);
        assert!(d > 1e-3 && d < 0.1, "ks = {d}");
    }

    #[test]
    fn dilate_scales_moments() {
        let m = semicircle(2048);
        let d = m.dilate(0.5);
        assert_abs_diff_eq!(d.variance(), 0.25, epsilon = 1e-8);
        assert_abs_diff_eq!(d.total_mass(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn json_round_trip_exact() {
        let m = semicircle(512);
        let s = m.to_json().unwrap();
        let m2 = SpectralMeasure::from_json(&s).unwrap();
        assert_eq!(m, m2);
        // field names of the published format
        assert!(s.contains("\"atoms\""));
        assert!(s.contains("\"ac\""));
        assert!(s.contains("\"lo\""));
        assert!(s.contains("\"nodes\""));
    }
}
