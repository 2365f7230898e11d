//! Polar velocity quadrature split at kink radii.

use std::f64::consts::PI;

use serde::Serialize;

use super::gauss::gauss_legendre_on;
use crate::equilibrium::WeightSpec;
use crate::error::{Error, Result};

/// Panels wider than `max(left edge, PANEL_WIDTH_FLOOR)` are subdivided, so
/// long heavy-tailed ranges get a geometric panel ladder.
const PANEL_WIDTH_FLOOR: f64 = 8.0;

/// One quadrature node in velocity space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityNode {
    pub v1: f64,
    pub v2: f64,
    pub r: f64,
    pub theta: f64,
    /// Relativistic energy `sqrt(1 + |v|^2)`.
    pub e: f64,
    pub vh1: f64,
    pub vh2: f64,
    /// Full 2-D weight including the Jacobian `r`.
    pub weight: f64,
    pub ir: usize,
    pub it: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VelocityQuadrature {
    pub r_nodes: Vec<f64>,
    pub r_weights: Vec<f64>,
    pub theta_nodes: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub r_max: f64,
    /// Panel edges in `r`, starting at 0 and ending at `r_max`.
    pub panel_edges: Vec<f64>,
    pub n_r_per_panel: usize,
    #[serde(skip)]
    nodes: Vec<VelocityNode>,
}

impl VelocityQuadrature {
    pub fn nodes(&self) -> &[VelocityNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_theta(&self) -> usize {
        self.theta_nodes.len()
    }

    /// Index of the node obtained by `v2 -> -v2` (`theta -> -theta`).
    pub fn mirror_v2(&self, index: usize) -> usize {
        let nt = self.n_theta();
        let ir = index / nt;
        let it = index % nt;
        ir * nt + (nt - 1 - it)
    }

    /// Index of the node obtained by `v1 -> -v1` (`theta -> pi - theta`).
    pub fn mirror_v1(&self, index: usize) -> usize {
        let nt = self.n_theta();
        let ir = index / nt;
        let it = index % nt;
        // theta_j = 2 pi (j + 1/2)/nt, and pi - theta_j = theta_{nt/2 - 1 - j}
        let half = nt / 2;
        let jt = (half + nt - 1 - it) % nt;
        ir * nt + jt
    }

    /// Same rule refined by `factor` in both directions.
    pub fn refined(&self, factor: usize) -> VelocityQuadrature {
        let n_theta = self.n_theta() * factor;
        build_from_edges(&self.panel_edges, self.n_r_per_panel * factor, n_theta)
    }
}

/// Builds the polar rule with `r_max` chosen from the analytic tail of the weight.
pub fn build_velocity_quadrature(
    weight: &WeightSpec,
    kinks: &[f64],
    tol_tail: f64,
    n_r: usize,
    n_theta: usize,
) -> Result<VelocityQuadrature> {
    if !(tol_tail > 0.0 && tol_tail < 1.0) {
        return Err(Error::InvalidInput(format!("tol_tail = {tol_tail} must lie in (0,1)")));
    }
    if weight.alpha <= 2.0 {
        return Err(Error::NonIntegrableWeight { alpha: weight.alpha });
    }
    let r_max = weight.tail_radius(tol_tail);
    build_with_radius(r_max, kinks, n_r, n_theta)
}

/// Builds the polar rule on the disk of radius `r_max`, splitting at the radii
/// of the given kink energies.
pub fn build_with_radius(
    r_max: f64,
    kinks: &[f64],
    n_r: usize,
    n_theta: usize,
) -> Result<VelocityQuadrature> {
    if n_r == 0 || n_theta == 0 || n_theta % 2 != 0 {
        return Err(Error::Size(format!(
            "n_r = {n_r} must be positive and n_theta = {n_theta} positive and even"
        )));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidInput(format!("r_max = {r_max}")));
    }
    let mut cuts: Vec<f64> = kinks
        .iter()
        .filter(|e| **e > 1.0)
        .map(|e| (e * e - 1.0).sqrt())
        .filter(|r| *r > 0.0 && *r < r_max)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let mut edges = vec![0.0];
    for &c in cuts.iter().chain(std::iter::once(&r_max)) {
        let mut a = *edges.last().unwrap();
        while c - a > a.max(PANEL_WIDTH_FLOOR) * (1.0 + 1e-12) {
            a += a.max(PANEL_WIDTH_FLOOR);
            edges.push(a);
        }
        edges.push(c);
    }
    Ok(build_from_edges(&edges, n_r, n_theta))
}

fn build_from_edges(edges: &[f64], n_r: usize, n_theta: usize) -> VelocityQuadrature {
    let mut r_nodes = Vec::new();
    let mut r_weights = Vec::new();
    for w in edges.windows(2) {
        let (x, wt) = gauss_legendre_on(n_r, w[0], w[1]);
        r_nodes.extend(x);
        r_weights.extend(wt);
    }
    let dtheta = 2.0 * PI / n_theta as f64;
    let theta_nodes: Vec<f64> = (0..n_theta).map(|j| dtheta * (j as f64 + 0.5)).collect();
    let theta_weights = vec![dtheta; n_theta];

    let mut nodes = Vec::with_capacity(r_nodes.len() * n_theta);
    for (ir, (&r, &wr)) in r_nodes.iter().zip(&r_weights).enumerate() {
        let e = (1.0 + r * r).sqrt();
        for (it, (&th, &wt)) in theta_nodes.iter().zip(&theta_weights).enumerate() {
            let (s, c) = th.sin_cos();
            let v1 = r * c;
            let v2 = r * s;
            nodes.push(VelocityNode {
                v1,
                v2,
                r,
                theta: th,
                e,
                vh1: v1 / e,
                vh2: v2 / e,
                weight: wr * wt * r,
                ir,
                it,
            });
        }
    }
    VelocityQuadrature {
        r_nodes,
        r_weights,
        theta_nodes,
        theta_weights,
        r_max: *edges.last().unwrap(),
        panel_edges: edges.to_vec(),
        n_r_per_panel: n_r,
        nodes,
    }
}

/// Pairwise summation in fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `∫ f dv` over the rule, summed pairwise in node order.
pub fn integrate_velocity<F>(quad: &VelocityQuadrature, f: F) -> Result<f64>
where
    F: Fn(&VelocityNode) -> f64,
{
    let mut terms = Vec::with_capacity(quad.len());
    for node in quad.nodes() {
        let value = f(node);
        if !value.is_finite() {
            return Err(Error::NonFiniteIntegrand { v1: node.v1, v2: node.v2 });
        }
        terms.push(value * node.weight);
    }
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_area() {
        let q = build_with_radius(1.0, &[], 16, 32).unwrap();
        let area = integrate_velocity(&q, |_| 1.0).unwrap();
        assert!((area - PI).abs() < 1e-10);
    }

    #[test]
    fn constant_reproduces_disk_area_at_r_max() {
        let w = WeightSpec::new(1.0, 4.0).unwrap();
        let q = build_velocity_quadrature(&w, &[2.0], 1e-8, 24, 16).unwrap();
        let area = integrate_velocity(&q, |_| 1.0).unwrap();
        let exact = PI * q.r_max * q.r_max;
        assert!((area - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn kink_radius_is_a_panel_edge() {
        let w = WeightSpec::new(1.0, 20.0).unwrap();
        let q = build_velocity_quadrature(&w, &[2.0], 1e-12, 8, 8).unwrap();
        let r3 = 3f64.sqrt();
        assert!(q.panel_edges.iter().any(|e| (e - r3).abs() < 1e-15));
    }

    #[test]
    fn odd_integrands_vanish() {
        let w = WeightSpec::new(1.0, 6.0).unwrap();
        let q = build_velocity_quadrature(&w, &[], 1e-10, 16, 32).unwrap();
        let f1 = integrate_velocity(&q, |n| n.v1 * (-n.e).exp() * (1.0 + n.v2 * n.v2)).unwrap();
        let f2 = integrate_velocity(&q, |n| n.v2.powi(3) * (-n.e).exp()).unwrap();
        assert!(f1.abs() < 1e-12 && f2.abs() < 1e-12);
    }

    #[test]
    fn mirrors_map_nodes() {
        let q = build_with_radius(2.0, &[], 3, 8).unwrap();
        for i in 0..q.len() {
            let a = q.nodes()[i];
            let b = q.nodes()[q.mirror_v2(i)];
            let c = q.nodes()[q.mirror_v1(i)];
            assert!((a.v1 - b.v1).abs() < 1e-14 && (a.v2 + b.v2).abs() < 1e-14);
            assert!((a.v1 + c.v1).abs() < 1e-14 && (a.v2 - c.v2).abs() < 1e-14);
        }
    }

    #[test]
    fn long_tail_gets_geometric_panels() {
        let q = build_with_radius(1000.0, &[], 4, 4).unwrap();
        for w in q.panel_edges.windows(2) {
            assert!(w[1] - w[0] <= w[0].max(PANEL_WIDTH_FLOOR) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_with_radius(1.0, &[], 4, 7).is_err());
        let w = WeightSpec { c: 1.0, alpha: 2.0 };
        assert!(matches!(
            build_velocity_quadrature(&w, &[], 1e-8, 4, 4),
            Err(Error::NonIntegrableWeight { .. })
        ));
    }
}
