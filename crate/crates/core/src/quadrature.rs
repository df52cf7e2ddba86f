//! Gauss rules on edges and centroid-fan rules on polygons.
//!
//! Edge rules live on the dimensionless arc coordinate `s ∈ [-1/2, 1/2]` with
//! weights summing to one; callers scale by the edge length. Polygon rules are
//! built by splitting the polygon into triangles that share the centroid and
//! applying a symmetric triangle rule on each.

use std::f64::consts::PI;

use crate::Point2;

/// Default degree used for loads, boundary data and error norms.
pub const DEFAULT_DEGREE: usize = 6;

/// Gauss–Legendre rule on `[-1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    /// Integrates `f(s)` over `[-1/2, 1/2]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * f(s)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule exact for polynomials of degree `degree` in `s`,
/// using `⌈(degree + 1) / 2⌉` nodes.
pub fn edge_rule(degree: usize) -> EdgeRule {
    let m = (degree + 2) / 2;
    let (nodes, weights) = gauss_legendre(m);
    EdgeRule {
        nodes: nodes.iter().map(|x| 0.5 * x).collect(),
        weights: weights.iter().map(|w| 0.5 * w).collect(),
        degree,
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_m`.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_m(x), P_m'(x))`.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Rule on the reference triangle: barycentric points and weights summing to one.
#[derive(Debug, Clone)]
struct TriangleRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl TriangleRule {
    fn push_orbit(&mut self, a: f64, b: f64, c: f64, w: f64) {
        let mut seen: Vec<[f64; 3]> = Vec::new();
        for p in [[a, b, c], [b, c, a], [c, a, b], [a, c, b], [c, b, a], [b, a, c]] {
            if !seen.contains(&p) {
                seen.push(p);
            }
        }
        for p in seen {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

// Symmetric rules with positive weights (Strang–Fix / Dunavant).
fn triangle_rule(degree: usize) -> TriangleRule {
    let mut rule = TriangleRule { points: Vec::new(), weights: Vec::new() };
    match degree {
        0 | 1 => {
            rule.push_orbit(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0);
        }
        2 => {
            rule.push_orbit(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0);
        }
        3 | 4 => {
            let a = 0.445_948_490_915_965;
            let b = 0.091_576_213_509_771;
            rule.push_orbit(a, a, 1.0 - 2.0 * a, 0.223_381_589_678_011);
            rule.push_orbit(b, b, 1.0 - 2.0 * b, 0.109_951_743_655_322);
        }
        5 => {
            let a = 0.470_142_064_105_115;
            let b = 0.101_286_507_323_456;
            rule.push_orbit(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225);
            rule.push_orbit(a, a, 1.0 - 2.0 * a, 0.132_394_152_788_506);
            rule.push_orbit(b, b, 1.0 - 2.0 * b, 0.125_939_180_544_827);
        }
        6 => {
            let a = 0.249_286_745_170_910;
            let b = 0.063_089_014_491_502;
            let c = 0.053_145_049_844_817;
            let d = 0.310_352_451_033_784;
            rule.push_orbit(a, a, 1.0 - 2.0 * a, 0.116_786_275_726_379);
            rule.push_orbit(b, b, 1.0 - 2.0 * b, 0.050_844_906_370_207);
            rule.push_orbit(c, d, 1.0 - c - d, 0.082_851_075_618_374);
        }
        _ => return collapsed_rule(degree),
    }
    rule
}

/// Conical-product rule for degrees without a tabulated symmetric rule.
fn collapsed_rule(degree: usize) -> TriangleRule {
    let m = (degree + 3) / 2;
    let (x, w) = gauss_legendre(m);
    let mut rule = TriangleRule { points: Vec::new(), weights: Vec::new() };
    for i in 0..m {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..m {
            let v = 0.5 * (x[j] + 1.0);
            // (u, v) in the unit square mapped to the triangle, Jacobian (1 - u)
            let l1 = u;
            let l2 = (1.0 - u) * v;
            rule.points.push([1.0 - l1 - l2, l1, l2]);
            rule.weights.push(0.5 * w[i] * 0.5 * w[j] * (1.0 - u) * 2.0);
        }
    }
    rule
}

/// Quadrature points and weights on a polygon.
#[derive(Debug, Clone)]
pub struct PolygonRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl PolygonRule {
    pub fn integrate<T, F>(&self, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(Point2) -> T,
    {
        let mut acc = T::default();
        for (p, &w) in self.points.iter().zip(&self.weights) {
            acc = acc + f(*p) * w;
        }
        acc
    }
}

/// Centroid-fan rule on a counterclockwise polygon.
///
/// Fan triangles with area below `1e-14 |E|` are skipped.
pub fn polygon_rule(vertices: &[Point2], centroid: Point2, degree: usize) -> PolygonRule {
    let tri = triangle_rule(degree);
    let n = vertices.len();
    let fan: Vec<(Point2, Point2, f64)> = (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let area = 0.5 * cross(a - centroid, b - centroid);
            (a, b, area)
        })
        .collect();
    let total: f64 = fan.iter().map(|t| t.2).sum();
    let mut points = Vec::with_capacity(n * tri.points.len());
    let mut weights = Vec::with_capacity(n * tri.points.len());
    for (a, b, area) in fan {
        if area < 1e-14 * total.abs() {
            continue;
        }
        for (bary, w) in tri.points.iter().zip(&tri.weights) {
            points.push(centroid * bary[0] + a * bary[1] + b * bary[2]);
            weights.push(w * area);
        }
    }
    PolygonRule { points, weights, degree }
}

pub(crate) fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}
