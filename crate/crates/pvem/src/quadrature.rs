//! Gauss-Legendre and Gauss-Lobatto rules, edge rules through the edge
//! parametrization, and area rules on (curved) polygons.

use thiserror::Error;

use crate::mesh_geometry::{Edge, Element, Point2};

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("Gauss-Lobatto rules need at least 2 points, got {0}")]
    TooFewPoints(usize),
}

/// One-dimensional rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1D {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    /// Affine map from [-1, 1] to [0, 1].
    pub fn to_unit(&self) -> Rule1D {
        Rule1D {
            points: self.points.iter().map(|&x| 0.5 * (x + 1.0)).collect(),
            weights: self.weights.iter().map(|&w| 0.5 * w).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Legendre polynomial and its first two derivatives at `x`.
pub fn legendre(n: usize, x: f64) -> (f64, f64, f64) {
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    let (mut s0, mut s1) = (0.0, 0.0);
    for m in 1..n {
        let mf = m as f64;
        let p2 = ((2.0 * mf + 1.0) * x * p1 - mf * p0) / (mf + 1.0);
        let d2 = d0 + (2.0 * mf + 1.0) * p1;
        let s2 = s0 + (2.0 * mf + 1.0) * d1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
        s0 = s1;
        s1 = s2;
    }
    (p1, d1, s1)
}

/// Number of Gauss-Legendre points needed to integrate degree `exactness` exactly.
pub fn points_for_exactness(exactness: usize) -> usize {
    exactness / 2 + 1
}

/// `n`-point Gauss-Legendre rule on [-1, 1] (exact to degree 2n-1).
pub fn gauss_legendre(n: usize) -> Rule1D {
    assert!(n >= 1);
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d, _) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d, _) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    Rule1D { points, weights }
}

/// `n`-point Gauss-Lobatto rule on [-1, 1], endpoints included, exact to degree 2n-3.
pub fn gauss_lobatto(n: usize) -> Result<Rule1D, QuadratureError> {
    if n < 2 {
        return Err(QuadratureError::TooFewPoints(n));
    }
    let m = n - 1;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let end_w = 2.0 / (n * m) as f64;
    points[0] = -1.0;
    points[m] = 1.0;
    weights[0] = end_w;
    weights[m] = end_w;
    for i in 1..(n + 1) / 2 {
        // interior nodes are the roots of P'_{n-1}
        let mut x = -(std::f64::consts::PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (_, d, s) = legendre(m, x);
            let dx = d / s;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, _, _) = legendre(m, x);
        let w = end_w / (p * p);
        points[i] = x;
        points[m - i] = -x;
        weights[i] = w;
        weights[m - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
        let (p, _, _) = legendre(m, 0.0);
        weights[n / 2] = end_w / (p * p);
    }
    Ok(Rule1D { points, weights })
}

/// Gauss-Lobatto nodes of an order-`k` edge on [0, 1] (`k + 1` nodes).
pub fn lobatto_nodes_unit(k: usize) -> Vec<f64> {
    if k == 0 {
        return vec![0.0];
    }
    let r = gauss_lobatto(k + 1).expect("k >= 1");
    r.points.iter().map(|&x| 0.5 * (x + 1.0)).collect()
}

/// Two-dimensional rule in physical coordinates.
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadRule {
    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rule on an edge: `weights` integrate against arc length, `normals` hold
/// the outward normal times the arc-length weight.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub params: Vec<f64>,
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point2>,
    pub exactness: usize,
}

impl EdgeRule {
    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Gauss-Legendre on [0, 1] pushed through the edge parametrization, with
/// `‖γ'(t)‖` folded into the weights. Exactness refers to the parametric integrand.
pub fn edge_rule(edge: &Edge, exactness: usize) -> EdgeRule {
    let rule = gauss_legendre(points_for_exactness(exactness)).to_unit();
    let mut out = EdgeRule {
        params: rule.points.clone(),
        points: Vec::with_capacity(rule.len()),
        weights: Vec::with_capacity(rule.len()),
        normals: Vec::with_capacity(rule.len()),
        exactness,
    };
    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
        let d = edge.tangent(t);
        out.points.push(edge.point(t));
        out.weights.push(w * d.norm());
        out.normals.push(Point2::new(d.y, -d.x) * w);
    }
    out
}

/// Rule exact for polynomials of total degree `exactness` on the element.
///
/// Each edge spawns the sector `c + s (γ(t) - c)`, `s, t ∈ [0, 1]`, from the
/// centroid `c`; the map is polynomial in `(s, t)` so a tensor Gauss rule is
/// exact. Straight polygons that are not star-shaped with respect to the
/// centroid are ear-clipped and each triangle is treated as a sector of its
/// first vertex.
pub fn element_rule(element: &Element, exactness: usize) -> QuadRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let c = element.centroid;
    let star = element.is_curved()
        || element
            .edges
            .iter()
            .all(|e| (e.start - c).cross(e.end - c) > 0.0);
    if star {
        for e in &element.edges {
            sector(c, e, exactness, &mut points, &mut weights);
        }
    } else {
        for [a, b, d] in ear_clip(&element.vertices()) {
            sector(
                a,
                &Edge::straight(b, d),
                exactness,
                &mut points,
                &mut weights,
            );
        }
    }
    QuadRule {
        points,
        weights,
        exactness,
    }
}

fn sector(apex: Point2, edge: &Edge, q: usize, points: &mut Vec<Point2>, weights: &mut Vec<f64>) {
    let nb = edge.degree();
    let t_deg = if nb == 1 { q } else { nb * q + 2 * nb - 1 };
    let rt = gauss_legendre(points_for_exactness(t_deg)).to_unit();
    let rs = gauss_legendre(points_for_exactness(q + 1)).to_unit();
    for (&t, &wt) in rt.points.iter().zip(&rt.weights) {
        let g = edge.point(t);
        let jac = (g - apex).cross(edge.tangent(t));
        for (&s, &ws) in rs.points.iter().zip(&rs.weights) {
            points.push(apex + (g - apex) * s);
            weights.push(wt * ws * s * jac);
        }
    }
}

/// Ear-clipping triangulation of a simple counterclockwise polygon.
pub fn ear_clip(poly: &[Point2]) -> Vec<[Point2; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::new();
    let inside = |p: Point2, a: Point2, b: Point2, c: Point2| {
        (b - a).cross(p - a) >= 0.0 && (c - b).cross(p - b) >= 0.0 && (a - c).cross(p - c) >= 0.0
    };
    let mut guard = 0;
    while idx.len() > 3 && guard < 10 * poly.len() * poly.len() {
        guard += 1;
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ia, ib, ic) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if (b - a).cross(c - b) <= 0.0 {
                continue;
            }
            let blocked = idx
                .iter()
                .filter(|&&j| j != ia && j != ib && j != ic)
                .any(|&j| inside(poly[j], a, b, c));
            if !blocked {
                tris.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        tris.push([poly[idx[0]], poly[idx[1]], poly[idx[2]]]);
    }
    tris
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobatto_small_rules() {
        let r = gauss_lobatto(2).unwrap();
        assert_eq!(r.points, vec![-1.0, 1.0]);
        assert_eq!(r.weights, vec![1.0, 1.0]);
        let r = gauss_lobatto(3).unwrap();
        assert_eq!(r.points, vec![-1.0, 0.0, 1.0]);
        for (w, e) in r.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert!((w - e).abs() < 1e-15);
        }
        assert_eq!(gauss_lobatto(1), Err(QuadratureError::TooFewPoints(1)));
    }

    #[test]
    fn lobatto_exactness_boundary() {
        let r = gauss_lobatto(5).unwrap();
        // exact to degree 7 = 2n-3; x^8 is the first even power it misses
        for p in 0..=7 {
            let exact = if p % 2 == 0 {
                2.0 / (p + 1) as f64
            } else {
                0.0
            };
            assert!(
                (r.integrate(|x| x.powi(p)) - exact).abs() < 1e-14,
                "degree {p}"
            );
        }
        assert!((r.integrate(|x| x.powi(8)) - 2.0 / 9.0).abs() > 1e-6);
        let r4 = gauss_lobatto(4).unwrap();
        assert!((r4.integrate(|x| x.powi(4)) - 0.4).abs() < 1e-14);
        assert!((r4.integrate(|x| x.powi(6)) - 2.0 / 7.0).abs() > 1e-6);
    }

    #[test]
    fn legendre_exactness() {
        for n in 1..30 {
            let r = gauss_legendre(n);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for p in 0..2 * n {
                let exact = if p % 2 == 0 {
                    2.0 / (p + 1) as f64
                } else {
                    0.0
                };
                let got = r.integrate(|x| x.powi(p as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} p={p}: {got}");
            }
        }
    }

    #[test]
    fn unit_square_rule() {
        let sq = Element::polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]);
        let r = element_rule(&sq, 6);
        assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        let m = r.integrate(|p| p.x.powi(3) * p.y.powi(3));
        assert!((m - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn ear_clipping_handles_reflex_vertices() {
        let poly = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(1.0, 0.5),
            Point2::new(0.0, 2.0),
        ];
        let tris = ear_clip(&poly);
        assert_eq!(tris.len(), 3);
        let area: f64 = tris
            .iter()
            .map(|[a, b, c]| 0.5 * (*b - *a).cross(*c - *a))
            .sum();
        assert!((area - 2.5).abs() < 1e-14);
        let el = Element::polygon(&poly);
        let rule = element_rule(&el, 4);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!((rule.integrate(|_| 1.0) - 2.5).abs() < 1e-13);
    }
}
