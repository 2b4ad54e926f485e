//! Independent oracles shared by the integration tests. Nothing here calls the
//! crate's quadrature, basis or projector code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2};
use pvem::mesh_geometry::{Edge, Element, Point2};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration with absolute tolerance `tol`.
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, e) = gk15(f, a, b);
        if e <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(f, a, b, tol, 40)
}

/// Bernstein-form evaluation of an edge, independent of the crate's de Casteljau.
pub fn edge_point(e: &Edge, t: f64) -> (Point2, Point2) {
    match &e.curve {
        None => (e.start.lerp(e.end, t), e.end - e.start),
        Some(c) => {
            let cp = &c.control_points;
            let n = cp.len() - 1;
            let binom = |n: usize, i: usize| -> f64 {
                (0..i).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
            };
            let bern = |n: usize, i: usize, t: f64| {
                binom(n, i) * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32)
            };
            let mut p = Point2::new(0.0, 0.0);
            let mut d = Point2::new(0.0, 0.0);
            for i in 0..=n {
                let b = bern(n, i, t);
                p = p + cp[i] * b;
                if i < n {
                    let db = bern(n - 1, i, t) * n as f64;
                    d = d + (cp[i + 1] - cp[i]) * db;
                }
            }
            (p, d)
        }
    }
}

/// `∫_E f` by sectors from the vertex mean, each integrated by nested adaptive quadrature.
pub fn area_integral(el: &Element, f: &dyn Fn(Point2) -> f64, tol: f64) -> f64 {
    let vs = el.vertices();
    let apex = vs.iter().fold(Point2::new(0.0, 0.0), |a, &p| a + p) * (1.0 / vs.len() as f64);
    el.edges
        .iter()
        .map(|e| {
            let outer = |t: f64| {
                let (g, dg) = edge_point(e, t);
                let jac = (g - apex).cross(dg);
                let inner = |s: f64| f(apex + (g - apex) * s) * s;
                jac * adaptive(&inner, 0.0, 1.0, tol * 0.1)
            };
            adaptive(&outer, 0.0, 1.0, tol)
        })
        .sum()
}

/// Gauss–Legendre nodes and weights on `[0, 1]` by Newton iteration.
pub fn gauss01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x.push(0.5 * (1.0 - z));
        w.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (x, w)
}

/// Collapsed tensor rule on each fan triangle of a straight polygon.
pub fn polygon_rule(poly: &[Point2], n: usize) -> (Vec<Point2>, Vec<f64>) {
    let (x, w) = gauss01(n);
    let c = poly.iter().fold(Point2::new(0.0, 0.0), |a, &p| a + p) * (1.0 / poly.len() as f64);
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let area2 = (a - c).cross(b - c);
        for (&u, &wu) in x.iter().zip(&w) {
            for (&v, &wv) in x.iter().zip(&w) {
                pts.push(c + (a - c) * u + (b - c) * (v * (1.0 - u)));
                wts.push(wu * wv * (1.0 - u) * area2);
            }
        }
    }
    (pts, wts)
}

/// Relative error of the best `P_k` approximation of a flux in the
/// `A`-weighted gradient seminorm, summed over straight polygons.
/// `grad` returns the exact gradient of each field component.
pub fn best_gradient_error(
    polys: &[Vec<Point2>],
    k: usize,
    ncomp: usize,
    grad: &dyn Fn(Point2, usize) -> [f64; 2],
    weight: &dyn Fn(Point2) -> Matrix2<f64>,
) -> f64 {
    let exps: Vec<(i32, i32)> = (1..=k as i32)
        .flat_map(|d| (0..=d).map(move |a| (a, d - a)))
        .collect();
    let mut err = 0.0_f64;
    let mut norm = 0.0_f64;
    for poly in polys {
        let (pts, wts) = polygon_rule(poly, k + 14);
        let c = poly.iter().fold(Point2::new(0.0, 0.0), |a, &p| a + p) * (1.0 / poly.len() as f64);
        let h = poly
            .iter()
            .flat_map(|a| poly.iter().map(move |b| a.dist(*b)))
            .fold(0.0_f64, f64::max);
        for comp in 0..ncomp {
            let n = exps.len();
            let mut g = DMatrix::<f64>::zeros(n, n);
            let mut r = DVector::<f64>::zeros(n);
            let mut uu = 0.0;
            for (p, &w) in pts.iter().zip(&wts) {
                let (x, y) = ((p.x - c.x) / h, (p.y - c.y) / h);
                let grads: Vec<[f64; 2]> = exps
                    .iter()
                    .map(|&(a, b)| {
                        let gx = if a > 0 {
                            a as f64 * x.powi(a - 1) * y.powi(b) / h
                        } else {
                            0.0
                        };
                        let gy = if b > 0 {
                            b as f64 * x.powi(a) * y.powi(b - 1) / h
                        } else {
                            0.0
                        };
                        [gx, gy]
                    })
                    .collect();
                let aw = weight(*p);
                let ip = |u: [f64; 2], v: [f64; 2]| {
                    u[0] * (aw[(0, 0)] * v[0] + aw[(0, 1)] * v[1])
                        + u[1] * (aw[(1, 0)] * v[0] + aw[(1, 1)] * v[1])
                };
                let ex = grad(*p, comp);
                for i in 0..n {
                    r[i] += w * ip(grads[i], ex);
                    for j in 0..n {
                        g[(i, j)] += w * ip(grads[i], grads[j]);
                    }
                }
                uu += w * ip(ex, ex);
            }
            let coef = g
                .clone()
                .svd(true, true)
                .solve(&r, 1e-14)
                .expect("svd solve");
            err += uu - r.dot(&coef);
            norm += uu;
        }
    }
    (err.max(0.0) / norm).sqrt()
}

/// Cells of the Voronoi diagram of `seeds` clipped to the unit square, counterclockwise.
pub fn voronoi_cells(seeds: &[Point2]) -> Vec<Vec<Point2>> {
    seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut cell = vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ];
            for (j, &o) in seeds.iter().enumerate() {
                if i == j {
                    continue;
                }
                // keep points closer to s than to o: (p - m)·(o - s) <= 0
                let m = (s + o) * 0.5;
                let nrm = o - s;
                let side = |p: Point2| (p - m).dot(nrm);
                let mut out = Vec::new();
                for a in 0..cell.len() {
                    let (p, q) = (cell[a], cell[(a + 1) % cell.len()]);
                    let (sp, sq) = (side(p), side(q));
                    if sp <= 0.0 {
                        out.push(p);
                    }
                    if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
                        out.push(p.lerp(q, sp / (sp - sq)));
                    }
                }
                cell = out;
            }
            cell
        })
        .collect()
}

/// Local `k = 1` Laplace stiffness on the unit square with identity stabilization
/// and `τ = 1`, derived by hand: consistency `¼ sᵢ·sⱼ` with corner sign vectors
/// `s`, stabilization `¼ hᵢhⱼ` with the checkerboard vector `h`.
pub fn unit_square_k1_stiffness() -> (DMatrix<f64>, DMatrix<f64>) {
    let s = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let h = [1.0, -1.0, 1.0, -1.0];
    let kc = DMatrix::from_fn(4, 4, |i, j| 0.25 * (s[i][0] * s[j][0] + s[i][1] * s[j][1]));
    let ks = DMatrix::from_fn(4, 4, |i, j| 0.25 * h[i] * h[j]);
    (kc, ks)
}
