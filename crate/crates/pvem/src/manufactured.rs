//! Manufactured solutions on the unit square and their source terms.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::assembly::FormWeight;
use crate::mesh_geometry::{Mesh, Point2};
use crate::projectors::Problem;

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet {
    fn product(a: [f64; 3], b: [f64; 3]) -> Jet {
        Jet {
            v: a[0] * b[0],
            dx: a[1] * b[0],
            dy: a[0] * b[1],
            dxx: a[2] * b[0],
            dxy: a[1] * b[1],
            dyy: a[0] * b[2],
        }
    }

    fn scaled(self, s: f64) -> Jet {
        Jet {
            v: s * self.v,
            dx: s * self.dx,
            dy: s * self.dy,
            dxx: s * self.dxx,
            dxy: s * self.dxy,
            dyy: s * self.dyy,
        }
    }
}

pub type JetFn = Arc<dyn Fn(Point2) -> Jet + Send + Sync>;

/// Bivariate polynomial `Σ c_ij xⁱ yʲ`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly2 {
    pub terms: BTreeMap<(usize, usize), f64>,
}

impl Poly2 {
    pub fn new(terms: impl IntoIterator<Item = ((usize, usize), f64)>) -> Self {
        let mut p = Poly2::default();
        for (e, c) in terms {
            *p.terms.entry(e).or_insert(0.0) += c;
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, &c)| c != 0.0)
            .map(|(&(i, j), _)| i + j)
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, p: Point2) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), &c)| c * p.x.powi(i as i32) * p.y.powi(j as i32))
            .sum()
    }

    pub fn dx(&self) -> Poly2 {
        Poly2::new(
            self.terms
                .iter()
                .filter(|(&(i, _), _)| i > 0)
                .map(|(&(i, j), &c)| ((i - 1, j), c * i as f64)),
        )
    }

    pub fn dy(&self) -> Poly2 {
        Poly2::new(
            self.terms
                .iter()
                .filter(|(&(_, j), _)| j > 0)
                .map(|(&(i, j), &c)| ((i, j - 1), c * j as f64)),
        )
    }

    /// Mean over the unit square.
    pub fn mean_unit_square(&self) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), &c)| c / ((i + 1) * (j + 1)) as f64)
            .sum()
    }

    pub fn jet(&self, p: Point2) -> Jet {
        let (dx, dy) = (self.dx(), self.dy());
        Jet {
            v: self.eval(p),
            dx: dx.eval(p),
            dy: dy.eval(p),
            dxx: dx.dx().eval(p),
            dxy: dx.dy().eval(p),
            dyy: dy.dy().eval(p),
        }
    }

    pub fn into_jet_fn(self) -> JetFn {
        let (dx, dy) = (self.dx(), self.dy());
        let (dxx, dxy, dyy) = (dx.dx(), dx.dy(), dy.dy());
        Arc::new(move |p| Jet {
            v: self.eval(p),
            dx: dx.eval(p),
            dy: dy.eval(p),
            dxx: dxx.eval(p),
            dxy: dxy.eval(p),
            dyy: dyy.eval(p),
        })
    }

    /// Deterministic dense polynomial of the given degree; `seed` varies the coefficients.
    pub fn sample(degree: usize, seed: usize) -> Poly2 {
        let mut terms = Vec::new();
        for d in 0..=degree {
            for j in 0..=d {
                let i = d - j;
                let c = (((i * 7 + j * 3 + seed * 5) % 11) as f64 - 5.0) / 5.0 + 0.3;
                terms.push(((i, j), c / (1 + i + j) as f64));
            }
        }
        Poly2::new(terms)
    }
}

/// Exact solution of one of the model problems.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub problem: Problem,
    /// One jet per field component.
    pub u: Vec<JetFn>,
    pub p: Option<JetFn>,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("problem", &self.problem)
            .finish()
    }
}

fn sin_jet(x: f64) -> [f64; 3] {
    [
        (PI * x).sin(),
        PI * (PI * x).cos(),
        -PI * PI * (PI * x).sin(),
    ]
}

fn cos_jet(x: f64) -> [f64; 3] {
    [
        (PI * x).cos(),
        -PI * (PI * x).sin(),
        -PI * PI * (PI * x).cos(),
    ]
}

/// `sin²(πx)` and its derivatives.
fn sin2_jet(x: f64) -> [f64; 3] {
    [
        (PI * x).sin().powi(2),
        PI * (2.0 * PI * x).sin(),
        2.0 * PI * PI * (2.0 * PI * x).cos(),
    ]
}

/// `sin(πy)cos(πy)` and its derivatives.
fn sincos_jet(y: f64) -> [f64; 3] {
    [
        0.5 * (2.0 * PI * y).sin(),
        PI * (2.0 * PI * y).cos(),
        -2.0 * PI * PI * (2.0 * PI * y).sin(),
    ]
}

impl ManufacturedCase {
    /// Smooth solutions vanishing on the boundary of the unit square.
    pub fn sine(problem: Problem) -> Self {
        let s: JetFn = Arc::new(|p: Point2| Jet::product(sin_jet(p.x), sin_jet(p.y)));
        match problem {
            Problem::Laplace => ManufacturedCase {
                name: "sine".into(),
                problem,
                u: vec![s],
                p: None,
            },
            Problem::Elasticity => ManufacturedCase {
                name: "sine".into(),
                problem,
                u: vec![s.clone(), s],
                p: None,
            },
            Problem::Stokes => {
                let u0: JetFn = Arc::new(|p: Point2| Jet::product(sin2_jet(p.x), sincos_jet(p.y)));
                let u1: JetFn =
                    Arc::new(|p: Point2| Jet::product(sincos_jet(p.x), sin2_jet(p.y)).scaled(-1.0));
                let pr: JetFn = Arc::new(|p: Point2| Jet::product(sin_jet(p.x), cos_jet(p.y)));
                ManufacturedCase {
                    name: "sine".into(),
                    problem,
                    u: vec![u0, u1],
                    p: Some(pr),
                }
            }
        }
    }

    /// Polynomial fields of degree `degree`; for Stokes a divergence-free
    /// velocity of that degree and a zero-mean pressure of degree `pressure_degree`.
    pub fn polynomial(problem: Problem, degree: usize, pressure_degree: usize) -> Self {
        match problem {
            Problem::Laplace => ManufacturedCase {
                name: format!("poly{degree}"),
                problem,
                u: vec![Poly2::sample(degree, 0).into_jet_fn()],
                p: None,
            },
            Problem::Elasticity => ManufacturedCase {
                name: format!("poly{degree}"),
                problem,
                u: vec![
                    Poly2::sample(degree, 0).into_jet_fn(),
                    Poly2::sample(degree, 1).into_jet_fn(),
                ],
                p: None,
            },
            Problem::Stokes => {
                let psi = Poly2::sample(degree + 1, 2);
                let u0 = psi.dy();
                let u1 = Poly2::new(psi.dx().terms.into_iter().map(|(e, c)| (e, -c)));
                let mut pr = Poly2::sample(pressure_degree, 3);
                let mean = pr.mean_unit_square();
                *pr.terms.entry((0, 0)).or_insert(0.0) -= mean;
                ManufacturedCase {
                    name: format!("poly{degree}"),
                    problem,
                    u: vec![u0.into_jet_fn(), u1.into_jet_fn()],
                    p: Some(pr.into_jet_fn()),
                }
            }
        }
    }

    /// Polynomial case reproduced exactly by order `k` on `mesh`: the degree is
    /// reduced on meshes with curved edges so that traces stay polynomial in
    /// the edge parameter.
    pub fn patch(problem: Problem, mesh: &Mesh, k: usize) -> Self {
        let nb = mesh
            .elements
            .iter()
            .flat_map(|e| e.edges.iter().map(|ed| ed.degree()))
            .max()
            .unwrap_or(1)
            .max(1);
        ManufacturedCase::polynomial(problem, k / nb, k - 1)
    }

    pub fn value(&self, p: Point2) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, u) in self.u.iter().enumerate() {
            out[c] = u(p).v;
        }
        out
    }

    pub fn jets(&self, p: Point2) -> Vec<Jet> {
        self.u.iter().map(|u| u(p)).collect()
    }

    pub fn pressure(&self, p: Point2) -> Option<f64> {
        self.p.as_ref().map(|f| f(p).v)
    }

    /// Flux `D u` (gradient, Voigt strain, or velocity gradient).
    pub fn flux(&self, p: Point2) -> Vec<f64> {
        let ph = self.problem.physics();
        let j = self.jets(p);
        (0..ph.nd)
            .map(|d| {
                (0..ph.nf)
                    .map(|f| ph.ax[(f, d)] * j[f].dx + ph.ay[(f, d)] * j[f].dy)
                    .sum()
            })
            .collect()
    }

    /// Source `-div(W D u) (+ ∇p)` for the weight of the bilinear form.
    pub fn source(&self, p: Point2, weight: &FormWeight) -> [f64; 2] {
        let ph = self.problem.physics();
        let j = self.jets(p);
        let [w, wx, wy] = weight.at(p);
        let nd = ph.nd;
        let flux = |sel: usize| -> Vec<f64> {
            (0..nd)
                .map(|d| {
                    (0..ph.nf)
                        .map(|f| {
                            let (a, b) = (ph.ax[(f, d)], ph.ay[(f, d)]);
                            match sel {
                                0 => a * j[f].dx + b * j[f].dy,
                                1 => a * j[f].dxx + b * j[f].dxy,
                                _ => a * j[f].dxy + b * j[f].dyy,
                            }
                        })
                        .sum()
                })
                .collect()
        };
        let (g, gx, gy) = (flux(0), flux(1), flux(2));
        let mul = |m: &DMatrix<f64>, v: &[f64]| -> Vec<f64> {
            (0..nd)
                .map(|c| (0..nd).map(|d| m[(c, d)] * v[d]).sum())
                .collect()
        };
        let (wxg, wgx, wyg, wgy) = (mul(&wx, &g), mul(&w, &gx), mul(&wy, &g), mul(&w, &gy));
        let mut out = [0.0; 2];
        for (f, o) in out.iter_mut().enumerate().take(ph.nf) {
            let mut div = 0.0;
            for c in 0..nd {
                div += ph.ax[(f, c)] * (wxg[c] + wgx[c]) + ph.ay[(f, c)] * (wyg[c] + wgy[c]);
            }
            *o = -div;
        }
        if let Some(pf) = &self.p {
            let pj = pf(p);
            out[0] += pj.dx;
            out[1] += pj.dy;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &JetFn, p: Point2) {
        let h = 1e-5;
        let j = f(p);
        let e = |dx: f64, dy: f64| f(Point2::new(p.x + dx, p.y + dy));
        assert!(((e(h, 0.0).v - e(-h, 0.0).v) / (2.0 * h) - j.dx).abs() < 1e-6);
        assert!(((e(0.0, h).v - e(0.0, -h).v) / (2.0 * h) - j.dy).abs() < 1e-6);
        assert!(((e(h, 0.0).dx - e(-h, 0.0).dx) / (2.0 * h) - j.dxx).abs() < 1e-5);
        assert!(((e(0.0, h).dx - e(0.0, -h).dx) / (2.0 * h) - j.dxy).abs() < 1e-5);
        assert!(((e(0.0, h).dy - e(0.0, -h).dy) / (2.0 * h) - j.dyy).abs() < 1e-5);
    }

    #[test]
    fn jets_match_finite_differences() {
        let p = Point2::new(0.3, 0.7);
        for problem in [Problem::Laplace, Problem::Elasticity, Problem::Stokes] {
            for case in [
                ManufacturedCase::sine(problem),
                ManufacturedCase::polynomial(problem, 4, 3),
            ] {
                for u in &case.u {
                    fd_check(u, p);
                }
                if let Some(pr) = &case.p {
                    fd_check(pr, p);
                }
            }
        }
    }

    #[test]
    fn stokes_cases_are_divergence_free_with_zero_mean_pressure() {
        for case in [
            ManufacturedCase::sine(Problem::Stokes),
            ManufacturedCase::polynomial(Problem::Stokes, 5, 4),
        ] {
            for &(x, y) in &[(0.1, 0.2), (0.5, 0.9), (0.77, 0.33)] {
                let j = case.jets(Point2::new(x, y));
                assert!((j[0].dx + j[1].dy).abs() < 1e-12);
            }
            // midpoint rule on a fine grid
            let n = 400;
            let mut mean = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let p = Point2::new((a as f64 + 0.5) / n as f64, (b as f64 + 0.5) / n as f64);
                    mean += case.pressure(p).unwrap();
                }
            }
            assert!((mean / (n * n) as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn laplace_source_is_minus_laplacian() {
        let case = ManufacturedCase::sine(Problem::Laplace);
        let p = Point2::new(0.2, 0.6);
        let f = case.source(p, &FormWeight::Constant(DMatrix::identity(2, 2)));
        let want = 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin();
        assert!((f[0] - want).abs() < 1e-12);
    }

    #[test]
    fn sine_cases_vanish_on_boundary() {
        for problem in [Problem::Laplace, Problem::Elasticity, Problem::Stokes] {
            let case = ManufacturedCase::sine(problem);
            for t in [0.0, 0.25, 0.6, 1.0] {
                for p in [
                    Point2::new(t, 0.0),
                    Point2::new(t, 1.0),
                    Point2::new(0.0, t),
                    Point2::new(1.0, t),
                ] {
                    let v = case.value(p);
                    assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
                }
            }
        }
    }
}
