//! Variable coefficients: 2×2 diffusion tensors and plane-stress
//! constitutive matrices, with analytic first derivatives.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Matrix3, SymmetricEigen};
use thiserror::Error;

use crate::mesh_geometry::Point2;

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("unknown coefficient `{0}`")]
    Unknown(String),
    #[error("coefficient `{name}` is not symmetric positive definite at {at} (min eigenvalue {min_eig:e})")]
    NotSpd {
        name: String,
        at: Point2,
        min_eig: f64,
    },
    #[error("coefficient `{name}` violates reciprocity ν12 E2 = ν21 E1 at {at}")]
    Reciprocity { name: String, at: Point2 },
}

/// Symmetric 2×2 coefficient `A(x, y)` with its partial derivatives.
pub trait Coefficient2x2: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn value(&self, p: Point2) -> Matrix2<f64>;
    fn dx(&self, p: Point2) -> Matrix2<f64>;
    fn dy(&self, p: Point2) -> Matrix2<f64>;
    fn is_constant(&self) -> bool {
        false
    }
}

/// Orthotropic plane-stress material parameters at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub e1: f64,
    pub e2: f64,
    pub nu12: f64,
    pub nu21: f64,
    pub g12: f64,
}

impl Material {
    pub fn isotropic(e: f64, nu: f64) -> Self {
        Material {
            e1: e,
            e2: e,
            nu12: nu,
            nu21: nu,
            g12: e / (2.0 * (1.0 + nu)),
        }
    }

    pub fn stiffness(&self) -> Matrix3<f64> {
        let den = 1.0 - self.nu12 * self.nu21;
        Matrix3::new(
            self.e1 / den,
            self.nu12 * self.e2 / den,
            0.0,
            self.nu12 * self.e2 / den,
            self.e2 / den,
            0.0,
            0.0,
            0.0,
            self.g12,
        )
    }

    /// Directional derivative of [`Material::stiffness`] along `d` (derivatives of the parameters).
    pub fn stiffness_derivative(&self, d: &Material) -> Matrix3<f64> {
        let den = 1.0 - self.nu12 * self.nu21;
        let dden = -(d.nu12 * self.nu21 + self.nu12 * d.nu21);
        let q = |num: f64, dnum: f64| dnum / den - num * dden / (den * den);
        let c12 = q(self.nu12 * self.e2, d.nu12 * self.e2 + self.nu12 * d.e2);
        Matrix3::new(
            q(self.e1, d.e1),
            c12,
            0.0,
            c12,
            q(self.e2, d.e2),
            0.0,
            0.0,
            0.0,
            d.g12,
        )
    }
}

/// Plane-stress constitutive matrix `C(x, y)` in Voigt form.
pub trait ElasticityCoefficient: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn material(&self, p: Point2) -> Material;
    /// Partial derivatives of the material parameters in x and y.
    fn material_gradient(&self, p: Point2) -> (Material, Material);
    fn is_constant(&self) -> bool {
        false
    }
    fn value(&self, p: Point2) -> Matrix3<f64> {
        self.material(p).stiffness()
    }
    fn dx(&self, p: Point2) -> Matrix3<f64> {
        let m = self.material(p);
        m.stiffness_derivative(&self.material_gradient(p).0)
    }
    fn dy(&self, p: Point2) -> Matrix3<f64> {
        let m = self.material(p);
        m.stiffness_derivative(&self.material_gradient(p).1)
    }
}

const ZERO_MATERIAL: Material = Material {
    e1: 0.0,
    e2: 0.0,
    nu12: 0.0,
    nu21: 0.0,
    g12: 0.0,
};

#[derive(Clone, Debug)]
pub struct ConstantTensor {
    pub name: String,
    pub a: Matrix2<f64>,
}

impl Coefficient2x2 for ConstantTensor {
    fn name(&self) -> &str {
        &self.name
    }
    fn value(&self, _: Point2) -> Matrix2<f64> {
        self.a
    }
    fn dx(&self, _: Point2) -> Matrix2<f64> {
        Matrix2::zeros()
    }
    fn dy(&self, _: Point2) -> Matrix2<f64> {
        Matrix2::zeros()
    }
    fn is_constant(&self) -> bool {
        true
    }
}

/// `A = diag(x + 1, y + 1)`.
#[derive(Clone, Debug)]
pub struct PolyDiag;

impl Coefficient2x2 for PolyDiag {
    fn name(&self) -> &str {
        "poly-diag"
    }
    fn value(&self, p: Point2) -> Matrix2<f64> {
        Matrix2::new(p.x + 1.0, 0.0, 0.0, p.y + 1.0)
    }
    fn dx(&self, _: Point2) -> Matrix2<f64> {
        Matrix2::new(1.0, 0.0, 0.0, 0.0)
    }
    fn dy(&self, _: Point2) -> Matrix2<f64> {
        Matrix2::new(0.0, 0.0, 0.0, 1.0)
    }
}

/// `A = [[cos⁴πx + 1, cos²πx sin²πy], [cos²πx sin²πy, sin⁴πy + 3]]`.
#[derive(Clone, Debug)]
pub struct Trig;

impl Coefficient2x2 for Trig {
    fn name(&self) -> &str {
        "trig"
    }
    fn value(&self, p: Point2) -> Matrix2<f64> {
        let (cx, sy) = ((PI * p.x).cos(), (PI * p.y).sin());
        let off = cx * cx * sy * sy;
        Matrix2::new(cx.powi(4) + 1.0, off, off, sy.powi(4) + 3.0)
    }
    fn dx(&self, p: Point2) -> Matrix2<f64> {
        let (cx, sx, sy) = ((PI * p.x).cos(), (PI * p.x).sin(), (PI * p.y).sin());
        let off = -2.0 * PI * cx * sx * sy * sy;
        Matrix2::new(-4.0 * PI * cx.powi(3) * sx, off, off, 0.0)
    }
    fn dy(&self, p: Point2) -> Matrix2<f64> {
        let (cx, sy, cy) = ((PI * p.x).cos(), (PI * p.y).sin(), (PI * p.y).cos());
        let off = 2.0 * PI * cx * cx * sy * cy;
        Matrix2::new(0.0, off, off, 4.0 * PI * sy.powi(3) * cy)
    }
}

#[derive(Clone, Debug)]
pub struct ConstantMaterial {
    pub name: String,
    pub material: Material,
}

impl ElasticityCoefficient for ConstantMaterial {
    fn name(&self) -> &str {
        &self.name
    }
    fn material(&self, _: Point2) -> Material {
        self.material
    }
    fn material_gradient(&self, _: Point2) -> (Material, Material) {
        (ZERO_MATERIAL, ZERO_MATERIAL)
    }
    fn is_constant(&self) -> bool {
        true
    }
}

/// `E = 72000 (1 + 100 (x - ½)⁴ + (y - ½)²)`, `ν = 0.33`, `G = E / (2 (1 + ν))`.
#[derive(Clone, Debug)]
pub struct PolyOrtho;

impl PolyOrtho {
    const E0: f64 = 72000.0;
    const NU: f64 = 0.33;
}

impl ElasticityCoefficient for PolyOrtho {
    fn name(&self) -> &str {
        "poly-ortho"
    }
    fn material(&self, p: Point2) -> Material {
        let e = Self::E0 * (1.0 + 100.0 * (p.x - 0.5).powi(4) + (p.y - 0.5).powi(2));
        Material::isotropic(e, Self::NU)
    }
    fn material_gradient(&self, p: Point2) -> (Material, Material) {
        let ex = Self::E0 * 400.0 * (p.x - 0.5).powi(3);
        let ey = Self::E0 * 2.0 * (p.y - 0.5);
        let g = |de: f64| Material {
            e1: de,
            e2: de,
            nu12: 0.0,
            nu21: 0.0,
            g12: de / (2.0 * (1.0 + Self::NU)),
        };
        (g(ex), g(ey))
    }
}

/// Either kind of coefficient, shareable across threads.
#[derive(Clone, Debug)]
pub enum Coefficient {
    Scalar(Arc<dyn Coefficient2x2>),
    Elastic(Arc<dyn ElasticityCoefficient>),
}

impl Coefficient {
    pub fn name(&self) -> &str {
        match self {
            Coefficient::Scalar(c) => c.name(),
            Coefficient::Elastic(c) => c.name(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Coefficient::Scalar(c) => c.is_constant(),
            Coefficient::Elastic(c) => c.is_constant(),
        }
    }

    /// Value as a dense matrix (2×2 or 3×3 Voigt).
    pub fn matrix(&self, p: Point2) -> DMatrix<f64> {
        match self {
            Coefficient::Scalar(c) => dense2(&c.value(p)),
            Coefficient::Elastic(c) => dense3(&c.value(p)),
        }
    }

    pub fn matrix_with_derivatives(&self, p: Point2) -> [DMatrix<f64>; 3] {
        match self {
            Coefficient::Scalar(c) => [dense2(&c.value(p)), dense2(&c.dx(p)), dense2(&c.dy(p))],
            Coefficient::Elastic(c) => [dense3(&c.value(p)), dense3(&c.dx(p)), dense3(&c.dy(p))],
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Coefficient::Scalar(_) => 2,
            Coefficient::Elastic(_) => 3,
        }
    }
}

fn dense2(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(2, 2, m.iter().copied())
}

fn dense3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(3, 3, m.iter().copied())
}

pub fn identity_tensor() -> Arc<dyn Coefficient2x2> {
    Arc::new(ConstantTensor {
        name: "identity".into(),
        a: Matrix2::identity(),
    })
}

pub fn isotropic_steel_like() -> Arc<dyn ElasticityCoefficient> {
    Arc::new(ConstantMaterial {
        name: "isotropic".into(),
        material: Material::isotropic(72000.0, 0.3),
    })
}

/// Built-in names: `identity`, `poly-diag`, `trig` (2×2) and `isotropic`,
/// `poly-ortho` (elasticity).
pub fn builtin_coefficient(name: &str) -> Result<Coefficient, CoefficientError> {
    Ok(match name {
        "identity" | "constant" => Coefficient::Scalar(identity_tensor()),
        "poly-diag" => Coefficient::Scalar(Arc::new(PolyDiag)),
        "trig" => Coefficient::Scalar(Arc::new(Trig)),
        "isotropic" => Coefficient::Elastic(isotropic_steel_like()),
        "poly-ortho" => Coefficient::Elastic(Arc::new(PolyOrtho)),
        other => return Err(CoefficientError::Unknown(other.to_string())),
    })
}

/// Name → coefficient lookup seeded with the built-ins; user coefficients can be added.
#[derive(Clone, Debug)]
pub struct CoefficientRegistry {
    entries: HashMap<String, Coefficient>,
}

impl Default for CoefficientRegistry {
    fn default() -> Self {
        let mut entries = HashMap::new();
        for n in ["identity", "poly-diag", "trig", "isotropic", "poly-ortho"] {
            entries.insert(n.to_string(), builtin_coefficient(n).unwrap());
        }
        CoefficientRegistry { entries }
    }
}

impl CoefficientRegistry {
    pub fn register(&mut self, name: &str, c: Coefficient) {
        self.entries.insert(name.to_string(), c);
    }

    pub fn get(&self, name: &str) -> Result<Coefficient, CoefficientError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| CoefficientError::Unknown(name.to_string()))
    }
}

/// Unweighted mean of the coefficient at the given points.
pub fn piecewise_constant_approx(c: &Coefficient, points: &[Point2]) -> DMatrix<f64> {
    let n = c.size();
    let mut acc = DMatrix::zeros(n, n);
    for &p in points {
        acc += c.matrix(p);
    }
    acc / points.len() as f64
}

/// Checks symmetry and positive definiteness (and reciprocity for materials) at the points.
pub fn check_spd(c: &Coefficient, points: &[Point2]) -> Result<(), CoefficientError> {
    for &p in points {
        let m = c.matrix(p);
        let asym = (&m - m.transpose()).amax();
        let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
        if asym > 1e-12 * m.amax() || !(min_eig > 0.0) {
            return Err(CoefficientError::NotSpd {
                name: c.name().to_string(),
                at: p,
                min_eig,
            });
        }
        if let Coefficient::Elastic(e) = c {
            let mat = e.material(p);
            if (mat.nu12 * mat.e2 - mat.nu21 * mat.e1).abs()
                > 1e-12 * mat.e1.abs().max(mat.e2.abs())
            {
                return Err(CoefficientError::Reciprocity {
                    name: c.name().to_string(),
                    at: p,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Point2> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Point2::new(
                    (i as f64 + 0.5) / n as f64,
                    (j as f64 + 0.5) / n as f64,
                ));
            }
        }
        pts
    }

    #[test]
    fn values_at_reference_points() {
        let o = Point2::new(0.0, 0.0);
        let Coefficient::Scalar(pd) = builtin_coefficient("poly-diag").unwrap() else {
            panic!()
        };
        assert_eq!(pd.value(o), Matrix2::identity());
        let Coefficient::Scalar(tr) = builtin_coefficient("trig").unwrap() else {
            panic!()
        };
        assert_eq!(tr.value(o), Matrix2::new(2.0, 0.0, 0.0, 3.0));
        let Coefficient::Elastic(el) = builtin_coefficient("poly-ortho").unwrap() else {
            panic!()
        };
        let m = el.material(Point2::new(0.5, 0.5));
        assert_eq!((m.e1, m.e2, m.nu12), (72000.0, 72000.0, 0.33));
        assert!((m.g12 - 72000.0 / (2.0 * 1.33)).abs() < 1e-9);
        assert!(matches!(
            builtin_coefficient("foo"),
            Err(CoefficientError::Unknown(_))
        ));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for name in ["identity", "poly-diag", "trig", "isotropic", "poly-ortho"] {
            let c = builtin_coefficient(name).unwrap();
            for p in grid(5) {
                let [v, dx, dy] = c.matrix_with_derivatives(p);
                let fx = (c.matrix(Point2::new(p.x + h, p.y))
                    - c.matrix(Point2::new(p.x - h, p.y)))
                    / (2.0 * h);
                let fy = (c.matrix(Point2::new(p.x, p.y + h))
                    - c.matrix(Point2::new(p.x, p.y - h)))
                    / (2.0 * h);
                let scale = v.amax();
                assert!((fx - dx).amax() < 1e-6 * scale, "{name} dx at {p}");
                assert!((fy - dy).amax() < 1e-6 * scale, "{name} dy at {p}");
            }
        }
    }

    #[test]
    fn builtins_are_spd_on_the_square() {
        for name in ["identity", "poly-diag", "trig", "isotropic", "poly-ortho"] {
            check_spd(&builtin_coefficient(name).unwrap(), &grid(20)).unwrap();
        }
    }

    #[test]
    fn registry_accepts_user_coefficients() {
        let mut reg = CoefficientRegistry::default();
        let user = ConstantTensor {
            name: "aniso".into(),
            a: Matrix2::new(2.0, 0.5, 0.5, 1.0),
        };
        reg.register("aniso", Coefficient::Scalar(Arc::new(user)));
        assert_eq!(
            reg.get("aniso").unwrap().matrix(Point2::default())[(0, 1)],
            0.5
        );
        assert!(reg.get("poly-diag").is_ok());
    }

    #[test]
    fn averaging() {
        let c = builtin_coefficient("isotropic").unwrap();
        let pts = grid(3);
        assert_eq!(
            piecewise_constant_approx(&c, &pts),
            c.matrix(Point2::default())
        );
        let pd = builtin_coefficient("poly-diag").unwrap();
        let avg = piecewise_constant_approx(&pd, &pts);
        assert!((avg[(0, 0)] - 1.5).abs() < 1e-12 && (avg[(1, 1)] - 1.5).abs() < 1e-12);
    }
}
