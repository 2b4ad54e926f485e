//! Dof layouts and the per-element projector matrices.
//!
//! All three problems share one projection engine: a field `w` with `nf`
//! components has a flux `D w = Aₓᵀ ∂ₓw + A_yᵀ ∂_y w` with `nd` components
//! (gradient, Voigt strain, or component-wise gradient), the adjoint
//! divergence `div σ = Aₓ ∂ₓσ + A_y ∂_yσ`, and the boundary traction
//! `(Aₓ nₓ + A_y n_y) σ`. Divergence-free enrichments are generated by
//! `Bₓ ∂ₓs + B_y ∂_y s` (curl, or the elasticity counterpart).

pub mod dofs;
pub mod element;
pub mod engine;
pub mod local;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::coefficients::CoefficientError;
use crate::polynomials::PolyError;

pub use dofs::{build_dofmap, DofMap, LocalLayout};
pub use element::ElementData;
pub use engine::{Block, Projection, Target, Weight};
pub use local::{ElementProjectors, ProjectorSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Problem {
    Laplace,
    Elasticity,
    Stokes,
}

impl Problem {
    pub fn field_dim(self) -> usize {
        match self {
            Problem::Laplace => 1,
            _ => 2,
        }
    }

    /// Dimension of the kernel of the energy (constants / rigid motions / constant vectors).
    pub fn kernel_dim(self) -> usize {
        match self {
            Problem::Laplace => 1,
            Problem::Elasticity => 3,
            Problem::Stokes => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Problem::Laplace => "laplace",
            Problem::Elasticity => "elasticity",
            Problem::Stokes => "stokes",
        }
    }

    pub fn physics(self) -> Physics {
        Physics::new(self)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "laplace" => Ok(Problem::Laplace),
            "elasticity" => Ok(Problem::Elasticity),
            "stokes" => Ok(Problem::Stokes),
            _ => Err(format!(
                "unknown problem `{s}` (laplace, elasticity, stokes)"
            )),
        }
    }
}

/// Local virtual element space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Enhanced space; moments of degree `k-1, k` come from the elliptic projection.
    Standard,
    /// Enhancement extended up to degree `k + ℓ`.
    Enlarged(usize),
    /// Extra internal moments up to degree `k + ℓ - 2` (degree `k - 1` when `ℓ = 1`).
    Augmented(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SelfStabVersion {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
}

impl SelfStabVersion {
    pub const ALL: [SelfStabVersion; 6] = [
        SelfStabVersion::V1,
        SelfStabVersion::V2,
        SelfStabVersion::V3,
        SelfStabVersion::V4,
        SelfStabVersion::V5,
        SelfStabVersion::V6,
    ];

    pub fn space(self, problem: Problem, ell: usize) -> SpaceKind {
        use SelfStabVersion::*;
        match self {
            V1 | V4 => SpaceKind::Enlarged(ell),
            V2 | V5 => SpaceKind::Augmented(ell),
            // the strain-based divergence-free block needs the enlarged enhancement
            V3 | V6 if problem == Problem::Elasticity => SpaceKind::Enlarged(ell),
            V3 | V6 => SpaceKind::Standard,
        }
    }

    pub fn has_coefficient_variant(self) -> bool {
        !matches!(self, SelfStabVersion::V2 | SelfStabVersion::V5)
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }
}

impl fmt::Display for SelfStabVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.index())
    }
}

#[derive(Debug, Error)]
pub enum ProjectorError {
    #[error("degree k={k} is not supported for {problem} (k ≥ 1, k ≥ 2 for stokes)")]
    InvalidDegree { problem: Problem, k: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error("singular projection system ({0}); degenerate element")]
    Singular(String),
    #[error("projection needs moments of degree {needed}, the local space provides {available}")]
    MissingMoments { needed: usize, available: usize },
    #[error("{0}")]
    Mismatch(String),
}

/// Differential structure of a problem.
#[derive(Clone, Debug)]
pub struct Physics {
    pub problem: Problem,
    pub nf: usize,
    pub nd: usize,
    pub ns: usize,
    pub ax: DMatrix<f64>,
    pub ay: DMatrix<f64>,
    pub bx: DMatrix<f64>,
    pub by: DMatrix<f64>,
}

impl Physics {
    fn new(problem: Problem) -> Self {
        let m = |r: usize, c: usize, v: &[f64]| DMatrix::from_row_slice(r, c, v);
        match problem {
            Problem::Laplace => Physics {
                problem,
                nf: 1,
                nd: 2,
                ns: 1,
                ax: m(1, 2, &[1., 0.]),
                ay: m(1, 2, &[0., 1.]),
                // curl s = (∂y s, -∂x s)
                bx: m(2, 1, &[0., -1.]),
                by: m(2, 1, &[1., 0.]),
            },
            Problem::Elasticity => Physics {
                problem,
                nf: 2,
                nd: 3,
                ns: 2,
                ax: m(2, 3, &[1., 0., 0., 0., 0., 1.]),
                ay: m(2, 3, &[0., 0., 1., 0., 1., 0.]),
                // (∂y s1, -∂x s2, -∂x s1 + ∂y s2)
                bx: m(3, 2, &[0., 0., 0., -1., -1., 0.]),
                by: m(3, 2, &[1., 0., 0., 0., 0., 1.]),
            },
            Problem::Stokes => Physics {
                problem,
                nf: 2,
                nd: 4,
                ns: 2,
                ax: m(2, 4, &[1., 0., 0., 0., 0., 0., 1., 0.]),
                ay: m(2, 4, &[0., 1., 0., 0., 0., 0., 0., 1.]),
                bx: m(4, 2, &[0., 0., -1., 0., 0., 0., 0., -1.]),
                by: m(4, 2, &[1., 0., 0., 0., 0., 1., 0., 0.]),
            },
        }
    }

    /// Whether `div(W B(s)) ≡ 0` for a constant weight `W`.
    pub fn extension_divergence_free(&self, w: &DMatrix<f64>) -> bool {
        let xx = &self.ax * w * &self.bx;
        let yy = &self.ay * w * &self.by;
        let xy = &self.ax * w * &self.by + &self.ay * w * &self.bx;
        let tol = 1e-14 * w.amax().max(1.0);
        xx.amax() <= tol && yy.amax() <= tol && xy.amax() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_blocks() {
        let id2 = DMatrix::identity(2, 2);
        assert!(Problem::Laplace.physics().extension_divergence_free(&id2));
        assert!(Problem::Stokes
            .physics()
            .extension_divergence_free(&DMatrix::identity(4, 4)));
        assert!(!Problem::Elasticity
            .physics()
            .extension_divergence_free(&DMatrix::identity(3, 3)));
        let aniso = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(!Problem::Laplace.physics().extension_divergence_free(&aniso));
    }
}
