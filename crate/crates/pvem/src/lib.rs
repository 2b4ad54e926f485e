//! p-version virtual element kernels on polygonal meshes with straight and
//! cubic Bézier edges: stabilized and self-stabilized formulations for the
//! Laplace, linear elasticity and Stokes problems, variable-coefficient
//! projectors, and a benchmark harness that writes CSV tables.

pub mod assembly;
pub mod bench_cli;
pub mod coefficients;
pub mod manufactured;
pub mod mesh_geometry;
pub mod polynomials;
pub mod projectors;
pub mod quadrature;
pub mod stabilization;

pub use assembly::{Discretization, Formulation, Problem, SelfStabVersion};
pub use mesh_geometry::{builtin_mesh, BezierCurve, Element, Mesh, Point2};
pub use stabilization::StabKind;
