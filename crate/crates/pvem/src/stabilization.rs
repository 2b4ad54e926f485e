//! Stabilization matrices `S = (I - Π)ᵀ S_raw (I - Π)` built from five raw forms.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::polynomials::dim_p;
use crate::projectors::{ElementProjectors, Problem, ProjectorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StabKind {
    /// Identity on all dofs.
    S1,
    /// Identity on the boundary dofs.
    S2,
    /// Diagonal of the consistency matrix, floored at one.
    S3,
    /// Scaled boundary trace mass plus internal `Π⁰_{k-2}` mass.
    S4,
    /// Projection onto the complement of the range of the dof matrix.
    S5,
}

impl StabKind {
    pub const ALL: [StabKind; 5] = [
        StabKind::S1,
        StabKind::S2,
        StabKind::S3,
        StabKind::S4,
        StabKind::S5,
    ];

    pub fn index(self) -> usize {
        self as usize + 1
    }
}

impl fmt::Display for StabKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index())
    }
}

impl FromStr for StabKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(StabKind::S1),
            "S2" => Ok(StabKind::S2),
            "S3" => Ok(StabKind::S3),
            "S4" => Ok(StabKind::S4),
            "S5" => Ok(StabKind::S5),
            _ => Err(format!("unknown stabilization `{s}` (S1..S5)")),
        }
    }
}

/// Raw (un-projected) stabilization matrix. `kc` is the consistency matrix.
pub fn raw_matrix(
    kind: StabKind,
    ep: &ElementProjectors,
    kc: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ProjectorError> {
    let n = ep.n_dofs();
    let k = ep.k() as f64;
    let h = ep.ed.element.diameter;
    let lay = &ep.layout;
    let mut s = match kind {
        StabKind::S1 => DMatrix::identity(n, n),
        StabKind::S2 => {
            let mut s = DMatrix::zeros(n, n);
            for i in 0..lay.n_boundary() {
                s[(i, i)] = 1.0;
            }
            s
        }
        StabKind::S3 => {
            let mut s = DMatrix::zeros(n, n);
            for i in 0..n {
                s[(i, i)] = kc[(i, i)].max(1.0);
            }
            s
        }
        StabKind::S4 => {
            let mut s = ep.boundary_mass() * (k / h);
            let km2 = ep.k() as isize - 2;
            if km2 >= 0 {
                let p0 = ep.p0(km2)?;
                let dm = dim_p(km2 as usize);
                let hm = ep.ed.mass.view((0, 0), (dm, dm));
                for p in &p0 {
                    s += (p.transpose() * hm * p) * (k * k / (h * h));
                }
            }
            s
        }
        StabKind::S5 => {
            let svd = ep.d.clone().svd(true, false);
            let u = svd.u.expect("left singular vectors requested");
            let tol = svd.singular_values.max() * 1e-12;
            let mut s = DMatrix::identity(n, n);
            for (j, &sv) in svd.singular_values.iter().enumerate() {
                if sv > tol {
                    let c = u.column(j);
                    s -= &c * c.transpose();
                }
            }
            s
        }
    };
    if ep.problem() == Problem::Elasticity && kind != StabKind::S3 {
        s *= kc.trace();
    }
    Ok(s)
}

/// `(I - Π)ᵀ S_raw (I - Π)` scaled by `tau`.
pub fn stab_matrix(
    kind: StabKind,
    ep: &ElementProjectors,
    kc: &DMatrix<f64>,
    tau: f64,
) -> Result<DMatrix<f64>, ProjectorError> {
    let raw = raw_matrix(kind, ep, kc)?;
    let n = ep.n_dofs();
    let ip = DMatrix::identity(n, n) - &ep.pi;
    let s = ip.transpose() * raw * ip * tau;
    Ok(0.5 * (&s + s.transpose()))
}

/// Mean eigenvalue of the consistency matrix (`trace / dimension`).
pub fn tau_mean(kc: &DMatrix<f64>) -> f64 {
    kc.trace() / kc.nrows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_geometry::builtin_mesh;
    use crate::projectors::SpaceKind;
    use nalgebra::SymmetricEigen;

    #[test]
    fn stabilizations_vanish_on_polynomials_and_are_psd() {
        for (mesh, k) in [("voronoi5", 3), ("bezier4", 6)] {
            let mesh = builtin_mesh(mesh).unwrap();
            for problem in [Problem::Laplace, Problem::Elasticity, Problem::Stokes] {
                let nd = problem.physics().nd;
                let el = &mesh.elements[0];
                let ep = ElementProjectors::new(
                    el,
                    problem,
                    k,
                    SpaceKind::Standard,
                    k,
                    DMatrix::identity(nd, nd),
                    8,
                )
                .unwrap();
                let kc = ep
                    .base
                    .energy(&ep.ed, &crate::projectors::Weight::identity(nd));
                let d = ep.dof_matrix(ep.contained_degree());
                for kind in StabKind::ALL {
                    let s = stab_matrix(kind, &ep, &kc, 1.0).unwrap();
                    let sd = &s * &d;
                    assert!(sd.amax() < 1e-10 * s.amax().max(1.0), "{problem} {kind}");
                    let ev = SymmetricEigen::new(s.clone()).eigenvalues;
                    assert!(ev.min() > -1e-10 * s.amax().max(1.0), "{problem} {kind}");
                }
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for k in StabKind::ALL {
            assert_eq!(k.to_string().parse::<StabKind>().unwrap(), k);
        }
    }
}
