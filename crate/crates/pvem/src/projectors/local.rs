//! Per-element projector matrices built on the generic engine.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::coefficients::Coefficient;
use crate::mesh_geometry::{Element, Point2};
use crate::polynomials::{dim_p, dim_upto};

use super::dofs::LocalLayout;
use super::element::ElementData;
use super::engine::{
    boundary_load, project, solve_spd, Block, MomentSource, Projection, Target, Weight,
};
use super::{Physics, Problem, ProjectorError, SelfStabVersion, SpaceKind};

/// A projector in both coordinate systems: `pi_star` maps dofs to target
/// coefficients (`g · pi_star = b`), `pi` maps dofs to the dofs of the
/// projected polynomial when the target is a field space.
#[derive(Clone, Debug)]
pub struct ProjectorSet {
    pub degree: usize,
    pub d: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub pi_star: DMatrix<f64>,
    pub pi: Option<DMatrix<f64>>,
}

/// Target of the self-stabilized consistency projection.
pub fn selfstab_target(version: SelfStabVersion, k: usize, ell: usize) -> Target {
    use SelfStabVersion::*;
    let ext = Block::Extension {
        from: k,
        to: k + ell,
    };
    match version {
        V1 | V2 => Target {
            blocks: vec![Block::Vector {
                degree: k + ell - 1,
            }],
            kernel: false,
        },
        V3 => Target {
            blocks: vec![Block::Vector { degree: k - 1 }, ext],
            kernel: false,
        },
        V4 | V5 => Target {
            blocks: vec![Block::Potential { degree: k + ell }],
            kernel: true,
        },
        V6 => Target {
            blocks: vec![Block::Potential { degree: k }, ext],
            kernel: true,
        },
    }
}

/// Polynomial degree needed by the basis for a local space and target.
pub fn required_degree(k: usize, space: SpaceKind, target_degree: usize) -> usize {
    let space_deg = match space {
        SpaceKind::Standard => k,
        SpaceKind::Enlarged(l) => k + l,
        SpaceKind::Augmented(l) => (k + l).saturating_sub(2),
    };
    k.max(space_deg).max(target_degree)
}

#[derive(Clone, Debug)]
pub struct ElementProjectors<'a> {
    pub ed: ElementData<'a>,
    pub layout: LocalLayout,
    pub physics: Physics,
    pub base_weight: DMatrix<f64>,
    /// Stokes complement basis: columns are `[P_{k-2}]²` coefficient vectors.
    pub gperp: Option<DMatrix<f64>>,
    /// Elliptic projection of the local space (base weight, kernel conditions).
    pub base: Projection,
    /// Dofs of the degree-`k` field basis (`N × nf·dim_k`).
    pub d: DMatrix<f64>,
    /// `Π` in dof coordinates.
    pub pi: DMatrix<f64>,
    /// Moments against `q_β` up to the space's enhancement degree, with `Π⁰_k`.
    pub moments: MomentSource,
}

impl<'a> ElementProjectors<'a> {
    /// Builds the local space of order `k` with a basis of degree `degree`
    /// (raised as needed) and enhancement through the projection weighted by `base_weight`.
    pub fn new(
        element: &'a Element,
        problem: Problem,
        k: usize,
        space: SpaceKind,
        degree: usize,
        base_weight: DMatrix<f64>,
        surplus: usize,
    ) -> Result<Self, ProjectorError> {
        let layout = LocalLayout::new(problem, k, element.n_vertices(), space)?;
        let degree = required_degree(k, space, degree);
        let ed = ElementData::new(element, k, degree, surplus)?;
        let physics = problem.physics();
        let nf = physics.nf;
        let n = layout.len();
        let area = ed.area();
        let dim = ed.dim();
        let n2 = dim_upto(k as isize - 2);

        // Moment rows that are dofs or dof combinations.
        let dof_rows = layout.dof_moment_rows();
        let mut m = vec![DMatrix::zeros(dof_rows, n); nf];
        for (f, mf) in m.iter_mut().enumerate() {
            for b in 0..layout.n_moment {
                mf[(b, layout.moment(f, b))] = area;
            }
            for i in 0..layout.n_aug {
                mf[(layout.aug_lo + i, layout.aug(f, i))] = area;
            }
        }
        let mut gperp = None;
        if problem == Problem::Stokes && n2 > 0 {
            let (gp, low) = stokes_low_moments(&ed, &layout)?;
            for f in 0..nf {
                m[f].rows_mut(0, n2).copy_from(&low[f]);
            }
            gperp = Some(gp);
        }

        let base_src = MomentSource {
            m: m.clone(),
            p0k: None,
        };
        let target = Target {
            blocks: vec![Block::Potential { degree: k }],
            kernel: true,
        };
        let base = project(
            &ed,
            &physics,
            &layout,
            &base_src,
            &target,
            &Weight::Constant(base_weight.clone()),
        )?;

        // Enhancement: remaining moments from the elliptic projection.
        let dk = dim_p(k);
        let avail = match space {
            SpaceKind::Standard => dk,
            SpaceKind::Enlarged(l) => dim_p(k + l),
            SpaceKind::Augmented(_) => dof_rows.max(dk),
        }
        .min(dim);
        let mut full = Vec::with_capacity(nf);
        for f in 0..nf {
            let mut mf = DMatrix::zeros(avail.max(dof_rows), n);
            mf.rows_mut(0, dof_rows).copy_from(&m[f]);
            if avail > dof_rows {
                let pot = base.pi_star.rows(f * dk, dk);
                let h = ed.mass.view((dof_rows, 0), (avail - dof_rows, dk));
                mf.rows_mut(dof_rows, avail - dof_rows)
                    .copy_from(&(h * pot));
            }
            full.push(mf);
        }
        let hk = ed.mass.view((0, 0), (dk, dk)).clone_owned();
        let mut p0k = Vec::with_capacity(nf);
        for mf in &full {
            p0k.push(solve_spd(&hk, &mf.rows(0, dk).clone_owned())?);
        }
        let moments = MomentSource {
            m: full,
            p0k: Some(p0k),
        };

        let mut this = ElementProjectors {
            ed,
            layout,
            physics,
            base_weight,
            gperp,
            base,
            d: DMatrix::zeros(0, 0),
            pi: DMatrix::zeros(0, 0),
            moments,
        };
        this.d = this.dof_matrix(k);
        this.pi = &this.d * &this.base.pi_star;
        Ok(this)
    }

    pub fn k(&self) -> usize {
        self.layout.k
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.len()
    }

    pub fn problem(&self) -> Problem {
        self.physics.problem
    }

    /// Highest polynomial degree contained in the local space. Traces on an edge of
    /// degree `n` are degree-`k` polynomials of the curve parameter, which holds
    /// `q ∘ γ` only for `q` of degree at most `k / n`.
    pub fn contained_degree(&self) -> usize {
        self.k() / self.ed.element.max_edge_degree()
    }

    /// Projection of the flux onto `target` under the weight `w`.
    pub fn project(&self, target: &Target, w: &Weight) -> Result<Projection, ProjectorError> {
        project(
            &self.ed,
            &self.physics,
            &self.layout,
            &self.moments,
            target,
            w,
        )
    }

    pub fn selfstab(
        &self,
        version: SelfStabVersion,
        ell: usize,
        w: &Weight,
    ) -> Result<Projection, ProjectorError> {
        self.project(&selfstab_target(version, self.k(), ell), w)
    }

    /// `Π⁰_k` coefficients per field component (`dim_k × N`).
    pub fn p0k(&self) -> &[DMatrix<f64>] {
        self.moments.p0k.as_deref().unwrap_or(&[])
    }

    /// `Π⁰_m` for `m ≤ k` from the available moments.
    pub fn p0(&self, degree: isize) -> Result<Vec<DMatrix<f64>>, ProjectorError> {
        let n = dim_upto(degree);
        let h = self.ed.mass.view((0, 0), (n, n)).clone_owned();
        self.moments
            .m
            .iter()
            .map(|mf| {
                if n == 0 {
                    Ok(DMatrix::zeros(0, mf.ncols()))
                } else {
                    solve_spd(&h, &mf.rows(0, n).clone_owned())
                }
            })
            .collect()
    }

    /// Dofs of the field basis `q_α e_c` up to `degree` (`N × nf·dim_p(degree)`).
    pub fn dof_matrix(&self, degree: usize) -> DMatrix<f64> {
        let lay = &self.layout;
        let ed = &self.ed;
        let nm = dim_p(degree);
        let nf = self.physics.nf;
        let area = ed.area();
        let mut d = DMatrix::zeros(lay.len(), nf * nm);
        let n2 = dim_upto(lay.k as isize - 2);
        let dc = [&ed.dxm, &ed.dym];
        for c in 0..nf {
            for al in 0..nm {
                let col = c * nm + al;
                for e in 0..lay.nv {
                    for j in 0..lay.k {
                        d[(lay.boundary(c, e, j), col)] = ed.edges[e].node_val[(j, al)];
                    }
                }
                for b in 0..lay.n_moment {
                    d[(lay.moment(c, b), col)] = ed.mass[(b, al)] / area;
                }
                for i in 0..lay.n_aug {
                    d[(lay.aug(c, i), col)] = ed.mass[(lay.aug_lo + i, al)] / area;
                }
                if let Some(gp) = &self.gperp {
                    for b in 0..lay.n_gperp {
                        let mut s = 0.0;
                        for g in 0..n2 {
                            s += ed.mass[(al, g)] * gp[(c * n2 + g, b)];
                        }
                        d[(lay.gperp(b), col)] = s / area;
                    }
                }
                for a in 1..=lay.n_div {
                    let mut s = 0.0;
                    for g in 0..ed.dim() {
                        s += dc[c][(g, al)] * ed.mass[(g, a)];
                    }
                    d[(lay.div(a), col)] = s / area;
                }
            }
        }
        d
    }

    /// Dofs of a field given pointwise.
    pub fn interpolate(&self, u: &dyn Fn(Point2) -> [f64; 2]) -> DVector<f64> {
        let lay = &self.layout;
        let ed = &self.ed;
        let nf = self.physics.nf;
        let area = ed.area();
        let mut out = DVector::zeros(lay.len());
        for e in 0..lay.nv {
            for j in 0..lay.k {
                let v = u(ed.edges[e].nodes[j]);
                for c in 0..nf {
                    out[lay.boundary(c, e, j)] = v[c];
                }
            }
        }
        let dim = ed.dim();
        let np = ed.rule.points.len();
        let uv: Vec<[f64; 2]> = ed.rule.points.iter().map(|&p| u(p)).collect();
        // (u_c, q_β) for all β
        let mut mom = vec![DVector::zeros(dim); nf];
        for q in 0..np {
            let w = ed.rule.weights[q];
            for c in 0..nf {
                mom[c].axpy(w * uv[q][c], &ed.vals.val.row(q).transpose(), 1.0);
            }
        }
        for c in 0..nf {
            for b in 0..lay.n_moment {
                out[lay.moment(c, b)] = mom[c][b] / area;
            }
            for i in 0..lay.n_aug {
                out[lay.aug(c, i)] = mom[c][lay.aug_lo + i] / area;
            }
        }
        if let Some(gp) = &self.gperp {
            let n2 = dim_upto(lay.k as isize - 2);
            for b in 0..lay.n_gperp {
                let mut s = 0.0;
                for c in 0..nf {
                    for g in 0..n2 {
                        s += mom[c][g] * gp[(c * n2 + g, b)];
                    }
                }
                out[lay.gperp(b)] = s / area;
            }
        }
        if lay.n_div > 0 {
            // ∫ div u q_a = ∫_∂E u·n q_a - ∫ u·∇q_a
            for a in 1..=lay.n_div {
                let mut s = 0.0;
                for q in 0..np {
                    let w = ed.rule.weights[q];
                    s -= w * (uv[q][0] * ed.vals.dx[(q, a)] + uv[q][1] * ed.vals.dy[(q, a)]);
                }
                for edge in &ed.edges {
                    for (q, &p) in edge.rule.points.iter().enumerate() {
                        let v = u(p);
                        let nrm = edge.rule.normals[q];
                        s += (v[0] * nrm.x + v[1] * nrm.y) * edge.val[(q, a)];
                    }
                }
                out[lay.div(a)] = s / area;
            }
        }
        out
    }

    /// Load vector `(f, Π⁰_k φ_i)`.
    pub fn load(&self, f: &dyn Fn(Point2) -> [f64; 2]) -> DVector<f64> {
        let ed = &self.ed;
        let dk = dim_p(self.k());
        let mut rhs = DVector::zeros(self.n_dofs());
        let fv: Vec<[f64; 2]> = ed.rule.points.iter().map(|&p| f(p)).collect();
        for (c, p0) in self.p0k().iter().enumerate() {
            let mut fm = DVector::zeros(dk);
            for (q, v) in fv.iter().enumerate() {
                let w = ed.rule.weights[q] * v[c];
                for b in 0..dk {
                    fm[b] += w * ed.vals.val[(q, b)];
                }
            }
            rhs += p0.transpose() * fm;
        }
        rhs
    }

    /// Boundary pairings `∫_∂E φ·n q_a` for `a < count` (`count × N`, vector fields only).
    pub fn normal_moments(&self, count: usize) -> DMatrix<f64> {
        normal_moments(&self.ed, &self.layout, count)
    }

    /// Divergence moments `(div φ_i, q_a)` for `a < dim P_{k-1}` (Stokes).
    pub fn divergence_matrix(&self) -> DMatrix<f64> {
        let lay = &self.layout;
        let np = dim_upto(lay.k as isize - 1);
        let mut b = DMatrix::zeros(np, lay.len());
        b.row_mut(0).copy_from(&self.normal_moments(1).row(0));
        for a in 1..np {
            b[(a, lay.div(a))] = self.ed.area();
        }
        b
    }

    /// Edge-wise Lagrange mass of the traces (`N × N`).
    pub fn boundary_mass(&self) -> DMatrix<f64> {
        let lay = &self.layout;
        let mut m = DMatrix::zeros(lay.len(), lay.len());
        for (e, edge) in self.ed.edges.iter().enumerate() {
            let mut wl = edge.lag.clone();
            for (q, row) in wl.row_iter_mut().enumerate() {
                let mut row = row;
                row.scale_mut(edge.rule.weights[q]);
            }
            let local = edge.lag.transpose() * wl;
            for c in 0..self.physics.nf {
                for i in 0..=lay.k {
                    for j in 0..=lay.k {
                        m[(lay.boundary(c, e, i), lay.boundary(c, e, j))] += local[(i, j)];
                    }
                }
            }
        }
        m
    }

    /// The base elliptic projector as a [`ProjectorSet`].
    pub fn elliptic_set(&self) -> ProjectorSet {
        ProjectorSet {
            degree: self.k(),
            d: self.d.clone(),
            g: self.base.g.clone(),
            b: self.base.b.clone(),
            pi_star: self.base.pi_star.clone(),
            pi: Some(self.pi.clone()),
        }
    }

    /// `Π⁰_k` as a [`ProjectorSet`].
    pub fn l2_set(&self) -> ProjectorSet {
        let dk = dim_p(self.k());
        let nf = self.physics.nf;
        let n = self.n_dofs();
        let mut g = DMatrix::zeros(nf * dk, nf * dk);
        let mut b = DMatrix::zeros(nf * dk, n);
        let mut ps = DMatrix::zeros(nf * dk, n);
        for c in 0..nf {
            g.view_mut((c * dk, c * dk), (dk, dk))
                .copy_from(&self.ed.mass.view((0, 0), (dk, dk)));
            b.rows_mut(c * dk, dk)
                .copy_from(&self.moments.m[c].rows(0, dk));
            ps.rows_mut(c * dk, dk).copy_from(&self.p0k()[c]);
        }
        let pi = Some(&self.d * &ps);
        ProjectorSet {
            degree: self.k(),
            d: self.d.clone(),
            g,
            b,
            pi_star: ps,
            pi,
        }
    }
}

fn normal_moments(ed: &ElementData, layout: &LocalLayout, count: usize) -> DMatrix<f64> {
    boundary_load(ed, layout, count, |e| {
        let edge = &ed.edges[e];
        let nq = edge.rule.points.len();
        let mut tx = DMatrix::zeros(nq, count);
        let mut ty = DMatrix::zeros(nq, count);
        for q in 0..nq {
            let nrm = edge.rule.normals[q];
            for a in 0..count {
                tx[(q, a)] = nrm.x * edge.val[(q, a)];
                ty[(q, a)] = nrm.y * edge.val[(q, a)];
            }
        }
        vec![tx, ty]
    })
}

/// Complement `G⊥` of the gradients in `[P_{k-2}]²` and the moment rows
/// `(φ, q_β e_f)`, `β < dim P_{k-2}`, expressed through the divergence and
/// complement dofs.
fn stokes_low_moments(
    ed: &ElementData,
    lay: &LocalLayout,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), ProjectorError> {
    let n2 = dim_upto(lay.k as isize - 2);
    let nd = lay.n_div;
    let ng = lay.n_gperp;
    let area = ed.area();
    // gradients of q_a, a = 1..=nd, restricted to coefficients below dim P_{k-2}
    let mut u = DMatrix::zeros(2 * n2, nd);
    for a in 1..=nd {
        for g in 0..n2 {
            u[(g, a - 1)] = ed.dxm[(g, a)];
            u[(n2 + g, a - 1)] = ed.dym[(g, a)];
        }
    }
    let qr = u.clone().qr();
    let qu = qr.q();
    let proj = DMatrix::identity(2 * n2, 2 * n2) - &qu * qu.transpose();
    let eig = SymmetricEigen::new(proj);
    let mut cols: Vec<usize> = (0..2 * n2).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    if cols.len() != ng {
        return Err(ProjectorError::Mismatch(format!(
            "complement has dimension {}, expected {ng}",
            cols.len()
        )));
    }
    cols.sort_by(|&a, &b| {
        let ka = eig.eigenvectors.column(a).iamax();
        let kb = eig.eigenvectors.column(b).iamax();
        ka.cmp(&kb).then(a.cmp(&b))
    });
    let mut gp = DMatrix::zeros(2 * n2, ng);
    for (j, &i) in cols.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        let piv = v.iamax();
        if v[piv] < 0.0 {
            v = -v;
        }
        gp.set_column(j, &v);
    }
    let mut z = DMatrix::zeros(2 * n2, 2 * n2);
    z.columns_mut(0, nd).copy_from(&u);
    z.columns_mut(nd, ng).copy_from(&gp);
    let zinv = z
        .try_inverse()
        .ok_or_else(|| ProjectorError::Singular("gradient/complement split".into()))?;

    let n = lay.len();
    let bd = normal_moments(ed, lay, nd + 1);
    let mut pair = DMatrix::zeros(nd + ng, n);
    for a in 1..=nd {
        let mut row = bd.row(a).clone_owned();
        row[lay.div(a)] -= area;
        pair.row_mut(a - 1).copy_from(&row);
    }
    for b in 0..ng {
        pair[(nd + b, lay.gperp(b))] = area;
    }
    let mut low = Vec::with_capacity(2);
    for f in 0..2 {
        let zf = zinv.columns(f * n2, n2);
        low.push(zf.transpose() * &pair);
    }
    Ok((gp, low))
}

/// Piecewise-constant stand-in for a variable coefficient on an element.
pub fn mean_weight(c: &Coefficient, ed: &ElementData) -> DMatrix<f64> {
    crate::coefficients::piecewise_constant_approx(c, &ed.rule.points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_geometry::builtin_mesh;

    fn ident(problem: Problem) -> DMatrix<f64> {
        let nd = problem.physics().nd;
        DMatrix::identity(nd, nd)
    }

    #[test]
    fn elliptic_projector_is_idempotent_and_reproduces_polynomials() {
        for name in ["quad", "voronoi5", "octagon", "bezier4"] {
            let mesh = builtin_mesh(name).unwrap();
            for problem in [Problem::Laplace, Problem::Elasticity, Problem::Stokes] {
                let kmin = if problem == Problem::Stokes { 2 } else { 1 };
                for k in kmin..=4 {
                    for el in &mesh.elements {
                        let ep = ElementProjectors::new(
                            el,
                            problem,
                            k,
                            SpaceKind::Standard,
                            k,
                            ident(problem),
                            8,
                        )
                        .unwrap();
                        if !el.is_curved() {
                            let pi2 = &ep.pi * &ep.pi;
                            assert!(
                                (&pi2 - &ep.pi).amax() < 1e-9 * ep.pi.amax().max(1.0),
                                "{name} {problem} k={k}"
                            );
                        }
                        let d = ep.dof_matrix(ep.contained_degree());
                        let pd = &ep.pi * &d;
                        assert!(
                            (&pd - &d).amax() < 1e-9 * d.amax().max(1.0),
                            "{name} {problem} k={k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn l2_projection_of_polynomials_is_exact() {
        let mesh = builtin_mesh("voronoi5").unwrap();
        for problem in [Problem::Laplace, Problem::Stokes] {
            let k = 3;
            let el = &mesh.elements[1];
            let ep =
                ElementProjectors::new(el, problem, k, SpaceKind::Standard, k, ident(problem), 8)
                    .unwrap();
            let l2 = ep.l2_set();
            let back = l2.pi_star * &ep.d;
            let id = DMatrix::<f64>::identity(back.nrows(), back.ncols());
            assert!((back - id).amax() < 1e-9);
        }
    }

    #[test]
    fn interpolation_of_basis_matches_dof_matrix() {
        let mesh = builtin_mesh("bezier4").unwrap();
        let el = &mesh.elements[2];
        let ep = ElementProjectors::new(
            el,
            Problem::Stokes,
            3,
            SpaceKind::Augmented(2),
            3,
            ident(Problem::Stokes),
            8,
        )
        .unwrap();
        let dk = dim_p(3);
        for col in [0, 4, dk + 2, 2 * dk - 1] {
            let (c, al) = (col / dk, col % dk);
            let u = |p: Point2| {
                let v = ep.ed.basis.eval(p)[al];
                if c == 0 {
                    [v, 0.0]
                } else {
                    [0.0, v]
                }
            };
            let dofs = ep.interpolate(&u);
            assert!((dofs - ep.d.column(col)).amax() < 1e-10);
        }
    }

    #[test]
    fn divergence_matrix_matches_pointwise_divergence() {
        let mesh = builtin_mesh("octagon").unwrap();
        let el = &mesh.elements[0];
        let ep = ElementProjectors::new(
            el,
            Problem::Stokes,
            4,
            SpaceKind::Standard,
            4,
            ident(Problem::Stokes),
            8,
        )
        .unwrap();
        let u = |p: Point2| [p.x * p.x * p.y, p.y.powi(3) - p.x];
        let div = |p: Point2| 2.0 * p.x * p.y + 3.0 * p.y * p.y;
        let dofs = ep.interpolate(&u);
        let got = ep.divergence_matrix() * dofs;
        for a in 0..got.len() {
            let want = ep.ed.rule.integrate(|p| div(p) * ep.ed.basis.eval(p)[a]);
            assert!((got[a] - want).abs() < 1e-10, "a={a}: {} vs {want}", got[a]);
        }
    }
}
