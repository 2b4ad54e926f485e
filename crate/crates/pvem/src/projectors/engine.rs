//! Generic projection of the flux of virtual functions onto a polynomial
//! target space, with an optional matrix weight.
//!
//! For every target function `τ_a` the right-hand side `(D φ_i, W τ_a)` is
//! integrated by parts: `-(φ_i, div(W τ_a)) + ∫_∂E φ_i · N(n) W τ_a`. The
//! volume part uses the moments of `φ_i` (constant weight) or `Π⁰_k φ_i`
//! (variable weight); the boundary part uses the Lagrange trace through the
//! edge dofs.

use nalgebra::DMatrix;

use crate::coefficients::Coefficient;
use crate::mesh_geometry::Point2;
use crate::polynomials::{dim_p, dim_upto};

use super::dofs::LocalLayout;
use super::element::ElementData;
use super::{Physics, ProjectorError};

/// Group of target functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    /// Fluxes `D(q_α e_c)` of field polynomials up to `degree`.
    Potential { degree: usize },
    /// Fluxes `q_α e_c` up to `degree`.
    Vector { degree: usize },
    /// Enrichments `B(q_β e_c)` for basis functions of degree in `(from, to]`.
    Extension { from: usize, to: usize },
}

impl Block {
    pub fn len(&self, ph: &Physics) -> usize {
        match *self {
            Block::Potential { degree } => ph.nf * dim_p(degree),
            Block::Vector { degree } => ph.nd * dim_p(degree),
            Block::Extension { from, to } => ph.ns * (dim_p(to) - dim_p(from)),
        }
    }

    pub fn is_empty(&self, ph: &Physics) -> bool {
        self.len(ph) == 0
    }

    fn flux_degree(&self) -> isize {
        match *self {
            Block::Potential { degree } => degree as isize - 1,
            Block::Vector { degree } => degree as isize,
            Block::Extension { to, .. } => to as isize - 1,
        }
    }

    fn max_basis_degree(&self) -> usize {
        match *self {
            Block::Potential { degree } | Block::Vector { degree } => degree,
            Block::Extension { to, .. } => to,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Target {
    pub blocks: Vec<Block>,
    /// Adds the mean-of-vertex-dofs conditions on the leading potential block.
    pub kernel: bool,
}

impl Target {
    pub fn len(&self, ph: &Physics) -> usize {
        self.blocks.iter().map(|b| b.len(ph)).sum()
    }

    pub fn is_empty(&self, ph: &Physics) -> bool {
        self.len(ph) == 0
    }

    pub fn max_degree(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.max_basis_degree())
            .max()
            .unwrap_or(0)
    }
}

/// Weight applied to the flux in the projection pairing.
#[derive(Clone, Debug)]
pub enum Weight<'c> {
    Constant(DMatrix<f64>),
    Variable(&'c Coefficient),
}

impl Weight<'_> {
    pub fn identity(n: usize) -> Self {
        Weight::Constant(DMatrix::identity(n, n))
    }

    fn at(&self, p: Point2) -> DMatrix<f64> {
        match self {
            Weight::Constant(w) => w.clone(),
            Weight::Variable(c) => c.matrix(p),
        }
    }
}

/// Moments `(φ_i, q_β e_f)` per field component, and optionally `Π⁰_k φ_i`
/// coefficients per component.
#[derive(Clone, Debug)]
pub struct MomentSource {
    pub m: Vec<DMatrix<f64>>,
    pub p0k: Option<Vec<DMatrix<f64>>>,
}

impl MomentSource {
    pub fn rows(&self) -> usize {
        self.m[0].nrows()
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub target: Target,
    /// Flux coefficients of each target function, one `dim × n_T` matrix per flux component.
    pub flux: Vec<DMatrix<f64>>,
    /// Field coefficients of the leading potential block (`nf·dim_p(m) × n_pot`), if any.
    pub potential: Option<(usize, DMatrix<f64>)>,
    /// System matrix and right-hand side; with kernel conditions the rigid
    /// modes are lifted in `g` and enforced exactly on `pi_star`.
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Gram matrix in the projection weight.
    pub gram: DMatrix<f64>,
    pub pi_star: DMatrix<f64>,
}

impl Projection {
    pub fn n_target(&self) -> usize {
        self.pi_star.nrows()
    }

    /// `Πᵀ G_W Π` for the form weight `w`.
    pub fn energy(&self, ed: &ElementData, w: &Weight) -> DMatrix<f64> {
        let g = flux_gram(ed, &self.flux, w);
        let k = self.pi_star.transpose() * g * &self.pi_star;
        0.5 * (&k + k.transpose())
    }
}

/// Flux coefficient matrices of the target functions.
pub fn flux_coefficients(ed: &ElementData, ph: &Physics, target: &Target) -> Vec<DMatrix<f64>> {
    let dim = ed.dim();
    let nt = target.len(ph);
    let mut t = vec![DMatrix::zeros(dim, nt); ph.nd];
    let dm = [&ed.dxm, &ed.dym];
    let a = [&ph.ax, &ph.ay];
    let b = [&ph.bx, &ph.by];
    let mut off = 0;
    for block in &target.blocks {
        match *block {
            Block::Potential { degree } => {
                let n = dim_p(degree);
                for c in 0..ph.nf {
                    for al in 0..n {
                        let col = off + c * n + al;
                        for d in 0..ph.nd {
                            for dir in 0..2 {
                                let s = a[dir][(c, d)];
                                if s != 0.0 {
                                    let src = dm[dir].column(al) * s;
                                    let mut dst = t[d].column_mut(col);
                                    dst += src;
                                }
                            }
                        }
                    }
                }
            }
            Block::Vector { degree } => {
                let n = dim_p(degree);
                for c in 0..ph.nd {
                    for al in 0..n {
                        t[c][(al, off + c * n + al)] = 1.0;
                    }
                }
            }
            Block::Extension { from, to } => {
                let (lo, hi) = (dim_p(from), dim_p(to));
                let n = hi - lo;
                for c in 0..ph.ns {
                    for i in 0..n {
                        let col = off + c * n + i;
                        for d in 0..ph.nd {
                            for dir in 0..2 {
                                let s = b[dir][(d, c)];
                                if s != 0.0 {
                                    let src = dm[dir].column(lo + i) * s;
                                    let mut dst = t[d].column_mut(col);
                                    dst += src;
                                }
                            }
                        }
                    }
                }
            }
        }
        off += block.len(ph);
    }
    t
}

fn rows_times(vals: &DMatrix<f64>, t: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    t.iter().map(|m| vals * m).collect()
}

/// `∫_E τ_aᵀ W τ_b`.
pub fn flux_gram(ed: &ElementData, flux: &[DMatrix<f64>], w: &Weight) -> DMatrix<f64> {
    let nt = flux[0].ncols();
    let nd = flux.len();
    let mut g = DMatrix::zeros(nt, nt);
    match w {
        Weight::Constant(wm) => {
            let ht: Vec<DMatrix<f64>> = flux.iter().map(|t| &ed.mass * t).collect();
            for c in 0..nd {
                for d in 0..nd {
                    let s = wm[(c, d)];
                    if s != 0.0 {
                        g += (flux[c].transpose() * &ht[d]) * s;
                    }
                }
            }
        }
        Weight::Variable(_) => {
            let fv = rows_times(&ed.vals.val, flux);
            let wq: Vec<DMatrix<f64>> = ed.rule.points.iter().map(|&p| w.at(p)).collect();
            for c in 0..nd {
                for d in 0..nd {
                    let mut scaled = fv[d].clone();
                    for (q, row) in scaled.row_iter_mut().enumerate() {
                        let s = ed.rule.weights[q] * wq[q][(c, d)];
                        let mut row = row;
                        row.scale_mut(s);
                    }
                    g += fv[c].transpose() * scaled;
                }
            }
        }
    }
    0.5 * (&g + g.transpose())
}

/// Boundary pairing `∫_∂E φ_i · t_a`: `traction(e)` returns, for edge `e`, one
/// `nq × m` matrix per field component with the arc-length/normal weights
/// already applied. Result is `m × N`.
pub fn boundary_load(
    ed: &ElementData,
    layout: &LocalLayout,
    m: usize,
    traction: impl Fn(usize) -> Vec<DMatrix<f64>>,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m, layout.len());
    for e in 0..ed.edges.len() {
        let tr = traction(e);
        let lag_t = ed.edges[e].lag.transpose();
        for (f, tf) in tr.iter().enumerate() {
            let contrib = &lag_t * tf;
            for j in 0..=layout.k {
                let col = layout.boundary(f, e, j);
                for a in 0..m {
                    out[(a, col)] += contrib[(j, a)];
                }
            }
        }
    }
    out
}

/// Solves the projection of the flux onto `target` in the pairing weighted by `w`.
pub fn project(
    ed: &ElementData,
    ph: &Physics,
    layout: &LocalLayout,
    src: &MomentSource,
    target: &Target,
    w: &Weight,
) -> Result<Projection, ProjectorError> {
    if target.max_degree() > ed.degree() {
        return Err(ProjectorError::Mismatch(format!(
            "target degree {} exceeds basis degree {}",
            target.max_degree(),
            ed.degree()
        )));
    }
    let flux = flux_coefficients(ed, ph, target);
    let nt = target.len(ph);
    let gram = flux_gram(ed, &flux, w);

    // boundary part
    let mut b = boundary_load(ed, layout, nt, |e| {
        let edge = &ed.edges[e];
        let ev = rows_times(&edge.val, &flux);
        let nq = edge.rule.points.len();
        let mut tr = vec![DMatrix::zeros(nq, nt); ph.nf];
        for q in 0..nq {
            let nrm = edge.rule.normals[q];
            let wq = w.at(edge.rule.points[q]);
            for (f, trf) in tr.iter_mut().enumerate() {
                for d in 0..ph.nd {
                    let mut coef = 0.0;
                    for c in 0..ph.nd {
                        coef += (ph.ax[(f, c)] * nrm.x + ph.ay[(f, c)] * nrm.y) * wq[(c, d)];
                    }
                    if coef != 0.0 {
                        let mut row = trf.row_mut(q);
                        row += ev[d].row(q) * (coef);
                    }
                }
            }
        }
        tr
    });

    // volume part
    match w {
        Weight::Constant(wm) => {
            let div_free_ext = ph.extension_divergence_free(wm);
            let mut needed: isize = -1;
            for blk in &target.blocks {
                if matches!(blk, Block::Extension { .. }) && div_free_ext {
                    continue;
                }
                needed = needed.max(blk.flux_degree() - 1);
            }
            let rows = dim_upto(needed);
            if rows > src.rows() {
                return Err(ProjectorError::MissingMoments {
                    needed: needed as usize,
                    available: src.rows(),
                });
            }
            if rows > 0 {
                let s: Vec<DMatrix<f64>> = (0..ph.nd)
                    .map(|c| {
                        let mut acc = DMatrix::zeros(ed.dim(), nt);
                        for d in 0..ph.nd {
                            if wm[(c, d)] != 0.0 {
                                acc += &flux[d] * wm[(c, d)];
                            }
                        }
                        acc
                    })
                    .collect();
                let mut off = 0;
                let mut skip = vec![false; nt];
                for blk in &target.blocks {
                    let len = blk.len(ph);
                    if matches!(blk, Block::Extension { .. }) && div_free_ext {
                        skip[off..off + len].iter_mut().for_each(|x| *x = true);
                    }
                    off += len;
                }
                for f in 0..ph.nf {
                    let mut div = DMatrix::zeros(ed.dim(), nt);
                    for c in 0..ph.nd {
                        if ph.ax[(f, c)] != 0.0 {
                            div += (&ed.dxm * &s[c]) * ph.ax[(f, c)];
                        }
                        if ph.ay[(f, c)] != 0.0 {
                            div += (&ed.dym * &s[c]) * ph.ay[(f, c)];
                        }
                    }
                    for (col, &sk) in skip.iter().enumerate() {
                        if sk {
                            div.column_mut(col).fill(0.0);
                        }
                    }
                    let dtop = div.rows(0, rows);
                    let mtop = src.m[f].rows(0, rows);
                    b -= dtop.transpose() * mtop;
                }
            }
        }
        Weight::Variable(coef) => {
            let p0k = src.p0k.as_ref().ok_or_else(|| {
                ProjectorError::Mismatch(
                    "variable weight needs the L2 projection of the virtual functions".into(),
                )
            })?;
            let nk = p0k[0].nrows();
            let fv = rows_times(&ed.vals.val, &flux);
            let fdx = rows_times(&ed.vals.dx, &flux);
            let fdy = rows_times(&ed.vals.dy, &flux);
            let np = ed.rule.points.len();
            let mut g = vec![DMatrix::zeros(np, nt); ph.nf];
            for (q, &p) in ed.rule.points.iter().enumerate() {
                let [wv, wx, wy] = coef.matrix_with_derivatives(p);
                for (f, gf) in g.iter_mut().enumerate() {
                    let mut row = gf.row_mut(q);
                    for c in 0..ph.nd {
                        let (sx, sy) = (ph.ax[(f, c)], ph.ay[(f, c)]);
                        if sx == 0.0 && sy == 0.0 {
                            continue;
                        }
                        for d in 0..ph.nd {
                            let c_val = sx * wx[(c, d)] + sy * wy[(c, d)];
                            if c_val != 0.0 {
                                row += fv[d].row(q) * (c_val);
                            }
                            if wv[(c, d)] != 0.0 {
                                if sx != 0.0 {
                                    row += fdx[d].row(q) * (sx * wv[(c, d)]);
                                }
                                if sy != 0.0 {
                                    row += fdy[d].row(q) * (sy * wv[(c, d)]);
                                }
                            }
                        }
                    }
                    let wq = ed.rule.weights[q];
                    row.scale_mut(wq);
                }
            }
            let vk = ed.vals.val.columns(0, nk);
            for f in 0..ph.nf {
                let gq = vk.transpose() * &g[f];
                b -= gq.transpose() * &p0k[f];
            }
        }
    }

    // kernel conditions
    let mut gb = gram.clone();
    let mut potential = None;
    if let Some(Block::Potential { degree }) = target.blocks.first() {
        let np = ph.nf * dim_p(*degree);
        let mut pot = DMatrix::zeros(ph.nf * ed.dim(), np);
        let nm = dim_p(*degree);
        for c in 0..ph.nf {
            for al in 0..nm {
                pot[(c * ed.dim() + al, c * nm + al)] = 1.0;
            }
        }
        potential = Some((*degree, pot));
        if target.kernel {
            let (p, pb) = kernel_rows(ed, ph, layout, *degree, nt);
            let z = rigid_coefficients(ed, ph, *degree, nt);
            gb += &z * z.transpose() * gram.diagonal().max().max(1e-300);
            let y = solve_spd(&gb, &b)?;
            let pz = &p * &z;
            let c = pz
                .lu()
                .solve(&(pb - &p * &y))
                .ok_or_else(|| ProjectorError::Singular("vertex-average conditions".into()))?;
            let pi_star = y + z * c;
            return Ok(Projection {
                target: target.clone(),
                flux,
                potential,
                g: gb,
                b,
                gram,
                pi_star,
            });
        }
    } else if target.kernel {
        return Err(ProjectorError::Mismatch(
            "kernel conditions need a leading potential block".into(),
        ));
    }
    let pi_star = solve_spd(&gb, &b)?;
    Ok(Projection {
        target: target.clone(),
        flux,
        potential,
        g: gb,
        b,
        gram,
        pi_star,
    })
}

/// Rigid motions of the problem evaluated at `p`, one `[f64; 2]` field value per mode.
fn rigid_modes(problem: super::Problem, p: Point2, xc: Point2) -> Vec<[f64; 2]> {
    match problem {
        super::Problem::Laplace => vec![[1.0, 0.0]],
        super::Problem::Stokes => vec![[1.0, 0.0], [0.0, 1.0]],
        super::Problem::Elasticity => vec![[1.0, 0.0], [0.0, 1.0], [-(p.y - xc.y), p.x - xc.x]],
    }
}

/// Orthonormal coefficient vectors (`n_T × modes`) of the rigid motions in the
/// leading potential block: the null space of the flux Gram matrix there.
fn rigid_coefficients(ed: &ElementData, ph: &Physics, degree: usize, nt: usize) -> DMatrix<f64> {
    let xc = ed.element.centroid;
    let nm = dim_p(degree);
    let nr = rigid_modes(ph.problem, xc, xc).len();
    let mut z = DMatrix::zeros(nt, nr);
    for r in 0..nr {
        for c in 0..ph.nf {
            let coef = ed.project_function(|p| rigid_modes(ph.problem, p, xc)[r][c], 1);
            for (al, &v) in coef.iter().enumerate().take(nm) {
                z[(c * nm + al, r)] = v;
            }
        }
    }
    z.qr().q()
}

/// Rows `P` (kernel modes × n_T) and `P_φ` (kernel modes × N) of the
/// vertex-averaged conditions `(1/N_V) Σ_v Πφ(v)·r(v) = (1/N_V) Σ_v φ(v)·r(v)`.
fn kernel_rows(
    ed: &ElementData,
    ph: &Physics,
    layout: &LocalLayout,
    degree: usize,
    nt: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nv = ed.nv();
    let xc = ed.element.centroid;
    let verts = ed.element.vertices();
    // rigid modes evaluated at vertices: r[mode][v] = (r_0, r_1)
    let modes: Vec<Vec<[f64; 2]>> = match ph.problem {
        super::Problem::Laplace => vec![vec![[1.0, 0.0]; nv]],
        super::Problem::Stokes => vec![vec![[1.0, 0.0]; nv], vec![[0.0, 1.0]; nv]],
        super::Problem::Elasticity => vec![
            vec![[1.0, 0.0]; nv],
            vec![[0.0, 1.0]; nv],
            verts.iter().map(|v| [-(v.y - xc.y), v.x - xc.x]).collect(),
        ],
    };
    let nm = dim_p(degree);
    let inv = 1.0 / nv as f64;
    let mut p = DMatrix::zeros(modes.len(), nt);
    let mut pb = DMatrix::zeros(modes.len(), layout.len());
    for (r, mode) in modes.iter().enumerate() {
        for v in 0..nv {
            let vals = ed.vertex_values(v);
            for c in 0..ph.nf {
                let rc = mode[v][c];
                if rc == 0.0 {
                    continue;
                }
                for al in 0..nm {
                    p[(r, c * nm + al)] += inv * vals[al] * rc;
                }
                pb[(r, layout.vertex(c, v))] += inv * rc;
            }
        }
    }
    (p, pb)
}

/// Solves a symmetric positive definite system, falling back to LU.
pub fn solve_spd(g: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, ProjectorError> {
    if let Some(ch) = g.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    g.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| ProjectorError::Singular(format!("{}×{} Gram matrix", g.nrows(), g.ncols())))
}
