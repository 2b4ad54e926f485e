//! Scaled monomials, symbolic differential operators, and the per-element
//! L²-orthonormal basis.
//!
//! Exponents are ordered graded-lexicographically: degree `d` contributes
//! `(d,0), (d-1,1), …, (0,d)`, so the first `dim_p(m)` entries always span
//! the polynomials of degree `m`.
//!
//! The orthonormal basis follows the same graded order, so every prefix is
//! again a nested basis of `P_m`. It is generated degree by degree from local
//! coordinates on a tight enclosing rectangle and never expanded in monomials,
//! which keeps it orthonormal at high degree.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mesh_geometry::{Element, Point2};
use crate::quadrature::{edge_rule, element_rule, QuadRule};

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("Gram matrix numerically singular at basis function {index} (relative pivot {pivot:e}); degenerate element")]
    Degenerate { index: usize, pivot: f64 },
    #[error("negative quadrature weight on the element; cannot orthonormalize")]
    NegativeWeight,
}

/// `dim P_k = (k+1)(k+2)/2`.
pub fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// `dim P_k`, with `dim P_k = 0` for negative `k`.
pub fn dim_upto(k: isize) -> usize {
    if k < 0 {
        0
    } else {
        dim_p(k as usize)
    }
}

pub fn exponents(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p(k));
    for d in 0..=k {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

pub fn exponent_index(a: usize, b: usize) -> usize {
    dim_upto(a as isize + b as isize - 1) + b
}

/// Degree of the basis function with graded index `i`.
pub fn degree_of(i: usize) -> usize {
    let mut d = 0;
    while dim_p(d) <= i {
        d += 1;
    }
    d
}

/// Linear combination of mixed partial derivatives `∂x^i ∂y^j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiffOp {
    terms: Vec<(f64, usize, usize)>,
}

impl DiffOp {
    pub fn zero() -> Self {
        DiffOp { terms: Vec::new() }
    }

    pub fn identity() -> Self {
        DiffOp::partial(0, 0)
    }

    pub fn partial(i: usize, j: usize) -> Self {
        DiffOp {
            terms: vec![(1.0, i, j)],
        }
    }

    pub fn dx() -> Self {
        DiffOp::partial(1, 0)
    }

    pub fn dy() -> Self {
        DiffOp::partial(0, 1)
    }

    pub fn terms(&self) -> &[(f64, usize, usize)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = DiffOp {
            terms: self.terms.iter().map(|&(c, i, j)| (c * s, i, j)).collect(),
        };
        out.normalize();
        out
    }

    pub fn plus(&self, o: &DiffOp) -> Self {
        let mut out = DiffOp {
            terms: self.terms.iter().chain(&o.terms).copied().collect(),
        };
        out.normalize();
        out
    }

    pub fn then(&self, o: &DiffOp) -> Self {
        let mut terms = Vec::new();
        for &(c1, i1, j1) in &self.terms {
            for &(c2, i2, j2) in &o.terms {
                terms.push((c1 * c2, i1 + i2, j1 + j2));
            }
        }
        let mut out = DiffOp { terms };
        out.normalize();
        out
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| (a.1, a.2).cmp(&(b.1, b.2)));
        let mut merged: Vec<(f64, usize, usize)> = Vec::new();
        for &(c, i, j) in &self.terms {
            match merged.last_mut() {
                Some(last) if last.1 == i && last.2 == j => last.0 += c,
                _ => merged.push((c, i, j)),
            }
        }
        merged.retain(|t| t.0 != 0.0);
        self.terms = merged;
    }
}

/// Matrix of differential operators mapping `cols` input components to `rows` outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTable {
    pub rows: usize,
    pub cols: usize,
    pub ops: Vec<DiffOp>,
}

impl OperatorTable {
    pub fn new(rows: usize, cols: usize, ops: Vec<DiffOp>) -> Self {
        assert_eq!(ops.len(), rows * cols);
        OperatorTable { rows, cols, ops }
    }

    pub fn get(&self, r: usize, c: usize) -> &DiffOp {
        &self.ops[r * self.cols + c]
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &OperatorTable) -> OperatorTable {
        assert_eq!(self.cols, inner.rows);
        let mut ops = Vec::with_capacity(self.rows * inner.cols);
        for r in 0..self.rows {
            for c in 0..inner.cols {
                let mut acc = DiffOp::zero();
                for m in 0..self.cols {
                    acc = acc.plus(&self.get(r, m).then(inner.get(m, c)));
                }
                ops.push(acc);
            }
        }
        OperatorTable::new(self.rows, inner.cols, ops)
    }

    pub fn is_zero(&self) -> bool {
        self.ops.iter().all(|o| o.is_zero())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    Grad,
    Div,
    Laplacian,
    Curl,
    /// `L` acting on Voigt stresses `(σ_xx, σ_yy, σ_xy)`.
    LSigma,
    /// Voigt strain `(u_x, v_y, u_y + v_x)`.
    Eps,
    /// `(∂y s₁, -∂x s₂, -∂x s₁ + ∂y s₂)`.
    EpsPerp,
}

impl Operator {
    pub fn table(self) -> OperatorTable {
        let (x, y, z) = (DiffOp::dx(), DiffOp::dy(), DiffOp::zero());
        match self {
            Operator::Grad => OperatorTable::new(2, 1, vec![x, y]),
            Operator::Div => OperatorTable::new(1, 2, vec![x, y]),
            Operator::Laplacian => OperatorTable::new(
                1,
                1,
                vec![DiffOp::partial(2, 0).plus(&DiffOp::partial(0, 2))],
            ),
            Operator::Curl => OperatorTable::new(2, 1, vec![y, x.scaled(-1.0)]),
            Operator::LSigma => {
                OperatorTable::new(2, 3, vec![x.clone(), z.clone(), y.clone(), z, y, x])
            }
            Operator::Eps => {
                OperatorTable::new(3, 2, vec![x.clone(), z.clone(), z, y.clone(), y, x])
            }
            Operator::EpsPerp => OperatorTable::new(
                3,
                2,
                vec![y.clone(), z.clone(), z, x.scaled(-1.0), x.scaled(-1.0), y],
            ),
        }
    }
}

/// Scaled monomials `((x-x_c)/h)^a ((y-y_c)/h)^b` with `a + b ≤ degree`.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    pub center: Point2,
    pub scale: f64,
    pub degree: usize,
}

impl MonomialBasis {
    pub fn for_element(element: &Element, degree: usize) -> Self {
        MonomialBasis {
            center: element.centroid,
            scale: element.diameter,
            degree,
        }
    }

    pub fn dim(&self) -> usize {
        dim_p(self.degree)
    }

    pub fn exponents(&self) -> Vec<(usize, usize)> {
        exponents(self.degree)
    }

    pub fn eval(&self, p: Point2) -> Vec<f64> {
        let x = (p.x - self.center.x) / self.scale;
        let y = (p.y - self.center.y) / self.scale;
        self.exponents()
            .iter()
            .map(|&(a, b)| x.powi(a as i32) * y.powi(b as i32))
            .collect()
    }

    /// Coefficient map of `∂x^i ∂y^j` (square, `dim × dim`).
    pub fn partial_matrix(&self, i: usize, j: usize) -> DMatrix<f64> {
        let exps = self.exponents();
        let n = exps.len();
        let mut m = DMatrix::zeros(n, n);
        for (col, &(a, b)) in exps.iter().enumerate() {
            if a < i || b < j {
                continue;
            }
            let fa: f64 = ((a - i + 1)..=a).map(|x| x as f64).product();
            let fb: f64 = ((b - j + 1)..=b).map(|x| x as f64).product();
            m[(exponent_index(a - i, b - j), col)] = fa * fb / self.scale.powi((i + j) as i32);
        }
        m
    }

    pub fn apply_operator(&self, op: &OperatorTable) -> OperatorMatrix {
        OperatorMatrix::build(op, self.dim(), |i, j| self.partial_matrix(i, j))
    }
}

/// Block matrix realizing an [`OperatorTable`] on basis coefficients.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub rows: usize,
    pub cols: usize,
    pub blocks: Vec<DMatrix<f64>>,
}

impl OperatorMatrix {
    fn build(op: &OperatorTable, n: usize, partial: impl Fn(usize, usize) -> DMatrix<f64>) -> Self {
        let blocks = op
            .ops
            .iter()
            .map(|d| {
                let mut m = DMatrix::zeros(n, n);
                for &(c, i, j) in d.terms() {
                    m += partial(i, j) * c;
                }
                m
            })
            .collect();
        OperatorMatrix {
            rows: op.rows,
            cols: op.cols,
            blocks,
        }
    }

    pub fn block(&self, r: usize, c: usize) -> &DMatrix<f64> {
        &self.blocks[r * self.cols + c]
    }

    /// Applies the operator to stacked component coefficient vectors.
    pub fn apply(&self, input: &[DVector<f64>]) -> Vec<DVector<f64>> {
        (0..self.rows)
            .map(|r| {
                let mut acc = DVector::zeros(self.blocks[0].nrows());
                for (c, v) in input.iter().enumerate() {
                    acc += self.block(r, c) * v;
                }
                acc
            })
            .collect()
    }
}

/// `∫_E m_{a,b}` for all `a + b ≤ d`, by the divergence theorem with
/// `F = (h X^{a+1} Y^b / (a+1), 0)`.
pub fn monomial_moments(element: &Element, d: usize) -> Vec<f64> {
    let mb = MonomialBasis::for_element(element, d + 1);
    let (c, h) = (mb.center, mb.scale);
    let exps = exponents(d);
    let mut out = vec![0.0; exps.len()];
    for e in &element.edges {
        let nb = e.degree();
        let exact = (nb * (d + 1) + nb - 1).max(2 * d + 8);
        let rule = edge_rule(e, exact);
        for (q, &p) in rule.points.iter().enumerate() {
            let x = (p.x - c.x) / h;
            let y = (p.y - c.y) / h;
            // normals[q].x = y'(t) w_q
            let ny = rule.normals[q].x;
            for (i, &(a, b)) in exps.iter().enumerate() {
                out[i] += h * x.powi(a as i32 + 1) * y.powi(b as i32) / (a + 1) as f64 * ny;
            }
        }
    }
    out
}

/// Affine frame of the smallest enclosing rectangle of the element among the
/// axis-aligned one and those aligned with a vertex chord.
#[derive(Clone, Copy, Debug)]
pub struct LocalFrame {
    pub center: Point2,
    /// Unit axes of the rectangle.
    pub u: Point2,
    pub v: Point2,
    /// Half extents along `u` and `v`.
    pub hu: f64,
    pub hv: f64,
}

impl LocalFrame {
    pub fn for_element(element: &Element) -> Self {
        let mut pts = Vec::new();
        for e in &element.edges {
            match &e.curve {
                None => pts.push(e.start),
                // the control polygon bounds the curve
                Some(c) => pts.extend(c.control_points.iter().copied()),
            }
        }
        let fit = |u: Point2| {
            let v = Point2::new(-u.y, u.x);
            let (mut ulo, mut uhi, mut vlo, mut vhi) = (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            );
            for p in &pts {
                let (a, b) = (p.dot(u), p.dot(v));
                ulo = ulo.min(a);
                uhi = uhi.max(a);
                vlo = vlo.min(b);
                vhi = vhi.max(b);
            }
            let center = u * (0.5 * (ulo + uhi)) + v * (0.5 * (vlo + vhi));
            LocalFrame {
                center,
                u,
                v,
                hu: 0.5 * (uhi - ulo),
                hv: 0.5 * (vhi - vlo),
            }
        };
        let mut best = fit(Point2::new(1.0, 0.0));
        let verts = element.vertices();
        let chords = verts
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| verts[i + 1..].iter().map(move |&b| b - a));
        for d in chords {
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let cand = fit(d * (1.0 / len));
            if cand.hu * cand.hv < (1.0 - 1e-9) * best.hu * best.hv {
                best = cand;
            }
        }
        best
    }

    /// Local coordinates `(ξ, η) ∈ [-1, 1]²`.
    pub fn local(&self, p: Point2) -> (f64, f64) {
        let d = p - self.center;
        (d.dot(self.u) / self.hu, d.dot(self.v) / self.hv)
    }

    /// Gradients `(∂x, ∂y)` of `ξ` and of `η`.
    fn gradients(&self) -> [[f64; 2]; 2] {
        [
            [self.u.x / self.hu, self.u.y / self.hu],
            [self.v.x / self.hv, self.v.y / self.hv],
        ]
    }
}

/// Values of the basis (and derivatives up to second order) at a set of points,
/// one row per point.
#[derive(Clone, Debug)]
pub struct BasisValues {
    pub val: DMatrix<f64>,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub dxx: DMatrix<f64>,
    pub dxy: DMatrix<f64>,
    pub dyy: DMatrix<f64>,
}

/// One degree of the recurrence: the new functions are
/// `(t ∘ q[parents] − q[..n_prev] c) rinv`, with `t` the local coordinate `ξ`
/// or `η` of each new column.
#[derive(Clone, Debug)]
struct Level {
    parents: Vec<usize>,
    along_eta: Vec<bool>,
    c: DMatrix<f64>,
    rinv: DMatrix<f64>,
}

/// L²(E)-orthonormal basis built by a graded Arnoldi recurrence: every degree
/// multiplies functions of the previous degree by a local coordinate, picked
/// by column pivoting, and orthogonalizes against all earlier functions. Evaluation replays the recurrence, which
/// stays accurate at high degree where coefficient representations do not.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    pub degree: usize,
    pub frame: LocalFrame,
    levels: Vec<Level>,
    dx: DMatrix<f64>,
    dy: DMatrix<f64>,
}

/// Orthonormalizes on the element with an element rule of exactness `2k`
/// (every Gram entry is integrated exactly).
pub fn mgs_orthonormalize(element: &Element, k: usize) -> Result<OrthoBasis, PolyError> {
    let rule = element_rule(element, 2 * k);
    mgs_with_rule(element, k, &rule)
}

/// Builds the basis orthonormal in the discrete inner product of `rule`,
/// which must integrate polynomials of degree `2k` exactly.
pub fn mgs_with_rule(
    element: &Element,
    k: usize,
    rule: &QuadRule,
) -> Result<OrthoBasis, PolyError> {
    if rule.weights.iter().any(|&w| w < 0.0) {
        return Err(PolyError::NegativeWeight);
    }
    let frame = LocalFrame::for_element(element);
    let n = dim_p(k);
    let np = rule.len();
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    let (xi, eta): (Vec<f64>, Vec<f64>) = rule.points.iter().map(|&p| frame.local(p)).unzip();
    // weighted values: columns orthonormal in the Euclidean product
    let mut q = DMatrix::<f64>::zeros(np, n);
    let mut levels = Vec::with_capacity(k + 1);
    let norm0 = sw.iter().map(|w| w * w).sum::<f64>().sqrt();
    if !(norm0 > 0.0) {
        return Err(PolyError::Degenerate {
            index: 0,
            pivot: 0.0,
        });
    }
    for (r, &w) in sw.iter().enumerate() {
        q[(r, 0)] = w / norm0;
    }
    levels.push(Level {
        parents: vec![],
        along_eta: vec![],
        c: DMatrix::zeros(0, 1),
        rinv: DMatrix::from_element(1, 1, 1.0 / norm0),
    });
    for d in 1..=k {
        let n_prev = dim_p(d - 1);
        let n_last = dim_p(d) - n_prev - 1;
        let nb = d + 1;
        // candidates ξ·q and η·q for every function of the previous degree
        let cand: Vec<(usize, bool)> = (0..2 * n_last)
            .map(|i| (n_prev - n_last + i % n_last, i >= n_last))
            .collect();
        let mut b = DMatrix::<f64>::zeros(np, cand.len());
        for (j, &(p, e)) in cand.iter().enumerate() {
            let t = if e { &eta } else { &xi };
            for r in 0..np {
                b[(r, j)] = t[r] * q[(r, p)];
            }
        }
        let qp = q.columns(0, n_prev);
        let mut h_all = DMatrix::<f64>::zeros(n_prev, cand.len());
        for _ in 0..2 {
            let h = qp.transpose() * &b;
            b -= &qp * &h;
            h_all += h;
        }
        // greedy column pivoting keeps every pivot as large as possible,
        // which bounds error growth when the recurrence is replayed
        let mut r_all = DMatrix::<f64>::zeros(nb, cand.len());
        let mut chosen: Vec<usize> = Vec::with_capacity(nb);
        for j in 0..nb {
            let (best, nrm) = (0..cand.len())
                .filter(|i| !chosen.contains(i))
                .map(|i| (i, b.column(i).norm()))
                .fold(
                    (usize::MAX, -1.0),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
            if !(nrm > 1e-13) {
                return Err(PolyError::Degenerate {
                    index: n_prev + j,
                    pivot: nrm,
                });
            }
            let qj = b.column(best) / nrm;
            r_all[(j, best)] = nrm;
            chosen.push(best);
            for i in 0..cand.len() {
                if chosen.contains(&i) {
                    continue;
                }
                for _ in 0..2 {
                    let h = qj.dot(&b.column(i));
                    r_all[(j, i)] += h;
                    b.column_mut(i).axpy(-h, &qj, 1.0);
                }
            }
            q.set_column(n_prev + j, &qj);
        }
        let parents = chosen.iter().map(|&i| cand[i].0).collect();
        let along_eta = chosen.iter().map(|&i| cand[i].1).collect();
        let c = h_all.select_columns(&chosen);
        let r = r_all.select_columns(&chosen);
        let rinv =
            r.solve_upper_triangular(&DMatrix::identity(nb, nb))
                .ok_or(PolyError::Degenerate {
                    index: n_prev,
                    pivot: 0.0,
                })?;
        levels.push(Level {
            parents,
            along_eta,
            c,
            rinv,
        });
    }
    let mut basis = OrthoBasis {
        degree: k,
        frame,
        levels,
        dx: DMatrix::zeros(0, 0),
        dy: DMatrix::zeros(0, 0),
    };
    // coefficient maps of ∂x, ∂y: (q_b, ∂q_a) is integrated exactly by the rule
    let v = basis.values(&rule.points, 1);
    let mut wv = v.val;
    for (r, &w) in rule.weights.iter().enumerate() {
        wv.row_mut(r).scale_mut(w);
    }
    basis.dx = wv.transpose() * v.dx;
    basis.dy = wv.transpose() * v.dy;
    Ok(basis)
}

impl OrthoBasis {
    pub fn dim(&self) -> usize {
        dim_p(self.degree)
    }

    pub fn eval(&self, p: Point2) -> DVector<f64> {
        self.values(&[p], 0).val.row(0).transpose()
    }

    /// Basis values and derivatives up to `order` ≤ 2 at `points` (rows are
    /// points); unrequested derivative matrices are empty.
    pub fn values(&self, points: &[Point2], order: usize) -> BasisValues {
        let n = self.dim();
        let np = points.len();
        let slots = match order {
            0 => 1,
            1 => 3,
            _ => 6,
        };
        let (xi, eta): (Vec<f64>, Vec<f64>) = points.iter().map(|&p| self.frame.local(p)).unzip();
        let [gxi, geta] = self.frame.gradients();
        let mut s: Vec<DMatrix<f64>> = (0..6)
            .map(|i| {
                if i < slots {
                    DMatrix::zeros(np, n)
                } else {
                    DMatrix::zeros(0, 0)
                }
            })
            .collect();
        let c0 = self.levels[0].rinv[(0, 0)];
        for r in 0..np {
            s[0][(r, 0)] = c0;
        }
        for (d, level) in self.levels.iter().enumerate().skip(1) {
            let n_prev = dim_p(d - 1);
            let nb = d + 1;
            let mut blocks: Vec<DMatrix<f64>> =
                (0..slots).map(|_| DMatrix::zeros(np, nb)).collect();
            for (j, (&p, &e)) in level.parents.iter().zip(&level.along_eta).enumerate() {
                let (t, [tx, ty]) = if e { (&eta, geta) } else { (&xi, gxi) };
                for r in 0..np {
                    let tr = t[r];
                    blocks[0][(r, j)] = tr * s[0][(r, p)];
                    if slots > 1 {
                        let (v, vx, vy) = (s[0][(r, p)], s[1][(r, p)], s[2][(r, p)]);
                        blocks[1][(r, j)] = tx * v + tr * vx;
                        blocks[2][(r, j)] = ty * v + tr * vy;
                        if slots > 3 {
                            blocks[3][(r, j)] = 2.0 * tx * vx + tr * s[3][(r, p)];
                            blocks[4][(r, j)] = tx * vy + ty * vx + tr * s[4][(r, p)];
                            blocks[5][(r, j)] = 2.0 * ty * vy + tr * s[5][(r, p)];
                        }
                    }
                }
            }
            for (slot, mut blk) in blocks.into_iter().enumerate() {
                blk -= s[slot].columns(0, n_prev) * &level.c;
                let out = blk * &level.rinv;
                s[slot].columns_mut(n_prev, nb).copy_from(&out);
            }
        }
        let mut it = s.into_iter();
        BasisValues {
            val: it.next().unwrap(),
            dx: it.next().unwrap(),
            dy: it.next().unwrap(),
            dxx: it.next().unwrap(),
            dxy: it.next().unwrap(),
            dyy: it.next().unwrap(),
        }
    }

    /// Coefficient map of `∂x^i ∂y^j` in the orthonormal basis (square).
    pub fn partial_matrix(&self, i: usize, j: usize) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.dim(), self.dim());
        for _ in 0..i {
            m = &self.dx * m;
        }
        for _ in 0..j {
            m = &self.dy * m;
        }
        m
    }

    pub fn apply_operator(&self, op: &OperatorTable) -> OperatorMatrix {
        OperatorMatrix::build(op, self.dim(), |i, j| self.partial_matrix(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_geometry::builtin_mesh;

    fn unit_square() -> Element {
        Element::polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
    }

    #[test]
    fn dimensions_and_order() {
        for k in 0..=12 {
            assert_eq!(dim_p(k), (k + 1) * (k + 2) / 2);
            let e = exponents(k);
            assert_eq!(e.len(), dim_p(k));
            for (i, &(a, b)) in e.iter().enumerate() {
                assert_eq!(exponent_index(a, b), i);
                assert_eq!(degree_of(i), a + b);
            }
        }
        assert_eq!(
            exponents(2),
            vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        );
    }

    #[test]
    fn square_moments() {
        let m = monomial_moments(&unit_square(), 4);
        assert!((m[0] - 1.0).abs() < 1e-15);
        assert!(m[1].abs() < 1e-15);
        assert!(m[2].abs() < 1e-15);
        // ∫ ((x-.5)/√2)² over the unit square = 1/24
        assert!((m[3] - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn constant_basis_function() {
        let sq = unit_square();
        let b = mgs_orthonormalize(&sq, 0).unwrap();
        assert!((b.eval(Point2::new(0.3, 0.9))[0] - 1.0).abs() < 1e-15);
        let tri = Element::polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        let b = mgs_orthonormalize(&tri, 0).unwrap();
        assert!((b.eval(Point2::new(0.1, 0.1))[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn div_curl_is_exactly_zero() {
        let t = Operator::Div.table().compose(&Operator::Curl.table());
        assert!(t.is_zero());
        let sq = unit_square();
        let b = mgs_orthonormalize(&sq, 10).unwrap();
        let m = b.apply_operator(&t);
        assert!(m.blocks[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn monomial_laplacian() {
        let mb = MonomialBasis {
            center: Point2::new(0.0, 0.0),
            scale: 1.0,
            degree: 2,
        };
        let lap = mb.apply_operator(&Operator::Laplacian.table());
        let mut c = DVector::zeros(6);
        c[exponent_index(2, 0)] = 1.0;
        let out = lap.block(0, 0) * c;
        assert_eq!(out[0], 2.0);
        assert!(out.iter().skip(1).all(|&x| x == 0.0));
    }

    #[test]
    fn gram_identity_on_builtin_meshes() {
        for name in crate::mesh_geometry::BUILTIN_MESHES {
            let mesh = builtin_mesh(name).unwrap();
            for el in &mesh.elements {
                let b = mgs_orthonormalize(el, 20).unwrap();
                // a different rule from the one used to build the basis
                let rule = element_rule(el, 44);
                let v = b.values(&rule.points, 0).val;
                let w = DMatrix::from_diagonal(&DVector::from_vec(rule.weights.clone()));
                let g = v.transpose() * w * &v;
                let err = (g - DMatrix::<f64>::identity(dim_p(20), dim_p(20))).amax();
                // concave elements lose about one digit every four degrees
                assert!(err < 1e-9, "{name}: {err:e}");
            }
        }
    }

    #[test]
    fn partial_matrix_matches_pointwise_derivatives() {
        let mesh = builtin_mesh("bezier4").unwrap();
        let el = &mesh.elements[0];
        let b = mgs_orthonormalize(el, 6).unwrap();
        let pts = vec![Point2::new(0.2, 0.1), Point2::new(0.4, 0.3)];
        let vals = b.values(&pts, 2);
        let dx = b.partial_matrix(1, 0);
        let dxy = b.partial_matrix(1, 1);
        for (row, _) in pts.iter().enumerate() {
            for a in 0..b.dim() {
                let via_matrix: f64 = (0..b.dim()).map(|g| vals.val[(row, g)] * dx[(g, a)]).sum();
                assert!(
                    (via_matrix - vals.dx[(row, a)]).abs() < 1e-9 * (1.0 + vals.dx[(row, a)].abs())
                );
                let via_matrix: f64 = (0..b.dim()).map(|g| vals.val[(row, g)] * dxy[(g, a)]).sum();
                assert!(
                    (via_matrix - vals.dxy[(row, a)]).abs()
                        < 1e-8 * (1.0 + vals.dxy[(row, a)].abs())
                );
            }
        }
    }
}
