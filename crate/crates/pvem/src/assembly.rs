//! Local stiffness matrices, rank-driven detection of the self-stabilized
//! degree increment, global assembly with Dirichlet conditions, and solves.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::coefficients::{piecewise_constant_approx, Coefficient};
use crate::manufactured::ManufacturedCase;
use crate::mesh_geometry::{Element, Mesh, Point2};
use crate::polynomials::dim_p;
use crate::projectors::dofs::{build_dofmap, DofMap, LocalLayout};
use crate::projectors::element::{DEFAULT_SURPLUS, VARIABLE_SURPLUS};
use crate::projectors::engine::{Block, Projection, Target, Weight};
use crate::projectors::{ElementProjectors, ProjectorError, SpaceKind};
use crate::quadrature::element_rule;
use crate::stabilization::{stab_matrix, tau_mean, StabKind};

pub use crate::projectors::{Problem, SelfStabVersion};

/// Consistency part of a stabilized formulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Consistency {
    /// Energy of the elliptic projection.
    Elliptic,
    /// Energy of the L² projection of the flux onto `[P_{k-1}]`.
    GradientL2,
    /// Elliptic projection in the coefficient-weighted pairing.
    CoefficientAware,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    Stabilized {
        stab: StabKind,
        consistency: Consistency,
    },
    SelfStabilized {
        version: SelfStabVersion,
        vc: bool,
    },
}

impl Formulation {
    pub fn stabilized(stab: StabKind) -> Self {
        Formulation::Stabilized {
            stab,
            consistency: Consistency::Elliptic,
        }
    }

    pub fn self_stabilized(version: SelfStabVersion) -> Self {
        Formulation::SelfStabilized { version, vc: false }
    }

    /// S1..S5 and V1..V6.
    pub fn standard_set() -> Vec<Formulation> {
        StabKind::ALL
            .iter()
            .map(|&s| Formulation::stabilized(s))
            .chain(
                SelfStabVersion::ALL
                    .iter()
                    .map(|&v| Formulation::self_stabilized(v)),
            )
            .collect()
    }

    pub fn is_self_stabilized(&self) -> bool {
        matches!(self, Formulation::SelfStabilized { .. })
    }

    pub fn is_coefficient_aware(&self) -> bool {
        matches!(
            self,
            Formulation::SelfStabilized { vc: true, .. }
                | Formulation::Stabilized {
                    consistency: Consistency::CoefficientAware,
                    ..
                }
        )
    }

    /// Rejects combinations without a definition.
    pub fn check(&self, problem: Problem) -> Result<(), AssemblyError> {
        if self.is_coefficient_aware() && problem == Problem::Stokes {
            return Err(AssemblyError::Incompatible(format!(
                "{self} is not defined for stokes"
            )));
        }
        if let Formulation::SelfStabilized { version, vc: true } = self {
            if !version.has_coefficient_variant() {
                return Err(AssemblyError::Incompatible(format!(
                    "{self} has no coefficient-aware variant"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formulation::Stabilized {
                stab,
                consistency: Consistency::Elliptic,
            } => write!(f, "{stab}"),
            Formulation::Stabilized {
                stab,
                consistency: Consistency::GradientL2,
            } => write!(f, "PI0-{stab}"),
            Formulation::Stabilized {
                stab,
                consistency: Consistency::CoefficientAware,
            } => write!(f, "VC-{stab}"),
            Formulation::SelfStabilized { version, vc: false } => write!(f, "{version}"),
            Formulation::SelfStabilized { version, vc: true } => write!(f, "VC-{version}"),
        }
    }
}

impl FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let up = s.trim().to_ascii_uppercase();
        let (prefix, rest) = match up.split_once('-') {
            Some((p, r)) => (Some(p.to_string()), r.to_string()),
            None => (None, up.clone()),
        };
        let version = |r: &str| -> Option<SelfStabVersion> {
            let i: usize = r.strip_prefix('V')?.parse().ok()?;
            SelfStabVersion::ALL.get(i.checked_sub(1)?).copied()
        };
        let bad = || format!("unknown formulation `{s}` (S1..S5, PI0-S#, VC-S#, V1..V6, VC-V#)");
        match prefix.as_deref() {
            None => {
                if let Ok(stab) = rest.parse::<StabKind>() {
                    Ok(Formulation::stabilized(stab))
                } else {
                    version(&rest)
                        .map(Formulation::self_stabilized)
                        .ok_or_else(bad)
                }
            }
            Some("PI0") => rest
                .parse::<StabKind>()
                .map(|stab| Formulation::Stabilized {
                    stab,
                    consistency: Consistency::GradientL2,
                })
                .map_err(|_| bad()),
            Some("VC") => {
                if let Ok(stab) = rest.parse::<StabKind>() {
                    Ok(Formulation::Stabilized {
                        stab,
                        consistency: Consistency::CoefficientAware,
                    })
                } else {
                    version(&rest)
                        .map(|version| Formulation::SelfStabilized { version, vc: true })
                        .ok_or_else(bad)
                }
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauPolicy {
    Value(f64),
    /// Per element, the mean eigenvalue of the consistency matrix.
    Mean,
}

impl fmt::Display for TauPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauPolicy::Value(t) => write!(f, "{t}"),
            TauPolicy::Mean => f.write_str("mean"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankConfig {
    /// Multiple of the default tolerance `N · eps(‖K‖₂)`.
    pub tol_mult: f64,
    pub max_ell: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            tol_mult: 1.0,
            max_ell: 25,
        }
    }
}

/// Weight of the bilinear form.
#[derive(Clone, Debug)]
pub enum FormWeight {
    Constant(DMatrix<f64>),
    Variable(Coefficient),
}

impl FormWeight {
    pub fn from_coefficient(c: Coefficient) -> Self {
        if c.is_constant() {
            FormWeight::Constant(c.matrix(Point2::new(0.5, 0.5)))
        } else {
            FormWeight::Variable(c)
        }
    }

    pub fn weight(&self) -> Weight<'_> {
        match self {
            FormWeight::Constant(m) => Weight::Constant(m.clone()),
            FormWeight::Variable(c) => Weight::Variable(c),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            FormWeight::Constant(m) => m.nrows(),
            FormWeight::Variable(c) => c.size(),
        }
    }

    /// Value and partial derivatives at a point.
    pub fn at(&self, p: Point2) -> [DMatrix<f64>; 3] {
        match self {
            FormWeight::Constant(m) => {
                let z = DMatrix::zeros(m.nrows(), m.ncols());
                [m.clone(), z.clone(), z]
            }
            FormWeight::Variable(c) => c.matrix_with_derivatives(p),
        }
    }

    /// Constant stand-in on an element: the value itself, or the mean at the element rule points.
    pub fn element_constant(&self, element: &Element, k: usize) -> DMatrix<f64> {
        match self {
            FormWeight::Constant(m) => m.clone(),
            FormWeight::Variable(c) => {
                piecewise_constant_approx(c, &element_rule(element, 2 * k + DEFAULT_SURPLUS).points)
            }
        }
    }
}

/// Unit weight for Laplace, a steel-like isotropic law for elasticity, unit viscosity for Stokes.
pub fn default_weight(problem: Problem) -> FormWeight {
    match problem {
        Problem::Laplace => FormWeight::Constant(DMatrix::identity(2, 2)),
        Problem::Elasticity => FormWeight::from_coefficient(Coefficient::Elastic(
            crate::coefficients::isotropic_steel_like(),
        )),
        Problem::Stokes => FormWeight::Constant(DMatrix::identity(4, 4)),
    }
}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub problem: Problem,
    pub formulation: Formulation,
    pub k: usize,
    pub tau: TauPolicy,
    pub rank: RankConfig,
    pub weight: FormWeight,
    pub surplus: usize,
}

impl Discretization {
    pub fn new(problem: Problem, formulation: Formulation, k: usize) -> Self {
        let tau = if problem == Problem::Elasticity {
            0.5
        } else {
            1.0
        };
        Discretization {
            problem,
            formulation,
            k,
            tau: TauPolicy::Value(tau),
            rank: RankConfig::default(),
            weight: default_weight(problem),
            surplus: DEFAULT_SURPLUS,
        }
    }

    pub fn with_tau(mut self, tau: TauPolicy) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_rank(mut self, rank: RankConfig) -> Self {
        self.rank = rank;
        self
    }

    pub fn with_weight(mut self, weight: FormWeight) -> Self {
        if matches!(weight, FormWeight::Variable(_)) {
            // coefficient integrals need the extra exactness for polynomial consistency
            self.surplus = self.surplus.max(VARIABLE_SURPLUS);
        }
        self.weight = weight;
        self
    }

    pub fn with_coefficient(self, c: Coefficient) -> Self {
        self.with_weight(FormWeight::from_coefficient(c))
    }

    /// Weight of the base elliptic projection used for the enhancement.
    pub fn base_weight(&self, element: &Element) -> DMatrix<f64> {
        match self.problem {
            Problem::Laplace => DMatrix::identity(2, 2),
            Problem::Elasticity => self.weight.element_constant(element, self.k),
            Problem::Stokes => DMatrix::identity(4, 4),
        }
    }
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Projector(#[from] ProjectorError),
    #[error(
        "element {element}: rank {rank} < {needed} after raising the degree increment to {ell}"
    )]
    AugmentationCap {
        element: usize,
        ell: usize,
        rank: usize,
        needed: usize,
    },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("{0}")]
    Incompatible(String),
}

#[derive(Clone, Debug)]
pub struct LocalStiffness<'a> {
    pub matrix: DMatrix<f64>,
    pub consistency: DMatrix<f64>,
    /// Unscaled stabilization block (stabilized formulations).
    pub stabilization: Option<DMatrix<f64>>,
    pub tau: Option<f64>,
    /// Detected degree increment (self-stabilized formulations).
    pub ell: Option<usize>,
    pub rank: usize,
    pub tol: f64,
    /// Flux projection behind the consistency term.
    pub projection: Projection,
    pub projectors: ElementProjectors<'a>,
}

impl LocalStiffness<'_> {
    pub fn layout(&self) -> &LocalLayout {
        &self.projectors.layout
    }
}

/// MATLAB-style spacing of floating point numbers at `x`.
pub fn ulp(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return f64::EPSILON;
    }
    f64::EPSILON * 2f64.powi(x.abs().log2().floor() as i32)
}

/// Numerical rank with tolerance `mult · N · eps(‖K‖₂)`; returns `(rank, tol)`.
pub fn numerical_rank(k: &DMatrix<f64>, mult: f64) -> (usize, f64) {
    let sv = k.clone().singular_values();
    let norm = sv.max();
    let tol = mult * k.nrows().max(k.ncols()) as f64 * ulp(norm);
    (sv.iter().filter(|&&s| s >= tol).count(), tol)
}

/// Smallest `ℓ ≥ 1` for which the projected flux has at least `N - kernel` functions.
pub fn initial_ell(problem: Problem, version: SelfStabVersion, k: usize, nv: usize) -> usize {
    let nf = problem.field_dim();
    let mut ell = 1;
    loop {
        let space = version.space(problem, ell);
        let n = LocalLayout::new(problem, k, nv, space)
            .map(|l| l.len())
            .unwrap_or(0);
        if nf * dim_p(k + ell) >= n.saturating_sub(problem.kernel_dim()) {
            return ell;
        }
        ell += 1;
    }
}

/// Local stiffness matrix of element `index`.
pub fn local_stiffness<'a>(
    element: &'a Element,
    index: usize,
    disc: &Discretization,
) -> Result<LocalStiffness<'a>, AssemblyError> {
    disc.formulation.check(disc.problem)?;
    let problem = disc.problem;
    let k = disc.k;
    let nd = problem.physics().nd;
    if disc.weight.size() != nd {
        return Err(AssemblyError::Incompatible(format!(
            "{problem} needs a {nd}x{nd} coefficient, got {0}x{0}",
            disc.weight.size()
        )));
    }
    let form_w = disc.weight.weight();
    let base_w = disc.base_weight(element);
    match disc.formulation {
        Formulation::Stabilized { stab, consistency } => {
            let ep = ElementProjectors::new(
                element,
                problem,
                k,
                SpaceKind::Standard,
                k,
                base_w,
                disc.surplus,
            )?;
            let projection = match consistency {
                Consistency::Elliptic => ep.base.clone(),
                Consistency::GradientL2 => {
                    let t = Target {
                        blocks: vec![Block::Vector { degree: k - 1 }],
                        kernel: false,
                    };
                    ep.project(&t, &Weight::identity(nd))?
                }
                Consistency::CoefficientAware => {
                    let t = Target {
                        blocks: vec![Block::Potential { degree: k }],
                        kernel: true,
                    };
                    ep.project(&t, &form_w)?
                }
            };
            let kc = projection.energy(&ep.ed, &form_w);
            let ks = stab_matrix(stab, &ep, &kc, 1.0)?;
            let tau = match disc.tau {
                TauPolicy::Value(t) => t,
                TauPolicy::Mean => tau_mean(&kc),
            };
            let matrix = &kc + &ks * tau;
            let (rank, tol) = numerical_rank(&matrix, disc.rank.tol_mult);
            Ok(LocalStiffness {
                matrix,
                consistency: kc,
                stabilization: Some(ks),
                tau: Some(tau),
                ell: None,
                rank,
                tol,
                projection,
                projectors: ep,
            })
        }
        Formulation::SelfStabilized { version, vc } => {
            let nv = element.n_vertices();
            let mut ell = initial_ell(problem, version, k, nv);
            let proj_w = if vc {
                form_w.clone()
            } else {
                match version {
                    SelfStabVersion::V1 | SelfStabVersion::V2 | SelfStabVersion::V3 => {
                        Weight::identity(nd)
                    }
                    _ => Weight::Constant(base_w.clone()),
                }
            };
            loop {
                let space = version.space(problem, ell);
                let ep = ElementProjectors::new(
                    element,
                    problem,
                    k,
                    space,
                    k + ell,
                    base_w.clone(),
                    disc.surplus,
                )?;
                let proj = ep.selfstab(version, ell, &proj_w)?;
                let matrix = proj.energy(&ep.ed, &form_w);
                let (rank, tol) = numerical_rank(&matrix, disc.rank.tol_mult);
                let needed = ep.n_dofs() - problem.kernel_dim();
                if rank >= needed {
                    return Ok(LocalStiffness {
                        consistency: matrix.clone(),
                        matrix,
                        stabilization: None,
                        tau: None,
                        ell: Some(ell),
                        rank,
                        tol,
                        projection: proj,
                        projectors: ep,
                    });
                }
                if ell >= disc.rank.max_ell {
                    return Err(AssemblyError::AugmentationCap {
                        element: index,
                        ell,
                        rank,
                        needed,
                    });
                }
                ell += 1;
            }
        }
    }
}

/// Detected degree increment of a self-stabilized formulation on one element.
pub fn detect_augmentation(
    element: &Element,
    disc: &Discretization,
) -> Result<usize, AssemblyError> {
    if !disc.formulation.is_self_stabilized() {
        return Err(AssemblyError::Incompatible(
            "degree detection needs a self-stabilized formulation".into(),
        ));
    }
    Ok(local_stiffness(element, 0, disc)?.ell.unwrap_or(0))
}

#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub problem: Problem,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub dofmap: DofMap,
    /// Prescribed `(index, value)` pairs.
    pub dirichlet: Vec<(usize, f64)>,
}

impl GlobalSystem {
    fn free(&self) -> Vec<usize> {
        let mut fixed = vec![false; self.matrix.nrows()];
        for &(i, _) in &self.dirichlet {
            fixed[i] = true;
        }
        (0..fixed.len()).filter(|&i| !fixed[i]).collect()
    }

    /// Matrix restricted to the free dofs.
    pub fn reduced_matrix(&self) -> DMatrix<f64> {
        let free = self.free();
        self.matrix.select_rows(&free).select_columns(&free)
    }
}

#[derive(Debug)]
pub struct Assembled<'m> {
    pub system: GlobalSystem,
    pub locals: Vec<LocalStiffness<'m>>,
}

impl Assembled<'_> {
    pub fn ell_max(&self) -> Option<usize> {
        self.locals.iter().filter_map(|l| l.ell).max()
    }

    pub fn local_dofs(&self, e: usize, u: &DVector<f64>) -> DVector<f64> {
        let map = &self.system.dofmap.local_to_global[e];
        DVector::from_iterator(map.len(), map.iter().map(|&g| u[g]))
    }
}

/// Local matrices of all elements, computed in parallel.
pub fn local_stiffnesses<'m>(
    mesh: &'m Mesh,
    disc: &Discretization,
) -> Result<Vec<LocalStiffness<'m>>, AssemblyError> {
    mesh.elements
        .par_iter()
        .enumerate()
        .map(|(i, el)| local_stiffness(el, i, disc))
        .collect()
}

/// Scatter-adds local matrices and loads; Dirichlet values come from the exact solution.
pub fn assemble<'m>(
    mesh: &'m Mesh,
    disc: &Discretization,
    case: &ManufacturedCase,
) -> Result<Assembled<'m>, AssemblyError> {
    let locals = local_stiffnesses(mesh, disc)?;
    let spaces: Vec<SpaceKind> = locals.iter().map(|l| l.layout().space).collect();
    let dofmap = build_dofmap(mesh, disc.problem, disc.k, &spaces)?;
    let n = dofmap.n_total;
    let mut matrix = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    let source = |p: Point2| case.source(p, &disc.weight);
    for (e, local) in locals.iter().enumerate() {
        let map = &dofmap.local_to_global[e];
        for (i, &gi) in map.iter().enumerate() {
            for (j, &gj) in map.iter().enumerate() {
                matrix[(gi, gj)] += local.matrix[(i, j)];
            }
        }
        let load = local.projectors.load(&source);
        for (i, &gi) in map.iter().enumerate() {
            rhs[gi] += load[i];
        }
        if disc.problem == Problem::Stokes {
            let b = local.projectors.divergence_matrix();
            let off = dofmap.pressure_offset[e];
            let ed = &local.projectors.ed;
            let mult = dofmap.multiplier().expect("stokes has a multiplier");
            for a in 0..b.nrows() {
                for (i, &gi) in map.iter().enumerate() {
                    matrix[(off + a, gi)] -= b[(a, i)];
                    matrix[(gi, off + a)] -= b[(a, i)];
                }
                let mean: f64 = ed
                    .rule
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * ed.vals.val[(q, a)])
                    .sum();
                matrix[(mult, off + a)] += mean;
                matrix[(off + a, mult)] += mean;
            }
        }
    }
    let dirichlet = dofmap
        .dirichlet
        .iter()
        .map(|d| (d.index, case.value(d.point)[d.component]))
        .collect();
    Ok(Assembled {
        system: GlobalSystem {
            problem: disc.problem,
            matrix,
            rhs,
            dofmap,
            dirichlet,
        },
        locals,
    })
}

/// Solves the system with the Dirichlet dofs eliminated.
pub fn solve(sys: &GlobalSystem) -> Result<DVector<f64>, AssemblyError> {
    let n = sys.matrix.nrows();
    let mut x = DVector::zeros(n);
    for &(i, v) in &sys.dirichlet {
        x[i] = v;
    }
    let free = sys.free();
    let a = sys.reduced_matrix();
    let mut b = sys.rhs.select_rows(&free);
    let ax = &sys.matrix * &x;
    for (r, &i) in free.iter().enumerate() {
        b[r] -= ax[i];
    }
    let xf = if sys.problem != Problem::Stokes {
        a.clone().cholesky().map(|c| c.solve(&b))
    } else {
        None
    };
    let xf = match xf {
        Some(v) => v,
        None => {
            let lu = a.clone().lu();
            let u = lu.u();
            let diag = u.diagonal();
            let (min, max) = diag.iter().fold((f64::INFINITY, 0f64), |(lo, hi), d| {
                (lo.min(d.abs()), hi.max(d.abs()))
            });
            lu.solve(&b).ok_or_else(|| {
                AssemblyError::Singular(format!(
                    "LU pivots range {min:e}..{max:e} on {} unknowns",
                    free.len()
                ))
            })?
        }
    };
    for (r, &i) in free.iter().enumerate() {
        x[i] = xf[r];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AssemblyError::Singular("non-finite solution".into()));
    }
    Ok(x)
}

/// `λ_max / λ_min` of the reduced matrix (`None` for the saddle-point problem
/// or when every dof is prescribed).
pub fn condition_number(sys: &GlobalSystem) -> Option<f64> {
    if sys.problem == Problem::Stokes {
        return None;
    }
    let a = sys.reduced_matrix();
    if a.is_empty() {
        return None;
    }
    let a = 0.5 * (&a + a.transpose());
    let ev = SymmetricEigen::new(a).eigenvalues;
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &e| {
        (lo.min(e.abs()), hi.max(e.abs()))
    });
    Some(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_geometry::builtin_mesh;

    #[test]
    fn formulation_names_round_trip() {
        let mut all = Formulation::standard_set();
        all.push("PI0-S3".parse().unwrap());
        all.push("VC-S3".parse().unwrap());
        all.push("VC-V6".parse().unwrap());
        for f in all {
            assert_eq!(f.to_string().parse::<Formulation>().unwrap(), f);
        }
        assert!("V7".parse::<Formulation>().is_err());
        assert!("XX-S1".parse::<Formulation>().is_err());
    }

    #[test]
    fn ulp_matches_definition() {
        assert_eq!(ulp(1.0), f64::EPSILON);
        assert_eq!(ulp(3.0), 2.0 * f64::EPSILON);
        assert_eq!(ulp(0.5), 0.5 * f64::EPSILON);
    }

    #[test]
    fn scalar_rows_sum_to_zero_and_elasticity_kernel_is_rigid() {
        let mesh = builtin_mesh("voronoi5").unwrap();
        for f in Formulation::standard_set() {
            let disc = Discretization::new(Problem::Laplace, f, 3);
            for (i, el) in mesh.elements.iter().enumerate() {
                let l = local_stiffness(el, i, &disc).unwrap();
                // dofs of a constant
                let c = l.projectors.d.column(0).clone_owned();
                assert!((&l.matrix * c).amax() < 1e-10 * l.matrix.amax(), "{f}");
            }
        }
    }

    #[test]
    fn initial_ell_for_square_k1() {
        assert_eq!(initial_ell(Problem::Laplace, SelfStabVersion::V3, 1, 4), 1);
    }
}
