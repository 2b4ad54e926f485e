//! Error norms, parametric studies and CSV output.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::assembly::{
    assemble, condition_number, solve, Assembled, Consistency, Discretization, FormWeight,
    Formulation, RankConfig, TauPolicy,
};
use crate::coefficients::Coefficient;
use crate::manufactured::ManufacturedCase;
use crate::mesh_geometry::Mesh;
use crate::polynomials::dim_p;
use crate::projectors::{Problem, SelfStabVersion};
use crate::stabilization::StabKind;

pub const CSV_HEADER: &str =
    "mesh,problem,formulation,k,tau,tol,l_max,err_energy,err_l2,err_pressure,cond,diverged,seconds";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRecord {
    pub energy: f64,
    pub l2: f64,
    pub pressure: Option<f64>,
}

/// Relative errors of `Π⁰_k u_h` (and `p_h`) against the exact case, in the
/// weighted energy norm, L² and pressure L². Absolute values are returned
/// when the exact norm vanishes.
pub fn error_norms(
    asm: &Assembled,
    u: &DVector<f64>,
    case: &ManufacturedCase,
    weight: &FormWeight,
) -> ErrorRecord {
    let ph = case.problem.physics();
    let (mut e_en, mut n_en, mut e_l2, mut n_l2, mut e_p, mut n_p) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (e, local) in asm.locals.iter().enumerate() {
        let ep = &local.projectors;
        let ed = &ep.ed;
        let dk = dim_p(ep.k());
        let ul = asm.local_dofs(e, u);
        let coef: Vec<DVector<f64>> = ep.p0k().iter().map(|p| p * &ul).collect();
        let pc = asm.system.dofmap.pressure_offset.get(e).map(|&off| {
            let np = asm.system.dofmap.n_pressure_per_element;
            u.rows(off, np).clone_owned()
        });
        for (q, &p) in ed.rule.points.iter().enumerate() {
            let w = ed.rule.weights[q];
            let val = ed.vals.val.row(q);
            let (dx, dy) = (ed.vals.dx.row(q), ed.vals.dy.row(q));
            let exact = case.value(p);
            let exact_flux = case.flux(p);
            let mut uh = [0.0; 2];
            let mut grad = [[0.0; 2]; 2];
            for c in 0..ph.nf {
                for a in 0..dk {
                    uh[c] += coef[c][a] * val[a];
                    grad[c][0] += coef[c][a] * dx[a];
                    grad[c][1] += coef[c][a] * dy[a];
                }
                e_l2 += w * (exact[c] - uh[c]).powi(2);
                n_l2 += w * exact[c].powi(2);
            }
            let diff: Vec<f64> = (0..ph.nd)
                .map(|d| {
                    let h: f64 = (0..ph.nf)
                        .map(|f| ph.ax[(f, d)] * grad[f][0] + ph.ay[(f, d)] * grad[f][1])
                        .sum();
                    exact_flux[d] - h
                })
                .collect();
            let wm = &weight.at(p)[0];
            for c in 0..ph.nd {
                for d in 0..ph.nd {
                    e_en += w * diff[c] * wm[(c, d)] * diff[d];
                    n_en += w * exact_flux[c] * wm[(c, d)] * exact_flux[d];
                }
            }
            if let (Some(pc), Some(pe)) = (&pc, case.pressure(p)) {
                let mut phv = 0.0;
                for a in 0..pc.len() {
                    phv += pc[a] * val[a];
                }
                e_p += w * (pe - phv).powi(2);
                n_p += w * pe * pe;
            }
        }
    }
    let rel = |e: f64, n: f64| if n > 1e-300 { (e / n).sqrt() } else { e.sqrt() };
    ErrorRecord {
        energy: rel(e_en, n_en),
        l2: rel(e_l2, n_l2),
        pressure: (case.problem == Problem::Stokes).then(|| rel(e_p, n_p)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub mesh: String,
    pub problem: Problem,
    pub formulation: String,
    pub k: usize,
    pub tau: Option<TauPolicy>,
    pub tol: Option<f64>,
    pub l_max: Option<usize>,
    pub err_energy: f64,
    pub err_l2: f64,
    pub err_pressure: Option<f64>,
    pub cond: Option<f64>,
    pub diverged: bool,
    pub seconds: f64,
    /// Failure message for rows that could not be computed.
    pub error: Option<String>,
}

impl BenchResult {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mesh,
            self.problem,
            self.formulation,
            self.k,
            self.tau.map(|t| t.to_string()).unwrap_or_default(),
            opt(self.tol),
            self.l_max.map(|l| l.to_string()).unwrap_or_default(),
            self.err_energy,
            self.err_l2,
            opt(self.err_pressure),
            opt(self.cond),
            self.diverged,
            self.seconds,
        )
    }
}

/// Which exact solution a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    Sine,
    Patch,
}

/// One solve: assemble, solve, measure.
pub fn run_one(mesh: &Mesh, mesh_name: &str, disc: &Discretization, kind: CaseKind) -> BenchResult {
    let start = Instant::now();
    let case = match kind {
        CaseKind::Sine => ManufacturedCase::sine(disc.problem),
        CaseKind::Patch => ManufacturedCase::patch(disc.problem, mesh, disc.k),
    };
    let mut row = BenchResult {
        mesh: mesh_name.to_string(),
        problem: disc.problem,
        formulation: disc.formulation.to_string(),
        k: disc.k,
        tau: (!disc.formulation.is_self_stabilized()).then_some(disc.tau),
        tol: disc
            .formulation
            .is_self_stabilized()
            .then_some(disc.rank.tol_mult),
        l_max: None,
        err_energy: f64::NAN,
        err_l2: f64::NAN,
        err_pressure: None,
        cond: None,
        diverged: true,
        seconds: 0.0,
        error: None,
    };
    let outcome = assemble(mesh, disc, &case).and_then(|asm| {
        let u = solve(&asm.system)?;
        Ok((
            error_norms(&asm, &u, &case, &disc.weight),
            condition_number(&asm.system),
            asm.ell_max(),
        ))
    });
    match outcome {
        Ok((err, cond, ell)) => {
            row.err_energy = err.energy;
            row.err_l2 = err.l2;
            row.err_pressure = err.pressure;
            row.cond = cond;
            row.l_max = ell;
            row.diverged = !err.energy.is_finite();
        }
        Err(e) => {
            log::warn!(
                "{mesh_name} {} {} k={}: {e}",
                disc.problem,
                disc.formulation,
                disc.k
            );
            row.error = Some(e.to_string());
        }
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

/// Runs all discretizations in parallel, returning rows in input order with divergence flags set.
pub fn run_all(
    mesh: &Mesh,
    mesh_name: &str,
    discs: &[Discretization],
    kind: CaseKind,
) -> Vec<BenchResult> {
    let mut rows: Vec<BenchResult> = discs
        .par_iter()
        .map(|d| run_one(mesh, mesh_name, d, kind))
        .collect();
    flag_divergence(&mut rows);
    rows
}

/// Marks rows whose energy error exceeds `10³ ×` the error two orders lower, or is not finite.
pub fn flag_divergence(rows: &mut [BenchResult]) {
    let key = |r: &BenchResult| {
        (
            r.mesh.clone(),
            r.problem,
            r.formulation.clone(),
            r.tau.map(|t| t.to_string()),
            r.tol.map(|t| t.to_bits()),
        )
    };
    let snapshot: Vec<_> = rows.iter().map(|r| (key(r), r.k, r.err_energy)).collect();
    for r in rows.iter_mut() {
        if !r.err_energy.is_finite() {
            r.diverged = true;
            continue;
        }
        let kr = key(r);
        if let Some((_, _, prev)) = snapshot
            .iter()
            .find(|(k2, kk, _)| *k2 == kr && *kk + 2 == r.k)
        {
            if prev.is_finite() && r.err_energy > 1e3 * prev {
                r.diverged = true;
            }
        }
    }
}

fn discretizations(
    problem: Problem,
    formulations: &[Formulation],
    ks: &[usize],
    taus: &[TauPolicy],
    tol_mults: &[f64],
    weight: Option<&FormWeight>,
) -> Vec<Discretization> {
    let mut out = Vec::new();
    for &f in formulations {
        for &k in ks {
            if problem == Problem::Stokes && k < 2 {
                continue;
            }
            let base = Discretization::new(problem, f, k);
            let base = match weight {
                Some(w) => base.with_weight(w.clone()),
                None => base,
            };
            if f.is_self_stabilized() {
                for &m in tol_mults {
                    out.push(base.clone().with_rank(RankConfig {
                        tol_mult: m,
                        ..RankConfig::default()
                    }));
                }
            } else if taus.is_empty() {
                out.push(base);
            } else {
                for &t in taus {
                    out.push(base.clone().with_tau(t));
                }
            }
        }
    }
    out
}

/// Study over formulations, orders, stabilization parameters and tolerance multipliers.
#[allow(clippy::too_many_arguments)]
pub fn run(
    mesh: &Mesh,
    mesh_name: &str,
    problem: Problem,
    formulations: &[Formulation],
    ks: &[usize],
    taus: &[TauPolicy],
    tol_mults: &[f64],
    coefficient: Option<Coefficient>,
) -> Vec<BenchResult> {
    let weight = coefficient.map(FormWeight::from_coefficient);
    let tm = if tol_mults.is_empty() {
        vec![1.0]
    } else {
        tol_mults.to_vec()
    };
    let discs = discretizations(problem, formulations, ks, taus, &tm, weight.as_ref());
    run_all(mesh, mesh_name, &discs, CaseKind::Sine)
}

/// `τ ∈ {10⁻¹⁰, 10⁻⁸, …, 10¹⁰}` plus the mean policy.
pub fn default_taus() -> Vec<TauPolicy> {
    let mut t: Vec<TauPolicy> = (-5..=5)
        .map(|e| TauPolicy::Value(10f64.powi(2 * e)))
        .collect();
    t.push(TauPolicy::Mean);
    t
}

pub fn sweep_tau(
    mesh: &Mesh,
    mesh_name: &str,
    problem: Problem,
    stab: StabKind,
    ks: &[usize],
    taus: &[TauPolicy],
) -> Vec<BenchResult> {
    run(
        mesh,
        mesh_name,
        problem,
        &[Formulation::stabilized(stab)],
        ks,
        taus,
        &[],
        None,
    )
}

pub fn sweep_tol(
    mesh: &Mesh,
    mesh_name: &str,
    problem: Problem,
    version: SelfStabVersion,
    ks: &[usize],
    tol_mults: &[f64],
) -> Vec<BenchResult> {
    run(
        mesh,
        mesh_name,
        problem,
        &[Formulation::self_stabilized(version)],
        ks,
        &[],
        tol_mults,
        None,
    )
}

pub fn compare_formulations(
    mesh: &Mesh,
    mesh_name: &str,
    problem: Problem,
    ks: &[usize],
    formulations: &[Formulation],
) -> Vec<BenchResult> {
    run(mesh, mesh_name, problem, formulations, ks, &[], &[], None)
}

/// Standard (elliptic and L²-gradient consistency) against coefficient-aware variants.
pub fn vc_formulations(problem: Problem) -> Vec<Formulation> {
    let mut f = vec![
        Formulation::stabilized(StabKind::S3),
        Formulation::Stabilized {
            stab: StabKind::S3,
            consistency: Consistency::GradientL2,
        },
        Formulation::Stabilized {
            stab: StabKind::S3,
            consistency: Consistency::CoefficientAware,
        },
        Formulation::SelfStabilized {
            version: SelfStabVersion::V3,
            vc: true,
        },
        Formulation::SelfStabilized {
            version: SelfStabVersion::V6,
            vc: true,
        },
    ];
    if problem == Problem::Elasticity {
        f.push(Formulation::self_stabilized(SelfStabVersion::V1));
        f.push(Formulation::SelfStabilized {
            version: SelfStabVersion::V1,
            vc: true,
        });
    }
    f
}

pub fn compare_vc(
    mesh: &Mesh,
    mesh_name: &str,
    problem: Problem,
    ks: &[usize],
    coefficient: Coefficient,
) -> Vec<BenchResult> {
    run(
        mesh,
        mesh_name,
        problem,
        &vc_formulations(problem),
        ks,
        &[],
        &[],
        Some(coefficient),
    )
}

pub fn write_csv(rows: &[BenchResult], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_geometry::builtin_mesh;

    fn row(k: usize, e: f64) -> BenchResult {
        BenchResult {
            mesh: "m".into(),
            problem: Problem::Laplace,
            formulation: "S1".into(),
            k,
            tau: Some(TauPolicy::Value(1.0)),
            tol: None,
            l_max: None,
            err_energy: e,
            err_l2: e,
            err_pressure: None,
            cond: None,
            diverged: false,
            seconds: 0.0,
            error: None,
        }
    }

    #[test]
    fn divergence_flags() {
        let mut rows = vec![
            row(1, 1e-2),
            row(2, 1e-3),
            row(3, 20.0),
            row(4, 1e-4),
            row(5, f64::NAN),
        ];
        flag_divergence(&mut rows);
        let flags: Vec<bool> = rows.iter().map(|r| r.diverged).collect();
        assert_eq!(flags, vec![false, false, true, false, true]);
    }

    #[test]
    fn csv_has_frozen_columns() {
        let mut buf = Vec::new();
        write_csv(&[row(2, 0.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 13);
        assert!(lines[1].starts_with("m,laplace,S1,2,1,,,0.5,0.5,,,false,"));
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mesh = builtin_mesh("quad").unwrap();
        let disc = Discretization::new(Problem::Laplace, Formulation::stabilized(StabKind::S1), 2);
        let case = ManufacturedCase::polynomial(Problem::Laplace, 0, 0);
        let zero = ManufacturedCase {
            u: vec![std::sync::Arc::new(|_| Default::default())],
            ..case
        };
        let asm = assemble(&mesh, &disc, &zero).unwrap();
        let u = solve(&asm.system).unwrap();
        assert!(u.amax() < 1e-14);
    }
}
