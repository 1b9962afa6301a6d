//! Joint measurability of POVMs and existence of joint instruments, decided
//! by Dykstra alternating projections over a grid of PSD blocks with
//! row/column-sum constraints.

use serde::{Deserialize, Serialize};

use crate::channels::{choi_of_branch, Instrument};
use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, project_psd, ComplexMatrix, Effect, Povm, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Marginal residual accepted as feasible.
    pub tol: f64,
    /// Iterations between gap comparisons.
    pub window: usize,
    /// Largest relative decrease of the gap over one window that still
    /// counts as stalled.
    pub stall: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-7,
            window: 100,
            stall: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Compatible,
    Incompatible,
    Undecided,
}

/// Grid G_ij of effects whose row sums and column sums are the two
/// marginal POVMs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointPovmCandidate {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// effects[i][j] = G_ij.
    pub effects: Vec<Vec<Effect>>,
}

impl JointPovmCandidate {
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        effects: Vec<Vec<Effect>>,
    ) -> Result<Self> {
        Self::with_tol(row_labels, col_labels, effects, 1e-8)
    }

    pub fn with_tol(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        effects: Vec<Vec<Effect>>,
        complete: f64,
    ) -> Result<Self> {
        if effects.len() != row_labels.len() || effects.iter().any(|r| r.len() != col_labels.len())
        {
            return Err(Error::Dimension(
                "effect grid does not match the label lists".into(),
            ));
        }
        let d = effects
            .first()
            .and_then(|r| r.first())
            .map(Effect::dim)
            .ok_or_else(|| Error::Dimension("empty effect grid".into()))?;
        let mut total = ComplexMatrix::zeros(d, d);
        for e in effects.iter().flatten() {
            if e.dim() != d {
                return Err(Error::Dimension("effects of different dimensions".into()));
            }
            total += e.matrix();
        }
        let deviation = total.max_abs_diff(&ComplexMatrix::identity(d));
        if deviation > complete {
            return Err(Error::Incomplete { deviation });
        }
        Ok(Self {
            row_labels,
            col_labels,
            effects,
        })
    }

    /// Product grid E_i F_j of two commuting POVMs.
    pub fn product(a: &Povm, b: &Povm) -> Result<Self> {
        let mut grid = Vec::with_capacity(a.len());
        for e in a.effects() {
            let mut row = Vec::with_capacity(b.len());
            for f in b.effects() {
                let g = e.matrix().matmul(f.matrix())?;
                if g.hermiticity_defect() > 1e-10 {
                    return Err(Error::InvalidParameter(
                        "product grid needs commuting effects".into(),
                    ));
                }
                row.push(Effect::new(g.hermitian_part())?);
            }
            grid.push(row);
        }
        Self::new(a.labels().to_vec(), b.labels().to_vec(), grid)
    }

    pub fn dim(&self) -> usize {
        self.effects[0][0].dim()
    }
}

/// Row sums and column sums of the grid.
pub fn marginals(j: &JointPovmCandidate) -> Result<(Povm, Povm)> {
    let d = j.dim();
    let rows = j
        .effects
        .iter()
        .map(|r| {
            r.iter()
                .fold(ComplexMatrix::zeros(d, d), |acc, e| acc + e.matrix())
        })
        .collect::<Vec<_>>();
    let cols = (0..j.col_labels.len())
        .map(|c| {
            j.effects
                .iter()
                .fold(ComplexMatrix::zeros(d, d), |acc, r| acc + r[c].matrix())
        })
        .collect::<Vec<_>>();
    // The marginals inherit whatever completeness the grid itself has.
    let total = rows
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, r| acc + r);
    let slack = total.max_abs_diff(&ComplexMatrix::identity(d)) * 1.01;
    let tol = Tolerances {
        complete: slack.max(1e-8),
        psd: slack.max(1e-10),
        ..Tolerances::default()
    };
    let wrap = |labels: &[String], mats: Vec<ComplexMatrix>| -> Result<Povm> {
        let effects = mats
            .into_iter()
            .map(|m| Effect::with_tol(m.hermitian_part(), &tol))
            .collect::<Result<Vec<_>>>()?;
        Povm::with_tol(labels.to_vec(), effects, &tol)
    };
    Ok((wrap(&j.row_labels, rows)?, wrap(&j.col_labels, cols)?))
}

/// Grid of Choi matrices K_{f,w} of a joint instrument.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointInstrument {
    pub dims: (usize, usize),
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub choi: Vec<Vec<ComplexMatrix>>,
}

impl JointInstrument {
    /// The joint as an instrument with outcome labels "f|w".
    pub fn to_instrument(&self) -> Result<Instrument> {
        let mut branches = Vec::new();
        for (f, row) in self.row_labels.iter().zip(&self.choi) {
            for (w, c) in self.col_labels.iter().zip(row) {
                let choi = crate::channels::ChoiMatrix::new(c.clone(), self.dims)?;
                branches.push(crate::channels::Branch {
                    label: format!("{f}|{w}"),
                    kraus: crate::channels::branch_of_choi(&choi)?,
                });
            }
        }
        Instrument::with_tol(
            branches,
            &Tolerances {
                complete: 1e-6,
                ..Tolerances::default()
            },
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Joint {
    Povm(JointPovmCandidate),
    Instrument(JointInstrument),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatReport {
    pub verdict: Verdict,
    /// Final distance between the affine and PSD iterates. For an
    /// incompatible verdict this is the stalled positive gap.
    pub witness_margin: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub joint: Option<Joint>,
}

/// Feasibility problem: n x m grid of D x D PSD blocks with prescribed row
/// and column sums.
struct Grid<'a> {
    rows: &'a [ComplexMatrix],
    cols: &'a [ComplexMatrix],
}

struct Outcome {
    verdict: Verdict,
    blocks: Vec<ComplexMatrix>,
    gap: f64,
    residual: f64,
    iterations: usize,
}

impl Grid<'_> {
    fn n(&self) -> usize {
        self.rows.len()
    }

    fn m(&self) -> usize {
        self.cols.len()
    }

    fn dim(&self) -> usize {
        self.rows[0].rows()
    }

    fn row_sums(&self, x: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let (n, m, d) = (self.n(), self.m(), self.dim());
        (0..n)
            .map(|i| (0..m).fold(ComplexMatrix::zeros(d, d), |acc, j| acc + &x[i * m + j]))
            .collect()
    }

    fn col_sums(&self, x: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let (n, m, d) = (self.n(), self.m(), self.dim());
        (0..m)
            .map(|j| (0..n).fold(ComplexMatrix::zeros(d, d), |acc, i| acc + &x[i * m + j]))
            .collect()
    }

    /// Largest entry of the row/column constraint violation.
    fn residual(&self, x: &[ComplexMatrix]) -> f64 {
        let (rs, cs) = (self.row_sums(x), self.col_sums(x));
        let r = rs.iter().zip(self.rows).map(|(s, t)| s.max_abs_diff(t));
        let c = cs.iter().zip(self.cols).map(|(s, t)| s.max_abs_diff(t));
        r.chain(c).fold(0.0, f64::max)
    }

    /// Orthogonal projection onto {X : Σ_j X_ij = a_i, Σ_i X_ij = b_j}.
    /// Entrywise: X_ij + (a_i - r_i)/m + (b_j - c_j)/n - (T - S)/(nm).
    fn project_affine(&self, x: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let (n, m) = (self.n(), self.m());
        let r = self.row_sums(x);
        let c = self.col_sums(x);
        let s = r
            .iter()
            .fold(ComplexMatrix::zeros(self.dim(), self.dim()), |acc, v| {
                acc + v
            });
        let t = self
            .rows
            .iter()
            .fold(ComplexMatrix::zeros(self.dim(), self.dim()), |acc, v| {
                acc + v
            });
        let shift = (&t - &s).scale_real(1.0 / (n * m) as f64);
        let row_fix: Vec<ComplexMatrix> = r
            .iter()
            .zip(self.rows)
            .map(|(ri, ai)| (ai - ri).scale_real(1.0 / m as f64))
            .collect();
        let col_fix: Vec<ComplexMatrix> = c
            .iter()
            .zip(self.cols)
            .map(|(cj, bj)| (bj - cj).scale_real(1.0 / n as f64))
            .collect();
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                out.push(&(&(&x[i * m + j] + &row_fix[i]) + &col_fix[j]) - &shift);
            }
        }
        out
    }

    fn project_cone(x: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
        x.iter().map(|b| project_psd(&b.hermitian_part())).collect()
    }

    /// Keeps iterating after the first feasible hit until the residual is
    /// 1000x below tolerance or the remaining budget (at most `done` more
    /// iterations) runs out. Returns the best PSD iterate seen.
    fn polish(
        &self,
        mut x: Vec<ComplexMatrix>,
        mut p: Vec<ComplexMatrix>,
        mut q: Vec<ComplexMatrix>,
        residual: f64,
        opts: &SolverOptions,
        done: usize,
    ) -> Result<(Vec<ComplexMatrix>, f64, usize)> {
        let budget = done.min(opts.max_iter - done);
        let (mut best, mut best_res) = (x.clone(), residual);
        for k in 1..=budget {
            let xp: Vec<ComplexMatrix> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
            let y = self.project_affine(&xp);
            p = xp.iter().zip(&y).map(|(a, b)| a - b).collect();
            let yq: Vec<ComplexMatrix> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
            x = Self::project_cone(&yq)?;
            q = yq.iter().zip(&x).map(|(a, b)| a - b).collect();
            let r = self.residual(&x);
            if r < best_res {
                best = x.clone();
                best_res = r;
            }
            if best_res < 1e-3 * opts.tol {
                return Ok((best, best_res, k));
            }
        }
        Ok((best, best_res, budget))
    }

    fn solve(&self, opts: &SolverOptions) -> Result<Outcome> {
        let (n, m, d) = (self.n(), self.m(), self.dim());
        let zero = ComplexMatrix::zeros(d, d);
        let mut x = vec![zero.clone(); n * m];
        let mut p = vec![zero.clone(); n * m];
        let mut q = vec![zero; n * m];
        let mut gaps: Vec<f64> = Vec::new();
        let mut gap = f64::INFINITY;
        for it in 1..=opts.max_iter {
            let xp: Vec<ComplexMatrix> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
            let y = self.project_affine(&xp);
            p = xp.iter().zip(&y).map(|(a, b)| a - b).collect();
            let yq: Vec<ComplexMatrix> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
            x = Self::project_cone(&yq)?;
            q = yq.iter().zip(&x).map(|(a, b)| a - b).collect();

            let residual = self.residual(&x);
            gap = y
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).frobenius_norm().powi(2))
                .sum::<f64>()
                .sqrt();
            if residual < opts.tol {
                let (x, residual, extra) = self.polish(x, p, q, residual, opts, it)?;
                return Ok(Outcome {
                    verdict: Verdict::Compatible,
                    blocks: x,
                    gap,
                    residual,
                    iterations: it + extra,
                });
            }
            if it % opts.window == 0 {
                gaps.push(gap);
                if let [.., prev, cur] = gaps[..] {
                    if cur > 10.0 * opts.tol && prev - cur <= opts.stall * cur {
                        return Ok(Outcome {
                            verdict: Verdict::Incompatible,
                            blocks: x,
                            gap: cur,
                            residual,
                            iterations: it,
                        });
                    }
                }
            }
        }
        let residual = self.residual(&x);
        Ok(Outcome {
            verdict: Verdict::Undecided,
            blocks: x,
            gap,
            residual,
            iterations: opts.max_iter,
        })
    }
}

fn check_options(opts: &SolverOptions) -> Result<()> {
    if !(opts.tol > 0.0 && opts.tol.is_finite())
        || opts.window == 0
        || opts.max_iter == 0
        || opts.stall.is_nan()
        || opts.stall < 0.0
    {
        return Err(Error::InvalidParameter(format!(
            "bad solver options {opts:?}"
        )));
    }
    Ok(())
}

/// Decides whether A and B admit a joint POVM.
pub fn joint_povm_feasibility(a: &Povm, b: &Povm, opts: &SolverOptions) -> Result<CompatReport> {
    check_options(opts)?;
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "POVMs of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let rows: Vec<ComplexMatrix> = a.effects().iter().map(|e| e.matrix().clone()).collect();
    let cols: Vec<ComplexMatrix> = b.effects().iter().map(|e| e.matrix().clone()).collect();
    let out = Grid {
        rows: &rows,
        cols: &cols,
    }
    .solve(opts)?;
    let joint = match out.verdict {
        Verdict::Compatible => {
            let m = b.len();
            // Blocks are exactly PSD; their sum misses I by at most the
            // marginal residual per row, so the upper bound and completeness
            // are checked at that scale.
            let complete = (opts.tol * (a.len() * m) as f64).max(1e-8);
            let tol = Tolerances {
                psd: complete,
                ..Tolerances::default()
            };
            let grid = (0..a.len())
                .map(|i| {
                    (0..m)
                        .map(|j| Effect::with_tol(out.blocks[i * m + j].clone(), &tol))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Some(Joint::Povm(JointPovmCandidate::with_tol(
                a.labels().to_vec(),
                b.labels().to_vec(),
                grid,
                complete,
            )?))
        }
        _ => None,
    };
    Ok(CompatReport {
        verdict: out.verdict,
        witness_margin: if out.verdict == Verdict::Compatible {
            out.residual
        } else {
            out.gap
        },
        iterations: out.iterations,
        tolerance: opts.tol,
        joint,
    })
}

/// Decides whether instruments I and J admit K_{f,w} with Σ_w K_{f,w} = I_f
/// and Σ_f K_{f,w} = J_w. The induced POVMs are tested first since their
/// incompatibility already rules out a joint instrument.
pub fn joint_instrument_feasibility(
    i: &Instrument,
    j: &Instrument,
    opts: &SolverOptions,
) -> Result<CompatReport> {
    check_options(opts)?;
    if i.dims() != j.dims() {
        return Err(Error::Dimension(format!(
            "instruments with dims {:?} and {:?}",
            i.dims(),
            j.dims()
        )));
    }
    let choi_rows = i
        .branches()
        .iter()
        .map(|b| choi_of_branch(&b.kraus).map(|c| c.matrix().clone()))
        .collect::<Result<Vec<_>>>()?;
    let choi_cols = j
        .branches()
        .iter()
        .map(|b| choi_of_branch(&b.kraus).map(|c| c.matrix().clone()))
        .collect::<Result<Vec<_>>>()?;

    // Both families must sum to the same channel, otherwise the affine set
    // is empty.
    let n = choi_rows[0].rows();
    let total_i = choi_rows
        .iter()
        .fold(ComplexMatrix::zeros(n, n), |acc, c| acc + c);
    let total_j = choi_cols
        .iter()
        .fold(ComplexMatrix::zeros(n, n), |acc, c| acc + c);
    let mismatch = total_i.max_abs_diff(&total_j);
    if mismatch > opts.tol {
        return Ok(CompatReport {
            verdict: Verdict::Incompatible,
            witness_margin: (&total_i - &total_j).frobenius_norm(),
            iterations: 0,
            tolerance: opts.tol,
            joint: None,
        });
    }

    let povm_level = joint_povm_feasibility(&i.induced_povm()?, &j.induced_povm()?, opts)?;
    if povm_level.verdict == Verdict::Incompatible {
        return Ok(CompatReport {
            joint: None,
            ..povm_level
        });
    }

    let out = Grid {
        rows: &choi_rows,
        cols: &choi_cols,
    }
    .solve(opts)?;
    let joint = (out.verdict == Verdict::Compatible).then(|| {
        let m = j.len();
        Joint::Instrument(JointInstrument {
            dims: i.dims(),
            row_labels: i.labels(),
            col_labels: j.labels(),
            choi: out
                .blocks
                .chunks(m)
                .map(<[ComplexMatrix]>::to_vec)
                .collect(),
        })
    });
    Ok(CompatReport {
        verdict: out.verdict,
        witness_margin: if out.verdict == Verdict::Compatible {
            out.residual
        } else {
            out.gap
        },
        iterations: out.iterations,
        tolerance: opts.tol,
        joint,
    })
}

/// Unbiased binary qubit POVM {(I ± η n·σ)/2} with labels "+", "-".
fn binary(eta: f64, axis: [f64; 3]) -> Result<Povm> {
    Povm::unsharp_qubit(eta, axis)
}

/// Default final bracket width for [`sharpness_boundary`].
pub const DEFAULT_BRACKET: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryEstimate {
    pub eta: f64,
    /// Width of the final bracket (0 when η = 1 is already compatible).
    pub bracket: f64,
}

/// Largest sharpness η at which the equal-sharpness binary POVMs along two
/// Bloch axes remain jointly measurable, by bisection on solver verdicts.
pub fn sharpness_boundary(
    axis_a: [f64; 3],
    axis_b: [f64; 3],
    opts: &SolverOptions,
    bracket: f64,
) -> Result<BoundaryEstimate> {
    for axis in [axis_a, axis_b] {
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "axis {axis:?} is not a unit vector"
            )));
        }
    }
    if !(bracket > 0.0 && bracket < 1.0) {
        return Err(Error::InvalidParameter(format!("bracket width {bracket}")));
    }
    let verdict = |eta: f64| -> Result<Verdict> {
        Ok(joint_povm_feasibility(&binary(eta, axis_a)?, &binary(eta, axis_b)?, opts)?.verdict)
    };
    if verdict(1.0)? == Verdict::Compatible {
        return Ok(BoundaryEstimate {
            eta: 1.0,
            bracket: 0.0,
        });
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > bracket {
        let mid = 0.5 * (lo + hi);
        let mut probe = mid;
        let mut v = verdict(mid)?;
        if v == Verdict::Undecided {
            // Step to either side of mid before giving up.
            let step = 0.25 * (hi - lo);
            probe = mid - step;
            v = verdict(probe)?;
            if v == Verdict::Undecided {
                probe = mid + step;
                v = verdict(probe)?;
            }
            if v == Verdict::Undecided {
                return Err(Error::BoundaryUndecided(format!(
                    "solver undecided at η = {:.4} and on both sides (bracket [{lo:.4}, {hi:.4}])",
                    mid
                )));
            }
        }
        match v {
            Verdict::Compatible => lo = probe,
            _ => hi = probe,
        }
    }
    Ok(BoundaryEstimate {
        eta: 0.5 * (lo + hi),
        bracket: hi - lo,
    })
}

/// Smallest eigenvalue over a family of blocks.
pub fn min_block_eigenvalue<'a>(
    blocks: impl IntoIterator<Item = &'a ComplexMatrix>,
) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for b in blocks {
        worst = worst.min(eig_hermitian(&b.hermitian_part())?.min());
    }
    Ok(worst)
}
