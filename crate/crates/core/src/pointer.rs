//! Qubit coupled to a one-dimensional pointer by `exp(-i κ σ_z ⊗ p)` (ħ = 1),
//! with the pointer read out as the sign of its position.
//!
//! The coupling translates the pointer wavepacket by `±κ` conditioned on the
//! σ_z eigenvalue. For a centered Gaussian of width Δ the induced effects are
//! `E± = ½(I ± η σ_z)` with `η = erf(κ / (√2 Δ))`. [`eta_analytic`] evaluates
//! that law; [`induced_effects_numeric`] rebuilds the POVM from a sampled
//! wavepacket without using it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Effect, Povm};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error function; |error| < 1e-15 in practice. Odd by construction.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return -erf(-x);
    }
    if x <= 2.0 {
        erf_series(x)
    } else if x > 27.0 {
        1.0
    } else {
        1.0 - erfc_continued_fraction(x)
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > 27.0 {
        0.0
    } else if x > 2.0 {
        erfc_continued_fraction(x)
    } else {
        1.0 - erf(x)
    }
}

/// erf(x) = 2/√π e^{-x²} Σ_n 2ⁿ x^{2n+1} / (2n+1)!!; all terms positive.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// erfc(x) = e^{-x²}/√π · 1/(x + ½/(x + 1/(x + 3/2/(x + ...)))), by the
/// modified Lentz method. Used for x > 2.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessResult {
    pub eta: f64,
    pub method: Method,
    /// |η_numeric - η_analytic|; zero for the analytic path.
    pub residual: f64,
}

/// Direction of the pointer shift for the σ_z = +1 component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSign {
    /// +z moves the pointer toward +q.
    #[default]
    UpToPositive,
    UpToNegative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub n_points: usize,
}

impl PointerGrid {
    /// q_j for j in 0..n. A grid with q_min = -q_max is built exactly
    /// antisymmetric so mirrored quadratures agree bit for bit.
    pub fn points(&self) -> Vec<f64> {
        let n = self.n_points;
        let last = (n - 1) as f64;
        if self.q_min == -self.q_max {
            (0..n)
                .map(|j| self.q_max * ((2 * j) as f64 - last) / last)
                .collect()
        } else {
            let h = (self.q_max - self.q_min) / last;
            (0..n).map(|j| self.q_min + j as f64 * h).collect()
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.q_max - self.q_min) / (self.n_points - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerConfig {
    /// Pointer shift length (position units).
    pub kappa: f64,
    /// Gaussian width of the ready state (position units).
    pub delta: f64,
    pub grid: PointerGrid,
    #[serde(default)]
    pub shift_sign: ShiftSign,
}

pub const DEFAULT_N_POINTS: usize = 4097;
/// Grid half-width in units of Δ beyond the shift.
pub const DEFAULT_SPAN_WIDTHS: f64 = 8.0;
/// Minimum half-width (κ + 6Δ) accepted by validation.
const MIN_SPAN_WIDTHS: f64 = 6.0;
/// Largest accepted spacing, in units of Δ.
const MAX_SPACING_WIDTHS: f64 = 0.25;
/// Spacing suggested when a grid is rejected (≈1e-6 accuracy on η).
const SUGGESTED_SPACING_WIDTHS: f64 = 0.004;

impl PointerConfig {
    /// Default grid q ∈ [-(κ+8Δ), κ+8Δ] with 4097 points.
    pub fn new(kappa: f64, delta: f64) -> Result<Self> {
        let half = kappa + DEFAULT_SPAN_WIDTHS * delta;
        Self::with_grid(
            kappa,
            delta,
            PointerGrid {
                q_min: -half,
                q_max: half,
                n_points: DEFAULT_N_POINTS,
            },
        )
    }

    pub fn with_grid(kappa: f64, delta: f64, grid: PointerGrid) -> Result<Self> {
        let cfg = Self {
            kappa,
            delta,
            grid,
            shift_sign: ShiftSign::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_shift_sign(mut self, sign: ShiftSign) -> Self {
        self.shift_sign = sign;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa = {} must be >= 0",
                self.kappa
            )));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {} must be > 0",
                self.delta
            )));
        }
        let g = &self.grid;
        if !(g.q_min.is_finite() && g.q_max.is_finite() && g.q_min < 0.0 && 0.0 < g.q_max) {
            return Err(Error::InvalidParameter(format!(
                "grid [{}, {}] must straddle q = 0",
                g.q_min, g.q_max
            )));
        }
        let suggested = self.suggested_n_points();
        if g.n_points < 16 {
            return Err(Error::Resolution {
                reason: format!("{} grid points (minimum 16)", g.n_points),
                suggested_n_points: suggested,
            });
        }
        let need = self.kappa + MIN_SPAN_WIDTHS * self.delta;
        if g.q_min > -need || g.q_max < need {
            return Err(Error::Resolution {
                reason: format!(
                    "grid [{}, {}] does not cover ±(κ + 6Δ) = ±{need}",
                    g.q_min, g.q_max
                ),
                suggested_n_points: suggested,
            });
        }
        if g.spacing() > MAX_SPACING_WIDTHS * self.delta {
            return Err(Error::Resolution {
                reason: format!("spacing {} exceeds Δ/4", g.spacing()),
                suggested_n_points: suggested,
            });
        }
        Ok(())
    }

    fn suggested_n_points(&self) -> usize {
        let half = self.kappa + DEFAULT_SPAN_WIDTHS * self.delta;
        let span = (self.grid.q_max - self.grid.q_min).max(2.0 * half);
        if self.delta > 0.0 && span.is_finite() {
            (span / (SUGGESTED_SPACING_WIDTHS * self.delta)).ceil() as usize + 1
        } else {
            DEFAULT_N_POINTS
        }
    }

    fn up_shift(&self) -> f64 {
        match self.shift_sign {
            ShiftSign::UpToPositive => self.kappa,
            ShiftSign::UpToNegative => -self.kappa,
        }
    }
}

/// η = erf(κ / (√2 Δ)).
pub fn eta_analytic(kappa: f64, delta: f64) -> Result<SharpnessResult> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} must be > 0"
        )));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa = {kappa} must be >= 0"
        )));
    }
    Ok(SharpnessResult {
        eta: erf(kappa / (std::f64::consts::SQRT_2 * delta)),
        method: Method::Analytic,
        residual: 0.0,
    })
}

/// ½(I ± η σ_z) from the closed form.
pub fn analytic_povm(kappa: f64, delta: f64) -> Result<Povm> {
    Povm::unsharp_qubit(eta_analytic(kappa, delta)?.eta, [0.0, 0.0, 1.0])
}

/// Trapezoid integral of samples `f` over the part of the grid with q > 0.
/// The bin containing q = 0 is split at zero with a linearly interpolated
/// integrand value.
fn positive_mass(q: &[f64], f: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..q.len() - 1 {
        let (q0, q1, f0, f1) = (q[j], q[j + 1], f[j], f[j + 1]);
        if q0 >= 0.0 {
            acc += 0.5 * (q1 - q0) * (f0 + f1);
        } else if q1 > 0.0 {
            let f_at_zero = f0 + (f1 - f0) * (-q0) / (q1 - q0);
            acc += 0.5 * q1 * (f_at_zero + f1);
        }
    }
    acc
}

/// Same quadrature on q < 0, computed on the mirrored grid.
fn negative_mass(q: &[f64], f: &[f64]) -> f64 {
    let qm: Vec<f64> = q.iter().rev().map(|x| -x).collect();
    let fm: Vec<f64> = f.iter().rev().copied().collect();
    positive_mass(&qm, &fm)
}

/// Probabilities that the pointer reads q > 0 and q < 0 after a rigid shift
/// by `shift`. Both come from their own quadrature, so flipping the shift
/// swaps them bit for bit on a symmetric grid.
fn readout_probabilities(q: &[f64], delta: f64, shift: f64) -> (f64, f64) {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * delta);
    let density: Vec<f64> = q
        .iter()
        .map(|&x| {
            let u = (x - shift) / delta;
            norm * (-0.5 * u * u).exp()
        })
        .collect();
    let pos = positive_mass(q, &density);
    let neg = negative_mass(q, &density);
    (pos / (pos + neg), neg / (pos + neg))
}

/// Binary POVM from the sampled pointer: E_+ = diag(P(q>0 | ↑), P(q>0 | ↓)),
/// E_- = diag(P(q<0 | ↑), P(q<0 | ↓)) (labels "+" and "-").
pub fn induced_effects_numeric(cfg: &PointerConfig) -> Result<(Povm, SharpnessResult)> {
    cfg.validate()?;
    let q = cfg.grid.points();
    let shift = cfg.up_shift();
    let (p_up, m_up) = readout_probabilities(&q, cfg.delta, shift);
    let (p_down, m_down) = readout_probabilities(&q, cfg.delta, -shift);
    let plus = ComplexMatrix::diag_real(&[p_up, p_down]);
    let minus = ComplexMatrix::diag_real(&[m_up, m_down]);
    let povm = Povm::new(
        vec!["+".into(), "-".into()],
        vec![Effect::new(plus)?, Effect::new(minus)?],
    )?;
    let eta = p_up - p_down;
    let analytic = eta_analytic(cfg.kappa, cfg.delta)?.eta;
    let signed_analytic = match cfg.shift_sign {
        ShiftSign::UpToPositive => analytic,
        ShiftSign::UpToNegative => -analytic,
    };
    Ok((
        povm,
        SharpnessResult {
            eta,
            method: Method::Numeric,
            residual: (eta - signed_analytic).abs(),
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub delta: f64,
    pub eta_analytic: f64,
    pub eta_numeric: f64,
    pub abs_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub max_abs_diff: f64,
}

/// Analytic and numeric η over every (κ, Δ) pair; rows are ordered with κ
/// as the outer loop.
pub fn eta_sweep(kappas: &[f64], deltas: &[f64]) -> Result<SweepTable> {
    if kappas.is_empty() || deltas.is_empty() {
        return Err(Error::InvalidParameter(
            "eta sweep needs at least one kappa and one delta".into(),
        ));
    }
    let cells: Vec<(f64, f64)> = kappas
        .iter()
        .flat_map(|&k| deltas.iter().map(move |&d| (k, d)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(kappa, delta)| {
            let analytic = eta_analytic(kappa, delta)?.eta;
            let (_, numeric) = induced_effects_numeric(&PointerConfig::new(kappa, delta)?)?;
            Ok(SweepRow {
                kappa,
                delta,
                eta_analytic: analytic,
                eta_numeric: numeric.eta,
                abs_diff: (numeric.eta - analytic).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    Ok(SweepTable { rows, max_abs_diff })
}
