//! Brute-force joint-measurability oracle for pairs of unbiased binary
//! qubit POVMs {(I ± η a·σ)/2}, {(I ± η b·σ)/2}.
//!
//! Writing G_{++} = (γ I + 2x·σ)/2 fixes the other three cells from the
//! marginals; all four are PSD for some γ iff
//!   max(|x|, |x - η(a+b)/2|) + max(|ηa/2 - x|, |ηb/2 - x|) <= 1/2.
//! The oracle minimizes the left side over a cubic grid of x. It shares no
//! code with the library solver.
#![allow(dead_code)]

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Minimum of the feasibility functional on a grid of step 0.01 over
/// [-1/2, 1/2]^3, refined once around the best point.
pub fn oracle_value(eta: f64, a: [f64; 3], b: [f64; 3]) -> f64 {
    let ha = scale(a, eta / 2.0);
    let hb = scale(b, eta / 2.0);
    let s = [ha[0] + hb[0], ha[1] + hb[1], ha[2] + hb[2]];
    let f = |x: [f64; 3]| norm(x).max(norm(sub(x, s))) + norm(sub(ha, x)).max(norm(sub(hb, x)));
    let mut best = ([0.0; 3], f64::INFINITY);
    let search = |centre: [f64; 3], half: f64, steps: i32, best: &mut ([f64; 3], f64)| {
        let h = half / steps as f64;
        for i in -steps..=steps {
            for j in -steps..=steps {
                for k in -steps..=steps {
                    let x = [
                        centre[0] + i as f64 * h,
                        centre[1] + j as f64 * h,
                        centre[2] + k as f64 * h,
                    ];
                    let v = f(x);
                    if v < best.1 {
                        *best = (x, v);
                    }
                }
            }
        }
    };
    search([0.0; 3], 0.5, 50, &mut best);
    let c = best.0;
    search(c, 0.02, 20, &mut best);
    best.1
}

pub fn oracle_compatible(eta: f64, a: [f64; 3], b: [f64; 3]) -> bool {
    oracle_value(eta, a, b) <= 0.5
}

pub fn unit(v: [f64; 3]) -> [f64; 3] {
    scale(v, 1.0 / norm(v))
}
