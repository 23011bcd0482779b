//! Small numerical kernels: adaptive quadrature, bracketing root search and a
//! damped two-variable Newton iteration.

use crate::error::{Error, Result};

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, eps, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        if err <= eps || depth >= 48 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, eps * 0.5, depth + 1));
            stack.push((mid, hi, eps * 0.5, depth + 1));
        }
    }
    total
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Parse(format!(
            "bisection bracket [{lo}, {hi}] has no sign change"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo).abs() < tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stopping and damping controls for [`newton2`].
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Convergence threshold on the residual norm.
    pub tol: f64,
    /// Step shrink factor applied while a step leaves the feasible set.
    pub damping: f64,
    /// Largest accepted Jacobian condition number.
    pub max_condition: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-8,
            damping: 0.5,
            max_condition: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonSolution {
    pub x: [f64; 2],
    pub iterations: usize,
    pub residual: f64,
}

fn condition_2x2(j: &[[f64; 2]; 2]) -> f64 {
    // Ratio of singular values from the closed form for 2x2 matrices.
    let (a, b, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    let s = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    let smax = ((s + disc) / 2.0).sqrt();
    let smin2 = (s - disc) / 2.0;
    if smin2 <= 0.0 || det == 0.0 {
        return f64::INFINITY;
    }
    // smin = det / smax is better conditioned than sqrt(smin2).
    smax / (det / smax)
}

/// Newton iteration for `F(x) = 0` in two unknowns.
///
/// `system` returns the residual and Jacobian at a point. A step that lands
/// outside `feasible` is shrunk by `opts.damping` until it does not.
pub fn newton2<S, P>(system: S, feasible: P, x0: [f64; 2], opts: NewtonOptions) -> Result<NewtonSolution>
where
    S: Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2]),
    P: Fn([f64; 2]) -> bool,
{
    let mut x = x0;
    for it in 0..=opts.max_iter {
        let (r, j) = system(x);
        let res = r[0].hypot(r[1]);
        if !res.is_finite() {
            return Err(Error::Newton("non-finite residual".into()));
        }
        if res <= opts.tol {
            return Ok(NewtonSolution {
                x,
                iterations: it,
                residual: res,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let cond = condition_2x2(&j);
        if !(cond <= opts.max_condition) {
            return Err(Error::Newton(format!("ill-conditioned Jacobian (cond {cond:.3e})")));
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let dx = [
            (j[1][1] * r[0] - j[0][1] * r[1]) / det,
            (-j[1][0] * r[0] + j[0][0] * r[1]) / det,
        ];
        let mut t = 1.0;
        let mut next = [x[0] - dx[0], x[1] - dx[1]];
        let mut shrinks = 0;
        while !feasible(next) {
            t *= opts.damping;
            next = [x[0] - t * dx[0], x[1] - t * dx[1]];
            shrinks += 1;
            if shrinks > 60 {
                return Err(Error::Newton("no feasible step".into()));
            }
        }
        x = next;
    }
    Err(Error::Newton(format!(
        "no convergence after {} iterations",
        opts.max_iter
    )))
}
