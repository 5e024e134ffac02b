//! Single steps of the DOP853 embedded pair and its continuous extension.

use super::tableau::*;

pub(super) type Stages<const N: usize> = [[f64; N]; 12];

/// Outcome of one trial step.
pub(super) struct Trial<const N: usize> {
    pub y_new: [f64; N],
    /// Normalized error; the step is acceptable when `err <= 1`.
    pub err: f64,
    pub stages: Stages<N>,
}

fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Attempts a step of size `h` from `y` with `f0 = f(y)`. Returns `None` when a
/// stage evaluation leaves the domain of the right-hand side.
pub(super) fn trial_step<const N: usize, F>(
    rhs: &mut F,
    y: &[f64; N],
    f0: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Option<Trial<N>>
where
    F: FnMut(&[f64; N], &mut [f64; N]) -> bool,
{
    let mut k: Stages<N> = [[0.0; N]; 12];
    k[0] = *f0;
    macro_rules! stage {
        ($idx:expr, [$(($c:expr, $j:expr)),*]) => {{
            let arg = lin(y, h, &[$(($c, &k[$j])),*]);
            let mut out = [0.0; N];
            if !rhs(&arg, &mut out) {
                return None;
            }
            k[$idx] = out;
        }};
    }
    stage!(1, [(A21, 0)]);
    stage!(2, [(A31, 0), (A32, 1)]);
    stage!(3, [(A41, 0), (A43, 2)]);
    stage!(4, [(A51, 0), (A53, 2), (A54, 3)]);
    stage!(5, [(A61, 0), (A64, 3), (A65, 4)]);
    stage!(6, [(A71, 0), (A74, 3), (A75, 4), (A76, 5)]);
    stage!(7, [(A81, 0), (A84, 3), (A85, 4), (A86, 5), (A87, 6)]);
    stage!(8, [(A91, 0), (A94, 3), (A95, 4), (A96, 5), (A97, 6), (A98, 7)]);
    stage!(9, [(A101, 0), (A104, 3), (A105, 4), (A106, 5), (A107, 6), (A108, 7), (A109, 8)]);
    stage!(10, [(A111, 0), (A114, 3), (A115, 4), (A116, 5), (A117, 6), (A118, 7), (A119, 8), (A1110, 9)]);
    stage!(11, [(A121, 0), (A124, 3), (A125, 4), (A126, 5), (A127, 6), (A128, 7), (A129, 8), (A1210, 9), (A1211, 10)]);

    let weights = [(B1, 0), (B6, 5), (B7, 6), (B8, 7), (B9, 8), (B10, 9), (B11, 10), (B12, 11)];
    let errw = [(ER1, 0), (ER6, 5), (ER7, 6), (ER8, 7), (ER9, 8), (ER10, 9), (ER11, 10), (ER12, 11)];

    let mut y_new = *y;
    let mut err = 0.0;
    let mut err2 = 0.0;
    for i in 0..N {
        let incr: f64 = weights.iter().map(|&(c, j)| c * k[j][i]).sum();
        y_new[i] = y[i] + h * incr;
        let sk = atol + rtol * y[i].abs().max(y_new[i].abs());
        let e3 = incr - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
        let e5: f64 = errw.iter().map(|&(c, j)| c * k[j][i]).sum();
        err2 += (e3 / sk).powi(2);
        err += (e5 / sk).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err * (1.0 / (deno * N as f64)).sqrt();
    if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Trial { y_new, err, stages: k })
}

/// Coefficients of the 7th-order interpolant over one accepted step.
pub(super) fn dense_coefficients<const N: usize, F>(
    rhs: &mut F,
    y: &[f64; N],
    h: f64,
    k: &Stages<N>,
    y_new: &[f64; N],
    f_new: &[f64; N],
) -> Option<[[f64; N]; 8]>
where
    F: FnMut(&[f64; N], &mut [f64; N]) -> bool,
{
    let mut extra = |terms: &[(f64, &[f64; N])]| -> Option<[f64; N]> {
        let arg = lin(y, h, terms);
        let mut out = [0.0; N];
        rhs(&arg, &mut out).then_some(out)
    };
    let s14 = extra(&[
        (A141, &k[0]),
        (A147, &k[6]),
        (A148, &k[7]),
        (A149, &k[8]),
        (A1410, &k[9]),
        (A1411, &k[10]),
        (A1412, &k[11]),
        (A1413, f_new),
    ])?;
    let s15 = extra(&[
        (A151, &k[0]),
        (A156, &k[5]),
        (A157, &k[6]),
        (A158, &k[7]),
        (A1511, &k[10]),
        (A1512, &k[11]),
        (A1513, f_new),
        (A1514, &s14),
    ])?;
    let s16 = extra(&[
        (A161, &k[0]),
        (A166, &k[5]),
        (A167, &k[6]),
        (A168, &k[7]),
        (A169, &k[8]),
        (A1613, f_new),
        (A1614, &s14),
        (A1615, &s15),
    ])?;

    let dcoef: [[f64; 12]; 4] = [
        [D41, D46, D47, D48, D49, D410, D411, D412, D413, D414, D415, D416],
        [D51, D56, D57, D58, D59, D510, D511, D512, D513, D514, D515, D516],
        [D61, D66, D67, D68, D69, D610, D611, D612, D613, D614, D615, D616],
        [D71, D76, D77, D78, D79, D710, D711, D712, D713, D714, D715, D716],
    ];
    let mut cont = [[0.0; N]; 8];
    for i in 0..N {
        let ydiff = y_new[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        cont[0][i] = y[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * f_new[i] - bspl;
        let vals = [
            k[0][i], k[5][i], k[6][i], k[7][i], k[8][i], k[9][i], k[10][i], k[11][i], f_new[i], s14[i], s15[i], s16[i],
        ];
        for (row, d) in dcoef.iter().enumerate() {
            let acc: f64 = d.iter().zip(vals.iter()).map(|(c, v)| c * v).sum();
            cont[4 + row][i] = h * acc;
        }
    }
    Some(cont)
}

/// Evaluates the interpolant at the step fraction `s` in `[0, 1]`.
pub(super) fn dense_eval(cont: &[f64], n: usize, s: f64, out: &mut [f64]) {
    let s1 = 1.0 - s;
    for i in 0..n {
        let c = |r: usize| cont[r * n + i];
        let conpar = c(4) + s * (c(5) + s1 * (c(6) + s * c(7)));
        out[i] = c(0) + s * (c(1) + s1 * (c(2) + s * (c(3) + s1 * conpar)));
    }
}
