//! Dormand-Prince 5(4) step with the 4th order continuous extension.

use crate::error::Result;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One attempted step: new state, scaled error norm and dense-output
/// coefficients.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub x0: f64,
    pub h: f64,
    pub y1: [f64; N],
    /// Derivative at the new point (first stage of the next step).
    pub k7: [f64; N],
    pub err: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    /// State at `x0 + theta h`, `theta` in `[0, 1]`.
    pub fn dense(&self, theta: f64) -> [f64; N] {
        let t1 = 1.0 - theta;
        std::array::from_fn(|i| {
            let c = &self.cont;
            c[0][i] + theta * (c[1][i] + t1 * (c[2][i] + theta * (c[3][i] + t1 * c[4][i])))
        })
    }

    pub fn dense_at(&self, x: f64) -> [f64; N] {
        self.dense((x - self.x0) / self.h)
    }
}

fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

/// Performs one Dormand-Prince step from `(x0, y0)` with derivative `k1`.
/// The error norm is the RMS of the embedded estimate scaled by
/// `atol + rtol max(|y0|, |y1|)`.
pub fn step<const N: usize, F>(
    f: &F,
    x0: f64,
    y0: &[f64; N],
    k1: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Result<Step<N>>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k2 = f(x0 + C2 * h, &comb(y0, h, &[(A21, k1)]))?;
    let k3 = f(x0 + C3 * h, &comb(y0, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(x0 + C4 * h, &comb(y0, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(x0 + C5 * h, &comb(y0, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(x0 + h, &comb(y0, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y1 = comb(y0, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(x0 + h, &y1)?;

    let mut acc = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sk = atol + rtol * y0[i].abs().max(y1[i].abs());
        acc += (e / sk).powi(2);
    }
    let err = (acc / N as f64).sqrt();

    let mut cont = [[0.0; N]; 5];
    for i in 0..N {
        let dy = y1[i] - y0[i];
        let bspl = h * k1[i] - dy;
        cont[0][i] = y0[i];
        cont[1][i] = dy;
        cont[2][i] = bspl;
        cont[3][i] = dy - h * k7[i] - bspl;
        cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Ok(Step { x0, h, y1, k7, err, cont })
}

/// Step-size factor from an error norm.
pub fn step_factor(err: f64, after_reject: bool) -> f64 {
    let fac = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
    let hi = if after_reject { 1.0 } else { 10.0 };
    fac.clamp(0.2, hi)
}
