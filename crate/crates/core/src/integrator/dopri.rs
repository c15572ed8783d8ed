//! Dormand-Prince 5(4) pair with its fourth-order continuous extension.
//!
//! Coefficients follow Hairer, Norsett & Wanner, *Solving Ordinary
//! Differential Equations I*, section II.5/II.6 (the `DOPRI5` code).

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
// the 7th row doubles as the fifth-order weights (FSAL)
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fourth-order embedded weights
const BH1: f64 = 5179.0 / 57600.0;
const BH3: f64 = 7571.0 / 16695.0;
const BH4: f64 = 393.0 / 640.0;
const BH5: f64 = -92097.0 / 339200.0;
const BH6: f64 = 187.0 / 2100.0;
const BH7: f64 = 1.0 / 40.0;

// error weights, fifth minus fourth
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Which member of the pair advances the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    Fifth,
    /// The embedded fourth-order formula; used by the convergence study
    /// to check the error-estimator weights independently.
    EmbeddedFourth,
}

/// Polynomial interpolant over one step, in Hairer's nested form.
#[derive(Debug, Clone, Copy)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    /// Evaluates at local fraction `s = (t - t0) / h`.
    pub fn eval_fraction(&self, s: f64) -> [f64; N] {
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        std::array::from_fn(|i| r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i]))))
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        self.eval_fraction((t - self.t0) / self.h)
    }

    pub fn start(&self) -> [f64; N] {
        self.rcont[0]
    }
}

pub struct StepResult<const N: usize> {
    pub y_new: [f64; N],
    /// Derivative at the new point (FSAL stage).
    pub k7: [f64; N],
    pub err: f64,
    pub dense: DenseSegment<N>,
    pub finite: bool,
}

#[inline]
fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        y[i] + h * acc
    })
}

/// One Dormand-Prince step from `(t, y)` with derivative `k1` already known.
#[allow(clippy::too_many_arguments)]
pub fn step<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
    advance: Advance,
) -> StepResult<N> {
    let k2 = f(t + C2 * h, &comb(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &comb(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &comb(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &comb(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &comb(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y5 = comb(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y5);

    let y_new = match advance {
        Advance::Fifth => y5,
        Advance::EmbeddedFourth => comb(
            y,
            h,
            &[(BH1, k1), (BH3, &k3), (BH4, &k4), (BH5, &k5), (BH6, &k6), (BH7, &k7)],
        ),
    };

    let mut sum = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sk = atol + rtol * y[i].abs().max(y_new[i].abs());
        sum += (e / sk) * (e / sk);
    }
    let err = (sum / N as f64).sqrt();

    let finite = y_new.iter().chain(k7.iter()).all(|v| v.is_finite()) && err.is_finite();

    let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
    let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
    let rcont = [
        *y,
        ydiff,
        bspl,
        std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]),
        std::array::from_fn(|i| {
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
        }),
    ];

    StepResult {
        y_new,
        k7,
        err,
        dense: DenseSegment { t0: t, h, rcont },
        finite,
    }
}
