//! Adaptive Gauss-Kronrod quadrature and Chebyshev interpolation on an interval.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F, E>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Integrates `f` over `[a, b]` (either orientation) to absolute tolerance `tol`.
///
/// Intervals are bisected until each piece's Kronrod-Gauss difference falls
/// below its share of the tolerance or the depth limit is reached.
pub fn integrate<F, E>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let width = hi - lo;
    let mut total = 0.0;
    let mut stack = vec![(lo, hi, 0u32)];
    while let Some((x0, x1, depth)) = stack.pop() {
        let (val, err) = gk15(&mut f, x0, x1)?;
        let budget = tol * (x1 - x0) / width;
        if err <= budget || depth >= 40 {
            total += val;
        } else {
            let mid = 0.5 * (x0 + x1);
            stack.push((mid, x1, depth + 1));
            stack.push((x0, mid, depth + 1));
        }
    }
    Ok(sign * total)
}

/// Chebyshev interpolant on `[lo, hi]` with an analytic antiderivative.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
    integral: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates `f` at `n` Chebyshev points of the first kind.
    pub fn fit<F, E>(mut f: F, lo: f64, hi: f64, n: usize) -> Result<Self, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
    {
        let n = n.max(2);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let theta: Vec<f64> = (0..n)
            .map(|k| std::f64::consts::PI * (k as f64 + 0.5) / n as f64)
            .collect();
        let values = theta
            .iter()
            .map(|t| f(mid + half * t.cos()))
            .collect::<Result<Vec<_>, E>>()?;
        let coeffs: Vec<f64> = (0..n)
            .map(|j| {
                let s: f64 = theta
                    .iter()
                    .zip(&values)
                    .map(|(t, v)| v * (j as f64 * t).cos())
                    .sum();
                2.0 * s / n as f64
            })
            .collect();
        // antiderivative coefficients, fixed so that F(lo) = 0
        let mut integral = vec![0.0; n + 1];
        for j in 1..=n {
            let prev = coeffs[j - 1];
            let next = if j + 1 < n { coeffs[j + 1] } else { 0.0 };
            integral[j] = half * (prev - next) / (2.0 * j as f64);
        }
        // value of the series at x = -1 is sum (-1)^j c_j
        let at_lo: f64 = integral
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| if j % 2 == 0 { *c } else { -*c })
            .sum();
        integral[0] = -2.0 * at_lo;
        Ok(Self {
            lo,
            hi,
            coeffs,
            integral,
        })
    }

    fn clenshaw(c: &[f64], t: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for &cj in c.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + cj;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + 0.5 * c[0]
    }

    fn local(&self, x: f64) -> f64 {
        if self.hi == self.lo {
            0.0
        } else {
            (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        Self::clenshaw(&self.coeffs, self.local(x))
    }

    /// `int_lo^x f`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        if self.hi == self.lo {
            return 0.0;
        }
        Self::clenshaw(&self.integral, self.local(x))
    }
}
