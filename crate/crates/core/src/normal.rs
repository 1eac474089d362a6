//! Standard normal CDF and quantile.
//!
//! Rational approximations only, no lookup tables: the CDF goes through
//! Cody's rational Chebyshev expansion of erf/erfc (SPECFUN `calerf`) and
//! the quantile through Wichura's PPND16 (AS 241). Both are accurate well
//! beyond the 1e-12 the audit computations require, and are deterministic
//! across platforms that implement IEEE-754 `f64`.

// The published coefficient tables carry more digits than f64 keeps.
#![allow(clippy::excessive_precision)]

/// Φ(x), the standard normal cumulative distribution function.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(p) for p in (0, 1). Returns ±∞ at the endpoints and NaN outside.
pub fn quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    ppnd16(p)
}

/// Upper-tail rejection quantile `z_{1-alpha}`.
pub fn upper_quantile(alpha: f64) -> f64 {
    quantile(1.0 - alpha)
}

// Cody's coefficients for erf on |x| <= 0.46875.
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];

// erfc on 0.46875 < |x| <= 4.0.
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];

// erfc on |x| > 4.0.
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

const ONE_OVER_SQRT_PI: f64 = 5.6418958354775628695e-1;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        return 1.0 - erf_small(x);
    }
    let r = if y <= 4.0 {
        let mut xnum = ERF_C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + ERF_C[i]) * y;
            xden = (xden + ERF_D[i]) * y;
        }
        let frac = (xnum + ERF_C[7]) / (xden + ERF_D[7]);
        scaled_down(y, frac)
    } else if y >= 26.5 {
        0.0
    } else {
        let z = 1.0 / (y * y);
        let mut xnum = ERF_P[5] * z;
        let mut xden = z;
        for i in 0..4 {
            xnum = (xnum + ERF_P[i]) * z;
            xden = (xden + ERF_Q[i]) * z;
        }
        let mut frac = z * (xnum + ERF_P[4]) / (xden + ERF_Q[4]);
        frac = (ONE_OVER_SQRT_PI - frac) / y;
        scaled_down(y, frac)
    };
    if x < 0.0 {
        2.0 - r
    } else {
        r
    }
}

// exp(-y^2) * frac, with the split-exponent trick from calerf to avoid
// premature underflow.
fn scaled_down(y: f64, frac: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * frac
}

fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut xnum = ERF_A[4] * z;
    let mut xden = z;
    for i in 0..3 {
        xnum = (xnum + ERF_A[i]) * z;
        xden = (xden + ERF_B[i]) * z;
    }
    x * (xnum + ERF_A[3]) / (xden + ERF_B[3])
}

// Wichura (1988), algorithm AS 241, PPND16.
fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.3871328727963666080e0,
        1.3314166789178437745e2,
        1.9715909503065514427e3,
        1.3731693765509461125e4,
        4.5921953931549871457e4,
        6.7265770927008700853e4,
        3.3430575583588128105e4,
        2.5090809287301226727e3,
    ];
    const B: [f64; 7] = [
        4.2313330701600911252e1,
        6.8718700749205790830e2,
        5.3941960214247511077e3,
        2.1213794301586595867e4,
        3.9307895800092710610e4,
        2.8729085735721942674e4,
        5.2264952788528545610e3,
    ];
    const C: [f64; 8] = [
        1.42343711074968357734e0,
        4.63033784615654529590e0,
        5.76949722146069140550e0,
        3.64784832476320460504e0,
        1.27045825245236838258e0,
        2.41780725177450611770e-1,
        2.27238449892691845833e-2,
        7.74545014278341407640e-4,
    ];
    const D: [f64; 7] = [
        2.05319162663775882187e0,
        1.67638483018380384940e0,
        6.89767334985100004550e-1,
        1.48103976427480074590e-1,
        1.51986665636164571966e-2,
        5.47593808499534494600e-4,
        1.05075007164441684324e-9,
    ];
    const E: [f64; 8] = [
        6.65790464350110377720e0,
        5.46378491116411436990e0,
        1.78482653991729133580e0,
        2.96560571828504891230e-1,
        2.65321895265761230930e-2,
        1.24266094738807843860e-3,
        2.71155556874348757815e-5,
        2.01033439929228813265e-7,
    ];
    const F: [f64; 7] = [
        5.99832206555887937690e-1,
        1.36929880922735805310e-1,
        1.48753612908506148525e-2,
        7.86869131145613259100e-4,
        1.84631831751005468180e-6,
        1.42151175831644588870e-7,
        2.04426310338993978564e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly7(&A, r) / (1.0 + r * poly7b(&B, r));
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly7(&C, r) / (1.0 + r * poly7b(&D, r))
    } else {
        r -= 5.0;
        poly7(&E, r) / (1.0 + r * poly7b(&F, r))
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn poly7(c: &[f64; 8], x: f64) -> f64 {
    c[0] + x * (c[1]
        + x * (c[2] + x * (c[3] + x * (c[4] + x * (c[5] + x * (c[6] + x * c[7]))))))
}

fn poly7b(c: &[f64; 7], x: f64) -> f64 {
    c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * (c[4] + x * (c[5] + x * c[6])))))
}
