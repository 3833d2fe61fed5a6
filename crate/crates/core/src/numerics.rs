//! Quadrature and special functions.

use crate::error::{Error, Result};
use crate::scalar::Real;

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss 7-point weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<F> {
    pub value: F,
    pub error: F,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureTolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureTolerance {
    fn default() -> Self {
        Self {
            abs: 1e-9,
            rel: 0.0,
            max_intervals: 2000,
        }
    }
}

impl QuadratureTolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, ..Self::default() }
    }
}

fn gk15<F: Real>(f: &impl Fn(F) -> F, a: F, b: F) -> (F, F) {
    let half = F::lit(0.5);
    let centre = half * (a + b);
    let h = half * (b - a);
    let fc = f(centre);
    let mut kron = fc * F::lit(WGK[7]);
    let mut gauss = fc * F::lit(WG[3]);
    for k in 0..7 {
        let dx = h * F::lit(XGK[k]);
        let s = f(centre - dx) + f(centre + dx);
        kron = kron + s * F::lit(WGK[k]);
        if k % 2 == 1 {
            gauss = gauss + s * F::lit(WG[k / 2]);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the total
/// error is below `max(abs, rel·|I|)`. Tolerances tighter than the scalar
/// type can resolve are relaxed to a few hundred ulps of the result.
pub fn integrate<F: Real>(f: impl Fn(F) -> F, a: F, b: F, tol: QuadratureTolerance) -> Result<Quadrature<F>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical("integration bounds must be finite".into()));
    }
    if a == b {
        return Ok(Quadrature {
            value: F::zero(),
            error: F::zero(),
            intervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, F::one()) } else { (b, a, -F::one()) };
    let (v, e) = gk15(&f, lo, hi);
    let mut parts = vec![(lo, hi, v, e)];
    let mut total = v;
    let mut err = e;
    let floor = F::lit(200.0) * F::epsilon();
    loop {
        let target = F::lit(tol.abs).max(F::lit(tol.rel) * total.abs()).max(floor * total.abs());
        if !total.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
        if err <= target {
            break;
        }
        if parts.len() >= tol.max_intervals {
            return Err(Error::Numerical(format!(
                "quadrature did not converge: error {} after {} intervals",
                err.to_f64_lossy(),
                parts.len()
            )));
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (l, h, v, e) = parts.swap_remove(worst);
        let mid = F::lit(0.5) * (l + h);
        let (v1, e1) = gk15(&f, l, mid);
        let (v2, e2) = gk15(&f, mid, h);
        total = total - v + v1 + v2;
        err = err - e + e1 + e2;
        parts.push((l, mid, v1, e1));
        parts.push((mid, h, v2, e2));
        // Re-sum periodically so the running totals do not drift.
        if parts.len() % 64 == 0 {
            total = parts.iter().map(|p| p.2).sum();
            err = parts.iter().map(|p| p.3).sum();
        }
    }
    Ok(Quadrature {
        value: sign * total,
        error: err,
        intervals: parts.len(),
    })
}

/// Modified Bessel function of the second kind of order one, from
/// `K₁(x) = ∫₀^∞ exp(−x cosh t) cosh t dt`.
pub fn bessel_k1<F: Real>(x: F) -> Result<F> {
    if !(x > F::zero()) {
        return Err(Error::Numerical("K1 requires a positive argument".into()));
    }
    // Truncate where x·cosh t exceeds 750, far below underflow of the integrand.
    let upper = (F::lit(750.0) / x).acosh().max(F::one());
    let q = integrate(
        |t: F| (-x * t.cosh()).exp() * t.cosh(),
        F::zero(),
        upper,
        QuadratureTolerance {
            abs: 0.0,
            rel: 1e-14,
            max_intervals: 4000,
        },
    )?;
    Ok(q.value)
}
