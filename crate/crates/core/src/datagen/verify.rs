use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DataPair;
use crate::expr::{differentiate, eval_numeric, Env, Expr, X};

/// Points at which both sides must be finite.
pub const VERIFY_POINTS: usize = 8;
/// How many of those points must agree.
pub const VERIFY_REQUIRED: usize = 6;
pub const VERIFY_RTOL: f64 = 1e-6;
const MAX_CANDIDATES: usize = 256;

/// True iff `d/dx integral` matches `integrand` at enough sample points.
pub fn verify_pair(p: &DataPair) -> bool {
    verify_integral(&p.integrand, &p.integral, p.seed)
}

/// Differentiates `integral` and compares it with `integrand` numerically at
/// up to [`VERIFY_POINTS`] points where both are finite; passes when at least
/// [`VERIFY_REQUIRED`] agree within [`VERIFY_RTOL`] (relative to the larger
/// magnitude, floored at 1).
pub fn verify_integral(integrand: &Expr, integral: &Expr, seed: u64) -> bool {
    let Ok(d) = differentiate(integral, X) else {
        return false;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7665_7269_6679);
    let mut finite = 0;
    let mut agree = 0;
    for _ in 0..MAX_CANDIDATES {
        let x = sample_point(&mut rng);
        let env = Env::x(x);
        let (Ok(a), Ok(b)) = (eval_numeric(integrand, &env), eval_numeric(&d, &env)) else {
            return false;
        };
        if !a.is_finite() || !b.is_finite() {
            continue;
        }
        finite += 1;
        if (a - b).abs() <= VERIFY_RTOL * a.abs().max(b.abs()).max(1.0) {
            agree += 1;
        }
        if finite == VERIFY_POINTS {
            break;
        }
    }
    agree >= VERIFY_REQUIRED
}

/// Mostly small positive points (logs, roots and series kernels are real and
/// accurate there), with some larger and some negative ones.
fn sample_point(rng: &mut ChaCha8Rng) -> f64 {
    let r: f64 = rng.gen();
    if r < 0.5 {
        rng.gen_range(0.05..1.0)
    } else if r < 0.8 {
        rng.gen_range(1.0..3.0)
    } else {
        rng.gen_range(-3.0..-0.05)
    }
}
