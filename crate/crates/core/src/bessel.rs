//! Bessel functions of the first kind, integer order, by Miller's downward
//! recurrence. Self-contained on purpose: the diffraction analysis needs
//! J_n on a known domain and nothing else, and the normalization trick makes
//! the recurrence accurate to near machine precision there.

/// Largest |order| accepted by [`bessel_jn`].
pub const MAX_ORDER: i32 = 200;
/// Largest |argument| accepted by [`bessel_jn`].
pub const MAX_ARGUMENT: f64 = 500.0;

/// J_n(x) for integer order, |n| <= 200 and |x| <= 500.
///
/// Negative orders and arguments reduce through J_{-n}(x) = (-1)^n J_n(x)
/// and J_n(-x) = (-1)^n J_n(x). Out-of-domain inputs panic: the caller is
/// expected to keep grating pulse areas inside this range.
pub fn bessel_jn(n: i32, x: f64) -> f64 {
    assert!(n.abs() <= MAX_ORDER, "order {n} outside supported range");
    assert!(x.abs() <= MAX_ARGUMENT && x.is_finite(), "argument {x} outside supported range");

    let mut sign = 1.0;
    let n_abs = n.unsigned_abs() as usize;
    if n < 0 && n_abs % 2 == 1 {
        sign = -sign;
    }
    let x_abs = x.abs();
    if x < 0.0 && n_abs % 2 == 1 {
        sign = -sign;
    }

    sign * jn_nonneg(n_abs, x_abs)
}

/// J_0(x) .. J_{n_max}(x) in one downward pass, for x >= 0.
///
/// Cheaper than `n_max + 1` separate calls when a whole diffraction-order
/// ladder is needed for a single pulse area.
pub fn bessel_jn_all(n_max: usize, x: f64) -> Vec<f64> {
    assert!(n_max as i32 <= MAX_ORDER, "order {n_max} outside supported range");
    assert!((0.0..=MAX_ARGUMENT).contains(&x), "argument {x} outside supported range");
    if x < SMALL_X {
        return (0..=n_max).map(|n| jn_series_small(n, x)).collect();
    }
    miller_ladder(n_max, x)
}

/// First positive root of J_0, found by bisection.
///
/// J_0 is positive at 2 and negative at 3, so the bracket is fixed; the
/// interval is halved until it is narrower than 1e-12.
pub fn j0_first_root() -> f64 {
    let mut lo = 2.0_f64;
    let mut hi = 3.0_f64;
    debug_assert!(bessel_jn(0, lo) > 0.0 && bessel_jn(0, hi) < 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if bessel_jn(0, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Below this the two-term Maclaurin expansion is exact to double precision
/// and the recurrence ratio 2k/x starts flirting with overflow.
const SMALL_X: f64 = 1e-8;

/// Rescale the ladder when entries pass this during the downward pass.
const RESCALE_THRESHOLD: f64 = 1e250;

fn jn_nonneg(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < SMALL_X {
        return jn_series_small(n, x);
    }
    miller_ladder(n, x)[n]
}

/// J_n(x) ~ (x/2)^n / n! * (1 - x^2 / (4(n+1))) for tiny x.
fn jn_series_small(n: usize, x: f64) -> f64 {
    let half = x / 2.0;
    let mut lead = 1.0;
    for k in 1..=n {
        lead *= half / k as f64;
        if lead == 0.0 {
            return 0.0;
        }
    }
    lead * (1.0 - half * half / (n as f64 + 1.0))
}

/// Downward recurrence J_{k-1} = (2k/x) J_k - J_{k+1} from a start order well
/// above both n_max and x, normalized with J_0 + 2 sum_{k>=1} J_2k = 1.
fn miller_ladder(n_max: usize, x: f64) -> Vec<f64> {
    let start = recurrence_start(n_max, x);
    let mut out = vec![0.0_f64; n_max + 1];

    let mut j_up = 0.0_f64; // J_{k+1}
    let mut j = 1e-30_f64; // J_k, arbitrary seed absorbed by normalization
    let mut norm = 0.0_f64;

    let mut k = start;
    loop {
        if k % 2 == 0 && k > 0 {
            norm += 2.0 * j;
        }
        if k <= n_max {
            out[k] = j;
        }
        if k == 0 {
            norm += j;
            break;
        }
        let j_down = (2.0 * k as f64 / x) * j - j_up;
        j_up = j;
        j = j_down;
        k -= 1;

        if j.abs() > RESCALE_THRESHOLD {
            j *= 1e-250;
            j_up *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }

    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Start order for the downward pass: clear of both the order and the
/// turning point at k ~ x, plus an Airy-scaled safety margin so the seed
/// error decays below double precision before reaching the requested orders.
fn recurrence_start(n_max: usize, x: f64) -> usize {
    let base = n_max.max(x.ceil() as usize);
    let margin = (10.0 * x.cbrt()).ceil() as usize + 26;
    let start = base + margin;
    start + (start % 2) // even start keeps the normalization pairing simple
}
