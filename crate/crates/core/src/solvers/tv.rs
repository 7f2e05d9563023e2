//! Exact 1-D total-variation denoising by dynamic programming.
//!
//! Solves `min_b ½‖y − b‖² + λ Σ |b_i − b_{i−1}|` in linear time by passing
//! the derivative of the message function forward as a piecewise-linear
//! function and recovering the solution through back-pointers.

pub fn tv_denoise(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    if n <= 1 || lambda <= 0.0 {
        return y.to_vec();
    }

    // Knot positions and the slope/intercept increments attached to them.
    let mut x = vec![0.0; 2 * n];
    let mut a = vec![0.0; 2 * n];
    let mut b = vec![0.0; 2 * n];
    // Back-pointers: lower and upper clamps for each position.
    let mut tm = vec![0.0; n - 1];
    let mut tp = vec![0.0; n - 1];

    tm[0] = -lambda + y[0];
    tp[0] = lambda + y[0];
    let mut l = n - 1;
    let mut r = n;
    x[l] = tm[0];
    x[r] = tp[0];
    a[l] = 1.0;
    b[l] = -y[0] + lambda;
    a[r] = -1.0;
    b[r] = y[0] + lambda;
    let mut afirst = 1.0;
    let mut bfirst = -y[1] - lambda;
    let mut alast = -1.0;
    let mut blast = y[1] - lambda;

    for k in 1..n - 1 {
        // Walk up from the left until the derivative exceeds -λ.
        let mut alo = afirst;
        let mut blo = bfirst;
        let mut lo = l;
        while lo <= r {
            if alo * x[lo] + blo > -lambda {
                break;
            }
            alo += a[lo];
            blo += b[lo];
            lo += 1;
        }

        tm[k] = (-lambda - blo) / alo;
        l = lo - 1;
        x[l] = tm[k];

        // Walk down from the right until the derivative drops below λ.
        let mut ahi = alast;
        let mut bhi = blast;
        let mut hi = r as isize;
        while hi >= l as isize {
            let h = hi as usize;
            if -ahi * x[h] - bhi < lambda {
                break;
            }
            ahi += a[h];
            bhi += b[h];
            hi -= 1;
        }

        tp[k] = (lambda + bhi) / (-ahi);
        r = (hi + 1) as usize;
        x[r] = tp[k];

        a[l] = alo;
        b[l] = blo + lambda;
        a[r] = ahi;
        b[r] = bhi + lambda;
        afirst = 1.0;
        bfirst = -y[k + 1] - lambda;
        alast = -1.0;
        blast = y[k + 1] - lambda;
    }

    // Last coefficient sits where the derivative crosses zero.
    let mut alo = afirst;
    let mut blo = bfirst;
    let mut lo = l;
    while lo <= r {
        if alo * x[lo] + blo > 0.0 {
            break;
        }
        alo += a[lo];
        blo += b[lo];
        lo += 1;
    }
    let mut beta = vec![0.0; n];
    beta[n - 1] = -blo / alo;

    for k in (0..n - 1).rev() {
        beta[k] = beta[k + 1].clamp(tm[k], tp[k]);
    }
    beta
}
