//! Exponentially scaled modified Bessel functions `e^{-s} I_k(s)` of integer
//! order, which are the one-coordinate transition probabilities of the
//! rate-1 continuous-time walk on `Z`.

/// Fills `out[k] = e^{-s} I_k(s)` for `k < out.len()` by Miller's backward
/// recurrence `I_{k-1} = (2k/s) I_k + I_{k+1}`, normalized with
/// `e^{-s} (I_0 + 2 Σ_{k≥1} I_k) = 1`.
pub fn scaled_bessel(s: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if out.is_empty() {
        return;
    }
    if s <= 0.0 {
        out[0] = 1.0;
        return;
    }
    let kmax = out.len() - 1;
    let start = kmax + 30 + (12.0 * s.sqrt()) as usize;
    let (mut next, mut cur) = (0.0f64, 1e-30f64); // I_{k+1}, I_k at k = start
    let mut sum = 0.0;
    for k in (1..=start).rev() {
        if k <= kmax {
            out[k] = cur;
        }
        sum += 2.0 * cur;
        let prev = (2.0 * k as f64 / s) * cur + next;
        next = cur;
        cur = prev;
        if cur > 1e250 {
            const SCALE: f64 = 1e-250;
            cur *= SCALE;
            next *= SCALE;
            sum *= SCALE;
            out[k.min(kmax + 1)..=kmax].iter_mut().for_each(|v| *v *= SCALE);
        }
    }
    out[0] = cur;
    sum += cur;
    out.iter_mut().for_each(|v| *v /= sum);
}

/// Coefficients `c_m` of the large-`s` expansion
/// `e^{-s} I_k(s) ≈ (2πs)^{-1/2} Σ_m c_m s^{-m}`, `m < terms`.
pub fn asymptotic_coefficients(k: u32, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (k as f64).powi(2);
    let mut c = Vec::with_capacity(terms);
    let mut a = 1.0;
    for m in 0..terms {
        if m > 0 {
            let odd = (2 * m - 1) as f64;
            a *= -(mu - odd * odd) / (m as f64 * 8.0);
        }
        c.push(a);
    }
    c
}
