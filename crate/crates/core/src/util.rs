//! Small numeric helpers shared across modules.

use std::sync::{Mutex, OnceLock};

/// ln(n!) with a growable memo table, stable for n up to 10^5 and beyond.
/// Entries carry a Neumaier compensation term so the accumulated rounding
/// error stays near one ulp even at n = 10^4.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Mutex<Vec<(f64, f64)>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| Mutex::new(vec![(0.0, 0.0), (0.0, 0.0)]));
    let mut t = table.lock().unwrap();
    while t.len() <= n {
        let k = t.len();
        let (sum, comp) = t[k - 1];
        let v = (k as f64).ln();
        let s = sum + v;
        let c = if sum.abs() >= v.abs() {
            comp + ((sum - s) + v)
        } else {
            comp + ((v - s) + sum)
        };
        t.push((s, c));
    }
    let (sum, comp) = t[n];
    sum + comp
}

/// ln C(n, k).
pub fn ln_choose(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// C(n, k) as f64, via the log-gamma route to avoid factorial overflow.
pub fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if k == 0 || k == n {
        return 1.0;
    }
    ln_choose(n, k).exp().round()
}

/// Neumaier-compensated sum.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Dot product, compensated when the vectors are long enough for naive
/// accumulation to matter.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() > 100_000 {
        kahan_sum(a.iter().zip(b).map(|(x, y)| x * y))
    } else {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

/// Iterates multi-indices in {0,..,k}^p in lexicographic order, calling `f`
/// with each index. `p` is small (desk scale), so recursion depth is fine.
pub fn for_each_multi_index(k: usize, p: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; p];
    loop {
        f(&idx);
        // increment like a (k+1)-ary counter, most significant digit first
        let mut axis = p;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if idx[axis] < k {
                idx[axis] += 1;
                for v in idx.iter_mut().skip(axis + 1) {
                    *v = 0;
                }
                break;
            }
        }
    }
}

/// Flat offset of a multi-index in the lexicographic enumeration of
/// {0,..,k}^p.
pub fn flat_index(idx: &[usize], k: usize) -> usize {
    let mut out = 0usize;
    for &i in idx {
        out = out * (k + 1) + i;
    }
    out
}

/// Ordinary least squares slope of y against x.
#[cfg(test)]
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Median of a slice (copies; slices here are short).
#[cfg(test)]
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
