//! Integer-order Bessel functions of the first kind and a table of their
//! positive zeros, used by the unit-disk heat kernel eigen-expansion.

use std::sync::OnceLock;

/// `J_n(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ_k J_{2k} = 1`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    // J_{-n} = (-1)^n J_n and J_n(-x) = (-1)^n J_n(x)
    let sign = if n % 2 != 0 && (n < 0) != (x < 0.0) { -1.0 } else { 1.0 };
    let order = n.unsigned_abs() as usize;
    let ax = x.abs();
    if ax == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let top = (order as f64).max(ax);
    let mut start = (top + 20.0 + 2.0 * (40.0 * top).sqrt()) as usize;
    start += start % 2;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let (mut norm, mut value) = (0.0, 0.0);
    for k in (1..=start).rev() {
        // cur = j_k, next = j_{k+1}
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        let k1 = k - 1;
        if k1 == order {
            value = cur;
        }
        if k1 > 0 && k1 % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            value *= 1e-250;
        }
    }
    if order == start {
        value = next;
    }
    norm += cur;
    sign * value / norm
}

/// Derivative `J_n'(x) = (J_{n-1}(x) − J_{n+1}(x)) / 2`.
pub fn bessel_j_prime(n: i32, x: f64) -> f64 {
    0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
}

/// One Dirichlet eigenmode of the unit disk: order `n >= 0`, zero `j = j_{n,k}`,
/// and `J_{n+1}(j)`.
#[derive(Debug, Clone, Copy)]
pub struct DiskMode {
    pub order: u32,
    pub zero: f64,
    pub j_next: f64,
}

/// All disk modes with `j_{n,k} < max_zero`, sorted by order then zero.
pub fn disk_modes(max_zero: f64) -> Vec<DiskMode> {
    let mut out = Vec::new();
    let mut n = 0i32;
    loop {
        let zeros = bessel_zeros(n, max_zero);
        if zeros.is_empty() {
            break;
        }
        for z in zeros {
            out.push(DiskMode { order: n as u32, zero: z, j_next: bessel_j(n + 1, z) });
        }
        n += 1;
    }
    out
}

/// Shared table for the heat-kernel series; covers `t >= DISK_MIN_TIME`.
pub(crate) fn disk_mode_table() -> &'static [DiskMode] {
    static TABLE: OnceLock<Vec<DiskMode>> = OnceLock::new();
    TABLE.get_or_init(|| disk_modes(DISK_MAX_ZERO))
}

pub(crate) const DISK_MAX_ZERO: f64 = 70.0;
/// Smallest time at which the truncated disk series is accurate to ~e^{-40}.
pub const DISK_MIN_TIME: f64 = 40.0 / (DISK_MAX_ZERO * DISK_MAX_ZERO);

fn bessel_zeros(n: i32, max_zero: f64) -> Vec<f64> {
    // J_n has no zeros below n for n >= 1.
    let mut x = (n as f64).max(0.5);
    let step = 0.1;
    let mut zeros = Vec::new();
    let mut fx = bessel_j(n, x);
    while x < max_zero {
        let x1 = x + step;
        let f1 = bessel_j(n, x1);
        if fx == 0.0 {
            zeros.push(x);
        } else if fx * f1 < 0.0 {
            zeros.push(refine_zero(n, x, x1, fx));
        }
        x = x1;
        fx = f1;
    }
    zeros.retain(|&z| z < max_zero);
    zeros
}

fn refine_zero(n: i32, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let mut flo = flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = bessel_j(n, mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    // polish with Newton
    let mut z = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = bessel_j_prime(n, z);
        if d == 0.0 {
            break;
        }
        let dz = bessel_j(n, z) / d;
        if dz.abs() > hi - lo + 1e-12 {
            break;
        }
        z -= dz;
    }
    z
}
