//! Fixed-step classical Runge-Kutta integration over small fixed-size states.

pub fn rk4<const N: usize>(x: [f64; N], dt: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let k1 = f(&x);
    let k2 = f(&offset(&x, &k1, dt / 2.0));
    let k3 = f(&offset(&x, &k2, dt / 2.0));
    let k4 = f(&offset(&x, &k3, dt));
    let mut next = x;
    for i in 0..N {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    next
}

fn offset<const N: usize>(x: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}
