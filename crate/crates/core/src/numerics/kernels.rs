//! Small slice kernels. Eight independent accumulators let the compiler keep
//! several vector lanes busy; summation order is fixed, so results are
//! reproducible bit-for-bit.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out += W x` for a row-major `W` of shape `[out.len(), x.len()]`.
#[inline]
pub fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ g` for a row-major `W` of shape `[g.len(), out.len()]`.
#[inline]
pub fn matvec_t_add(w: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), g.len() * cols);
    for (gi, row) in g.iter().zip(w.chunks_exact(cols)) {
        if *gi != 0.0 {
            axpy(*gi, row, out);
        }
    }
}

/// `W += g xᵀ` for a row-major `W` of shape `[g.len(), x.len()]`.
#[inline]
pub fn outer_add(g: &[f64], x: &[f64], w: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), g.len() * cols);
    for (gi, row) in g.iter().zip(w.chunks_exact_mut(cols)) {
        if *gi != 0.0 {
            axpy(*gi, x, row);
        }
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
