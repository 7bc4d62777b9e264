//! One-dimensional quadrature: Gauss–Legendre rules, adaptive Gauss–Kronrod,
//! and a dyadic endpoint rule for power-singular integrands with divergence
//! detection.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A fixed composite Gauss–Legendre rule.
#[derive(Clone, Debug)]
pub struct GaussRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        GaussRule { x, w }
    }

    /// Integral over `[a, b]` split into `panels` equal panels.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = KahanSum::default();
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * h;
            for (xi, wi) in self.x.iter().zip(&self.w) {
                acc.add(wi * f(c + 0.5 * h * xi));
            }
        }
        0.5 * h * acc.value()
    }

    /// Nodes and weights mapped to `[a, b]` with `panels` panels.
    pub fn nodes(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.x.len());
        let mut ws = Vec::with_capacity(panels * self.x.len());
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * h;
            for (xi, wi) in self.x.iter().zip(&self.w) {
                xs.push(c + 0.5 * h * xi);
                ws.push(0.5 * h * wi);
            }
        }
        (xs, ws)
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut k = KahanSum::default();
    for v in it {
        k.add(v);
    }
    k.value()
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

struct Seg {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}
impl PartialEq for Seg {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Seg {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

/// Maximum number of panels before an adaptive integral is declared divergent.
pub const MAX_PANELS: usize = 1_000_000;
/// Partial sums above this magnitude are declared divergent.
pub const DIVERGENCE_SUM: f64 = 1e12;

/// Globally adaptive Gauss–Kronrod (7/15) integration on `[a, b]`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, panels: 0 });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Seg { a, b, val: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut panels = 1;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if panels >= max_panels {
            return Err(Error::Divergent(format!("adaptive quadrature exceeded {max_panels} panels")));
        }
        if !total.is_finite() || total.abs() > DIVERGENCE_SUM {
            return Err(Error::Divergent(format!("partial sum {total:e} exceeds threshold")));
        }
        let s = heap.pop().unwrap();
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            // interval no longer splittable in floating point
            heap.push(Seg { err: 0.0, ..s });
            err = heap.iter().map(|s| s.err).sum();
            if heap.iter().all(|s| s.err == 0.0) {
                break;
            }
            continue;
        }
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        total += v1 + v2 - s.val;
        err += e1 + e2 - s.err;
        heap.push(Seg { a: s.a, b: m, val: v1, err: e1 });
        heap.push(Seg { a: m, b: s.b, val: v2, err: e2 });
        panels += 1;
        if panels % 64 == 0 {
            total = compensated_sum(heap.iter().map(|s| s.val));
            err = heap.iter().map(|s| s.err).sum();
        }
    }
    let value = compensated_sum(heap.iter().map(|s| s.val));
    Ok(QuadResult { value, error: err, panels })
}

/// Integral over `(a, b]` of an integrand that may be power-singular at `a`.
///
/// The interval is cut into dyadic pieces `[a + w 2^{-k-1}, a + w 2^{-k}]`
/// integrated adaptively. Once consecutive piece ratios settle, the tail is
/// summed as a geometric series (exact for pure powers). A ratio at or above
/// one, or a partial sum past [`DIVERGENCE_SUM`], is reported as divergence.
pub fn integrate_endpoint_singular<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    integrate_endpoint_floor(f, a, b, rel_tol, 0.0)
}

/// As [`integrate_endpoint_singular`], but stops refining once dyadic
/// pieces are narrower than `floor` and extrapolates the remaining tail.
/// Used when the integrand is evaluated through a reflected coordinate whose
/// rounding caps the attainable resolution.
pub fn integrate_endpoint_floor<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, floor: f64) -> Result<f64> {
    let w = b - a;
    if w == 0.0 {
        return Ok(0.0);
    }
    let mut sum = KahanSum::default();
    let mut prev: Option<f64> = None;
    let mut prev_total: Option<f64> = None;
    let mut growing = 0;
    for k in 0..1000 {
        let hi = a + w * 0.5f64.powi(k);
        let lo = a + w * 0.5f64.powi(k + 1);
        if lo == a || hi <= lo || hi - lo < floor {
            break;
        }
        let abs_tol = 1e-3 * rel_tol * sum.value().abs();
        let piece = adaptive(&mut f, lo, hi, abs_tol, rel_tol * 0.1, 10_000)?.value;
        sum.add(piece);
        let s = sum.value();
        if !s.is_finite() || s.abs() > DIVERGENCE_SUM {
            return Err(Error::Divergent(format!("partial sum {s:e} near endpoint {a}")));
        }
        let p = match prev {
            Some(p) => p,
            None => {
                prev = Some(piece);
                continue;
            }
        };
        prev = Some(piece);
        if p == 0.0 {
            if piece == 0.0 && k > 8 {
                return Ok(s);
            }
            continue;
        }
        let r = piece / p;
        if r >= 1.0 - 1e-9 {
            growing += 1;
            if growing >= 4 && k >= 8 {
                return Err(Error::Divergent(format!("non-summable power singularity at {a} (ratio {r:.6})")));
            }
            prev_total = None;
            continue;
        }
        growing = 0;
        let total = if r > 0.0 { s + piece * r / (1.0 - r) } else { s };
        if let Some(pt) = prev_total {
            if k >= 8 && (total - pt).abs() <= 0.01 * rel_tol * total.abs() {
                if total.abs() > DIVERGENCE_SUM {
                    return Err(Error::Divergent("extrapolated sum exceeds threshold".into()));
                }
                return Ok(total);
            }
        }
        prev_total = Some(total);
    }
    if growing > 0 {
        return Err(Error::Divergent(format!("non-summable power singularity at {a}")));
    }
    Ok(prev_total.unwrap_or(sum.value()))
}

/// Integral over `(a, b)` of an integrand possibly singular at both ends.
pub fn integrate_two_sided<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let ulp = 64.0 * f64::EPSILON;
    let left = integrate_endpoint_floor(&mut f, a, m, rel_tol, ulp * a.abs())?;
    let right = integrate_endpoint_floor(|x| f(a + b - x), a, m, rel_tol, ulp * b.abs())?;
    Ok(left + right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exactness() {
        for n in [1, 2, 5, 12, 40] {
            let r = GaussRule::new(n);
            for p in 0..(2 * n) {
                let v = r.integrate(0.0, 1.0, 1, |x| x.powi(p as i32));
                assert!((v - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p} {v}");
            }
        }
    }

    #[test]
    fn adaptive_smooth_and_peaked() {
        let r = adaptive(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-14, 1e-14, 1000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        let r = adaptive(|x| (-1e4 * (x - 0.3) * (x - 0.3)).exp(), 0.0, 1.0, 1e-15, 1e-13, 10_000).unwrap();
        assert!((r.value - (std::f64::consts::PI / 1e4).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_powers() {
        for a in [-0.5, -0.9, 0.5, -0.25] {
            let v = integrate_endpoint_singular(|x: f64| x.powf(a), 0.0, 1.0, 1e-12).unwrap();
            assert!((v - 1.0 / (a + 1.0)).abs() < 1e-10 / (a + 1.0), "a={a} v={v}");
        }
        assert!(matches!(integrate_endpoint_singular(|x: f64| x.powf(-1.5), 0.0, 1.0, 1e-10), Err(Error::Divergent(_))));
        assert!(matches!(integrate_endpoint_singular(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10), Err(Error::Divergent(_))));
        let v = integrate_two_sided(|x: f64| (x * (1.0 - x)).powf(-0.5), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn compensated() {
        let v = compensated_sum([1e16, 1.0, -1e16, 1.0]);
        assert_eq!(v, 2.0);
    }
}
