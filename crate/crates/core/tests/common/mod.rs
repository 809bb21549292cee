//! Test-side oracles shared by the integration tests.
//!
//! The flat-norm oracles work on the dual side of the program: for fixed
//! `(a, b)`,
//!
//! ```text
//! h(a, b) = min  a sum_i |r_i| + b sum_i d_i |S_i - R_i|
//! ```
//!
//! over removed masses `r_i` with partial sums `R_i`, where `S_i` are the
//! partial sums of the weights and `R_n = S_n` (what is not removed is
//! transported, and transport needs zero net mass). The minimization is a
//! convex piecewise-linear dynamic program in `R`.
#![allow(dead_code)]

use measure_transport::ParticleMeasure;

/// Convex piecewise-linear function on the real line.
#[derive(Debug, Clone)]
struct Convex {
    points: Vec<(f64, f64)>,
    left_slope: f64,
    right_slope: f64,
}

impl Convex {
    fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if x <= p[0].0 {
            return p[0].1 + self.left_slope * (x - p[0].0);
        }
        let last = p[p.len() - 1];
        if x >= last.0 {
            return last.1 + self.right_slope * (x - last.0);
        }
        let k = p.partition_point(|q| q.0 <= x);
        let (x0, y0) = p[k - 1];
        let (x1, y1) = p[k];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn slopes(&self) -> Vec<f64> {
        let mut s = vec![self.left_slope];
        for w in self.points.windows(2) {
            s.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
        }
        s.push(self.right_slope);
        s
    }

    /// `x -> min_y f(y) + a |x - y|`, assuming slopes reach `-a` and `a`.
    fn clip(&self, a: f64) -> Convex {
        let s = self.slopes();
        let m = self.points.len();
        // s[j] is the slope left of point j, s[j + 1] the slope right of it
        let first = (0..m).find(|&j| s[j + 1] >= -a).unwrap_or(m - 1);
        let last = (0..m).rev().find(|&j| s[j] <= a).unwrap_or(0);
        let (lo, hi) = if first <= last { (first, last) } else { (last, first) };
        Convex {
            points: self.points[lo..=hi].to_vec(),
            left_slope: -a,
            right_slope: a,
        }
    }

    /// Add `c |x - center|`.
    fn add_abs(&self, c: f64, center: f64) -> Convex {
        let mut points = self.points.clone();
        if !points.iter().any(|p| p.0 == center) {
            let y = self.eval(center);
            let k = points.partition_point(|p| p.0 < center);
            points.insert(k, (center, y));
        }
        for p in &mut points {
            p.1 += c * (p.0 - center).abs();
        }
        Convex {
            points,
            left_slope: self.left_slope - c,
            right_slope: self.right_slope + c,
        }
    }
}

fn split(mu: &ParticleMeasure) -> (Vec<f64>, Vec<f64>) {
    let c = mu.coalesce(Default::default());
    let pairs: Vec<(f64, f64)> = c.to_pairs().into_iter().filter(|p| p.1 != 0.0).collect();
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
}

/// `h(a, b)`: cheapest removal plus transport, by the convex dynamic program.
pub fn dual_value(xs: &[f64], ws: &[f64], a: f64, b: f64) -> f64 {
    if xs.is_empty() || a <= 0.0 {
        return 0.0;
    }
    let mut partial = Vec::with_capacity(ws.len());
    let mut acc = 0.0;
    for w in ws {
        acc += w;
        partial.push(acc);
    }
    let mut g = Convex {
        points: vec![(0.0, 0.0)],
        left_slope: -a,
        right_slope: a,
    };
    for i in 0..xs.len() - 1 {
        g = g.add_abs(b * (xs[i + 1] - xs[i]), partial[i]).clip(a);
    }
    g.eval(partial[xs.len() - 1])
}

/// Flat norm: golden-section search of the concave `lambda -> h(lambda, 1 - lambda)`.
pub fn flat_norm_oracle(mu: &ParticleMeasure) -> f64 {
    let (xs, ws) = split(mu);
    let g = |l: f64| dual_value(&xs, &ws, l, 1.0 - l);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = hi - phi * (hi - lo);
        let d = lo + phi * (hi - lo);
        if g(c) < g(d) {
            lo = c;
        } else {
            hi = d;
        }
    }
    [g(0.0), g(1.0), g(0.5 * (lo + hi))].into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Same program with `a` restricted to a uniform grid of `points` values.
pub fn flat_norm_grid_oracle(mu: &ParticleMeasure, points: usize) -> f64 {
    let (xs, ws) = split(mu);
    (0..points)
        .map(|j| {
            let a = j as f64 / (points - 1) as f64;
            dual_value(&xs, &ws, a, 1.0 - a)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
