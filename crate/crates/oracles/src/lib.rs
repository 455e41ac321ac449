//! Slow, direct reference computations. Everything here is written from the
//! defining formulas with plain loops over `Vec`s so it shares no code with
//! the implementation under test.

use num_complex::Complex64;

/// Direct `O(N²)` DFT. `inverse` flips the exponent sign and divides by `N`.
pub fn naive_dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let angle = sign * 2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
            acc += v * Complex64::new(angle.cos(), angle.sin());
        }
        *slot = if inverse { acc / n as f64 } else { acc };
    }
    out
}

/// Quadruple-loop 2-D DFT of a real `rows × cols` grid, row-major output.
pub fn naive_dft2d(grid: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    let m = grid.len();
    let n = grid[0].len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; m];
    for (k, out_row) in out.iter_mut().enumerate() {
        for (l, slot) in out_row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, row) in grid.iter().enumerate() {
                for (c, &a) in row.iter().enumerate() {
                    let phase = ((r * k) % m) as f64 / m as f64 + ((c * l) % n) as f64 / n as f64;
                    let angle = -2.0 * std::f64::consts::PI * phase;
                    acc += a * Complex64::new(angle.cos(), angle.sin());
                }
            }
            *slot = acc;
        }
    }
    out
}

/// Largest `|a − b|` divided by the largest `|b|` (or 1 when `b ≡ 0`).
pub fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

/// Reference Haar analysis of one grid, returning `[ll, lh, hl, hh]`.
pub fn haar_blocks(grid: &[Vec<f64>]) -> [Vec<Vec<f64>>; 4] {
    let h = grid.len() / 2;
    let w = grid[0].len() / 2;
    let mut out: [Vec<Vec<f64>>; 4] = std::array::from_fn(|_| vec![vec![0.0; w]; h]);
    for i in 0..h {
        for j in 0..w {
            let a = grid[2 * i][2 * j];
            let b = grid[2 * i][2 * j + 1];
            let c = grid[2 * i + 1][2 * j];
            let d = grid[2 * i + 1][2 * j + 1];
            out[0][i][j] = (a + b + c + d) / 2.0;
            out[1][i][j] = (a + b - c - d) / 2.0;
            out[2][i][j] = (a - b + c - d) / 2.0;
            out[3][i][j] = (a - b - c + d) / 2.0;
        }
    }
    out
}

/// Bilinear sample of a single-channel grid at output pixel `(ox, oy)` using
/// half-pixel centres and clamped neighbours.
pub fn bilinear_at(grid: &[Vec<f64>], out_w: usize, out_h: usize, ox: usize, oy: usize) -> f64 {
    let in_h = grid.len();
    let in_w = grid[0].len();
    let sx = ((ox as f64 + 0.5) * in_w as f64 / out_w as f64 - 0.5).max(0.0);
    let sy = ((oy as f64 + 0.5) * in_h as f64 / out_h as f64 - 0.5).max(0.0);
    let x0 = (sx.floor() as usize).min(in_w - 1);
    let y0 = (sy.floor() as usize).min(in_h - 1);
    let x1 = (x0 + 1).min(in_w - 1);
    let y1 = (y0 + 1).min(in_h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let top = grid[y0][x0] * (1.0 - fx) + grid[y0][x1] * fx;
    let bottom = grid[y1][x0] * (1.0 - fx) + grid[y1][x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Per-block `(mean, std, min, max, mean square)` for one channel split into
/// `g × g` blocks, blocks in row-major order.
pub fn block_stats(grid: &[Vec<f64>], g: usize) -> Vec<[f64; 5]> {
    let bh = grid.len() / g;
    let bw = grid[0].len() / g;
    let mut out = Vec::new();
    for by in 0..g {
        for bx in 0..g {
            let mut values = Vec::new();
            for row in &grid[by * bh..(by + 1) * bh] {
                values.extend_from_slice(&row[bx * bw..(bx + 1) * bw]);
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sq = values.iter().map(|v| v * v).sum::<f64>() / n;
            out.push([mean, var.sqrt(), min, max, sq]);
        }
    }
    out
}

/// Attention head parameters as nested vectors.
#[derive(Debug, Clone)]
pub struct Head {
    pub v: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub wc: Vec<Vec<f64>>,
    pub bc: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softplus(x: f64) -> f64 {
    (1.0 + x.exp()).ln()
}

fn row_dot(row: &[f64], h: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..h.len() {
        s += row[j] * h[j];
    }
    s
}

fn classify(p: &Head, z: &[f64]) -> Vec<f64> {
    (0..p.bc.len()).map(|c| row_dot(&p.wc[c], z) + p.bc[c]).collect()
}

fn softmax_pool(p: &Head, bag: &[Vec<f64>], scores: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let attn: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let d = bag[0].len();
    let mut z = vec![0.0; d];
    for (k, h) in bag.iter().enumerate() {
        for j in 0..d {
            z[j] += attn[k] * h[j];
        }
    }
    (classify(p, &z), attn)
}

/// Attention MIL: `wᵀ tanh(V h)` scores, softmax, weighted sum, linear layer.
pub fn mil(p: &Head, bag: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let scores = bag
        .iter()
        .map(|h| (0..p.w.len()).map(|l| p.w[l] * row_dot(&p.v[l], h).tanh()).sum())
        .collect();
    softmax_pool(p, bag, scores)
}

/// Gated attention MIL: `wᵀ (tanh(V h) ⊙ σ(U h))` scores.
pub fn gated_mil(p: &Head, bag: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let scores = bag
        .iter()
        .map(|h| {
            (0..p.w.len())
                .map(|l| p.w[l] * row_dot(&p.v[l], h).tanh() * sigmoid(row_dot(&p.u[l], h)))
                .sum()
        })
        .collect();
    softmax_pool(p, bag, scores)
}

/// MRL without dropout: `e = s1 s2 / (s1 + s2 + 1e-8)` with softplus and
/// sigmoid streams, raw scores `a = wᵀ e`, mean pooling of `a_k h_k`.
/// Returns logits, raw scores and the `e` rows.
pub fn mrl(p: &Head, bag: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let d = bag[0].len();
    let mut z = vec![0.0; d];
    let mut scores = Vec::new();
    let mut merged = Vec::new();
    for h in bag {
        let mut e = Vec::new();
        for l in 0..p.w.len() {
            let s1 = softplus(row_dot(&p.v[l], h));
            let s2 = sigmoid(row_dot(&p.u[l], h));
            e.push(s1 * s2 / (s1 + s2 + 1e-8));
        }
        let a: f64 = (0..p.w.len()).map(|l| p.w[l] * e[l]).sum();
        for j in 0..d {
            z[j] += a * h[j] / bag.len() as f64;
        }
        scores.push(a);
        merged.push(e);
    }
    (classify(p, &z), scores, merged)
}

/// Central difference of `f` along every coordinate of `x`.
pub fn central_difference(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let hi = f(&probe);
            probe[i] = orig - step;
            let lo = f(&probe);
            probe[i] = orig;
            (hi - lo) / (2.0 * step)
        })
        .collect()
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Binary cross-entropy written with `ln` of the probabilities.
pub fn bce(z: f64, y: bool) -> f64 {
    let p = sigmoid(z);
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Fraction of (positive, negative) pairs ranked correctly, ties worth half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut pairs = 0u64;
    let mut credit2 = 0u64;
    for (i, &yi) in labels.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                credit2 += 2;
            } else if scores[i] == scores[j] {
                credit2 += 1;
            }
        }
    }
    (pairs > 0).then(|| credit2 as f64 / 2.0 / pairs as f64)
}

/// Non-interpolated average precision by walking ranks. Rank order is by
/// descending score with earlier indices first among ties.
pub fn rank_walk_ap(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n = scores.len();
    let mut taken = vec![false; n];
    let mut ranked = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            match pick {
                None => pick = Some(i),
                Some(p) if scores[i] > scores[p] => pick = Some(i),
                _ => {}
            }
        }
        let p = pick.unwrap();
        taken[p] = true;
        ranked.push(p);
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 {
        return None;
    }
    let mut hits = 0;
    let mut sum = 0.0;
    for (rank, &i) in ranked.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Scalar Adam followed by decoupled decay, applied for each gradient in turn.
pub fn adam_trajectory(theta0: f64, grads: &[f64], lr: f64, wd: f64) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v, mut theta) = (0.0, 0.0, theta0);
    let mut out = Vec::new();
    for (i, g) in grads.iter().enumerate() {
        let t = (i + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        theta -= lr * wd * theta;
        out.push(theta);
    }
    out
}

/// Fits a one-feature-vector logistic regression by full-batch gradient
/// descent and returns in-sample scores. Used as a linear probe.
pub fn logistic_probe(x: &[Vec<f64>], y: &[bool], iters: usize, lr: f64) -> Vec<f64> {
    let d = x[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..iters {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let p = sigmoid(row_dot(&w, xi) + b);
            let r = p - if yi { 1.0 } else { 0.0 };
            for j in 0..d {
                gw[j] += r * xi[j];
            }
            gb += r;
        }
        let n = x.len() as f64;
        for j in 0..d {
            w[j] -= lr * gw[j] / n;
        }
        b -= lr * gb / n;
    }
    x.iter().map(|xi| row_dot(&w, xi) + b).collect()
}
