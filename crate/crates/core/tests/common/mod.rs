//! Independent reference implementations shared by the integration tests.
//! They deliberately avoid the library's own helpers beyond plain data
//! access.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphereview::metrics::SaliencyMap;
use sphereview::stats::SaliencyMask;
use sphereview::{Grid, GridDims};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Axis-angle rotation of `v` about unit `k`.
pub fn rodrigues(k: [f64; 3], angle: f64, v: [f64; 3]) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let cross = [k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]];
    let dot = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    [0, 1, 2].map(|i| v[i] * c + cross[i] * s + k[i] * dot * (1.0 - c))
}

/// Longitude/latitude of an ERP pixel center, `(0, 0)` at the north-west
/// corner.
pub fn pixel_lon_lat(u: f64, v: f64, w: usize, h: usize) -> (f64, f64) {
    let lon = -PI + (u + 0.5) * 2.0 * PI / w as f64;
    let lat = PI / 2.0 - (v + 0.5) * PI / h as f64;
    (lon, lat)
}

pub fn lon_lat_pixel(lon: f64, lat: f64, w: usize, h: usize) -> (f64, f64) {
    let u = (lon + PI) * w as f64 / (2.0 * PI) - 0.5;
    let v = (PI / 2.0 - lat) * h as f64 / PI - 0.5;
    (u.rem_euclid(w as f64), v)
}

/// Smallest distance between two column coordinates on a ring of `w`.
pub fn ring_dist(a: f64, b: f64, w: usize) -> f64 {
    let d = (a - b).rem_euclid(w as f64);
    d.min(w as f64 - d)
}

/// Smooth multi-octave test panorama defined on the sphere, 0..255.
pub fn natural_image(w: usize, h: usize, channels: usize, seed: u64) -> Grid {
    let mut r = rng(seed);
    let waves: Vec<Vec<([f64; 3], f64, f64, f64)>> = (0..channels)
        .map(|_| {
            (0..24)
                .map(|i| {
                    let freq = 1.0 + (i as f64) * 1.5;
                    (random_unit(&mut r), freq, r.gen_range(0.0..2.0 * PI), 1.0 / freq)
                })
                .collect()
        })
        .collect();
    let norm: f64 = (0..24).map(|i| 1.0 / (1.0 + i as f64 * 1.5)).sum();
    Grid::from_fn(GridDims::new(w, h).unwrap(), channels, |row, col, k| {
        let (lon, lat) = pixel_lon_lat(col as f64, row as f64, w, h);
        let p = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
        let s: f64 = waves[k]
            .iter()
            .map(|(d, f, ph, a)| a * (f * (d[0] * p[0] + d[1] * p[1] + d[2] * p[2]) + ph).sin())
            .sum();
        127.5 + 120.0 * s / norm
    })
}

/// Bilinear sample wrapping columns and clamping rows.
pub fn bilinear(img: &Grid, u: f64, v: f64, ch: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let v = v.clamp(0.0, (h - 1) as f64);
    let u0 = u.floor();
    let v0 = v.floor();
    let (fu, fv) = (u - u0, v - v0);
    let c0 = (u0 as i64).rem_euclid(w as i64) as usize;
    let c1 = (c0 + 1) % w;
    let r0 = v0 as usize;
    let r1 = (r0 + 1).min(h - 1);
    let top = img.get(r0, c0, ch) * (1.0 - fu) + img.get(r0, c1, ch) * fu;
    let bottom = img.get(r1, c0, ch) * (1.0 - fu) + img.get(r1, c1, ch) * fu;
    top * (1.0 - fv) + bottom * fv
}

pub fn psnr(a: &Grid, b: &Grid) -> f64 {
    let mse: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data().len() as f64;
    10.0 * (255.0 * 255.0 / mse).log10()
}

// Saliency oracles on nested vectors.

pub type Mat = Vec<Vec<f64>>;

pub fn map_mat(s: &SaliencyMap) -> Mat {
    let d = s.dims();
    (0..d.height()).map(|r| (0..d.width()).map(|c| s.get(r, c)).collect()).collect()
}

pub fn mask_mat(g: &SaliencyMask) -> Mat {
    (0..g.height()).map(|r| (0..g.width()).map(|c| if g.get(r, c) { 1.0 } else { 0.0 }).collect()).collect()
}

fn mean2(m: &Mat) -> f64 {
    let n: usize = m.iter().map(Vec::len).sum();
    m.iter().flatten().sum::<f64>() / n as f64
}

pub fn oracle_mae(s: &Mat, g: &Mat) -> f64 {
    let mut acc = 0.0;
    let mut n = 0.0;
    for (rs, rg) in s.iter().zip(g) {
        for (a, b) in rs.iter().zip(rg) {
            acc += (a - b).abs();
            n += 1.0;
        }
    }
    acc / n
}

fn f_of(tp: f64, fp: f64, fneg: f64) -> f64 {
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    if p + r == 0.0 {
        0.0
    } else {
        (1.0 + 0.3) * p * r / (0.3 * p + r)
    }
}

pub fn oracle_f_at(s: &Mat, g: &Mat, t: f64) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for (rs, rg) in s.iter().zip(g) {
        for (&a, &b) in rs.iter().zip(rg) {
            let pos = a >= t && a > 0.0;
            match (pos, b > 0.5) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                _ => {}
            }
        }
    }
    f_of(tp, fp, fneg)
}

pub fn oracle_adaptive(s: &Mat) -> f64 {
    (2.0 * mean2(s)).min(1.0)
}

pub fn oracle_max_f(s: &Mat, g: &Mat) -> f64 {
    let mut best = 0.0f64;
    for i in 0..256 {
        best = best.max(oracle_f_at(s, g, i as f64 / 255.0));
    }
    best
}

/// Weighted F-measure following the published reference procedure, with
/// nearest-foreground lookup by exhaustive search.
pub fn oracle_wfb(s: &Mat, g: &Mat, planar: bool) -> f64 {
    let h = g.len();
    let w = g[0].len();
    let eps = f64::EPSILON;
    let fg: Vec<(usize, usize)> =
        (0..h).flat_map(|r| (0..w).map(move |c| (r, c))).filter(|&(r, c)| g[r][c] > 0.5).collect();
    let e: Mat = (0..h).map(|r| (0..w).map(|c| (s[r][c] - g[r][c]).abs()).collect()).collect();
    let signed_dx = |from: usize, to: usize| -> i64 {
        let d = to as i64 - from as i64;
        if planar {
            d
        } else {
            let m = d.rem_euclid(w as i64);
            if 2 * m > w as i64 {
                m - w as i64
            } else {
                m
            }
        }
    };
    let mut dst = vec![vec![0.0; w]; h];
    let mut et = e.clone();
    for r in 0..h {
        for c in 0..w {
            if g[r][c] > 0.5 {
                continue;
            }
            let mut best: Option<(i64, i64, i64, usize, usize)> = None;
            for &(fr, fc) in &fg {
                let dy = fr as i64 - r as i64;
                let dx = signed_dx(c, fc);
                let key = (dy * dy + dx * dx, dy, dx, fr, fc);
                if best.is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                    best = Some(key);
                }
            }
            let b = best.unwrap();
            dst[r][c] = (b.0 as f64).sqrt();
            et[r][c] = e[b.3][b.4];
        }
    }
    // 7x7 Gaussian, sigma 5, normalized.
    let sigma = 5.0f64;
    let mut k = vec![vec![0.0; 7]; 7];
    let mut ksum = 0.0;
    let mut kmax = 0.0f64;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            let (y, xx) = (i as f64 - 3.0, j as f64 - 3.0);
            *x = (-(xx * xx + y * y) / (2.0 * sigma * sigma)).exp();
            kmax = kmax.max(*x);
        }
    }
    for row in k.iter_mut() {
        for x in row.iter_mut() {
            if *x < eps * kmax {
                *x = 0.0;
            }
            ksum += *x;
        }
    }
    let mut ea = vec![vec![0.0; w]; h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for i in 0..7 {
                for j in 0..7 {
                    let rr = r as i64 + i as i64 - 3;
                    let cc = c as i64 + j as i64 - 3;
                    if rr < 0 || rr >= h as i64 {
                        continue;
                    }
                    let cc = if planar {
                        if cc < 0 || cc >= w as i64 {
                            continue;
                        }
                        cc as usize
                    } else {
                        cc.rem_euclid(w as i64) as usize
                    };
                    acc += k[i][j] / ksum * et[rr as usize][cc];
                }
            }
            ea[r][c] = acc;
        }
    }
    let mut min_e_ea = e.clone();
    for r in 0..h {
        for c in 0..w {
            if g[r][c] > 0.5 && ea[r][c] < e[r][c] {
                min_e_ea[r][c] = ea[r][c];
            }
        }
    }
    let alpha = 0.5f64.ln() / 5.0;
    let (mut tpw_err, mut fpw, mut n_fg) = (0.0, 0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if g[r][c] > 0.5 {
                tpw_err += min_e_ea[r][c];
                n_fg += 1.0;
            } else {
                fpw += min_e_ea[r][c] * (2.0 - (alpha * dst[r][c]).exp());
            }
        }
    }
    let tpw = n_fg - tpw_err;
    let rec = 1.0 - tpw_err / n_fg;
    let prec = tpw / (eps + tpw + fpw);
    (1.0 + 0.3) * rec * prec / (eps + rec + 0.3 * prec)
}

fn object(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let x = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - x) * (v - x)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    2.0 * x / (x * x + 1.0 + sd + f64::EPSILON)
}

fn block_ssim(p: &Mat, g: &Mat) -> f64 {
    let n: usize = p.iter().map(Vec::len).sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let eps = f64::EPSILON;
    let x = mean2(p);
    let y = mean2(g);
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for (rp, rg) in p.iter().zip(g) {
        for (a, b) in rp.iter().zip(rg) {
            sx += (a - x) * (a - x);
            sy += (b - y) * (b - y);
            sxy += (a - x) * (b - y);
        }
    }
    let (sx, sy, sxy) = (sx / (n - 1.0 + eps), sy / (n - 1.0 + eps), sxy / (n - 1.0 + eps));
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + eps)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn sub(m: &Mat, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Mat {
    if cols.is_empty() {
        return Vec::new();
    }
    m[rows].iter().map(|r| r[cols.clone()].to_vec()).collect()
}

pub fn oracle_s_measure(s: &Mat, g: &Mat) -> f64 {
    let y = mean2(g);
    if y == 0.0 {
        return 1.0 - mean2(s);
    }
    if y == 1.0 {
        return mean2(s);
    }
    let h = g.len();
    let w = g[0].len();
    let mut fg_vals = Vec::new();
    let mut bg_vals = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if g[r][c] > 0.5 {
                fg_vals.push(s[r][c]);
            } else {
                bg_vals.push(1.0 - s[r][c]);
            }
        }
    }
    let s_object = y * object(&fg_vals) + (1.0 - y) * object(&bg_vals);

    let total: f64 = g.iter().flatten().sum();
    let mut xs = 0.0;
    let mut ys = 0.0;
    for r in 0..h {
        for c in 0..w {
            xs += g[r][c] * (c + 1) as f64;
            ys += g[r][c] * (r + 1) as f64;
        }
    }
    let cx = (xs / total).round() as usize;
    let cy = (ys / total).round() as usize;
    let area = (w * h) as f64;
    let w1 = (cx * cy) as f64 / area;
    let w2 = ((w - cx) * cy) as f64 / area;
    let w3 = (cx * (h - cy)) as f64 / area;
    let w4 = 1.0 - w1 - w2 - w3;
    let q = w1 * block_ssim(&sub(s, 0..cy, 0..cx), &sub(g, 0..cy, 0..cx))
        + w2 * block_ssim(&sub(s, 0..cy, cx..w), &sub(g, 0..cy, cx..w))
        + w3 * block_ssim(&sub(s, cy..h, 0..cx), &sub(g, cy..h, 0..cx))
        + w4 * block_ssim(&sub(s, cy..h, cx..w), &sub(g, cy..h, cx..w));
    (0.5 * s_object + 0.5 * q).max(0.0)
}

pub fn oracle_e_measure(s: &Mat, g: &Mat) -> f64 {
    let t = oracle_adaptive(s);
    let fm: Mat = s.iter().map(|r| r.iter().map(|&x| if x >= t && x > 0.0 { 1.0 } else { 0.0 }).collect()).collect();
    let n: f64 = g.iter().map(|r| r.len() as f64).sum();
    let fg: f64 = g.iter().flatten().sum();
    let enhanced: Mat = if fg == 0.0 {
        fm.iter().map(|r| r.iter().map(|x| 1.0 - x).collect()).collect()
    } else if fg == n {
        fm.clone()
    } else {
        let mu_fm = mean2(&fm);
        let mu_gt = mean2(g);
        fm.iter()
            .zip(g)
            .map(|(rf, rg)| {
                rf.iter()
                    .zip(rg)
                    .map(|(a, b)| {
                        let (af, ag) = (a - mu_fm, b - mu_gt);
                        let align = 2.0 * (ag * af) / (ag * ag + af * af + f64::EPSILON);
                        (align + 1.0).powi(2) / 4.0
                    })
                    .collect()
            })
            .collect()
    };
    enhanced.iter().flatten().sum::<f64>() / n
}

/// Random mask made of one to three rectangles, possibly empty.
pub fn random_mask(rng: &mut impl Rng, w: usize, h: usize) -> SaliencyMask {
    let rects: Vec<(usize, usize, usize, usize)> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let r0 = rng.gen_range(0..h);
            let c0 = rng.gen_range(0..w);
            (r0, rng.gen_range(r0..h) + 1, c0, rng.gen_range(c0..w) + 1)
        })
        .collect();
    SaliencyMask::from_fn(GridDims::any(w, h).unwrap(), |r, c| {
        rects.iter().any(|&(r0, r1, c0, c1)| (r0..r1).contains(&r) && (c0..c1).contains(&c))
    })
}

/// 8-bit prediction loosely correlated with `g`.
pub fn random_prediction(rng: &mut impl Rng, g: &SaliencyMask) -> SaliencyMap {
    let quality: f64 = rng.gen_range(0.0..1.0);
    let zero_frac: f64 = rng.gen_range(0.0..0.5);
    let levels: Vec<u8> = (0..g.data().len())
        .map(|i| {
            if rng.gen_bool(zero_frac) {
                return 0;
            }
            let target = if g.data()[i] { 255.0 } else { 0.0 };
            let noise: f64 = rng.gen_range(0.0..255.0);
            (quality * target + (1.0 - quality) * noise).round() as u8
        })
        .collect();
    SaliencyMap::new(g.dims(), levels.into_iter().map(|x| x as f64 / 255.0).collect()).unwrap()
}

/// Two-stage gate evaluated with explicit loops.
pub fn oracle_gate(fg: &Grid, w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64], k: usize) -> Vec<f64> {
    let c = fg.channels();
    let hidden = b1.len();
    let mut pooled = vec![0.0; c];
    for r in 0..fg.height() {
        for col in 0..fg.width() {
            for (ch, p) in pooled.iter_mut().enumerate() {
                *p += fg.get(r, col, ch);
            }
        }
    }
    for p in pooled.iter_mut() {
        *p /= (fg.width() * fg.height()) as f64;
    }
    let mut z = vec![0.0; hidden];
    for j in 0..hidden {
        let mut acc = b1[j];
        for i in 0..c {
            acc += w1[i * hidden + j] * pooled[i];
        }
        z[j] = if acc > 0.0 { acc } else { 0.0 };
    }
    let mut out = vec![0.0; k];
    for m in 0..k {
        let mut acc = b2[m];
        for j in 0..hidden {
            acc += w2[j * k + m] * z[j];
        }
        out[m] = 1.0 / (1.0 + (-acc).exp());
    }
    out
}
