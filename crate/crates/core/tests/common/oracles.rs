//! Independent brute-force reference implementations used to verify the
//! production code. Everything here is written in the most literal way
//! possible (plain loops, naive DFT) and must not share code with the
//! library.

/// Naive O(n^2) DFT magnitude spectrum, bins `0..=n/2`.
pub fn naive_dft_mags(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let mut mags = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &x) in frame.iter().enumerate() {
            let angle = -std::f64::consts::TAU * k as f64 * i as f64 / n as f64;
            re += x * angle.cos();
            im += x * angle.sin();
        }
        mags.push((re * re + im * im).sqrt());
    }
    mags
}

/// Hann window and zero padding applied literally.
pub fn naive_windowed_frame(samples: &[f64], fft_len: usize) -> Vec<f64> {
    let n = samples.len();
    let mut frame = vec![0.0; fft_len];
    for i in 0..n {
        let w = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos();
        frame[i] = samples[i] * w;
    }
    frame
}

fn bin_hz(k: usize, fft_len: usize, fs: f64) -> f64 {
    k as f64 * fs / fft_len as f64
}

/// Spectral band ratio evaluated directly on a magnitude spectrum.
/// Returns `None` for frames where the ratio is undefined.
pub fn band_ratio(mags: &[f64], fft_len: usize, fs: f64) -> Option<f64> {
    let mut peak = 0.0f64;
    for &m in mags {
        peak = peak.max(m);
    }
    if peak <= 0.0 {
        return None;
    }
    let mut upper = 0.0;
    let mut lower = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        let f = bin_hz(k, fft_len, fs);
        if f > 500.0 && f < 6000.0 {
            upper += m / peak;
        }
        if f > 80.0 && f < 400.0 {
            lower += m / peak;
        }
    }
    if upper <= 0.0 || lower <= 0.0 {
        return None;
    }
    Some(20.0 * (upper / lower).log10())
}

pub const BARK_EDGES: [f64; 13] = [
    0.0, 50.0, 100.0, 150.0, 200.0, 300.0, 400.0, 510.0, 630.0, 770.0, 920.0, 1080.0, 1270.0,
];

/// Bark-band energies evaluated directly on a magnitude spectrum.
pub fn bark_energies(mags: &[f64], fft_len: usize, fs: f64) -> [f64; 12] {
    let mut bands = [0.0f64; 12];
    for (k, &m) in mags.iter().enumerate() {
        let f = bin_hz(k, fft_len, fs);
        for b in 0..12 {
            if f > BARK_EDGES[b] && f < BARK_EDGES[b + 1] {
                bands[b] += m * m;
            }
        }
    }
    bands
}

/// Cent mapping via natural logarithms.
pub fn cents(f0: f64, reference: f64) -> f64 {
    1200.0 * (f0 / reference).ln() / 2f64.ln()
}

/// Local RMS fluctuation in dB with a literal double loop.
pub fn local_rms_fluctuation(rms: &[f64], half: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rms.len());
    for i in 0..rms.len() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(rms.len() - 1);
        let mut sum = 0.0;
        let mut count = 0;
        for j in lo..=hi {
            sum += rms[j];
            count += 1;
        }
        let mean = sum / count as f64;
        out.push(if mean <= 0.0 {
            0.0
        } else {
            20.0 * (rms[i] / mean).log10()
        });
    }
    out
}

/// Population z-scores.
pub fn zscores(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    xs.iter().map(|x| (x - mean) / std).collect()
}

/// Tuned reference frequency from a deviation in cents.
pub fn a4_from_cents(cents: f64) -> f64 {
    (2f64.ln() * cents / 1200.0).exp() * 440.0
}

/// Average chroma normalised to sum one.
pub fn global_pitch_classes(chroma: &[[f64; 12]]) -> [f64; 12] {
    let mut mean = [0.0f64; 12];
    for frame in chroma {
        for c in 0..12 {
            mean[c] += frame[c] / chroma.len() as f64;
        }
    }
    let total: f64 = mean.iter().sum();
    let mut out = [0.0f64; 12];
    for c in 0..12 {
        out[c] = mean[c] / total;
    }
    out
}

/// Literal evaluation of the local pitch mixture: histogram of nearest
/// semitone bins, each bin replaced by a weighted Gaussian, accumulated on
/// `[min-3, max+3]`. Returns `(first_bin, values)`.
pub fn local_pitch_probability(cents: &[f64]) -> (i32, Vec<f64>) {
    let sigma = 0.5f64;
    let bins: Vec<i32> = cents.iter().map(|c| (c / 100.0).round() as i32).collect();
    let lo = bins.iter().min().unwrap() - 3;
    let hi = bins.iter().max().unwrap() + 3;
    let mut values = Vec::new();
    for k in lo..=hi {
        let mut total = 0.0;
        for centre in lo..=hi {
            let h = bins.iter().filter(|&&b| b == centre).count() as f64 / bins.len() as f64;
            let d = (k - centre) as f64;
            total += h * (1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt()))
                * (-d * d / (2.0 * sigma * sigma)).exp();
        }
        values.push(total);
    }
    (lo, values)
}

/// Non-negative pitch class of a semitone bin.
pub fn pitch_class(k: i64) -> usize {
    (((k % 12) + 12) % 12) as usize
}

/// Literal combined-probability argmax: `69 + argmax(global[class] * local)`,
/// ties to the lower bin.
pub fn assign_pitch(first_bin: i32, local: &[f64], global: &[f64; 12]) -> i32 {
    let mut best_bin = first_bin;
    let mut best = f64::NEG_INFINITY;
    for (i, &l) in local.iter().enumerate() {
        let bin = first_bin + i as i32;
        let p = global[pitch_class(bin as i64)] * l;
        if p > best {
            best = p;
            best_bin = bin;
        }
    }
    69 + best_bin
}

/// Maximum bipartite matching by exhaustive bitmask DP (reference for the
/// matching inside the metrics). `adjacency[i]` lists gt indices allowed for
/// estimate `i`.
pub fn max_matching_brute_force(adjacency: &[Vec<usize>], gt_len: usize) -> usize {
    assert!(gt_len <= 16, "brute force oracle is exponential");
    let size = 1usize << gt_len;
    // dp[mask] = best match count over the estimates seen so far with the
    // gt set `mask` consumed; one layer per estimate.
    let mut dp = vec![0u32; size];
    for adj in adjacency {
        let mut next = dp.clone(); // this estimate left unmatched
        for (mask, &current) in dp.iter().enumerate() {
            for &j in adj {
                if mask & (1 << j) == 0 {
                    let with_j = mask | (1 << j);
                    next[with_j] = next[with_j].max(current + 1);
                }
            }
        }
        dp = next;
    }
    *dp.iter().max().unwrap() as usize
}
