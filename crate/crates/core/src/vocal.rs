//! Track-level vocal/non-vocal contour filtering.
//!
//! Melody frames are taken as provisional "voiced" examples and non-melody
//! frames as "unvoiced"; a single multivariate Gaussian is fit to the
//! bark-band features of each class by maximum likelihood. Every frame is
//! then relabelled by comparing the two class densities, the binary
//! prediction is smoothed with a one-second moving average, and contours that
//! lie entirely outside the predicted vocal regions are deleted.

use crate::melody::PitchContour;
use crate::scalar::Scalar;
use crate::spectral::NUM_BARK_BANDS;

/// Fewer labelled frames than this in either class disables filtering for
/// the track (the covariance would be rank deficient).
pub const MIN_CLASS_FRAMES: usize = 13;

const DIM: usize = NUM_BARK_BANDS;

/// Why a model could not be fitted; the pipeline keeps all contours and
/// reports this as a warning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitError {
    TooFewFrames { voiced: usize, unvoiced: usize },
    DegenerateCovariance,
}

impl std::fmt::Display for FitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitError::TooFewFrames { voiced, unvoiced } => write!(
                f,
                "contour filtering disabled: {voiced} voiced / {unvoiced} unvoiced frames \
                 (need at least {MIN_CLASS_FRAMES} each)"
            ),
            FitError::DegenerateCovariance => {
                write!(f, "contour filtering disabled: degenerate covariance")
            }
        }
    }
}

/// One class of the classifier: mean, Cholesky factor of the regularised
/// covariance, and its log determinant.
#[derive(Debug, Clone)]
pub struct ClassGaussian<T> {
    mean: [T; DIM],
    chol: [[T; DIM]; DIM],
    log_det: T,
}

impl<T: Scalar> ClassGaussian<T> {
    fn fit(samples: &[&[T; DIM]]) -> Result<Self, FitError> {
        let n = T::of(samples.len() as f64);
        let mut mean = [T::zero(); DIM];
        for x in samples {
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m = *m + *v;
            }
        }
        for m in &mut mean {
            *m = *m / n;
        }

        let mut cov = [[T::zero(); DIM]; DIM];
        for x in samples {
            for i in 0..DIM {
                let di = x[i] - mean[i];
                for j in 0..=i {
                    cov[i][j] = cov[i][j] + di * (x[j] - mean[j]);
                }
            }
        }
        for i in 0..DIM {
            for j in 0..=i {
                cov[i][j] = cov[i][j] / n;
                cov[j][i] = cov[i][j];
            }
        }

        // Regularise with eps*I, eps = 1e-6 * trace / dim. Guard the
        // all-constant case where the trace itself is zero.
        let trace: T = (0..DIM).map(|i| cov[i][i]).sum();
        let mut eps = if trace > T::zero() {
            T::of(1e-6) * trace / T::of(DIM as f64)
        } else {
            T::of(1e-12)
        };
        for _ in 0..4 {
            let mut a = cov;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] = row[i] + eps;
            }
            if let Some((chol, log_det)) = cholesky(&a) {
                return Ok(ClassGaussian {
                    mean,
                    chol,
                    log_det,
                });
            }
            eps = eps * T::of(100.0);
        }
        Err(FitError::DegenerateCovariance)
    }

    /// Log density up to the shared `(2*pi)^(d/2)` constant, which cancels in
    /// the class comparison.
    fn log_density(&self, x: &[T; DIM]) -> T {
        let mut d = [T::zero(); DIM];
        for i in 0..DIM {
            d[i] = x[i] - self.mean[i];
        }
        // Forward substitution: y = L^-1 (x - mean); the quadratic form is
        // |y|^2.
        let mut quad = T::zero();
        let mut y = [T::zero(); DIM];
        for i in 0..DIM {
            let mut s = d[i];
            for j in 0..i {
                s = s - self.chol[i][j] * y[j];
            }
            y[i] = s / self.chol[i][i];
            quad = quad + y[i] * y[i];
        }
        -T::of(0.5) * (self.log_det + quad)
    }
}

/// Lower-triangular Cholesky factorisation; returns the factor and
/// `log(det)`. `None` when the matrix is not positive definite.
fn cholesky<T: Scalar>(a: &[[T; DIM]; DIM]) -> Option<([[T; DIM]; DIM], T)> {
    let mut l = [[T::zero(); DIM]; DIM];
    let mut log_det = T::zero();
    for i in 0..DIM {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if s <= T::zero() {
                    return None;
                }
                l[i][i] = s.sqrt();
                log_det = log_det + T::of(2.0) * l[i][i].ln();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some((l, log_det))
}

/// Gaussian models of the voiced and unvoiced feature distributions.
#[derive(Debug, Clone)]
pub struct GaussianClassModel<T> {
    pub voiced: ClassGaussian<T>,
    pub unvoiced: ClassGaussian<T>,
}

/// Fits both class models from bark features labelled by the melody contour
/// (melody frame -> voiced). Features and contour are index-aligned; excess
/// frames on either side are ignored.
pub fn fit_models<T: Scalar>(
    features: &[[T; DIM]],
    contour: &PitchContour<T>,
) -> Result<GaussianClassModel<T>, FitError> {
    let n = features.len().min(contour.len());
    let mut voiced = Vec::new();
    let mut unvoiced = Vec::new();
    for (i, x) in features.iter().enumerate().take(n) {
        if contour.is_voiced(i) {
            voiced.push(x);
        } else {
            unvoiced.push(x);
        }
    }
    if voiced.len() < MIN_CLASS_FRAMES || unvoiced.len() < MIN_CLASS_FRAMES {
        return Err(FitError::TooFewFrames {
            voiced: voiced.len(),
            unvoiced: unvoiced.len(),
        });
    }
    Ok(GaussianClassModel {
        voiced: ClassGaussian::fit(&voiced)?,
        unvoiced: ClassGaussian::fit(&unvoiced)?,
    })
}

/// Binary vocal prediction per frame: 1 iff the voiced density is at least
/// the unvoiced density. Compared in log space.
pub fn classify_frames<T: Scalar>(features: &[[T; DIM]], model: &GaussianClassModel<T>) -> Vec<bool> {
    features
        .iter()
        .map(|x| model.voiced.log_density(x) >= model.unvoiced.log_density(x))
        .collect()
}

/// Centred binary moving average spanning `window_s` seconds; a frame stays
/// set iff at least half of its (edge-truncated) window is set.
pub fn smooth_prediction(v: &[bool], window_s: f64, frame_rate_hz: f64) -> Vec<bool> {
    let half = (0.5 * window_s * frame_rate_hz).round() as usize;
    let prefix: Vec<usize> = std::iter::once(0)
        .chain(v.iter().scan(0usize, |acc, &b| {
            *acc += b as usize;
            Some(*acc)
        }))
        .collect();
    (0..v.len())
        .map(|n| {
            let lo = n.saturating_sub(half);
            let hi = (n + half + 1).min(v.len());
            let ones = prefix[hi] - prefix[lo];
            2 * ones >= hi - lo
        })
        .collect()
}

/// Deletes every contour whose frames carry no vocal prediction at all;
/// retained contours keep their f0 values untouched.
pub fn filter_contours<T: Scalar>(contour: &PitchContour<T>, vocal: &[bool]) -> PitchContour<T> {
    let mut f0 = contour.f0().to_vec();
    for span in contour.contours() {
        let any_vocal = span.frames().any(|n| vocal.get(n).copied().unwrap_or(false));
        if !any_vocal {
            for n in span.frames() {
                f0[n] = T::zero();
            }
        }
    }
    PitchContour::from_f0(f0, contour.grid())
}
