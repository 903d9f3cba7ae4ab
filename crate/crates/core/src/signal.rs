//! Uniformly sampled signals, the synthetic two-component test signal,
//! Gaussian noise injection, analytic-signal conversion and the plain-text
//! signal file format.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fft;

/// Real-valued, uniformly sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        if samples.is_empty() {
            return Err(Error::InvalidArgument("signal must have at least one sample".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of the squared samples.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.len() as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Complex-valued, uniformly sampled signal (typically analytic).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Real part as a [`Signal`].
    pub fn real_part(&self) -> Result<Signal> {
        Signal::new(self.samples.iter().map(|c| c.re).collect(), self.sample_rate)
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }
}

impl From<&Signal> for ComplexSignal {
    fn from(s: &Signal) -> Self {
        ComplexSignal {
            samples: s.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            sample_rate: s.sample_rate,
        }
    }
}

fn check_rate(sample_rate: f64) -> Result<()> {
    if sample_rate.is_finite() && sample_rate > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sample rate must be positive, got {sample_rate}")))
    }
}

/// Frequency- and amplitude-modulated component with a rapidly varying IF.
pub fn test_component_fm(t: f64) -> f64 {
    let envelope = 1.0 - 0.5 * (2.0 * PI * t).cos();
    let arg = 0.5 - (t - 0.5).abs();
    envelope * (700.0 * PI * t - 15.0 * (12.0 * PI * arg * arg).cos()).cos()
}

/// Linear chirp on `[0, 0.5)` followed by a quadratic chirp on `[0.5, 1)`.
pub fn test_component_chirps(t: f64) -> f64 {
    if t < 0.5 {
        (450.0 * PI * t - 300.0 * PI * t * t).cos()
    } else {
        (450.0 * PI * t - 600.0 * PI * t * t + 400.0 * PI * t * t * t + PI).cos()
    }
}

/// Two-component non-stationary test signal sampled at `t = n / sample_rate`.
pub fn generate_test_signal(sample_rate: f64, length: usize) -> Result<Signal> {
    check_rate(sample_rate)?;
    if length == 0 {
        return Err(Error::InvalidArgument("length must be at least 1".into()));
    }
    let samples = (0..length)
        .map(|n| {
            let t = n as f64 / sample_rate;
            test_component_fm(t) + test_component_chirps(t)
        })
        .collect();
    Signal::new(samples, sample_rate)
}

/// Harmonic downward FM chirp used when no recorded echolocation call is
/// supplied. Two harmonics under a smooth envelope, IF expressed in
/// cycles/sample so the shape is independent of the sample rate.
pub fn generate_bat_chirp(sample_rate: f64, length: usize) -> Result<Signal> {
    check_rate(sample_rate)?;
    if length < 2 {
        return Err(Error::InvalidArgument("length must be at least 2".into()));
    }
    let n_total = length as f64;
    // Hyperbolic sweep f(n) = a / (n + b) from 0.22 down to 0.09 cycles/sample.
    let (f_start, f_end) = (0.22, 0.09);
    let b = n_total * f_end / (f_start - f_end);
    let a = f_start * b;
    let samples = (0..length)
        .map(|n| {
            let n = n as f64;
            let phase = 2.0 * PI * a * ((n + b) / b).ln();
            let env = (PI * (n + 0.5) / n_total).sin().powi(2);
            env * (phase.cos() + 0.6 * (2.0 * phase).cos())
        })
        .collect();
    Signal::new(samples, sample_rate)
}

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation `sigma`,
/// deterministic for a given `seed`.
pub fn add_noise(signal: &Signal, sigma: f64, seed: u64) -> Result<Signal> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(signal.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = signal
        .samples
        .iter()
        .map(|&s| s + normal.sample(&mut rng))
        .collect();
    Signal::new(samples, signal.sample_rate)
}

/// Noise standard deviation giving `snr_db` against the measured signal power.
pub fn sigma_for_snr(signal: &Signal, snr_db: f64) -> f64 {
    (signal.power() / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// [`add_noise`] with the level set by a target SNR in dB. Returns the noisy
/// signal and the sigma used.
pub fn add_noise_snr(signal: &Signal, snr_db: f64, seed: u64) -> Result<(Signal, f64)> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument("snr_db must be finite".into()));
    }
    let sigma = sigma_for_snr(signal, snr_db);
    Ok((add_noise(signal, sigma, seed)?, sigma))
}

/// Discrete analytic signal by one-sided spectrum doubling. The real part of
/// the result equals the input.
pub fn analytic_signal(signal: &Signal) -> Result<ComplexSignal> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::InvalidArgument("analytic signal needs at least 2 samples".into()));
    }
    let mut spec: Vec<Complex64> = signal
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft::forward(&mut spec);
    let half = n / 2;
    for (k, value) in spec.iter_mut().enumerate() {
        let gain = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *value *= gain;
    }
    fft::inverse(&mut spec);
    let scale = 1.0 / n as f64;
    // The real part is exact by construction; overwrite rounding drift.
    let samples = spec
        .into_iter()
        .zip(&signal.samples)
        .map(|(c, &re)| Complex64::new(re, c.im * scale))
        .collect();
    ComplexSignal::new(samples, signal.sample_rate)
}

const RATE_HEADER: &str = "# sample_rate=";

/// Parses the one-sample-per-line text format. A leading
/// `# sample_rate=<Hz>` line sets the rate; `rate_override` wins over it.
pub fn parse_signal(text: &str, rate_override: Option<f64>) -> Result<Signal> {
    let mut header_rate = None;
    let mut samples = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if idx == 0 {
            if let Some(rest) = line.strip_prefix(RATE_HEADER) {
                let rate: f64 = rest.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad sample rate `{}`", rest.trim()),
                })?;
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "sample rate must be positive".into(),
                    });
                }
                header_rate = Some(rate);
                continue;
            }
        }
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("not a number: `{line}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: "sample is not finite".into(),
            });
        }
        samples.push(v);
    }
    if samples.is_empty() {
        return Err(Error::Parse {
            line: last_line.max(1),
            message: "no samples".into(),
        });
    }
    let rate = rate_override.or(header_rate).ok_or(Error::MissingSampleRate)?;
    Signal::new(samples, rate)
}

/// Formats a signal with the rate header and 17 significant digits per
/// sample, which round-trips every `f64` exactly.
pub fn format_signal(signal: &Signal) -> String {
    let mut out = String::with_capacity(signal.len() * 26 + 32);
    let _ = writeln!(out, "{RATE_HEADER}{:.16e}", signal.sample_rate);
    for v in &signal.samples {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn read_signal(path: impl AsRef<Path>, rate_override: Option<f64>) -> Result<Signal> {
    let text = std::fs::read_to_string(path)?;
    parse_signal(&text, rate_override)
}

pub fn write_signal(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    std::fs::write(path, format_signal(signal))?;
    Ok(())
}
