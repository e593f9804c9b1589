use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic scalar signal with values in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Constant { value: f64 },
    /// Independent uniform levels on consecutive intervals of length `dwell`.
    PiecewiseConstant { seed: u64, dwell: f64 },
    /// `sin(2π·freq·t + phase)`.
    Sinusoid { freq: f64, phase: f64 },
}

impl Signal {
    pub fn constant(value: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&value) {
            return Err(Error::validation(format!(
                "constant signal level must lie in [-1, 1], got {value}"
            )));
        }
        Ok(Signal::Constant { value })
    }

    pub fn piecewise_constant(seed: u64, dwell: f64) -> Result<Self> {
        if !(dwell > 0.0 && dwell.is_finite()) {
            return Err(Error::validation(format!("dwell must be > 0, got {dwell}")));
        }
        Ok(Signal::PiecewiseConstant { seed, dwell })
    }

    pub fn sinusoid(freq: f64, phase: f64) -> Result<Self> {
        if !(freq > 0.0 && freq.is_finite()) || !phase.is_finite() {
            return Err(Error::validation(format!(
                "sinusoid needs freq > 0 and finite phase, got ({freq}, {phase})"
            )));
        }
        Ok(Signal::Sinusoid { freq, phase })
    }

    /// Signal value at `t`, clamped to `[-1, 1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let v = match *self {
            Signal::Constant { value } => value,
            Signal::PiecewiseConstant { seed, dwell } => {
                let slot = (t.max(0.0) / dwell).floor() as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(slot);
                rng.gen_range(-1.0..=1.0)
            }
            Signal::Sinusoid { freq, phase } => (2.0 * PI * freq * t + phase).sin(),
        };
        v.clamp(-1.0, 1.0)
    }

    /// Whether the signal is continuous in `t`.
    pub fn is_continuous(&self) -> bool {
        !matches!(self, Signal::PiecewiseConstant { .. })
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Constant { value } => write!(f, "const:{value}"),
            Signal::PiecewiseConstant { seed, dwell } => write!(f, "pwc:{seed}:{dwell}"),
            Signal::Sinusoid { freq, phase } => write!(f, "sin:{freq}:{phase}"),
        }
    }
}

/// Parses `const:c`, `pwc:seed:dwell` or `sin:freq[:phase]`.
impl FromStr for Signal {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("bad number '{s}' in signal spec '{spec}'")))
        };
        match parts.as_slice() {
            ["const", c] => Signal::constant(num(c)?),
            ["pwc", seed, dwell] => {
                let seed = seed.trim().parse::<u64>().map_err(|_| {
                    Error::validation(format!("bad seed '{seed}' in signal spec '{spec}'"))
                })?;
                Signal::piecewise_constant(seed, num(dwell)?)
            }
            ["sin", freq] => Signal::sinusoid(num(freq)?, 0.0),
            ["sin", freq, phase] => Signal::sinusoid(num(freq)?, num(phase)?),
            _ => Err(Error::validation(format!(
                "signal spec '{spec}' must be const:c | pwc:seed:dwell | sin:freq[:phase]"
            ))),
        }
    }
}

/// Delay perturbation `εd(t)` acting on the nominal delay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySignal {
    pub kind: Signal,
    pub epsilon: f64,
}

impl DelaySignal {
    pub fn new(kind: Signal, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::validation(format!(
                "perturbation magnitude must be >= 0, got {epsilon}"
            )));
        }
        Ok(Self { kind, epsilon })
    }

    /// Perturbed delay `r + εd(t)`.
    pub fn delay(&self, r: f64, t: f64) -> f64 {
        r + self.epsilon * self.kind.eval(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_specs() {
        assert_eq!("const:0.5".parse::<Signal>().unwrap(), Signal::Constant { value: 0.5 });
        assert_eq!(
            "pwc:7:0.05".parse::<Signal>().unwrap(),
            Signal::PiecewiseConstant { seed: 7, dwell: 0.05 }
        );
        assert_eq!(
            "sin:0.3".parse::<Signal>().unwrap(),
            Signal::Sinusoid { freq: 0.3, phase: 0.0 }
        );
        assert!("const:2".parse::<Signal>().is_err());
        assert!("pwc:1:0".parse::<Signal>().is_err());
        assert!("square:1".parse::<Signal>().is_err());
    }

    #[test]
    fn piecewise_constant_is_deterministic_and_held() {
        let s = Signal::piecewise_constant(42, 0.25).unwrap();
        assert_eq!(s.eval(0.1), s.eval(0.2));
        assert_eq!(s.eval(1.3), Signal::piecewise_constant(42, 0.25).unwrap().eval(1.3));
        let levels: Vec<f64> = (0..20).map(|k| s.eval(0.25 * k as f64 + 0.1)).collect();
        assert!(levels.windows(2).any(|w| w[0] != w[1]));
    }

    proptest! {
        #[test]
        fn signals_stay_in_unit_interval(seed in any::<u64>(), dwell in 1e-3f64..5.0,
                                         freq in 1e-3f64..50.0, phase in -10.0f64..10.0,
                                         t in 0.0f64..1e4) {
            for s in [Signal::piecewise_constant(seed, dwell).unwrap(),
                      Signal::sinusoid(freq, phase).unwrap()] {
                let v = s.eval(t);
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
