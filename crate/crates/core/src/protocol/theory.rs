use crate::special::erfc;

use super::ProtocolParams;

/// The two erfc terms for a Gaussian of mean `±mean` and the given variance
/// thresholded at `±x0`:
/// `q1 = erfc((x0 - mean)/sqrt(2σ²))`, `q2 = erfc((x0 + mean)/sqrt(2σ²))`.
///
/// `q1/2` is the probability of a correct conclusive bit and `q2/2` of a
/// wrong one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneTerms {
    pub q1: f64,
    pub q2: f64,
}

impl HomodyneTerms {
    pub fn pse(&self) -> f64 {
        (self.q1 + self.q2) / 2.0
    }

    pub fn qber(&self) -> f64 {
        let total = self.q1 + self.q2;
        if total > 0.0 {
            self.q2 / total
        } else {
            0.0
        }
    }

    pub fn p_correct(&self) -> f64 {
        self.q1 / 2.0
    }

    pub fn p_wrong(&self) -> f64 {
        self.q2 / 2.0
    }
}

pub fn homodyne_terms(mean: f64, variance: f64, x0: f64) -> HomodyneTerms {
    let scale = (2.0 * variance).sqrt();
    HomodyneTerms {
        q1: erfc((x0 - mean) / scale),
        q2: erfc((x0 + mean) / scale),
    }
}

fn terms(params: &ProtocolParams) -> HomodyneTerms {
    homodyne_terms(params.received_amplitude(), params.sample_variance(), params.x0)
}

/// Closed-form post-selection efficiency `(q1 + q2)/2`.
pub fn pse_theory(params: &ProtocolParams) -> f64 {
    terms(params).pse()
}

/// Closed-form bit error rate `q2/(q1 + q2)`.
pub fn qber_theory(params: &ProtocolParams) -> f64 {
    terms(params).qber()
}
