use crate::special::binary_entropy;

/// Fixed finite-size haircut in bits.
pub const DEFAULT_EPSILON_MARGIN: f64 = 100.0;

/// `floor(n·(β·(1 - h2(qber)) - i_be) - margin)`, clamped at zero.
pub fn final_key_length(n_conclusive: usize, qber: f64, i_be: f64, beta: f64, epsilon_margin: f64) -> usize {
    let per_bit = beta * (1.0 - binary_entropy(qber)) - i_be;
    let len = (n_conclusive as f64 * per_bit - epsilon_margin).floor();
    if len > 0.0 {
        len as usize
    } else {
        0
    }
}
